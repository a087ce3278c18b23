//! Dataset persistence, leakage-free splitting, windowing, normalization.
//!
//! # Dataset file layout (little-endian)
//!
//! ```text
//! magic "LBPD" | u32 version = 1 | u32 D | u32 M | u32 sequence count
//! per sequence:
//!   u32 length L
//!   L records of: D x f32 ranges | M x f32 powers | u32 best_index (1-based)
//! ```
//!
//! A plain-text manifest accompanies each file at `<path>.manifest` (one
//! sequence per line: `index seed speed direction steps`) so external tooling
//! can enumerate sequences without parsing the binary. Datasets converted
//! from other sources may omit the manifest; sequence metadata is then
//! absent.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{child_rng, STREAM_SPLIT};
use crate::scene::{Direction, LidarScan, SequenceMeta, SequenceRecord, SequenceStep};
use crate::tracker::{Observations, TrackerMode, TrainingSample};

pub const DATASET_MAGIC: [u8; 4] = *b"LBPD";
pub const DATASET_VERSION: u32 = 1;

/// Manifest path that accompanies a dataset file.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".manifest");
    PathBuf::from(os)
}

fn dims_of(records: &[SequenceRecord]) -> Result<(u32, u32)> {
    let first = records
        .first()
        .and_then(|r| r.steps.first())
        .ok_or_else(|| Error::EmptyInput("dataset has no steps to write".into()))?;
    let d = first.scan.ranges.len() as u32;
    let m = first.powers.len() as u32;
    for (si, rec) in records.iter().enumerate() {
        if rec.is_empty() {
            return Err(Error::EmptyInput(format!("sequence {si} has no steps")));
        }
        for (ti, step) in rec.steps.iter().enumerate() {
            if step.scan.ranges.len() as u32 != d || step.powers.len() as u32 != m {
                return Err(Error::DimMismatch(format!(
                    "sequence {si} step {ti} has D={} M={}, dataset declares D={d} M={m}",
                    step.scan.ranges.len(),
                    step.powers.len()
                )));
            }
            if step.best_index == 0 || step.best_index > m {
                return Err(Error::OutOfRange(format!(
                    "sequence {si} step {ti} labels beam {} outside 1..={m}",
                    step.best_index
                )));
            }
        }
    }
    Ok((d, m))
}

/// Serialize `records` to `path` plus its sibling manifest. Byte-identical
/// for identical inputs.
pub fn write_dataset(path: &Path, records: &[SequenceRecord]) -> Result<()> {
    let (d, m) = dims_of(records)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&d.to_le_bytes())?;
    w.write_all(&m.to_le_bytes())?;
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    for rec in records {
        w.write_all(&(rec.len() as u32).to_le_bytes())?;
        for step in &rec.steps {
            for &r in &step.scan.ranges {
                w.write_all(&r.to_le_bytes())?;
            }
            for &p in &step.powers {
                w.write_all(&p.to_le_bytes())?;
            }
            w.write_all(&step.best_index.to_le_bytes())?;
        }
    }
    w.flush()?;

    let mut mf = BufWriter::new(File::create(manifest_path(path))?);
    writeln!(mf, "# index seed speed direction steps")?;
    for (i, rec) in records.iter().enumerate() {
        match &rec.meta {
            Some(meta) => writeln!(
                mf,
                "{i} {} {} {} {}",
                meta.seed,
                meta.speed,
                meta.direction.as_str(),
                rec.len()
            )?,
            None => writeln!(mf, "{i} - - - {}", rec.len())?,
        }
    }
    mf.flush()?;
    Ok(())
}

struct Cursor<R: Read> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated dataset payload".into()))?;
        Ok(u32::from_le_bytes(buf))
    }

    fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        let mut bytes = vec![0u8; 4 * n];
        self.inner
            .read_exact(&mut bytes)
            .map_err(|_| Error::Format("truncated dataset payload".into()))?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

fn read_manifest(path: &Path, count: usize) -> Result<Option<Vec<Option<SequenceMeta>>>> {
    let mpath = manifest_path(path);
    if !mpath.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&mpath)?;
    let mut metas = Vec::with_capacity(count);
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Format(format!(
                "manifest line has {} fields, expected 5: {line:?}",
                fields.len()
            )));
        }
        if fields[1] == "-" {
            metas.push(None);
            continue;
        }
        let seed: u64 = fields[1]
            .parse()
            .map_err(|_| Error::Format(format!("bad manifest seed {:?}", fields[1])))?;
        let speed: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Format(format!("bad manifest speed {:?}", fields[2])))?;
        let direction = Direction::parse(fields[3])?;
        metas.push(Some(SequenceMeta { seed, speed, direction }));
    }
    if metas.len() != count {
        return Err(Error::Format(format!(
            "manifest lists {} sequences, dataset holds {count}",
            metas.len()
        )));
    }
    Ok(Some(metas))
}

/// Read a dataset written by [`write_dataset`] (or converted externally into
/// the same layout). Restores sequence metadata from the manifest when
/// present.
pub fn read_dataset(path: &Path) -> Result<Vec<SequenceRecord>> {
    let mut r = Cursor { inner: BufReader::new(File::open(path)?) };
    let mut magic = [0u8; 4];
    r.inner
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("file too short for a dataset header".into()))?;
    if magic != DATASET_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {DATASET_MAGIC:?}"
        )));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset version {version}, expected {DATASET_VERSION}"
        )));
    }
    let d = r.u32()? as usize;
    let m = r.u32()? as usize;
    if d == 0 || m == 0 {
        return Err(Error::Format(format!("degenerate dimensions D={d} M={m}")));
    }
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(Error::Format("dataset declares zero sequences".into()));
    }
    let mut records = Vec::with_capacity(count);
    for si in 0..count {
        let len = r.u32()? as usize;
        if len == 0 {
            return Err(Error::Format(format!("sequence {si} declares zero steps")));
        }
        let mut steps = Vec::with_capacity(len);
        for ti in 0..len {
            let ranges = r.f32_vec(d)?;
            let powers = r.f32_vec(m)?;
            let best_index = r.u32()?;
            if best_index == 0 || best_index as usize > m {
                return Err(Error::Format(format!(
                    "sequence {si} step {ti} labels beam {best_index}, valid range 1..={m}"
                )));
            }
            if ranges.iter().any(|v| !v.is_finite()) || powers.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "sequence {si} step {ti} holds non-finite values"
                )));
            }
            steps.push(SequenceStep { scan: LidarScan { ranges }, powers, best_index });
        }
        records.push(SequenceRecord { steps, meta: None });
    }
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after declared payload".into()));
    }
    if let Some(metas) = read_manifest(path, count)? {
        for (rec, meta) in records.iter_mut().zip(metas) {
            rec.meta = meta;
        }
    }
    Ok(records)
}

/// Whole-sequence split specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, seed: 0 }
    }
}

/// Seeded shuffle of `0..n`, then partition: the first
/// `floor(n * fraction)` shuffled ids (clamped so both sides stay non-empty)
/// become the train side. Returned id lists preserve original order.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 sequences to split, got {n}"
        )));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut child_rng(spec.seed, &[STREAM_SPLIT]));
    let train_count = ((n as f64 * spec.train_fraction).floor() as usize).clamp(1, n - 1);
    let mut is_train = vec![false; n];
    for &i in &order[..train_count] {
        is_train[i] = true;
    }
    let train = (0..n).filter(|&i| is_train[i]).collect();
    let test = (0..n).filter(|&i| !is_train[i]).collect();
    Ok((train, test))
}

/// Split records at whole-sequence granularity into disjoint, exhaustive
/// train and test sides. Splitting happens *before* windowing, so no time
/// step can appear on both sides.
pub fn split_sequences(
    records: Vec<SequenceRecord>,
    spec: &SplitSpec,
) -> Result<(Vec<SequenceRecord>, Vec<SequenceRecord>)> {
    let (train_ids, test_ids) = split_indices(records.len(), spec)?;
    let mut slots: Vec<Option<SequenceRecord>> = records.into_iter().map(Some).collect();
    let take = |ids: &[usize], slots: &mut Vec<Option<SequenceRecord>>| {
        ids.iter().map(|&i| slots[i].take().expect("split ids are disjoint")).collect()
    };
    let train = take(&train_ids, &mut slots);
    let test = take(&test_ids, &mut slots);
    Ok((train, test))
}

/// Number of windows a sequence of length `len` yields.
pub fn window_count(len: usize, w: usize, v: usize) -> usize {
    (len + 1).saturating_sub(w + v)
}

/// Elementwise division by the sensor range, mapping a scan into `[0, 1]^D`.
///
/// The divisor is the dataset-precision sensor range (`max_range as f32`), so
/// a no-hit bin maps to exactly 1.0.
pub fn normalize_scan(ranges: &[f32], max_range: f64) -> Result<Vec<f64>> {
    let mr = max_range as f32;
    if !(mr > 0.0) {
        return Err(Error::InvalidConfig(format!("max_range must be positive, got {max_range}")));
    }
    let mut out = Vec::with_capacity(ranges.len());
    for (i, &r) in ranges.iter().enumerate() {
        if !r.is_finite() || r <= 0.0 || r > mr {
            return Err(Error::OutOfRange(format!(
                "scan bin {i} holds {r}, expected a range in (0, {mr}]"
            )));
        }
        out.push(r as f64 / mr as f64);
    }
    Ok(out)
}

/// Slide a width-`W` window over one sequence with stride 1.
///
/// Each offset `o` in `0..=len-(W+V)` yields one sample: the `W` observations
/// at steps `o..o+W` (normalized scans in LiDAR mode, optimal beam indices in
/// baseline mode) and the `V + 1` labels at steps `o+W-1..=o+W-1+V`. Short
/// sequences yield an empty list.
pub fn window_samples(
    seq: &SequenceRecord,
    w: usize,
    v: usize,
    mode: TrackerMode,
    max_range: f64,
) -> Result<Vec<TrainingSample>> {
    if w == 0 {
        return Err(Error::InvalidConfig("window width must be at least 1".into()));
    }
    let count = window_count(seq.len(), w, v);
    if count == 0 {
        return Ok(Vec::new());
    }
    let normalized: Option<Vec<Vec<f64>>> = match mode {
        TrackerMode::Lidar => Some(
            seq.steps
                .iter()
                .map(|s| normalize_scan(&s.scan.ranges, max_range))
                .collect::<Result<_>>()?,
        ),
        TrackerMode::Baseline => None,
    };
    let mut samples = Vec::with_capacity(count);
    for o in 0..count {
        let observations = match mode {
            TrackerMode::Lidar => Observations::Scans(
                normalized.as_ref().unwrap()[o..o + w].to_vec(),
            ),
            TrackerMode::Baseline => Observations::Beams(
                seq.steps[o..o + w].iter().map(|s| s.best_index).collect(),
            ),
        };
        let labels = (0..=v).map(|lead| seq.steps[o + w - 1 + lead].best_index).collect();
        samples.push(TrainingSample { observations, labels });
    }
    Ok(samples)
}

/// Window every sequence and concatenate the samples.
pub fn window_all(
    records: &[SequenceRecord],
    w: usize,
    v: usize,
    mode: TrackerMode,
    max_range: f64,
) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for rec in records {
        out.extend(window_samples(rec, w, v, mode, max_range)?);
    }
    Ok(out)
}
