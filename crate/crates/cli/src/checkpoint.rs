//! Parameter checkpoints.
//!
//! # File layout (little-endian)
//!
//! ```text
//! magic "LBPC" | u32 version = 1 | u8 mode (0 lidar, 1 baseline)
//! u32 W | u32 V | u32 gamma | u32 D | u32 D_e | u32 M | u32 M_e | u32 H
//! f64 max_range (scan normalizer)
//! u64 parameter count | count x f64 in the canonical group order
//! u32 echo length | echo bytes (resolved run config, TOML, UTF-8)
//! ```
//!
//! The canonical group order is the [`Parameters`] traversal of
//! `TrackerParams`: embedding, GRU (w_z, u_z, b_z, w_r, u_r, b_r, w_n, u_n,
//! b_in, b_hn), classifier. The config echo records how the checkpoint was
//! produced; `evaluate` and `opwindow` read the split settings back from it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use beamtrack_core::nn::Parameters;
use beamtrack_core::tracker::{TrackerConfig, TrackerMode, TrackerParams};
use beamtrack_core::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"LBPC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub cfg: TrackerConfig,
    /// Sensor range the training scans were normalized with.
    pub max_range: f64,
    pub params: TrackerParams,
    /// Resolved run config, TOML.
    pub config_echo: String,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    ckpt.params.validate(&ckpt.cfg)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let mode = match ckpt.cfg.mode {
        TrackerMode::Lidar => 0u8,
        TrackerMode::Baseline => 1u8,
    };
    w.write_all(&[mode])?;
    for dim in [
        ckpt.cfg.w,
        ckpt.cfg.v,
        ckpt.cfg.gamma,
        ckpt.cfg.d,
        ckpt.cfg.d_e,
        ckpt.cfg.m,
        ckpt.cfg.m_e,
        ckpt.cfg.h,
    ] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(&ckpt.max_range.to_le_bytes())?;
    w.write_all(&(ckpt.params.param_count() as u64).to_le_bytes())?;
    for (_, group) in ckpt.params.groups() {
        for &v in group {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    let echo = ckpt.config_echo.as_bytes();
    w.write_all(&(echo.len() as u32).to_le_bytes())?;
    w.write_all(echo)?;
    w.flush()?;
    Ok(())
}

struct Cursor<R: Read>(R);

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated checkpoint".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = Cursor(BufReader::new(File::open(path)?));
    let magic: [u8; 4] = r.bytes()?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"
        )));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let mode = match r.bytes::<1>()?[0] {
        0 => TrackerMode::Lidar,
        1 => TrackerMode::Baseline,
        other => return Err(Error::Format(format!("unknown mode byte {other}"))),
    };
    let mut dims = [0usize; 8];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let cfg = TrackerConfig {
        mode,
        w: dims[0],
        v: dims[1],
        gamma: dims[2],
        d: dims[3],
        d_e: dims[4],
        m: dims[5],
        m_e: dims[6],
        h: dims[7],
    };
    cfg.validate()
        .map_err(|e| Error::Format(format!("checkpoint header is inconsistent: {e}")))?;
    let max_range = f64::from_le_bytes(r.bytes()?);
    if !(max_range > 0.0) {
        return Err(Error::Format(format!("non-positive normalizer {max_range}")));
    }

    let mut params = TrackerParams::zeros(&cfg);
    let declared = u64::from_le_bytes(r.bytes()?) as usize;
    if declared != params.param_count() {
        return Err(Error::Format(format!(
            "checkpoint declares {declared} parameters, config implies {}",
            params.param_count()
        )));
    }
    for (_, group) in params.groups_mut() {
        for v in group {
            *v = f64::from_le_bytes(r.bytes()?);
            if !v.is_finite() {
                return Err(Error::Format("non-finite parameter value".into()));
            }
        }
    }

    let echo_len = r.u32()? as usize;
    let mut echo = vec![0u8; echo_len];
    r.0
        .read_exact(&mut echo)
        .map_err(|_| Error::Format("truncated checkpoint".into()))?;
    let config_echo = String::from_utf8(echo)
        .map_err(|_| Error::Format("config echo is not valid UTF-8".into()))?;
    let mut trailing = [0u8; 1];
    if r.0.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    Ok(Checkpoint { cfg, max_range, params, config_echo })
}
