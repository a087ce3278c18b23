//! Evaluation harnesses: top-k accuracy tables, the operation-window
//! experiment with recursive beam feedback, and beam-training-overhead
//! accounting.

use rayon::prelude::*;

use crate::data::{normalize_scan, window_samples};
use crate::error::{Error, Result};
use crate::scene::SequenceRecord;
use crate::tracker::{
    predict_topk, rank_beams, tracker_forward, Observations, TrackerConfig, TrackerMode,
    TrackerParams, TrainingSample,
};

/// Fraction of samples whose truth appears among the first `k` predictions.
pub fn topk_accuracy(predictions: &[Vec<u32>], truths: &[u32], k: usize) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("no predictions to score".into()));
    }
    if predictions.len() != truths.len() {
        return Err(Error::DimMismatch(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut hits = 0usize;
    for (pred, &truth) in predictions.iter().zip(truths) {
        if pred.len() < k {
            return Err(Error::DimMismatch(format!(
                "prediction list has {} entries, need at least k = {k}",
                pred.len()
            )));
        }
        if pred[..k].contains(&truth) {
            hits += 1;
        }
    }
    Ok(hits as f64 / truths.len() as f64)
}

/// Top-k accuracy per `(k, lead time)` cell over one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    pub ks: Vec<usize>,
    /// Number of lead-time columns (V + 1).
    pub outputs: usize,
    /// `acc[i][v]` = top-`ks[i]` accuracy at lead time `v`.
    pub acc: Vec<Vec<f64>>,
    pub sample_count: usize,
}

impl AccuracyTable {
    pub fn accuracy(&self, k: usize, v: usize) -> Option<f64> {
        let i = self.ks.iter().position(|&x| x == k)?;
        self.acc.get(i)?.get(v).copied()
    }

    /// One header row, fractions with 4 decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for v in 0..self.outputs {
            out.push_str(&format!(",v={v}"));
        }
        out.push('\n');
        for (i, &k) in self.ks.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in 0..self.outputs {
                out.push_str(&format!(",{:.4}", self.acc[i][v]));
            }
            out.push('\n');
        }
        out
    }
}

/// Score every sample once and fill the whole `(k, v)` grid.
pub fn evaluate_table(
    params: &TrackerParams,
    cfg: &TrackerConfig,
    samples: &[TrainingSample],
    ks: &[usize],
) -> Result<AccuracyTable> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("evaluation set has no samples".into()));
    }
    if ks.is_empty() {
        return Err(Error::EmptyInput("no k values requested".into()));
    }
    let k_max = *ks.iter().max().unwrap();
    if k_max > cfg.m {
        return Err(Error::OutOfRange(format!("k = {k_max} exceeds codebook size {}", cfg.m)));
    }
    let outputs = cfg.outputs();

    // hits[i][v] summed in sample order for determinism.
    let per_sample: Vec<Vec<Vec<bool>>> = samples
        .par_iter()
        .map(|sample| {
            let scores = tracker_forward(params, cfg, sample)?;
            let mut sample_hits = vec![vec![false; outputs]; ks.len()];
            for v in 0..outputs {
                let ranked = rank_beams(&scores[v].scores, k_max);
                let truth = sample.labels[v];
                for (i, &k) in ks.iter().enumerate() {
                    sample_hits[i][v] = ranked[..k].contains(&truth);
                }
            }
            Ok(sample_hits)
        })
        .collect::<Result<_>>()?;

    let mut acc = vec![vec![0.0; outputs]; ks.len()];
    for sample_hits in &per_sample {
        for i in 0..ks.len() {
            for v in 0..outputs {
                if sample_hits[i][v] {
                    acc[i][v] += 1.0;
                }
            }
        }
    }
    for row in &mut acc {
        for cell in row {
            *cell /= samples.len() as f64;
        }
    }
    Ok(AccuracyTable { ks: ks.to_vec(), outputs, acc, sample_count: samples.len() })
}

/// First-future-beam accuracy of both models versus operation-window length.
#[derive(Debug, Clone, PartialEq)]
pub struct OpWindowCurve {
    pub k: usize,
    /// Curve index L runs 0..=l_max; L = 0 is the standard v = 1 evaluation.
    pub lidar: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Prediction steps scored per L.
    pub evaluated: Vec<usize>,
    /// Sequences too short for one full cycle, per L.
    pub skipped: Vec<usize>,
}

impl OpWindowCurve {
    pub fn l_max(&self) -> usize {
        self.lidar.len() - 1
    }

    /// One header row, fractions with 4 decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("L,lidar,baseline,evaluated,skipped\n");
        for l in 0..self.lidar.len() {
            out.push_str(&format!(
                "{l},{:.4},{:.4},{},{}\n",
                self.lidar[l], self.baseline[l], self.evaluated[l], self.skipped[l]
            ));
        }
        out
    }
}

fn normalized_scans(seq: &SequenceRecord, max_range: f64) -> Result<Vec<Vec<f64>>> {
    seq.steps
        .iter()
        .map(|s| normalize_scan(&s.scan.ranges, max_range))
        .collect()
}

/// Per-sequence tallies for one operation-window length.
struct CycleTally {
    lidar_hits: usize,
    baseline_hits: usize,
    steps: usize,
    skipped: bool,
}

/// Walk one sequence in refresh/predict cycles for a given `L`.
///
/// Each cycle spends `W` steps refreshing the baseline's input buffer with
/// ground-truth optimal beams (exhaustive-search cost), then `L` steps
/// predicting the first future beam while feeding the baseline its own top-1
/// predictions. Accuracy is recorded during prediction steps only. The LiDAR
/// model scores the same target steps from always-fresh scans.
fn run_cycles(
    baseline: (&TrackerParams, &TrackerConfig),
    lidar: (&TrackerParams, &TrackerConfig),
    seq: &SequenceRecord,
    scans: &[Vec<f64>],
    l: usize,
    k: usize,
) -> Result<CycleTally> {
    let w = baseline.1.w;
    let n = seq.len();
    if n < w + l {
        return Ok(CycleTally { lidar_hits: 0, baseline_hits: 0, steps: 0, skipped: true });
    }
    let truths: Vec<u32> = seq.steps.iter().map(|s| s.best_index).collect();
    let mut lidar_hits = 0;
    let mut baseline_hits = 0;
    let mut steps = 0;
    let mut t0 = 0;
    while t0 + w + l <= n {
        let mut buffer: Vec<u32> = truths[t0..t0 + w].to_vec();
        for i in 1..=l {
            let target = t0 + w - 1 + i;

            let window = Observations::Beams(buffer[buffer.len() - w..].to_vec());
            let pred_b = predict_topk(baseline.0, baseline.1, &window, 1, k)?;
            if pred_b[..k].contains(&truths[target]) {
                baseline_hits += 1;
            }
            buffer.push(pred_b[0]);

            let fresh = Observations::Scans(scans[target - w..target].to_vec());
            let pred_l = predict_topk(lidar.0, lidar.1, &fresh, 1, k)?;
            if pred_l[..k].contains(&truths[target]) {
                lidar_hits += 1;
            }

            steps += 1;
        }
        t0 += w + l;
    }
    Ok(CycleTally { lidar_hits, baseline_hits, steps, skipped: false })
}

/// The operation-window experiment over `L = 0..=l_max`.
///
/// The `L = 0` column is the standard lead-time-1 evaluation (all windows,
/// ground-truth inputs); columns `L >= 1` follow the cycle protocol above.
pub fn operation_window_eval(
    baseline_params: &TrackerParams,
    baseline_cfg: &TrackerConfig,
    lidar_params: &TrackerParams,
    lidar_cfg: &TrackerConfig,
    sequences: &[SequenceRecord],
    l_max: usize,
    k: usize,
    max_range: f64,
) -> Result<OpWindowCurve> {
    if sequences.is_empty() {
        return Err(Error::EmptyInput("no sequences to evaluate".into()));
    }
    if baseline_cfg.mode != TrackerMode::Baseline || lidar_cfg.mode != TrackerMode::Lidar {
        return Err(Error::InvalidConfig("model modes are swapped or duplicated".into()));
    }
    if baseline_cfg.w != lidar_cfg.w || baseline_cfg.m != lidar_cfg.m {
        return Err(Error::InvalidConfig(
            "models must share the observation window W and codebook size M".into(),
        ));
    }
    if baseline_cfg.v < 1 || lidar_cfg.v < 1 {
        return Err(Error::InvalidConfig(
            "operation-window evaluation needs models trained with V >= 1".into(),
        ));
    }
    if k == 0 || k > baseline_cfg.m {
        return Err(Error::OutOfRange(format!("k = {k} outside 1..={}", baseline_cfg.m)));
    }
    baseline_params.validate(baseline_cfg)?;
    lidar_params.validate(lidar_cfg)?;

    let scans: Vec<Vec<Vec<f64>>> = sequences
        .iter()
        .map(|s| normalized_scans(s, max_range))
        .collect::<Result<_>>()?;

    let mut lidar_curve = Vec::with_capacity(l_max + 1);
    let mut baseline_curve = Vec::with_capacity(l_max + 1);
    let mut evaluated = Vec::with_capacity(l_max + 1);
    let mut skipped = Vec::with_capacity(l_max + 1);

    // L = 0: the standard v = 1 evaluation over every window, streamed one
    // sequence at a time.
    {
        let w = baseline_cfg.w;
        let v = baseline_cfg.v.min(lidar_cfg.v);
        let tallies: Vec<(usize, usize, usize)> = sequences
            .par_iter()
            .map(|seq| {
                let base_samples = window_samples(seq, w, v, TrackerMode::Baseline, max_range)?;
                let lidar_samples = window_samples(seq, w, v, TrackerMode::Lidar, max_range)?;
                let mut base_hits = 0;
                let mut lidar_hits = 0;
                for (b, l) in base_samples.iter().zip(&lidar_samples) {
                    let truth = b.labels[1];
                    if predict_topk(baseline_params, baseline_cfg, &b.observations, 1, k)?
                        .contains(&truth)
                    {
                        base_hits += 1;
                    }
                    if predict_topk(lidar_params, lidar_cfg, &l.observations, 1, k)?
                        .contains(&truth)
                    {
                        lidar_hits += 1;
                    }
                }
                Ok((lidar_hits, base_hits, base_samples.len()))
            })
            .collect::<Result<_>>()?;
        let total: usize = tallies.iter().map(|t| t.2).sum();
        if total == 0 {
            return Err(Error::EmptyInput(
                "every sequence is too short for one observation window".into(),
            ));
        }
        lidar_curve.push(tallies.iter().map(|t| t.0).sum::<usize>() as f64 / total as f64);
        baseline_curve.push(tallies.iter().map(|t| t.1).sum::<usize>() as f64 / total as f64);
        evaluated.push(total);
        skipped.push(0);
    }

    for l in 1..=l_max {
        let tallies: Vec<CycleTally> = sequences
            .par_iter()
            .zip(&scans)
            .map(|(seq, scans)| {
                run_cycles(
                    (baseline_params, baseline_cfg),
                    (lidar_params, lidar_cfg),
                    seq,
                    scans,
                    l,
                    k,
                )
            })
            .collect::<Result<_>>()?;
        let steps: usize = tallies.iter().map(|t| t.steps).sum();
        if steps == 0 {
            return Err(Error::EmptyInput(format!(
                "no sequence is long enough for operation window L = {l}"
            )));
        }
        lidar_curve.push(tallies.iter().map(|t| t.lidar_hits).sum::<usize>() as f64 / steps as f64);
        baseline_curve
            .push(tallies.iter().map(|t| t.baseline_hits).sum::<usize>() as f64 / steps as f64);
        evaluated.push(steps);
        skipped.push(tallies.iter().filter(|t| t.skipped).count());
    }

    Ok(OpWindowCurve {
        k,
        lidar: lidar_curve,
        baseline: baseline_curve,
        evaluated,
        skipped,
    })
}

/// Beam-training cost of the LiDAR-aided system relative to the baseline,
/// per time step, over one operation cycle.
///
/// The LiDAR side refines `k` beams every step. The baseline pays an
/// exhaustive sweep (`M` beams) on each of the `W` refresh steps and `k`
/// beams on each of the `L` prediction steps, so its per-step average is
/// `(W*M + L*k) / (W + L)`.
pub fn training_overhead(l: usize, w: usize, k: usize, m: usize) -> Result<f64> {
    if l == 0 || w == 0 || k == 0 || m == 0 {
        return Err(Error::InvalidConfig("all overhead arguments must be positive".into()));
    }
    if k > m {
        return Err(Error::OutOfRange(format!("k = {k} exceeds codebook size {m}")));
    }
    let (l, w, k, m) = (l as f64, w as f64, k as f64, m as f64);
    Ok(k * (w + l) / (w * m + l * k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_scores_one() {
        let preds = vec![vec![3, 1, 2]; 5];
        let truths = vec![3; 5];
        assert_eq!(topk_accuracy(&preds, &truths, 1).unwrap(), 1.0);
    }

    #[test]
    fn rank_boundary_is_sharp() {
        let preds = vec![vec![5, 9, 2, 7]; 4];
        let truths = vec![2; 4];
        assert_eq!(topk_accuracy(&preds, &truths, 2).unwrap(), 0.0);
        assert_eq!(topk_accuracy(&preds, &truths, 3).unwrap(), 1.0);
    }

    #[test]
    fn uniform_random_ranking_scores_k_over_m() {
        // Exact expectation: a uniformly random permutation of 1..=M puts the
        // truth in the first k slots with probability k/M.
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = crate::rng::child_rng(31, &[]);
        let m = 64u32;
        let trials = 20_000;
        let mut preds = Vec::with_capacity(trials);
        let mut truths = Vec::with_capacity(trials);
        for _ in 0..trials {
            let mut perm: Vec<u32> = (1..=m).collect();
            perm.shuffle(&mut rng);
            preds.push(perm);
            truths.push(rng.random_range(1..=m));
        }
        let acc = topk_accuracy(&preds, &truths, 5).unwrap();
        let expected = 5.0 / 64.0;
        assert!((acc - expected).abs() < 0.01, "acc {acc} vs {expected}");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(topk_accuracy(&[], &[], 1).is_err());
        assert!(topk_accuracy(&[vec![1]], &[1, 2], 1).is_err());
        assert!(topk_accuracy(&[vec![1]], &[1], 2).is_err());
    }

    #[test]
    fn overhead_reproduces_the_headline_numbers() {
        let r = training_overhead(3, 8, 5, 64).unwrap();
        assert!((r - 0.1044).abs() < 1e-4, "got {r}");
        // Top-k refinement vs exhaustive sweep: 5/64, i.e. >90% reduction.
        assert!((5.0_f64 / 64.0 - 0.0781).abs() < 1e-4);
    }

    #[test]
    fn overhead_monotonicity() {
        let (w, k, m) = (8, 5, 64);
        let mut prev = 0.0;
        for l in 1..200 {
            let r = training_overhead(l, w, k, m).unwrap();
            assert!(r > prev, "not increasing in L at {l}");
            prev = r;
        }
        // Amortizes to parity as L grows.
        assert!((training_overhead(1_000_000, w, k, m).unwrap() - 1.0).abs() < 1e-3);

        let mut prev = f64::INFINITY;
        for m in [8, 16, 32, 64, 128] {
            let r = training_overhead(3, w, k, m).unwrap();
            assert!(r < prev, "not decreasing in M at {m}");
            prev = r;
        }
    }

    #[test]
    fn overhead_rejects_degenerate_arguments() {
        assert!(training_overhead(0, 8, 5, 64).is_err());
        assert!(training_overhead(3, 8, 65, 64).is_err());
    }

    #[test]
    fn table_csv_shape() {
        let table = AccuracyTable {
            ks: vec![1, 5],
            outputs: 2,
            acc: vec![vec![0.5, 0.25], vec![0.875, 0.75]],
            sample_count: 8,
        };
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,v=0,v=1");
        assert_eq!(lines[1], "1,0.5000,0.2500");
        assert_eq!(lines[2], "5,0.8750,0.7500");
    }

    #[test]
    fn curve_csv_shape() {
        let curve = OpWindowCurve {
            k: 1,
            lidar: vec![0.9, 0.9],
            baseline: vec![0.9, 0.8],
            evaluated: vec![100, 40],
            skipped: vec![0, 2],
        };
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "L,lidar,baseline,evaluated,skipped");
        assert_eq!(lines[1], "0,0.9000,0.9000,100,0");
        assert_eq!(lines[2], "1,0.9000,0.8000,40,2");
        assert_eq!(curve.l_max(), 1);
    }
}
