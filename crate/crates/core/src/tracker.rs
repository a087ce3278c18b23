//! Beam prediction and tracking sequence models.
//!
//! Both models share one architecture: an embedding block, a single GRU cell
//! whose parameters are tied across all unrolled steps, and an affine
//! classifier with softmax output. A sample is unrolled over `W + V` steps
//! from an all-zero hidden state: the first `W` inputs are embedded
//! observations, the last `V` are zero vectors in embedding space, and the
//! classifier fires at the last `V + 1` steps, producing score vectors for
//! lead times `0..=V`.
//!
//! Modes differ only in the observation type and its embedding:
//! - `Lidar`: a normalized D-bin range scan per step, embedded by an affine
//!   `D -> D_e` projection.
//! - `Baseline`: the 1-based optimal beam index per step, embedded through a
//!   look-up table whose row 0 is a frozen zero pad row.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy_from_probs, dense_backward, dense_forward, embed_backward, embed_lookup,
    gru_cell_backward, gru_cell_forward, softmax, AdamConfig, AdamState, DenseParams,
    EmbeddingTable, GruCache, GruParams, Parameters,
};
use crate::rng::{child_rng, STREAM_SHUFFLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerMode {
    /// Observations are LiDAR range scans.
    Lidar,
    /// Observations are previously used (optimal) beam indices.
    Baseline,
}

impl TrackerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackerMode::Lidar => "lidar",
            TrackerMode::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lidar" => Ok(TrackerMode::Lidar),
            "baseline" => Ok(TrackerMode::Baseline),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode {other:?}, expected \"lidar\" or \"baseline\""
            ))),
        }
    }
}

/// Model dimensions and unrolling lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackerConfig {
    pub mode: TrackerMode,
    /// Observation window W.
    pub w: usize,
    /// Maximum lead time V.
    pub v: usize,
    /// Loss window: the last `gamma` of the `V + 1` outputs are supervised.
    pub gamma: usize,
    /// LiDAR bins D.
    pub d: usize,
    /// LiDAR embedding width D_e.
    pub d_e: usize,
    /// Codebook size M.
    pub m: usize,
    /// Beam embedding width M_e.
    pub m_e: usize,
    /// GRU hidden size H.
    pub h: usize,
}

impl TrackerConfig {
    /// Paper-shaped defaults for a given dataset geometry.
    pub fn standard(mode: TrackerMode, d: usize, m: usize) -> Self {
        Self { mode, w: 8, v: 3, gamma: 4, d, d_e: 64, m, m_e: 64, h: 64 }
    }

    /// The tiny configuration used by the gradient-fidelity check.
    pub fn tiny(mode: TrackerMode) -> Self {
        Self { mode, w: 3, v: 1, gamma: 2, d: 16, d_e: 8, m: 8, m_e: 8, h: 8 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w < 1 {
            return Err(Error::InvalidConfig("observation window W must be at least 1".into()));
        }
        if self.gamma < 1 || self.gamma > self.v + 1 {
            return Err(Error::InvalidConfig(format!(
                "loss window gamma must lie in [1, V+1] = [1, {}], got {}",
                self.v + 1,
                self.gamma
            )));
        }
        if self.d == 0 || self.d_e == 0 || self.m < 2 || self.m_e == 0 || self.h == 0 {
            return Err(Error::InvalidConfig("model dimensions must be positive (M >= 2)".into()));
        }
        Ok(())
    }

    /// Width of the embedded input the GRU consumes.
    pub fn embed_dim(&self) -> usize {
        match self.mode {
            TrackerMode::Lidar => self.d_e,
            TrackerMode::Baseline => self.m_e,
        }
    }

    /// Unrolled sequence length W + V.
    pub fn unroll_len(&self) -> usize {
        self.w + self.v
    }

    /// Number of classifier outputs V + 1.
    pub fn outputs(&self) -> usize {
        self.v + 1
    }
}

/// The embedding block of one model.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbedParams {
    /// Affine projection for LiDAR scans.
    Linear(DenseParams),
    /// Look-up table for beam indices; row 0 is the frozen pad row.
    Table(EmbeddingTable),
}

/// All trainable parameters of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerParams {
    pub embed: EmbedParams,
    pub gru: GruParams,
    pub classifier: DenseParams,
}

impl TrackerParams {
    pub fn zeros(cfg: &TrackerConfig) -> Self {
        let embed = match cfg.mode {
            TrackerMode::Lidar => EmbedParams::Linear(DenseParams::zeros(cfg.d, cfg.d_e)),
            TrackerMode::Baseline => EmbedParams::Table(EmbeddingTable::zeros(cfg.m + 1, cfg.m_e)),
        };
        Self {
            embed,
            gru: GruParams::zeros(cfg.embed_dim(), cfg.h),
            classifier: DenseParams::zeros(cfg.h, cfg.m),
        }
    }

    /// Seeded initialization; draw order is fixed (embed, GRU, classifier).
    pub fn init(cfg: &TrackerConfig, rng: &mut ChaCha8Rng) -> Self {
        let embed = match cfg.mode {
            TrackerMode::Lidar => EmbedParams::Linear(DenseParams::init(cfg.d, cfg.d_e, rng)),
            TrackerMode::Baseline => {
                EmbedParams::Table(EmbeddingTable::init(cfg.m + 1, cfg.m_e, rng))
            }
        };
        Self {
            embed,
            gru: GruParams::init(cfg.embed_dim(), cfg.h, rng),
            classifier: DenseParams::init(cfg.h, cfg.m, rng),
        }
    }

    /// Check that shapes agree with `cfg`.
    pub fn validate(&self, cfg: &TrackerConfig) -> Result<()> {
        let embed_ok = match (&self.embed, cfg.mode) {
            (EmbedParams::Linear(d), TrackerMode::Lidar) => {
                d.input_dim() == cfg.d && d.output_dim() == cfg.d_e
            }
            (EmbedParams::Table(t), TrackerMode::Baseline) => {
                t.rows() == cfg.m + 1 && t.dim() == cfg.m_e
            }
            _ => false,
        };
        if !embed_ok
            || self.gru.input_dim() != cfg.embed_dim()
            || self.gru.hidden_dim() != cfg.h
            || self.classifier.input_dim() != cfg.h
            || self.classifier.output_dim() != cfg.m
        {
            return Err(Error::DimMismatch("parameters do not match tracker config".into()));
        }
        Ok(())
    }
}

impl Parameters for TrackerParams {
    fn groups(&self) -> Vec<(String, &[f64])> {
        let mut groups: Vec<(String, &[f64])> = match &self.embed {
            EmbedParams::Linear(d) => d
                .groups()
                .into_iter()
                .map(|(n, s)| (format!("embed.{n}"), s))
                .collect(),
            EmbedParams::Table(t) => t
                .groups()
                .into_iter()
                .map(|(n, s)| (format!("embed.{n}"), s))
                .collect(),
        };
        groups.extend(self.gru.groups().into_iter().map(|(n, s)| (format!("gru.{n}"), s)));
        groups.extend(
            self.classifier
                .groups()
                .into_iter()
                .map(|(n, s)| (format!("classifier.{n}"), s)),
        );
        groups
    }

    fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut groups: Vec<(String, &mut [f64])> = match &mut self.embed {
            EmbedParams::Linear(d) => d
                .groups_mut()
                .into_iter()
                .map(|(n, s)| (format!("embed.{n}"), s))
                .collect(),
            EmbedParams::Table(t) => t
                .groups_mut()
                .into_iter()
                .map(|(n, s)| (format!("embed.{n}"), s))
                .collect(),
        };
        groups.extend(
            self.gru
                .groups_mut()
                .into_iter()
                .map(|(n, s)| (format!("gru.{n}"), s)),
        );
        groups.extend(
            self.classifier
                .groups_mut()
                .into_iter()
                .map(|(n, s)| (format!("classifier.{n}"), s)),
        );
        groups
    }
}

/// The observed history of one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    /// W normalized scans, each of length D.
    Scans(Vec<Vec<f64>>),
    /// W 1-based beam indices.
    Beams(Vec<u32>),
}

impl Observations {
    pub fn len(&self) -> usize {
        match self {
            Observations::Scans(s) => s.len(),
            Observations::Beams(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One training/evaluation sample: W observations plus the `V + 1` optimal
/// beam labels (1-based) for lead times `0..=V`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub observations: Observations,
    pub labels: Vec<u32>,
}

/// Softmax scores over the M beams; sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
}

fn check_observations(cfg: &TrackerConfig, obs: &Observations) -> Result<()> {
    if obs.len() != cfg.w {
        return Err(Error::DimMismatch(format!(
            "expected {} observations, got {}",
            cfg.w,
            obs.len()
        )));
    }
    match (obs, cfg.mode) {
        (Observations::Scans(scans), TrackerMode::Lidar) => {
            for (i, s) in scans.iter().enumerate() {
                if s.len() != cfg.d {
                    return Err(Error::DimMismatch(format!(
                        "scan {i} has {} bins, model expects {}",
                        s.len(),
                        cfg.d
                    )));
                }
            }
            Ok(())
        }
        (Observations::Beams(beams), TrackerMode::Baseline) => {
            for (i, &b) in beams.iter().enumerate() {
                if b == 0 || b as usize > cfg.m {
                    return Err(Error::OutOfRange(format!(
                        "observation {i} holds beam index {b}, valid range is 1..={}",
                        cfg.m
                    )));
                }
            }
            Ok(())
        }
        _ => Err(Error::InvalidConfig(format!(
            "observation type does not match {} mode",
            cfg.mode.as_str()
        ))),
    }
}

/// Everything backward needs from one forward unroll.
struct ForwardTrace {
    caches: Vec<GruCache>,
}

fn embed_step(params: &TrackerParams, obs: &Observations, step: usize) -> Result<Vec<f64>> {
    match (&params.embed, obs) {
        (EmbedParams::Linear(p), Observations::Scans(scans)) => dense_forward(p, &scans[step]),
        (EmbedParams::Table(t), Observations::Beams(beams)) => {
            Ok(embed_lookup(t, beams[step] as usize)?.to_vec())
        }
        _ => Err(Error::InvalidConfig("embedding type does not match observations".into())),
    }
}

fn forward_trace(
    params: &TrackerParams,
    cfg: &TrackerConfig,
    obs: &Observations,
) -> Result<(Vec<ScoreVector>, ForwardTrace)> {
    cfg.validate()?;
    params.validate(cfg)?;
    check_observations(cfg, obs)?;

    let mut h = vec![0.0; cfg.h];
    let mut caches = Vec::with_capacity(cfg.unroll_len());
    let mut outputs = Vec::with_capacity(cfg.outputs());
    for step in 0..cfg.unroll_len() {
        let x = if step < cfg.w {
            embed_step(params, obs, step)?
        } else {
            vec![0.0; cfg.embed_dim()] // padding: zero vector in embedding space
        };
        let cache = gru_cell_forward(&params.gru, &x, &h)?;
        h = cache.h_next.clone();
        if step + 1 >= cfg.w {
            let logits = dense_forward(&params.classifier, &h)?;
            outputs.push(ScoreVector { scores: softmax(&logits) });
        }
        caches.push(cache);
    }
    Ok((outputs, ForwardTrace { caches }))
}

/// Run the model over one sample and return the `V + 1` score vectors for
/// lead times `0..=V`, in order. Label fields are never read.
pub fn tracker_forward(
    params: &TrackerParams,
    cfg: &TrackerConfig,
    sample: &TrainingSample,
) -> Result<Vec<ScoreVector>> {
    Ok(forward_trace(params, cfg, &sample.observations)?.0)
}

/// Mean cross-entropy over the last `gamma` outputs.
///
/// Returns the loss and one gradient vector per output with respect to the
/// classifier logits; the first `V + 1 - gamma` outputs carry exact zeros.
pub fn tracker_loss(
    outputs: &[ScoreVector],
    labels: &[u32],
    gamma: usize,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if outputs.is_empty() {
        return Err(Error::EmptyInput("no model outputs".into()));
    }
    if labels.len() != outputs.len() {
        return Err(Error::DimMismatch(format!(
            "{} labels for {} outputs",
            labels.len(),
            outputs.len()
        )));
    }
    if gamma < 1 || gamma > outputs.len() {
        return Err(Error::OutOfRange(format!(
            "loss window {gamma} outside [1, {}]",
            outputs.len()
        )));
    }
    let first_supervised = outputs.len() - gamma;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(outputs.len());
    for (i, (out, &label)) in outputs.iter().zip(labels).enumerate() {
        let m = out.scores.len();
        if label == 0 || label as usize > m {
            return Err(Error::OutOfRange(format!(
                "label {label} outside the 1..={m} beam range"
            )));
        }
        if i < first_supervised {
            grads.push(vec![0.0; m]);
            continue;
        }
        let (l, mut dlogits) = cross_entropy_from_probs(&out.scores, label as usize - 1)?;
        loss += l;
        for d in &mut dlogits {
            *d /= gamma as f64;
        }
        grads.push(dlogits);
    }
    Ok((loss / gamma as f64, grads))
}

/// Backpropagate through the unrolled model given per-output logit gradients.
fn backward(
    params: &TrackerParams,
    cfg: &TrackerConfig,
    obs: &Observations,
    trace: &ForwardTrace,
    dlogits: &[Vec<f64>],
    grads: &mut TrackerParams,
) -> Result<()> {
    let mut dh = vec![0.0; cfg.h];
    for step in (0..cfg.unroll_len()).rev() {
        if step + 1 >= cfg.w {
            let out_idx = step + 1 - cfg.w;
            let d = &dlogits[out_idx];
            let dh_from_clf = dense_backward(
                &params.classifier,
                &trace.caches[step].h_next,
                d,
                &mut grads.classifier,
            )?;
            for (a, b) in dh.iter_mut().zip(&dh_from_clf) {
                *a += b;
            }
        }
        let (dx, dh_prev) =
            gru_cell_backward(&params.gru, &trace.caches[step], &dh, &mut grads.gru)?;
        if step < cfg.w {
            match (&mut grads.embed, obs) {
                (EmbedParams::Linear(g), Observations::Scans(scans)) => {
                    let embed_params = match &params.embed {
                        EmbedParams::Linear(p) => p,
                        EmbedParams::Table(_) => unreachable!("validated above"),
                    };
                    dense_backward(embed_params, &scans[step], &dx, g)?;
                }
                (EmbedParams::Table(g), Observations::Beams(beams)) => {
                    embed_backward(beams[step] as usize, &dx, g)?;
                }
                _ => return Err(Error::InvalidConfig("embedding/observation mismatch".into())),
            }
        }
        // Padding steps feed constants; their dx is discarded.
        dh = dh_prev;
    }
    Ok(())
}

/// Forward + loss + backward for one sample. Returns the loss and the
/// parameter gradients.
pub fn sample_grads(
    params: &TrackerParams,
    cfg: &TrackerConfig,
    sample: &TrainingSample,
) -> Result<(f64, TrackerParams)> {
    if sample.labels.len() != cfg.outputs() {
        return Err(Error::DimMismatch(format!(
            "sample has {} labels, model produces {} outputs",
            sample.labels.len(),
            cfg.outputs()
        )));
    }
    let (outputs, trace) = forward_trace(params, cfg, &sample.observations)?;
    let (loss, dlogits) = tracker_loss(&outputs, &sample.labels, cfg.gamma)?;
    let mut grads = TrackerParams::zeros(cfg);
    backward(params, cfg, &sample.observations, &trace, &dlogits, &mut grads)?;
    Ok((loss, grads))
}

/// Training-loop settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Multiplicative per-epoch learning-rate decay (1.0 = constant).
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            seed: 0,
            adam: AdamConfig::default(),
            lr_decay: 1.0,
        }
    }
}

/// Mini-batch gradient descent with Adam and a seeded per-epoch shuffle.
///
/// Per-sample gradients within a batch are computed in parallel but reduced
/// in sample order, so results are bit-identical regardless of thread count.
/// Returns the per-epoch mean training loss.
pub fn train(
    params: &mut TrackerParams,
    cfg: &TrackerConfig,
    samples: &[TrainingSample],
    tc: &TrainConfig,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("training set has no samples".into()));
    }
    if tc.batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    if !(tc.lr_decay > 0.0 && tc.lr_decay <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "lr_decay must lie in (0, 1], got {}",
            tc.lr_decay
        )));
    }
    tc.adam.validate()?;
    cfg.validate()?;
    params.validate(cfg)?;

    let mut adam = AdamState::new(params.param_count());
    let mut curve = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        let adam_cfg = AdamConfig {
            lr: tc.adam.lr * tc.lr_decay.powi(epoch as i32),
            ..tc.adam
        };
        let mut order: Vec<usize> = (0..samples.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut child_rng(tc.seed, &[STREAM_SHUFFLE, epoch as u64]));

        let mut epoch_loss = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let results: Vec<(f64, TrackerParams)> = batch
                .par_iter()
                .map(|&i| sample_grads(params, cfg, &samples[i]))
                .collect::<Result<_>>()?;
            let mut grads = TrackerParams::zeros(cfg);
            for (loss, g) in &results {
                epoch_loss += loss;
                grads.add_scaled(g, 1.0)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&adam_cfg, params, &grads)?;
        }
        curve.push(epoch_loss / samples.len() as f64);
    }
    Ok(curve)
}

/// Draw a well-formed random sample for the given config: scans uniform in
/// (0, 1]^D or beams uniform in 1..=M, with uniform labels. Used by gradient
/// checking and smoke tests.
pub fn synthetic_sample(cfg: &TrackerConfig, rng: &mut ChaCha8Rng) -> TrainingSample {
    use rand::Rng;
    let observations = match cfg.mode {
        TrackerMode::Lidar => Observations::Scans(
            (0..cfg.w)
                .map(|_| (0..cfg.d).map(|_| rng.random_range(0.02..=1.0)).collect())
                .collect(),
        ),
        TrackerMode::Baseline => Observations::Beams(
            (0..cfg.w).map(|_| rng.random_range(1..=cfg.m as u32)).collect(),
        ),
    };
    let labels = (0..=cfg.v).map(|_| rng.random_range(1..=cfg.m as u32)).collect();
    TrainingSample { observations, labels }
}

/// Rank beams by score, descending; ties go to the lowest index. Returns
/// 1-based beam indices.
pub fn rank_beams(scores: &[f64], k: usize) -> Vec<u32> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(&b))
    });
    order.truncate(k);
    order.into_iter().map(|i| i as u32 + 1).collect()
}

/// The `k` most promising beams for lead time `v`, best first (1-based).
pub fn predict_topk(
    params: &TrackerParams,
    cfg: &TrackerConfig,
    observations: &Observations,
    v: usize,
    k: usize,
) -> Result<Vec<u32>> {
    if v > cfg.v {
        return Err(Error::OutOfRange(format!("lead time {v} beyond maximum {}", cfg.v)));
    }
    if k == 0 || k > cfg.m {
        return Err(Error::OutOfRange(format!("k = {k} outside 1..={}", cfg.m)));
    }
    let (outputs, _) = forward_trace(params, cfg, observations)?;
    Ok(rank_beams(&outputs[v].scores, k))
}
