//! Command implementations shared by `main`.

use std::fs;
use std::path::{Path, PathBuf};

use beamtrack_core::data::{read_dataset, split_sequences, window_all, write_dataset};
use beamtrack_core::eval::{evaluate_table, operation_window_eval, training_overhead};
use beamtrack_core::nn::grad_check;
use beamtrack_core::rng::{child_rng, STREAM_INIT, STREAM_PROBE};
use beamtrack_core::scene::{generate_dataset, SequenceRecord};
use beamtrack_core::tracker::{
    synthetic_sample, tracker_forward, tracker_loss, train, TrackerConfig, TrackerMode,
    TrackerParams,
};
use beamtrack_core::Error;

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::RunConfig;

/// Relative error above which a gradient check fails.
pub const GRADCHECK_THRESHOLD: f64 = 1e-4;
/// Finite-difference step of the gradient check.
pub const GRADCHECK_EPS: f64 = 1e-5;

/// CLI failure classes; each maps to a distinct exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: bad configuration or arguments.
    Config(String),
    /// Exit 3: malformed or inconsistent data artifacts.
    Data(String),
    /// Exit 4: a verification check failed.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Check(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Check(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult = Result<(), CliError>;

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", p.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("config error in {}: {e}", p.display())))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// `<path><suffix>` in the same directory.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

fn mode_tag(mode: TrackerMode) -> u64 {
    match mode {
        TrackerMode::Lidar => 0,
        TrackerMode::Baseline => 1,
    }
}

pub struct SimulateArgs<'a> {
    pub config: Option<&'a Path>,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub sequences: Option<usize>,
}

pub fn cmd_simulate(args: SimulateArgs) -> CliResult {
    let mut run = load_config(args.config)?;
    if let Some(seed) = args.seed {
        run.seed = seed;
    }
    if let Some(n) = args.sequences {
        run.scenario.num_sequences = n;
    }
    let scenario = run.scenario.to_scenario();
    let records = generate_dataset(&scenario, run.scenario.num_sequences, run.seed)?;
    write_dataset(args.out, &records)?;

    let steps: usize = records.iter().map(|r| r.len()).sum();
    let mut histogram = vec![0usize; scenario.num_beams];
    for rec in &records {
        for step in &rec.steps {
            histogram[step.best_index as usize - 1] += 1;
        }
    }
    println!(
        "wrote {} sequences ({steps} steps) to {}",
        records.len(),
        args.out.display()
    );
    let hist: Vec<String> = histogram
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, c)| format!("{}:{c}", i + 1))
        .collect();
    println!("label histogram (beam:count): {}", hist.join(" "));
    Ok(())
}

pub struct TrainArgs<'a> {
    pub config: Option<&'a Path>,
    pub dataset: &'a Path,
    pub mode: TrackerMode,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
}

pub fn cmd_train(args: TrainArgs) -> CliResult {
    let mut run = load_config(args.config)?;
    if let Some(seed) = args.seed {
        run.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        run.training.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        run.training.batch_size = batch;
    }
    if let Some(lr) = args.learning_rate {
        run.training.learning_rate = lr;
    }

    let records = read_dataset(args.dataset)?;
    let d = records[0].steps[0].scan.ranges.len();
    let m = records[0].steps[0].powers.len();
    let cfg = run.model.to_tracker(args.mode, d, m);
    cfg.validate()?;

    let split = run.training.to_split(run.seed);
    let (train_recs, test_recs) = split_sequences(records, &split)?;
    let max_range = run.scenario.max_range;
    let samples = window_all(&train_recs, cfg.w, cfg.v, cfg.mode, max_range)?;
    if samples.is_empty() {
        return Err(CliError::Data(format!(
            "no training windows: every train sequence is shorter than W+V = {}",
            cfg.w + cfg.v
        )));
    }

    let mut params = TrackerParams::init(&cfg, &mut child_rng(run.seed, &[STREAM_INIT, mode_tag(cfg.mode)]));
    let tc = run.training.to_train(run.seed);
    let curve = train(&mut params, &cfg, &samples, &tc)?;

    let ckpt = Checkpoint {
        cfg,
        max_range,
        params,
        config_echo: run.to_toml(),
    };
    save_checkpoint(args.out, &ckpt)?;

    let mut loss_csv = String::from("epoch,mean_loss\n");
    for (i, l) in curve.iter().enumerate() {
        loss_csv.push_str(&format!("{},{l}\n", i + 1));
    }
    let loss_path = sibling(args.out, ".loss.csv");
    write_text(&loss_path, &loss_csv)?;

    println!(
        "split: {} train / {} test sequences; {} training samples",
        train_recs.len(),
        test_recs.len(),
        samples.len()
    );
    match curve.last() {
        Some(l) => println!("final epoch mean loss: {l:.6}"),
        None => println!("no epochs requested; saved the initial parameters"),
    }
    println!(
        "checkpoint: {} ({} mode), loss curve: {}",
        args.out.display(),
        ckpt.cfg.mode.as_str(),
        loss_path.display()
    );
    Ok(())
}

fn echo_config(ckpt: &Checkpoint, what: &str) -> Result<RunConfig, CliError> {
    toml::from_str(&ckpt.config_echo)
        .map_err(|e| CliError::Data(format!("{what} carries an unreadable config echo: {e}")))
}

fn check_dataset_matches(
    records: &[SequenceRecord],
    cfg: &TrackerConfig,
) -> Result<(), CliError> {
    let d = records[0].steps[0].scan.ranges.len();
    let m = records[0].steps[0].powers.len();
    if m != cfg.m {
        return Err(CliError::Data(format!(
            "dataset has M = {m} beams, checkpoint expects {}",
            cfg.m
        )));
    }
    if cfg.mode == TrackerMode::Lidar && d != cfg.d {
        return Err(CliError::Data(format!(
            "dataset has D = {d} LiDAR bins, checkpoint expects {}",
            cfg.d
        )));
    }
    Ok(())
}

/// Which side of the sequence split to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSide {
    Train,
    Test,
}

impl SplitSide {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "train" => Ok(SplitSide::Train),
            "test" => Ok(SplitSide::Test),
            other => Err(CliError::Config(format!(
                "unknown split {other:?}, expected \"train\" or \"test\""
            ))),
        }
    }
}

fn split_side(
    records: Vec<SequenceRecord>,
    run: &RunConfig,
    side: SplitSide,
) -> Result<Vec<SequenceRecord>, CliError> {
    let (train, test) = split_sequences(records, &run.training.to_split(run.seed))?;
    Ok(match side {
        SplitSide::Train => train,
        SplitSide::Test => test,
    })
}

pub struct EvaluateArgs<'a> {
    pub checkpoint: &'a Path,
    pub dataset: &'a Path,
    pub side: SplitSide,
    pub out: &'a Path,
}

pub fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let ckpt = load_checkpoint(args.checkpoint)?;
    let run = echo_config(&ckpt, "checkpoint")?;
    let records = read_dataset(args.dataset)?;
    check_dataset_matches(&records, &ckpt.cfg)?;
    let side = split_side(records, &run, args.side)?;
    let samples = window_all(&side, ckpt.cfg.w, ckpt.cfg.v, ckpt.cfg.mode, ckpt.max_range)?;
    if samples.is_empty() {
        return Err(CliError::Data(
            "no evaluation windows: sequences are shorter than W+V".into(),
        ));
    }
    let table = evaluate_table(&ckpt.params, &ckpt.cfg, &samples, &run.evaluation.k_list)?;
    let csv = table.to_csv();
    write_text(args.out, &csv)?;
    println!(
        "top-k accuracy over {} samples ({} mode):",
        table.sample_count,
        ckpt.cfg.mode.as_str()
    );
    print!("{csv}");
    Ok(())
}

pub struct OpWindowArgs<'a> {
    pub baseline: &'a Path,
    pub lidar: &'a Path,
    pub dataset: &'a Path,
    pub side: SplitSide,
    pub l_max: Option<usize>,
    pub k: Option<usize>,
    pub out: &'a Path,
}

pub fn cmd_opwindow(args: OpWindowArgs) -> CliResult {
    let baseline = load_checkpoint(args.baseline)?;
    let lidar = load_checkpoint(args.lidar)?;
    if baseline.cfg.mode != TrackerMode::Baseline {
        return Err(CliError::Data(format!(
            "--baseline checkpoint holds a {} model",
            baseline.cfg.mode.as_str()
        )));
    }
    if lidar.cfg.mode != TrackerMode::Lidar {
        return Err(CliError::Data(format!(
            "--lidar checkpoint holds a {} model",
            lidar.cfg.mode.as_str()
        )));
    }
    let run_b = echo_config(&baseline, "baseline checkpoint")?;
    let run = echo_config(&lidar, "lidar checkpoint")?;
    if run_b.seed != run.seed
        || run_b.training.train_fraction != run.training.train_fraction
    {
        return Err(CliError::Config(
            "checkpoints were trained with different splits; evaluation would leak".into(),
        ));
    }

    let records = read_dataset(args.dataset)?;
    check_dataset_matches(&records, &lidar.cfg)?;
    check_dataset_matches(&records, &baseline.cfg)?;
    let side = split_side(records, &run, args.side)?;

    let l_max = args.l_max.unwrap_or(run.evaluation.l_max);
    let k = args.k.unwrap_or(run.evaluation.op_k);
    let curve = operation_window_eval(
        &baseline.params,
        &baseline.cfg,
        &lidar.params,
        &lidar.cfg,
        &side,
        l_max,
        k,
        lidar.max_range,
    )?;
    let csv = curve.to_csv();
    write_text(args.out, &csv)?;
    let skipped: usize = *curve.skipped.iter().max().unwrap_or(&0);
    println!("operation-window curve (top-{k}, {} sequences, max {skipped} skipped):", side.len());
    print!("{csv}");
    Ok(())
}

pub fn cmd_overhead(l: usize, w: usize, k: usize, m: usize) -> CliResult {
    let ratio = training_overhead(l, w, k, m)?;
    println!("{ratio:.4}");
    Ok(())
}

/// Deterministic probe sample for the gradient check.
fn probe_sample(cfg: &TrackerConfig, seed: u64) -> beamtrack_core::tracker::TrainingSample {
    synthetic_sample(cfg, &mut child_rng(seed, &[STREAM_PROBE, mode_tag(cfg.mode)]))
}

pub fn cmd_gradcheck(config: Option<&Path>, seed: Option<u64>) -> CliResult {
    let (run, use_config_dims) = match config {
        Some(p) => (load_config(Some(p))?, true),
        None => (RunConfig::default(), false),
    };
    let seed = seed.unwrap_or(run.seed);
    println!("gradient check: eps = {GRADCHECK_EPS:e}, threshold = {GRADCHECK_THRESHOLD:e}");

    let mut overall: f64 = 0.0;
    for mode in [TrackerMode::Lidar, TrackerMode::Baseline] {
        let cfg = if use_config_dims {
            run.model
                .to_tracker(mode, run.scenario.lidar_bins, run.scenario.beams)
        } else {
            TrackerConfig::tiny(mode)
        };
        cfg.validate()?;
        let mut params =
            TrackerParams::init(&cfg, &mut child_rng(seed, &[STREAM_INIT, mode_tag(mode)]));
        let sample = probe_sample(&cfg, seed);
        let (_, analytic) = beamtrack_core::tracker::sample_grads(&params, &cfg, &sample)?;
        let loss = |p: &TrackerParams| {
            let outputs = tracker_forward(p, &cfg, &sample).expect("probe sample is valid");
            tracker_loss(&outputs, &sample.labels, cfg.gamma).expect("probe labels are valid").0
        };
        let report = grad_check(&mut params, &analytic, GRADCHECK_EPS, loss)?;
        println!(
            "mode={} W={} V={} D={} D_e={} M={} M_e={} H={}",
            cfg.mode.as_str(),
            cfg.w,
            cfg.v,
            cfg.d,
            cfg.d_e,
            cfg.m,
            cfg.m_e,
            cfg.h
        );
        for (name, err) in &report.groups {
            println!("  {name:<22} {err:.3e}");
        }
        println!("mode={} max relative error: {:.3e}", cfg.mode.as_str(), report.max_rel_error);
        overall = overall.max(report.max_rel_error);
    }
    println!("overall max relative error: {overall:.3e}");
    if overall > GRADCHECK_THRESHOLD {
        return Err(CliError::Check(format!(
            "gradient check failed: {overall:.3e} exceeds {GRADCHECK_THRESHOLD:e}"
        )));
    }
    Ok(())
}
