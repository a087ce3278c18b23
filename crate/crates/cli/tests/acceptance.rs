//! Acceptance suite.
//!
//! One test per criterion; each prints a `criterion N: PASS ...` line (run
//! with `--nocapture` to see them). Criteria 5-9 share one full pipeline run
//! (dataset, training, tables, operation-window curve) built lazily behind a
//! `OnceLock`.

use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use beamtrack_cli::checkpoint::{save_checkpoint, Checkpoint};
use beamtrack_cli::config::RunConfig;
use beamtrack_core::beam::{
    array_response, generate_codebook, measure_power_vector, optimal_beam_index, receive_power,
    SignalConfig,
};
use beamtrack_core::data::{
    manifest_path, split_indices, split_sequences, window_all, window_count, window_samples,
    write_dataset,
};
use beamtrack_core::eval::{
    evaluate_table, operation_window_eval, training_overhead, AccuracyTable, OpWindowCurve,
};
use beamtrack_core::nn::{gru_cell_forward, softmax, softmax_cross_entropy, GruParams};
use beamtrack_core::rng::{child_rng, STREAM_INIT};
use beamtrack_core::scene::{generate_dataset, ScenarioConfig, SequenceRecord};
use beamtrack_core::tracker::{
    train, TrackerConfig, TrackerMode, TrackerParams, TrainConfig,
};

const KS: [usize; 4] = [1, 2, 3, 5];
/// Fresh sequences drawn for the operation-window experiment; the 40-sequence
/// test split alone gives too few prediction steps per column for a
/// 2-percentage-point comparison.
const OPWINDOW_SEQUENCES: usize = 500;
const OPWINDOW_SEED: u64 = 1007;

struct Pipeline {
    _dir: tempfile::TempDir,
    run: RunConfig,
    scenario: ScenarioConfig,
    dataset_path: PathBuf,
    train_recs: Vec<SequenceRecord>,
    test_recs: Vec<SequenceRecord>,
    lidar: Checkpoint,
    baseline: Checkpoint,
    lidar_ckpt_path: PathBuf,
    baseline_ckpt_path: PathBuf,
    lidar_table: AccuracyTable,
    lidar_table_train: AccuracyTable,
    baseline_table: AccuracyTable,
    curve: OpWindowCurve,
    table_csv_path: PathBuf,
    curve_csv_path: PathBuf,
    train_seconds: f64,
}

static PIPELINE: OnceLock<Pipeline> = OnceLock::new();

fn train_one(
    run: &RunConfig,
    mode: TrackerMode,
    records_train: &[SequenceRecord],
    epochs: usize,
) -> (TrackerConfig, TrackerParams, Vec<f64>) {
    let scenario = run.scenario.to_scenario();
    let cfg = run.model.to_tracker(mode, scenario.d, scenario.num_beams);
    let samples = window_all(records_train, cfg.w, cfg.v, cfg.mode, scenario.max_range)
        .expect("training windows");
    let mode_tag = match mode {
        TrackerMode::Lidar => 0,
        TrackerMode::Baseline => 1,
    };
    let mut params =
        TrackerParams::init(&cfg, &mut child_rng(run.seed, &[STREAM_INIT, mode_tag]));
    let tc = TrainConfig { epochs, ..run.training.to_train(run.seed) };
    let curve = train(&mut params, &cfg, &samples, &tc).expect("training");
    (cfg, params, curve)
}

fn pipeline() -> &'static Pipeline {
    PIPELINE.get_or_init(|| {
        let start = Instant::now();
        let dir = tempfile::tempdir().expect("tempdir");
        let run = RunConfig::default();
        let scenario = run.scenario.to_scenario();

        let records = generate_dataset(&scenario, run.scenario.num_sequences, run.seed)
            .expect("dataset generation");
        let dataset_path = dir.path().join("dataset.lbpd");
        write_dataset(&dataset_path, &records).expect("dataset write");

        let (train_recs, test_recs) =
            split_sequences(records, &run.training.to_split(run.seed)).expect("split");

        let (lidar_cfg, lidar_params, _) =
            train_one(&run, TrackerMode::Lidar, &train_recs, run.training.epochs);
        let (base_cfg, base_params, _) =
            train_one(&run, TrackerMode::Baseline, &train_recs, run.training.epochs);

        let lidar = Checkpoint {
            cfg: lidar_cfg,
            max_range: scenario.max_range,
            params: lidar_params,
            config_echo: run.to_toml(),
        };
        let baseline = Checkpoint {
            cfg: base_cfg,
            max_range: scenario.max_range,
            params: base_params,
            config_echo: run.to_toml(),
        };
        let lidar_ckpt_path = dir.path().join("lidar.lbpc");
        let baseline_ckpt_path = dir.path().join("baseline.lbpc");
        save_checkpoint(&lidar_ckpt_path, &lidar).expect("save lidar checkpoint");
        save_checkpoint(&baseline_ckpt_path, &baseline).expect("save baseline checkpoint");

        let test_lidar =
            window_all(&test_recs, lidar.cfg.w, lidar.cfg.v, TrackerMode::Lidar, scenario.max_range)
                .expect("test windows");
        let test_base = window_all(
            &test_recs,
            baseline.cfg.w,
            baseline.cfg.v,
            TrackerMode::Baseline,
            scenario.max_range,
        )
        .expect("test windows");
        let train_lidar = window_all(
            &train_recs,
            lidar.cfg.w,
            lidar.cfg.v,
            TrackerMode::Lidar,
            scenario.max_range,
        )
        .expect("train windows");

        let lidar_table =
            evaluate_table(&lidar.params, &lidar.cfg, &test_lidar, &KS).expect("lidar table");
        let lidar_table_train = evaluate_table(&lidar.params, &lidar.cfg, &train_lidar, &KS)
            .expect("lidar train table");
        let baseline_table =
            evaluate_table(&baseline.params, &baseline.cfg, &test_base, &KS).expect("baseline table");

        let train_seconds = start.elapsed().as_secs_f64();

        // Fresh, never-trained-on sequences for the operation-window curve.
        let eval_recs = generate_dataset(&scenario, OPWINDOW_SEQUENCES, OPWINDOW_SEED)
            .expect("opwindow sequences");
        let curve = operation_window_eval(
            &baseline.params,
            &baseline.cfg,
            &lidar.params,
            &lidar.cfg,
            &eval_recs,
            run.evaluation.l_max,
            run.evaluation.op_k,
            scenario.max_range,
        )
        .expect("operation-window curve");

        let table_csv_path = dir.path().join("accuracy.csv");
        let curve_csv_path = dir.path().join("opwindow.csv");
        std::fs::write(&table_csv_path, lidar_table.to_csv()).expect("table csv");
        std::fs::write(&curve_csv_path, curve.to_csv()).expect("curve csv");

        Pipeline {
            _dir: dir,
            run,
            scenario,
            dataset_path,
            train_recs,
            test_recs,
            lidar,
            baseline,
            lidar_ckpt_path,
            baseline_ckpt_path,
            lidar_table,
            lidar_table_train,
            baseline_table,
            curve,
            table_csv_path,
            curve_csv_path,
            train_seconds,
        }
    })
}

#[test]
fn criterion_1_overhead_formula() {
    let ratio = training_overhead(3, 8, 5, 64).unwrap();
    assert!(
        (ratio - 0.1044).abs() <= 1e-4,
        "criterion 1: FAIL - overhead(3,8,5,64) = {ratio:.6}"
    );
    let per_step = 5.0_f64 / 64.0;
    assert!(
        (per_step - 0.0781).abs() <= 1e-4,
        "criterion 1: FAIL - top-5 per-step ratio = {per_step:.6}"
    );
    assert!(per_step < 0.10, "criterion 1: FAIL - reduction below 90%");
    println!(
        "criterion 1: PASS - overhead(3,8,5,64) = {ratio:.4}, top-5 sweep ratio = {per_step:.4}"
    );
}

#[test]
fn criterion_2_gradient_fidelity_via_cli() {
    let out = Command::new(env!("CARGO_BIN_EXE_beamtrack"))
        .arg("gradcheck")
        .output()
        .expect("gradcheck runs");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "criterion 2: FAIL - gradcheck exit {:?}\n{text}",
        out.status.code()
    );
    let overall: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("overall max relative error: "))
        .expect("gradcheck reports an overall error")
        .trim()
        .parse()
        .expect("parsable error value");
    assert!(
        overall < 1e-4,
        "criterion 2: FAIL - max relative error {overall:e}"
    );
    println!("criterion 2: PASS - gradcheck exit 0, max relative error {overall:.3e}");
}

#[test]
fn criterion_3_oracle_equivalence() {
    let n = 16;
    let cb = generate_codebook(n, 64, (-(60f64.to_radians()), 60f64.to_radians()), 1.0).unwrap();
    let cfg = SignalConfig::default(); // noiseless
    let mut rng = child_rng(303, &[]);

    for trial in 0..1000 {
        let h: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let powers: Vec<f64> = (0..cb.len())
            .map(|i| receive_power(&h, cb.beam(i), &cfg, None).unwrap())
            .collect();
        // Independent oracle: brute-force linear scan.
        let mut best = 0;
        for i in 1..powers.len() {
            if powers[i] > powers[best] {
                best = i;
            }
        }
        assert_eq!(
            optimal_beam_index(&powers).unwrap(),
            best + 1,
            "criterion 3: FAIL - disagreement on trial {trial}"
        );
    }

    for m in 0..cb.len() {
        let h: Vec<Complex64> = array_response(cb.steering_angle(m), n, 1.0)
            .unwrap()
            .into_iter()
            .map(|e| e * (n as f64).sqrt())
            .collect();
        let pv = measure_power_vector(&h, &cb, &cfg, &mut rng).unwrap();
        assert_eq!(
            optimal_beam_index(&pv).unwrap(),
            m + 1,
            "criterion 3: FAIL - matched steering missed beam {}",
            m + 1
        );
    }
    println!("criterion 3: PASS - 1000 random channels agree with brute force; all 64 matched-steering beams recovered");
}

#[test]
fn criterion_4_algebraic_identities() {
    // Zero-parameter GRU halves the state exactly (bit-for-bit).
    let p = GruParams::zeros(5, 3);
    let h = [0.7, -1.9, 3.25];
    let cache = gru_cell_forward(&p, &[0.2, -0.4, 0.0, 1.0, -2.0], &h).unwrap();
    for (next, prev) in cache.h_next.iter().zip(&h) {
        assert_eq!(*next, 0.5 * prev, "criterion 4: FAIL - GRU zero-parameter identity");
    }

    let (loss, _) = softmax_cross_entropy(&vec![0.0; 64], 11).unwrap();
    assert!(
        (loss - 64f64.ln()).abs() < 1e-12,
        "criterion 4: FAIL - uniform cross-entropy {loss} vs ln 64"
    );

    let logits = [1.5, -0.25, 0.0, 2.0, -3.5, 0.75];
    let shifted: Vec<f64> = logits.iter().map(|l| l + 987.654).collect();
    let (a, b) = (softmax(&logits), softmax(&shifted));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12, "criterion 4: FAIL - softmax shift invariance");
    }
    println!("criterion 4: PASS - GRU halving exact, uniform CE = ln M, softmax shift-invariant (1e-12)");
}

#[test]
fn criterion_5_synthetic_learning() {
    let p = pipeline();
    let top1 = p.lidar_table.accuracy(1, 0).unwrap();
    let top5 = p.lidar_table.accuracy(5, 0).unwrap();
    assert!(
        top1 >= 0.70,
        "criterion 5: FAIL - lidar current-beam top-1 {top1:.4} below 0.70"
    );
    assert!(
        top5 >= 0.93,
        "criterion 5: FAIL - lidar current-beam top-5 {top5:.4} below 0.93"
    );
    // Sanity on the overfit direction: training split scores at least as
    // well as the held-out split on top-1.
    let train_top1 = p.lidar_table_train.accuracy(1, 0).unwrap();
    assert!(
        train_top1 >= top1 - 0.02,
        "criterion 5: FAIL - train-split top-1 {train_top1:.4} far below test {top1:.4}"
    );
    println!(
        "criterion 5: PASS - held-out top-1 {top1:.4} (>= 0.70), top-5 {top5:.4} (>= 0.93), \
         {} test samples, pipeline {:.1}s",
        p.lidar_table.sample_count, p.train_seconds
    );
}

#[test]
fn criterion_6_lead_time_trend() {
    let p = pipeline();
    for (name, table) in [("lidar", &p.lidar_table), ("baseline", &p.baseline_table)] {
        for v in 1..table.outputs {
            let prev = table.accuracy(1, v - 1).unwrap();
            let cur = table.accuracy(1, v).unwrap();
            assert!(
                cur <= prev + 0.02,
                "criterion 6: FAIL - {name} top-1 rises from v={} ({prev:.4}) to v={v} ({cur:.4})",
                v - 1
            );
        }
    }
    let row: Vec<String> = (0..p.lidar_table.outputs)
        .map(|v| format!("{:.4}", p.lidar_table.accuracy(1, v).unwrap()))
        .collect();
    println!(
        "criterion 6: PASS - top-1 non-increasing in lead time (lidar: {})",
        row.join(" -> ")
    );
}

#[test]
fn criterion_7_operation_window_trend() {
    let p = pipeline();
    let lidar = &p.curve.lidar[1..];
    let lo = lidar.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lidar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        hi - lo < 0.02,
        "criterion 7: FAIL - lidar curve varies by {:.4} across L (curve {:?})",
        hi - lo,
        p.curve.lidar
    );
    let b1 = p.curve.baseline[1];
    let b10 = p.curve.baseline[10];
    assert!(
        b10 <= b1 - 0.05,
        "criterion 7: FAIL - baseline degrades only {:.4} from L=1 ({b1:.4}) to L=10 ({b10:.4})",
        b1 - b10
    );
    println!(
        "criterion 7: PASS - lidar flat within {:.4}; baseline drops {:.4} (L=1 {b1:.4} -> L=10 {b10:.4})",
        hi - lo,
        b1 - b10
    );
}

#[test]
fn criterion_8_determinism() {
    let p = pipeline();

    // Dataset files: regenerate and rewrite at full scale.
    let records = generate_dataset(&p.scenario, p.run.scenario.num_sequences, p.run.seed)
        .expect("dataset regeneration");
    let again = p._dir.path().join("dataset-again.lbpd");
    write_dataset(&again, &records).expect("dataset rewrite");
    assert_eq!(
        std::fs::read(&p.dataset_path).unwrap(),
        std::fs::read(&again).unwrap(),
        "criterion 8: FAIL - dataset bytes differ across runs"
    );
    assert_eq!(
        std::fs::read(manifest_path(&p.dataset_path)).unwrap(),
        std::fs::read(manifest_path(&again)).unwrap(),
        "criterion 8: FAIL - manifest bytes differ across runs"
    );

    // Checkpoints: the training path is per-epoch deterministic; two
    // short reruns over the same data must serialize identically.
    for mode in [TrackerMode::Lidar, TrackerMode::Baseline] {
        let mut bytes = Vec::new();
        for run_idx in 0..2 {
            let (cfg, params, curve) = train_one(&p.run, mode, &p.train_recs, 3);
            let ckpt = Checkpoint {
                cfg,
                max_range: p.scenario.max_range,
                params,
                config_echo: p.run.to_toml(),
            };
            let path = p
                ._dir
                .path()
                .join(format!("det-{}-{run_idx}.lbpc", mode.as_str()));
            save_checkpoint(&path, &ckpt).expect("save");
            bytes.push((std::fs::read(&path).unwrap(), curve));
        }
        assert_eq!(
            bytes[0], bytes[1],
            "criterion 8: FAIL - {} retraining is not byte-identical",
            mode.as_str()
        );
    }

    // Metric files: recompute both CSV artifacts.
    let test_lidar = window_all(
        &p.test_recs,
        p.lidar.cfg.w,
        p.lidar.cfg.v,
        TrackerMode::Lidar,
        p.scenario.max_range,
    )
    .unwrap();
    let table = evaluate_table(&p.lidar.params, &p.lidar.cfg, &test_lidar, &KS).unwrap();
    assert_eq!(
        table.to_csv(),
        std::fs::read_to_string(&p.table_csv_path).unwrap(),
        "criterion 8: FAIL - accuracy table differs across runs"
    );
    let eval_recs = generate_dataset(&p.scenario, OPWINDOW_SEQUENCES, OPWINDOW_SEED).unwrap();
    let curve = operation_window_eval(
        &p.baseline.params,
        &p.baseline.cfg,
        &p.lidar.params,
        &p.lidar.cfg,
        &eval_recs,
        p.run.evaluation.l_max,
        p.run.evaluation.op_k,
        p.scenario.max_range,
    )
    .unwrap();
    assert_eq!(
        curve.to_csv(),
        std::fs::read_to_string(&p.curve_csv_path).unwrap(),
        "criterion 8: FAIL - operation-window curve differs across runs"
    );

    // Saved checkpoints re-serialize byte-identically.
    let resaved = p._dir.path().join("lidar-resave.lbpc");
    save_checkpoint(&resaved, &p.lidar).unwrap();
    assert_eq!(
        std::fs::read(&p.lidar_ckpt_path).unwrap(),
        std::fs::read(&resaved).unwrap(),
        "criterion 8: FAIL - checkpoint serialization unstable"
    );
    let _ = &p.baseline_ckpt_path;
    println!("criterion 8: PASS - dataset, checkpoint, and metric artifacts are byte-identical across reruns");
}

#[test]
fn criterion_9_leakage_audit() {
    let p = pipeline();
    let n = p.run.scenario.num_sequences;
    let (train_ids, test_ids) =
        split_indices(n, &p.run.training.to_split(p.run.seed)).unwrap();
    for id in &train_ids {
        assert!(
            !test_ids.contains(id),
            "criterion 9: FAIL - sequence {id} appears in both splits"
        );
    }
    let mut all: Vec<usize> = train_ids.iter().chain(&test_ids).copied().collect();
    all.sort_unstable();
    assert_eq!(
        all,
        (0..n).collect::<Vec<_>>(),
        "criterion 9: FAIL - split is not exhaustive"
    );

    // Sequence identity survives the split: metas are unique per sequence.
    let mut seeds: Vec<u64> = p
        .train_recs
        .iter()
        .chain(&p.test_recs)
        .map(|r| r.meta.expect("generated sequences carry metadata").seed)
        .collect();
    let total = seeds.len();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), total, "criterion 9: FAIL - duplicate sequence identity");

    // Window counts follow max(0, L-(W+V)+1) on every sequence.
    let (w, v) = (p.lidar.cfg.w, p.lidar.cfg.v);
    for rec in p.train_recs.iter().chain(&p.test_recs) {
        let samples =
            window_samples(rec, w, v, TrackerMode::Baseline, p.scenario.max_range).unwrap();
        let expected = (rec.len() as i64 - (w + v) as i64 + 1).max(0) as usize;
        assert_eq!(samples.len(), window_count(rec.len(), w, v));
        assert_eq!(
            samples.len(),
            expected,
            "criterion 9: FAIL - window count mismatch on a length-{} sequence",
            rec.len()
        );
    }
    println!(
        "criterion 9: PASS - splits disjoint and exhaustive over {n} sequences; window counts match the formula"
    );
}
