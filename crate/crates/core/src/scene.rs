//! Synthetic vehicle-to-infrastructure scenario.
//!
//! Top-down 2-D geometry: the base station (with its array and LiDAR) sits at
//! the origin, boresight along +y. The road runs parallel to the x-axis at
//! `y = road_offset`; a vehicle drives one pass along `road_span` at constant
//! speed. Each time step yields a LiDAR range scan rendered by exact
//! ray/rectangle intersection, a line-of-sight channel, a full beam-training
//! power vector, and the optimal beam label.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::beam::{
    array_response, generate_codebook, measure_power_vector, optimal_beam_index, BeamCodebook,
    SignalConfig,
};
use crate::error::{Error, Result};
use crate::rng::{child_rng, child_seed, STREAM_SCENARIO};

/// Axis-aligned static obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::InvalidConfig(format!(
                "degenerate rectangle [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ]
    }
}

/// Vehicle pose at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Travel direction in radians; 0 faces +x.
    pub heading: f64,
}

/// Direction of one pass along the road.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::LeftToRight => "ltr",
            Direction::RightToLeft => "rtl",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ltr" => Ok(Direction::LeftToRight),
            "rtl" => Ok(Direction::RightToLeft),
            other => Err(Error::Format(format!("unknown direction {other:?}"))),
        }
    }
}

/// One LiDAR range profile: entry `i` is the distance to the nearest obstacle
/// along the bin-center direction of angular bin `i`, or the effective
/// maximum range if nothing is hit. Stored at the 32-bit precision of the
/// dataset format.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub ranges: Vec<f32>,
}

impl LidarScan {
    pub fn validate(&self, d: usize, max_range: f64) -> Result<()> {
        if self.ranges.len() != d {
            return Err(Error::DimMismatch(format!(
                "scan has {} bins, scenario declares {d}",
                self.ranges.len()
            )));
        }
        let mr = max_range as f32;
        for (i, &r) in self.ranges.iter().enumerate() {
            if !r.is_finite() || r <= 0.0 || r > mr {
                return Err(Error::OutOfRange(format!(
                    "scan bin {i} holds {r}, expected a range in (0, {mr}]"
                )));
            }
        }
        Ok(())
    }
}

/// Full scenario description. All angles are radians relative to the array
/// boresight (+y); all lengths are meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of LiDAR angular bins.
    pub d: usize,
    /// LiDAR field of view `[lo, hi]`.
    pub lidar_fov: (f64, f64),
    /// Maximum sensor range; also the no-hit sentinel.
    pub max_range: f64,
    /// Perpendicular distance from the BS to the lane.
    pub road_offset: f64,
    /// Along-road extent `[x_lo, x_hi]` of one pass.
    pub road_span: (f64, f64),
    /// Uniform speed draw `[lo, hi]` in m/s.
    pub speed_range: (f64, f64),
    /// Seconds per time step.
    pub dt: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Minimum steps a trajectory must produce (observation window plus
    /// maximum lead time of the downstream models).
    pub min_steps: usize,
    /// Reference channel gain g; the LoS channel magnitude is g/d per element.
    pub ref_gain: f64,
    /// Static obstacles.
    pub clutter: Vec<Rect>,
    pub signal: SignalConfig,
    /// Array elements N.
    pub n_antennas: usize,
    /// Codebook size M.
    pub num_beams: usize,
    /// Codebook steering span `[lo, hi]`.
    pub beam_fov: (f64, f64),
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            d: 180,
            lidar_fov: (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            max_range: 50.0,
            road_offset: 25.0,
            road_span: (-20.0, 20.0),
            speed_range: (6.0, 10.0),
            dt: 0.05,
            vehicle_length: 2.0,
            vehicle_width: 1.2,
            min_steps: 11,
            ref_gain: 10.0,
            clutter: Vec::new(),
            signal: SignalConfig { noise_variance: 3e-5, ..Default::default() },
            n_antennas: 16,
            num_beams: 64,
            beam_fov: (-60f64.to_radians(), 60f64.to_radians()),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 8 {
            return Err(Error::InvalidConfig(format!("need at least 8 LiDAR bins, got {}", self.d)));
        }
        if !(self.lidar_fov.0 < self.lidar_fov.1) {
            return Err(Error::InvalidConfig("LiDAR field of view must satisfy lo < hi".into()));
        }
        if !(self.road_offset > 0.0 && self.max_range > self.road_offset) {
            return Err(Error::InvalidConfig(format!(
                "need max_range > road_offset > 0, got {} and {}",
                self.max_range, self.road_offset
            )));
        }
        if !(self.road_span.0 < self.road_span.1) {
            return Err(Error::InvalidConfig("road span must satisfy lo < hi".into()));
        }
        if !(self.speed_range.0 > 0.0 && self.speed_range.0 <= self.speed_range.1) {
            return Err(Error::InvalidConfig(format!(
                "speed range must be positive and ordered, got [{}, {}]",
                self.speed_range.0, self.speed_range.1
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return Err(Error::InvalidConfig("vehicle dimensions must be positive".into()));
        }
        if !(self.ref_gain > 0.0) {
            return Err(Error::InvalidConfig(format!("ref_gain must be positive, got {}", self.ref_gain)));
        }
        for r in &self.clutter {
            r.validate()?;
        }
        self.signal.validate()?;
        if self.n_antennas == 0 {
            return Err(Error::InvalidConfig("array needs at least one element".into()));
        }
        if self.num_beams < 2 {
            return Err(Error::InvalidConfig("codebook needs at least 2 beams".into()));
        }
        if !(self.beam_fov.0 < self.beam_fov.1) {
            return Err(Error::InvalidConfig("codebook field of view must satisfy lo < hi".into()));
        }
        Ok(())
    }

    /// The steering codebook this scenario measures against.
    pub fn codebook(&self) -> Result<BeamCodebook> {
        generate_codebook(
            self.n_antennas,
            self.num_beams,
            self.beam_fov,
            self.signal.wavelength_spacing,
        )
    }
}

/// One sampled pass along the road.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    pub speed: f64,
    pub direction: Direction,
}

/// Per-sequence bookkeeping carried by the plain-text manifest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceMeta {
    /// Child seed that reproduces this sequence.
    pub seed: u64,
    pub speed: f64,
    pub direction: Direction,
}

/// One time step of a recorded pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceStep {
    pub scan: LidarScan,
    /// Receive power per beam, watts, at dataset precision.
    pub powers: Vec<f32>,
    /// 1-based optimal beam label; always the argmax of `powers`.
    pub best_index: u32,
}

/// One road pass: time-ordered (scan, power vector, label) triples.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub steps: Vec<SequenceStep>,
    pub meta: Option<SequenceMeta>,
}

impl SequenceRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Draw one constant-velocity pass. The step count is
/// `floor(span_length / (speed * dt))`; configs that cannot produce
/// `min_steps` poses are rejected.
pub fn sample_trajectory(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    cfg.validate()?;
    let speed = rng.random_range(cfg.speed_range.0..=cfg.speed_range.1);
    let direction = if rng.random_range(0..2u32) == 0 {
        Direction::LeftToRight
    } else {
        Direction::RightToLeft
    };
    let span_length = cfg.road_span.1 - cfg.road_span.0;
    let steps = (span_length / (speed * cfg.dt)).floor() as usize;
    if steps < cfg.min_steps {
        return Err(Error::InvalidConfig(format!(
            "trajectory yields {steps} steps at speed {speed:.3} m/s, below the minimum {}; \
             widen road_span or lower speed_range/dt",
            cfg.min_steps
        )));
    }
    let (start, sign, heading) = match direction {
        Direction::LeftToRight => (cfg.road_span.0, 1.0, 0.0),
        Direction::RightToLeft => (cfg.road_span.1, -1.0, std::f64::consts::PI),
    };
    let poses = (0..steps)
        .map(|i| Pose {
            x: start + sign * speed * cfg.dt * i as f64,
            y: cfg.road_offset,
            heading,
        })
        .collect();
    Ok(Trajectory { poses, speed, direction })
}

/// Oriented vehicle footprint as four boundary segments.
fn vehicle_segments(pose: &Pose, cfg: &ScenarioConfig) -> [((f64, f64), (f64, f64)); 4] {
    let (hl, hw) = (cfg.vehicle_length / 2.0, cfg.vehicle_width / 2.0);
    let (sin_h, cos_h) = pose.heading.sin_cos();
    let corner = |dx: f64, dy: f64| {
        (
            pose.x + dx * cos_h - dy * sin_h,
            pose.y + dx * sin_h + dy * cos_h,
        )
    };
    let c = [
        corner(-hl, -hw),
        corner(hl, -hw),
        corner(hl, hw),
        corner(-hl, hw),
    ];
    [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
}

/// Distance from the origin to the first intersection of the ray with
/// direction `dir` and the segment `p1 -> p2`, if any.
fn ray_segment_distance(dir: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<f64> {
    let seg = (p2.0 - p1.0, p2.1 - p1.1);
    let denom = dir.0 * seg.1 - dir.1 * seg.0;
    if denom == 0.0 {
        return None; // parallel (or degenerate); grazing contact is ignored
    }
    let t = (p1.0 * seg.1 - p1.1 * seg.0) / denom;
    let s = (p1.0 * dir.1 - p1.1 * dir.0) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Cast the `D` bin-center rays from the BS origin and report the nearest hit
/// per bin (vehicle or clutter), clamped to `max_range`.
pub fn render_lidar(pose: &Pose, cfg: &ScenarioConfig) -> LidarScan {
    let (lo, hi) = cfg.lidar_fov;
    let bin_width = (hi - lo) / cfg.d as f64;
    let vehicle = vehicle_segments(pose, cfg);
    let mut ranges = Vec::with_capacity(cfg.d);
    for i in 0..cfg.d {
        let angle = lo + (i as f64 + 0.5) * bin_width;
        // Boresight is +y; positive angles rotate toward +x.
        let dir = (angle.sin(), angle.cos());
        let mut nearest = f64::INFINITY;
        for (p1, p2) in &vehicle {
            if let Some(t) = ray_segment_distance(dir, *p1, *p2) {
                nearest = nearest.min(t);
            }
        }
        for rect in &cfg.clutter {
            let c = rect.corners();
            for k in 0..4 {
                if let Some(t) = ray_segment_distance(dir, c[k], c[(k + 1) % 4]) {
                    nearest = nearest.min(t);
                }
            }
        }
        // Clamp again after the f32 cast: rounding may overshoot the sensor
        // range when max_range is not exactly representable.
        let range = (nearest.min(cfg.max_range) as f32).min(cfg.max_range as f32);
        ranges.push(range);
    }
    LidarScan { ranges }
}

/// Line-of-sight channel from the transmitter at `pose`:
/// `h = (g / dist) * array_response(azimuth)`.
pub fn synth_channel(pose: &Pose, cfg: &ScenarioConfig) -> Result<Vec<Complex64>> {
    let dist = (pose.x * pose.x + pose.y * pose.y).sqrt();
    if dist == 0.0 {
        return Err(Error::InvalidConfig("transmitter coincides with the BS".into()));
    }
    let azimuth = pose.x.atan2(pose.y);
    let gain = cfg.ref_gain / dist;
    let response = array_response(azimuth, cfg.n_antennas, cfg.signal.wavelength_spacing)?;
    Ok(response.into_iter().map(|e| e * gain).collect())
}

/// Record one pass: per pose, render the scan, synthesize the channel, sweep
/// the codebook with fresh noise, and label with the optimal beam.
///
/// Powers and ranges are stored at dataset (f32) precision and the label is
/// the argmax of the *stored* powers, so labels stay reproducible from the
/// serialized data alone.
pub fn record_sequence(
    cfg: &ScenarioConfig,
    cb: &BeamCodebook,
    traj: &Trajectory,
    noise_rng: &mut ChaCha8Rng,
    seq_seed: u64,
) -> Result<SequenceRecord> {
    let mut steps = Vec::with_capacity(traj.poses.len());
    for pose in &traj.poses {
        let scan = render_lidar(pose, cfg);
        let h = synth_channel(pose, cfg)?;
        let powers_f64 = measure_power_vector(&h, cb, &cfg.signal, noise_rng)?;
        let powers: Vec<f32> = powers_f64.iter().map(|&p| p as f32).collect();
        let stored: Vec<f64> = powers.iter().map(|&p| p as f64).collect();
        let best_index = optimal_beam_index(&stored)? as u32;
        steps.push(SequenceStep { scan, powers, best_index });
    }
    Ok(SequenceRecord {
        steps,
        meta: Some(SequenceMeta {
            seed: seq_seed,
            speed: traj.speed,
            direction: traj.direction,
        }),
    })
}

/// Generate `num_sequences` independent passes. Sequence `i` owns the child
/// streams `(seed, [STREAM_SCENARIO, i, 0])` (trajectory) and `[.., 1]`
/// (measurement noise), so parallel and serial runs produce identical bytes.
pub fn generate_dataset(
    cfg: &ScenarioConfig,
    num_sequences: usize,
    seed: u64,
) -> Result<Vec<SequenceRecord>> {
    cfg.validate()?;
    if num_sequences == 0 {
        return Err(Error::InvalidConfig("need at least one sequence".into()));
    }
    let cb = cfg.codebook()?;
    (0..num_sequences)
        .into_par_iter()
        .map(|i| {
            let tag = i as u64;
            let mut traj_rng = child_rng(seed, &[STREAM_SCENARIO, tag, 0]);
            let mut noise_rng = child_rng(seed, &[STREAM_SCENARIO, tag, 1]);
            let traj = sample_trajectory(cfg, &mut traj_rng)?;
            record_sequence(
                cfg,
                &cb,
                &traj,
                &mut noise_rng,
                child_seed(seed, &[STREAM_SCENARIO, tag]),
            )
        })
        .collect()
}
