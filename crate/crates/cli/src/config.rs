//! Run configuration: one TOML document drives a whole reproducible run.
//!
//! Every key has a default, so a config file only needs the keys it wants to
//! change; unknown keys are rejected. Angles are degrees in the file and
//! radians inside the library. Individual CLI flags override their config
//! keys (flag wins).

use serde::{Deserialize, Serialize};

use beamtrack_core::beam::SignalConfig;
use beamtrack_core::nn::AdamConfig;
use beamtrack_core::scene::{Rect, ScenarioConfig};
use beamtrack_core::tracker::{TrackerConfig, TrackerMode, TrainConfig};
use beamtrack_core::data::SplitSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// The single top-level seed; all randomness is derived from it through
    /// named child streams.
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            scenario: ScenarioSection::default(),
            model: ModelSection::default(),
            training: TrainingSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub num_sequences: usize,
    pub lidar_bins: usize,
    pub lidar_fov_deg: [f64; 2],
    pub max_range: f64,
    pub road_offset: f64,
    pub road_span: [f64; 2],
    pub speed_range: [f64; 2],
    pub dt: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub min_steps: usize,
    pub ref_gain: f64,
    /// Axis-aligned obstacles as `[x_min, y_min, x_max, y_max]`.
    pub clutter: Vec<[f64; 4]>,
    pub transmit_power: f64,
    pub noise_variance: f64,
    pub wavelength_spacing: f64,
    pub antennas: usize,
    pub beams: usize,
    pub beam_fov_deg: [f64; 2],
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            num_sequences: 200,
            lidar_bins: s.d,
            lidar_fov_deg: [s.lidar_fov.0.to_degrees(), s.lidar_fov.1.to_degrees()],
            max_range: s.max_range,
            road_offset: s.road_offset,
            road_span: [s.road_span.0, s.road_span.1],
            speed_range: [s.speed_range.0, s.speed_range.1],
            dt: s.dt,
            vehicle_length: s.vehicle_length,
            vehicle_width: s.vehicle_width,
            min_steps: s.min_steps,
            ref_gain: s.ref_gain,
            clutter: Vec::new(),
            transmit_power: s.signal.transmit_power,
            noise_variance: s.signal.noise_variance,
            wavelength_spacing: s.signal.wavelength_spacing,
            antennas: s.n_antennas,
            beams: s.num_beams,
            beam_fov_deg: [s.beam_fov.0.to_degrees(), s.beam_fov.1.to_degrees()],
        }
    }
}

impl ScenarioSection {
    pub fn to_scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            d: self.lidar_bins,
            lidar_fov: (self.lidar_fov_deg[0].to_radians(), self.lidar_fov_deg[1].to_radians()),
            max_range: self.max_range,
            road_offset: self.road_offset,
            road_span: (self.road_span[0], self.road_span[1]),
            speed_range: (self.speed_range[0], self.speed_range[1]),
            dt: self.dt,
            vehicle_length: self.vehicle_length,
            vehicle_width: self.vehicle_width,
            min_steps: self.min_steps,
            ref_gain: self.ref_gain,
            clutter: self
                .clutter
                .iter()
                .map(|c| Rect { x_min: c[0], y_min: c[1], x_max: c[2], y_max: c[3] })
                .collect(),
            signal: SignalConfig {
                transmit_power: self.transmit_power,
                noise_variance: self.noise_variance,
                wavelength_spacing: self.wavelength_spacing,
            },
            n_antennas: self.antennas,
            num_beams: self.beams,
            beam_fov: (self.beam_fov_deg[0].to_radians(), self.beam_fov_deg[1].to_radians()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub observation_window: usize,
    pub max_lead_time: usize,
    pub loss_window: usize,
    pub lidar_embedding: usize,
    pub beam_embedding: usize,
    pub hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            observation_window: 8,
            max_lead_time: 3,
            loss_window: 4,
            lidar_embedding: 64,
            beam_embedding: 64,
            hidden: 64,
        }
    }
}

impl ModelSection {
    /// Tracker config for the given mode and dataset geometry.
    pub fn to_tracker(&self, mode: TrackerMode, d: usize, m: usize) -> TrackerConfig {
        TrackerConfig {
            mode,
            w: self.observation_window,
            v: self.max_lead_time,
            gamma: self.loss_window,
            d,
            d_e: self.lidar_embedding,
            m,
            m_e: self.beam_embedding,
            h: self.hidden,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative per-epoch learning-rate decay.
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub train_fraction: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 25,
            batch_size: 32,
            learning_rate: 1.5e-3,
            lr_decay: 0.88,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            train_fraction: 0.8,
        }
    }
}

impl TrainingSection {
    pub fn to_train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            adam: AdamConfig {
                lr: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            lr_decay: self.lr_decay,
        }
    }

    pub fn to_split(&self, seed: u64) -> SplitSpec {
        SplitSpec { train_fraction: self.train_fraction, seed }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    /// k values of the accuracy table rows.
    pub k_list: Vec<usize>,
    /// Largest operation window of the feedback experiment.
    pub l_max: usize,
    /// k used for the operation-window accuracy axis.
    pub op_k: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self { k_list: vec![1, 2, 3, 5], l_max: 10, op_k: 1 }
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }
}
