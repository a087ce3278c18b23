//! Geometric beamforming primitives.
//!
//! A uniform linear array (ULA) of `N` elements steers one of `M` codebook
//! beams. The receive power of beam `f` over channel `h` is
//! `|h^H f * sqrt(P) + n|^2`, and the optimal beam is the codebook index that
//! maximizes it. The angle convention throughout: 0 rad is array boresight,
//! positive angles rotate toward +x, and steering angles live in
//! (-pi/2, +pi/2).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Transmit-power and noise model for one measurement campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalConfig {
    /// Transmit power P in watts.
    pub transmit_power: f64,
    /// Receive noise variance sigma_n^2 in watts (second moment of the
    /// complex noise sample).
    pub noise_variance: f64,
    /// Element spacing in half-wavelength units (1.0 = half-wavelength ULA).
    pub wavelength_spacing: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            transmit_power: 1.0,
            noise_variance: 0.0,
            wavelength_spacing: 1.0,
        }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.transmit_power > 0.0) || !self.transmit_power.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "transmit_power must be positive and finite, got {}",
                self.transmit_power
            )));
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise_variance must be non-negative and finite, got {}",
                self.noise_variance
            )));
        }
        if !(self.wavelength_spacing > 0.0) || !self.wavelength_spacing.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "wavelength_spacing must be positive and finite, got {}",
                self.wavelength_spacing
            )));
        }
        Ok(())
    }
}

/// ULA array response for a plane wave from azimuth `theta`.
///
/// Entry `n` is `exp(j * pi * spacing * n * sin(theta))` for `n = 0..N-1`,
/// so every entry has unit modulus.
pub fn array_response(theta: f64, n: usize, spacing: f64) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::InvalidConfig("array needs at least one element".into()));
    }
    if !theta.is_finite() {
        return Err(Error::InvalidConfig(format!("non-finite steering angle {theta}")));
    }
    if theta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::OutOfRange(format!(
            "steering angle {theta} rad outside (-pi/2, pi/2)"
        )));
    }
    let phase_step = std::f64::consts::PI * spacing * theta.sin();
    Ok((0..n)
        .map(|i| Complex64::from_polar(1.0, phase_step * i as f64))
        .collect())
}

/// A pre-defined beamsteering codebook of `M` unit-norm beams.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamCodebook {
    beams: Vec<Vec<Complex64>>,
    steering_angles: Vec<f64>,
}

impl BeamCodebook {
    /// Number of beams M.
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Number of array elements N.
    pub fn elements(&self) -> usize {
        self.beams[0].len()
    }

    /// Beam by 0-based position.
    pub fn beam(&self, i: usize) -> &[Complex64] {
        &self.beams[i]
    }

    /// Steering angle (radians) of the beam at 0-based position `i`.
    pub fn steering_angle(&self, i: usize) -> f64 {
        self.steering_angles[i]
    }

    pub fn steering_angles(&self) -> &[f64] {
        &self.steering_angles
    }

    /// Angular spacing between adjacent beams (one "beam-width" of the grid).
    pub fn beam_spacing(&self) -> f64 {
        self.steering_angles[1] - self.steering_angles[0]
    }
}

/// Build a codebook of `m` beams steered uniformly over `fov` (inclusive).
///
/// Beam `i` is `array_response(theta_i) / sqrt(n)`, which makes every beam
/// unit-norm.
pub fn generate_codebook(
    n: usize,
    m: usize,
    fov: (f64, f64),
    spacing: f64,
) -> Result<BeamCodebook> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "codebook needs at least 2 beams to define a grid, got {m}"
        )));
    }
    let (lo, hi) = fov;
    if !(lo < hi) {
        return Err(Error::InvalidConfig(format!(
            "codebook field of view must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let norm = 1.0 / (n as f64).sqrt();
    let mut beams = Vec::with_capacity(m);
    let mut steering_angles = Vec::with_capacity(m);
    for i in 0..m {
        let theta = lo + (hi - lo) * i as f64 / (m - 1) as f64;
        let beam: Vec<Complex64> = array_response(theta, n, spacing)?
            .into_iter()
            .map(|e| e * norm)
            .collect();
        beams.push(beam);
        steering_angles.push(theta);
    }
    Ok(BeamCodebook { beams, steering_angles })
}

/// Inner product `h^H f`.
fn beamformed_amplitude(h: &[Complex64], f: &[Complex64]) -> Result<Complex64> {
    if h.len() != f.len() {
        return Err(Error::DimMismatch(format!(
            "channel has {} elements, beam has {}",
            h.len(),
            f.len()
        )));
    }
    Ok(h.iter().zip(f).map(|(hi, fi)| hi.conj() * fi).sum())
}

/// Receive power of beam `f` over channel `h`.
///
/// With a noise sample: `|h^H f * sqrt(P) + n|^2`. Without: the noiseless
/// `P * |h^H f|^2`. Noise samples are drawn externally so the function stays
/// pure.
pub fn receive_power(
    h: &[Complex64],
    f: &[Complex64],
    cfg: &SignalConfig,
    noise_sample: Option<Complex64>,
) -> Result<f64> {
    let amp = beamformed_amplitude(h, f)?;
    Ok(match noise_sample {
        Some(n) => (amp * cfg.transmit_power.sqrt() + n).norm_sqr(),
        None => cfg.transmit_power * amp.norm_sqr(),
    })
}

/// Draw one complex Gaussian noise sample with `E[|n|^2] = variance`.
pub fn complex_noise<R: Rng>(variance: f64, rng: &mut R) -> Complex64 {
    // Per-component std dev so the total second moment equals `variance`.
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Sweep the full codebook once: entry `i` is the receive power of beam `i`
/// with a fresh noise sample. Deterministic for a fixed rng stream.
pub fn measure_power_vector<R: Rng>(
    h: &[Complex64],
    cb: &BeamCodebook,
    cfg: &SignalConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut powers = Vec::with_capacity(cb.len());
    for i in 0..cb.len() {
        let noise = complex_noise(cfg.noise_variance, rng);
        powers.push(receive_power(h, cb.beam(i), cfg, Some(noise))?);
    }
    Ok(powers)
}

/// 1-based index of the strongest beam; ties break to the lowest index.
pub fn optimal_beam_index(powers: &[f64]) -> Result<usize> {
    if powers.is_empty() {
        return Err(Error::EmptyInput("power vector has no entries".into()));
    }
    let mut best = 0;
    for (i, &p) in powers.iter().enumerate().skip(1) {
        if p > powers[best] {
            best = i;
        }
    }
    Ok(best + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::child_rng;

    const TOL: f64 = 1e-12;

    #[test]
    fn array_response_boresight_is_all_ones() {
        let a = array_response(0.0, 4, 1.0).unwrap();
        for e in &a {
            assert!((e.re - 1.0).abs() < TOL && e.im.abs() < TOL);
        }
    }

    #[test]
    fn array_response_single_element() {
        let a = array_response(std::f64::consts::FRAC_PI_2 - 1e-9, 1, 1.0).unwrap();
        assert_eq!(a.len(), 1);
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn array_response_thirty_degrees_second_element_is_j() {
        // sin(pi/6) = 0.5, so entry 1 = exp(j*pi/2) = j.
        let a = array_response(std::f64::consts::FRAC_PI_6, 2, 1.0).unwrap();
        assert!((a[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn array_response_rejects_bad_inputs() {
        assert!(array_response(f64::NAN, 4, 1.0).is_err());
        assert!(array_response(0.0, 0, 1.0).is_err());
        assert!(array_response(std::f64::consts::FRAC_PI_2, 4, 1.0).is_err());
    }

    #[test]
    fn codebook_beams_are_unit_norm() {
        let cb = generate_codebook(16, 64, (-(60f64.to_radians()), 60f64.to_radians()), 1.0).unwrap();
        assert_eq!(cb.len(), 64);
        assert_eq!(cb.elements(), 16);
        for i in 0..cb.len() {
            let norm: f64 = cb.beam(i).iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < TOL, "beam {i} norm {norm}");
        }
    }

    #[test]
    fn codebook_single_element_has_no_directivity() {
        let cb = generate_codebook(1, 2, (-1.0, 1.0), 1.0).unwrap();
        assert_eq!(cb.beam(0), cb.beam(1));
        assert!((cb.beam(0)[0] - Complex64::new(1.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn codebook_angles_strictly_increasing() {
        let cb = generate_codebook(8, 16, (-0.5, 0.5), 1.0).unwrap();
        for w in cb.steering_angles().windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!((cb.steering_angle(0) + 0.5).abs() < TOL);
        assert!((cb.steering_angle(15) - 0.5).abs() < TOL);
    }

    #[test]
    fn codebook_rejects_degenerate_grids() {
        assert!(generate_codebook(4, 1, (-1.0, 1.0), 1.0).is_err());
        assert!(generate_codebook(4, 8, (1.0, -1.0), 1.0).is_err());
    }

    #[test]
    fn receive_power_matched_unit_vectors() {
        let f = generate_codebook(4, 2, (-1.0, 1.0), 1.0).unwrap().beam(0).to_vec();
        let cfg = SignalConfig::default();
        let p = receive_power(&f, &f, &cfg, None).unwrap();
        assert!((p - 1.0).abs() < TOL);
    }

    #[test]
    fn receive_power_orthogonal_is_zero() {
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let f = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let cfg = SignalConfig { transmit_power: 5.0, ..Default::default() };
        assert!(receive_power(&h, &f, &cfg, None).unwrap().abs() < TOL);
    }

    #[test]
    fn receive_power_scales_with_channel_gain() {
        let f = generate_codebook(4, 2, (-1.0, 1.0), 1.0).unwrap().beam(0).to_vec();
        let h: Vec<Complex64> = f.iter().map(|e| e * 2.0).collect();
        let p = receive_power(&h, &f, &SignalConfig::default(), None).unwrap();
        assert!((p - 4.0).abs() < TOL);
    }

    #[test]
    fn receive_power_rejects_dimension_mismatch() {
        let h = vec![Complex64::new(1.0, 0.0); 3];
        let f = vec![Complex64::new(1.0, 0.0); 4];
        assert!(matches!(
            receive_power(&h, &f, &SignalConfig::default(), None),
            Err(Error::DimMismatch(_))
        ));
    }

    #[test]
    fn power_factors_out_of_transmit_power() {
        let cb = generate_codebook(8, 4, (-1.0, 1.0), 1.0).unwrap();
        let h = array_response(0.3, 8, 1.0).unwrap();
        for i in 0..cb.len() {
            let p1 = receive_power(&h, cb.beam(i), &SignalConfig::default(), None).unwrap();
            let cfg7 = SignalConfig { transmit_power: 7.0, ..Default::default() };
            let p7 = receive_power(&h, cb.beam(i), &cfg7, None).unwrap();
            assert_eq!(p7, 7.0 * p1);
        }
    }

    #[test]
    fn measured_vector_peaks_at_matched_beam() {
        let cb = generate_codebook(16, 64, (-1.0, 1.0), 1.0).unwrap();
        let h = array_response(cb.steering_angle(7), 16, 1.0).unwrap();
        let cfg = SignalConfig::default(); // zero noise
        let mut rng = child_rng(0, &[]);
        let pv = measure_power_vector(&h, &cb, &cfg, &mut rng).unwrap();
        let best = pv
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 7);
    }

    #[test]
    fn zero_channel_measures_zero_without_noise() {
        let cb = generate_codebook(4, 8, (-1.0, 1.0), 1.0).unwrap();
        let h = vec![Complex64::new(0.0, 0.0); 4];
        let mut rng = child_rng(1, &[]);
        let pv = measure_power_vector(&h, &cb, &SignalConfig::default(), &mut rng).unwrap();
        assert!(pv.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn measurement_is_deterministic_under_fixed_stream() {
        let cb = generate_codebook(8, 16, (-1.0, 1.0), 1.0).unwrap();
        let h = array_response(0.2, 8, 1.0).unwrap();
        let cfg = SignalConfig { noise_variance: 0.5, ..Default::default() };
        let a = measure_power_vector(&h, &cb, &cfg, &mut child_rng(42, &[9])).unwrap();
        let b = measure_power_vector(&h, &cb, &cfg, &mut child_rng(42, &[9])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argmax_basics_and_tie_break() {
        assert_eq!(optimal_beam_index(&[0.1, 0.9, 0.3]).unwrap(), 2);
        assert_eq!(optimal_beam_index(&[0.5, 0.5]).unwrap(), 1);
        assert!(matches!(optimal_beam_index(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn argmax_matches_linear_scan_on_random_vectors() {
        use rand::Rng;
        let mut rng = child_rng(3, &[1]);
        for _ in 0..200 {
            let pv: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
            // Independent oracle: plain linear scan.
            let mut oracle = 0;
            for i in 0..pv.len() {
                if pv[i] > pv[oracle] {
                    oracle = i;
                }
            }
            assert_eq!(optimal_beam_index(&pv).unwrap(), oracle + 1);
        }
    }
}
