//! Band-energy feature extraction from footstep windows.
//!
//! Each detected footstep is summarized by the square-root band energies
//! of a Hanning-tapered window centered on the event peak. The one-sided
//! power spectrum is normalized so that summing it over a complete band
//! partition returns the tapered window's time-domain energy exactly
//! (Parseval), which keeps band energies physically comparable across
//! window sizes and sample rates.

use crate::error::{Error, Result};
use crate::types::{FeatureLabels, FeatureVector, FootstepEvent, VibrationTrace};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

/// Floor applied before taking logarithms of band amplitudes, guarding
/// against empty bands.
pub const LOG_FLOOR: f64 = 1e-12;

/// Configuration for event detection and band-energy extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Analysis window length (s), centered on the event peak.
    pub window_s: f64,
    /// Band edges in Hz, strictly ascending; d bands need d+1 edges.
    pub band_edges_hz: Vec<f64>,
    /// Detection threshold as a multiple of the robust noise floor.
    pub detection_threshold_sigma: f64,
    /// Minimum spacing between detected events (s).
    pub refractory_s: f64,
    /// Model features as log-amplitudes `ln(max(value, LOG_FLOOR))`
    /// instead of raw amplitudes. Off by default: stored and written
    /// features are always raw amplitudes (magnitudes); this flag only
    /// changes the modeling space used by downstream analysis, where
    /// the multiplicative structure of propagation gains becomes
    /// additive. See [`FeatureSpec::model_values`].
    #[serde(default)]
    pub log_amplitude: bool,
    /// Normalize each modeling vector to unit L2 norm. Off by default;
    /// applied after the optional log map so the emitted vector is
    /// unit-norm whenever the flag is set.
    #[serde(default)]
    pub l2_normalize: bool,
}

impl FeatureSpec {
    /// Default spec for a given sample rate: 16 log-spaced bands from
    /// 5 Hz to 80% of Nyquist, a 0.5 s analysis window, a 5-sigma
    /// detection threshold, and a 0.25 s refractory period.
    pub fn default_for_rate(sample_rate_hz: f64) -> Self {
        let lo = 5.0;
        let hi = 0.8 * sample_rate_hz / 2.0;
        let d = 16;
        let band_edges_hz = (0..=d)
            .map(|i| lo * (hi / lo).powf(i as f64 / d as f64))
            .collect();
        Self {
            window_s: 0.5,
            band_edges_hz,
            detection_threshold_sigma: 5.0,
            refractory_s: 0.25,
            log_amplitude: false,
            l2_normalize: false,
        }
    }

    pub fn band_count(&self) -> usize {
        self.band_edges_hz.len().saturating_sub(1)
    }

    /// Map raw band amplitudes into the modeling feature space selected
    /// by the spec's flags: the optional log-amplitude map first, then
    /// optional per-vector L2 normalization. With both flags off (the
    /// default) this is the identity, and all analysis runs directly on
    /// amplitudes. A zero vector is left unchanged by normalization.
    pub fn model_values(&self, values: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = values.to_vec();
        if self.log_amplitude {
            for v in &mut out {
                *v = v.max(LOG_FLOOR).ln();
            }
        }
        if self.l2_normalize {
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut out {
                    *v /= norm;
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0) || !self.window_s.is_finite() {
            return Err(Error::InvalidParameter {
                name: "window_s",
                reason: format!("must be positive and finite, got {}", self.window_s),
            });
        }
        if !(self.detection_threshold_sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "detection_threshold_sigma",
                reason: "must be positive".into(),
            });
        }
        if !(self.refractory_s >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "refractory_s",
                reason: "must be nonnegative".into(),
            });
        }
        if self.band_edges_hz.len() < 3 {
            return Err(Error::InvalidParameter {
                name: "band_edges_hz",
                reason: "need at least 3 edges (2 bands)".into(),
            });
        }
        if self.band_edges_hz[0] < 0.0 {
            return Err(Error::InvalidParameter {
                name: "band_edges_hz",
                reason: "edges must be nonnegative".into(),
            });
        }
        for pair in self.band_edges_hz.windows(2) {
            if !(pair[1] > pair[0]) || !pair[1].is_finite() {
                return Err(Error::InvalidParameter {
                    name: "band_edges_hz",
                    reason: "edges must be strictly ascending and finite".into(),
                });
            }
        }
        Ok(())
    }
}

/// Symmetric Hanning taper of length n.
fn hanning(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// One-sided power spectrum of `x`, normalized so the sum over all bins
/// equals sum(x^2). Returns (power per bin, bin width in Hz).
fn one_sided_power(x: &[f64], sample_rate_hz: f64, planner: &mut FftPlanner<f64>) -> (Vec<f64>, f64) {
    let n = x.len();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let n_f = n as f64;
    let half = n / 2;
    let mut power = Vec::with_capacity(half + 1);
    for (k, c) in buf.iter().take(half + 1).enumerate() {
        let p = c.norm_sqr() / n_f;
        // DC and (for even n) Nyquist have no mirror bin
        let one_sided = if k == 0 || (n % 2 == 0 && k == half) {
            p
        } else {
            2.0 * p
        };
        power.push(one_sided);
    }
    (power, sample_rate_hz / n_f)
}

/// Sum the one-sided power into bands. Bin k at frequency f_k belongs to
/// band i when edges[i] <= f_k < edges[i+1]; the top edge is inclusive
/// so a partition that ends exactly at Nyquist captures every bin.
fn band_energies(power: &[f64], bin_hz: f64, edges: &[f64]) -> Vec<f64> {
    let d = edges.len() - 1;
    let mut energy = vec![0.0; d];
    for (k, &p) in power.iter().enumerate() {
        let f = k as f64 * bin_hz;
        if f < edges[0] || f > edges[d] {
            continue;
        }
        let idx = edges.partition_point(|&e| e <= f).saturating_sub(1).min(d - 1);
        energy[idx] += p;
    }
    energy
}

/// Extract the windowed samples around an event peak, zero-padding where
/// the window runs past the trace.
fn windowed_samples(trace: &VibrationTrace, peak_index: usize, n_win: usize) -> Vec<f64> {
    let samples = trace.samples();
    let half = n_win / 2;
    let mut out = vec![0.0; n_win];
    for (j, slot) in out.iter_mut().enumerate() {
        let idx = peak_index as i64 - half as i64 + j as i64;
        if idx >= 0 && (idx as usize) < samples.len() {
            *slot = samples[idx as usize];
        }
    }
    out
}

/// Compute the band-energy feature vector for one detected event.
pub fn extract_features(
    trace: &VibrationTrace,
    event: &FootstepEvent,
    spec: &FeatureSpec,
    labels: FeatureLabels,
) -> Result<FeatureVector> {
    spec.validate()?;
    let mut planner = FftPlanner::new();
    extract_with_planner(trace, event, spec, labels, &mut planner)
}

fn extract_with_planner(
    trace: &VibrationTrace,
    event: &FootstepEvent,
    spec: &FeatureSpec,
    labels: FeatureLabels,
    planner: &mut FftPlanner<f64>,
) -> Result<FeatureVector> {
    let fs = trace.sample_rate_hz();
    let nyquist = fs / 2.0;
    if let Some(&top) = spec.band_edges_hz.last() {
        if top > nyquist * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "band_edges_hz",
                reason: format!(
                    "top edge {top} Hz exceeds the Nyquist frequency {nyquist} Hz"
                ),
            });
        }
    }
    let n_win = (spec.window_s * fs).round() as usize;
    if n_win < 2 {
        return Err(Error::InvalidParameter {
            name: "window_s",
            reason: "window shorter than two samples".into(),
        });
    }
    if event.peak_index >= trace.len() {
        return Err(Error::InvalidParameter {
            name: "event.peak_index",
            reason: "beyond end of trace".into(),
        });
    }
    let mut x = windowed_samples(trace, event.peak_index, n_win);
    let taper = hanning(n_win);
    for (v, w) in x.iter_mut().zip(&taper) {
        *v *= w;
    }
    let (power, bin_hz) = one_sided_power(&x, fs, planner);
    let values: Vec<f64> = band_energies(&power, bin_hz, &spec.band_edges_hz)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    FeatureVector::new(values, spec.band_edges_hz.clone(), labels)
}

/// Extract features for every event in a trace, sharing one FFT plan.
pub fn extract_all(
    trace: &VibrationTrace,
    events: &[FootstepEvent],
    spec: &FeatureSpec,
    labels: &FeatureLabels,
) -> Result<Vec<FeatureVector>> {
    spec.validate()?;
    let mut planner = FftPlanner::new();
    events
        .iter()
        .map(|e| extract_with_planner(trace, e, spec, labels.clone(), &mut planner))
        .collect()
}
