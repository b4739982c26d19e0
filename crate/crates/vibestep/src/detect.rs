//! Footstep event detection on a single vibration trace.
//!
//! A moving-RMS envelope is compared against a robust noise floor
//! (median + sigma * 1.4826 * MAD of the envelope). Contiguous
//! supra-threshold runs become events, with the peak at the envelope
//! maximum; a refractory period suppresses re-triggering on the
//! ring-down of a previous event.

use crate::error::Result;
use crate::features::FeatureSpec;
use crate::types::{FootstepEvent, VibrationTrace};

/// Envelope smoothing window (s). Short enough to separate steps at a
/// normal cadence, long enough to bridge individual oscillation cycles.
const ENVELOPE_WINDOW_S: f64 = 0.05;

/// Centered moving RMS of `x` over a window of `w` samples.
fn moving_rms(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let w = w.max(1);
    let mut prefix = vec![0.0; n + 1];
    for (i, &v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v * v;
    }
    let half = w / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).sqrt()
        })
        .collect()
}

fn median_of(mut v: Vec<f64>) -> f64 {
    let n = v.len();
    v.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Detect footstep-like events. Returns events in time order.
pub fn detect_events(trace: &VibrationTrace, spec: &FeatureSpec) -> Result<Vec<FootstepEvent>> {
    spec.validate()?;
    let fs = trace.sample_rate_hz();
    let samples = trace.samples();
    let n = samples.len();
    let env = moving_rms(samples, (ENVELOPE_WINDOW_S * fs).round() as usize);

    let floor = median_of(env.clone());
    let spread = 1.4826 * median_of(env.iter().map(|e| (e - floor).abs()).collect());
    let threshold = floor + spec.detection_threshold_sigma * spread;

    let refractory = (spec.refractory_s * fs).round() as usize;
    let mut events = Vec::new();
    let mut i = 0;
    let mut last_peak: Option<usize> = None;
    while i < n {
        if env[i] <= threshold {
            i += 1;
            continue;
        }
        // supra-threshold run [run_start, run_end)
        let run_start = i;
        while i < n && env[i] > threshold {
            i += 1;
        }
        let run_end = i;
        let peak = (run_start..run_end)
            .max_by(|&a, &b| env[a].total_cmp(&env[b]))
            .unwrap();
        if let Some(lp) = last_peak {
            if peak - lp < refractory {
                continue;
            }
        }
        // events flush against the trace edges cannot satisfy
        // start < peak < end and are discarded as boundary artifacts
        let start = if run_start < peak { run_start } else { peak.wrapping_sub(1) };
        let end = if run_end > peak + 1 { run_end } else { peak + 2 };
        if peak == 0 || end > n {
            continue;
        }
        events.push(FootstepEvent::new(start, peak, end, n)?);
        last_peak = Some(peak);
    }
    Ok(events)
}
