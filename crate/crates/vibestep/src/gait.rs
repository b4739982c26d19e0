//! Synthetic walkers and calibration impacts.
//!
//! A walk is a sequence of raised-cosine force pulses marching along the
//! beam. What distinguishes people is the pulse itself — contact
//! duration and peak force — plus cadence; stochastic step-to-step
//! jitter makes repeated walks by the same person vary realistically.

use crate::attenuation::AttenuationModel;
use crate::beam::{modal_response_with, BeamModel, ForceEvent, ForceKind, ImpulseShape};
use crate::error::{Error, Result};
use crate::types::VibrationTrace;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Ring-down margin appended after the final pulse so the response can
/// decay inside the simulated trace.
const TAIL_S: f64 = 1.0;

/// Contact duration of a calibration ball drop (s).
pub const BALL_DROP_DURATION_S: f64 = 0.005;

/// Relative amplitude jitter of calibration ball drops. Drops from a
/// fixed height are almost identical; a tiny seeded jitter (0.1%)
/// emulates the residual spread.
pub const BALL_DROP_JITTER_FRAC: f64 = 0.001;

/// Person-specific walking parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonGaitModel {
    pub person_id: String,
    /// Foot-ground contact time (s); the strongest individual cue.
    pub pulse_duration_s: f64,
    /// Peak vertical force of a typical step (N).
    pub amplitude_n: f64,
    /// Relative step-to-step amplitude jitter (fraction of amplitude).
    pub amplitude_jitter_frac: f64,
    /// Time between consecutive steps (s).
    pub step_period_s: f64,
    /// Absolute step-to-step period jitter (s).
    pub step_period_jitter_s: f64,
    /// Distance advanced per step (m).
    pub stride_m: f64,
}

impl PersonGaitModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pulse_duration_s", self.pulse_duration_s),
            ("amplitude_n", self.amplitude_n),
            ("step_period_s", self.step_period_s),
            ("stride_m", self.stride_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        let nonneg = [
            ("amplitude_jitter_frac", self.amplitude_jitter_frac),
            ("step_period_jitter_s", self.step_period_jitter_s),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be nonnegative and finite, got {v}"),
                });
            }
        }
        if self.amplitude_jitter_frac >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "amplitude_jitter_frac",
                reason: "must stay below 1 so amplitudes remain positive".into(),
            });
        }
        if self.step_period_jitter_s >= self.step_period_s {
            return Err(Error::InvalidParameter {
                name: "step_period_jitter_s",
                reason: "must stay below the step period".into(),
            });
        }
        Ok(())
    }
}

/// Ground truth for one simulated impact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub location_m: f64,
    pub onset_s: f64,
    pub amplitude_n: f64,
    pub duration_s: f64,
}

/// Fixed sensor placement on the beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub sensors: Vec<(String, f64)>,
}

impl SensorLayout {
    /// `n` sensors evenly spaced over the interior of the span.
    pub fn evenly_spaced(n: usize, length_m: f64) -> Self {
        let sensors = (1..=n)
            .map(|i| {
                (
                    format!("s{i}"),
                    length_m * i as f64 / (n + 1) as f64,
                )
            })
            .collect();
        Self { sensors }
    }
}

fn render(
    beam: &BeamModel,
    attenuation: Option<&AttenuationModel>,
    layout: &SensorLayout,
    forces: &[ForceEvent],
    sample_rate_hz: f64,
    duration_s: f64,
) -> Result<Vec<VibrationTrace>> {
    layout
        .sensors
        .iter()
        .map(|(id, pos)| {
            modal_response_with(beam, attenuation, forces, id, *pos, sample_rate_hz, duration_s)
        })
        .collect()
}

/// Simulate one walk from `start_m` toward `end_m`, emitting one trace
/// per sensor plus the ground-truth step list. Randomness (step timing
/// and force jitter) is drawn from `rng` only.
#[allow(clippy::too_many_arguments)]
pub fn simulate_walk<R: Rng>(
    beam: &BeamModel,
    attenuation: Option<&AttenuationModel>,
    gait: &PersonGaitModel,
    layout: &SensorLayout,
    start_m: f64,
    end_m: f64,
    sample_rate_hz: f64,
    rng: &mut R,
) -> Result<(Vec<VibrationTrace>, Vec<StepRecord>)> {
    beam.validate()?;
    gait.validate()?;
    if start_m == end_m {
        return Err(Error::InvalidParameter {
            name: "start_m/end_m",
            reason: "walk needs a nonzero path".into(),
        });
    }
    let direction = (end_m - start_m).signum();
    let mut forces = Vec::new();
    let mut records = Vec::new();
    let mut x = start_m;
    let mut t = 0.25; // settle time before the first step
    while (end_m - x) * direction >= 0.0 {
        // keep contacts strictly inside the span
        let margin = 1e-3 * beam.length_m;
        let loc = x.clamp(margin, beam.length_m - margin);
        let amplitude = gait.amplitude_n
            * (1.0 + gait.amplitude_jitter_frac * rng.gen_range(-1.0..1.0));
        let onset = t + gait.step_period_jitter_s * rng.gen_range(-1.0..1.0);
        let onset = onset.max(0.0);
        forces.push(ForceEvent {
            kind: ForceKind::Footstep,
            location_m: loc,
            amplitude_n: amplitude,
            pulse: ImpulseShape {
                duration_s: gait.pulse_duration_s,
            },
            onset_s: onset,
        });
        records.push(StepRecord {
            location_m: loc,
            onset_s: onset,
            amplitude_n: amplitude,
            duration_s: gait.pulse_duration_s,
        });
        x += direction * gait.stride_m;
        t += gait.step_period_s;
    }
    if forces.is_empty() {
        return Err(Error::InvalidParameter {
            name: "stride_m",
            reason: "no steps fit on the requested path".into(),
        });
    }
    let last_end = forces
        .iter()
        .map(|f| f.onset_s + f.pulse.duration_s)
        .fold(0.0_f64, f64::max);
    let traces = render(
        beam,
        attenuation,
        layout,
        &forces,
        sample_rate_hz,
        last_end + TAIL_S,
    )?;
    Ok((traces, records))
}

/// Parameters of a repeated stationary impulse (calibration drops or
/// in-place stamps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseSequence {
    pub kind: ForceKind,
    pub location_m: f64,
    pub amplitude_n: f64,
    /// Relative amplitude jitter per impact (0 for exactly repeatable).
    pub amplitude_jitter_frac: f64,
    pub pulse_duration_s: f64,
    pub n_impacts: usize,
    pub spacing_s: f64,
}

impl ImpulseSequence {
    pub fn validate(&self) -> Result<()> {
        if self.n_impacts == 0 {
            return Err(Error::InvalidParameter {
                name: "n_impacts",
                reason: "need at least one impact".into(),
            });
        }
        let positive = [
            ("amplitude_n", self.amplitude_n),
            ("pulse_duration_s", self.pulse_duration_s),
            ("spacing_s", self.spacing_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter_frac) {
            return Err(Error::InvalidParameter {
                name: "amplitude_jitter_frac",
                reason: "must be in [0, 1)".into(),
            });
        }
        Ok(())
    }
}

/// Simulate a sequence of identical-location impulses. Amplitude jitter
/// (if any) is drawn from `rng`.
pub fn impulse_sequence<R: Rng>(
    beam: &BeamModel,
    attenuation: Option<&AttenuationModel>,
    layout: &SensorLayout,
    seq: &ImpulseSequence,
    sample_rate_hz: f64,
    rng: &mut R,
) -> Result<(Vec<VibrationTrace>, Vec<StepRecord>)> {
    beam.validate()?;
    seq.validate()?;
    let mut forces = Vec::new();
    let mut records = Vec::new();
    for i in 0..seq.n_impacts {
        let onset = 0.25 + i as f64 * seq.spacing_s;
        let amplitude = if seq.amplitude_jitter_frac > 0.0 {
            seq.amplitude_n * (1.0 + seq.amplitude_jitter_frac * rng.gen_range(-1.0..1.0))
        } else {
            seq.amplitude_n
        };
        forces.push(ForceEvent {
            kind: seq.kind,
            location_m: seq.location_m,
            amplitude_n: amplitude,
            pulse: ImpulseShape {
                duration_s: seq.pulse_duration_s,
            },
            onset_s: onset,
        });
        records.push(StepRecord {
            location_m: seq.location_m,
            onset_s: onset,
            amplitude_n: amplitude,
            duration_s: seq.pulse_duration_s,
        });
    }
    let last_end = records.last().expect("n_impacts >= 1").onset_s + seq.pulse_duration_s;
    let traces = render(
        beam,
        attenuation,
        layout,
        &forces,
        sample_rate_hz,
        last_end + TAIL_S,
    )?;
    Ok((traces, records))
}

/// One calibration location's worth of ball-drop output: the traces
/// (one per sensor) plus the ground-truth impact list, all labeled with
/// the excitation location.
#[derive(Debug, Clone, PartialEq)]
pub struct DropSurveyLocation {
    pub location_m: f64,
    pub traces: Vec<VibrationTrace>,
    pub records: Vec<StepRecord>,
}

/// Calibration ball-drop survey: at each listed location, `repeats`
/// 5 ms drops of near-identical force (0.1% seeded amplitude jitter),
/// one labeled trace set per location.
#[allow(clippy::too_many_arguments)]
pub fn ball_drop_sequence<R: Rng>(
    beam: &BeamModel,
    attenuation: Option<&AttenuationModel>,
    layout: &SensorLayout,
    locations: &[f64],
    amplitude_n: f64,
    repeats: usize,
    spacing_s: f64,
    sample_rate_hz: f64,
    rng: &mut R,
) -> Result<Vec<DropSurveyLocation>> {
    if locations.is_empty() {
        return Err(Error::InvalidParameter {
            name: "locations",
            reason: "ball-drop survey needs at least one location".into(),
        });
    }
    locations
        .iter()
        .map(|&location_m| {
            let (traces, records) = impulse_sequence(
                beam,
                attenuation,
                layout,
                &ImpulseSequence {
                    kind: ForceKind::BallDrop,
                    location_m,
                    amplitude_n,
                    amplitude_jitter_frac: BALL_DROP_JITTER_FRAC,
                    pulse_duration_s: BALL_DROP_DURATION_S,
                    n_impacts: repeats,
                    spacing_s,
                },
                sample_rate_hz,
                rng,
            )?;
            Ok(DropSurveyLocation {
                location_m,
                traces,
                records,
            })
        })
        .collect()
}

/// Evenly spaced interior calibration points: x_i = L*(i+1)/(n+1).
pub fn calibration_grid(length_m: f64, n_points: usize) -> Vec<f64> {
    (1..=n_points)
        .map(|i| length_m * i as f64 / (n_points + 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn beam() -> BeamModel {
        BeamModel {
            youngs_modulus_pa: 1.1e10,
            second_moment_m4: 6.64e-4,
            density_kg_m3: 500.0,
            area_m2: 0.1,
            damping_per_s: 3.0,
            length_m: 10.0,
            n_modes: 8,
        }
    }

    fn gait() -> PersonGaitModel {
        PersonGaitModel {
            person_id: "p1".into(),
            pulse_duration_s: 0.06,
            amplitude_n: 700.0,
            amplitude_jitter_frac: 0.1,
            step_period_s: 0.6,
            step_period_jitter_s: 0.02,
            stride_m: 0.7,
        }
    }

    #[test]
    fn walk_is_deterministic_given_seed() {
        let layout = SensorLayout::evenly_spaced(2, 10.0);
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let (ta, ra) =
            simulate_walk(&beam(), None, &gait(), &layout, 1.0, 9.0, 2000.0, &mut r1).unwrap();
        let (tb, rb) =
            simulate_walk(&beam(), None, &gait(), &layout, 1.0, 9.0, 2000.0, &mut r2).unwrap();
        assert_eq!(ra, rb);
        for (a, b) in ta.iter().zip(&tb) {
            assert_eq!(a.samples(), b.samples());
        }
    }

    #[test]
    fn walk_covers_the_path() {
        let layout = SensorLayout::evenly_spaced(1, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (traces, records) =
            simulate_walk(&beam(), None, &gait(), &layout, 1.0, 9.0, 2000.0, &mut rng).unwrap();
        // 1.0 -> 9.0 at 0.7 m stride: 12 steps land inside [1, 9]
        assert_eq!(records.len(), 12);
        assert!(records.first().unwrap().location_m >= 0.9);
        assert!(records.last().unwrap().location_m <= 9.1);
        assert_eq!(traces.len(), 1);
        assert!(traces[0].duration_s() > records.last().unwrap().onset_s);
        // onsets increase monotonically at roughly the step period
        for pair in records.windows(2) {
            assert!(pair[1].onset_s > pair[0].onset_s);
        }
    }

    #[test]
    fn drops_repeat_at_fixed_spacing() {
        let layout = SensorLayout::evenly_spaced(2, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let survey = ball_drop_sequence(
            &beam(),
            None,
            &layout,
            &[4.0],
            300.0,
            5,
            1.0,
            2000.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(survey.len(), 1);
        let loc = &survey[0];
        assert_eq!(loc.records.len(), 5);
        assert_eq!(loc.traces.len(), 2);
        for pair in loc.records.windows(2) {
            assert!((pair[1].onset_s - pair[0].onset_s - 1.0).abs() < 1e-12);
        }
        for r in &loc.records {
            assert_eq!(r.location_m, 4.0);
            // near-identical forces: jitter stays within 0.1%
            assert!((r.amplitude_n - 300.0).abs() <= 0.001 * 300.0 + 1e-9);
        }
    }

    #[test]
    fn drop_survey_counts_locations_times_repeats() {
        let layout = SensorLayout::evenly_spaced(1, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = calibration_grid(10.0, 9);
        let survey = ball_drop_sequence(
            &beam(),
            None,
            &layout,
            &grid,
            300.0,
            5,
            1.0,
            2000.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(survey.len(), 9);
        let total: usize = survey.iter().map(|l| l.records.len()).sum();
        assert_eq!(total, 45);
        for (l, &loc) in survey.iter().zip(&grid) {
            assert!(l.records.iter().all(|r| r.location_m == loc));
        }
    }

    #[test]
    fn drop_survey_rejects_empty_location_list() {
        let layout = SensorLayout::evenly_spaced(1, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let err = ball_drop_sequence(
            &beam(),
            None,
            &layout,
            &[],
            300.0,
            5,
            1.0,
            2000.0,
            &mut rng,
        );
        assert!(matches!(err, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn grid_points_are_interior_and_even() {
        let grid = calibration_grid(10.0, 9);
        assert_eq!(grid.len(), 9);
        assert!((grid[0] - 1.0).abs() < 1e-12);
        assert!((grid[8] - 9.0).abs() < 1e-12);
        for p in grid.windows(2) {
            assert!((p[1] - p[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_gait_rejected() {
        let mut g = gait();
        g.amplitude_jitter_frac = 1.5;
        assert!(g.validate().is_err());
        let mut g = gait();
        g.step_period_jitter_s = 1.0;
        assert!(g.validate().is_err());
    }
}
