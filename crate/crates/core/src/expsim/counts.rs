use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CountRecord, ExperimentConfig};
use crate::error::{ensure, Error, Result};
use crate::probe::ProbeKind;
use crate::sagnac::{sagnac_phase, SwitchState};
use crate::stats::mix_seed;

/// Stream reserved for the sequential random-walk drift.
const DRIFT_STREAM: u64 = u64::MAX;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only fails for non-positive or non-finite means.
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

pub(crate) fn gaussian<R: rand::Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map(|d| d.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Expected `(n_h, n_v, n_hv)` for one record at the realised bias phase
/// `phi0` (nominal plus motor and drift errors).
///
/// The fringe argument is `k (phi0 - phi_s) + setpoint` so that the fitted
/// phase falls by `k phi_s` when the rotation signal is switched on.
pub fn expected_counts(
    kind: ProbeKind,
    cfg: &ExperimentConfig,
    phi0: f64,
    switch: SwitchState,
    duration: f64,
) -> Result<(f64, f64, f64)> {
    kind.validate()?;
    let phi_s = sagnac_phase(&cfg.geometry, cfg.omega, switch);
    let k = f64::from(kind.phase_multiplier());
    let arg = k * (phi0 - phi_s) + cfg.optics.setpoint_offset;
    let c = arg.cos();
    let trans = switch.transmission();
    let noise = &cfg.noise;
    match kind {
        ProbeKind::SinglePhoton => {
            let v = cfg.optics.single_photon_visibility;
            let r = cfg.optics.channel_ratio;
            let total = cfg.rates.heralded_single_rate * duration * trans;
            let a_v = 2.0 * total / (1.0 + r);
            let a_h = r * a_v;
            // Heralded channels only see darks that coincide with a trigger.
            let dark = noise.dark_rate * cfg.rates.trigger_rate * noise.coincidence_window * duration;
            let n_h = a_h * (1.0 + v * c) / 2.0 + dark;
            let n_v = a_v * (1.0 - v * c) / 2.0 + dark;
            Ok((n_h, n_v, 0.0))
        }
        ProbeKind::Noon(_) => {
            let v = 1.0 - cfg.optics.distinguishability;
            let pairs = cfg.rates.pair_rate_detected * duration * trans;
            let p11 = 0.5 * (1.0 + v * c);
            // A bunched pair fires one of the two detectors at random.
            let single = pairs * (p11 + (1.0 - p11) / 2.0);
            let r1 = single / duration + noise.dark_rate;
            let accidental = r1 * r1 * noise.coincidence_window * duration;
            Ok((single + noise.dark_rate * duration, single + noise.dark_rate * duration, pairs * p11 + accidental))
        }
        ProbeKind::Classical => Err(Error::Validation(
            "classical light is measured with the polarimeter, not by counting".into(),
        )),
    }
}

/// Per-record phase drift at each bias index, evaluated at the record midpoint.
fn drift_offsets(cfg: &ExperimentConfig, n: usize, seed: u64) -> Vec<f64> {
    let t = cfg.plan.record_time;
    let mut rng = stream_rng(seed, DRIFT_STREAM);
    let mut walk = 0.0;
    (0..n)
        .map(|k| {
            // Half a record to the first midpoint, a full record between midpoints.
            let dt = if k == 0 { 0.5 * t } else { t };
            walk += gaussian(cfg.noise.phase_random_walk * dt.sqrt(), &mut rng);
            cfg.noise.phase_drift_rate * (k as f64 + 0.5) * t + walk
        })
        .collect()
}

/// Count records for every bias phase, `On` then `Off` at each phase.
///
/// Bias index `k` draws from ChaCha stream `k` of `seed`: first the motor
/// error, shared by both switch states, then the Poisson counts.
pub fn simulate_counts(
    kind: ProbeKind,
    cfg: &ExperimentConfig,
    phi0_list: &[f64],
    seed: u64,
) -> Result<Vec<CountRecord>> {
    ensure(!phi0_list.is_empty(), || "bias phase list is empty".into())?;
    ensure(phi0_list.iter().all(|p| p.is_finite()), || "bias phases must be finite".into())?;
    cfg.validate()?;
    kind.validate()?;
    if kind == ProbeKind::Classical {
        return Err(Error::Validation(
            "classical light is measured with the polarimeter, not by counting".into(),
        ));
    }
    let drift = drift_offsets(cfg, phi0_list.len(), seed);
    let per_phase: Vec<Result<[CountRecord; 2]>> = phi0_list
        .par_iter()
        .enumerate()
        .map(|(k, &phi0)| {
            let mut rng = stream_rng(seed, k as u64);
            let motor = gaussian(cfg.noise.motor_repeatability_sigma, &mut rng);
            let actual = phi0 + motor + drift[k];
            let mut out = [None, None];
            for (slot, switch) in out.iter_mut().zip(SwitchState::BOTH) {
                let duration = cfg.schedule.usable_time(cfg.plan.record_time, switch);
                let (mh, mv, mhv) = expected_counts(kind, cfg, actual, switch, duration)?;
                *slot = Some(CountRecord {
                    theta: cfg.geometry.frame_angle,
                    phi0,
                    switch,
                    duration,
                    n_h: poisson(mh, &mut rng),
                    n_v: poisson(mv, &mut rng),
                    n_hv: poisson(mhv, &mut rng),
                });
            }
            let [on, off] = out;
            Ok([on.expect("filled"), off.expect("filled")])
        })
        .collect();
    let mut records = Vec::with_capacity(2 * phi0_list.len());
    for pair in per_phase {
        records.extend(pair?);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub theta: f64,
    pub records: Vec<CountRecord>,
}

pub type AngleSweep = Vec<SweepEntry>;

/// Runs [`simulate_counts`] at each frame angle. Angle `i` uses the seed
/// `mix_seed(seed, i)`.
pub fn angle_sweep(
    kind: ProbeKind,
    cfg: &ExperimentConfig,
    theta_list: &[f64],
    phi0_list: &[f64],
    seed: u64,
) -> Result<AngleSweep> {
    ensure(!theta_list.is_empty(), || "frame angle list is empty".into())?;
    theta_list
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let mut c = *cfg;
            c.geometry = c.geometry.at_frame_angle(theta);
            let records = simulate_counts(kind, &c, phi0_list, mix_seed(seed, i as u64))?;
            Ok(SweepEntry { theta, records })
        })
        .collect()
}
