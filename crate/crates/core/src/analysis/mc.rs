//! Monte-Carlo propagation of counting and bias-phase noise into the fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fringe::{nlls, points_for, FringeFit, FringeModel, InitPolicy};
use crate::error::{ensure, Error, Result};
use crate::expsim::counts::{gaussian, poisson, stream_rng};
use crate::expsim::CountRecord;
use crate::sagnac::SwitchState;
use crate::stats::{mean_std, wrap_phase};

/// Sample counts for full-precision and quick runs.
pub const MC_SAMPLES_FULL: usize = 100_000;
pub const MC_SAMPLES_FAST: usize = 1_000;

/// MC summary of one switch state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub switch: SwitchState,
    /// Fit of the recorded data.
    pub nominal: FringeFit,
    /// Mean of each parameter over the samples, model order. The phase mean
    /// is taken on deviations from the nominal phase so wrapping cannot bias it.
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl StateSummary {
    pub fn phase(&self) -> f64 {
        *self.mean.last().expect("non-empty")
    }

    pub fn phase_sigma(&self) -> f64 {
        *self.sigma.last().expect("non-empty")
    }

    pub fn visibility(&self) -> f64 {
        self.mean[self.mean.len() - 2]
    }

    pub fn visibility_sigma(&self) -> f64 {
        self.sigma[self.sigma.len() - 2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub model: FringeModel,
    pub n_samples: usize,
    pub n_failed: usize,
    pub states: Vec<StateSummary>,
    /// `phi_off - phi_on` mean and sigma when both states are present.
    pub earth_phase: Option<(f64, f64)>,
}

impl McResult {
    pub fn state(&self, switch: SwitchState) -> Option<&StateSummary> {
        self.states.iter().find(|s| s.switch == switch)
    }
}

/// Resamples every record's counts as Poisson with the observed count as
/// mean, shifts each bias phase by a Gaussian of width `motor_sigma` shared
/// by all records at that phase, and refits every switch state.
///
/// Sample `s` uses ChaCha stream `s` of `seed`, so the result does not depend
/// on thread count.
pub fn mc_uncertainty(
    records: &[CountRecord],
    model: FringeModel,
    n_samples: usize,
    motor_sigma: f64,
    seed: u64,
) -> Result<McResult> {
    ensure(n_samples >= 2, || "at least two MC samples are needed".into())?;
    ensure(motor_sigma >= 0.0 && motor_sigma.is_finite(), || "motor sigma must be non-negative".into())?;
    ensure(!records.is_empty(), || "no count records".into())?;

    // Distinct bias phases, in order of first appearance.
    let mut phases: Vec<f64> = Vec::new();
    let index: Vec<usize> = records
        .iter()
        .map(|r| match phases.iter().position(|&p| p == r.phi0) {
            Some(i) => i,
            None => {
                phases.push(r.phi0);
                phases.len() - 1
            }
        })
        .collect();

    let switches: Vec<SwitchState> =
        SwitchState::BOTH.into_iter().filter(|s| records.iter().any(|r| r.switch == *s)).collect();
    let split = |recs: &[CountRecord], s: SwitchState| -> Vec<CountRecord> {
        recs.iter().filter(|r| r.switch == s).copied().collect()
    };

    let mut nominal = Vec::new();
    for &s in &switches {
        let pts = points_for(model, &split(records, s))?;
        let fit = nlls(model, &pts, &InitPolicy::MultiStart)?;
        if !fit.converged {
            return Err(Error::FitFailed(format!("nominal {} fit did not converge", s.as_str())));
        }
        nominal.push(fit);
    }

    let samples: Vec<Option<Vec<Vec<f64>>>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            let shifts: Vec<f64> = phases.iter().map(|_| gaussian(motor_sigma, &mut rng)).collect();
            let resampled: Vec<CountRecord> = records
                .iter()
                .zip(&index)
                .map(|(r, &i)| CountRecord {
                    phi0: r.phi0 + shifts[i],
                    n_h: poisson(r.n_h as f64, &mut rng),
                    n_v: poisson(r.n_v as f64, &mut rng),
                    n_hv: poisson(r.n_hv as f64, &mut rng),
                    ..*r
                })
                .collect();
            let mut out = Vec::with_capacity(switches.len());
            for (&sw, nom) in switches.iter().zip(&nominal) {
                let pts = points_for(model, &split(&resampled, sw)).ok()?;
                let fit = nlls(model, &pts, &InitPolicy::From(nom.params())).ok()?;
                if !fit.converged {
                    return None;
                }
                let mut p = fit.params();
                let last = p.len() - 1;
                p[last] = wrap_phase(p[last] - nom.phase);
                out.push(p);
            }
            Some(out)
        })
        .collect();

    let good: Vec<&Vec<Vec<f64>>> = samples.iter().flatten().collect();
    let n_failed = n_samples - good.len();
    if n_failed as f64 > 0.01 * n_samples as f64 {
        return Err(Error::FitFailed(format!(
            "{n_failed} of {n_samples} Monte-Carlo refits failed (limit 1%)"
        )));
    }

    let np = model.n_params();
    let mut states = Vec::new();
    for (si, (&sw, nom)) in switches.iter().zip(&nominal).enumerate() {
        let mut mean = Vec::with_capacity(np);
        let mut sigma = Vec::with_capacity(np);
        for j in 0..np {
            let xs: Vec<f64> = good.iter().map(|g| g[si][j]).collect();
            let (m, s) = mean_std(&xs);
            mean.push(if j == np - 1 { wrap_phase(m + nom.phase) } else { m });
            sigma.push(s);
        }
        states.push(StateSummary { switch: sw, nominal: nom.clone(), mean, sigma });
    }

    let earth_phase = (switches.len() == 2).then(|| {
        let base = wrap_phase(nominal[1].phase - nominal[0].phase);
        let xs: Vec<f64> = good
            .iter()
            .map(|g| wrap_phase(g[1][np - 1] - g[0][np - 1]))
            .collect();
        let (m, s) = mean_std(&xs);
        (wrap_phase(base + m), s)
    });

    Ok(McResult { model, n_samples, n_failed, states, earth_phase })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsim::{protocol_bias_phases, simulate_counts, CountingPlan, ExperimentConfig, NoiseConfig, OpticsConfig};
    use crate::probe::ProbeKind;
    use crate::sagnac::InterferometerGeometry;

    fn records(kind: ProbeKind, noise: NoiseConfig, t: f64, seed: u64) -> Vec<CountRecord> {
        let mut cfg = ExperimentConfig::new(InterferometerGeometry::vienna_loop(), CountingPlan { record_time: t });
        cfg.noise = noise;
        // Below unit visibility: a perfectly dark fringe makes the weights
        // of the minimum points themselves Poisson-limited.
        cfg.optics = OpticsConfig::default();
        simulate_counts(kind, &cfg, &protocol_bias_phases(kind), seed).unwrap()
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let recs = records(ProbeKind::TWO_PHOTON, NoiseConfig::default(), 10.0, 1);
        let a = mc_uncertainty(&recs, FringeModel::TWO_PHOTON, 200, 6e-3, 9).unwrap();
        let b = mc_uncertainty(&recs, FringeModel::TWO_PHOTON, 200, 6e-3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.states.len(), 2);
        assert!(a.earth_phase.is_some());
    }

    #[test]
    fn matches_fisher_without_motor_noise() {
        let recs = records(ProbeKind::TWO_PHOTON, NoiseConfig::silent(), 100.0, 2);
        let mc = mc_uncertainty(&recs, FringeModel::TWO_PHOTON, 2000, 0.0, 5).unwrap();
        for s in &mc.states {
            let ratio = s.phase_sigma() / s.nominal.phase_sigma;
            assert!((ratio - 1.0).abs() < 0.1, "MC/Fisher {ratio}");
        }
    }

    #[test]
    fn motor_noise_cancels_in_earth_phase() {
        let recs = records(ProbeKind::SinglePhoton, NoiseConfig::silent(), 100.0, 3);
        let quiet = mc_uncertainty(&recs, FringeModel::Single, 500, 0.0, 1).unwrap();
        let noisy = mc_uncertainty(&recs, FringeModel::Single, 500, 6e-3, 1).unwrap();
        let on = noisy.state(SwitchState::On).unwrap();
        assert!(on.phase_sigma() > 5.0 * quiet.state(SwitchState::On).unwrap().phase_sigma());
        let (_, se_quiet) = quiet.earth_phase.unwrap();
        let (_, se_noisy) = noisy.earth_phase.unwrap();
        assert!(se_noisy < 1.2 * se_quiet, "{se_noisy} vs {se_quiet}");
    }
}
