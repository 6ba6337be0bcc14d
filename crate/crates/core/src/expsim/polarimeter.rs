use serde::{Deserialize, Serialize};

use super::counts::{gaussian, stream_rng};
use super::ExperimentConfig;
use crate::error::{ensure, Result};
use crate::polarization::{ellipse_of, phase_shift, ClassicalChain, JonesMatrix};
use crate::sagnac::{sagnac_phase, SwitchState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub psi: f64,
    pub chi: f64,
    /// Switch drive at `t`: 1 for `On`, 0 for `Off`.
    pub drive: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarimeterTrace {
    pub sample_rate: f64,
    pub samples: Vec<TraceSample>,
}

impl PolarimeterTrace {
    pub fn validate(&self) -> Result<()> {
        ensure(self.sample_rate > 0.0, || "sample rate must be positive".into())?;
        ensure(self.samples.windows(2).all(|w| w[1].t > w[0].t), || {
            "trace times must be strictly increasing".into()
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// CW polarimeter trace under the switch drive.
///
/// Sample `i` sits at `(i + 1/2)/f_s` and integrates over its own sampling
/// window, so samples straddling a switch edge carry a mix of both levels.
/// The ellipse levels come from the ideal compensated chain; azimuth leakage
/// is a rotation of the output about the H/V Stokes axis by `asin(sqrt f)`.
pub fn simulate_polarimeter(cfg: &ExperimentConfig, total_time: f64, seed: u64) -> Result<PolarimeterTrace> {
    cfg.validate()?;
    let sched = &cfg.schedule;
    ensure(total_time >= 10.0 * sched.period() - 1e-9, || {
        format!("trace of {total_time} s covers fewer than 10 switch periods")
    })?;
    let fs = cfg.rates.cw_sample_rate;
    let chain = ClassicalChain::ideal(JonesMatrix::identity())?;
    let leak = phase_shift(cfg.noise.azimuth_leakage_fraction.sqrt().asin());
    let level = |switch: SwitchState| {
        let phi = sagnac_phase(&cfg.geometry, cfg.omega, switch);
        let e = ellipse_of(&leak.apply(&chain.output(phi)));
        (e.azimuth, e.ellipticity)
    };
    let (psi_on, chi_on) = level(SwitchState::On);
    let (psi_off, chi_off) = level(SwitchState::Off);

    let n = (total_time * fs).floor() as usize;
    let dt = 1.0 / fs;
    let mut rng = stream_rng(seed, 0);
    let mut walk = 0.0;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = (i as f64 + 0.5) * dt;
        let lo = i as f64 * dt;
        let on = (sched.time_in_state(lo + dt, SwitchState::On) - sched.time_in_state(lo, SwitchState::On)) / dt;
        walk += gaussian(cfg.noise.phase_random_walk * dt.sqrt(), &mut rng);
        let drift = cfg.noise.phase_drift_rate * t + walk;
        let chi = on * chi_on + (1.0 - on) * chi_off + drift + gaussian(cfg.noise.polarimeter_noise_sigma, &mut rng);
        let psi = on * psi_on + (1.0 - on) * psi_off + gaussian(cfg.noise.polarimeter_noise_sigma, &mut rng);
        let drive = u8::from(sched.state_at(t) == SwitchState::On);
        samples.push(TraceSample { t, psi, chi, drive });
    }
    Ok(PolarimeterTrace { sample_rate: fs, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsim::{CountingPlan, NoiseConfig, SwitchSchedule};
    use crate::sagnac::{InterferometerGeometry, OMEGA_EARTH_CALIBRATION};

    fn cw(noise: NoiseConfig) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(InterferometerGeometry::vienna_loop(), CountingPlan { record_time: 1.0 });
        cfg.schedule = SwitchSchedule::cw();
        cfg.noise = noise;
        cfg.omega = OMEGA_EARTH_CALIBRATION;
        cfg
    }

    #[test]
    fn noiseless_levels_and_alignment() {
        let cfg = cw(NoiseConfig::silent());
        let tr = simulate_polarimeter(&cfg, 100.0, 1).unwrap();
        tr.validate().unwrap();
        assert_eq!(tr.samples.len(), 2000);
        let phi = sagnac_phase(&cfg.geometry, cfg.omega, SwitchState::On);
        for s in &tr.samples {
            let want = if s.drive == 1 { phi / 2.0 } else { 0.0 };
            assert!((s.chi - want).abs() < 1e-9, "t={} chi={}", s.t, s.chi);
            assert!(s.psi.abs() < 1e-12);
        }
        assert!((phi / 2.0 - 1.413e-3).abs() < 2e-6);
    }

    #[test]
    fn leakage_preserves_quadrature_sum() {
        for f in [0.05, 0.1, 0.2, 0.3] {
            let mut noise = NoiseConfig::silent();
            noise.azimuth_leakage_fraction = f;
            let cfg = cw(noise);
            let tr = simulate_polarimeter(&cfg, 100.0, 1).unwrap();
            let on = tr.samples.iter().find(|s| s.drive == 1 && (s.t % 10.0) > 1.0).unwrap();
            let phi = sagnac_phase(&cfg.geometry, cfg.omega, SwitchState::On);
            let est = 2.0 * (on.chi * on.chi + on.psi * on.psi).sqrt();
            assert!((est / phi - 1.0).abs() < 1e-3, "f={f}");
            assert!(((on.psi / on.chi).abs() - (f / (1.0 - f)).sqrt()).abs() < 1e-4);
        }
    }

    #[test]
    fn too_short_rejected() {
        assert!(simulate_polarimeter(&cw(NoiseConfig::silent()), 50.0, 1).is_err());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let cfg = cw(NoiseConfig::default());
        let a = simulate_polarimeter(&cfg, 100.0, 4).unwrap();
        let b = simulate_polarimeter(&cfg, 100.0, 4).unwrap();
        assert_eq!(a, b);
    }
}
