//! Switch demodulation of polarimeter traces.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::expsim::{PolarimeterTrace, SwitchSchedule};
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemodResult {
    /// `chi_on - chi_off` (rad).
    pub delta_chi: f64,
    pub delta_chi_sigma: f64,
    /// `psi_on - psi_off` (rad).
    pub delta_psi: f64,
    pub delta_psi_sigma: f64,
    /// `2 sqrt(dchi^2 + dpsi^2)`, signed like `dchi`.
    pub phase: f64,
    pub phase_sigma: f64,
    /// Half-periods used (first and last are dropped as possibly partial).
    pub segments: usize,
    pub samples_used: usize,
}

struct Segment {
    on: bool,
    chi: f64,
    psi: f64,
}

/// Splits the trace on the drive signal, drops samples within
/// `schedule.transition_halfwidth` of each drive edge, and forms the
/// on/off difference.
///
/// Each interior half-period is compared with the mean of its two
/// neighbours (an ABA difference), which cancels any linear drift exactly and
/// suppresses slower disturbances quadratically.
pub fn demodulate_trace(trace: &PolarimeterTrace, schedule: &SwitchSchedule) -> Result<DemodResult> {
    trace.validate()?;
    schedule.validate()?;
    let s = &trace.samples;
    ensure(s.len() >= 4, || "trace is too short to demodulate".into())?;

    let edges: Vec<f64> = s
        .windows(2)
        .filter(|w| w[0].drive != w[1].drive)
        .map(|w| 0.5 * (w[0].t + w[1].t))
        .collect();
    let near_edge = |t: f64| {
        let i = edges.partition_point(|&e| e < t);
        let d_next = edges.get(i).map_or(f64::INFINITY, |e| e - t);
        let d_prev = if i > 0 { t - edges[i - 1] } else { f64::INFINITY };
        d_next.min(d_prev) < schedule.transition_halfwidth
    };

    // Runs of equal drive, before cutting, define the half-periods.
    let mut runs: Vec<(bool, Vec<usize>)> = Vec::new();
    for (i, x) in s.iter().enumerate() {
        let on = x.drive == 1;
        match runs.last_mut() {
            Some((state, idx)) if *state == on => idx.push(i),
            _ => runs.push((on, vec![i])),
        }
    }
    if runs.len() < 5 {
        return Err(Error::Validation(format!(
            "trace contains {} drive half-periods, at least 5 are needed",
            runs.len()
        )));
    }
    let interior = &runs[1..runs.len() - 1];

    let mut segs = Vec::with_capacity(interior.len());
    let mut used = 0;
    for (on, idx) in interior {
        let kept: Vec<usize> = idx.iter().copied().filter(|&i| !near_edge(s[i].t)).collect();
        if kept.len() < 2 {
            return Err(Error::Validation(format!(
                "half-period at t = {:.3} s keeps {} samples after the edge cut, at least 2 are needed",
                s[idx[0]].t,
                kept.len()
            )));
        }
        used += kept.len();
        let chi: Vec<f64> = kept.iter().map(|&i| s[i].chi).collect();
        let psi: Vec<f64> = kept.iter().map(|&i| s[i].psi).collect();
        segs.push(Segment { on: *on, chi: mean(&chi), psi: mean(&psi) });
    }

    let aba = |f: fn(&Segment) -> f64| -> Vec<f64> {
        segs.windows(3)
            .map(|w| {
                let d = f(&w[1]) - 0.5 * (f(&w[0]) + f(&w[2]));
                if w[1].on {
                    d
                } else {
                    -d
                }
            })
            .collect()
    };
    let dchi = aba(|g| g.chi);
    let dpsi = aba(|g| g.psi);
    let n = dchi.len() as f64;
    // Neighbouring ABA differences share half-periods; for white noise the
    // variance of their mean is 8/3 times the naive std^2/n.
    let sem = |xs: &[f64]| {
        if xs.len() < 2 {
            f64::NAN
        } else {
            std_dev(xs) * (8.0f64 / 3.0).sqrt() / n.sqrt()
        }
    };
    let (delta_chi, delta_psi) = (mean(&dchi), mean(&dpsi));
    let (delta_chi_sigma, delta_psi_sigma) = (sem(&dchi), sem(&dpsi));
    let r = delta_chi.hypot(delta_psi);
    let phase = 2.0 * r * if delta_chi < 0.0 { -1.0 } else { 1.0 };
    let phase_sigma = if r > 0.0 {
        2.0 * (delta_chi * delta_chi_sigma).hypot(delta_psi * delta_psi_sigma) / r
    } else {
        2.0 * delta_chi_sigma
    };
    Ok(DemodResult {
        delta_chi,
        delta_chi_sigma,
        delta_psi,
        delta_psi_sigma,
        phase,
        phase_sigma,
        segments: segs.len(),
        samples_used: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsim::{simulate_polarimeter, CountingPlan, ExperimentConfig, NoiseConfig, TraceSample};
    use crate::sagnac::{sagnac_phase, InterferometerGeometry, SwitchState, OMEGA_EARTH_CALIBRATION};

    fn cfg(noise: NoiseConfig) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(InterferometerGeometry::vienna_loop(), CountingPlan { record_time: 1.0 });
        c.schedule = SwitchSchedule::cw();
        c.noise = noise;
        c.omega = OMEGA_EARTH_CALIBRATION;
        c
    }

    #[test]
    fn noiseless_inversion() {
        let c = cfg(NoiseConfig::silent());
        let tr = simulate_polarimeter(&c, 200.0, 0).unwrap();
        let d = demodulate_trace(&tr, &c.schedule).unwrap();
        let phi = sagnac_phase(&c.geometry, c.omega, SwitchState::On);
        assert!((d.phase - phi).abs() < 1e-9);
        assert!((phi - 2.83e-3).abs() < 5e-6);
        // 40 half-periods, the outer two dropped; two samples cut per edge.
        assert_eq!(d.segments, 38);
        assert_eq!(d.samples_used, 38 * 98);
    }

    #[test]
    fn flat_trace_gives_zero() {
        let samples = (0..2000)
            .map(|i| {
                let t = (i as f64 + 0.5) / 20.0;
                TraceSample { t, psi: 0.2, chi: -0.1, drive: u8::from((t / 5.0).floor() as i64 % 2 == 0) }
            })
            .collect();
        let tr = PolarimeterTrace { sample_rate: 20.0, samples };
        let d = demodulate_trace(&tr, &SwitchSchedule::cw()).unwrap();
        assert!(d.phase.abs() < 1e-15);
    }

    #[test]
    fn drift_rejection() {
        let base = cfg(NoiseConfig::silent());
        let reference = demodulate_trace(&simulate_polarimeter(&base, 300.0, 1).unwrap(), &base.schedule).unwrap();
        let mut drifting = base;
        drifting.noise.phase_drift_rate = 2e-4;
        let tr = simulate_polarimeter(&drifting, 300.0, 1).unwrap();
        let d = demodulate_trace(&tr, &drifting.schedule).unwrap();
        assert!((d.phase - reference.phase).abs() < 1e-12);

        // Slow sinusoid well below the switching frequency.
        let mut tr = simulate_polarimeter(&base, 1000.0, 1).unwrap();
        for s in &mut tr.samples {
            s.chi += 5e-3 * (std::f64::consts::TAU * 0.01 * s.t + 0.4).sin();
        }
        let d = demodulate_trace(&tr, &base.schedule).unwrap();
        assert!((d.phase - reference.phase).abs() < 0.02 * reference.phase, "{} vs {}", d.phase, reference.phase);
    }

    #[test]
    fn noisy_sigma_is_calibrated() {
        let mut noise = NoiseConfig::silent();
        noise.polarimeter_noise_sigma = 1e-3;
        let c = cfg(noise);
        let phi = sagnac_phase(&c.geometry, c.omega, SwitchState::On);
        let z: Vec<f64> = (0..200)
            .map(|seed| {
                let d = demodulate_trace(&simulate_polarimeter(&c, 200.0, seed).unwrap(), &c.schedule).unwrap();
                (d.phase - phi) / d.phase_sigma
            })
            .collect();
        let sd = std_dev(&z);
        assert!((0.8..1.25).contains(&sd), "pull width {sd}");
        assert!(mean(&z).abs() < 0.25);
    }

    #[test]
    fn too_few_samples_per_half_period() {
        let samples = (0..40)
            .map(|i| {
                let t = (i as f64 + 0.5) / 0.4;
                TraceSample { t, psi: 0.0, chi: 0.0, drive: (i % 2) as u8 }
            })
            .collect();
        let tr = PolarimeterTrace { sample_rate: 0.4, samples };
        let sched = SwitchSchedule { frequency: 0.2, duty: 0.5, transition_halfwidth: 0.1 };
        assert!(demodulate_trace(&tr, &sched).is_err());
    }
}
