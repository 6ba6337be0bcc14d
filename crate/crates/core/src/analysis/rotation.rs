//! Earth-phase extraction, angle sweeps and scale-factor calibration.

use nalgebra::{Matrix2, Vector2};
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fringe::FringeFit;
use super::mc::McResult;
use crate::error::{ensure, Error, Result};
use crate::expsim::counts::{gaussian, stream_rng};
use crate::sagnac::SwitchState;
use crate::stats::{mean_std, wrap_phase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthPhaseResult {
    pub phi_on: f64,
    pub phi_on_sigma: f64,
    pub phi_off: f64,
    pub phi_off_sigma: f64,
    /// `phi_off - phi_on` wrapped into (-pi, pi].
    pub phi_e: f64,
    pub phi_e_sigma: f64,
}

/// Earth phase from two independent fits, sigmas combined in quadrature.
pub fn extract_earth_phase(fit_on: &FringeFit, fit_off: &FringeFit) -> Result<EarthPhaseResult> {
    if !fit_on.converged || !fit_off.converged {
        return Err(Error::FitFailed("earth phase needs two converged fits".into()));
    }
    ensure(fit_on.model == fit_off.model, || "on and off fits use different models".into())?;
    Ok(EarthPhaseResult {
        phi_on: fit_on.phase,
        phi_on_sigma: fit_on.phase_sigma,
        phi_off: fit_off.phase,
        phi_off_sigma: fit_off.phase_sigma,
        phi_e: wrap_phase(fit_off.phase - fit_on.phase),
        phi_e_sigma: fit_on.phase_sigma.hypot(fit_off.phase_sigma),
    })
}

/// Earth phase from a Monte-Carlo run, which keeps the on/off correlation
/// of the bias-phase noise.
pub fn earth_phase_from_mc(mc: &McResult) -> Result<EarthPhaseResult> {
    let (on, off) = match (mc.state(SwitchState::On), mc.state(SwitchState::Off)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Validation("Monte-Carlo result lacks one switch state".into())),
    };
    let (phi_e, phi_e_sigma) = mc.earth_phase.expect("both states present");
    Ok(EarthPhaseResult {
        phi_on: on.phase(),
        phi_on_sigma: on.phase_sigma(),
        phi_off: off.phase(),
        phi_off_sigma: off.phase_sigma(),
        phi_e,
        phi_e_sigma,
    })
}

/// A phase measured at one frame angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePhase {
    /// Frame angle (rad).
    pub theta: f64,
    pub phase: f64,
    pub sigma: f64,
}

/// Weighted fit of `amp cos(theta + offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    /// Rad.
    pub offset: f64,
    pub offset_sigma: f64,
}

fn check_angles(points: &[AnglePhase]) -> Result<()> {
    ensure(points.iter().all(|p| p.theta.is_finite() && p.phase.is_finite()), || "non-finite angle data".into())?;
    ensure(points.iter().all(|p| p.sigma > 0.0), || "phase sigmas must be positive".into())?;
    let mut th: Vec<f64> = points.iter().map(|p| p.theta).collect();
    th.sort_by(f64::total_cmp);
    th.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    ensure(th.len() >= 3, || format!("{} distinct frame angles, at least 3 are needed", th.len()))?;
    if th[th.len() - 1] - th[0] < 5f64.to_radians() {
        return Err(Error::IllConditioned("all frame angles lie within 5 degrees".into()));
    }
    Ok(())
}

/// Linear in `(a, b)` with `phase = a cos(theta) + b sin(theta)`; then
/// `amp = |(a, b)|`, `offset = atan2(-b, a)`.
fn cosine_wls(points: &[AnglePhase], jitter: Option<&[(f64, f64)]>) -> Result<CosineFit> {
    let mut ata = Matrix2::zeros();
    let mut atb = Vector2::zeros();
    for (i, p) in points.iter().enumerate() {
        let (theta, phase) = match jitter {
            Some(j) => (p.theta + j[i].0, p.phase + j[i].1),
            None => (p.theta, p.phase),
        };
        let w = 1.0 / (p.sigma * p.sigma);
        let row = Vector2::new(theta.cos(), theta.sin());
        ata += w * row * row.transpose();
        atb += w * phase * row;
    }
    let cov = ata
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("frame angles do not separate cos and sin".into()))?;
    let sol = cov * atb;
    let (a, b) = (sol[0], sol[1]);
    let amp = a.hypot(b);
    // Gradients of amp and offset with respect to (a, b).
    let ga = Vector2::new(a / amp, b / amp);
    let go = Vector2::new(b / (amp * amp), -a / (amp * amp));
    Ok(CosineFit {
        amplitude: amp,
        amplitude_sigma: (ga.transpose() * cov * ga)[0].sqrt(),
        offset: (-b).atan2(a),
        offset_sigma: (go.transpose() * cov * go)[0].sqrt(),
    })
}

pub fn fit_cosine(points: &[AnglePhase]) -> Result<CosineFit> {
    check_angles(points)?;
    cosine_wls(points, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Scale factor (s): MC mean, or the direct fit when no samples were drawn.
    pub scale_factor: f64,
    pub scale_factor_sigma: f64,
    /// Frame-angle offset (rad).
    pub theta_offset: f64,
    pub theta_offset_sigma: f64,
    /// Direct fit of the unperturbed data.
    pub nominal_scale_factor: f64,
    pub nominal_theta_offset: f64,
    pub mc_samples: usize,
}

/// Angle half-width of the uniform frame-angle resampling (1 degree).
pub const ANGLE_JITTER: f64 = std::f64::consts::PI / 180.0;

/// Fits `phi(theta) = S omega cos(theta + theta0)`.
///
/// Each MC sample redraws every phase from a Gaussian of its sigma and every
/// angle uniformly within one degree, then refits. With `mc_samples == 0`
/// the direct fit and its linearised sigmas are returned.
pub fn calibrate_scale_factor(points: &[AnglePhase], omega: f64, mc_samples: usize, seed: u64) -> Result<CalibrationResult> {
    ensure(omega > 0.0, || "rotation rate must be positive".into())?;
    let nominal = fit_cosine(points)?;
    if mc_samples == 0 {
        return Ok(CalibrationResult {
            scale_factor: nominal.amplitude / omega,
            scale_factor_sigma: nominal.amplitude_sigma / omega,
            theta_offset: nominal.offset,
            theta_offset_sigma: nominal.offset_sigma,
            nominal_scale_factor: nominal.amplitude / omega,
            nominal_theta_offset: nominal.offset,
            mc_samples: 0,
        });
    }
    ensure(mc_samples >= 2, || "at least two MC samples are needed".into())?;
    let uniform = Uniform::new_inclusive(-ANGLE_JITTER, ANGLE_JITTER).expect("valid range");
    let fits: Vec<Result<CosineFit>> = (0..mc_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            let jitter: Vec<(f64, f64)> =
                points.iter().map(|p| (uniform.sample(&mut rng), gaussian(p.sigma, &mut rng))).collect();
            cosine_wls(points, Some(&jitter))
        })
        .collect();
    let fits: Vec<CosineFit> = fits.into_iter().collect::<Result<_>>()?;
    let s: Vec<f64> = fits.iter().map(|f| f.amplitude / omega).collect();
    let o: Vec<f64> = fits.iter().map(|f| wrap_phase(f.offset - nominal.offset)).collect();
    let (s_mean, s_sd) = mean_std(&s);
    let (o_mean, o_sd) = mean_std(&o);
    Ok(CalibrationResult {
        scale_factor: s_mean,
        scale_factor_sigma: s_sd,
        theta_offset: wrap_phase(nominal.offset + o_mean),
        theta_offset_sigma: o_sd,
        nominal_scale_factor: nominal.amplitude / omega,
        nominal_theta_offset: nominal.offset,
        mc_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    /// Phase at the maximising frame angle (rad).
    pub max_phase: f64,
    pub max_phase_sigma: f64,
    pub offset: f64,
    pub offset_sigma: f64,
    /// `max_phase / (k S)` (rad/s).
    pub omega: f64,
    pub omega_sigma: f64,
}

/// Fits the Earth phases of one probe over frame angle and converts the
/// amplitude to a rotation rate with the probe's phase multiplier `k`.
pub fn fit_angle_sweep(results: &[(f64, EarthPhaseResult)], k: u32, scale_factor: f64) -> Result<SweepFit> {
    ensure(k >= 1, || "phase multiplier must be at least 1".into())?;
    ensure(scale_factor > 0.0, || "scale factor must be positive".into())?;
    let pts: Vec<AnglePhase> =
        results.iter().map(|(t, r)| AnglePhase { theta: *t, phase: r.phi_e, sigma: r.phi_e_sigma }).collect();
    let fit = fit_cosine(&pts)?;
    let conv = f64::from(k) * scale_factor;
    Ok(SweepFit {
        max_phase: fit.amplitude,
        max_phase_sigma: fit.amplitude_sigma,
        offset: fit.offset,
        offset_sigma: fit.offset_sigma,
        omega: fit.amplitude / conv,
        omega_sigma: fit.amplitude_sigma / conv,
    })
}

/// `two / one` with first-order error propagation.
pub fn enhancement_factor(two: (f64, f64), one: (f64, f64)) -> Result<(f64, f64)> {
    let ((a, sa), (b, sb)) = (two, one);
    if b.abs() < 3.0 * sb || b == 0.0 {
        return Err(Error::UndefinedRatio(format!(
            "denominator {b:.4e} is within 3 sigma ({sb:.2e}) of zero"
        )));
    }
    let r = a / b;
    let sigma = if a == 0.0 { sa / b.abs() } else { r.abs() * ((sa / a).powi(2) + (sb / b).powi(2)).sqrt() };
    Ok((r, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fringe::{fit_points, FringeModel, FringePoint};

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    fn table(rows: &[(f64, f64, f64)]) -> Vec<(f64, EarthPhaseResult)> {
        rows.iter()
            .map(|&(t, p, s)| {
                (
                    deg(t),
                    EarthPhaseResult {
                        phi_on: 0.0,
                        phi_on_sigma: 0.0,
                        phi_off: p * 1e-3,
                        phi_off_sigma: 0.0,
                        phi_e: p * 1e-3,
                        phi_e_sigma: s * 1e-3,
                    },
                )
            })
            .collect()
    }

    pub(crate) fn table1() -> Vec<(f64, EarthPhaseResult)> {
        table(&[(-87.5, 0.23, 0.21), (-65.0, 1.00, 0.21), (-42.5, 2.14, 0.21), (-20.0, 2.66, 0.25), (2.5, 2.77, 0.18), (25.0, 2.59, 0.21)])
    }

    pub(crate) fn table2() -> Vec<(f64, EarthPhaseResult)> {
        table(&[(-87.5, 0.82, 0.65), (-65.0, 2.28, 0.65), (-42.5, 3.86, 0.65), (-20.0, 4.93, 0.76), (2.5, 5.51, 0.54), (25.0, 5.44, 0.69)])
    }

    #[test]
    fn earth_phase_examples() {
        let mk = |phase: f64| {
            let data: Vec<FringePoint> = (0..11)
                .map(|i| {
                    let x = -0.4 + 0.7 * i as f64;
                    FringePoint { x, y: FringeModel::TWO_PHOTON.value(&[1e4, 0.97, phase], x), sigma: 10.0 }
                })
                .collect();
            fit_points(FringeModel::TWO_PHOTON, &data).unwrap()
        };
        let (on, off) = (mk(-24.60e-3), mk(-19.09e-3));
        let r = extract_earth_phase(&on, &off).unwrap();
        assert!((r.phi_e - 5.51e-3).abs() < 1e-8);
        assert_eq!(extract_earth_phase(&on, &on).unwrap().phi_e, 0.0);
        let mut bad = on.clone();
        bad.converged = false;
        assert!(extract_earth_phase(&bad, &off).is_err());
    }

    #[test]
    fn table_sweeps() {
        let s = 38.8;
        let two = fit_angle_sweep(&table2(), 2, s).unwrap();
        assert!((two.max_phase - 5.5e-3).abs() < 0.1e-3, "{}", two.max_phase);
        assert!((two.max_phase_sigma - 0.4e-3).abs() < 0.06e-3, "{}", two.max_phase_sigma);
        assert!((two.omega - 7.1e-5).abs() < 0.05e-5);
        let one = fit_angle_sweep(&table1(), 1, s).unwrap();
        assert!((one.max_phase - 2.8e-3).abs() < 0.05e-3);
        assert!((one.max_phase_sigma - 0.1e-3).abs() < 0.03e-3);
        assert!((one.omega - 7.2e-5).abs() < 0.05e-5);
    }

    #[test]
    fn noiseless_sweep_exact() {
        let rows: Vec<(f64, EarthPhaseResult)> = [-60.0f64, -30.0, 0.0, 30.0]
            .iter()
            .map(|&t| {
                let p = 3e-3 * (deg(t) + 0.05).cos();
                (deg(t), EarthPhaseResult { phi_on: 0.0, phi_on_sigma: 0.0, phi_off: p, phi_off_sigma: 0.0, phi_e: p, phi_e_sigma: 1e-4 })
            })
            .collect();
        let f = fit_angle_sweep(&rows, 1, 1.0).unwrap();
        assert!((f.max_phase - 3e-3).abs() < 1e-15);
        assert!((f.offset - 0.05).abs() < 1e-12);
    }

    #[test]
    fn enhancement_examples() {
        let (r, s) = enhancement_factor((5.5, 0.4), (2.8, 0.1)).unwrap();
        assert!((r - 1.96).abs() < 0.01);
        assert!((s - 0.16).abs() < 0.005);
        let (r, s) = enhancement_factor((2.0, 0.1), (2.0, 0.1)).unwrap();
        assert_eq!(r, 1.0);
        assert!((s - 0.1 * 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(matches!(enhancement_factor((1.0, 0.1), (0.2, 0.1)), Err(Error::UndefinedRatio(_))));
    }

    fn cosine_points(s: f64, omega: f64, theta0: f64, shift: f64) -> Vec<AnglePhase> {
        (0..6)
            .map(|i| {
                let t = deg(-90.0 + 22.5 * i as f64);
                AnglePhase { theta: t + shift, phase: s * omega * (t + theta0).cos(), sigma: 2e-5 }
            })
            .collect()
    }

    #[test]
    fn calibration_exact_and_shifted() {
        let pts = cosine_points(40.0, 7.29e-5, 0.0, 0.0);
        let c = calibrate_scale_factor(&pts, 7.29e-5, 0, 0).unwrap();
        assert!((c.scale_factor - 40.0).abs() < 1e-8);
        assert!(c.theta_offset.abs() < 1e-8);
        let mc = calibrate_scale_factor(&pts, 7.29e-5, 2000, 3).unwrap();
        assert!((mc.nominal_scale_factor - 40.0).abs() < 1e-8);
        assert!((mc.scale_factor - 40.0).abs() < 3.0 * mc.scale_factor_sigma);

        let shifted = cosine_points(40.0, 7.29e-5, 0.0, deg(10.0));
        let c = calibrate_scale_factor(&shifted, 7.29e-5, 2000, 3).unwrap();
        assert!((c.theta_offset + deg(10.0)).abs() < 3.0 * c.theta_offset_sigma);
        assert!((c.nominal_theta_offset + deg(10.0)).abs() < 1e-9);
    }

    #[test]
    fn calibration_rejects_clustered_angles() {
        let pts: Vec<AnglePhase> = (0..4).map(|i| AnglePhase { theta: deg(i as f64), phase: 1e-3, sigma: 1e-5 }).collect();
        assert!(matches!(calibrate_scale_factor(&pts, 7.29e-5, 10, 0), Err(Error::IllConditioned(_))));
        assert!(calibrate_scale_factor(&pts[..2], 7.29e-5, 10, 0).is_err());
    }

    #[test]
    fn calibration_reproducible() {
        let pts = cosine_points(38.8, 7.29e-5, 0.001, 0.0);
        let a = calibrate_scale_factor(&pts, 7.29e-5, 500, 11).unwrap();
        let b = calibrate_scale_factor(&pts, 7.29e-5, 500, 11).unwrap();
        assert_eq!(a, b);
    }
}
