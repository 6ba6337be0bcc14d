//! Shot-noise sensitivity of N00N-probed fiber gyroscopes, and the search for
//! the smallest square ring that resolves the general-relativistic rate.

use std::f64::consts::{LN_10, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::sagnac::{transmission, InterferometerGeometry, PhysicalConstants, Projection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    #[serde(default)]
    pub name: String,
    pub geometry: InterferometerGeometry,
    /// Fiber loss (dB/km).
    pub alpha: f64,
    /// Photon-pair (probe) rate into the interferometer (Hz).
    pub pair_rate_in: f64,
    /// Integration time (s).
    pub integration_time: f64,
    #[serde(default = "default_photons")]
    pub photons: u32,
    #[serde(default)]
    pub projection: Projection,
    /// Use this phase resolution instead of the shot-noise estimate, for
    /// instruments whose resolution was measured.
    #[serde(default)]
    pub measured_delta_phi: Option<f64>,
}

fn default_photons() -> u32 {
    2
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        ensure(self.alpha >= 0.0 && self.alpha.is_finite(), || format!("alpha must be non-negative, got {}", self.alpha))?;
        ensure(self.pair_rate_in > 0.0, || "pair_rate_in must be positive".into())?;
        ensure(self.integration_time > 0.0, || "integration_time must be positive".into())?;
        ensure(self.photons >= 1, || "photons must be at least 1".into())?;
        if let Some(d) = self.measured_delta_phi {
            ensure(d > 0.0, || "measured_delta_phi must be positive".into())?;
        }
        let p = self.geometry.projection_factor(self.projection);
        ensure(p > 0.0, || format!("projection factor {p} must be positive"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub name: String,
    /// End-to-end N-photon transmission.
    pub eta: f64,
    pub rate_out: f64,
    /// Phase resolution before projection (rad).
    pub delta_phi: f64,
    /// `delta_phi / p`, the phase resolution referred to the rotation axis.
    pub delta_phi_projected: f64,
    pub projection_factor: f64,
    pub scale_factor: f64,
    pub effective_area: f64,
    pub delta_omega: f64,
    /// `Omega_GR / delta_omega`.
    pub snr_vs_gr: f64,
}

/// `R_in 10^(-N alpha L / 10)`.
pub fn pair_rate_out(spec: &DesignSpec) -> f64 {
    spec.pair_rate_in * transmission(spec.alpha, spec.geometry.fiber_length, spec.photons)
}

/// Shot-noise phase resolution `1 / sqrt(2 R_out T)`, with both switch
/// states sharing the integration time.
pub fn phase_resolution(spec: &DesignSpec) -> f64 {
    spec.measured_delta_phi
        .unwrap_or_else(|| 1.0 / (2.0 * pair_rate_out(spec) * spec.integration_time).sqrt())
}

pub fn rotation_resolution(spec: &DesignSpec) -> Result<SensitivityReport> {
    rotation_resolution_with(spec, &PhysicalConstants::default())
}

pub fn rotation_resolution_with(spec: &DesignSpec, constants: &PhysicalConstants) -> Result<SensitivityReport> {
    spec.validate()?;
    constants.validate()?;
    let s = constants.scale_factor(&spec.geometry);
    let p = spec.geometry.projection_factor(spec.projection);
    let dphi = phase_resolution(spec);
    let domega = dphi / (s * p);
    Ok(SensitivityReport {
        name: spec.name.clone(),
        eta: transmission(spec.alpha, spec.geometry.fiber_length, spec.photons),
        rate_out: pair_rate_out(spec),
        delta_phi: dphi,
        delta_phi_projected: dphi / p,
        projection_factor: p,
        scale_factor: s,
        effective_area: spec.geometry.effective_area,
        delta_omega: domega,
        snr_vs_gr: constants.omega_gr() / domega,
    })
}

/// Inputs of the square-ring search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingProblem {
    /// Required `Omega_GR / delta_omega`.
    #[serde(default = "default_snr")]
    pub target_snr: f64,
    /// Site latitude (rad); the frame lies parallel to the ground.
    pub latitude: f64,
    pub alpha: f64,
    pub pair_rate_in: f64,
    pub integration_time: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default = "default_photons")]
    pub photons: u32,
    /// Search bounds: no design uses more turns or less fiber than this.
    #[serde(default = "default_max_turns")]
    pub max_turns: u32,
    #[serde(default = "default_min_length")]
    pub min_fiber_length: f64,
}

fn default_snr() -> f64 {
    3.0
}
fn default_wavelength() -> f64 {
    1550e-9
}
fn default_max_turns() -> u32 {
    100_000
}
fn default_min_length() -> f64 {
    100.0
}

impl RingProblem {
    /// Reference ring: Vienna latitude, standard single-mode fiber, 10 GHz.
    pub fn gfring(integration_time: f64) -> Self {
        Self {
            target_snr: 3.0,
            latitude: 48.2f64.to_radians(),
            alpha: 0.16,
            pair_rate_in: 10e9,
            integration_time,
            wavelength: 1550e-9,
            photons: 2,
            max_turns: default_max_turns(),
            min_fiber_length: default_min_length(),
        }
    }

    fn validate(&self) -> Result<()> {
        ensure(self.target_snr >= 0.0 && self.target_snr.is_finite(), || "target_snr must be non-negative".into())?;
        ensure(self.alpha > 0.0, || "the ring search needs a positive fiber loss".into())?;
        ensure(self.pair_rate_in > 0.0 && self.integration_time > 0.0, || "rate and time must be positive".into())?;
        ensure(self.latitude.sin() > 0.0, || "latitude must give a positive projection".into())?;
        ensure(self.max_turns >= 1 && self.min_fiber_length > 0.0, || "invalid search bounds".into())?;
        ensure(self.photons >= 1, || "photons must be at least 1".into())
    }

    pub fn spec(&self, fiber_length: f64, turns: u32) -> Result<DesignSpec> {
        let geometry = InterferometerGeometry::square(fiber_length, turns, self.wavelength)?.at_latitude(self.latitude);
        Ok(DesignSpec {
            name: "GFRING".into(),
            geometry,
            alpha: self.alpha,
            pair_rate_in: self.pair_rate_in,
            integration_time: self.integration_time,
            photons: self.photons,
            projection: Projection::Latitude,
            measured_delta_phi: None,
        })
    }

    /// Closed-form `delta_omega` of a square ring; identical to
    /// `delta_phi / (S sin(latitude))` with `A = L^2 / (16 n_t)`.
    pub fn delta_omega(&self, fiber_length: f64, turns: u32, constants: &PhysicalConstants) -> f64 {
        let n = f64::from(self.photons);
        let loss = 10f64.powf(n * self.alpha * fiber_length / 1000.0 / 20.0);
        (2.0 / (self.pair_rate_in * self.integration_time)).sqrt() * self.wavelength * constants.c
            / (PI * self.latitude.sin())
            * f64::from(turns)
            * loss
            / (fiber_length * fiber_length)
    }

    /// Fiber length (m) minimising `10^(N alpha L / 20) / L^2`.
    pub fn loss_optimal_length(&self) -> f64 {
        1000.0 * 40.0 / (f64::from(self.photons) * self.alpha * LN_10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingDesign {
    pub fiber_length: f64,
    pub turns: u32,
    pub side: f64,
    pub report: SensitivityReport,
}

/// Smallest square ring meeting the target: the largest feasible number of
/// turns, then the shortest fiber that reaches the target at that count.
///
/// `delta_omega` is minimised over length at `L*`, so the turn count is
/// bounded by the value there; below `L*` it falls monotonically in `L`,
/// which makes bisection safe.
pub fn optimize_gfring(problem: &RingProblem, constants: &PhysicalConstants) -> Result<RingDesign> {
    problem.validate()?;
    constants.validate()?;
    let finish = |l: f64, n: u32| -> Result<RingDesign> {
        let report = rotation_resolution_with(&problem.spec(l, n)?, constants)?;
        Ok(RingDesign { fiber_length: l, turns: n, side: l / (4.0 * f64::from(n)), report })
    };
    if problem.target_snr == 0.0 {
        return finish(problem.min_fiber_length, problem.max_turns);
    }
    let target = constants.omega_gr() / problem.target_snr;
    let l_star = problem.loss_optimal_length();
    let per_turn = problem.delta_omega(l_star, 1, constants);
    let max_turns = (target / per_turn).floor();
    if max_turns < 1.0 {
        return Err(Error::Infeasible(format!(
            "even one turn at the loss-optimal length {:.1} km gives delta_omega = {per_turn:.3e} rad/s, above the target {target:.3e}",
            l_star / 1000.0
        )));
    }
    let turns = (max_turns as u32).min(problem.max_turns);
    let meets = |l: f64| problem.delta_omega(l, turns, constants) <= target;
    let (mut lo, mut hi) = (problem.min_fiber_length, l_star);
    if meets(lo) {
        return finish(lo, turns);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-6 * hi {
            break;
        }
    }
    finish(hi, turns)
}

/// Shortest fiber reaching the target at a fixed turn count, if any.
pub fn min_length_for_turns(problem: &RingProblem, turns: u32, constants: &PhysicalConstants) -> Option<f64> {
    let target = constants.omega_gr() / problem.target_snr;
    let l_star = problem.loss_optimal_length();
    if problem.delta_omega(l_star, turns, constants) > target {
        return None;
    }
    let (mut lo, mut hi) = (problem.min_fiber_length, l_star);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if problem.delta_omega(mid, turns, constants) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Cannot resolve the Earth rate.
    AboveEarthRate,
    BetweenEarthAndGr,
    BelowGr,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::AboveEarthRate => "above_omega_e",
            Regime::BetweenEarthAndGr => "below_omega_e",
            Regime::BelowGr => "below_omega_gr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub name: String,
    pub area: f64,
    pub delta_omega: f64,
    pub log10_area: f64,
    pub log10_delta_omega: f64,
    pub regime: Regime,
}

/// Area against rotation resolution for each design, in input order.
pub fn landscape(specs: &[DesignSpec], constants: &PhysicalConstants) -> Result<Vec<LandscapePoint>> {
    specs
        .par_iter()
        .map(|spec| {
            let r = rotation_resolution_with(spec, constants)?;
            let regime = if r.delta_omega >= constants.omega_earth {
                Regime::AboveEarthRate
            } else if r.delta_omega >= constants.omega_gr() {
                Regime::BetweenEarthAndGr
            } else {
                Regime::BelowGr
            };
            Ok(LandscapePoint {
                name: spec.name.clone(),
                area: r.effective_area,
                delta_omega: r.delta_omega,
                log10_area: r.effective_area.log10(),
                log10_delta_omega: r.delta_omega.log10(),
                regime,
            })
        })
        .collect()
}

/// Row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub name: String,
    pub fiber_length_m: f64,
    pub perimeter_m: f64,
    pub area_m2: f64,
    pub scale_factor_s: f64,
    pub delta_phi_rad: f64,
    pub delta_phi_projected_rad: f64,
    pub delta_omega_rad_s: f64,
}

impl DesignRow {
    pub fn new(spec: &DesignSpec, r: &SensitivityReport) -> Self {
        Self {
            name: spec.name.clone(),
            fiber_length_m: spec.geometry.fiber_length,
            perimeter_m: spec.geometry.perimeter,
            area_m2: r.effective_area,
            scale_factor_s: r.scale_factor,
            delta_phi_rad: r.delta_phi,
            delta_phi_projected_rad: r.delta_phi_projected,
            delta_omega_rad_s: r.delta_omega,
        }
    }
}

pub const DESIGN_ROW_HEADER: [&str; 8] = [
    "name",
    "fiber_length_m",
    "perimeter_m",
    "area_m2",
    "scale_factor_s",
    "delta_phi_rad",
    "delta_phi_projected_rad",
    "delta_omega_rad_s",
];

/// Integration time at which the LFOG and GFOG shot-noise figures agree with
/// each other; nominally two months.
pub const REFERENCE_INTEGRATION_TIME: f64 = 5.56e6;
