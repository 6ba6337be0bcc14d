//! Weighted fringe fits.
//!
//! Two fringe families are supported:
//!
//! * N-photon coincidences, `(A/2) [1 + V cos(k phi0 + phi)]`, parameters `(A, V, phi)`;
//! * heralded single-photon ratio `n_V = N_V / (N_H + N_V)`,
//!   `a (1 - V c) / (1 + eta V c)` with `c = cos(phi0 + phi)`, parameters
//!   `(a, eta, V, phi)`. `eta = (A_H - A_V)/(A_H + A_V)` absorbs unequal
//!   channel efficiencies; at `eta = 0` this is a plain sinusoid.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::expsim::CountRecord;
use crate::lsq::{self, LmConfig, Problem};
use crate::stats::wrap_phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum FringeModel {
    /// N-photon coincidence fringe with `k`-fold frequency.
    Noon { k: u32 },
    /// Heralded single-photon output ratio.
    Single,
}

impl FringeModel {
    pub const TWO_PHOTON: FringeModel = FringeModel::Noon { k: 2 };

    pub fn n_params(&self) -> usize {
        match self {
            FringeModel::Noon { .. } => 3,
            FringeModel::Single => 4,
        }
    }

    pub fn frequency(&self) -> f64 {
        match self {
            FringeModel::Noon { k } => f64::from(*k),
            FringeModel::Single => 1.0,
        }
    }

    fn phase_index(&self) -> usize {
        self.n_params() - 1
    }

    fn visibility_index(&self) -> usize {
        self.n_params() - 2
    }

    /// Model value and its gradient with respect to the parameters.
    pub fn eval(&self, p: &[f64], x: f64, grad: &mut [f64]) -> f64 {
        match self {
            FringeModel::Noon { k } => {
                let (amp, v, phi) = (p[0], p[1], p[2]);
                let (s, c) = (f64::from(*k) * x + phi).sin_cos();
                grad[0] = 0.5 * (1.0 + v * c);
                grad[1] = 0.5 * amp * c;
                grad[2] = -0.5 * amp * v * s;
                0.5 * amp * (1.0 + v * c)
            }
            FringeModel::Single => {
                let (a, eta, v, phi) = (p[0], p[1], p[2], p[3]);
                let (s, c) = (x + phi).sin_cos();
                let num = 1.0 - v * c;
                let den = 1.0 + eta * v * c;
                let den2 = den * den;
                grad[0] = num / den;
                grad[1] = -a * num * v * c / den2;
                grad[2] = -a * c * (1.0 + eta) / den2;
                grad[3] = a * v * (1.0 + eta) * s / den2;
                a * num / den
            }
        }
    }

    pub fn value(&self, p: &[f64], x: f64) -> f64 {
        let mut g = [0.0; 4];
        self.eval(p, x, &mut g)
    }
}

/// One observation: bias phase, value and its standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub model: FringeModel,
    /// `A` (counts) for coincidence fringes, `a` for the single-photon ratio.
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    /// Channel asymmetry, single-photon fits only.
    pub eta: Option<f64>,
    pub eta_sigma: Option<f64>,
    pub visibility: f64,
    pub visibility_sigma: f64,
    /// Fringe phase in (-pi, pi].
    pub phase: f64,
    pub phase_sigma: f64,
    /// Parameter covariance in parameter order.
    pub covariance: Vec<Vec<f64>>,
    /// Weighted residual sum of squares.
    pub chi2: f64,
    pub n_points: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl FringeFit {
    /// Parameters in model order.
    pub fn params(&self) -> Vec<f64> {
        match self.model {
            FringeModel::Noon { .. } => vec![self.amplitude, self.visibility, self.phase],
            FringeModel::Single => vec![self.amplitude, self.eta.unwrap_or(0.0), self.visibility, self.phase],
        }
    }

    fn from_params(model: FringeModel, p: &[f64], cov: Option<&DMatrix<f64>>, chi2: f64, n: usize, iters: usize, converged: bool) -> Self {
        let np = model.n_params();
        let cov: Vec<Vec<f64>> = match cov {
            Some(c) => (0..np).map(|i| (0..np).map(|j| c[(i, j)]).collect()).collect(),
            None => vec![vec![f64::NAN; np]; np],
        };
        let sd = |i: usize| cov[i][i].max(0.0).sqrt();
        let (vi, pi) = (model.visibility_index(), model.phase_index());
        let single = matches!(model, FringeModel::Single);
        FringeFit {
            model,
            amplitude: p[0],
            amplitude_sigma: sd(0),
            eta: single.then(|| p[1]),
            eta_sigma: single.then(|| sd(1)),
            visibility: p[vi],
            visibility_sigma: sd(vi),
            phase: p[pi],
            phase_sigma: sd(pi),
            covariance: cov,
            chi2,
            n_points: n,
            iterations: iters,
            converged,
        }
    }
}

struct FringeProblem<'a> {
    model: FringeModel,
    data: &'a [FringePoint],
}

impl Problem for FringeProblem<'_> {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn n_residuals(&self) -> usize {
        self.data.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let mut g = [0.0; 4];
        for (o, pt) in out.iter_mut().zip(self.data) {
            *o = (self.model.eval(p, pt.x, &mut g) - pt.y) / pt.sigma;
        }
    }

    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        let mut g = [0.0; 4];
        for (i, pt) in self.data.iter().enumerate() {
            self.model.eval(p, pt.x, &mut g);
            for j in 0..self.model.n_params() {
                jac[(i, j)] = g[j] / pt.sigma;
            }
        }
    }
}

/// Where the optimiser starts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    /// Linear pre-fit guess plus eight phase starts evenly spaced over a
    /// fringe period; the lowest converged cost wins.
    MultiStart,
    /// A single start, falling back to `MultiStart` if it does not converge.
    From(Vec<f64>),
}

/// Weighted linear fit `y = c0 + c1 cos(k x) + s1 sin(k x)`.
fn linear_prefit(data: &[FringePoint], k: f64) -> Result<(f64, f64, f64)> {
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for pt in data {
        let w = 1.0 / (pt.sigma * pt.sigma);
        let row = Vector3::new(1.0, (k * pt.x).cos(), (k * pt.x).sin());
        ata += w * row * row.transpose();
        atb += w * pt.y * row;
    }
    let sol = ata
        .try_inverse()
        .map(|inv| inv * atb)
        .ok_or_else(|| Error::DegenerateDesign("bias phases do not resolve the fringe".into()))?;
    Ok((sol[0], sol[1], sol[2]))
}

fn check_design(model: FringeModel, data: &[FringePoint]) -> Result<()> {
    ensure(data.iter().all(|p| p.x.is_finite() && p.y.is_finite()), || "non-finite fringe data".into())?;
    ensure(data.iter().all(|p| p.sigma > 0.0 && p.sigma.is_finite()), || {
        "fringe point sigmas must be positive".into()
    })?;
    let mut xs: Vec<f64> = data.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if xs.len() < 5 {
        return Err(Error::DegenerateDesign(format!(
            "{} distinct bias phases, at least 5 are needed",
            xs.len()
        )));
    }
    let span = xs[xs.len() - 1] - xs[0];
    let need = PI / model.frequency();
    if span < need - 1e-12 {
        return Err(Error::DegenerateDesign(format!(
            "bias phases span {span:.4} rad, half a fringe period ({need:.4} rad) is needed"
        )));
    }
    Ok(())
}

/// Fits `model` to `data` by Levenberg-Marquardt.
///
/// Negative visibilities are folded back by shifting the phase by pi. The
/// returned fit may have `converged == false`; callers that need a usable
/// result should go through [`fit_points`].
pub fn nlls(model: FringeModel, data: &[FringePoint], init: &InitPolicy) -> Result<FringeFit> {
    check_design(model, data)?;
    let k = model.frequency();
    let problem = FringeProblem { model, data };
    let cfg = LmConfig::default();

    let run = |start: &[f64]| lsq::minimize(&problem, start, &cfg);
    let mut best = match init {
        InitPolicy::From(p) => {
            ensure(p.len() == model.n_params(), || "initial guess has the wrong length".into())?;
            let rep = run(p);
            rep.converged.then_some(rep)
        }
        InitPolicy::MultiStart => None,
    };

    if best.is_none() {
        let (c0, c1, s1) = linear_prefit(data, k)?;
        let amp = c1.hypot(s1);
        if !(amp > 1e-9 * c0.abs()) {
            return Err(Error::DegenerateDesign("flat fringe, phase is not identifiable".into()));
        }
        let v0 = (amp / c0.abs()).min(1.0);
        let mut starts = Vec::with_capacity(9);
        let guess = |phi: f64| match model {
            FringeModel::Noon { .. } => vec![2.0 * c0, v0, phi],
            FringeModel::Single => vec![c0, 0.0, v0, phi],
        };
        starts.push(match model {
            FringeModel::Noon { .. } => guess((-s1).atan2(c1)),
            FringeModel::Single => guess(s1.atan2(-c1)),
        });
        for j in 0..8 {
            starts.push(guess(TAU * j as f64 / 8.0));
        }
        for s in &starts {
            let rep = run(s);
            if !rep.cost.is_finite() {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => (rep.converged && !b.converged) || (rep.converged == b.converged && rep.cost < b.cost),
            };
            if better {
                best = Some(rep);
            }
        }
    }

    let rep = best.ok_or_else(|| Error::FitFailed("no start produced a finite cost".into()))?;
    let mut p = rep.params.clone();
    let mut cov = rep.covariance.clone();
    let (vi, pi) = (model.visibility_index(), model.phase_index());
    if p[vi] < 0.0 {
        p[vi] = -p[vi];
        p[pi] += PI;
        if let Some(c) = cov.as_mut() {
            // Sign flip of V changes the sign of its cross terms.
            for j in 0..model.n_params() {
                if j != vi {
                    c[(vi, j)] = -c[(vi, j)];
                    c[(j, vi)] = -c[(j, vi)];
                }
            }
        }
    }
    p[pi] = wrap_phase(p[pi]);
    Ok(FringeFit::from_params(model, &p, cov.as_ref(), rep.cost, data.len(), rep.iterations, rep.converged))
}

/// [`nlls`] with multi-start, failing unless the optimiser converged.
pub fn fit_points(model: FringeModel, data: &[FringePoint]) -> Result<FringeFit> {
    let fit = nlls(model, data, &InitPolicy::MultiStart)?;
    if !fit.converged {
        return Err(Error::FitFailed(format!(
            "optimizer did not converge after {} iterations (chi2 {:.4e}, {} points)",
            fit.iterations, fit.chi2, fit.n_points
        )));
    }
    Ok(fit)
}

fn check_records(records: &[CountRecord]) -> Result<()> {
    ensure(!records.is_empty(), || "no count records".into())?;
    for r in records {
        r.validate()?;
    }
    ensure(records.iter().all(|r| r.switch == records[0].switch), || {
        "records mix switch states; fit each state separately".into()
    })
}

fn mean_duration(records: &[CountRecord]) -> f64 {
    records.iter().map(|r| r.duration).sum::<f64>() / records.len() as f64
}

/// Coincidence counts scaled to the mean record duration, Poisson sigmas
/// floored at one count.
pub fn noon_points(records: &[CountRecord]) -> Result<Vec<FringePoint>> {
    check_records(records)?;
    let d_ref = mean_duration(records);
    Ok(records
        .iter()
        .map(|r| {
            let scale = d_ref / r.duration;
            let n = r.n_hv as f64;
            FringePoint { x: r.phi0, y: n * scale, sigma: n.max(1.0).sqrt() * scale }
        })
        .collect())
}

/// `n_V = N_V / (N_H + N_V)` with independent Poisson errors on both channels.
pub fn single_points(records: &[CountRecord]) -> Result<Vec<FringePoint>> {
    check_records(records)?;
    records
        .iter()
        .map(|r| {
            let (h, v) = (r.n_h as f64, r.n_v as f64);
            let n = h + v;
            ensure(n > 0.0, || format!("no counts at bias phase {}", r.phi0))?;
            let var = h.max(1.0) * v.max(1.0) / (n * n * n);
            Ok(FringePoint { x: r.phi0, y: v / n, sigma: var.sqrt() })
        })
        .collect()
}

pub fn points_for(model: FringeModel, records: &[CountRecord]) -> Result<Vec<FringePoint>> {
    match model {
        FringeModel::Noon { .. } => noon_points(records),
        FringeModel::Single => single_points(records),
    }
}

/// N-photon coincidence fit of one switch state.
pub fn fit_noon_fringe(records: &[CountRecord], k: u32) -> Result<FringeFit> {
    ensure(k >= 1, || "fringe frequency must be at least 1".into())?;
    let model = FringeModel::Noon { k };
    fit_points(model, &noon_points(records)?)
}

/// Heralded single-photon ratio fit of one switch state.
pub fn fit_single_fringe(records: &[CountRecord]) -> Result<FringeFit> {
    fit_points(FringeModel::Single, &single_points(records)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sagnac::SwitchState;

    fn synth(model: FringeModel, p: &[f64], xs: &[f64]) -> Vec<FringePoint> {
        xs.iter()
            .map(|&x| {
                let y = model.value(p, x);
                FringePoint { x, y, sigma: 1e-3 * y.abs().max(1e-3) }
            })
            .collect()
    }

    fn grid(k: f64) -> Vec<f64> {
        let lo = -PI / (4.0 * k);
        (0..11).map(|i| lo + (TAU + PI / (2.0 * k)) * i as f64 / 10.0).collect()
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for (model, p) in [
            (FringeModel::TWO_PHOTON, vec![1000.0, 0.9, 0.3]),
            (FringeModel::Single, vec![0.45, 0.1, 0.95, -1.1]),
        ] {
            let mut g = [0.0; 4];
            for x in [-0.7, 0.2, 1.9, 4.0] {
                model.eval(&p, x, &mut g);
                for j in 0..model.n_params() {
                    let h = 1e-6 * p[j].abs().max(1.0);
                    let (mut up, mut dn) = (p.clone(), p.clone());
                    up[j] += h;
                    dn[j] -= h;
                    let fd = (model.value(&up, x) - model.value(&dn, x)) / (2.0 * h);
                    assert!((fd - g[j]).abs() < 1e-6 * g[j].abs().max(1.0), "param {j}");
                }
            }
        }
    }

    #[test]
    fn noiseless_round_trip_grid() {
        for &v in &[0.9, 0.97, 1.0] {
            for j in 0..12 {
                let phi = wrap_phase(-PI + 0.1 + j as f64 * TAU / 12.0);
                let truth = [2.0e4, v, phi];
                let data = synth(FringeModel::TWO_PHOTON, &truth, &grid(2.0));
                let fit = fit_points(FringeModel::TWO_PHOTON, &data).unwrap();
                assert!((fit.visibility - v).abs() < 1e-6);
                assert!(wrap_phase(fit.phase - phi).abs() < 1e-6, "v={v} phi={phi} got {}", fit.phase);
                assert!((fit.amplitude / 2.0e4 - 1.0).abs() < 1e-6);

                let truth = [0.5, 0.0, v, phi];
                let data = synth(FringeModel::Single, &truth, &grid(1.0));
                let fit = fit_points(FringeModel::Single, &data).unwrap();
                assert!((fit.visibility - v).abs() < 1e-6);
                assert!(wrap_phase(fit.phase - phi).abs() < 1e-6);
                assert!(fit.eta.unwrap().abs() < 1e-6);
            }
        }
    }

    #[test]
    fn table2_operating_point() {
        let phi = -24.60e-3;
        let data = synth(FringeModel::TWO_PHOTON, &[7.2e6, 0.9714, phi], &grid(2.0));
        let fit = fit_points(FringeModel::TWO_PHOTON, &data).unwrap();
        assert!((fit.visibility - 0.9714).abs() < 1e-6);
        assert!((fit.phase - phi).abs() < 1e-6);
    }

    #[test]
    fn asymmetric_channels_recover_eta() {
        // A_H = 1.2 A_V: a = A_V/(A_H + A_V) = 1/2.2, eta = 1/11.
        let (a_h, a_v, v, phi) = (1.2, 1.0, 0.99, 0.4);
        let data: Vec<FringePoint> = grid(1.0)
            .iter()
            .map(|&x| {
                let c = (x + phi).cos();
                let nh = a_h * (1.0 + v * c);
                let nv = a_v * (1.0 - v * c);
                FringePoint { x, y: nv / (nh + nv), sigma: 1e-4 }
            })
            .collect();
        let fit = fit_points(FringeModel::Single, &data).unwrap();
        assert!((fit.eta.unwrap() - 1.0 / 11.0).abs() < 2e-3);
        assert!((fit.amplitude - 1.0 / 2.2).abs() < 1e-6);
        assert!((fit.phase - phi).abs() < 1e-6);
    }

    #[test]
    fn flat_fringe_is_degenerate() {
        let data: Vec<FringePoint> = grid(2.0).iter().map(|&x| FringePoint { x, y: 500.0, sigma: 22.0 }).collect();
        assert!(matches!(
            nlls(FringeModel::TWO_PHOTON, &data, &InitPolicy::MultiStart),
            Err(Error::DegenerateDesign(_))
        ));
    }

    #[test]
    fn short_span_and_few_points_rejected() {
        let truth = [1e4, 0.9, 0.2];
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * 0.2).collect();
        let data = synth(FringeModel::TWO_PHOTON, &truth, &xs);
        assert!(matches!(fit_points(FringeModel::TWO_PHOTON, &data), Err(Error::DegenerateDesign(_))));
        let data = synth(FringeModel::TWO_PHOTON, &truth, &[0.0, 1.0, 2.0, 3.0]);
        assert!(matches!(fit_points(FringeModel::TWO_PHOTON, &data), Err(Error::DegenerateDesign(_))));
        // Half a period in phi0 is enough for the doubled fringe.
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * PI / 10.0).collect();
        let data = synth(FringeModel::TWO_PHOTON, &truth, &xs);
        assert!(fit_points(FringeModel::TWO_PHOTON, &data).is_ok());
    }

    #[test]
    fn bad_start_recovered_by_multistart() {
        let truth = [1e4, 0.95, 1.3];
        let data = synth(FringeModel::TWO_PHOTON, &truth, &grid(2.0));
        let fit = nlls(FringeModel::TWO_PHOTON, &data, &InitPolicy::From(vec![1e4, 0.95, 1.3 + PI / 3.0])).unwrap();
        assert!(fit.converged);
        assert!(wrap_phase(fit.phase - 1.3).abs() < 1e-6);
    }

    #[test]
    fn records_to_points() {
        let rec = |phi0: f64, n_h, n_v, n_hv, duration| CountRecord {
            theta: 0.0,
            phi0,
            switch: SwitchState::On,
            duration,
            n_h,
            n_v,
            n_hv,
        };
        let pts = noon_points(&[rec(0.0, 0, 0, 100, 1.0), rec(1.0, 0, 0, 100, 3.0)]).unwrap();
        assert!((pts[0].y - 200.0).abs() < 1e-12);
        assert!((pts[1].y - 200.0 / 3.0).abs() < 1e-12);
        assert!((pts[0].sigma - 20.0).abs() < 1e-12);
        let pts = single_points(&[rec(0.0, 30, 10, 0, 1.0)]).unwrap();
        assert!((pts[0].y - 0.25).abs() < 1e-15);
        assert!((pts[0].sigma - (300.0f64 / 64000.0).sqrt()).abs() < 1e-15);
        let mut mixed = vec![rec(0.0, 1, 1, 1, 1.0)];
        mixed.push(CountRecord { switch: SwitchState::Off, ..mixed[0] });
        assert!(noon_points(&mixed).is_err());
        assert!(noon_points(&[]).is_err());
    }
}
