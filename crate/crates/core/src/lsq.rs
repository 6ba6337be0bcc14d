//! Damped Gauss-Newton (Levenberg-Marquardt) least squares.
//!
//! The solver works on an abstract [`Problem`] that supplies weighted
//! residuals and their Jacobian. It is shared by the fringe fits and the
//! waveplate-triplet solver.

use nalgebra::{DMatrix, DVector};

/// A least-squares problem `min_p sum_i r_i(p)^2`.
pub trait Problem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Writes the (already weighted) residuals into `out`.
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Writes `d r_i / d p_j` into `jac` (shape `n_residuals x n_params`).
    fn jacobian(&self, params: &[f64], jac: &mut DMatrix<f64>);
}

/// Damping schedule and stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct LmConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Stop when an accepted step changes the cost by less than this fraction.
    pub rel_cost_tol: f64,
    pub max_iter: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            rel_cost_tol: 1e-12,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative cost change fell below tolerance.
    CostTolerance,
    /// Residuals vanished to rounding.
    ZeroResidual,
    /// No descent direction found at any damping; stationary to rounding.
    Stationary,
    MaxIterations,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared weighted residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// `(J^T J)^{-1}` at the optimum, `None` when singular.
    pub covariance: Option<DMatrix<f64>>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Runs Levenberg-Marquardt from `init`.
pub fn minimize<P: Problem + ?Sized>(problem: &P, init: &[f64], cfg: &LmConfig) -> LmReport {
    let np = problem.n_params();
    let nr = problem.n_residuals();
    assert_eq!(init.len(), np, "initial guess has wrong length");

    let mut p = init.to_vec();
    let mut r = vec![0.0; nr];
    let mut r_trial = vec![0.0; nr];
    let mut jac = DMatrix::zeros(nr, np);
    let mut trial = vec![0.0; np];

    problem.residuals(&p, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return LmReport {
            params: p,
            cost,
            iterations: 0,
            converged: false,
            termination: Termination::NonFinite,
            covariance: None,
        };
    }

    let mut lambda = cfg.lambda0;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    'outer: while iterations < cfg.max_iter {
        if cost <= f64::MIN_POSITIVE {
            termination = Termination::ZeroResidual;
            break;
        }
        iterations += 1;
        problem.jacobian(&p, &mut jac);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);

        loop {
            let mut a = jtj.clone();
            for i in 0..np {
                let d = jtj[(i, i)].max(1e-300);
                a[(i, i)] += lambda * d;
            }
            let step = a.cholesky().map(|c| c.solve(&(-&grad)));
            if let Some(step) = step {
                for i in 0..np {
                    trial[i] = p[i] + step[i];
                }
                problem.residuals(&trial, &mut r_trial);
                let new_cost = sum_sq(&r_trial);
                if new_cost.is_finite() && new_cost < cost {
                    let rel = (cost - new_cost) / cost;
                    p.copy_from_slice(&trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    cost = new_cost;
                    lambda = (lambda / cfg.lambda_down).max(1e-12);
                    if rel < cfg.rel_cost_tol {
                        termination = Termination::CostTolerance;
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            lambda *= cfg.lambda_up;
            if lambda > 1e16 {
                termination = Termination::Stationary;
                break 'outer;
            }
        }
    }

    problem.jacobian(&p, &mut jac);
    let covariance = (jac.transpose() * &jac).try_inverse();
    let converged = !matches!(
        termination,
        Termination::MaxIterations | Termination::NonFinite
    );
    LmReport {
        params: p,
        cost,
        iterations,
        converged,
        termination,
        covariance,
    }
}
