//! Jones calculus for the classical (CW) arm of the interferometer.
//!
//! Conventions: a waveplate with fast axis at `theta` is `R(theta) D R(-theta)`
//! with `D = diag(1, -1)` for the half-wave plate and `D = diag(1, i)` for the
//! quarter-wave plate. Global phases are never observable, so comparisons
//! between matrices or states are made up to a global phase.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8, PI};
use std::ops::Mul;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lsq::{self, LmConfig, Problem};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A fully polarized field `(E_H, E_V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub e_h: Complex64,
    pub e_v: Complex64,
}

impl JonesVector {
    pub const fn new(e_h: Complex64, e_v: Complex64) -> Self {
        Self { e_h, e_v }
    }

    pub fn horizontal() -> Self {
        Self::new(ONE, ZERO)
    }

    pub fn vertical() -> Self {
        Self::new(ZERO, ONE)
    }

    /// `+` (diagonal) polarization.
    pub fn diagonal() -> Self {
        Self::new(ONE * FRAC_1_SQRT_2, ONE * FRAC_1_SQRT_2)
    }

    /// `-` (anti-diagonal) polarization.
    pub fn anti_diagonal() -> Self {
        Self::new(ONE * FRAC_1_SQRT_2, -ONE * FRAC_1_SQRT_2)
    }

    pub fn right_circular() -> Self {
        Self::new(ONE * FRAC_1_SQRT_2, I * FRAC_1_SQRT_2)
    }

    pub fn left_circular() -> Self {
        Self::new(ONE * FRAC_1_SQRT_2, -I * FRAC_1_SQRT_2)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.e_h.norm_sqr() + self.e_v.norm_sqr()
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self::new(self.e_h / n, self.e_v / n)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &JonesVector) -> Complex64 {
        self.e_h.conj() * other.e_h + self.e_v.conj() * other.e_v
    }

    /// Stokes parameters `(S0, S1, S2, S3)`.
    pub fn stokes(&self) -> [f64; 4] {
        let hv = self.e_h.conj() * self.e_v;
        [
            self.norm_sqr(),
            self.e_h.norm_sqr() - self.e_v.norm_sqr(),
            2.0 * hv.re,
            2.0 * hv.im,
        ]
    }

    /// `1 - |<a|b>|^2` for normalized states; zero iff equal up to global phase.
    pub fn infidelity(&self, other: &JonesVector) -> f64 {
        let a = self.normalize();
        let b = other.normalize();
        (1.0 - a.inner(&b).norm_sqr()).max(0.0)
    }
}

/// A 2x2 complex matrix acting on Jones vectors, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix(pub [[Complex64; 2]; 2]);

impl JonesMatrix {
    pub fn identity() -> Self {
        Self([[ONE, ZERO], [ZERO, ONE]])
    }

    /// Real rotation by `theta` (counter-clockwise).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self([[ONE * c, -ONE * s], [ONE * s, ONE * c]])
    }

    pub fn diag(a: Complex64, b: Complex64) -> Self {
        Self([[a, ZERO], [ZERO, b]])
    }

    /// Builds the matrix whose columns are `c0` and `c1`.
    pub fn from_columns(c0: JonesVector, c1: JonesVector) -> Self {
        Self([[c0.e_h, c1.e_h], [c0.e_v, c1.e_v]])
    }

    pub fn apply(&self, v: &JonesVector) -> JonesVector {
        let m = &self.0;
        JonesVector::new(
            m[0][0] * v.e_h + m[0][1] * v.e_v,
            m[1][0] * v.e_h + m[1][1] * v.e_v,
        )
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let m = &self.0;
        Self([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() < 1e-300 {
            return None;
        }
        let m = &self.0;
        Some(Self([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]))
    }

    fn sub(&self, other: &Self) -> Self {
        let (a, b) = (&self.0, &other.0);
        Self([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }

    fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `|U^dagger U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        (self.adjoint() * *self).sub(&Self::identity()).max_abs()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Phase-insensitive distance `1 - |tr(A^dagger B)| / 2`.
    pub fn phase_distance(&self, other: &Self) -> f64 {
        1.0 - (self.adjoint() * *other).trace().norm() / 2.0
    }

    /// Largest entry of `|e^{ia} self - other|` with the best global phase `a`.
    pub fn max_diff_up_to_phase(&self, other: &Self) -> f64 {
        let t = (self.adjoint() * *other).trace();
        let phase = if t.norm() > 0.0 { t / t.norm() } else { ONE };
        self.scale(phase).sub(other).max_abs()
    }

    /// Nearest unitary in Frobenius norm (the unitary polar factor).
    pub fn nearest_unitary(&self) -> Option<Self> {
        let mut u = *self;
        for _ in 0..100 {
            let inv_adj = u.inverse()?.adjoint();
            let next = Self([
                [(u.0[0][0] + inv_adj.0[0][0]) * 0.5, (u.0[0][1] + inv_adj.0[0][1]) * 0.5],
                [(u.0[1][0] + inv_adj.0[1][0]) * 0.5, (u.0[1][1] + inv_adj.0[1][1]) * 0.5],
            ]);
            let delta = next.sub(&u).max_abs();
            u = next;
            if delta < 1e-15 {
                break;
            }
        }
        Some(u)
    }
}

impl Mul for JonesMatrix {
    type Output = JonesMatrix;

    fn mul(self, rhs: JonesMatrix) -> JonesMatrix {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        JonesMatrix(out)
    }
}

impl Mul<JonesVector> for JonesMatrix {
    type Output = JonesVector;

    fn mul(self, rhs: JonesVector) -> JonesVector {
        self.apply(&rhs)
    }
}

fn waveplate(theta: f64, retarder: JonesMatrix) -> JonesMatrix {
    JonesMatrix::rotation(theta) * retarder * JonesMatrix::rotation(-theta)
}

/// Half-wave plate with its fast axis at `theta`; `hwp(0) = diag(1, -1)`.
pub fn hwp(theta: f64) -> JonesMatrix {
    waveplate(theta, JonesMatrix::diag(ONE, -ONE))
}

/// Quarter-wave plate with its fast axis at `theta`; `qwp(0) = diag(1, i)`.
pub fn qwp(theta: f64) -> JonesMatrix {
    waveplate(theta, JonesMatrix::diag(ONE, I))
}

/// `diag(1, e^{i phi})`.
pub fn phase_shift(phi: f64) -> JonesMatrix {
    JonesMatrix::diag(ONE, Complex64::from_polar(1.0, phi))
}

/// Working-point unitary: relative phase `phi` applied along the diagonal axis,
/// `HWP(-22.5 deg) U(phi) HWP(-22.5 deg)`.
pub fn bias_unitary(phi: f64) -> JonesMatrix {
    let h = hwp(-FRAC_PI_8);
    h * phase_shift(phi) * h
}

/// `HWP(theta3) QWP(theta2) QWP(theta1)`; light meets `theta1` first.
pub fn waveplate_triplet(theta1: f64, theta2: f64, theta3: f64) -> JonesMatrix {
    hwp(theta3) * qwp(theta2) * qwp(theta1)
}

// d/dtheta R D R^T = [G, W] with G the rotation generator.
fn waveplate_derivative(w: &JonesMatrix) -> JonesMatrix {
    let g = JonesMatrix([[ZERO, -ONE], [ONE, ZERO]]);
    (g * *w).sub(&(*w * g))
}

/// Residuals `e^{i alpha} M(theta) - target`, split into real and imaginary parts.
struct TripletFit {
    target: JonesMatrix,
}

impl TripletFit {
    fn parts(p: &[f64]) -> (JonesMatrix, JonesMatrix, JonesMatrix, Complex64) {
        (
            qwp(p[0]),
            qwp(p[1]),
            hwp(p[2]),
            Complex64::from_polar(1.0, p[3]),
        )
    }
}

fn write_matrix(m: &JonesMatrix, col: &mut [f64]) {
    for (k, z) in m.0.iter().flatten().enumerate() {
        col[2 * k] = z.re;
        col[2 * k + 1] = z.im;
    }
}

impl Problem for TripletFit {
    fn n_params(&self) -> usize {
        4
    }
    fn n_residuals(&self) -> usize {
        8
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let (q1, q2, h3, ph) = Self::parts(p);
        let m = (h3 * q2 * q1).scale(ph).sub(&self.target);
        write_matrix(&m, out);
    }
    fn jacobian(&self, p: &[f64], jac: &mut DMatrix<f64>) {
        let (q1, q2, h3, ph) = Self::parts(p);
        let derivs = [
            (h3 * q2 * waveplate_derivative(&q1)).scale(ph),
            (h3 * waveplate_derivative(&q2) * q1).scale(ph),
            (waveplate_derivative(&h3) * q2 * q1).scale(ph),
            (h3 * q2 * q1).scale(ph * I),
        ];
        let mut col = [0.0; 8];
        for (j, d) in derivs.iter().enumerate() {
            write_matrix(d, &mut col);
            for (i, v) in col.iter().enumerate() {
                jac[(i, j)] = *v;
            }
        }
    }
}

/// Waveplate angles `(theta1, theta2, theta3)` realising `target` up to a
/// global phase with the QWP-QWP-HWP triplet.
pub fn solve_triplet(target: &JonesMatrix) -> Result<(f64, f64, f64)> {
    let err = target.unitarity_error();
    if !(err <= 1e-10) {
        return Err(Error::Validation(format!(
            "target is not unitary (|U^dagger U - I| = {err:.3e})"
        )));
    }
    let problem = TripletFit { target: *target };
    let cfg = LmConfig::default();
    let grid = [0.3, 0.3 + std::f64::consts::FRAC_PI_2];

    let mut best: Option<([f64; 3], f64)> = None;
    for start in 0..8 {
        let t = [grid[start & 1], grid[(start >> 1) & 1], grid[(start >> 2) & 1]];
        let m = waveplate_triplet(t[0], t[1], t[2]);
        let tr = (m.adjoint() * *target).trace();
        let init = [t[0], t[1], t[2], tr.arg()];
        let rep = lsq::minimize(&problem, &init, &cfg);
        let angles = [rep.params[0], rep.params[1], rep.params[2]];
        let d = waveplate_triplet(angles[0], angles[1], angles[2]).max_diff_up_to_phase(target);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((angles, d));
        }
        if d < 1e-12 {
            break;
        }
    }
    let (angles, d) = best.expect("at least one start");
    if d > 1e-8 {
        return Err(Error::FitFailed(format!(
            "waveplate triplet did not reach target (residual {d:.3e})"
        )));
    }
    let wrap = |a: f64| a.rem_euclid(PI);
    Ok((wrap(angles[0]), wrap(angles[1]), wrap(angles[2])))
}

/// Recovers the fiber unitary from the output states measured for `H` and `+`
/// inputs. Each measured state carries an unknown phase; the result is fixed
/// up to one global phase and projected onto the nearest unitary.
pub fn reconstruct_fiber_unitary(out_h: &JonesVector, out_plus: &JonesVector) -> Result<JonesMatrix> {
    let col0 = out_h.normalize();
    let plus = out_plus.normalize();
    let overlap = col0.inner(&plus);
    let o2 = overlap.norm_sqr();
    if !(0.05..=0.95).contains(&o2) {
        return Err(Error::IllConditioned(format!(
            "output states have |<out_h|out_plus>|^2 = {o2:.4}, expected near 0.5"
        )));
    }
    let col1 = JonesVector::new(plus.e_h / overlap - col0.e_h, plus.e_v / overlap - col0.e_v);
    JonesMatrix::from_columns(col0, col1)
        .nearest_unitary()
        .ok_or_else(|| Error::IllConditioned("reconstructed matrix is singular".into()))
}

/// Azimuth `psi` in (-pi/2, pi/2] and ellipticity `chi` in [-pi/4, pi/4].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationEllipse {
    pub azimuth: f64,
    pub ellipticity: f64,
    /// False for circular light, where the azimuth is set to 0.
    pub azimuth_defined: bool,
}

impl PolarizationEllipse {
    pub fn new(azimuth: f64, ellipticity: f64) -> Self {
        Self {
            azimuth,
            ellipticity,
            azimuth_defined: true,
        }
    }

    /// Normalized state with this ellipse, `R(psi) (cos chi, i sin chi)`.
    pub fn to_vector(&self) -> JonesVector {
        let (s, c) = self.ellipticity.sin_cos();
        JonesMatrix::rotation(self.azimuth).apply(&JonesVector::new(ONE * c, I * s))
    }
}

pub fn ellipse_of(state: &JonesVector) -> PolarizationEllipse {
    let [s0, s1, s2, s3] = state.stokes();
    let ellipticity = 0.5 * (s3 / s0).clamp(-1.0, 1.0).asin();
    let lin = s1.hypot(s2);
    if lin <= 1e-12 * s0 {
        return PolarizationEllipse {
            azimuth: 0.0,
            ellipticity: ellipticity.signum() * FRAC_PI_4,
            azimuth_defined: false,
        };
    }
    let mut azimuth = 0.5 * s2.atan2(s1);
    if azimuth <= -std::f64::consts::FRAC_PI_2 {
        azimuth += PI;
    }
    PolarizationEllipse {
        azimuth,
        ellipticity,
        azimuth_defined: true,
    }
}

/// Relative phase picked up between the H and V beams in the loop.
pub fn sagnac_loop(phi_s: f64) -> JonesMatrix {
    phase_shift(phi_s)
}

/// The CW measurement path: H light through the 22.5 deg HWP, the loop, back
/// through the HWP and the circulator fiber, then the readout waveplates.
#[derive(Debug, Clone, Copy)]
pub struct ClassicalChain {
    pub fiber: JonesMatrix,
    pub waveplates: (f64, f64, f64),
}

impl ClassicalChain {
    /// Sets the readout waveplates to `projection * bias(bias_phase) * fiber^-1`.
    pub fn compensated(fiber: JonesMatrix, bias_phase: f64, projection: JonesMatrix) -> Result<Self> {
        let inv = fiber
            .inverse()
            .ok_or_else(|| Error::Validation("fiber matrix is singular".into()))?;
        let waveplates = solve_triplet(&(projection * bias_unitary(bias_phase) * inv))?;
        Ok(Self { fiber, waveplates })
    }

    /// Working point at zero bias. The return pass through the HWP mirrors the
    /// ellipse handedness; a readout HWP at 0 restores it so that `phi_s = 2 chi`.
    pub fn ideal(fiber: JonesMatrix) -> Result<Self> {
        Self::compensated(fiber, 0.0, hwp(0.0))
    }

    pub fn readout(&self) -> JonesMatrix {
        let (a, b, c) = self.waveplates;
        waveplate_triplet(a, b, c)
    }

    pub fn output(&self, phi_s: f64) -> JonesVector {
        let h = hwp(FRAC_PI_8);
        let m = self.readout() * self.fiber * h * sagnac_loop(phi_s) * h;
        m.apply(&JonesVector::horizontal())
    }

    /// Phase read from the output ellipticity, `2 chi`.
    pub fn measured_phase(&self, phi_s: f64) -> f64 {
        2.0 * ellipse_of(&self.output(phi_s)).ellipticity
    }
}

/// Seeded Haar-random unitary (test and simulation helper).
pub fn random_unitary<R: rand::Rng + ?Sized>(rng: &mut R) -> JonesMatrix {
    use rand_distr::{Distribution, StandardNormal};
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    let a = Complex64::new(g(), g());
    let b = Complex64::new(g(), g());
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / n, b / n);
    let phase = Complex64::from_polar(1.0, g());
    JonesMatrix([[a, -b.conj()], [b, a.conj()]]).scale(phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn same_state(a: &JonesVector, b: &JonesVector) -> bool {
        a.infidelity(b) < 1e-14
    }

    #[test]
    fn hwp_examples() {
        let h = JonesVector::horizontal();
        assert!(same_state(&hwp(0.0).apply(&h), &h));
        assert!(same_state(&hwp(FRAC_PI_8).apply(&h), &JonesVector::diagonal()));
        assert!(same_state(&hwp(FRAC_PI_4).apply(&h), &JonesVector::vertical()));
        assert!((hwp(0.7).det().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn qwp_examples() {
        let h = JonesVector::horizontal();
        assert!(same_state(&qwp(0.0).apply(&h), &h));
        let e = ellipse_of(&qwp(FRAC_PI_4).apply(&h));
        assert!((e.ellipticity.abs() - FRAC_PI_4).abs() < 1e-10);
        assert!(!e.azimuth_defined);
        assert!((qwp(0.3) * qwp(0.3)).max_diff_up_to_phase(&hwp(0.3)) < 1e-14);
    }

    #[test]
    fn phase_shift_examples() {
        assert!(phase_shift(0.0).max_diff_up_to_phase(&JonesMatrix::identity()) < 1e-15);
        let out = phase_shift(PI).apply(&JonesVector::diagonal());
        assert!((out.e_h - ONE * FRAC_1_SQRT_2).norm() < 1e-15);
        assert!((out.e_v + ONE * FRAC_1_SQRT_2).norm() < 1e-15);
        let prod = phase_shift(0.7) * phase_shift(1.1);
        assert!(prod.max_diff_up_to_phase(&phase_shift(1.8)) < 1e-15);
    }

    #[test]
    fn bias_unitary_examples() {
        assert!(bias_unitary(0.0).max_diff_up_to_phase(&JonesMatrix::identity()) < 1e-14);
        let out = bias_unitary(PI).apply(&JonesVector::horizontal());
        assert!(same_state(&out, &JonesVector::vertical()));
        // |<H|U_bias(phi)|H>|^2 sweeps cos^2(phi/2).
        for k in 0..=64 {
            let phi = 2.0 * PI * k as f64 / 64.0;
            let amp = bias_unitary(phi).apply(&JonesVector::horizontal()).e_h;
            assert!((amp.norm_sqr() - (phi / 2.0).cos().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn triplet_examples() {
        let t0 = waveplate_triplet(0.0, 0.0, 0.0);
        assert!(t0.max_diff_up_to_phase(&(hwp(0.0) * qwp(0.0) * qwp(0.0))) < 1e-15);
        let h = JonesVector::horizontal();
        let a = waveplate_triplet(FRAC_PI_4, FRAC_PI_4, 0.0).apply(&h);
        let b = (hwp(0.0) * hwp(FRAC_PI_4)).apply(&h);
        assert!(same_state(&a, &b));
    }

    #[test]
    fn solve_triplet_identity_and_bias() {
        let (a, b, c) = solve_triplet(&JonesMatrix::identity()).unwrap();
        assert!(waveplate_triplet(a, b, c).max_diff_up_to_phase(&JonesMatrix::identity()) < 1e-8);
        for phi in [0.4, 1.0] {
            let target = bias_unitary(phi);
            let (a, b, c) = solve_triplet(&target).unwrap();
            assert!(waveplate_triplet(a, b, c).max_diff_up_to_phase(&target) < 1e-8);
        }
    }

    #[test]
    fn solve_triplet_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u = random_unitary(&mut rng);
            let (a, b, c) = solve_triplet(&u).unwrap();
            assert!(waveplate_triplet(a, b, c).max_diff_up_to_phase(&u) < 1e-8);
        }
    }

    #[test]
    fn solve_triplet_rejects_non_unitary() {
        let m = JonesMatrix::diag(ONE * 2.0, ONE);
        assert!(matches!(solve_triplet(&m), Err(Error::Validation(_))));
    }

    #[test]
    fn reconstruct_identity() {
        let u = reconstruct_fiber_unitary(&JonesVector::horizontal(), &JonesVector::diagonal()).unwrap();
        assert!(u.max_diff_up_to_phase(&JonesMatrix::identity()) < 1e-12);
    }

    #[test]
    fn reconstruct_random_fibers_with_arbitrary_state_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..50 {
            let uf = random_unitary(&mut rng);
            let ph1 = Complex64::from_polar(1.0, 0.37 * k as f64);
            let ph2 = Complex64::from_polar(1.0, -1.3 * k as f64);
            let oh = uf.apply(&JonesVector::horizontal());
            let op = uf.apply(&JonesVector::diagonal());
            let oh = JonesVector::new(oh.e_h * ph1, oh.e_v * ph1);
            let op = JonesVector::new(op.e_h * ph2, op.e_v * ph2);
            let rec = reconstruct_fiber_unitary(&oh, &op).unwrap();
            assert!(rec.is_unitary(1e-10));
            assert!(rec.max_diff_up_to_phase(&uf) < 1e-8);
        }
    }

    #[test]
    fn reconstruct_rejects_parallel_outputs() {
        let h = JonesVector::horizontal();
        let r = reconstruct_fiber_unitary(&h, &h);
        assert!(matches!(r, Err(Error::IllConditioned(_))));
    }

    #[test]
    fn compensation_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let uf = random_unitary(&mut rng);
            let inv = uf.adjoint();
            let (a, b, c) = solve_triplet(&inv).unwrap();
            let total = waveplate_triplet(a, b, c) * uf;
            assert!(total.max_diff_up_to_phase(&JonesMatrix::identity()) < 1e-8);
        }
    }

    #[test]
    fn ellipse_examples() {
        let e = ellipse_of(&JonesVector::horizontal());
        assert_eq!((e.azimuth, e.ellipticity), (0.0, 0.0));
        let e = ellipse_of(&JonesVector::right_circular());
        assert!((e.ellipticity - FRAC_PI_4).abs() < 1e-12);
        assert!(!e.azimuth_defined && e.azimuth == 0.0);
        let e = ellipse_of(&JonesVector::anti_diagonal());
        assert!((e.azimuth + FRAC_PI_4).abs() < 1e-12);
        let e = ellipse_of(&JonesVector::vertical());
        assert!((e.azimuth - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn sagnac_chain_reads_half_the_phase_as_ellipticity() {
        let chain = ClassicalChain::ideal(JonesMatrix::identity()).unwrap();
        let chi = ellipse_of(&chain.output(2.8e-3)).ellipticity;
        assert!((chi - 1.4e-3).abs() < 1e-6);
    }

    #[test]
    fn compensated_chain_with_random_fiber() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let uf = random_unitary(&mut rng);
            let oh = uf.apply(&JonesVector::horizontal());
            let op = uf.apply(&JonesVector::diagonal());
            let rec = reconstruct_fiber_unitary(&oh, &op).unwrap();
            let chain = ClassicalChain::ideal(rec).unwrap();
            for phi in [-0.09, -0.01, 0.0, 2.83e-3, 0.05, 0.099] {
                assert!((chain.measured_phase(phi) - phi).abs() < 1e-9, "phi = {phi}");
            }
        }
    }

    proptest! {
        #[test]
        fn hwp_squares_to_identity(theta in -10.0f64..10.0) {
            let h = hwp(theta);
            prop_assert!(h.is_unitary(1e-12));
            prop_assert!((h * h).max_diff_up_to_phase(&JonesMatrix::identity()) < 1e-12);
        }

        #[test]
        fn qwp_squares_to_hwp(theta in -10.0f64..10.0) {
            prop_assert!(qwp(theta).is_unitary(1e-12));
            prop_assert!((qwp(theta) * qwp(theta)).max_diff_up_to_phase(&hwp(theta)) < 1e-12);
        }

        #[test]
        fn constructors_are_unitary(a in -7.0f64..7.0, b in -7.0f64..7.0, c in -7.0f64..7.0) {
            prop_assert!(phase_shift(a).is_unitary(1e-12));
            prop_assert!(bias_unitary(a).is_unitary(1e-12));
            let t = waveplate_triplet(a, b, c);
            prop_assert!(t.is_unitary(1e-12));
            prop_assert!((t * bias_unitary(b) * hwp(c)).is_unitary(1e-10));
        }

        #[test]
        fn ellipse_round_trip(psi in -1.5f64..1.5, chi in -0.78f64..0.78) {
            let e = PolarizationEllipse::new(psi, chi);
            let back = ellipse_of(&e.to_vector());
            prop_assert!((back.azimuth - psi).abs() < 1e-10);
            prop_assert!((back.ellipticity - chi).abs() < 1e-10);
            let v = e.to_vector();
            prop_assert!((v.normalize().norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!(v.infidelity(&back.to_vector()) < 1e-14);
        }

        #[test]
        fn triplet_round_trip(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(&mut rng);
            let (a, b, c) = solve_triplet(&u).unwrap();
            prop_assert!(waveplate_triplet(a, b, c).max_diff_up_to_phase(&u) < 1e-8);
        }
    }
}
