//! Probe states and their detection statistics.
//!
//! States live in the fixed-photon-number subspace of two modes (H/V, or
//! equivalently the clockwise/counter-clockwise paths). Amplitude `k` of an
//! `n`-photon state belongs to `|n-k>_a |k>_b`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::polarization::{hwp, JonesMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Heralded single photon.
    SinglePhoton,
    /// `(|N,0> - |0,N>)/sqrt 2`.
    Noon(u32),
    /// Coherent (CW) light.
    Classical,
}

impl ProbeKind {
    pub const TWO_PHOTON: ProbeKind = ProbeKind::Noon(2);

    pub fn validate(&self) -> Result<()> {
        if let ProbeKind::Noon(n) = self {
            ensure(*n >= 2, || format!("N00N probes need n >= 2, got {n}"))?;
        }
        Ok(())
    }

    /// Factor by which the observed fringe phase exceeds the one-photon phase.
    pub fn phase_multiplier(&self) -> u32 {
        match self {
            ProbeKind::Noon(n) => *n,
            _ => 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProbeKind::SinglePhoton => "one_photon".into(),
            ProbeKind::Noon(2) => "two_photon".into(),
            ProbeKind::Noon(n) => format!("noon_{n}"),
            ProbeKind::Classical => "classical".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    photons: u32,
    amplitudes: Vec<Complex64>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl TwoModeState {
    /// State from amplitudes over `|n-k, k>`, `k = 0..=n`.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        ensure(!amplitudes.is_empty(), || "empty amplitude vector".into())?;
        let s = Self {
            photons: (amplitudes.len() - 1) as u32,
            amplitudes,
        };
        ensure((s.norm_sqr() - 1.0).abs() <= 1e-12, || {
            format!("state is not normalized (norm^2 = {})", s.norm_sqr())
        })?;
        Ok(s)
    }

    /// `(|n,0> - |0,n>)/sqrt 2`.
    pub fn noon(n: u32) -> Result<Self> {
        ensure(n >= 1, || "N00N state needs at least one photon".into())?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n as usize + 1];
        amplitudes[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amplitudes[n as usize] = Complex64::new(-FRAC_1_SQRT_2, 0.0);
        Ok(Self { photons: n, amplitudes })
    }

    /// `|1>_H |1>_V`.
    pub fn one_one() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            photons: 2,
            amplitudes: vec![z, Complex64::new(1.0, 0.0), z],
        }
    }

    pub fn photons(&self) -> u32 {
        self.photons
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Amplitude of `|n_a, n_b>`; zero outside the subspace.
    pub fn amplitude(&self, n_a: u32, n_b: u32) -> Complex64 {
        if n_a + n_b != self.photons {
            return Complex64::new(0.0, 0.0);
        }
        self.amplitudes[n_b as usize]
    }

    pub fn probability(&self, n_a: u32, n_b: u32) -> f64 {
        self.amplitude(n_a, n_b).norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `1 - |<self|other>|^2`.
    pub fn infidelity(&self, other: &TwoModeState) -> f64 {
        if self.photons != other.photons {
            return 1.0;
        }
        let ov: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        (1.0 - ov.norm_sqr()).max(0.0)
    }

    /// Phase `phi_s` per photon in mode `b`: `|n-k, k>` picks up `e^{i k phi_s}`,
    /// so the `|0, N>` branch of a N00N state gains `e^{i N phi_s}`.
    pub fn evolve(&self, phi_s: f64) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| a * Complex64::from_polar(1.0, k as f64 * phi_s))
            .collect();
        Self {
            photons: self.photons,
            amplitudes,
        }
    }

    /// Applies the single-photon unitary `u` to every photon.
    pub fn apply_mode_unitary(&self, u: &JonesMatrix) -> Self {
        let n = self.photons;
        let m = &u.0;
        let mut out = vec![Complex64::new(0.0, 0.0); n as usize + 1];
        for (k, &c) in self.amplitudes.iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let k = k as u32;
            let na = n - k;
            let norm_in = (factorial(na) * factorial(k)).sqrt();
            // a^dagger -> m00 a^dagger + m10 b^dagger, b^dagger -> m01 a^dagger + m11 b^dagger
            for i in 0..=na {
                let ta = m[0][0].powu(na - i) * m[1][0].powu(i) * binomial(na, i);
                for j in 0..=k {
                    let tb = m[0][1].powu(k - j) * m[1][1].powu(j) * binomial(k, j);
                    let mb = i + j;
                    let norm_out = (factorial(n - mb) * factorial(mb)).sqrt();
                    out[mb as usize] += c * ta * tb * (norm_out / norm_in);
                }
            }
        }
        Self {
            photons: n,
            amplitudes: out,
        }
    }
}

/// Two-photon state leaving the 22.5 deg HWP when `|1_H, 1_V>` enters.
///
/// `distinguishability = 0` gives `(|2,0> - |0,2>)/sqrt 2` by exact
/// interference. For `d > 0` the bunching is incomplete: the returned state
/// keeps a `|1,1>` amplitude `sqrt(d/2)` and reaches the 1/4, 1/2, 1/4
/// occupation statistics of distinguishable photons at `d = 1`. Fringe
/// visibility is modelled separately as `V = 1 - d`.
pub fn hom_interfere(distinguishability: f64) -> Result<TwoModeState> {
    ensure((0.0..=1.0).contains(&distinguishability), || {
        format!("distinguishability must be in [0, 1], got {distinguishability}")
    })?;
    let ideal = TwoModeState::one_one().apply_mode_unitary(&hwp(FRAC_PI_8));
    if distinguishability == 0.0 {
        return Ok(ideal);
    }
    let d = distinguishability;
    let bunched = ((1.0 - d / 2.0) / 2.0).sqrt();
    let phase_20 = ideal.amplitudes[0] / ideal.amplitudes[0].norm();
    let phase_02 = ideal.amplitudes[2] / ideal.amplitudes[2].norm();
    TwoModeState::from_amplitudes(vec![
        phase_20 * bunched,
        Complex64::new((d / 2.0).sqrt(), 0.0),
        phase_02 * bunched,
    ])
}

/// Two-photon fringe visibility for partially distinguishable photons.
pub fn hom_visibility(distinguishability: f64) -> f64 {
    1.0 - distinguishability
}

/// Detection probabilities `((1 + cos phi)/2, (1 - cos phi)/2)` for one photon.
pub fn single_photon_probs(phi_s: f64) -> (f64, f64) {
    let c = phi_s.cos();
    ((1.0 + c) / 2.0, (1.0 - c) / 2.0)
}

/// `((1 + cos N phi)/2, (1 - cos N phi)/2)`.
pub fn noon_probs(n: u32, phi_s: f64) -> Result<(f64, f64)> {
    ensure(n >= 1, || "photon number must be at least 1".into())?;
    Ok(single_photon_probs(f64::from(n) * phi_s))
}

/// Two-photon coincidence probability `(1 + cos(2 phi0 + 2 phi_s)) / 2`.
pub fn coincidence_prob(phi0: f64, phi_s: f64) -> f64 {
    coincidence_prob_with_visibility(phi0, phi_s, 1.0)
}

pub fn coincidence_prob_with_visibility(phi0: f64, phi_s: f64, visibility: f64) -> f64 {
    0.5 * (1.0 + visibility * (2.0 * phi0 + 2.0 * phi_s).cos())
}

/// State after the second pass through the 22.5 deg HWP:
/// `sin(phi)(|2,0> + |0,2>)/sqrt 2 - i cos(phi) |1,1>`.
pub fn output_state_after_hwp(phi_s: f64) -> TwoModeState {
    let (s, c) = phi_s.sin_cos();
    TwoModeState {
        photons: 2,
        amplitudes: vec![
            Complex64::new(s * FRAC_1_SQRT_2, 0.0),
            Complex64::new(0.0, -c),
            Complex64::new(s * FRAC_1_SQRT_2, 0.0),
        ],
    }
}

/// Coincidence probability computed from the state itself: bias phase,
/// then the HWP, then projection onto `|1,1>`.
pub fn coincidence_prob_from_state(state: &TwoModeState, phi0: f64) -> f64 {
    state
        .evolve(phi0)
        .apply_mode_unitary(&hwp(FRAC_PI_8))
        .probability(1, 1)
}
