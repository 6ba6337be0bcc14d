//! Synthetic data generator for the switched Sagnac experiment.
//!
//! Produces photon count records for each bias phase and switch state, and
//! polarimeter traces for the CW calibration. All randomness derives from an
//! explicit seed; record `k` draws from its own ChaCha stream so records can
//! be generated in any order.

pub(crate) mod counts;
pub mod io;
mod polarimeter;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::probe::ProbeKind;
use crate::sagnac::{InterferometerGeometry, SwitchState, OMEGA_EARTH};

pub use counts::{angle_sweep, expected_counts, simulate_counts, AngleSweep, SweepEntry};
pub use polarimeter::{simulate_polarimeter, PolarimeterTrace, TraceSample};

/// Waveplate motor repeatability that reproduces the 2.45 mrad (one-photon)
/// and 4.9 mrad (two-photon) fitted phase uncertainties at the default plan.
pub const DEFAULT_MOTOR_SIGMA: f64 = 6.0e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Gaussian bias-phase error per record (rad), shared by both switch states.
    pub motor_repeatability_sigma: f64,
    /// Detector dark-count rate (Hz).
    pub dark_rate: f64,
    /// Coincidence window (s).
    pub coincidence_window: f64,
    /// Linear phase drift (rad/s).
    pub phase_drift_rate: f64,
    /// Random-walk phase drift (rad/sqrt(s)).
    pub phase_random_walk: f64,
    /// Per-sample polarimeter angle noise (rad).
    pub polarimeter_noise_sigma: f64,
    /// Fraction of the ellipticity signal power that appears on the azimuth.
    pub azimuth_leakage_fraction: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            motor_repeatability_sigma: DEFAULT_MOTOR_SIGMA,
            dark_rate: 300.0,
            coincidence_window: 3.75e-9,
            phase_drift_rate: 0.0,
            phase_random_walk: 0.0,
            polarimeter_noise_sigma: 0.5e-3,
            azimuth_leakage_fraction: 0.1,
        }
    }
}

impl NoiseConfig {
    /// No noise of any kind; expected values are returned exactly (up to Poisson).
    pub fn silent() -> Self {
        Self {
            motor_repeatability_sigma: 0.0,
            dark_rate: 0.0,
            coincidence_window: 0.0,
            phase_drift_rate: 0.0,
            phase_random_walk: 0.0,
            polarimeter_noise_sigma: 0.0,
            azimuth_leakage_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("motor_repeatability_sigma", self.motor_repeatability_sigma),
            ("dark_rate", self.dark_rate),
            ("coincidence_window", self.coincidence_window),
            ("phase_random_walk", self.phase_random_walk),
            ("polarimeter_noise_sigma", self.polarimeter_noise_sigma),
            ("azimuth_leakage_fraction", self.azimuth_leakage_fraction),
        ];
        for (name, v) in fields {
            ensure(v >= 0.0 && v.is_finite(), || format!("{name} must be non-negative, got {v}"))?;
        }
        ensure(self.phase_drift_rate.is_finite(), || "phase_drift_rate must be finite".into())?;
        ensure(self.azimuth_leakage_fraction < 1.0, || {
            "azimuth_leakage_fraction must be below 1".into()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateConfig {
    /// Detected N-photon coincidence rate at the fringe maximum (Hz).
    pub pair_rate_detected: f64,
    /// Heralded single-photon rate summed over both output ports (Hz).
    pub heralded_single_rate: f64,
    /// Singles rate of the trigger detector (Hz).
    pub trigger_rate: f64,
    /// Polarimeter sampling rate (Hz).
    pub cw_sample_rate: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self::from_source(400e3, 0.5, 0.1)
    }
}

impl RateConfig {
    /// Rates implied by a detected source pair rate and the trigger-arm and
    /// interferometer transmissions.
    pub fn from_source(source_pair_rate: f64, eta_trigger: f64, eta_interferometer: f64) -> Self {
        Self {
            pair_rate_detected: source_pair_rate * eta_interferometer * eta_interferometer,
            heralded_single_rate: source_pair_rate * eta_trigger * eta_interferometer,
            trigger_rate: source_pair_rate * eta_trigger,
            cw_sample_rate: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pair_rate_detected", self.pair_rate_detected),
            ("heralded_single_rate", self.heralded_single_rate),
            ("trigger_rate", self.trigger_rate),
            ("cw_sample_rate", self.cw_sample_rate),
        ] {
            ensure(v > 0.0 && v.is_finite(), || format!("{name} must be positive, got {v}"))?;
        }
        Ok(())
    }
}

/// Source and alignment quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticsConfig {
    /// Photon distinguishability; two-photon visibility is `1 - d`.
    pub distinguishability: f64,
    pub single_photon_visibility: f64,
    /// `A_H / A_V` for the heralded single-photon channels.
    pub channel_ratio: f64,
    /// Constant bias set-point error added to the fringe phase (rad).
    pub setpoint_offset: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            distinguishability: 0.03,
            single_photon_visibility: 0.9967,
            channel_ratio: 1.0,
            setpoint_offset: 0.0,
        }
    }
}

impl OpticsConfig {
    pub fn ideal() -> Self {
        Self {
            distinguishability: 0.0,
            single_photon_visibility: 1.0,
            channel_ratio: 1.0,
            setpoint_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure((0.0..=1.0).contains(&self.distinguishability), || {
            "distinguishability must lie in [0, 1]".into()
        })?;
        ensure((0.0..=1.0).contains(&self.single_photon_visibility), || {
            "single_photon_visibility must lie in [0, 1]".into()
        })?;
        ensure(self.channel_ratio > 0.0, || "channel_ratio must be positive".into())?;
        ensure(self.setpoint_offset.is_finite(), || "setpoint_offset must be finite".into())
    }
}

/// Square-wave drive of the optical switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchSchedule {
    pub frequency: f64,
    /// Fraction of each period spent in `On`.
    pub duty: f64,
    /// Data within this time of an edge is discarded (s).
    pub transition_halfwidth: f64,
}

impl Default for SwitchSchedule {
    fn default() -> Self {
        Self::counting()
    }
}

impl SwitchSchedule {
    /// 0.1 Hz, 50 %, 10 ms cut around each edge.
    pub fn counting() -> Self {
        Self {
            frequency: 0.1,
            duty: 0.5,
            transition_halfwidth: 10e-3,
        }
    }

    /// As [`counting`](Self::counting) with the 50 ms polarimeter cut.
    pub fn cw() -> Self {
        Self {
            transition_halfwidth: 50e-3,
            ..Self::counting()
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.frequency > 0.0 && self.frequency.is_finite(), || {
            format!("switch frequency must be positive, got {}", self.frequency)
        })?;
        ensure(self.duty > 0.0 && self.duty < 1.0, || {
            format!("duty must lie in (0, 1), got {}", self.duty)
        })?;
        ensure(self.transition_halfwidth >= 0.0, || "transition_halfwidth must be non-negative".into())?;
        let cut = self.transition_halfwidth * 2.0 * self.frequency;
        ensure(cut < self.duty.min(1.0 - self.duty), || {
            format!("transition cut {cut:.3} of a period leaves no data in one switch state")
        })
    }

    /// Drive level at time `t`; the period starts with the `On` half.
    pub fn state_at(&self, t: f64) -> SwitchState {
        if (t * self.frequency).rem_euclid(1.0) < self.duty {
            SwitchState::On
        } else {
            SwitchState::Off
        }
    }

    /// Distance from `t` to the nearest switching edge.
    pub fn distance_to_edge(&self, t: f64) -> f64 {
        let period = self.period();
        let u = t.rem_euclid(period);
        let edges = [0.0, self.duty * period, period];
        edges.iter().map(|e| (u - e).abs()).fold(f64::INFINITY, f64::min)
    }

    /// Time spent in `state` during `[0, t)`.
    pub fn time_in_state(&self, t: f64, state: SwitchState) -> f64 {
        let period = self.period();
        let full = (t / period).floor();
        let rem = t - full * period;
        let on = full * self.duty * period + rem.min(self.duty * period);
        match state {
            SwitchState::On => on,
            SwitchState::Off => t - on,
        }
    }

    /// Usable integration time per state in a contiguous block of length
    /// `wall_time`, after the edge cuts.
    pub fn usable_time(&self, wall_time: f64, state: SwitchState) -> f64 {
        let fraction = match state {
            SwitchState::On => self.duty,
            SwitchState::Off => 1.0 - self.duty,
        };
        wall_time * (fraction - 2.0 * self.transition_halfwidth * self.frequency)
    }
}

/// How long each bias phase is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingPlan {
    /// Contiguous wall-clock time per bias phase, both switch states included (s).
    pub record_time: f64,
}

impl CountingPlan {
    /// 30 min per bias phase for two-photon runs, 15 min for one-photon.
    pub fn protocol(kind: ProbeKind) -> Self {
        match kind {
            ProbeKind::SinglePhoton => Self { record_time: 900.0 },
            _ => Self { record_time: 1800.0 },
        }
    }
}

/// Everything the count generator needs besides the probe and bias phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub geometry: InterferometerGeometry,
    #[serde(default)]
    pub schedule: SwitchSchedule,
    #[serde(default)]
    pub rates: RateConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub optics: OpticsConfig,
    pub plan: CountingPlan,
    /// True rotation rate (rad/s).
    #[serde(default = "default_omega")]
    pub omega: f64,
}

fn default_omega() -> f64 {
    OMEGA_EARTH
}

impl ExperimentConfig {
    pub fn new(geometry: InterferometerGeometry, plan: CountingPlan) -> Self {
        Self {
            geometry,
            schedule: SwitchSchedule::counting(),
            rates: RateConfig::default(),
            noise: NoiseConfig::default(),
            optics: OpticsConfig::default(),
            plan,
            omega: OMEGA_EARTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.schedule.validate()?;
        self.rates.validate()?;
        self.noise.validate()?;
        self.optics.validate()?;
        ensure(self.plan.record_time > 0.0 && self.plan.record_time.is_finite(), || {
            format!("record_time must be positive, got {}", self.plan.record_time)
        })?;
        ensure(self.omega.is_finite(), || "omega must be finite".into())
    }
}

/// Counts for one bias phase in one switch state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    /// Frame angle (rad).
    pub theta: f64,
    /// Nominal bias phase (rad).
    pub phi0: f64,
    pub switch: SwitchState,
    /// Integration time after edge cuts (s).
    pub duration: f64,
    pub n_h: u64,
    pub n_v: u64,
    pub n_hv: u64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        ensure(self.duration > 0.0 && self.duration.is_finite(), || {
            format!("record duration must be positive, got {}", self.duration)
        })?;
        ensure(self.phi0.is_finite() && self.theta.is_finite(), || "non-finite angle".into())
    }
}

/// `n` bias phases evenly spaced over `[start, end]`.
pub fn bias_phases(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| start + (end - start) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Eleven bias phases over a full fringe plus margins, per probe type.
pub fn protocol_bias_phases(kind: ProbeKind) -> Vec<f64> {
    match kind {
        ProbeKind::SinglePhoton | ProbeKind::Classical => {
            bias_phases(-FRAC_PI_4, 2.0 * PI + FRAC_PI_4, 11)
        }
        ProbeKind::Noon(_) => bias_phases(-FRAC_PI_8, 2.0 * PI + FRAC_PI_8, 11),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_from_source_bookkeeping() {
        let r = RateConfig::default();
        assert!((r.pair_rate_detected - 4e3).abs() < 1e-9);
        assert!((r.heralded_single_rate - 20e3).abs() < 1e-9);
        // 1 - eta_t eta_i = 95 % loss of heralded photons.
        assert!((1.0 - r.heralded_single_rate / 400e3 - 0.95).abs() < 1e-12);
    }

    #[test]
    fn schedule_validation() {
        assert!(SwitchSchedule::counting().validate().is_ok());
        assert!(SwitchSchedule::cw().validate().is_ok());
        let bad = SwitchSchedule { duty: 1.0, ..SwitchSchedule::counting() };
        assert!(bad.validate().is_err());
        let wide = SwitchSchedule { transition_halfwidth: 3.0, ..SwitchSchedule::counting() };
        assert!(wide.validate().is_err());
    }

    #[test]
    fn schedule_timing() {
        let s = SwitchSchedule::counting();
        assert_eq!(s.state_at(0.1), SwitchState::On);
        assert_eq!(s.state_at(5.1), SwitchState::Off);
        assert_eq!(s.state_at(10.1), SwitchState::On);
        assert!((s.distance_to_edge(4.98) - 0.02).abs() < 1e-12);
        assert!((s.distance_to_edge(9.99) - 0.01).abs() < 1e-12);
        assert!((s.time_in_state(12.0, SwitchState::On) - 7.0).abs() < 1e-12);
        assert!((s.usable_time(1800.0, SwitchState::On) - 896.4).abs() < 1e-9);
    }

    #[test]
    fn protocol_phases() {
        let p = protocol_bias_phases(ProbeKind::TWO_PHOTON);
        assert_eq!(p.len(), 11);
        assert!((p[0] + FRAC_PI_8).abs() < 1e-15);
        assert!((p[10] - 2.0 * PI - FRAC_PI_8).abs() < 1e-12);
        let p = protocol_bias_phases(ProbeKind::SinglePhoton);
        assert!((p[10] - p[0] - 2.0 * PI - 2.0 * FRAC_PI_4).abs() < 1e-12);
    }
}
