//! Estimation pipeline: fringe fits, Monte-Carlo uncertainties, switch
//! demodulation, angle sweeps and scale-factor calibration.

pub mod demod;
pub mod fringe;
pub mod mc;
pub mod report;
pub mod rotation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsim::CountRecord;
use crate::probe::ProbeKind;
use crate::sagnac::SwitchState;

pub use demod::{demodulate_trace, DemodResult};
pub use fringe::{
    fit_noon_fringe, fit_points, fit_single_fringe, nlls, FringeFit, FringeModel, FringePoint, InitPolicy,
};
pub use mc::{mc_uncertainty, McResult, StateSummary, MC_SAMPLES_FAST, MC_SAMPLES_FULL};
pub use rotation::{
    calibrate_scale_factor, earth_phase_from_mc, enhancement_factor, extract_earth_phase, fit_angle_sweep,
    fit_cosine, AnglePhase, CalibrationResult, CosineFit, EarthPhaseResult, SweepFit,
};

/// Fringe family used for a probe.
pub fn model_for(kind: ProbeKind) -> Result<FringeModel> {
    match kind {
        ProbeKind::SinglePhoton => Ok(FringeModel::Single),
        ProbeKind::Noon(n) => Ok(FringeModel::Noon { k: n }),
        ProbeKind::Classical => Err(Error::Validation("classical light has no counting fringe".into())),
    }
}

/// Fits and Earth phase for one probe at one frame angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAnalysis {
    pub probe: ProbeKind,
    /// Frame angle (rad).
    pub theta: f64,
    pub fit_on: FringeFit,
    pub fit_off: FringeFit,
    /// From the MC run when `mc` is present, otherwise from the fit covariances.
    pub earth: EarthPhaseResult,
    pub mc: Option<McResult>,
}

/// Fits both switch states and extracts the Earth phase. With
/// `mc_samples > 0` the uncertainties come from [`mc_uncertainty`].
pub fn analyze_records(
    kind: ProbeKind,
    records: &[CountRecord],
    mc_samples: usize,
    motor_sigma: f64,
    seed: u64,
) -> Result<ProbeAnalysis> {
    let model = model_for(kind)?;
    let split = |s: SwitchState| -> Vec<CountRecord> { records.iter().filter(|r| r.switch == s).copied().collect() };
    let (on, off) = (split(SwitchState::On), split(SwitchState::Off));
    if on.is_empty() || off.is_empty() {
        return Err(Error::Validation("records must contain both switch states".into()));
    }
    let fit = |recs: &[CountRecord]| fit_points(model, &fringe::points_for(model, recs)?);
    let (fit_on, fit_off) = (fit(&on)?, fit(&off)?);
    let theta = records[0].theta;
    let (earth, mc) = if mc_samples > 0 {
        let mc = mc_uncertainty(records, model, mc_samples, motor_sigma, seed)?;
        (earth_phase_from_mc(&mc)?, Some(mc))
    } else {
        (extract_earth_phase(&fit_on, &fit_off)?, None)
    };
    Ok(ProbeAnalysis { probe: kind, theta, fit_on, fit_off, earth, mc })
}
