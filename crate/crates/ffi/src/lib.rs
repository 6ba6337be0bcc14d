//! C interface to `qsagnac`.
//!
//! Objects cross the boundary as opaque handles created by `qs_*_new` or
//! `qs_*` constructors and released with the matching `qs_*_free`. Every
//! fallible call returns a [`QsStatus`]; on failure the message is kept per
//! thread and can be copied out with [`qs_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qsagnac::analysis::{analyze_records, extract_earth_phase, model_for};
use qsagnac::expsim::{simulate_counts, CountRecord, CountingPlan, ExperimentConfig};
use qsagnac::probe::ProbeKind;
use qsagnac::sagnac::{sagnac_phase, scale_factor, InterferometerGeometry, SwitchState};
use qsagnac::sensedesign::{optimize_gfring, RingProblem};
use qsagnac::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    FitFailed = 3,
    IllConditioned = 4,
    DegenerateDesign = 5,
    UndefinedRatio = 6,
    Infeasible = 7,
    Io = 8,
    Panic = 9,
}

/// Loop geometry.
pub struct QsGeometry(InterferometerGeometry);

/// Geometry plus rates, noise and plan, all at their defaults except what
/// the constructor sets.
pub struct QsExperiment(ExperimentConfig);

/// Simulated count records.
pub struct QsRecords(Vec<CountRecord>);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QsCountRecord {
    pub theta: f64,
    pub phi0: f64,
    /// 1 for the full-area state, 0 for the cancelled one.
    pub switch_on: u8,
    pub duration: f64,
    pub n_h: u64,
    pub n_v: u64,
    pub n_hv: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QsEarthPhase {
    pub phi_on: f64,
    pub phi_on_sigma: f64,
    pub phi_off: f64,
    pub phi_off_sigma: f64,
    pub phi_e: f64,
    pub phi_e_sigma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QsRingDesign {
    pub fiber_length: f64,
    pub turns: u32,
    pub side: f64,
    pub scale_factor: f64,
    pub delta_omega: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QsStatus {
    match e {
        Error::FitFailed(_) => QsStatus::FitFailed,
        Error::IllConditioned(_) => QsStatus::IllConditioned,
        Error::DegenerateDesign(_) => QsStatus::DegenerateDesign,
        Error::UndefinedRatio(_) => QsStatus::UndefinedRatio,
        Error::Infeasible(_) => QsStatus::Infeasible,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => QsStatus::Io,
        Error::Validation(_) | Error::Config(_) => QsStatus::InvalidInput,
    }
}

/// Runs `f`, converting errors and panics into a status and the
/// thread-local message.
fn guard(f: impl FnOnce() -> Result<(), (QsStatus, String)>) -> QsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QsStatus::Panic
        }
    }
}

fn lift<T>(r: qsagnac::Result<T>) -> Result<T, (QsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (QsStatus, String) {
    (QsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (QsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut T, value: T, what: &str) -> Result<(), (QsStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn probe(photons: u32) -> Result<ProbeKind, (QsStatus, String)> {
    match photons {
        0 => Err((QsStatus::InvalidInput, "photon number must be at least 1".into())),
        1 => Ok(ProbeKind::SinglePhoton),
        n => Ok(ProbeKind::Noon(n)),
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, or 0 if none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// The 2 km, 715 m^2 loop at 1546 nm, frame angle zero.
#[no_mangle]
pub extern "C" fn qs_geometry_vienna() -> *mut QsGeometry {
    Box::into_raw(Box::new(QsGeometry(InterferometerGeometry::vienna_loop())))
}

/// Square frame wound with `turns` turns of `fiber_length` metres.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_geometry_square(
    fiber_length: f64,
    turns: u32,
    wavelength: f64,
    out: *mut *mut QsGeometry,
) -> QsStatus {
    guard(|| {
        let g = lift(InterferometerGeometry::square(fiber_length, turns, wavelength))?;
        store(out, Box::into_raw(Box::new(QsGeometry(g))), "out")
    })
}

/// # Safety
/// `geom` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_geometry_free(geom: *mut QsGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// Sets the angle (rad) between the loop normal and the Earth axis.
///
/// # Safety
/// `geom` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_geometry_set_frame_angle(geom: *mut QsGeometry, frame_angle: f64) -> QsStatus {
    guard(|| {
        let g = geom.as_mut().ok_or_else(|| null("geom"))?;
        if !frame_angle.is_finite() {
            return Err((QsStatus::InvalidInput, "frame angle must be finite".into()));
        }
        g.0.frame_angle = frame_angle;
        Ok(())
    })
}

/// # Safety
/// `geom` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_scale_factor(geom: *const QsGeometry, out: *mut f64) -> QsStatus {
    guard(|| {
        let g = deref(geom, "geom")?;
        store(out, scale_factor(&g.0), "out")
    })
}

/// One-photon Sagnac phase at rotation rate `omega` for the given switch state.
///
/// # Safety
/// `geom` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_sagnac_phase(geom: *const QsGeometry, omega: f64, switch_on: u8, out: *mut f64) -> QsStatus {
    guard(|| {
        let g = deref(geom, "geom")?;
        let sw = if switch_on != 0 { SwitchState::On } else { SwitchState::Off };
        store(out, sagnac_phase(&g.0, omega, sw), "out")
    })
}

/// Experiment with default rates and noise, `record_time` seconds per bias phase.
///
/// # Safety
/// `geom` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_experiment_new(
    geom: *const QsGeometry,
    record_time: f64,
    out: *mut *mut QsExperiment,
) -> QsStatus {
    guard(|| {
        let g = deref(geom, "geom")?;
        let cfg = ExperimentConfig::new(g.0, CountingPlan { record_time });
        lift(cfg.validate())?;
        store(out, Box::into_raw(Box::new(QsExperiment(cfg))), "out")
    })
}

/// # Safety
/// `exp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_experiment_free(exp: *mut QsExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Disables every noise source except Poisson counting.
///
/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_experiment_silence(exp: *mut QsExperiment) -> QsStatus {
    guard(|| {
        let e = exp.as_mut().ok_or_else(|| null("exp"))?;
        e.0.noise = qsagnac::expsim::NoiseConfig::silent();
        Ok(())
    })
}

/// Simulates counts for a probe of `photons` photons (1 for a heralded
/// single photon) at `n_phases` bias phases.
///
/// # Safety
/// `exp` must be a live handle, `phi0` valid for `n_phases` reads and
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_simulate_counts(
    exp: *const QsExperiment,
    photons: u32,
    phi0: *const f64,
    n_phases: usize,
    seed: u64,
    out: *mut *mut QsRecords,
) -> QsStatus {
    guard(|| {
        let e = deref(exp, "exp")?;
        if phi0.is_null() && n_phases > 0 {
            return Err(null("phi0"));
        }
        let phases = if n_phases == 0 { &[][..] } else { std::slice::from_raw_parts(phi0, n_phases) };
        let recs = lift(simulate_counts(probe(photons)?, &e.0, phases, seed))?;
        store(out, Box::into_raw(Box::new(QsRecords(recs))), "out")
    })
}

/// # Safety
/// `recs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_records_free(recs: *mut QsRecords) {
    if !recs.is_null() {
        drop(Box::from_raw(recs));
    }
}

/// Number of records, 0 for a null handle.
///
/// # Safety
/// `recs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_records_len(recs: *const QsRecords) -> usize {
    recs.as_ref().map_or(0, |r| r.0.len())
}

/// # Safety
/// `recs` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_records_get(recs: *const QsRecords, index: usize, out: *mut QsCountRecord) -> QsStatus {
    guard(|| {
        let r = deref(recs, "recs")?;
        let rec = r.0.get(index).ok_or_else(|| {
            (QsStatus::InvalidInput, format!("index {index} out of range for {} records", r.0.len()))
        })?;
        store(
            out,
            QsCountRecord {
                theta: rec.theta,
                phi0: rec.phi0,
                switch_on: u8::from(rec.switch == SwitchState::On),
                duration: rec.duration,
                n_h: rec.n_h,
                n_v: rec.n_v,
                n_hv: rec.n_hv,
            },
            "out",
        )
    })
}

/// Fits both switch states and extracts the Earth phase. With
/// `mc_samples > 0` the sigmas come from a Monte-Carlo run seeded by `seed`,
/// otherwise from the fit covariances.
///
/// # Safety
/// `recs` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_fit_earth_phase(
    recs: *const QsRecords,
    photons: u32,
    mc_samples: usize,
    motor_sigma: f64,
    seed: u64,
    out: *mut QsEarthPhase,
) -> QsStatus {
    guard(|| {
        let r = deref(recs, "recs")?;
        let kind = probe(photons)?;
        lift(model_for(kind))?;
        let a = lift(analyze_records(kind, &r.0, mc_samples, motor_sigma, seed))?;
        let e = if mc_samples == 0 { lift(extract_earth_phase(&a.fit_on, &a.fit_off))? } else { a.earth };
        store(
            out,
            QsEarthPhase {
                phi_on: e.phi_on,
                phi_on_sigma: e.phi_on_sigma,
                phi_off: e.phi_off,
                phi_off_sigma: e.phi_off_sigma,
                phi_e: e.phi_e,
                phi_e_sigma: e.phi_e_sigma,
            },
            "out",
        )
    })
}

/// Smallest square ring reaching `target_snr` against the general-relativistic
/// rate, for the 10 GHz, 0.16 dB/km two-photon design at latitude `latitude` (rad).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qs_optimize_gfring(
    target_snr: f64,
    latitude: f64,
    integration_time: f64,
    out: *mut QsRingDesign,
) -> QsStatus {
    guard(|| {
        let problem = RingProblem { target_snr, latitude, ..RingProblem::gfring(integration_time) };
        let d = lift(optimize_gfring(&problem, &Default::default()))?;
        store(
            out,
            QsRingDesign {
                fiber_length: d.fiber_length,
                turns: d.turns,
                side: d.side,
                scale_factor: d.report.scale_factor,
                delta_omega: d.report.delta_omega,
            },
            "out",
        )
    })
}
