//! Tabular and JSON output of analysis results.

use std::io::Write;

use serde::Serialize;

use super::ProbeAnalysis;
use crate::error::Result;
use crate::sagnac::SwitchState;

/// One row per frame angle: visibilities, phases and Earth phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleRow {
    pub theta_deg: f64,
    pub v_on: f64,
    pub v_on_sigma: f64,
    pub v_off: f64,
    pub v_off_sigma: f64,
    pub phi_on_mrad: f64,
    pub phi_on_sigma_mrad: f64,
    pub phi_off_mrad: f64,
    pub phi_off_sigma_mrad: f64,
    pub phi_e_mrad: f64,
    pub phi_e_sigma_mrad: f64,
}

impl AngleRow {
    pub fn from_analysis(a: &ProbeAnalysis) -> Self {
        let vis = |s: SwitchState| match a.mc.as_ref().and_then(|m| m.state(s)) {
            Some(st) => (st.visibility(), st.visibility_sigma()),
            None => {
                let f = if s == SwitchState::On { &a.fit_on } else { &a.fit_off };
                (f.visibility, f.visibility_sigma)
            }
        };
        let (v_on, v_on_sigma) = vis(SwitchState::On);
        let (v_off, v_off_sigma) = vis(SwitchState::Off);
        let e = &a.earth;
        AngleRow {
            theta_deg: a.theta.to_degrees(),
            v_on,
            v_on_sigma,
            v_off,
            v_off_sigma,
            phi_on_mrad: e.phi_on * 1e3,
            phi_on_sigma_mrad: e.phi_on_sigma * 1e3,
            phi_off_mrad: e.phi_off * 1e3,
            phi_off_sigma_mrad: e.phi_off_sigma * 1e3,
            phi_e_mrad: e.phi_e * 1e3,
            phi_e_sigma_mrad: e.phi_e_sigma * 1e3,
        }
    }
}

pub fn write_angle_table<W: Write>(w: W, rows: &[AngleRow]) -> Result<()> {
    write_csv(w, rows)
}

/// Writes serialisable rows with a header; an empty slice still gets no header,
/// so callers that need one should write it themselves.
pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}
