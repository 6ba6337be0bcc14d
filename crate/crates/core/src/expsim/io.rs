//! CSV formats for count records and polarimeter traces.
//!
//! Both files start with a `# qsagnac-<kind> v1` comment line. Readers skip
//! comment lines, so the version line is optional on input.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CountRecord, PolarimeterTrace, TraceSample};
use crate::error::{ensure, Error, Result};

pub const COUNTS_SCHEMA: &str = "# qsagnac-counts v1";
pub const TRACE_SCHEMA: &str = "# qsagnac-trace v1";

#[derive(Serialize, Deserialize)]
struct CountRow {
    theta_deg: f64,
    phi0_rad: f64,
    switch: String,
    duration_s: f64,
    n_h: u64,
    n_v: u64,
    n_hv: u64,
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    t_s: f64,
    psi_rad: f64,
    chi_rad: f64,
    drive: u8,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn check_headers<R: Read>(rdr: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let got = rdr.headers()?;
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        return Err(Error::Validation(format!("expected columns {want:?}, found {got:?}")));
    }
    Ok(())
}

pub fn write_counts<W: Write>(mut w: W, records: &[CountRecord]) -> Result<()> {
    writeln!(w, "{COUNTS_SCHEMA}")?;
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(CountRow {
            theta_deg: r.theta.to_degrees(),
            phi0_rad: r.phi0,
            switch: r.switch.as_str().to_string(),
            duration_s: r.duration,
            n_h: r.n_h,
            n_v: r.n_v,
            n_hv: r.n_hv,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_counts<R: Read>(r: R) -> Result<Vec<CountRecord>> {
    let mut rdr = reader(r);
    check_headers(&mut rdr, &["theta_deg", "phi0_rad", "switch", "duration_s", "n_h", "n_v", "n_hv"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<CountRow>() {
        let row = row?;
        let rec = CountRecord {
            theta: row.theta_deg.to_radians(),
            phi0: row.phi0_rad,
            switch: row.switch.parse()?,
            duration: row.duration_s,
            n_h: row.n_h,
            n_v: row.n_v,
            n_hv: row.n_hv,
        };
        rec.validate()?;
        out.push(rec);
    }
    ensure(!out.is_empty(), || "count file contains no records".into())?;
    Ok(out)
}

pub fn write_trace<W: Write>(mut w: W, trace: &PolarimeterTrace) -> Result<()> {
    writeln!(w, "{TRACE_SCHEMA}")?;
    let mut wtr = csv::Writer::from_writer(w);
    for s in &trace.samples {
        wtr.serialize(TraceRow { t_s: s.t, psi_rad: s.psi, chi_rad: s.chi, drive: s.drive })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a trace; the sample rate is inferred from the first two timestamps.
pub fn read_trace<R: Read>(r: R) -> Result<PolarimeterTrace> {
    let mut rdr = reader(r);
    check_headers(&mut rdr, &["t_s", "psi_rad", "chi_rad", "drive"])?;
    let mut samples = Vec::new();
    for row in rdr.deserialize::<TraceRow>() {
        let row = row?;
        ensure(row.drive <= 1, || format!("drive must be 0 or 1, got {}", row.drive))?;
        samples.push(TraceSample { t: row.t_s, psi: row.psi_rad, chi: row.chi_rad, drive: row.drive });
    }
    ensure(samples.len() >= 2, || "trace needs at least two samples".into())?;
    let trace = PolarimeterTrace { sample_rate: 1.0 / (samples[1].t - samples[0].t), samples };
    trace.validate()?;
    Ok(trace)
}
