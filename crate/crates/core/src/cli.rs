//! Command-line front end: JSON recipes in, CSV tables and JSON reports out.
//!
//! Every run writes `manifest.json` next to its outputs. The manifest holds
//! the resolved configuration (seed included), its SHA-256 and the hash of
//! each output, so a run can be repeated from the manifest alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::report::{write_angle_table, write_csv, write_json, AngleRow};
use crate::analysis::{
    analyze_records, calibrate_scale_factor, demodulate_trace, enhancement_factor, fit_angle_sweep, AnglePhase,
    CalibrationResult, DemodResult, ProbeAnalysis, SweepFit, MC_SAMPLES_FAST, MC_SAMPLES_FULL,
};
use crate::error::{Error, Result};
use crate::expsim::io::{read_counts, read_trace, write_counts, write_trace};
use crate::expsim::{
    angle_sweep, protocol_bias_phases, simulate_polarimeter, CountRecord, CountingPlan, ExperimentConfig,
    NoiseConfig, OpticsConfig, RateConfig, SwitchSchedule, DEFAULT_MOTOR_SIGMA,
};
use crate::probe::ProbeKind;
use crate::sagnac::{scale_factor, GeometryInput, PhysicalConstants, Projection, OMEGA_EARTH, OMEGA_EARTH_CALIBRATION};
use crate::sensedesign::{
    landscape, optimize_gfring, rotation_resolution_with, DesignRow, DesignSpec, RingDesign, RingProblem,
    DESIGN_ROW_HEADER, REFERENCE_INTEGRATION_TIME,
};
use crate::stats::mix_seed;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_FAILURE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "qsagnac", version, about = "Switched Sagnac interferometer simulation, fitting and design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Recipe file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the recipe seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate count records and polarimeter traces.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit fringes, extract Earth phases and calibrate the scale factor.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Directory written by `simulate`; its manifest lists the inputs.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Use 10^3 Monte-Carlo samples instead of the recipe's count.
        #[arg(long)]
        fast: bool,
    },
    /// Sensitivity table for a list of designs.
    Design {
        #[command(flatten)]
        common: Common,
        /// Also search for the smallest square ring that resolves the
        /// general-relativistic rate.
        #[arg(long)]
        optimize_gfring: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub design: Option<DesignConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub geometry: GeometryInput,
    #[serde(default)]
    pub rates: RateConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub optics: OpticsConfig,
    /// True rotation rate (rad/s).
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub counts: Option<CountsJob>,
    #[serde(default)]
    pub traces: Option<TraceJob>,
}

fn default_omega() -> f64 {
    OMEGA_EARTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsJob {
    pub probes: Vec<ProbeKind>,
    pub frame_angles_deg: Vec<f64>,
    /// Wall time per bias phase; defaults to 15 min (one photon) or 30 min.
    #[serde(default)]
    pub record_time: Option<f64>,
    /// Defaults to the 11-point protocol grid of each probe.
    #[serde(default)]
    pub bias_phases: Option<Vec<f64>>,
    #[serde(default)]
    pub schedule: SwitchSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceJob {
    pub frame_angles_deg: Vec<f64>,
    /// Trace length per angle (s).
    pub duration: f64,
    #[serde(default = "SwitchSchedule::cw")]
    pub schedule: SwitchSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    /// Bias-phase repeatability assumed by the MC (rad).
    #[serde(default = "default_motor")]
    pub motor_sigma: f64,
    /// Schedule used to demodulate traces.
    #[serde(default = "SwitchSchedule::cw")]
    pub trace_schedule: SwitchSchedule,
    /// Rotation rate assumed by the calibration (rad/s).
    #[serde(default = "default_cal_omega")]
    pub calibration_omega: f64,
    /// Scale factor for converting sweep amplitudes to rates. Falls back to
    /// the calibration, then to the simulated geometry.
    #[serde(default)]
    pub scale_factor: Option<f64>,
    /// Files to fit when no `--input` directory is given; relative paths are
    /// resolved against the recipe's directory.
    #[serde(default)]
    pub inputs: Vec<InputFile>,
}

fn default_mc() -> usize {
    MC_SAMPLES_FULL
}

fn default_motor() -> f64 {
    DEFAULT_MOTOR_SIGMA
}

fn default_cal_omega() -> f64 {
    OMEGA_EARTH_CALIBRATION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Counts,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub path: PathBuf,
    pub kind: InputKind,
    /// Required for count files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeKind>,
    /// Required for traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default)]
    pub specs: Vec<DesignInput>,
    /// Problem for `--optimize-gfring`; defaults to the 10 GHz, 0.16 dB/km
    /// ring at 48.2 deg latitude.
    #[serde(default)]
    pub gfring: Option<RingProblem>,
    #[serde(default = "default_omega")]
    pub omega_earth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignInput {
    pub name: String,
    pub geometry: GeometryInput,
    pub alpha: f64,
    pub pair_rate_in: f64,
    #[serde(default = "default_t")]
    pub integration_time: f64,
    #[serde(default = "default_photons")]
    pub photons: u32,
    #[serde(default)]
    pub projection: Projection,
    #[serde(default)]
    pub measured_delta_phi: Option<f64>,
}

fn default_t() -> f64 {
    REFERENCE_INTEGRATION_TIME
}

fn default_photons() -> u32 {
    2
}

impl DesignInput {
    pub fn to_spec(&self) -> Result<DesignSpec> {
        let spec = DesignSpec {
            name: self.name.clone(),
            geometry: self.geometry.build()?,
            alpha: self.alpha,
            pair_rate_in: self.pair_rate_in,
            integration_time: self.integration_time,
            photons: self.photons,
            projection: self.projection,
            measured_delta_phi: self.measured_delta_phi,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<InputKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: RunConfig,
    pub outputs: Vec<OutputFile>,
}

/// Everything `fit` derives from its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mc_samples: usize,
    pub probes: Vec<ProbeAnalysis>,
    pub sweeps: Vec<ProbeSweep>,
    #[serde(default)]
    pub enhancement: Option<(f64, f64)>,
    pub traces: Vec<TraceResult>,
    #[serde(default)]
    pub calibration: Option<CalibrationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSweep {
    pub probe: ProbeKind,
    pub scale_factor: f64,
    pub fit: SweepFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub theta_deg: f64,
    pub demod: DemodResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub rows: Vec<DesignRow>,
    #[serde(default)]
    pub gfring: Option<RingDesign>,
}

/// Error code for the process exit status.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::FitFailed(_)
        | Error::IllConditioned(_)
        | Error::DegenerateDesign(_)
        | Error::UndefinedRatio(_)
        | Error::Infeasible(_) => EXIT_FAILURE,
        _ => EXIT_CONFIG,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Config(m),
        other => other,
    }
}

pub fn run(cli: Cli) -> Result<Manifest> {
    match cli.command {
        Command::Simulate { common } => {
            let (cfg, out) = prepare(&common)?;
            let seed = cfg.seed.ok_or_else(|| Error::Config("simulate needs a seed (recipe or --seed)".into()))?;
            let sim = cfg.simulate.clone().ok_or_else(|| Error::Config("recipe has no `simulate` section".into()))?;
            let outputs = cmd_simulate(&sim, seed, &out)?;
            finish(&cfg, "simulate", &out, outputs)
        }
        Command::Fit { common, input, fast } => {
            let (mut cfg, out) = prepare(&common)?;
            let fit = cfg.fit.as_mut().ok_or_else(|| Error::Config("recipe has no `fit` section".into()))?;
            if fast {
                fit.mc_samples = fit.mc_samples.min(MC_SAMPLES_FAST);
            }
            let seed = match (cfg.seed, cfg.fit.as_ref().map_or(0, |f| f.mc_samples)) {
                (Some(s), _) => s,
                (None, 0) => 0,
                (None, _) => return Err(Error::Config("Monte-Carlo fits need a seed (recipe or --seed)".into())),
            };
            let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
            let inputs = resolve_inputs(&cfg, input.as_deref(), &base)?;
            let outputs = cmd_fit(&cfg, &inputs, seed, &out)?;
            finish(&cfg, "fit", &out, outputs)
        }
        Command::Design { common, optimize_gfring } => {
            let (cfg, out) = prepare(&common)?;
            let design = cfg.design.clone().ok_or_else(|| Error::Config("recipe has no `design` section".into()))?;
            let outputs = cmd_design(&design, optimize_gfring, &out)?;
            finish(&cfg, "design", &out, outputs)
        }
    }
}

fn prepare(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = load_config(&common.config)?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    fs::create_dir_all(&common.out)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", common.out.display())))?;
    Ok((cfg, common.out.clone()))
}

fn finish(cfg: &RunConfig, command: &str, out: &Path, outputs: Vec<OutputFile>) -> Result<Manifest> {
    let canonical = serde_json::to_vec(cfg)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        config_sha256: sha256_hex(&canonical),
        config: cfg.clone(),
        outputs,
    };
    write_json(fs::File::create(out.join(MANIFEST))?, &manifest)?;
    Ok(manifest)
}

fn write_file(out: &Path, name: &str, bytes: &[u8]) -> Result<OutputFile> {
    fs::write(out.join(name), bytes)?;
    Ok(OutputFile { path: name.into(), sha256: sha256_hex(bytes), kind: None, probe: None, theta_deg: None })
}

pub fn cmd_simulate(sim: &SimulateConfig, seed: u64, out: &Path) -> Result<Vec<OutputFile>> {
    let geometry = sim.geometry.build().map_err(config_err)?;
    let mut outputs = Vec::new();

    if let Some(job) = &sim.counts {
        if job.probes.is_empty() || job.frame_angles_deg.is_empty() {
            return Err(Error::Config("counts job needs at least one probe and one frame angle".into()));
        }
        let thetas: Vec<f64> = job.frame_angles_deg.iter().map(|d| d.to_radians()).collect();
        for (i, &kind) in job.probes.iter().enumerate() {
            kind.validate().map_err(config_err)?;
            let plan = CountingPlan { record_time: job.record_time.unwrap_or(CountingPlan::protocol(kind).record_time) };
            let cfg = ExperimentConfig {
                geometry,
                schedule: job.schedule,
                rates: sim.rates,
                noise: sim.noise,
                optics: sim.optics,
                plan,
                omega: sim.omega,
            };
            cfg.validate().map_err(config_err)?;
            let phases = job.bias_phases.clone().unwrap_or_else(|| protocol_bias_phases(kind));
            let sweep = angle_sweep(kind, &cfg, &thetas, &phases, mix_seed(seed, i as u64)).map_err(config_err)?;
            let records: Vec<CountRecord> = sweep.into_iter().flat_map(|e| e.records).collect();
            let mut buf = Vec::new();
            write_counts(&mut buf, &records)?;
            let mut f = write_file(out, &format!("counts_{}.csv", kind.label()), &buf)?;
            f.kind = Some(InputKind::Counts);
            f.probe = Some(kind);
            outputs.push(f);
        }
    }

    if let Some(job) = &sim.traces {
        for (j, &deg) in job.frame_angles_deg.iter().enumerate() {
            let cfg = ExperimentConfig {
                geometry: geometry.at_frame_angle(deg.to_radians()),
                schedule: job.schedule,
                rates: sim.rates,
                noise: sim.noise,
                optics: sim.optics,
                plan: CountingPlan { record_time: job.duration },
                omega: sim.omega,
            };
            let trace = simulate_polarimeter(&cfg, job.duration, mix_seed(seed, 1000 + j as u64)).map_err(config_err)?;
            let mut buf = Vec::new();
            write_trace(&mut buf, &trace)?;
            let mut f = write_file(out, &format!("trace_{j:02}.csv"), &buf)?;
            f.kind = Some(InputKind::Trace);
            f.theta_deg = Some(deg);
            outputs.push(f);
        }
    }

    if outputs.is_empty() {
        return Err(Error::Config("simulate section requests neither counts nor traces".into()));
    }
    Ok(outputs)
}

fn resolve_inputs(cfg: &RunConfig, input: Option<&Path>, base: &Path) -> Result<Vec<InputFile>> {
    let (files, root) = match input {
        Some(dir) => {
            let path = dir.join(MANIFEST);
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let files = m
                .outputs
                .into_iter()
                .filter_map(|o| {
                    o.kind.map(|kind| InputFile { path: o.path.into(), kind, probe: o.probe, theta_deg: o.theta_deg })
                })
                .collect();
            (files, dir.to_path_buf())
        }
        None => (cfg.fit.as_ref().map(|f| f.inputs.clone()).unwrap_or_default(), base.to_path_buf()),
    };
    if files.is_empty() {
        return Err(Error::Config("no input files: pass --input DIR or list `fit.inputs`".into()));
    }
    Ok(files
        .into_iter()
        .map(|f| InputFile { path: if f.path.is_absolute() { f.path } else { root.join(f.path) }, ..f })
        .collect())
}

pub fn cmd_fit(cfg: &RunConfig, inputs: &[InputFile], seed: u64, out: &Path) -> Result<Vec<OutputFile>> {
    let fit = cfg.fit.as_ref().expect("checked by caller");
    let open = |p: &Path| fs::File::open(p).map_err(|e| Error::Config(format!("cannot open {}: {e}", p.display())));

    // Count records grouped by probe, then by frame angle in file order.
    let mut groups: Vec<(ProbeKind, f64, Vec<CountRecord>)> = Vec::new();
    let mut traces = Vec::new();
    for f in inputs {
        match f.kind {
            InputKind::Counts => {
                let kind = f
                    .probe
                    .ok_or_else(|| Error::Config(format!("{}: count inputs need a probe", f.path.display())))?;
                for r in read_counts(open(&f.path)?)? {
                    match groups.iter_mut().find(|g| g.0 == kind && g.1 == r.theta) {
                        Some(g) => g.2.push(r),
                        None => groups.push((kind, r.theta, vec![r])),
                    }
                }
            }
            InputKind::Trace => {
                let theta = f
                    .theta_deg
                    .ok_or_else(|| Error::Config(format!("{}: trace inputs need theta_deg", f.path.display())))?;
                traces.push((theta, read_trace(open(&f.path)?)?));
            }
        }
    }

    let probes: Vec<ProbeAnalysis> = groups
        .iter()
        .enumerate()
        .map(|(i, (kind, _, recs))| analyze_records(*kind, recs, fit.mc_samples, fit.motor_sigma, mix_seed(seed, i as u64)))
        .collect::<Result<_>>()?;

    let trace_results: Vec<TraceResult> = traces
        .iter()
        .map(|(theta, tr)| Ok(TraceResult { theta_deg: *theta, demod: demodulate_trace(tr, &fit.trace_schedule)? }))
        .collect::<Result<_>>()?;
    let calibration = if trace_results.len() >= 3 {
        let pts: Vec<AnglePhase> = trace_results
            .iter()
            .map(|t| AnglePhase { theta: t.theta_deg.to_radians(), phase: t.demod.phase, sigma: t.demod.phase_sigma })
            .collect();
        let n = fit.mc_samples.min(10 * MC_SAMPLES_FAST);
        Some(calibrate_scale_factor(&pts, fit.calibration_omega, n, mix_seed(seed, u64::MAX))?)
    } else {
        None
    };

    let s = fit
        .scale_factor
        .or(calibration.map(|c| c.scale_factor))
        .or_else(|| cfg.simulate.as_ref().and_then(|s| s.geometry.build().ok()).map(|g| scale_factor(&g)));
    let mut by_probe: BTreeMap<String, (ProbeKind, Vec<(f64, crate::analysis::EarthPhaseResult)>)> = BTreeMap::new();
    for a in &probes {
        by_probe.entry(a.probe.label()).or_insert((a.probe, Vec::new())).1.push((a.theta, a.earth));
    }
    let mut sweeps = Vec::new();
    for (kind, pts) in by_probe.values() {
        let mut angles: Vec<f64> = pts.iter().map(|p| p.0).collect();
        angles.dedup();
        if angles.len() >= 3 {
            let s = s.ok_or_else(|| Error::Config("angle sweeps need `fit.scale_factor` or a calibration".into()))?;
            sweeps.push(ProbeSweep { probe: *kind, scale_factor: s, fit: fit_angle_sweep(pts, kind.phase_multiplier(), s)? });
        }
    }

    let enhancement = {
        let one = sweeps.iter().find(|s| s.probe == ProbeKind::SinglePhoton);
        let two = sweeps.iter().find(|s| s.probe == ProbeKind::TWO_PHOTON);
        match (one, two) {
            (Some(a), Some(b)) => Some(enhancement_factor(
                (b.fit.max_phase, b.fit.max_phase_sigma),
                (a.fit.max_phase, a.fit.max_phase_sigma),
            )?),
            _ => {
                let find = |k: ProbeKind| probes.iter().find(|p| p.probe == k);
                match (find(ProbeKind::SinglePhoton), find(ProbeKind::TWO_PHOTON)) {
                    (Some(a), Some(b)) if a.theta == b.theta => enhancement_factor(
                        (b.earth.phi_e, b.earth.phi_e_sigma),
                        (a.earth.phi_e, a.earth.phi_e_sigma),
                    )
                    .ok(),
                    _ => None,
                }
            }
        }
    };

    let report = FitReport {
        mc_samples: fit.mc_samples,
        probes,
        sweeps,
        enhancement,
        traces: trace_results,
        calibration,
    };

    let mut outputs = Vec::new();
    let mut buf = Vec::new();
    write_json(&mut buf, &report)?;
    outputs.push(write_file(out, "fit_report.json", &buf)?);

    let mut labels: Vec<String> = report.probes.iter().map(|p| p.probe.label()).collect();
    labels.dedup();
    for label in labels {
        let rows: Vec<AngleRow> =
            report.probes.iter().filter(|p| p.probe.label() == label).map(AngleRow::from_analysis).collect();
        let mut buf = Vec::new();
        write_angle_table(&mut buf, &rows)?;
        outputs.push(write_file(out, &format!("angles_{label}.csv"), &buf)?);
    }
    if !report.traces.is_empty() {
        let mut buf = Vec::new();
        let rows: Vec<CalibrationRow> = report
            .traces
            .iter()
            .map(|t| CalibrationRow { theta_deg: t.theta_deg, phase_mrad: t.demod.phase * 1e3, sigma_mrad: t.demod.phase_sigma * 1e3 })
            .collect();
        write_csv(&mut buf, &rows)?;
        outputs.push(write_file(out, "cw_phases.csv", &buf)?);
    }
    Ok(outputs)
}

#[derive(Serialize)]
struct CalibrationRow {
    theta_deg: f64,
    phase_mrad: f64,
    sigma_mrad: f64,
}

pub fn cmd_design(design: &DesignConfig, optimize: bool, out: &Path) -> Result<Vec<OutputFile>> {
    let constants = PhysicalConstants::with_omega_earth(design.omega_earth);
    constants.validate().map_err(config_err)?;
    let specs: Vec<DesignSpec> = design.specs.iter().map(|s| s.to_spec().map_err(config_err)).collect::<Result<_>>()?;
    let rows: Vec<DesignRow> = specs
        .iter()
        .map(|s| Ok(DesignRow::new(s, &rotation_resolution_with(s, &constants)?)))
        .collect::<Result<_>>()
        .map_err(config_err)?;

    let mut outputs = Vec::new();
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.write_record(DESIGN_ROW_HEADER)?;
    for r in &rows {
        wtr.serialize(r)?;
    }
    let buf = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    outputs.push(write_file(out, "design.csv", &buf)?);

    let points = landscape(&specs, &constants)?;
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.write_record(["name", "log10_area_m2", "log10_delta_omega", "regime"])?;
    for p in &points {
        wtr.write_record([
            p.name.clone(),
            p.log10_area.to_string(),
            p.log10_delta_omega.to_string(),
            p.regime.label().to_string(),
        ])?;
    }
    let buf = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    outputs.push(write_file(out, "landscape.csv", &buf)?);

    let gfring = if optimize {
        let problem = design.gfring.unwrap_or_else(|| RingProblem::gfring(REFERENCE_INTEGRATION_TIME));
        Some(optimize_gfring(&problem, &constants)?)
    } else {
        None
    };
    let mut buf = Vec::new();
    write_json(&mut buf, &DesignReport { rows, gfring })?;
    outputs.push(write_file(out, "design_report.json", &buf)?);
    Ok(outputs)
}
