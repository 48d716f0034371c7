//! Command drivers. Each command takes its options as strings, so that a
//! manifest can replay it exactly; options left out take their value from
//! the configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};
use thiserror::Error;

use super::cache::{cache_key, FieldCache};
use super::campaign::{Campaign, DEFAULT_CAMPAIGN};
use super::manifest::{sha256_hex, RunManifest};
use super::table::{embedded_hash, read_numeric_csv, Cell, Table};
use crate::carriers::CarrierError;
use crate::config::{load_config, Config, ConfigError, DriveConditions, Electrode};
use crate::electrostatics::{write_field_csv, FieldSolution, PlFilter};
use crate::experiments::{
    beam_size_study, contrast_vs_voltage, depletion_study, gradient_for_regions, linear_grid, power_series, spectrum_scan,
    BeamEntry, ContrastSweep, DepletionStudy, ExperimentError, SpectrumResult,
};
use crate::model::{Model, ModelError};
use crate::transport::{calibrate_barrier, device_iv, DiodePair, IVCurve, IvSample, TransportError};

pub const JSON_SCHEMA: &str = "fedmr-json/1";
pub const FAILURE_FILE: &str = "failure.json";

pub type Args = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("solver failure: {message}")]
    Solver { message: String, u: Option<f64> },
    #[error("verification failed: {0}")]
    Verify(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Solver { .. } => 3,
            CliError::Verify(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        match e {
            ModelError::Carriers(CarrierError::Unreachable { .. } | CarrierError::BadTarget(_) | CarrierError::NoGeneration(_))
            | ModelError::Grid(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver {
                message: e.to_string(),
                u: None,
            },
        }
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> CliError {
        match e {
            TransportError::Solver { u, .. } => CliError::Solver {
                message: e.to_string(),
                u: Some(u),
            },
            TransportError::Model(m) => m.into(),
            TransportError::BadSweep | TransportError::TooFewPoints { .. } => CliError::Input(e.to_string()),
            _ => CliError::Solver {
                message: e.to_string(),
                u: None,
            },
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> CliError {
        match e {
            ExperimentError::Transport(t) => t.into(),
            ExperimentError::Model(m) => m.into(),
            ExperimentError::BadInput(_) | ExperimentError::IntensityMismatch(..) => CliError::Input(e.to_string()),
            ExperimentError::ZeroBaseline(_) => CliError::Solver {
                message: e.to_string(),
                u: None,
            },
        }
    }
}

/// Files produced by a command, in write order, and lines for the terminal.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

impl CommandOutput {
    fn table(&mut self, name: &str, t: &Table, hash: &str) {
        self.files.push((name.to_string(), t.to_bytes(hash)));
    }

    fn json(&mut self, name: &str, hash: &str, mut body: Value) {
        if let Value::Object(map) = &mut body {
            map.insert("schema".into(), JSON_SCHEMA.into());
            map.insert("manifest".into(), hash.into());
        }
        let mut text = serde_json::to_string_pretty(&body).expect("json serializes");
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
    }
}

pub const COMMANDS: &[&str] = &["iv", "dr", "spectrum", "contrast", "beamstudy", "calibrate", "figure-pack"];

struct Ctx<'a> {
    args: &'a Args,
    model: Model,
    hash: String,
}

impl Ctx<'_> {
    fn opt(&self, key: &str) -> Option<&str> {
        self.args.get(key).map(String::as_str)
    }

    fn num(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.opt(key).map(|v| parse_num(key, v)).transpose()
    }

    /// Drive from the configuration with command-line overrides.
    fn drive(&self) -> Result<DriveConditions, CliError> {
        let mut d = self.model.config.drive.clone();
        if let Some(p) = self.num("power")? {
            d.optical_power = p * 1e-3;
        }
        if let Some(rf) = self.opt("rf") {
            d.rf_enabled = match rf {
                "on" => true,
                "off" => false,
                other => return Err(CliError::Input(format!("--rf expects on|off, got `{other}`"))),
            };
        }
        if let Some(f) = self.num("rf_frequency")? {
            d.rf_frequency = f * 1e9;
        }
        if let Some(p) = self.num("rf_power")? {
            d.rf_power_dbm = p;
        }
        if let Some(u) = self.num("bias")? {
            d.bias_voltage = u;
        }
        if let Some(p) = self.opt("polarity") {
            d.positive_electrode = p.parse().map_err(|e: String| CliError::Input(e))?;
        }
        Ok(d)
    }

    fn range(&self, key: &str, default: &str) -> Result<Vec<f64>, CliError> {
        parse_range(key, self.opt(key).unwrap_or(default))
    }
}

fn parse_num(key: &str, v: &str) -> Result<f64, CliError> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::Input(format!("--{} expects a number, got `{v}`", key.replace('_', "-"))))
}

/// `start:stop:step`, inclusive.
pub fn parse_range(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Input(format!("--{key} expects start:stop:step, got `{v}`")));
    }
    let n: Vec<f64> = parts.iter().map(|p| parse_num(key, p)).collect::<Result<_, _>>()?;
    linear_grid(n[0], n[1], n[2]).map_err(|e| CliError::Input(format!("--{key}: {e}")))
}

/// Comma-separated numbers.
pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn label(v: f64) -> String {
    format!("{v}")
}

/// Runs `command`; returns the manifest (without file digests) and outputs.
pub fn run_command(command: &str, args: &Args, config: &Config, cache: Option<&FieldCache>) -> Result<(RunManifest, CommandOutput), CliError> {
    if !COMMANDS.contains(&command) {
        return Err(CliError::Input(format!("unknown command `{command}`")));
    }
    config.validate()?;
    let mut args = args.clone();
    // External inputs are pinned by digest so that a replay sees the same data.
    if command == "calibrate" {
        let path = args.get("data").ok_or_else(|| CliError::Input("calibrate needs --data".into()))?;
        let text = std::fs::read(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
        args.insert("data_sha256".into(), sha256_hex(&text));
    }
    if command == "figure-pack" {
        if let Some(path) = args.get("campaign") {
            let text = std::fs::read(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
            args.insert("campaign_sha256".into(), sha256_hex(&text));
        }
    }
    let model = Model::new(config.clone())?;
    let manifest = RunManifest::new(command, args.clone(), &model.config, model.calibration);
    let ctx = Ctx {
        args: &args,
        model,
        hash: manifest.hash(),
    };
    let out = match command {
        "iv" => cmd_iv(&ctx),
        "dr" => cmd_dr(&ctx, cache),
        "spectrum" => cmd_spectrum(&ctx),
        "contrast" => cmd_contrast(&ctx),
        "beamstudy" => cmd_beamstudy(&ctx),
        "calibrate" => cmd_calibrate(&ctx),
        "figure-pack" => cmd_figure_pack(&ctx),
        _ => unreachable!(),
    }?;
    Ok((manifest, out))
}

/// Writes outputs and the manifest with file digests into `dir`.
pub fn write_outputs(dir: &Path, mut manifest: RunManifest, out: &CommandOutput) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &out.files {
        std::fs::write(dir.join(name), bytes)?;
        manifest.files.insert(name.clone(), sha256_hex(bytes));
    }
    manifest.stamp_wall_clock();
    manifest.write(dir)?;
    Ok(manifest)
}

/// Diagnostic written next to the outputs when a solve fails.
pub fn write_failure(dir: &Path, command: &str, args: &Args, err: &CliError) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let u = match err {
        CliError::Solver { u, .. } => *u,
        _ => None,
    };
    let body = json!({
        "schema": JSON_SCHEMA,
        "command": command,
        "arguments": args,
        "error": err.to_string(),
        "bias_voltage": u,
        "exit_code": err.exit_code(),
    });
    std::fs::write(dir.join(FAILURE_FILE), serde_json::to_string_pretty(&body).unwrap() + "\n")
}

/// Replays the run recorded in `dir` and compares every file byte for byte.
/// Returns one report line per file.
pub fn verify(dir: &Path) -> Result<Vec<String>, CliError> {
    let recorded = RunManifest::read(dir).map_err(CliError::Verify)?;
    if sha256_hex(recorded.config_toml.as_bytes()) != recorded.config_hash {
        return Err(CliError::Verify("config hash does not match the stored configuration".into()));
    }
    let config = load_config(&recorded.config_toml, &[])?;
    let (manifest, out) = run_command(&recorded.command, &recorded.arguments, &config, None)?;
    let hash = manifest.hash();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    if hash != recorded.hash() {
        failures.push("manifest hash differs on replay".to_string());
    }
    let replay: BTreeMap<&str, &Vec<u8>> = out.files.iter().map(|(n, b)| (n.as_str(), b)).collect();
    for (name, digest) in &recorded.files {
        let disk = std::fs::read(dir.join(name));
        let status = match (&disk, replay.get(name.as_str())) {
            (Err(e), _) => format!("unreadable ({e})"),
            (Ok(_), None) => "not produced on replay".to_string(),
            (Ok(d), Some(r)) => {
                let embedded = if name.ends_with(".csv") {
                    embedded_hash(d)
                } else {
                    serde_json::from_slice::<Value>(d)
                        .ok()
                        .and_then(|v| v.get("manifest").and_then(Value::as_str).map(str::to_string))
                };
                if sha256_hex(d) != *digest {
                    "digest differs from manifest".to_string()
                } else if embedded.as_deref() != Some(hash.as_str()) {
                    "embedded manifest hash differs".to_string()
                } else if d != *r {
                    "replay differs".to_string()
                } else {
                    String::new()
                }
            }
        };
        if status.is_empty() {
            lines.push(format!("ok       {name}"));
        } else {
            lines.push(format!("MISMATCH {name}: {status}"));
            failures.push(format!("{name}: {status}"));
        }
    }
    for name in replay.keys() {
        if !recorded.files.contains_key(*name) {
            failures.push(format!("{name}: produced on replay but not recorded"));
        }
    }
    if failures.is_empty() {
        Ok(lines)
    } else {
        Err(CliError::Verify(failures.join("; ")))
    }
}

fn iv_table(curve: &IVCurve) -> Table {
    let mut t = Table::new([
        "U_V",
        "I_A",
        "U1_V",
        "E_center_V_per_m",
        "E_edge_V_per_m",
        "W_vertical_um",
        "L_lateral_um",
        "L_bottom_um",
        "stage",
    ]);
    for p in &curve.points {
        t.push(vec![
            p.u.into(),
            p.i.into(),
            p.u1.into(),
            p.e_center.into(),
            p.e_edge.into(),
            (p.w_vertical * 1e6).into(),
            (p.l_lateral * 1e6).into(),
            (p.l_bottom * 1e6).into(),
            p.stage.number().into(),
        ]);
    }
    t
}

fn iv_json(curve: &IVCurve, model: &Model) -> Value {
    json!({
        "inflection_voltage_V": curve.inflection_voltage,
        "hole_density_m3": curve.p0,
        "mixing_rate_per_s": curve.k_rabi,
        "rf_enabled": curve.rf_enabled,
        "optical_power_W": curve.drive.optical_power,
        "positive_electrode": curve.drive.positive_electrode.to_string(),
        "diode": curve.pair,
        "assumptions": {
            "reverse_junction_takes_full_bias": curve.pair.u1_equals_u(),
            "forward_contact_and_bulk_drop": if curve.pair.u1_equals_u() { "neglected" } else { "series resistance" },
            "field_mode": model.config.transport.field_mode,
            "edge_weight": model.config.transport.edge_weight,
        },
    })
}

fn cmd_iv(ctx: &Ctx) -> Result<CommandOutput, CliError> {
    let drive = ctx.drive()?;
    let sweep = ctx.range("u_range", &format!("0:{}:5", drive.bias_voltage))?;
    let curve = device_iv(&ctx.model, &drive, &sweep)?;
    let mut out = CommandOutput::default();
    out.table("iv.csv", &iv_table(&curve), &ctx.hash);
    out.json("iv.json", &ctx.hash, iv_json(&curve, &ctx.model));
    out.summary.push(format!(
        "{} points, p0 = {:.4e} m^-3, knee = {}",
        curve.points.len(),
        curve.p0,
        curve.inflection_voltage.map_or("none".into(), |u| format!("{u} V"))
    ));
    Ok(out)
}

fn dr_tables(study: &DepletionStudy) -> (Table, Table, Table) {
    let mut metrics = Table::new([
        "U_V",
        "stage",
        "W_vertical_um",
        "W_1d_um",
        "L_lateral_um",
        "L_bottom_um",
        "E_center_V_per_m",
        "E_edge_V_per_m",
        "newton_iterations",
    ]);
    for p in &study.points {
        let m = &p.metrics;
        metrics.push(vec![
            p.u.into(),
            m.stage.number().into(),
            (m.w_vertical * 1e6).into(),
            (p.w_1d * 1e6).into(),
            (m.l_lateral * 1e6).into(),
            (m.l_bottom * 1e6).into(),
            m.e_center.into(),
            m.e_edge.into(),
            Cell::I(p.newton_iterations as i64),
        ]);
    }
    let x = study.points.first().map(|p| p.profile.x.clone()).unwrap_or_default();
    let by_x = |f: &dyn Fn(&crate::experiments::DepletionPoint, usize) -> f64, prefix: &str| {
        let mut cols = vec!["x_um".to_string()];
        cols.extend(study.points.iter().map(|p| format!("{prefix}_U{}V", label(p.u))));
        let mut t = Table::new(cols);
        for (k, xv) in x.iter().enumerate() {
            let mut row = vec![Cell::F(xv * 1e6)];
            row.extend(study.points.iter().map(|p| Cell::F(f(p, k))));
            t.push(row);
        }
        t
    };
    let profiles = by_x(&|p, k| p.profile.delta_pl[k], "dPL");
    let field = by_x(&|p, k| p.surface_field[k], "E");
    (metrics, profiles, field)
}

fn dr_json(study: &DepletionStudy) -> Value {
    json!({
        "hole_density_m3": study.p0,
        "positive_electrode": study.positive.to_string(),
        "filter": study.filter,
        "sqrt_fit_stage3": study.sqrt_fit.map(|f| json!({
            "points": f.n,
            "slope_um_per_sqrtV": f.slope * 1e6,
            "intercept_um": f.intercept * 1e6,
            "r2": f.r2,
        })),
    })
}

fn dr_summary(study: &DepletionStudy) -> Vec<String> {
    let mut s = vec![format!("{:>7} {:>5} {:>9} {:>9} {:>9} {:>11}", "U (V)", "stage", "W (um)", "W1d (um)", "L (um)", "E_c (V/m)")];
    for p in &study.points {
        let m = &p.metrics;
        s.push(format!(
            "{:7.1} {:>5} {:9.3} {:9.3} {:9.3} {:11.4e}",
            p.u,
            m.stage.number(),
            m.w_vertical * 1e6,
            p.w_1d * 1e6,
            m.l_lateral * 1e6,
            m.e_center
        ));
    }
    match study.sqrt_fit {
        Some(f) => s.push(format!("L_lateral ~ sqrt(U) over {} stage-3 points: R^2 = {:.5}", f.n, f.r2)),
        None => s.push("fewer than two stage-3 points: no sqrt(U) fit".into()),
    }
    s
}

fn cached_solve(model: &Model, cache: Option<&FieldCache>, u: f64, p0: f64, positive: Electrode) -> Result<FieldSolution, CliError> {
    let c = &model.config;
    let key = cache_key(&model.grid, &model.hole_map(p0), u, positive, &c.material, &c.solver);
    if let Some(sol) = cache.and_then(|c| c.load(&key)) {
        return Ok(sol);
    }
    let sol = model
        .solve(u, p0, positive)
        .map_err(|source| CliError::from(TransportError::Solver { u, source }))?;
    if let Some(cache) = cache {
        cache.store(&key, &sol)?;
    }
    Ok(sol)
}

fn cmd_dr(ctx: &Ctx, cache: Option<&FieldCache>) -> Result<CommandOutput, CliError> {
    let drive = ctx.drive()?;
    let u_list = parse_list("u_list", ctx.opt("u_list").unwrap_or("0,10,20,30,40,50,60,70,80,90,100,110,120,130,140,150"))?;
    if u_list.iter().any(|u| !(*u >= 0.0)) {
        return Err(CliError::Input("--u-list entries must be non-negative".into()));
    }
    let filter: PlFilter = ctx.opt("filter").unwrap_or("nvminus").parse().map_err(CliError::Input)?;
    let study = depletion_study(&ctx.model, &drive, &u_list, filter)?;
    let (metrics, profiles, field) = dr_tables(&study);
    let mut out = CommandOutput::default();
    out.table("dr_metrics.csv", &metrics, &ctx.hash);
    out.table("dr_profiles.csv", &profiles, &ctx.hash);
    out.table("dr_surface_field.csv", &field, &ctx.hash);
    out.json("dr.json", &ctx.hash, dr_json(&study));
    if ctx.opt("field_maps") == Some("true") {
        for &u in &u_list {
            let sol = cached_solve(&ctx.model, cache, u, study.p0, drive.positive_electrode)?;
            let mut bytes = format!("# schema={} manifest={}\n", super::table::CSV_SCHEMA, ctx.hash).into_bytes();
            write_field_csv(&sol, &mut bytes)?;
            out.files.push((format!("field_U{}V.csv", label(u)), bytes));
        }
    }
    out.summary = dr_summary(&study);
    Ok(out)
}

fn spectrum_drive(ctx: &Ctx, line_a: f64, line_b: f64) -> Result<DriveConditions, CliError> {
    let mut drive = ctx.drive()?;
    drive.rf_enabled = true;
    if ctx.opt("gradient") != Some("off") {
        let (b, g) = gradient_for_regions(&ctx.model, line_a, line_b);
        drive.b_axial = b;
        drive.b_gradient = g;
    }
    Ok(drive)
}

fn spectrum_table(s: &SpectrumResult) -> Table {
    let mut t = Table::new(["f_Hz", "C_PDMR", "C_ODMR_A", "C_ODMR_B", "I_on_A"]);
    for k in 0..s.frequencies.len() {
        t.push(vec![
            s.frequencies[k].into(),
            s.pdmr_contrast[k].into(),
            s.odmr_contrast_a[k].into(),
            s.odmr_contrast_b[k].into(),
            s.i_on[k].into(),
        ]);
    }
    t
}

fn spectrum_json(s: &SpectrumResult) -> Value {
    json!({
        "positive_electrode": s.positive.to_string(),
        "bias_V": s.bias,
        "I_off_A": s.i_off,
        "field_A_T": s.field_a,
        "field_B_T": s.field_b,
        "pdmr_peak_Hz": s.pdmr_peak(),
        "odmr_peak_A_Hz": s.odmr_peak(Electrode::A),
        "odmr_peak_B_Hz": s.odmr_peak(Electrode::B),
    })
}

fn spectrum_summary(s: &SpectrumResult) -> String {
    format!(
        "positive {}: PDMR peak {:.4} GHz, ODMR A {:.4} GHz, ODMR B {:.4} GHz",
        s.positive,
        s.pdmr_peak() / 1e9,
        s.odmr_peak(Electrode::A) / 1e9,
        s.odmr_peak(Electrode::B) / 1e9
    )
}

fn cmd_spectrum(ctx: &Ctx) -> Result<CommandOutput, CliError> {
    let line_a = ctx.num("line_a")?.unwrap_or(1.98) * 1e9;
    let line_b = ctx.num("line_b")?.unwrap_or(2.02) * 1e9;
    let drive = spectrum_drive(ctx, line_a, line_b)?;
    let freqs: Vec<f64> = ctx.range("f_range", "1.90:2.10:0.002")?.iter().map(|f| f * 1e9).collect();
    let s = spectrum_scan(&ctx.model, &drive, &freqs)?;
    let mut out = CommandOutput::default();
    out.table("spectrum.csv", &spectrum_table(&s), &ctx.hash);
    out.json("spectrum.json", &ctx.hash, spectrum_json(&s));
    out.summary.push(spectrum_summary(&s));
    Ok(out)
}

fn contrast_table(s: &ContrastSweep) -> Table {
    let mut t = Table::new(["U_V", "I_off_A", "I_on_A", "C_PDMR", "regime"]);
    for k in 0..s.voltages.len() {
        t.push(vec![
            s.voltages[k].into(),
            s.i_off[k].into(),
            s.i_on[k].into(),
            s.c_pdmr[k].into(),
            s.regimes[k].label().into(),
        ]);
    }
    t
}

fn contrast_json(s: &ContrastSweep) -> Value {
    let plateau = s.plateau_contrast();
    json!({
        "knee_rf_on_V": s.knee_on,
        "knee_rf_off_V": s.knee_off,
        "plateau_contrast": plateau,
        "plateau_spread": s.plateau_spread(),
        "odmr_contrast": s.c_odmr,
        "pdmr_exceeds_odmr": plateau.map(|p| p > s.c_odmr),
        "optical_power_W": s.drive.optical_power,
        "beam_waist_m": s.waist,
        "rf_frequency_Hz": s.drive.rf_frequency,
        "rf_power_dBm": s.drive.rf_power_dbm,
    })
}

fn contrast_summary(s: &ContrastSweep) -> String {
    let f = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x}"));
    format!(
        "knees: RF on {} V, RF off {} V; plateau C_PDMR {}, spread {}; C_ODMR {:.4}",
        f(s.knee_on),
        f(s.knee_off),
        s.plateau_contrast().map_or("none".into(), |c| format!("{c:.4}")),
        s.plateau_spread().map_or("none".into(), |c| format!("{:.2}%", 100.0 * c)),
        s.c_odmr
    )
}

fn cmd_contrast(ctx: &Ctx) -> Result<CommandOutput, CliError> {
    let mut drive = ctx.drive()?;
    if ctx.opt("rf").is_none() {
        drive.rf_enabled = true;
    }
    let sweep = ctx.range("u_range", &format!("0:{}:5", drive.bias_voltage))?;
    let s = contrast_vs_voltage(&ctx.model, &drive, &sweep)?;
    let mut out = CommandOutput::default();
    out.table("contrast.csv", &contrast_table(&s), &ctx.hash);
    out.json("contrast.json", &ctx.hash, contrast_json(&s));
    out.summary.push(contrast_summary(&s));
    Ok(out)
}

fn beam_inputs(ctx: &Ctx) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let waists: Vec<f64> = parse_list("waists", ctx.opt("waists").unwrap_or("5,10"))?.iter().map(|w| w * 1e-6).collect();
    let powers: Vec<f64> = parse_list("powers", ctx.opt("powers").unwrap_or("100,400"))?.iter().map(|p| p * 1e-3).collect();
    Ok((waists, powers))
}

fn beam_rows(study: &[BeamEntry]) -> Table {
    let mut t = Table::new(["waist_um", "power_mW", "U_V", "I_off_A", "I_on_A", "C_PDMR", "regime"]);
    for e in study {
        let s = &e.sweep;
        for k in 0..s.voltages.len() {
            t.push(vec![
                (e.waist * 1e6).into(),
                (e.power * 1e3).into(),
                s.voltages[k].into(),
                s.i_off[k].into(),
                s.i_on[k].into(),
                s.c_pdmr[k].into(),
                s.regimes[k].label().into(),
            ]);
        }
    }
    t
}

fn beam_json(study: &[BeamEntry]) -> Value {
    json!({
        "intensity_W_per_m2": study.first().map(|e| e.intensity),
        "entries": study.iter().map(|e| json!({
            "waist_m": e.waist,
            "power_W": e.power,
            "hole_density_m3": e.iv_off.p0,
            "knee_rf_on_V": e.sweep.knee_on,
            "knee_rf_off_V": e.sweep.knee_off,
            "plateau_contrast": e.sweep.plateau_contrast(),
            "plateau_spread": e.sweep.plateau_spread(),
        })).collect::<Vec<_>>(),
    })
}

fn cmd_beamstudy(ctx: &Ctx) -> Result<CommandOutput, CliError> {
    let mut drive = ctx.drive()?;
    if ctx.opt("rf").is_none() {
        drive.rf_enabled = true;
    }
    let (waists, powers) = beam_inputs(ctx)?;
    let sweep = ctx.range("u_range", "0:300:10")?;
    let study = beam_size_study(&ctx.model, &drive, &waists, &powers, &sweep)?;
    let mut out = CommandOutput::default();
    out.table("beamstudy.csv", &beam_rows(&study), &ctx.hash);
    out.json("beamstudy.json", &ctx.hash, beam_json(&study));
    for e in &study {
        out.summary.push(format!("waist {} um, {} mW: {}", label(e.waist * 1e6), label(e.power * 1e3), contrast_summary(&e.sweep)));
    }
    Ok(out)
}

/// Calibration samples from a CSV with U and I columns (`U_V`, `I_A`, else
/// the first two) and an optional field column.
pub fn read_iv_samples(text: &str) -> Result<Vec<IvSample>, CliError> {
    let (header, rows) = read_numeric_csv(text).map_err(CliError::Input)?;
    let find = |names: &[&str]| header.iter().position(|h| names.contains(&h.as_str()));
    let iu = find(&["U_V", "U"]).unwrap_or(0);
    let ii = find(&["I_A", "I"]).unwrap_or(1);
    let ie = find(&["E_center_V_per_m", "E_V_per_m", "E"]);
    if header.len() < 2 {
        return Err(CliError::Input("calibration data needs U and I columns".into()));
    }
    rows.iter()
        .enumerate()
        .map(|(n, r)| {
            let u = r.get(iu).copied().unwrap_or(f64::NAN);
            let i = r.get(ii).copied().unwrap_or(f64::NAN);
            let e = ie.and_then(|k| r.get(k).copied()).unwrap_or(0.0);
            if !(u.is_finite() && i.is_finite() && e.is_finite()) {
                return Err(CliError::Input(format!("data row {}: non-numeric U, I or E", n + 1)));
            }
            Ok(IvSample { u, i, e })
        })
        .collect()
}

fn cmd_calibrate(ctx: &Ctx) -> Result<CommandOutput, CliError> {
    let path = ctx.opt("data").expect("checked in run_command");
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
    let samples = read_iv_samples(&text)?;
    let mat = &ctx.model.config.material;
    let mut seed = DiodePair::from_config(mat, &ctx.model.config.transport, Electrode::A);
    if let Some(p) = ctx.num("phi1")? {
        seed.phi1 = p;
    }
    if let Some(e) = ctx.num("eta")? {
        seed.eta = e;
    }
    let fit = calibrate_barrier(&samples, &seed, mat).map_err(|e| match e {
        TransportError::TooFewPoints { .. } => CliError::Input(e.to_string()),
        other => CliError::Solver {
            message: other.to_string(),
            u: None,
        },
    })?;
    let used: Vec<&IvSample> = samples.iter().filter(|s| s.u > 0.0 && s.i > 0.0).collect();
    let mut t = Table::new(["U_V", "I_A", "E_V_per_m", "log_residual"]);
    for (s, r) in used.iter().zip(&fit.residuals) {
        t.push(vec![s.u.into(), s.i.into(), s.e.into(), (*r).into()]);
    }
    let mut out = CommandOutput::default();
    out.table("calibration_residuals.csv", &t, &ctx.hash);
    out.json(
        "calibration.json",
        &ctx.hash,
        json!({
            "phi1_V": fit.phi1,
            "eta": fit.eta,
            "A_eff_m2": fit.a_eff,
            "covariance_phi1_eta": fit.covariance,
            "rms_log_residual": fit.rms,
            "iterations": fit.iterations,
            "A_eff_held_fixed": fit.a_eff_fixed,
            "eta_held_fixed": fit.eta_fixed,
            "samples_used": used.len(),
        }),
    );
    out.summary.push(format!(
        "phi1 = {:.6} V (sd {:.2e}), eta = {:.6}{}, rms = {:.3e}",
        fit.phi1,
        fit.covariance[0][0].sqrt(),
        fit.eta,
        if fit.eta_fixed { " (held: no low-bias data)" } else { "" },
        fit.rms
    ));
    Ok(out)
}

fn cmd_figure_pack(ctx: &Ctx) -> Result<CommandOutput, CliError> {
    let text = match ctx.opt("campaign") {
        Some(path) => {
            std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?
        }
        None => DEFAULT_CAMPAIGN.to_string(),
    };
    let c = Campaign::parse(&text).map_err(CliError::Config)?;
    let model = &ctx.model;
    let base = ctx.drive()?;
    let hash = &ctx.hash;
    let mut out = CommandOutput::default();
    let mut summary = serde_json::Map::new();

    // fig2a
    let sweep = parse_range("iv_power.u_range_v", &c.iv_power.u_range_v)?;
    let powers: Vec<f64> = c.iv_power.powers_mw.iter().map(|p| p * 1e-3).collect();
    let mut off = base.clone();
    off.rf_enabled = false;
    let curves = power_series(model, &off, &powers, &sweep)?;
    let mut cols = vec!["U_V".to_string()];
    cols.extend(c.iv_power.powers_mw.iter().map(|p| format!("I_A_{}mW", label(*p))));
    let mut t = Table::new(cols);
    for (k, &u) in sweep.iter().enumerate() {
        let mut row = vec![Cell::F(u)];
        row.extend(curves.iter().map(|cv| Cell::F(cv.points[k].i)));
        t.push(row);
    }
    out.table("fig2a.csv", &t, hash);
    summary.insert(
        "fig2a_knees_V".into(),
        json!(c.iv_power.powers_mw.iter().zip(&curves).map(|(p, cv)| json!({"power_mW": p, "knee_V": cv.inflection_voltage})).collect::<Vec<_>>()),
    );

    // fig2b, fig2c
    let sp = &c.spectra;
    let freqs: Vec<f64> = parse_range("spectra.f_range_ghz", &sp.f_range_ghz)?.iter().map(|f| f * 1e9).collect();
    let (b, g) = gradient_for_regions(model, sp.line_a_ghz * 1e9, sp.line_b_ghz * 1e9);
    for (name, positive) in [("fig2b", Electrode::A), ("fig2c", Electrode::B)] {
        let mut d = base.clone();
        d.rf_enabled = true;
        d.optical_power = sp.power_mw * 1e-3;
        d.bias_voltage = sp.bias_v;
        d.positive_electrode = positive;
        d.b_axial = b;
        d.b_gradient = g;
        let s = spectrum_scan(model, &d, &freqs)?;
        out.table(&format!("{name}.csv"), &spectrum_table(&s), hash);
        summary.insert(name.into(), spectrum_json(&s));
        out.summary.push(format!("{name}: {}", spectrum_summary(&s)));
    }

    // fig2d
    let dp = &c.depletion;
    let mut d = base.clone();
    d.rf_enabled = false;
    d.optical_power = dp.power_mw * 1e-3;
    let filter: PlFilter = dp.filter.parse().map_err(CliError::Config)?;
    let study = depletion_study(model, &d, &dp.u_list_v, filter)?;
    let (metrics, profiles, field) = dr_tables(&study);
    out.table("fig2d.csv", &profiles, hash);
    out.table("fig2d_metrics.csv", &metrics, hash);
    out.table("fig2d_field.csv", &field, hash);
    summary.insert("fig2d".into(), dr_json(&study));
    if let Some(f) = study.sqrt_fit {
        out.summary.push(format!("fig2d: L_lateral ~ sqrt(U), R^2 = {:.5} over {} points", f.r2, f.n));
    }

    // fig3a, fig3b
    let cp = &c.contrast;
    let sweep = parse_range("contrast.u_range_v", &cp.u_range_v)?;
    let mut cols = vec!["U_V".to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut fig3b = None;
    for &p in &cp.powers_mw {
        let mut d = base.clone();
        d.rf_enabled = true;
        d.optical_power = p * 1e-3;
        let s = contrast_vs_voltage(model, &d, &sweep)?;
        cols.push(format!("I_off_A_{}mW", label(p)));
        cols.push(format!("I_on_A_{}mW", label(p)));
        columns.push(s.i_off.clone());
        columns.push(s.i_on.clone());
        if p == cp.contrast_power_mw {
            fig3b = Some(s);
        }
    }
    let fig3b = match fig3b {
        Some(s) => s,
        None => {
            let mut d = base.clone();
            d.rf_enabled = true;
            d.optical_power = cp.contrast_power_mw * 1e-3;
            contrast_vs_voltage(model, &d, &sweep)?
        }
    };
    let mut t = Table::new(cols);
    for (k, &u) in sweep.iter().enumerate() {
        let mut row = vec![Cell::F(u)];
        row.extend(columns.iter().map(|c| Cell::F(c[k])));
        t.push(row);
    }
    out.table("fig3a.csv", &t, hash);
    out.table("fig3b.csv", &contrast_table(&fig3b), hash);
    summary.insert("fig3b".into(), contrast_json(&fig3b));
    out.summary.push(format!("fig3b: {}", contrast_summary(&fig3b)));

    // fig3c, fig3d
    let bp = &c.beam;
    let sweep = parse_range("beam.u_range_v", &bp.u_range_v)?;
    let waists: Vec<f64> = bp.waists_um.iter().map(|w| w * 1e-6).collect();
    let powers: Vec<f64> = bp.powers_mw.iter().map(|p| p * 1e-3).collect();
    let mut d = base.clone();
    d.rf_enabled = true;
    let study = beam_size_study(model, &d, &waists, &powers, &sweep)?;
    let mut c3 = vec!["U_V".to_string()];
    let mut c4 = vec!["U_V".to_string()];
    for e in &study {
        let w = label(e.waist * 1e6);
        c3.push(format!("I_off_A_w{w}um"));
        c3.push(format!("I_on_A_w{w}um"));
        c4.push(format!("C_PDMR_w{w}um"));
        c4.push(format!("regime_w{w}um"));
    }
    let (mut t3, mut t4) = (Table::new(c3), Table::new(c4));
    for (k, &u) in sweep.iter().enumerate() {
        let mut r3 = vec![Cell::F(u)];
        let mut r4 = vec![Cell::F(u)];
        for e in &study {
            r3.push(e.sweep.i_off[k].into());
            r3.push(e.sweep.i_on[k].into());
            r4.push(e.sweep.c_pdmr[k].into());
            r4.push(e.sweep.regimes[k].label().into());
        }
        t3.push(r3);
        t4.push(r4);
    }
    out.table("fig3c.csv", &t3, hash);
    out.table("fig3d.csv", &t4, hash);
    summary.insert("fig3cd".into(), beam_json(&study));
    for e in &study {
        out.summary.push(format!("fig3c/d waist {} um: {}", label(e.waist * 1e6), contrast_summary(&e.sweep)));
    }
    out.json("figures.json", hash, Value::Object(summary));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(pairs: &[(&str, &str)]) -> Args {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_range("u", "0:150:5").unwrap().len(), 31);
        assert!(parse_range("u", "0:150").is_err());
        assert_eq!(parse_list("u", "1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(matches!(parse_list("u", "1,x"), Err(CliError::Input(_))));
    }

    #[test]
    fn unknown_command_is_input_error() {
        let e = run_command("plot", &Args::new(), &Config::default(), None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn dark_iv_is_zero() {
        let (_, out) = run_command("iv", &args(&[("power", "0"), ("u_range", "0:40:10")]), &Config::default(), None).unwrap();
        let (h, rows) = read_numeric_csv(std::str::from_utf8(&out.files[0].1).unwrap()).unwrap();
        assert_eq!(h[1], "I_A");
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn unreachable_calibration_is_config_error() {
        let mut cfg = Config::default();
        cfg.calibration.target_hole_density = 10.0 * cfg.material.n_nitrogen;
        let e = run_command("iv", &Args::new(), &cfg, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Solver { message: String::new(), u: Some(1.0) }.exit_code(), 3);
        assert_eq!(CliError::Verify(String::new()).exit_code(), 4);
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
    }

    #[test]
    fn two_column_samples() {
        let s = read_iv_samples("U,I\n1,2e-9\n2,3e-9\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[1].u, s[1].i, s[1].e), (2.0, 3e-9, 0.0));
        assert!(read_iv_samples("U,I\n1,x\n").is_err());
    }
}
