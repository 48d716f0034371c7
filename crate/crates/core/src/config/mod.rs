//! Model parameters and their loading from TOML documents.
//!
//! A user document is overlaid on the shipped defaults (`data/defaults.toml`),
//! then environment overrides (`FEDMR_<SECTION>__<KEY>=value`) and explicit
//! `section.key=value` overrides are applied in that order. Every quantity is
//! converted to SI and checked against its invariants before it is returned.

pub mod units;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use units::{parse_quantity, si_symbol, Dim, UnitError};

/// Shipped defaults; the single source of default values.
pub const DEFAULTS_TOML: &str = include_str!("../../data/defaults.toml");

/// Prefix for environment-variable overrides.
pub const ENV_PREFIX: &str = "FEDMR_";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown field `{field}`{}", at_line(*.line))]
    UnknownField { field: String, line: Option<usize> },
    #[error("field `{field}`{}: {message}", at_line(*.line))]
    BadValue {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("field `{field}` violates {bound} (got {value})")]
    Invariant {
        field: String,
        bound: String,
        value: String,
    },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

fn invariant(field: &str, bound: &str, value: impl fmt::Display) -> ConfigError {
    ConfigError::Invariant {
        field: field.to_string(),
        bound: bound.to_string(),
        value: value.to_string(),
    }
}

/// Electrode label; A sits at the left edge of the simulation box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Electrode {
    A,
    B,
}

impl Electrode {
    pub fn other(self) -> Electrode {
        match self {
            Electrode::A => Electrode::B,
            Electrode::B => Electrode::A,
        }
    }
}

impl fmt::Display for Electrode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Electrode::A => "A",
            Electrode::B => "B",
        })
    }
}

impl std::str::FromStr for Electrode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Electrode::A),
            "B" | "b" => Ok(Electrode::B),
            other => Err(format!("expected A or B, got `{other}`")),
        }
    }
}

/// Diamond material parameters (SI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub eps_s: f64,
    /// Nitrogen donor density (m^-3).
    pub n_nitrogen: f64,
    /// Boron acceptor density (m^-3).
    pub n_boron: f64,
    pub nv_fraction: f64,
    /// Hole barrier height of the reverse contact (V).
    pub phi1: f64,
    pub eta: f64,
    /// Richardson constant for holes (A m^-2 K^-2).
    pub a_star: f64,
    pub temperature: f64,
    /// Electron capture coefficient on ionized donors (m^3/s).
    pub c_e: f64,
    /// Hole capture coefficient (m^3/s).
    pub c_h: f64,
}

impl MaterialParams {
    pub fn nv_density(&self) -> f64 {
        self.nv_fraction * self.n_nitrogen
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_finite("material.eps_s", self.eps_s)?;
        if self.eps_s <= 1.0 {
            return Err(invariant("material.eps_s", "eps_s > 1", self.eps_s));
        }
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(invariant("material.temperature", "T > 0", self.temperature));
        }
        if self.eta < 1.0 || !self.eta.is_finite() {
            return Err(invariant("material.eta", "eta >= 1", self.eta));
        }
        if self.phi1 <= 0.0 || !self.phi1.is_finite() {
            return Err(invariant("material.phi1", "phi1 > 0", self.phi1));
        }
        if self.a_star <= 0.0 || !self.a_star.is_finite() {
            return Err(invariant("material.a_star", "A* > 0", self.a_star));
        }
        if self.n_boron <= 0.0 || !self.n_boron.is_finite() {
            return Err(invariant("material.n_boron", "N_boron > 0", self.n_boron));
        }
        if self.n_nitrogen <= self.n_boron || !self.n_nitrogen.is_finite() {
            return Err(invariant(
                "material.n_nitrogen",
                "N_nitrogen > N_boron",
                format!("{:e} <= {:e}", self.n_nitrogen, self.n_boron),
            ));
        }
        if !(0.0..=1.0).contains(&self.nv_fraction) {
            return Err(invariant("material.nv_fraction", "0 <= nv_fraction <= 1", self.nv_fraction));
        }
        if self.c_e <= 0.0 || !self.c_e.is_finite() {
            return Err(invariant("material.c_e", "c_e > 0", self.c_e));
        }
        if self.c_h <= 0.0 || !self.c_h.is_finite() {
            return Err(invariant("material.c_h", "c_h > 0", self.c_h));
        }
        Ok(())
    }
}

/// Device cross-section geometry (m). Electrode A spans the left edge of the
/// box, electrode B the right edge, with the gap between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub electrode_width: f64,
    pub electrode_gap: f64,
    pub slab_depth: f64,
    pub beam_waist: f64,
    pub box_depth: f64,
    pub grid_h: f64,
}

impl DeviceGeometry {
    pub fn box_width(&self) -> f64 {
        2.0 * self.electrode_width + self.electrode_gap
    }

    /// Same device illuminated with a different beam: the slab follows the
    /// waist and the insulating thickness under the slab is preserved.
    pub fn with_beam_waist(&self, waist: f64) -> DeviceGeometry {
        let below = (self.box_depth - self.slab_depth).max(0.0);
        DeviceGeometry {
            beam_waist: waist,
            slab_depth: 2.0 * waist,
            box_depth: 2.0 * waist + below,
            ..self.clone()
        }
    }

    pub fn with_grid(&self, h: f64) -> DeviceGeometry {
        DeviceGeometry {
            grid_h: h,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let lengths = [
            ("geometry.electrode_width", self.electrode_width),
            ("geometry.electrode_gap", self.electrode_gap),
            ("geometry.slab_depth", self.slab_depth),
            ("geometry.beam_waist", self.beam_waist),
            ("geometry.box_depth", self.box_depth),
            ("geometry.grid_h", self.grid_h),
        ];
        for (name, v) in lengths {
            if v <= 0.0 || !v.is_finite() {
                return Err(invariant(name, "length > 0", v));
            }
        }
        if self.slab_depth > self.box_depth * (1.0 + 1e-12) {
            return Err(invariant(
                "geometry.slab_depth",
                "slab_depth <= box_depth",
                format!("{:e} > {:e}", self.slab_depth, self.box_depth),
            ));
        }
        for (name, v) in &lengths[..5] {
            if *name == "geometry.beam_waist" {
                continue;
            }
            let cells = v / self.grid_h;
            if (cells - cells.round()).abs() > 1e-3 * cells.max(1.0) || cells.round() < 1.0 {
                return Err(invariant(
                    name,
                    "grid_h divides the length within 0.1%",
                    format!("{v:e} / {:e} = {cells}", self.grid_h),
                ));
            }
        }
        Ok(())
    }
}

/// Optical, RF, magnetic and electrical drive (SI; RF power in dBm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveConditions {
    pub optical_power: f64,
    pub rf_frequency: f64,
    pub rf_power_dbm: f64,
    pub rf_enabled: bool,
    /// Field projected on the aligned NV family at the device midpoint (T).
    pub b_axial: f64,
    /// Field gradient along x, from A towards B (T/m).
    pub b_gradient: f64,
    pub bias_voltage: f64,
    pub positive_electrode: Electrode,
}

impl DriveConditions {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.optical_power < 0.0 || !self.optical_power.is_finite() {
            return Err(invariant("drive.optical_power", "optical_power >= 0", self.optical_power));
        }
        if self.rf_enabled && (self.rf_frequency <= 0.0 || !self.rf_frequency.is_finite()) {
            return Err(invariant(
                "drive.rf_frequency",
                "rf_frequency > 0 when rf_enabled",
                self.rf_frequency,
            ));
        }
        if self.bias_voltage < 0.0 || !self.bias_voltage.is_finite() {
            return Err(invariant("drive.bias_voltage", "bias_voltage >= 0", self.bias_voltage));
        }
        check_finite("drive.rf_power", self.rf_power_dbm)?;
        check_finite("drive.b_axial", self.b_axial)?;
        check_finite("drive.b_gradient", self.b_gradient)?;
        Ok(())
    }
}

/// Rate coefficients of the NV photophysics model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotophysicsParams {
    pub k_rad: f64,
    pub k_isc0: f64,
    pub k_isc1: f64,
    pub k_ms: f64,
    /// Pump rate per unit intensity (s^-1 per W/m^2).
    pub pump_per_intensity: f64,
    pub ionization_per_intensity: f64,
    pub back_conversion_per_intensity: f64,
    /// Spin-mixing rate at 0 dBm (s^-1).
    pub rabi_at_0dbm: f64,
    /// Resonance FWHM (Hz).
    pub linewidth: f64,
    /// Zero-field splitting (Hz).
    pub zfs: f64,
}

impl PhotophysicsParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let rates = [
            ("photophysics.k_rad", self.k_rad),
            ("photophysics.k_isc0", self.k_isc0),
            ("photophysics.k_isc1", self.k_isc1),
            ("photophysics.k_ms", self.k_ms),
            ("photophysics.pump_per_intensity", self.pump_per_intensity),
            ("photophysics.ionization_per_intensity", self.ionization_per_intensity),
            ("photophysics.back_conversion_per_intensity", self.back_conversion_per_intensity),
            ("photophysics.rabi_at_0dbm", self.rabi_at_0dbm),
        ];
        for (name, v) in rates {
            if v < 0.0 || !v.is_finite() {
                return Err(invariant(name, "rate >= 0", v));
            }
        }
        if self.k_isc1 <= self.k_isc0 {
            return Err(invariant(
                "photophysics.k_isc1",
                "k_isc1 > k_isc0",
                format!("{:e} <= {:e}", self.k_isc1, self.k_isc0),
            ));
        }
        if self.linewidth <= 0.0 || !self.linewidth.is_finite() {
            return Err(invariant("photophysics.linewidth", "linewidth > 0", self.linewidth));
        }
        if self.zfs <= 0.0 || !self.zfs.is_finite() {
            return Err(invariant("photophysics.zfs", "zfs > 0", self.zfs));
        }
        Ok(())
    }
}

/// Anchor for the optical-power to generation-rate scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub reference_power: f64,
    /// Hole density to reproduce at the reference power (m^-3).
    pub target_hole_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub depletion_threshold: f64,
    pub newton_tolerance: f64,
    pub newton_max_iterations: usize,
    pub linear_tolerance: f64,
    pub linear_max_iterations: usize,
    pub damping: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Config::default().solver
    }
}

/// Which contact field enters the image-force term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldMode {
    Center,
    EdgeWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSettings {
    /// Effective emitting area (m^2).
    pub contact_area: f64,
    pub field_mode: FieldMode,
    pub edge_weight: f64,
    /// Series resistance of forward contact plus bulk (ohm); 0 means U1 = U.
    pub series_resistance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingSettings {
    pub nv_zero_alpha: f64,
}

/// Fully resolved, validated parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub material: MaterialParams,
    pub geometry: DeviceGeometry,
    pub drive: DriveConditions,
    pub photophysics: PhotophysicsParams,
    pub calibration: CalibrationTarget,
    pub solver: SolverSettings,
    pub transport: TransportSettings,
    pub imaging: ImagingSettings,
}

impl Default for Config {
    fn default() -> Self {
        load_config(DEFAULTS_TOML, &[]).expect("shipped defaults are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Quantity(Dim, Option<&'static str>),
    Integer,
    Bool,
    Text,
}

struct FieldSpec {
    section: &'static str,
    key: &'static str,
    kind: Kind,
}

const fn q(section: &'static str, key: &'static str, dim: Dim, default_unit: Option<&'static str>) -> FieldSpec {
    FieldSpec {
        section,
        key,
        kind: Kind::Quantity(dim, default_unit),
    }
}

const fn other(section: &'static str, key: &'static str, kind: Kind) -> FieldSpec {
    FieldSpec { section, key, kind }
}

/// Every accepted field with the unit bare numbers are read in.
const FIELDS: &[FieldSpec] = &[
    q("material", "eps_s", Dim::Dimensionless, None),
    q("material", "n_nitrogen", Dim::Density, Some("cm^-3")),
    q("material", "n_boron", Dim::Density, Some("cm^-3")),
    q("material", "nv_fraction", Dim::Dimensionless, None),
    q("material", "phi1", Dim::Voltage, Some("V")),
    q("material", "eta", Dim::Dimensionless, None),
    q("material", "a_star", Dim::Richardson, Some("A/cm^2/K^2")),
    q("material", "temperature", Dim::Temperature, Some("K")),
    q("material", "c_e", Dim::CaptureCoefficient, Some("cm^3/s")),
    q("material", "c_h", Dim::CaptureCoefficient, Some("cm^3/s")),
    q("geometry", "electrode_width", Dim::Length, Some("um")),
    q("geometry", "electrode_gap", Dim::Length, Some("um")),
    q("geometry", "slab_depth", Dim::Length, Some("um")),
    q("geometry", "beam_waist", Dim::Length, Some("um")),
    q("geometry", "box_depth", Dim::Length, Some("um")),
    q("geometry", "grid_h", Dim::Length, Some("um")),
    q("drive", "optical_power", Dim::Power, Some("mW")),
    q("drive", "rf_frequency", Dim::Frequency, Some("Hz")),
    q("drive", "rf_power", Dim::RfPower, Some("dBm")),
    other("drive", "rf_enabled", Kind::Bool),
    q("drive", "b_axial", Dim::MagneticField, Some("mT")),
    q("drive", "b_gradient", Dim::FieldGradient, Some("mT/um")),
    q("drive", "bias_voltage", Dim::Voltage, Some("V")),
    other("drive", "positive_electrode", Kind::Text),
    q("photophysics", "k_rad", Dim::Rate, Some("1/s")),
    q("photophysics", "k_isc0", Dim::Rate, Some("1/s")),
    q("photophysics", "k_isc1", Dim::Rate, Some("1/s")),
    q("photophysics", "k_ms", Dim::Rate, Some("1/s")),
    q("photophysics", "pump_per_intensity", Dim::RatePerIntensity, Some("1/s/(kW/cm^2)")),
    q("photophysics", "ionization_per_intensity", Dim::RatePerIntensity, Some("1/s/(kW/cm^2)")),
    q("photophysics", "back_conversion_per_intensity", Dim::RatePerIntensity, Some("1/s/(kW/cm^2)")),
    q("photophysics", "rabi_at_0dbm", Dim::Rate, Some("1/s")),
    q("photophysics", "linewidth", Dim::Frequency, Some("Hz")),
    q("photophysics", "zfs", Dim::Frequency, Some("Hz")),
    q("calibration", "reference_power", Dim::Power, Some("mW")),
    q("calibration", "target_hole_density", Dim::Density, Some("cm^-3")),
    q("solver", "depletion_threshold", Dim::Dimensionless, None),
    q("solver", "newton_tolerance", Dim::Dimensionless, None),
    other("solver", "newton_max_iterations", Kind::Integer),
    q("solver", "linear_tolerance", Dim::Dimensionless, None),
    other("solver", "linear_max_iterations", Kind::Integer),
    q("solver", "damping", Dim::Dimensionless, None),
    q("transport", "contact_area", Dim::Area, Some("um^2")),
    other("transport", "field_mode", Kind::Text),
    q("transport", "edge_weight", Dim::Dimensionless, None),
    q("transport", "series_resistance", Dim::Resistance, Some("ohm")),
    q("imaging", "nv_zero_alpha", Dim::Dimensionless, None),
];

fn lookup(section: &str, key: &str) -> Option<&'static FieldSpec> {
    FIELDS.iter().find(|f| f.section == section && f.key == key)
}

#[derive(Debug, Clone)]
struct RawEntry {
    value: toml::Value,
    line: Option<usize>,
}

type RawDoc = BTreeMap<String, BTreeMap<String, RawEntry>>;

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn parse_raw(text: &str) -> Result<RawDoc, ConfigError> {
    type Spanned = toml::Spanned<toml::Value>;
    let doc: BTreeMap<String, BTreeMap<String, Spanned>> = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| {
                let line_start = text[..s.start].rfind('\n').map(|p| p + 1).unwrap_or(0);
                (line_of(text, s.start), s.start - line_start + 1)
            })
            .unwrap_or((0, 0));
        ConfigError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    Ok(doc
        .into_iter()
        .map(|(section, entries)| {
            let entries = entries
                .into_iter()
                .map(|(key, v)| {
                    let line = Some(line_of(text, v.span().start));
                    (
                        key,
                        RawEntry {
                            value: v.into_inner(),
                            line,
                        },
                    )
                })
                .collect();
            (section, entries)
        })
        .collect())
}

/// Parses an override value the way it would appear on the right of `=` in
/// TOML; anything that is not valid TOML is taken as a string.
fn parse_override_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.trim().to_string()),
    }
}

fn apply_override(raw: &mut RawDoc, path: &str, value: &str) -> Result<(), ConfigError> {
    let (section, key) = path.split_once('.').ok_or_else(|| ConfigError::BadValue {
        field: path.to_string(),
        line: None,
        message: "override keys look like `section.key`".into(),
    })?;
    if lookup(section, key).is_none() {
        return Err(ConfigError::UnknownField {
            field: path.to_string(),
            line: None,
        });
    }
    raw.entry(section.to_string()).or_default().insert(
        key.to_string(),
        RawEntry {
            value: parse_override_value(value),
            line: None,
        },
    );
    Ok(())
}

/// Collects `(section.key, value)` overrides from environment-style pairs
/// named `FEDMR_<SECTION>__<KEY>`.
pub fn env_overrides<I>(vars: I) -> Vec<(String, String)>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(name, value)| {
            let rest = name.strip_prefix(ENV_PREFIX)?;
            let (section, key) = rest.split_once("__")?;
            Some((format!("{}.{}", section.to_lowercase(), key.to_lowercase()), value))
        })
        .collect();
    out.sort();
    out
}

/// Splits a `key=value` CLI override.
pub fn parse_set_arg(arg: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = arg.split_once('=').ok_or_else(|| ConfigError::BadValue {
        field: arg.to_string(),
        line: None,
        message: "expected key=value".into(),
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

struct Resolver {
    raw: RawDoc,
}

impl Resolver {
    fn entry(&self, section: &str, key: &str) -> Option<&RawEntry> {
        self.raw.get(section).and_then(|s| s.get(key))
    }

    fn bad(section: &str, key: &str, line: Option<usize>, message: String) -> ConfigError {
        ConfigError::BadValue {
            field: format!("{section}.{key}"),
            line,
            message,
        }
    }

    fn quantity(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let spec = lookup(section, key).expect("known field");
        let Kind::Quantity(dim, default_unit) = spec.kind else {
            unreachable!("{section}.{key} is not a quantity")
        };
        let Some(entry) = self.entry(section, key) else {
            return Ok(None);
        };
        let text = match &entry.value {
            toml::Value::Integer(i) => format!("{i}"),
            toml::Value::Float(f) => format!("{f:e}"),
            toml::Value::String(s) => s.clone(),
            other => {
                return Err(Self::bad(
                    section,
                    key,
                    entry.line,
                    format!("expected a number or a quantity string, got {}", other.type_str()),
                ))
            }
        };
        parse_quantity(&text, dim, default_unit).map(Some).map_err(|e| {
            let message = match e {
                UnitError::BadNumber(n) => format!("`{n}` is not a number"),
                UnitError::UnknownUnit(u) => format!(
                    "unit `{u}` not accepted here (accepted: {})",
                    units::accepted_symbols(dim)
                ),
            };
            Self::bad(section, key, entry.line, message)
        })
    }

    fn required(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.quantity(section, key)?.ok_or_else(|| ConfigError::BadValue {
            field: format!("{section}.{key}"),
            line: None,
            message: "missing value".into(),
        })
    }

    fn integer(&self, section: &str, key: &str) -> Result<usize, ConfigError> {
        let entry = self.entry(section, key).ok_or_else(|| Self::bad(section, key, None, "missing value".into()))?;
        match &entry.value {
            toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            toml::Value::String(s) => s
                .trim()
                .parse()
                .map_err(|_| Self::bad(section, key, entry.line, format!("`{s}` is not a non-negative integer"))),
            _ => Err(Self::bad(section, key, entry.line, "expected a non-negative integer".into())),
        }
    }

    fn boolean(&self, section: &str, key: &str) -> Result<bool, ConfigError> {
        let entry = self.entry(section, key).ok_or_else(|| Self::bad(section, key, None, "missing value".into()))?;
        match &entry.value {
            toml::Value::Boolean(b) => Ok(*b),
            toml::Value::String(s) => match s.trim() {
                "true" | "on" => Ok(true),
                "false" | "off" => Ok(false),
                _ => Err(Self::bad(section, key, entry.line, format!("`{s}` is not a boolean"))),
            },
            _ => Err(Self::bad(section, key, entry.line, "expected a boolean".into())),
        }
    }

    fn text(&self, section: &str, key: &str) -> Result<(String, Option<usize>), ConfigError> {
        let entry = self.entry(section, key).ok_or_else(|| Self::bad(section, key, None, "missing value".into()))?;
        match &entry.value {
            toml::Value::String(s) => Ok((s.clone(), entry.line)),
            _ => Err(Self::bad(section, key, entry.line, "expected a string".into())),
        }
    }
}

fn check_finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invariant(field, "finite value", v))
    }
}

fn check_known(raw: &RawDoc) -> Result<(), ConfigError> {
    for (section, entries) in raw {
        for (key, entry) in entries {
            if lookup(section, key).is_none() {
                return Err(ConfigError::UnknownField {
                    field: format!("{section}.{key}"),
                    line: entry.line,
                });
            }
        }
    }
    Ok(())
}

fn resolve(raw: RawDoc) -> Result<Config, ConfigError> {
    let r = Resolver { raw };
    let material = MaterialParams {
        eps_s: r.required("material", "eps_s")?,
        n_nitrogen: r.required("material", "n_nitrogen")?,
        n_boron: r.required("material", "n_boron")?,
        nv_fraction: r.required("material", "nv_fraction")?,
        phi1: r.required("material", "phi1")?,
        eta: r.required("material", "eta")?,
        a_star: r.required("material", "a_star")?,
        temperature: r.required("material", "temperature")?,
        c_e: r.required("material", "c_e")?,
        c_h: r.required("material", "c_h")?,
    };
    let beam_waist = r.required("geometry", "beam_waist")?;
    let slab_depth = r.quantity("geometry", "slab_depth")?.unwrap_or(2.0 * beam_waist);
    let box_depth = r.quantity("geometry", "box_depth")?.unwrap_or(slab_depth);
    let geometry = DeviceGeometry {
        electrode_width: r.required("geometry", "electrode_width")?,
        electrode_gap: r.required("geometry", "electrode_gap")?,
        slab_depth,
        beam_waist,
        box_depth,
        grid_h: r.required("geometry", "grid_h")?,
    };
    let (pos, line) = r.text("drive", "positive_electrode")?;
    let positive_electrode = pos
        .parse()
        .map_err(|m| Resolver::bad("drive", "positive_electrode", line, m))?;
    let drive = DriveConditions {
        optical_power: r.required("drive", "optical_power")?,
        rf_frequency: r.required("drive", "rf_frequency")?,
        rf_power_dbm: r.required("drive", "rf_power")?,
        rf_enabled: r.boolean("drive", "rf_enabled")?,
        b_axial: r.required("drive", "b_axial")?,
        b_gradient: r.required("drive", "b_gradient")?,
        bias_voltage: r.required("drive", "bias_voltage")?,
        positive_electrode,
    };
    let photophysics = PhotophysicsParams {
        k_rad: r.required("photophysics", "k_rad")?,
        k_isc0: r.required("photophysics", "k_isc0")?,
        k_isc1: r.required("photophysics", "k_isc1")?,
        k_ms: r.required("photophysics", "k_ms")?,
        pump_per_intensity: r.required("photophysics", "pump_per_intensity")?,
        ionization_per_intensity: r.required("photophysics", "ionization_per_intensity")?,
        back_conversion_per_intensity: r.required("photophysics", "back_conversion_per_intensity")?,
        rabi_at_0dbm: r.required("photophysics", "rabi_at_0dbm")?,
        linewidth: r.required("photophysics", "linewidth")?,
        zfs: r.required("photophysics", "zfs")?,
    };
    let calibration = CalibrationTarget {
        reference_power: r.required("calibration", "reference_power")?,
        target_hole_density: r.required("calibration", "target_hole_density")?,
    };
    let solver = SolverSettings {
        depletion_threshold: r.required("solver", "depletion_threshold")?,
        newton_tolerance: r.required("solver", "newton_tolerance")?,
        newton_max_iterations: r.integer("solver", "newton_max_iterations")?,
        linear_tolerance: r.required("solver", "linear_tolerance")?,
        linear_max_iterations: r.integer("solver", "linear_max_iterations")?,
        damping: r.required("solver", "damping")?,
    };
    let (mode, line) = r.text("transport", "field_mode")?;
    let field_mode = match mode.as_str() {
        "center" => FieldMode::Center,
        "edge_weighted" => FieldMode::EdgeWeighted,
        other => {
            return Err(Resolver::bad(
                "transport",
                "field_mode",
                line,
                format!("expected \"center\" or \"edge_weighted\", got `{other}`"),
            ))
        }
    };
    let transport = TransportSettings {
        contact_area: r.required("transport", "contact_area")?,
        field_mode,
        edge_weight: r.required("transport", "edge_weight")?,
        series_resistance: r.required("transport", "series_resistance")?,
    };
    let imaging = ImagingSettings {
        nv_zero_alpha: r.required("imaging", "nv_zero_alpha")?,
    };
    let cfg = Config {
        material,
        geometry,
        drive,
        photophysics,
        calibration,
        solver,
        transport,
        imaging,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `document`, overlays it on the defaults, then applies `overrides`
/// (`section.key`, value) in order.
pub fn load_config(document: &str, overrides: &[(String, String)]) -> Result<Config, ConfigError> {
    let mut raw = parse_raw(DEFAULTS_TOML).expect("defaults parse");
    let user = parse_raw(document)?;
    check_known(&user)?;
    for (section, entries) in user {
        let sec = raw.entry(section).or_default();
        for (k, v) in entries {
            sec.insert(k, v);
        }
    }
    for (path, value) in overrides {
        apply_override(&mut raw, path, value)?;
    }
    resolve(raw)
}

/// Reads a config file (or only defaults when `path` is `None`), applying
/// environment overrides and then explicit overrides.
pub fn load_config_file(
    path: Option<&Path>,
    overrides: &[(String, String)],
    use_env: bool,
) -> Result<Config, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })?,
        None => String::new(),
    };
    let mut all = if use_env {
        env_overrides(std::env::vars())
    } else {
        Vec::new()
    };
    all.extend_from_slice(overrides);
    load_config(&text, &all)
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.material.validate()?;
        self.geometry.validate()?;
        self.drive.validate()?;
        self.photophysics.validate()?;
        if self.calibration.reference_power <= 0.0 {
            return Err(invariant(
                "calibration.reference_power",
                "reference_power > 0",
                self.calibration.reference_power,
            ));
        }
        if self.calibration.target_hole_density < 0.0 {
            return Err(invariant(
                "calibration.target_hole_density",
                "target >= 0",
                self.calibration.target_hole_density,
            ));
        }
        let s = &self.solver;
        if !(s.depletion_threshold > 0.0 && s.depletion_threshold < 1.0) {
            return Err(invariant("solver.depletion_threshold", "0 < threshold < 1", s.depletion_threshold));
        }
        if !(s.damping > 0.0 && s.damping < 1.0) {
            return Err(invariant("solver.damping", "0 < damping < 1", s.damping));
        }
        if s.newton_tolerance <= 0.0 || s.linear_tolerance <= 0.0 {
            return Err(invariant("solver.newton_tolerance", "tolerances > 0", s.newton_tolerance));
        }
        let t = &self.transport;
        if t.contact_area <= 0.0 {
            return Err(invariant("transport.contact_area", "contact_area > 0", t.contact_area));
        }
        if !(0.0..=1.0).contains(&t.edge_weight) {
            return Err(invariant("transport.edge_weight", "0 <= edge_weight <= 1", t.edge_weight));
        }
        if t.series_resistance < 0.0 {
            return Err(invariant("transport.series_resistance", "R >= 0", t.series_resistance));
        }
        Ok(())
    }

    /// Serializes every field in SI with explicit units. Parsing the output
    /// yields bit-identical values.
    pub fn to_toml(&self) -> String {
        let m = &self.material;
        let g = &self.geometry;
        let d = &self.drive;
        let p = &self.photophysics;
        let c = &self.calibration;
        let s = &self.solver;
        let t = &self.transport;
        let mut out = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
            out.push('\n');
        };
        let qty = |v: f64, dim: Dim| match si_symbol(dim) {
            Some(sym) => format!("\"{v:e} {sym}\""),
            None => format!("\"{v:e}\""),
        };
        section(
            "material",
            vec![
                ("eps_s", qty(m.eps_s, Dim::Dimensionless)),
                ("n_nitrogen", qty(m.n_nitrogen, Dim::Density)),
                ("n_boron", qty(m.n_boron, Dim::Density)),
                ("nv_fraction", qty(m.nv_fraction, Dim::Dimensionless)),
                ("phi1", qty(m.phi1, Dim::Voltage)),
                ("eta", qty(m.eta, Dim::Dimensionless)),
                ("a_star", qty(m.a_star, Dim::Richardson)),
                ("temperature", qty(m.temperature, Dim::Temperature)),
                ("c_e", qty(m.c_e, Dim::CaptureCoefficient)),
                ("c_h", qty(m.c_h, Dim::CaptureCoefficient)),
            ],
        );
        section(
            "geometry",
            vec![
                ("electrode_width", qty(g.electrode_width, Dim::Length)),
                ("electrode_gap", qty(g.electrode_gap, Dim::Length)),
                ("slab_depth", qty(g.slab_depth, Dim::Length)),
                ("beam_waist", qty(g.beam_waist, Dim::Length)),
                ("box_depth", qty(g.box_depth, Dim::Length)),
                ("grid_h", qty(g.grid_h, Dim::Length)),
            ],
        );
        section(
            "drive",
            vec![
                ("optical_power", qty(d.optical_power, Dim::Power)),
                ("rf_frequency", qty(d.rf_frequency, Dim::Frequency)),
                ("rf_power", qty(d.rf_power_dbm, Dim::RfPower)),
                ("rf_enabled", d.rf_enabled.to_string()),
                ("b_axial", qty(d.b_axial, Dim::MagneticField)),
                ("b_gradient", qty(d.b_gradient, Dim::FieldGradient)),
                ("bias_voltage", qty(d.bias_voltage, Dim::Voltage)),
                ("positive_electrode", format!("\"{}\"", d.positive_electrode)),
            ],
        );
        section(
            "photophysics",
            vec![
                ("k_rad", qty(p.k_rad, Dim::Rate)),
                ("k_isc0", qty(p.k_isc0, Dim::Rate)),
                ("k_isc1", qty(p.k_isc1, Dim::Rate)),
                ("k_ms", qty(p.k_ms, Dim::Rate)),
                ("pump_per_intensity", qty(p.pump_per_intensity, Dim::RatePerIntensity)),
                ("ionization_per_intensity", qty(p.ionization_per_intensity, Dim::RatePerIntensity)),
                (
                    "back_conversion_per_intensity",
                    qty(p.back_conversion_per_intensity, Dim::RatePerIntensity),
                ),
                ("rabi_at_0dbm", qty(p.rabi_at_0dbm, Dim::Rate)),
                ("linewidth", qty(p.linewidth, Dim::Frequency)),
                ("zfs", qty(p.zfs, Dim::Frequency)),
            ],
        );
        section(
            "calibration",
            vec![
                ("reference_power", qty(c.reference_power, Dim::Power)),
                ("target_hole_density", qty(c.target_hole_density, Dim::Density)),
            ],
        );
        section(
            "solver",
            vec![
                ("depletion_threshold", qty(s.depletion_threshold, Dim::Dimensionless)),
                ("newton_tolerance", qty(s.newton_tolerance, Dim::Dimensionless)),
                ("newton_max_iterations", s.newton_max_iterations.to_string()),
                ("linear_tolerance", qty(s.linear_tolerance, Dim::Dimensionless)),
                ("linear_max_iterations", s.linear_max_iterations.to_string()),
                ("damping", qty(s.damping, Dim::Dimensionless)),
            ],
        );
        section(
            "transport",
            vec![
                ("contact_area", qty(t.contact_area, Dim::Area)),
                (
                    "field_mode",
                    match t.field_mode {
                        FieldMode::Center => "\"center\"".into(),
                        FieldMode::EdgeWeighted => "\"edge_weighted\"".into(),
                    },
                ),
                ("edge_weight", qty(t.edge_weight, Dim::Dimensionless)),
                ("series_resistance", qty(t.series_resistance, Dim::Resistance)),
            ],
        );
        section(
            "imaging",
            vec![("nv_zero_alpha", qty(self.imaging.nv_zero_alpha, Dim::Dimensionless))],
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(doc: &str) -> ConfigError {
        load_config(doc, &[]).unwrap_err()
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = load_config("[drive]\noptical_power = 100\n", &[]).unwrap();
        assert_eq!(cfg.drive.optical_power, 0.1);
        assert_eq!(cfg.material.eps_s, 5.7);
        assert_eq!(cfg.geometry.electrode_gap, 200e-6);
        assert_eq!(cfg.geometry.electrode_width, 50e-6);
        assert_eq!(cfg.geometry.slab_depth, 10e-6);
        assert_eq!(cfg.geometry.box_depth, 10e-6);
    }

    #[test]
    fn boron_above_nitrogen_is_rejected() {
        let e = err("[material]\nn_boron = \"2 ppm\"\n");
        assert!(matches!(e, ConfigError::Invariant { ref field, .. } if field == "material.n_nitrogen"), "{e}");
    }

    #[test]
    fn zero_temperature_is_rejected() {
        let e = err("[material]\ntemperature = 0\n");
        assert!(matches!(e, ConfigError::Invariant { ref field, .. } if field == "material.temperature"), "{e}");
    }

    #[test]
    fn parse_error_reports_line() {
        let e = err("[drive]\noptical_power = 100\nbias_voltage = = 3\n");
        match e {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_field_reports_line() {
        let e = err("[geometry]\nelectrode_gap = 200\nelectrode_gapp = 3\n");
        match e {
            ConfigError::UnknownField { field, line } => {
                assert_eq!(field, "geometry.electrode_gapp");
                assert_eq!(line, Some(3));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bad_unit_names_field() {
        let e = err("[geometry]\n\nelectrode_gap = \"200 mW\"\n");
        match e {
            ConfigError::BadValue { field, line, .. } => {
                assert_eq!(field, "geometry.electrode_gap");
                assert_eq!(line, Some(3));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn grid_must_divide_lengths() {
        let e = err("[geometry]\ngrid_h = \"3 um\"\n");
        assert!(matches!(e, ConfigError::Invariant { .. }), "{e}");
    }

    #[test]
    fn um_and_nm_give_identical_values() {
        let a = load_config("[geometry]\nelectrode_gap = \"200 um\"\n", &[]).unwrap();
        let b = load_config("[geometry]\nelectrode_gap = \"200000 nm\"\n", &[]).unwrap();
        assert_eq!(a.geometry.electrode_gap.to_bits(), b.geometry.electrode_gap.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn overrides_apply_in_order() {
        let env = env_overrides(vec![
            ("FEDMR_MATERIAL__ETA".to_string(), "1.3".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ]);
        assert_eq!(env, vec![("material.eta".to_string(), "1.3".to_string())]);
        let mut all = env.clone();
        all.push(parse_set_arg("drive.positive_electrode=B").unwrap());
        all.push(parse_set_arg("drive.optical_power=400 mW").unwrap());
        let cfg = load_config("", &all).unwrap();
        assert_eq!(cfg.material.eta, 1.3);
        assert_eq!(cfg.drive.positive_electrode, Electrode::B);
        assert_eq!(cfg.drive.optical_power, 0.4);
    }

    #[test]
    fn unknown_override_is_rejected() {
        let e = load_config("", &[("drive.nope".into(), "1".into())]).unwrap_err();
        assert!(matches!(e, ConfigError::UnknownField { .. }));
    }

    #[test]
    fn beam_waist_sets_slab_by_default() {
        let cfg = load_config("[geometry]\nbeam_waist = 10\n", &[]).unwrap();
        assert_eq!(cfg.geometry.slab_depth, 20e-6);
        assert_eq!(cfg.geometry.box_depth, 20e-6);
        let g = cfg.geometry.with_beam_waist(5e-6);
        assert_eq!(g.slab_depth, 10e-6);
        assert_eq!(g.box_depth, 10e-6);
    }

    #[test]
    fn serialized_defaults_reparse_identically() {
        let cfg = Config::default();
        let again = load_config(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_is_bit_exact(
                eps in 1.5f64..20.0,
                eta in 1.0f64..3.0,
                phi in 0.1f64..3.0,
                power in 0.0f64..2000.0,
                dbm in -30.0f64..40.0,
                b in -100.0f64..100.0,
                temp in 1.0f64..800.0,
            ) {
                let doc = format!(
                    "[material]\neps_s = {eps:e}\neta = {eta:e}\nphi1 = {phi:e}\ntemperature = {temp:e}\n\
                     [drive]\noptical_power = {power:e}\nrf_power = {dbm:e}\nb_axial = {b:e}\n"
                );
                let cfg = load_config(&doc, &[]).unwrap();
                let again = load_config(&cfg.to_toml(), &[]).unwrap();
                prop_assert_eq!(&cfg, &again);
                prop_assert_eq!(cfg.material.eps_s.to_bits(), again.material.eps_s.to_bits());
                prop_assert_eq!(cfg.drive.b_axial.to_bits(), again.drive.b_axial.to_bits());
            }
        }
    }
}
