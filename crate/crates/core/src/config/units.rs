//! Unit parsing for configuration quantities.
//!
//! Units that differ from SI by a power of ten are converted by shifting the
//! decimal exponent of the literal and parsing once, so `"200 um"` and
//! `"200000 nm"` produce the same `f64` bit pattern.

use crate::constants::DIAMOND_ATOM_DENSITY;

/// Physical dimension of a configuration field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Dimensionless,
    Length,
    Area,
    Density,
    CaptureCoefficient,
    Richardson,
    Temperature,
    Voltage,
    Power,
    Frequency,
    RfPower,
    MagneticField,
    FieldGradient,
    Rate,
    RatePerIntensity,
    Resistance,
}

struct UnitDef {
    symbols: &'static [&'static str],
    pow10: i32,
    factor: f64,
}

const fn u(symbols: &'static [&'static str], pow10: i32) -> UnitDef {
    UnitDef {
        symbols,
        pow10,
        factor: 1.0,
    }
}

const LENGTH: &[UnitDef] = &[
    u(&["m"], 0),
    u(&["cm"], -2),
    u(&["mm"], -3),
    u(&["um", "µm", "μm"], -6),
    u(&["nm"], -9),
];
const AREA: &[UnitDef] = &[
    u(&["m^2"], 0),
    u(&["cm^2"], -4),
    u(&["mm^2"], -6),
    u(&["um^2", "µm^2", "μm^2"], -12),
];
const DENSITY: &[UnitDef] = &[
    u(&["m^-3", "1/m^3"], 0),
    u(&["cm^-3", "1/cm^3"], 6),
    UnitDef {
        symbols: &["ppm"],
        pow10: -6,
        factor: DIAMOND_ATOM_DENSITY,
    },
    UnitDef {
        symbols: &["ppb"],
        pow10: -9,
        factor: DIAMOND_ATOM_DENSITY,
    },
];
const CAPTURE: &[UnitDef] = &[u(&["m^3/s"], 0), u(&["cm^3/s"], -6)];
const RICHARDSON: &[UnitDef] = &[
    u(&["A/m^2/K^2", "A m^-2 K^-2"], 0),
    u(&["A/cm^2/K^2", "A cm^-2 K^-2"], 4),
];
const TEMPERATURE: &[UnitDef] = &[u(&["K"], 0)];
const VOLTAGE: &[UnitDef] = &[u(&["V"], 0), u(&["mV"], -3), u(&["kV"], 3)];
const POWER: &[UnitDef] = &[u(&["W"], 0), u(&["mW"], -3), u(&["uW", "µW"], -6)];
const FREQUENCY: &[UnitDef] = &[
    u(&["Hz"], 0),
    u(&["kHz"], 3),
    u(&["MHz"], 6),
    u(&["GHz"], 9),
];
const RF_POWER: &[UnitDef] = &[u(&["dBm"], 0)];
const MAGNETIC: &[UnitDef] = &[u(&["T"], 0), u(&["mT"], -3), u(&["G"], -4)];
const GRADIENT: &[UnitDef] = &[
    u(&["T/m"], 0),
    u(&["mT/mm"], 0),
    u(&["mT/um", "mT/µm"], 3),
    u(&["G/cm"], -2),
];
const RATE: &[UnitDef] = &[u(&["1/s", "s^-1", "Hz"], 0)];
const RATE_PER_INTENSITY: &[UnitDef] = &[
    u(&["1/s/(W/m^2)", "s^-1/(W/m^2)"], 0),
    u(&["1/s/(kW/cm^2)", "s^-1/(kW/cm^2)"], -7),
];
const RESISTANCE: &[UnitDef] = &[u(&["ohm", "Ohm"], 0), u(&["kohm"], 3), u(&["Mohm"], 6)];

fn table(dim: Dim) -> &'static [UnitDef] {
    match dim {
        Dim::Dimensionless => &[],
        Dim::Length => LENGTH,
        Dim::Area => AREA,
        Dim::Density => DENSITY,
        Dim::CaptureCoefficient => CAPTURE,
        Dim::Richardson => RICHARDSON,
        Dim::Temperature => TEMPERATURE,
        Dim::Voltage => VOLTAGE,
        Dim::Power => POWER,
        Dim::Frequency => FREQUENCY,
        Dim::RfPower => RF_POWER,
        Dim::MagneticField => MAGNETIC,
        Dim::FieldGradient => GRADIENT,
        Dim::Rate => RATE,
        Dim::RatePerIntensity => RATE_PER_INTENSITY,
        Dim::Resistance => RESISTANCE,
    }
}

/// Symbol of the SI (internal) unit, used when serializing.
pub fn si_symbol(dim: Dim) -> Option<&'static str> {
    table(dim).first().map(|d| d.symbols[0])
}

/// Symbols accepted for a dimension, for error messages.
pub fn accepted_symbols(dim: Dim) -> String {
    let syms: Vec<&str> = table(dim).iter().flat_map(|d| d.symbols.iter().copied()).collect();
    if syms.is_empty() {
        "no unit".to_string()
    } else {
        syms.join(", ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitError {
    BadNumber(String),
    UnknownUnit(String),
}

/// Splits a decimal literal into mantissa text and exponent.
fn split_literal(text: &str) -> Result<(&str, i32), UnitError> {
    let text = text.trim();
    let (mant, exp) = match text.find(['e', 'E']) {
        Some(pos) => {
            let exp = text[pos + 1..]
                .parse::<i32>()
                .map_err(|_| UnitError::BadNumber(text.to_string()))?;
            (&text[..pos], exp)
        }
        None => (text, 0),
    };
    if mant.is_empty() || mant.parse::<f64>().is_err() {
        return Err(UnitError::BadNumber(text.to_string()));
    }
    Ok((mant, exp))
}

fn scaled(literal: &str, pow10: i32) -> Result<f64, UnitError> {
    let (mant, exp) = split_literal(literal)?;
    let v: f64 = format!("{mant}e{}", exp + pow10)
        .parse()
        .map_err(|_| UnitError::BadNumber(literal.to_string()))?;
    if !v.is_finite() {
        return Err(UnitError::BadNumber(literal.to_string()));
    }
    Ok(v)
}

/// Converts `literal` expressed in `unit` (or the default unit when `unit`
/// is `None`) into SI.
pub fn to_si(literal: &str, unit: Option<&str>, dim: Dim, default_unit: Option<&str>) -> Result<f64, UnitError> {
    let unit = unit.or(default_unit);
    match (dim, unit) {
        (Dim::Dimensionless, None) | (Dim::Dimensionless, Some("")) => scaled(literal, 0),
        (Dim::Dimensionless, Some(u)) => Err(UnitError::UnknownUnit(u.to_string())),
        (_, None) => scaled(literal, 0),
        (_, Some(sym)) => {
            let def = table(dim)
                .iter()
                .find(|d| d.symbols.contains(&sym))
                .ok_or_else(|| UnitError::UnknownUnit(sym.to_string()))?;
            let v = scaled(literal, def.pow10)?;
            Ok(if def.factor == 1.0 { v } else { v * def.factor })
        }
    }
}

/// Parses `"<number> <unit>"` text. A bare number carries no unit.
pub fn parse_quantity(text: &str, dim: Dim, default_unit: Option<&str>) -> Result<f64, UnitError> {
    let text = text.trim();
    match text.split_once(char::is_whitespace) {
        Some((num, unit)) => to_si(num, Some(unit.trim()), dim, default_unit),
        None => to_si(text, None, dim, default_unit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn micrometres_and_nanometres_agree_bitwise() {
        let a = parse_quantity("200 um", Dim::Length, None).unwrap();
        let b = parse_quantity("200000 nm", Dim::Length, None).unwrap();
        let c = parse_quantity("0.2 mm", Dim::Length, None).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), c.to_bits());
        assert_eq!(a, 2e-4);
    }

    #[test]
    fn default_unit_applies_to_bare_numbers() {
        let v = parse_quantity("100", Dim::Power, Some("mW")).unwrap();
        assert_eq!(v, 0.1);
    }

    #[test]
    fn exponent_literals() {
        let v = parse_quantity("3.5e14 cm^-3", Dim::Density, None).unwrap();
        assert_eq!(v, 3.5e20);
        let v = parse_quantity("1e-6 cm^3/s", Dim::CaptureCoefficient, None).unwrap();
        assert_eq!(v, 1e-12);
    }

    #[test]
    fn ppm_uses_atomic_density() {
        let v = parse_quantity("1 ppm", Dim::Density, None).unwrap();
        assert!((v - 1.763e23).abs() / 1.763e23 < 1e-15);
    }

    #[test]
    fn rejects_wrong_units() {
        assert!(matches!(
            parse_quantity("5 mW", Dim::Length, None),
            Err(UnitError::UnknownUnit(_))
        ));
        assert!(matches!(
            parse_quantity("abc um", Dim::Length, None),
            Err(UnitError::BadNumber(_))
        ));
    }
}
