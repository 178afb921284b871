//! Physical quantities at the file boundary: either a bare number in SI
//! units or a string such as `"800 psi"` or `"36 in"`.

use std::fmt;

use gasjitter_core::units::{BAR, FOOT, INCH, KILOMETRE, MILE, PSI};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Pressure,
    Length,
    MassFlow,
    Time,
    Speed,
}

impl Dimension {
    fn si_unit(self) -> &'static str {
        match self {
            Dimension::Pressure => "Pa",
            Dimension::Length => "m",
            Dimension::MassFlow => "kg/s",
            Dimension::Time => "s",
            Dimension::Speed => "m/s",
        }
    }

    fn factor(self, unit: &str) -> Option<f64> {
        let f = match (self, unit) {
            (Dimension::Pressure, "Pa") => 1.0,
            (Dimension::Pressure, "kPa") => 1.0e3,
            (Dimension::Pressure, "MPa") => 1.0e6,
            (Dimension::Pressure, "bar") => BAR,
            (Dimension::Pressure, "psi") => PSI,
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "km") => KILOMETRE,
            (Dimension::Length, "mi") => MILE,
            (Dimension::Length, "ft") => FOOT,
            (Dimension::Length, "in") => INCH,
            (Dimension::Length, "cm") => 0.01,
            (Dimension::Length, "mm") => 0.001,
            (Dimension::MassFlow, "kg/s") => 1.0,
            (Dimension::MassFlow, "kg/h") => 1.0 / 3600.0,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "min") => 60.0,
            (Dimension::Time, "h") => 3600.0,
            (Dimension::Time, "d") => 86_400.0,
            (Dimension::Speed, "m/s") => 1.0,
            (Dimension::Speed, "ft/s") => FOOT,
            _ => return None,
        };
        Some(f)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Pressure => "pressure",
            Dimension::Length => "length",
            Dimension::MassFlow => "mass flow",
            Dimension::Time => "time",
            Dimension::Speed => "speed",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Quantity {
    Si(f64),
    Text(String),
}

impl Quantity {
    pub fn to_si(&self, dim: Dimension) -> Result<f64, String> {
        match self {
            Quantity::Si(v) => Ok(*v),
            Quantity::Text(s) => parse(s, dim),
        }
    }
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Si(v)
    }
}

/// `"<number> <unit>"`; a bare number is taken as SI.
pub fn parse(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| c.is_ascii_alphabetic() && !is_exponent(text, i))
        .map_or(text.len(), |(i, _)| i);
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{text}` is not a number followed by a {dim} unit"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    let factor = dim
        .factor(unit)
        .ok_or_else(|| format!("unknown {dim} unit `{unit}` (SI is {})", dim.si_unit()))?;
    Ok(value * factor)
}

// `e` / `E` inside a float literal such as `1.5e6`.
fn is_exponent(text: &str, i: usize) -> bool {
    let b = text.as_bytes();
    matches!(b[i], b'e' | b'E')
        && i > 0
        && b[i - 1].is_ascii_digit()
        && b.get(i + 1)
            .is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_units() {
        assert!(
            (parse("800 psi", Dimension::Pressure).unwrap() - 5.515_805_834_534_689e6).abs() < 1e-3
        );
        assert_eq!(parse("62 mi", Dimension::Length).unwrap(), 62.0 * MILE);
        assert_eq!(parse("36 in", Dimension::Length).unwrap(), 36.0 * INCH);
        assert_eq!(parse("15 min", Dimension::Time).unwrap(), 900.0);
        assert_eq!(parse("1.5e6 Pa", Dimension::Pressure).unwrap(), 1.5e6);
        assert_eq!(parse("2e3", Dimension::Length).unwrap(), 2000.0);
        assert_eq!(parse("-20 kg/s", Dimension::MassFlow).unwrap(), -20.0);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let err = parse("10 psi", Dimension::Length).unwrap_err();
        assert!(err.contains("unknown length unit `psi`"), "{err}");
        assert!(parse("psi", Dimension::Pressure).is_err());
    }
}
