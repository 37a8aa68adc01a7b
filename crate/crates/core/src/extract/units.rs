//! Unit suffixes found in human-readable vendor headers and their factors to
//! SI base units.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Voltage,
    Time,
    Length,
    Angle,
    Current,
    Pressure,
    Dimensionless,
    Count,
}

const DEG: f64 = PI / 180.0;

/// Quantity and multiplicative factor to SI base for a unit suffix.
pub fn unit_factor(unit: &str) -> Option<(Quantity, f64)> {
    use Quantity::*;
    let out = match unit {
        "kV" => (Voltage, 1e3),
        "V" => (Voltage, 1.0),
        "s" => (Time, 1.0),
        "ms" => (Time, 1e-3),
        "µs" | "μs" | "us" => (Time, 1e-6),
        "ns" => (Time, 1e-9),
        "m" => (Length, 1.0),
        "mm" => (Length, 1e-3),
        "µm" | "μm" | "um" => (Length, 1e-6),
        "nm" => (Length, 1e-9),
        "rad" => (Angle, 1.0),
        "deg" | "°" => (Angle, DEG),
        "A" => (Current, 1.0),
        "mA" => (Current, 1e-3),
        "µA" | "μA" | "uA" => (Current, 1e-6),
        "nA" => (Current, 1e-9),
        "pA" => (Current, 1e-12),
        "Pa" => (Pressure, 1.0),
        "mbar" => (Pressure, 1e2),
        "x" | "X" => (Dimensionless, 1.0),
        _ => return None,
    };
    Some(out)
}

/// `value × factor(unit)`, or `None` for an unknown unit.
pub fn normalize(value: f64, unit: &str) -> Option<f64> {
    unit_factor(unit).map(|(_, f)| value * f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn listed_prefixes() {
        assert_eq!(normalize(20.0, "kV"), Some(20000.0));
        assert_eq!(normalize(2.0, "mbar"), Some(200.0));
        assert_eq!(normalize(180.0, "deg"), Some(PI));
        assert_eq!(normalize(1.0, "furlong"), None);
        assert_eq!(unit_factor("nm"), Some((Quantity::Length, 1e-9)));
        assert_eq!(unit_factor("ns"), Some((Quantity::Time, 1e-9)));
    }

    proptest! {
        #[test]
        fn normalization_is_multiplicative(v in -1e12f64..1e12) {
            let table: [(&str, f64); 12] = [
                ("kV", 1e3), ("µs", 1e-6), ("mm", 1e-3), ("µm", 1e-6), ("nm", 1e-9),
                ("ns", 1e-9), ("mbar", 1e2), ("nA", 1e-9), ("pA", 1e-12),
                ("deg", std::f64::consts::PI / 180.0), ("V", 1.0), ("Pa", 1.0),
            ];
            for (unit, factor) in table {
                prop_assert_eq!(normalize(v, unit), Some(v * factor));
            }
        }
    }
}
