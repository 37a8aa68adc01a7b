use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bunge (Z-X-Z) Euler angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerOrientation {
    pub phi1: f64,
    #[serde(rename = "Phi")]
    pub big_phi: f64,
    pub phi2: f64,
}

impl EulerOrientation {
    pub fn new(phi1: f64, big_phi: f64, phi2: f64) -> Self {
        EulerOrientation { phi1, big_phi, phi2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbsdCell {
    pub orientation: EulerOrientation,
    pub quality: f64,
    pub phase_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbsdMap {
    pub n_cols: u32,
    pub n_rows: u32,
    /// Grid spacing in metres.
    pub step: f64,
    /// Row-major.
    pub cells: Vec<EbsdCell>,
}

impl EbsdMap {
    pub fn cell(&self, row: u32, col: u32) -> &EbsdCell {
        &self.cells[(row * self.n_cols + col) as usize]
    }
}

fn header_value<'a>(rest: &'a str, key: &str) -> Option<&'a str> {
    let tail = rest.strip_prefix(key)?;
    if !tail.is_empty() && !tail.starts_with([' ', '\t', ':', '=']) {
        return None;
    }
    Some(tail.trim_start_matches([' ', '\t', ':', '=']).trim())
}

/// Parses the open `.ang`-style text format: `#` header lines (`NCOLS`,
/// `NROWS`, `STEP` required) followed by `phi1 Phi phi2 x y quality phase`
/// rows.
pub fn parse_ang(text: &str) -> Result<EbsdMap> {
    let mut n_cols: Option<u32> = None;
    let mut n_rows: Option<u32> = None;
    let mut step: Option<f64> = None;
    let mut cells = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            let bad = |key: &str, v: &str| Error::syntax(lineno, format!("bad {key} value `{v}`"));
            if let Some(v) = header_value(rest, "NCOLS") {
                n_cols = Some(v.parse().map_err(|_| bad("NCOLS", v))?);
            } else if let Some(v) = header_value(rest, "NROWS") {
                n_rows = Some(v.parse().map_err(|_| bad("NROWS", v))?);
            } else if let Some(v) = header_value(rest, "STEP") {
                let s: f64 = v.parse().map_err(|_| bad("STEP", v))?;
                if !(s.is_finite() && s > 0.0) {
                    return Err(bad("STEP", v));
                }
                step = Some(s);
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::syntax(
                lineno,
                format!("expected 7 columns, found {}", fields.len()),
            ));
        }
        let mut nums = [0.0f64; 7];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::syntax(lineno, format!("`{f}` is not a number")))?;
        }
        let [phi1, big_phi, phi2, _x, _y, quality, phase] = nums;
        if quality < 0.0 {
            return Err(Error::syntax(lineno, "quality must be >= 0"));
        }
        if phase < 0.0 || phase.fract() != 0.0 || phase > u32::MAX as f64 {
            return Err(Error::syntax(lineno, format!("`{}` is not a phase id", fields[6])));
        }
        cells.push(EbsdCell {
            orientation: EulerOrientation::new(phi1, big_phi, phi2),
            quality,
            phase_id: phase as u32,
        });
    }
    let n_cols = n_cols.ok_or_else(|| Error::Header("NCOLS".into()))?;
    let n_rows = n_rows.ok_or_else(|| Error::Header("NROWS".into()))?;
    let step = step.ok_or_else(|| Error::Header("STEP".into()))?;
    let expected = n_cols as usize * n_rows as usize;
    if cells.len() != expected {
        return Err(Error::Shape(format!(
            "header declares {n_cols}x{n_rows} = {expected} cells, found {}",
            cells.len()
        )));
    }
    Ok(EbsdMap {
        n_cols,
        n_rows,
        step,
        cells,
    })
}

/// Serializes a map in the format read by [`parse_ang`].
pub fn write_ang(map: &EbsdMap) -> String {
    let mut out = format!(
        "# NCOLS {}\n# NROWS {}\n# STEP {}\n# phi1 Phi phi2 x y quality phase\n",
        map.n_cols, map.n_rows, map.step
    );
    for (i, c) in map.cells.iter().enumerate() {
        let (row, col) = (i as u32 / map.n_cols.max(1), i as u32 % map.n_cols.max(1));
        let o = c.orientation;
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            o.phi1,
            o.big_phi,
            o.phi2,
            col as f64 * map.step,
            row as f64 * map.step,
            c.quality,
            c.phase_id
        ));
    }
    out
}

/// A deterministic grain-like map for demos and tests.
pub fn demo_ebsd_map(n_cols: u32, n_rows: u32) -> EbsdMap {
    let grains = [
        EulerOrientation::new(0.0, 0.0, 0.0),
        EulerOrientation::new(0.0, std::f64::consts::FRAC_PI_4, 0.0),
        EulerOrientation::new(0.0, (1.0f64 / 3.0f64.sqrt()).acos(), std::f64::consts::FRAC_PI_4),
        EulerOrientation::new(0.7, 0.4, 0.2),
        EulerOrientation::new(2.1, 0.9, 0.35),
    ];
    let mut cells = Vec::with_capacity((n_cols * n_rows) as usize);
    for r in 0..n_rows {
        for c in 0..n_cols {
            let g = ((r * 5 / n_rows.max(1)) + (c * 3 / n_cols.max(1))) as usize % grains.len();
            let boundary = c > 0 && (c * 3) % n_cols.max(1) < 3;
            cells.push(EbsdCell {
                orientation: grains[g],
                quality: if boundary { 0.0 } else { 0.9 },
                phase_id: 1,
            });
        }
    }
    EbsdMap {
        n_cols,
        n_rows,
        step: 1e-7,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "# NCOLS: 2\n# NROWS: 2\n# STEP: 1e-7\n";

    #[test]
    fn two_by_two() {
        let text = format!("{HEADER}0 0 0 0 0 1 1\n0.1 0.2 0.3 1 0 1 1\n0 0 0 0 1 0 1\n0 0 0 1 1 0.5 2\n");
        let map = parse_ang(&text).unwrap();
        assert_eq!(map.cells.len(), 4);
        assert_eq!(map.cell(0, 1).orientation, EulerOrientation::new(0.1, 0.2, 0.3));
        assert_eq!(map.cell(1, 1).phase_id, 2);
        assert_eq!(map.step, 1e-7);
    }

    #[test]
    fn three_rows_is_shape_error() {
        let text = format!("{HEADER}0 0 0 0 0 1 1\n0 0 0 0 0 1 1\n0 0 0 0 0 1 1\n");
        assert_eq!(parse_ang(&text).unwrap_err().code().as_str(), "SHAPE");
    }

    #[test]
    fn empty_is_header_error() {
        assert_eq!(parse_ang("").unwrap_err().code().as_str(), "HEADER");
        let err = parse_ang("# NCOLS 1\n# NROWS 1\n0 0 0 0 0 1 1\n").unwrap_err();
        assert!(matches!(err, Error::Header(ref k) if k == "STEP"));
    }

    #[test]
    fn non_numeric_reports_line() {
        let text = format!("{HEADER}0 0 0 0 0 1 1\n0 zero 0 0 0 1 1\n");
        let err = parse_ang(&text).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 5, .. }), "{err}");
    }

    #[test]
    fn write_then_parse() {
        let map = demo_ebsd_map(12, 7);
        assert_eq!(parse_ang(&write_ang(&map)).unwrap(), map);
    }
}
