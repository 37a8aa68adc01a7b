//! Micro-pillar compression: load/displacement series, pillar geometry and
//! the engineering stress-strain conversion.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PermId;

pub const LOAD_CSV_HEADER: &str = "time_s,displacement_nm,load_mN";
pub const GEOMETRY_CSV_HEADER: &str = "pillar_id,diameter_top_um,height_um";

const NM: f64 = 1e-9;
const MN: f64 = 1e-3;
const UM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSample {
    /// s
    pub time: f64,
    /// m
    pub displacement: f64,
    /// N
    pub load: f64,
}

/// Time-ordered indenter readings in SI units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadDisplacementSeries {
    samples: Vec<LoadSample>,
}

impl LoadDisplacementSeries {
    /// Checks that every value is finite and time strictly increases.
    pub fn new(samples: Vec<LoadSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if ![s.time, s.displacement, s.load].iter().all(|v| v.is_finite()) {
                return Err(Error::Domain(format!("sample {i} has a non-finite value")));
            }
            if i > 0 && s.time <= samples[i - 1].time {
                return Err(Error::Domain(format!(
                    "time must strictly increase (sample {i}: {} after {})",
                    s.time,
                    samples[i - 1].time
                )));
            }
        }
        Ok(LoadDisplacementSeries { samples })
    }

    pub fn samples(&self) -> &[LoadSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PillarGeometry {
    pub pillar_id: String,
    /// m
    pub diameter_top: f64,
    /// m
    pub height: f64,
}

impl PillarGeometry {
    pub fn new(pillar_id: impl Into<String>, diameter_top: f64, height: f64) -> Result<Self> {
        let g = PillarGeometry {
            pillar_id: pillar_id.into(),
            diameter_top,
            height,
        };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<()> {
        for (name, v) in [("diameter_top", self.diameter_top), ("height", self.height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!(
                    "pillar {}: {name} must be positive, got {v}",
                    self.pillar_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strain: f64,
    /// Pa
    pub stress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressStrainCurve {
    pub points: Vec<CurvePoint>,
    pub geometry: PillarGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_dataset: Option<PermId>,
}

/// Engineering stress over the top cross-section and strain over the initial
/// height, point by point.
pub fn stress_strain(series: &LoadDisplacementSeries, geometry: &PillarGeometry) -> Result<StressStrainCurve> {
    geometry.check()?;
    if series.is_empty() {
        return Err(Error::Empty("load-displacement series has no samples".into()));
    }
    let area = PI * geometry.diameter_top * geometry.diameter_top / 4.0;
    let points = series
        .samples()
        .iter()
        .map(|s| CurvePoint {
            strain: s.displacement / geometry.height,
            stress: s.load / area,
        })
        .collect();
    Ok(StressStrainCurve {
        points,
        geometry: geometry.clone(),
        source_dataset: None,
    })
}

fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes)
}

fn check_header(rec: Option<csv::Result<csv::StringRecord>>, expected: &str) -> Result<()> {
    let got = match rec {
        Some(Ok(r)) => r.iter().collect::<Vec<_>>().join(","),
        Some(Err(e)) => return Err(Error::Header(format!("unreadable header: {e}"))),
        None => String::new(),
    };
    let got = got.trim_start_matches('\u{feff}');
    if got != expected {
        return Err(Error::Header(format!("expected header `{expected}`, found `{got}`")));
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn parse_num(rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let field = rec.get(idx).unwrap_or("");
    field
        .parse::<f64>()
        .map_err(|_| Error::syntax(line_of(rec), format!("{name}: `{field}` is not a number")))
}

fn records(bytes: &[u8], header: &str) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv_reader(bytes);
    let mut iter = reader.records();
    check_header(iter.next(), header)?;
    let width = header.split(',').count();
    let mut out = Vec::new();
    for rec in iter {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            match e.kind() {
                csv::ErrorKind::Utf8 { .. } => Error::Encoding(format!("line {line}: {e}")),
                _ => Error::syntax(line, e.to_string()),
            }
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != width {
            return Err(Error::syntax(
                line_of(&rec),
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Parses the load CSV, converting nm to m and mN to N.
pub fn parse_load_csv(bytes: &[u8]) -> Result<LoadDisplacementSeries> {
    let mut samples = Vec::new();
    for rec in records(bytes, LOAD_CSV_HEADER)? {
        samples.push(LoadSample {
            time: parse_num(&rec, 0, "time_s")?,
            displacement: parse_num(&rec, 1, "displacement_nm")? * NM,
            load: parse_num(&rec, 2, "load_mN")? * MN,
        });
    }
    LoadDisplacementSeries::new(samples)
}

/// Parses the geometry CSV, converting µm to m. Pillar ids must be unique.
pub fn parse_geometry_csv(bytes: &[u8]) -> Result<Vec<PillarGeometry>> {
    let mut out: Vec<PillarGeometry> = Vec::new();
    for rec in records(bytes, GEOMETRY_CSV_HEADER)? {
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::syntax(line_of(&rec), "empty pillar_id"));
        }
        if out.iter().any(|g| g.pillar_id == id) {
            return Err(Error::Domain(format!("pillar `{id}` listed twice")));
        }
        let d = parse_num(&rec, 1, "diameter_top_um")? * UM;
        let h = parse_num(&rec, 2, "height_um")? * UM;
        out.push(PillarGeometry::new(id, d, h)?);
    }
    Ok(out)
}

/// Geometry CSV with values in µm.
pub fn write_geometry_csv(rows: &[(&str, f64, f64)]) -> String {
    let mut out = format!("{GEOMETRY_CSV_HEADER}\n");
    for (id, d_um, h_um) in rows {
        let _ = writeln!(out, "{id},{d_um},{h_um}");
    }
    out
}

/// Load CSV from `(time_s, displacement_nm, load_mN)` rows.
pub fn write_load_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = format!("{LOAD_CSV_HEADER}\n");
    for (t, u, f) in rows {
        let _ = writeln!(out, "{t},{u},{f}");
    }
    out
}

/// A synthetic compression test: linear loading up to `yield_mN`, then a
/// shallow hardening slope, sampled at 10 Hz.
pub fn demo_load_rows(n: usize, stiffness_mn_per_nm: f64, yield_mn: f64) -> Vec<(f64, f64, f64)> {
    (0..n)
        .map(|i| {
            let u = i as f64 * 5.0;
            let elastic = stiffness_mn_per_nm * u;
            let f = if elastic <= yield_mn {
                elastic
            } else {
                yield_mn + 0.02 * (elastic - yield_mn)
            };
            (i as f64 * 0.1, u, f)
        })
        .collect()
}

/// CSV of a curve, strain and stress in Pa.
pub fn curve_csv(curve: &StressStrainCurve) -> String {
    let mut out = String::from("strain,stress_Pa\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{}", p.strain, p.stress);
    }
    out
}
