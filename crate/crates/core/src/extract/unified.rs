use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::units::{unit_factor, Quantity};
use super::vendor_a::{IHDR_HEIGHT_KEY, IHDR_WIDTH_KEY};
use super::{RawEntry, RawKeyValues, RawValue, VendorFormat};
use crate::error::{Error, Result};

/// Reference display width for computed magnification (a 5 inch print).
pub const REFERENCE_WIDTH_M: f64 = 0.127;

/// One row of the vendor mapping table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    AccelerationVoltage,
    DwellTime,
    StageX,
    StageY,
    StageZ,
    StageRotation,
    WorkingDistance,
    PixelSize,
    EmissionCurrent,
    BeamCurrent,
    FrameTime,
    LineTime,
    Magnification,
    ChamberPressure,
    SystemVacuum,
    GunVacuum,
    DatabarRows,
}

impl Field {
    pub const ALL: [Field; 17] = [
        Field::AccelerationVoltage,
        Field::DwellTime,
        Field::StageX,
        Field::StageY,
        Field::StageZ,
        Field::StageRotation,
        Field::WorkingDistance,
        Field::PixelSize,
        Field::EmissionCurrent,
        Field::BeamCurrent,
        Field::FrameTime,
        Field::LineTime,
        Field::Magnification,
        Field::ChamberPressure,
        Field::SystemVacuum,
        Field::GunVacuum,
        Field::DatabarRows,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::AccelerationVoltage => "acceleration_voltage",
            Field::DwellTime => "dwell_time",
            Field::StageX => "stage_x",
            Field::StageY => "stage_y",
            Field::StageZ => "stage_z",
            Field::StageRotation => "stage_rotation",
            Field::WorkingDistance => "working_distance",
            Field::PixelSize => "pixel_size",
            Field::EmissionCurrent => "emission_current",
            Field::BeamCurrent => "beam_current",
            Field::FrameTime => "frame_time",
            Field::LineTime => "line_time",
            Field::Magnification => "magnification",
            Field::ChamberPressure => "chamber_pressure",
            Field::SystemVacuum => "system_vacuum",
            Field::GunVacuum => "gun_vacuum",
            Field::DatabarRows => "databar_rows",
        }
    }

    pub fn quantity(self) -> Quantity {
        match self {
            Field::AccelerationVoltage => Quantity::Voltage,
            Field::DwellTime | Field::FrameTime | Field::LineTime => Quantity::Time,
            Field::StageX
            | Field::StageY
            | Field::StageZ
            | Field::WorkingDistance
            | Field::PixelSize => Quantity::Length,
            Field::StageRotation => Quantity::Angle,
            Field::EmissionCurrent | Field::BeamCurrent => Quantity::Current,
            Field::Magnification => Quantity::Dimensionless,
            Field::ChamberPressure | Field::SystemVacuum | Field::GunVacuum => Quantity::Pressure,
            Field::DatabarRows => Quantity::Count,
        }
    }

    /// SI unit label for display.
    pub fn unit(self) -> &'static str {
        match self.quantity() {
            Quantity::Voltage => "V",
            Quantity::Time => "s",
            Quantity::Length => "m",
            Quantity::Angle => "rad",
            Quantity::Current => "A",
            Quantity::Pressure => "Pa",
            Quantity::Dimensionless => "",
            Quantity::Count => "px",
        }
    }

    /// Stage coordinates and rotation may be negative.
    pub fn may_be_negative(self) -> bool {
        matches!(
            self,
            Field::StageX | Field::StageY | Field::StageZ | Field::StageRotation
        )
    }

    pub fn row(self) -> &'static TableRow {
        &SEM_FIELD_TABLE[self as usize]
    }
}

/// What a vendor provides for one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Key(&'static str),
    /// Marked "x": the vendor does not record it.
    Absent,
    /// Marked "*": derived from other recorded values.
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableRow {
    pub label: &'static str,
    pub field: Field,
    /// Vendor A, B, C.
    pub cells: [Cell; 3],
    pub iri: Option<&'static str>,
}

#[cfg(test)]
const EMG: &str = "https://purls.helmholtz-metadaten.de/emg/";
#[cfg(test)]
const PMD: &str = "https://w3id.org/pmd/mo/";

macro_rules! row {
    ($label:expr, $field:ident, [$a:expr, $b:expr, $c:expr], $iri:expr) => {
        TableRow {
            label: $label,
            field: Field::$field,
            cells: [$a, $b, $c],
            iri: $iri,
        }
    };
}

use Cell::{Absent as X, Computed as STAR, Key as K};

pub static SEM_FIELD_TABLE: [TableRow; 17] = [
    row!("Acceleration Voltage", AccelerationVoltage, [K("EHT"), K("HV"), K("Beam.HV")],
        Some("https://purls.helmholtz-metadaten.de/emg/EMG_00000004")),
    row!("Dwell Time", DwellTime, [K("Dwell Time"), K("DwellTime"), K("Scan.Dwelltime")],
        Some("https://purls.helmholtz-metadaten.de/emg/EMG_00000015")),
    row!("Stage X", StageX, [K("Stage at X"), K("StageX"), K("Stage.StageX")], None),
    row!("Stage Y", StageY, [K("Stage at Y"), K("StageY"), K("Stage.StageY")], None),
    row!("Stage Z", StageZ, [K("Stage at Z"), K("StageZ"), K("Stage.StageZ")], None),
    row!("Stage Rotation", StageRotation, [K("Stage at R"), K("StageRotation"), K("Stage.StageR")], None),
    row!("Working Distance", WorkingDistance, [K("WD"), K("WD"), K("Stage.WorkingDistance")],
        Some("https://purls.helmholtz-metadaten.de/emg/EMG_00000050")),
    row!("Pixel Size", PixelSize, [K("Pixel Size"), K("PixelSizeX"), K("Scan.PixelWidth")],
        Some("https://w3id.org/pmd/mo/PixelSize")),
    row!("Emission Current", EmissionCurrent, [X, K("EmissionCurrent"), K("EBeam.EmissionCurrent")],
        Some("https://purls.helmholtz-metadaten.de/emg/EMG_00000025")),
    row!("Beam Current", BeamCurrent, [K("Beam Current"), K("PredictedBeamCurrent"), K("BeamCurrent")],
        Some("https://purls.helmholtz-metadaten.de/emg/EMG_00000006")),
    row!("Frame Time", FrameTime, [K("Cycle Time"), X, X],
        Some("https://w3id.org/pmd/mo/FrameTime")),
    row!("Frame Time", LineTime, [K("Line Time"), X, K("EScan.LineTime")], None),
    row!("Magnification", Magnification, [K("Mag"), K("Magnification"), STAR],
        Some("https://w3id.org/pmd/mo/ActualMagnification")),
    row!("Chamber Pressure", ChamberPressure, [K("Chamber"), K("ChamberPressure"), K("Vacuum.ChPressure")],
        Some("https://w3id.org/pmd/mo/ChamberVacuum")),
    row!("System Vacuum", SystemVacuum, [K("System Vacuum"), X, X],
        Some("https://w3id.org/pmd/mo/SystemVacuum")),
    row!("Gun Vacuum", GunVacuum, [K("Gun Vacuum"), X, X],
        Some("https://w3id.org/pmd/mo/GunVacuum")),
    row!("Databar Size", DatabarRows, [STAR, K("ImageStripSize"), STAR], None),
];

/// Raw keys carrying the full stored image size, per vendor.
pub(crate) fn dimension_keys(vendor: VendorFormat) -> Option<(&'static str, &'static str)> {
    match vendor {
        VendorFormat::VendorA => Some((IHDR_WIDTH_KEY, IHDR_HEIGHT_KEY)),
        VendorFormat::VendorB => Some(("ResolutionX", "ResolutionY")),
        VendorFormat::VendorC => Some(("Image.ResolutionX", "Image.ResolutionY")),
        VendorFormat::Unknown => None,
    }
}

/// Raw key carrying the scan size (`W * H` text for A, line count for C).
pub(crate) const VENDOR_A_SCAN_KEY: &str = "Store resolution";
pub(crate) const VENDOR_C_SCAN_KEY: &str = "Scan.Lines";

/// Acquisition fields harmonized across vendors, in SI base units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UnifiedSemMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceleration_voltage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_rotation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub working_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emission_current: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_current: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnification: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chamber_pressure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_vacuum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gun_vacuum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub databar_rows: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_width_px: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_height_px: Option<u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ontology_iri: BTreeMap<String, String>,
}

impl UnifiedSemMetadata {
    fn slot(&mut self, field: Field) -> Option<&mut Option<f64>> {
        Some(match field {
            Field::AccelerationVoltage => &mut self.acceleration_voltage,
            Field::DwellTime => &mut self.dwell_time,
            Field::StageX => &mut self.stage_x,
            Field::StageY => &mut self.stage_y,
            Field::StageZ => &mut self.stage_z,
            Field::StageRotation => &mut self.stage_rotation,
            Field::WorkingDistance => &mut self.working_distance,
            Field::PixelSize => &mut self.pixel_size,
            Field::EmissionCurrent => &mut self.emission_current,
            Field::BeamCurrent => &mut self.beam_current,
            Field::FrameTime => &mut self.frame_time,
            Field::LineTime => &mut self.line_time,
            Field::Magnification => &mut self.magnification,
            Field::ChamberPressure => &mut self.chamber_pressure,
            Field::SystemVacuum => &mut self.system_vacuum,
            Field::GunVacuum => &mut self.gun_vacuum,
            Field::DatabarRows => return None,
        })
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        match field {
            Field::DatabarRows => self.databar_rows.map(|n| n as f64),
            _ => *self.clone().slot(field).expect("real-valued field"),
        }
    }

    /// Sets a real-valued field; for [`Field::DatabarRows`] the value is
    /// truncated to a count.
    pub fn set(&mut self, field: Field, value: Option<f64>) {
        match self.slot(field) {
            Some(slot) => *slot = value,
            None => self.databar_rows = value.map(|v| v as u64),
        }
    }

    /// Populated table fields in table order.
    pub fn present(&self) -> Vec<(Field, f64)> {
        Field::ALL
            .iter()
            .filter_map(|f| self.get(*f).map(|v| (*f, v)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.present().is_empty() && self.image_width_px.is_none() && self.image_height_px.is_none()
    }
}

pub fn compute_magnification(pixel_size: f64, image_width_px: u64) -> Result<f64> {
    if !(pixel_size.is_finite() && pixel_size > 0.0) {
        return Err(Error::Domain(format!("pixel size must be positive, got {pixel_size}")));
    }
    if image_width_px < 1 {
        return Err(Error::Domain("image width must be at least 1 px".into()));
    }
    Ok(REFERENCE_WIDTH_M / (pixel_size * image_width_px as f64))
}

pub fn compute_databar_rows(image_height_px: u64, scan_rows: u64) -> Result<u64> {
    image_height_px.checked_sub(scan_rows).ok_or_else(|| {
        Error::Domain(format!(
            "scan rows ({scan_rows}) exceed image height ({image_height_px})"
        ))
    })
}

/// Applies the vendor column of the mapping table to `raw`.
///
/// Keys that map nowhere are reported as warnings and stay in `raw` only.
pub fn map_to_unified(
    raw: &RawKeyValues,
    vendor: VendorFormat,
) -> Result<(UnifiedSemMetadata, Vec<String>)> {
    let col = vendor
        .column()
        .ok_or_else(|| Error::Domain("cannot map metadata of unknown format".into()))?;
    let mut out = UnifiedSemMetadata::default();
    let mut warnings = Vec::new();
    let mut consumed: BTreeSet<&str> = BTreeSet::new();

    for row in &SEM_FIELD_TABLE {
        let Cell::Key(key) = row.cells[col] else {
            continue;
        };
        let Some(entry) = raw.get(key) else {
            continue;
        };
        consumed.insert(key);
        match field_value(row.field, entry) {
            Ok(v) => out.set(row.field, Some(v)),
            Err(msg) => warnings.push(format!("`{key}`: {msg}")),
        }
    }

    if let Some((wkey, hkey)) = dimension_keys(vendor) {
        consumed.extend([wkey, hkey]);
        out.image_width_px = count_of(raw, wkey, &mut warnings);
        out.image_height_px = count_of(raw, hkey, &mut warnings);
    }

    let scan_rows = match vendor {
        VendorFormat::VendorA => {
            consumed.insert(VENDOR_A_SCAN_KEY);
            raw.get(VENDOR_A_SCAN_KEY).and_then(|e| match scan_rows_a(&e.value) {
                Some(rows) => Some(rows),
                None => {
                    warnings.push(format!("`{VENDOR_A_SCAN_KEY}` is not `W * H`: {}", e.value));
                    None
                }
            })
        }
        VendorFormat::VendorC => {
            consumed.insert(VENDOR_C_SCAN_KEY);
            count_of(raw, VENDOR_C_SCAN_KEY, &mut warnings)
        }
        _ => None,
    };

    if row_cell(Field::DatabarRows, col) == Cell::Computed {
        if let (Some(h), Some(s)) = (out.image_height_px, scan_rows) {
            match compute_databar_rows(h, s) {
                Ok(rows) => out.databar_rows = Some(rows),
                Err(e) => warnings.push(format!("databar_rows not computed: {e}")),
            }
        }
    }
    if let (Some(rows), Some(h)) = (out.databar_rows, out.image_height_px) {
        if rows > h {
            warnings.push(format!("databar of {rows} rows exceeds image height {h}; dropped"));
            out.databar_rows = None;
        }
    }
    if row_cell(Field::Magnification, col) == Cell::Computed {
        if let (Some(p), Some(w)) = (out.pixel_size, out.image_width_px) {
            match compute_magnification(p, w) {
                Ok(m) => out.magnification = Some(m),
                Err(e) => warnings.push(format!("magnification not computed: {e}")),
            }
        }
    }

    for (field, _) in out.present() {
        if let Some(iri) = field.row().iri {
            out.ontology_iri.insert(field.name().to_string(), iri.to_string());
        }
    }

    for entry in &raw.entries {
        if !consumed.contains(entry.key.as_str()) {
            warnings.push(format!("unmapped key `{}` kept in raw metadata only", entry.key));
        }
    }
    Ok((out, warnings))
}

fn row_cell(field: Field, col: usize) -> Cell {
    field.row().cells[col]
}

fn field_value(field: Field, entry: &RawEntry) -> std::result::Result<f64, String> {
    if field == Field::DatabarRows {
        return entry
            .value
            .as_count()
            .map(|n| n as f64)
            .ok_or_else(|| format!("expected a row count, found {}", entry.value));
    }
    let Some(v) = entry.value.as_f64() else {
        return Err(format!("expected a number, found `{}`", entry.value));
    };
    let v = match entry.unit.as_deref() {
        None => v,
        Some(unit) => match unit_factor(unit) {
            Some((q, factor)) if q == field.quantity() => v * factor,
            Some(_) => return Err(format!("unit `{unit}` does not fit {}", field.name())),
            None => return Err(format!("unknown unit `{unit}`")),
        },
    };
    if !v.is_finite() {
        return Err(format!("{} is not finite", field.name()));
    }
    if v < 0.0 && !field.may_be_negative() {
        return Err(format!("{} must not be negative", field.name()));
    }
    Ok(v)
}

fn count_of(raw: &RawKeyValues, key: &str, warnings: &mut Vec<String>) -> Option<u64> {
    let entry = raw.get(key)?;
    let n = entry.value.as_count();
    if n.is_none() {
        warnings.push(format!("`{key}` is not a pixel count: {}", entry.value));
    }
    n
}

fn scan_rows_a(value: &RawValue) -> Option<u64> {
    let RawValue::Text(text) = value else {
        return None;
    };
    let (_, h) = text.split_once('*')?;
    h.trim().parse().ok()
}
