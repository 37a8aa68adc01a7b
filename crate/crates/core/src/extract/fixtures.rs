//! Writers that emit synthetic vendor files from a chosen metadata set.
//!
//! Values are written in SI base units (with the base unit suffix for
//! vendor A) using shortest round-trip float formatting, so parsing the
//! output recovers every written field bit for bit.

use super::unified::{dimension_keys, Cell, Field, UnifiedSemMetadata, SEM_FIELD_TABLE};
use super::unified::{VENDOR_A_SCAN_KEY, VENDOR_C_SCAN_KEY};
use super::vendor_a::VENDOR_A_MAGIC;
use super::vendor_b::{TYPE_F64, TYPE_U32, VENDOR_B_MAGIC};
use super::vendor_c::SYSTEM_SECTION;
use super::VendorFormat;
use crate::previews::{encode_png, RgbImage};

pub fn write_vendor_file(vendor: VendorFormat, meta: &UnifiedSemMetadata) -> Vec<u8> {
    match vendor {
        VendorFormat::VendorA => write_vendor_a(meta),
        VendorFormat::VendorB => write_vendor_b(meta),
        VendorFormat::VendorC => write_vendor_c(meta),
        VendorFormat::Unknown => b"GIF89a unknown synthetic payload".to_vec(),
    }
}

fn keyed(col: usize) -> impl Iterator<Item = (Field, &'static str)> {
    SEM_FIELD_TABLE.iter().filter_map(move |row| match row.cells[col] {
        Cell::Key(k) => Some((row.field, k)),
        _ => None,
    })
}

/// Scan rows implied by the stored image height and databar size.
fn scan_rows(meta: &UnifiedSemMetadata) -> Option<u64> {
    let h = meta.image_height_px?;
    Some(h - meta.databar_rows.unwrap_or(0).min(h))
}

fn unit_label(field: Field) -> &'static str {
    match field.unit() {
        "" => "x",
        u => u,
    }
}

pub fn write_vendor_a(meta: &UnifiedSemMetadata) -> Vec<u8> {
    let mut text = String::new();
    for (field, key) in keyed(0) {
        if let Some(v) = meta.get(field) {
            text.push_str(&format!("{key} = {v} {}\n", unit_label(field)));
        }
    }
    let payload = match (meta.image_width_px, meta.image_height_px) {
        (Some(w), Some(h)) if w > 0 && h > 0 => {
            text.push_str(&format!(
                "{VENDOR_A_SCAN_KEY} = {w} * {}\n",
                scan_rows(meta).unwrap()
            ));
            encode_png(&RgbImage::new(w as u32, h as u32)).expect("in-memory PNG encode")
        }
        _ => Vec::new(),
    };
    let mut out = VENDOR_A_MAGIC.to_vec();
    out.extend((text.len() as u32).to_le_bytes());
    out.extend(text.as_bytes());
    out.extend(payload);
    out
}

pub fn write_vendor_b(meta: &UnifiedSemMetadata) -> Vec<u8> {
    let mut out = VENDOR_B_MAGIC.to_vec();
    let mut record = |key: &str, ty: u8, value: &[u8]| {
        out.extend((key.len() as u16).to_le_bytes());
        out.extend(key.as_bytes());
        out.push(ty);
        out.extend((value.len() as u16).to_le_bytes());
        out.extend(value);
    };
    for (field, key) in keyed(1) {
        if field == Field::DatabarRows {
            if let Some(n) = meta.databar_rows {
                record(key, TYPE_U32, &(n as u32).to_le_bytes());
            }
        } else if let Some(v) = meta.get(field) {
            record(key, TYPE_F64, &v.to_le_bytes());
        }
    }
    let (wkey, hkey) = dimension_keys(VendorFormat::VendorB).unwrap();
    for (key, v) in [(wkey, meta.image_width_px), (hkey, meta.image_height_px)] {
        if let Some(v) = v {
            record(key, TYPE_U32, &(v as u32).to_le_bytes());
        }
    }
    out.extend([0, 0]);
    out
}

pub fn write_vendor_c(meta: &UnifiedSemMetadata) -> Vec<u8> {
    let mut sections: Vec<(String, Vec<String>)> = vec![(SYSTEM_SECTION.to_string(), Vec::new())];
    let mut put = |dotted: &str, value: String| {
        let (section, key) = dotted.split_once('.').unwrap_or((SYSTEM_SECTION, dotted));
        let idx = match sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                sections.push((section.to_string(), Vec::new()));
                sections.len() - 1
            }
        };
        sections[idx].1.push(format!("{key}={value}"));
    };
    for (field, key) in keyed(2) {
        if let Some(v) = meta.get(field) {
            put(key, v.to_string());
        }
    }
    let (wkey, hkey) = dimension_keys(VendorFormat::VendorC).unwrap();
    if let Some(w) = meta.image_width_px {
        put(wkey, w.to_string());
    }
    if let Some(h) = meta.image_height_px {
        put(hkey, h.to_string());
        put(VENDOR_C_SCAN_KEY, scan_rows(meta).unwrap().to_string());
    }
    let mut text = String::new();
    for (section, lines) in sections {
        text.push_str(&format!("[{section}]\n"));
        for l in lines {
            text.push_str(&l);
            text.push('\n');
        }
    }
    text.into_bytes()
}

/// A representative acquisition, used by the demo fixtures.
pub fn demo_metadata() -> UnifiedSemMetadata {
    UnifiedSemMetadata {
        acceleration_voltage: Some(20000.0),
        dwell_time: Some(1e-7),
        stage_x: Some(0.0381),
        stage_y: Some(0.0422),
        stage_z: Some(0.0051),
        stage_rotation: Some(0.0),
        working_distance: Some(0.0101),
        pixel_size: Some(1e-7),
        emission_current: Some(1.0e-4),
        beam_current: Some(1e-10),
        frame_time: Some(20.2),
        line_time: Some(0.0197),
        magnification: Some(1000.0),
        chamber_pressure: Some(0.052),
        system_vacuum: Some(1.6e-4),
        gun_vacuum: Some(3.1e-7),
        databar_rows: Some(116),
        image_width_px: Some(1270),
        image_height_px: Some(884),
        ontology_iri: Default::default(),
    }
}

/// Vendor A file in the instrument's customary units (kV, µs, mm, mbar).
pub fn demo_vendor_a(width: u32, height: u32, databar_rows: u32) -> Vec<u8> {
    let text = format!(
        "EHT = 20.00 kV\n\
         Dwell Time = 0.1 µs\n\
         Stage at X = 38.1 mm\n\
         Stage at Y = 42.2 mm\n\
         Stage at Z = 5.1 mm\n\
         Stage at R = 0.0 deg\n\
         WD = 10.1 mm\n\
         Pixel Size = 100.0 nm\n\
         Beam Current = 100 pA\n\
         Cycle Time = 20.2 s\n\
         Line Time = 19.7 ms\n\
         Mag = 1000 x\n\
         Chamber = 5.2e-4 mbar\n\
         System Vacuum = 1.6e-6 mbar\n\
         Gun Vacuum = 3.1e-9 mbar\n\
         {VENDOR_A_SCAN_KEY} = {width} * {}\n",
        height - databar_rows
    );
    let mut image = RgbImage::new(width, height);
    // a bright specimen area above a dark databar
    for y in 0..height - databar_rows {
        for x in 0..width {
            let v = ((x ^ y) & 0xff) as u8 / 2 + 64;
            image.set(x, y, [v, v, v]);
        }
    }
    let mut out = VENDOR_A_MAGIC.to_vec();
    out.extend((text.len() as u32).to_le_bytes());
    out.extend(text.as_bytes());
    out.extend(encode_png(&image).expect("in-memory PNG encode"));
    out
}
