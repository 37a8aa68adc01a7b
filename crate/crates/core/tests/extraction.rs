use proptest::prelude::*;
use rdm_core::extract::fixtures::write_vendor_file;
use rdm_core::extract::{
    compute_magnification, parse_file, parse_many, Cell, Field, UnifiedSemMetadata, VendorFormat, SEM_FIELD_TABLE,
};
use rdm_core::par::Strategy as Exec;

fn column(v: VendorFormat) -> usize {
    VendorFormat::PARSEABLE.iter().position(|x| *x == v).unwrap()
}

fn full_metadata() -> UnifiedSemMetadata {
    let mut m = UnifiedSemMetadata::default();
    for (i, f) in Field::ALL.iter().enumerate() {
        if *f != Field::DatabarRows {
            m.set(*f, Some(1.5 + i as f64));
        }
    }
    m.databar_rows = Some(6);
    m.image_width_px = Some(40);
    m.image_height_px = Some(30);
    m
}

/// Every cell of the mapping table: keyed fields populated with the written
/// value, "x" fields absent, "*" fields computed.
#[test]
fn mapping_table_cells() {
    let meta = full_metadata();
    for vendor in VendorFormat::PARSEABLE {
        let parsed = parse_file(&write_vendor_file(vendor, &meta), vendor).unwrap().unified;
        for row in &SEM_FIELD_TABLE {
            let got = parsed.get(row.field);
            match row.cells[column(vendor)] {
                Cell::Key(_) => assert_eq!(got, meta.get(row.field), "{vendor} {}", row.label),
                Cell::Absent => assert_eq!(got, None, "{vendor} {}", row.label),
                Cell::Computed => assert!(got.is_some(), "{vendor} {} not computed", row.label),
            }
            let iri = parsed.ontology_iri.get(row.field.name());
            assert_eq!(iri.is_some(), got.is_some() && row.iri.is_some());
        }
    }
}

fn magnitude() -> impl Strategy<Value = f64> {
    (1.0f64..10.0, -12i32..12).prop_map(|(m, e)| m * 10f64.powi(e))
}

fn metadata() -> impl Strategy<Value = UnifiedSemMetadata> {
    (
        proptest::collection::vec((magnitude(), any::<bool>(), any::<bool>()), Field::ALL.len()),
        1u64..48,
        1u64..48,
        0u64..48,
    )
        .prop_map(|(values, w, h, bar)| {
            let mut m = UnifiedSemMetadata::default();
            for (f, (v, negative, present)) in Field::ALL.iter().zip(values) {
                if *f == Field::DatabarRows || !present {
                    continue;
                }
                let v = if negative && f.may_be_negative() { -v } else { v };
                m.set(*f, Some(v));
            }
            // a pixel size keeps the computed magnification defined
            m.pixel_size.get_or_insert(1e-7);
            m.image_width_px = Some(w);
            m.image_height_px = Some(h);
            m.databar_rows = Some(bar % h);
            m
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn vendor_round_trip(meta in metadata()) {
        for vendor in VendorFormat::PARSEABLE {
            let r = parse_file(&write_vendor_file(vendor, &meta), vendor).unwrap();
            let u = &r.unified;
            for row in &SEM_FIELD_TABLE {
                if let Cell::Key(_) = row.cells[column(vendor)] {
                    let (a, b) = (u.get(row.field), meta.get(row.field));
                    prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits), "{} {}", vendor, row.label);
                }
            }
            prop_assert_eq!(u.image_width_px, meta.image_width_px);
            prop_assert_eq!(u.image_height_px, meta.image_height_px);
            prop_assert_eq!(u.databar_rows, meta.databar_rows);
            if vendor == VendorFormat::VendorC {
                let m = compute_magnification(meta.pixel_size.unwrap(), meta.image_width_px.unwrap()).unwrap();
                prop_assert_eq!(u.magnification, Some(m));
            }
            prop_assert!(r.warnings.is_empty(), "{}: {:?}", vendor, r.warnings);
        }
    }
}

#[test]
fn strategies_agree() {
    let files: Vec<Vec<u8>> = (0..12)
        .map(|i| write_vendor_file(VendorFormat::PARSEABLE[i % 3], &full_metadata()))
        .chain([b"GIF89a".to_vec()])
        .collect();
    let seq = parse_many(&files, Exec::Sequential);
    let par = parse_many(&files, Exec::Parallel);
    assert_eq!(seq.len(), par.len());
    for (a, b) in seq.iter().zip(&par) {
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(a, b),
            (Err(a), Err(b)) => assert_eq!(a.code(), b.code()),
            _ => panic!("strategies disagree"),
        }
    }
}
