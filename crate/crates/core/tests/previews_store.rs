use proptest::prelude::*;
use rdm_core::extract::fixtures::demo_vendor_a;
use rdm_core::extract::VendorFormat;
use rdm_core::model::{Catalog, Properties, Repository};
use rdm_core::previews::{euler_to_ipf_color, EulerOrientation};
use rdm_core::store::{
    check_consistency, collect_garbage, FsBackend, register_linked_dataset, sha256_hex, BlobRef, BlobStore, Registration,
};
use serde_json::json;

type Mat = [[f64; 3]; 3];

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn det(m: &Mat) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// The 24 signed permutation matrices with determinant +1.
fn cubic_rotations() -> Vec<Mat> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for p in perms {
        for signs in 0..8 {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                m[i][p[i]] = if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
            }
            if det(&m) > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

/// Bunge orientation matrix taking sample to crystal coordinates.
fn bunge(o: &EulerOrientation) -> Mat {
    let (s1, c1) = o.phi1.sin_cos();
    let (s, c) = o.big_phi.sin_cos();
    let (s2, c2) = o.phi2.sin_cos();
    [
        [c1 * c2 - s1 * s2 * c, s1 * c2 + c1 * s2 * c, s2 * s],
        [-c1 * s2 - s1 * c2 * c, -s1 * s2 + c1 * c2 * c, c2 * s],
        [s1 * s, -c1 * s, c],
    ]
}

fn euler_of(g: &Mat) -> EulerOrientation {
    let big_phi = g[2][2].clamp(-1.0, 1.0).acos();
    EulerOrientation::new(g[2][0].atan2(-g[2][1]), big_phi, g[0][2].atan2(g[1][2]))
}

#[test]
fn there_are_24_rotations() {
    assert_eq!(cubic_rotations().len(), 24);
}

#[test]
fn corner_orientations_are_primaries() {
    let half_pi = std::f64::consts::FRAC_PI_2;
    assert_eq!(euler_to_ipf_color(&EulerOrientation::new(0.0, 0.0, 0.0)), [255, 0, 0]);
    // sample Z along 101: Phi = 45°, phi2 = 0
    let o = EulerOrientation::new(0.0, std::f64::consts::FRAC_PI_4, 0.0);
    assert_eq!(euler_to_ipf_color(&o), [0, 255, 0]);
    // sample Z along 111: Phi = acos(1/sqrt3), phi2 = 45°
    let o = EulerOrientation::new(0.0, (1.0 / 3f64.sqrt()).acos(), std::f64::consts::FRAC_PI_4);
    assert_eq!(euler_to_ipf_color(&o), [0, 0, 255]);
    // sample Z along 010 is equivalent to 001
    let o = EulerOrientation::new(1.0, half_pi, 0.0);
    assert_eq!(euler_to_ipf_color(&o), [255, 0, 0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn color_is_invariant_under_cubic_symmetry(
        phi1 in 0.0f64..std::f64::consts::TAU,
        cos_phi in -0.999f64..0.999,
        phi2 in 0.0f64..std::f64::consts::TAU,
    ) {
        let o = EulerOrientation::new(phi1, cos_phi.acos(), phi2);
        let g = bunge(&o);
        let color = euler_to_ipf_color(&o);
        for s in cubic_rotations() {
            let rotated = euler_of(&mul(&s, &g));
            prop_assert_eq!(euler_to_ipf_color(&rotated), color);
        }
    }

    #[test]
    fn get_after_put_is_identity(blobs in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..512), 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::open_dir(dir.path()).unwrap();
        for b in &blobs {
            let r = store.put_blob(b).unwrap();
            prop_assert_eq!(&r, &BlobRef::of(b));
            prop_assert_eq!(&store.put_blob(b).unwrap(), &r);
            prop_assert_eq!(store.get_blob(&r).unwrap(), b.clone());
        }
        let distinct: std::collections::BTreeSet<_> = blobs.iter().map(|b| sha256_hex(b)).collect();
        prop_assert_eq!(store.stats().unwrap().blob_count, distinct.len() as u64);
    }
}

#[test]
fn journaled_registration_survives_reopen_and_detects_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("rdm.journal");
    let blobs = dir.path().join("blobs");
    let dataset_id;
    {
        let repo = Repository::open(&journal, Catalog::seeded()).unwrap();
        let store = BlobStore::open_dir(&blobs).unwrap();
        let props: Properties = json!({"title": "SEM"}).as_object().unwrap().clone().into_iter().collect();
        let e = repo.create_object("Experiment Entry", "CRC", props, &[]).unwrap();
        let bytes = demo_vendor_a(64, 48, 8);
        let reg = Registration::new(e.perm_id.clone(), &bytes, "SEM_IMAGE", "a.va")
            .with_parser(Some(VendorFormat::VendorA));
        let d = register_linked_dataset(&repo, &store, reg).unwrap();
        dataset_id = d.dataset_id.clone();
        store.put_blob(b"orphan").unwrap();
    }
    let repo = Repository::open(&journal, Catalog::seeded()).unwrap();
    let store = BlobStore::open_dir(&blobs).unwrap();
    let d = repo.get_dataset(&dataset_id).unwrap();
    assert_eq!(d.unified_metadata.as_ref().unwrap().acceleration_voltage, Some(20000.0));
    assert!(d.preview.is_some());
    assert!(check_consistency(&repo, &store).unwrap().ok());

    let gc = collect_garbage(&repo, &store).unwrap();
    assert_eq!(gc.removed, 1);
    assert!(check_consistency(&repo, &store).unwrap().ok());

    let hash = &d.blob.content_hash;
    let path = FsBackend::new(&blobs).unwrap().path_for(hash);
    std::fs::write(&path, b"tampered").unwrap();
    let report = check_consistency(&repo, &store).unwrap();
    assert_eq!(report.corrupt.len(), 1);
    assert_eq!(store.get_blob(&d.blob).unwrap_err().code().as_str(), "CORRUPT");
}
