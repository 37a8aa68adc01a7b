mod common;

use rdm_cli::cli::{run, FIXTURE_FILES};
use rdm_core::previews::is_png;
use serde_json::json;

use common::{entry_props, fixtures, rdm, rdm_ok, sample_props, step_props};

#[test]
fn help_and_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let help = rdm(dir.path(), &["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("Usage: rdm"));
    assert_eq!(rdm(dir.path(), &["workflow", "--help"]).code, 0);
    assert_eq!(rdm(dir.path(), &["frobnicate"]).code, 2);
    assert_eq!(rdm(dir.path(), &["object", "get", "not-an-id"]).code, 2);
    assert_eq!(rdm(dir.path(), &["graph"]).code, 2);
}

#[test]
fn domain_errors_exit_with_one_and_a_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = rdm(dir.path(), &["object", "get", "20200101000000000-7"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.starts_with("error: [NOTFOUND]"), "{}", o.stderr);

    let bad = rdm(
        dir.path(),
        &["object", "create", "--type", "Sample", "--space", "CRC", "--props", r#"{"name":"x"}"#],
    );
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.contains("[VALIDATION]"));

    let a = rdm_ok(dir.path(), &["object", "create", "--type", "Protocol", "--space", "CRC", "--props", r#"{"name":"a"}"#]);
    let b = rdm_ok(
        dir.path(),
        &["object", "create", "--type", "Protocol", "--space", "CRC", "--props", r#"{"name":"b"}"#, "--parent", &a],
    );
    let cyc = rdm(dir.path(), &["object", "link", &b, &a]);
    assert_eq!(cyc.code, 1);
    assert!(cyc.stderr.contains("[CYCLE]"));
}

#[test]
fn run_writes_to_the_given_sink() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j");
    let blobs = dir.path().join("b");
    let base = ["rdm", "--journal", journal.to_str().unwrap(), "--blob-root", blobs.to_str().unwrap()];
    let mut out = Vec::new();
    assert_eq!(run(base.iter().copied().chain(["init"]), &mut out), 0);
    assert!(String::from_utf8(out).unwrap().starts_with("initialized"));
    assert!(journal.exists());

    let mut out = Vec::new();
    assert_eq!(run(base.iter().copied().chain(["vocab", "show", "SAMPLE_TYPE"]), &mut out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["name"], "SAMPLE_TYPE");

    let mut out = Vec::new();
    let add = ["vocab", "add", "SAMPLE_TYPE", "--code", "WIRE", "--label", "Wire"];
    assert_eq!(run(base.iter().copied().chain(add), &mut out), 0);
    assert_eq!(run(base.iter().copied().chain(add), &mut Vec::new()), 1);
}

#[test]
fn fixtures_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures(dir.path());
    for name in FIXTURE_FILES {
        assert!(fx.join(name).metadata().unwrap().len() > 0, "{name}");
    }
}

#[test]
fn props_can_come_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("props.json");
    std::fs::write(&path, sample_props("from file", json!({"Ni": 100})).to_string()).unwrap();
    let arg = format!("@{}", path.display());
    let id = rdm_ok(dir.path(), &["object", "create", "--type", "Sample", "--space", "CRC", "--props", &arg]);
    let rec: serde_json::Value = serde_json::from_str(&rdm_ok(dir.path(), &["object", "get", &id])).unwrap();
    assert_eq!(rec["properties"]["name"], "from file");
    let audit: serde_json::Value = serde_json::from_str(&rdm_ok(dir.path(), &["object", "audit", &id])).unwrap();
    assert!(audit.is_array());
    assert_eq!(rdm_ok(dir.path(), &["object", "qr", &id]), format!("rdm://object/{id}"));
}

fn create(dir: &std::path::Path, ty: &str, props: serde_json::Value, parents: &[&str]) -> String {
    let props = props.to_string();
    let mut args = vec!["object", "create", "--type", ty, "--space", "CRC", "--props", &props];
    for p in parents {
        args.extend(["--parent", p]);
    }
    rdm_ok(dir, &args)
}

#[test]
fn ingest_preview_deck_report_and_store() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fx = fixtures(d);
    let entry = create(d, "Experiment Entry", entry_props("SEM"), &[]);
    let mut datasets = Vec::new();
    for (file, ty) in [("sem_vendor_a.tif", "SEM_IMAGE"), ("sem_vendor_b.emi", "SEM_IMAGE"), ("ebsd_map.ang", "EBSD_MAP")] {
        let path = fx.join(file);
        datasets.push(rdm_ok(d, &["ingest", path.to_str().unwrap(), "--entry", &entry, "--dataset-type", ty]));
    }
    let rec: serde_json::Value = serde_json::from_str(&rdm_ok(d, &["dataset", "get", &datasets[1]])).unwrap();
    assert_eq!(rec["vendor"], "VendorB");
    assert_eq!(rec["unified_metadata"]["magnification"], 1000.0);

    let png = d.join("p.png");
    rdm_ok(d, &["preview", &datasets[2], "--out", png.to_str().unwrap(), "--regenerate"]);
    assert!(is_png(&std::fs::read(&png).unwrap()));

    let html = d.join("deck.html");
    let deck = rdm_ok(d, &["deck", "--title", "Survey", &datasets[0], &datasets[2], "--out", html.to_str().unwrap()]);
    let text = std::fs::read_to_string(&html).unwrap();
    assert_eq!(text.matches("class=\"slide\"").count(), 2);
    assert!(rdm_ok(d, &["dataset", "list", "--entry", &entry]).contains(&deck));

    let prep = create(d, "Metallographic Prep", entry_props("prep"), &[]);
    create(d, "Preparation Step", step_props(1, "grind", "SiC 800", 120.0), &[&prep]);
    let table = rdm_ok(d, &["workflow", "report", "prep", "--entry", &prep]);
    assert!(table.contains("grind") && table.contains("SiC 800"));

    assert!(rdm_ok(d, &["store", "check"]).contains("\"corrupt\": []"));
    assert!(rdm_ok(d, &["store", "gc"]).starts_with("removed 0 blobs"));
}
