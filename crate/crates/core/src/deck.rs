//! Slide decks: one standalone HTML page with an image and a metadata table
//! per selected dataset.

use std::fmt::Write as _;
use std::sync::Arc;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{vendor_a_image_payload, VendorFormat};
use crate::model::{PermId, RepoState, Repository};
use crate::previews::is_png;
use crate::store::{register_linked_dataset, BlobStore, DatasetRecord, Registration};
use crate::workflows::escape_html;

pub const SLIDE_DECK_TYPE: &str = "SLIDE_DECK";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlideDeckRequest {
    pub dataset_ids: Vec<PermId>,
    pub title: String,
    /// Entry the deck is attached to; defaults to the first dataset's entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner_entry: Option<PermId>,
}

#[derive(Debug, Clone)]
pub struct SlideDeck {
    pub dataset: Arc<DatasetRecord>,
    pub html: Vec<u8>,
}

/// PNG bytes to show for a dataset: the file itself, the image embedded in
/// a vendor file, or the stored preview.
fn slide_image(store: &BlobStore, d: &DatasetRecord) -> Result<Vec<u8>> {
    let bytes = store.get_blob(&d.blob)?;
    if is_png(&bytes) {
        return Ok(bytes);
    }
    if d.vendor == VendorFormat::VendorA {
        if let Some(png) = vendor_a_image_payload(&bytes).filter(|p| is_png(p)) {
            return Ok(png.to_vec());
        }
    }
    match &d.preview {
        Some(p) => store.get_blob(p),
        None => Err(Error::Domain(format!(
            "dataset {} ({}) has no image content",
            d.dataset_id, d.original_filename
        ))),
    }
}

/// Two-column rows of the unified fields present on a dataset.
pub fn metadata_rows(d: &DatasetRecord) -> Vec<(String, String)> {
    let Some(u) = &d.unified_metadata else {
        return Vec::new();
    };
    u.present()
        .into_iter()
        .map(|(field, v)| {
            let value = match field.unit() {
                "" => format!("{v}"),
                unit => format!("{v} {unit}"),
            };
            (field.name().to_string(), value)
        })
        .collect()
}

/// Renders the deck without registering it.
pub fn render_deck(state: &RepoState, store: &BlobStore, req: &SlideDeckRequest) -> Result<Vec<u8>> {
    if req.dataset_ids.is_empty() {
        return Err(Error::Empty("slide deck needs at least one dataset".into()));
    }
    let datasets = req
        .dataset_ids
        .iter()
        .map(|id| state.dataset(id).cloned())
        .collect::<Result<Vec<_>>>()?;

    let title = escape_html(&req.title);
    let mut out = String::from("<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\">");
    let _ = write!(out, "<title>{title}</title>");
    out.push_str(concat!(
        "<style>",
        "body{font-family:sans-serif;margin:0}",
        ".slide{page-break-after:always;min-height:100vh;padding:2em;box-sizing:border-box;display:flex;gap:2em}",
        ".slide img{max-width:60%;max-height:80vh;object-fit:contain}",
        "table{border-collapse:collapse}th,td{border:1px solid #999;padding:2px 8px;text-align:left}",
        "</style>"
    ));
    let _ = writeln!(out, "</head>\n<body>\n<h1>{title}</h1>");
    let b64 = base64::engine::general_purpose::STANDARD;
    for (i, d) in datasets.iter().enumerate() {
        let png = slide_image(store, d)?;
        let name = escape_html(&d.original_filename);
        let _ = writeln!(out, "<section class=\"slide\" id=\"slide-{}\">", i + 1);
        let _ = writeln!(
            out,
            "<img alt=\"{name}\" src=\"data:image/png;base64,{}\">",
            b64.encode(&png)
        );
        let _ = writeln!(
            out,
            "<div><h2>{name}</h2>\n<p>{} &middot; {}</p>",
            escape_html(&d.dataset_type),
            d.dataset_id
        );
        out.push_str("<table>\n<tr><th>Field</th><th>Value</th></tr>\n");
        for (k, v) in metadata_rows(d) {
            let _ = writeln!(out, "<tr><td>{}</td><td>{}</td></tr>", escape_html(&k), escape_html(&v));
        }
        out.push_str("</table>\n</div>\n</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    Ok(out.into_bytes())
}

fn file_slug(title: &str) -> String {
    let slug: String = title
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    let slug = slug.trim_matches('_');
    if slug.is_empty() {
        "slides".into()
    } else {
        slug.into()
    }
}

/// Renders the deck and registers it as a SLIDE_DECK dataset.
pub fn build_slide_deck(repo: &Repository, store: &BlobStore, req: &SlideDeckRequest) -> Result<SlideDeck> {
    let state = repo.snapshot();
    let html = render_deck(&state, store, req)?;
    let owner = match &req.owner_entry {
        Some(e) => e.clone(),
        None => state.dataset(&req.dataset_ids[0])?.owner_entry.clone(),
    };
    let filename = format!("{}.html", file_slug(&req.title));
    let dataset = register_linked_dataset(
        repo,
        store,
        Registration::new(owner, &html, SLIDE_DECK_TYPE, &filename),
    )?;
    Ok(SlideDeck { dataset, html })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::fixtures::demo_vendor_a;
    use crate::model::{Catalog, Properties};
    use serde_json::json;

    fn setup() -> (Repository, BlobStore, PermId) {
        let repo = Repository::in_memory(Catalog::seeded());
        let props: Properties = json!({"title": "SEM"}).as_object().unwrap().clone().into_iter().collect();
        let e = repo.create_object("Experiment Entry", "CRC", props, &[]).unwrap().perm_id.clone();
        (repo, BlobStore::in_memory(), e)
    }

    fn ingest(repo: &Repository, store: &BlobStore, e: &PermId, name: &str, bytes: &[u8]) -> PermId {
        let reg = Registration::new(e.clone(), bytes, "SEM_IMAGE", name).with_parser(Some(VendorFormat::VendorA));
        register_linked_dataset(repo, store, reg).unwrap().dataset_id.clone()
    }

    #[test]
    fn two_images_in_order() {
        let (repo, store, e) = setup();
        let a = ingest(&repo, &store, &e, "first.va", &demo_vendor_a(64, 48, 8));
        let b = ingest(&repo, &store, &e, "second.va", &demo_vendor_a(32, 24, 4));
        let req = SlideDeckRequest {
            dataset_ids: vec![b.clone(), a.clone()],
            title: "Pillars & more".into(),
            owner_entry: None,
        };
        let deck = build_slide_deck(&repo, &store, &req).unwrap();
        let html = String::from_utf8(deck.html.clone()).unwrap();
        assert_eq!(html.matches("<section class=\"slide\"").count(), 2);
        assert!(html.find("second.va").unwrap() < html.find("first.va").unwrap());
        assert!(html.contains("<td>acceleration_voltage</td><td>20000 V</td>"));
        assert!(html.contains("Pillars &amp; more"));
        assert_eq!(deck.dataset.dataset_type, SLIDE_DECK_TYPE);
        assert_eq!(deck.dataset.owner_entry, e);
        assert_eq!(deck.dataset.original_filename, "pillars___more.html");
        assert_eq!(render_deck(&repo.snapshot(), &store, &req).unwrap(), deck.html);
    }

    #[test]
    fn errors() {
        let (repo, store, e) = setup();
        let empty = SlideDeckRequest { dataset_ids: vec![], title: "x".into(), owner_entry: None };
        assert_eq!(build_slide_deck(&repo, &store, &empty).unwrap_err().code().as_str(), "EMPTY");
        let ghost = PermId::parse("20000101000000000-9").unwrap();
        let req = SlideDeckRequest { dataset_ids: vec![ghost.clone()], title: "x".into(), owner_entry: None };
        let err = build_slide_deck(&repo, &store, &req).unwrap_err();
        assert_eq!(err.code().as_str(), "NOTFOUND");
        assert!(err.to_string().contains(ghost.as_str()));
        let csv = register_linked_dataset(&repo, &store, Registration::new(e, b"a,b\n", "OTHER", "t.csv")).unwrap();
        let req = SlideDeckRequest { dataset_ids: vec![csv.dataset_id.clone()], title: "x".into(), owner_entry: None };
        assert_eq!(build_slide_deck(&repo, &store, &req).unwrap_err().code().as_str(), "DOMAIN");
    }
}
