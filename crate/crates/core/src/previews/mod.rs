//! Dataset previews: thumbnails of embedded images and IPF-Z orientation
//! maps for EBSD data.

mod ebsd;
mod image;
mod ipf;

pub use ebsd::{demo_ebsd_map, parse_ang, write_ang, EbsdCell, EbsdMap, EulerOrientation};
pub use image::{
    decode_png, encode_png, is_png, thumbnail, thumbnail_with, RgbImage, DEFAULT_THUMBNAIL_DIM,
};
pub use ipf::{
    euler_to_ipf_color, ipf_z_map, ipf_z_map_with, reduce_to_standard_triangle,
    sample_z_in_crystal,
};

use crate::error::Result;
use crate::extract::{vendor_a_image_payload, VendorFormat};
use crate::par::Strategy;

pub const EBSD_DATASET_TYPE: &str = "EBSD_MAP";

/// The source raster a preview is made from, if the content has one.
pub fn preview_source(bytes: &[u8], vendor: VendorFormat, dataset_type: &str) -> Result<Option<RgbImage>> {
    if dataset_type == EBSD_DATASET_TYPE {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| crate::error::Error::Encoding(format!("EBSD text: {e}")))?;
        return Ok(Some(ipf_z_map(&parse_ang(text)?)));
    }
    let embedded = match vendor {
        VendorFormat::VendorA => vendor_a_image_payload(bytes),
        _ if is_png(bytes) => Some(bytes),
        _ => None,
    };
    match embedded {
        Some(png) if is_png(png) => decode_png(png).map(Some),
        _ => Ok(None),
    }
}

/// PNG thumbnail for a dataset's content, or `None` when the content has no
/// visual form.
pub fn generate_preview(
    bytes: &[u8],
    vendor: VendorFormat,
    dataset_type: &str,
    strategy: Strategy,
) -> Result<Option<Vec<u8>>> {
    let Some(source) = preview_source(bytes, vendor, dataset_type)? else {
        return Ok(None);
    };
    let thumb = thumbnail_with(&source, DEFAULT_THUMBNAIL_DIM, strategy);
    encode_png(&thumb).map(Some)
}
