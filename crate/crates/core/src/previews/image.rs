use std::io::Cursor;

use crate::error::{Error, Result};
use crate::par::{self, Strategy};

pub const DEFAULT_THUMBNAIL_DIM: u32 = 256;

/// Row-major RGB8 raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RgbImage {
    /// A black image.
    pub fn new(width: u32, height: u32) -> Self {
        RgbImage {
            width,
            height,
            pixels: vec![0; 3 * width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        let expected = 3 * width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::Shape(format!(
                "{width}x{height} RGB image needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        assert!(x < self.width && y < self.height, "pixel ({x},{y}) out of bounds");
        3 * (y as usize * self.width as usize + x as usize)
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }
}

/// Box-filter downsample so the longer side is at most `max_dim`. Never
/// upscales.
pub fn thumbnail(image: &RgbImage, max_dim: u32) -> RgbImage {
    thumbnail_with(image, max_dim, Strategy::default())
}

pub fn thumbnail_with(image: &RgbImage, max_dim: u32, strategy: Strategy) -> RgbImage {
    let max_dim = max_dim.max(1);
    let (w, h) = (image.width, image.height);
    let longest = w.max(h);
    if longest <= max_dim {
        return image.clone();
    }
    let scaled = |side: u32| -> u32 {
        let v = (side as u64 * max_dim as u64 * 2 + longest as u64) / (2 * longest as u64);
        (v as u32).clamp(1, max_dim)
    };
    let (nw, nh) = (scaled(w), scaled(h));
    // Source span [lo, hi) covered by output index i of n over a side of len.
    let span = |i: u32, n: u32, len: u32| -> (u32, u32) {
        let lo = (i as u64 * len as u64 / n as u64) as u32;
        let hi = (((i as u64 + 1) * len as u64).div_ceil(n as u64) as u32).max(lo + 1);
        (lo, hi.min(len))
    };
    let rows = par::map_range(strategy, nh as usize, |oy| {
        let (y0, y1) = span(oy as u32, nh, h);
        let mut row = Vec::with_capacity(3 * nw as usize);
        for ox in 0..nw {
            let (x0, x1) = span(ox, nw, w);
            let mut sum = [0u64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = image.get(x, y);
                    for c in 0..3 {
                        sum[c] += p[c] as u64;
                    }
                }
            }
            let n = ((y1 - y0) * (x1 - x0)) as u64;
            row.extend(sum.map(|s| ((s + n / 2) / n) as u8));
        }
        row
    });
    RgbImage::from_pixels(nw, nh, rows.concat()).expect("thumbnail shape")
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, image.width, image.height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Domain(format!("PNG encode: {e}")))?;
    writer
        .write_image_data(&image.pixels)
        .map_err(|e| Error::Domain(format!("PNG encode: {e}")))?;
    writer
        .finish()
        .map_err(|e| Error::Domain(format!("PNG encode: {e}")))?;
    Ok(out)
}

/// Decodes any 8/16-bit PNG into RGB8 (alpha dropped).
pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let err = |e: png::DecodingError| Error::Parse(format!("PNG decode: {e}"));
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Parse("PNG too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    buf.truncate(info.buffer_size());
    let pixels: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0]; 3]).collect(),
        png::ColorType::Indexed => {
            return Err(Error::Parse("indexed PNG was not expanded".into()));
        }
    };
    RgbImage::from_pixels(info.width, info.height, pixels)
}

pub fn is_png(bytes: &[u8]) -> bool {
    bytes.starts_with(&[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> RgbImage {
        let mut img = RgbImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, [(x % 256) as u8, (y % 256) as u8, 7]);
            }
        }
        img
    }

    #[test]
    fn thumbnail_sizes() {
        let dims = |w, h| {
            let t = thumbnail(&RgbImage::new(w, h), 256);
            (t.width(), t.height())
        };
        assert_eq!(dims(1024, 768), (256, 192));
        assert_eq!(dims(100, 50), (100, 50));
        assert_eq!(dims(512, 512), (256, 256));
        assert_eq!(dims(5000, 3), (256, 1));
        assert_eq!(dims(3, 5000), (1, 256));
    }

    #[test]
    fn small_image_is_unchanged() {
        let img = gradient(100, 50);
        assert_eq!(thumbnail(&img, 256), img);
    }

    #[test]
    fn box_filter_averages() {
        let mut img = RgbImage::new(4, 2);
        img.set(0, 0, [255, 255, 255]);
        img.set(1, 0, [255, 255, 255]);
        let t = thumbnail(&img, 2);
        assert_eq!((t.width(), t.height()), (2, 1));
        // left block: two white of four pixels
        assert_eq!(t.get(0, 0), [128, 128, 128]);
        assert_eq!(t.get(1, 0), [0, 0, 0]);
    }

    #[test]
    fn strategies_agree() {
        let img = gradient(300, 170);
        assert_eq!(
            thumbnail_with(&img, 64, Strategy::Sequential),
            thumbnail_with(&img, 64, Strategy::Parallel)
        );
    }

    #[test]
    fn png_round_trip() {
        let img = gradient(17, 9);
        let bytes = encode_png(&img).unwrap();
        assert!(is_png(&bytes));
        assert_eq!(decode_png(&bytes).unwrap(), img);
        assert_eq!(encode_png(&img).unwrap(), bytes);
        assert_eq!(decode_png(b"nope").unwrap_err().code().as_str(), "PARSE");
    }

    #[test]
    fn wrong_buffer_is_shape_error() {
        assert_eq!(
            RgbImage::from_pixels(2, 2, vec![0; 11]).unwrap_err().code().as_str(),
            "SHAPE"
        );
    }
}
