//! A small deterministic line-plot rasterizer with a built-in 5x7 font.

use super::mechanics::StressStrainCurve;
use crate::error::{Error, Result};
use crate::previews::{encode_png, RgbImage};

pub type Rgb = [u8; 3];

/// Line colors assigned to pillars in id order.
pub const PALETTE: [Rgb; 5] = [
    [230, 120, 20],
    [31, 119, 180],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
];

const WIDTH: u32 = 640;
const HEIGHT: u32 = 480;
const LEFT: i64 = 96;
const RIGHT: i64 = 24;
const TOP: i64 = 36;
const BOTTOM: i64 = 56;
const TICKS: usize = 5;
const BLACK: Rgb = [0, 0, 0];
const GRID: Rgb = [225, 225, 225];

fn glyph(c: char) -> [u8; 7] {
    match c {
        ' ' => [0; 7],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0, 0, 0, 0, 0, 0x0C, 0x0C],
        ',' => [0, 0, 0, 0, 0x0C, 0x04, 0x08],
        ':' => [0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0],
        '-' => [0, 0, 0, 0x1F, 0, 0, 0],
        '+' => [0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        '/' => [0, 0x01, 0x02, 0x04, 0x08, 0x10, 0],
        '_' => [0, 0, 0, 0, 0, 0, 0x1F],
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        'a' => [0, 0, 0x0E, 0x01, 0x0F, 0x11, 0x0F],
        'e' => [0, 0, 0x0E, 0x11, 0x1F, 0x10, 0x0E],
        'i' => [0x04, 0, 0x0C, 0x04, 0x04, 0x04, 0x0E],
        'n' => [0, 0, 0x16, 0x19, 0x11, 0x11, 0x11],
        'r' => [0, 0, 0x16, 0x19, 0x10, 0x10, 0x10],
        's' => [0, 0, 0x0E, 0x10, 0x0E, 0x01, 0x1E],
        't' => [0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06],
        c if c.is_ascii_lowercase() => glyph(c.to_ascii_uppercase()),
        _ => [0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F],
    }
}

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && x < self.img.width() as i64 && y < self.img.height() as i64 {
            self.img.set(x as u32, y as u32, c);
        }
    }

    fn hline(&mut self, x0: i64, x1: i64, y: i64, c: Rgb) {
        for x in x0.min(x1)..=x0.max(x1) {
            self.put(x, y, c);
        }
    }

    fn vline(&mut self, x: i64, y0: i64, y1: i64, c: Rgb) {
        for y in y0.min(y1)..=y0.max(y1) {
            self.put(x, y, c);
        }
    }

    /// Bresenham, drawn two pixels thick.
    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, c);
            self.put(x + 1, y, c);
            self.put(x, y + 1, c);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    fn text(&mut self, x: i64, y: i64, s: &str, c: Rgb) {
        for (i, ch) in s.chars().enumerate() {
            let rows = glyph(ch);
            let ox = x + 6 * i as i64;
            for (r, bits) in rows.iter().enumerate() {
                for col in 0..5 {
                    if bits & (0x10 >> col) != 0 {
                        self.put(ox + col, y + r as i64, c);
                    }
                }
            }
        }
    }

    /// Text rotated a quarter turn counter-clockwise, reading bottom to top.
    fn text_up(&mut self, x: i64, y: i64, s: &str, c: Rgb) {
        for (i, ch) in s.chars().enumerate() {
            let rows = glyph(ch);
            let oy = y - 6 * i as i64;
            for (r, bits) in rows.iter().enumerate() {
                for col in 0..5 {
                    if bits & (0x10 >> col) != 0 {
                        self.put(x + r as i64, oy - col, c);
                    }
                }
            }
        }
    }
}

fn text_width(s: &str) -> i64 {
    6 * s.chars().count() as i64 - 1
}

/// Axis range covering zero and all values, never degenerate.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo > 0.0 {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.2e}")
    }
}

/// Renders a stress-strain curve in the first palette color.
pub fn render_curve(curve: &StressStrainCurve) -> Result<Vec<u8>> {
    render_curve_with(curve, PALETTE[0])
}

/// 640x480 PNG: strain on x, stress in Pa on y, pillar id as the title.
pub fn render_curve_with(curve: &StressStrainCurve, color: Rgb) -> Result<Vec<u8>> {
    if curve.points.is_empty() {
        return Err(Error::Empty("curve has no points".into()));
    }
    if curve.points.iter().any(|p| !(p.strain.is_finite() && p.stress.is_finite())) {
        return Err(Error::Domain("curve has non-finite points".into()));
    }
    let mut cv = Canvas {
        img: RgbImage::from_pixels(WIDTH, HEIGHT, vec![255; (WIDTH * HEIGHT * 3) as usize])?,
    };
    let (w, h) = (WIDTH as i64, HEIGHT as i64);
    let (px0, px1, py0, py1) = (LEFT, w - RIGHT, h - BOTTOM, TOP);
    let (xlo, xhi) = range(curve.points.iter().map(|p| p.strain));
    let (ylo, yhi) = range(curve.points.iter().map(|p| p.stress));
    let to_px = |strain: f64, stress: f64| -> (i64, i64) {
        let fx = (strain - xlo) / (xhi - xlo);
        let fy = (stress - ylo) / (yhi - ylo);
        (
            px0 + (fx * (px1 - px0) as f64).round() as i64,
            py0 - (fy * (py0 - py1) as f64).round() as i64,
        )
    };

    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let x = px0 + (f * (px1 - px0) as f64).round() as i64;
        let y = py0 - (f * (py0 - py1) as f64).round() as i64;
        if i > 0 {
            cv.vline(x, py1, py0 - 1, GRID);
            cv.hline(px0 + 1, px1, y, GRID);
        }
        cv.vline(x, py0, py0 + 4, BLACK);
        cv.hline(px0 - 4, px0, y, BLACK);
        let xl = tick_label(xlo + f * (xhi - xlo));
        cv.text(x - text_width(&xl) / 2, py0 + 8, &xl, BLACK);
        let yl = tick_label(ylo + f * (yhi - ylo));
        cv.text(px0 - 8 - text_width(&yl), y - 3, &yl, BLACK);
    }
    cv.hline(px0, px1, py0, BLACK);
    cv.vline(px0, py1, py0, BLACK);

    let xlabel = "strain";
    cv.text((px0 + px1) / 2 - text_width(xlabel) / 2, h - 20, xlabel, BLACK);
    let ylabel = "stress (Pa)";
    cv.text_up(8, (py0 + py1) / 2 + text_width(ylabel) / 2, ylabel, BLACK);
    let title = &curve.geometry.pillar_id;
    cv.text((px0 + px1) / 2 - text_width(title) / 2, 12, title, color);

    let pts: Vec<(i64, i64)> = curve.points.iter().map(|p| to_px(p.strain, p.stress)).collect();
    if pts.len() == 1 {
        cv.line(pts[0], pts[0], color);
    }
    for pair in pts.windows(2) {
        cv.line(pair[0], pair[1], color);
    }
    encode_png(&cv.img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::previews::decode_png;
    use crate::workflows::mechanics::{CurvePoint, PillarGeometry};

    fn curve(points: &[(f64, f64)]) -> StressStrainCurve {
        StressStrainCurve {
            points: points.iter().map(|&(strain, stress)| CurvePoint { strain, stress }).collect(),
            geometry: PillarGeometry::new("MP1", 1e-6, 2e-6).unwrap(),
            source_dataset: None,
        }
    }

    #[test]
    fn two_points_make_a_png() {
        let png = render_curve(&curve(&[(0.0, 0.0), (0.05, 1.2e9)])).unwrap();
        assert_eq!(&png[..4], b"\x89PNG");
        let img = decode_png(&png).unwrap();
        assert_eq!((img.width(), img.height()), (WIDTH, HEIGHT));
        // the line ends at the top right corner of the plot area
        let end = (WIDTH as i64 - RIGHT, TOP);
        assert_eq!(img.get(end.0 as u32, end.1 as u32), PALETTE[0]);
    }

    #[test]
    fn deterministic_and_color_dependent() {
        let c = curve(&[(0.0, 0.0), (0.01, 3e8), (0.03, 5e8)]);
        assert_eq!(render_curve(&c).unwrap(), render_curve(&c).unwrap());
        assert_ne!(render_curve(&c).unwrap(), render_curve_with(&c, PALETTE[1]).unwrap());
    }

    #[test]
    fn empty_and_degenerate() {
        assert_eq!(render_curve(&curve(&[])).unwrap_err().code().as_str(), "EMPTY");
        assert!(render_curve(&curve(&[(0.0, 0.0)])).is_ok());
        assert_eq!(render_curve(&curve(&[(f64::NAN, 0.0)])).unwrap_err().code().as_str(), "DOMAIN");
    }
}
