use super::ebsd::{EbsdMap, EulerOrientation};
use super::image::RgbImage;
use crate::par::{self, Strategy};

/// Crystal-frame coordinates of the sample Z axis for a Bunge orientation.
pub fn sample_z_in_crystal(o: &EulerOrientation) -> [f64; 3] {
    let (s, c) = o.big_phi.sin_cos();
    let (s2, c2) = o.phi2.sin_cos();
    [s * s2, s * c2, c]
}

/// Maps a direction into the 001-101-111 standard triangle: absolute
/// values sorted ascending. This equals applying the cubic point group.
pub fn reduce_to_standard_triangle(v: [f64; 3]) -> [f64; 3] {
    let mut a = v.map(f64::abs);
    a.sort_by(f64::total_cmp);
    a
}

fn quantize(weights: [f64; 3]) -> [u8; 3] {
    let w = weights.map(|x| x.max(0.0));
    let max = w[0].max(w[1]).max(w[2]);
    if max <= 0.0 {
        return [0, 0, 0];
    }
    w.map(|x| ((x / max) * 255.0 + 0.5).floor().min(255.0) as u8)
}

/// Cubic IPF-Z color: 001 red, 101 green, 111 blue, max channel 255.
pub fn euler_to_ipf_color(o: &EulerOrientation) -> [u8; 3] {
    let [x, y, z] = reduce_to_standard_triangle(sample_z_in_crystal(o));
    // barycentric weights against (0,0,1), (0,1,1)/sqrt2, (1,1,1)/sqrt3
    quantize([z - y, std::f64::consts::SQRT_2 * (y - x), 3f64.sqrt() * x])
}

/// One pixel per cell; zero-quality cells are black.
pub fn ipf_z_map(map: &EbsdMap) -> RgbImage {
    ipf_z_map_with(map, Strategy::default())
}

pub fn ipf_z_map_with(map: &EbsdMap, strategy: Strategy) -> RgbImage {
    let colors = par::map(strategy, &map.cells, |cell| {
        if cell.quality == 0.0 {
            [0, 0, 0]
        } else {
            euler_to_ipf_color(&cell.orientation)
        }
    });
    RgbImage::from_pixels(map.n_cols, map.n_rows, colors.concat())
        .expect("map invariant: cells = cols x rows")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::previews::ebsd::EbsdCell;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn corners() {
        assert_eq!(euler_to_ipf_color(&EulerOrientation::new(0.0, 0.0, 0.0)), [255, 0, 0]);
        assert_eq!(euler_to_ipf_color(&EulerOrientation::new(0.0, FRAC_PI_4, 0.0)), [0, 255, 0]);
        let blue = EulerOrientation::new(0.0, (1.0 / 3f64.sqrt()).acos(), FRAC_PI_4);
        assert_eq!(euler_to_ipf_color(&blue), [0, 0, 255]);
        // phi1 does not move sample Z
        assert_eq!(euler_to_ipf_color(&EulerOrientation::new(1.3, 0.0, 0.0)), [255, 0, 0]);
        // upside down is still 001
        assert_eq!(euler_to_ipf_color(&EulerOrientation::new(0.0, PI, 0.0)), [255, 0, 0]);
    }

    #[test]
    fn map_shape_and_black_cells() {
        let cell = |q| EbsdCell {
            orientation: EulerOrientation::new(0.0, 0.0, 0.0),
            quality: q,
            phase_id: 1,
        };
        let map = EbsdMap {
            n_cols: 3,
            n_rows: 2,
            step: 1.0,
            cells: vec![cell(1.0), cell(0.0), cell(1.0), cell(1.0), cell(1.0), cell(1.0)],
        };
        let img = ipf_z_map(&map);
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.get(0, 0), [255, 0, 0]);
        assert_eq!(img.get(1, 0), [0, 0, 0]);
        assert_eq!(img.get(2, 1), [255, 0, 0]);
    }
}
