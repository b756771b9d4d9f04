//! sRGB (D65) <-> CIELAB conversion.

use crate::raster::RasterImage;

const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// One sRGB pixel (values in [0, 1]) to L*a*b*.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// L*a*b* back to sRGB; out-of-gamut channels are clamped to [0, 1].
pub fn lab_to_rgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let x = WHITE[0] * lab_f_inv(fx);
    let y = WHITE[1] * lab_f_inv(fy);
    let z = WHITE[2] * lab_f_inv(fz);
    let r = 3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z;
    let g = -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z;
    let b = 0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z;
    [
        linear_to_srgb(r).clamp(0.0, 1.0),
        linear_to_srgb(g).clamp(0.0, 1.0),
        linear_to_srgb(b).clamp(0.0, 1.0),
    ]
}

/// Convert a whole image to per-pixel LAB triples.
pub fn image_to_lab(img: &RasterImage) -> Vec<[f64; 3]> {
    img.data()
        .chunks_exact(3)
        .map(|px| rgb_to_lab([px[0], px[1], px[2]]))
        .collect()
}

/// Rebuild an image from per-pixel LAB triples (clamped to gamut).
pub fn lab_to_image(height: usize, width: usize, labs: &[[f64; 3]]) -> RasterImage {
    let mut data = Vec::with_capacity(labs.len() * 3);
    for &lab in labs {
        data.extend_from_slice(&lab_to_rgb(lab));
    }
    RasterImage::new(height, width, data)
}

/// RGB -> LAB -> RGB round trip of a whole image.
pub fn rgb_lab_roundtrip(img: &RasterImage) -> RasterImage {
    lab_to_image(img.height(), img.width(), &image_to_lab(img))
}

/// Mean LAB color of an image.
pub fn mean_lab(img: &RasterImage) -> [f64; 3] {
    let labs = image_to_lab(img);
    let n = labs.len() as f64;
    let mut acc = [0.0; 3];
    for lab in labs {
        acc[0] += lab[0];
        acc[1] += lab[1];
        acc[2] += lab[2];
    }
    [acc[0] / n, acc[1] / n, acc[2] / n]
}

pub fn lab_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::rng::seeded_rng;
    use rand::Rng;

    #[test]
    fn white_point() {
        let lab = rgb_to_lab([1.0, 1.0, 1.0]);
        assert!((lab[0] - 100.0).abs() < 1e-3, "L = {}", lab[0]);
        assert!(lab[1].abs() < 1e-2 && lab[2].abs() < 1e-2, "a,b = {:?}", &lab[1..]);
    }

    #[test]
    fn black_point() {
        let lab = rgb_to_lab([0.0, 0.0, 0.0]);
        assert!(lab[0].abs() < 1e-9 && lab[1].abs() < 1e-9 && lab[2].abs() < 1e-9);
    }

    #[test]
    fn random_image_roundtrip_under_1e6() {
        let mut rng = seeded_rng(11);
        let data: Vec<f64> = (0..16 * 16 * 3).map(|_| rng.random_range(0.0..1.0)).collect();
        let img = RasterImage::new(16, 16, data);
        let back = rgb_lab_roundtrip(&img);
        let max_err = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-6, "roundtrip error {max_err}");
    }
}
