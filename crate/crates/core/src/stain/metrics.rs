//! Structural similarity and Pearson correlation between images.
//!
//! SSIM uses an 8x8 uniform sliding window with stride 4 and the standard
//! constants `c1 = 0.01^2`, `c2 = 0.03^2` on a [0, 1] dynamic range. The
//! same window geometry is available as a differentiable graph expression so
//! the reconstruction loss can be gradient-checked against this definition.

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::raster::{GrayImage, RasterImage};

pub const SSIM_WINDOW: usize = 8;
pub const SSIM_STRIDE: usize = 4;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn window_origins(extent: usize) -> impl Iterator<Item = usize> {
    (0..=extent.saturating_sub(SSIM_WINDOW)).step_by(SSIM_STRIDE)
}

/// Mean windowed SSIM between two grayscale images of equal shape.
pub fn ssim(x: &GrayImage, y: &GrayImage) -> Result<f64> {
    if x.height() != y.height() || x.width() != y.width() {
        return Err(Error::ShapeMismatch {
            context: "ssim".into(),
            expected: vec![x.height(), x.width()],
            actual: vec![y.height(), y.width()],
        });
    }
    if x.height() < SSIM_WINDOW || x.width() < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {}x{}",
            x.height(),
            x.width()
        )));
    }
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in window_origins(x.height()) {
        for c0 in window_origins(x.width()) {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in r0..r0 + SSIM_WINDOW {
                for c in c0..c0 + SSIM_WINDOW {
                    let a = x.at(r, c);
                    let b = y.at(r, c);
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            let mx = sx / n;
            let my = sy / n;
            let vx = sxx / n - mx * mx;
            let vy = syy / n - my * my;
            let cov = sxy / n - mx * my;
            let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// The uniform window-mean pooling matrix for an `h x w` image, shape
/// `[n_windows, h*w]` with entries `1/64` on window members.
pub fn window_pool_matrix(h: usize, w: usize) -> Tensor {
    let origins_r: Vec<usize> = window_origins(h).collect();
    let origins_c: Vec<usize> = window_origins(w).collect();
    let n_windows = origins_r.len() * origins_c.len();
    let npix = h * w;
    let mut data = vec![0.0; n_windows * npix];
    let weight = 1.0 / (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut wi = 0;
    for &r0 in &origins_r {
        for &c0 in &origins_c {
            for r in r0..r0 + SSIM_WINDOW {
                for c in c0..c0 + SSIM_WINDOW {
                    data[wi * npix + r * w + c] = weight;
                }
            }
            wi += 1;
        }
    }
    Tensor::matrix(n_windows, npix, data)
}

/// Differentiable SSIM between two `[n_pixels, 1]` column nodes, using the
/// same window geometry and constants as [`ssim`]. `pool` must come from
/// [`window_pool_matrix`] for the image shape.
pub fn ssim_graph(g: &mut Graph, pool: NodeId, x: NodeId, y: NodeId) -> NodeId {
    let mx = g.matmul(pool, x);
    let my = g.matmul(pool, y);
    let xx = g.mul(x, x);
    let yy = g.mul(y, y);
    let xy = g.mul(x, y);
    let mxx = g.matmul(pool, xx);
    let myy = g.matmul(pool, yy);
    let mxy = g.matmul(pool, xy);
    let mx2 = g.mul(mx, mx);
    let my2 = g.mul(my, my);
    let vx = g.sub(mxx, mx2);
    let vy = g.sub(myy, my2);
    let mxmy = g.mul(mx, my);
    let cov = g.sub(mxy, mxmy);

    let lum_num = g.affine_scalar(mxmy, 2.0, SSIM_C1);
    let sum_m2 = g.add(mx2, my2);
    let lum_den = g.affine_scalar(sum_m2, 1.0, SSIM_C1);
    let cs_num = g.affine_scalar(cov, 2.0, SSIM_C2);
    let sum_v = g.add(vx, vy);
    let cs_den = g.affine_scalar(sum_v, 1.0, SSIM_C2);

    let num = g.mul(lum_num, cs_num);
    let den = g.mul(lum_den, cs_den);
    let per_window = g.div(num, den);
    g.mean_all(per_window)
}

/// Pearson correlation coefficient over flattened pixel values.
pub fn pcc(x: &RasterImage, y: &RasterImage) -> Result<f64> {
    if x.height() != y.height() || x.width() != y.width() {
        return Err(Error::ShapeMismatch {
            context: "pcc".into(),
            expected: vec![x.height(), x.width()],
            actual: vec![y.height(), y.width()],
        });
    }
    pearson(x.data(), y.data())
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    if saa <= 0.0 {
        return Err(Error::ConstantImage("first argument has zero variance".into()));
    }
    if sbb <= 0.0 {
        return Err(Error::ConstantImage("second argument has zero variance".into()));
    }
    Ok(sab / (saa.sqrt() * sbb.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::rng::seeded_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_gray(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut rng = seeded_rng(seed);
        GrayImage::new(h, w, (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect())
    }

    fn random_image(h: usize, w: usize, seed: u64) -> RasterImage {
        let mut rng = seeded_rng(seed);
        RasterImage::new(h, w, (0..h * w * 3).map(|_| rng.random_range(0.0..1.0)).collect())
    }

    #[test]
    fn ssim_self_is_exactly_one() {
        let x = random_gray(16, 16, 3);
        assert_eq!(ssim(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn ssim_is_symmetric() {
        let x = random_gray(20, 12, 4);
        let y = random_gray(20, 12, 5);
        assert_relative_eq!(ssim(&x, &y).unwrap(), ssim(&y, &x).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn inverted_half_black_half_white_is_negative() {
        // 8x16 with the left half black and the right half white; y = 1 - x.
        let mut data = vec![0.0; 8 * 16];
        for r in 0..8 {
            for c in 8..16 {
                data[r * 16 + c] = 1.0;
            }
        }
        let x = GrayImage::new(8, 16, data);
        let y = GrayImage::new(8, 16, x.data().iter().map(|v| 1.0 - v).collect());

        // Independent evaluation of the three windows (origins 0, 4, 8).
        let mut expected = 0.0;
        for &c0 in &[0usize, 4, 8] {
            let mut xs = Vec::with_capacity(64);
            for _r in 0..8 {
                for c in c0..c0 + 8 {
                    xs.push(if c >= 8 { 1.0 } else { 0.0 });
                }
            }
            let n = 64.0;
            let mx = xs.iter().sum::<f64>() / n;
            let my = 1.0 - mx;
            let vx = xs.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n;
            let vy = vx;
            let cov = xs.iter().map(|v| (v - mx) * ((1.0 - v) - my)).sum::<f64>() / n;
            expected += (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
        }
        expected /= 3.0;

        let got = ssim(&x, &y).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-12);
        assert!(got < 0.0, "ssim {got} should be negative");
    }

    #[test]
    fn ssim_invariant_under_shared_rotation_of_square_images() {
        let x = random_gray(16, 16, 6);
        let y = random_gray(16, 16, 7);
        let base = ssim(&x, &y).unwrap();
        let rot = ssim(&x.rot90(), &y.rot90()).unwrap();
        assert_relative_eq!(base, rot, epsilon = 1e-12);
    }

    #[test]
    fn ssim_magnitude_is_bounded() {
        for seed in 0..5 {
            let x = random_gray(12, 12, 100 + seed);
            let y = random_gray(12, 12, 200 + seed);
            let v = ssim(&x, &y).unwrap();
            assert!(v.abs() <= 1.0, "|ssim| = {v}");
        }
    }

    #[test]
    fn ssim_graph_matches_plain() {
        let x = random_gray(16, 12, 8);
        let y = random_gray(16, 12, 9);
        let mut g = Graph::new();
        let pool = window_pool_matrix(16, 12);
        let pool = g.constant(pool);
        let xn = g.constant(Tensor::col(x.data().to_vec()));
        let yn = g.constant(Tensor::col(y.data().to_vec()));
        let s = ssim_graph(&mut g, pool, xn, yn);
        assert_relative_eq!(g.value(s).item(), ssim(&x, &y).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn ssim_shape_mismatch_errors() {
        let x = random_gray(16, 16, 1);
        let y = random_gray(16, 12, 2);
        assert!(ssim(&x, &y).is_err());
    }

    #[test]
    fn pcc_self_and_affine() {
        let x = random_image(10, 10, 21);
        assert_relative_eq!(pcc(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        let y = RasterImage::new(10, 10, x.data().iter().map(|v| 0.3 * v + 0.2).collect());
        assert_relative_eq!(pcc(&x, &y).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pcc_negated_is_minus_one() {
        let x = random_image(10, 10, 22);
        let y = RasterImage::new(10, 10, x.data().iter().map(|v| -v + 1.0).collect());
        assert_relative_eq!(pcc(&x, &y).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn pcc_constant_image_errors() {
        let x = random_image(10, 10, 23);
        let flat = RasterImage::filled(10, 10, [0.5; 3]);
        assert!(matches!(pcc(&x, &flat).unwrap_err(), Error::ConstantImage(_)));
    }
}
