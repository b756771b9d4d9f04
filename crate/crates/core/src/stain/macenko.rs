//! Macenko stain separation: SVD plane of optical-density pixels, robust
//! angular percentiles for the stain vectors, and re-rendering of the
//! concentrations in a reference basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Optical density floor: avoids `ln(0)` on pure white pixels.
pub const OD_FLOOR: f64 = 1e-6;
/// Mean-OD threshold below which a pixel counts as background.
pub const TISSUE_OD_THRESHOLD: f64 = 0.15;
/// Minimum number of tissue pixels needed for a stable estimate.
pub const MIN_TISSUE_PIXELS: usize = 100;
/// Robust angular percentiles.
pub const ANGLE_PERCENTILE: f64 = 0.01;
/// Concentration scale percentile.
pub const SCALE_PERCENTILE: f64 = 0.99;

/// Two unit stain vectors in OD space plus their robust concentration scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StainBasis {
    /// Unit-norm, nonnegative OD-space stain vectors; index 0 is the
    /// hematoxylin-like vector (larger red-channel absorption).
    pub vectors: [[f64; 3]; 2],
    /// 99th-percentile concentration per stain over tissue pixels.
    pub scales: [f64; 2],
}

impl StainBasis {
    pub fn new(vectors: [[f64; 3]; 2], scales: [f64; 2]) -> Result<Self> {
        let mut vectors = vectors;
        for v in &mut vectors {
            for c in v.iter_mut() {
                *c = c.max(0.0);
            }
            let n = norm(*v);
            if n <= 0.0 {
                return Err(Error::InvalidArgument("zero-norm stain vector".into()));
            }
            for c in v.iter_mut() {
                *c /= n;
            }
        }
        let sep = angle_degrees(vectors[0], vectors[1]);
        if sep <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "stain vectors are {sep:.3} degrees apart; need > 1"
            )));
        }
        Ok(StainBasis { vectors, scales })
    }
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Angle between two 3-vectors in degrees.
pub fn angle_degrees(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = (dot3(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Per-pixel optical density: `-ln(max(v, 1e-6))` per channel.
pub fn optical_density(img: &RasterImage) -> Vec<[f64; 3]> {
    img.data()
        .chunks_exact(3)
        .map(|px| {
            [
                -(px[0].max(OD_FLOOR)).ln(),
                -(px[1].max(OD_FLOOR)).ln(),
                -(px[2].max(OD_FLOOR)).ln(),
            ]
        })
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix.
/// Returns (eigenvalues, eigenvectors as rows), sorted by descending value.
fn sym_eigen_3x3(mut m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _sweep in 0..50 {
        let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
        if off < 1e-24 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if m[p][q].abs() < 1e-30 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // rotate m
            let mut rot = m;
            for k in 0..3 {
                rot[p][k] = c * m[p][k] - s * m[q][k];
                rot[q][k] = s * m[p][k] + c * m[q][k];
            }
            let mut rot2 = rot;
            for k in 0..3 {
                rot2[k][p] = c * rot[k][p] - s * rot[k][q];
                rot2[k][q] = s * rot[k][p] + c * rot[k][q];
            }
            m = rot2;
            // rotate v
            for k in 0..3 {
                let vp = c * v[p][k] - s * v[q][k];
                let vq = s * v[p][k] + c * v[q][k];
                v[p][k] = vp;
                v[q][k] = vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| m[b][b].partial_cmp(&m[a][a]).unwrap());
    let values = [m[order[0]][order[0]], m[order[1]][order[1]], m[order[2]][order[2]]];
    let vectors = [v[order[0]], v[order[1]], v[order[2]]];
    (values, vectors)
}

/// Estimate the stain basis of an image via the Macenko procedure.
pub fn estimate_stain_basis(src: &RasterImage) -> Result<StainBasis> {
    let od = optical_density(src);
    let tissue: Vec<[f64; 3]> = od
        .iter()
        .copied()
        .filter(|p| (p[0] + p[1] + p[2]) / 3.0 >= TISSUE_OD_THRESHOLD)
        .collect();
    if tissue.len() < MIN_TISSUE_PIXELS {
        return Err(Error::BackgroundOnly {
            found: tissue.len(),
            required: MIN_TISSUE_PIXELS,
        });
    }

    // Scatter matrix (no centering, as in the original method).
    let mut scatter = [[0.0f64; 3]; 3];
    for p in &tissue {
        for i in 0..3 {
            for j in 0..3 {
                scatter[i][j] += p[i] * p[j];
            }
        }
    }
    let (_vals, vecs) = sym_eigen_3x3(scatter);
    let mut e1 = vecs[0];
    let mut e2 = vecs[1];

    // Orient the plane so projections land in a half-plane around e1.
    let mut mean = [0.0; 3];
    for p in &tissue {
        for c in 0..3 {
            mean[c] += p[c];
        }
    }
    if dot3(mean, e1) < 0.0 {
        for c in &mut e1 {
            *c = -*c;
        }
    }
    if dot3(mean, e2) < 0.0 {
        // keep the angle distribution roughly centered; sign of e2 only
        // mirrors the angles, so this is a determinism convention.
        for c in &mut e2 {
            *c = -*c;
        }
    }

    let mut angles: Vec<f64> = tissue
        .iter()
        .map(|p| dot3(*p, e2).atan2(dot3(*p, e1)))
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let phi_lo = percentile(&angles, ANGLE_PERCENTILE);
    let phi_hi = percentile(&angles, 1.0 - ANGLE_PERCENTILE);

    let make = |phi: f64| -> [f64; 3] {
        let (s, c) = phi.sin_cos();
        [
            c * e1[0] + s * e2[0],
            c * e1[1] + s * e2[1],
            c * e1[2] + s * e2[2],
        ]
    };
    let va = make(phi_lo);
    let vb = make(phi_hi);
    // hematoxylin-like first: larger red-channel OD
    let (vh, ve) = if va[0] >= vb[0] { (va, vb) } else { (vb, va) };

    let mut basis = StainBasis::new([vh, ve], [1.0, 1.0])?;
    let conc = concentrations(&tissue, &basis);
    let mut c0: Vec<f64> = conc.iter().map(|c| c[0]).collect();
    let mut c1: Vec<f64> = conc.iter().map(|c| c[1]).collect();
    c0.sort_by(|a, b| a.partial_cmp(b).unwrap());
    c1.sort_by(|a, b| a.partial_cmp(b).unwrap());
    basis.scales = [
        percentile(&c0, SCALE_PERCENTILE).max(1e-8),
        percentile(&c1, SCALE_PERCENTILE).max(1e-8),
    ];
    Ok(basis)
}

/// Least-squares concentrations of each OD pixel in the basis (clamped
/// nonnegative).
pub fn concentrations(od: &[[f64; 3]], basis: &StainBasis) -> Vec<[f64; 2]> {
    let v0 = basis.vectors[0];
    let v1 = basis.vectors[1];
    let a = dot3(v0, v0);
    let b = dot3(v0, v1);
    let d = dot3(v1, v1);
    let det = a * d - b * b;
    od.iter()
        .map(|p| {
            let r0 = dot3(*p, v0);
            let r1 = dot3(*p, v1);
            let c0 = (d * r0 - b * r1) / det;
            let c1 = (a * r1 - b * r0) / det;
            [c0.max(0.0), c1.max(0.0)]
        })
        .collect()
}

/// Normalize `src` into the reference basis. Returns the re-rendered image
/// and the estimated source basis.
pub fn macenko_normalize(
    src: &RasterImage,
    reference: &StainBasis,
) -> Result<(RasterImage, StainBasis)> {
    let src_basis = estimate_stain_basis(src)?;
    let od = optical_density(src);
    let conc = concentrations(&od, &src_basis);
    let mut data = Vec::with_capacity(src.data().len());
    let gain = [
        reference.scales[0] / src_basis.scales[0],
        reference.scales[1] / src_basis.scales[1],
    ];
    for c in conc {
        let c0 = c[0] * gain[0];
        let c1 = c[1] * gain[1];
        for ch in 0..3 {
            let od_new = c0 * reference.vectors[0][ch] + c1 * reference.vectors[1][ch];
            data.push((-od_new).exp().clamp(0.0, 1.0));
        }
    }
    Ok((RasterImage::new(src.height(), src.width(), data), src_basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_recovers_known_eigensystem() {
        // diag(3, 2, 1) rotated by a permutation is already diagonal; use a
        // matrix with known decomposition: A = Q diag Q^T with Q a rotation
        // in the (0,1) plane by 30 degrees.
        let (s, c) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
        let q = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
        let d = [5.0, 2.0, 0.5];
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    a[i][j] += q[i][k] * d[k] * q[j][k];
                }
            }
        }
        let (vals, vecs) = sym_eigen_3x3(a);
        assert_relative_eq!(vals[0], 5.0, epsilon = 1e-10);
        assert_relative_eq!(vals[1], 2.0, epsilon = 1e-10);
        assert_relative_eq!(vals[2], 0.5, epsilon = 1e-10);
        // first eigenvector is the first column of Q up to sign
        let e = vecs[0];
        let expected = [c, s, 0.0];
        let align = dot3(e, expected).abs();
        assert_relative_eq!(align, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn pure_background_white_image_errors() {
        let img = RasterImage::filled(32, 32, [0.99, 0.98, 0.99]);
        let err = estimate_stain_basis(&img).unwrap_err();
        assert!(matches!(err, Error::BackgroundOnly { .. }), "{err}");
    }

    #[test]
    fn basis_requires_angular_separation() {
        let v = [0.6, 0.7, 0.3];
        let err = StainBasis::new([v, v], [1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("degrees"), "{err}");
    }
}
