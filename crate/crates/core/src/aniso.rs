//! Identifiable half-angle parameterization of the anisotropy matrix.
//!
//! A vector v encodes a symmetric positive-definite matrix H_v with
//! determinant 1: the eigenvector for the larger eigenvalue e^{|v|} points
//! along the half-angle version of v, so v and the matrix are in smooth
//! one-to-one correspondence (unlike the (γ, β, angle) parameterization,
//! which cannot recover the sign of the direction).

use crate::error::{Error, Result};
use crate::special::sinhc;
use serde::{Deserialize, Serialize};

/// Anisotropy vector; the base (isotropic) model is v = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisoVector {
    pub v1: f64,
    pub v2: f64,
}

impl AnisoVector {
    pub fn new(v1: f64, v2: f64) -> Self {
        AnisoVector { v1, v2 }
    }

    pub fn zero() -> Self {
        AnisoVector { v1: 0.0, v2: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        self.v1.hypot(self.v2)
    }

    /// Argument in [0, 2π).
    pub fn arg(&self) -> f64 {
        let a = self.v2.atan2(self.v1);
        if a < 0.0 {
            a + 2.0 * std::f64::consts::PI
        } else {
            a
        }
    }

    /// Anisotropy ratio a = e^{|v|}, the ratio of principal correlation
    /// ranges.
    pub fn ratio(&self) -> f64 {
        self.norm().exp()
    }
}

/// Symmetric positive-definite 2x2 matrix with determinant 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisoMatrix {
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
}

impl AnisoMatrix {
    pub fn identity() -> Self {
        AnisoMatrix {
            h11: 1.0,
            h12: 0.0,
            h22: 1.0,
        }
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12 * self.h12
    }

    /// Quadratic form x' H x.
    pub fn quad(&self, x: [f64; 2]) -> f64 {
        self.h11 * x[0] * x[0] + 2.0 * self.h12 * x[0] * x[1] + self.h22 * x[1] * x[1]
    }

    pub fn mul(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.h11 * x[0] + self.h12 * x[1],
            self.h12 * x[0] + self.h22 * x[1],
        ]
    }

    pub fn max_entry(&self) -> f64 {
        self.h11.abs().max(self.h12.abs()).max(self.h22.abs())
    }

    /// Largest eigenvalue; the smaller one is its reciprocal since
    /// det = 1 (computing it that way avoids cancellation for strong
    /// anisotropy).
    pub fn lambda_max(&self) -> f64 {
        let t = 0.5 * (self.h11 + self.h22);
        let d = 0.5 * (self.h11 - self.h22);
        t + (d * d + self.h12 * self.h12).sqrt()
    }
}

/// Half-angle version of v: same norm, half the argument, so the result
/// lies in the closed upper half-plane.
pub fn half_angle(v: &AnisoVector) -> AnisoVector {
    let r = v.norm();
    if r == 0.0 {
        return AnisoVector::zero();
    }
    let half = v.arg() / 2.0;
    AnisoVector::new(r * half.cos(), r * half.sin())
}

/// The anisotropy matrix H_v = cosh(|v|) I + sinh(|v|)/|v| [[v1, v2], [v2, -v1]].
pub fn h_matrix(v: &AnisoVector) -> AnisoMatrix {
    let r = v.norm();
    let c = r.cosh();
    let s = sinhc(r);
    AnisoMatrix {
        h11: c + s * v.v1,
        h12: s * v.v2,
        h22: c - s * v.v1,
    }
}

/// Inverse of [`h_matrix`]: recover v from a symmetric positive-definite
/// determinant-1 matrix.
///
/// The eigenvector of the larger eigenvalue is normalized to argument in
/// [0, π) before the angle is doubled, which pins down the unique
/// representative.
pub fn v_from_h(h: &AnisoMatrix) -> Result<AnisoVector> {
    let det = h.det();
    // the determinant of a stored det-1 matrix is only computable to
    // ~eps * max_entry^2, so the 1e-9 tolerance is floored at that scale
    let scale = 1.0 + h.max_entry() * h.max_entry();
    if (det - 1.0).abs() > (1e-9_f64).max(2.0e-13 * scale) {
        return Err(Error::NotUnitDeterminant { det });
    }
    if h.h11 <= 0.0 || det <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    let lmax = h.lambda_max();
    let r = lmax.ln();
    if r < 1e-12 {
        return Ok(AnisoVector::zero());
    }
    // eigenvector for lmax: pick the better-conditioned of the two
    // candidate expressions
    let (mut wx, mut wy) = if h.h11 >= h.h22 {
        (lmax - h.h22, h.h12)
    } else {
        (h.h12, lmax - h.h11)
    };
    // normalize sign so the argument lies in [0, π)
    if wy < 0.0 || (wy == 0.0 && wx < 0.0) {
        wx = -wx;
        wy = -wy;
    }
    let alpha = wy.atan2(wx);
    Ok(AnisoVector::new(
        r * (2.0 * alpha).cos(),
        r * (2.0 * alpha).sin(),
    ))
}

/// The (γ, β, unit vector) parameters of the older non-identifiable
/// parameterization that reproduce the same matrix: γ I + β w w' = H_v.
/// The direction is undefined at v = 0.
pub fn legacy_params(v: &AnisoVector) -> (f64, f64, Option<AnisoVector>) {
    let r = v.norm();
    let gamma = (-r).exp();
    let beta = (1.0 - gamma * gamma) / gamma;
    if r == 0.0 {
        return (1.0, 0.0, None);
    }
    let tilde = half_angle(v);
    (
        gamma,
        beta,
        Some(AnisoVector::new(tilde.v1 / r, tilde.v2 / r)),
    )
}

/// Stationary model parameters: inverse correlation length κ, anisotropy
/// vector v, and marginal standard deviation σ_u.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StationaryParams {
    pub kappa: f64,
    pub v: AnisoVector,
    pub sigma_u: f64,
}

impl StationaryParams {
    pub fn new(kappa: f64, v: AnisoVector, sigma_u: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() || !(sigma_u > 0.0) || !sigma_u.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "kappa and sigma_u must be positive and finite, got {kappa}, {sigma_u}"
            )));
        }
        Ok(StationaryParams { kappa, v, sigma_u })
    }

    pub fn isotropic(kappa: f64, sigma_u: f64) -> Result<Self> {
        Self::new(kappa, AnisoVector::zero(), sigma_u)
    }

    /// Empirical correlation range ρ = √8 / κ (correlation ≈ 0.14 there).
    pub fn range(&self) -> f64 {
        8.0f64.sqrt() / self.kappa
    }

    pub fn h(&self) -> AnisoMatrix {
        h_matrix(&self.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn half_angle_examples() {
        let z = half_angle(&AnisoVector::zero());
        assert_eq!((z.v1, z.v2), (0.0, 0.0));
        let e1 = half_angle(&AnisoVector::new(1.0, 0.0));
        assert!(close(e1.v1, 1.0, 1e-15) && close(e1.v2, 0.0, 1e-15));
        // α = π/2 halves to π/4
        let e2 = half_angle(&AnisoVector::new(0.0, 1.0));
        let s = 0.5f64.sqrt();
        assert!(close(e2.v1, s, 1e-15) && close(e2.v2, s, 1e-15));
        assert!(close(e2.norm(), 1.0, 1e-15));
    }

    #[test]
    fn half_angle_stays_in_upper_half_plane() {
        for k in 0..64 {
            let a = 2.0 * std::f64::consts::PI * (k as f64 + 0.3) / 64.0;
            let v = AnisoVector::new(2.0 * a.cos(), 2.0 * a.sin());
            let h = half_angle(&v);
            let arg = h.v2.atan2(h.v1);
            assert!((0.0..std::f64::consts::PI).contains(&arg), "arg = {arg}");
            assert!(close(h.norm(), v.norm(), 1e-12));
        }
    }

    #[test]
    fn h_matrix_examples() {
        let id = h_matrix(&AnisoVector::zero());
        assert_eq!((id.h11, id.h12, id.h22), (1.0, 0.0, 1.0));

        let ax = h_matrix(&AnisoVector::new(1.0, 0.0));
        assert!(close(ax.h11, 1.0f64.exp(), 1e-14));
        assert!(close(ax.h22, (-1.0f64).exp(), 1e-14));
        assert!(close(ax.h12, 0.0, 1e-14));

        let diag = h_matrix(&AnisoVector::new(0.0, 1.0));
        assert!(close(diag.h11, 1.0f64.cosh(), 1e-14));
        assert!(close(diag.h12, 1.0f64.sinh(), 1e-14));
        assert!(close(diag.h22, 1.0f64.cosh(), 1e-14));
        // eigenvector (1,1)/√2 has eigenvalue e
        let y = diag.mul([1.0, 1.0]);
        assert!(close(y[0], 1.0f64.exp(), 1e-12) && close(y[1], 1.0f64.exp(), 1e-12));
    }

    #[test]
    fn v_from_h_examples() {
        let v = v_from_h(&AnisoMatrix::identity()).unwrap();
        assert_eq!((v.v1, v.v2), (0.0, 0.0));

        let v = v_from_h(&AnisoMatrix {
            h11: 1.0f64.exp(),
            h12: 0.0,
            h22: (-1.0f64).exp(),
        })
        .unwrap();
        assert!(close(v.v1, 1.0, 1e-12) && close(v.v2, 0.0, 1e-12));

        let v = v_from_h(&AnisoMatrix {
            h11: 1.0f64.cosh(),
            h12: 1.0f64.sinh(),
            h22: 1.0f64.cosh(),
        })
        .unwrap();
        assert!(close(v.v1, 0.0, 1e-12) && close(v.v2, 1.0, 1e-12));
    }

    #[test]
    fn v_from_h_rejects_bad_input() {
        let scaled = AnisoMatrix {
            h11: 2.0,
            h12: 0.0,
            h22: 2.0,
        };
        assert!(matches!(
            v_from_h(&scaled),
            Err(Error::NotUnitDeterminant { .. })
        ));
        let indef = AnisoMatrix {
            h11: -1.0,
            h12: 0.0,
            h22: -1.0,
        };
        assert!(matches!(v_from_h(&indef), Err(_)));
    }

    #[test]
    fn legacy_params_examples() {
        let (g, b, w) = legacy_params(&AnisoVector::new(1.0, 0.0));
        assert!(close(g, (-1.0f64).exp(), 1e-14));
        assert!(close(b, 2.0 * 1.0f64.sinh(), 1e-12));
        let w = w.unwrap();
        assert!(close(w.v1, 1.0, 1e-14) && close(w.v2, 0.0, 1e-14));

        let (g, b, w) = legacy_params(&AnisoVector::zero());
        assert_eq!((g, b), (1.0, 0.0));
        assert!(w.is_none());
    }

    #[test]
    fn legacy_params_reconstruct_h() {
        for &(v1, v2) in &[(1.0, 0.0), (0.0, 1.0), (-0.7, 0.4), (2.0, -3.0)] {
            let v = AnisoVector::new(v1, v2);
            let (g, b, w) = legacy_params(&v);
            let w = w.unwrap();
            let h = h_matrix(&v);
            assert!(close(g + b * w.v1 * w.v1, h.h11, 1e-12));
            assert!(close(b * w.v1 * w.v2, h.h12, 1e-12));
            assert!(close(g + b * w.v2 * w.v2, h.h22, 1e-12));
        }
    }

    #[test]
    fn continuity_at_origin() {
        for k in 0..8 {
            let a = std::f64::consts::PI * k as f64 / 4.0;
            for &eps in &[1e-3, 1e-6, 1e-10] {
                let h = h_matrix(&AnisoVector::new(eps * a.cos(), eps * a.sin()));
                let d = (h.h11 - 1.0)
                    .abs()
                    .max(h.h12.abs())
                    .max((h.h22 - 1.0).abs());
                assert!(d <= 2.0 * eps * eps.exp(), "d = {d} at eps = {eps}");
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_and_det(r in 0.0f64..10.0, angle in 0.0f64..(2.0 * std::f64::consts::PI)) {
            let v = AnisoVector::new(r * angle.cos(), r * angle.sin());
            let h = h_matrix(&v);
            let lmax2 = h.lambda_max() * h.lambda_max();
            prop_assert!((h.det() - 1.0).abs() < 1e-12 * (1.0 + lmax2));
            let back = v_from_h(&h).unwrap();
            prop_assert!((back.v1 - v.v1).abs() < 1e-9 * (1.0 + r));
            prop_assert!((back.v2 - v.v2).abs() < 1e-9 * (1.0 + r));
            // eigenvalue ratio = e^{2|v|}
            let lmax = h.lambda_max();
            let ratio = lmax * lmax; // lmin = 1/lmax
            prop_assert!(((ratio / (2.0 * r).exp()) - 1.0).abs() < 1e-10);
        }

        #[test]
        fn distinct_vectors_give_distinct_matrices(
            r in 0.0f64..5.0, angle in 0.0f64..(2.0 * std::f64::consts::PI),
            r2 in 0.0f64..5.0, angle2 in 0.0f64..(2.0 * std::f64::consts::PI),
        ) {
            let v = AnisoVector::new(r * angle.cos(), r * angle.sin());
            let w = AnisoVector::new(r2 * angle2.cos(), r2 * angle2.sin());
            let dv = ((v.v1 - w.v1).powi(2) + (v.v2 - w.v2).powi(2)).sqrt();
            if dv >= 1e-8 {
                let hv = h_matrix(&v);
                let hw = h_matrix(&w);
                let dh = (hv.h11 - hw.h11).abs().max((hv.h12 - hw.h12).abs()).max((hv.h22 - hw.h22).abs());
                prop_assert!(dh > 1e-12, "dv = {dv}, dh = {dh}");
            }
        }
    }
}
