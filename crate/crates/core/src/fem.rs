//! P1 finite-element assembly, GMRF precision construction, and sparse
//! Cholesky field sampling.
//!
//! The precision of the field weights is
//!   Q_u = (C_κ + G_H)' C_κ^{-1} (C_κ + G_H) / (4π σ_u²),
//! with C_κ the mass-lumped κ²-weighted mass matrix, so Q_u keeps the
//! two-ring sparsity of the mesh.

use crate::aniso::AnisoMatrix;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::sparse::{EnvelopeCholesky, SparseSymMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Parameter-independent element integrals, assembled once per mesh.
/// The κ- and H-dependent operators are linear combinations of these.
#[derive(Debug, Clone)]
pub struct FemGeometry {
    /// Unit-κ mass matrix ⟨φ_i, φ_j⟩.
    pub mass: SparseSymMatrix,
    /// Row sums of the mass matrix (lumped diagonal).
    pub mass_lumped: Vec<f64>,
    /// ⟨∂x φ_i, ∂x φ_j⟩.
    pub gxx: SparseSymMatrix,
    /// ⟨∂x φ_i, ∂y φ_j⟩ + ⟨∂y φ_i, ∂x φ_j⟩.
    pub gxy: SparseSymMatrix,
    /// ⟨∂y φ_i, ∂y φ_j⟩.
    pub gyy: SparseSymMatrix,
}

/// Assembled operators for given (κ, H): the κ²-weighted mass, its
/// lumped diagonal, and the H-weighted stiffness.
#[derive(Debug, Clone)]
pub struct FemOperators {
    pub c: SparseSymMatrix,
    pub c_lumped: Vec<f64>,
    pub g: SparseSymMatrix,
}

/// Field weights u_i for the P1 expansion u(x) = Σ φ_i(x) u_i.
#[derive(Debug, Clone)]
pub struct LatentField {
    pub weights: Vec<f64>,
}

impl LatentField {
    /// Evaluate the field at a point by barycentric interpolation.
    pub fn eval(&self, mesh: &TriMesh, point: [f64; 2]) -> Result<f64> {
        let a = crate::mesh::interpolation_matrix(mesh, &[point])?;
        Ok(a.row(0).iter().map(|&(j, w)| w * self.weights[j]).sum())
    }
}

struct ElementBasis {
    area: f64,
    bx: [f64; 3],
    by: [f64; 3],
}

fn element_basis(mesh: &TriMesh, t: usize) -> Result<ElementBasis> {
    let [a, b, c] = mesh.triangles[t];
    let p = [mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]];
    let area = mesh.triangle_area(t);
    if area < 1e-14 {
        return Err(Error::DegenerateTriangle { index: t, area });
    }
    // grad φ_i = (b_i, c_i) / (2A) with b_i = y_j - y_k, c_i = x_k - x_j
    let mut bx = [0.0; 3];
    let mut by = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        bx[i] = (p[j][1] - p[k][1]) / (2.0 * area);
        by[i] = (p[k][0] - p[j][0]) / (2.0 * area);
    }
    Ok(ElementBasis { area, bx, by })
}

/// Assemble the parameter-independent integrals.
pub fn assemble_geometry(mesh: &TriMesh) -> Result<FemGeometry> {
    let n = mesh.n_nodes();
    let nt = mesh.triangles.len();
    let mut tm = Vec::with_capacity(9 * nt);
    let mut txx = Vec::with_capacity(9 * nt);
    let mut txy = Vec::with_capacity(9 * nt);
    let mut tyy = Vec::with_capacity(9 * nt);
    for t in 0..nt {
        let eb = element_basis(mesh, t)?;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                let (gi, gj) = (tri[i], tri[j]);
                let mass = eb.area / 12.0 * if i == j { 2.0 } else { 1.0 };
                tm.push((gi, gj, mass));
                txx.push((gi, gj, eb.area * eb.bx[i] * eb.bx[j]));
                txy.push((
                    gi,
                    gj,
                    eb.area * (eb.bx[i] * eb.by[j] + eb.by[i] * eb.bx[j]),
                ));
                tyy.push((gi, gj, eb.area * eb.by[i] * eb.by[j]));
            }
        }
    }
    let mass = SparseSymMatrix::from_triplets(n, &tm);
    let mut mass_lumped = vec![0.0; n];
    for (j, rows, vals) in mass.columns() {
        let _ = rows;
        mass_lumped[j] = vals.iter().sum();
    }
    Ok(FemGeometry {
        mass,
        mass_lumped,
        gxx: SparseSymMatrix::from_triplets(n, &txx),
        gxy: SparseSymMatrix::from_triplets(n, &txy),
        gyy: SparseSymMatrix::from_triplets(n, &tyy),
    })
}

impl FemGeometry {
    /// Operators for spatially constant parameters.
    pub fn operators(&self, kappa: f64, h: &AnisoMatrix) -> FemOperators {
        let k2 = kappa * kappa;
        FemOperators {
            c: self.mass.scaled(k2),
            c_lumped: self.mass_lumped.iter().map(|&m| k2 * m).collect(),
            g: SparseSymMatrix::combine3(&self.gxx, &self.gxy, &self.gyy, h.h11, h.h12, h.h22),
        }
    }
}

/// Assemble mass and stiffness for constant (κ, H).
pub fn assemble(mesh: &TriMesh, kappa: f64, h: &AnisoMatrix) -> Result<FemOperators> {
    Ok(assemble_geometry(mesh)?.operators(kappa, h))
}

/// Assemble with per-node κ² and H, averaged per triangle.
pub fn assemble_varying(
    mesh: &TriMesh,
    kappa_sq: &[f64],
    h: &[AnisoMatrix],
) -> Result<FemOperators> {
    let n = mesh.n_nodes();
    assert_eq!(kappa_sq.len(), n);
    assert_eq!(h.len(), n);
    let nt = mesh.triangles.len();
    let mut tc = Vec::with_capacity(9 * nt);
    let mut tg = Vec::with_capacity(9 * nt);
    for t in 0..nt {
        let eb = element_basis(mesh, t)?;
        let tri = mesh.triangles[t];
        let k2t = tri.iter().map(|&i| kappa_sq[i]).sum::<f64>() / 3.0;
        let (h11, h12, h22) = tri.iter().fold((0.0, 0.0, 0.0), |acc, &i| {
            (acc.0 + h[i].h11 / 3.0, acc.1 + h[i].h12 / 3.0, acc.2 + h[i].h22 / 3.0)
        });
        for i in 0..3 {
            for j in 0..3 {
                let (gi, gj) = (tri[i], tri[j]);
                tc.push((gi, gj, k2t * eb.area / 12.0 * if i == j { 2.0 } else { 1.0 }));
                let gxx = eb.area * eb.bx[i] * eb.bx[j];
                let gxy = eb.area * (eb.bx[i] * eb.by[j] + eb.by[i] * eb.bx[j]);
                let gyy = eb.area * eb.by[i] * eb.by[j];
                tg.push((gi, gj, h11 * gxx + h12 * gxy + h22 * gyy));
            }
        }
    }
    let c = SparseSymMatrix::from_triplets(n, &tc);
    let mut c_lumped = vec![0.0; n];
    for (j, _, vals) in c.columns() {
        c_lumped[j] = vals.iter().sum();
    }
    Ok(FemOperators {
        c,
        c_lumped,
        g: SparseSymMatrix::from_triplets(n, &tg),
    })
}

/// GMRF precision of the field weights for marginal deviation σ_u.
pub fn precision(ops: &FemOperators, sigma_u: f64) -> Result<SparseSymMatrix> {
    for (i, &d) in ops.c_lumped.iter().enumerate() {
        if !(d > 0.0) {
            return Err(Error::SingularMass { index: i });
        }
    }
    let dinv: Vec<f64> = ops.c_lumped.iter().map(|&d| 1.0 / d).collect();
    let gram = SparseSymMatrix::scaled_gram_with_diag(&ops.g, &dinv);
    let partial = gram.add_scaled(&ops.g, 1.0, 2.0);
    let q = partial.add_scaled(&SparseSymMatrix::from_diag(&ops.c_lumped), 1.0, 1.0);
    Ok(q.scaled(1.0 / (FOUR_PI * sigma_u * sigma_u)))
}

/// Draw one N(0, Q^{-1}) sample by solving L' u = z on the Cholesky
/// factor of Q.
pub fn sample_field(q: &SparseSymMatrix, seed: u64) -> Result<LatentField> {
    let chol = EnvelopeCholesky::factor(q)?;
    let mut rng = crate::rng::seeded(seed);
    let z: Vec<f64> = (0..q.n()).map(|_| rng.sample(StandardNormal)).collect();
    Ok(LatentField {
        weights: chol.solve_lt(&z),
    })
}

/// Same draw from an existing factor (callers doing many draws).
pub fn sample_field_from_factor<R: Rng>(chol: &EnvelopeCholesky, rng: &mut R) -> LatentField {
    let z: Vec<f64> = (0..chol.n()).map(|_| rng.sample(StandardNormal)).collect();
    LatentField {
        weights: chol.solve_lt(&z),
    }
}
