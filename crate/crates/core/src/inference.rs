//! Posterior inference for the five-parameter model: latent Gaussian
//! algebra, unnormalized log posterior, MAP, Gaussian approximation at
//! the mode, and Pareto-smoothed self-normalized importance sampling.
//!
//! The unnormalized log posterior is
//!   ℓ̃(θ) = ℓ(θ) + ℓ(u|θ) + ℓ(y|u,θ) - ℓ(u|θ,y),
//! which is independent of the u it is evaluated at; u is taken at the
//! conditional mean, where the last quadratic vanishes. A failed
//! factorization during optimization or importance sampling is treated
//! as zero posterior mass.

use crate::aniso::{AnisoVector, StationaryParams};
use crate::error::{Error, Result};
use crate::fem::{assemble_geometry, FemGeometry};
use crate::mesh::TriMesh;
use crate::optim::{minimize, OptimOptions};
use crate::prior::{distance, PriorSpec};
use crate::sparse::{EnvelopeCholesky, RowMatrix, SparseSymMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Inference state in log/identity coordinates
/// (log κ, v1, v2, log σ_u, log σ_ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub log_kappa: f64,
    pub v1: f64,
    pub v2: f64,
    pub log_sigma_u: f64,
    pub log_sigma_eps: f64,
}

impl Theta {
    pub fn from_array(x: [f64; 5]) -> Self {
        Theta {
            log_kappa: x[0],
            v1: x[1],
            v2: x[2],
            log_sigma_u: x[3],
            log_sigma_eps: x[4],
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.log_kappa,
            self.v1,
            self.v2,
            self.log_sigma_u,
            self.log_sigma_eps,
        ]
    }

    pub fn kappa(&self) -> f64 {
        self.log_kappa.exp()
    }

    pub fn v(&self) -> AnisoVector {
        AnisoVector::new(self.v1, self.v2)
    }

    pub fn sigma_u(&self) -> f64 {
        self.log_sigma_u.exp()
    }

    pub fn sigma_eps(&self) -> f64 {
        self.log_sigma_eps.exp()
    }

    pub fn field_params(&self) -> Result<StationaryParams> {
        StationaryParams::new(self.kappa(), self.v(), self.sigma_u())
    }

    /// Complexity d(κ, v) of this parameter point.
    pub fn complexity(&self) -> f64 {
        distance(self.kappa(), &self.v())
    }

    pub const NAMES: [&'static str; 5] =
        ["log_kappa", "v1", "v2", "log_sigma_u", "log_sigma_eps"];
}

/// Exponential priors on σ_u and σ_ε (rates from tail quantiles).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SigmaPriors {
    pub lambda_sigma_u: f64,
    pub lambda_sigma_eps: f64,
}

impl SigmaPriors {
    pub fn from_quantiles(sigma_u0: f64, prob_u: f64, sigma_eps0: f64, prob_eps: f64) -> Self {
        SigmaPriors {
            lambda_sigma_u: -prob_u.ln() / sigma_u0,
            lambda_sigma_eps: -prob_eps.ln() / sigma_eps0,
        }
    }

    /// Log prior density in log coordinates (Exp on σ plus Jacobian).
    fn log_density(&self, log_sigma_u: f64, log_sigma_eps: f64) -> f64 {
        let part = |lambda: f64, t: f64| lambda.ln() - lambda * t.exp() + t;
        part(self.lambda_sigma_u, log_sigma_u) + part(self.lambda_sigma_eps, log_sigma_eps)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let e1: f64 = rng.random();
        let e2: f64 = rng.random();
        (
            -e1.ln() / self.lambda_sigma_u,
            -e2.ln() / self.lambda_sigma_eps,
        )
    }
}

/// Observations y = A u + ε. The columns of A cover the latent field
/// weights first and any fixed-effect coefficients last; A'A and A'y are
/// cached for the posterior updates.
#[derive(Debug, Clone)]
pub struct ObsModel {
    pub a: RowMatrix,
    pub y: Vec<f64>,
    ata: SparseSymMatrix,
    aty: Vec<f64>,
}

impl ObsModel {
    pub fn new(a: RowMatrix, y: Vec<f64>) -> Self {
        assert_eq!(a.nrows(), y.len());
        let ata = a.gram();
        let aty = a.t_matvec(&y);
        ObsModel { a, y, ata, aty }
    }

    pub fn empty(ncols: usize) -> Self {
        Self::new(RowMatrix::new(ncols, Vec::new()), Vec::new())
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    pub fn ata(&self) -> &SparseSymMatrix {
        &self.ata
    }

    /// Refit oracle helper: the same observations with row i removed.
    pub fn without_observation(&self, i: usize) -> ObsModel {
        let mut y = self.y.clone();
        y.remove(i);
        ObsModel::new(self.a.without_row(i), y)
    }
}

/// Prior precision builder for the latent vector: the SPDE field
/// weights, optionally extended by fixed-effect coefficients with
/// precision τ_β (placed after the field block so the Cholesky envelope
/// stays narrow).
#[derive(Debug, Clone)]
pub struct LatentModel {
    geom: FemGeometry,
    n_nodes: usize,
    n_fixed: usize,
    tau_beta: f64,
}

impl LatentModel {
    pub fn from_mesh(mesh: &TriMesh) -> Result<Self> {
        Ok(LatentModel {
            geom: assemble_geometry(mesh)?,
            n_nodes: mesh.n_nodes(),
            n_fixed: 0,
            tau_beta: 0.0,
        })
    }

    pub fn with_fixed_effects(mesh: &TriMesh, tau_beta: f64) -> Result<Self> {
        if !(tau_beta > 0.0) {
            return Err(Error::InvalidConfig("tau_beta must be positive".into()));
        }
        Ok(LatentModel {
            geom: assemble_geometry(mesh)?,
            n_nodes: mesh.n_nodes(),
            n_fixed: 2,
            tau_beta,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_nodes + self.n_fixed
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_fixed(&self) -> usize {
        self.n_fixed
    }

    /// SPDE precision of the field weights alone.
    pub fn field_precision(&self, theta: &Theta) -> Result<SparseSymMatrix> {
        let params = theta.field_params()?;
        let ops = self.geom.operators(params.kappa, &params.h());
        crate::fem::precision(&ops, params.sigma_u)
    }

    /// Prior precision of the full latent vector.
    pub fn precision(&self, theta: &Theta) -> Result<SparseSymMatrix> {
        let q_u = self.field_precision(theta)?;
        if self.n_fixed == 0 {
            return Ok(q_u);
        }
        let n = self.dim();
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(q_u.nnz() + self.n_fixed);
        for (j, rows, vals) in q_u.columns() {
            for (&i, &v) in rows.iter().zip(vals) {
                triplets.push((i, j, v));
            }
        }
        for k in 0..self.n_fixed {
            triplets.push((self.n_nodes + k, self.n_nodes + k, self.tau_beta));
        }
        Ok(SparseSymMatrix::from_triplets(n, &triplets))
    }
}

/// Conditional Gaussian of the latent vector given observations.
#[derive(Debug)]
pub struct LatentPosterior {
    pub q_post: SparseSymMatrix,
    pub mean: Vec<f64>,
    pub chol: EnvelopeCholesky,
}

/// Q_post = Q_prior + q_ε A'A and mean = Q_post^{-1} (q_ε A'y).
pub fn latent_posterior(
    q_prior: &SparseSymMatrix,
    obs: &ObsModel,
    q_eps: f64,
) -> Result<LatentPosterior> {
    let q_post = q_prior.add_scaled(&obs.ata, 1.0, q_eps);
    let chol = EnvelopeCholesky::factor(&q_post)?;
    let rhs: Vec<f64> = obs.aty.iter().map(|v| q_eps * v).collect();
    let mean = chol.solve_refined(&q_post, &rhs);
    Ok(LatentPosterior { q_post, mean, chol })
}

/// The Gaussian part ℓ(u|θ) + ℓ(y|u,θ) - ℓ(u|θ,y) of the log posterior,
/// algebraically equal to the marginal log likelihood log π(y|θ) for any
/// u; evaluated at u = posterior mean unless a u is supplied.
pub fn log_marginal_gaussian(
    q_prior: &SparseSymMatrix,
    obs: &ObsModel,
    q_eps: f64,
    u_at: Option<&[f64]>,
) -> Result<f64> {
    let chol_prior = EnvelopeCholesky::factor(q_prior)?;
    let lp = latent_posterior(q_prior, obs, q_eps)?;
    let n = q_prior.n() as f64;
    let m = obs.m() as f64;
    let u = u_at.unwrap_or(&lp.mean);
    let quad_prior = q_prior.quad_form(u);
    let ll_u = 0.5 * (chol_prior.logdet() - quad_prior - n * LN_2PI);
    let au = obs.a.matvec(u);
    let rss: f64 = obs
        .y
        .iter()
        .zip(&au)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    let ll_y = 0.5 * (m * q_eps.ln() - q_eps * rss - m * LN_2PI);
    let diff: Vec<f64> = u.iter().zip(&lp.mean).map(|(a, b)| a - b).collect();
    let ll_u_post = 0.5 * (lp.chol.logdet() - lp.q_post.quad_form(&diff) - n * LN_2PI);
    Ok(ll_u + ll_y - ll_u_post)
}

/// Map estimate outcome; `converged = false` means the evaluation budget
/// ran out and the best point so far is returned.
#[derive(Debug, Clone)]
pub struct MapResult {
    pub theta: Theta,
    pub log_posterior: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub evals: usize,
}

/// Gaussian approximation N(mode, cov) on the active parameters
/// (the isotropic model pins v and works in 3 dimensions).
#[derive(Debug, Clone)]
pub struct GaussianApprox {
    pub mode: Theta,
    pub active: Vec<usize>,
    /// Row-major d x d covariance over the active coordinates.
    pub cov: Vec<f64>,
    chol_cov: Vec<f64>,
    logdet_cov: f64,
}

impl GaussianApprox {
    pub fn new(mode: Theta, active: Vec<usize>, cov: Vec<f64>) -> Result<Self> {
        let d = active.len();
        assert_eq!(cov.len(), d * d);
        let mut chol = cov.clone();
        if !dense::cholesky_in_place(d, &mut chol) {
            return Err(Error::HessianIndefinite);
        }
        let logdet_cov = 2.0 * (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>();
        Ok(GaussianApprox {
            mode,
            active,
            cov,
            chol_cov: chol,
            logdet_cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.active.len()
    }

    /// Marginal standard deviation of active coordinate k.
    pub fn std(&self, k: usize) -> f64 {
        self.cov[k * self.dim() + k].sqrt()
    }

    /// Draw θ ~ N(mode, cov) and return it with its log density.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Theta, f64) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = self.mode.as_array();
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.chol_cov[i * d + j] * z[j];
            }
            x[self.active[i]] += s;
        }
        let quad: f64 = z.iter().map(|z| z * z).sum();
        let log_density = -0.5 * (quad + self.logdet_cov + d as f64 * LN_2PI);
        (Theta::from_array(x), log_density)
    }

    /// Log density at an arbitrary point (solves against the factor).
    pub fn log_density(&self, theta: &Theta) -> f64 {
        let d = self.dim();
        let m = self.mode.as_array();
        let t = theta.as_array();
        let diff: Vec<f64> = self.active.iter().map(|&i| t[i] - m[i]).collect();
        let quad = dense::quad_form_inv(d, &self.chol_cov, &diff);
        -0.5 * (quad + self.logdet_cov + d as f64 * LN_2PI)
    }
}

/// Importance-sample representation of the posterior.
#[derive(Debug, Clone)]
pub struct WeightedPosterior {
    pub samples: Vec<Theta>,
    pub weights: Vec<f64>,
    pub pareto_k: f64,
    pub ess: f64,
}

impl WeightedPosterior {
    /// CSV export: `log_kappa,v1,v2,log_sigma_u,log_sigma_eps,weight`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "log_kappa,v1,v2,log_sigma_u,log_sigma_eps,weight")?;
        for (t, wt) in self.samples.iter().zip(&self.weights) {
            let a = t.as_array();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                crate::spectral::fmt9(a[0]),
                crate::spectral::fmt9(a[1]),
                crate::spectral::fmt9(a[2]),
                crate::spectral::fmt9(a[3]),
                crate::spectral::fmt9(a[4]),
                crate::spectral::fmt9(*wt)
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut samples = Vec::new();
        let mut weights = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidConfig(e.to_string()))?;
            if ln == 0 {
                continue;
            }
            let parts: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", ln + 1)))?;
            if parts.len() != 6 {
                return Err(Error::InvalidConfig(format!(
                    "line {}: expected 6 columns",
                    ln + 1
                )));
            }
            samples.push(Theta::from_array([
                parts[0], parts[1], parts[2], parts[3], parts[4],
            ]));
            weights.push(parts[5]);
        }
        let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        Ok(WeightedPosterior {
            samples,
            weights,
            pareto_k: f64::NAN,
            ess,
        })
    }
}

/// A posterior inference problem: latent model, observations, the
/// (κ, v) prior under study, and the σ priors.
pub struct PosteriorProblem<'a> {
    pub latent: &'a LatentModel,
    pub obs: &'a ObsModel,
    pub prior: PriorSpec,
    pub sigma_priors: SigmaPriors,
}

impl PosteriorProblem<'_> {
    /// Active coordinate indices (v pinned to zero for the isotropic
    /// model).
    pub fn active(&self) -> Vec<usize> {
        if self.prior.is_isotropic() {
            vec![0, 3, 4]
        } else {
            vec![0, 1, 2, 3, 4]
        }
    }

    fn log_prior(&self, theta: &Theta) -> f64 {
        self.prior
            .log_density_log_coords(theta.log_kappa, &theta.v())
            + self
                .sigma_priors
                .log_density(theta.log_sigma_u, theta.log_sigma_eps)
    }

    /// Unnormalized log posterior; -∞ when the prior excludes θ or a
    /// factorization fails (zero posterior mass).
    pub fn log_posterior(&self, theta: &Theta) -> f64 {
        let lp = self.log_prior(theta);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.log_posterior_at(theta, None) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("treating θ = {theta:?} as zero posterior mass: {e}");
                f64::NEG_INFINITY
            }
        }
    }

    /// Same, at an explicit latent value u (the result is independent of
    /// u up to roundoff).
    pub fn log_posterior_at(&self, theta: &Theta, u: Option<&[f64]>) -> Result<f64> {
        let q_prior = self.latent.precision(theta)?;
        let q_eps = (-2.0 * theta.log_sigma_eps).exp();
        let gaussian = log_marginal_gaussian(&q_prior, self.obs, q_eps, u)?;
        Ok(self.log_prior(theta) + gaussian)
    }

    /// Conditional Gaussian of the latent vector at θ.
    pub fn latent_posterior(&self, theta: &Theta) -> Result<LatentPosterior> {
        let q_prior = self.latent.precision(theta)?;
        latent_posterior(&q_prior, self.obs, (-2.0 * theta.log_sigma_eps).exp())
    }

    /// MAP estimate from the given initial point.
    pub fn map_estimate(&self, init: &Theta, opts: &OptimOptions) -> MapResult {
        let active = self.active();
        let init_arr = init.as_array();
        let x0: Vec<f64> = active.iter().map(|&i| init_arr[i]).collect();
        let embed = |x: &[f64]| {
            let mut arr = [0.0; 5];
            for (k, &i) in active.iter().enumerate() {
                arr[i] = x[k];
            }
            Theta::from_array(arr)
        };
        let mut neg = |x: &[f64]| -self.log_posterior(&embed(x));
        let r = minimize(&mut neg, &x0, opts);
        MapResult {
            theta: embed(&r.x),
            log_posterior: -r.fval,
            converged: r.converged,
            grad_norm: r.grad_norm,
            evals: r.evals,
        }
    }

    /// Gaussian approximation at the mode: covariance is the inverse of
    /// minus the central-difference Hessian, jittered to positive
    /// definite if needed.
    pub fn gaussian_approx(&self, theta_hat: &Theta) -> Result<GaussianApprox> {
        let active = self.active();
        let hat = theta_hat.as_array();
        let x0: Vec<f64> = active.iter().map(|&i| hat[i]).collect();
        let f = |x: &[f64]| {
            let mut arr = [0.0; 5];
            for (k, &i) in active.iter().enumerate() {
                arr[i] = x[k];
            }
            self.log_posterior(&Theta::from_array(arr))
        };
        let d = active.len();
        let mut m = neg_hessian(&f, &x0)?;
        // symmetrize (central differences are symmetric up to roundoff)
        for i in 0..d {
            for j in 0..i {
                let s = 0.5 * (m[i * d + j] + m[j * d + i]);
                m[i * d + j] = s;
                m[j * d + i] = s;
            }
        }
        let max_diag = (0..d).map(|i| m[i * d + i]).fold(0.0f64, f64::max);
        let mut jitter = 0.0;
        let cov = loop {
            let mut trial = m.clone();
            for i in 0..d {
                trial[i * d + i] += jitter;
            }
            if let Some(inv) = dense::inverse_spd(d, &trial) {
                break inv;
            }
            jitter = if jitter == 0.0 {
                1e-8 * (1.0 + max_diag)
            } else {
                2.0 * jitter
            };
            if jitter > 1e-2 * (1.0 + max_diag) {
                return Err(Error::HessianIndefinite);
            }
        };
        GaussianApprox::new(*theta_hat, active, cov)
    }

    /// Pareto-smoothed self-normalized importance sampling with the
    /// Gaussian approximation as the proposal.
    pub fn psis_posterior(
        &self,
        approx: &GaussianApprox,
        s: usize,
        seed: u64,
    ) -> Result<WeightedPosterior> {
        if s < 100 {
            return Err(Error::InvalidConfig(
                "importance sampling needs at least 100 draws".into(),
            ));
        }
        let mut rng = crate::rng::seeded(seed);
        let draws: Vec<(Theta, f64)> = (0..s).map(|_| approx.sample(&mut rng)).collect();
        let log_ratios: Vec<f64> = draws
            .par_iter()
            .map(|(theta, log_q)| self.log_posterior(theta) - log_q)
            .collect();
        let smoothed = crate::psis::smooth_weights(&log_ratios)?;
        Ok(WeightedPosterior {
            samples: draws.into_iter().map(|(t, _)| t).collect(),
            weights: smoothed.weights,
            pareto_k: smoothed.pareto_k,
            ess: smoothed.ess,
        })
    }
}

/// Minus the Hessian of f by central second differences with relative
/// step 1e-4; fails if any probe is non-finite.
pub fn neg_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Result<Vec<f64>> {
    let d = x.len();
    let h: Vec<f64> = x.iter().map(|xi| 1e-4 * (1.0 + xi.abs())).collect();
    let f0 = f(x);
    if !f0.is_finite() {
        return Err(Error::HessianIndefinite);
    }
    let probe = |dx: &[f64]| -> Result<f64> {
        let xp: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + b).collect();
        let v = f(&xp);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::HessianIndefinite)
        }
    };
    let mut m = vec![0.0; d * d];
    let mut dx = vec![0.0; d];
    for i in 0..d {
        dx[i] = h[i];
        let fp = probe(&dx)?;
        dx[i] = -h[i];
        let fm = probe(&dx)?;
        dx[i] = 0.0;
        m[i * d + i] = -((fp - 2.0 * f0 + fm) / (h[i] * h[i]));
        for j in 0..i {
            dx[i] = h[i];
            dx[j] = h[j];
            let fpp = probe(&dx)?;
            dx[j] = -h[j];
            let fpm = probe(&dx)?;
            dx[i] = -h[i];
            dx[j] = h[j];
            let fmp = probe(&dx)?;
            dx[j] = -h[j];
            let fmm = probe(&dx)?;
            dx[i] = 0.0;
            dx[j] = 0.0;
            let hij = -((fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]));
            m[i * d + j] = hij;
            m[j * d + i] = hij;
        }
    }
    Ok(m)
}

/// Weighted mean and symmetric equal-tailed credible interval of a
/// scalar function of θ.
pub fn posterior_summary(
    wp: &WeightedPosterior,
    g: impl Fn(&Theta) -> f64,
    level: f64,
) -> (f64, (f64, f64)) {
    let values: Vec<f64> = wp.samples.iter().map(g).collect();
    let mean = values
        .iter()
        .zip(&wp.weights)
        .map(|(v, w)| v * w)
        .sum::<f64>();
    let lo = weighted_quantile(&values, &wp.weights, (1.0 - level) / 2.0);
    let hi = weighted_quantile(&values, &wp.weights, (1.0 + level) / 2.0);
    (mean, (lo, hi))
}

/// Quantile of the weighted sample: inverse of the left-continuous
/// weighted eCDF with linear interpolation between sample midpoints.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> f64 {
    assert_eq!(values.len(), weights.len());
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    assert!(!idx.is_empty());
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    // midpoint positions m_i = c_{i-1} + w_i / 2
    let mut cum = 0.0;
    let mut mids = Vec::with_capacity(idx.len());
    for &i in &idx {
        mids.push(cum + weights[i] / 2.0);
        cum += weights[i];
    }
    let p = p * cum; // tolerate weights summing to ≈1
    if p <= mids[0] {
        return values[idx[0]];
    }
    if p >= *mids.last().unwrap() {
        return values[*idx.last().unwrap()];
    }
    let k = mids.partition_point(|&m| m < p);
    let (m0, m1) = (mids[k - 1], mids[k]);
    let (v0, v1) = (values[idx[k - 1]], values[idx[k]]);
    v0 + (p - m0) / (m1 - m0) * (v1 - v0)
}

/// Posterior mean complexity E[d(κ, v) | y].
pub fn mean_complexity(wp: &WeightedPosterior) -> f64 {
    wp.samples
        .iter()
        .zip(&wp.weights)
        .map(|(t, w)| w * t.complexity())
        .sum()
}

/// KL divergence estimate between the smoothed-IS posterior and the
/// Gaussian proposal: Σ w log(S w).
pub fn kld_vs_gaussian(wp: &WeightedPosterior) -> f64 {
    let s = wp.weights.len() as f64;
    wp.weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * (s * w).ln())
        .sum()
}

/// Fraction of posterior mass at or below each coordinate of a
/// reference θ (the simulation-based-calibration statistic).
pub fn coverage_probabilities(wp: &WeightedPosterior, reference: &Theta) -> [f64; 5] {
    let r = reference.as_array();
    let mut a = [0.0; 5];
    for (t, w) in wp.samples.iter().zip(&wp.weights) {
        let ta = t.as_array();
        for i in 0..5 {
            if ta[i] <= r[i] {
                a[i] += w;
            }
        }
    }
    a
}

/// Dense helpers for the small (≤ 5 × 5) approximation algebra.
mod dense {
    /// In-place lower Cholesky of a row-major SPD matrix; false if not PD.
    pub fn cholesky_in_place(d: usize, a: &mut [f64]) -> bool {
        for i in 0..d {
            for j in 0..=i {
                let mut s = a[i * d + j];
                for k in 0..j {
                    s -= a[i * d + k] * a[j * d + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return false;
                    }
                    a[i * d + i] = s.sqrt();
                } else {
                    a[i * d + j] = s / a[j * d + j];
                }
            }
            for j in i + 1..d {
                a[i * d + j] = 0.0;
            }
        }
        true
    }

    /// Inverse of an SPD matrix via Cholesky; None if not PD.
    pub fn inverse_spd(d: usize, a: &[f64]) -> Option<Vec<f64>> {
        let mut chol = a.to_vec();
        if !cholesky_in_place(d, &mut chol) {
            return None;
        }
        let mut inv = vec![0.0; d * d];
        for col in 0..d {
            let mut x = vec![0.0; d];
            x[col] = 1.0;
            solve_with_factor(d, &chol, &mut x);
            for row in 0..d {
                inv[row * d + col] = x[row];
            }
        }
        // symmetrize against roundoff
        for i in 0..d {
            for j in 0..i {
                let s = 0.5 * (inv[i * d + j] + inv[j * d + i]);
                inv[i * d + j] = s;
                inv[j * d + i] = s;
            }
        }
        Some(inv)
    }

    pub fn solve_with_factor(d: usize, chol: &[f64], x: &mut [f64]) {
        for i in 0..d {
            let mut s = x[i];
            for k in 0..i {
                s -= chol[i * d + k] * x[k];
            }
            x[i] = s / chol[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = x[i];
            for k in i + 1..d {
                s -= chol[k * d + i] * x[k];
            }
            x[i] = s / chol[i * d + i];
        }
    }

    /// x' A^{-1} x given the Cholesky factor of A.
    pub fn quad_form_inv(d: usize, chol: &[f64], x: &[f64]) -> f64 {
        // solve L z = x, then |z|²
        let mut z = x.to_vec();
        for i in 0..d {
            let mut s = z[i];
            for k in 0..i {
                s -= chol[i * d + k] * z[k];
            }
            z[i] = s / chol[i * d + i];
        }
        z.iter().map(|v| v * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, interpolation_matrix};
    use crate::prior::{EgHyper, PcHyper};

    fn small_setup() -> (TriMesh, LatentModel) {
        let mesh = build_rect_mesh((0.0, 4.0), (0.0, 4.0), 1.0, 2.0, 10_000).unwrap();
        let latent = LatentModel::from_mesh(&mesh).unwrap();
        (mesh, latent)
    }

    fn default_problem<'a>(latent: &'a LatentModel, obs: &'a ObsModel) -> PosteriorProblem<'a> {
        PosteriorProblem {
            latent,
            obs,
            prior: PriorSpec::pc(PcHyper::new(0.5368, 0.4374).unwrap()),
            sigma_priors: SigmaPriors::from_quantiles(10.0, 0.01, 1.5, 0.01),
        }
    }

    fn theta0() -> Theta {
        Theta::from_array([0.0, 0.1, -0.2, 0.0, -0.7])
    }

    #[test]
    fn no_observations_posterior_equals_prior_precision() {
        let (_, latent) = small_setup();
        let obs = ObsModel::empty(latent.dim());
        let th = theta0();
        let q_prior = latent.precision(&th).unwrap();
        let lp = latent_posterior(&q_prior, &obs, 1.0).unwrap();
        assert!(lp.mean.iter().all(|&v| v == 0.0));
        for i in 0..q_prior.n() {
            assert_eq!(lp.q_post.get(i, i), q_prior.get(i, i));
        }
    }

    #[test]
    fn posterior_precision_is_sum_rule() {
        let (mesh, latent) = small_setup();
        let locs = [[1.0, 1.0], [2.5, 3.0], [3.3, 0.7]];
        let a = interpolation_matrix(&mesh, &locs).unwrap();
        let obs = ObsModel::new(a, vec![0.3, -0.1, 0.2]);
        let th = theta0();
        let q_prior = latent.precision(&th).unwrap();
        let q_eps = 4.0;
        let lp = latent_posterior(&q_prior, &obs, q_eps).unwrap();
        for (j, rows, vals) in lp.q_post.columns() {
            for (&i, &v) in rows.iter().zip(vals) {
                let want = q_prior.get(i, j) + q_eps * obs.ata().get(i, j);
                assert!((v - want).abs() <= 1e-15 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn two_node_toy_matches_dense_normal_equations() {
        // hand-built 2-dim latent with 3 observations
        let q_prior =
            SparseSymMatrix::from_lower_triplets(2, &[(0, 0, 2.0), (1, 1, 1.5), (1, 0, -0.5)]);
        let a = RowMatrix::new(
            2,
            vec![
                vec![(0, 1.0)],
                vec![(0, 0.5), (1, 0.5)],
                vec![(1, 1.0)],
            ],
        );
        let y = vec![1.0, 0.4, -0.3];
        let obs = ObsModel::new(a, y.clone());
        let q_eps = 2.5;
        let lp = latent_posterior(&q_prior, &obs, q_eps).unwrap();
        // dense: Qp = Qprior + qe A'A, mean = Qp^{-1} qe A'y
        let qp = [
            [2.0 + q_eps * 1.25, -0.5 + q_eps * 0.25],
            [-0.5 + q_eps * 0.25, 1.5 + q_eps * 1.25],
        ];
        let rhs = [q_eps * (1.0 + 0.2), q_eps * (0.2 - 0.3)];
        let det = qp[0][0] * qp[1][1] - qp[0][1] * qp[0][1];
        let want = [
            (qp[1][1] * rhs[0] - qp[0][1] * rhs[1]) / det,
            (-qp[0][1] * rhs[0] + qp[0][0] * rhs[1]) / det,
        ];
        assert!((lp.mean[0] - want[0]).abs() < 1e-12);
        assert!((lp.mean[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn infinite_noise_returns_prior_mean() {
        let (mesh, latent) = small_setup();
        let a = interpolation_matrix(&mesh, &[[2.0, 2.0]]).unwrap();
        let obs = ObsModel::new(a, vec![5.0]);
        let th = theta0();
        let q_prior = latent.precision(&th).unwrap();
        let lp = latent_posterior(&q_prior, &obs, 1e-14).unwrap();
        assert!(lp.mean.iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn log_posterior_independent_of_u() {
        let (mesh, latent) = small_setup();
        let locs = [[0.5, 0.5], [2.0, 1.5], [3.5, 3.5], [1.0, 3.0]];
        let a = interpolation_matrix(&mesh, &locs).unwrap();
        let obs = ObsModel::new(a, vec![0.5, -0.2, 0.8, 0.1]);
        let prob = default_problem(&latent, &obs);
        let mut rng = crate::rng::seeded(99);
        for k in 0..10 {
            let th = Theta::from_array([
                0.3 * rng.random::<f64>() - 0.1,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                0.4 * rng.random::<f64>() - 0.2,
                -0.5 * rng.random::<f64>() - 0.3,
            ]);
            let u1: Vec<f64> = (0..latent.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
            let u2: Vec<f64> = (0..latent.dim()).map(|_| 2.0 * rng.random::<f64>()).collect();
            let l1 = prob.log_posterior_at(&th, Some(&u1)).unwrap();
            let l2 = prob.log_posterior_at(&th, Some(&u2)).unwrap();
            let lm = prob.log_posterior_at(&th, None).unwrap();
            let tol = 1e-8 * (1.0 + lm.abs());
            assert!((l1 - l2).abs() <= tol, "trial {k}: {l1} vs {l2}");
            assert!((l1 - lm).abs() <= tol);
        }
    }

    #[test]
    fn gaussian_part_equals_dense_marginal_likelihood() {
        // scalar latent: y_i = u + ε_i with u ~ N(0, 1/q_u)
        let q_u = 1.7;
        let q_prior = SparseSymMatrix::from_diag(&[q_u]);
        let m = 4;
        let a = RowMatrix::new(1, (0..m).map(|_| vec![(0, 1.0)]).collect());
        let y = vec![0.7, -0.4, 1.2, 0.3];
        let obs = ObsModel::new(a, y.clone());
        let sigma_eps = 0.6f64;
        let q_eps = sigma_eps.powi(-2);
        let got = log_marginal_gaussian(&q_prior, &obs, q_eps, None).unwrap();

        // dense log N(y; 0, 11'/q_u + σ²I) via explicit 4x4 algebra
        let mut cov = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                cov[i][j] = 1.0 / q_u + if i == j { sigma_eps * sigma_eps } else { 0.0 };
            }
        }
        // Cholesky of the dense covariance
        let mut l = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..=i {
                let mut s = cov[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        let mut z = y.clone();
        for i in 0..m {
            let mut s = z[i];
            for k in 0..i {
                s -= l[i][k] * z[k];
            }
            z[i] = s / l[i][i];
        }
        let logdet: f64 = 2.0 * (0..m).map(|i| l[i][i].ln()).sum::<f64>();
        let want = -0.5
            * (z.iter().map(|v| v * v).sum::<f64>() + logdet + m as f64 * LN_2PI);
        assert!(
            (got - want).abs() < 1e-10,
            "got {got}, dense oracle {want}"
        );

        // shifting y moves the marginal consistently with the oracle
        let y2: Vec<f64> = y.iter().map(|v| v + 2.0).collect();
        let obs2 = ObsModel::new(
            RowMatrix::new(1, (0..m).map(|_| vec![(0, 1.0)]).collect()),
            y2.clone(),
        );
        let got2 = log_marginal_gaussian(&q_prior, &obs2, q_eps, None).unwrap();
        let mut z2 = y2;
        for i in 0..m {
            let mut s = z2[i];
            for k in 0..i {
                s -= l[i][k] * z2[k];
            }
            z2[i] = s / l[i][i];
        }
        let want2 = -0.5
            * (z2.iter().map(|v| v * v).sum::<f64>() + logdet + m as f64 * LN_2PI);
        assert!((got2 - want2).abs() < 1e-10);
    }

    #[test]
    fn map_recovers_analytic_prior_mode() {
        // no data: the posterior is the prior; EG prior gives closed-form
        // modes in log coordinates
        let (_, latent) = small_setup();
        let obs = ObsModel::empty(latent.dim());
        let eg = EgHyper {
            lambda_kappa: 1.2,
            sigma_v: 0.8,
        };
        let prob = PosteriorProblem {
            latent: &latent,
            obs: &obs,
            prior: PriorSpec::eg(eg),
            sigma_priors: SigmaPriors {
                lambda_sigma_u: 0.46,
                lambda_sigma_eps: 3.07,
            },
        };
        let r = prob.map_estimate(
            &Theta::from_array([0.0, 0.0, 0.0, 0.0, 0.0]),
            &OptimOptions::default(),
        );
        assert!(r.converged, "grad_norm = {}", r.grad_norm);
        let want = [
            -(1.2f64).ln(),
            0.0,
            0.0,
            -(0.46f64).ln(),
            -(3.07f64).ln(),
        ];
        for (got, want) in r.theta.as_array().iter().zip(want) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn gaussian_approx_matches_analytic_variance() {
        // with no data the v1 marginal is exactly N(0, σ_v²); the Laplace
        // variance must match to 1%
        let (_, latent) = small_setup();
        let obs = ObsModel::empty(latent.dim());
        let eg = EgHyper {
            lambda_kappa: 1.2,
            sigma_v: 0.8,
        };
        let prob = PosteriorProblem {
            latent: &latent,
            obs: &obs,
            prior: PriorSpec::eg(eg),
            sigma_priors: SigmaPriors {
                lambda_sigma_u: 0.46,
                lambda_sigma_eps: 3.07,
            },
        };
        let mode = Theta::from_array([
            -(1.2f64).ln(),
            0.0,
            0.0,
            -(0.46f64).ln(),
            -(3.07f64).ln(),
        ]);
        let approx = prob.gaussian_approx(&mode).unwrap();
        let var_v1 = approx.cov[1 * 5 + 1];
        assert!(
            (var_v1 - 0.64).abs() < 0.0064,
            "v1 variance {var_v1} vs 0.64"
        );
        // covariance is symmetric by construction
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(approx.cov[i * 5 + j], approx.cov[j * 5 + i]);
            }
        }
    }

    #[test]
    fn neg_hessian_exact_on_quadratics() {
        let f = |x: &[f64]| -(1.5 * x[0] * x[0] + 0.8 * x[1] * x[1] + 0.6 * x[0] * x[1]) + 3.0;
        let m = neg_hessian(&f, &[0.3, -0.2]).unwrap();
        let want = [3.0, 0.6, 0.6, 1.6];
        for (got, want) in m.iter().zip(want) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn psis_posterior_reproducible_and_valid() {
        let (mesh, latent) = small_setup();
        let locs = [[1.0, 2.0], [3.0, 1.0], [2.0, 3.0]];
        let a = interpolation_matrix(&mesh, &locs).unwrap();
        let obs = ObsModel::new(a, vec![0.4, -0.5, 0.3]);
        let prob = default_problem(&latent, &obs);
        let r = prob.map_estimate(&theta0(), &OptimOptions::default());
        let approx = prob.gaussian_approx(&r.theta).unwrap();
        let wp1 = prob.psis_posterior(&approx, 200, 5).unwrap();
        let wp2 = prob.psis_posterior(&approx, 200, 5).unwrap();
        assert_eq!(wp1.weights, wp2.weights);
        let sum: f64 = wp1.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(wp1.ess >= 1.0 && wp1.ess <= 200.0);
    }

    #[test]
    fn summary_point_mass_and_uniform_quantiles() {
        let mut wp = WeightedPosterior {
            samples: vec![theta0(), Theta::from_array([1.0, 0.0, 0.0, 0.0, 0.0])],
            weights: vec![1.0, 0.0],
            pareto_k: -1.0,
            ess: 1.0,
        };
        let (mean, (lo, hi)) = posterior_summary(&wp, |t| t.log_kappa, 0.95);
        assert_eq!(mean, theta0().log_kappa);
        assert_eq!(lo, hi);

        // uniform weights over 1..=100 at level 0.9 → [5.5, 95.5]
        wp.samples = (1..=100)
            .map(|i| Theta::from_array([i as f64, 0.0, 0.0, 0.0, 0.0]))
            .collect();
        wp.weights = vec![0.01; 100];
        let (_, (lo, hi)) = posterior_summary(&wp, |t| t.log_kappa, 0.9);
        assert!((lo - 5.5).abs() < 1e-9, "lo = {lo}");
        assert!((hi - 95.5).abs() < 1e-9, "hi = {hi}");
    }

    #[test]
    fn complexity_zero_for_zero_kappa() {
        let wp = WeightedPosterior {
            samples: vec![Theta::from_array([f64::NEG_INFINITY, 0.5, 0.5, 0.0, 0.0]); 3],
            weights: vec![1.0 / 3.0; 3],
            pareto_k: -1.0,
            ess: 3.0,
        };
        assert_eq!(mean_complexity(&wp), 0.0);
    }

    #[test]
    fn kld_cases() {
        let uniform = WeightedPosterior {
            samples: vec![theta0(); 100],
            weights: vec![0.01; 100],
            pareto_k: -1.0,
            ess: 100.0,
        };
        assert!(kld_vs_gaussian(&uniform).abs() < 1e-12);
        let point = WeightedPosterior {
            samples: vec![theta0(); 100],
            weights: {
                let mut w = vec![0.0; 100];
                w[3] = 1.0;
                w
            },
            pareto_k: -1.0,
            ess: 1.0,
        };
        assert!((kld_vs_gaussian(&point) - 100.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn posterior_csv_round_trip() {
        let wp = WeightedPosterior {
            samples: vec![theta0(), Theta::from_array([0.5, -1.0, 2.0, 0.1, -0.3])],
            weights: vec![0.25, 0.75],
            pareto_k: 0.3,
            ess: 1.6,
        };
        let mut buf = Vec::new();
        wp.write_csv(&mut buf).unwrap();
        let back = WeightedPosterior::read_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.samples.len(), 2);
        assert!((back.weights[1] - 0.75).abs() < 1e-8);
        assert!((back.samples[1].v2 - 2.0).abs() < 1e-8);
    }

    #[test]
    fn iso_prior_masks_v() {
        let (mesh, latent) = small_setup();
        let a = interpolation_matrix(&mesh, &[[2.0, 2.0]]).unwrap();
        let obs = ObsModel::new(a, vec![0.5]);
        let prob = PosteriorProblem {
            latent: &latent,
            obs: &obs,
            prior: PriorSpec::iso_pc(1.0, 0.01),
            sigma_priors: SigmaPriors::from_quantiles(10.0, 0.01, 1.5, 0.01),
        };
        assert_eq!(prob.active(), vec![0, 3, 4]);
        let r = prob.map_estimate(&Theta::from_array([0.0, 0.0, 0.0, 0.0, 0.0]), &OptimOptions::default());
        assert_eq!(r.theta.v1, 0.0);
        assert_eq!(r.theta.v2, 0.0);
        let approx = prob.gaussian_approx(&r.theta).unwrap();
        assert_eq!(approx.dim(), 3);
        let wp = prob.psis_posterior(&approx, 150, 9).unwrap();
        assert!(wp.samples.iter().all(|t| t.v1 == 0.0 && t.v2 == 0.0));
    }
}
