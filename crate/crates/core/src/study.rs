//! Simulation-study harness: prior-comparison replications with SBC
//! calibration checks, and the synthetic linear-model subsampling study.
//!
//! Each replication draws a true θ from the generator prior, simulates a
//! field and noisy observations, then fits every estimation prior by
//! MAP + Gaussian approximation + smoothed importance sampling. Records
//! carry MAP errors, credible-interval lengths and coverage, the SBC
//! statistics a_i = P[θ_i ≤ θ_i_true | y], posterior mean complexity,
//! and sampler diagnostics.

use crate::error::{Error, Result};
use crate::fem::sample_field;
use crate::inference::{
    coverage_probabilities, kld_vs_gaussian, mean_complexity, posterior_summary, LatentModel,
    ObsModel, PosteriorProblem, SigmaPriors, Theta, WeightedPosterior,
};
use crate::mesh::{build_rect_mesh, interpolation_matrix, TriMesh};
use crate::optim::OptimOptions;
use crate::prior::{calibrate, calibrate_eg, PriorSpec, QuantileTargets};
use crate::rng::{derive_seed, substream, Stage};
use crate::scoring::{loo_score_table, param_interval_scores};
use crate::sparse::RowMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomainBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl DomainBox {
    pub fn side(&self) -> f64 {
        (self.x1 - self.x0).max(self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailQuantile {
    pub value: f64,
    pub prob: f64,
}

/// Estimation/generation prior choices by name; hyperparameters come
/// from the quantile targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorName {
    Pc,
    Eg,
    Uniform,
    Beta,
    IsoPc,
}

impl PriorName {
    pub fn label(&self) -> &'static str {
        match self {
            PriorName::Pc => "pc",
            PriorName::Eg => "eg",
            PriorName::Uniform => "uniform",
            PriorName::Beta => "beta",
            PriorName::IsoPc => "iso_pc",
        }
    }
}

const BETA_ESTIMATION_WIDTH: f64 = 20.0;

/// Width 1 when the beta prior acts as the θ-generator: the full
/// estimation box reaches parameter values whose precision matrices
/// cannot be factored, so simulation narrows the support.
const BETA_GENERATION_WIDTH: f64 = 1.0;

/// Synthetic linear-model subsampling study configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsampleConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub pool_size: usize,
    /// Ground truth in (log κ, v1, v2, log σ_u, log σ_ε).
    pub theta_true: [f64; 5],
    pub beta_true: [f64; 2],
    pub tau_beta: f64,
    pub models: Vec<PriorName>,
    pub is_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: DomainBox,
    pub mesh_edge: f64,
    pub extension: f64,
    pub num_obs: usize,
    pub priors: Vec<PriorName>,
    pub generator: PriorName,
    pub replications: usize,
    pub is_samples: usize,
    pub master_seed: u64,
    pub targets: QuantileTargets,
    pub sigma_u_quantile: TailQuantile,
    pub sigma_eps_quantile: TailQuantile,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    #[serde(default)]
    pub subsample: Option<SubsampleConfig>,
}

fn default_max_nodes() -> usize {
    20_000
}

impl ExperimentConfig {
    /// Desk-scale defaults mirroring the prior-comparison experiment.
    pub fn desk_default() -> Self {
        ExperimentConfig {
            domain: DomainBox {
                x0: 0.0,
                x1: 10.0,
                y0: 0.0,
                y1: 10.0,
            },
            mesh_edge: 0.75,
            extension: 3.0,
            num_obs: 15,
            priors: vec![
                PriorName::Pc,
                PriorName::Eg,
                PriorName::Uniform,
                PriorName::Beta,
            ],
            generator: PriorName::Pc,
            replications: 20,
            is_samples: 1000,
            master_seed: 20_260_811,
            targets: QuantileTargets {
                a0: 10.0,
                beta: 0.01,
                rho0: 1.0,
                alpha: 0.01,
            },
            sigma_u_quantile: TailQuantile {
                value: 10.0,
                prob: 0.01,
            },
            sigma_eps_quantile: TailQuantile {
                value: 1.5,
                prob: 0.01,
            },
            max_nodes: default_max_nodes(),
            subsample: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.generator == PriorName::Uniform {
            return Err(Error::InvalidConfig(
                "the improper uniform prior cannot generate true parameters".into(),
            ));
        }
        if self.replications < 1 {
            return Err(Error::InvalidConfig("need at least one replication".into()));
        }
        if self.is_samples < 100 {
            return Err(Error::InvalidConfig(
                "importance sampling needs at least 100 draws".into(),
            ));
        }
        if self.priors.is_empty() {
            return Err(Error::InvalidConfig("no estimation priors listed".into()));
        }
        if !(self.mesh_edge > 0.0) || self.extension < 0.0 {
            return Err(Error::InvalidConfig("bad mesh geometry".into()));
        }
        if let Some(sub) = &self.subsample {
            if sub.sizes.iter().any(|&s| s > sub.pool_size || s == 0) {
                return Err(Error::InvalidConfig(
                    "subsample sizes must be in 1..=pool_size".into(),
                ));
            }
            if sub.models.is_empty() || sub.repeats == 0 {
                return Err(Error::InvalidConfig("empty subsample study".into()));
            }
        }
        Ok(())
    }

    pub fn sigma_priors(&self) -> SigmaPriors {
        SigmaPriors::from_quantiles(
            self.sigma_u_quantile.value,
            self.sigma_u_quantile.prob,
            self.sigma_eps_quantile.value,
            self.sigma_eps_quantile.prob,
        )
    }

    /// Build the named prior; the beta prior narrows when generating.
    pub fn build_prior(&self, name: PriorName, for_generation: bool) -> Result<PriorSpec> {
        Ok(match name {
            PriorName::Pc => PriorSpec::pc(calibrate(&self.targets)?),
            PriorName::Eg => PriorSpec::eg(calibrate_eg(&self.targets)?),
            PriorName::Uniform => PriorSpec::UniformImproper,
            PriorName::Beta => PriorSpec::BetaBox {
                rho0: self.targets.rho0,
                a0: self.targets.a0,
                width: if for_generation {
                    BETA_GENERATION_WIDTH
                } else {
                    BETA_ESTIMATION_WIDTH
                },
                domain_len: self.domain.side(),
            },
            PriorName::IsoPc => PriorSpec::iso_pc(self.targets.rho0, self.targets.alpha),
        })
    }

    pub fn build_mesh(&self) -> Result<TriMesh> {
        build_rect_mesh(
            (self.domain.x0, self.domain.x1),
            (self.domain.y0, self.domain.y1),
            self.mesh_edge,
            self.extension,
            self.max_nodes,
        )
    }
}

/// Observation simulation: u ~ N(0, Q_u(θ)^{-1}), ε ~ N(0, σ_ε² I),
/// y = A u + ε (fixed-effect columns of A, if any, see zero latent
/// coefficients here; callers add explicit fixed effects themselves).
pub fn simulate_observation(
    latent: &LatentModel,
    a: &RowMatrix,
    theta_true: &Theta,
    field_seed: u64,
    noise_seed: u64,
) -> Result<Vec<f64>> {
    let q_u = latent.field_precision(theta_true)?;
    let field = sample_field(&q_u, field_seed)?;
    let mut weights = field.weights;
    weights.resize(latent.dim(), 0.0);
    let mut y = a.matvec(&weights);
    let mut rng = crate::rng::seeded(noise_seed);
    let se = theta_true.sigma_eps();
    for v in &mut y {
        let z: f64 = rng.sample(StandardNormal);
        *v += se * z;
    }
    Ok(y)
}

/// Deterministic MAP initialization from the data scale and domain size.
pub fn default_init(domain_side: f64, y: &[f64]) -> Theta {
    let sd = if y.len() > 1 {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (y.len() - 1) as f64).sqrt()
    } else {
        1.0
    };
    let sd = sd.max(0.1);
    Theta {
        log_kappa: (8.0f64.sqrt() / (domain_side / 4.0)).ln(),
        v1: 0.0,
        v2: 0.0,
        log_sigma_u: sd.ln(),
        log_sigma_eps: (0.5 * sd).ln(),
    }
}

/// Outcome of one prior's fit within a replication.
#[derive(Debug, Clone, Serialize)]
pub struct PriorFitRecord {
    pub prior: PriorName,
    pub ok: bool,
    pub error: Option<String>,
    pub map: [f64; 5],
    pub abs_err: [f64; 5],
    pub ci_lo: [f64; 5],
    pub ci_hi: [f64; 5],
    pub ci_len: [f64; 5],
    pub covered: [bool; 5],
    pub sbc: [f64; 5],
    pub complexity: f64,
    pub kld: f64,
    pub pareto_k: f64,
    pub ess: f64,
    pub map_converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub theta_true: [f64; 5],
    pub fits: Vec<PriorFitRecord>,
}

/// Shared per-study state (mesh and element integrals are reused across
/// replications and priors).
pub struct StudyShared {
    pub mesh: TriMesh,
    pub latent: LatentModel,
    pub sigma_priors: SigmaPriors,
    pub generator: PriorSpec,
    pub estimation: Vec<(PriorName, PriorSpec)>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<StudyShared> {
    cfg.validate()?;
    let mesh = cfg.build_mesh()?;
    let latent = LatentModel::from_mesh(&mesh)?;
    let estimation = cfg
        .priors
        .iter()
        .map(|&p| Ok((p, cfg.build_prior(p, false)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyShared {
        latent,
        sigma_priors: cfg.sigma_priors(),
        generator: cfg.build_prior(cfg.generator, true)?,
        estimation,
        mesh,
    })
}

/// Draw θ_true from the generator prior with the σ priors.
fn draw_theta_true(cfg: &ExperimentConfig, shared: &StudyShared, rep: u64) -> Result<Theta> {
    let mut rng = substream(cfg.master_seed, rep, Stage::TrueParams);
    let (kappa, v) = shared.generator.sample(&mut rng)?;
    let (sigma_u, sigma_eps) = shared.sigma_priors.sample(&mut rng);
    Ok(Theta {
        log_kappa: kappa.ln(),
        v1: v.v1,
        v2: v.v2,
        log_sigma_u: sigma_u.ln(),
        log_sigma_eps: sigma_eps.ln(),
    })
}

fn uniform_locations<R: Rng>(cfg: &ExperimentConfig, rng: &mut R, count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|_| {
            [
                cfg.domain.x0 + (cfg.domain.x1 - cfg.domain.x0) * rng.random::<f64>(),
                cfg.domain.y0 + (cfg.domain.y1 - cfg.domain.y0) * rng.random::<f64>(),
            ]
        })
        .collect()
}

/// Fit one prior on the given observations and summarize.
pub fn fit_one(
    prob: &PosteriorProblem<'_>,
    init: &Theta,
    is_samples: usize,
    is_seed: u64,
    theta_true: Option<&Theta>,
    prior_name: PriorName,
) -> PriorFitRecord {
    let mut rec = PriorFitRecord {
        prior: prior_name,
        ok: false,
        error: None,
        map: [f64::NAN; 5],
        abs_err: [f64::NAN; 5],
        ci_lo: [f64::NAN; 5],
        ci_hi: [f64::NAN; 5],
        ci_len: [f64::NAN; 5],
        covered: [false; 5],
        sbc: [f64::NAN; 5],
        complexity: f64::NAN,
        kld: f64::NAN,
        pareto_k: f64::NAN,
        ess: f64::NAN,
        map_converged: false,
    };
    let map = prob.map_estimate(init, &OptimOptions::default());
    if !map.log_posterior.is_finite() {
        rec.error = Some("MAP search found no finite posterior value".into());
        return rec;
    }
    rec.map = map.theta.as_array();
    rec.map_converged = map.converged;
    let approx = match prob.gaussian_approx(&map.theta) {
        Ok(a) => a,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let wp = match prob.psis_posterior(&approx, is_samples, is_seed) {
        Ok(w) => w,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    for i in 0..5 {
        let (_, (lo, hi)) = posterior_summary(&wp, |t| t.as_array()[i], 0.95);
        rec.ci_lo[i] = lo;
        rec.ci_hi[i] = hi;
        rec.ci_len[i] = hi - lo;
    }
    if let Some(tt) = theta_true {
        let t = tt.as_array();
        for i in 0..5 {
            rec.abs_err[i] = (rec.map[i] - t[i]).abs();
            rec.covered[i] = rec.ci_lo[i] <= t[i] && t[i] <= rec.ci_hi[i];
        }
        rec.sbc = coverage_probabilities(&wp, tt);
    }
    rec.complexity = mean_complexity(&wp);
    rec.kld = kld_vs_gaussian(&wp);
    rec.pareto_k = wp.pareto_k;
    rec.ess = wp.ess;
    rec.ok = true;
    rec
}

/// One full replication: simulate data, fit every estimation prior.
pub fn run_replication(
    cfg: &ExperimentConfig,
    shared: &StudyShared,
    rep: usize,
) -> Result<ReplicationRecord> {
    let theta_true = draw_theta_true(cfg, shared, rep as u64)?;
    let mut loc_rng = substream(cfg.master_seed, rep as u64, Stage::Locations);
    let locations = uniform_locations(cfg, &mut loc_rng, cfg.num_obs);
    let a = interpolation_matrix(&shared.mesh, &locations)?;
    let y = simulate_observation(
        &shared.latent,
        &a,
        &theta_true,
        derive_seed(cfg.master_seed, rep as u64, Stage::FieldSample, 0),
        derive_seed(cfg.master_seed, rep as u64, Stage::Noise, 0),
    )?;
    let obs = ObsModel::new(a, y);
    let init = default_init(cfg.domain.side(), &obs.y);
    let fits = shared
        .estimation
        .iter()
        .enumerate()
        .map(|(k, (name, prior))| {
            let prob = PosteriorProblem {
                latent: &shared.latent,
                obs: &obs,
                prior: *prior,
                sigma_priors: shared.sigma_priors,
            };
            fit_one(
                &prob,
                &init,
                cfg.is_samples,
                derive_seed(
                    cfg.master_seed,
                    rep as u64,
                    Stage::ImportanceSampling,
                    k as u64,
                ),
                Some(&theta_true),
                *name,
            )
        })
        .collect();
    Ok(ReplicationRecord {
        rep,
        theta_true: theta_true.as_array(),
        fits,
    })
}

/// Run all replications (parallel, order-independent seeds).
pub fn run_study(cfg: &ExperimentConfig, shared: &StudyShared) -> Result<Vec<ReplicationRecord>> {
    (0..cfg.replications)
        .into_par_iter()
        .map(|j| run_replication(cfg, shared, j))
        .collect()
}

/// One-sample Kolmogorov-Smirnov test against U(0,1) with the
/// asymptotic p-value.
#[derive(Debug, Clone, Serialize)]
pub struct SbcTest {
    pub n: usize,
    pub ks_d: f64,
    pub p_value: f64,
}

pub fn sbc_uniformity(a_values: &[f64]) -> SbcTest {
    let mut v: Vec<f64> = a_values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let x = x.clamp(0.0, 1.0);
        d = d
            .max((x - i as f64 / nf).abs())
            .max(((i + 1) as f64 / nf - x).abs());
    }
    SbcTest {
        n,
        ks_d: d,
        p_value: kolmogorov_q(nf.sqrt() * d),
    }
}

/// Asymptotic Kolmogorov tail Q(λ) = 2 Σ (-1)^{k-1} exp(-2 k² λ²).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Synthetic linear-model data: responses over a pool of locations with
/// one covariate and fixed effects β.
#[derive(Debug, Clone)]
pub struct LinearModelData {
    pub locations: Vec<[f64; 2]>,
    pub covariate: Vec<f64>,
    pub y: Vec<f64>,
    pub tau_beta: f64,
}

/// Extend the interpolation operator with intercept and covariate
/// columns; the fixed-effect coefficients sit after the field block.
pub fn build_linear_model(data: &LinearModelData, mesh: &TriMesh) -> Result<(LatentModel, ObsModel)> {
    let latent = LatentModel::with_fixed_effects(mesh, data.tau_beta)?;
    let interp = interpolation_matrix(mesh, &data.locations)?;
    let n = mesh.n_nodes();
    let rows: Vec<Vec<(usize, f64)>> = (0..data.locations.len())
        .map(|i| {
            let mut row = interp.row(i).to_vec();
            row.push((n, 1.0));
            row.push((n + 1, data.covariate[i]));
            row
        })
        .collect();
    let a = RowMatrix::new(n + 2, rows);
    Ok((latent, ObsModel::new(a, data.y.clone())))
}

/// Generate the synthetic pool for the subsampling study.
pub fn generate_pool(cfg: &ExperimentConfig, sub: &SubsampleConfig, mesh: &TriMesh) -> Result<LinearModelData> {
    let latent = LatentModel::from_mesh(mesh)?;
    let theta = Theta::from_array(sub.theta_true);
    let mut loc_rng = substream(cfg.master_seed, u64::MAX, Stage::Locations);
    let locations = uniform_locations(cfg, &mut loc_rng, sub.pool_size);
    let mut cov_rng = substream(cfg.master_seed, u64::MAX, Stage::Covariate);
    let covariate: Vec<f64> = (0..sub.pool_size)
        .map(|_| cov_rng.sample(StandardNormal))
        .collect();
    let a = interpolation_matrix(mesh, &locations)?;
    let q_u = latent.field_precision(&theta)?;
    let field = sample_field(
        &q_u,
        derive_seed(cfg.master_seed, u64::MAX, Stage::FieldSample, 0),
    )?;
    let au = a.matvec(&field.weights);
    let mut noise_rng = substream(cfg.master_seed, u64::MAX, Stage::Noise);
    let se = theta.sigma_eps();
    let y: Vec<f64> = (0..sub.pool_size)
        .map(|i| {
            let z: f64 = noise_rng.sample(StandardNormal);
            sub.beta_true[0] + sub.beta_true[1] * covariate[i] + au[i] + se * z
        })
        .collect();
    Ok(LinearModelData {
        locations,
        covariate,
        y,
        tau_beta: sub.tau_beta,
    })
}

/// One cell of the subsampling study score grid.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreCell {
    pub size: usize,
    pub repeat: usize,
    pub model: PriorName,
    pub ok: bool,
    pub rmse: f64,
    pub crps: f64,
    pub dss: f64,
    pub interval_scores: [f64; 5],
    pub pareto_k: f64,
}

/// Subsample the pool, fit each model, and score leave-one-out
/// predictions. Deterministic under the master seed.
pub fn subsample_study(
    cfg: &ExperimentConfig,
    sub: &SubsampleConfig,
    mesh: &TriMesh,
    data: &LinearModelData,
) -> Result<Vec<ScoreCell>> {
    let latent = LatentModel::with_fixed_effects(mesh, data.tau_beta)?;
    let sigma_priors = cfg.sigma_priors();
    let theta_true = Theta::from_array(sub.theta_true);
    let n = mesh.n_nodes();
    let interp_full = interpolation_matrix(mesh, &data.locations)?;

    let mut cells: Vec<(usize, usize)> = Vec::new();
    for &size in &sub.sizes {
        for rep in 0..sub.repeats {
            cells.push((size, rep));
        }
    }
    let results: Result<Vec<Vec<ScoreCell>>> = cells
        .par_iter()
        .map(|&(size, rep)| {
            // sample without replacement; sorted for determinism
            let mut rng = substream(
                cfg.master_seed,
                (size * 1000 + rep) as u64,
                Stage::Subsample,
            );
            let mut idx: Vec<usize> = (0..sub.pool_size).collect();
            for i in 0..size {
                let j = i + (rng.random::<f64>() * (sub.pool_size - i) as f64) as usize;
                idx.swap(i, j.min(sub.pool_size - 1));
            }
            let mut chosen = idx[..size].to_vec();
            chosen.sort_unstable();
            let rows: Vec<Vec<(usize, f64)>> = chosen
                .iter()
                .map(|&i| {
                    let mut row = interp_full.row(i).to_vec();
                    row.push((n, 1.0));
                    row.push((n + 1, data.covariate[i]));
                    row
                })
                .collect();
            let y: Vec<f64> = chosen.iter().map(|&i| data.y[i]).collect();
            let obs = ObsModel::new(RowMatrix::new(n + 2, rows), y);
            let init = default_init(cfg.domain.side(), &obs.y);
            let mut out = Vec::new();
            for (k, &model) in sub.models.iter().enumerate() {
                let prior = cfg.build_prior(model, false)?;
                let prob = PosteriorProblem {
                    latent: &latent,
                    obs: &obs,
                    prior,
                    sigma_priors,
                };
                let seed = derive_seed(
                    cfg.master_seed,
                    (size * 1000 + rep) as u64,
                    Stage::ImportanceSampling,
                    k as u64,
                );
                let rec = fit_one(&prob, &init, sub.is_samples, seed, Some(&theta_true), model);
                if !rec.ok {
                    out.push(ScoreCell {
                        size,
                        repeat: rep,
                        model,
                        ok: false,
                        rmse: f64::NAN,
                        crps: f64::NAN,
                        dss: f64::NAN,
                        interval_scores: [f64::NAN; 5],
                        pareto_k: f64::NAN,
                    });
                    continue;
                }
                // rebuild the weighted posterior for scoring
                let map = prob.map_estimate(&init, &OptimOptions::default());
                let approx = prob.gaussian_approx(&map.theta).expect("checked in fit_one");
                let wp: WeightedPosterior =
                    prob.psis_posterior(&approx, sub.is_samples, seed).expect("checked");
                let mut table = loo_score_table(&prob, &wp);
                table.param_interval_scores = Some(param_interval_scores(&wp, &theta_true));
                out.push(ScoreCell {
                    size,
                    repeat: rep,
                    model,
                    ok: true,
                    rmse: table.rmse,
                    crps: table.mean_crps,
                    dss: table.mean_dss,
                    interval_scores: table.param_interval_scores.unwrap(),
                    pareto_k: wp.pareto_k,
                });
            }
            Ok(out)
        })
        .collect();
    Ok(results?.into_iter().flatten().collect())
}

/// `records.csv`: one row per replication × prior.
pub fn write_records_csv<W: Write>(records: &[ReplicationRecord], w: &mut W) -> std::io::Result<()> {
    write!(w, "rep,prior,ok,map_converged,pareto_k,ess,complexity,kld")?;
    for name in Theta::NAMES {
        write!(w, ",true_{name}")?;
    }
    for name in Theta::NAMES {
        write!(w, ",map_{name},abs_err_{name},ci_lo_{name},ci_hi_{name},ci_len_{name},covered_{name},sbc_{name}")?;
    }
    writeln!(w)?;
    let f = crate::spectral::fmt9;
    for r in records {
        for fit in &r.fits {
            write!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.rep,
                fit.prior.label(),
                u8::from(fit.ok),
                u8::from(fit.map_converged),
                f(fit.pareto_k),
                f(fit.ess),
                f(fit.complexity),
                f(fit.kld)
            )?;
            for v in r.theta_true {
                write!(w, ",{}", f(v))?;
            }
            for i in 0..5 {
                write!(
                    w,
                    ",{},{},{},{},{},{},{}",
                    f(fit.map[i]),
                    f(fit.abs_err[i]),
                    f(fit.ci_lo[i]),
                    f(fit.ci_hi[i]),
                    f(fit.ci_len[i]),
                    u8::from(fit.covered[i]),
                    f(fit.sbc[i])
                )?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// `sbc.csv`: long format (rep, prior, parameter, a).
pub fn write_sbc_csv<W: Write>(records: &[ReplicationRecord], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "rep,prior,parameter,a")?;
    for r in records {
        for fit in &r.fits {
            if !fit.ok {
                continue;
            }
            for (i, name) in Theta::NAMES.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    r.rep,
                    fit.prior.label(),
                    name,
                    crate::spectral::fmt9(fit.sbc[i])
                )?;
            }
        }
    }
    Ok(())
}

/// `scores.csv`: long format over the subsampling grid.
pub fn write_scores_csv<W: Write>(cells: &[ScoreCell], w: &mut W) -> std::io::Result<()> {
    write!(w, "size,repeat,model,ok,rmse,crps,dss,pareto_k")?;
    for name in Theta::NAMES {
        write!(w, ",interval_{name}")?;
    }
    writeln!(w)?;
    let f = crate::spectral::fmt9;
    for c in cells {
        write!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.size,
            c.repeat,
            c.model.label(),
            u8::from(c.ok),
            f(c.rmse),
            f(c.crps),
            f(c.dss),
            f(c.pareto_k)
        )?;
        for v in c.interval_scores {
            write!(w, ",{}", f(v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Aggregate summary consumed by the acceptance checks and plots.
pub fn summary_json(
    cfg: &ExperimentConfig,
    records: &[ReplicationRecord],
    cells: &[ScoreCell],
) -> serde_json::Value {
    let mut per_prior = serde_json::Map::new();
    for &(ref name, _) in cfg
        .priors
        .iter()
        .map(|p| (p, ()))
        .collect::<Vec<_>>()
        .iter()
    {
        let label = name.label();
        let fits: Vec<&PriorFitRecord> = records
            .iter()
            .flat_map(|r| r.fits.iter())
            .filter(|f| f.prior == **name && f.ok)
            .collect();
        if fits.is_empty() {
            per_prior.insert(label.into(), serde_json::json!({"n_ok": 0}));
            continue;
        }
        let n = fits.len() as f64;
        let mean = |get: &dyn Fn(&PriorFitRecord) -> f64| -> f64 {
            fits.iter().map(|f| get(f)).sum::<f64>() / n
        };
        let mut ci_len = [0.0; 5];
        let mut coverage = [0.0; 5];
        let mut sbc_p = [0.0; 5];
        for i in 0..5 {
            ci_len[i] = mean(&|f| f.ci_len[i]);
            coverage[i] = fits.iter().filter(|f| f.covered[i]).count() as f64 / n;
            let a: Vec<f64> = fits.iter().map(|f| f.sbc[i]).collect();
            sbc_p[i] = sbc_uniformity(&a).p_value;
        }
        per_prior.insert(
            label.into(),
            serde_json::json!({
                "n_ok": fits.len(),
                "mean_ci_len": ci_len,
                "coverage_095": coverage,
                "sbc_p_values": sbc_p,
                "mean_complexity": mean(&|f| f.complexity),
                "mean_kld": mean(&|f| f.kld),
                "mean_pareto_k": mean(&|f| f.pareto_k),
                "mean_abs_err": [
                    mean(&|f| f.abs_err[0]), mean(&|f| f.abs_err[1]), mean(&|f| f.abs_err[2]),
                    mean(&|f| f.abs_err[3]), mean(&|f| f.abs_err[4]),
                ],
            }),
        );
    }
    let subsample = if cells.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::json!(cells
            .iter()
            .map(|c| {
                serde_json::json!({
                    "size": c.size, "repeat": c.repeat, "model": c.model.label(),
                    "ok": c.ok, "rmse": c.rmse, "crps": c.crps, "dss": c.dss,
                })
            })
            .collect::<Vec<_>>())
    };
    serde_json::json!({
        "schema_version": 1,
        "generator": cfg.generator.label(),
        "replications": cfg.replications,
        "is_samples": cfg.is_samples,
        "num_obs": cfg.num_obs,
        "priors": per_prior,
        "subsample": subsample,
    })
}
