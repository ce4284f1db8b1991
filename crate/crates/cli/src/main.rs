//! Command-line interface: field simulation, prior calibration, fitting,
//! the simulation-study harness, and leave-one-out scoring.
//!
//! Exit codes: 0 success, 2 invalid flags or configuration, 3 numerical
//! failure. Partial outputs are removed when a command fails.

mod manifest;

use anisofield::aniso::AnisoVector;
use anisofield::inference::{
    kld_vs_gaussian, posterior_summary, LatentModel, ObsModel, PosteriorProblem, SigmaPriors,
    Theta, WeightedPosterior,
};
use anisofield::mesh::{build_rect_mesh, interpolation_matrix};
use anisofield::optim::OptimOptions;
use anisofield::prior::{
    calibrate, calibrate_eg, pdf_kappa, pdf_r, sample_pc, PriorSpec, QuantileTargets,
};
use anisofield::scoring::loo_score_table;
use anisofield::spectral::{covariance_grid, fmt9, spectral_sample, FreqGrid, GridField};
use anisofield::sparse::EnvelopeCholesky;
use anisofield::study::{
    self, generate_pool, prepare, run_study, subsample_study, ExperimentConfig, PriorName,
};
use anisofield::Error as CoreError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::{OutputTracker, RunManifest};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "anisofield",
    version,
    about = "Stationary anisotropic Gaussian random fields: simulation, priors, inference, scoring"
)]
struct Cli {
    /// Cap the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a field realization (and optionally its covariance) on a grid.
    Sample(SampleArgs),
    /// Calibrate prior hyperparameters and emit density curves / samples.
    Prior(PriorArgs),
    /// Fit the model to observations: MAP + smoothed importance sampling.
    Fit(FitArgs),
    /// Run the replication study from a JSON config.
    Simstudy(SimstudyArgs),
    /// Leave-one-out predictive scores from a saved fit.
    Score(ScoreArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fem,
    Spectral,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    v1: f64,
    #[arg(long, default_value_t = 0.0)]
    v2: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_u: f64,
    /// Grid points per side (power of two ≥ 8 for the spectral method).
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
    /// Physical box side length.
    #[arg(long = "box", default_value_t = 20.0)]
    box_side: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV for the field realization.
    #[arg(long)]
    out: PathBuf,
    /// Also write the covariance function K(·, 0) to this CSV.
    #[arg(long)]
    covariance: Option<PathBuf>,
    /// FEM boundary extension (default: two correlation ranges).
    #[arg(long)]
    extension: Option<f64>,
    /// Write the mesh node/triangle tables with this path prefix (FEM).
    #[arg(long)]
    export_mesh: Option<PathBuf>,
    /// Write the precision matrix in Matrix Market format (FEM).
    #[arg(long)]
    export_precision: Option<PathBuf>,
}

#[derive(Args)]
struct TargetArgs {
    #[arg(long, default_value_t = 10.0)]
    a0: f64,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    rho0: f64,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorKind {
    Pc,
    Eg,
    Uniform,
    Beta,
}

#[derive(Args)]
struct PriorArgs {
    #[command(flatten)]
    targets: TargetArgs,
    #[arg(long, value_enum, default_value = "pc")]
    kind: PriorKind,
    /// Also draw this many prior samples.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Observation CSV with header x,y,obs or x,y,h,obs.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "pc")]
    prior: PriorKind,
    /// Fit the isotropic submodel (v pinned to zero, PC prior on κ).
    #[arg(long)]
    iso: bool,
    #[command(flatten)]
    targets: TargetArgs,
    #[arg(long, default_value_t = 10.0)]
    sigma_u0: f64,
    #[arg(long, default_value_t = 0.01)]
    sigma_u_prob: f64,
    #[arg(long, default_value_t = 1.5)]
    sigma_eps0: f64,
    #[arg(long, default_value_t = 0.01)]
    sigma_eps_prob: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mesh edge length (default: bounding-box diagonal / 25).
    #[arg(long)]
    mesh_edge: Option<f64>,
    /// Mesh boundary extension (default: 0.3 × bounding-box side).
    #[arg(long)]
    extension: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    tau_beta: f64,
    #[arg(long, default_value_t = 40_000)]
    max_nodes: usize,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct SimstudyArgs {
    /// Experiment config JSON (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Observation CSV used for the fit.
    #[arg(long)]
    data: PathBuf,
    /// Posterior sample CSV written by `fit`.
    #[arg(long)]
    posterior: PathBuf,
    #[arg(long)]
    mesh_edge: Option<f64>,
    #[arg(long)]
    extension: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    tau_beta: f64,
    #[arg(long, default_value_t = 40_000)]
    max_nodes: usize,
    #[arg(long)]
    out_prefix: PathBuf,
}

struct AppError {
    code: i32,
    message: String,
}

impl AppError {
    fn usage(msg: impl Into<String>) -> Self {
        AppError {
            code: 2,
            message: msg.into(),
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::InvalidConfig(_)
            | CoreError::DegenerateTargets
            | CoreError::UnsupportedSampling
            | CoreError::MeshTooLarge { .. }
            | CoreError::PointOutsideMesh { .. } => 2,
            _ => 3,
        };
        AppError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError {
            code: 2,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError {
            code: 2,
            message: format!("config: {e}"),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    let mut tracker = OutputTracker::new();
    let result = match cli.command {
        Command::Sample(args) => cmd_sample(args, &mut tracker),
        Command::Prior(args) => cmd_prior(args, &mut tracker),
        Command::Fit(args) => cmd_fit(args, &mut tracker),
        Command::Simstudy(args) => cmd_simstudy(args, &mut tracker),
        Command::Score(args) => cmd_score(args, &mut tracker),
    };
    if let Err(e) = result {
        tracker.remove_all();
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn create(tracker: &mut OutputTracker, path: &Path) -> Result<BufWriter<fs::File>, AppError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let f = fs::File::create(path)?;
    tracker.register(path);
    Ok(BufWriter::new(f))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_sample(args: SampleArgs, tracker: &mut OutputTracker) -> Result<(), AppError> {
    let params = anisofield::StationaryParams::new(
        args.kappa,
        AnisoVector::new(args.v1, args.v2),
        args.sigma_u,
    )?;
    match args.method {
        Method::Spectral => {
            let grid = FreqGrid::new(args.grid_n, args.grid_n, args.box_side, args.box_side)?;
            let field = spectral_sample(&params, &grid, args.seed)?;
            field.write_csv(&mut create(tracker, &args.out)?)?;
            if let Some(cov_path) = &args.covariance {
                let cov = covariance_grid(&params, &grid)?;
                cov.write_csv(&mut create(tracker, cov_path)?)?;
            }
        }
        Method::Fem => {
            let extension = args.extension.unwrap_or(2.0 * params.range());
            let edge = args.box_side / args.grid_n as f64;
            let mesh = build_rect_mesh(
                (0.0, args.box_side),
                (0.0, args.box_side),
                edge.max(args.box_side / 256.0),
                extension,
                200_000,
            )?;
            let ops = anisofield::fem::assemble(&mesh, params.kappa, &params.h())?;
            let q = anisofield::fem::precision(&ops, params.sigma_u)?;
            let latent = anisofield::fem::sample_field(&q, args.seed)?;
            // evaluate on the regular grid over the core box
            let pts = grid_points(args.grid_n, args.box_side);
            let interp = interpolation_matrix(&mesh, &pts)?;
            let values = interp.matvec(&latent.weights);
            let field = GridField {
                nx: args.grid_n,
                ny: args.grid_n,
                lx: args.box_side,
                ly: args.box_side,
                values,
            };
            field.write_csv(&mut create(tracker, &args.out)?)?;
            if let Some(cov_path) = &args.covariance {
                // covariance against the grid point closest to the center
                let center = [args.box_side / 2.0, args.box_side / 2.0];
                let a_c = interpolation_matrix(&mesh, &[center])?;
                let chol = EnvelopeCholesky::factor(&q)?;
                let mut rhs = vec![0.0; q.n()];
                for &(j, v) in a_c.row(0) {
                    rhs[j] = v;
                }
                let col = chol.solve(&rhs);
                let cov = GridField {
                    nx: args.grid_n,
                    ny: args.grid_n,
                    lx: args.box_side,
                    ly: args.box_side,
                    values: interp.matvec(&col),
                };
                cov.write_csv(&mut create(tracker, cov_path)?)?;
            }
            if let Some(prefix) = &args.export_mesh {
                mesh.write_nodes_csv(&mut create(tracker, &with_suffix(prefix, "_nodes.csv"))?)?;
                mesh.write_triangles_csv(&mut create(
                    tracker,
                    &with_suffix(prefix, "_triangles.csv"),
                )?)?;
            }
            if let Some(path) = &args.export_precision {
                q.write_matrix_market(&mut create(tracker, path)?)?;
            }
        }
    }
    Ok(())
}

fn grid_points(n: usize, side: f64) -> Vec<[f64; 2]> {
    let d = side / n as f64;
    let mut pts = Vec::with_capacity(n * n);
    for iy in 0..n {
        for ix in 0..n {
            pts.push([ix as f64 * d, iy as f64 * d]);
        }
    }
    pts
}

fn cmd_prior(args: PriorArgs, tracker: &mut OutputTracker) -> Result<(), AppError> {
    let targets = QuantileTargets {
        a0: args.targets.a0,
        beta: args.targets.beta,
        rho0: args.targets.rho0,
        alpha: args.targets.alpha,
    };
    let pc = calibrate(&targets)?;
    let eg = calibrate_eg(&targets)?;
    let hyper_json = serde_json::json!({
        "schema_version": 1,
        "targets": targets,
        "pc": { "lambda_theta": pc.lambda_theta, "lambda_v": pc.lambda_v },
        "eg": { "lambda_kappa": eg.lambda_kappa, "sigma_v": eg.sigma_v },
    });
    let mut w = create(tracker, &with_suffix(&args.out_prefix, "_hyper.json"))?;
    writeln!(w, "{}", serde_json::to_string_pretty(&hyper_json)?)?;

    // density curves for the marginals of r = |v| and κ
    let mut w = create(tracker, &with_suffix(&args.out_prefix, "_density.csv"))?;
    writeln!(w, "variable,x,density")?;
    let (r_max, k_max) = (3.0 * targets.a0.ln(), 4.0 * 8.0f64.sqrt() / targets.rho0);
    for i in 0..400 {
        let r = r_max * i as f64 / 399.0;
        let d = match args.kind {
            PriorKind::Pc => pdf_r(r, &pc),
            PriorKind::Eg => {
                let s2 = eg.sigma_v * eg.sigma_v;
                r / s2 * (-r * r / (2.0 * s2)).exp() // Rayleigh
            }
            _ => {
                return Err(AppError::usage(
                    "density curves are only defined for the pc and eg priors",
                ))
            }
        };
        writeln!(w, "r,{},{}", fmt9(r), fmt9(d))?;
    }
    for i in 0..400 {
        let k = k_max * (i as f64 + 0.5) / 400.0;
        let d = match args.kind {
            PriorKind::Pc => pdf_kappa(k, &pc),
            PriorKind::Eg => eg.lambda_kappa * (-eg.lambda_kappa * k).exp(),
            _ => unreachable!(),
        };
        writeln!(w, "kappa,{},{}", fmt9(k), fmt9(d))?;
    }

    if args.samples > 0 {
        let mut w = create(tracker, &with_suffix(&args.out_prefix, "_samples.csv"))?;
        writeln!(w, "kappa,v1,v2")?;
        match args.kind {
            PriorKind::Pc => {
                for (k, v) in sample_pc(&pc, args.seed, args.samples) {
                    writeln!(w, "{},{},{}", fmt9(k), fmt9(v.v1), fmt9(v.v2))?;
                }
            }
            PriorKind::Eg => {
                let spec = PriorSpec::eg(eg);
                let mut rng = anisofield::rng::seeded(args.seed);
                for _ in 0..args.samples {
                    let (k, v) = spec.sample(&mut rng)?;
                    writeln!(w, "{},{},{}", fmt9(k), fmt9(v.v1), fmt9(v.v2))?;
                }
            }
            _ => return Err(AppError::usage("sampling needs the pc or eg prior")),
        }
    }
    Ok(())
}

struct DataSet {
    locations: Vec<[f64; 2]>,
    covariate: Option<Vec<f64>>,
    y: Vec<f64>,
}

fn read_data_csv(path: &Path) -> Result<DataSet, AppError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| AppError::usage("empty data file"))?;
    let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
    let with_h = match cols.as_slice() {
        ["x", "y", "obs"] => false,
        ["x", "y", "h", "obs"] => true,
        _ => {
            return Err(AppError::usage(format!(
                "expected header x,y,obs or x,y,h,obs, found {header:?}"
            )))
        }
    };
    let mut data = DataSet {
        locations: Vec::new(),
        covariate: with_h.then(Vec::new),
        y: Vec::new(),
    };
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AppError::usage(format!("data line {}: {e}", ln + 2)))?;
        if vals.len() != cols.len() {
            return Err(AppError::usage(format!(
                "data line {}: expected {} columns",
                ln + 2,
                cols.len()
            )));
        }
        data.locations.push([vals[0], vals[1]]);
        if with_h {
            data.covariate.as_mut().unwrap().push(vals[2]);
            data.y.push(vals[3]);
        } else {
            data.y.push(vals[2]);
        }
    }
    if data.y.is_empty() {
        return Err(AppError::usage("data file has no observations"));
    }
    Ok(data)
}

struct BuiltModel {
    latent: LatentModel,
    obs: ObsModel,
}

fn build_model(
    data: &DataSet,
    mesh_edge: Option<f64>,
    extension: Option<f64>,
    tau_beta: f64,
    max_nodes: usize,
) -> Result<BuiltModel, AppError> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &data.locations {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let side = (x1 - x0).max(y1 - y0).max(1e-6);
    let edge = mesh_edge.unwrap_or(side * 2.0f64.sqrt() / 25.0);
    let ext = extension.unwrap_or(0.3 * side);
    let mesh = build_rect_mesh((x0, x1), (y0, y1), edge, ext, max_nodes)?;
    if let Some(h) = &data.covariate {
        let lm = study::LinearModelData {
            locations: data.locations.clone(),
            covariate: h.clone(),
            y: data.y.clone(),
            tau_beta,
        };
        let (latent, obs) = study::build_linear_model(&lm, &mesh)?;
        Ok(BuiltModel { latent, obs })
    } else {
        let latent = LatentModel::from_mesh(&mesh)?;
        let a = interpolation_matrix(&mesh, &data.locations)?;
        Ok(BuiltModel {
            latent,
            obs: ObsModel::new(a, data.y.clone()),
        })
    }
}

fn cmd_fit(args: FitArgs, tracker: &mut OutputTracker) -> Result<(), AppError> {
    let started = manifest::now();
    let data = read_data_csv(&args.data)?;
    let built = build_model(
        &data,
        args.mesh_edge,
        args.extension,
        args.tau_beta,
        args.max_nodes,
    )?;
    let targets = QuantileTargets {
        a0: args.targets.a0,
        beta: args.targets.beta,
        rho0: args.targets.rho0,
        alpha: args.targets.alpha,
    };
    let prior = if args.iso {
        PriorSpec::iso_pc(targets.rho0, targets.alpha)
    } else {
        match args.prior {
            PriorKind::Pc => PriorSpec::pc(calibrate(&targets)?),
            PriorKind::Eg => PriorSpec::eg(calibrate_eg(&targets)?),
            PriorKind::Uniform => PriorSpec::UniformImproper,
            PriorKind::Beta => PriorSpec::BetaBox {
                rho0: targets.rho0,
                a0: targets.a0,
                width: 20.0,
                domain_len: {
                    let xs: Vec<f64> = data.locations.iter().map(|p| p[0]).collect();
                    let ys: Vec<f64> = data.locations.iter().map(|p| p[1]).collect();
                    let span = |v: &[f64]| {
                        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                            - v.iter().cloned().fold(f64::INFINITY, f64::min)
                    };
                    span(&xs).max(span(&ys)).max(1.0)
                },
            },
        }
    };
    let sigma_priors = SigmaPriors::from_quantiles(
        args.sigma_u0,
        args.sigma_u_prob,
        args.sigma_eps0,
        args.sigma_eps_prob,
    );
    let prob = PosteriorProblem {
        latent: &built.latent,
        obs: &built.obs,
        prior,
        sigma_priors,
    };
    let side = 1.0f64.max({
        let xs: Vec<f64> = data.locations.iter().map(|p| p[0]).collect();
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - xs.iter().cloned().fold(f64::INFINITY, f64::min)
    });
    let init = study::default_init(side, &built.obs.y);
    let map = prob.map_estimate(&init, &OptimOptions::default());
    if !map.log_posterior.is_finite() {
        return Err(AppError {
            code: 3,
            message: "no finite posterior value found".into(),
        });
    }
    let approx = prob.gaussian_approx(&map.theta)?;
    let wp = prob.psis_posterior(&approx, args.samples, args.seed)?;

    let posterior_path = with_suffix(&args.out_prefix, "_posterior.csv");
    wp.write_csv(&mut create(tracker, &posterior_path)?)?;

    let mut ci = serde_json::Map::new();
    for (i, name) in Theta::NAMES.iter().enumerate() {
        let (_, (lo, hi)) = posterior_summary(&wp, |t| t.as_array()[i], 0.95);
        ci.insert((*name).into(), serde_json::json!([lo, hi]));
    }
    let diag = serde_json::json!({
        "schema_version": 1,
        "pareto_k": wp.pareto_k,
        "ess": wp.ess,
        "kld": kld_vs_gaussian(&wp),
        "map": {
            "log_kappa": map.theta.log_kappa,
            "v1": map.theta.v1,
            "v2": map.theta.v2,
            "log_sigma_u": map.theta.log_sigma_u,
            "log_sigma_eps": map.theta.log_sigma_eps,
        },
        "map_converged": map.converged,
        "ci": ci,
        "mean_complexity": anisofield::inference::mean_complexity(&wp),
    });
    let diag_path = with_suffix(&args.out_prefix, "_diagnostics.json");
    writeln!(
        create(tracker, &diag_path)?,
        "{}",
        serde_json::to_string_pretty(&diag)?
    )?;

    let config_json = serde_json::json!({
        "command": "fit", "data": args.data, "prior": prior,
        "samples": args.samples, "seed": args.seed, "iso": args.iso,
        "targets": targets,
    });
    RunManifest::new(&config_json, args.seed, started)
        .with_outputs(tracker)
        .write(&with_suffix(&args.out_prefix, "_manifest.json"), tracker)?;
    Ok(())
}

fn cmd_simstudy(args: SimstudyArgs, tracker: &mut OutputTracker) -> Result<(), AppError> {
    let started = manifest::now();
    let text = fs::read_to_string(&args.config)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    let shared = prepare(&cfg)?;
    let records = run_study(&cfg, &shared)?;

    fs::create_dir_all(&args.out_dir)?;
    let records_path = args.out_dir.join("records.csv");
    study::write_records_csv(&records, &mut create(tracker, &records_path)?)?;
    let sbc_path = args.out_dir.join("sbc.csv");
    study::write_sbc_csv(&records, &mut create(tracker, &sbc_path)?)?;

    let cells = if let Some(sub) = &cfg.subsample {
        let pool = generate_pool(&cfg, sub, &shared.mesh)?;
        subsample_study(&cfg, sub, &shared.mesh, &pool)?
    } else {
        Vec::new()
    };
    let scores_path = args.out_dir.join("scores.csv");
    study::write_scores_csv(&cells, &mut create(tracker, &scores_path)?)?;

    let summary = study::summary_json(&cfg, &records, &cells);
    writeln!(
        create(tracker, &args.out_dir.join("summary.json"))?,
        "{}",
        serde_json::to_string_pretty(&summary)?
    )?;

    let cfg_value: serde_json::Value = serde_json::from_str(&text)?;
    RunManifest::new(&cfg_value, cfg.master_seed, started)
        .with_outputs(tracker)
        .write(&args.out_dir.join("manifest.json"), tracker)?;
    Ok(())
}

fn cmd_score(args: ScoreArgs, tracker: &mut OutputTracker) -> Result<(), AppError> {
    let data = read_data_csv(&args.data)?;
    let built = build_model(
        &data,
        args.mesh_edge,
        args.extension,
        args.tau_beta,
        args.max_nodes,
    )?;
    let file = fs::File::open(&args.posterior)?;
    let wp = WeightedPosterior::read_csv(std::io::BufReader::new(file))?;
    if wp.samples.is_empty() {
        return Err(AppError::usage("posterior file has no samples"));
    }
    // scoring only uses the latent model and observations
    let prob = PosteriorProblem {
        latent: &built.latent,
        obs: &built.obs,
        prior: PriorSpec::UniformImproper,
        sigma_priors: SigmaPriors::from_quantiles(10.0, 0.01, 1.5, 0.01),
    };
    let table = loo_score_table(&prob, &wp);
    table.write_csv(&mut create(tracker, &with_suffix(&args.out_prefix, "_loo.csv"))?)?;
    writeln!(
        create(tracker, &with_suffix(&args.out_prefix, "_scores.json"))?,
        "{}",
        serde_json::to_string_pretty(&table.aggregates_json())?
    )?;
    Ok(())
}

// silence: PriorName is exercised through configs in this binary
#[allow(dead_code)]
fn _prior_names(p: PriorName) -> &'static str {
    p.label()
}
