//! Derivative-free minimization: Nelder-Mead with restarts, polished by
//! a finite-difference BFGS.
//!
//! Objectives may return +∞ (infeasible region); the simplex and the
//! line search both back away from such points, which is what makes
//! this robust to Cholesky-failure cliffs in the posterior.

#[derive(Debug, Clone)]
pub struct OptimOptions {
    pub initial_step: f64,
    pub max_evals: usize,
    /// Convergence target: ||grad|| <= grad_tol * (1 + |f|).
    pub grad_tol: f64,
    pub restarts: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            initial_step: 0.25,
            max_evals: 20_000,
            grad_tol: 1e-5,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fval: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub evals: usize,
}

/// Central-difference gradient with relative step 1e-5; returns None if
/// any probe is non-finite.
pub fn fd_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64]) -> Option<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-5 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return None;
        }
        g[i] = (fp - fm) / (2.0 * h);
    }
    Some(g)
}

struct CountedObjective<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    evals: usize,
}

impl CountedObjective<'_> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

pub fn minimize(f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], opts: &OptimOptions) -> OptimResult {
    let mut obj = CountedObjective { f, evals: 0 };

    let mut best_x = x0.to_vec();
    let mut best_f = obj.eval(&best_x);
    let mut step = opts.initial_step;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;

    for _round in 0..=opts.restarts {
        let budget = opts.max_evals.saturating_sub(obj.evals);
        let (x, fx, _) = nelder_mead(&mut |x| obj.eval(x), &best_x, step, budget);
        if fx < best_f {
            best_f = fx;
            best_x = x;
        }
        let budget = opts.max_evals.saturating_sub(obj.evals);
        let (x, fx) = bfgs_polish(&mut |x| obj.eval(x), &best_x, best_f, budget);
        if fx < best_f {
            best_f = fx;
            best_x = x;
        }
        if let Some(g) = fd_gradient(&mut |x| obj.eval(x), &best_x) {
            grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if grad_norm <= opts.grad_tol * (1.0 + best_f.abs()) {
                converged = true;
                break;
            }
        }
        step *= 0.3;
        if obj.evals >= opts.max_evals {
            break;
        }
    }

    let evals = obj.evals;
    OptimResult {
        x: best_x,
        fval: best_f,
        converged,
        grad_norm,
        evals,
    }
}

fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    budget: usize,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut evals = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    evals += 1;
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step * (1.0 + x0[i].abs());
        let fx = f(&x);
        evals += 1;
        simplex.push((x, fx));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals + 4 < budget {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let fbest = simplex[0].1;
        let fworst = simplex[n].1;
        if fworst.is_finite() && (fworst - fbest).abs() <= 1e-11 * (1.0 + fbest.abs()) {
            break;
        }
        // centroid of all but the worst
        let mut c = vec![0.0; n];
        for s in simplex.iter().take(n) {
            for i in 0..n {
                c[i] += s.0[i] / n as f64;
            }
        }
        let point = |t: f64| -> Vec<f64> {
            (0..n).map(|i| c[i] + t * (c[i] - simplex[n].0[i])).collect()
        };
        let xr = point(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = point(gamma);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = point(-rho);
            let fc = f(&xc);
            evals += 1;
            if fc < simplex[n].1 {
                simplex[n] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let x_best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    for i in 0..n {
                        s.0[i] = x_best[i] + sigma * (s.0[i] - x_best[i]);
                    }
                    s.1 = f(&s.0);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    (simplex[0].0.clone(), simplex[0].1, evals)
}

fn bfgs_polish(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    budget: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut evals = 0usize;
    let mut feval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut g = match fd_gradient(&mut |x| feval(x, &mut evals), &x) {
        Some(g) => g,
        None => return (x, fx),
    };
    // inverse Hessian approximation
    let mut h = vec![vec![0.0; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..120 {
        if evals + 4 * n > budget {
            break;
        }
        let mut d = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                d[i] -= h[i][j] * g[j];
            }
        }
        let slope: f64 = d.iter().zip(&g).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            // reset to steepest descent
            for (i, di) in d.iter_mut().enumerate() {
                *di = -g[i];
            }
        }
        let slope: f64 = d.iter().zip(&g).map(|(d, g)| d * g).sum();
        let mut t = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + t * d[i];
            }
            f_new = feval(&x_new, &mut evals);
            if f_new.is_finite() && f_new <= fx + 1e-4 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let g_new = match fd_gradient(&mut |x| feval(x, &mut evals), &x_new) {
            Some(g) => g,
            None => {
                x = x_new;
                fx = f_new;
                break;
            }
        };
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            // BFGS inverse update
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i][j] * y[j]).sum::<f64>())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy)
                        - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        let delta = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if delta.abs() <= 1e-12 * (1.0 + fx.abs()) {
            break;
        }
    }
    (x, fx)
}
