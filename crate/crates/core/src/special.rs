//! Scalar special functions shared across modules.

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via erfc, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// sinh(x)/x with a series branch near zero.
pub fn sinhc(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// Modified Bessel function K1.
///
/// Series expansion below x = 2, and the integral representation
/// K1(x) = ∫ exp(-x cosh t) cosh t dt above. The trapezoid rule on the
/// even integrand converges spectrally, so both branches reach ~1e-13
/// relative accuracy.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k1 requires x > 0");
    if x < 2.0 {
        k1_series(x)
    } else {
        k1_integral(x)
    }
}

fn k1_series(x: f64) -> f64 {
    let h = x / 2.0;
    let h2 = h * h;
    // I1(x) = sum_k h^(2k+1) / (k! (k+1)!)
    let mut i1 = h;
    let mut term = h;
    // digamma values psi(k+1), psi(k+2) built incrementally from psi(1) = -gamma
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut psi_k1 = -EULER_GAMMA; // psi(1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // psi(2)
    let mut sum = (psi_k1 + psi_k2) * h; // k = 0 term of the correction series
    let mut corr_term = h;
    for k in 1..60 {
        let kf = k as f64;
        term *= h2 / (kf * (kf + 1.0));
        i1 += term;
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        corr_term *= h2 / (kf * (kf + 1.0));
        let add = (psi_k1 + psi_k2) * corr_term;
        sum += add;
        if term < 1e-18 * i1 && add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    h.ln() * i1 + 1.0 / x - 0.5 * sum
}

fn k1_integral(x: f64) -> f64 {
    // exp(-x cosh t) is negligible past cosh t = 745/x
    let t_max = libm::acosh((745.0 / x).max(2.0));
    let n = 600usize;
    let h = t_max / n as f64;
    let mut sum = 0.5 * (-x).exp(); // t = 0 endpoint, cosh 0 = 1
    for i in 1..n {
        let t = i as f64 * h;
        let ct = t.cosh();
        sum += (-x * ct).exp() * ct;
    }
    sum * h
}

/// Complete elliptic integral E(m) = ∫_0^{π/2} (1 - m sin²α)^{1/2} dα,
/// valid for m ≤ 1 (including large negative m).
pub fn elliptic_e(m: f64) -> f64 {
    assert!(m <= 1.0, "elliptic_e requires m <= 1");
    let (nodes, weights) = gauss_legendre_64();
    let a = 0.0;
    let b = std::f64::consts::FRAC_PI_2;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for i in 0..nodes.len() {
        let alpha = mid + half * nodes[i];
        let s = alpha.sin();
        sum += weights[i] * (1.0 - m * s * s).sqrt();
    }
    sum * half
}

/// 64-point Gauss-Legendre nodes/weights on [-1, 1], computed once by
/// Newton iteration on the Legendre polynomial.
pub fn gauss_legendre_64() -> (&'static [f64], &'static [f64]) {
    use std::sync::OnceLock;
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = TABLE.get_or_init(|| gauss_legendre(64));
    (n, w)
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_p(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_p(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_matches_reference_values() {
        // reference values from a 30-digit evaluation of K1
        let cases = [
            (0.1, 9.85384478087060613484854659668),
            (0.5, 1.65644112000330089369644540317),
            (1.0, 0.601907230197234574737540001536),
            (2.0, 0.139865881816522427284598807035),
            (2.8284271247461903, 0.0493799089937048381536330052741),
            (5.0, 0.00404461344545216420836502183754),
            (10.0, 1.86487734538255845968168581224e-5),
        ];
        for (x, want) in cases {
            let got = bessel_k1(x);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "K1({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn k1_branches_agree_at_crossover() {
        for &x in &[1.9f64, 1.95, 1.99] {
            let a = k1_series(x);
            let b = k1_integral(x);
            assert!(((a - b) / b).abs() < 1e-11, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn elliptic_e_known_points() {
        use std::f64::consts::PI;
        assert!((elliptic_e(0.0) - PI / 2.0).abs() < 1e-14);
        assert!((elliptic_e(1.0) - 1.0).abs() < 1e-9);
        // references from a 30-digit evaluation
        assert!((elliptic_e(-1.0) - 1.91009889451385600895238104109).abs() < 1e-12);
        assert!((elliptic_e(-5.0) - 2.83019824634587731251097815702).abs() < 1e-12);
    }

    #[test]
    fn norm_cdf_symmetry_and_tails() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        for &x in &[0.3, 1.0, 2.5, 6.0] {
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-14);
        }
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (n, w) = gauss_legendre_64();
        // integrate x^6 over [-1,1] = 2/7
        let s: f64 = n.iter().zip(w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-13);
    }
}
