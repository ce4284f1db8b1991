//! Spectral density, FFT covariance grids, spectral field simulation,
//! and the Matérn correlation oracle.

use crate::aniso::{AnisoMatrix, StationaryParams};
use crate::error::{Error, Result};
use crate::special::bessel_k1;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::io::Write;

/// Discretization of the Fourier domain over a physical box.
#[derive(Debug, Clone, Copy)]
pub struct FreqGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl FreqGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let pow2 = |n: usize| n >= 8 && n.is_power_of_two();
        if !pow2(nx) || !pow2(ny) || !(lx > 0.0) || !(ly > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grid sides must be powers of two >= 8 over a positive box, got {nx}x{ny} on {lx}x{ly}"
            )));
        }
        Ok(FreqGrid { nx, ny, lx, ly })
    }

    /// Signed frequency for index k along an axis of n cells over
    /// physical length l.
    fn freq(k: usize, n: usize, l: f64) -> f64 {
        let s = if k <= n / 2 {
            k as isize
        } else {
            k as isize - n as isize
        };
        s as f64 / l
    }
}

/// Real field sampled on a regular grid (row-major, x fastest).
#[derive(Debug, Clone)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Value at a signed lag (ix, iy), using the periodic FFT layout.
    pub fn at_lag(&self, ix: isize, iy: isize) -> f64 {
        let wrap = |k: isize, n: usize| (k.rem_euclid(n as isize)) as usize;
        self.at(wrap(ix, self.nx), wrap(iy, self.ny))
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// CSV export: header `x,y,value`, row-major, 9 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt9(ix as f64 * self.dx()),
                    fmt9(iy as f64 * self.dy()),
                    fmt9(self.at(ix, iy))
                )?;
            }
        }
        Ok(())
    }
}

/// Format with 9 significant digits.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Spectral density S(ξ) = 4π κ² σ_u² / (κ² + 4π² ξ' H ξ)².
pub fn spectral_density(xi: [f64; 2], params: &StationaryParams) -> f64 {
    spectral_density_h(xi, params, &params.h())
}

fn spectral_density_h(xi: [f64; 2], params: &StationaryParams, h: &AnisoMatrix) -> f64 {
    let k2 = params.kappa * params.kappa;
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let denom = k2 + four_pi2 * h.quad(xi);
    4.0 * std::f64::consts::PI * k2 * params.sigma_u * params.sigma_u / (denom * denom)
}

/// Matérn (smoothness 1) correlation: κh K1(κh), the exact correlation
/// of the isotropic model. Used as an independent oracle for the FEM and
/// FFT paths.
pub fn matern_correlation(distance: f64, kappa: f64) -> f64 {
    assert!(distance >= 0.0 && kappa > 0.0);
    let x = kappa * distance;
    if x < 1e-8 {
        return 1.0;
    }
    x * bessel_k1(x)
}

/// Fraction of the spectral mass inside a disc of the given radius in
/// frequency space (the total mass is σ_u² exactly).
///
/// The radial integral of S has a closed form
/// ∫_0^R S ρ dρ = 2π σ_u² R² / (κ² + b(φ) R²), with b(φ) the directional
/// quadratic form, leaving a 1-D angular quadrature.
pub fn spectral_mass_fraction(params: &StationaryParams, radius: f64) -> f64 {
    let h = params.h();
    let k2 = params.kappa * params.kappa;
    let pi = std::f64::consts::PI;
    let four_pi2 = 4.0 * pi * pi;
    let n = 512;
    let r2 = radius * radius;
    let mut sum = 0.0;
    for i in 0..n {
        // b has period π; midpoint rule on [0, π]
        let phi = pi * (i as f64 + 0.5) / n as f64;
        let dir = [phi.cos(), phi.sin()];
        let b = four_pi2 * h.quad(dir);
        sum += r2 / (k2 + b * r2);
    }
    4.0 * pi * pi / n as f64 * sum
}

fn check_grid(params: &StationaryParams, grid: &FreqGrid) -> Result<()> {
    let required = 4.0 * params.range();
    let side = grid.lx.min(grid.ly);
    if side < required {
        return Err(Error::BoxTooSmall { side, required });
    }
    let nyquist = (grid.nx as f64 / (2.0 * grid.lx)).min(grid.ny as f64 / (2.0 * grid.ly));
    let captured = spectral_mass_fraction(params, nyquist);
    if captured < 0.999 {
        return Err(Error::GridTooCoarse {
            captured,
            required: 0.999,
        });
    }
    Ok(())
}

fn ifft2(data: &mut [Complex64], nx: usize, ny: usize) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_inverse(nx);
    for row in data.chunks_exact_mut(nx) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_inverse(ny);
    let mut col = vec![Complex64::default(); ny];
    for x in 0..nx {
        for y in 0..ny {
            col[y] = data[y * nx + x];
        }
        col_fft.process(&mut col);
        for y in 0..ny {
            data[y * nx + x] = col[y];
        }
    }
}

/// Covariance function K(·, 0) on the grid, as the FFT of the spectrum.
/// Lag (0,0) sits at index (0,0); use [`GridField::at_lag`] for signed
/// lags.
pub fn covariance_grid(params: &StationaryParams, grid: &FreqGrid) -> Result<GridField> {
    check_grid(params, grid)?;
    let h = params.h();
    let nx = grid.nx;
    let ny = grid.ny;
    let dxi = 1.0 / (grid.lx * grid.ly);
    let mut data = vec![Complex64::default(); nx * ny];
    for ky in 0..ny {
        let fy = FreqGrid::freq(ky, ny, grid.ly);
        for kx in 0..nx {
            let fx = FreqGrid::freq(kx, nx, grid.lx);
            data[ky * nx + kx] = Complex64::new(spectral_density_h([fx, fy], params, &h) * dxi, 0.0);
        }
    }
    ifft2(&mut data, nx, ny);
    Ok(GridField {
        nx,
        ny,
        lx: grid.lx,
        ly: grid.ly,
        values: data.iter().map(|c| c.re).collect(),
    })
}

/// Draw one field realization by sampling the spectral process on the
/// grid and inverting with the FFT.
///
/// The spectral measure is discretized as independent complex Gaussians
/// with variance S(ξ_k) Δξ on a half-plane, completed by Hermitian
/// conjugation so the inverse transform is real.
pub fn spectral_sample(params: &StationaryParams, grid: &FreqGrid, seed: u64) -> Result<GridField> {
    check_grid(params, grid)?;
    let h = params.h();
    let nx = grid.nx;
    let ny = grid.ny;
    let dxi = 1.0 / (grid.lx * grid.ly);
    let mut rng = crate::rng::seeded(seed);
    let mut data = vec![Complex64::default(); nx * ny];
    let mut filled = vec![false; nx * ny];
    for ky in 0..ny {
        for kx in 0..nx {
            let idx = ky * nx + kx;
            if filled[idx] {
                continue;
            }
            let cx = (nx - kx) % nx;
            let cy = (ny - ky) % ny;
            let cidx = cy * nx + cx;
            let fx = FreqGrid::freq(kx, nx, grid.lx);
            let fy = FreqGrid::freq(ky, ny, grid.ly);
            let var = spectral_density_h([fx, fy], params, &h) * dxi;
            if cidx == idx {
                // self-conjugate bin: real Gaussian with full variance
                let z: f64 = rng.sample(StandardNormal);
                data[idx] = Complex64::new(var.sqrt() * z, 0.0);
                filled[idx] = true;
            } else {
                let zr: f64 = rng.sample(StandardNormal);
                let zi: f64 = rng.sample(StandardNormal);
                let s = (var / 2.0).sqrt();
                data[idx] = Complex64::new(s * zr, s * zi);
                data[cidx] = data[idx].conj();
                filled[idx] = true;
                filled[cidx] = true;
            }
        }
    }
    ifft2(&mut data, nx, ny);
    Ok(GridField {
        nx,
        ny,
        lx: grid.lx,
        ly: grid.ly,
        values: data.iter().map(|c| c.re).collect(),
    })
}
