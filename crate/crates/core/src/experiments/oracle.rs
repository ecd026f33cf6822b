//! One-dimensional self-consistent solver for the radial Choquard–Pekar
//! ground state `-Δu + u = (I₂∗u²/2)u` in three dimensions.
//!
//! The unknown is `w = rψ` on a uniform grid of `(0, R]`, where
//! `-Δψ = -w''/r`. Each sweep takes the lowest Dirichlet eigenpair of
//! `-w'' - Φw` at fixed mass, with `Φ` the radial Newton potential of
//! `ψ²/2`, and mixes densities. The converged profile solves the equation
//! up to an eigenvalue `E < 0`, which the scaling `u(x) = κ²ψ(κx)`,
//! `κ = (-E)^{-1/2}`, removes.

use std::f64::consts::PI;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub r_max: f64,
    pub dr: f64,
    /// Starting `‖ψ‖²₂`; rescaled so that `κ → 1`.
    pub mass: f64,
    pub mixing: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the eigenvalue change per sweep.
    pub tol: f64,
    /// Number of mass rescalings.
    pub rescalings: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            r_max: 30.0,
            dr: 0.01,
            mass: 88.0,
            mixing: 0.5,
            max_iterations: 2000,
            tol: 1e-13,
            rescalings: 3,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("oracle: {m}")));
        if !(self.r_max >= 30.0 && self.r_max.is_finite()) {
            return bad("r_max must be at least 30");
        }
        if !(self.dr > 0.0 && self.dr <= 0.1) {
            return bad("dr must lie in (0, 0.1]");
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass must be positive");
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return bad("mixing must lie in (0, 1]");
        }
        if self.max_iterations == 0 || self.rescalings == 0 {
            return bad("iteration caps must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Ground-state level `½a + ½‖u‖² - ½d`.
    pub m: f64,
    pub a: f64,
    pub l2: f64,
    pub d: f64,
    /// `|½a + 3/2 l2 - 5/2 d|` over the sum of the term magnitudes.
    pub pohozaev_residual: f64,
    pub kappa: f64,
    pub eigenvalue: f64,
    pub iterations: usize,
}

/// Newton potential `Φ(r_i) = (1/r)∫₀^r s²ρ + ∫_r^R sρ` with `ρ = ψ²/2`,
/// by cumulative trapezoid sums. `w[i]` lives at `r = (i + 1)dr`.
fn newton_potential(w: &[f64], dr: f64) -> Vec<f64> {
    let k = w.len();
    let r = |i: usize| (i + 1) as f64 * dr;
    // s²ρ = w²/2 and sρ = w²/(2s); both vanish at s = 0.
    let inner: Vec<f64> = w.iter().map(|v| 0.5 * v * v).collect();
    let outer: Vec<f64> = (0..k).map(|i| inner[i] / r(i)).collect();
    let mut below = vec![0.0; k];
    let mut acc = 0.5 * dr * inner[0];
    below[0] = acc;
    for i in 1..k {
        acc += 0.5 * dr * (inner[i - 1] + inner[i]);
        below[i] = acc;
    }
    let mut above = vec![0.0; k];
    // The Dirichlet node at R carries w = 0.
    let mut acc = 0.5 * dr * outer[k - 1];
    above[k - 1] = acc;
    for i in (0..k - 1).rev() {
        acc += 0.5 * dr * (outer[i] + outer[i + 1]);
        above[i] = acc;
    }
    (0..k).map(|i| below[i] / r(i) + above[i]).collect()
}

/// Number of eigenvalues below `x` of the tridiagonal matrix with the given
/// diagonal and constant off-diagonal `off`.
fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        q = d - x - if i == 0 { 0.0 } else { off * off / q };
        if q == 0.0 {
            q = f64::EPSILON * (d.abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve `(T - σ)x = b` for the tridiagonal `T` by the Thomas algorithm.
fn thomas(diag: &[f64], off: f64, sigma: f64, b: &[f64]) -> Vec<f64> {
    let k = diag.len();
    let mut c = vec![0.0; k];
    let mut x = vec![0.0; k];
    let mut m = diag[0] - sigma;
    c[0] = off / m;
    x[0] = b[0] / m;
    for i in 1..k {
        m = diag[i] - sigma - off * c[i - 1];
        c[i] = off / m;
        x[i] = (b[i] - off * x[i - 1]) / m;
    }
    for i in (0..k - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Lowest eigenpair of `-w'' - Φw` with Dirichlet ends, `w` scaled to
/// `4π∫w² = mass` and positive.
fn ground_eigenpair(phi: &[f64], dr: f64, mass: f64, guess: &[f64]) -> (f64, Vec<f64>) {
    let inv = 1.0 / (dr * dr);
    let diag: Vec<f64> = phi.iter().map(|p| 2.0 * inv - p).collect();
    let off = -inv;
    let mut lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * inv;
    let mut hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * inv;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(&diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let e = lo;
    // Shift just below the eigenvalue keeps T - σ positive definite.
    let sigma = e - 1e-9 * (1.0 + e.abs());
    let mut x = guess.to_vec();
    for _ in 0..4 {
        x = thomas(&diag, off, sigma, &x);
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= n);
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let norm = 4.0 * PI * dr * x.iter().map(|v| v * v).sum::<f64>();
    let s = (mass / norm).sqrt();
    x.iter_mut().for_each(|v| *v *= s);
    (e, x)
}

struct Profile {
    eigenvalue: f64,
    w: Vec<f64>,
    iterations: usize,
}

fn self_consistent(cfg: &OracleConfig, mass: f64, start: Option<Vec<f64>>) -> Result<Profile> {
    let k = (cfg.r_max / cfg.dr).round() as usize - 1;
    let dr = cfg.r_max / (k + 1) as f64;
    let mut w = start.unwrap_or_else(|| {
        (0..k)
            .map(|i| {
                let r = (i + 1) as f64 * dr;
                r * (-r * r / 4.0).exp()
            })
            .collect()
    });
    let norm = 4.0 * PI * dr * w.iter().map(|v| v * v).sum::<f64>();
    w.iter_mut().for_each(|v| *v *= (mass / norm).sqrt());
    let mut density: Vec<f64> = w.iter().map(|v| v * v).collect();
    let mut prev = f64::NAN;
    for it in 1..=cfg.max_iterations {
        let amp: Vec<f64> = density.iter().map(|d| d.sqrt()).collect();
        let phi = newton_potential(&amp, dr);
        let (e, next) = ground_eigenpair(&phi, dr, mass, &w);
        w = next;
        for (d, v) in density.iter_mut().zip(&w) {
            *d = (1.0 - cfg.mixing) * *d + cfg.mixing * v * v;
        }
        if (e - prev).abs() <= cfg.tol * e.abs() {
            debug!("oracle: mass {mass}, eigenvalue {e} after {it} sweeps");
            return Ok(Profile {
                eigenvalue: e,
                w,
                iterations: it,
            });
        }
        prev = e;
    }
    Err(Error::Failed(format!(
        "radial oracle did not converge in {} sweeps",
        cfg.max_iterations
    )))
}

/// Ground-state level of the three-dimensional Choquard–Pekar equation,
/// computed independently of the spectral grid.
pub fn radial_oracle_pekar(cfg: &OracleConfig) -> Result<OracleResult> {
    cfg.validate()?;
    let mut mass = cfg.mass;
    let mut start = None;
    let mut total = 0;
    let mut last = None;
    for _ in 0..cfg.rescalings {
        let p = self_consistent(cfg, mass, start.take())?;
        total += p.iterations;
        if !(p.eigenvalue < 0.0) {
            return Err(Error::Failed(format!(
                "radial oracle found no bound state (eigenvalue {})",
                p.eigenvalue
            )));
        }
        let kappa = 1.0 / (-p.eigenvalue).sqrt();
        mass *= kappa;
        start = Some(p.w.clone());
        last = Some((p, kappa));
    }
    let (p, kappa) = last.expect("at least one rescaling");
    let k = p.w.len();
    let dr = cfg.r_max / (k + 1) as f64;
    let w = &p.w;
    let mut grad = w[0] * w[0] + w[k - 1] * w[k - 1];
    for i in 1..k {
        grad += (w[i] - w[i - 1]).powi(2);
    }
    let a_psi = 4.0 * PI * grad / dr;
    let l2_psi = 4.0 * PI * dr * w.iter().map(|v| v * v).sum::<f64>();
    let phi = newton_potential(w, dr);
    let d_psi = 4.0
        * PI
        * dr
        * w.iter()
            .zip(&phi)
            .map(|(v, f)| 0.5 * f * v * v)
            .sum::<f64>();
    let k3 = kappa.powi(3);
    let (a, l2, d) = (k3 * a_psi, kappa * l2_psi, k3 * d_psi);
    let pohozaev = 0.5 * a + 1.5 * l2 - 2.5 * d;
    Ok(OracleResult {
        m: 0.5 * a + 0.5 * l2 - 0.5 * d,
        a,
        l2,
        d,
        pohozaev_residual: pohozaev.abs() / (0.5 * a + 1.5 * l2 + 2.5 * d),
        kappa,
        eigenvalue: p.eigenvalue,
        iterations: total,
    })
}
