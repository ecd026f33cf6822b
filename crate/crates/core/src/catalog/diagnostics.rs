//! Coercivity constants reported alongside solves. They are derived from
//! classical inequalities and never gate the solver.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::potential::PotentialSpec;
use crate::error::{Error, Result};
use crate::optim::log_space;
use crate::riesz::{riesz_constant, unit_ball_volume};

/// Sharp Sobolev constant `S` in `S‖u‖²_{2*} ≤ ‖∇u‖²₂`.
pub fn sharp_sobolev(dim: usize) -> f64 {
    let n = dim as f64;
    std::f64::consts::PI * n * (n - 2.0) * (gamma(n / 2.0) / gamma(n)).powf(2.0 / n)
}

/// Sharp diagonal Hardy–Littlewood–Sobolev constant for the kernel `|x|^{-λ}`.
pub fn sharp_hls(dim: usize, lambda: f64) -> f64 {
    let n = dim as f64;
    std::f64::consts::PI.powf(lambda / 2.0) * gamma(n / 2.0 - lambda / 2.0)
        / gamma(n - lambda / 2.0)
        * (gamma(n / 2.0) / gamma(n)).powf(-1.0 + lambda / n)
}

/// Default `C1`: the HLS constant scaled by the Riesz normalization.
pub fn default_hls_chain(dim: usize, alpha: f64) -> Result<f64> {
    Ok(riesz_constant(alpha, dim)? * sharp_hls(dim, dim as f64 - alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConstants {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: Option<f64>,
    pub rho0: f64,
    /// Radius found by the tail search used in `gamma1`.
    pub tail_radius: f64,
    /// Sampled `sup |∇V·x|`.
    pub m0: f64,
    pub sobolev_s: f64,
    pub hls_c1: f64,
    pub theta: f64,
}

/// `γ₁, γ₂, γ₃, ρ₀` for a potential, given `S` and `C1`.
pub fn diagnostic_constants(
    pot: &PotentialSpec,
    sobolev_s: f64,
    hls_c1: f64,
) -> Result<DiagnosticConstants> {
    if !(sobolev_s > 0.0 && hls_c1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diagnostic constants need S > 0 and C1 > 0, got S = {sobolev_s}, C1 = {hls_c1}"
        )));
    }
    let n = pot.dim as f64;
    let alpha = pot.alpha;
    let v_inf = pot.v_inf();
    let theta = pot.constants.theta.unwrap_or(0.0);

    let radii = log_space(1e-3, 1e6, 4000);
    let samples: Vec<_> = radii
        .iter()
        .map(|&r| pot.eval_radius(r))
        .collect::<Result<_>>()?;
    let m0 = samples
        .iter()
        .fold(0.0f64, |m, v| m.max(v.radial_derivative.abs()));

    // Smallest R past which V stays above V_inf/2 and the tail inequality holds.
    let mut suffix_ok = vec![true; radii.len() + 1];
    for k in (0..radii.len()).rev() {
        suffix_ok[k] = suffix_ok[k + 1] && samples[k].v >= 0.5 * v_inf;
    }
    let lhs_coeff = (n - 2.0).powi(2) * (2.0 + alpha) * theta / 4.0 + m0 + alpha * v_inf;
    let rhs = (n + alpha) * v_inf / 4.0;
    let tail_radius = radii
        .iter()
        .enumerate()
        .find(|&(k, &r)| suffix_ok[k] && lhs_coeff * r.powf(-n) < rhs)
        .map(|(_, &r)| r)
        .ok_or_else(|| Error::Failed("no tail radius found up to 1e6".into()))?;

    let omega = unit_ball_volume(pot.dim);
    let gamma1 = ((1.0 - theta) * (n - 2.0) / 2.0)
        .min((1.0 - theta) * (n - 2.0) * sobolev_s / (2.0 * omega.powf(2.0 / n)))
        .min((n + alpha) * tail_radius.powf(-alpha) * v_inf / 4.0);
    let gamma2 = n - 2.0 + (2.0 + alpha) * theta + (n + alpha) * v_inf;
    let gamma3 = pot
        .constants
        .theta_prime
        .map(|tp| alpha * 1f64.min((1.0 - tp) * pot.v_min()));
    Ok(DiagnosticConstants {
        gamma1,
        gamma2,
        gamma3,
        rho0: rho0(gamma1, hls_c1, pot.dim, alpha),
        tail_radius,
        m0,
        sobolev_s,
        hls_c1,
        theta,
    })
}

/// `min{1, [γ₁ / (2(1 + C1))]^{N/(2α)}}`.
pub fn rho0(gamma1: f64, hls_c1: f64, dim: usize, alpha: f64) -> f64 {
    1f64.min((gamma1 / (2.0 * (1.0 + hls_c1))).powf(dim as f64 / (2.0 * alpha)))
}
