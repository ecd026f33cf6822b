//! Batch verification of the structural inequalities and identities.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::diagnostics::default_hls_chain;
use crate::catalog::{NonlinSpec, NonlinVariant, PotentialSpec, PotentialVariant, Witness};
use crate::error::{Error, Result};
use crate::fibering::gaussian;
use crate::functionals::{autonomous_identity_residual, g_elem, h_elem, Problem};
use crate::grid::{self, Field, GridSpec, MAX_DIM};
use crate::riesz::{riesz_convolve_direct, RieszPlan};

/// Every check the battery knows, in report order.
pub const ALL_CHECKS: [&str; 7] = [
    "elementary_positivity",
    "autonomous_identity",
    "key_inequality",
    "hardy",
    "hls_ratio",
    "riesz_direct",
    "loaded_pohozaev",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryConfig {
    /// Checks to run; empty means all.
    pub checks: Vec<String>,
    pub seed: u64,
    pub elementary_samples: usize,
    pub identity_triples: usize,
    pub identity_t: usize,
    pub key_fields: usize,
    pub key_t: usize,
    pub hardy_fields: usize,
    pub hls_fields: usize,
    pub riesz_fields: usize,
    /// Box length and points per axis of the three-dimensional grid used by
    /// the field checks.
    pub grid_length: f64,
    pub grid_points: usize,
    pub pohozaev_tolerance: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            seed: 0,
            elementary_samples: 10_000,
            identity_triples: 1000,
            identity_t: 1000,
            key_fields: 100,
            key_t: 20,
            hardy_fields: 100,
            hls_fields: 20,
            riesz_fields: 20,
            grid_length: 16.0,
            grid_points: 32,
            pohozaev_tolerance: 1e-4,
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self
            .checks
            .iter()
            .find(|c| !ALL_CHECKS.contains(&c.as_str()))
        {
            return Err(Error::Config(format!(
                "unknown battery check {c:?}; known checks: {}",
                ALL_CHECKS.join(", ")
            )));
        }
        GridSpec::new(3, self.grid_length, self.grid_points)?;
        if !(self.pohozaev_tolerance > 0.0) {
            return Err(Error::Config("pohozaev_tolerance must be positive".into()));
        }
        Ok(())
    }

    fn selected(&self) -> Vec<&'static str> {
        ALL_CHECKS
            .iter()
            .copied()
            .filter(|c| self.checks.is_empty() || self.checks.iter().any(|s| s == c))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryCheck {
    pub check: String,
    pub status: CheckStatus,
    /// Worst margin; negative values fail.
    pub margin: Option<f64>,
    pub witness: Option<Witness>,
    /// A failed soft check is reported but does not fail the battery.
    pub hard: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub checks: Vec<BatteryCheck>,
}

impl BatteryReport {
    pub fn hard_failures(&self) -> Vec<&BatteryCheck> {
        self.checks
            .iter()
            .filter(|c| c.hard && c.status == CheckStatus::Fail)
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.hard_failures().is_empty()
    }
}

/// A solution loaded from disk with the problem it claims to solve.
pub struct LoadedSolution {
    pub label: String,
    pub problem: Problem,
    pub field: Field,
}

/// Worst margin and where it occurred.
struct Worst {
    margin: f64,
    witness: Witness,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            witness: Witness {
                point: None,
                t: None,
            },
        }
    }

    fn offer(&mut self, margin: f64, point: Option<Vec<f64>>, t: Option<f64>) {
        if margin < self.margin || margin.is_nan() {
            self.margin = margin;
            self.witness = Witness { point, t };
        }
    }

    fn finish(self, name: &str, hard: bool, pass: bool, note: String) -> BatteryCheck {
        BatteryCheck {
            check: name.into(),
            status: if pass {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            margin: Some(self.margin),
            witness: Some(self.witness),
            hard,
            note,
        }
    }
}

fn rng(cfg: &BatteryConfig, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        cfg.seed
            .wrapping_mul(0x9E37_79B9)
            .wrapping_add(index as u64),
    )
}

fn random_gaussian(grid: &GridSpec, rng: &mut ChaCha8Rng) -> (Field, Vec<f64>) {
    let amplitude = rng.random_range(0.5..3.0);
    let width = rng.random_range(0.8..2.5);
    let center: Vec<f64> = (0..grid.dim())
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let mut params = vec![amplitude, width];
    params.extend(&center);
    (gaussian(grid, amplitude, width, &center), params)
}

fn elementary_positivity(cfg: &BatteryConfig, rng: &mut ChaCha8Rng) -> BatteryCheck {
    let mut worst = Worst::new();
    let mut ok = true;
    for _ in 0..cfg.elementary_samples {
        let dim = rng.random_range(3..=5usize);
        let alpha = rng.random_range(0.0..dim as f64);
        let t = 10f64.powf(rng.random_range(-2.0..2.0));
        let (g, h) = (g_elem(t, dim, alpha), h_elem(t, dim, alpha));
        let m = g.min(h);
        // Away from t = 1 both are strictly positive; near it they are O((t-1)²).
        if (t - 1.0).abs() > 1e-4 {
            ok &= m > 0.0;
        }
        ok &= m >= -1e-14;
        worst.offer(m, Some(vec![dim as f64, alpha]), Some(t));
    }
    for dim in 3..=5 {
        ok &= g_elem(1.0, dim, 1.0) == 0.0 && h_elem(1.0, dim, 1.0) == 0.0;
    }
    let note = "min(g, h) over random (t, N, alpha); both vanish exactly at t = 1".into();
    worst.finish("elementary_positivity", true, ok, note)
}

fn autonomous_identity(cfg: &BatteryConfig, rng: &mut ChaCha8Rng) -> BatteryCheck {
    let mut worst = Worst::new();
    for _ in 0..cfg.identity_triples {
        let (a, l2, d) = (
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..10.0),
        );
        let v_inf = rng.random_range(0.1..5.0);
        let lambda = rng.random_range(0.5..=1.0);
        let dim = rng.random_range(3..=5usize);
        let alpha = rng.random_range(0.05..dim as f64 - 0.05);
        for _ in 0..cfg.identity_t {
            let t = rng.random_range(0.1..10.0);
            let (r, s) = autonomous_identity_residual(a, l2, d, v_inf, lambda, t, dim, alpha);
            worst.offer(
                1e-12 - r.abs() / s,
                Some(vec![a, l2, d, v_inf, lambda]),
                Some(t),
            );
        }
    }
    let pass = worst.margin >= 0.0;
    worst.finish(
        "autonomous_identity",
        true,
        pass,
        "1e-12 minus relative residual".into(),
    )
}

fn key_inequality(cfg: &BatteryConfig, rng: &mut ChaCha8Rng) -> Result<BatteryCheck> {
    let grid = GridSpec::new(3, cfg.grid_length, cfg.grid_points)?;
    let plan = Arc::new(RieszPlan::new(grid, 2.0)?);
    let pot = PotentialSpec::new(
        PotentialVariant::InverseQuadratic { a: 3.0, b: 1.0 },
        3,
        2.0,
    )?;
    let problem = Problem::new(
        plan,
        pot,
        NonlinSpec::new(NonlinVariant::Pekar, 3, 2.0)?,
        1.0,
        1.0,
    )?;
    let mut worst = Worst::new();
    for _ in 0..cfg.key_fields {
        let (u, params) = random_gaussian(&grid, rng);
        let fiber = problem.fiber(&u)?;
        for _ in 0..cfg.key_t {
            let t = rng.random_range(0.2..5.0);
            let (gap, scale) = problem.key_inequality_gap(&fiber, t)?;
            worst.offer(gap / scale, Some(params.clone()), Some(t));
        }
    }
    let pass = worst.margin >= -1e-8;
    let note = "gap / scale for inverse_quadratic (a = 3, b = 1), threshold -1e-8".into();
    Ok(worst.finish("key_inequality", true, pass, note))
}

fn hardy(cfg: &BatteryConfig, rng: &mut ChaCha8Rng) -> Result<BatteryCheck> {
    let grid = GridSpec::new(3, cfg.grid_length, cfg.grid_points)?;
    let c = (grid.dim() as f64 - 2.0).powi(2) / 4.0;
    let mut worst = Worst::new();
    for _ in 0..cfg.hardy_fields {
        let (u, params) = random_gaussian(&grid, rng);
        let lhs = grid::gradient_sq_norm(&u);
        let mut x = [0.0; MAX_DIM];
        let weighted = Field::from_values(
            grid,
            u.values()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    grid.node(i, &mut x);
                    v * v / x[..3].iter().map(|c| c * c).sum::<f64>()
                })
                .collect(),
        )?;
        let rhs = c * grid::quadrature(&weighted);
        worst.offer((lhs - rhs) / (lhs + rhs), Some(params), None);
    }
    let pass = worst.margin >= -1e-6;
    let note = "(grad - Hardy bound) / (grad + Hardy bound), threshold -1e-6".into();
    Ok(worst.finish("hardy", true, pass, note))
}

fn hls_ratio(cfg: &BatteryConfig, rng: &mut ChaCha8Rng) -> Result<BatteryCheck> {
    let (dim, alpha) = (3usize, 2.0);
    let grid = GridSpec::new(dim, cfg.grid_length, cfg.grid_points)?;
    let plan = RieszPlan::new(grid, alpha)?;
    let nl = NonlinSpec::new(NonlinVariant::Power { p: 2.5 }, dim, alpha)?;
    let c1 = default_hls_chain(dim, alpha)?;
    let q = 2.0 * dim as f64 / (dim as f64 + alpha);
    let mut worst = Worst::new();
    for _ in 0..cfg.hls_fields {
        let (u, params) = random_gaussian(&grid, rng);
        let big_f = u.map(|s| nl.eval(s).1);
        let d = plan.convolve(&big_f)?.dot(&big_f);
        let norm = grid::quadrature(&big_f.map(|v| v.abs().powf(q))).powf(1.0 / q);
        worst.offer(1.0 - d / (c1 * norm * norm), Some(params), None);
    }
    let pass = worst.margin >= 0.0;
    let note = "1 - d / (C1 ||F(u)||^2), power p = 2.5; diagnostic only".into();
    Ok(worst.finish("hls_ratio", false, pass, note))
}

fn riesz_direct(cfg: &BatteryConfig, rng: &mut ChaCha8Rng) -> Result<BatteryCheck> {
    let grid = GridSpec::new(3, 4.0, 8)?;
    let mut worst = Worst::new();
    for k in 0..cfg.riesz_fields {
        let alpha = [0.5, 1.0, 2.0, 2.5][k % 4];
        let plan = RieszPlan::new(grid, alpha)?;
        let values = (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let g = Field::from_values(grid, values)?;
        let fast = plan.convolve(&g)?;
        let slow = riesz_convolve_direct(&grid, alpha, &g)?;
        let err = fast
            .values()
            .iter()
            .zip(slow.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / slow.max_abs();
        worst.offer(1e-12 - err, Some(vec![alpha]), None);
    }
    let pass = worst.margin >= 0.0;
    Ok(worst.finish(
        "riesz_direct",
        true,
        pass,
        "1e-12 minus max relative error on 8^3".into(),
    ))
}

fn loaded_pohozaev(cfg: &BatteryConfig, loaded: &[LoadedSolution]) -> Result<BatteryCheck> {
    if loaded.is_empty() {
        return Ok(BatteryCheck {
            check: "loaded_pohozaev".into(),
            status: CheckStatus::Skipped,
            margin: None,
            witness: None,
            hard: true,
            note: "no solutions loaded".into(),
        });
    }
    let mut worst = Worst::new();
    let mut labels = Vec::new();
    for (k, s) in loaded.iter().enumerate() {
        let b = s.problem.breakdown(&s.field)?;
        let rel = b.pohozaev().abs() / b.pohozaev_scale();
        worst.offer(cfg.pohozaev_tolerance - rel, Some(vec![k as f64]), None);
        labels.push(s.label.clone());
    }
    let pass = worst.margin >= 0.0;
    let note = format!("tolerance minus relative Pohozaev residual; solutions {labels:?}");
    Ok(worst.finish("loaded_pohozaev", true, pass, note))
}

/// Run the selected checks in parallel and report them in fixed order.
pub fn verify_battery(cfg: &BatteryConfig, loaded: &[LoadedSolution]) -> Result<BatteryReport> {
    cfg.validate()?;
    let selected = cfg.selected();
    let checks = selected
        .par_iter()
        .enumerate()
        .map(|(k, &name)| {
            let mut r = rng(cfg, k);
            match name {
                "elementary_positivity" => Ok(elementary_positivity(cfg, &mut r)),
                "autonomous_identity" => Ok(autonomous_identity(cfg, &mut r)),
                "key_inequality" => key_inequality(cfg, &mut r),
                "hardy" => hardy(cfg, &mut r),
                "hls_ratio" => hls_ratio(cfg, &mut r),
                "riesz_direct" => riesz_direct(cfg, &mut r),
                "loaded_pohozaev" => loaded_pohozaev(cfg, loaded),
                other => unreachable!("unlisted check {other}"),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatteryReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_battery_passes() {
        let report = verify_battery(&BatteryConfig::default(), &[]).unwrap();
        for c in &report.checks {
            assert!(c.status != CheckStatus::Fail, "{c:?}");
        }
        assert_eq!(report.checks.len(), ALL_CHECKS.len());
        assert!(report.passed());
    }

    #[test]
    fn selection_keeps_report_order_and_rejects_unknown_names() {
        let cfg = BatteryConfig {
            checks: vec!["hardy".into(), "elementary_positivity".into()],
            elementary_samples: 100,
            hardy_fields: 3,
            ..BatteryConfig::default()
        };
        let names: Vec<_> = verify_battery(&cfg, &[])
            .unwrap()
            .checks
            .into_iter()
            .map(|c| c.check)
            .collect();
        assert_eq!(names, ["elementary_positivity", "hardy"]);
        let bad = BatteryConfig {
            checks: vec!["hardly".into()],
            ..BatteryConfig::default()
        };
        assert!(verify_battery(&bad, &[]).is_err());
    }
}
