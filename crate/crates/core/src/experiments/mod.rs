//! Parameter sweeps, concentration metrics, the change-of-variables identity
//! for the semiclassical scaling, the radial Pekar oracle and the
//! verification battery.

mod battery;
mod oracle;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

pub use battery::{
    verify_battery, BatteryCheck, BatteryConfig, BatteryReport, CheckStatus, LoadedSolution,
    ALL_CHECKS,
};
pub use oracle::{radial_oracle_pekar, OracleConfig, OracleResult};

use crate::catalog::{NonlinSpec, PotentialSpec};
use crate::error::{Error, Result};
use crate::fibering::{self, InitSpec, MountainPass, SolveOptions, SolveResult, SolveSummary};
use crate::functionals::Problem;
use crate::grid::{self, Field, GridSpec, MAX_DIM};
use crate::riesz::RieszPlan;

/// Where a field sits and how spread out it is.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Concentration {
    /// `∫x u² / ∫u²`.
    pub centroid: Vec<f64>,
    /// Node of largest `|u|`.
    pub argmax: Vec<f64>,
    /// `(∫|x - centroid|² u² / ∫u²)^{1/2}`.
    pub rms_width: f64,
}

impl Concentration {
    /// Metrics of `x ↦ u(x/s)` from those of `u`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            centroid: self.centroid.iter().map(|c| c * s).collect(),
            argmax: self.argmax.iter().map(|c| c * s).collect(),
            rms_width: self.rms_width * s,
        }
    }

    pub fn centroid_distance(&self, point: &[f64]) -> f64 {
        self.centroid
            .iter()
            .zip(point)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn concentration_metrics(u: &Field) -> Result<Concentration> {
    let g = u.grid();
    let dim = g.dim();
    let mass = u.norm_sq();
    if mass == 0.0 {
        return Err(Error::InvalidParameter(
            "concentration metrics need a nonzero field".into(),
        ));
    }
    let mut centroid = vec![0.0; dim];
    let mut second = 0.0;
    let mut best = 0;
    let mut x = [0.0; MAX_DIM];
    for (i, &v) in u.values().iter().enumerate() {
        g.node(i, &mut x);
        let w = v * v;
        for k in 0..dim {
            centroid[k] += w * x[k];
        }
        second += w * x[..dim].iter().map(|c| c * c).sum::<f64>();
        if v.abs() > u.values()[best].abs() {
            best = i;
        }
    }
    let cell = g.cell_volume();
    for c in &mut centroid {
        *c *= cell / mass;
    }
    let c2: f64 = centroid.iter().map(|c| c * c).sum();
    let rms_width = (second * cell / mass - c2).max(0.0).sqrt();
    g.node(best, &mut x);
    Ok(Concentration {
        centroid,
        argmax: x[..dim].to_vec(),
        rms_width,
    })
}

/// The unscaled semiclassical functional
/// `J_ε(v) = ε²/2 ‖∇v‖² + ½∫V v² - λε^{-α}/2 ∫(I_α∗F(v))F(v)`,
/// assembled node by node on the grid of `v`.
pub fn semiclassical_energy(
    v: &Field,
    potential: &PotentialSpec,
    nonlin: &NonlinSpec,
    plan: &RieszPlan,
    eps: f64,
    lambda: f64,
) -> Result<f64> {
    plan.grid().check_same(v.grid())?;
    let g = v.grid();
    let dim = g.dim();
    let kinetic = grid::gradient_sq_norm(v);
    let mut x = [0.0; MAX_DIM];
    let mut pot = 0.0;
    for (i, &val) in v.values().iter().enumerate() {
        g.node(i, &mut x);
        pot += potential.eval(&x[..dim])?.v * val * val;
    }
    pot *= g.cell_volume();
    let big_f = v.map(|s| nonlin.eval(s).1);
    let nonlocal = plan.convolve(&big_f)?.dot(&big_f);
    Ok(
        0.5 * eps * eps * kinetic + 0.5 * pot
            - 0.5 * lambda * eps.powf(-potential.alpha) * nonlocal,
    )
}

/// Both sides of `J_ε(v) = ε^N I^ε(u)` for `v(y) = u(y/ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingIdentity {
    pub eps: f64,
    pub unscaled: f64,
    pub rescaled: f64,
    pub relative_residual: f64,
}

/// Grid carrying `v(y) = u(y/ε)` with the same nodes in scaled units.
pub fn scaled_grid(grid: &GridSpec, eps: f64) -> Result<GridSpec> {
    GridSpec::new(grid.dim(), eps * grid.length(), grid.points())
}

/// Check the change of variables for one field. `scaled_plan` must live on
/// [`scaled_grid`] of the problem grid.
pub fn scaling_identity(
    problem: &Problem,
    u: &Field,
    scaled_plan: &RieszPlan,
) -> Result<ScalingIdentity> {
    let eps = problem.eps();
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(
            "the scaling identity needs eps > 0".into(),
        ));
    }
    let y_grid = scaled_grid(problem.grid(), eps)?;
    y_grid.check_same(scaled_plan.grid())?;
    let v = Field::from_values(y_grid, u.values().to_vec())?;
    let unscaled = semiclassical_energy(
        &v,
        problem.potential(),
        problem.nonlin(),
        scaled_plan,
        eps,
        problem.lambda(),
    )?;
    let b = problem.breakdown(u)?;
    let en = eps.powi(problem.dim() as i32);
    let rescaled = en * b.energy();
    let scale = en * (0.5 * b.a + 0.5 * b.b_pot.abs() + 0.5 * problem.lambda() * b.d.abs());
    Ok(ScalingIdentity {
        eps,
        unscaled,
        rescaled,
        relative_residual: (unscaled - rescaled).abs() / scale,
    })
}

/// One parameter value of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub solve: SolveSummary,
    /// Metrics in the original (unscaled) coordinates.
    pub concentration: Concentration,
    pub identity: Option<ScalingIdentity>,
    pub bound: Option<MountainPass>,
    /// `m - bound` when a bound was computed.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepVerdict {
    pub name: String,
    pub pass: bool,
    /// Hard verdicts abort or fail the run; soft ones are recorded only.
    pub hard: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub kind: String,
    pub points: Vec<SweepPoint>,
    pub verdicts: Vec<SweepVerdict>,
    #[serde(skip)]
    pub fields: Vec<Field>,
}

impl SweepResult {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.solve.converged)
    }

    pub const CSV_HEADER: &'static str =
        "parameter,m,converged,iterations,P_residual,grad_residual,centroid_distance,rms_width,identity_residual,bound,margin";

    /// One CSV row per point; `reference` is the point distances are measured from.
    pub fn csv_rows(&self, reference: &[f64]) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        self.points
            .iter()
            .map(|p| {
                format!(
                    "{:e},{:e},{},{},{:e},{:e},{:e},{:e},{},{},{}",
                    p.parameter,
                    p.solve.m,
                    p.solve.converged,
                    p.solve.iterations,
                    p.solve.pohozaev_residual,
                    p.solve.gradient_residual,
                    p.concentration.centroid_distance(reference),
                    p.concentration.rms_width,
                    opt(p.identity.map(|i| i.relative_residual)),
                    opt(p.bound.map(|b| b.bound)),
                    opt(p.margin),
                )
            })
            .collect()
    }
}

/// Tolerance of the scaling identity along an ε sweep.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Solve the rescaled problem for each `ε` in a descending list. With
/// `warm_start` each solve starts from the previous solution; otherwise the
/// points run in parallel from `init`.
pub fn sweep_epsilon(
    base: &Problem,
    eps_list: &[f64],
    init: &InitSpec,
    opts: &SolveOptions,
    warm_start: bool,
) -> Result<SweepResult> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("eps list is empty".into()));
    }
    if eps_list.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(Error::InvalidParameter(
            "eps values must be positive".into(),
        ));
    }
    if eps_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter(
            "eps list must be sorted in descending order".into(),
        ));
    }
    let x0 = base.potential().minimizer();
    let solve_at = |eps: f64, warm: Option<&Field>| -> Result<(SweepPoint, Field)> {
        let problem = base.with_potential(base.potential().clone(), eps)?;
        let result = match warm {
            None => fibering::solve_ground_state(&problem, init, opts)?,
            Some(u) => {
                opts.validate()?;
                problem.nonlin().require_admissible()?;
                fibering::descend(&problem, u, opts)?
            }
        };
        let plan = RieszPlan::new(scaled_grid(problem.grid(), eps)?, problem.alpha())?;
        let identity = scaling_identity(&problem, &result.field, &plan)?;
        if identity.relative_residual > IDENTITY_TOLERANCE {
            return Err(Error::Verification(format!(
                "scaling identity violated at eps = {eps}: J = {:e}, eps^N I = {:e}, relative residual {:e}",
                identity.unscaled, identity.rescaled, identity.relative_residual
            )));
        }
        let concentration = concentration_metrics(&result.field)?.scaled(eps);
        info!(
            "eps = {eps}: m = {:.10e}, converged = {}, centroid distance = {:.3e}",
            result.m,
            result.converged,
            concentration.centroid_distance(&x0)
        );
        let point = SweepPoint {
            parameter: eps,
            solve: result.summary(),
            concentration,
            identity: Some(identity),
            bound: None,
            margin: None,
        };
        Ok((point, result.field))
    };
    let solved: Vec<(SweepPoint, Field)> = if warm_start {
        let mut out: Vec<(SweepPoint, Field)> = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            let next = solve_at(eps, out.last().map(|(_, u)| u))?;
            out.push(next);
        }
        out
    } else {
        eps_list
            .par_iter()
            .map(|&eps| solve_at(eps, None))
            .collect::<Result<_>>()?
    };
    let (points, fields): (Vec<SweepPoint>, Vec<Field>) = solved.into_iter().unzip();
    let slack = 1e-8 * base.grid().length();
    let distances: Vec<f64> = points
        .iter()
        .map(|p| p.concentration.centroid_distance(&x0))
        .collect();
    let widths: Vec<f64> = points.iter().map(|p| p.concentration.rms_width).collect();
    let verdicts = vec![
        SweepVerdict {
            name: "centroid_distance_non_increasing".into(),
            pass: distances.windows(2).all(|w| w[1] <= w[0] + slack),
            hard: false,
            detail: format!("distances to the potential minimizer: {distances:?}"),
        },
        SweepVerdict {
            name: "rms_width_non_increasing".into(),
            pass: widths.windows(2).all(|w| w[1] <= w[0] + slack),
            hard: false,
            detail: format!("rms widths in original units: {widths:?}"),
        },
    ];
    Ok(SweepResult {
        kind: "epsilon".into(),
        points,
        verdicts,
        fields,
    })
}

/// Slack for the monotonicity of the autonomous levels in `λ`.
pub const LAMBDA_SLACK: f64 = 1e-6;

/// Autonomous levels `m_λ` for each `λ` and, when `bound_potential` is
/// given, the mountain-pass path bound built from the `λ = 1` solution.
pub fn sweep_lambda(
    autonomous: &Problem,
    lambda_list: &[f64],
    bound_potential: Option<&PotentialSpec>,
    init: &InitSpec,
    opts: &SolveOptions,
) -> Result<SweepResult> {
    if lambda_list.is_empty() {
        return Err(Error::InvalidParameter("lambda list is empty".into()));
    }
    if let Some(&l) = lambda_list.iter().find(|&&l| !(0.5..=1.0).contains(&l)) {
        return Err(Error::InvalidParameter(format!(
            "lambda values must lie in [1/2, 1], got {l}"
        )));
    }
    let mut results: Vec<SolveResult> = Vec::new();
    for &lambda in lambda_list {
        let r = fibering::solve_autonomous(&autonomous.with_lambda(lambda)?, init, opts)?;
        info!(
            "lambda = {lambda}: m = {:.10e}, converged = {}",
            r.m, r.converged
        );
        results.push(r);
    }

    let path_source = match (bound_potential, lambda_list.iter().position(|&l| l == 1.0)) {
        (None, _) => None,
        (Some(_), Some(k)) => Some(results[k].field.clone()),
        (Some(_), None) => {
            Some(fibering::solve_autonomous(&autonomous.with_lambda(1.0)?, init, opts)?.field)
        }
    };

    let mut points = Vec::new();
    let mut fields = Vec::new();
    for (&lambda, r) in lambda_list.iter().zip(results) {
        let bound = match (bound_potential, &path_source) {
            (Some(pot), Some(u1)) => {
                let p = autonomous
                    .with_lambda(lambda)?
                    .with_potential(pot.clone(), 0.0)?;
                Some(fibering::mountain_pass_upper_bound(&p, u1)?)
            }
            _ => None,
        };
        points.push(SweepPoint {
            parameter: lambda,
            concentration: concentration_metrics(&r.field)?,
            identity: None,
            margin: bound.map(|b| r.m - b.bound),
            bound,
            solve: r.summary(),
        });
        fields.push(r.field);
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].parameter.total_cmp(&points[b].parameter));
    let monotone = order
        .windows(2)
        .all(|w| points[w[1]].solve.m <= points[w[0]].solve.m + LAMBDA_SLACK);
    let mut verdicts = vec![SweepVerdict {
        name: "level_non_increasing_in_lambda".into(),
        pass: monotone,
        hard: true,
        detail: format!(
            "m by increasing lambda: {:?}",
            order
                .iter()
                .map(|&k| (points[k].parameter, points[k].solve.m))
                .collect::<Vec<_>>()
        ),
    }];
    if bound_potential.is_some() {
        let margins: Vec<f64> = points.iter().filter_map(|p| p.margin).collect();
        verdicts.push(SweepVerdict {
            name: "path_bound_below_level".into(),
            pass: margins.iter().all(|&m| m > 0.0),
            hard: false,
            detail: format!("margins m - bound: {margins:?}"),
        });
    }
    Ok(SweepResult {
        kind: "lambda".into(),
        points,
        verdicts,
        fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{NonlinVariant, PotentialVariant};
    use std::sync::Arc;

    fn gaussian(g: GridSpec, w: f64, shift: f64) -> Field {
        Field::from_fn(g, |x| {
            let r2 = (x[0] - shift).powi(2) + x[1..].iter().map(|c| c * c).sum::<f64>();
            (-r2 / (2.0 * w * w)).exp()
        })
    }

    #[test]
    fn metrics_of_gaussians() {
        let g = GridSpec::new(3, 16.0, 32).unwrap();
        let h = g.spacing();
        let c = concentration_metrics(&gaussian(g, 1.0, 0.0)).unwrap();
        assert!(c.centroid.iter().all(|x| x.abs() < h));
        let s = concentration_metrics(&gaussian(g, 1.0, 2.0)).unwrap();
        assert!((s.centroid[0] - 2.0).abs() < h);
        // u² = e^{-r²/w²} has per-axis variance w²/2.
        let w = 1.3;
        let c =
            concentration_metrics(&gaussian(GridSpec::new(3, 16.0, 64).unwrap(), w, 0.0)).unwrap();
        assert!((c.rms_width - w * 1.5f64.sqrt()).abs() / (w * 1.5f64.sqrt()) < 1e-3);
        assert!(concentration_metrics(&Field::zeros(g)).is_err());
    }

    #[test]
    fn scaling_identity_on_arbitrary_field() {
        let g = GridSpec::new(3, 12.0, 16).unwrap();
        let plan = Arc::new(RieszPlan::new(g, 2.0).unwrap());
        let pot = PotentialSpec::new(
            PotentialVariant::OscillatingWell {
                a: 2.0,
                b: 1.0,
                beta: 1.0,
            },
            3,
            2.0,
        )
        .unwrap();
        let nl = NonlinSpec::new(NonlinVariant::Power { p: 2.5 }, 3, 2.0).unwrap();
        let u = Field::from_fn(g, |x| {
            (1.0 + 0.3 * x[0] - 0.1 * x[1] * x[2])
                * (-x.iter().map(|c| c * c).sum::<f64>() / 4.0).exp()
        });
        for eps in [1.0, 0.5, 0.25] {
            let p = Problem::new(plan.clone(), pot.clone(), nl.clone(), 0.75, eps).unwrap();
            let y_plan = RieszPlan::new(scaled_grid(&g, eps).unwrap(), 2.0).unwrap();
            let id = scaling_identity(&p, &u, &y_plan).unwrap();
            assert!(id.relative_residual < 1e-10, "eps = {eps}: {id:?}");
        }
    }
}
