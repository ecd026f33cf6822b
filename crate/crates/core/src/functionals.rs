//! Energy and Pohozaev functionals, their gradient, fiber maps and the
//! scaling identities they satisfy.
//!
//! Everything is assembled from five quadratures of a field `u`:
//! `a = ‖∇u‖²`, `b_pot = ∫V_ε u²`, `b_poh = ∫[NV + ∇V·x]_ε u²`,
//! `d = ∫(I_α∗F(u))F(u)` and `l2 = ‖u‖²`. Dilations `u_t = u(·/t)` are never
//! resampled; their energies follow from the scaling laws of these pieces.

use std::sync::Arc;

use serde::Serialize;

use crate::catalog::{NonlinSpec, PotentialSpec};
use crate::error::{Error, Result};
use crate::grid::{self, Field, GridSpec};
use crate::riesz::RieszPlan;

/// `2 + α - (N+α)t^{N-2} + (N-2)t^{N+α}`.
pub fn g_elem(t: f64, dim: usize, alpha: f64) -> f64 {
    if t == 1.0 {
        return 0.0;
    }
    let n = dim as f64;
    2.0 + alpha - (n + alpha) * t.powf(n - 2.0) + (n - 2.0) * t.powf(n + alpha)
}

/// `α - (N+α)t^N + N t^{N+α}`.
pub fn h_elem(t: f64, dim: usize, alpha: f64) -> f64 {
    if t == 1.0 {
        return 0.0;
    }
    let n = dim as f64;
    alpha - (n + alpha) * t.powf(n) + n * t.powf(n + alpha)
}

/// Membership in the set where the nonlocal term is positive.
pub fn lambda_membership(d: f64, threshold: f64) -> bool {
    d > threshold
}

/// The scalar pieces of the energy of one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub a: f64,
    pub b_pot: f64,
    pub b_poh: f64,
    pub d: f64,
    pub l2: f64,
    pub lambda: f64,
    pub eps: f64,
    pub dim: usize,
    pub alpha: f64,
}

/// Serializable view of a breakdown including the derived values.
#[derive(Debug, Clone, Serialize)]
pub struct BreakdownRecord {
    pub a: f64,
    pub b_pot: f64,
    pub b_poh: f64,
    pub d: f64,
    pub l2: f64,
    pub lambda: f64,
    pub eps: f64,
    #[serde(rename = "I")]
    pub energy: f64,
    #[serde(rename = "P")]
    pub pohozaev: f64,
}

impl EnergyBreakdown {
    /// `(a + b_pot)/2 - λd/2`.
    pub fn energy(&self) -> f64 {
        scaled_energy(self.a, self.b_pot, self.d, self.lambda, 1.0, 1.0, 1.0)
    }

    /// `(N-2)a/2 + b_poh/2 - (N+α)λd/2`.
    pub fn pohozaev(&self) -> f64 {
        let n = self.dim as f64;
        0.5 * (n - 2.0) * self.a + 0.5 * self.b_poh - 0.5 * (n + self.alpha) * self.lambda * self.d
    }

    /// `a + |b_poh| + d`, the size against which Pohozaev residuals are measured.
    pub fn pohozaev_scale(&self) -> f64 {
        self.a + self.b_poh.abs() + self.d.abs()
    }

    /// Same field scalars with another `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    pub fn record(&self) -> BreakdownRecord {
        BreakdownRecord {
            a: self.a,
            b_pot: self.b_pot,
            b_poh: self.b_poh,
            d: self.d,
            l2: self.l2,
            lambda: self.lambda,
            eps: self.eps,
            energy: self.energy(),
            pohozaev: self.pohozaev(),
        }
    }

    pub const CSV_HEADER: &'static str = "a,b_pot,b_poh,d,lambda,eps,I,P";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.a,
            self.b_pot,
            self.b_poh,
            self.d,
            self.lambda,
            self.eps,
            self.energy(),
            self.pohozaev()
        )
    }
}

/// `½p₁a + ½p₂b - ½λp₃d`; with unit powers this is the energy itself, so
/// fiber values at `t = 1` agree with it bit for bit.
fn scaled_energy(a: f64, b: f64, d: f64, lambda: f64, p1: f64, p2: f64, p3: f64) -> f64 {
    0.5 * (p1 * a) + 0.5 * (p2 * b) - 0.5 * (lambda * (p3 * d))
}

/// Nodes grouped by distance from the origin.
#[derive(Debug, Clone)]
struct Shells {
    radii: Vec<f64>,
    node_shell: Vec<u32>,
}

impl Shells {
    fn new(grid: &GridSpec) -> Self {
        let n = grid.points() as i64;
        let dim = grid.dim();
        let keys: Vec<u64> = (0..grid.len())
            .map(|flat| {
                let mut idx = [0usize; grid::MAX_DIM];
                grid.multi_index(flat, &mut idx);
                idx[..dim]
                    .iter()
                    .map(|&i| {
                        let m = 2 * i as i64 + 1 - n;
                        (m * m) as u64
                    })
                    .sum()
            })
            .collect();
        let mut unique = keys.clone();
        unique.sort_unstable();
        unique.dedup();
        let half = 0.5 * grid.spacing();
        let radii = unique.iter().map(|&k| half * (k as f64).sqrt()).collect();
        let node_shell = keys
            .iter()
            .map(|k| unique.binary_search(k).expect("key present") as u32)
            .collect();
        Self { radii, node_shell }
    }

    /// Per-shell sums of `h^N u_i²`.
    fn weights(&self, u: &Field) -> Vec<f64> {
        let cell = u.grid().cell_volume();
        let mut w = vec![0.0; self.radii.len()];
        for (&s, &v) in self.node_shell.iter().zip(u.values()) {
            w[s as usize] += v * v;
        }
        for x in &mut w {
            *x *= cell;
        }
        w
    }
}

/// A fully specified energy functional on one grid.
#[derive(Debug, Clone)]
pub struct Problem {
    plan: Arc<RieszPlan>,
    potential: PotentialSpec,
    nonlin: NonlinSpec,
    lambda: f64,
    eps: f64,
    shells: Arc<Shells>,
    /// `V_ε` per shell.
    shell_v: Vec<f64>,
    /// `N V_ε + (∇V·x)_ε` per shell.
    shell_poh: Vec<f64>,
}

impl Problem {
    pub fn new(
        plan: Arc<RieszPlan>,
        potential: PotentialSpec,
        nonlin: NonlinSpec,
        lambda: f64,
        eps: f64,
    ) -> Result<Self> {
        let grid = *plan.grid();
        if potential.dim != grid.dim() || nonlin.dim != grid.dim() {
            return Err(Error::InvalidParameter(format!(
                "potential (N={}) and nonlinearity (N={}) must match {grid}",
                potential.dim, nonlin.dim
            )));
        }
        if potential.alpha != plan.alpha() || nonlin.alpha != plan.alpha() {
            return Err(Error::InvalidParameter(
                "alpha differs between plan and catalog specs".into(),
            ));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must be finite and >= 0, got {eps}"
            )));
        }
        let shells = Arc::new(Shells::new(&grid));
        Self::assemble(plan, potential, nonlin, lambda, eps, shells)
    }

    fn assemble(
        plan: Arc<RieszPlan>,
        potential: PotentialSpec,
        nonlin: NonlinSpec,
        lambda: f64,
        eps: f64,
        shells: Arc<Shells>,
    ) -> Result<Self> {
        let scale = if eps == 0.0 { 1.0 } else { eps };
        let n = potential.dim as f64;
        let mut shell_v = Vec::with_capacity(shells.radii.len());
        let mut shell_poh = Vec::with_capacity(shells.radii.len());
        for &r in &shells.radii {
            let v = potential.eval_radius(scale * r)?;
            shell_v.push(v.v);
            shell_poh.push(n * v.v + v.radial_derivative);
        }
        Ok(Self {
            plan,
            potential,
            nonlin,
            lambda,
            eps,
            shells,
            shell_v,
            shell_poh,
        })
    }

    /// Same functional with another `λ`, reusing the plan and shell tables.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    /// Same functional with another potential or `ε`.
    pub fn with_potential(&self, potential: PotentialSpec, eps: f64) -> Result<Self> {
        Self::assemble(
            self.plan.clone(),
            potential,
            self.nonlin.clone(),
            self.lambda,
            eps,
            self.shells.clone(),
        )
    }

    pub fn grid(&self) -> &GridSpec {
        self.plan.grid()
    }

    pub fn plan(&self) -> &Arc<RieszPlan> {
        &self.plan
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn nonlin(&self) -> &NonlinSpec {
        &self.nonlin
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.potential.dim
    }

    pub fn alpha(&self) -> f64 {
        self.potential.alpha
    }

    fn eps_scale(&self) -> f64 {
        if self.eps == 0.0 {
            1.0
        } else {
            self.eps
        }
    }

    /// `V_ε` sampled at every node.
    pub fn potential_field(&self) -> Field {
        let values = self
            .shells
            .node_shell
            .iter()
            .map(|&s| self.shell_v[s as usize])
            .collect();
        Field::from_values(*self.grid(), values).expect("finite potential")
    }

    /// `F(u)` and `I_α ∗ F(u)`.
    fn nonlocal(&self, u: &Field) -> Result<(Field, Field)> {
        let big_f = u.map(|v| self.nonlin.eval(v).1);
        let conv = self.plan.convolve(&big_f)?;
        Ok((big_f, conv))
    }

    /// All five quadratures of `u`.
    pub fn breakdown(&self, u: &Field) -> Result<EnergyBreakdown> {
        Ok(self.evaluate(u)?.breakdown)
    }

    /// Breakdown of `u` together with `I_α ∗ F(u)`, which the gradient reuses.
    pub fn evaluate(&self, u: &Field) -> Result<Evaluation> {
        self.grid().check_same(u.grid())?;
        let a = grid::gradient_sq_norm(u);
        let w = self.shells.weights(u);
        let l2: f64 = w.iter().sum();
        let b_pot = w.iter().zip(&self.shell_v).map(|(w, v)| w * v).sum();
        let b_poh = w.iter().zip(&self.shell_poh).map(|(w, v)| w * v).sum();
        let (big_f, conv) = self.nonlocal(u)?;
        let d = conv.dot(&big_f);
        for (name, v) in [
            ("a", a),
            ("b_pot", b_pot),
            ("b_poh", b_poh),
            ("d", d),
            ("l2", l2),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("energy term {name}")));
            }
        }
        let breakdown = EnergyBreakdown {
            a,
            b_pot,
            b_poh,
            d,
            l2,
            lambda: self.lambda,
            eps: self.eps,
            dim: self.dim(),
            alpha: self.alpha(),
        };
        Ok(Evaluation { breakdown, conv })
    }

    /// `-Δu + V_ε u - λ(I_α∗F(u))f(u)`.
    pub fn l2_gradient(&self, u: &Field) -> Result<Field> {
        let eval = self.evaluate(u)?;
        self.fiber_gradient(u, &eval, 1.0)
    }

    /// Gradient in `u` of `I(u_t)`:
    /// `t^{N-2}(-Δu) + t^N V_ε(t·)u - λt^{N+α}(I_α∗F(u))f(u)`.
    ///
    /// At `t = 1` this is the L² gradient of the energy.
    pub fn fiber_gradient(&self, u: &Field, eval: &Evaluation, t: f64) -> Result<Field> {
        self.grid().check_same(u.grid())?;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fiber parameter must be positive, got {t}"
            )));
        }
        let n = self.dim() as f64;
        let scaled_v;
        let shell_v = if t == 1.0 {
            &self.shell_v
        } else {
            let scale = self.eps_scale() * t;
            scaled_v = self
                .shells
                .radii
                .iter()
                .map(|r| self.potential.eval_radius(scale * r).map(|v| v.v))
                .collect::<Result<Vec<_>>>()?;
            &scaled_v
        };
        let (c_kin, c_pot, c_nl) = if t == 1.0 {
            (1.0, 1.0, self.lambda)
        } else {
            (
                t.powf(n - 2.0),
                t.powf(n),
                self.lambda * t.powf(n + self.alpha()),
            )
        };
        let lap = grid::laplacian(u);
        let conv = &eval.conv;
        let values: Vec<f64> = (0..u.values().len())
            .map(|i| {
                let v = u.values()[i];
                let pot = shell_v[self.shells.node_shell[i] as usize];
                -c_kin * lap.values()[i] + c_pot * pot * v
                    - c_nl * conv.values()[i] * self.nonlin.eval(v).0
            })
            .collect();
        Field::from_values(*self.grid(), values)
    }

    /// Gradient of the Pohozaev functional:
    /// `(N-2)(-Δu) + [NV + ∇V·x]_ε u - (N+α)λ(I_α∗F(u))f(u)`.
    pub fn pohozaev_gradient(&self, u: &Field, eval: &Evaluation) -> Result<Field> {
        self.grid().check_same(u.grid())?;
        let n = self.dim() as f64;
        let c_nl = (n + self.alpha()) * self.lambda;
        let lap = grid::laplacian(u);
        let conv = &eval.conv;
        let values: Vec<f64> = (0..u.values().len())
            .map(|i| {
                let v = u.values()[i];
                let poh = self.shell_poh[self.shells.node_shell[i] as usize];
                -(n - 2.0) * lap.values()[i] + poh * v
                    - c_nl * conv.values()[i] * self.nonlin.eval(v).0
            })
            .collect();
        Field::from_values(*self.grid(), values)
    }

    /// Scalars that determine the fiber `t ↦ I(u_t)`.
    pub fn fiber(&self, u: &Field) -> Result<Fiber<'_>> {
        let base = self.breakdown(u)?;
        Ok(self.fiber_from(base, u))
    }

    /// Build a fiber from an already computed breakdown of `u`.
    pub fn fiber_from(&self, base: EnergyBreakdown, u: &Field) -> Fiber<'_> {
        let weights = if self.potential.is_constant() {
            Vec::new()
        } else {
            self.shells.weights(u)
        };
        Fiber {
            problem: self,
            base,
            weights,
        }
    }

    /// `I(u) - [I(u_t) + (1-t^{N+α})/(N+α) P(u) + (1-θ)g(t)/(2(N+α)) a]` and its scale.
    pub fn key_inequality_gap(&self, fiber: &Fiber<'_>, t: f64) -> Result<(f64, f64)> {
        let theta = self.potential.constants.theta.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "potential {} has no theta constant",
                self.potential.name()
            ))
        })?;
        let b = &fiber.base;
        let n = self.dim() as f64;
        let na = n + self.alpha();
        let energy = b.energy();
        if t == 1.0 {
            return Ok((0.0, b.a + b.b_pot.abs() + self.lambda * b.d.abs()));
        }
        let (zeta, _) = fiber.eval(t)?;
        let poh = (1.0 - t.powf(na)) / na * b.pohozaev();
        let corr = (1.0 - theta) * g_elem(t, self.dim(), self.alpha()) / (2.0 * na) * b.a;
        let scale = b.a + b.b_pot.abs() + self.lambda * b.d.abs();
        Ok((energy - (zeta + poh + corr), scale))
    }
}

/// Breakdown of a field with its Riesz potential `I_α ∗ F(u)`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub breakdown: EnergyBreakdown,
    pub conv: Field,
}

/// The fiber map `ζ(t) = I(u_t)` of one field.
#[derive(Debug, Clone)]
pub struct Fiber<'a> {
    problem: &'a Problem,
    pub base: EnergyBreakdown,
    weights: Vec<f64>,
}

impl Fiber<'_> {
    /// `(ζ(t), ζ'(t))`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fiber parameter must be positive, got {t}"
            )));
        }
        let p = self.problem;
        let n = p.dim() as f64;
        let na = n + p.alpha();
        let b = &self.base;
        let (pot, poh) = if t == 1.0 {
            (b.b_pot, b.b_poh)
        } else if p.potential.is_constant() {
            let v = p.potential.v_inf();
            (v * b.l2, n * v * b.l2)
        } else {
            let scale = p.eps_scale() * t;
            let mut pot = 0.0;
            let mut poh = 0.0;
            for (w, r) in self.weights.iter().zip(&p.shells.radii) {
                let v = p.potential.eval_radius(scale * r)?;
                pot += w * v.v;
                poh += w * (n * v.v + v.radial_derivative);
            }
            (pot, poh)
        };
        let zeta = scaled_energy(
            b.a,
            pot,
            b.d,
            p.lambda,
            t.powf(n - 2.0),
            t.powf(n),
            t.powf(na),
        );
        let dzeta = 0.5 * (n - 2.0) * t.powf(n - 3.0) * b.a + 0.5 * t.powf(n - 1.0) * poh
            - 0.5 * na * p.lambda * t.powf(na - 1.0) * b.d;
        Ok((zeta, dzeta))
    }

    /// Scale for fiber-derivative tolerances.
    pub fn scale(&self) -> f64 {
        let b = &self.base;
        b.a + b.b_poh.abs() + self.problem.lambda * b.d.abs()
    }
}

/// Residual of the exact autonomous scaling identity and its scale.
///
/// `I∞(u) - I∞(u_t) - (1-t^{N+α})/(N+α) P∞(u) - [g(t)a + V∞h(t)l2]/(2(N+α))`
/// for the constant potential `V∞`, as pure algebra in `(a, l2, d, t)`.
#[allow(clippy::too_many_arguments)]
pub fn autonomous_identity_residual(
    a: f64,
    l2: f64,
    d: f64,
    v_inf: f64,
    lambda: f64,
    t: f64,
    dim: usize,
    alpha: f64,
) -> (f64, f64) {
    let n = dim as f64;
    let na = n + alpha;
    let (tn2, tn, tna) = (t.powf(n - 2.0), t.powf(n), t.powf(na));
    let i_u = 0.5 * a + 0.5 * v_inf * l2 - 0.5 * lambda * d;
    let i_ut = 0.5 * tn2 * a + 0.5 * tn * v_inf * l2 - 0.5 * lambda * tna * d;
    let p_u = 0.5 * (n - 2.0) * a + 0.5 * n * v_inf * l2 - 0.5 * na * lambda * d;
    let coeff = (1.0 - tna) / na;
    let elem = (g_elem(t, dim, alpha) * a + v_inf * h_elem(t, dim, alpha) * l2) / (2.0 * na);
    let residual = i_u - i_ut - coeff * p_u - elem;
    let scale = i_u.abs() + i_ut.abs() + (coeff * p_u).abs() + elem.abs();
    (residual, scale)
}
