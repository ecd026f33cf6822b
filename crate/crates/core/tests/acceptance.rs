//! The twelve acceptance criteria, one pass/fail line each.
//!
//! Runs as a plain binary so every line is printed; any hard failure makes
//! the process exit nonzero.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

use choquard_core::experiments::{
    radial_oracle_pekar, scaled_grid, scaling_identity, sweep_epsilon, sweep_lambda, OracleConfig,
};
use choquard_core::fibering::{
    gaussian, solve_autonomous, solve_ground_state, InitSpec, SolveOptions,
};
use choquard_core::functionals::{autonomous_identity_residual, g_elem, h_elem, Problem};
use choquard_core::grid::{self, MAX_DIM};
use choquard_core::riesz::{riesz_constant, riesz_convolve_direct};
use choquard_core::{
    Field, GridSpec, NonlinSpec, NonlinVariant, PotentialSpec, PotentialVariant, RieszPlan,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn pekar_nonlin(dim: usize, alpha: f64) -> NonlinSpec {
    NonlinSpec::new(NonlinVariant::Power { p: 2.0 }, dim, alpha).unwrap()
}

fn problem(
    grid: GridSpec,
    variant: PotentialVariant,
    nonlin: NonlinVariant,
    lambda: f64,
    eps: f64,
) -> Problem {
    let plan = Arc::new(RieszPlan::new(grid, 2.0).unwrap());
    let pot = PotentialSpec::new(variant, 3, 2.0).unwrap();
    Problem::new(
        plan,
        pot,
        NonlinSpec::new(nonlin, 3, 2.0).unwrap(),
        lambda,
        eps,
    )
    .unwrap()
}

fn inverse_quadratic() -> PotentialVariant {
    PotentialVariant::InverseQuadratic { a: 3.0, b: 1.0 }
}

fn default_init() -> InitSpec {
    InitSpec::Gaussian {
        amplitude: None,
        width: 1.5,
        center: None,
    }
}

fn random_gaussian(grid: &GridSpec, rng: &mut ChaCha8Rng) -> Field {
    let amplitude = rng.random_range(0.5..3.0);
    let width = rng.random_range(0.8..2.5);
    let center: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
    gaussian(grid, amplitude, width, &center)
}

fn riesz_oracle_equivalence() -> Verdict {
    let t0 = Instant::now();
    let grid = GridSpec::new(3, 4.0, 8).unwrap();
    let plan = RieszPlan::new(grid, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let g = Field::from_values(
            grid,
            (0..grid.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let fast = plan.convolve(&g).unwrap();
        let slow = riesz_convolve_direct(&grid, 2.0, &g).unwrap();
        let err = fast
            .values()
            .iter()
            .zip(slow.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / slow.max_abs();
        worst = worst.max(err);
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-12 && secs < 5.0,
        format!("max relative error {worst:.2e} (limit 1e-12), {secs:.2} s (limit 5 s)"),
    )
}

fn physics_normalization() -> Verdict {
    let grid = GridSpec::new(3, 16.0, 64).unwrap();
    let plan = RieszPlan::new(grid, 2.0).unwrap();
    let rho = Field::from_fn(grid, |x| (-x.iter().map(|c| c * c).sum::<f64>()).exp());
    let phi = plan.convolve(&rho).unwrap();
    // Nodes (i, i, i) on the diagonal give 32 radii, (i, n/2, n/2) 18 more.
    let n = grid.points();
    let mut samples = Vec::new();
    for i in n / 2..n {
        samples.push([i, i, i]);
    }
    for i in n / 2 + 1..n / 2 + 19 {
        samples.push([i, n / 2, n / 2]);
    }
    let mut worst: f64 = 0.0;
    for idx in &samples {
        let flat = (idx[0] * n + idx[1]) * n + idx[2];
        let r = idx
            .iter()
            .map(|&i| grid.coordinate(i).powi(2))
            .sum::<f64>()
            .sqrt();
        let exact = PI.sqrt() / 4.0 * erf(r) / r;
        worst = worst.max((phi.values()[flat] - exact).abs());
    }
    let c = riesz_constant(2.0, 3).unwrap();
    let c_err = (c - 1.0 / (4.0 * PI)).abs() / (1.0 / (4.0 * PI));
    verdict(
        samples.len() == 50 && worst <= 2e-3 && c_err <= 4.0 * f64::EPSILON,
        format!(
            "{} radii, max abs error {worst:.3e} (limit 2e-3); riesz_constant(2,3) relative error {c_err:.1e}",
            samples.len()
        ),
    )
}

fn exact_scaling_identity() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (a, l2, d) = (
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..10.0),
        );
        let v_inf = rng.random_range(0.1..5.0);
        let lambda = rng.random_range(0.5..=1.0);
        let dim = rng.random_range(3..=5usize);
        let alpha = rng.random_range(0.05..dim as f64 - 0.05);
        for _ in 0..1000 {
            let t = rng.random_range(0.1..10.0);
            let (r, s) = autonomous_identity_residual(a, l2, d, v_inf, lambda, t, dim, alpha);
            worst = worst.max(r.abs() / s);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-12 && secs < 1.0,
        format!("max residual / scale {worst:.2e} (limit 1e-12) over 10^6 samples, {secs:.3} s (limit 1 s)"),
    )
}

fn elementary_inequalities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    let mut strict = true;
    for _ in 0..10_000 {
        let dim = rng.random_range(3..=5usize);
        let alpha = rng.random_range(0.0..dim as f64);
        let t = 10f64.powf(rng.random_range(-2.0..2.0));
        let m = g_elem(t, dim, alpha).min(h_elem(t, dim, alpha));
        worst = worst.min(m);
        if t != 1.0 && m <= 0.0 && (t - 1.0).abs() > 1e-4 {
            strict = false;
        }
    }
    let at_one = (3..=5).all(|n| g_elem(1.0, n, 1.3) == 0.0 && h_elem(1.0, n, 1.3) == 0.0);
    verdict(
        worst >= -1e-14 && strict && at_one,
        format!("min(g, h) = {worst:.3e}; strictly positive off t = 1: {strict}; zero at t = 1: {at_one}"),
    )
}

fn key_inequality() -> Verdict {
    let grid = GridSpec::new(3, 16.0, 32).unwrap();
    let p = problem(grid, inverse_quadratic(), NonlinVariant::Pekar, 1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let u = random_gaussian(&grid, &mut rng);
        let fiber = p.fiber(&u).unwrap();
        for _ in 0..20 {
            let t = rng.random_range(0.2..5.0);
            let (gap, scale) = p.key_inequality_gap(&fiber, t).unwrap();
            worst = worst.min(gap / scale);
        }
    }
    verdict(
        worst >= -1e-8,
        format!("min gap / scale {worst:.3e} (limit -1e-8) over 2000 pairs"),
    )
}

fn gradient_correctness() -> Verdict {
    let grid = GridSpec::new(3, 12.0, 24).unwrap();
    let plan = Arc::new(RieszPlan::new(grid, 2.0).unwrap());
    let potentials = [
        PotentialVariant::Constant { v_inf: 1.0 },
        inverse_quadratic(),
        PotentialVariant::ExponentialWell { a: 2.0, b: 0.5 },
        PotentialVariant::OscillatingWell {
            a: 2.0,
            b: 1.0,
            beta: 1.0,
        },
    ];
    let nonlins = [
        NonlinVariant::Pekar,
        NonlinVariant::Power { p: 2.5 },
        NonlinVariant::TwoPower {
            p: 2.0,
            q: 3.0,
            c_p: 1.0,
            c_q: 0.5,
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let pot = PotentialSpec::new(potentials[k % 4].clone(), 3, 2.0).unwrap();
        let nl = NonlinSpec::new(nonlins[k % 3].clone(), 3, 2.0).unwrap();
        let lambda = rng.random_range(0.5..=1.0);
        let eps = [1.0, 0.5][k % 2];
        let p = Problem::new(plan.clone(), pot, nl, lambda, eps).unwrap();
        let u = random_gaussian(&grid, &mut rng);
        let (c0, c1, c2) = (
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        );
        let bump = random_gaussian(&grid, &mut rng);
        let v = Field::from_values(
            grid,
            u.values()
                .iter()
                .zip(bump.values())
                .enumerate()
                .map(|(i, (a, b))| {
                    let mut x = [0.0; MAX_DIM];
                    grid.node(i, &mut x);
                    a * (1.0 + c0 * x[0] + c1 * x[1] * x[2] + c2 * x[2]) + 0.3 * b
                })
                .collect(),
        )
        .unwrap();
        let analytic = p.l2_gradient(&u).unwrap().dot(&v);
        let h = 1e-4;
        let plus = p.breakdown(&u.add_scaled(h, &v)).unwrap().energy();
        let minus = p.breakdown(&u.add_scaled(-h, &v)).unwrap().energy();
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(fd.abs()));
    }
    verdict(
        worst <= 1e-5,
        format!("max relative error {worst:.2e} (limit 1e-5) over 20 configurations"),
    )
}

fn pekar_cross_validation() -> Verdict {
    let t0 = Instant::now();
    let grid = GridSpec::new(3, 24.0, 64).unwrap();
    let p = problem(
        grid,
        PotentialVariant::Constant { v_inf: 1.0 },
        NonlinVariant::Power { p: 2.0 },
        1.0,
        1.0,
    );
    let solved = solve_autonomous(&p, &default_init(), &SolveOptions::default()).unwrap();
    let oracle = radial_oracle_pekar(&OracleConfig::default()).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let rel = (solved.m - oracle.m).abs() / oracle.m;
    verdict(
        solved.converged && rel <= 1e-2 && solved.pohozaev_residual <= 1e-4 && secs <= 600.0,
        format!(
            "spectral m = {:.8}, oracle m = {:.8}, relative difference {rel:.2e} (limit 1e-2); P residual {:.1e} (limit 1e-4); {secs:.1} s",
            solved.m, oracle.m, solved.pohozaev_residual
        ),
    )
}

fn level_below_limit_level() -> Verdict {
    let grid = GridSpec::new(3, 16.0, 32).unwrap();
    let opts = SolveOptions::default();
    let p = problem(
        grid,
        inverse_quadratic(),
        NonlinVariant::Power { p: 2.0 },
        1.0,
        1.0,
    );
    let p_inf = problem(
        grid,
        PotentialVariant::Constant { v_inf: 3.0 },
        NonlinVariant::Power { p: 2.0 },
        1.0,
        1.0,
    );
    let m = solve_ground_state(&p, &default_init(), &opts).unwrap();
    let m_inf = solve_autonomous(&p_inf, &default_init(), &opts).unwrap();
    verdict(
        m.converged && m_inf.converged && m.m <= m_inf.m + 1e-6,
        format!(
            "m = {:.8} (converged {}), m_inf = {:.8} (converged {})",
            m.m, m.converged, m_inf.m, m_inf.converged
        ),
    )
}

fn lambda_sweep() -> (Verdict, Verdict) {
    let grid = GridSpec::new(3, 16.0, 32).unwrap();
    let autonomous = problem(
        grid,
        PotentialVariant::Constant { v_inf: 3.0 },
        NonlinVariant::Power { p: 2.0 },
        1.0,
        1.0,
    );
    let bound_pot = PotentialSpec::new(inverse_quadratic(), 3, 2.0).unwrap();
    let sweep = sweep_lambda(
        &autonomous,
        &[0.5, 0.625, 0.75, 0.875, 1.0],
        Some(&bound_pot),
        &default_init(),
        &SolveOptions::default(),
    )
    .unwrap();
    let levels: Vec<f64> = sweep.points.iter().map(|p| p.solve.m).collect();
    let monotone = levels.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let nine = verdict(
        monotone && sweep.all_converged(),
        format!(
            "m over lambda = 0.5..1: {levels:.6?}; all converged {}",
            sweep.all_converged()
        ),
    );
    let last = sweep.points.last().unwrap();
    let bound = last.bound.unwrap().bound;
    let margin = last.margin.unwrap();
    let ten = verdict(
        margin > 0.0,
        format!(
            "path bound {bound:.6} vs m_1 = {:.6}, margin {margin:.6} (soft)",
            last.solve.m
        ),
    );
    (nine, ten)
}

fn semiclassical_identity() -> Verdict {
    let grid = GridSpec::new(3, 12.0, 24).unwrap();
    let plan = Arc::new(RieszPlan::new(grid, 2.0).unwrap());
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
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for &eps in &[1.0, 0.5, 0.25] {
        let p = Problem::new(plan.clone(), pot.clone(), pekar_nonlin(3, 2.0), 0.8, eps).unwrap();
        let y_plan = RieszPlan::new(scaled_grid(&grid, eps).unwrap(), 2.0).unwrap();
        for _ in 0..10 {
            // Rough, non-radial perturbations keep the field far from any solution.
            let smooth = random_gaussian(&grid, &mut rng);
            let values = smooth
                .values()
                .iter()
                .map(|v| v + 0.05 * rng.random_range(-1.0..1.0) * v.abs().sqrt())
                .collect();
            let u = Field::from_values(grid, values).unwrap();
            worst = worst.max(scaling_identity(&p, &u, &y_plan).unwrap().relative_residual);
        }
    }
    let sweep_grid = GridSpec::new(3, 16.0, 32).unwrap();
    let base = Problem::new(
        Arc::new(RieszPlan::new(sweep_grid, 2.0).unwrap()),
        pot,
        pekar_nonlin(3, 2.0),
        1.0,
        1.0,
    )
    .unwrap();
    let sweep = sweep_epsilon(
        &base,
        &[1.0, 0.5, 0.25],
        &default_init(),
        &SolveOptions::default(),
        true,
    )
    .unwrap();
    let trend = sweep
        .verdicts
        .iter()
        .find(|v| v.name == "centroid_distance_non_increasing")
        .map(|v| v.pass)
        .unwrap_or(false);
    verdict(
        worst <= 1e-10,
        format!(
            "max relative residual {worst:.2e} (limit 1e-10) over 30 fields; centroid trend (soft): {}",
            if trend { "pass" } else { "fail" }
        ),
    )
}

fn determinism() -> Verdict {
    let grid = GridSpec::new(3, 16.0, 32).unwrap();
    let p = problem(
        grid,
        inverse_quadratic(),
        NonlinVariant::Power { p: 2.0 },
        1.0,
        1.0,
    );
    let opts = SolveOptions {
        init_jitter: 1e-3,
        seed: 7,
        ..SolveOptions::default()
    };
    let a = solve_ground_state(&p, &default_init(), &opts).unwrap();
    let b = solve_ground_state(&p, &default_init(), &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.field"), dir.path().join("b.field"));
    grid::write_field_dump(&a.field, &pa).unwrap();
    grid::write_field_dump(&b.field, &pb).unwrap();
    let same_bytes = std::fs::read(&pa).unwrap() == std::fs::read(&pb).unwrap();
    verdict(
        a.m.to_bits() == b.m.to_bits() && same_bytes,
        format!(
            "m bits equal: {}, dumps byte-identical: {same_bytes}",
            a.m.to_bits() == b.m.to_bits()
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Verdict)> = vec![
        (1, "Riesz FFT vs direct sum", riesz_oracle_equivalence()),
        (2, "Newton potential normalization", physics_normalization()),
        (3, "exact scaling identity", exact_scaling_identity()),
        (4, "elementary inequalities", elementary_inequalities()),
        (5, "key inequality", key_inequality()),
        (6, "gradient correctness", gradient_correctness()),
        (7, "Pekar cross-validation", pekar_cross_validation()),
        (8, "level below limit level", level_below_limit_level()),
    ];
    let (nine, ten) = lambda_sweep();
    results.push((9, "limit level monotone in lambda", nine));
    results.push((10, "path bound below limit level (soft)", ten));
    results.push((11, "semiclassical identity", semiclassical_identity()));
    results.push((12, "determinism", determinism()));
    let mut failed = 0;
    for (k, name, v) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} {tag}: {name}: {}", v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
