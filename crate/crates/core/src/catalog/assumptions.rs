//! Sampled checks of the structural hypotheses on `V` and `f`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nonlinearity::{exponent_window, NonlinSpec};
use super::potential::PotentialSpec;
use crate::error::{Error, Result};
use crate::optim::log_space;

/// Worst margin a passing check may have.
pub const PASS_THRESHOLD: f64 = -1e-9;

/// Margin a strict inequality must clear to count as strict in floating point.
pub const STRICT_THRESHOLD: f64 = 1e-9;

/// Sample design for the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    pub rays: usize,
    pub radii: usize,
    pub scales: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            rays: 32,
            radii: 64,
            scales: 64,
            r_min: 1e-2,
            r_max: 1e2,
            t_min: 1e-2,
            t_max: 1e2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

/// Where a check attains its worst margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Option<Vec<f64>>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub verdict: Verdict,
    pub margin: Option<f64>,
    pub witness: Option<Witness>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub potential: String,
    pub nonlinearity: String,
    pub sampling: Sampling,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passes(&self, name: &str) -> bool {
        self.get(name).is_some_and(|c| c.verdict == Verdict::Pass)
    }
}

/// Names of the checks, in report order.
pub const CHECK_NAMES: [&str; 9] = [
    "potential_nonnegative",
    "potential_below_limit",
    "fiber_monotonicity",
    "decay_bound",
    "interior_well",
    "cone_bound",
    "growth_envelope",
    "growth_limits",
    "nontrivial_primitive",
];

#[derive(Clone, Copy)]
struct Worst {
    margin: f64,
    point: usize,
    t: Option<f64>,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            point: 0,
            t: None,
        }
    }

    fn update(&mut self, margin: f64, point: usize, t: Option<f64>) {
        if margin < self.margin || margin.is_nan() {
            *self = Self { margin, point, t };
        }
    }
}

fn sample_points(dim: usize, s: &Sampling) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut rays = Vec::with_capacity(s.rays);
    while rays.len() < s.rays {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|c| c * c).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            rays.push(v.into_iter().map(|c| c / n).collect::<Vec<f64>>());
        }
    }
    let radii = log_space(s.r_min, s.r_max, s.radii);
    rays.iter()
        .flat_map(|ray| {
            radii
                .iter()
                .map(move |&r| ray.iter().map(|c| c * r).collect())
        })
        .collect()
}

fn verdict(margin: f64) -> Verdict {
    if margin >= PASS_THRESHOLD {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn radius(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn not_applicable(name: &str, note: &str) -> AssumptionCheck {
    AssumptionCheck {
        name: name.into(),
        verdict: Verdict::NotApplicable,
        margin: None,
        witness: None,
        note: note.into(),
    }
}

fn finish(name: &str, worst: Worst, points: &[Vec<f64>], note: String) -> AssumptionCheck {
    AssumptionCheck {
        name: name.into(),
        verdict: verdict(worst.margin),
        margin: Some(worst.margin),
        witness: Some(Witness {
            point: Some(points[worst.point].clone()),
            t: worst.t,
        }),
        note,
    }
}

/// Evaluate every structural check on the sample set.
pub fn check_assumptions(
    pot: &PotentialSpec,
    nl: &NonlinSpec,
    sampling: &Sampling,
) -> Result<AssumptionReport> {
    if sampling.rays == 0 || sampling.radii == 0 || sampling.scales < 2 {
        return Err(Error::InvalidParameter(
            "assumption sampling needs at least one ray, one radius and two scales".into(),
        ));
    }
    let dim = pot.dim;
    let n = dim as f64;
    let alpha = pot.alpha;
    let v_inf = pot.v_inf();
    let points = sample_points(dim, sampling);
    let values: Vec<_> = points.iter().map(|x| pot.eval(x)).collect::<Result<_>>()?;
    let scales = log_space(sampling.t_min, sampling.t_max, sampling.scales);
    let mut checks = Vec::new();

    let mut worst = Worst::new();
    for (i, v) in values.iter().enumerate() {
        worst.update(v.v / v_inf, i, None);
    }
    checks.push(finish(
        CHECK_NAMES[0],
        worst,
        &points,
        format!("min V / V_inf over samples; V_inf = {v_inf}"),
    ));

    let mut worst = Worst::new();
    for (i, v) in values.iter().enumerate() {
        worst.update((v_inf - v.v) / v_inf, i, None);
    }
    checks.push(finish(
        CHECK_NAMES[1],
        worst,
        &points,
        "min (V_inf - V) / V_inf".into(),
    ));

    checks.push(match pot.constants.theta {
        None => not_applicable(CHECK_NAMES[2], "no theta constant for this potential"),
        Some(theta) => {
            let mut worst = Worst::new();
            for (i, x) in points.iter().enumerate() {
                let r = radius(x);
                let phi = |t: f64| -> Result<f64> {
                    let v = pot.eval_radius(t * r)?;
                    Ok((n * v.v + v.radial_derivative) / t.powf(alpha)
                        + (n - 2.0).powi(3) * theta / (4.0 * t.powf(alpha + 2.0) * r * r))
                };
                let mut prev = phi(scales[0])?;
                for w in scales.windows(2) {
                    let next = phi(w[1])?;
                    let scale = prev.abs().max(next.abs()).max(f64::MIN_POSITIVE);
                    worst.update((prev - next) / scale, i, Some(w[0]));
                    prev = next;
                }
            }
            finish(
                CHECK_NAMES[2],
                worst,
                &points,
                format!(
                    "relative decrease of the scaled Pohozaev density along rays; theta = {theta}"
                ),
            )
        }
    });

    checks.push(match (pot.constants.theta_prime, pot.constants.r_bar) {
        (Some(tp), Some(r_bar)) => {
            let mut worst = Worst::new();
            for (i, (x, v)) in points.iter().zip(&values).enumerate() {
                let r = radius(x);
                let bound = if r < r_bar {
                    (n - 2.0).powi(2) / (2.0 * r * r)
                } else {
                    tp * alpha * v.v
                };
                worst.update((bound - v.radial_derivative) / v_inf, i, None);
            }
            finish(
                CHECK_NAMES[3],
                worst,
                &points,
                format!("two-branch bound on grad V . x; theta' = {tp}, R_bar = {r_bar}"),
            )
        }
        _ => not_applicable(
            CHECK_NAMES[3],
            "no theta' / R_bar constants for this potential",
        ),
    });

    {
        let x0 = pot.minimizer();
        let v0 = pot.eval(&x0)?.v;
        let strict = (v0 / v_inf).min((v_inf - v0) / v_inf);
        let mut worst = Worst::new();
        for (i, v) in values.iter().enumerate() {
            worst.update((v.v - v0) / v_inf, i, None);
        }
        let margin = strict.min(worst.margin);
        let ok = strict > 0.0 && worst.margin >= PASS_THRESHOLD;
        checks.push(AssumptionCheck {
            name: CHECK_NAMES[4].into(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            margin: Some(margin),
            witness: Some(Witness {
                point: Some(if strict <= worst.margin {
                    x0
                } else {
                    points[worst.point].clone()
                }),
                t: None,
            }),
            note: format!("0 < V(x0) = {v0} < V_inf strictly and V >= V(x0) on samples"),
        });
    }

    checks.push(match pot.constants.theta_double_prime {
        None => not_applicable(CHECK_NAMES[5], "no theta'' constant for this potential"),
        Some(tpp) => {
            let mut worst = Worst::new();
            for (i, v) in values.iter().enumerate() {
                worst.update((tpp * alpha * v.v - v.radial_derivative) / v_inf, i, None);
            }
            finish(
                CHECK_NAMES[5],
                worst,
                &points,
                format!("theta'' alpha V - grad V . x; theta'' = {tpp}"),
            )
        }
    });

    checks.extend(growth_checks(nl, sampling.scales.max(16)));
    Ok(AssumptionReport {
        potential: pot.name().into(),
        nonlinearity: nl.name().into(),
        sampling: sampling.clone(),
        checks,
    })
}

/// Effective power of `g` near zero and near infinity from log-slopes at the
/// two extreme decades of `ts`.
fn end_slopes<G: Fn(f64) -> f64>(g: G, ts: &[f64]) -> (f64, f64) {
    let slope = |a: f64, b: f64| {
        let both = |t: f64| g(t).abs().max(g(-t).abs());
        (both(b) / both(a)).ln() / (b / a).ln()
    };
    let k = ts.len();
    (slope(ts[0], ts[1]), slope(ts[k - 2], ts[k - 1]))
}

fn growth_checks(nl: &NonlinSpec, count: usize) -> Vec<AssumptionCheck> {
    let (lo, hi) = exponent_window(nl.dim, nl.alpha);
    let ts = log_space(1e-6, 1e6, count);

    let (f0, finf) = end_slopes(|t| nl.eval(t).0 * t, &ts);
    let margin_f = (f0 - lo).min(hi - finf);
    let envelope = AssumptionCheck {
        name: CHECK_NAMES[6].into(),
        verdict: verdict(margin_f),
        margin: Some(margin_f),
        witness: Some(Witness {
            point: None,
            t: Some(if f0 - lo <= hi - finf { ts[0] } else { ts[count - 1] }),
        }),
        note: format!(
            "effective powers of |f(t)t|: {f0} near 0, {finf} near infinity; window [{lo}, {hi}]; C0 estimate {}",
            nl.envelope_constant
        ),
    };

    let (p0, pinf) = end_slopes(|t| nl.eval(t).1, &ts);
    let margin_p = (p0 - lo).min(hi - pinf);
    let limits = AssumptionCheck {
        name: CHECK_NAMES[7].into(),
        verdict: if margin_p > STRICT_THRESHOLD { Verdict::Pass } else { Verdict::Fail },
        margin: Some(margin_p),
        witness: Some(Witness {
            point: None,
            t: Some(if p0 - lo <= hi - pinf { ts[0] } else { ts[count - 1] }),
        }),
        note: format!("effective powers of |F|: {p0} near 0, {pinf} near infinity; strict window ({lo}, {hi})"),
    };

    let primitive = match nl.witness {
        Some(s0) => AssumptionCheck {
            name: CHECK_NAMES[8].into(),
            verdict: Verdict::Pass,
            margin: Some(nl.eval(s0).1.abs()),
            witness: Some(Witness {
                point: None,
                t: Some(s0),
            }),
            note: format!(
                "F(s0) != 0 at s0 = {s0}; primitive mismatch {:.2e}",
                nl.primitive_mismatch(s0)
            ),
        },
        None => AssumptionCheck {
            name: CHECK_NAMES[8].into(),
            verdict: Verdict::Fail,
            margin: Some(0.0),
            witness: None,
            note: "F vanished on every sampled point".into(),
        },
    };
    vec![envelope, limits, primitive]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{NonlinVariant, PotentialVariant};

    fn report(v: PotentialVariant, nl: NonlinVariant) -> AssumptionReport {
        let pot = PotentialSpec::new(v, 3, 2.0).unwrap();
        let nl = NonlinSpec::new(nl, 3, 2.0).unwrap();
        check_assumptions(&pot, &nl, &Sampling::default()).unwrap()
    }

    #[test]
    fn constant_pekar_passes_everything_but_the_well() {
        let r = report(
            PotentialVariant::Constant { v_inf: 1.0 },
            NonlinVariant::Pekar,
        );
        for name in CHECK_NAMES {
            let expect = if name == "interior_well" {
                Verdict::Fail
            } else {
                Verdict::Pass
            };
            assert_eq!(r.get(name).unwrap().verdict, expect, "{name}");
        }
    }

    #[test]
    fn inverse_quadratic_passes_its_claims() {
        let r = report(
            PotentialVariant::InverseQuadratic { a: 3.0, b: 1.0 },
            NonlinVariant::Pekar,
        );
        for name in [
            "potential_nonnegative",
            "potential_below_limit",
            "fiber_monotonicity",
            "interior_well",
        ] {
            assert!(r.passes(name), "{name}: {:?}", r.get(name));
        }
        assert_eq!(r.get("cone_bound").unwrap().verdict, Verdict::NotApplicable);
    }

    #[test]
    fn beta_variants_pass_their_claims() {
        let r = report(
            PotentialVariant::InverseBetaPower {
                a: 2.0,
                b: 1.0,
                beta: 1.0,
            },
            NonlinVariant::Pekar,
        );
        assert!(r.passes("decay_bound"), "{:?}", r.get("decay_bound"));
        let r = report(
            PotentialVariant::OscillatingWell {
                a: 2.0,
                b: 1.0,
                beta: 1.0,
            },
            NonlinVariant::Pekar,
        );
        assert!(r.passes("cone_bound"), "{:?}", r.get("cone_bound"));
        assert!(r.passes("interior_well"));
        assert!(!r.passes("potential_below_limit"));
    }

    #[test]
    fn supercritical_power_fails_growth_limits() {
        let r = report(
            PotentialVariant::Constant { v_inf: 1.0 },
            NonlinVariant::Power { p: 6.0 },
        );
        assert_eq!(r.get("growth_limits").unwrap().verdict, Verdict::Fail);
        let r = report(
            PotentialVariant::Constant { v_inf: 1.0 },
            NonlinVariant::Power { p: 5.0 },
        );
        assert_eq!(r.get("growth_limits").unwrap().verdict, Verdict::Fail);
        assert_eq!(r.get("growth_envelope").unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn empty_sampling_is_rejected() {
        let pot = PotentialSpec::new(PotentialVariant::Constant { v_inf: 1.0 }, 3, 2.0).unwrap();
        let nl = NonlinSpec::new(NonlinVariant::Pekar, 3, 2.0).unwrap();
        let s = Sampling {
            rays: 0,
            ..Default::default()
        };
        assert!(check_assumptions(&pot, &nl, &s).is_err());
    }
}
