use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::golden_max;

/// Closed-form radial potentials.
///
/// Every variant depends on `|x|` only; `radial_derivative` below always
/// means `∇V(x)·x = r V'(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialVariant {
    /// `V ≡ v_inf`.
    Constant {
        #[serde(alias = "Vinf")]
        v_inf: f64,
    },
    /// `a - b/(r² + 1)`.
    #[serde(alias = "remark14_i")]
    InverseQuadratic { a: f64, b: f64 },
    /// `a - b/(r^α + 1)`.
    #[serde(alias = "remark14_ii")]
    InverseAlphaPower { a: f64, b: f64 },
    /// `a - b exp(-r^α)`.
    #[serde(alias = "remark14_iii")]
    ExponentialWell { a: f64, b: f64 },
    /// `a - b/(1 + r^β)`.
    #[serde(alias = "remark17")]
    InverseBetaPower { a: f64, b: f64, beta: f64 },
    /// `a - b cos(r^β)/(1 + r^β)`.
    #[serde(alias = "remark110")]
    OscillatingWell { a: f64, b: f64, beta: f64 },
    /// Piecewise-linear `V(r)` through tabulated points.
    UserTable {
        radii: Vec<f64>,
        values: Vec<f64>,
        #[serde(alias = "Vinf")]
        v_inf: f64,
    },
}

/// Optional constants certified by the assumption checker.
///
/// `theta` enters the fiber monotonicity condition, `theta_prime` and
/// `r_bar` the two-branch decay bound, `theta_double_prime` the cone bound
/// `∇V·x ≤ θ'' α V`. A `None` marks an assumption the variant does not claim.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaConstants {
    pub theta: Option<f64>,
    pub theta_prime: Option<f64>,
    pub r_bar: Option<f64>,
    pub theta_double_prime: Option<f64>,
}

/// A potential bound to a dimension and Riesz exponent, with derived data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSpec {
    pub variant: PotentialVariant,
    pub dim: usize,
    pub alpha: f64,
    pub constants: ThetaConstants,
    v_inf: f64,
    v_max: f64,
    min_radius: f64,
    v_min: f64,
}

/// `V` and `∇V·x` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    pub v: f64,
    pub radial_derivative: f64,
}

impl PotentialVariant {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialVariant::Constant { .. } => "constant",
            PotentialVariant::InverseQuadratic { .. } => "inverse_quadratic",
            PotentialVariant::InverseAlphaPower { .. } => "inverse_alpha_power",
            PotentialVariant::ExponentialWell { .. } => "exponential_well",
            PotentialVariant::InverseBetaPower { .. } => "inverse_beta_power",
            PotentialVariant::OscillatingWell { .. } => "oscillating_well",
            PotentialVariant::UserTable { .. } => "user_table",
        }
    }

    /// Default constants for the variant.
    ///
    /// For `a - b/(1+r^β)` and `a - b cos(r^β)/(1+r^β)` one has
    /// `r V'(r) ≤ bβ` and `V ≥ a - b`, so `θ = bβ/(α(a-b))` works with
    /// `R̄ = 0`; it is below one exactly when `αa > (α+β)b`.
    fn default_constants(&self, alpha: f64) -> ThetaConstants {
        match *self {
            PotentialVariant::Constant { .. } => ThetaConstants {
                theta: Some(0.0),
                theta_prime: Some(0.0),
                r_bar: Some(0.0),
                theta_double_prime: Some(0.0),
            },
            PotentialVariant::InverseQuadratic { .. } => ThetaConstants {
                theta: Some(0.5),
                ..Default::default()
            },
            PotentialVariant::InverseAlphaPower { .. }
            | PotentialVariant::ExponentialWell { .. } => ThetaConstants {
                theta: Some(0.0),
                ..Default::default()
            },
            PotentialVariant::InverseBetaPower { a, b, beta } => ThetaConstants {
                theta_prime: Some(b * beta / (alpha * (a - b))),
                r_bar: Some(0.0),
                ..Default::default()
            },
            PotentialVariant::OscillatingWell { a, b, beta } => ThetaConstants {
                theta_double_prime: Some(b * beta / (alpha * (a - b))),
                ..Default::default()
            },
            PotentialVariant::UserTable { .. } => ThetaConstants::default(),
        }
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    require(v.is_finite(), || {
        format!("potential parameter {name} must be finite, got {v}")
    })
}

impl PotentialSpec {
    /// Build a spec with the variant's default constants.
    pub fn new(variant: PotentialVariant, dim: usize, alpha: f64) -> Result<Self> {
        Self::with_constants(variant, dim, alpha, None)
    }

    /// Build a spec; entries set in `overrides` replace the defaults.
    pub fn with_constants(
        variant: PotentialVariant,
        dim: usize,
        alpha: f64,
        overrides: Option<ThetaConstants>,
    ) -> Result<Self> {
        let nf = dim as f64;
        require(alpha > 0.0 && alpha < nf, || {
            format!("Riesz constraint 0 < alpha < N violated: alpha = {alpha}, N = {dim}")
        })?;
        validate(&variant, nf, alpha)?;
        let mut constants = variant.default_constants(alpha);
        if let Some(o) = overrides {
            constants.theta = o.theta.or(constants.theta);
            constants.theta_prime = o.theta_prime.or(constants.theta_prime);
            constants.r_bar = o.r_bar.or(constants.r_bar);
            constants.theta_double_prime = o.theta_double_prime.or(constants.theta_double_prime);
        }
        for (name, v) in [
            ("theta", constants.theta),
            ("theta_prime", constants.theta_prime),
            ("theta_double_prime", constants.theta_double_prime),
        ] {
            if let Some(v) = v {
                require((0.0..1.0).contains(&v), || {
                    format!("{name} must lie in [0, 1), got {v}")
                })?;
            }
        }
        if let Some(r) = constants.r_bar {
            require(r >= 0.0 && r.is_finite(), || {
                format!("r_bar must be finite and >= 0, got {r}")
            })?;
        }

        let (v_inf, v_max, min_radius, v_min) = match &variant {
            PotentialVariant::Constant { v_inf } => (*v_inf, *v_inf, 0.0, *v_inf),
            PotentialVariant::InverseQuadratic { a, b }
            | PotentialVariant::InverseAlphaPower { a, b }
            | PotentialVariant::ExponentialWell { a, b }
            | PotentialVariant::InverseBetaPower { a, b, .. } => (*a, *a, 0.0, a - b),
            PotentialVariant::OscillatingWell { a, b, .. } => {
                // In s = r^β the bump -cos(s)/(1+s) peaks once in [π/2, 3π/2]
                // and every later peak is lower.
                let (_, bump) = golden_max(
                    |s| -s.cos() / (1.0 + s),
                    0.5 * std::f64::consts::PI,
                    1.5 * std::f64::consts::PI,
                    1e-12,
                );
                (*a, a + b * bump, 0.0, a - b)
            }
            PotentialVariant::UserTable {
                radii,
                values,
                v_inf,
            } => {
                let (imin, vmin) =
                    values
                        .iter()
                        .enumerate()
                        .fold(
                            (0, f64::INFINITY),
                            |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
                        );
                let vmax = values.iter().fold(*v_inf, |m, &v| m.max(v));
                (*v_inf, vmax, radii[imin], vmin)
            }
        };
        Ok(Self {
            variant,
            dim,
            alpha,
            constants,
            v_inf,
            v_max,
            min_radius,
            v_min,
        })
    }

    pub fn name(&self) -> &'static str {
        self.variant.name()
    }

    /// Limit of `V` at infinity.
    pub fn v_inf(&self) -> f64 {
        self.v_inf
    }

    /// Supremum of `V`.
    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Minimum of `V`.
    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    /// A minimizer of `V` (all catalog entries are radial, so the first axis carries the radius).
    pub fn minimizer(&self) -> Vec<f64> {
        let mut x0 = vec![0.0; self.dim];
        x0[0] = self.min_radius;
        x0
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.variant, PotentialVariant::Constant { .. })
    }

    /// True when `∇V·x` comes from differencing tabulated data.
    pub fn uses_finite_difference(&self) -> bool {
        matches!(self.variant, PotentialVariant::UserTable { .. })
    }

    /// `V` and `∇V·x` at the point `x`.
    pub fn eval(&self, x: &[f64]) -> Result<PotentialValue> {
        self.eval_radius(x.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// `V` and `r V'(r)` at radius `r ≥ 0`.
    pub fn eval_radius(&self, r: f64) -> Result<PotentialValue> {
        let alpha = self.alpha;
        let (v, radial_derivative) = match self.variant {
            PotentialVariant::Constant { v_inf } => (v_inf, 0.0),
            PotentialVariant::InverseQuadratic { a, b } => {
                let q = r * r + 1.0;
                (a - b / q, 2.0 * b * r * r / (q * q))
            }
            PotentialVariant::InverseAlphaPower { a, b } => {
                let s = r.powf(alpha);
                let q = s + 1.0;
                (a - b / q, b * alpha * s / (q * q))
            }
            PotentialVariant::ExponentialWell { a, b } => {
                let s = r.powf(alpha);
                let e = (-s).exp();
                (a - b * e, b * alpha * s * e)
            }
            PotentialVariant::InverseBetaPower { a, b, beta } => {
                let s = r.powf(beta);
                let q = s + 1.0;
                (a - b / q, b * beta * s / (q * q))
            }
            PotentialVariant::OscillatingWell { a, b, beta } => {
                let s = r.powf(beta);
                let q = s + 1.0;
                let (sin, cos) = s.sin_cos();
                (a - b * cos / q, b * beta * s * (q * sin + cos) / (q * q))
            }
            PotentialVariant::UserTable {
                ref radii,
                ref values,
                ..
            } => {
                return table_eval(radii, values, r);
            }
        };
        Ok(PotentialValue {
            v,
            radial_derivative,
        })
    }
}

fn table_eval(radii: &[f64], values: &[f64], r: f64) -> Result<PotentialValue> {
    let last = radii.len() - 1;
    if r < radii[0] || r > radii[last] || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius {r} outside the tabulated range [{}, {}]",
            radii[0], radii[last]
        )));
    }
    let k = match radii.partition_point(|&x| x <= r) {
        0 => 0,
        p => (p - 1).min(last - 1),
    };
    let slope = (values[k + 1] - values[k]) / (radii[k + 1] - radii[k]);
    Ok(PotentialValue {
        v: values[k] + slope * (r - radii[k]),
        radial_derivative: r * slope,
    })
}

fn validate(variant: &PotentialVariant, n: f64, alpha: f64) -> Result<()> {
    match *variant {
        PotentialVariant::Constant { v_inf } => {
            finite("v_inf", v_inf)?;
            require(v_inf > 0.0, || format!("V_inf > 0 required, got {v_inf}"))
        }
        PotentialVariant::InverseQuadratic { a, b } => {
            finite("a", a)?;
            finite("b", b)?;
            let lhs = alpha * n * a + (alpha + 2.0) * (n - 2.0).powi(3);
            let rhs = ((n - 2.0) * (alpha + 2.0) + 2.0 * (alpha + 4.0)) * b;
            require(a > b && lhs > rhs && rhs > 0.0, || {
                format!(
                    "inverse_quadratic requires a > b and alpha*N*a + (alpha+2)(N-2)^3 > [(N-2)(alpha+2) + 2(alpha+4)] b > 0; got a = {a}, b = {b}: {lhs} vs {rhs}"
                )
            })
        }
        PotentialVariant::InverseAlphaPower { a, b } => {
            finite("a", a)?;
            finite("b", b)?;
            require(b > 0.0 && a >= (2.0 + alpha / n) * b, || {
                format!(
                    "inverse_alpha_power requires a >= (2 + alpha/N) b > 0; got a = {a}, b = {b}"
                )
            })
        }
        PotentialVariant::ExponentialWell { a, b } => {
            finite("a", a)?;
            finite("b", b)?;
            require(a > b && b > 0.0, || {
                format!("exponential_well requires a > b > 0; got a = {a}, b = {b}")
            })
        }
        PotentialVariant::InverseBetaPower { a, b, beta }
        | PotentialVariant::OscillatingWell { a, b, beta } => {
            finite("a", a)?;
            finite("b", b)?;
            finite("beta", beta)?;
            let name = variant.name();
            require(
                beta > 0.0 && b > 0.0 && alpha * a > (alpha + beta) * b,
                || {
                    format!("{name} requires beta > 0 and alpha*a > (alpha+beta) b > 0; got a = {a}, b = {b}, beta = {beta}")
                },
            )
        }
        PotentialVariant::UserTable {
            ref radii,
            ref values,
            v_inf,
        } => {
            require(radii.len() >= 2 && radii.len() == values.len(), || {
                "user_table needs at least two radii and one value per radius".to_string()
            })?;
            require(radii.iter().chain(values).all(|v| v.is_finite()), || {
                "user_table entries must be finite".to_string()
            })?;
            require(
                radii[0] >= 0.0 && radii.windows(2).all(|w| w[0] < w[1]),
                || "user_table radii must be nonnegative and strictly increasing".to_string(),
            )?;
            finite("v_inf", v_inf)?;
            require(v_inf > 0.0, || format!("V_inf > 0 required, got {v_inf}"))
        }
    }
}
