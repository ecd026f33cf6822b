use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::log_space;

/// Nonlinearities `f` with primitive `F(t) = ∫₀ᵗ f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinVariant {
    /// `f = |t|^{p-2} t`, `F = |t|^p / p`.
    Power { p: f64 },
    /// The quadratic case `F = t²/2`.
    Pekar,
    /// `f = c_p |t|^{p-2} t + c_q |t|^{q-2} t`.
    TwoPower { p: f64, q: f64, c_p: f64, c_q: f64 },
}

/// A nonlinearity bound to `(N, α)`, with its growth diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinSpec {
    pub variant: NonlinVariant,
    pub dim: usize,
    pub alpha: f64,
    /// Sampled `sup |f(t)t| / (|t|^{(N+α)/N} + |t|^{(N+α)/(N-2)})`.
    pub envelope_constant: f64,
    /// A point with `F(s₀) ≠ 0`, if one was found.
    pub witness: Option<f64>,
}

impl NonlinVariant {
    pub fn name(&self) -> &'static str {
        match self {
            NonlinVariant::Power { .. } => "power",
            NonlinVariant::Pekar => "pekar",
            NonlinVariant::TwoPower { .. } => "two_power",
        }
    }

    /// `(f(t), F(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            NonlinVariant::Power { p } => power_term(p, 1.0, t),
            NonlinVariant::Pekar => (t, 0.5 * t * t),
            NonlinVariant::TwoPower { p, q, c_p, c_q } => {
                let (f1, g1) = power_term(p, c_p, t);
                let (f2, g2) = power_term(q, c_q, t);
                (f1 + f2, g1 + g2)
            }
        }
    }

    /// Exponents carrying a nonzero coefficient, smallest first.
    fn exponents(&self) -> (f64, f64) {
        match *self {
            NonlinVariant::Power { p } => (p, p),
            NonlinVariant::Pekar => (2.0, 2.0),
            NonlinVariant::TwoPower { p, q, c_p, c_q } => {
                let active: Vec<f64> = [(p, c_p), (q, c_q)]
                    .iter()
                    .filter(|(_, c)| *c != 0.0)
                    .map(|(e, _)| *e)
                    .collect();
                let lo = active.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = active.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }
}

fn power_term(p: f64, c: f64, t: f64) -> (f64, f64) {
    if t == 0.0 || c == 0.0 {
        return (0.0, 0.0);
    }
    let a = t.abs();
    let ap1 = a.powf(p - 1.0);
    (c * ap1 * t.signum(), c * ap1 * a / p)
}

/// Exponent window `((N+α)/N, (N+α)/(N-2))`; the upper end is infinite for `N = 2`.
pub fn exponent_window(dim: usize, alpha: f64) -> (f64, f64) {
    let n = dim as f64;
    let upper = if dim > 2 {
        (n + alpha) / (n - 2.0)
    } else {
        f64::INFINITY
    };
    ((n + alpha) / n, upper)
}

impl NonlinSpec {
    pub fn new(variant: NonlinVariant, dim: usize, alpha: f64) -> Result<Self> {
        let check = |name: &str, e: f64| -> Result<()> {
            if e.is_finite() && e > 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "exponent {name} must be finite and > 1, got {e}"
                )))
            }
        };
        match variant {
            NonlinVariant::Power { p } => check("p", p)?,
            NonlinVariant::Pekar => {}
            NonlinVariant::TwoPower { p, q, c_p, c_q } => {
                check("p", p)?;
                check("q", q)?;
                if !(c_p.is_finite() && c_q.is_finite()) || (c_p == 0.0 && c_q == 0.0) {
                    return Err(Error::InvalidParameter(
                        "two_power coefficients must be finite and not both zero".into(),
                    ));
                }
            }
        }
        let (lo_exp, hi_exp) = exponent_window(dim, alpha);
        let envelope_constant = log_space(1e-6, 1e6, 241)
            .into_iter()
            .map(|t| {
                let (f, _) = variant.eval(t);
                let (fm, _) = variant.eval(-t);
                let envelope = t.powf(lo_exp)
                    + if hi_exp.is_finite() {
                        t.powf(hi_exp)
                    } else {
                        0.0
                    };
                (f * t).abs().max((fm * t).abs()) / envelope
            })
            .fold(0.0, f64::max);
        let witness = std::iter::once(1.0)
            .chain(log_space(1e-3, 1e3, 61))
            .find(|&s| variant.eval(s).1 != 0.0);
        Ok(Self {
            variant,
            dim,
            alpha,
            envelope_constant,
            witness,
        })
    }

    pub fn name(&self) -> &'static str {
        self.variant.name()
    }

    /// `(f(t), F(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        self.variant.eval(t)
    }

    /// `(smallest, largest)` active exponent.
    pub fn exponents(&self) -> (f64, f64) {
        self.variant.exponents()
    }

    /// Fails unless every active exponent lies strictly inside the admissible window.
    pub fn require_admissible(&self) -> Result<()> {
        let (lo, hi) = exponent_window(self.dim, self.alpha);
        let (p_lo, p_hi) = self.exponents();
        if p_lo > lo && p_hi < hi {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "growth condition requires (N+alpha)/N < p < (N+alpha)/(N-2), i.e. {lo} < p < {hi}; {} has exponents [{p_lo}, {p_hi}]",
                self.name()
            )))
        }
    }

    /// Relative mismatch between `F(t)` and a quadrature of `f` on `[0, t]`.
    ///
    /// Uses `s = t u⁴` so the integrand is smooth at the origin even for
    /// exponents close to one.
    pub fn primitive_mismatch(&self, t: f64) -> f64 {
        const PANELS: usize = 2000;
        let g = |u: f64| {
            let u3 = u * u * u;
            self.eval(t * u3 * u).0 * 4.0 * t * u3
        };
        let h = 1.0 / PANELS as f64;
        let mut acc = g(0.0) + g(1.0);
        for k in 1..PANELS {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
        }
        let integral = acc * h / 3.0;
        let exact = self.eval(t).1;
        (integral - exact).abs() / exact.abs().max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pekar_values() {
        let s = NonlinSpec::new(NonlinVariant::Pekar, 3, 2.0).unwrap();
        assert_eq!(s.eval(2.0), (2.0, 2.0));
        assert_eq!(s.eval(0.0), (0.0, 0.0));
        assert_eq!(s.witness, Some(1.0));
    }

    #[test]
    fn power_values() {
        let s = NonlinSpec::new(NonlinVariant::Power { p: 3.0 }, 3, 2.0).unwrap();
        let (f, big_f) = s.eval(-1.0);
        assert_eq!(f, -1.0);
        assert!((big_f - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(s.eval(0.0), (0.0, 0.0));
    }

    #[test]
    fn window_is_enforced_on_request() {
        let bad = NonlinSpec::new(NonlinVariant::Power { p: 6.0 }, 3, 2.0).unwrap();
        assert!(bad.require_admissible().is_err());
        let good = NonlinSpec::new(NonlinVariant::Power { p: 2.0 }, 3, 2.0).unwrap();
        assert!(good.require_admissible().is_ok());
        assert!(NonlinSpec::new(NonlinVariant::Power { p: 1.0 }, 3, 2.0).is_err());
    }

    #[test]
    fn primitive_matches_quadrature() {
        for v in [
            NonlinVariant::Power { p: 1.7 },
            NonlinVariant::Pekar,
            NonlinVariant::TwoPower {
                p: 2.0,
                q: 3.0,
                c_p: 1.0,
                c_q: -0.5,
            },
        ] {
            let s = NonlinSpec::new(v, 3, 2.0).unwrap();
            for t in [0.1, 1.0, 2.5, -1.3] {
                assert!(s.primitive_mismatch(t) < 1e-8, "{:?} at {t}", s.variant);
            }
        }
    }

    #[test]
    fn envelope_constant_for_pekar() {
        // t² / (t^{5/3} + t^5) equals 1/2 at t = 1 and stays below one.
        let s = NonlinSpec::new(NonlinVariant::Pekar, 3, 2.0).unwrap();
        assert!(s.envelope_constant >= 0.5 && s.envelope_constant < 1.0);
    }
}
