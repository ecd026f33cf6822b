//! JSON run configuration: parsing with typo diagnostics, validation and a
//! fully resolved echo that re-parses to itself.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::catalog::{
    diagnostics, NonlinSpec, NonlinVariant, PotentialSpec, PotentialVariant, Sampling,
    ThetaConstants,
};
use crate::error::{Error, Result};
use crate::experiments::{BatteryConfig, OracleConfig};
use crate::fibering::{InitSpec, SolveOptions};
use crate::functionals::Problem;
use crate::grid::GridSpec;
use crate::riesz::RieszPlan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub dim: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "n")]
    pub points: usize,
}

/// A potential variant with optional overrides of its stored constants.
///
/// In JSON the constants sit in an optional `constants` object next to the
/// variant parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialConfig {
    #[serde(flatten)]
    pub variant: PotentialVariant,
    pub constants: Option<ThetaConstants>,
}

impl<'de> Deserialize<'de> for PotentialConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let mut value = serde_json::Value::deserialize(deserializer)?;
        let constants = match value.as_object_mut().and_then(|o| o.remove("constants")) {
            None | Some(serde_json::Value::Null) => None,
            Some(c) => Some(ThetaConstants::deserialize(c).map_err(D::Error::custom)?),
        };
        let variant = PotentialVariant::deserialize(value).map_err(D::Error::custom)?;
        Ok(Self { variant, constants })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Descending list of ε values.
    pub eps: Vec<f64>,
    /// Values of λ in `[1/2, 1]`.
    pub lambda: Vec<f64>,
    pub warm_start: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps: vec![1.0, 0.5, 0.25],
            lambda: vec![0.5, 0.625, 0.75, 0.875, 1.0],
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub battery: BatteryConfig,
    /// Field dumps checked against the configured problem.
    pub solutions: Vec<PathBuf>,
    pub assumptions: Sampling,
}

/// Constants used only by the reported coercivity diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub sobolev_s: Option<f64>,
    pub hls_c1: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_init() -> InitSpec {
    InitSpec::Gaussian {
        amplitude: None,
        width: 1.5,
        center: None,
    }
}

/// A complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub nonlinearity: NonlinVariant,
    pub alpha: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default = "default_init")]
    pub init: InitSpec,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

/// Closest candidate to `word` by edit distance, when one is close enough.
fn suggest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(word, c), c))
        .filter(|&(d, c)| d <= 2.max(c.len() / 3))
        .min_by_key(|&(d, _)| d)
        .map(|(_, c)| c)
}

/// Add a "did you mean" hint to serde's unknown-field and unknown-variant messages.
fn with_suggestion(message: &str) -> String {
    for (marker, list) in [
        ("unknown field `", "expected one of "),
        ("unknown variant `", "expected one of "),
    ] {
        let Some(start) = message.find(marker) else {
            continue;
        };
        let rest = &message[start + marker.len()..];
        let Some(end) = rest.find('`') else { continue };
        let word = &rest[..end];
        let Some(lpos) = rest.find(list) else {
            // A single expected name is written as "expected `name`".
            let Some(single) = rest
                .split("expected `")
                .nth(1)
                .and_then(|s| s.split('`').next())
            else {
                continue;
            };
            return match suggest(word, [single]) {
                Some(s) => format!("{message}; did you mean `{s}`?"),
                None => message.to_string(),
            };
        };
        let names = rest[lpos + list.len()..]
            .split(',')
            .map(|s| s.trim().trim_start_matches("or ").trim().trim_matches('`'));
        let names: Vec<&str> = names.collect();
        if let Some(s) = suggest(word, names) {
            return format!("{message}; did you mean `{s}`?");
        }
    }
    message.to_string()
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = with_suggestion(&e.inner().to_string());
            if path == "." {
                Error::Config(format!("config: {inner}"))
            } else {
                Error::Config(format!("config at {path}: {inner}"))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Physical and numerical validity, with the violated constraint named.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.dim;
        if !(self.alpha > 0.0 && self.alpha < n as f64) {
            return Err(Error::Config(format!(
                "alpha = {} violates the Riesz constraint 0 < alpha < N (N = {n})",
                self.alpha
            )));
        }
        if !(0.5..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda = {} must lie in [1/2, 1]",
                self.lambda
            )));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps = {} must be positive",
                self.eps
            )));
        }
        if let Some(&l) = self
            .sweep
            .lambda
            .iter()
            .find(|&&l| !(0.5..=1.0).contains(&l))
        {
            return Err(Error::Config(format!(
                "sweep.lambda value {l} must lie in [1/2, 1]"
            )));
        }
        if self.sweep.eps.iter().any(|&e| !(e.is_finite() && e > 0.0))
            || self.sweep.eps.windows(2).any(|w| w[1] > w[0])
        {
            return Err(Error::Config(
                "sweep.eps must be positive and sorted in descending order".into(),
            ));
        }
        let config_err = |e: Error| Error::Config(e.to_string());
        self.grid_spec().map_err(config_err)?;
        self.potential_spec().map_err(config_err)?;
        self.nonlin_spec().map_err(config_err)?;
        self.solver.validate().map_err(config_err)?;
        self.verify.battery.validate().map_err(config_err)?;
        self.oracle.validate().map_err(config_err)?;
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dim, self.grid.length, self.grid.points)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        PotentialSpec::with_constants(
            self.potential.variant.clone(),
            self.grid.dim,
            self.alpha,
            self.potential.constants,
        )
    }

    pub fn nonlin_spec(&self) -> Result<NonlinSpec> {
        NonlinSpec::new(self.nonlinearity.clone(), self.grid.dim, self.alpha)
    }

    pub fn plan(&self) -> Result<Arc<RieszPlan>> {
        Ok(Arc::new(RieszPlan::new(self.grid_spec()?, self.alpha)?))
    }

    /// The configured problem on a given plan.
    pub fn problem_on(&self, plan: Arc<RieszPlan>) -> Result<Problem> {
        Problem::new(
            plan,
            self.potential_spec()?,
            self.nonlin_spec()?,
            self.lambda,
            self.eps,
        )
    }

    /// The same problem with `V` replaced by the constant `V∞`.
    pub fn autonomous_problem_on(&self, plan: Arc<RieszPlan>) -> Result<Problem> {
        let v_inf = self.potential_spec()?.v_inf();
        let pot = PotentialSpec::new(
            PotentialVariant::Constant { v_inf },
            self.grid.dim,
            self.alpha,
        )?;
        Problem::new(plan, pot, self.nonlin_spec()?, self.lambda, self.eps)
    }

    /// `(S, C1)` for the diagnostics, defaulting to the sharp constants.
    pub fn diagnostic_inputs(&self) -> Result<(f64, f64)> {
        let s = match self.diagnostics.sobolev_s {
            Some(s) => s,
            None => diagnostics::sharp_sobolev(self.grid.dim),
        };
        let c1 = match self.diagnostics.hls_c1 {
            Some(c) => c,
            None => diagnostics::default_hls_chain(self.grid.dim, self.alpha)?,
        };
        Ok((s, c1))
    }

    /// The configuration with every default made explicit, including the
    /// potential constants and diagnostic inputs actually used.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.potential.constants = Some(self.potential_spec()?.constants);
        let (s, c1) = self.diagnostic_inputs()?;
        out.diagnostics = DiagnosticsConfig {
            sobolev_s: Some(s),
            hls_c1: Some(c1),
        };
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"grid":{"N":3,"L":24,"n":64},
        "potential":{"variant":"constant","Vinf":1},
        "nonlinearity":{"variant":"power","p":2},"alpha":2}"#;

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let c = Config::from_json(MINIMAL).unwrap();
        assert_eq!(c.solver, SolveOptions::default());
        assert_eq!(c.lambda, 1.0);
        assert_eq!(
            c.potential.variant,
            PotentialVariant::Constant { v_inf: 1.0 }
        );
        let r = c.resolved().unwrap();
        let again = Config::from_json(&r.to_json()).unwrap();
        assert_eq!(again, r);
        assert_eq!(again.resolved().unwrap(), r);
    }

    #[test]
    fn alpha_outside_riesz_range_is_named() {
        let text = MINIMAL.replace("\"alpha\":2", "\"alpha\":3.5");
        let e = Config::from_json(&text).unwrap_err().to_string();
        assert!(e.contains("Riesz constraint 0 < alpha < N"), "{e}");
    }

    #[test]
    fn lambda_outside_range_is_rejected() {
        let text = MINIMAL.replace("\"alpha\":2", "\"alpha\":2,\"lambda\":0.25");
        assert!(Config::from_json(&text)
            .unwrap_err()
            .to_string()
            .contains("[1/2, 1]"));
    }

    #[test]
    fn typo_gets_a_suggestion() {
        let text = MINIMAL.replace("\"potential\"", "\"potental\"");
        let e = Config::from_json(&text).unwrap_err().to_string();
        assert!(e.contains("did you mean `potential`"), "{e}");
        let text = MINIMAL.replace(
            "\"alpha\":2",
            "\"alpha\":2,\"solver\":{\"max_iteration\":3}",
        );
        let e = Config::from_json(&text).unwrap_err().to_string();
        assert!(
            e.contains("solver") && e.contains("did you mean `max_iterations`"),
            "{e}"
        );
    }

    #[test]
    fn role_aliases_and_constant_overrides() {
        let text = MINIMAL.replace(
            r#"{"variant":"constant","Vinf":1}"#,
            r#"{"variant":"remark14_i","a":3,"b":1,"constants":{"theta":0.25}}"#,
        );
        let c = Config::from_json(&text).unwrap();
        assert_eq!(
            c.potential.variant,
            PotentialVariant::InverseQuadratic { a: 3.0, b: 1.0 }
        );
        assert_eq!(c.potential_spec().unwrap().constants.theta, Some(0.25));
        let bad = text.replace("\"theta\"", "\"thetta\"");
        assert!(Config::from_json(&bad).is_err());
    }
}
