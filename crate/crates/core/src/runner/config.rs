use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distribution_space::{Distribution, TestFunction};
use crate::error::{Error, Result};
use crate::spde_operators::{CoefficientField, Functional};

pub const MAX_STEPS: usize = 1 << 14;
pub const MAX_PATHS: usize = 1_000_000;
pub const MAX_TRUNCATION: usize = 512;

/// Which weak-form identity a scenario verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    /// `X_t = τ_{Z_t} φ` for `dZ = b̄(Z) dt + σ̄(Z) dB`.
    Translation,
    /// `X_t = τ_{B_t²} φ` driven through `dZ = 2B dB + dt`.
    SquaredBrownian,
}

/// Coefficient functionals, row-major `σ` and `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub sigma: Vec<String>,
    pub drift: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelConfig {
    /// Test-function specs; empty selects the default panel.
    #[serde(default)]
    pub functions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Step counts of the residual grids; each divides `steps`.
    #[serde(default)]
    pub residual_levels: Vec<usize>,
    #[serde(default)]
    pub residual_paths: Option<usize>,
    /// Paths of the auxiliary ensemble that fixes `h`.
    #[serde(default)]
    pub drift_paths: Option<usize>,
    #[serde(default)]
    pub law_paths: Option<usize>,
    /// Compare the modified law without Girsanov weights.
    #[serde(default)]
    pub unweighted_law_test: bool,
    #[serde(default = "default_replicates")]
    pub bootstrap_replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_replicates() -> usize {
    crate::verifier::BOOTSTRAP_REPLICATES
}

fn default_level() -> f64 {
    crate::verifier::LAW_TEST_LEVEL
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            residual_levels: Vec::new(),
            residual_paths: None,
            drift_paths: None,
            law_paths: None,
            unweighted_law_test: false,
            bootstrap_replicates: default_replicates(),
            level: default_level(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub identity: Identity,
    pub dimension: usize,
    pub regularity: f64,
    pub truncation: usize,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    /// `delta x[,x..]` or a test-function description.
    pub base: String,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub coefficients: Option<CoefficientConfig>,
    #[serde(default)]
    pub panel: PanelConfig,
    #[serde(default)]
    pub checks: CheckConfig,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides<'a> {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub output: Option<&'a Path>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn apply(&mut self, o: &Overrides<'_>) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(paths) = o.paths {
            self.paths = paths;
            for slot in [
                &mut self.checks.residual_paths,
                &mut self.checks.drift_paths,
                &mut self.checks.law_paths,
            ] {
                *slot = slot.map(|v| v.min(paths));
            }
        }
        if let Some(steps) = o.steps {
            if steps != self.steps {
                self.steps = steps;
                self.checks.residual_levels.clear();
            }
        }
        if let Some(out) = o.output {
            self.output = Some(out.to_path_buf());
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }

    /// Residual grids, coarse to fine; defaults to `K/8, K/4, K/2, K`.
    pub fn residual_levels(&self) -> Vec<usize> {
        if !self.checks.residual_levels.is_empty() {
            return self.checks.residual_levels.clone();
        }
        let mut levels: Vec<usize> = [8, 4, 2, 1]
            .iter()
            .filter(|f| self.steps.is_multiple_of(**f))
            .map(|f| self.steps / f)
            .collect();
        levels.dedup();
        levels
    }

    pub fn residual_paths(&self) -> usize {
        self.checks.residual_paths.unwrap_or(self.paths)
    }

    pub fn drift_paths(&self) -> usize {
        self.checks.drift_paths.unwrap_or(self.paths)
    }

    pub fn law_paths(&self) -> usize {
        self.checks.law_paths.unwrap_or(self.paths)
    }

    pub fn base_distribution(&self) -> Result<Distribution> {
        parse_base(&self.base, self.dimension, self.truncation)
    }

    pub fn base_is_delta(&self) -> bool {
        self.base.split_whitespace().next() == Some("delta")
    }

    pub fn panel(&self) -> Result<Vec<TestFunction>> {
        if self.panel.functions.is_empty() {
            return Ok(TestFunction::default_panel(self.dimension));
        }
        self.panel
            .functions
            .iter()
            .map(|s| {
                TestFunction::parse(s, self.dimension)
                    .map_err(|e| Error::validation("panel.functions", e.to_string()))
            })
            .collect()
    }

    /// The coefficient field; the squared-Brownian identity uses `σ ≡ 0`,
    /// `b ≡ 0` as a placeholder because its coefficients are read along `B`.
    pub fn field(&self) -> Result<CoefficientField> {
        let d = self.dimension;
        let base = self.base_distribution()?;
        match (&self.coefficients, self.identity) {
            (Some(c), Identity::Translation) => {
                let parse = |key: &str, items: &[String]| -> Result<Vec<Functional>> {
                    items
                        .iter()
                        .map(|s| {
                            Functional::parse(s, d)
                                .map_err(|e| Error::validation(key, e.to_string()))
                        })
                        .collect()
                };
                let sigma = parse("coefficients.sigma", &c.sigma)?;
                let b = parse("coefficients.drift", &c.drift)?;
                CoefficientField::new(d, self.regularity, sigma, b, base)
                    .map_err(|e| Error::validation("coefficients", e.to_string()))
            }
            (None, Identity::SquaredBrownian) => CoefficientField::constant(
                d,
                self.regularity,
                &vec![0.0; d * d],
                &vec![0.0; d],
                base,
            ),
            (None, Identity::Translation) => Err(Error::validation(
                "coefficients",
                "the translation identity needs `sigma` and `drift`",
            )),
            (Some(_), Identity::SquaredBrownian) => Err(Error::validation(
                "coefficients",
                "the squared-Brownian identity fixes its own coefficients",
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::validation("name", "use letters, digits, `-` or `_`"));
        }
        if self.dimension == 0 {
            return Err(Error::validation("dimension", "must be at least 1"));
        }
        if !(self.regularity.is_finite() && self.regularity >= 0.0) {
            return Err(Error::validation(
                "regularity",
                "must be finite and non-negative",
            ));
        }
        if !(1..=MAX_TRUNCATION).contains(&self.truncation) {
            return Err(Error::validation(
                "truncation",
                format!("must lie in 1..={MAX_TRUNCATION}"),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::validation("horizon", "must be positive and finite"));
        }
        if !(1..=MAX_STEPS).contains(&self.steps) {
            return Err(Error::validation(
                "steps",
                format!("must lie in 1..={MAX_STEPS}"),
            ));
        }
        for (key, n) in [
            ("paths", Some(self.paths)),
            ("checks.residual_paths", self.checks.residual_paths),
            ("checks.drift_paths", self.checks.drift_paths),
            ("checks.law_paths", self.checks.law_paths),
        ] {
            if let Some(n) = n {
                if !(1..=MAX_PATHS).contains(&n) {
                    return Err(Error::validation(
                        key,
                        format!("must lie in 1..={MAX_PATHS}"),
                    ));
                }
            }
        }
        self.base_distribution()?;
        if self.base_is_delta() && self.regularity <= self.dimension as f64 / 4.0 {
            return Err(Error::validation(
                "regularity",
                format!(
                    "a delta base needs p > d/4 = {}, got {}",
                    self.dimension as f64 / 4.0,
                    self.regularity
                ),
            ));
        }
        if self.identity == Identity::SquaredBrownian && !self.base_is_delta() {
            return Err(Error::validation(
                "base",
                "the squared-Brownian identity needs a delta base",
            ));
        }
        self.field()?;
        self.panel()?;
        let levels = self.residual_levels();
        if levels.len() < 2 {
            return Err(Error::validation(
                "checks.residual_levels",
                "need at least two grids",
            ));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "checks.residual_levels",
                "must be strictly increasing",
            ));
        }
        if let Some(l) = levels
            .iter()
            .find(|l| **l == 0 || !self.steps.is_multiple_of(**l))
        {
            return Err(Error::validation(
                "checks.residual_levels",
                format!("{l} does not divide steps = {}", self.steps),
            ));
        }
        if !(self.checks.level > 0.0 && self.checks.level < 1.0) {
            return Err(Error::validation("checks.level", "must lie in (0, 1)"));
        }
        if self.checks.bootstrap_replicates == 0 {
            return Err(Error::validation(
                "checks.bootstrap_replicates",
                "must be positive",
            ));
        }
        Ok(())
    }
}

fn parse_base(text: &str, dimension: usize, max_order: usize) -> Result<Distribution> {
    let bad = |m: String| Error::validation("base", m);
    let mut parts = text.split_whitespace();
    match parts.next() {
        Some("delta") => {
            let loc = parts
                .next()
                .ok_or_else(|| bad("delta needs a location".into()))?;
            if parts.next().is_some() {
                return Err(bad(format!("trailing tokens in `{text}`")));
            }
            let items: Vec<f64> = loc
                .split(',')
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| bad(format!("`{s}` is not a number")))
                })
                .collect::<Result<_>>()?;
            let location = match items.len() {
                1 => vec![items[0]; dimension],
                n if n == dimension => items,
                n => return Err(bad(format!("{n} coordinates for dimension {dimension}"))),
            };
            Distribution::delta(location).map_err(|e| bad(e.to_string()))
        }
        _ => {
            let f = TestFunction::parse(text, dimension).map_err(|e| bad(e.to_string()))?;
            Ok(Distribution::expansion(f.expansion(max_order)?))
        }
    }
}

/// Built-in scenarios.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let translation = |name: &str| ScenarioConfig {
        name: name.to_string(),
        identity: Identity::Translation,
        dimension: 1,
        regularity: 0.3,
        truncation: 200,
        horizon: 1.0,
        steps: 256,
        paths: 10_000,
        seed: 42,
        base: "delta 0".into(),
        output: None,
        coefficients: Some(CoefficientConfig {
            sigma: vec!["constant 1".into()],
            drift: vec!["zero".into()],
        }),
        panel: PanelConfig::default(),
        checks: CheckConfig {
            residual_levels: vec![32, 64, 128, 256],
            ..CheckConfig::default()
        },
    };
    match name {
        "example1" => Ok(translation("example1")),
        "example2" => Ok(ScenarioConfig {
            identity: Identity::SquaredBrownian,
            coefficients: None,
            ..translation("example2")
        }),
        "negative-control" => {
            let mut cfg = translation("negative-control");
            cfg.checks.unweighted_law_test = true;
            Ok(cfg)
        }
        other => Err(Error::validation(
            "preset",
            format!("unknown preset `{other}` (expected example1, example2 or negative-control)"),
        )),
    }
}

pub const PRESETS: [&str; 3] = ["example1", "example2", "negative-control"];
