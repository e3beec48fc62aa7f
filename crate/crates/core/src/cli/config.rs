use crate::error::{Result, SfError};
use crate::estimation::FitOptions;
use crate::simulation::Scheme;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Maximum-likelihood fit of the full model.
    Fit,
    /// Per-row technical efficiency at a fitted (or supplied) parameter.
    Te,
    /// Likelihood-ratio test of `ρ_U = 0`.
    Test,
    /// Monte Carlo replication of the simulation design.
    Simulate,
    /// Writes one simulated sample as CSV.
    Generate,
}

/// Which data columns play which role in the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnRoles {
    pub output: String,
    pub inputs: Vec<String>,
    /// Binary treatment (the endogenous regressor).
    pub treatment: String,
    /// Covariates of the inefficiency scale `exp(Zδ)`; may list the treatment.
    pub inefficiency_determinants: Vec<String>,
    /// Excluded instruments of the first stage.
    pub instruments: Vec<String>,
    /// Columns replaced by their natural logarithm at ingestion.
    pub log: Vec<String>,
    /// Include the treatment dummy as a frontier regressor.
    pub treatment_dummy: bool,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        Self {
            output: String::new(),
            inputs: Vec::new(),
            treatment: String::new(),
            inefficiency_determinants: Vec::new(),
            instruments: Vec::new(),
            log: Vec::new(),
            treatment_dummy: true,
        }
    }
}

impl ColumnRoles {
    /// Every column name the roles refer to.
    pub fn referenced<'a>(&'a self, interactions: &'a [String]) -> Vec<&'a str> {
        let mut v = vec![self.output.as_str(), self.treatment.as_str()];
        v.extend(self.inputs.iter().map(String::as_str));
        v.extend(self.inefficiency_determinants.iter().map(String::as_str));
        v.extend(self.instruments.iter().map(String::as_str));
        v.extend(self.log.iter().map(String::as_str));
        v.extend(interactions.iter().map(String::as_str));
        v
    }

    pub fn validate(&self, interactions: &[String]) -> Result<()> {
        if self.output.is_empty() || self.treatment.is_empty() {
            return Err(SfError::Config("column roles `output` and `treatment` are required".into()));
        }
        // The treatment may also be an inefficiency determinant; every other
        // role assignment must be unique.
        let mut seen = std::collections::HashMap::new();
        let roles: [(&str, Vec<&String>); 5] = [
            ("output", vec![&self.output]),
            ("treatment", vec![&self.treatment]),
            ("inputs", self.inputs.iter().collect()),
            (
                "inefficiency_determinants",
                self.inefficiency_determinants.iter().filter(|c| **c != self.treatment).collect(),
            ),
            ("instruments", self.instruments.iter().collect()),
        ];
        for (role, cols) in roles {
            for c in cols {
                if let Some(prev) = seen.insert(c.clone(), role) {
                    return Err(SfError::Config(format!("column `{c}` has two roles: {prev} and {role}")));
                }
            }
        }
        for c in interactions {
            if !self.inputs.contains(c) {
                return Err(SfError::Config(format!("interaction column `{c}` is not an input")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub scheme: Scheme,
    pub n: usize,
    pub reps: usize,
    /// Also summarize technical efficiency per replicate.
    pub with_te: bool,
    /// Override of the first-stage coefficients `(γ₀, …, γ₅)`.
    pub gamma: Option<Vec<f64>>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            scheme: Scheme::S2,
            n: 500,
            reps: 100,
            with_te: true,
            gamma: None,
        }
    }
}

/// Declarative description of one run; loaded from TOML and then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub data_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    /// Fit report whose estimate the `te` command evaluates; without it the
    /// model is fitted first.
    pub theta_path: Option<PathBuf>,
    /// Single source of randomness for start perturbations and simulation.
    pub seed: u64,
    pub columns: ColumnRoles,
    /// Inputs interacted with the treatment dummy in the frontier.
    pub interactions: Vec<String>,
    pub fit: FitOptions,
    pub simulate: SimulateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            data_path: None,
            output_path: None,
            theta_path: None,
            seed: 0,
            columns: ColumnRoles::default(),
            interactions: Vec::new(),
            fit: FitOptions::default(),
            simulate: SimulateSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| SfError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SfError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SfError::Config(e.to_string()))
    }

    /// Fit options with the run seed applied.
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            seed: self.seed,
            ..self.fit.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_sections() {
        let cfg = RunConfig::from_toml_str(
            r#"
            command = "fit"
            data_path = "farms.csv"
            seed = 7
            interactions = ["x1"]
            [columns]
            output = "y"
            inputs = ["x1", "x2"]
            treatment = "z"
            inefficiency_determinants = ["age", "z"]
            instruments = ["w"]
            log = ["y"]
            [fit]
            n_starts = 3
            [simulate]
            scheme = "S3"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.command, Some(Command::Fit));
        assert_eq!(cfg.fit.n_starts, 3);
        assert_eq!(cfg.fit.rho_draws, FitOptions::default().rho_draws);
        assert_eq!(cfg.fit_options().seed, 7);
        assert_eq!(cfg.simulate.scheme, Scheme::S3);
        assert!(cfg.columns.treatment_dummy);
        cfg.columns.validate(&cfg.interactions).unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_overlapping_roles() {
        assert!(RunConfig::from_toml_str("sed = 3").is_err());
        assert!(RunConfig::from_toml_str("[fit]\nn_start = 3").is_err());
        let roles = ColumnRoles {
            output: "y".into(),
            treatment: "z".into(),
            inputs: vec!["x".into()],
            instruments: vec!["x".into()],
            ..ColumnRoles::default()
        };
        assert!(matches!(roles.validate(&[]), Err(SfError::Config(_))));
        let roles = ColumnRoles {
            instruments: vec!["w".into()],
            ..roles
        };
        roles.validate(&[]).unwrap();
        assert!(roles.validate(&["w".into()]).is_err());
    }
}
