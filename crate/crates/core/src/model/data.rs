use super::theta::Dims;
use crate::error::{Result, SfError};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Column roles of the three design blocks.
///
/// The frontier is `m(X, Z, β)` (intercept, inputs, treatment dummy and
/// treatment × input interactions), the scale block enters
/// `g(Z, δ) = exp(Z δ)` and the first stage is `W̃ = (W, X, Z₁)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub treatment: String,
    pub frontier_columns: Vec<String>,
    pub scale_columns: Vec<String>,
    pub first_stage_columns: Vec<String>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let count = self.scale_columns.iter().filter(|c| **c == self.treatment).count();
        if count > 1 {
            return Err(SfError::Config(format!(
                "treatment column `{}` appears {count} times in the scale function",
                self.treatment
            )));
        }
        if self.scale_columns.iter().any(|c| c == "const" || c == "intercept") {
            return Err(SfError::Config(
                "the scale function is normalized to g(0, δ) = 1 and cannot carry an intercept".into(),
            ));
        }
        for (block, cols) in [
            ("frontier", &self.frontier_columns),
            ("scale", &self.scale_columns),
            ("first-stage", &self.first_stage_columns),
        ] {
            let mut seen = std::collections::HashSet::new();
            for c in cols {
                if !seen.insert(c) {
                    return Err(SfError::Config(format!("column `{c}` repeated in the {block} design")));
                }
            }
        }
        Ok(())
    }

    /// Parameter labels in flat-vector order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        names.extend(self.frontier_columns.iter().map(|c| format!("beta[{c}]")));
        names.extend(self.scale_columns.iter().map(|c| format!("delta[{c}]")));
        names.extend(["sigma2_u", "sigma2_v", "rho_v", "rho_u"].map(String::from));
        names.extend(self.first_stage_columns.iter().map(|c| format!("gamma[{c}]")));
        names
    }
}

/// Observations in design-matrix form (one row per producer).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: ModelSpec,
    pub y: Vec<f64>,
    pub frontier: DMatrix<f64>,
    pub scale: DMatrix<f64>,
    pub treatment: Vec<bool>,
    pub first_stage: DMatrix<f64>,
}

impl Dataset {
    pub fn new(
        spec: ModelSpec,
        y: Vec<f64>,
        frontier: DMatrix<f64>,
        scale: DMatrix<f64>,
        treatment: Vec<bool>,
        first_stage: DMatrix<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        let n = y.len();
        if n == 0 {
            return Err(SfError::Data("empty dataset".into()));
        }
        for (name, m, width) in [
            ("frontier", &frontier, spec.frontier_columns.len()),
            ("scale", &scale, spec.scale_columns.len()),
            ("first-stage", &first_stage, spec.first_stage_columns.len()),
        ] {
            if m.nrows() != n {
                return Err(SfError::Data(format!("{name} design has {} rows, expected {n}", m.nrows())));
            }
            if m.ncols() != width {
                return Err(SfError::Data(format!(
                    "{name} design has {} columns but {width} names",
                    m.ncols()
                )));
            }
            if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
                return Err(SfError::Data(format!("non-finite entry in {name} design at row {}", pos % n)));
            }
        }
        if treatment.len() != n {
            return Err(SfError::Data("treatment length does not match outcome".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(SfError::Data(format!("non-finite outcome at row {i}")));
        }
        for j in 0..scale.ncols() {
            let col = scale.column(j);
            if n > 1 && col.iter().all(|v| *v == col[0]) && col[0] != 0.0 {
                return Err(SfError::Data(format!(
                    "scale column `{}` is constant; g(0, δ) = 1 leaves no room for an intercept",
                    spec.scale_columns[j]
                )));
            }
        }
        let data = Self {
            spec,
            y,
            frontier,
            scale,
            treatment,
            first_stage,
        };
        Ok(data)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn dims(&self) -> Dims {
        Dims {
            frontier: self.frontier.ncols(),
            scale: self.scale.ncols(),
            first_stage: self.first_stage.ncols(),
        }
    }

    /// Keep the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)]);
        Dataset::new(
            self.spec.clone(),
            rows.iter().map(|&i| self.y[i]).collect(),
            pick(&self.frontier),
            pick(&self.scale),
            rows.iter().map(|&i| self.treatment[i]).collect(),
            pick(&self.first_stage),
        )
    }

    /// Copy with the first-stage design restricted to the named columns.
    pub fn with_first_stage_columns(&self, keep: &[String]) -> Result<Self> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|c| {
                self.spec
                    .first_stage_columns
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| SfError::Config(format!("`{c}` is not a first-stage column")))
            })
            .collect::<Result<_>>()?;
        let fs = DMatrix::from_fn(self.n_obs(), idx.len(), |i, j| self.first_stage[(i, idx[j])]);
        let mut spec = self.spec.clone();
        spec.first_stage_columns = keep.to_vec();
        Dataset::new(
            spec,
            self.y.clone(),
            self.frontier.clone(),
            self.scale.clone(),
            self.treatment.clone(),
            fs,
        )
    }
}
