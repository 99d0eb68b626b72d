//! JSON problem files.
//!
//! A constraint record `{A, b, c}` stands for `xᵀAx + bᵀx + c ≤ 0`; the
//! objective `{A, b}` is `xᵀAx + bᵀx`. Matrices are dense arrays of rows.

use std::fs;
use std::path::Path;

use ebl_core::linalg::Matrix;
use ebl_core::probgen::Instance;
use ebl_core::{Qcqp64, QuadConstraint64, Quadratic64, SymMatrix64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const GENERATOR_VERSION: &str = "1";

/// Asymmetry above which loading a matrix prints a warning.
const ASYMMETRY_WARN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRecord {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_version: Option<String>,
    /// Number of negative eigenvalues of the objective Hessian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neigs: Option<usize>,
    /// A strictly feasible point known to the generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub n: usize,
    pub m: usize,
    pub objective: ObjectiveRecord,
    pub constraints: Vec<ConstraintRecord>,
    #[serde(default)]
    pub meta: Meta,
}

/// A loaded problem plus any warnings raised while reading it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub problem: Qcqp64,
    pub file: ProblemFile,
    pub warnings: Vec<String>,
}

fn rows(m: &SymMatrix64) -> Vec<Vec<f64>> {
    m.matrix().to_rows()
}

impl ProblemFile {
    pub fn from_problem(problem: &Qcqp64, meta: Meta) -> Self {
        let f = problem.objective();
        Self {
            schema_version: SCHEMA_VERSION,
            n: problem.dim(),
            m: problem.constraints().len(),
            objective: ObjectiveRecord {
                a: rows(&f.a),
                b: f.b.clone(),
            },
            constraints: problem
                .constraints()
                .iter()
                .map(|g| ConstraintRecord {
                    a: rows(&g.a),
                    b: g.b.clone(),
                    c: g.c,
                })
                .collect(),
            meta,
        }
    }

    pub fn from_instance(inst: &Instance<f64>) -> Self {
        let meta = Meta {
            kind: Some(inst.spec.kind.as_str().to_string()),
            seed: Some(inst.spec.seed),
            generator_version: Some(GENERATOR_VERSION.to_string()),
            neigs: Some(inst.problem.neigs()),
            planted: Some(inst.planted.clone()),
        };
        Self::from_problem(&inst.problem, meta)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("problem file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("malformed problem file: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Loaded, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)?.into_problem()
    }

    /// Validates dimensions, symmetrizes matrices and builds the problem.
    pub fn into_problem(self) -> Result<Loaded, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Input(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let n = self.n;
        if n == 0 {
            return Err(CliError::Input("n must be at least 1".into()));
        }
        if self.constraints.len() != self.m || self.m == 0 {
            return Err(CliError::Input(format!(
                "m = {} but {} constraint records given (need at least one)",
                self.m,
                self.constraints.len()
            )));
        }
        let mut warnings = Vec::new();
        let objective = {
            let a = sym_matrix("objective", &self.objective.a, n, &mut warnings)?;
            check_len("objective.b", &self.objective.b, n)?;
            Quadratic64::new(a, self.objective.b.clone()).map_err(|e| CliError::Input(format!("objective: {e}")))?
        };
        let mut constraints = Vec::with_capacity(self.m);
        for (i, rec) in self.constraints.iter().enumerate() {
            let name = format!("constraints[{i}]");
            let a = sym_matrix(&name, &rec.a, n, &mut warnings)?;
            check_len(&format!("{name}.b"), &rec.b, n)?;
            let g = QuadConstraint64::new(a, rec.b.clone(), rec.c)
                .map_err(|e| CliError::Input(format!("{name}: {e} (A must be positive definite)")))?;
            constraints.push(g);
        }
        let problem = Qcqp64::new(objective, constraints).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(Loaded {
            problem,
            file: self,
            warnings,
        })
    }
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<(), CliError> {
    if v.len() != n {
        return Err(CliError::Input(format!("{name} has length {} (expected {n})", v.len())));
    }
    Ok(())
}

fn sym_matrix(name: &str, data: &[Vec<f64>], n: usize, warnings: &mut Vec<String>) -> Result<SymMatrix64, CliError> {
    if data.len() != n || data.iter().any(|r| r.len() != n) {
        return Err(CliError::Input(format!("{name}.A must be {n}x{n}")));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Input(format!("{name}.A has non-finite entries")));
    }
    let m = Matrix::from_rows(data).map_err(|e| CliError::Input(format!("{name}.A: {e}")))?;
    let asym = SymMatrix64::asymmetry(&m);
    if asym > ASYMMETRY_WARN {
        warnings.push(format!("{name}.A is not symmetric (max |A - Aᵀ| = {asym:e}); using (A + Aᵀ)/2"));
    }
    SymMatrix64::new(m).map_err(|e| CliError::Input(format!("{name}.A: {e}")))
}
