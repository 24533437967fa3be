use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{read_matrix, read_vector, LeastSquaresProblem};
use crate::problems::{gen_lower_bound_problem, gen_poly_regression, LowerBoundSpec, PolyRegressionSpec};

/// Where the least-squares instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    PolyRegression {
        n: usize,
        d: usize,
        basis: crate::problems::Basis,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        #[serde(default)]
        seed: u64,
    },
    LowerBound {
        d: usize,
        m: usize,
        v: f64,
        #[serde(default)]
        seed: u64,
    },
    Files {
        matrix: PathBuf,
        rhs: PathBuf,
    },
}

fn default_noise_std() -> f64 {
    0.2
}

impl ProblemSpec {
    pub fn poly(spec: &PolyRegressionSpec) -> Self {
        ProblemSpec::PolyRegression {
            n: spec.n,
            d: spec.d,
            basis: spec.basis,
            noise_std: spec.noise_std,
            seed: spec.seed,
        }
    }

    /// Builds the problem with its least-squares solution attached.
    /// Relative file paths are taken relative to `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<LeastSquaresProblem> {
        match self {
            ProblemSpec::PolyRegression {
                n,
                d,
                basis,
                noise_std,
                seed,
            } => gen_poly_regression(&PolyRegressionSpec {
                n: *n,
                d: *d,
                basis: *basis,
                noise_std: *noise_std,
                seed: *seed,
            }),
            ProblemSpec::LowerBound { d, m, v, seed } => gen_lower_bound_problem(&LowerBoundSpec {
                d: *d,
                m: *m,
                v: *v,
                seed: *seed,
            }),
            ProblemSpec::Files { matrix, rhs } => {
                let join = |p: &PathBuf| match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                let a = read_matrix(join(matrix))?;
                let b = read_vector(join(rhs))?;
                LeastSquaresProblem::new(a, b)?.with_reference()
            }
        }
    }
}

/// Every method the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Rk,
    Tark,
    TarkDoubling,
    Rku,
    Rka,
    Rkrr,
    TarkRr,
    AugmentedRk,
    AugmentedTark,
    DualRk,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Rk => "rk",
            MethodKind::Tark => "tark",
            MethodKind::TarkDoubling => "tark_doubling",
            MethodKind::Rku => "rku",
            MethodKind::Rka => "rka",
            MethodKind::Rkrr => "rkrr",
            MethodKind::TarkRr => "tark_rr",
            MethodKind::AugmentedRk => "augmented_rk",
            MethodKind::AugmentedTark => "augmented_tark",
            MethodKind::DualRk => "dual_rk",
        }
    }

    /// Methods that need a ridge parameter.
    pub fn is_ridge(self) -> bool {
        matches!(
            self,
            MethodKind::Rkrr
                | MethodKind::TarkRr
                | MethodKind::AugmentedRk
                | MethodKind::AugmentedTark
                | MethodKind::DualRk
        )
    }

    pub fn uses_burn_in(self) -> bool {
        matches!(
            self,
            MethodKind::Tark | MethodKind::TarkRr | MethodKind::AugmentedTark
        )
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        serde_json::from_value(serde_json::Value::String(key))
            .map_err(|_| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: MethodKind,
    /// Name in the CSV; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_b: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Must equal the experiment budget when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

impl MethodSpec {
    pub fn new(method: MethodKind) -> Self {
        Self {
            method,
            label: None,
            t_b: None,
            omega: None,
            q: None,
            mu: None,
            budget: None,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.method.name())
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn with_burn_in(mut self, t_b: u64) -> Self {
        self.t_b = Some(t_b);
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn with_q(mut self, q: u64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }
}

fn default_trials() -> usize {
    10
}

fn default_ppd() -> u32 {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodSpec>,
    /// Rows accessed by every run.
    pub budget: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: u32,
    /// Regularization used for `rel_err_ridge`; ridge methods without
    /// their own `mu` fall back to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge_mu: Option<f64>,
    /// Fill `wall_ns`; off by default so that output bytes are
    /// reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, methods: Vec<MethodSpec>, budget: u64) -> Self {
        Self {
            problem,
            methods,
            budget,
            trials: default_trials(),
            master_seed: 0,
            points_per_decade: default_ppd(),
            ridge_mu: None,
            record_wall_time: false,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Ridge parameter for a method, if it has one.
    pub fn mu_for(&self, spec: &MethodSpec) -> Option<f64> {
        spec.mu.or(self.ridge_mu)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        if self.points_per_decade == 0 {
            return bad("points_per_decade must be at least 1".into());
        }
        if let Some(mu) = self.ridge_mu {
            if !(mu > 0.0 && mu < 1.0) {
                return bad(format!("ridge_mu {mu} outside (0, 1)"));
            }
        }
        let mut labels = HashSet::new();
        for spec in &self.methods {
            let label = spec.label();
            if !labels.insert(label.to_string()) {
                return bad(format!("duplicate method label `{label}`"));
            }
            if let Some(b) = spec.budget {
                if b != self.budget {
                    return bad(format!(
                        "budget mismatch: `{label}` asks for {b} rows, experiment uses {}",
                        self.budget
                    ));
                }
            }
            if let Some(t_b) = spec.t_b {
                if t_b > self.budget {
                    return bad(format!(
                        "`{label}`: burn-in {t_b} exceeds the budget {}",
                        self.budget
                    ));
                }
            }
            if spec.method == MethodKind::Rka {
                let q = spec.q.unwrap_or(1);
                if q == 0 || self.budget % q != 0 {
                    return bad(format!(
                        "budget mismatch: `{label}` needs a budget divisible by q = {q}, got {}",
                        self.budget
                    ));
                }
            }
            if spec.method == MethodKind::Rku {
                if let Some(w) = spec.omega {
                    if !(w > 0.0 && w <= 1.0) {
                        return bad(format!("`{label}`: omega {w} outside (0, 1]"));
                    }
                }
            }
            if spec.method.is_ridge() {
                match self.mu_for(spec) {
                    Some(mu) if mu > 0.0 && mu < 1.0 => {}
                    Some(mu) => return bad(format!("`{label}`: mu {mu} outside (0, 1)")),
                    None => return bad(format!("`{label}` needs mu or ridge_mu")),
                }
            }
        }
        Ok(())
    }
}
