//! Declarative benchmark plans (JSON).
//!
//! A plan is a factorial design: every combination of correlation level,
//! noise level, algorithm, scheme and ratio is one cell, run `trials` times.
//! `extra_sweeps` adds further factorial blocks whose unset axes fall back to
//! the main plan; the cell list is the union, in first-appearance order.

use std::collections::HashSet;
use std::path::Path;

use bluefill_core::experiment::{Algorithm, Cell, TrialSettings};
use bluefill_core::solver::DEFAULT_NONCONVEX_P;
use bluefill_core::{CorrelationLevel, HardRule, Scheme, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An algorithm given either by name or as explicit `{p, hard_rule}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmSpec {
    Named(String),
    Explicit(Algorithm),
}

impl AlgorithmSpec {
    pub fn resolve(&self) -> Result<Algorithm> {
        match self {
            AlgorithmSpec::Named(name) => parse_algorithm(name),
            AlgorithmSpec::Explicit(a) => Ok(*a),
        }
    }
}

impl From<Algorithm> for AlgorithmSpec {
    fn from(a: Algorithm) -> Self {
        AlgorithmSpec::Explicit(a)
    }
}

/// `shrinkage`, `hard` (`hard_thresholding`), `hard_derived` or `nonconvex`.
pub fn parse_algorithm(name: &str) -> Result<Algorithm> {
    match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "shrinkage" | "soft" | "nuclear" => Ok(Algorithm::SHRINKAGE),
        "hard" | "hard_thresholding" => Ok(Algorithm::HARD),
        "hard_derived" => Ok(Algorithm { p: 0.0, hard_rule: HardRule::Derived }),
        "nonconvex" | "non_convex" => Ok(Algorithm { p: DEFAULT_NONCONVEX_P, hard_rule: HardRule::Paper }),
        _ => Err(Error::invalid(format!(
            "unknown algorithm {name:?} (expected shrinkage, hard, hard_derived or nonconvex)"
        ))),
    }
}

/// Solver settings a plan may override; unset fields keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dec_fac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_inner: Option<usize>,
}

impl SolverOverrides {
    pub fn apply(&self, mut cfg: SolverConfig) -> SolverConfig {
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.dec_fac {
            cfg.dec_fac = v;
        }
        if let Some(v) = self.inner_tol {
            cfg.inner_tol = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.max_inner {
            cfg.max_inner = v;
        }
        cfg
    }
}

/// Additional factorial block; `None` axes inherit the main plan's.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_levels: Option<Vec<CorrelationLevel>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<Scheme>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_levels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Vec<AlgorithmSpec>>,
}

pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub n: usize,
    pub correlation_levels: Vec<CorrelationLevel>,
    pub schemes: Vec<Scheme>,
    pub ratios: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub trials: usize,
    pub base_seed: u64,
    pub fixed_field: bool,
    pub solver: SolverOverrides,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extra_sweeps: Vec<Sweep>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            n: 64,
            correlation_levels: CorrelationLevel::PRESETS.to_vec(),
            schemes: Scheme::ALL.to_vec(),
            ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            noise_levels: vec![0.0, 0.05, 0.10],
            algorithms: vec![AlgorithmSpec::Explicit(Algorithm::SHRINKAGE)],
            trials: DEFAULT_TRIALS,
            base_seed: 0,
            fixed_field: false,
            solver: SolverOverrides::default(),
            extra_sweeps: Vec::new(),
        }
    }
}

impl ExperimentPlan {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("plan: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    /// Same plan with every algorithm spelled out as `{p, hard_rule}`.
    pub fn resolved(&self) -> Result<Self> {
        let resolve = |specs: &[AlgorithmSpec]| -> Result<Vec<AlgorithmSpec>> {
            specs.iter().map(|s| s.resolve().map(AlgorithmSpec::Explicit)).collect()
        };
        let mut out = self.clone();
        out.algorithms = resolve(&self.algorithms)?;
        for sweep in &mut out.extra_sweeps {
            if let Some(a) = &sweep.algorithms {
                sweep.algorithms = Some(resolve(a)?);
            }
        }
        Ok(out)
    }

    pub fn settings(&self) -> TrialSettings {
        TrialSettings {
            n: self.n,
            base_seed: self.base_seed,
            fixed_field: self.fixed_field,
            solver: self.solver.apply(SolverConfig::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        let blocks = std::iter::once(self.main_sweep()).chain(self.extra_sweeps.iter().cloned());
        for (i, sweep) in blocks.enumerate() {
            let at = if i == 0 { String::from("plan") } else { format!("extra_sweeps[{}]", i - 1) };
            let axes = [
                ("correlation_levels", sweep.correlation_levels.as_ref().is_some_and(Vec::is_empty)),
                ("schemes", sweep.schemes.as_ref().is_some_and(Vec::is_empty)),
                ("ratios", sweep.ratios.as_ref().is_some_and(Vec::is_empty)),
                ("noise_levels", sweep.noise_levels.as_ref().is_some_and(Vec::is_empty)),
                ("algorithms", sweep.algorithms.as_ref().is_some_and(Vec::is_empty)),
            ];
            if let Some((name, _)) = axes.iter().find(|(_, empty)| *empty) {
                return Err(Error::invalid(format!("{at}: {name} must not be empty")));
            }
            for &r in sweep.ratios.iter().flatten() {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::invalid(format!("{at}: ratio must lie in (0, 1], got {r}")));
                }
            }
            for &v in sweep.noise_levels.iter().flatten() {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::invalid(format!("{at}: noise level must be non-negative, got {v}")));
                }
            }
            for spec in sweep.algorithms.iter().flatten() {
                let a = spec.resolve()?;
                if !(0.0..=1.0).contains(&a.p) {
                    return Err(Error::invalid(format!("{at}: p must lie in [0, 1], got {}", a.p)));
                }
            }
        }
        self.settings().solver.validate()?;
        Ok(())
    }

    fn main_sweep(&self) -> Sweep {
        Sweep {
            correlation_levels: Some(self.correlation_levels.clone()),
            schemes: Some(self.schemes.clone()),
            ratios: Some(self.ratios.clone()),
            noise_levels: Some(self.noise_levels.clone()),
            algorithms: Some(self.algorithms.clone()),
        }
    }

    /// Every cell of the design, deduplicated, ordered by
    /// correlation → noise → algorithm → scheme → ratio within each block.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for sweep in std::iter::once(self.main_sweep()).chain(self.extra_sweeps.iter().cloned()) {
            let levels = sweep.correlation_levels.unwrap_or_else(|| self.correlation_levels.clone());
            let schemes = sweep.schemes.unwrap_or_else(|| self.schemes.clone());
            let ratios = sweep.ratios.unwrap_or_else(|| self.ratios.clone());
            let noises = sweep.noise_levels.unwrap_or_else(|| self.noise_levels.clone());
            let algorithms = sweep
                .algorithms
                .unwrap_or_else(|| self.algorithms.clone())
                .iter()
                .map(AlgorithmSpec::resolve)
                .collect::<Result<Vec<_>>>()?;
            for &correlation in &levels {
                for &noise in &noises {
                    for &algorithm in &algorithms {
                        for &scheme in &schemes {
                            for &ratio in &ratios {
                                let cell = Cell { correlation, scheme, ratio, noise, algorithm };
                                if seen.insert(cell.key()) {
                                    out.push(cell);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default_plan() {
        let plan = ExperimentPlan::from_json_str("{}").unwrap();
        assert_eq!(plan, ExperimentPlan::default());
        assert_eq!(plan.cells().unwrap().len(), 3 * 4 * 5 * 3);
    }

    #[test]
    fn algorithms_by_name_or_parameters() {
        let plan = ExperimentPlan::from_json_str(
            r#"{"algorithms": ["shrinkage", "hard_derived", {"p": 0.5}, {"p": 0, "hard_rule": "derived"}]}"#,
        )
        .unwrap();
        let algs: Vec<_> = plan.algorithms.iter().map(|a| a.resolve().unwrap()).collect();
        assert_eq!(algs[0], Algorithm::SHRINKAGE);
        assert_eq!(algs[1], Algorithm { p: 0.0, hard_rule: HardRule::Derived });
        assert_eq!(algs[2], Algorithm { p: 0.5, hard_rule: HardRule::Paper });
        // The duplicate derived-rule entry collapses.
        let plan = ExperimentPlan { schemes: vec![Scheme::Random], ratios: vec![0.2], ..plan };
        assert_eq!(plan.cells().unwrap().len(), 3 * 3 * 3);
    }

    #[test]
    fn extra_sweeps_are_unioned() {
        let plan = ExperimentPlan::from_json_str(
            r#"{
                "correlation_levels": ["high"],
                "schemes": ["quasi_crystal", "random"],
                "ratios": [0.1, 0.2],
                "noise_levels": [0.0],
                "extra_sweeps": [{"schemes": ["quasi_crystal"], "ratios": [0.1], "algorithms": ["shrinkage", "nonconvex"]}]
            }"#,
        )
        .unwrap();
        let cells = plan.cells().unwrap();
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[4].algorithm.p, DEFAULT_NONCONVEX_P);
        assert_eq!(cells[4].scheme, Scheme::QuasiCrystal);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        for text in [
            r#"{"ratios": [0.0]}"#,
            r#"{"ratios": [1.5]}"#,
            r#"{"trials": 0}"#,
            r#"{"noise_levels": [-0.1]}"#,
            r#"{"schemes": []}"#,
            r#"{"algorithms": ["simplex"]}"#,
            r#"{"algorithms": [{"p": 2}]}"#,
            r#"{"extra_sweeps": [{"ratios": [2]}]}"#,
            r#"{"solver": {"dec_fac": 1.5}}"#,
        ] {
            let plan = ExperimentPlan::from_json_str(text).unwrap();
            assert!(matches!(plan.cells(), Err(Error::Invalid(_))), "{text}");
        }
        assert!(ExperimentPlan::from_json_str(r#"{"trails": 3}"#).is_err());
    }

    #[test]
    fn resolved_plan_round_trips() {
        let plan = ExperimentPlan {
            algorithms: vec![AlgorithmSpec::Named("nonconvex".into())],
            ..ExperimentPlan::default()
        };
        let resolved = plan.resolved().unwrap();
        let text = serde_json::to_string(&resolved).unwrap();
        let back = ExperimentPlan::from_json_str(&text).unwrap();
        assert_eq!(back.cells().unwrap(), plan.cells().unwrap());
    }
}
