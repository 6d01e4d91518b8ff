//! Experiment configuration: one JSON document, validated before any work runs.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use slicelab::{AlphaMode, BuiltinTarget, RadialTarget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridOptions {
    pub size: usize,
    pub mass_tol: f64,
    /// Also compute the gap at `2 * size` for the refinement diagnostic.
    pub refine: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            size: slicelab::operator::DEFAULT_GRID_SIZE,
            mass_tol: slicelab::operator::DEFAULT_MASS_TOL,
            refine: true,
        }
    }
}

/// A (target, α-mode, d) triple used by the verification checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub target: BuiltinTarget,
    pub alpha: AlphaMode,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    /// Sample size of each one-step KS check.
    pub ks_samples: usize,
    /// Largest accepted KS statistic.
    pub ks_threshold: f64,
    pub ks_targets: Vec<BuiltinTarget>,
    pub ks_dims: Vec<usize>,
    /// Case for the Monte Carlo check of the kernel formula.
    pub kernel_case: Case,
    pub kernel_probes: usize,
    pub mc_steps: usize,
    pub adjointness_cases: Vec<Case>,
    pub adjointness_points: usize,
    pub adjointness_tol: f64,
    /// Dimensions for the ℓ-equivalence / duality comparison.
    pub duality_dims: Vec<usize>,
    pub duality_grid_size: usize,
    /// Inject a non-monotone perturbation into ℓ before discretizing.
    pub corrupt_ell: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            ks_samples: 10_000,
            ks_threshold: 0.02,
            ks_targets: vec![
                BuiltinTarget::exponential(),
                BuiltinTarget::volcano(2.0),
                BuiltinTarget::Gaussian,
                BuiltinTarget::RadialWeightedExponential,
            ],
            ks_dims: vec![2, 5, 10],
            kernel_case: Case {
                target: BuiltinTarget::exponential(),
                alpha: AlphaMode::Pss,
                d: 5,
            },
            kernel_probes: 10,
            mc_steps: 1_000_000,
            adjointness_cases: vec![
                Case {
                    target: BuiltinTarget::exponential(),
                    alpha: AlphaMode::Pss,
                    d: 3,
                },
                Case {
                    target: BuiltinTarget::volcano(2.0),
                    alpha: AlphaMode::Uss,
                    d: 2,
                },
            ],
            adjointness_points: 4096,
            adjointness_tol: 1e-6,
            duality_dims: (2..=10).collect(),
            duality_grid_size: 512,
            corrupt_ell: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub target: BuiltinTarget,
    pub alpha: AlphaMode,
    pub dims: Vec<usize>,
    pub n_it: usize,
    pub n_rep: usize,
    pub base_seed: u64,
    pub grid: GridOptions,
    /// `k` values for `check-lambda`.
    pub lambda_k: Vec<u32>,
    /// Probe points for `check-lambda`.
    pub lambda_probes: usize,
    pub verify: VerifyOptions,
}

pub const DESK_DIMS: [usize; 7] = [1, 2, 3, 5, 10, 20, 30];
pub const FULL_DIMS: [usize; 10] = [1, 2, 3, 5, 10, 20, 30, 50, 75, 100];

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            target: BuiltinTarget::exponential(),
            alpha: AlphaMode::Pss,
            dims: DESK_DIMS.to_vec(),
            n_it: 10_000,
            n_rep: 5,
            base_seed: 0x5eed_51ce,
            grid: GridOptions::default(),
            lambda_k: vec![1],
            lambda_probes: 200,
            verify: VerifyOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full-scale settings: dimensions up to 100, `n_it = 10^5`, `n_rep = 10`.
    pub fn full_scale(mut self) -> Self {
        self.dims = FULL_DIMS.to_vec();
        self.n_it = 100_000;
        self.n_rep = 10;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.dims.is_empty(), "dims must not be empty");
        ensure!(
            self.dims.iter().all(|&d| d >= 1),
            "dimensions must be positive"
        );
        ensure!(
            self.n_it >= 10,
            "n_it must be at least 10, got {}",
            self.n_it
        );
        ensure!(self.n_rep >= 1, "n_rep must be at least 1");
        ensure!(self.grid.size >= 2, "grid size must be at least 2");
        ensure!(
            self.grid.mass_tol > 0.0 && self.grid.mass_tol < 0.5,
            "grid mass_tol must lie in (0, 0.5)"
        );
        ensure!(
            self.lambda_probes >= 100,
            "lambda_probes must be at least 100"
        );
        if let Some(k) = self.lambda_k.iter().find(|&&k| k == 0) {
            bail!("lambda_k entries must be positive, got {k}");
        }
        for &d in &self.dims {
            self.resolve(d)?;
        }
        let v = &self.verify;
        ensure!(v.ks_threshold > 0.0, "ks_threshold must be positive");
        ensure!(
            v.kernel_probes >= 1 && v.mc_steps >= 1,
            "kernel check needs probes and steps"
        );
        ensure!(
            v.adjointness_points >= 512,
            "adjointness_points must be at least 512"
        );
        for t in &v.ks_targets {
            for &d in &v.ks_dims {
                RadialTarget::builtin(*t, d)?;
            }
        }
        for c in v
            .adjointness_cases
            .iter()
            .chain(std::iter::once(&v.kernel_case))
        {
            RadialTarget::builtin(c.target, c.d)?;
            c.alpha.resolve(c.d)?;
        }
        ensure!(
            v.duality_dims.iter().all(|&d| d >= 2),
            "duality dims must be at least 2"
        );
        Ok(())
    }

    pub fn resolve(&self, d: usize) -> Result<(RadialTarget, slicelab::RadialFactorization)> {
        let t = RadialTarget::builtin(self.target, d)
            .with_context(|| format!("target {} at d = {d}", self.target.label()))?;
        let f = self.alpha.resolve(d)?;
        Ok((t, f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"target": {"tag": "volcano", "center": 2.0}, "alpha": "uss", "dims": [2]}"#,
        )
        .unwrap();
        assert_eq!(c.target, BuiltinTarget::volcano(2.0));
        assert_eq!(c.n_it, 10_000);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"dims": []}"#,
            r#"{"n_it": 5}"#,
            r#"{"lambda_k": [0]}"#,
            r#"{"target": {"tag": "nope"}}"#,
            r#"{"alpha": {"custom": 7.0}, "dims": [3]}"#,
            r#"{"unknown_field": 1}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn full_scale_settings() {
        let c = ExperimentConfig::default().full_scale();
        assert_eq!(c.n_it, 100_000);
        assert_eq!(c.n_rep, 10);
        assert_eq!(*c.dims.last().unwrap(), 100);
    }
}
