//! The `verify` suite: stationarity, kernel formula, adjointness, duality and
//! kernel invariants, each reported as pass / fail / skipped.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use slicelab::{adjointness_check, RadialLevelSet, RadialTarget};

use crate::checks::{
    duality_row, kernel_invariants, kernel_mc_probes, ks_t_one_step, ks_underpowered,
    ks_x_one_step, Corrupted,
};
use crate::config::ExperimentConfig;
use crate::experiments::{derive_seed, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn outcome(name: String, ok: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn failed(name: String, err: anyhow::Error) -> CheckResult {
    CheckResult {
        name,
        status: Status::Fail,
        detail: format!("error: {err:#}"),
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.status != Status::Fail)
}

fn ks_checks(cfg: &ExperimentConfig) -> Vec<CheckResult> {
    let v = &cfg.verify;
    let mut jobs = Vec::new();
    for t in &v.ks_targets {
        for &d in &v.ks_dims {
            for s in [Sampler::Uss, Sampler::Pss] {
                for chain in ["x", "t"] {
                    jobs.push((*t, d, s, chain));
                }
            }
        }
    }
    let underpowered = ks_underpowered(v.ks_samples, v.ks_threshold);
    jobs.par_iter()
        .enumerate()
        .map(|(i, &(t, d, s, chain))| {
            let name = format!("ks_{chain}_step[{} {} d={d}]", t.label(), s.label());
            if underpowered {
                return CheckResult {
                    name,
                    status: Status::Skipped,
                    detail: format!(
                        "underpowered: {} samples at threshold {}",
                        v.ks_samples, v.ks_threshold
                    ),
                };
            }
            let seed = derive_seed(cfg.base_seed, d, s, 1000 + i);
            let run = || -> anyhow::Result<f64> {
                let target = RadialTarget::builtin(t, d)?;
                let fac = s.factorization(d);
                if chain == "x" {
                    ks_x_one_step(&target, &fac, v.ks_samples, seed)
                } else {
                    ks_t_one_step(&target, &fac, v.ks_samples, seed)
                }
            };
            match run() {
                Ok(stat) => outcome(
                    name,
                    stat <= v.ks_threshold,
                    format!("D = {stat:.5} (threshold {})", v.ks_threshold),
                ),
                Err(e) => failed(name, e),
            }
        })
        .collect()
}

fn kernel_mc_check(cfg: &ExperimentConfig) -> CheckResult {
    let c = &cfg.verify.kernel_case;
    let name = format!(
        "kernel_monte_carlo[{} {} d={}]",
        c.target.label(),
        c.alpha.label(),
        c.d
    );
    let run = || -> anyhow::Result<CheckResult> {
        let target = RadialTarget::builtin(c.target, c.d)?;
        let fac = c.alpha.resolve(c.d)?;
        let seed = derive_seed(cfg.base_seed, c.d, Sampler::Pss, 999);
        let probes = kernel_mc_probes(
            &target,
            &fac,
            cfg.verify.kernel_probes,
            cfg.verify.mc_steps,
            seed,
        )?;
        let worst = probes
            .iter()
            .map(|p| (p.quadrature - p.monte_carlo).abs() / p.tolerance)
            .fold(0.0, f64::max);
        Ok(outcome(
            name.clone(),
            probes.iter().all(|p| p.passed()),
            format!(
                "{} probes, worst |quad - mc| / tol = {worst:.3}",
                probes.len()
            ),
        ))
    };
    run().unwrap_or_else(|e| failed(name, e))
}

fn adjointness_checks(cfg: &ExperimentConfig) -> Vec<CheckResult> {
    let v = &cfg.verify;
    v.adjointness_cases
        .iter()
        .map(|c| {
            let name = format!(
                "adjointness[{} {} d={}]",
                c.target.label(),
                c.alpha.label(),
                c.d
            );
            let run = || -> anyhow::Result<f64> {
                let target = RadialTarget::builtin(c.target, c.d)?;
                let fac = c.alpha.resolve(c.d)?;
                Ok(adjointness_check(&target, &fac, v.adjointness_points)?.max_residual)
            };
            match run() {
                Ok(r) => outcome(
                    name,
                    r <= v.adjointness_tol,
                    format!("max residual {r:.3e} (tolerance {:.0e})", v.adjointness_tol),
                ),
                Err(e) => failed(name, e),
            }
        })
        .collect()
}

fn duality_checks(cfg: &ExperimentConfig) -> Vec<CheckResult> {
    let v = &cfg.verify;
    v.duality_dims
        .par_iter()
        .map(|&d| {
            let name = format!("duality[d={d}]");
            match duality_row(d, 50, v.duality_grid_size) {
                Ok(r) => outcome(
                    name,
                    r.max_ell_diff <= 1e-10 && r.gap_diff <= 1e-9,
                    format!(
                        "max |Δℓ| = {:.2e}, |Δgap| = {:.2e}, gap = {:.4}",
                        r.max_ell_diff, r.gap_diff, r.gap_pss
                    ),
                ),
                Err(e) => failed(name, e),
            }
        })
        .collect()
}

fn kernel_invariant_check(cfg: &ExperimentConfig) -> CheckResult {
    let c = &cfg.verify.kernel_case;
    let name = format!(
        "kernel_invariants[{} {} d={}{}]",
        c.target.label(),
        c.alpha.label(),
        c.d,
        if cfg.verify.corrupt_ell {
            ", corrupted"
        } else {
            ""
        }
    );
    let run = || -> anyhow::Result<CheckResult> {
        let target = RadialTarget::builtin(c.target, c.d)?;
        let ell = RadialLevelSet::new(&target, &c.alpha.resolve(c.d)?)?;
        let inv = if cfg.verify.corrupt_ell {
            kernel_invariants(&Corrupted(ell), cfg.grid.size, cfg.grid.mass_tol)?
        } else {
            kernel_invariants(&ell, cfg.grid.size, cfg.grid.mass_tol)?
        };
        Ok(outcome(
            name.clone(),
            inv.passed(),
            format!(
                "n = {}, row defect {:.1e}, weight defect {:.1e}, stationarity {:.1e}",
                inv.grid_size, inv.max_row_defect, inv.weight_defect, inv.stationarity_residual
            ),
        ))
    };
    run().unwrap_or_else(|e| failed(name, e))
}

/// Runs every check; never stops at the first failure.
pub fn run_verify(cfg: &ExperimentConfig) -> Vec<CheckResult> {
    let mut out = vec![kernel_invariant_check(cfg)];
    out.extend(ks_checks(cfg));
    out.push(kernel_mc_check(cfg));
    out.extend(adjointness_checks(cfg));
    out.extend(duality_checks(cfg));
    out
}
