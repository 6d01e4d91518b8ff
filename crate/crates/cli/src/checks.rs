//! Stochastic and numerical checks shared by `verify` and the acceptance tests.

use anyhow::Result;
use rand::Rng;
use serde::Serialize;
use slicelab::levelset::LevelSetFunction;
use slicelab::operator::{discretize_pt, transition_probability, DEFECT_TOL};
use slicelab::samplers::radius_in_interval;
use slicelab::{
    chain_rng, duality_gap_compare, ks_one_sample, surface_area, t_update, BuiltinTarget,
    LevelStationarySampler, LogLevel, RadialFactorization, RadialLevelSet, RadialSliceSampler,
    RadialTarget, StationaryRadialSampler, TGrid,
};

/// Largest acceptable false-alarm probability of a KS check under the null.
pub const KS_MAX_FALSE_ALARM: f64 = 1e-3;

/// Asymptotic Kolmogorov tail `P(√n D > x)`.
pub fn kolmogorov_tail(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// A one-sample KS check at `n` draws and this threshold would fire too
/// often under the null to mean anything.
pub fn ks_underpowered(n: usize, threshold: f64) -> bool {
    kolmogorov_tail((n as f64).sqrt() * threshold) > KS_MAX_FALSE_ALARM
}

/// KS statistic of one X-step started from the stationary radius law,
/// against that law.
pub fn ks_x_one_step(
    target: &RadialTarget,
    fac: &RadialFactorization,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let oracle = StationaryRadialSampler::new(target)?;
    let mut init_rng = chain_rng(seed, 7);
    let mut chain = RadialSliceSampler::new(target, fac, seed)?;
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let r0 = oracle.sample(&mut init_rng);
        out.push(chain.step(r0)?.radius);
    }
    Ok(ks_one_sample(&out, |r| oracle.cdf(r)))
}

/// KS statistic of one T-step started from `π̃`, against `π̃` (in `ln t`).
pub fn ks_t_one_step(
    target: &RadialTarget,
    fac: &RadialFactorization,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let ell = RadialLevelSet::new(target, fac)?;
    let oracle = LevelStationarySampler::new(&ell)?;
    let mut init_rng = chain_rng(seed, 7);
    let mut chain = RadialSliceSampler::new(target, fac, seed)?;
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let lt = LogLevel::new(oracle.sample(&mut init_rng))?;
        out.push(chain.t_step(lt)?.get());
    }
    Ok(ks_one_sample(&out, |v| oracle.cdf(v)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelProbe {
    pub log_t: f64,
    pub quadrature: f64,
    pub monte_carlo: f64,
    pub tolerance: f64,
}

impl KernelProbe {
    pub fn passed(&self) -> bool {
        (self.quadrature - self.monte_carlo).abs() <= self.tolerance
    }
}

/// `P_T(t, (0, t))` by quadrature vs the frequency of `{T' < t}` over `steps`
/// simulated T-steps from `t`, at `probes` levels spread over `π̃` quantiles.
pub fn kernel_mc_probes(
    target: &RadialTarget,
    fac: &RadialFactorization,
    probes: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<KernelProbe>> {
    let ell = RadialLevelSet::new(target, fac)?;
    let pi_tilde = LevelStationarySampler::new(&ell)?;
    let mut rng = chain_rng(seed, 11);
    let mut out = Vec::with_capacity(probes);
    for i in 0..probes {
        let log_t = pi_tilde.quantile((i as f64 + 0.5) / probes as f64);
        let quadrature = transition_probability(&ell, log_t, log_t)?;
        let iv = ell.interval(log_t)?;
        let mut hits = 0usize;
        for _ in 0..steps {
            let r = radius_in_interval(&iv, ell.power(), rng.sample(rand::distr::Open01));
            let next = t_update(ell.log_h(r), rng.sample(rand::distr::Open01))?;
            if next.get() < log_t {
                hits += 1;
            }
        }
        let p = quadrature;
        out.push(KernelProbe {
            log_t,
            quadrature,
            monte_carlo: hits as f64 / steps as f64,
            tolerance: 3.0 * (p * (1.0 - p) / steps as f64).sqrt() + 1e-4,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityRow {
    pub d: usize,
    /// `max |ℓ_PSS - ℓ_1D|` over the probe levels.
    pub max_ell_diff: f64,
    pub gap_pss: f64,
    pub gap_1d: f64,
    pub gap_diff: f64,
}

/// PSS on the radially weighted exponential in `d` dimensions against USS on
/// the 1D Laplace density `e^{-c_d |s|}` with `c_d = 2 / σ_{d-1}`: both have
/// `ℓ(t) = σ_{d-1} ln(1/t)`.
pub fn duality_row(d: usize, probes: usize, grid_size: usize) -> Result<DualityRow> {
    let rwe = RadialTarget::builtin(BuiltinTarget::RadialWeightedExponential, d)?;
    let ell_a = RadialLevelSet::new(&rwe, &RadialFactorization::polar(d))?;
    let c = 2.0 / surface_area(d)?;
    let lap = RadialTarget::builtin(BuiltinTarget::Exponential { rate: c }, 1)?;
    let ell_b = RadialLevelSet::new(&lap, &RadialFactorization::uniform())?;
    let top = ell_a.log_support_sup();
    let max_ell_diff = (1..=probes)
        .map(|i| {
            let v = top - 30.0 * i as f64 / probes as f64;
            (ell_a.eval(v) - ell_b.eval(v)).abs()
        })
        .fold(0.0, f64::max);
    let rep = duality_gap_compare(
        &ell_a,
        &ell_b,
        grid_size,
        slicelab::operator::DEFAULT_MASS_TOL,
    )?;
    Ok(DualityRow {
        d,
        max_ell_diff,
        gap_pss: rep.gap_a,
        gap_1d: rep.gap_b,
        gap_diff: rep.gap_diff,
    })
}

/// `ℓ` with a multiplicative ripple that breaks monotonicity.
pub struct Corrupted<L>(pub L);

impl<L: LevelSetFunction> LevelSetFunction for Corrupted<L> {
    fn log_eval(&self, log_t: f64) -> f64 {
        self.0.log_eval(log_t) + 0.2 * (40.0 * log_t).sin()
    }

    fn log_support_sup(&self) -> f64 {
        self.0.log_support_sup()
    }

    fn limit(&self) -> f64 {
        self.0.limit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelInvariants {
    pub grid_size: usize,
    pub max_row_defect: f64,
    pub detailed_balance_excess: f64,
    pub stationarity_residual: f64,
    pub weight_defect: f64,
}

impl KernelInvariants {
    pub fn passed(&self) -> bool {
        self.max_row_defect <= 1e-8
            && self.detailed_balance_excess <= 0.0
            && self.stationarity_residual <= 1e-8
            && self.weight_defect <= DEFECT_TOL
    }
}

/// Discretizes `ell` and measures the kernel invariants.
pub fn kernel_invariants(
    ell: &dyn LevelSetFunction,
    size: usize,
    mass_tol: f64,
) -> Result<KernelInvariants> {
    let grid = TGrid::build(ell, size, mass_tol)?;
    let k = discretize_pt(ell, &grid)?;
    let max_row_defect = (0..k.len())
        .map(|i| (k.row(i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(KernelInvariants {
        grid_size: k.len(),
        max_row_defect,
        detailed_balance_excess: k.detailed_balance_violation(),
        stationarity_residual: k.stationarity_residual(),
        weight_defect: k.defect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_tail(1.36) - 0.0494).abs() < 1e-3);
        assert!(ks_underpowered(100, 0.02));
        assert!(!ks_underpowered(10_000, 0.02));
    }

    #[test]
    fn corrupted_ell_is_rejected() {
        let t = RadialTarget::builtin(BuiltinTarget::exponential(), 3).unwrap();
        let ell = RadialLevelSet::new(&t, &RadialFactorization::polar(3)).unwrap();
        let err = kernel_invariants(&Corrupted(ell), 128, 1e-8).unwrap_err();
        let e = err.downcast::<slicelab::SliceError>().unwrap();
        assert!(matches!(e, slicelab::SliceError::InvalidLevelSet(_)));
    }
}
