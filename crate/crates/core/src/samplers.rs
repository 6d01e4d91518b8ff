//! Slice sampling for radial targets, simulated in `(ln t, r)` coordinates.
//!
//! For a rotationally invariant target and a radial summary function the
//! radius process of the slice sampler is itself a Markov chain, so the
//! default simulation never touches direction vectors. [`run_x_chain_full`]
//! keeps the full state in `R^d` and exists to check that reduction.

use std::io::Write;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SliceError};
use crate::levelset::{LevelInterval, LevelSetFunction, LogLevel, RadialLevelSet};
use crate::numerics::{log1m_exp, log_add_exp};
use crate::targets::{RadialFactorization, RadialTarget};

/// Generator for chain `stream` of experiment `seed`.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Directions in full-vector mode come from their own stream so that the
// radius uniforms match the radius-marginal chain exactly.
const DIRECTION_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub radius: f64,
    /// Auxiliary level of the last step; `None` before the first step.
    pub log_level: Option<LogLevel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    /// Values are `‖X_i‖`.
    XChain,
    /// Values are `ln T_i`.
    TChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub kind: ChainKind,
    pub target: String,
    pub alpha: f64,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
}

/// Sample path of a summary function, including the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    values: Vec<f64>,
    meta: TraceMeta,
}

impl Trace {
    pub fn new(values: Vec<f64>, meta: TraceMeta) -> Self {
        Trace { values, meta }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn seed(&self) -> u64 {
        self.meta.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `step,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:e}")?;
        }
        Ok(())
    }

    /// JSON sidecar with the trace metadata.
    pub fn write_meta_json<W: Write>(&self, w: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(w, &self.meta).map_err(std::io::Error::other)
    }
}

impl AsRef<[f64]> for Trace {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

fn check_uniform(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        domain(format!("uniform variate must lie in (0, 1), got {u}"))
    }
}

/// Level draw `t ~ U(0, h(x))`, returned as `ln t = ln h(x) + ln u`.
pub fn t_update(log_h_x: f64, u: f64) -> Result<LogLevel> {
    check_uniform(u)?;
    LogLevel::new(log_h_x + u.ln())
}

/// Inverse-CDF draw from the density `∝ r^{p-1}` on `[r_lo, r_hi]`, where
/// `p = d - α`. For `p = 1` (polar slice sampling) this is uniform.
pub fn radius_in_interval(iv: &LevelInterval, power: f64, u: f64) -> f64 {
    let r = if power == 1.0 {
        iv.r_lo + u * (iv.r_hi - iv.r_lo)
    } else {
        let ratio = if iv.r_lo > 0.0 {
            power * (iv.r_lo / iv.r_hi).ln()
        } else {
            f64::NEG_INFINITY
        };
        // ln(u + (1-u) (r_lo/r_hi)^p)
        let inner = log_add_exp(u.ln(), (-u).ln_1p() + ratio);
        iv.r_hi * (inner / power).exp()
    };
    r.clamp(iv.r_lo, iv.r_hi).max(f64::MIN_POSITIVE)
}

/// X-update: draw a radius from `ϱ0` restricted to the super level set at `log_t`.
pub fn x_update_radius(
    target: &RadialTarget,
    fac: &RadialFactorization,
    log_t: LogLevel,
    u: f64,
) -> Result<f64> {
    check_uniform(u)?;
    let ls = RadialLevelSet::new(target, fac)?;
    let iv = ls.interval(log_t.get())?;
    Ok(radius_in_interval(&iv, ls.power(), u))
}

/// Uniform direction on `S^{d-1}` from a normalized Gaussian vector.
pub fn sample_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    assert!(d >= 1, "direction dimension must be positive");
    loop {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return z.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// One full slice-sampling transition in radius coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub log_level: LogLevel,
    pub interval: LevelInterval,
    pub radius: f64,
}

/// Radius-marginal slice sampler with its own random stream.
pub struct RadialSliceSampler {
    level_set: RadialLevelSet,
    rng: ChaCha8Rng,
}

impl RadialSliceSampler {
    pub fn new(target: &RadialTarget, fac: &RadialFactorization, seed: u64) -> Result<Self> {
        Ok(RadialSliceSampler {
            level_set: RadialLevelSet::new(target, fac)?,
            rng: chain_rng(seed, 0),
        })
    }

    pub fn level_set(&self) -> &RadialLevelSet {
        &self.level_set
    }

    fn uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    /// T-update followed by X-update from radius `r`.
    pub fn step(&mut self, r: f64) -> Result<Transition> {
        let u = self.uniform();
        let log_level = t_update(self.level_set.log_h(r), u)?;
        self.x_step(log_level)
    }

    /// X-update from level `log_t` followed by a T-update: one step of the
    /// auxiliary chain.
    pub fn t_step(&mut self, log_t: LogLevel) -> Result<LogLevel> {
        let r = self.x_step(log_t)?.radius;
        let u = self.uniform();
        t_update(self.level_set.log_h(r), u)
    }

    /// X-update from a given level.
    pub fn x_step(&mut self, log_level: LogLevel) -> Result<Transition> {
        let interval = self.level_set.interval(log_level.get())?;
        let u = self.uniform();
        let radius = radius_in_interval(&interval, self.level_set.power(), u);
        Ok(Transition {
            log_level,
            interval,
            radius,
        })
    }
}

fn validate_init_radius(target: &RadialTarget, ls: &RadialLevelSet, r: f64) -> Result<()> {
    if !(r > 0.0 && r < target.kappa()) || !ls.log_h(r).is_finite() {
        return domain(format!("initial radius {r} is not inside the support"));
    }
    Ok(())
}

/// Default starting radius: the mode of `h_α`, or 1 when the mode is the origin.
pub fn default_init_radius(target: &RadialTarget, fac: &RadialFactorization) -> Result<f64> {
    let ls = RadialLevelSet::new(target, fac)?;
    let m = ls.mode();
    Ok(if m > 0.0 {
        m
    } else {
        1.0f64.min(0.5 * target.kappa())
    })
}

/// Simulates `n` steps of the X-chain and records `‖X_i‖`.
pub fn run_x_chain(
    target: &RadialTarget,
    fac: &RadialFactorization,
    n: usize,
    init_radius: f64,
    seed: u64,
) -> Result<Trace> {
    let mut sampler = RadialSliceSampler::new(target, fac, seed)?;
    validate_init_radius(target, sampler.level_set(), init_radius)?;
    let mut values = Vec::with_capacity(n + 1);
    values.push(init_radius);
    let mut r = init_radius;
    for _ in 0..n {
        r = sampler.step(r)?.radius;
        values.push(r);
    }
    Ok(Trace::new(
        values,
        TraceMeta {
            kind: ChainKind::XChain,
            target: target.label(),
            alpha: fac.alpha(),
            d: target.dim(),
            n,
            seed,
        },
    ))
}

/// X-chain with the full state in `R^d`, started at `init_radius · e_1`.
/// Returns the radius trace and the final state vector.
pub fn run_x_chain_full(
    target: &RadialTarget,
    fac: &RadialFactorization,
    n: usize,
    init_radius: f64,
    seed: u64,
) -> Result<(Trace, Vec<f64>)> {
    let d = target.dim();
    let mut sampler = RadialSliceSampler::new(target, fac, seed)?;
    validate_init_radius(target, sampler.level_set(), init_radius)?;
    let mut dir_rng = chain_rng(seed, DIRECTION_STREAM);
    let mut x = vec![0.0; d];
    x[0] = init_radius;
    let mut values = Vec::with_capacity(n + 1);
    values.push(init_radius);
    for _ in 0..n {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tr = sampler.step(norm)?;
        let theta = sample_direction(d, &mut dir_rng);
        for (xi, ti) in x.iter_mut().zip(theta) {
            *xi = tr.radius * ti;
        }
        values.push(x.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok((
        Trace::new(
            values,
            TraceMeta {
                kind: ChainKind::XChain,
                target: target.label(),
                alpha: fac.alpha(),
                d,
                n,
                seed,
            },
        ),
        x,
    ))
}

/// Simulates `n` steps of the auxiliary chain and records `ln T_i`.
pub fn run_t_chain(
    target: &RadialTarget,
    fac: &RadialFactorization,
    n: usize,
    init_log_t: LogLevel,
    seed: u64,
) -> Result<Trace> {
    let mut sampler = RadialSliceSampler::new(target, fac, seed)?;
    if !(init_log_t.get() < sampler.level_set().log_support_sup()) {
        return domain(format!(
            "initial level {} is outside the support of the level-set function",
            init_log_t.get()
        ));
    }
    let mut values = Vec::with_capacity(n + 1);
    values.push(init_log_t.get());
    let mut lt = init_log_t;
    for _ in 0..n {
        lt = sampler.t_step(lt)?;
        values.push(lt.get());
    }
    Ok(Trace::new(
        values,
        TraceMeta {
            kind: ChainKind::TChain,
            target: target.label(),
            alpha: fac.alpha(),
            d: target.dim(),
            n,
            seed,
        },
    ))
}

/// Piecewise-linear CDF on a grid, sampled by inversion.
#[derive(Debug, Clone)]
struct GridCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridCdf {
    fn from_log_density(nodes: Vec<f64>, log_dens: &[f64]) -> Result<Self> {
        let peak = log_dens.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(SliceError::DegenerateSupport(
                "density vanishes on the whole grid".into(),
            ));
        }
        let dens: Vec<f64> = log_dens.iter().map(|l| (l - peak).exp()).collect();
        let mut cdf = Vec::with_capacity(nodes.len());
        cdf.push(0.0);
        for i in 1..nodes.len() {
            let cell = 0.5 * (dens[i - 1] + dens[i]) * (nodes[i] - nodes[i - 1]);
            cdf.push(cdf[i - 1] + cell);
        }
        let total = *cdf.last().unwrap();
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Ok(GridCdf { nodes, cdf })
    }

    fn quantile(&self, u: f64) -> f64 {
        let j = self
            .cdf
            .partition_point(|&c| c < u)
            .clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.nodes[j - 1] + frac * (self.nodes[j] - self.nodes[j - 1])
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.nodes[0] {
            return 0.0;
        }
        let last = self.nodes.len() - 1;
        if x >= self.nodes[last] {
            return 1.0;
        }
        let j = self.nodes.partition_point(|&v| v <= x).clamp(1, last);
        let frac = (x - self.nodes[j - 1]) / (self.nodes[j] - self.nodes[j - 1]);
        self.cdf[j - 1] + frac * (self.cdf[j] - self.cdf[j - 1])
    }
}

const ORACLE_CELLS: usize = 1 << 14;

/// I.i.d. sampler for the stationary radius law `∝ r^{d-1} e^{-φ(r)}` by
/// inversion of a trapezoidal CDF on `2^14` cells over `(0, κ_eff)`.
#[derive(Debug, Clone)]
pub struct StationaryRadialSampler {
    grid: GridCdf,
}

impl StationaryRadialSampler {
    pub fn new(target: &RadialTarget) -> Result<Self> {
        let polar = RadialLevelSet::new(target, &RadialFactorization::polar(target.dim()))?;
        let top = polar.log_support_sup();
        let upper = polar.effective_cutoff(top);
        let nodes: Vec<f64> = (0..=ORACLE_CELLS)
            .map(|i| upper * i as f64 / ORACLE_CELLS as f64)
            .collect();
        let log_dens: Vec<f64> = nodes
            .iter()
            .map(|&r| {
                if r == 0.0 {
                    if target.dim() == 1 || target.log_weight() == (target.dim() - 1) as f64 {
                        -target.smooth_phi_at_zero()
                    } else {
                        f64::NEG_INFINITY
                    }
                } else if r >= target.kappa() {
                    f64::NEG_INFINITY
                } else {
                    target.log_radial_density(r)
                }
            })
            .collect();
        Ok(StationaryRadialSampler {
            grid: GridCdf::from_log_density(nodes, &log_dens)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.grid.quantile(rng.sample(Open01))
    }

    pub fn cdf(&self, r: f64) -> f64 {
        self.grid.cdf(r)
    }
}

/// One i.i.d. draw from the stationary radius law; see [`StationaryRadialSampler`].
pub fn sample_radial_stationary<R: Rng + ?Sized>(
    target: &RadialTarget,
    rng: &mut R,
) -> Result<f64> {
    Ok(StationaryRadialSampler::new(target)?.sample(rng))
}

/// I.i.d. sampler for the stationary law of the auxiliary chain, density
/// `∝ ℓ(t)`, expressed in `v = ln t` (density `∝ ℓ(e^v) e^v`) and inverted on
/// a `2^14`-cell grid.
#[derive(Debug, Clone)]
pub struct LevelStationarySampler {
    grid: GridCdf,
}

impl LevelStationarySampler {
    pub fn new(ell: &dyn LevelSetFunction) -> Result<Self> {
        let f = |v: f64| ell.log_eval(v) + v;
        let top = ell.log_support_sup();
        let start = if top.is_finite() { top - 1.0 } else { 0.0 };
        let mut peak = f(start);
        if !peak.is_finite() {
            return Err(SliceError::DegenerateSupport(
                "level-set function vanishes below its support supremum".into(),
            ));
        }
        let drop = 45.0;
        let mut lo = start;
        for _ in 0..1_000_000 {
            lo -= 1.0;
            let v = f(lo);
            peak = peak.max(v);
            if v < peak - drop {
                break;
            }
        }
        let hi = if top.is_finite() {
            top
        } else {
            let mut hi = start;
            for _ in 0..1_000_000 {
                hi += 1.0;
                let v = f(hi);
                peak = peak.max(v);
                if v < peak - drop {
                    break;
                }
            }
            hi
        };
        let nodes: Vec<f64> = (0..=ORACLE_CELLS)
            .map(|i| lo + (hi - lo) * i as f64 / ORACLE_CELLS as f64)
            .collect();
        let log_dens: Vec<f64> = nodes.iter().map(|&v| f(v)).collect();
        Ok(LevelStationarySampler {
            grid: GridCdf::from_log_density(nodes, &log_dens)?,
        })
    }

    /// A draw of `ln t`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.grid.quantile(rng.sample(Open01))
    }

    /// Quantile of `ln t` at probability `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        self.grid.quantile(u)
    }

    /// CDF of `ln t`.
    pub fn cdf(&self, log_t: f64) -> f64 {
        self.grid.cdf(log_t)
    }
}

/// Exact one-step check helper: `ln(1 - (r_lo/r_hi)^p)` is used by callers
/// that need the normalizing mass of a level interval.
pub fn log_interval_mass(iv: &LevelInterval, power: f64) -> f64 {
    let ratio = if iv.r_lo > 0.0 {
        power * (iv.r_lo / iv.r_hi).ln()
    } else {
        f64::NEG_INFINITY
    };
    power * iv.r_hi.ln() - power.ln() + log1m_exp(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::BuiltinTarget;

    fn target(b: BuiltinTarget, d: usize) -> RadialTarget {
        RadialTarget::builtin(b, d).unwrap()
    }

    #[test]
    fn t_update_examples() {
        assert!((t_update(0.0, 0.5).unwrap().get() + std::f64::consts::LN_2).abs() < 1e-6);
        assert!((t_update(-2.0, (-1f64).exp()).unwrap().get() + 3.0).abs() < 1e-14);
        let near = t_update(1.0, 1.0 - 1e-15).unwrap().get();
        assert!(near < 1.0 && near > 1.0 - 1e-14);
        assert!(t_update(0.0, 0.0).is_err());
        assert!(t_update(0.0, 1.0).is_err());
    }

    #[test]
    fn radius_draw_examples() {
        let iv = LevelInterval {
            r_lo: 1.0,
            r_hi: 3.0,
        };
        assert_eq!(radius_in_interval(&iv, 1.0, 0.5), 2.0);
        let iv = LevelInterval {
            r_lo: 0.0,
            r_hi: 2.0,
        };
        assert!((radius_in_interval(&iv, 2.0, 0.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_domain_radius_matches_power_formula() {
        // direct formula r = (r_lo^p + u (r_hi^p - r_lo^p))^{1/p} at p = 3
        for &(lo, hi) in &[(0.5f64, 2.0f64), (0.0, 1.7), (1.9, 2.1)] {
            for k in 1..20 {
                let u = k as f64 / 20.0;
                let p = 3.0f64;
                let direct = (lo.powf(p) + u * (hi.powf(p) - lo.powf(p))).powf(1.0 / p);
                let iv = LevelInterval { r_lo: lo, r_hi: hi };
                let r = radius_in_interval(&iv, p, u);
                assert!((r - direct).abs() <= 1e-12 * direct);
            }
        }
        // d = 100 stays finite and inside the interval
        let iv = LevelInterval {
            r_lo: 50.0,
            r_hi: 150.0,
        };
        let r = radius_in_interval(&iv, 100.0, 0.3);
        assert!(r > 50.0 && r < 150.0);
        // F(r) = (r^p - lo^p)/(hi^p - lo^p) evaluated in log domain recovers u
        let p = 100.0;
        let fr = ((p * (r / 150.0f64).ln()).exp() - (p * (50.0f64 / 150.0).ln()).exp())
            / (1.0 - (p * (50.0f64 / 150.0).ln()).exp());
        assert!((fr - 0.3).abs() < 1e-12);
    }

    #[test]
    fn x_update_rejects_empty_level() {
        let t = target(BuiltinTarget::Gaussian, 3);
        let f = RadialFactorization::polar(3);
        let top = RadialLevelSet::new(&t, &f).unwrap().log_support_sup();
        let err = x_update_radius(&t, &f, LogLevel::new(top + 1.0).unwrap(), 0.5).unwrap_err();
        assert!(matches!(err, SliceError::EmptyLevel { .. }));
        assert!(x_update_radius(&t, &f, LogLevel::new(top - 1.0).unwrap(), 0.5).is_ok());
    }

    #[test]
    fn directions() {
        let mut rng = chain_rng(7, 0);
        let mut plus = 0;
        for _ in 0..2000 {
            let v = sample_direction(1, &mut rng);
            assert!(v[0] == 1.0 || v[0] == -1.0);
            if v[0] > 0.0 {
                plus += 1;
            }
        }
        // Binomial(2000, 1/2): sd ≈ 22
        assert!((plus as i64 - 1000).abs() < 100);
        for d in [2, 5, 50] {
            let v = sample_direction(d, &mut rng);
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn direction_mean_is_near_zero() {
        let n = 100_000;
        for d in [2usize, 3] {
            let mut rng = chain_rng(11, d as u64);
            let mut mean = vec![0.0; d];
            for _ in 0..n {
                for (m, v) in mean.iter_mut().zip(sample_direction(d, &mut rng)) {
                    *m += v / n as f64;
                }
            }
            let band = 4.0 / ((n * d) as f64).sqrt();
            assert!(mean.iter().all(|m| m.abs() < band), "{mean:?}");
        }
    }

    #[test]
    fn chains_are_deterministic_and_sized() {
        let t = target(BuiltinTarget::volcano(2.0), 4);
        let f = RadialFactorization::polar(4);
        let a = run_x_chain(&t, &f, 0, 1.5, 3).unwrap();
        assert_eq!(a.values(), &[1.5]);
        let a = run_x_chain(&t, &f, 500, 1.5, 3).unwrap();
        let b = run_x_chain(&t, &f, 500, 1.5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 501);
        let c = run_x_chain(&t, &f, 500, 1.5, 4).unwrap();
        assert_ne!(a.values(), c.values());

        let lt = LogLevel::new(-1.0).unwrap();
        let x = run_t_chain(&t, &f, 0, lt, 9).unwrap();
        assert_eq!(x.values(), &[-1.0]);
        let x = run_t_chain(&t, &f, 300, lt, 9).unwrap();
        assert_eq!(x, run_t_chain(&t, &f, 300, lt, 9).unwrap());
        assert_eq!(x.meta().kind, ChainKind::TChain);
    }

    #[test]
    fn invalid_initial_states() {
        let t = target(BuiltinTarget::exponential(), 3);
        let f = RadialFactorization::polar(3);
        assert!(run_x_chain(&t, &f, 5, 0.0, 1).is_err());
        assert!(run_x_chain(&t, &f, 5, -2.0, 1).is_err());
        let top = RadialLevelSet::new(&t, &f).unwrap().log_support_sup();
        assert!(run_t_chain(&t, &f, 5, LogLevel::new(top + 0.1).unwrap(), 1).is_err());
    }

    #[test]
    fn every_transition_stays_in_its_slice() {
        for (b, d, pss) in [
            (BuiltinTarget::exponential(), 5, true),
            (BuiltinTarget::volcano(2.0), 3, true),
            (BuiltinTarget::Gaussian, 10, false),
            (BuiltinTarget::RadialWeightedExponential, 4, false),
        ] {
            let t = target(b, d);
            let f = if pss {
                RadialFactorization::polar(d)
            } else {
                RadialFactorization::uniform()
            };
            let mut s = RadialSliceSampler::new(&t, &f, 21).unwrap();
            let mut r = default_init_radius(&t, &f).unwrap();
            for _ in 0..2000 {
                let tr = s.step(r).unwrap();
                assert!(tr.interval.contains(tr.radius));
                assert!(s.level_set().log_h(tr.radius) > tr.log_level.get());
                r = tr.radius;
            }
        }
    }

    #[test]
    fn full_vector_radii_match_radius_marginal() {
        for pss in [true, false] {
            let t = target(BuiltinTarget::exponential(), 3);
            let f = if pss {
                RadialFactorization::polar(3)
            } else {
                RadialFactorization::uniform()
            };
            let a = run_x_chain(&t, &f, 400, 2.0, 5).unwrap();
            let (b, x) = run_x_chain_full(&t, &f, 400, 2.0, 5).unwrap();
            assert_eq!(x.len(), 3);
            for (ra, rb) in a.values().iter().zip(b.values()) {
                assert!((ra - rb).abs() <= 1e-9 * ra, "{ra} vs {rb}");
            }
        }
    }

    #[test]
    fn stationary_radius_oracle_means() {
        let n = 100_000;
        let mut rng = chain_rng(99, 0);
        let s1 = StationaryRadialSampler::new(&target(BuiltinTarget::exponential(), 1)).unwrap();
        let m1 = (0..n).map(|_| s1.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m1 - 1.0).abs() < 0.02, "{m1}");
        let s3 = StationaryRadialSampler::new(&target(BuiltinTarget::exponential(), 3)).unwrap();
        let m3 = (0..n).map(|_| s3.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m3 - 3.0).abs() < 0.04, "{m3}");
        // the weighted exponential has an Exp(1) radius in every dimension
        let sw = StationaryRadialSampler::new(&target(BuiltinTarget::RadialWeightedExponential, 6))
            .unwrap();
        assert!((sw.cdf(1.0) - (1.0 - (-1f64).exp())).abs() < 1e-6);
        let mut prev = 0.0;
        for i in 0..200 {
            let c = s3.cdf(0.1 * i as f64);
            assert!(c >= prev);
            prev = c;
        }
        let one = sample_radial_stationary(&target(BuiltinTarget::Gaussian, 2), &mut rng).unwrap();
        assert!(one > 0.0);
    }

    #[test]
    fn level_oracle_matches_closed_form() {
        // ℓ(t) = σ_2 ln(1/t) on (0,1): in v = ln t the CDF is e^v (1 - v)
        let rwe = target(BuiltinTarget::RadialWeightedExponential, 3);
        let ls = RadialLevelSet::new(&rwe, &RadialFactorization::polar(3)).unwrap();
        let s = LevelStationarySampler::new(&ls).unwrap();
        for v in [-8.0, -3.0, -1.0, -0.2] {
            let exact = f64::exp(v) * (1.0 - v);
            assert!((s.cdf(v) - exact).abs() < 1e-5, "v={v}");
        }
    }

    #[test]
    fn trace_serialization() {
        let t = target(BuiltinTarget::exponential(), 2);
        let tr = run_x_chain(&t, &RadialFactorization::polar(2), 3, 1.0, 0).unwrap();
        let mut csv = Vec::new();
        tr.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("step,value\n0,1e0\n"));
        assert_eq!(text.lines().count(), 5);
        let mut js = Vec::new();
        tr.write_meta_json(&mut js).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
        assert_eq!(v["d"], 2);
        assert_eq!(v["kind"], "x_chain");
    }
}
