//! Level intervals of radial profiles, the generalized level-set function
//! `ℓ(t) = ∫_{ϱ1 > t} ϱ0`, membership in the classes `Λ_k`, and the canonical
//! `k`-dimensional comparator density built from `ℓ`.
//!
//! Levels are always handled through `ln t`: for `d = 100` the mode value of
//! `r^{d-1} e^{-r}` is about `e^{356}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SliceError};
use crate::numerics::{bisect_boundary, log1m_exp, MAX_BISECTIONS};
use crate::targets::{log_h_unchecked, log_surface_area, RadialFactorization, RadialTarget};

/// Natural log of a level `t`; `t` itself is never materialized.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogLevel(f64);

impl LogLevel {
    pub fn new(log_t: f64) -> Result<Self> {
        if log_t.is_finite() {
            Ok(LogLevel(log_t))
        } else {
            domain(format!("log level must be finite, got {log_t}"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Radii `[r_lo, r_hi]` where `h_α(r) > t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelInterval {
    pub r_lo: f64,
    pub r_hi: f64,
}

impl LevelInterval {
    pub fn width(&self) -> f64 {
        self.r_hi - self.r_lo
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r_lo && r <= self.r_hi
    }
}

/// A non-increasing function `t ↦ ℓ(t)` on `(0, ∞)`, queried through `ln t`.
pub trait LevelSetFunction: Send + Sync {
    /// `ln ℓ(t)` at `ln t = log_t`; `-∞` where `ℓ` vanishes.
    fn log_eval(&self, log_t: f64) -> f64;

    /// `ln sup{t : ℓ(t) > 0}`, possibly `+∞`.
    fn log_support_sup(&self) -> f64;

    /// `L = lim_{t→0} ℓ(t)`, possibly `+∞`.
    fn limit(&self) -> f64;

    fn eval(&self, log_t: f64) -> f64 {
        self.log_eval(log_t).exp()
    }
}

/// `ℓ` given in closed form through a function of `ln t` returning `ln ℓ`.
pub struct AnalyticLevelSet {
    log_ell: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    log_sup: f64,
    limit: f64,
}

impl AnalyticLevelSet {
    pub fn new(
        log_ell: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        log_support_sup: f64,
        limit: f64,
    ) -> Self {
        AnalyticLevelSet {
            log_ell,
            log_sup: log_support_sup,
            limit,
        }
    }

    /// `ℓ(t) = scale · ln(1/t)` on `(0, 1)`.
    pub fn log_inverse(scale: f64) -> Self {
        let ls = scale.ln();
        AnalyticLevelSet::new(
            Arc::new(move |lt: f64| {
                if lt >= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    ls + (-lt).ln()
                }
            }),
            0.0,
            f64::INFINITY,
        )
    }
}

impl LevelSetFunction for AnalyticLevelSet {
    fn log_eval(&self, log_t: f64) -> f64 {
        if log_t >= self.log_sup {
            f64::NEG_INFINITY
        } else {
            (self.log_ell)(log_t)
        }
    }

    fn log_support_sup(&self) -> f64 {
        self.log_sup
    }

    fn limit(&self) -> f64 {
        self.limit
    }
}

/// `ℓ` of a radial target under a radial power-weight factorization:
/// `ℓ(t) = σ_{d-1} / (d-α) · (r_hi^{d-α} - r_lo^{d-α})`.
#[derive(Debug, Clone)]
pub struct RadialLevelSet {
    target: RadialTarget,
    fac: RadialFactorization,
    mode: f64,
    log_sup: f64,
    log_sigma: f64,
    power: f64,
}

impl RadialLevelSet {
    pub fn new(target: &RadialTarget, fac: &RadialFactorization) -> Result<Self> {
        let d = target.dim();
        // re-validate in case the factorization was built for another dimension
        RadialFactorization::new(fac.alpha(), d)?;
        let mode = mode_radius(target, fac)?;
        let log_sup = if mode > 0.0 {
            log_h_unchecked(target, fac.alpha(), mode)
        } else {
            log_h_at_zero(target, fac.alpha())
        };
        Ok(RadialLevelSet {
            target: target.clone(),
            fac: *fac,
            mode,
            log_sup,
            log_sigma: log_surface_area(d)?,
            power: fac.radial_power(d),
        })
    }

    pub fn target(&self) -> &RadialTarget {
        &self.target
    }

    pub fn factorization(&self) -> &RadialFactorization {
        &self.fac
    }

    pub fn mode(&self) -> f64 {
        self.mode
    }

    /// Exponent `d - α` of the radial measure on a level interval.
    pub fn power(&self) -> f64 {
        self.power
    }

    #[inline]
    pub fn log_h(&self, r: f64) -> f64 {
        log_h_unchecked(&self.target, self.fac.alpha(), r)
    }

    pub fn interval(&self, log_t: f64) -> Result<LevelInterval> {
        if !(log_t < self.log_sup) || log_t.is_nan() {
            return Err(SliceError::EmptyLevel { log_t });
        }
        let above = |r: f64| r > 0.0 && r < self.target.kappa() && self.log_h(r) > log_t;

        // a radius inside the level set
        let inner = if self.mode > 0.0 {
            self.mode
        } else {
            let mut r = 1.0f64.min(0.5 * self.target.kappa());
            let mut found = above(r);
            let mut i = 0;
            while !found && i < 1100 {
                r *= 0.5;
                found = above(r);
                i += 1;
            }
            if !found {
                return Err(SliceError::NoRoot(format!(
                    "no radius with log h above {log_t} near the origin"
                )));
            }
            r
        };

        let r_lo = if self.mode == 0.0 {
            0.0
        } else {
            let mut hi = inner;
            let mut lo = 0.5 * inner;
            let mut i = 0;
            while above(lo) && i < MAX_BISECTIONS {
                hi = lo;
                lo *= 0.5;
                i += 1;
            }
            if above(lo) {
                // profile stays above the level all the way to the origin
                0.0
            } else {
                bisect_boundary(hi, lo, above)
            }
        };

        let kappa = self.target.kappa();
        let mut lo = inner;
        let mut hi = if kappa.is_finite() {
            0.5 * (inner + kappa)
        } else {
            2.0 * inner
        };
        let mut i = 0;
        while above(hi) {
            if i >= MAX_BISECTIONS {
                return Err(SliceError::NoRoot(format!(
                    "upper bracket expansion failed at log level {log_t}"
                )));
            }
            lo = hi;
            hi = if kappa.is_finite() {
                0.5 * (hi + kappa)
            } else {
                2.0 * hi
            };
            i += 1;
        }
        let r_hi = bisect_boundary(lo, hi, above);
        Ok(LevelInterval { r_lo, r_hi })
    }

    /// Radius where `log h` has dropped 80 units below `log_t`; a finite
    /// stand-in for `κ = ∞` at this level.
    pub fn effective_cutoff(&self, log_t: f64) -> f64 {
        let kappa = self.target.kappa();
        if kappa.is_finite() {
            return kappa;
        }
        let mut r = self.mode.max(1.0);
        for _ in 0..MAX_BISECTIONS {
            if self.log_h(r) <= log_t - 80.0 {
                break;
            }
            r *= 2.0;
        }
        r
    }

    fn log_ell_of(&self, iv: &LevelInterval) -> f64 {
        let p = self.power;
        let ratio = if iv.r_lo > 0.0 {
            p * (iv.r_lo.ln() - iv.r_hi.ln())
        } else {
            f64::NEG_INFINITY
        };
        self.log_sigma - p.ln() + p * iv.r_hi.ln() + log1m_exp(ratio)
    }
}

impl LevelSetFunction for RadialLevelSet {
    fn log_eval(&self, log_t: f64) -> f64 {
        match self.interval(log_t) {
            Ok(iv) => self.log_ell_of(&iv),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn log_support_sup(&self) -> f64 {
        self.log_sup
    }

    fn limit(&self) -> f64 {
        let k = self.target.kappa();
        if k.is_finite() {
            (self.log_sigma - self.power.ln() + self.power * k.ln()).exp()
        } else {
            f64::INFINITY
        }
    }
}

fn log_h_at_zero(target: &RadialTarget, alpha: f64) -> f64 {
    let c = alpha - target.log_weight();
    if c > 0.0 {
        f64::NEG_INFINITY
    } else if c < 0.0 {
        f64::INFINITY
    } else {
        -target.smooth_phi_at_zero()
    }
}

/// Maximizer of `h_α`, i.e. the root of `r φ'(r) = α`; `0` when `h_α` is
/// non-increasing on the whole support.
pub fn mode_radius(target: &RadialTarget, fac: &RadialFactorization) -> Result<f64> {
    let c = fac.alpha() - target.log_weight();
    if c < 0.0 {
        return Ok(0.0);
    }
    let kappa = target.kappa();
    // sign of d/dr log h, up to the positive factor 1/r
    let rising = |r: f64| c - r * target.smooth_dphi(r) > 0.0;
    let start = if kappa.is_finite() {
        (0.5 * kappa).min(1.0)
    } else {
        1.0
    };
    if rising(start) {
        let mut lo = start;
        let mut hi = if kappa.is_finite() {
            0.5 * (start + kappa)
        } else {
            2.0 * start
        };
        let mut i = 0;
        while rising(hi) {
            if i >= MAX_BISECTIONS {
                return Err(SliceError::NoRoot(format!(
                    "profile of {} keeps increasing; no mode found",
                    target.label()
                )));
            }
            lo = hi;
            hi = if kappa.is_finite() {
                0.5 * (hi + kappa)
            } else {
                2.0 * hi
            };
            i += 1;
        }
        Ok(bisect_boundary(lo, hi, rising))
    } else {
        let mut hi = start;
        let mut lo = 0.5 * start;
        for _ in 0..MAX_BISECTIONS {
            if rising(lo) {
                return Ok(bisect_boundary(lo, hi, rising));
            }
            hi = lo;
            lo *= 0.5;
        }
        Ok(0.0)
    }
}

pub fn level_interval(
    target: &RadialTarget,
    fac: &RadialFactorization,
    log_t: LogLevel,
) -> Result<LevelInterval> {
    RadialLevelSet::new(target, fac)?.interval(log_t.get())
}

/// Value of `ℓ` at level `t`; `0` for levels at or above the profile's supremum.
pub fn ell_eval(target: &RadialTarget, fac: &RadialFactorization, log_t: LogLevel) -> Result<f64> {
    Ok(RadialLevelSet::new(target, fac)?.eval(log_t.get()))
}

/// Points `s_1 < … < s_n` in `s = -ln t`, uniformly spaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub s_lo: f64,
    pub s_hi: f64,
    pub n: usize,
}

impl ProbeGrid {
    /// `n` points starting just inside the support and extending `span`
    /// log-units away from it.
    pub fn inside_support(ell: &dyn LevelSetFunction, n: usize, span: f64) -> Self {
        let s_sup = -ell.log_support_sup();
        if s_sup.is_finite() {
            let offset = 1e-6 * span;
            ProbeGrid {
                s_lo: s_sup + offset,
                s_hi: s_sup + span,
                n,
            }
        } else {
            ProbeGrid {
                s_lo: -0.5 * span,
                s_hi: 0.5 * span,
                n,
            }
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.s_hi - self.s_lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.s_lo + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaCheck {
    /// `ℓ → 0` at the top of the support and `ℓ → L` at `t → 0`.
    BoundaryLimit,
    /// Strict decrease on the open support.
    StrictDecrease,
    /// Concavity of `s ↦ ℓ(e^{-s})^{1/k}`.
    Concavity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Probe location in `s = -ln t`.
    pub location: f64,
    pub check: LambdaCheck,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub k: u32,
    pub passed: bool,
    pub violations: Vec<Violation>,
}

const STRICT_SLACK: f64 = 1e-10;
const CONCAVITY_SLACK: f64 = 1e-8;

/// Numerical membership test for `Λ_k`.
///
/// The shape condition is checked in its equivalent form: `s ↦ ℓ(e^{-s})^{1/k}`
/// is concave on `(-ln sup supp ℓ, ∞)`. Values are rescaled by the grid
/// maximum before taking the root, which does not affect concavity.
pub fn lambda_k_check(
    ell: &dyn LevelSetFunction,
    k: u32,
    probe: &ProbeGrid,
) -> Result<MembershipReport> {
    if k == 0 {
        return domain("k must be a positive integer");
    }
    if probe.n < 100 {
        return domain(format!(
            "probe grid needs at least 100 points, got {}",
            probe.n
        ));
    }
    let s_sup = -ell.log_support_sup();
    if !(probe.s_lo > s_sup) || !(probe.s_hi > probe.s_lo) || !probe.s_hi.is_finite() {
        return domain(format!(
            "probe grid [{}, {}] is not inside the support (s > {s_sup})",
            probe.s_lo, probe.s_hi
        ));
    }
    let s = probe.points();
    let lv: Vec<f64> = s.iter().map(|&si| ell.log_eval(-si)).collect();
    let mut violations = Vec::new();
    let lmax = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lmax.is_finite() {
        return domain("level-set function vanishes on the whole probe grid");
    }

    // (i) boundary behaviour
    let log_sup = ell.log_support_sup();
    let (near_top, top_loc) = if log_sup.is_finite() {
        let eps = 1e-9 * log_sup.abs().max(1.0);
        (ell.log_eval(log_sup - eps), -(log_sup - eps))
    } else {
        (ell.log_eval(700.0), -700.0)
    };
    let top_ratio = (near_top - lmax).exp();
    if !(top_ratio <= 1e-3) {
        violations.push(Violation {
            location: top_loc,
            check: LambdaCheck::BoundaryLimit,
            magnitude: top_ratio,
        });
    }
    let far_log_t = if log_sup.is_finite() {
        log_sup - 700.0
    } else {
        -700.0
    };
    let far = ell.log_eval(far_log_t);
    let limit = ell.limit();
    if limit.is_finite() {
        let rel = (far.exp() - limit).abs() / limit;
        if !(rel <= 1e-6) {
            violations.push(Violation {
                location: -far_log_t,
                check: LambdaCheck::BoundaryLimit,
                magnitude: rel,
            });
        }
    } else if !(far > lmax) {
        violations.push(Violation {
            location: -far_log_t,
            check: LambdaCheck::BoundaryLimit,
            magnitude: lmax - far,
        });
    }

    // (ii) strict decrease in t, i.e. strict increase along s
    for i in 0..s.len() - 1 {
        let step = lv[i + 1] - lv[i];
        if !(step > STRICT_SLACK) {
            violations.push(Violation {
                location: s[i + 1],
                check: LambdaCheck::StrictDecrease,
                magnitude: -step,
            });
        }
    }

    // (iii) concavity of the k-th root
    let f: Vec<f64> = lv.iter().map(|&l| ((l - lmax) / k as f64).exp()).collect();
    for i in 1..f.len() - 1 {
        let second = f[i - 1] - 2.0 * f[i] + f[i + 1];
        if !(second <= CONCAVITY_SLACK) {
            violations.push(Violation {
                location: s[i],
                check: LambdaCheck::Concavity,
                magnitude: second,
            });
        }
    }

    Ok(MembershipReport {
        k,
        passed: violations.is_empty(),
        violations,
    })
}

/// Radius of the canonical `k`-dimensional comparator at potential level `s`:
/// `φ^{-1}(s) = (k ℓ(e^{-s}) / σ_{k-1})^{1/k}`.
pub fn canonical_inverse_phi(ell: &dyn LevelSetFunction, k: u32, s: f64) -> Result<f64> {
    if k == 0 {
        return domain("k must be a positive integer");
    }
    let s_sup = -ell.log_support_sup();
    if s < s_sup || s.is_nan() {
        return domain(format!("s = {s} is below the domain bound {s_sup}"));
    }
    let lv = ell.log_eval(-s);
    if lv == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let kf = k as f64;
    Ok(((kf.ln() + lv - log_surface_area(k as usize)?) / kf).exp())
}

/// The canonical potential `φ(r) = -ln ℓ^{-1}(σ_{k-1} r^k / k)`, with `ℓ`
/// inverted numerically by bisection in `ln t`.
pub fn canonical_potential(ell: &dyn LevelSetFunction, k: u32, r: f64) -> Result<f64> {
    if k == 0 {
        return domain("k must be a positive integer");
    }
    if !(r > 0.0) {
        return domain(format!("radius must be positive, got {r}"));
    }
    let kf = k as f64;
    let target = log_surface_area(k as usize)? + kf * r.ln() - kf.ln();
    if ell.limit().is_finite() && target >= ell.limit().ln() {
        return domain(format!("radius {r} is beyond the comparator support"));
    }
    let reaches = |lt: f64| ell.log_eval(lt) >= target;

    let log_sup = ell.log_support_sup();
    let mut hi = if log_sup.is_finite() { log_sup } else { 1.0 };
    let mut step = 1.0;
    let mut i = 0;
    while reaches(hi) {
        if i >= MAX_BISECTIONS {
            return Err(SliceError::NoRoot(
                "level-set value never falls below target".into(),
            ));
        }
        hi += step;
        step *= 2.0;
        i += 1;
    }
    let mut lo = hi - 1.0;
    let mut step = 1.0;
    let mut i = 0;
    while !reaches(lo) {
        if i >= MAX_BISECTIONS {
            return Err(SliceError::NoRoot(
                "level-set value never reaches target".into(),
            ));
        }
        lo -= step;
        step *= 2.0;
        i += 1;
    }
    let log_t = bisect_boundary(lo, hi, reaches);
    Ok(-log_t)
}
