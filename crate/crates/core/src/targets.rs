//! Rotationally invariant targets `x ↦ exp(-φ(‖x‖))` on the ball `‖x‖ < κ`,
//! together with the radial power-weight factorizations used by the samplers.
//!
//! A factorization with exponent `α` splits the density into
//! `ϱ0(x) = ‖x‖^{-α}` and `ϱ1(x) = ‖x‖^{α} exp(-φ(‖x‖))`. `α = 0` is uniform
//! slice sampling, `α = d - 1` is polar slice sampling. Everything downstream
//! works with the radial profile `h_α(r) = r^α exp(-φ(r))` in log form, since
//! `r^{d-1}` alone overflows long before `d = 1000`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result, SliceError};

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The fixed family of targets known to the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum BuiltinTarget {
    /// `φ(r) = rate · r`.
    Exponential {
        #[serde(default = "unit_rate")]
        rate: f64,
    },
    /// `φ(r) = (r - center)²`, a ring of mass around `‖x‖ = center`.
    Volcano { center: f64 },
    /// `φ(r) = r² / 2`.
    Gaussian,
    /// `φ(r) = r + (d - 1) ln r`, i.e. `ϱ(x) = ‖x‖^{1-d} e^{-‖x‖}`.
    ///
    /// Not convex, so it sits outside the class covered by the gap theorem; it
    /// exists to reproduce the level-set equivalence with a 1D Laplace density.
    RadialWeightedExponential,
}

fn unit_rate() -> f64 {
    1.0
}

impl BuiltinTarget {
    pub fn exponential() -> Self {
        BuiltinTarget::Exponential { rate: 1.0 }
    }

    pub fn volcano(center: f64) -> Self {
        BuiltinTarget::Volcano { center }
    }

    pub fn label(&self) -> String {
        match *self {
            BuiltinTarget::Exponential { rate: 1.0 } => "exponential".into(),
            BuiltinTarget::Exponential { rate } => format!("exponential({rate})"),
            BuiltinTarget::Volcano { center } => format!("volcano({center})"),
            BuiltinTarget::Gaussian => "gaussian".into(),
            BuiltinTarget::RadialWeightedExponential => "radial_weighted_exponential".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BuiltinTarget::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                domain(format!("exponential rate must be positive, got {rate}"))
            }
            BuiltinTarget::Volcano { center } if !(center > 0.0 && center.is_finite()) => {
                domain(format!("volcano center must be positive, got {center}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone)]
enum Potential {
    Builtin(BuiltinTarget),
    Custom {
        label: String,
        phi: RadialFn,
        dphi: Option<RadialFn>,
    },
}

/// A density `exp(-φ(‖x‖))` on `{‖x‖ < κ}` in dimension `d`.
///
/// Internally `φ` is kept as `φ_s(r) + w ln r`, where the logarithmic part is
/// nonzero only for [`BuiltinTarget::RadialWeightedExponential`]. Keeping the
/// `ln r` coefficient separate lets `h_α` cancel it exactly when `α = w`.
#[derive(Clone)]
pub struct RadialTarget {
    potential: Potential,
    kappa: f64,
    dim: usize,
}

impl fmt::Debug for RadialTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialTarget")
            .field("label", &self.label())
            .field("kappa", &self.kappa)
            .field("dim", &self.dim)
            .finish()
    }
}

impl RadialTarget {
    pub fn builtin(target: BuiltinTarget, dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be at least 1");
        }
        target.validate()?;
        Ok(RadialTarget {
            potential: Potential::Builtin(target),
            kappa: f64::INFINITY,
            dim,
        })
    }

    /// A user supplied potential. Without `dphi`, the derivative is taken by
    /// central differences with step `max(1e-6, 1e-6 r)`.
    pub fn custom(
        label: impl Into<String>,
        phi: RadialFn,
        dphi: Option<RadialFn>,
        kappa: f64,
        dim: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be at least 1");
        }
        if !(kappa > 0.0) {
            return domain(format!("support cutoff must be positive, got {kappa}"));
        }
        Ok(RadialTarget {
            potential: Potential::Custom {
                label: label.into(),
                phi,
                dphi,
            },
            kappa,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn builtin_kind(&self) -> Option<BuiltinTarget> {
        match self.potential {
            Potential::Builtin(b) => Some(b),
            Potential::Custom { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.potential {
            Potential::Builtin(b) => b.label(),
            Potential::Custom { label, .. } => label.clone(),
        }
    }

    /// Coefficient `w` of the `ln r` term in `φ`.
    pub fn log_weight(&self) -> f64 {
        match self.potential {
            Potential::Builtin(BuiltinTarget::RadialWeightedExponential) => (self.dim - 1) as f64,
            _ => 0.0,
        }
    }

    /// The smooth part `φ_s = φ - w ln r`.
    pub fn smooth_phi(&self, r: f64) -> f64 {
        match &self.potential {
            Potential::Builtin(b) => match *b {
                BuiltinTarget::Exponential { rate } => rate * r,
                BuiltinTarget::Volcano { center } => (r - center) * (r - center),
                BuiltinTarget::Gaussian => 0.5 * r * r,
                BuiltinTarget::RadialWeightedExponential => r,
            },
            Potential::Custom { phi, .. } => phi(r),
        }
    }

    pub fn smooth_dphi(&self, r: f64) -> f64 {
        match &self.potential {
            Potential::Builtin(b) => match *b {
                BuiltinTarget::Exponential { rate } => rate,
                BuiltinTarget::Volcano { center } => 2.0 * (r - center),
                BuiltinTarget::Gaussian => r,
                BuiltinTarget::RadialWeightedExponential => 1.0,
            },
            Potential::Custom { dphi: Some(d), .. } => d(r),
            Potential::Custom { phi, .. } => central_difference(phi.as_ref(), r, self.kappa),
        }
    }

    /// Full radial potential `φ(r)`.
    pub fn phi(&self, r: f64) -> f64 {
        let w = self.log_weight();
        if w == 0.0 {
            self.smooth_phi(r)
        } else {
            self.smooth_phi(r) + w * r.ln()
        }
    }

    /// Full derivative `φ'(r)`.
    pub fn dphi(&self, r: f64) -> f64 {
        let w = self.log_weight();
        if w == 0.0 {
            self.smooth_dphi(r)
        } else {
            self.smooth_dphi(r) + w / r
        }
    }

    /// `lim_{r→0+} φ_s(r)`, used when the profile has no power term at 0.
    pub(crate) fn smooth_phi_at_zero(&self) -> f64 {
        let v = self.smooth_phi(0.0);
        if v.is_finite() {
            v
        } else {
            self.smooth_phi(1e-300)
        }
    }

    /// Unnormalized log density of the radius, `(d-1) ln r - φ(r)`.
    pub fn log_radial_density(&self, r: f64) -> f64 {
        let c = (self.dim - 1) as f64 - self.log_weight();
        let base = -self.smooth_phi(r);
        if c == 0.0 {
            base
        } else {
            c * r.ln() + base
        }
    }

    /// Numerical sanity checks on the potential: `dphi` agrees with a central
    /// difference of `phi` to 1e-6 relative on a probe grid, and for finite
    /// `κ` the potential blows up towards the boundary.
    pub fn check_consistency(&self) -> Result<()> {
        let upper = if self.kappa.is_finite() {
            0.95 * self.kappa
        } else {
            20.0
        };
        for i in 1..=64 {
            let r = upper * i as f64 / 64.0;
            let analytic = self.dphi(r);
            let fd = central_difference(&|x| self.phi(x), r, self.kappa);
            let err = (analytic - fd).abs() / analytic.abs().max(1.0);
            if !(err <= 1e-6) {
                return Err(SliceError::Domain(format!(
                    "derivative mismatch at r = {r}: analytic {analytic}, finite difference {fd}"
                )));
            }
            if !self.phi(r).is_finite() {
                return domain(format!("potential is not finite at r = {r}"));
            }
        }
        if self.kappa.is_finite() {
            let mid = self.phi(0.5 * self.kappa);
            let mut prev = f64::NEG_INFINITY;
            for e in 2..=12 {
                let v = self.phi(self.kappa * (1.0 - 10f64.powi(-e)));
                if !(v > prev) {
                    return domain("potential does not increase towards the support cutoff");
                }
                prev = v;
            }
            if !(prev > mid + 10.0) {
                return domain("potential does not diverge at the support cutoff");
            }
        }
        Ok(())
    }

    /// Checks numerically that `φ` is convex and tends to infinity, the shape
    /// assumptions under which polar slice sampling has gap at least 1/2.
    pub fn satisfies_gap_theorem_assumptions(&self) -> bool {
        let upper = if self.kappa.is_finite() {
            0.99 * self.kappa
        } else {
            50.0
        };
        let n = 400;
        let h = upper / n as f64;
        let vals: Vec<f64> = (1..=n).map(|i| self.phi(h * i as f64)).collect();
        let convex = vals
            .windows(3)
            .all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-9 * (1.0 + w[1].abs()));
        let diverges = if self.kappa.is_finite() {
            self.phi(self.kappa * (1.0 - 1e-12)) > vals[n / 2] + 10.0
        } else {
            vals[n - 1] > vals[n / 2] + 10.0
        };
        convex && diverges
    }
}

fn central_difference(f: &dyn Fn(f64) -> f64, r: f64, kappa: f64) -> f64 {
    let h = (1e-6 * r).max(1e-6);
    if r - h > 0.0 && r + h < kappa {
        (f(r + h) - f(r - h)) / (2.0 * h)
    } else if r + h < kappa {
        (f(r + h) - f(r)) / h
    } else {
        (f(r) - f(r - h)) / h
    }
}

/// Exponent `α` of the radial weight `ϱ0(x) = ‖x‖^{-α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialFactorization {
    alpha: f64,
}

impl RadialFactorization {
    /// Validates `0 <= α <= d - 1`. In `d = 1` only `α = 0` is possible, so
    /// polar and uniform slice sampling coincide.
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be at least 1");
        }
        let max = (dim - 1) as f64;
        if !(alpha >= 0.0 && alpha <= max) {
            return domain(format!("alpha must lie in [0, {max}], got {alpha}"));
        }
        Ok(RadialFactorization { alpha })
    }

    pub fn uniform() -> Self {
        RadialFactorization { alpha: 0.0 }
    }

    pub fn polar(dim: usize) -> Self {
        RadialFactorization {
            alpha: dim.saturating_sub(1) as f64,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Exponent `d - α` of the radial measure `r^{d-1-α} dr` on a level interval.
    pub fn radial_power(&self, dim: usize) -> f64 {
        dim as f64 - self.alpha
    }
}

/// How the harness picks `α` for a given dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    Uss,
    Pss,
    Custom(f64),
}

impl AlphaMode {
    pub fn resolve(&self, dim: usize) -> Result<RadialFactorization> {
        match *self {
            AlphaMode::Uss => Ok(RadialFactorization::uniform()),
            AlphaMode::Pss => Ok(RadialFactorization::polar(dim)),
            AlphaMode::Custom(a) => RadialFactorization::new(a, dim),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            AlphaMode::Uss => "USS".into(),
            AlphaMode::Pss => "PSS".into(),
            AlphaMode::Custom(a) => format!("alpha={a}"),
        }
    }
}

/// `ln h_α(r) = α ln r - φ(r)`.
pub fn log_h(target: &RadialTarget, fac: &RadialFactorization, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < target.kappa) {
        return domain(format!(
            "radius {r} outside (0, {}) for {}",
            target.kappa,
            target.label()
        ));
    }
    Ok(log_h_unchecked(target, fac.alpha, r))
}

#[inline]
pub(crate) fn log_h_unchecked(target: &RadialTarget, alpha: f64, r: f64) -> f64 {
    let c = alpha - target.log_weight();
    let base = -target.smooth_phi(r);
    if c == 0.0 {
        base
    } else {
        c * r.ln() + base
    }
}

/// Surface area of the unit sphere `S^{d-1}`, `2 π^{d/2} / Γ(d/2)`.
pub fn surface_area(d: usize) -> Result<f64> {
    match d {
        0 => domain("sphere dimension must be at least 1"),
        1 => Ok(2.0),
        2 => Ok(2.0 * PI),
        3 => Ok(4.0 * PI),
        _ => Ok(log_surface_area(d)?.exp()),
    }
}

pub fn log_surface_area(d: usize) -> Result<f64> {
    if d == 0 {
        return domain("sphere dimension must be at least 1");
    }
    let half = d as f64 / 2.0;
    Ok(std::f64::consts::LN_2 + half * PI.ln() - ln_gamma(half))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_builtins() -> Vec<BuiltinTarget> {
        vec![
            BuiltinTarget::exponential(),
            BuiltinTarget::volcano(2.0),
            BuiltinTarget::Gaussian,
            BuiltinTarget::RadialWeightedExponential,
        ]
    }

    #[test]
    fn log_h_examples() {
        let t = RadialTarget::builtin(BuiltinTarget::exponential(), 3).unwrap();
        let v = log_h(&t, &RadialFactorization::polar(3), 2.0).unwrap();
        assert!((v - (2.0 * 2f64.ln() - 2.0)).abs() < 1e-15);
        assert!((v + 0.613706).abs() < 1e-6);

        let t = RadialTarget::builtin(BuiltinTarget::volcano(2.0), 2).unwrap();
        let v = log_h(&t, &RadialFactorization::polar(2), 2.0).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);

        for b in all_builtins() {
            let t = RadialTarget::builtin(b, 4).unwrap();
            for r in [0.1, 1.0, 3.5] {
                let v = log_h(&t, &RadialFactorization::uniform(), r).unwrap();
                assert!((v + t.phi(r)).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn log_h_domain_errors() {
        let t = RadialTarget::builtin(BuiltinTarget::Gaussian, 3).unwrap();
        let f = RadialFactorization::polar(3);
        assert!(matches!(log_h(&t, &f, 0.0), Err(SliceError::Domain(_))));
        assert!(log_h(&t, &f, -1.0).is_err());
        let c =
            RadialTarget::custom("ball", Arc::new(|r: f64| -(1.0 - r).ln()), None, 1.0, 2).unwrap();
        assert!(log_h(&c, &RadialFactorization::uniform(), 1.0).is_err());
        assert!(log_h(&c, &RadialFactorization::uniform(), 0.5).is_ok());
    }

    #[test]
    fn exp_log_h_is_density_and_pss_shift() {
        for b in all_builtins() {
            for d in [1usize, 2, 7] {
                let t = RadialTarget::builtin(b, d).unwrap();
                for i in 1..40 {
                    let r = 0.13 * i as f64;
                    let uss = log_h(&t, &RadialFactorization::uniform(), r).unwrap();
                    let dens = (-t.phi(r)).exp();
                    assert!((uss.exp() - dens).abs() <= 1e-12 * dens);
                    let pss = log_h(&t, &RadialFactorization::polar(d), r).unwrap();
                    let shift = (d - 1) as f64 * r.ln();
                    assert!((pss - uss - shift).abs() <= 1e-12 * (1.0 + shift.abs()));
                }
            }
        }
    }

    #[test]
    fn surface_area_values_and_recurrence() {
        assert_eq!(surface_area(1).unwrap(), 2.0);
        assert!((surface_area(2).unwrap() - std::f64::consts::TAU).abs() < 1e-6);
        assert!((surface_area(3).unwrap() - 12.566371).abs() < 1e-6);
        assert!(surface_area(0).is_err());
        for d in 3..60 {
            let lhs = surface_area(d).unwrap();
            let rhs = 2.0 * PI * surface_area(d - 2).unwrap() / (d - 2) as f64;
            assert!((lhs - rhs).abs() <= 1e-10 * lhs, "d = {d}");
        }
        // log form stays finite where the plain value underflows
        assert!(log_surface_area(5000).unwrap().is_finite());
    }

    #[test]
    fn builtin_consistency_and_convexity() {
        for b in all_builtins() {
            let t = RadialTarget::builtin(b, 5).unwrap();
            t.check_consistency().unwrap();
            let convex = t.satisfies_gap_theorem_assumptions();
            assert_eq!(
                convex,
                b != BuiltinTarget::RadialWeightedExponential,
                "{b:?}"
            );
        }
    }

    #[test]
    fn custom_target_finite_difference_derivative() {
        let t = RadialTarget::custom(
            "quartic",
            Arc::new(|r: f64| r.powi(4)),
            None,
            f64::INFINITY,
            3,
        )
        .unwrap();
        assert!((t.dphi(1.5) - 4.0 * 1.5f64.powi(3)).abs() < 1e-5);
        t.check_consistency().unwrap();

        let ball = RadialTarget::custom(
            "log-barrier",
            Arc::new(|r: f64| -(1.0 - r * r).ln()),
            Some(Arc::new(|r: f64| 2.0 * r / (1.0 - r * r))),
            1.0,
            3,
        )
        .unwrap();
        ball.check_consistency().unwrap();

        let bad = RadialTarget::custom(
            "wrong-derivative",
            Arc::new(|r: f64| r * r),
            Some(Arc::new(|r: f64| r)),
            f64::INFINITY,
            2,
        )
        .unwrap();
        assert!(bad.check_consistency().is_err());
    }

    #[test]
    fn factorization_bounds() {
        assert!(RadialFactorization::new(2.0, 3).is_ok());
        assert!(RadialFactorization::new(2.5, 3).is_err());
        assert!(RadialFactorization::new(-0.1, 3).is_err());
        assert_eq!(RadialFactorization::polar(1).alpha(), 0.0);
        assert!(RadialFactorization::new(0.5, 1).is_err());
        assert_eq!(AlphaMode::Pss.resolve(10).unwrap().alpha(), 9.0);
    }

    #[test]
    fn builtin_parameter_validation() {
        assert!(RadialTarget::builtin(BuiltinTarget::volcano(-1.0), 2).is_err());
        assert!(RadialTarget::builtin(BuiltinTarget::Exponential { rate: 0.0 }, 2).is_err());
        assert!(RadialTarget::builtin(BuiltinTarget::Gaussian, 0).is_err());
    }
}
