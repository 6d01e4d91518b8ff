//! Discretization of the auxiliary kernel
//! `P_T(t, B) = ℓ(t)^{-1} ∫_t^∞ λ(B ∩ (0, s)) / s  d(-ℓ)(s)` from `ℓ` alone,
//! spectral-gap certification and the duality/adjointness checks.
//!
//! The kernel is assembled cell-to-cell: with `ν = d(-ℓ)` and
//! `g_i(s) = λ(C_i ∩ (0, s)) / s`, the stationary joint law of two
//! consecutive levels puts mass `J_ij = ∫ g_i g_j s dν` on `C_i × C_j`.
//! `J` is symmetric and positive semidefinite for any discrete `ν`, so the
//! resulting stochastic matrix `M_ij = J_ij / Σ_k J_ik` is exactly reversible
//! with respect to its row masses, which approximate `∫_{C_i} ℓ`.
//!
//! All computations run in `v = ln t`. Cell 0 extends down to `t = 0` and
//! carries the lower tail below `t_min`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SliceError};
use crate::levelset::{LevelSetFunction, RadialLevelSet};
use crate::numerics::{bisect_boundary, simpson, simpson_graded_top};
use crate::targets::{RadialFactorization, RadialTarget};

pub const DEFAULT_GRID_SIZE: usize = 2048;
pub const DEFAULT_MASS_TOL: f64 = 1e-8;
/// Minimum refinement subintervals per cell for the Stieltjes differences;
/// wide cells get more so that no subinterval exceeds `REFINEMENT_MAX_STEP`.
pub const REFINEMENT: usize = 16;
pub const REFINEMENT_MAX_STEP: f64 = 0.0025;
/// Simpson subintervals per cell for the stationary weights; wide cells get
/// more so that no subinterval exceeds `WEIGHT_MAX_STEP` in `ln t`.
pub const WEIGHT_SUBPOINTS: usize = 8;
pub const WEIGHT_MAX_STEP: f64 = 0.01;
/// Largest tolerated gap between the kernel's own stationary weights and the
/// independent Simpson weights.
pub const DEFECT_TOL: f64 = 1e-6;
/// Refinement delta above which a certificate is flagged unconverged.
pub const REFINEMENT_TOL: f64 = 0.005;

// Square-root graded refinement of the cell touching the support supremum.
const TOP_REFINEMENT: usize = 1024;
// Log-units covered by the tail refinement below t_min (and above t_max for
// unbounded supports).
const TAIL_SPAN: f64 = 40.0;
const TAIL_STEP: f64 = 0.05;
// Profile scan: stop once ln(ℓ(e^v) e^v) is this far below its peak.
const PROFILE_DROP: f64 = 60.0;
const PROFILE_PANELS: usize = 8192;
const MAX_SCAN: usize = 100_000;

/// Log-spaced partition of the level axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    boundaries: Vec<f64>,
    nodes: Vec<f64>,
    truncation_mass: f64,
    top_is_sup: bool,
}

impl TGrid {
    /// `n` cells, uniform in `ln t`, between `t_min` (lower-tail stationary
    /// mass `≤ mass_tol`) and the support supremum of `ℓ`. For unbounded
    /// supports the upper end is truncated the same way.
    pub fn build(ell: &dyn LevelSetFunction, n: usize, mass_tol: f64) -> Result<Self> {
        if n < 2 {
            return Err(SliceError::Domain(format!(
                "grid needs at least 2 cells, got {n}"
            )));
        }
        if !(mass_tol > 0.0 && mass_tol < 0.5) {
            return Err(SliceError::Domain(format!(
                "mass tolerance {mass_tol} out of range"
            )));
        }
        let prof = MassProfile::new(ell)?;
        let total = prof.mass(prof.v_hi);
        let v_min = bisect_boundary(prof.v_lo, prof.v_hi, |v| prof.mass(v) <= mass_tol * total);
        let lower = prof.mass(v_min) / total;
        let (v_max, upper, top_is_sup) = if prof.top_is_sup {
            (prof.v_hi, 0.0, true)
        } else {
            let v = bisect_boundary(prof.v_hi, v_min, |v| {
                total - prof.mass(v) <= mass_tol * total
            });
            (v, (total - prof.mass(v)) / total, false)
        };
        let boundaries: Vec<f64> = (0..=n)
            .map(|i| v_min + (v_max - v_min) * i as f64 / n as f64)
            .collect();
        let mut g = TGrid::from_boundaries(boundaries, top_is_sup)?;
        g.truncation_mass = lower + upper;
        Ok(g)
    }

    /// Grid with explicit `ln t` boundaries. `top_is_sup` tells the quadrature
    /// that `ℓ` vanishes at the last boundary.
    pub fn from_boundaries(boundaries: Vec<f64>, top_is_sup: bool) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(SliceError::Domain("grid needs at least one cell".into()));
        }
        if boundaries.iter().any(|b| !b.is_finite()) || boundaries.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(SliceError::Domain(
                "grid boundaries must be finite and strictly increasing".into(),
            ));
        }
        let nodes = boundaries.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(TGrid {
            boundaries,
            nodes,
            truncation_mass: 0.0,
            top_is_sup,
        })
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Log-midpoints of the cells.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    pub fn log_t_min(&self) -> f64 {
        self.boundaries[0]
    }

    pub fn log_t_max(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    pub fn top_is_sup(&self) -> bool {
        self.top_is_sup
    }
}

/// Unnormalized cumulative `π̃` mass in `v = ln t` over a scanned range.
struct MassProfile<'a> {
    ell: &'a dyn LevelSetFunction,
    v_lo: f64,
    v_hi: f64,
    top_is_sup: bool,
    peak: f64,
    panel: f64,
    cumulative: Vec<f64>,
}

impl<'a> MassProfile<'a> {
    fn new(ell: &'a dyn LevelSetFunction) -> Result<Self> {
        let f = |v: f64| ell.log_eval(v) + v;
        let top = ell.log_support_sup();
        let top_is_sup = top.is_finite();
        let start = if top_is_sup { top - 1.0 } else { 0.0 };
        let mut peak = f(start);
        if !peak.is_finite() {
            return Err(SliceError::DegenerateSupport(
                "level-set function vanishes below its support supremum".into(),
            ));
        }
        let scan = |dir: f64, peak: &mut f64| -> Result<f64> {
            let mut v = start;
            for _ in 0..MAX_SCAN {
                v += dir;
                let fv = f(v);
                if fv.is_nan() {
                    return Err(SliceError::InvalidLevelSet(format!(
                        "ℓ is NaN at ln t = {v}"
                    )));
                }
                *peak = peak.max(fv);
                if fv < *peak - PROFILE_DROP {
                    return Ok(v);
                }
            }
            Err(SliceError::DegenerateSupport(
                "π̃ mass does not decay".into(),
            ))
        };
        let v_lo = scan(-1.0, &mut peak)?;
        let v_hi = if top_is_sup {
            top
        } else {
            scan(1.0, &mut peak)?
        };
        let panel = (v_hi - v_lo) / PROFILE_PANELS as f64;
        let dens = |v: f64| (f(v) - peak).exp();
        let mut cumulative = Vec::with_capacity(PROFILE_PANELS + 1);
        cumulative.push(0.0);
        let mut left = dens(v_lo);
        for k in 0..PROFILE_PANELS {
            let a = v_lo + k as f64 * panel;
            let right = dens(a + panel);
            let mid = dens(a + 0.5 * panel);
            let c = cumulative[k] + panel / 6.0 * (left + 4.0 * mid + right);
            cumulative.push(c);
            left = right;
        }
        Ok(MassProfile {
            ell,
            v_lo,
            v_hi,
            top_is_sup,
            peak,
            panel,
            cumulative,
        })
    }

    fn mass(&self, v: f64) -> f64 {
        if v <= self.v_lo {
            return 0.0;
        }
        let v = v.min(self.v_hi);
        let k = (((v - self.v_lo) / self.panel) as usize).min(PROFILE_PANELS - 1);
        let a = self.v_lo + k as f64 * self.panel;
        let dens = |u: f64| (self.ell.log_eval(u) + u - self.peak).exp();
        self.cumulative[k] + simpson(dens, a, v, 2)
    }
}

/// Cell probabilities `∝ ∫_{C_j} ℓ(t) dt` by composite Simpson with at least 8
/// subintervals per cell (square-root graded in the top cell when it ends at
/// the support supremum). Cell 0 includes the mass below the grid.
pub fn stationary_weights(ell: &dyn LevelSetFunction, grid: &TGrid) -> Result<Vec<f64>> {
    let b = grid.boundaries();
    let n = grid.len();
    // Integrate e^{f(v) - shift}; `shift` keeps the exponentials in range.
    let shift = ell.log_eval(b[0]) + b[n];
    if !shift.is_finite() {
        return Err(SliceError::DegenerateSupport(
            "ℓ is not positive at the bottom of the grid".into(),
        ));
    }
    let dens = |v: f64| (ell.log_eval(v) + v - shift).exp();
    let mut w: Vec<f64> = (0..n)
        .map(|j| {
            let subs = WEIGHT_SUBPOINTS.max(((b[j + 1] - b[j]) / WEIGHT_MAX_STEP).ceil() as usize);
            if j + 1 == n && grid.top_is_sup() {
                simpson_graded_top(dens, b[j], b[j + 1], (2 * subs).max(TOP_REFINEMENT))
            } else {
                simpson(dens, b[j], b[j + 1], subs)
            }
        })
        .collect();
    let tail_subs = (TAIL_SPAN / WEIGHT_MAX_STEP) as usize;
    w[0] += simpson(dens, b[0] - TAIL_SPAN, b[0], tail_subs);
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(SliceError::DegenerateSupport(
            "no stationary mass on the grid".into(),
        ));
    }
    for x in w.iter_mut() {
        *x /= total;
    }
    Ok(w)
}

/// Row-stochastic matrix with its stationary cell probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    n: usize,
    matrix: Vec<f64>,
    weights: Vec<f64>,
    defect: f64,
    truncation_mass: f64,
}

impl DiscreteKernel {
    /// Validates row-stochasticity (1e-8) and detailed balance
    /// (`1e-6` relative plus `1e-12` absolute). `matrix` is row-major `n × n`.
    pub fn new(matrix: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if n == 0 || matrix.len() != n * n {
            return Err(SliceError::Domain(format!(
                "matrix of length {} does not match {n} weights",
                matrix.len()
            )));
        }
        let k = DiscreteKernel {
            n,
            matrix,
            weights,
            defect: 0.0,
            truncation_mass: 0.0,
        };
        k.validate()?;
        Ok(k)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        let wsum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (wsum - 1.0).abs() > 1e-10 {
            return Err(SliceError::Numeric(
                "weights must be a probability vector".into(),
            ));
        }
        for i in 0..n {
            let row = self.row(i);
            if row.iter().any(|x| !(*x >= 0.0)) {
                return Err(SliceError::Numeric(format!(
                    "row {i} has a negative or NaN entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-8 {
                return Err(SliceError::Numeric(format!("row {i} sums to {s}")));
            }
        }
        let db = self.detailed_balance_violation();
        if db > 0.0 {
            return Err(SliceError::Numeric(format!(
                "detailed balance violated by {db:e} beyond tolerance"
            )));
        }
        Ok(())
    }

    /// Largest excess of `|w_i M_ij - w_j M_ji|` over its tolerance; 0 if none.
    pub fn detailed_balance_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let a = self.weights[i] * self.get(i, j);
                let b = self.weights[j] * self.get(j, i);
                let excess = (a - b).abs() - (1e-6 * a.max(b) + 1e-12);
                worst = worst.max(excess);
            }
        }
        worst
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `max_j |(wᵀ M)_j - w_j|`.
    pub fn stationarity_residual(&self) -> f64 {
        let mut wm = vec![0.0; self.n];
        for i in 0..self.n {
            let wi = self.weights[i];
            for (acc, m) in wm.iter_mut().zip(self.row(i)) {
                *acc += wi * m;
            }
        }
        wm.iter()
            .zip(&self.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest difference between the kernel's stationary weights and the
    /// independent Simpson cell masses.
    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }
}

/// One cell's moments `∫ dν/s`, `∫ (s-a)/s dν` and `∫ (s-a)²/s dν`, with `ν`
/// spread uniformly in `ln t` over each refinement subinterval (i.e. `ℓ`
/// interpolated linearly in `ln t` between refinement points).
#[derive(Debug, Clone, Copy, Default)]
struct CellMoments {
    inv: f64,
    m1: f64,
    m2: f64,
}

impl CellMoments {
    fn add(&mut self, a: f64, v0: f64, v1: f64, dl: f64, t_hat: &dyn Fn(f64) -> f64) {
        if dl == 0.0 {
            return;
        }
        let dv = v1 - v0;
        let density = dl / dv;
        let (s0, sm, s1) = (t_hat(v0), t_hat(0.5 * (v0 + v1)), t_hat(v1));
        self.inv += density * -(-dv).exp_m1() / s0;
        let f1 = |s: f64| (s - a) / s;
        let f2 = |s: f64| (s - a) * (s - a) / s;
        self.m1 += density * dv / 6.0 * (f1(s0) + 4.0 * f1(sm) + f1(s1));
        self.m2 += density * dv / 6.0 * (f2(s0) + 4.0 * f2(sm) + f2(s1));
    }
}

fn refinement_points(grid: &TGrid, j: usize) -> Vec<f64> {
    let b = grid.boundaries();
    let (lo, hi) = (b[j], b[j + 1]);
    let mut pts = Vec::new();
    if j == 0 {
        let subs = (TAIL_SPAN / TAIL_STEP) as usize;
        pts.extend((0..subs).map(|q| lo - TAIL_SPAN + TAIL_STEP * q as f64));
    }
    let subs = ((hi - lo) / REFINEMENT_MAX_STEP).ceil() as usize;
    if j + 1 == grid.len() && grid.top_is_sup() {
        // dv/dq is up to twice the uniform spacing at the bottom of the cell
        let m = (2 * subs).max(TOP_REFINEMENT);
        let y = (hi - lo).sqrt();
        pts.extend((0..=m).map(|q| {
            let yq = y * (1.0 - q as f64 / m as f64);
            hi - yq * yq
        }));
    } else {
        let m = subs.max(REFINEMENT);
        pts.extend((0..=m).map(|q| lo + (hi - lo) * q as f64 / m as f64));
    }
    pts
}

/// Builds the discretized T-chain kernel on `grid`.
///
/// Fails with [`SliceError::InvalidLevelSet`] when `ℓ` increases anywhere on
/// the refinement grid and with [`SliceError::Numeric`] when the stationary
/// weights disagree with the Simpson cell masses by more than [`DEFECT_TOL`].
pub fn discretize_pt(ell: &dyn LevelSetFunction, grid: &TGrid) -> Result<DiscreteKernel> {
    let n = grid.len();
    let b = grid.boundaries();
    let v_ref = grid.log_t_max();
    let l_ref = ell.log_eval(b[0]);
    if !l_ref.is_finite() {
        return Err(SliceError::DegenerateSupport(
            "ℓ is not positive at the bottom of the grid".into(),
        ));
    }
    let ell_hat = |v: f64| -> Result<f64> {
        let l = ell.log_eval(v);
        if l.is_nan() {
            return Err(SliceError::InvalidLevelSet(format!(
                "ℓ is NaN at ln t = {v}"
            )));
        }
        Ok((l - l_ref).exp())
    };
    let t_hat = |v: f64| (v - v_ref).exp();

    let mut moments = vec![CellMoments::default(); n];
    let mut prev: Option<(f64, f64)> = None;
    for (j, mom) in moments.iter_mut().enumerate() {
        let a = if j == 0 { 0.0 } else { t_hat(b[j]) };
        for v in refinement_points(grid, j) {
            let l = ell_hat(v)?;
            if let Some((v0, l0)) = prev {
                if v > v0 {
                    if l > l0 * (1.0 + 1e-10) {
                        return Err(SliceError::InvalidLevelSet(format!(
                            "ℓ increases near ln t = {v}"
                        )));
                    }
                    mom.add(a, v0, v, (l0 - l).max(0.0), &t_hat);
                }
            }
            prev = Some((v, l));
        }
    }
    // ν mass above the grid (only for truncated unbounded supports).
    let mut beyond = CellMoments::default();
    if !grid.top_is_sup() {
        let (mut v0, mut l0) = prev.unwrap();
        for q in 1..=((TAIL_SPAN / TAIL_STEP) as usize) {
            let v = b[n] + TAIL_STEP * q as f64;
            let l = ell_hat(v)?;
            if l > l0 * (1.0 + 1e-10) {
                return Err(SliceError::InvalidLevelSet(format!(
                    "ℓ increases near ln t = {v}"
                )));
            }
            beyond.add(0.0, v0, v, (l0 - l).max(0.0), &t_hat);
            (v0, l0) = (v, l);
        }
    }
    let mut suffix = vec![0.0; n + 1];
    suffix[n] = beyond.inv;
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + moments[k].inv;
    }
    let width: Vec<f64> = (0..n)
        .map(|j| {
            if j == 0 {
                t_hat(b[1])
            } else {
                t_hat(b[j + 1]) - t_hat(b[j])
            }
        })
        .collect();

    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        joint[i * n + i] = width[i] * width[i] * suffix[i + 1] + moments[i].m2;
        for j in (i + 1)..n {
            let v = width[i] * (width[j] * suffix[j + 1] + moments[j].m1);
            joint[i * n + j] = v;
            joint[j * n + i] = v;
        }
    }
    let mass: Vec<f64> = (0..n)
        .map(|i| joint[i * n..(i + 1) * n].iter().sum())
        .collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(SliceError::DegenerateSupport("kernel has no mass".into()));
    }
    let weights: Vec<f64> = mass.iter().map(|m| m / total).collect();
    let reference = stationary_weights(ell, grid)?;
    let defect = weights
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if defect > DEFECT_TOL {
        return Err(SliceError::Numeric(format!(
            "stationary weights deviate from the cell quadrature by {defect:e}"
        )));
    }
    log::debug!("discretized kernel: n = {n}, weight defect = {defect:e}");
    let mut matrix = joint;
    for i in 0..n {
        let row = &mut matrix[i * n..(i + 1) * n];
        if mass[i] > 0.0 {
            for x in row.iter_mut() {
                *x /= mass[i];
            }
        } else {
            // No stationary mass (above the support): absorbing placeholder.
            row.fill(0.0);
            row[i] = 1.0;
        }
    }
    let kernel = DiscreteKernel {
        n,
        matrix,
        weights,
        defect,
        truncation_mass: grid.truncation_mass(),
    };
    kernel.validate()?;
    Ok(kernel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub gap: f64,
    pub lambda2: f64,
    /// Smallest eigenvalue of the symmetrized kernel.
    pub lambda_min: f64,
    pub truncation_mass: f64,
    pub grid_size: usize,
    /// `|gap(n) - gap(2n)|` when a refinement was run.
    pub refinement_delta: Option<f64>,
    pub converged: Option<bool>,
}

/// Spectral gap `1 - λ₂` of `A = D^{1/2} M D^{-1/2}`, restricted to cells
/// with positive weight.
pub fn spectral_gap(kernel: &DiscreteKernel) -> Result<GapEstimate> {
    let active: Vec<usize> = (0..kernel.len())
        .filter(|&i| kernel.weights[i] > 0.0)
        .collect();
    let m = active.len();
    if m < 2 {
        return Err(SliceError::DegenerateSupport(
            "fewer than two cells carry stationary mass".into(),
        ));
    }
    let sq: Vec<f64> = active.iter().map(|&i| kernel.weights[i].sqrt()).collect();
    let a = faer::Mat::<f64>::from_fn(m, m, |p, q| {
        let (i, j) = (active[p], active[q]);
        let x = sq[p] * kernel.get(i, j) / sq[q];
        let y = sq[q] * kernel.get(j, i) / sq[p];
        0.5 * (x + y)
    });
    let mut ev = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| SliceError::Numeric(format!("eigensolver failed: {e:?}")))?;
    ev.sort_by(|x, y| x.total_cmp(y));
    let lambda2 = ev[m - 2];
    let lambda_min = ev[0];
    if lambda2 < -1e-8 || lambda_min < -1e-6 {
        warn!("negative spectrum (λ₂ = {lambda2:e}, λ_min = {lambda_min:e}): discretization error");
    }
    Ok(GapEstimate {
        gap: 1.0 - lambda2,
        lambda2,
        lambda_min,
        truncation_mass: kernel.truncation_mass,
        grid_size: kernel.len(),
        refinement_delta: None,
        converged: None,
    })
}

/// Gap on a default-built grid of `n` cells.
pub fn gap_at(ell: &dyn LevelSetFunction, n: usize, mass_tol: f64) -> Result<GapEstimate> {
    let grid = TGrid::build(ell, n, mass_tol)?;
    spectral_gap(&discretize_pt(ell, &grid)?)
}

/// Gap at `n` with the refinement diagnostic from `2n`.
pub fn certify_gap(ell: &dyn LevelSetFunction, n: usize, mass_tol: f64) -> Result<GapEstimate> {
    let mut est = gap_at(ell, n, mass_tol)?;
    let fine = gap_at(ell, 2 * n, mass_tol)?;
    let delta = (est.gap - fine.gap).abs();
    est.refinement_delta = Some(delta);
    est.converged = Some(delta <= REFINEMENT_TOL);
    if delta > REFINEMENT_TOL {
        warn!("gap not converged under refinement: delta = {delta:e}");
    }
    Ok(est)
}

/// `|gap(mass_tol_a) - gap(mass_tol_b)|` at fixed `n`.
pub fn truncation_delta(
    ell: &dyn LevelSetFunction,
    n: usize,
    tol_a: f64,
    tol_b: f64,
) -> Result<f64> {
    Ok((gap_at(ell, n, tol_a)?.gap - gap_at(ell, n, tol_b)?.gap).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// `max |ℓ_A - ℓ_B|` over the grid boundaries.
    pub max_ell_diff: f64,
    pub gap_a: f64,
    pub gap_b: f64,
    pub gap_diff: f64,
}

/// Compares two level-set functions on the grid built from `ell_a`.
pub fn duality_gap_compare(
    ell_a: &dyn LevelSetFunction,
    ell_b: &dyn LevelSetFunction,
    n: usize,
    mass_tol: f64,
) -> Result<DualityReport> {
    let grid = TGrid::build(ell_a, n, mass_tol)?;
    let max_ell_diff = grid
        .boundaries()
        .iter()
        .map(|&v| (ell_a.eval(v) - ell_b.eval(v)).abs())
        .fold(0.0, f64::max);
    let gap_a = spectral_gap(&discretize_pt(ell_a, &grid)?)?.gap;
    let gap_b = spectral_gap(&discretize_pt(ell_b, &grid)?)?.gap;
    Ok(DualityReport {
        max_ell_diff,
        gap_a,
        gap_b,
        gap_diff: (gap_a - gap_b).abs(),
    })
}

const POINT_QUADRATURE: usize = 4096;

// s ↦ ∫_{e^{v0}}^{sup} ν(ds)/s, scaled by e^{v0}:
// ℓ(e^{v0}) - ∫_{v0}^{top} ℓ(e^v) e^{v0-v} dv.
fn scaled_inverse_moment(ell: &dyn LevelSetFunction, v0: f64) -> f64 {
    let l0 = ell.eval(v0);
    let f = |v: f64| ell.eval(v) * (v0 - v).exp();
    let top = ell.log_support_sup();
    let integral = if top.is_finite() {
        simpson_graded_top(f, v0, top, POINT_QUADRATURE)
    } else {
        let mut hi = v0 + 1.0;
        let floor = l0.ln() - 45.0;
        for _ in 0..MAX_SCAN {
            if ell.log_eval(hi) + v0 - hi < floor {
                break;
            }
            hi += 1.0;
        }
        simpson(f, v0, hi, POINT_QUADRATURE)
    };
    (l0 - integral).max(0.0)
}

/// `P_T(t, (0, b))` by quadrature of the Stieltjes formula, with `ln t` and
/// `ln b` given.
pub fn transition_probability(ell: &dyn LevelSetFunction, log_t: f64, log_b: f64) -> Result<f64> {
    let lt = ell.eval(log_t);
    if !(lt > 0.0) || !lt.is_finite() {
        return Err(SliceError::EmptyLevel { log_t });
    }
    if log_b >= ell.log_support_sup() {
        return Ok(1.0);
    }
    let tail = scaled_inverse_moment(ell, log_b.max(log_t));
    let p = if log_b <= log_t {
        // (b/ℓ(t)) ∫_t ν(ds)/s
        (log_b - log_t).exp() * tail / lt
    } else {
        // (ℓ(t) - ℓ(b) + b ∫_b ν(ds)/s) / ℓ(t)
        (lt - ell.eval(log_b) + tail) / lt
    };
    Ok(p.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointnessResidual {
    pub g: String,
    pub h: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointnessReport {
    pub max_residual: f64,
    pub residuals: Vec<AdjointnessResidual>,
}

const G_LABELS: [&str; 4] = ["1", "s", "s^2", "sin s"];
const H_LABELS: [&str; 4] = ["1", "r", "r^2", "exp(-r)"];

fn g_eval(k: usize, s: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => s,
        2 => s * s,
        _ => s.sin(),
    }
}

// E[g(ln T - c)] for T ~ U(0, e^λ), with a = λ - c.
fn g_level_average(k: usize, a: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => a - 1.0,
        2 => a * a - 2.0 * a + 2.0,
        _ => 0.5 * (a.sin() - a.cos()),
    }
}

fn h_eval(k: usize, r: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => r,
        2 => r * r,
        _ => (-r).exp(),
    }
}

/// `∫_{lo}^{hi} h_k(r) r^{p-1} dr`.
fn h_moment(k: usize, p: f64, lo: f64, hi: f64) -> f64 {
    use statrs::function::gamma::{gamma, gamma_ur};
    match k {
        0..=2 => {
            let q = p + k as f64;
            (hi.powf(q) - lo.powf(q)) / q
        }
        _ => {
            let upper = |x: f64| if x > 0.0 { gamma_ur(p, x) } else { 1.0 };
            gamma(p) * (upper(lo) - upper(hi))
        }
    }
}

/// Checks `⟨U_T g, h⟩_π = ⟨g, U_X h⟩_π̃` by quadrature over the test battery
/// `g(s) ∈ {1, s, s², sin s}` with `s = ln t - ln t_top` and
/// `h(r) ∈ {1, r, r², e^{-r}}`. Residuals are normalized by `‖g‖ ‖h‖`.
///
/// `points` is the number of Simpson subintervals on each side (≥ 512).
pub fn adjointness_check(
    target: &RadialTarget,
    fac: &RadialFactorization,
    points: usize,
) -> Result<AdjointnessReport> {
    if points < 512 {
        return Err(SliceError::Domain(format!(
            "adjointness quadrature needs at least 512 points, got {points}"
        )));
    }
    let ls = RadialLevelSet::new(target, fac)?;
    let p = ls.power();

    // Level side, in v = ln t.
    let prof = MassProfile::new(&ls)?;
    let c = prof.v_hi;
    let kink = ls.log_h(0.0);
    let level_integral = |f: &dyn Fn(f64) -> f64| -> f64 {
        let mut parts = Vec::new();
        let split = kink.is_finite() && kink > prof.v_lo && kink < prof.v_hi;
        let (lo, mid) = (prof.v_lo, if split { kink } else { prof.v_lo });
        if split {
            parts.push(simpson(f, lo, mid, points));
        }
        if prof.top_is_sup {
            parts.push(simpson_graded_top(f, mid, prof.v_hi, points));
        } else {
            parts.push(simpson(f, mid, prof.v_hi, points));
        }
        parts.iter().sum()
    };
    // ∫ g(s) I_h(t) dt with I_h(t) = ∫_{L(t)} h ϱ0, scaled by e^{-peak}.
    let level_term = |gk: usize, hk: usize, square_g: bool| {
        let f = |v: f64| -> f64 {
            match ls.interval(v) {
                Ok(iv) => {
                    let g = g_eval(gk, v - c);
                    let g = if square_g { g * g } else { g };
                    g * h_moment(hk, p, iv.r_lo, iv.r_hi) * (v - prof.peak).exp()
                }
                Err(_) => 0.0,
            }
        };
        level_integral(&f)
    };

    // Radial side, in u = ln r: π(dr) ∝ r^{p-1} h_α(r) dr.
    let polar = RadialLevelSet::new(target, &RadialFactorization::polar(target.dim()))?;
    let log_dens = |u: f64| p * u + ls.log_h(u.exp());
    let u_hi = if target.kappa().is_finite() {
        target.kappa().ln()
    } else {
        polar.effective_cutoff(polar.log_support_sup()).ln()
    };
    let mut peak = log_dens(u_hi - 1.0);
    let mut u_lo = u_hi - 1.0;
    for _ in 0..MAX_SCAN {
        u_lo -= 0.5;
        let l = log_dens(u_lo);
        peak = peak.max(l);
        if l < peak - PROFILE_DROP {
            break;
        }
    }
    for k in 0..200 {
        peak = peak.max(log_dens(u_lo + (u_hi - u_lo) * k as f64 / 200.0));
    }
    let radial_term = |gk: Option<usize>, hk: usize, square_h: bool| {
        let f = |u: f64| -> f64 {
            let r = u.exp();
            let l = ls.log_h(r);
            let w = (p * u + l - peak).exp();
            if w == 0.0 {
                return 0.0;
            }
            let g = gk.map_or(1.0, |k| g_level_average(k, l - c));
            let h = h_eval(hk, r);
            let h = if square_h { h * h } else { h };
            w * g * h
        };
        simpson(f, u_lo, u_hi, points)
    };

    let z_pi = radial_term(None, 0, false);
    let z_level = level_term(0, 0, false);
    let g_norm: Vec<f64> = (0..4)
        .map(|k| (level_term(k, 0, true) / z_level).sqrt())
        .collect();
    let h_norm: Vec<f64> = (0..4)
        .map(|k| (radial_term(None, k, true) / z_pi).sqrt())
        .collect();
    let mut residuals = Vec::with_capacity(16);
    for gk in 0..4 {
        for hk in 0..4 {
            let lhs = radial_term(Some(gk), hk, false) / z_pi;
            let rhs = level_term(gk, hk, false) / z_level;
            residuals.push(AdjointnessResidual {
                g: G_LABELS[gk].into(),
                h: H_LABELS[hk].into(),
                residual: (lhs - rhs).abs() / (g_norm[gk] * h_norm[hk]),
            });
        }
    }
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(AdjointnessReport {
        max_residual,
        residuals,
    })
}
