//! Small numerical helpers shared by the level-set, sampler and operator code.

/// Iteration cap for every bisection in the crate.
pub const MAX_BISECTIONS: usize = 200;

/// Locates the switch point of a monotone predicate on `[inside, outside]`.
///
/// `pred(inside)` must be true and `pred(outside)` false; the two ends may be
/// given in either order. Bisects until the bracket cannot be split further in
/// double precision (or the iteration cap is hit) and returns the last point
/// where the predicate held.
pub fn bisect_boundary<F: Fn(f64) -> bool>(mut inside: f64, mut outside: f64, pred: F) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(1 - e^x)` for `x <= 0`, accurate near both ends.
pub fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Composite Simpson rule with `n` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2) + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Simpson rule for `∫_a^b f(v) dv` after the substitution `v = b - y²`,
/// which removes square-root behaviour of `f` at the upper end.
pub fn simpson_graded_top<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    simpson(|y| 2.0 * y * f(b - y * y), 0.0, (b - a).sqrt(), n)
}
