//! One-dimensional adaptive quadrature used to validate kernel normalization.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Recursion depth is capped; the cap is generous enough that the radial
/// profiles used here (polynomial bumps, tents, Gaussians) converge long
/// before hitting it.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let c = 0.5 * (a + b);
    let fa = f(a);
    let fb = f(b);
    let fc = f(c);
    let whole = simpson(a, b, fa, fc, fb);
    simpson_step(f, a, b, fa, fc, fb, whole, tol, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fc: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fc + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fc: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = simpson(a, c, fa, fd, fc);
    let right = simpson(c, b, fc, fe, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, c, fa, fd, fc, left, 0.5 * tol, depth - 1)
            + simpson_step(f, c, b, fc, fe, fb, right, 0.5 * tol, depth - 1)
    }
}
