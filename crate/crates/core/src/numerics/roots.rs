//! Bracketed scalar root finding (Brent's method).

use crate::error::{CoreError, Result};

/// Tolerances for the root finder.
#[derive(Debug, Clone, Copy)]
pub struct RootConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-13, max_iters: 200 }
    }
}

impl RootConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(CoreError::Config("root tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Finds a root of `f` in `[lo, hi]` given `f(lo) * f(hi) <= 0`.
///
/// Brent's method: bisection safeguarding inverse quadratic interpolation
/// and the secant step. Returns the abscissa once the bracket width falls
/// below tolerance or `f` evaluates exactly to zero.
pub fn find_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cfg: &RootConfig) -> Result<f64> {
    cfg.validate()?;
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() || !fb.is_finite() {
        return Err(CoreError::Numeric(format!(
            "non-finite function values at bracket ends: f({a})={fa}, f({b})={fb}"
        )));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(CoreError::Bracket(format!(
            "no sign change on [{a}, {b}]: f(lo)={fa}, f(hi)={fb}"
        )));
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..cfg.max_iters {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * (cfg.abs_tol + cfg.rel_tol * b.abs());
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0));
                q = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(CoreError::Numeric(format!("non-finite f({b}) during root find")));
        }
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(CoreError::Convergence(format!(
        "root finder exceeded {} iterations on [{lo}, {hi}]",
        cfg.max_iters
    )))
}

/// Expands `hi` geometrically until `f(hi)` changes sign relative to `f(lo)`,
/// then hands off to [`find_root`]. `f` must be finite on the expanded range.
pub fn find_root_expanding(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi0: f64,
    factor: f64,
    max_expand: usize,
    cfg: &RootConfig,
) -> Result<f64> {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let mut hi = hi0;
    for _ in 0..max_expand {
        let f_hi = f(hi);
        if !f_hi.is_finite() {
            return Err(CoreError::Numeric(format!("non-finite f({hi}) while expanding bracket")));
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        if f_lo.signum() != f_hi.signum() {
            return find_root(f, lo, hi, cfg);
        }
        hi *= factor;
    }
    Err(CoreError::Bracket(format!(
        "no sign change found expanding from [{lo}, {hi0}] by {factor} ({max_expand} times)"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear() {
        let r = find_root(|x| x - 2.0, 0.0, 5.0, &RootConfig::default()).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_two() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, &RootConfig::default()).unwrap();
        assert!((r - 1.414_213_56).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_bracket() {
        let e = find_root(|x| x * x + 1.0, -1.0, 1.0, &RootConfig::default());
        assert!(matches!(e, Err(CoreError::Bracket(_))));
    }

    #[test]
    fn expanding_bracket() {
        let r = find_root_expanding(|x| x.ln(), 0.1, 0.2, 2.0, 60, &RootConfig::default()).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
    }
}
