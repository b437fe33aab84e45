//! Small adaptive-Simpson quadrature used by the Lévy-measure routines.
//!
//! The integrands we meet have an integrable singularity at 0 and either a
//! power-law or exponentially damped tail; callers substitute into log
//! coordinates before integrating, so the kernel here only needs to handle
//! smooth integrands on finite intervals.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) trait Integrand: Copy {
    fn zero() -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn norm(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

fn simpson<T: Integrand>(fa: T, fm: T, fb: T, h: f64) -> T {
    fa.add(fm.scale(4.0)).add(fb).scale(h / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn rec<T: Integrand, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: f64,
    depth: u32,
) -> Result<T> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left.add(right).sub(whole);
    if delta.norm() <= 15.0 * tol || (b - a) < 1e-14 * (a.abs() + b.abs() + 1.0) {
        // Richardson extrapolation of the two half-interval estimates.
        return Ok(left.add(right).add(delta.scale(1.0 / 15.0)));
    }
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "adaptive quadrature failed to converge on [{a}, {b}] (residual {:.3e})",
            delta.norm()
        )));
    }
    let l = rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l.add(r))
}

/// Adaptive Simpson on [a, b] with an absolute tolerance.
pub(crate) fn adaptive<T: Integrand, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_depth: u32,
) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth)
}

/// Adaptive Simpson with a relative tolerance: a coarse pass fixes the scale,
/// then the adaptive pass runs at `rel_tol * |coarse|`.
pub(crate) fn adaptive_rel<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_depth: u32,
) -> Result<f64> {
    let coarse = fixed_panels(f, a, b, 64);
    let scale = coarse.abs().max(1e-300);
    adaptive(f, a, b, rel_tol * scale, max_depth)
}

/// Composite Simpson with a fixed panel count (scale estimation, test oracles).
pub(crate) fn fixed_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        acc += (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1)) * h / 6.0;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = adaptive(&|x: f64| x * x * x, 0.0, 2.0, 1e-12, 40).unwrap();
        assert!((v - 4.0).abs() < 1e-10);
    }

    #[test]
    fn integrates_oscillatory() {
        let v = adaptive(&|x: f64| (10.0 * x).sin(), 0.0, std::f64::consts::PI, 1e-10, 48).unwrap();
        let exact = (1.0 - (10.0 * std::f64::consts::PI).cos()) / 10.0;
        assert!((v - exact).abs() < 1e-8);
    }

    #[test]
    fn complex_integrand() {
        let v = adaptive(
            &|x: f64| Complex64::new(x.cos(), x.sin()),
            0.0,
            1.0,
            1e-12,
            40,
        )
        .unwrap();
        assert!((v.re - 1.0f64.sin()).abs() < 1e-10);
        assert!((v.im - (1.0 - 1.0f64.cos())).abs() < 1e-10);
    }
}
