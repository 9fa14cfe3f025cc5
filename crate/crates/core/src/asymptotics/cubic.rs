//! Closed-form cubic roots (trigonometric / Cardano) with a Newton polish.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Roots of a real cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicRoots {
    /// All three roots, real ones first in ascending order.
    pub roots: [Complex64; 3],
    /// The real roots (with multiplicity), ascending.
    pub real_roots: Vec<f64>,
}

impl CubicRoots {
    pub fn min_real(&self) -> Option<f64> {
        self.real_roots.first().copied()
    }
}

/// Solves `c3 x^3 + c2 x^2 + c1 x + c0 = 0`.
///
/// A root is reported as real when its imaginary part is below
/// `1e-10 * max(1, |root|)`.
pub fn solve_cubic(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<CubicRoots> {
    if c3 == 0.0 || !c3.is_finite() {
        return Err(Error::Degree);
    }
    let a = c2 / c3;
    let b = c1 / c3;
    let c = c0 / c3;

    // x = t - a/3 gives t^3 + p t + q = 0.
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    let mut roots: [Complex64; 3] = if disc < 0.0 {
        // Three distinct real roots; p < 0 is implied.
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [0.0, 1.0, 2.0].map(|j| Complex64::new(m * (theta - tau * j).cos() - shift, 0.0))
    } else {
        let sd = disc.sqrt();
        let u = (-q / 2.0 + sd).cbrt();
        let v = (-q / 2.0 - sd).cbrt();
        let re = -(u + v) / 2.0 - shift;
        let im = 3f64.sqrt() / 2.0 * (u - v);
        [
            Complex64::new(u + v - shift, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    };

    let coeffs = [1.0, a, b, c];
    for r in roots.iter_mut() {
        *r = polish(&coeffs, *r);
    }

    let mut real_roots = Vec::with_capacity(3);
    for r in roots.iter_mut() {
        if r.im.abs() < 1e-10 * r.norm().max(1.0) {
            r.im = 0.0;
            real_roots.push(r.re);
        }
    }
    real_roots.sort_by(f64::total_cmp);
    roots.sort_by(|x, y| {
        (x.im != 0.0)
            .cmp(&(y.im != 0.0))
            .then(x.re.total_cmp(&y.re))
            .then(x.im.total_cmp(&y.im))
    });
    Ok(CubicRoots { roots, real_roots })
}

fn eval(coeffs: &[f64; 4], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// One Newton step, kept only if it lowers the residual.
fn polish(coeffs: &[f64; 4], z: Complex64) -> Complex64 {
    let (p, dp) = eval(coeffs, z);
    if dp.norm() == 0.0 || p.norm() == 0.0 {
        return z;
    }
    let next = z - p / dp;
    if next.is_finite() && eval(coeffs, next).0.norm() < p.norm() {
        next
    } else {
        z
    }
}
