//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature on finite
//! intervals, plus a principal-value helper built on singularity subtraction.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Scalar types the integrator can accumulate.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525452330,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-9,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self {
            abs,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

fn gk21<T: QuadValue>(f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    for i in 0..10 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kron = kron + s * WGK[i];
        if i % 2 == 1 {
            gauss = gauss + s * WG[i / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    let err = (kron - gauss).magnitude();
    (kron, err)
}

struct Piece<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Integrates `f` over `[a, b]`, bisecting the worst interval until the
/// summed error estimate drops below `max(tol.abs, tol.rel·|I|)`.
pub fn integrate<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    tol: Tolerance,
    context: &str,
) -> Result<QuadResult<T>> {
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
        });
    }
    let (v, e) = gk21(&mut f, a, b);
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    loop {
        let target = tol.abs.max(tol.rel * total.magnitude());
        if !total.magnitude().is_finite() || total_err.is_nan() {
            return Err(Error::Numeric(format!(
                "{context}: integrand is not finite"
            )));
        }
        if total_err <= target {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::Integration {
                context: context.to_string(),
                achieved: total_err,
                tolerance: target,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Integration {
                context: context.to_string(),
                achieved: total_err,
                tolerance: target,
            });
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum from scratch to shed the running-update rounding.
    let mut value = T::zero();
    let mut error = 0.0;
    for p in heap.iter() {
        value = value + p.value;
        error += p.error;
    }
    Ok(QuadResult {
        value,
        error,
        evaluations,
    })
}

/// Like [`integrate`] but first splits `[a, b]` at the given interior points,
/// sharing the absolute tolerance between the pieces.
pub fn integrate_split<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
    context: &str,
) -> Result<QuadResult<T>> {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    let n = (pts.len() - 1) as f64;
    let sub = Tolerance {
        abs: tol.abs / n,
        ..tol
    };
    let mut out = QuadResult {
        value: T::zero(),
        error: 0.0,
        evaluations: 0,
    };
    for w in pts.windows(2) {
        let r = integrate(&mut f, w[0], w[1], sub, context)?;
        out.value = out.value + r.value;
        out.error += r.error;
        out.evaluations += r.evaluations;
    }
    Ok(out)
}

/// Cauchy principal value of `∫_a^b f(x)/(c − x) dx` for `a < c < b`, by
/// subtracting `f(c)` and adding back its logarithmic integral.
pub fn principal_value(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    c: f64,
    tol: Tolerance,
    context: &str,
) -> Result<QuadResult<f64>> {
    if !(c > a && c < b) {
        return integrate(|x| f(x) / (c - x), a, b, tol, context);
    }
    let fc = f(c);
    let g = |x: f64| {
        let d = c - x;
        if d == 0.0 {
            0.0
        } else {
            (f(x) - fc) / d
        }
    };
    let mut r = integrate_split(g, a, b, &[c], tol, context)?;
    r.value += fc * ((c - a) / (b - c)).ln();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(
            |x: f64| x.powi(7) - 3.0 * x * x,
            -1.0,
            2.0,
            Tolerance::default(),
            "t",
        )
        .unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
        assert_eq!(r.evaluations, 21);
    }

    #[test]
    fn sharp_peak_converges() {
        // Lorentzian of width 1e-3 centred off the midpoint.
        let g = 1e-3;
        let r = integrate(
            |x: f64| g / ((x - 0.3).powi(2) + g * g),
            -1.0,
            1.0,
            Tolerance::absolute(1e-11),
            "t",
        )
        .unwrap();
        let exact = (0.7 / g).atan() + (1.3 / g).atan();
        assert!((r.value - exact).abs() < 1e-10);
    }

    #[test]
    fn complex_oscillatory() {
        let r = integrate(
            |x: f64| C64::new(0.0, 7.0 * x).exp(),
            0.0,
            3.0,
            Tolerance::absolute(1e-13),
            "t",
        )
        .unwrap();
        let exact = (C64::new(0.0, 21.0).exp() - 1.0) / C64::new(0.0, 7.0);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn principal_value_of_constant() {
        // P∫_0^3 dx/(1 − x) = ln(1/2)
        let r = principal_value(|_| 1.0, 0.0, 3.0, 1.0, Tolerance::default(), "t").unwrap();
        assert!((r.value - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn principal_value_of_exponential() {
        // P∫_{-1}^{1} e^x/(0 − x) dx = −2·Shi(1)
        let shi1 = 1.0572508753757285;
        let r = principal_value(f64::exp, -1.0, 1.0, 0.0, Tolerance::absolute(1e-12), "t").unwrap();
        assert!((r.value + 2.0 * shi1).abs() < 1e-11);
    }

    #[test]
    fn reports_non_convergence() {
        let tol = Tolerance {
            abs: 1e-14,
            rel: 0.0,
            max_intervals: 3,
        };
        let e = integrate(|x: f64| x.abs().sqrt().recip(), 0.0, 1.0, tol, "singular").unwrap_err();
        match e {
            Error::Integration {
                context, achieved, ..
            } => {
                assert_eq!(context, "singular");
                assert!(achieved > 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
