//! Bath functions for an Ohmic environment with exponential cutoff,
//! `J(ω) = 2αω e^{−ω/ω_c}`, in units with k_B = ħ = 1 (energies in ps⁻¹).
//!
//! Every quantity that is an integral over `J` is written against the
//! [`Environment`] trait so that a handful of discrete modes can stand in for
//! the continuum when building test oracles.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::quadrature::{integrate, integrate_split, principal_value, Tolerance};

/// Improper integrals stop at this multiple of the cutoff frequency.
pub const CUTOFF_MULTIPLE: f64 = 40.0;

/// Absolute tolerance for all bath integrals.
pub const BATH_TOL: f64 = 1e-9;

const POLARON_HORIZON: f64 = 200.0;
const POLARON_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub alpha: f64,
    pub omega_c: f64,
    pub temperature: f64,
}

impl BathSpec {
    pub fn new(alpha: f64, omega_c: f64, temperature: f64) -> Result<Self> {
        let b = Self {
            alpha,
            omega_c,
            temperature,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Validation(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::Validation(format!(
                "omega_c must be > 0, got {}",
                self.omega_c
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Validation(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }

    fn upper(&self) -> f64 {
        CUTOFF_MULTIPLE * self.omega_c
    }

    /// `J(ω)·coth(ω/2T)`, finite at ω = 0 where it tends to `4αT`.
    fn j_coth(&self, w: f64) -> f64 {
        let x = w / (2.0 * self.temperature);
        let decay = (-w / self.omega_c).exp();
        if x < 1e-6 {
            2.0 * self.alpha * decay * 2.0 * self.temperature * (1.0 + x * x / 3.0)
        } else {
            2.0 * self.alpha * w * decay / x.tanh()
        }
    }

    /// `J(ω)·N(ω)`, tending to `2αT` at ω = 0.
    fn j_bose(&self, w: f64) -> f64 {
        if w == 0.0 {
            return 2.0 * self.alpha * self.temperature;
        }
        2.0 * self.alpha * w * (-w / self.omega_c).exp() / (w / self.temperature).exp_m1()
    }
}

/// One discrete bath mode with frequency `omega` and coupling `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub omega: f64,
    pub g: f64,
}

/// A finite set of modes, `J(ω) = Σ g_k² δ(ω − ω_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteBath {
    pub modes: Vec<Mode>,
    pub temperature: f64,
}

impl DiscreteBath {
    /// Splits `[0, w_max]` into `n` equal bins, puts one mode at each bin
    /// centre and gives it the spectral weight of its bin.
    pub fn sample(b: &BathSpec, n: usize, w_max: f64) -> Result<Self> {
        if n == 0 || !(w_max > 0.0) {
            return Err(Error::Domain("need at least one mode and w_max > 0".into()));
        }
        let width = w_max / n as f64;
        let mut modes = Vec::with_capacity(n);
        for k in 0..n {
            let lo = k as f64 * width;
            let weight = integrate(
                |w| spectral_density(b, w),
                lo,
                lo + width,
                Tolerance::absolute(1e-13),
                "mode sampling",
            )?
            .value;
            modes.push(Mode {
                omega: lo + 0.5 * width,
                g: weight.sqrt(),
            });
        }
        Ok(Self {
            modes,
            temperature: b.temperature,
        })
    }
}

/// Anything that can integrate a kernel against its spectral density.
pub trait Environment: Sync {
    fn temperature(&self) -> f64;

    /// Returns `∫ f(ω, J(ω)coth(ω/2T), J(ω)) dω`. `osc` is the largest time
    /// scale appearing in oscillating factors of `f`, used to place breakpoints.
    fn spectral_integral(
        &self,
        f: &(dyn Fn(f64, f64, f64) -> C64 + Sync),
        osc: f64,
        context: &str,
    ) -> Result<C64>;

    fn is_decoupled(&self) -> bool;
}

impl Environment for BathSpec {
    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn spectral_integral(
        &self,
        f: &(dyn Fn(f64, f64, f64) -> C64 + Sync),
        osc: f64,
        context: &str,
    ) -> Result<C64> {
        if self.alpha == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let w_max = self.upper();
        // About two oscillation periods per piece.
        let pieces = 4 + (w_max * osc / (4.0 * std::f64::consts::PI)).ceil() as usize;
        let pieces = pieces.min(4000);
        let breaks: Vec<f64> = (1..pieces)
            .map(|i| w_max * i as f64 / pieces as f64)
            .collect();
        let r = integrate_split(
            |w| f(w, self.j_coth(w), spectral_density(self, w)),
            0.0,
            w_max,
            &breaks,
            Tolerance::absolute(BATH_TOL),
            context,
        )?;
        Ok(r.value)
    }

    fn is_decoupled(&self) -> bool {
        self.alpha == 0.0
    }
}

impl Environment for DiscreteBath {
    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn spectral_integral(
        &self,
        f: &(dyn Fn(f64, f64, f64) -> C64 + Sync),
        _osc: f64,
        _context: &str,
    ) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for m in &self.modes {
            let g2 = m.g * m.g;
            let coth = 1.0 / (m.omega / (2.0 * self.temperature)).tanh();
            acc += f(m.omega, g2 * coth, g2);
        }
        Ok(acc)
    }

    fn is_decoupled(&self) -> bool {
        self.modes.iter().all(|m| m.g == 0.0)
    }
}

/// `J(ω) = 2αω e^{−ω/ω_c}` for ω ≥ 0 and zero otherwise.
pub fn spectral_density(b: &BathSpec, w: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else {
        2.0 * b.alpha * w * (-w / b.omega_c).exp()
    }
}

/// `λ = ∫ J(ω)/ω dω = 2αω_c`.
pub fn reorganization_energy(b: &BathSpec) -> f64 {
    2.0 * b.alpha * b.omega_c
}

/// The same quantity by direct quadrature, for cross-checking.
pub fn reorganization_energy_quadrature(b: &BathSpec) -> Result<f64> {
    Ok(integrate(
        |w| 2.0 * b.alpha * (-w / b.omega_c).exp(),
        0.0,
        b.upper(),
        Tolerance {
            abs: 1e-14,
            rel: 1e-13,
            max_intervals: 1000,
        },
        "reorganization energy",
    )?
    .value)
}

/// Bath autocorrelation `C(τ) = ∫ J(ω)[cos(ωτ)coth(ω/2T) − i sin(ωτ)] dω`.
pub fn autocorrelation<E: Environment + ?Sized>(env: &E, tau: f64) -> Result<C64> {
    if tau < 0.0 {
        return Err(Error::Domain(format!(
            "autocorrelation needs tau >= 0, got {tau}"
        )));
    }
    env.spectral_integral(
        &|w, jc, j| C64::new(jc * (w * tau).cos(), -j * (w * tau).sin()),
        tau,
        "autocorrelation",
    )
}

/// Time after which `|C(τ)|` stays below `ratio·|C(0)|`, searched on a grid of
/// spacing `step` up to `horizon` and refined by bisection.
pub fn memory_time(b: &BathSpec, ratio: f64, step: f64, horizon: f64) -> Result<f64> {
    if b.alpha == 0.0 {
        return Ok(0.0);
    }
    let c0 = autocorrelation(b, 0.0)?.norm();
    let below = |t: f64| -> Result<bool> { Ok(autocorrelation(b, t)?.norm() <= ratio * c0) };
    let mut last_above = 0.0;
    let mut t = step;
    while t <= horizon {
        if !below(t)? {
            last_above = t;
        }
        t += step;
    }
    if !below(horizon)? {
        return Err(Error::Integration {
            context: "bath memory time".into(),
            achieved: autocorrelation(b, horizon)?.norm() / c0,
            tolerance: ratio,
        });
    }
    let (mut lo, mut hi) = (last_above, last_above + step);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Discretized memory-kernel coefficients `η_0 … η_K` for step `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaCoefficients {
    pub dt: f64,
    pub values: Vec<C64>,
}

impl EtaCoefficients {
    /// Memory length `K` (one less than the number of coefficients).
    pub fn kmax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn zeros(dt: f64, kmax: usize) -> Self {
        Self {
            dt,
            values: vec![C64::new(0.0, 0.0); kmax + 1],
        }
    }
}

/// `sin(x)/x` with the removable point filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(sin x − x)/ω²` written as `dt²·g(x)` with `x = ω·dt`.
fn sin_minus_arg(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        x * (-1.0 / 6.0 + x2 * (1.0 / 120.0 + x2 * (-1.0 / 5040.0 + x2 / 362880.0)))
    } else {
        (x.sin() - x) / (x * x)
    }
}

/// `η_0 = ∫_0^δt dt′ ∫_0^{t′} dt″ C(t″)` and, for `k ≥ 1`,
/// `η_k = ∫_{kδt}^{(k+1)δt} dt′ ∫_0^{δt} dt″ C(t′ − t″)`, each integrated
/// analytically in time so only one frequency quadrature remains.
pub fn eta_coefficients<E: Environment + ?Sized>(
    env: &E,
    dt: f64,
    kmax: usize,
) -> Result<EtaCoefficients> {
    use rayon::prelude::*;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
    }
    if env.is_decoupled() {
        return Ok(EtaCoefficients::zeros(dt, kmax));
    }
    let values = (0..=kmax)
        .into_par_iter()
        .map(|k| eta_single(env, dt, k))
        .collect::<Result<Vec<_>>>()?;
    debug!("computed {} eta coefficients at dt={dt}", values.len());
    Ok(EtaCoefficients { dt, values })
}

fn eta_single<E: Environment + ?Sized>(env: &E, dt: f64, k: usize) -> Result<C64> {
    let ctx = format!("eta_{k}");
    if k == 0 {
        return env.spectral_integral(
            &|w, jc, j| {
                let x = w * dt;
                let s = sinc(0.5 * x);
                C64::new(jc * 0.5 * dt * dt * s * s, j * dt * dt * sin_minus_arg(x))
            },
            dt,
            &ctx,
        );
    }
    let kt = k as f64 * dt;
    env.spectral_integral(
        &|w, jc, j| {
            let s = sinc(0.5 * w * dt);
            let weight = dt * dt * s * s;
            let (sn, cs) = (w * kt).sin_cos();
            C64::new(jc * weight * cs, -j * weight * sn)
        },
        kt + dt,
        &ctx,
    )
}

/// `Φ(τ) = ∫_0^τ dt′ ∫_0^{t′} dt″ C(t″)`, the doubly integrated correlation.
pub fn doubly_integrated_correlation<E: Environment + ?Sized>(env: &E, tau: f64) -> Result<C64> {
    if tau == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    env.spectral_integral(
        &|w, jc, j| {
            let x = w * tau;
            let s = sinc(0.5 * x);
            C64::new(
                jc * 0.5 * tau * tau * s * s,
                j * tau * tau * sin_minus_arg(x),
            )
        },
        tau,
        "doubly integrated correlation",
    )
}

fn check_frequency(nu: f64) -> Result<()> {
    if !(nu.abs() > 1e-8) || !nu.is_finite() {
        return Err(Error::Domain(format!(
            "Lamb shift requested at unresolvable frequency {nu}"
        )));
    }
    Ok(())
}

/// Lamb shift `S(ν) = P∫ J(ω)(N(ω)+1)/(ν−ω) dω + P∫ J(ω)N(ω)/(ν+ω) dω`,
/// both over ω ∈ [0, ∞).
pub fn lamb_shift(b: &BathSpec, nu: f64) -> Result<f64> {
    check_frequency(nu)?;
    if b.alpha == 0.0 {
        return Ok(0.0);
    }
    let tol = Tolerance::absolute(BATH_TOL);
    let w_max = b.upper();
    let emission = principal_value(
        |w| spectral_density(b, w) + b.j_bose(w),
        0.0,
        w_max,
        nu,
        tol,
        "Lamb shift (emission)",
    )?;
    // 1/(ν+ω) = −1/((−ν) − ω)
    let absorption = principal_value(
        |w| b.j_bose(w),
        0.0,
        w_max,
        -nu,
        tol,
        "Lamb shift (absorption)",
    )?;
    Ok(emission.value - absorption.value)
}

/// Splitting of the excited eigenstates including the Lamb shift,
/// `δE = 2Ω(1 + 2 P∫ J(ω)coth(ω/2T)/((2Ω)² − ω²) dω)`.
pub fn eigenstate_splitting(b: &BathSpec, omega_el: f64) -> Result<f64> {
    if !(omega_el > 0.0) {
        return Err(Error::Domain(format!(
            "splitting needs omega_el > 0, got {omega_el}"
        )));
    }
    if b.alpha == 0.0 {
        return Ok(2.0 * omega_el);
    }
    let nu = 2.0 * omega_el;
    let pv = principal_value(
        |w| b.j_coth(w) / (nu + w),
        0.0,
        b.upper(),
        nu,
        Tolerance::absolute(BATH_TOL),
        "eigenstate splitting",
    )?;
    Ok(nu * (1.0 + 2.0 * pv.value))
}

/// Weak-coupling downhill and uphill rates `(γ₁, γ₂)` between `|+⟩` and `|−⟩`.
pub fn wcme_rates(b: &BathSpec, omega_el: f64) -> Result<(f64, f64)> {
    if !(omega_el > 0.0) {
        return Err(Error::Domain(format!(
            "rates need omega_el > 0, got {omega_el}"
        )));
    }
    let nu = 2.0 * omega_el;
    let j = spectral_density(b, nu);
    let x = nu / b.temperature;
    let n = 1.0 / x.exp_m1();
    let n1 = if x > 700.0 { 1.0 } else { x.exp() * n };
    let two_pi_j = 2.0 * std::f64::consts::PI * j;
    Ok((two_pi_j * n1, two_pi_j * n))
}

/// `φ(t) − φ(0) = ∫ J(ω)/ω² [(cos ωt − 1)coth(ω/2T) − i sin ωt] dω`.
pub fn phonon_propagator_diff<E: Environment + ?Sized>(env: &E, t: f64) -> Result<C64> {
    if t < 0.0 {
        return Err(Error::Domain(format!(
            "phonon propagator needs t >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    env.spectral_integral(
        &|w, jc, j| {
            let x = w * t;
            let s = sinc(0.5 * x);
            // (cos x − 1)/ω² = −t²·sinc²(x/2)/2 and sin(x)/ω² = t·sinc(x)/ω
            C64::new(-jc * 0.5 * t * t * s * s, -j * t * sinc(x) / w)
        },
        t,
        "phonon propagator",
    )
}

/// Polaron-frame rates `(Λ₁, Λ₂, Λ₃, lamb)` from
/// `∫_0^∞ Ω² e^{4(φ(t)−φ(0))} dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolaronRates {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub lamb: f64,
}

/// `∫_0^∞ e^{4(φ(t)−φ(0))} dt`, the Ω-independent part of the polaron rates.
pub fn polaron_kernel_integral(b: &BathSpec) -> Result<C64> {
    let kernel = |t: f64| -> Result<C64> { Ok((phonon_propagator_diff(b, t)? * 4.0).exp()) };
    // Find where the kernel has died away.
    let mut horizon = 0.01;
    loop {
        // |kernel| decreases monotonically because Re(φ(t) − φ(0)) does.
        if kernel(horizon)?.norm() < POLARON_FLOOR {
            break;
        }
        if horizon >= POLARON_HORIZON {
            return Err(Error::Integration {
                context: "polaron rate time integral".into(),
                achieved: kernel(POLARON_HORIZON)?.norm(),
                tolerance: POLARON_FLOOR,
            });
        }
        horizon = (horizon * 1.5).min(POLARON_HORIZON);
    }
    let mut failure = None;
    let r = integrate(
        |t| match kernel(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                C64::new(0.0, 0.0)
            }
        },
        0.0,
        horizon,
        Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 2000,
        },
        "polaron rate time integral",
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value)
}

pub fn polaron_rates(b: &BathSpec, omega_el: f64) -> Result<PolaronRates> {
    if !(omega_el >= 0.0) {
        return Err(Error::Domain(format!(
            "polaron rates need omega_el >= 0, got {omega_el}"
        )));
    }
    if omega_el == 0.0 || b.alpha == 0.0 {
        return Ok(PolaronRates {
            l1: 0.0,
            l2: 0.0,
            l3: 0.0,
            lamb: 0.0,
        });
    }
    let integral = polaron_kernel_integral(b)?;
    let o2 = omega_el * omega_el;
    let l1 = o2 * integral.re;
    Ok(PolaronRates {
        l1,
        l2: l1,
        l3: 2.0 * l1,
        lamb: o2 * integral.im,
    })
}
