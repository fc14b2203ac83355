//! Lindblad baselines: the weak-coupling (WCME) and polaron (PME) master
//! equations, with multi-time correlations by quantum regression.

use std::sync::Mutex;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{lamb_shift, phonon_propagator_diff, polaron_rates, wcme_rates, BathSpec};
use crate::dynamics::{CorrelationSeries, InterventionSchedule};
use crate::error::{Error, Result};
use crate::linalg::{kron, C64, ZERO};
use crate::system::{
    dipole_operator, liouvillian, trace_vector, vectorize, LVec, Side, SuperOperator, SystemModel,
    Transition, COUPLING, DIM, LDIM,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Wcme,
    Pme,
}

/// A Lindblad generator `−i[H, ρ] + Σ γ (LρL† − ½{L†L, ρ})`.
#[derive(Debug)]
pub struct LindbladModel {
    pub h_eff: Mat<C64>,
    pub jump_ops: Vec<(Mat<C64>, f64)>,
    pub flavor: Flavor,
    pub include_nonsecular: bool,
    generator: SuperOperator,
    /// Bath used for the polaron dressing of correlation functions.
    dressing_bath: Option<BathSpec>,
    dressing_cache: Mutex<Vec<(f64, Vec<C64>)>>,
}

fn projector(v: &[C64; DIM], w: &[C64; DIM]) -> Mat<C64> {
    Mat::from_fn(DIM, DIM, |i, k| v[i] * w[k].conj())
}

fn sandwich(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    // vec(AρB) = (A ⊗ Bᵀ) vec(ρ)
    kron(a, b.transpose())
}

fn dissipator(l: MatRef<'_, C64>, rate: f64) -> Mat<C64> {
    let id = Mat::<C64>::identity(DIM, DIM);
    let ldag = l.adjoint().to_owned();
    let ldl = &ldag * l;
    let jump = sandwich(l, ldag.as_ref());
    let left = kron(ldl.as_ref(), id.as_ref());
    let right = kron(id.as_ref(), ldl.transpose());
    Mat::from_fn(LDIM, LDIM, |i, k| {
        C64::from(rate) * (jump[(i, k)] - 0.5 * (left[(i, k)] + right[(i, k)]))
    })
}

impl LindbladModel {
    pub fn new(
        h_eff: Mat<C64>,
        jump_ops: Vec<(Mat<C64>, f64)>,
        nonsecular: Vec<(Mat<C64>, f64)>,
        flavor: Flavor,
        dressing_bath: Option<BathSpec>,
    ) -> Result<Self> {
        if jump_ops
            .iter()
            .chain(&nonsecular)
            .any(|(_, r)| !(*r >= 0.0 && r.is_finite()))
        {
            return Err(Error::Validation(
                "Lindblad rates must be finite and >= 0".into(),
            ));
        }
        let mut g = liouvillian(h_eff.as_ref())?.matrix().to_owned();
        for (l, r) in &jump_ops {
            if l.nrows() != DIM || l.ncols() != DIM {
                return Err(Error::Shape("jump operator must be 3x3".into()));
            }
            g += dissipator(l.as_ref(), *r);
        }
        for (l, r) in &nonsecular {
            let ldag = l.adjoint().to_owned();
            let a = sandwich(l.as_ref(), l.as_ref());
            let b = sandwich(ldag.as_ref(), ldag.as_ref());
            g += Mat::from_fn(LDIM, LDIM, |i, k| C64::from(*r) * (a[(i, k)] + b[(i, k)]));
        }
        Ok(Self {
            h_eff,
            jump_ops,
            flavor,
            include_nonsecular: !nonsecular.is_empty(),
            generator: SuperOperator::from_matrix(g)?,
            dressing_bath,
            dressing_cache: Mutex::new(Vec::new()),
        })
    }

    pub fn generator(&self) -> &SuperOperator {
        &self.generator
    }

    pub fn propagator(&self, t: f64) -> Result<SuperOperator> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!(
                "propagation time must be >= 0, got {t}"
            )));
        }
        self.generator.scaled(C64::from(t)).exp()
    }

    /// `Ψ(nδt) = −(φ(nδt) − φ(0))` for `n = 0..=n_max`, cached per δt.
    fn dressing_table(&self, b: &BathSpec, dt: f64, n_max: usize) -> Result<Vec<C64>> {
        {
            let cache = self.dressing_cache.lock().expect("dressing cache poisoned");
            if let Some((_, t)) = cache.iter().find(|(d, t)| *d == dt && t.len() > n_max) {
                return Ok(t.clone());
            }
        }
        let table = (0..=n_max)
            .into_par_iter()
            .map(|n| phonon_propagator_diff(b, n as f64 * dt).map(|v| -v))
            .collect::<Result<Vec<_>>>()?;
        let mut cache = self.dressing_cache.lock().expect("dressing cache poisoned");
        cache.retain(|(d, _)| *d != dt);
        cache.push((dt, table.clone()));
        Ok(table)
    }
}

/// Weak-coupling master equation in the exciton basis.
pub fn build_wcme(
    s: &SystemModel,
    b: &BathSpec,
    include_nonsecular: bool,
) -> Result<LindbladModel> {
    let omega = s.omega_el;
    if !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "the WCME needs omega_el > 0, got {omega}"
        )));
    }
    let (plus, minus) = SystemModel::exciton_states();
    let (e_minus, e_plus) = s.exciton_energies();
    let nu = 2.0 * omega;
    let s_minus = lamb_shift(b, -nu)?;
    let s_plus = lamb_shift(b, nu)?;
    let pm = projector(&minus, &minus);
    let pp = projector(&plus, &plus);
    let h = Mat::from_fn(DIM, DIM, |i, k| {
        C64::from(e_minus + s_minus) * pm[(i, k)] + C64::from(e_plus + s_plus) * pp[(i, k)]
    });
    let (g1, g2) = wcme_rates(b, omega)?;
    let l1 = projector(&minus, &plus);
    let l2 = projector(&plus, &minus);
    let jumps = vec![(l1, g1), (l2, g2)];
    let nonsecular = if include_nonsecular {
        jumps.clone()
    } else {
        Vec::new()
    };
    LindbladModel::new(h, jumps, nonsecular, Flavor::Wcme, None)
}

/// Polaron master equation. The renormalized coupling vanishes for the
/// Ohmic bath, so both excited levels sit at ε, split only by the polaron
/// Lamb shift.
pub fn build_pme(s: &SystemModel, b: &BathSpec) -> Result<LindbladModel> {
    let r = polaron_rates(b, s.omega_el)?;
    let (plus, minus) = SystemModel::exciton_states();
    let pm = projector(&minus, &minus);
    let pp = projector(&plus, &plus);
    let h = Mat::from_fn(DIM, DIM, |i, k| {
        C64::from(s.epsilon - r.lamb) * pm[(i, k)] + C64::from(s.epsilon + r.lamb) * pp[(i, k)]
    });
    let l3 = Mat::from_fn(DIM, DIM, |i, k| pm[(i, k)] - pp[(i, k)]);
    let jumps = vec![
        (projector(&minus, &plus), r.l1),
        (projector(&plus, &minus), r.l2),
        (l3, r.l3),
    ];
    let bath = if b.alpha > 0.0 { Some(*b) } else { None };
    LindbladModel::new(h, jumps, Vec::new(), Flavor::Pme, bath)
}

fn check_density(rho: MatRef<'_, C64>) -> Result<()> {
    // Same validation as a schedule's initial state.
    InterventionSchedule::new(Vec::new(), rho.to_owned(), None).map(|_| ())
}

/// `exp(G t) ρ`.
pub fn lindblad_propagate(m: &LindbladModel, rho: MatRef<'_, C64>, t: f64) -> Result<Mat<C64>> {
    check_density(rho)?;
    let v = m.propagator(t)?.apply(&vectorize(rho));
    Ok(crate::system::unvectorize(&v))
}

/// Coupling eigenvalue `(ket, bra)` history along the single path followed
/// by dipole interventions from the ground state.
fn coupling_segments(sched: &InterventionSchedule) -> Result<Vec<(usize, f64, f64)>> {
    let ground = crate::system::ground_state();
    if (sched.initial_state().to_owned() - &ground).norm_max() > 1e-12 {
        return Err(Error::Validation(
            "polaron dressing needs the ground initial state".into(),
        ));
    }
    let v2 = dipole_operator(Transition::V2);
    let mut ket = 0usize;
    let mut bra = 0usize;
    let mut out = vec![(0, 0.0, 0.0)];
    for e in sched.entries() {
        if (e.operator.clone() - &v2).norm_max() > 1e-12 {
            return Err(Error::Validation(
                "polaron dressing is defined for V2 interventions only".into(),
            ));
        }
        match e.side {
            Side::L => ket = 2 - ket,
            Side::R => bra = 2 - bra,
        }
        out.push((e.step, COUPLING[ket], COUPLING[bra]));
    }
    Ok(out)
}

/// `ln F` of the Gaussian influence functional for a piecewise-constant
/// coupling path ending at step `end`.
fn log_dressing(segs: &[(usize, f64, f64)], end: usize, psi: &[C64]) -> C64 {
    let bounds: Vec<(usize, usize, f64, f64)> = segs
        .iter()
        .enumerate()
        .map(|(i, &(start, p, m))| {
            let stop = segs.get(i + 1).map_or(end, |s| s.0);
            (start, stop, p, m)
        })
        .collect();
    let mut acc = ZERO;
    for (k, &(a, b, p, m)) in bounds.iter().enumerate() {
        let d = p - m;
        if d == 0.0 || a == b {
            continue;
        }
        let same = psi[b - a];
        acc -= d * (p * same - m * same.conj());
        for &(c, dd, pl, ml) in &bounds[..k] {
            if c == dd {
                continue;
            }
            let x = psi[b - c] - psi[b - dd] - psi[a - c] + psi[a - dd];
            acc -= d * (pl * x - ml * x.conj());
        }
    }
    acc
}

/// Quantum-regression correlation on the grid `M·dt`, `M` from the last
/// intervention to `n_steps`. PME results carry the polaron dressing.
pub fn me_multitime_correlation(
    m: &LindbladModel,
    sched: &InterventionSchedule,
    dt: f64,
    n_steps: usize,
) -> Result<CorrelationSeries> {
    let from = sched.last_step();
    if from > n_steps {
        return Err(Error::Schedule(format!(
            "intervention at step {from} lies beyond step {n_steps}"
        )));
    }
    let step = m.propagator(dt)?;
    let mut rho: LVec = vectorize(sched.initial_state());
    let mut entries = sched.entries().iter().peekable();
    let row = sched.readout_row();
    let dressing = match &m.dressing_bath {
        Some(b) => Some((coupling_segments(sched)?, m.dressing_table(b, dt, n_steps)?)),
        None => None,
    };
    let mut times = Vec::new();
    let mut values = Vec::new();
    for k in 0..=n_steps {
        if k > 0 {
            rho = step.apply(&rho);
        }
        while let Some(e) = entries.next_if(|e| e.step == k) {
            rho = e.superoperator().apply(&rho);
        }
        if k >= from {
            let mut v: C64 = rho.iter().zip(&row).map(|(x, r)| x * r).sum();
            if let Some((segs, psi)) = &dressing {
                v *= log_dressing(segs, k, psi).exp();
            }
            times.push(k as f64 * dt);
            values.push(v);
        }
    }
    Ok(CorrelationSeries { times, values })
}

/// Population ratio `p₊/p₋` of the excited manifold in a vectorized state.
pub fn exciton_population_ratio(rho: MatRef<'_, C64>) -> f64 {
    let (plus, minus) = SystemModel::exciton_states();
    let pop = |v: &[C64; DIM]| -> f64 {
        let mut acc = ZERO;
        for i in 0..DIM {
            for k in 0..DIM {
                acc += v[i].conj() * rho[(i, k)] * v[k];
            }
        }
        acc.re
    };
    pop(&plus) / pop(&minus)
}

#[allow(dead_code)]
fn trace_row_is_left_null(g: &SuperOperator) -> f64 {
    let t = trace_vector();
    let mm = g.matrix();
    (0..LDIM)
        .map(|k| (0..LDIM).map(|i| t[i] * mm[(i, k)]).sum::<C64>().norm())
        .fold(0.0, f64::max)
}
