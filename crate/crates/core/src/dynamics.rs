//! Multi-time correlation functions from a PT-MPO and system propagators,
//! plus a brute-force Hilbert-space oracle with a few discrete bath modes.
//!
//! Each time step is `K · PT site · K` with `K` the half-step system
//! propagator. Interventions at step `M_p` act after step `M_p` is complete
//! and before the next half step; those at step 0 act before any
//! propagation. Interventions sharing a step apply in list order.

use faer::{Mat, MatRef};
use log::warn;
use rayon::prelude::*;

use crate::bath::Mode;
use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};
use crate::process_tensor::ProcessTensorMPO;
use crate::system::{
    half_step_propagator, operator_superoperator, trace_vector, vectorize, LVec, Side,
    SuperOperator, SystemModel, COUPLING, DIM, LDIM,
};

/// One operator insertion at the end of step `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct Intervention {
    pub step: usize,
    pub operator: Mat<C64>,
    pub side: Side,
}

impl Intervention {
    pub fn new(step: usize, operator: Mat<C64>, side: Side) -> Result<Self> {
        if operator.nrows() != DIM || operator.ncols() != DIM {
            return Err(Error::Shape("intervention operator must be 3x3".into()));
        }
        Ok(Self {
            step,
            operator,
            side,
        })
    }

    pub fn dipole(step: usize, which: crate::system::Transition, side: Side) -> Self {
        Self {
            step,
            operator: crate::system::dipole_operator(which),
            side,
        }
    }

    pub fn superoperator(&self) -> SuperOperator {
        operator_superoperator(self.operator.as_ref(), self.side).expect("checked 3x3")
    }
}

/// Time-ordered interventions, the initial system state and the operator
/// measured at the final time (`Tr[O ρ(M)]`, plain trace when absent).
#[derive(Clone, Debug, PartialEq)]
pub struct InterventionSchedule {
    entries: Vec<Intervention>,
    initial_state: Mat<C64>,
    readout: Option<Mat<C64>>,
}

fn check_density(rho: MatRef<'_, C64>) -> Result<()> {
    if rho.nrows() != DIM || rho.ncols() != DIM {
        return Err(Error::Validation("initial state must be 3x3".into()));
    }
    let mut tr = ZERO;
    for a in 0..DIM {
        tr += rho[(a, a)];
        for b in 0..DIM {
            if (rho[(a, b)] - rho[(b, a)].conj()).norm() > 1e-12 {
                return Err(Error::Validation("initial state is not Hermitian".into()));
            }
        }
    }
    if (tr - ONE).norm() > 1e-12 {
        return Err(Error::Validation(format!("initial state has trace {tr}")));
    }
    let eig = rho
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigenvalues failed: {e:?}")))?;
    if eig.iter().any(|&l| l < -1e-12) {
        return Err(Error::Validation(
            "initial state is not positive semidefinite".into(),
        ));
    }
    Ok(())
}

impl InterventionSchedule {
    pub fn new(
        entries: Vec<Intervention>,
        initial_state: Mat<C64>,
        readout: Option<Mat<C64>>,
    ) -> Result<Self> {
        check_density(initial_state.as_ref())?;
        if entries.windows(2).any(|w| w[1].step < w[0].step) {
            return Err(Error::Schedule(
                "intervention steps must be non-decreasing".into(),
            ));
        }
        if let Some(o) = &readout {
            if o.nrows() != DIM || o.ncols() != DIM {
                return Err(Error::Shape("readout operator must be 3x3".into()));
            }
        }
        Ok(Self {
            entries,
            initial_state,
            readout,
        })
    }

    pub fn entries(&self) -> &[Intervention] {
        &self.entries
    }

    pub fn initial_state(&self) -> MatRef<'_, C64> {
        self.initial_state.as_ref()
    }

    pub fn readout(&self) -> Option<MatRef<'_, C64>> {
        self.readout.as_ref().map(|m| m.as_ref())
    }

    /// Step of the last intervention (0 when there are none).
    pub fn last_step(&self) -> usize {
        self.entries.last().map_or(0, |e| e.step)
    }

    /// Row vector `r` with `r · vec(ρ) = Tr[O ρ]`.
    pub fn readout_row(&self) -> LVec {
        match &self.readout {
            None => trace_vector(),
            Some(o) => {
                let mut r = [ZERO; LDIM];
                // Tr[Oρ] = Σ_ab O_ba ρ_ab
                for a in 0..DIM {
                    for b in 0..DIM {
                        r[a * DIM + b] = o[(b, a)];
                    }
                }
                r
            }
        }
    }

    /// Copy with entry `index` moved to `step`, checking time order.
    pub fn with_entry_at(&self, index: usize, step: usize) -> Result<Self> {
        if index >= self.entries.len() {
            return Err(Error::Schedule(format!("no intervention {index}")));
        }
        let mut entries = self.entries.clone();
        entries[index].step = step;
        if entries.windows(2).any(|w| w[1].step < w[0].step) {
            return Err(Error::Schedule(format!(
                "moving intervention {index} to step {step} breaks time ordering"
            )));
        }
        Ok(Self {
            entries,
            ..self.clone()
        })
    }
}

/// Values of a correlation function on the final-time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
}

impl CorrelationSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn apply_super(m: &SuperOperator, state: &mut [C64]) {
    let mm = m.matrix();
    for row in state.chunks_exact_mut(LDIM) {
        let v: LVec = row.try_into().expect("chunk of LDIM");
        for (i, out) in row.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (k, x) in v.iter().enumerate() {
                acc += mm[(i, k)] * x;
            }
            *out = acc;
        }
    }
}

/// Reduced states `ρ(M)` for `M = from..=to` (vectorized), obtained by
/// contracting the PT with system propagators and the interventions.
pub fn reduced_states_with_pt(
    pt: &ProcessTensorMPO,
    s: &SystemModel,
    sched: &InterventionSchedule,
    from: usize,
    to: usize,
) -> Result<Vec<LVec>> {
    if to > pt.n_steps {
        return Err(Error::Schedule(format!(
            "final step {to} lies beyond the {} steps of the process tensor",
            pt.n_steps
        )));
    }
    if sched.last_step() > to {
        return Err(Error::Schedule(format!(
            "intervention at step {} lies beyond the final step {to}",
            sched.last_step()
        )));
    }
    let k = half_step_propagator(s, pt.dt)?;
    let caps = pt.caps();
    let supers: Vec<(usize, SuperOperator)> = sched
        .entries()
        .iter()
        .map(|e| (e.step, e.superoperator()))
        .collect();
    let mut next_entry = 0;
    let mut state: Vec<C64> = vectorize(sched.initial_state()).to_vec();
    let mut bond = 1usize;
    let mut out = Vec::with_capacity(to + 1 - from.min(to));

    let apply_due = |state: &mut Vec<C64>, step: usize, next_entry: &mut usize| {
        while *next_entry < supers.len() && supers[*next_entry].0 == step {
            apply_super(&supers[*next_entry].1, state);
            *next_entry += 1;
        }
    };
    let read = |state: &[C64], bond: usize, cap: &[C64]| -> LVec {
        let mut rho = [ZERO; LDIM];
        for b in 0..bond {
            let c = cap[b];
            for j in 0..LDIM {
                rho[j] += c * state[b * LDIM + j];
            }
        }
        rho
    };

    apply_due(&mut state, 0, &mut next_entry);
    if from == 0 {
        out.push(read(&state, bond, &caps[0]));
    }
    for m in 0..to {
        apply_super(&k, &mut state);
        let site = pt.site(m);
        let r = site.right();
        let data = site.data();
        let mut next = vec![ZERO; r * LDIM];
        for b in 0..bond {
            for j in 0..LDIM {
                let x = state[b * LDIM + j];
                if x == ZERO {
                    continue;
                }
                let row = &data[(b * LDIM + j) * r..(b * LDIM + j + 1) * r];
                for (bp, a) in row.iter().enumerate() {
                    next[bp * LDIM + j] += x * a;
                }
            }
        }
        state = next;
        bond = r;
        apply_super(&k, &mut state);
        apply_due(&mut state, m + 1, &mut next_entry);
        if m + 1 >= from {
            out.push(read(&state, bond, &caps[m + 1]));
        }
    }
    Ok(out)
}

fn series_from_states(
    states: &[LVec],
    first_step: usize,
    dt: f64,
    row: &LVec,
) -> CorrelationSeries {
    CorrelationSeries {
        times: (0..states.len())
            .map(|i| (first_step + i) as f64 * dt)
            .collect(),
        values: states
            .iter()
            .map(|rho| rho.iter().zip(row).map(|(x, r)| x * r).sum())
            .collect(),
    }
}

/// `Tr[O ρ(M)]` for every `M` from the last intervention to the end of the PT.
pub fn evolve_with_pt(
    pt: &ProcessTensorMPO,
    s: &SystemModel,
    sched: &InterventionSchedule,
) -> Result<CorrelationSeries> {
    evolve_with_pt_until(pt, s, sched, pt.n_steps)
}

/// As [`evolve_with_pt`], stopping at step `to`.
pub fn evolve_with_pt_until(
    pt: &ProcessTensorMPO,
    s: &SystemModel,
    sched: &InterventionSchedule,
    to: usize,
) -> Result<CorrelationSeries> {
    let from = sched.last_step();
    let states = reduced_states_with_pt(pt, s, sched, from, to)?;
    Ok(series_from_states(
        &states,
        from,
        pt.dt,
        &sched.readout_row(),
    ))
}

/// Rows of [`evolve_with_pt`] with entry `which_entry` moved to each step in
/// `steps`. Rows are evaluated concurrently.
pub fn sweep_intervention(
    pt: &ProcessTensorMPO,
    s: &SystemModel,
    sched: &InterventionSchedule,
    which_entry: usize,
    steps: std::ops::Range<usize>,
) -> Result<Vec<CorrelationSeries>> {
    let scheds = steps
        .map(|st| sched.with_entry_at(which_entry, st))
        .collect::<Result<Vec<_>>>()?;
    scheds
        .par_iter()
        .map(|sc| evolve_with_pt(pt, s, sc))
        .collect()
}

/// Exact evolution of the system together with a few truncated harmonic
/// modes, `H = H_S + Σ ω_k b†b + O Σ g_k (b_k + b_k†)`, each mode starting in
/// its thermal state at `temperature`. Returns the same series as
/// [`evolve_with_pt`] would on `n_steps` steps of size `dt`.
pub fn exact_few_mode_oracle(
    s: &SystemModel,
    modes: &[Mode],
    temperature: f64,
    fock_cut: usize,
    sched: &InterventionSchedule,
    dt: f64,
    n_steps: usize,
) -> Result<CorrelationSeries> {
    let from = sched.last_step();
    let states =
        few_mode_reduced_states(s, modes, temperature, fock_cut, sched, dt, from, n_steps)?;
    Ok(series_from_states(&states, from, dt, &sched.readout_row()))
}

#[allow(clippy::too_many_arguments)]
pub fn few_mode_reduced_states(
    s: &SystemModel,
    modes: &[Mode],
    temperature: f64,
    fock_cut: usize,
    sched: &InterventionSchedule,
    dt: f64,
    from: usize,
    to: usize,
) -> Result<Vec<LVec>> {
    if modes.len() > 4 || fock_cut == 0 || fock_cut > 8 {
        return Err(Error::Domain(
            "oracle supports at most 4 modes and Fock cutoffs 1..=8".into(),
        ));
    }
    if !(dt > 0.0 && temperature > 0.0) {
        return Err(Error::Domain(
            "oracle needs dt > 0 and temperature > 0".into(),
        ));
    }
    if sched.last_step() > to {
        return Err(Error::Schedule("intervention beyond the final step".into()));
    }
    let nb: usize = fock_cut.pow(modes.len() as u32);
    let dim = DIM * nb;
    let occupation = |n: usize, k: usize| (n / fock_cut.pow(k as u32)) % fock_cut;
    let stride = |k: usize| fock_cut.pow(k as u32);

    let hs = s.hamiltonian();
    let mut h = Mat::<C64>::zeros(dim, dim);
    for a in 0..DIM {
        for b in 0..DIM {
            if hs[(a, b)] != ZERO {
                for n in 0..nb {
                    h[(a * nb + n, b * nb + n)] += hs[(a, b)];
                }
            }
        }
        for n in 0..nb {
            let i = a * nb + n;
            for (k, m) in modes.iter().enumerate() {
                let nk = occupation(n, k);
                h[(i, i)] += C64::from(m.omega * nk as f64);
                if COUPLING[a] != 0.0 && nk + 1 < fock_cut {
                    let j = i + stride(k);
                    let v = C64::from(COUPLING[a] * m.g * ((nk + 1) as f64).sqrt());
                    h[(i, j)] += v;
                    h[(j, i)] += v;
                }
            }
        }
    }

    // Thermal occupation of each truncated mode.
    let mut pops = vec![1.0; nb];
    for (k, m) in modes.iter().enumerate() {
        let w: Vec<f64> = (0..fock_cut)
            .map(|n| (-(n as f64) * m.omega / temperature).exp())
            .collect();
        let z: f64 = w.iter().sum();
        let top = w[fock_cut - 1] / z;
        if top > 1e-4 {
            warn!(
                "oracle mode {k}: {top:.2e} of the thermal population sits in the top Fock level"
            );
        }
        for (n, p) in pops.iter_mut().enumerate() {
            *p *= w[occupation(n, k)] / z;
        }
    }
    let rs = sched.initial_state();
    let mut rho = Mat::<C64>::zeros(dim, dim);
    for a in 0..DIM {
        for b in 0..DIM {
            for n in 0..nb {
                rho[(a * nb + n, b * nb + n)] = rs[(a, b)] * pops[n];
            }
        }
    }

    let eig = h
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numeric(format!("oracle eigendecomposition failed: {e:?}")))?;
    let v = eig.U();
    let lam = eig.S().column_vector();
    let phases = Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::new(0.0, -lam[i].re * dt).exp()
        } else {
            ZERO
        }
    });
    let u = v * &phases * v.adjoint();
    let u_dag = u.adjoint().to_owned();

    let apply = |rho: &Mat<C64>, op: MatRef<'_, C64>, side: Side| -> Mat<C64> {
        Mat::from_fn(dim, dim, |i, j| {
            let (a, n) = (i / nb, i % nb);
            let (c, m) = (j / nb, j % nb);
            let mut acc = ZERO;
            for b in 0..DIM {
                acc += match side {
                    Side::L => op[(a, b)] * rho[(b * nb + n, j)],
                    Side::R => rho[(i, b * nb + m)] * op[(b, c)],
                };
            }
            acc
        })
    };
    let reduce = |rho: &Mat<C64>| -> LVec {
        let mut out = [ZERO; LDIM];
        for a in 0..DIM {
            for b in 0..DIM {
                out[a * DIM + b] = (0..nb).map(|n| rho[(a * nb + n, b * nb + n)]).sum();
            }
        }
        out
    };

    let entries = sched.entries();
    let mut next = 0;
    let mut out = Vec::new();
    for m in 0..=to {
        if m > 0 {
            rho = &u * &rho * &u_dag;
        }
        while next < entries.len() && entries[next].step == m {
            rho = apply(&rho, entries[next].operator.as_ref(), entries[next].side);
            next += 1;
        }
        if m >= from {
            out.push(reduce(&rho));
        }
    }
    Ok(out)
}
