//! The three-level electronic system and its super-operators.
//!
//! Density matrices are vectorized row-major, `vec(ρ)[3a + b] = ρ_ab`, so that
//! `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`. A Liouville index `j = 3a + b` therefore
//! names the ket state `a` and the bra state `b`.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::bath::{reorganization_energy, BathSpec};
use crate::error::{Error, Result};
use crate::linalg::{kron, matrix_exp, C64, I, ONE, ZERO};

pub const DIM: usize = 3;
pub const LDIM: usize = DIM * DIM;

/// Eigenvalues of the coupling operator `|1⟩⟨1| − |2⟩⟨2|` on `|0⟩, |1⟩, |2⟩`.
pub const COUPLING: [f64; DIM] = [0.0, 1.0, -1.0];

pub const fn liouville_index(ket: usize, bra: usize) -> usize {
    ket * DIM + bra
}

/// `(o_ket − o_bra, o_ket + o_bra)` for a Liouville index.
pub fn coupling_diff_sum(j: usize) -> (f64, f64) {
    let (a, b) = (j / DIM, j % DIM);
    (COUPLING[a] - COUPLING[b], COUPLING[a] + COUPLING[b])
}

pub type LVec = [C64; LDIM];

pub fn vectorize(rho: MatRef<'_, C64>) -> LVec {
    let mut v = [ZERO; LDIM];
    for a in 0..DIM {
        for b in 0..DIM {
            v[liouville_index(a, b)] = rho[(a, b)];
        }
    }
    v
}

pub fn unvectorize(v: &LVec) -> Mat<C64> {
    Mat::from_fn(DIM, DIM, |a, b| v[liouville_index(a, b)])
}

/// Row vector `t` with `t · vec(ρ) = Tr ρ`.
pub fn trace_vector() -> LVec {
    let mut t = [ZERO; LDIM];
    for a in 0..DIM {
        t[liouville_index(a, a)] = ONE;
    }
    t
}

pub fn trace_of(v: &LVec) -> C64 {
    (0..DIM).map(|a| v[liouville_index(a, a)]).sum()
}

/// `|0⟩⟨0|`.
pub fn ground_state() -> Mat<C64> {
    Mat::from_fn(DIM, DIM, |a, b| if a == 0 && b == 0 { ONE } else { ZERO })
}

/// A linear map on vectorized 3×3 matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    matrix: Mat<C64>,
}

impl SuperOperator {
    pub fn from_matrix(matrix: Mat<C64>) -> Result<Self> {
        if matrix.nrows() != LDIM || matrix.ncols() != LDIM {
            return Err(Error::Shape(format!(
                "super-operator must be {LDIM}x{LDIM}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity() -> Self {
        Self {
            matrix: Mat::identity(LDIM, LDIM),
        }
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.matrix.as_ref()
    }

    pub fn apply(&self, v: &LVec) -> LVec {
        let mut out = [ZERO; LDIM];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (k, x) in v.iter().enumerate() {
                acc += self.matrix[(i, k)] * x;
            }
            *o = acc;
        }
        out
    }

    /// `self ∘ other`: apply `other` first.
    pub fn after(&self, other: &SuperOperator) -> SuperOperator {
        SuperOperator {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn scaled(&self, c: C64) -> SuperOperator {
        SuperOperator {
            matrix: Mat::from_fn(LDIM, LDIM, |i, k| self.matrix[(i, k)] * c),
        }
    }

    pub fn exp(&self) -> Result<SuperOperator> {
        Ok(SuperOperator {
            matrix: matrix_exp(self.matrix.as_ref())?,
        })
    }

    /// `t · M` where `t` is the trace row vector. Zero for trace-preserving
    /// generators.
    pub fn trace_row(&self) -> LVec {
        let t = trace_vector();
        let mut out = [ZERO; LDIM];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (0..LDIM).map(|i| t[i] * self.matrix[(i, k)]).sum();
        }
        out
    }
}

/// The system Hamiltonian
/// `H = (ε + λ)(|1⟩⟨1| + |2⟩⟨2|) + Ω(|1⟩⟨2| + |2⟩⟨1|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub epsilon: f64,
    pub omega_el: f64,
    pub reorg: f64,
}

impl SystemModel {
    pub fn new(epsilon: f64, omega_el: f64, reorg: f64) -> Result<Self> {
        if !(epsilon.is_finite() && omega_el.is_finite() && reorg.is_finite()) {
            return Err(Error::Validation("system parameters must be finite".into()));
        }
        if reorg < 0.0 {
            return Err(Error::Validation(format!(
                "reorganization energy must be >= 0, got {reorg}"
            )));
        }
        Ok(Self {
            epsilon,
            omega_el,
            reorg,
        })
    }

    /// Takes λ from the bath so the excited-state offset cannot be forgotten.
    pub fn with_bath(epsilon: f64, omega_el: f64, bath: &BathSpec) -> Result<Self> {
        Self::new(epsilon, omega_el, reorganization_energy(bath))
    }

    pub fn hamiltonian(&self) -> Mat<C64> {
        let e = C64::from(self.epsilon + self.reorg);
        let o = C64::from(self.omega_el);
        let mut h = Mat::zeros(DIM, DIM);
        h[(1, 1)] = e;
        h[(2, 2)] = e;
        h[(1, 2)] = o;
        h[(2, 1)] = o;
        h
    }

    /// `(E₋, E₊) = ε + λ ∓ Ω`.
    pub fn exciton_energies(&self) -> (f64, f64) {
        let c = self.epsilon + self.reorg;
        (c - self.omega_el.abs(), c + self.omega_el.abs())
    }

    /// `|+⟩` and `|−⟩` as 3-vectors.
    pub fn exciton_states() -> ([C64; DIM], [C64; DIM]) {
        let r = C64::from(std::f64::consts::FRAC_1_SQRT_2);
        ([ZERO, r, r], [ZERO, r, -r])
    }

    /// Numerical eigendecomposition: ascending eigenvalues and the matrix of
    /// eigenvectors as columns.
    pub fn eigen(&self) -> Result<(Vec<f64>, Mat<C64>)> {
        let h = self.hamiltonian();
        let e = h
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Numeric(format!("eigendecomposition failed: {e:?}")))?;
        let vals = (0..DIM).map(|i| e.S().column_vector()[i].re).collect();
        Ok((vals, e.U().to_owned()))
    }

    pub fn liouvillian(&self) -> SuperOperator {
        liouvillian(self.hamiltonian().as_ref()).expect("system Hamiltonian is Hermitian")
    }
}

fn hermiticity_defect(h: MatRef<'_, C64>) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..h.nrows() {
        for k in 0..h.ncols() {
            d = d.max((h[(i, k)] - h[(k, i)].conj()).norm());
        }
    }
    d
}

/// `L = −i(h ⊗ I − I ⊗ hᵀ)`, the generator of `ρ ↦ −i[h, ρ]`.
pub fn liouvillian(h: MatRef<'_, C64>) -> Result<SuperOperator> {
    if h.nrows() != DIM || h.ncols() != DIM {
        return Err(Error::Shape(format!(
            "Hamiltonian must be 3x3, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if hermiticity_defect(h) > 1e-12 {
        return Err(Error::Validation("Hamiltonian is not Hermitian".into()));
    }
    let id = Mat::<C64>::identity(DIM, DIM);
    let left = kron(h, id.as_ref());
    let right = kron(id.as_ref(), h.transpose());
    SuperOperator::from_matrix(Mat::from_fn(LDIM, LDIM, |i, k| {
        -I * (left[(i, k)] - right[(i, k)])
    }))
}

/// `exp(L dt/2)`.
pub fn half_step_propagator(s: &SystemModel, dt: f64) -> Result<SuperOperator> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
    }
    s.liouvillian().scaled(C64::from(0.5 * dt)).exp()
}

/// Which dipole transition an intervention applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    /// `V₂ = |0⟩⟨2| + |2⟩⟨0|`.
    V2,
}

impl FromStr for Transition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V2" | "v2" => Ok(Transition::V2),
            other => Err(Error::Config(format!("unknown transition {other:?}"))),
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::V2 => write!(f, "V2"),
        }
    }
}

/// Whether an operator multiplies the density matrix from the left or right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

pub fn dipole_operator(which: Transition) -> Mat<C64> {
    match which {
        Transition::V2 => {
            let mut v = Mat::zeros(DIM, DIM);
            v[(0, 2)] = ONE;
            v[(2, 0)] = ONE;
            v
        }
    }
}

/// Super-operator for `Vρ` (left) or `ρV` (right).
pub fn operator_superoperator(op: MatRef<'_, C64>, side: Side) -> Result<SuperOperator> {
    if op.nrows() != DIM || op.ncols() != DIM {
        return Err(Error::Shape("operator must be 3x3".into()));
    }
    let id = Mat::<C64>::identity(DIM, DIM);
    let m = match side {
        Side::L => kron(op, id.as_ref()),
        Side::R => kron(id.as_ref(), op.transpose()),
    };
    SuperOperator::from_matrix(m)
}

pub fn dipole_superoperator(which: Transition, side: Side) -> SuperOperator {
    operator_superoperator(dipole_operator(which).as_ref(), side).expect("dipole operator is 3x3")
}
