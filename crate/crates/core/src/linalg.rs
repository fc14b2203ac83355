//! Dense complex tensors and the three kernels the rest of the crate is built
//! on: pairwise contraction, truncated SVD and the matrix exponential.
//!
//! Tensors are stored row-major (last leg fastest). Contractions permute both
//! operands into matrix form and hand the product to `faer`; decompositions
//! are likewise delegated to `faer`.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub use num_complex::Complex64 as C64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A dense tensor of complex doubles with a fixed row-major layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero-sized leg in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {n} values but {} were given",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![ZERO; n])
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Result<Self> {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(shape, data)
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        debug_assert_eq!(idx.len(), self.shape.len());
        let off: usize = idx
            .iter()
            .zip(strides(&self.shape))
            .map(|(&i, s)| i * s)
            .sum();
        self.data[off]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Reorders the legs: leg `k` of the result is leg `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r
            || perm
                .iter()
                .any(|&p| p >= r || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::Shape(format!(
                "{perm:?} is not a permutation of {r} legs"
            )));
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let old_strides = strides(&self.shape);
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; r];
        let mut off = 0usize;
        for _ in 0..n {
            data.push(self.data[off]);
            for k in (0..r).rev() {
                idx[k] += 1;
                off += src_strides[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                off -= src_strides[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        Self::new(new_shape, data)
    }

    /// Views the tensor as a matrix whose rows run over the first `row_legs` legs.
    pub fn as_matrix(&self, row_legs: usize) -> MatRef<'_, C64> {
        let rows: usize = self.shape[..row_legs].iter().product();
        let cols: usize = self.shape[row_legs..].iter().product();
        MatRef::from_row_major_slice(&self.data, rows, cols)
    }

    /// Copies a matrix into a tensor with the given leg dimensions.
    pub fn from_matrix(m: MatRef<'_, C64>, shape: Vec<usize>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self::new(shape, data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Contracts `legs_a` of `a` with `legs_b` of `b` pairwise.
///
/// The result carries the unpaired legs of `a` (in order) followed by the
/// unpaired legs of `b`.
pub fn contract(
    a: &ComplexTensor,
    legs_a: &[usize],
    b: &ComplexTensor,
    legs_b: &[usize],
) -> Result<ComplexTensor> {
    if legs_a.len() != legs_b.len() {
        return Err(Error::Contraction(format!(
            "{} legs of a paired with {} legs of b",
            legs_a.len(),
            legs_b.len()
        )));
    }
    for (&la, &lb) in legs_a.iter().zip(legs_b) {
        if la >= a.rank() || lb >= b.rank() {
            return Err(Error::Contraction(format!(
                "leg pair ({la}, {lb}) out of range for ranks ({}, {})",
                a.rank(),
                b.rank()
            )));
        }
        if a.shape[la] != b.shape[lb] {
            return Err(Error::Contraction(format!(
                "leg {la} of a has dimension {} but leg {lb} of b has {}",
                a.shape[la], b.shape[lb]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|k| !legs_a.contains(k)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|k| !legs_b.contains(k)).collect();
    if free_a.len() + legs_a.len() != a.rank() || free_b.len() + legs_b.len() != b.rank() {
        return Err(Error::Contraction("a leg is paired twice".into()));
    }

    let perm_a: Vec<usize> = free_a.iter().chain(legs_a).copied().collect();
    let perm_b: Vec<usize> = legs_b.iter().chain(&free_b).copied().collect();
    let pa = a.permute(&perm_a)?;
    let pb = b.permute(&perm_b)?;

    let mut shape: Vec<usize> = free_a.iter().map(|&k| a.shape[k]).collect();
    shape.extend(free_b.iter().map(|&k| b.shape[k]));
    let prod = pa.as_matrix(free_a.len()) * pb.as_matrix(legs_b.len());
    if shape.is_empty() {
        return Ok(ComplexTensor::scalar(prod[(0, 0)]));
    }
    ComplexTensor::from_matrix(prod.as_ref(), shape)
}

/// Result of [`svd_truncate`]: `m ≈ left · diag(singular_values) · right`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub left: Mat<C64>,
    pub singular_values: Vec<f64>,
    /// Rows are the retained right singular vectors (already conjugated).
    pub right: Mat<C64>,
    /// Root-sum-square of the dropped singular values.
    pub discarded_weight: f64,
    /// Largest dropped singular value, zero when nothing was dropped.
    pub largest_discarded: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> Mat<C64> {
        let k = self.rank();
        let scaled = Mat::from_fn(self.left.nrows(), k, |i, j| {
            self.left[(i, j)] * self.singular_values[j]
        });
        &scaled * &self.right
    }
}

fn check_finite(m: MatRef<'_, C64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric(format!("non-finite entry at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Thin SVD keeping every singular value strictly above `eps_rel · σ_max`
/// (and always at least one).
pub fn svd_truncate(m: MatRef<'_, C64>, eps_rel: f64) -> Result<TruncatedSvd> {
    if !(eps_rel > 0.0 && eps_rel <= 1.0) {
        return Err(Error::Domain(format!(
            "eps_rel must lie in (0, 1], got {eps_rel}"
        )));
    }
    check_finite(m)?;
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("svd failed to converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let n = s.nrows();
    let smax = if n > 0 { s[0].re } else { 0.0 };
    let threshold = eps_rel * smax;
    let keep = (0..n)
        .take_while(|&i| s[i].re > threshold)
        .count()
        .max(1)
        .min(n);
    let dropped: Vec<f64> = (keep..n).map(|i| s[i].re).collect();
    let discarded_weight = dropped.iter().map(|x| x * x).sum::<f64>().sqrt();
    let largest_discarded = dropped.first().copied().unwrap_or(0.0);
    let u = svd.U();
    let v = svd.V();
    Ok(TruncatedSvd {
        left: u.subcols(0, keep).to_owned(),
        singular_values: (0..keep).map(|i| s[i].re).collect(),
        right: v.subcols(0, keep).adjoint().to_owned(),
        discarded_weight,
        largest_discarded,
    })
}

/// Thin QR factorisation, `m = q · r` with `q` having orthonormal columns.
pub fn thin_qr(m: MatRef<'_, C64>) -> (Mat<C64>, Mat<C64>) {
    let qr = m.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R().to_owned();
    (q, r)
}

fn norm_one(m: MatRef<'_, C64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068,
    5.371920351148152,
];

fn scaled(m: &Mat<C64>, c: f64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
}

fn add_diag(m: &mut Mat<C64>, c: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += c;
    }
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant (order chosen from the 1-norm, after Higham 2005).
pub fn matrix_exp(m: MatRef<'_, C64>) -> Result<Mat<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "matrix_exp needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m)?;
    let n = m.nrows();
    let a = m.to_owned();
    let norm = norm_one(m);
    let ident = Mat::<C64>::identity(n, n);

    let odd_even = |coeffs: &[f64], a: &Mat<C64>| -> (Mat<C64>, Mat<C64>) {
        // u = A · Σ b_{2k+1} A^{2k},  v = Σ b_{2k} A^{2k}
        let a2 = a * a;
        let mut pow = ident.clone();
        let mut u = Mat::<C64>::zeros(n, n);
        let mut v = Mat::<C64>::zeros(n, n);
        for k in 0..coeffs.len() / 2 {
            u += scaled(&pow, coeffs[2 * k + 1]);
            v += scaled(&pow, coeffs[2 * k]);
            pow = &pow * &a2;
        }
        (a * &u, v)
    };

    let (u, v, squarings) = if norm <= THETA[0] {
        let (u, v) = odd_even(&PADE3, &a);
        (u, v, 0)
    } else if norm <= THETA[1] {
        let (u, v) = odd_even(&PADE5, &a);
        (u, v, 0)
    } else if norm <= THETA[2] {
        let (u, v) = odd_even(&PADE7, &a);
        (u, v, 0)
    } else if norm <= THETA[3] {
        let (u, v) = odd_even(&PADE9, &a);
        (u, v, 0)
    } else {
        let s = ((norm / THETA[4]).log2().ceil()).max(0.0) as i32;
        let a = scaled(&a, 0.5f64.powi(s));
        let b = &PADE13;
        let a2 = &a * &a;
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let mut inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
        inner_u = &a6 * &inner_u;
        inner_u += scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]);
        add_diag(&mut inner_u, b[1]);
        let u = &a * &inner_u;
        let mut v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
        v = &a6 * &v;
        v += scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]);
        add_diag(&mut v, b[0]);
        (u, v, s)
    };

    let p = &v + &u;
    let q = &v - &u;
    let lu = q.partial_piv_lu();
    let mut r = lu.solve(&p);
    for _ in 0..squarings {
        r = &r * &r;
    }
    if !r.as_ref().is_all_finite() {
        return Err(Error::Numeric("matrix exponential overflowed".into()));
    }
    Ok(r)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| {
        a[(i / rb, j / cb)] * b[(i % rb, j % cb)]
    })
}

pub fn max_abs_diff(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    d
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: MatRef<'_, C64>) -> Result<f64> {
    let s = m
        .singular_values()
        .map_err(|e| Error::Numeric(format!("svd failed: {e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}
