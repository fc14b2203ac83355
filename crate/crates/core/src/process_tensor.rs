//! Construction, storage and loading of the process tensor as a matrix
//! product operator (PT-MPO).
//!
//! Site `m` carries the bath influence acting during time step `m`. Every
//! bath tensor is diagonal in the system Liouville index, so a site is stored
//! as a three-leg array `A[l, j, r]` (left bond, system index, right bond);
//! [`ProcessTensorMPO::site_tensor`] expands it to four legs when needed.
//!
//! The network is grown one time step at a time. Step `m` appends a new site
//! and attaches the influence functions `I_k` linking it to each of the
//! previous `K` sites. The value of `d` at step `m` (five possible values)
//! travels as an extra bond index through the intermediate sites. These
//! factors are folded in by a truncating left-to-right (zip-up) pass over the
//! memory window, followed by a truncating SVD sweep back.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use faer::{Mat, MatRef};
use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::bath::{autocorrelation, eta_coefficients, BathSpec, EtaCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{svd_truncate, thin_qr, ComplexTensor, C64, ONE, ZERO};
use crate::system::{coupling_diff_sum, LDIM};

pub const MAGIC: &[u8; 6] = b"PTMPO1";
pub const FORMAT_VERSION: u32 = 1;

/// Possible values of `d = o_ket − o_bra`.
const CHANNELS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Liouville index `(0, 0)`: d = s = 0, so every influence factor touching
/// it equals one. Used to close the chain beyond the final time.
const NEUTRAL: usize = 0;

fn channel_of(d: f64) -> usize {
    (d + 2.0).round() as usize
}

/// `x_k(j) = Re η_k · d_j + i Im η_k · s_j`.
fn exponent(eta: C64, j: usize) -> C64 {
    let (d, s) = coupling_diff_sum(j);
    C64::new(eta.re * d, eta.im * s)
}

/// `I_k(j, j′) = exp[−d_j (Re η_k d_{j′} + i Im η_k s_{j′})]` where `j`
/// labels the later of the two time steps.
pub fn influence_function(eta: &EtaCoefficients, k: usize, j: usize, jp: usize) -> Result<C64> {
    if k > eta.kmax() {
        return Err(Error::Domain(format!(
            "memory distance {k} beyond the {} available coefficients",
            eta.values.len()
        )));
    }
    if j >= LDIM || jp >= LDIM {
        return Err(Error::Domain(format!(
            "Liouville index out of range: ({j}, {jp})"
        )));
    }
    let (d, _) = coupling_diff_sum(j);
    Ok((-exponent(eta.values[k], jp) * d).exp())
}

/// One MPO site, diagonal in the system index: `A[l, j, r]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    left: usize,
    right: usize,
    data: Vec<C64>,
}

impl Site {
    fn new(left: usize, right: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), left * LDIM * right);
        Self { left, right, data }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, l: usize, j: usize, r: usize) -> C64 {
        self.data[(l * LDIM + j) * self.right + r]
    }

    /// Rows grouped as `(l, j)`, columns `r`.
    fn as_left_matrix(&self) -> MatRef<'_, C64> {
        MatRef::from_row_major_slice(&self.data, self.left * LDIM, self.right)
    }

    /// Rows `l`, columns grouped as `(j, r)`.
    fn as_right_matrix(&self) -> MatRef<'_, C64> {
        MatRef::from_row_major_slice(&self.data, self.left, LDIM * self.right)
    }
}

fn row_major(m: MatRef<'_, C64>) -> Vec<C64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for k in 0..m.ncols() {
            v.push(m[(i, k)]);
        }
    }
    v
}

/// Tuning knobs for [`build_pt_mpo_with`].
#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Abort with a resource error once a bond exceeds this dimension.
    pub max_bond: usize,
    /// Fold the new influence functions in with a single truncating
    /// left-to-right pass. When false, the expanded window is first brought
    /// into canonical form with a full QR sweep (slower, same result within
    /// the truncation level).
    pub zip_up: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_bond: 4096,
            zip_up: true,
        }
    }
}

/// Bookkeeping gathered while building.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BuildStats {
    pub peak_bond_dim: usize,
    pub discarded_weight: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ProcessTensorMPO {
    pub dt: f64,
    pub n_steps: usize,
    pub dkmax: usize,
    pub eps_rel: f64,
    /// `None` when built from externally supplied η coefficients.
    pub bath: Option<BathSpec>,
    sites: Vec<Site>,
    stats: BuildStats,
    caps: OnceLock<Vec<Vec<C64>>>,
}

impl PartialEq for ProcessTensorMPO {
    fn eq(&self, o: &Self) -> bool {
        self.dt == o.dt
            && self.n_steps == o.n_steps
            && self.dkmax == o.dkmax
            && self.eps_rel == o.eps_rel
            && self.bath == o.bath
            && self.sites == o.sites
    }
}

impl ProcessTensorMPO {
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, m: usize) -> &Site {
        &self.sites[m]
    }

    pub fn stats(&self) -> BuildStats {
        self.stats
    }

    /// `[1, χ_1, …, χ_{n−1}, 1]`.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.sites.iter().map(|s| s.left).collect();
        v.push(self.sites.last().map_or(1, |s| s.right));
        v
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Site `m` as a four-leg tensor `(bond-in, system-in, bond-out, system-out)`.
    pub fn site_tensor(&self, m: usize) -> Result<ComplexTensor> {
        let s = self
            .sites
            .get(m)
            .ok_or_else(|| Error::Domain(format!("no site {m}")))?;
        ComplexTensor::from_fn(vec![s.left, LDIM, s.right, LDIM], |ix| {
            if ix[1] == ix[3] {
                s.at(ix[0], ix[1], ix[2])
            } else {
                ZERO
            }
        })
    }

    /// `caps[m]` closes the chain after site `m − 1`: it is the contraction of
    /// sites `m..n` with every system index set to the neutral `(0, 0)`.
    /// `caps[n_steps] = [1]`.
    pub fn caps(&self) -> &[Vec<C64>] {
        self.caps.get_or_init(|| {
            let n = self.sites.len();
            let mut caps = vec![Vec::new(); n + 1];
            caps[n] = vec![ONE];
            for m in (0..n).rev() {
                let s = &self.sites[m];
                let next = &caps[m + 1];
                caps[m] = (0..s.left)
                    .map(|l| (0..s.right).map(|r| s.at(l, NEUTRAL, r) * next[r]).sum())
                    .collect();
            }
            caps
        })
    }

    fn from_parts(
        dt: f64,
        n_steps: usize,
        dkmax: usize,
        eps_rel: f64,
        bath: Option<BathSpec>,
        sites: Vec<Site>,
        stats: BuildStats,
    ) -> Self {
        Self {
            dt,
            n_steps,
            dkmax,
            eps_rel,
            bath,
            sites,
            stats,
            caps: OnceLock::new(),
        }
    }
}

fn validate_numerics(dt: f64, eps_rel: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation(format!("dt must be > 0, got {dt}")));
    }
    if !(eps_rel > 0.0 && eps_rel <= 1.0) {
        return Err(Error::Validation(format!(
            "eps_rel must lie in (0, 1], got {eps_rel}"
        )));
    }
    Ok(())
}

/// Memory length actually used: `min(dkmax, n_steps − 1)`.
pub fn effective_memory(n_steps: usize, dkmax: usize) -> usize {
    dkmax.min(n_steps.saturating_sub(1))
}

pub fn build_pt_mpo(
    b: &BathSpec,
    dt: f64,
    n_steps: usize,
    dkmax: usize,
    eps_rel: f64,
) -> Result<ProcessTensorMPO> {
    build_pt_mpo_with(b, dt, n_steps, dkmax, eps_rel, &BuildOptions::default())
}

pub fn build_pt_mpo_with(
    b: &BathSpec,
    dt: f64,
    n_steps: usize,
    dkmax: usize,
    eps_rel: f64,
    opts: &BuildOptions,
) -> Result<ProcessTensorMPO> {
    b.validate()?;
    validate_numerics(dt, eps_rel)?;
    let n_steps = guard_steps(n_steps);
    if b.alpha > 0.0 {
        let reach = dkmax as f64 * dt;
        let c0 = autocorrelation(b, 0.0)?.norm();
        let c = autocorrelation(b, reach)?.norm();
        if c > 1e-3 * c0 {
            warn!(
                "memory cutoff dkmax*dt = {reach:.3} ps is shorter than the bath memory time \
                 (|C| still {:.2e} of its maximum)",
                c / c0
            );
        }
    }
    let eta = eta_coefficients(b, dt, effective_memory(n_steps, dkmax))?;
    build_from_eta(&eta, n_steps, dkmax, eps_rel, Some(*b), opts)
}

fn guard_steps(n_steps: usize) -> usize {
    if n_steps == 0 {
        warn!("n_steps = 0 requested; building a single-step process tensor instead");
        1
    } else {
        n_steps
    }
}

/// Builds the PT-MPO from precomputed memory-kernel coefficients. `eta` must
/// hold at least `min(dkmax, n_steps − 1) + 1` values.
pub fn build_from_eta(
    eta: &EtaCoefficients,
    n_steps: usize,
    dkmax: usize,
    eps_rel: f64,
    bath: Option<BathSpec>,
    opts: &BuildOptions,
) -> Result<ProcessTensorMPO> {
    validate_numerics(eta.dt, eps_rel)?;
    let n_steps = guard_steps(n_steps);
    let kmax = effective_memory(n_steps, dkmax);
    if eta.values.len() < kmax + 1 {
        return Err(Error::Validation(format!(
            "{} eta coefficients supplied but memory length {kmax} needs {}",
            eta.values.len(),
            kmax + 1
        )));
    }
    let start_time = Instant::now();
    if eta.values[..=kmax].iter().all(|v| *v == ZERO) {
        // Decoupled bath: skip the sweeps so each site is exactly the identity.
        let sites = vec![Site::new(1, 1, vec![ONE; LDIM]); n_steps];
        let stats = BuildStats {
            peak_bond_dim: 1,
            ..BuildStats::default()
        };
        return Ok(ProcessTensorMPO::from_parts(
            eta.dt, n_steps, dkmax, eps_rel, bath, sites, stats,
        ));
    }
    let x: Vec<[C64; LDIM]> = (0..=kmax)
        .map(|k| std::array::from_fn(|j| exponent(eta.values[k], j)))
        .collect();

    let mut sites: Vec<Site> = Vec::with_capacity(n_steps);
    let mut centre = 0usize;
    let mut stats = BuildStats {
        peak_bond_dim: 1,
        ..BuildStats::default()
    };

    for m in 0..n_steps {
        let start = m.saturating_sub(kmax);
        // Self-interaction within step m, routed by the channel d_j.
        let diag: [C64; LDIM] = std::array::from_fn(|j| {
            let (d, _) = coupling_diff_sum(j);
            (-x[0][j] * d).exp()
        });
        if start == m {
            sites.push(Site::new(1, 1, diag.to_vec()));
            if m > 0 {
                // No memory: the chain is a product of independent sites.
                centre = m;
            }
            continue;
        }
        let mut fresh = vec![ZERO; CHANNELS.len() * LDIM];
        for j in 0..LDIM {
            let (d, _) = coupling_diff_sum(j);
            fresh[channel_of(d) * LDIM + j] = diag[j];
        }
        sites.push(Site::new(CHANNELS.len(), 1, fresh));

        let factors = |i: usize| -> [[C64; LDIM]; 5] {
            let k = m - i;
            std::array::from_fn(|a| std::array::from_fn(|j| (-x[k][j] * CHANNELS[a]).exp()))
        };
        if opts.zip_up {
            for i in centre..start {
                qr_step(&mut sites, i);
            }
            stats.discarded_weight += zip_window(&mut sites, start, m, factors, eps_rel)?;
        } else {
            for i in start..m {
                let e = factors(i);
                sites[i] = if i == start {
                    expand_oldest(&sites[i], &e)
                } else {
                    expand_middle(&sites[i], &e)
                };
            }
            for i in centre..m {
                qr_step(&mut sites, i);
            }
        }
        for i in (start + 1..=m).rev() {
            let w = svd_step(&mut sites, i, eps_rel)?;
            stats.discarded_weight += w;
        }
        centre = start;

        let peak = sites.iter().map(|s| s.left.max(s.right)).max().unwrap_or(1);
        stats.peak_bond_dim = stats.peak_bond_dim.max(peak);
        if peak > opts.max_bond {
            return Err(Error::Resource {
                message: format!(
                    "bond dimension exceeded the limit {} at step {m}",
                    opts.max_bond
                ),
                peak_bond_dim: peak,
            });
        }
        if m % 10 == 0 {
            debug!(
                "step {m}/{n_steps}: max bond {peak}, {:.1} s",
                start_time.elapsed().as_secs_f64()
            );
        }
    }
    stats.seconds = start_time.elapsed().as_secs_f64();
    info!(
        "built PT with {n_steps} steps, memory {kmax}, max bond {} in {:.2} s",
        sites.iter().map(|s| s.right).max().unwrap_or(1),
        stats.seconds
    );
    Ok(ProcessTensorMPO::from_parts(
        eta.dt, n_steps, dkmax, eps_rel, bath, sites, stats,
    ))
}

/// Oldest site in the window: opens the channel on its right bond.
fn expand_oldest(s: &Site, e: &[[C64; LDIM]; 5]) -> Site {
    let nc = CHANNELS.len();
    let r2 = s.right * nc;
    let mut data = vec![ZERO; s.left * LDIM * r2];
    for l in 0..s.left {
        for j in 0..LDIM {
            for r in 0..s.right {
                let v = s.at(l, j, r);
                let base = (l * LDIM + j) * r2 + r * nc;
                for a in 0..nc {
                    data[base + a] = v * e[a][j];
                }
            }
        }
    }
    Site::new(s.left, r2, data)
}

/// Intermediate site: passes the channel from left to right bond.
fn expand_middle(s: &Site, e: &[[C64; LDIM]; 5]) -> Site {
    let nc = CHANNELS.len();
    let (l2, r2) = (s.left * nc, s.right * nc);
    let mut data = vec![ZERO; l2 * LDIM * r2];
    for l in 0..s.left {
        for a in 0..nc {
            let row = l * nc + a;
            for j in 0..LDIM {
                let f = e[a][j];
                let base = (row * LDIM + j) * r2;
                for r in 0..s.right {
                    data[base + r * nc + a] = s.at(l, j, r) * f;
                }
            }
        }
    }
    Site::new(l2, r2, data)
}

/// Applies the channel expansion of the window `start..m` site by site,
/// carrying the singular-value remainder to the right. Sites `start + 1..m`
/// must be right-orthonormal on entry; afterwards `start..m` are
/// left-orthonormal and site `m` holds the norm.
fn zip_window(
    sites: &mut [Site],
    start: usize,
    m: usize,
    factors: impl Fn(usize) -> [[C64; LDIM]; 5],
    eps: f64,
) -> Result<f64> {
    let nc = CHANNELS.len();
    let mut discarded = 0.0;
    // Rows `k`, columns `(r, a)` of the previous site's right bond.
    let mut carry: Option<Mat<C64>> = None;
    for i in start..m {
        let e = factors(i);
        let s = &sites[i];
        let t = match &carry {
            None => Mat::from_fn(s.left * LDIM, s.right * nc, |row, col| {
                let (j, a) = (row % LDIM, col % nc);
                s.at(row / LDIM, j, col / nc) * e[a][j]
            }),
            Some(c) => {
                let k = c.nrows();
                let mut t = Mat::<C64>::zeros(k * LDIM, s.right * nc);
                for (a, ea) in e.iter().enumerate() {
                    let ca = Mat::from_fn(k, s.left, |p, l| c[(p, l * nc + a)]);
                    let pa: Mat<C64> = &ca * s.as_right_matrix();
                    for p in 0..k {
                        for (j, f) in ea.iter().enumerate() {
                            for r in 0..s.right {
                                t[(p * LDIM + j, r * nc + a)] = pa[(p, j * s.right + r)] * f;
                            }
                        }
                    }
                }
                t
            }
        };
        let tr = svd_truncate(t.as_ref(), eps)?;
        discarded += tr.discarded_weight;
        let rank = tr.rank();
        sites[i] = Site::new(t.nrows() / LDIM, rank, row_major(tr.left.as_ref()));
        carry = Some(Mat::from_fn(rank, t.ncols(), |p, q| {
            tr.right[(p, q)] * tr.singular_values[p]
        }));
    }
    let c = carry.expect("window holds at least two sites");
    let last = &sites[m];
    let merged: Mat<C64> = &c * last.as_right_matrix();
    sites[m] = Site::new(c.nrows(), last.right, row_major(merged.as_ref()));
    Ok(discarded)
}

/// Left-orthonormalize site `i`, pushing the remainder into site `i + 1`.
fn qr_step(sites: &mut [Site], i: usize) {
    let (q, r) = thin_qr(sites[i].as_left_matrix());
    let k = q.ncols();
    let left = sites[i].left;
    sites[i] = Site::new(left, k, row_major(q.as_ref()));
    let next = &sites[i + 1];
    let merged: Mat<C64> = &r * next.as_right_matrix();
    sites[i + 1] = Site::new(k, next.right, row_major(merged.as_ref()));
}

/// Truncate the bond left of site `i`, leaving site `i` right-orthonormal.
fn svd_step(sites: &mut [Site], i: usize, eps_rel: f64) -> Result<f64> {
    let t = svd_truncate(sites[i].as_right_matrix(), eps_rel)?;
    let k = t.rank();
    let right = sites[i].right;
    sites[i] = Site::new(k, right, row_major(t.right.as_ref()));
    let us = Mat::from_fn(t.left.nrows(), k, |a, b| {
        t.left[(a, b)] * t.singular_values[b]
    });
    let prev = &sites[i - 1];
    let merged: Mat<C64> = prev.as_left_matrix() * &us;
    sites[i - 1] = Site::new(prev.left, k, row_major(merged.as_ref()));
    Ok(t.discarded_weight)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    dt: f64,
    n_steps: usize,
    dkmax: usize,
    eps_rel: f64,
    bath: Option<BathSpec>,
    bond_dims: Vec<usize>,
    endianness: String,
    site_layout: String,
}

const LAYOUT: &str = "left,system,right;diagonal in system legs;complex f64 as (re, im)";

/// Serializes a PT into the self-describing binary container.
pub fn encode_pt(pt: &ProcessTensorMPO) -> Result<Vec<u8>> {
    let header = Header {
        version: FORMAT_VERSION,
        dt: pt.dt,
        n_steps: pt.n_steps,
        dkmax: pt.dkmax,
        eps_rel: pt.eps_rel,
        bath: pt.bath,
        bond_dims: pt.bond_dims(),
        endianness: "little".into(),
        site_layout: LAYOUT.into(),
    };
    let json = serde_json::to_vec(&header)?;
    let payload: usize = pt.sites.iter().map(|s| s.data.len()).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + 16 * payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for s in &pt.sites {
        for v in &s.data {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pt(bytes: &[u8]) -> Result<ProcessTensorMPO> {
    let fail = |m: &str| Error::Format(m.to_string());
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(fail("missing PTMPO1 magic"));
    }
    let mut len = [0u8; 8];
    len.copy_from_slice(&bytes[MAGIC.len()..MAGIC.len() + 8]);
    let hlen = u64::from_le_bytes(len) as usize;
    let body = MAGIC.len() + 8;
    let hend = body
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| fail("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[body..hend])
        .map_err(|e| fail(&format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(fail(&format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            header.version
        )));
    }
    if header.endianness != "little" {
        return Err(fail("only little-endian payloads are supported"));
    }
    let dims = &header.bond_dims;
    if header.n_steps == 0 || dims.len() != header.n_steps + 1 {
        return Err(fail(&format!(
            "{} bond dimensions declared for {} steps",
            dims.len(),
            header.n_steps
        )));
    }
    if dims[0] != 1 || dims[header.n_steps] != 1 || dims.contains(&0) {
        return Err(fail(
            "edge bond dimensions must be 1 and inner ones positive",
        ));
    }
    if let Some(b) = &header.bath {
        b.validate()?;
    }
    let expected: usize = dims.windows(2).map(|w| w[0] * LDIM * w[1]).sum();
    if bytes.len() - hend != 16 * expected {
        return Err(fail(&format!(
            "payload holds {} bytes but the declared bond dimensions need {}",
            bytes.len() - hend,
            16 * expected
        )));
    }
    let mut cursor = hend;
    let mut read = || {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[cursor..cursor + 8]);
        cursor += 8;
        f64::from_le_bytes(b)
    };
    let mut sites = Vec::with_capacity(header.n_steps);
    for w in dims.windows(2) {
        let n = w[0] * LDIM * w[1];
        let data = (0..n)
            .map(|_| {
                let re = read();
                C64::new(re, read())
            })
            .collect();
        sites.push(Site::new(w[0], w[1], data));
    }
    Ok(ProcessTensorMPO::from_parts(
        header.dt,
        header.n_steps,
        header.dkmax,
        header.eps_rel,
        header.bath,
        sites,
        BuildStats {
            peak_bond_dim: dims.iter().copied().max().unwrap_or(1),
            ..BuildStats::default()
        },
    ))
}

pub fn save_pt(pt: &ProcessTensorMPO, path: &Path) -> Result<()> {
    let bytes = encode_pt(pt)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn load_pt(path: &Path) -> Result<ProcessTensorMPO> {
    decode_pt(&fs::read(path)?)
}
