//! Linear and two-dimensional spectra from correlation functions, and the
//! peak observables read off them.
//!
//! Conventions: `A(ω) = Re Σ_t w(t) R(t) e^{iωt} δt`. Rephasing pathways are
//! transformed with `e^{−iω_exc t₁}e^{+iω_det t₃}`, non-rephasing ones with
//! `e^{+iω_exc t₁}e^{+iω_det t₃}`, so every peak lands at positive frequencies.
//! The `t = 0` sample carries weight ½. Only `ω ≥ 0` is kept.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve_with_pt_until, CorrelationSeries, Intervention, InterventionSchedule,
};
use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::master_equations::{me_multitime_correlation, LindbladModel};
use crate::process_tensor::ProcessTensorMPO;
use crate::system::{dipole_operator, ground_state, Side, SystemModel, Transition};

/// Anything that can evaluate a time-ordered correlation on a step grid.
pub trait CorrelationEngine: Sync {
    fn name(&self) -> &str;
    fn dt(&self) -> f64;
    /// Largest final step the engine can reach.
    fn max_steps(&self) -> usize;
    /// `Tr[O ρ(M)]` for `M` from the last intervention to `to`.
    fn correlate(&self, sched: &InterventionSchedule, to: usize) -> Result<CorrelationSeries>;
}

pub struct PtEngine {
    pub pt: Arc<ProcessTensorMPO>,
    pub system: SystemModel,
}

impl CorrelationEngine for PtEngine {
    fn name(&self) -> &str {
        "pt"
    }
    fn dt(&self) -> f64 {
        self.pt.dt
    }
    fn max_steps(&self) -> usize {
        self.pt.n_steps
    }
    fn correlate(&self, sched: &InterventionSchedule, to: usize) -> Result<CorrelationSeries> {
        evolve_with_pt_until(&self.pt, &self.system, sched, to)
    }
}

pub struct MeEngine {
    pub model: LindbladModel,
    pub dt: f64,
    pub n_steps: usize,
}

impl CorrelationEngine for MeEngine {
    fn name(&self) -> &str {
        match self.model.flavor {
            crate::master_equations::Flavor::Wcme => "wcme",
            crate::master_equations::Flavor::Pme => "pme",
        }
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn max_steps(&self) -> usize {
        self.n_steps
    }
    fn correlate(&self, sched: &InterventionSchedule, to: usize) -> Result<CorrelationSeries> {
        me_multitime_correlation(&self.model, sched, self.dt, to)
    }
}

/// Uniform grid `0, spacing, …, (len−1)·spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub spacing: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(spacing: f64, len: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || len == 0 {
            return Err(Error::Validation(format!(
                "bad time grid: spacing {spacing}, length {len}"
            )));
        }
        Ok(Self { spacing, len })
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|i| i as f64 * self.spacing).collect()
    }

    /// Engine steps per grid point.
    fn stride(&self, dt: f64) -> Result<usize> {
        let r = self.spacing / dt;
        let k = r.round();
        if k < 1.0 || (r - k).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::Validation(format!(
                "grid spacing {} is not a multiple of the engine step {dt}",
                self.spacing
            )));
        }
        Ok(k as usize)
    }
}

fn v2(step: usize, side: Side) -> Intervention {
    Intervention::dipole(step, Transition::V2, side)
}

fn schedule(entries: Vec<Intervention>) -> InterventionSchedule {
    InterventionSchedule::new(
        entries,
        ground_state(),
        Some(dipole_operator(Transition::V2)),
    )
    .expect("dipole schedules from the ground state are valid")
}

fn check_reach(engine: &dyn CorrelationEngine, to: usize) -> Result<()> {
    if to > engine.max_steps() {
        return Err(Error::Validation(format!(
            "grid needs {to} steps but the {} engine holds {}",
            engine.name(),
            engine.max_steps()
        )));
    }
    Ok(())
}

/// `Tr[V(t)V(0)ρ₀]` on `grid`.
pub fn linear_response(
    engine: &dyn CorrelationEngine,
    grid: TimeGrid,
) -> Result<CorrelationSeries> {
    let stride = grid.stride(engine.dt())?;
    let to = (grid.len - 1) * stride;
    check_reach(engine, to)?;
    let full = engine.correlate(&schedule(vec![v2(0, Side::L)]), to)?;
    Ok(CorrelationSeries {
        times: grid.times(),
        values: full.values.iter().step_by(stride).copied().collect(),
    })
}

/// Operator sides at the first three pulses for each pathway.
pub const PATHWAY_SIDES: [[Side; 3]; 4] = [
    [Side::L, Side::R, Side::R],
    [Side::R, Side::L, Side::R],
    [Side::R, Side::R, Side::L],
    [Side::L, Side::L, Side::L],
];

/// Third-order responses at zero waiting time, rows indexed by `t₁` and
/// columns by `t₃`.
#[derive(Clone, Debug)]
pub struct ResponseSet {
    pub t1_grid: TimeGrid,
    pub t3_grid: TimeGrid,
    pub r: [Mat<C64>; 4],
}

impl ResponseSet {
    pub fn rephasing(&self) -> Mat<C64> {
        &self.r[1] + &self.r[2]
    }

    pub fn nonrephasing(&self) -> Mat<C64> {
        &self.r[0] + &self.r[3]
    }
}

pub fn response_pathways(
    engine: &dyn CorrelationEngine,
    t1: TimeGrid,
    t3: TimeGrid,
) -> Result<ResponseSet> {
    let s1 = t1.stride(engine.dt())?;
    let s3 = t3.stride(engine.dt())?;
    check_reach(engine, (t1.len - 1) * s1 + (t3.len - 1) * s3)?;
    let jobs: Vec<(usize, usize)> = (0..4)
        .flat_map(|p| (0..t1.len).map(move |i| (p, i)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(p, i)| {
            let sides = PATHWAY_SIDES[p];
            let m = i * s1;
            let sched = schedule(vec![v2(0, sides[0]), v2(m, sides[1]), v2(m, sides[2])]);
            let series = engine.correlate(&sched, m + (t3.len - 1) * s3)?;
            Ok(series
                .values
                .iter()
                .step_by(s3)
                .copied()
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let r = std::array::from_fn(|p| Mat::from_fn(t1.len, t3.len, |i, k| rows[p * t1.len + i][k]));
    Ok(ResponseSet {
        t1_grid: t1,
        t3_grid: t3,
        r,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    None,
    /// Right half of a raised cosine, `½(1 + cos(πt/T))`.
    HalfCosine,
}

/// Time-domain window and zero-padding factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Apodization {
    pub kind: WindowKind,
    pub pad_factor: usize,
}

impl Default for Apodization {
    fn default() -> Self {
        Self {
            kind: WindowKind::HalfCosine,
            pad_factor: 4,
        }
    }
}

impl Apodization {
    /// Weights including the ½ end correction at `t = 0`.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let w = match self.kind {
                    WindowKind::None => 1.0,
                    WindowKind::HalfCosine => 0.5 * (1.0 + (PI * i as f64 / n as f64).cos()),
                };
                if i == 0 {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect()
    }

    fn padded(&self, n: usize) -> Result<usize> {
        if self.pad_factor == 0 {
            return Err(Error::Validation("pad factor must be >= 1".into()));
        }
        Ok(n * self.pad_factor)
    }
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Validation(
            "a spectrum needs at least two samples".into(),
        ));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) || times[0].abs() > 1e-12 * dt {
        return Err(Error::Validation(
            "time grid must start at 0 and increase".into(),
        ));
    }
    for (i, t) in times.iter().enumerate() {
        if (t - i as f64 * dt).abs() > 1e-9 * dt.max(*t) {
            return Err(Error::Validation("time grid is not uniform".into()));
        }
    }
    Ok(dt)
}

/// Non-negative frequencies of a length-`p` transform with step `dt`.
fn frequencies(p: usize, dt: f64) -> Vec<f64> {
    (0..p.div_ceil(2))
        .map(|k| 2.0 * PI * k as f64 / (p as f64 * dt))
        .collect()
}

/// `Σ_t x(t) e^{iωt}` at the non-negative frequencies (unnormalized inverse DFT).
fn transform_plus(planner: &mut FftPlanner<f64>, x: &[C64], p: usize) -> Vec<C64> {
    let mut buf = vec![ZERO; p];
    buf[..x.len()].copy_from_slice(x);
    planner.plan_fft_inverse(p).process(&mut buf);
    buf
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum1D {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub window: Apodization,
}

/// Windowed, zero-padded `Σ_t w(t) R(t) e^{iωt} δt` on all `p` frequency bins.
pub fn windowed_transform(
    series: &CorrelationSeries,
    window: Apodization,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let dt = check_uniform(&series.times)?;
    let w = window.weights(series.len());
    let x: Vec<C64> = series
        .values
        .iter()
        .zip(&w)
        .map(|(v, w)| v * *w * dt)
        .collect();
    let p = window.padded(series.len())?;
    let mut planner = FftPlanner::new();
    let y = transform_plus(&mut planner, &x, p);
    Ok((x, y))
}

pub fn absorption_spectrum(series: &CorrelationSeries, window: Apodization) -> Result<Spectrum1D> {
    let dt = check_uniform(&series.times)?;
    let (_, y) = windowed_transform(series, window)?;
    let omega = frequencies(y.len(), dt);
    let values = y[..omega.len()].iter().map(|v| v.re).collect();
    Ok(Spectrum1D {
        omega,
        values,
        window,
    })
}

#[derive(Clone, Debug)]
pub struct Spectrum2D {
    pub w_exc: Vec<f64>,
    pub w_det: Vec<f64>,
    pub total: Mat<f64>,
    pub rephasing: Mat<C64>,
    pub nonrephasing: Mat<C64>,
    pub window: Apodization,
}

/// 2D transform of `data` (rows `t₁`): `e^{±iω₁t₁}` along rows as chosen,
/// `e^{+iω₃t₃}` along columns.
fn transform_2d(
    data: &Mat<C64>,
    w1: &[f64],
    w3: &[f64],
    d1: f64,
    d3: f64,
    p1: usize,
    p3: usize,
    flip: bool,
) -> Mat<C64> {
    let (n1, n3) = (data.nrows(), data.ncols());
    let mut planner = FftPlanner::new();
    let mut stage = vec![vec![ZERO; p3]; n1];
    for (i, row) in stage.iter_mut().enumerate() {
        let x: Vec<C64> = (0..n3)
            .map(|k| data[(i, k)] * (w1[i] * w3[k] * d1 * d3))
            .collect();
        *row = transform_plus(&mut planner, &x, p3);
    }
    let forward = planner.plan_fft_forward(p1);
    let inverse = planner.plan_fft_inverse(p1);
    let mut out = Mat::<C64>::zeros(p1, p3);
    let mut col = vec![ZERO; p1];
    for k in 0..p3 {
        col.iter_mut().for_each(|c| *c = ZERO);
        for i in 0..n1 {
            col[i] = stage[i][k];
        }
        if flip {
            forward.process(&mut col);
        } else {
            inverse.process(&mut col);
        }
        for i in 0..p1 {
            out[(i, k)] = col[i];
        }
    }
    out
}

pub fn spectrum_2d(rs: &ResponseSet, window: Apodization) -> Result<Spectrum2D> {
    plane_2d(rs, window, false)
}

/// Same transform on the whole plane, both axes running over signed
/// frequencies in increasing order. Useful for line shapes that spill past
/// zero frequency.
pub fn spectrum_2d_full(rs: &ResponseSet, window: Apodization) -> Result<Spectrum2D> {
    plane_2d(rs, window, true)
}

fn plane_2d(rs: &ResponseSet, window: Apodization, signed: bool) -> Result<Spectrum2D> {
    let (n1, n3) = (rs.t1_grid.len, rs.t3_grid.len);
    if n1 < 2 || n3 < 2 {
        return Err(Error::Validation(
            "2D spectra need at least two samples per axis".into(),
        ));
    }
    let (d1, d3) = (rs.t1_grid.spacing, rs.t3_grid.spacing);
    let (p1, p3) = (window.padded(n1)?, window.padded(n3)?);
    let w1 = window.weights(n1);
    let w3 = window.weights(n3);
    let reph = transform_2d(&rs.rephasing(), &w1, &w3, d1, d3, p1, p3, true);
    let non = transform_2d(&rs.nonrephasing(), &w1, &w3, d1, d3, p1, p3, false);
    // (frequency, bin) pairs along one axis
    let axis = |p: usize, dt: f64| -> Vec<(f64, usize)> {
        if signed {
            let lo = p as i64 / 2;
            (0..p as i64)
                .map(|j| {
                    let k = j - lo;
                    (
                        2.0 * PI * k as f64 / (p as f64 * dt),
                        k.rem_euclid(p as i64) as usize,
                    )
                })
                .collect()
        } else {
            frequencies(p, dt)
                .into_iter()
                .enumerate()
                .map(|(k, w)| (w, k))
                .collect()
        }
    };
    let (a1, a3) = (axis(p1, d1), axis(p3, d3));
    let rephasing = Mat::from_fn(a1.len(), a3.len(), |i, k| reph[(a1[i].1, a3[k].1)]);
    let nonrephasing = Mat::from_fn(a1.len(), a3.len(), |i, k| non[(a1[i].1, a3[k].1)]);
    let total = Mat::from_fn(a1.len(), a3.len(), |i, k| {
        rephasing[(i, k)].re + nonrephasing[(i, k)].re
    });
    Ok(Spectrum2D {
        w_exc: a1.iter().map(|a| a.0).collect(),
        w_det: a3.iter().map(|a| a.0).collect(),
        total,
        rephasing,
        nonrephasing,
        window,
    })
}

fn interp(xs: &[f64], ys: impl Fn(usize) -> f64, x: f64) -> Option<f64> {
    if xs.len() < 2 || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let h = xs[1] - xs[0];
    let i = (((x - xs[0]) / h).floor() as usize).min(xs.len() - 2);
    let f = (x - xs[i]) / h;
    Some(ys(i) * (1.0 - f) + ys(i + 1) * f)
}

impl Spectrum2D {
    /// Bilinear interpolation of the total spectrum; `None` off the grid.
    pub fn total_at(&self, w_exc: f64, w_det: f64) -> Option<f64> {
        let row = |i: usize| interp(&self.w_det, |k| self.total[(i, k)], w_det);
        let r: Vec<f64> = (0..self.w_exc.len())
            .map(|i| row(i).unwrap_or(f64::NAN))
            .collect();
        interp(&self.w_exc, |i| r[i], w_exc).filter(|v| v.is_finite())
    }

    /// `total(ω, ω)` sampled on the excitation grid.
    pub fn diagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, &w) in self.w_exc.iter().enumerate() {
            if let Some(v) = interp(&self.w_det, |k| self.total[(i, k)], w) {
                xs.push(w);
                ys.push(v);
            }
        }
        (xs, ys)
    }

    /// Full widths at half maximum through `(w0, w0)` along the diagonal and
    /// the anti-diagonal, measured in distance along each line. When one side
    /// leaves the non-negative frequency grid before reaching half maximum,
    /// the width is twice the half width on the other side.
    pub fn diagonal_widths(&self, w0: f64) -> Result<(f64, f64)> {
        let peak = self
            .total_at(w0, w0)
            .ok_or_else(|| Error::Validation("peak lies off the grid".into()))?;
        let h = 0.25 * (self.w_exc[1] - self.w_exc[0]).min(self.w_det[1] - self.w_det[0]);
        let half = |dir: (f64, f64), sign: f64| -> Option<f64> {
            let mut s = 0.0;
            let mut prev = peak;
            loop {
                let next = s + h;
                let v = self.total_at(w0 + sign * dir.0 * next, w0 + sign * dir.1 * next)?;
                if v <= 0.5 * peak {
                    return Some(s + h * (prev - 0.5 * peak) / (prev - v));
                }
                prev = v;
                s = next;
            }
        };
        let full = |dir: (f64, f64)| -> Result<f64> {
            match (half(dir, 1.0), half(dir, -1.0)) {
                (Some(a), Some(b)) => Ok(a + b),
                (Some(a), None) | (None, Some(a)) => Ok(2.0 * a),
                (None, None) => Err(Error::Validation(
                    "half maximum not reached on the grid".into(),
                )),
            }
        };
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Ok((full((r, r))?, full((r, -r))?))
    }
}

/// Peak position and height after parabolic refinement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub diagonal_peaks: Vec<Peak>,
    pub splitting: Option<f64>,
    pub cross_peaks_present: bool,
    pub amplitude_ratio: Option<f64>,
}

/// Local maxima whose topographic prominence is at least `prominence`
/// times the global maximum, sorted by position. The base is never taken
/// below zero, so dips between dispersive wings do not count.
pub fn find_peaks(xs: &[f64], ys: &[f64], prominence: f64) -> Vec<Peak> {
    let n = ys.len();
    if n < 3 {
        return Vec::new();
    }
    let gmax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(gmax > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 1..n - 1 {
        if !(ys[i] > ys[i - 1] && ys[i] >= ys[i + 1]) {
            continue;
        }
        // Lowest point on each side before reaching higher ground.
        let side_min = |range: &mut dyn Iterator<Item = usize>| -> f64 {
            let mut m = ys[i];
            for j in range {
                if ys[j] > ys[i] {
                    return m;
                }
                m = m.min(ys[j]);
            }
            m
        };
        let left = side_min(&mut (0..i).rev());
        let right = side_min(&mut (i + 1..n));
        let prom = ys[i] - left.max(right).max(0.0);
        if prom < prominence * gmax {
            continue;
        }
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom < 0.0 {
            0.5 * (a - c) / denom
        } else {
            0.0
        };
        let h = xs[1] - xs[0];
        out.push(Peak {
            position: xs[i] + shift * h,
            height: b - 0.25 * (a - c) * shift,
        });
    }
    out
}

fn two_largest(peaks: &[Peak]) -> Option<(Peak, Peak)> {
    if peaks.len() < 2 {
        return None;
    }
    let mut by_height = peaks.to_vec();
    by_height.sort_by(|a, b| b.height.total_cmp(&a.height));
    let (p, q) = (by_height[0], by_height[1]);
    Some(if p.position < q.position {
        (p, q)
    } else {
        (q, p)
    })
}

pub const DEFAULT_PROMINENCE: f64 = 0.05;

pub fn peak_analysis_1d(sp: &Spectrum1D, prominence: f64) -> PeakReport {
    let peaks = find_peaks(&sp.omega, &sp.values, prominence);
    report(peaks, false)
}

fn report(peaks: Vec<Peak>, cross: bool) -> PeakReport {
    let pair = two_largest(&peaks);
    PeakReport {
        splitting: pair.map(|(lo, hi)| hi.position - lo.position),
        amplitude_ratio: pair.map(|(lo, hi)| lo.height / hi.height),
        cross_peaks_present: cross && pair.is_some(),
        diagonal_peaks: peaks,
    }
}

pub fn peak_analysis_2d(sp: &Spectrum2D, prominence: f64) -> PeakReport {
    let (xs, ys) = sp.diagonal();
    let peaks = find_peaks(&xs, &ys, prominence);
    let cross = match two_largest(&peaks) {
        Some((lo, hi)) => {
            let gmax = sp
                .total
                .col_iter()
                .flat_map(|c| c.iter().copied().collect::<Vec<_>>())
                .fold(f64::NEG_INFINITY, f64::max);
            let radius = 0.25 * (hi.position - lo.position);
            has_local_max(sp, lo.position, hi.position, radius, prominence * gmax)
                && has_local_max(sp, hi.position, lo.position, radius, prominence * gmax)
        }
        None => false,
    };
    report(peaks, cross)
}

/// Whether a strict 2D local maximum above `floor` lies within `radius` of
/// `(we, wd)`.
fn has_local_max(sp: &Spectrum2D, we: f64, wd: f64, radius: f64, floor: f64) -> bool {
    let (m1, m3) = (sp.w_exc.len(), sp.w_det.len());
    for i in 1..m1 - 1 {
        if (sp.w_exc[i] - we).abs() > radius {
            continue;
        }
        for k in 1..m3 - 1 {
            if (sp.w_det[k] - wd).abs() > radius {
                continue;
            }
            let v = sp.total[(i, k)];
            if v < floor {
                continue;
            }
            let mut is_max = true;
            for di in [-1i64, 0, 1] {
                for dk in [-1i64, 0, 1] {
                    if (di, dk) != (0, 0)
                        && sp.total[((i as i64 + di) as usize, (k as i64 + dk) as usize)] >= v
                    {
                        is_max = false;
                    }
                }
            }
            if is_max {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathSpec;
    use crate::master_equations::build_wcme;
    use crate::process_tensor::build_pt_mpo;
    use proptest::prelude::*;

    fn series(n: usize, dt: f64, f: impl Fn(f64) -> C64) -> CorrelationSeries {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        CorrelationSeries {
            values: times.iter().map(|&t| f(t)).collect(),
            times,
        }
    }

    fn closed_engine(n: usize) -> PtEngine {
        let b = BathSpec::new(0.0, 3.04, 13.09).unwrap();
        PtEngine {
            pt: Arc::new(build_pt_mpo(&b, 0.1, n, n, 1e-8).unwrap()),
            system: SystemModel::new(5.0, 2.0, 0.0).unwrap(),
        }
    }

    #[test]
    fn single_tone_peak() {
        let s = series(64, 0.1, |t| C64::new(0.0, -4.2 * t).exp());
        let sp = absorption_spectrum(&s, Apodization::default()).unwrap();
        let bin = sp.omega[1];
        let r = peak_analysis_1d(&sp, DEFAULT_PROMINENCE);
        assert_eq!(r.diagonal_peaks.len(), 1);
        assert!((r.diagonal_peaks[0].position - 4.2).abs() < bin);
        assert!(r.splitting.is_none() && !r.cross_peaks_present);
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let mut s = series(10, 0.1, |_| C64::from(1.0));
        s.times[4] = 0.41;
        assert!(matches!(
            absorption_spectrum(&s, Apodization::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn closed_system_linear_spectrum() {
        let e = closed_engine(50);
        let r = linear_response(&e, TimeGrid::new(0.1, 51).unwrap()).unwrap();
        assert!((r.values[0] - 1.0).norm() < 1e-12);
        for (t, v) in r.times.iter().zip(&r.values) {
            assert!((v.norm() - (2.0 * t).cos().abs()).abs() < 1e-10);
        }
        let sp = absorption_spectrum(&r, Apodization::default()).unwrap();
        let rep = peak_analysis_1d(&sp, DEFAULT_PROMINENCE);
        assert_eq!(rep.diagonal_peaks.len(), 2);
        let bin = sp.omega[1];
        assert!((rep.diagonal_peaks[0].position - 3.0).abs() < bin);
        assert!((rep.diagonal_peaks[1].position - 7.0).abs() < bin);
        assert!((rep.amplitude_ratio.unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn pathways_collapse_at_origin_and_match_phase_sums() {
        let e = closed_engine(20);
        let g = TimeGrid::new(0.1, 11).unwrap();
        let rs = response_pathways(&e, g, g).unwrap();
        for p in 0..4 {
            assert!((rs.r[p][(0, 0)] - 1.0).norm() < 1e-12);
        }
        // Closed system with g(t) = ⟨2|e^{−iHt}|2⟩ = ½(e^{−7it} + e^{−3it}):
        // R₁ = g(t₁+t₃), R₂ = R₃ = g*(t₁)g(t₃), R₄ = g(t₁)g(t₃).
        let gf = |t: f64| (C64::new(0.0, -7.0 * t).exp() + C64::new(0.0, -3.0 * t).exp()) * 0.5;
        for i in 0..11 {
            for k in 0..11 {
                let (t1, t3) = (i as f64 * 0.1, k as f64 * 0.1);
                let expect = [
                    gf(t1 + t3),
                    gf(t1).conj() * gf(t3),
                    gf(t1).conj() * gf(t3),
                    gf(t1) * gf(t3),
                ];
                for p in 0..4 {
                    assert!(
                        (rs.r[p][(i, k)] - expect[p]).norm() < 1e-8,
                        "R{} at ({i}, {k})",
                        p + 1
                    );
                }
            }
        }
    }

    #[test]
    fn wcme_and_pt_agree_without_bath() {
        let b = BathSpec::new(0.0, 3.04, 13.09).unwrap();
        let s = SystemModel::new(5.0, 2.0, 0.0).unwrap();
        let me = MeEngine {
            model: build_wcme(&s, &b, false).unwrap(),
            dt: 0.1,
            n_steps: 20,
        };
        let pt = closed_engine(20);
        let g = TimeGrid::new(0.1, 11).unwrap();
        let a = response_pathways(&me, g, g).unwrap();
        let c = response_pathways(&pt, g, g).unwrap();
        for p in 0..4 {
            assert!((&a.r[p] - &c.r[p]).norm_max() < 1e-8);
        }
    }

    #[test]
    fn grid_must_match_engine_step() {
        let e = closed_engine(20);
        assert!(linear_response(&e, TimeGrid::new(0.15, 5).unwrap()).is_err());
        assert!(linear_response(&e, TimeGrid::new(0.2, 11).unwrap()).is_ok());
        assert!(linear_response(&e, TimeGrid::new(0.2, 12).unwrap()).is_err());
    }

    #[test]
    fn separable_input_gives_outer_product() {
        let g = TimeGrid::new(0.1, 16).unwrap();
        let f = |t: f64| C64::new(-0.3 * t, -5.0 * t).exp();
        let h = |t: f64| C64::new(-0.5 * t, -3.0 * t).exp();
        let zero = Mat::<C64>::zeros(16, 16);
        let prod = Mat::from_fn(16, 16, |i, k| f(i as f64 * 0.1) * h(k as f64 * 0.1));
        let rs = ResponseSet {
            t1_grid: g,
            t3_grid: g,
            r: [prod.clone(), zero.clone(), zero.clone(), zero],
        };
        let sp = spectrum_2d(&rs, Apodization::default()).unwrap();
        let w = Apodization::default();
        let fa = windowed_transform(&series(16, 0.1, f), w).unwrap().1;
        let ha = windowed_transform(&series(16, 0.1, h), w).unwrap().1;
        for i in 0..sp.w_exc.len() {
            for k in 0..sp.w_det.len() {
                assert!((sp.nonrephasing[(i, k)] - fa[i] * ha[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_lorentzian_diagonal() {
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
        let lor = |x: f64, c: f64, g: f64| g * g / ((x - c).powi(2) + g * g);
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| lor(x, 3.0, 0.4) + 0.6 * lor(x, 7.0, 0.3))
            .collect();
        let p = find_peaks(&xs, &ys, DEFAULT_PROMINENCE);
        assert_eq!(p.len(), 2);
        assert!((p[0].position - 3.0).abs() < 0.05);
        assert!((p[1].position - 7.0).abs() < 0.05);
        let r = report(p, false);
        assert!((r.splitting.unwrap() - 4.0).abs() < 0.05);
        assert!((r.amplitude_ratio.unwrap() - 1.0 / 0.6).abs() < 0.05);
    }

    #[test]
    fn negative_bump_is_not_a_peak() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let ys = [0.0, 1.0, -0.6, -0.2, -0.6, 1.0, 0.0];
        let p = find_peaks(&xs, &ys, DEFAULT_PROMINENCE);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn closed_system_2d_peaks() {
        let e = closed_engine(100);
        let g = TimeGrid::new(0.1, 50).unwrap();
        let rs = response_pathways(&e, g, g).unwrap();
        let sp = spectrum_2d(&rs, Apodization::default()).unwrap();
        let rep = peak_analysis_2d(&sp, DEFAULT_PROMINENCE);
        let bin = sp.w_exc[1];
        assert_eq!(rep.diagonal_peaks.len(), 2);
        assert!((rep.diagonal_peaks[0].position - 3.0).abs() < bin);
        assert!((rep.diagonal_peaks[1].position - 7.0).abs() < bin);
        assert!(rep.cross_peaks_present);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn parseval(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..40), pad in 1usize..5) {
            let n = vals.len();
            let s = CorrelationSeries {
                times: (0..n).map(|i| i as f64 * 0.1).collect(),
                values: vals.iter().map(|&(a, b)| C64::new(a, b)).collect(),
            };
            let w = Apodization { kind: WindowKind::HalfCosine, pad_factor: pad };
            let (x, y) = windowed_transform(&s, w).unwrap();
            let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
            prop_assert!((ex - ey).abs() <= 1e-10 * ex.max(1e-300));
        }

        #[test]
        fn shift_covariance(w0 in 2.0f64..6.0, shift in -1.5f64..1.5) {
            let dt = 0.1;
            let base = series(128, dt, |t| C64::new(-0.2 * t, -w0 * t).exp());
            let moved = series(128, dt, |t| C64::new(-0.2 * t, -(w0 + shift) * t).exp());
            let w = Apodization::default();
            let a = peak_analysis_1d(&absorption_spectrum(&base, w).unwrap(), DEFAULT_PROMINENCE);
            let sp = absorption_spectrum(&moved, w).unwrap();
            let b = peak_analysis_1d(&sp, DEFAULT_PROMINENCE);
            prop_assert_eq!(a.diagonal_peaks.len(), 1);
            prop_assert_eq!(b.diagonal_peaks.len(), 1);
            let moved_by = b.diagonal_peaks[0].position - a.diagonal_peaks[0].position;
            prop_assert!((moved_by - shift).abs() < sp.omega[1]);
        }

        #[test]
        fn total_spectrum_is_real_sum(seed in 0u64..1000) {
            let g = TimeGrid::new(0.1, 6).unwrap();
            let mk = |k: u64| Mat::from_fn(6, 6, |i, j| {
                let x = ((seed + k) as f64 * 0.37 + i as f64 * 1.3 + j as f64 * 0.7).sin();
                C64::new(x, (x * 3.1).cos())
            });
            let rs = ResponseSet { t1_grid: g, t3_grid: g, r: [mk(1), mk(2), mk(3), mk(4)] };
            let sp = spectrum_2d(&rs, Apodization::default()).unwrap();
            for i in 0..sp.w_exc.len() {
                for k in 0..sp.w_det.len() {
                    let s = sp.rephasing[(i, k)] + sp.nonrephasing[(i, k)];
                    prop_assert!((sp.total[(i, k)] - s.re).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn full_plane_contains_half_plane(seed in 0u64..1000, n in 3usize..9) {
            let g = TimeGrid::new(0.1, n).unwrap();
            let mk = |k: u64| Mat::from_fn(n, n, |i, j| {
                let x = ((seed + k) as f64 * 0.53 + i as f64 * 0.9 + j as f64 * 1.7).cos();
                C64::new(x, (x * 2.3).sin())
            });
            let rs = ResponseSet { t1_grid: g, t3_grid: g, r: [mk(1), mk(2), mk(3), mk(4)] };
            let half = spectrum_2d(&rs, Apodization::default()).unwrap();
            let full = spectrum_2d_full(&rs, Apodization::default()).unwrap();
            prop_assert!(full.w_exc.windows(2).all(|w| w[1] > w[0]));
            let z = full.w_exc.iter().position(|&w| w == 0.0).unwrap();
            for i in 0..half.w_exc.len() {
                prop_assert!((full.w_exc[z + i] - half.w_exc[i]).abs() < 1e-12);
                for k in 0..half.w_det.len() {
                    prop_assert_eq!(full.total[(z + i, z + k)], half.total[(i, k)]);
                }
            }
        }
    }
}
