//! Batch driver behind the `ptspec run` command.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bath::{eigenstate_splitting, BathSpec};
use crate::config::{EngineKind, Format, RunConfig, SpectrumConfig, Task};
use crate::dynamics::{Intervention, InterventionSchedule};
use crate::error::{Error, Result};
use crate::master_equations::{build_pme, build_wcme};
use crate::process_tensor::{build_pt_mpo, load_pt, save_pt, ProcessTensorMPO, FORMAT_VERSION};
use crate::spectroscopy::{
    absorption_spectrum, linear_response, peak_analysis_1d, peak_analysis_2d, response_pathways,
    spectrum_2d, CorrelationEngine, MeEngine, PeakReport, PtEngine, Spectrum2D, TimeGrid,
};
use crate::system::{dipole_operator, ground_state, Side, SystemModel, Transition};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub pt_cache: Option<PathBuf>,
    /// Replaces the configured engines when non-empty.
    pub engines: Vec<EngineKind>,
    pub output: Option<PathBuf>,
    pub force_rebuild_pt: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    pub pt_files: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub wall_times: BTreeMap<String, f64>,
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Cache file name for a PT built from these parameters.
pub fn pt_cache_name(b: &BathSpec, dt: f64, n_steps: usize, dkmax: usize, eps_rel: f64) -> String {
    let key = serde_json::json!({
        "version": FORMAT_VERSION,
        "bath": b,
        "dt": dt,
        "n_steps": n_steps,
        "dkmax": dkmax,
        "eps_rel": eps_rel,
    });
    format!("pt-{}.ptmpo", &sha256_hex(key.to_string().as_bytes())[..16])
}

struct Run {
    cfg: RunConfig,
    out_dir: PathBuf,
    cache: Option<PathBuf>,
    force: bool,
    outputs: Vec<FileRecord>,
    pt_files: Vec<FileRecord>,
    wall: BTreeMap<String, f64>,
}

impl Run {
    fn write(&mut self, name: &str, content: &[u8]) -> Result<()> {
        fs::write(self.out_dir.join(name), content)?;
        self.outputs.push(FileRecord {
            file: name.to_string(),
            sha256: sha256_hex(content),
        });
        Ok(())
    }

    fn write_csv(&mut self, name: &str, content: String, plot: Option<String>) -> Result<()> {
        self.write(name, content.as_bytes())?;
        if let Some(p) = plot {
            if self.cfg.output.formats.contains(&Format::Plt) {
                let stem = name.trim_end_matches(".csv");
                self.write(&format!("{stem}.plt"), p.as_bytes())?;
            }
        }
        Ok(())
    }

    fn time(&mut self, label: String, since: Instant) {
        *self.wall.entry(label).or_insert(0.0) += since.elapsed().as_secs_f64();
    }

    fn pt(&mut self, b: &BathSpec, eps_rel: f64) -> Result<Arc<ProcessTensorMPO>> {
        let n = self.cfg.numerics;
        let start = Instant::now();
        let name = pt_cache_name(b, n.dt, n.n_steps, n.dkmax, eps_rel);
        let path = self.cache.as_ref().map(|d| d.join(&name));
        let pt = match &path {
            Some(p) if p.exists() && !self.force => {
                info!("loading cached PT {}", p.display());
                let pt = load_pt(p)?;
                if pt.n_steps != n.n_steps
                    || pt.dkmax != n.dkmax
                    || pt.dt != n.dt
                    || pt.eps_rel != eps_rel
                    || pt.bath.as_ref() != Some(b)
                {
                    return Err(Error::Format(format!(
                        "cached PT {} does not match the requested parameters",
                        p.display()
                    )));
                }
                pt
            }
            _ => {
                let pt = build_pt_mpo(b, n.dt, n.n_steps, n.dkmax, eps_rel)?;
                if let Some(p) = &path {
                    if let Some(dir) = p.parent() {
                        fs::create_dir_all(dir)?;
                    }
                    save_pt(&pt, p)?;
                }
                pt
            }
        };
        if let Some(p) = &path {
            self.pt_files.push(FileRecord {
                file: p.display().to_string(),
                sha256: sha256_hex(&fs::read(p)?),
            });
        }
        self.time(format!("pt T={} eps={eps_rel:e}", b.temperature), start);
        Ok(Arc::new(pt))
    }

    fn engine(&mut self, kind: EngineKind, b: &BathSpec) -> Result<Box<dyn CorrelationEngine>> {
        let c = self.cfg.system;
        let n = self.cfg.numerics;
        let dressed = SystemModel::with_bath(c.epsilon, c.omega_el, b)?;
        Ok(match kind {
            EngineKind::Pt => Box::new(PtEngine {
                pt: self.pt(b, n.eps_rel)?,
                system: dressed,
            }),
            EngineKind::Wcme => Box::new(MeEngine {
                model: build_wcme(&dressed, b, false)?,
                dt: n.dt,
                n_steps: n.n_steps,
            }),
            EngineKind::Pme => Box::new(MeEngine {
                model: build_pme(&SystemModel::new(c.epsilon, c.omega_el, 0.0)?, b)?,
                dt: n.dt,
                n_steps: n.n_steps,
            }),
        })
    }

    fn spectrum_config(&self) -> SpectrumConfig {
        self.cfg.spectrum.expect("validated")
    }

    fn grid(&self) -> Result<TimeGrid> {
        let s = self.spectrum_config();
        TimeGrid::new(s.stride as f64 * self.cfg.numerics.dt, s.points)
    }

    fn spectrum2d(&mut self, engine: &dyn CorrelationEngine) -> Result<Spectrum2D> {
        let g = self.grid()?;
        let start = Instant::now();
        let rs = response_pathways(engine, g, g)?;
        let sp = spectrum_2d(&rs, self.spectrum_config().window)?;
        self.time(format!("pathways {}", engine.name()), start);
        Ok(sp)
    }
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn plot_1d(csv: &str, ylabel: &str) -> String {
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'omega (1/ps)'\nset ylabel '{ylabel}'\nplot '{csv}' using 1:2 with lines\n"
    )
}

fn plot_2d(csv: &str) -> String {
    format!(
        "set datafile separator ','\nset xlabel 'omega_exc (1/ps)'\nset ylabel 'omega_det (1/ps)'\nset view map\nset dgrid3d\nsplot '{csv}' every ::1 using 1:2:3 with pm3d notitle\n"
    )
}

#[derive(Serialize)]
struct PeakFile {
    #[serde(flatten)]
    report: PeakReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagonal_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    antidiagonal_width: Option<f64>,
}

fn spectrum2d_csv(sp: &Spectrum2D) -> String {
    let mut s = String::from("omega_exc,omega_det,value\n");
    for (i, we) in sp.w_exc.iter().enumerate() {
        for (k, wd) in sp.w_det.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", num(*we), num(*wd), num(sp.total[(i, k)]));
        }
    }
    s
}

fn peak_file_2d(sp: &Spectrum2D, prominence: f64) -> PeakFile {
    let report = peak_analysis_2d(sp, prominence);
    let strongest = report
        .diagonal_peaks
        .iter()
        .max_by(|a, b| a.height.total_cmp(&b.height))
        .copied();
    let widths = strongest.and_then(|p| sp.diagonal_widths(p.position).ok());
    PeakFile {
        report,
        diagonal_width: widths.map(|w| w.0),
        antidiagonal_width: widths.map(|w| w.1),
    }
}

fn r4_schedule(t1: usize) -> Result<InterventionSchedule> {
    let v = |step| Intervention::dipole(step, Transition::V2, Side::L);
    InterventionSchedule::new(
        vec![v(0), v(t1), v(t1)],
        ground_state(),
        Some(dipole_operator(Transition::V2)),
    )
}

/// Runs one configuration and writes every output file plus the manifest.
pub fn run(opts: &RunOptions) -> Result<Manifest> {
    let started = Instant::now();
    let config_bytes = fs::read(&opts.config)?;
    let mut cfg = RunConfig::from_json(
        std::str::from_utf8(&config_bytes).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    if !opts.engines.is_empty() {
        cfg.engines = opts.engines.clone();
    }
    cfg.engines.sort();
    cfg.engines.dedup();
    if let Some(o) = &opts.output {
        cfg.output.directory = o.clone();
    }
    cfg.validate()?;
    let out_dir = cfg.output.directory.clone();
    fs::create_dir_all(&out_dir)?;
    let mut run = Run {
        cfg: cfg.clone(),
        out_dir,
        cache: opts.pt_cache.clone(),
        force: opts.force_rebuild_pt,
        outputs: Vec::new(),
        pt_files: Vec::new(),
        wall: BTreeMap::new(),
    };
    let b = cfg.bath;
    match cfg.task {
        Task::Linear => {
            for &kind in &cfg.engines {
                let e = run.engine(kind, &b)?;
                let start = Instant::now();
                let series = linear_response(e.as_ref(), run.grid()?)?;
                let sc = run.spectrum_config();
                let sp = absorption_spectrum(&series, sc.window)?;
                run.time(format!("linear {}", kind.name()), start);
                let mut csv = String::from("omega,absorbance\n");
                for (w, a) in sp.omega.iter().zip(&sp.values) {
                    let _ = writeln!(csv, "{},{}", num(*w), num(*a));
                }
                let name = format!("linear_{}.csv", kind.name());
                run.write_csv(&name, csv, Some(plot_1d(&name, "absorbance")))?;
                let peaks = PeakFile {
                    report: peak_analysis_1d(&sp, sc.prominence),
                    diagonal_width: None,
                    antidiagonal_width: None,
                };
                run.write(
                    &format!("peaks_{}.json", kind.name()),
                    &serde_json::to_vec_pretty(&peaks)?,
                )?;
            }
        }
        Task::Spectrum2d => {
            for &kind in &cfg.engines {
                let e = run.engine(kind, &b)?;
                let sp = run.spectrum2d(e.as_ref())?;
                let name = format!("spectrum2d_{}.csv", kind.name());
                run.write_csv(&name, spectrum2d_csv(&sp), Some(plot_2d(&name)))?;
                let peaks = peak_file_2d(&sp, run.spectrum_config().prominence);
                run.write(
                    &format!("peaks_{}.json", kind.name()),
                    &serde_json::to_vec_pretty(&peaks)?,
                )?;
            }
        }
        Task::Correlation => {
            let cc = cfg.correlation.clone().expect("validated");
            let sched = r4_schedule(cc.t1_steps)?;
            for &kind in &cfg.engines {
                let e = run.engine(kind, &b)?;
                let r = e.correlate(&sched, cfg.numerics.n_steps)?;
                let mut csv = String::from("t4,re,im\n");
                for (t, v) in r.times.iter().zip(&r.values) {
                    let _ = writeln!(csv, "{},{},{}", num(*t), num(v.re), num(v.im));
                }
                run.write_csv(&format!("correlation_{}.csv", kind.name()), csv, None)?;
            }
            if cfg.engines.contains(&EngineKind::Pt) && !cc.eps_rel_values.is_empty() {
                let mut eps: Vec<f64> = cc.eps_rel_values.clone();
                eps.push(cfg.numerics.eps_rel);
                eps.sort_by(|a, b| b.total_cmp(a));
                eps.dedup();
                let c = cfg.system;
                let s = SystemModel::with_bath(c.epsilon, c.omega_el, &b)?;
                let mut series = Vec::new();
                for &e in &eps {
                    let pt = run.pt(&b, e)?;
                    series.push(crate::dynamics::evolve_with_pt(&pt, &s, &sched)?);
                }
                let base = series.last().expect("at least one").clone();
                let mut csv = String::from("t4");
                for e in &eps[..eps.len() - 1] {
                    let _ = write!(csv, ",abs_diff_eps_{e:e}");
                }
                csv.push('\n');
                for (i, t) in base.times.iter().enumerate() {
                    csv.push_str(&num(*t));
                    for s in &series[..series.len() - 1] {
                        let _ = write!(csv, ",{}", num((s.values[i] - base.values[i]).norm()));
                    }
                    csv.push('\n');
                }
                run.write_csv("convergence.csv", csv, None)?;
            }
        }
        Task::PeakScan => {
            let temps = cfg.scan.clone().expect("validated").temperatures;
            let omega = cfg.system.omega_el;
            let mut csv =
                String::from("temperature,pt_splitting_minus_2omega,wcme_analytic_minus_2omega\n");
            for &t in &temps {
                let bt = BathSpec::new(b.alpha, b.omega_c, t)?;
                let analytic = eigenstate_splitting(&bt, omega)? - 2.0 * omega;
                let pt_col = if cfg.engines.contains(&EngineKind::Pt) {
                    let e = run.engine(EngineKind::Pt, &bt)?;
                    let sp = run.spectrum2d(e.as_ref())?;
                    match peak_analysis_2d(&sp, run.spectrum_config().prominence).splitting {
                        Some(s) => num(s - 2.0 * omega),
                        None => {
                            warn!("no resolvable splitting at T = {t}");
                            String::new()
                        }
                    }
                } else {
                    String::new()
                };
                let _ = writeln!(csv, "{},{},{}", num(t), pt_col, num(analytic));
            }
            run.write_csv(
                "peak_scan.csv",
                csv,
                Some("set datafile separator ','\nset key autotitle columnhead\nset xlabel 'T (1/ps)'\nset ylabel 'splitting - 2 Omega (1/ps)'\nplot 'peak_scan.csv' using 1:2 with linespoints, '' using 1:3 with lines\n".into()),
            )?;
        }
    }
    run.wall
        .insert("total".into(), started.elapsed().as_secs_f64());
    let mut versions = BTreeMap::new();
    versions.insert("ptspec".into(), env!("CARGO_PKG_VERSION").into());
    versions.insert("pt_format".into(), FORMAT_VERSION.to_string());
    let manifest = Manifest {
        config_sha256: sha256_hex(&config_bytes),
        config: cfg,
        versions,
        pt_files: run.pt_files.clone(),
        outputs: run.outputs.clone(),
        wall_times: run.wall.clone(),
    };
    fs::write(
        run.out_dir.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Config path in a directory, for tests and examples.
pub fn write_config(dir: &Path, cfg: &RunConfig) -> Result<PathBuf> {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_vec_pretty(cfg)?)?;
    Ok(p)
}
