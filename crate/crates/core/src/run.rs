//! Executes a resolved [`RunConfig`]: all numerics first, then every file is
//! written from this thread.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Mode, RunConfig};
use crate::critical::{
    classify_flow, critical_scan, fit_power_law, instanton_critical, refine_onset, scan_eta, CriticalError, CriticalFit,
    PointStatus, ScanPoint, ScanResult, Setup, REFINE_REL_WIDTH,
};
use crate::flow::{integrate_flow, integrate_flow_with_snapshots, log_scales, FlowError};
use crate::grid::GridError;
use crate::model::{DissipationSpec, ModelError};
use crate::observables::observe;
use crate::oracle::{solve_schrodinger, OracleError};
use crate::output::{fmt_num, Table};
use crate::spectra::CutoffProfile;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Critical(#[from] CriticalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {reason}")]
    ScanTable { path: PathBuf, reason: String },
    #[error("cannot start worker threads: {0}")]
    Threads(String),
}

impl RunError {
    /// Short machine-readable kind for the error record.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Model(_) => "model",
            RunError::Grid(_) => "grid",
            RunError::Flow(_) => "flow",
            RunError::Critical(_) => "critical",
            RunError::Oracle(_) => "oracle",
            RunError::Io { .. } => "io",
            RunError::ScanTable { .. } => "scan_table",
            RunError::Threads(_) => "threads",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// `(file name, table)` in write order.
    pub tables: Vec<(String, Table)>,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    mode: &'static str,
    wall_time_s: f64,
    files: Vec<String>,
    config: &'a RunConfig,
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: String,
    pub message: String,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Runs the numerics of `cfg` without touching the file system.
pub fn compute(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let work = || match cfg.mode {
        Mode::Flow => flow_mode(cfg),
        Mode::Scan => scan_mode(cfg),
        Mode::Fit => fit_mode(cfg),
        Mode::Spectra => spectra_mode(cfg),
        Mode::Oracle => oracle_mode(cfg),
    };
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| RunError::Threads(e.to_string()))?
            .install(work)
    } else {
        work()
    }
}

/// Computes, then writes the tables and `manifest.toml` into `cfg.output`.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, RunError> {
    let start = Instant::now();
    let out = compute(cfg)?;
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    for (name, table) in &out.tables {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        table
            .write(io::BufWriter::new(file))
            .map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
        written.push(path);
    }
    let manifest = Manifest {
        version: VERSION,
        mode: cfg.mode.as_str(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: out.tables.iter().map(|(n, _)| n.clone()).collect(),
        config: cfg,
    };
    let text = toml::to_string(&manifest).expect("manifest fields are plain data");
    let path = dir.join("manifest.toml");
    fs::write(&path, text).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(written)
}

/// Writes `error.json` into `dir`, best effort.
pub fn write_error_record(dir: &Path, err: &RunError) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let record = ErrorRecord {
        error: err.kind().to_string(),
        message: err.to_string(),
    };
    let path = dir.join("error.json");
    fs::write(&path, serde_json::to_string_pretty(&record).expect("plain strings"))?;
    Ok(path)
}

fn setup(cfg: &RunConfig, i: usize) -> Result<Setup, RunError> {
    let g = cfg.grids[i];
    Ok(Setup::new(cfg.model(i), g.q_max, g.n, cfg.flow)?)
}

fn observables_header() -> Vec<&'static str> {
    vec!["lambda0", "s", "eta", "q_mean", "e0", "m_eff_sq", "chi", "status"]
}

fn point_row(lambda0: f64, s: i64, p: &ScanPoint) -> Vec<String> {
    vec![
        fmt_num(lambda0),
        s.to_string(),
        fmt_num(p.eta),
        opt(p.q_mean),
        opt(p.e0),
        opt(p.m_eff_sq),
        opt(p.chi),
        p.status.as_str().to_string(),
    ]
}

struct FlowJob {
    lambda0_index: usize,
    s: i64,
    eta: f64,
}

fn flow_mode(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let setups = (0..cfg.lambda0s.len()).map(|i| setup(cfg, i)).collect::<Result<Vec<_>, _>>()?;
    let mut jobs = Vec::new();
    for i in 0..cfg.lambda0s.len() {
        for &s in &cfg.s_values {
            for eta in cfg.scan.etas_for(cfg.lambda0s[i]) {
                jobs.push(FlowJob {
                    lambda0_index: i,
                    s,
                    eta,
                });
            }
        }
    }
    let scales = if cfg.snapshots_per_decade > 0 {
        log_scales(cfg.flow.lambda_uv, cfg.flow.lambda_ir, cfg.snapshots_per_decade)
    } else {
        Vec::new()
    };
    let results: Vec<_> = jobs
        .par_iter()
        .map(|job| {
            let setup = &setups[job.lambda0_index];
            let spec = DissipationSpec::new(job.s, job.eta)?;
            match integrate_flow_with_snapshots(&setup.grid, &spec, &cfg.flow, &scales) {
                Ok((r, snaps)) => Ok(Some((r, snaps))),
                Err(FlowError::InvalidInitialCutoff { .. }) => Ok(None),
                Err(e) => Err(RunError::from(e)),
            }
        })
        .collect::<Result<_, RunError>>()?;

    let mut obs_table = Table::new(observables_header());
    let mut trace = Table::new(["lambda0", "s", "eta", "lambda", "V0", "m2"]);
    let mut snapshots = Table::new(["lambda0", "s", "eta", "lambda", "q", "V"]);
    let mut potential = Table::new(["lambda0", "s", "eta", "q", "V"]);
    for (job, res) in jobs.iter().zip(&results) {
        let setup = &setups[job.lambda0_index];
        let lambda0 = setup.params.lambda0;
        let head = || vec![fmt_num(lambda0), job.s.to_string(), fmt_num(job.eta)];
        let Some((r, snaps)) = res else {
            obs_table.push(point_row(lambda0, job.s, &ScanPoint::rejected(job.eta)));
            continue;
        };
        let p = classify_flow(&DissipationSpec::new(job.s, job.eta)?, r);
        obs_table.push(point_row(lambda0, job.s, &p));

        let c = setup.grid.center();
        let mut row = head();
        row.extend([
            fmt_num(cfg.flow.lambda_uv),
            fmt_num(setup.grid.values()[c]),
            fmt_num(setup.grid.curvature_at_origin()),
        ]);
        trace.push(row);
        for snap in snaps {
            let mut row = head();
            row.extend([
                fmt_num(snap.lambda),
                fmt_num(snap.potential_at_origin()),
                fmt_num(snap.curvature_at_origin()),
            ]);
            trace.push(row);
            for (k, v) in snap.grid.values().iter().enumerate() {
                let mut row = head();
                row.extend([fmt_num(snap.lambda), fmt_num(snap.grid.q(k)), fmt_num(*v)]);
                snapshots.push(row);
            }
        }
        for (k, v) in r.final_grid.values().iter().enumerate() {
            let mut row = head();
            row.extend([fmt_num(r.final_grid.q(k)), fmt_num(*v)]);
            potential.push(row);
        }
    }
    let mut tables = vec![
        ("observables.csv".to_string(), obs_table),
        ("trace.csv".to_string(), trace),
        ("potential.csv".to_string(), potential),
    ];
    if cfg.snapshots_per_decade > 0 {
        tables.push(("snapshots.csv".to_string(), snapshots));
    }
    Ok(RunOutput { tables })
}

fn fit_header() -> Vec<&'static str> {
    vec![
        "lambda0",
        "s",
        "C",
        "eta_c",
        "gamma",
        "sse",
        "n_points",
        "r_squared",
        "eta_c_instanton",
        "fit_status",
    ]
}

fn fit_row(lambda0: f64, s: i64, fit: &Result<CriticalFit, CriticalError>) -> Vec<String> {
    let mut row = vec![fmt_num(lambda0), s.to_string()];
    match fit {
        Ok(f) => row.extend([
            fmt_num(f.c),
            fmt_num(f.eta_c),
            fmt_num(f.gamma),
            fmt_num(f.sse),
            f.n_points.to_string(),
            fmt_num(f.r_squared),
        ]),
        Err(_) => row.extend(std::iter::repeat_n(String::new(), 6)),
    }
    row.push(fmt_num(instanton_critical(lambda0)));
    row.push(match fit {
        Ok(_) => "OK".to_string(),
        Err(CriticalError::TooFewPoints(_)) => "TOO_FEW_POINTS".to_string(),
        Err(CriticalError::FitDiverged(_)) => "FIT_DIVERGED".to_string(),
        Err(_) => "FAILED".to_string(),
    });
    row
}

fn scan_mode(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let mut scan_table = Table::new(observables_header());
    let mut fit_table = Table::new(fit_header());
    for i in 0..cfg.lambda0s.len() {
        let setup = setup(cfg, i)?;
        for &s in &cfg.s_values {
            let etas = &cfg.scan.etas_for(setup.params.lambda0);
            let scan = if cfg.scan.critical {
                let top = *etas.last().expect("validated non-empty");
                critical_scan(&setup, s, top, etas.len(), cfg.scan.window_intervals)?
            } else {
                let mut scan = scan_eta(&setup, s, etas)?;
                if cfg.scan.refine {
                    refine_onset(&setup, &mut scan, REFINE_REL_WIDTH)?;
                }
                scan
            };
            for p in &scan.points {
                scan_table.push(point_row(scan.lambda0, s, p));
            }
            fit_table.push(fit_row(scan.lambda0, s, &fit_power_law(&scan)));
        }
    }
    Ok(RunOutput {
        tables: vec![("scan.csv".to_string(), scan_table), ("fit.csv".to_string(), fit_table)],
    })
}

fn parse_status(text: &str) -> Option<PointStatus> {
    Some(match text {
        "CONVERGED" => PointStatus::Converged,
        "LOCALIZED" => PointStatus::Localized,
        "SINGULAR" => PointStatus::Singular,
        "MAX_STEPS" => PointStatus::MaxSteps,
        "INVALID_INITIAL_CUTOFF" => PointStatus::InvalidInitialCutoff,
        _ => return None,
    })
}

/// Reads a scan table back into one [`ScanResult`] per `(lambda0, s)`.
pub fn read_scan_table(path: &Path) -> Result<Vec<ScanResult>, RunError> {
    let bad = |reason: String| RunError::ScanTable {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (c_l, c_s, c_eta, c_chi, c_status) = (col("lambda0")?, col("s")?, col("eta")?, col("chi")?, col("status")?);
    let (c_m, c_q, c_e0) = (col("m_eff_sq").ok(), col("q_mean").ok(), col("e0").ok());

    let num = |text: &str, line: usize| -> Result<Option<f64>, RunError> {
        if text.is_empty() {
            return Ok(None);
        }
        text.parse()
            .map(Some)
            .map_err(|_| bad(format!("line {line}: bad number {text:?}")))
    };
    let mut groups: BTreeMap<(u64, i64), Vec<ScanPoint>> = BTreeMap::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let lambda0 = num(field(c_l), line)?.ok_or_else(|| bad(format!("line {line}: empty lambda0")))?;
        let s: i64 = field(c_s)
            .parse()
            .map_err(|_| bad(format!("line {line}: bad s {:?}", field(c_s))))?;
        let eta = num(field(c_eta), line)?.ok_or_else(|| bad(format!("line {line}: empty eta")))?;
        let status = parse_status(field(c_status)).ok_or_else(|| bad(format!("line {line}: unknown status")))?;
        let get = |c: Option<usize>| c.map(|c| num(field(c), line)).transpose().map(Option::flatten);
        groups.entry((lambda0.to_bits(), s)).or_default().push(ScanPoint {
            eta,
            status,
            m_eff_sq: get(c_m)?,
            m_eff_sq_check: None,
            chi: num(field(c_chi), line)?,
            q_mean: get(c_q)?,
            e0: get(c_e0)?,
        });
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((bits, s), mut points) in groups {
        let lambda0 = f64::from_bits(bits);
        points.sort_by(|a, b| a.eta.total_cmp(&b.eta));
        let chi0 = points
            .iter()
            .find(|p| p.eta == 0.0)
            .and_then(|p| p.chi)
            .ok_or_else(|| bad(format!("lambda0 = {lambda0}, s = {s}: no eta = 0 row with chi")))?;
        out.push(ScanResult {
            lambda0,
            s,
            points,
            chi0,
        });
    }
    out.sort_by(|a, b| a.lambda0.total_cmp(&b.lambda0).then(a.s.cmp(&b.s)));
    Ok(out)
}

fn fit_mode(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let path = cfg.scan_csv.as_ref().expect("validated");
    let mut fit_table = Table::new(fit_header());
    for scan in read_scan_table(path)? {
        fit_table.push(fit_row(scan.lambda0, scan.s, &fit_power_law(&scan)));
    }
    Ok(RunOutput {
        tables: vec![("fit.csv".to_string(), fit_table)],
    })
}

fn spectra_mode(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let mut table = Table::new(["s", "eta", "E", "f"]);
    let mut scales = Table::new(["s", "eta", "regime", "E_c"]);
    let sp = &cfg.spectra;
    for &s in &cfg.s_values {
        let spec = DissipationSpec::new(s, cfg.eta)?;
        let profile = CutoffProfile::new(spec);
        for (e, f) in profile.table(sp.e_min, sp.e_max, sp.e_points) {
            table.push(vec![s.to_string(), fmt_num(cfg.eta), fmt_num(e), opt(f)]);
        }
        let regime = serde_json::to_value(spec.regime()).expect("unit enum");
        scales.push(vec![
            s.to_string(),
            fmt_num(cfg.eta),
            regime.as_str().unwrap_or_default().to_string(),
            opt(profile.e_c),
        ]);
    }
    Ok(RunOutput {
        tables: vec![("spectra.csv".to_string(), table), ("cutoff.csv".to_string(), scales)],
    })
}

fn oracle_mode(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let rows: Vec<_> = (0..cfg.lambda0s.len())
        .into_par_iter()
        .map(|i| -> Result<_, RunError> {
            let p = cfg.model(i);
            let spectrum = solve_schrodinger(&p, cfg.oracle.q_max[i], cfg.oracle.n, cfg.oracle.levels)?;
            let flow_gap = if cfg.oracle.compare_flow {
                let setup = setup(cfg, i)?;
                let none = DissipationSpec::none();
                let r = integrate_flow(&setup.grid, &none, &cfg.flow)?;
                observe(&r.final_grid, &none).ok().and_then(|o| o.gap())
            } else {
                None
            };
            Ok((p.lambda0, spectrum, flow_gap))
        })
        .collect::<Result<_, _>>()?;

    let mut exact = Table::new(["lambda0", "E0", "E1", "gap"]);
    let mut compare = Table::new(["lambda0", "gap_exact", "m_eff", "relative_difference"]);
    for (lambda0, spectrum, flow_gap) in &rows {
        let gap = spectrum.gap()?;
        exact.push(vec![
            fmt_num(*lambda0),
            fmt_num(spectrum.energies[0]),
            fmt_num(spectrum.energies[1]),
            fmt_num(gap),
        ]);
        if cfg.oracle.compare_flow {
            compare.push(vec![
                fmt_num(*lambda0),
                fmt_num(gap),
                opt(*flow_gap),
                opt(flow_gap.map(|m| m / gap - 1.0)),
            ]);
        }
    }
    let mut tables = vec![("fig6_exact.csv".to_string(), exact)];
    if cfg.oracle.compare_flow {
        tables.push(("fig6_nprg.csv".to_string(), compare));
    }
    Ok(RunOutput { tables })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn spectra_table_has_half_at_cutoff() {
        let cfg = parse_config("mode = \"spectra\"\ns = 1\neta = 1.0\ne_min = 0.01\ne_max = 100.0\ne_points = 5\n").unwrap();
        let out = compute(&cfg).unwrap();
        let t = out.table("spectra.csv").unwrap();
        assert_eq!(t.header(), ["s", "eta", "E", "f"]);
        let mid = &t.rows()[2];
        assert_eq!(mid[2], fmt_num(1.0));
        assert_eq!(mid[3], fmt_num(0.5));
        let scales = out.table("cutoff.csv").unwrap();
        assert_eq!(scales.rows()[0][2], "IR_CUTOFF");
    }

    #[test]
    fn singular_spectra_leave_pole_blank() {
        let cfg = parse_config("mode = \"spectra\"\ns = 3\neta = 1.0\ne_min = 0.1\ne_max = 10.0\ne_points = 3\n").unwrap();
        let out = compute(&cfg).unwrap();
        assert_eq!(out.table("spectra.csv").unwrap().rows()[1][3], "");
    }

    #[test]
    fn oracle_mode_rows() {
        let cfg = parse_config("mode = \"oracle\"\nlambda0_list = [1.0, 2.0]\noracle_n = 1201\n").unwrap();
        let out = compute(&cfg).unwrap();
        let t = out.table("fig6_exact.csv").unwrap();
        assert_eq!(t.header(), ["lambda0", "E0", "E1", "gap"]);
        assert_eq!(t.rows().len(), 2);
        let gap: f64 = t.rows()[0][3].parse().unwrap();
        assert!((gap - 1.5057).abs() < 1e-3);
    }

    #[test]
    fn flow_mode_is_deterministic() {
        let text = "mode = \"flow\"\nlambda0 = 1.0\neta_list = [0.0, 1.0]\nlambda_uv = 100.0\nlambda_ir = 0.01\nn = 101\nsnapshots_per_decade = 1\n";
        let cfg = parse_config(text).unwrap();
        let a = compute(&cfg).unwrap();
        let b = compute(&cfg).unwrap();
        assert_eq!(a, b);
        let obs = a.table("observables.csv").unwrap();
        assert_eq!(obs.rows().len(), 2);
        assert_eq!(obs.rows()[0][7], "CONVERGED");
        // initial row plus one per decade
        assert_eq!(a.table("trace.csv").unwrap().rows().len(), 2 * 5);
        assert_eq!(a.table("snapshots.csv").unwrap().rows().len(), 2 * 4 * 101);
    }

    #[test]
    fn scan_then_fit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "mode = \"scan\"\nlambda0 = 1.0\neta_range = \"0:3:4\"\nlambda_uv = 100.0\nlambda_ir = 0.01\nn = 101\noutput = {:?}\n",
            dir.path()
        );
        let cfg = parse_config(&text).unwrap();
        let files = run(&cfg).unwrap();
        assert!(files.iter().any(|f| f.ends_with("manifest.toml")));
        let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
        assert!(manifest.contains("lambda_ir = 0.01"), "{manifest}");
        assert!(manifest.contains("rel_tol"));

        let scans = read_scan_table(&dir.path().join("scan.csv")).unwrap();
        assert_eq!(scans.len(), 1);
        assert_eq!(scans[0].points.len(), 4);
        let fit_cfg = parse_config(&format!(
            "mode = \"fit\"\nscan_csv = {:?}\n",
            dir.path().join("scan.csv")
        ))
        .unwrap();
        let out = compute(&fit_cfg).unwrap();
        let row = &out.table("fit.csv").unwrap().rows()[0];
        assert_eq!(row[9], "TOO_FEW_POINTS");
        assert_eq!(row[8], fmt_num(2.0 * std::f64::consts::PI));
    }

    #[test]
    fn error_record_is_json() {
        let dir = tempfile::tempdir().unwrap();
        let err = RunError::Config(ConfigError::Invalid {
            key: "eta".into(),
            reason: "bad".into(),
        });
        let path = write_error_record(dir.path(), &err).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["error"], "config");
        assert_eq!(v["message"], "eta: bad");
    }
}
