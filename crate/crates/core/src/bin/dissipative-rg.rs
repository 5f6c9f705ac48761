use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dissipative_rg::config::{resolve, ConfigError, Mode, RawConfig};
use dissipative_rg::run::{run, write_error_record, RunError};

#[derive(Parser)]
#[command(version, about = "Local-potential RG flow for a dissipative double well")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flow the potential and record traces, snapshots and observables.
    Flow(Overrides),
    /// Scan eta, locate the localization onset and fit the susceptibility.
    Scan(Overrides),
    /// Fit an existing scan table (`scan_csv`).
    Fit(Overrides),
    /// Tabulate the dissipative cutoff factor.
    Spectra(Overrides),
    /// Exact Schroedinger levels of the bare double well.
    Oracle(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long)]
    s: Option<i64>,
    #[arg(long)]
    eta: Option<f64>,
    /// `A:B:N`
    #[arg(long)]
    eta_range: Option<String>,
    /// Initial cutoff.
    #[arg(long)]
    uv_cutoff: Option<f64>,
    /// Scan table read by `fit`.
    #[arg(long)]
    scan_csv: Option<PathBuf>,
}

fn load(mode: Mode, o: &Overrides) -> Result<RawConfig, RunError> {
    let mut raw = match &o.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
            RawConfig::from_toml(&text)?
        }
        None => RawConfig::default(),
    };
    if raw.mode.is_some_and(|m| m != mode) {
        return Err(ConfigError::Invalid {
            key: "mode".into(),
            reason: format!("config says {:?} but the command is {}", raw.mode.unwrap().as_str(), mode.as_str()),
        }
        .into());
    }
    raw.mode = Some(mode);
    if let Some(x) = o.lambda0 {
        raw.lambda0 = Some(x);
        raw.lambda0_list = None;
    }
    if let Some(x) = o.s {
        raw.s = Some(x);
        raw.s_list = None;
    }
    if let Some(x) = o.eta {
        raw.eta = Some(x);
        raw.eta_list = None;
        raw.eta_range = None;
    }
    if let Some(x) = &o.eta_range {
        raw.eta_range = Some(x.clone());
        raw.eta = None;
        raw.eta_list = None;
    }
    if o.uv_cutoff.is_some() {
        raw.lambda_uv = o.uv_cutoff;
    }
    if o.out.is_some() {
        raw.output = o.out.clone();
    }
    if o.threads.is_some() {
        raw.threads = o.threads;
    }
    if o.scan_csv.is_some() {
        raw.scan_csv = o.scan_csv.clone();
    }
    Ok(raw)
}

/// Runs one command; on failure the error record is written before returning.
fn execute(cli: &Cli) -> Result<Vec<PathBuf>, RunError> {
    let (mode, o) = match &cli.command {
        Command::Flow(o) => (Mode::Flow, o),
        Command::Scan(o) => (Mode::Scan, o),
        Command::Fit(o) => (Mode::Fit, o),
        Command::Spectra(o) => (Mode::Spectra, o),
        Command::Oracle(o) => (Mode::Oracle, o),
    };
    let mut out_dir = o.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let result = load(mode, o).and_then(|raw| {
        if let Some(dir) = &raw.output {
            out_dir = dir.clone();
        }
        run(&resolve(raw)?)
    });
    if let Err(e) = &result {
        if let Err(io) = write_error_record(&out_dir, e) {
            eprintln!("error: cannot write error record: {io}");
        }
    }
    result
}

fn main() -> ExitCode {
    match execute(&Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn exec(args: &[&str]) -> Result<Vec<PathBuf>, RunError> {
        let cli = Cli::try_parse_from(std::iter::once("dissipative-rg").chain(args.iter().copied())).unwrap();
        execute(&cli)
    }

    fn p(path: &Path) -> &str {
        path.to_str().unwrap()
    }

    fn error_record(dir: &Path) -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(dir.join("error.json")).unwrap()).unwrap()
    }

    #[test]
    fn spectra_half_at_ohmic_cutoff() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("res");
        exec(&["spectra", "--s", "1", "--eta", "1", "--out", p(&out)]).unwrap();
        let text = fs::read_to_string(out.join("spectra.csv")).unwrap();
        // 121 log-spaced points over six decades put a node at E = 1
        let row = text
            .lines()
            .find(|l| l.starts_with("1,1.00000000000e0,1.00000000000e0,"))
            .unwrap();
        assert!(row.ends_with(",5.00000000000e-1"), "{row}");
        let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
        assert!(manifest.contains("wall_time_s"));
        assert!(manifest.contains("e_points = 121"));
    }

    #[test]
    fn repeated_flow_runs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("flow.toml");
        fs::write(
            &cfg,
            "lambda0 = 0.4\neta_list = [0.0, 3.0]\nlambda_uv = 1000.0\nn = 201\nsnapshots_per_decade = 2\n",
        )
        .unwrap();
        let outs = ["a", "b", "c"].map(|d| dir.path().join(d));
        exec(&["flow", "--config", p(&cfg), "--out", p(&outs[0])]).unwrap();
        exec(&["flow", "--config", p(&cfg), "--out", p(&outs[1])]).unwrap();
        exec(&["flow", "--config", p(&cfg), "--out", p(&outs[2]), "--threads", "1"]).unwrap();
        for name in ["observables.csv", "trace.csv", "snapshots.csv", "potential.csv"] {
            let a = fs::read(outs[0].join(name)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, fs::read(outs[1].join(name)).unwrap(), "{name}");
            assert_eq!(a, fs::read(outs[2].join(name)).unwrap(), "{name}");
        }
    }

    #[test]
    fn even_s_writes_error_record() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("res");
        assert!(exec(&["flow", "--lambda0", "1", "--s", "2", "--eta", "0", "--out", p(&out)]).is_err());
        let v = error_record(&out);
        assert_eq!(v["error"], "config");
        assert!(v["message"].as_str().unwrap().contains("odd"), "{v}");
    }

    #[test]
    fn hard_cutoff_violation_names_bound() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("res");
        let args = [
            "flow", "--lambda0", "1", "--s", "3", "--eta", "0.02", "--uv-cutoff", "100", "--out", p(&out),
        ];
        assert!(exec(&args).is_err());
        let msg = error_record(&out)["message"].as_str().unwrap().to_string();
        assert!(msg.contains("0.01"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.toml");
        let out = dir.path().join("res");
        fs::write(&cfg, "lambda0 = 1.0\nlamda_uv = 10.0\n").unwrap();
        assert!(exec(&["oracle", "--config", p(&cfg), "--out", p(&out)]).is_err());
        let msg = error_record(&out)["message"].as_str().unwrap().to_string();
        assert!(msg.contains("lamda_uv"), "{msg}");
    }

    #[test]
    fn missing_config_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("res");
        let missing = dir.path().join("none.toml");
        assert!(exec(&["oracle", "--config", p(&missing), "--out", p(&out)]).is_err());
        assert_eq!(error_record(&out)["error"], "io");
    }

    #[test]
    fn mode_clash_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("m.toml");
        let out = dir.path().join("res");
        fs::write(&cfg, "mode = \"scan\"\nlambda0 = 1.0\n").unwrap();
        assert!(exec(&["oracle", "--config", p(&cfg), "--out", p(&out)]).is_err());
        assert_eq!(error_record(&out)["error"], "config");
    }

    #[test]
    fn command_line_definition_is_valid() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn overrides_replace_lists() {
        let o = Overrides {
            config: None,
            out: None,
            threads: Some(2),
            lambda0: Some(0.5),
            s: Some(5),
            eta: None,
            eta_range: Some("0:1:3".into()),
            uv_cutoff: Some(50.0),
            scan_csv: None,
        };
        let raw = load(Mode::Scan, &o).unwrap();
        assert_eq!(raw.lambda0, Some(0.5));
        assert_eq!(raw.eta_range.as_deref(), Some("0:1:3"));
        let cfg = resolve(raw).unwrap();
        assert_eq!(cfg.lambda0s, vec![0.5]);
        assert_eq!(cfg.s_values, vec![5]);
        assert_eq!(cfg.scan.etas, vec![0.0, 0.5, 1.0]);
        assert_eq!(cfg.flow.lambda_uv, 50.0);
        assert_eq!(cfg.threads, 2);
    }

    #[test]
    fn oracle_then_scan_then_fit() {
        let dir = tempfile::tempdir().unwrap();
        let d = |name: &str| dir.path().join(name);
        exec(&["oracle", "--lambda0", "1", "--out", p(&d("o"))]).unwrap();
        let exact = fs::read_to_string(d("o").join("fig6_exact.csv")).unwrap();
        let gap: f64 = exact.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert!((gap - 1.50575629).abs() < 1e-5, "{gap}");

        let cfg = d("scan.toml");
        fs::write(&cfg, "lambda0 = 1.0\nlambda_uv = 100.0\nlambda_ir = 0.01\nn = 101\n").unwrap();
        exec(&["scan", "--config", p(&cfg), "--eta-range", "0:2:3", "--out", p(&d("s"))]).unwrap();
        let scan = fs::read_to_string(d("s").join("scan.csv")).unwrap();
        assert!(scan.starts_with("lambda0,s,eta,q_mean,e0,m_eff_sq,chi,status\n"));

        let table = d("s").join("scan.csv");
        exec(&["fit", "--scan-csv", p(&table), "--out", p(&d("f"))]).unwrap();
        assert_eq!(
            fs::read(d("f").join("fit.csv")).unwrap(),
            fs::read(d("s").join("fit.csv")).unwrap()
        );
    }
}
