use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use halotrace::cr3bp::{lagrange_points, LagrangePoint};
use halotrace::experiment::{emit_csv, emit_plot_data, run_experiment, RunConfig};
use halotrace::halo::{
    differential_correct_with, richardson_guess, write_catalog, write_trajectory, CatalogEntry, CorrectorSettings,
};
use halotrace::inverse::{InverseSolver, MethodOutcome, Query};
use halotrace::lp_series::build_coefficients;
use halotrace::{Error, Result};

/// Trace points near a collinear libration point to the halo orbit they lie on.
#[derive(Parser, Debug)]
#[command(name = "halotrace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key = value configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Mass ratio of the smaller primary.
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Libration point (L1, L2 or L3 for the series).
    #[arg(long, global = true)]
    lpoint: Option<String>,
    /// Halo family: northern or southern.
    #[arg(long, global = true)]
    family: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of truth points.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Method reported by `trace` and written to the experiment CSV.
    #[arg(long, global = true)]
    method: Option<u8>,
    #[arg(long, global = true)]
    az_lo_km: Option<f64>,
    #[arg(long, global = true)]
    az_hi_km: Option<f64>,
    #[arg(long, global = true)]
    tol_x: Option<f64>,
    /// Error-norm acceptance tolerance of Methods 2 and 3.
    #[arg(long, global = true)]
    tol_norm: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the five libration points.
    Lagrange,
    /// Print the series constants.
    Coeffs,
    /// Correct one halo orbit and export its trajectory.
    Halo {
        #[arg(long)]
        az_km: f64,
    },
    /// Trace a single point to (t, Az).
    Trace {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        /// Coordinates are barycentric km rather than normalized.
        #[arg(long)]
        km: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the sampled experiment and write reports to the output directory.
    Experiment {
        /// Fill the wall_ms column (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Csv,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    let overrides: [(&str, Option<String>); 12] = [
        ("mu", cli.mu.map(|v| v.to_string())),
        ("lpoint", cli.lpoint.clone()),
        ("family", cli.family.clone()),
        ("seed", cli.seed.map(|v| v.to_string())),
        ("n", cli.n.map(|v| v.to_string())),
        ("method", cli.method.map(|v| v.to_string())),
        ("az_lo_km", cli.az_lo_km.map(|v| v.to_string())),
        ("az_hi_km", cli.az_hi_km.map(|v| v.to_string())),
        ("tol_x", cli.tol_x.map(|v| v.to_string())),
        ("tol_norm", cli.tol_norm.map(|v| v.to_string())),
        ("out", cli.out.as_ref().map(|p| p.display().to_string())),
        (
            "timing",
            matches!(cli.command, Command::Experiment { timing: true }).then(|| "true".to_string()),
        ),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::Lagrange => {
            let pts = lagrange_points(cfg.system.mu)?;
            println!("mu = {}", cfg.system.mu);
            for p in LagrangePoint::ALL {
                let v = pts.get(p);
                println!("{p}  x = {:.15}  y = {:.15}  z = {:.15}", v.x, v.y, v.z);
            }
        }
        Command::Coeffs => {
            let c = build_coefficients(&cfg.system)?;
            println!("# {} {} family", c.point, c.family);
            for (k, v) in c.key_values() {
                println!("{k} = {v:e}");
            }
        }
        Command::Halo { az_km } => {
            let c = build_coefficients(&cfg.system)?;
            let guess = richardson_guess(*az_km, &c)?;
            let orbit = differential_correct_with(&guess, cfg.system.mu, &CorrectorSettings::default(), *az_km)?;
            ensure_dir(&cfg.out_dir)?;
            let traj = cfg.out_dir.join("halo_trajectory.csv");
            let cat = cfg.out_dir.join("halo_catalog.csv");
            write_trajectory(&orbit.trajectory, &traj)?;
            write_catalog(&[CatalogEntry::from_orbit(0, &orbit)], &cat)?;
            let s = orbit.initial_state;
            println!("Az = {az_km} km");
            println!("x0 = {:.15}  z0 = {:.15}  vy0 = {:.15}", s.x, s.z, s.vy);
            println!(
                "period = {:.12}  iterations = {}  residual = {:.3e}",
                orbit.period(),
                orbit.iterations,
                orbit.crossing_residual()
            );
            println!("wrote {} and {}", traj.display(), cat.display());
        }
        Command::Trace { x, y, z, km, format } => {
            let c = build_coefficients(&cfg.system)?;
            let solver = InverseSolver::new(&c, cfg.solver)?;
            let query = if *km {
                Query::from_km(*x, *y, *z, cfg.system.length_unit_km)
            } else {
                Query::new(*x, *y, *z)
            };
            let all = solver.trace(&query)?;
            print_outcome(all.get(cfg.method), cfg.method, *format);
        }
        Command::Experiment { .. } => {
            let out = run_experiment(&cfg)?;
            ensure_dir(&cfg.out_dir)?;
            let d = &cfg.out_dir;
            emit_csv(&out.reports, cfg.method, &d.join("traces.csv"))?;
            for m in 1..=3u8 {
                emit_csv(&out.reports, m, &d.join(format!("traces_method{m}.csv")))?;
            }
            let km_per_unit = cfg.system.length_unit_km;
            emit_plot_data(&out.reports, km_per_unit, &d.join("plot"))?;
            write_catalog(&out.catalog, &d.join("catalog.csv"))?;
            let json = serde_json::to_string_pretty(&out.summary).map_err(|e| Error::Parse(e.to_string()))?;
            write_text(&d.join("summary.json"), &(json + "\n"))?;
            let text = out.summary.to_string();
            write_text(&d.join("summary.txt"), &text)?;
            print!("{text}");
            println!("reports written to {}", d.display());
        }
    }
    Ok(())
}

fn print_outcome(out: &MethodOutcome, method: u8, format: Format) {
    let s = out.solution;
    match format {
        Format::Text => {
            println!("method {method}: {}", out.disposition.label());
            if let Some(s) = s {
                let e = s.per_coordinate_errors;
                println!("t = {}", s.t);
                println!("az_km = {}", s.az_km);
                println!("error_norm = {:e}", s.error_norm);
                println!("dx = {:e}  dy = {:e}  dz = {:e}", e.x, e.y, e.z);
            }
        }
        Format::Csv => {
            println!("t,az_km,dx,dy,dz,err_norm,disposition");
            let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            println!(
                "{},{},{},{},{},{},{}",
                f(s.map(|s| s.t)),
                f(s.map(|s| s.az_km)),
                f(s.map(|s| s.per_coordinate_errors.x)),
                f(s.map(|s| s.per_coordinate_errors.y)),
                f(s.map(|s| s.per_coordinate_errors.z)),
                f(s.map(|s| s.error_norm)),
                out.disposition.label()
            );
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
