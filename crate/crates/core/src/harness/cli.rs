use super::config::{SweepConfig, CONFIG_SCHEMA};
use super::fit::{fit_width_law, FitOptions};
use super::io::{json_string, read_records_csv, write_json_file, write_records_csv};
use super::sweep::run_sweep;
use crate::error::{Error, Result};
use crate::geometry::{analyze, GeometryReport, Grid};
use crate::model::{default_probe_grid, validate_assumptions, ModelConfig};
use crate::spectral::{
    assemble, default_nodes, default_shift, default_theta, find_resonance_with, DistortionSpec, SolverOptions,
};
use crate::wkb::weber_y;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "predissoc", version, about = "Resonance widths for two-channel predissociation models")]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Interior grid nodes (solve) or probe nodes (geometry).
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Eigenvalue stopping tolerance (at least 1e-13).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for perturbed-shift retries.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the standing assumptions of a model.
    Check { model: String },
    /// Agmon geometry and predicted width exponent.
    Geometry { model: String },
    /// Compute the first resonance at one h.
    Solve {
        model: String,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        theta: Option<f64>,
        /// Also write the matrix triplets and the state.
        #[arg(long)]
        dump: bool,
    },
    /// Run an h-sweep described by a JSON config.
    Sweep { config: PathBuf },
    /// Fit the width law to sweep records.
    Fit {
        records: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        /// Add an h ln(1/h) correction column.
        #[arg(long)]
        log_correction: bool,
    },
    /// Evaluate the Weber function Y at (eps, z).
    Weber {
        #[arg(long, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let is_sweep = matches!(cli.command, Command::Sweep { .. });
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_usage() {
                if is_sweep {
                    let _ = writeln!(err, "\n{CONFIG_SCHEMA}");
                } else {
                    let _ = writeln!(err, "run `predissoc --help` for usage");
                }
                EXIT_USAGE
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<()> {
    writeln!(out, "{}", json_string(v))?;
    Ok(())
}

fn out_path(cli: &Cli, name: &str) -> Result<Option<PathBuf>> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Some(dir.join(name)))
        }
        None => Ok(None),
    }
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("no such file: {}", p.display())))
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let tol = cli.tol.unwrap_or(1e-13);
    match &cli.command {
        Command::Check { model } => {
            let m = ModelConfig::load(model)?;
            let report = validate_assumptions(&m, &default_probe_grid(m.dimension));
            let v = serde_json::to_value(&report)?;
            if let Some(p) = out_path(cli, "assumptions.json")? {
                write_json_file(&p, &v)?;
            }
            emit(out, &v)
        }
        Command::Geometry { model } => {
            let m = ModelConfig::load(model)?;
            let grid = match m.dimension {
                1 => Grid::line(-5.0, 5.0, cli.grid_points.unwrap_or(4001)),
                _ => Grid::square(-4.0, 4.0, cli.grid_points.unwrap_or(401)),
            };
            let report = analyze(&m, &grid)?;
            let v = report.to_json();
            if let Some(p) = out_path(cli, "geometry.json")? {
                write_json_file(&p, &v)?;
                let field = crate::geometry::eikonal_solve(&m, &grid)?;
                field.write_csv(std::fs::File::create(p.with_file_name("agmon.csv"))?)?;
            }
            emit(out, &v)
        }
        Command::Solve { model, h, theta, dump } => {
            let m = ModelConfig::load(model)?;
            let h = *h;
            if !(h > 0.0 && h < 1.0) {
                return Err(Error::Precondition(format!("h = {h} outside (0, 1)")));
            }
            let theta = theta.unwrap_or_else(|| default_theta(h));
            let dist = DistortionSpec::for_h(h).with_theta(theta)?;
            let nodes = cli.grid_points.unwrap_or_else(|| default_nodes(h, dist.l));
            let op = assemble(&m, &dist, h, nodes)?;
            let opts = SolverOptions { tol, seed: cli.seed.unwrap_or(0), ..SolverOptions::default() };
            let pair = find_resonance_with(&op, default_shift(&m, h)?, &opts)?;
            let mut v = pair.to_json();
            let floor = op.floor();
            v["h"] = json!(h);
            v["theta"] = json!(theta);
            v["nodes"] = json!(nodes);
            v["floor_value"] = json!(floor);
            v["floor"] = json!(pair.rho.im.abs() < floor);
            if let Some(p) = out_path(cli, "resonance.json")? {
                write_json_file(&p, &v)?;
                if *dump {
                    op.write_triplets(std::io::BufWriter::new(std::fs::File::create(p.with_file_name("operator.txt"))?))?;
                    let mut w = std::io::BufWriter::new(std::fs::File::create(p.with_file_name("state.csv"))?);
                    let ch = pair.channels(&op);
                    writeln!(w, "x,u1_re,u1_im,u2_re,u2_im")?;
                    for (i, x) in op.x.iter().enumerate() {
                        writeln!(
                            w,
                            "{x:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                            ch[0][i].re, ch[0][i].im, ch[1][i].re, ch[1][i].im
                        )?;
                    }
                }
            } else if *dump {
                return Err(Error::Config("--dump needs --out DIR".into()));
            }
            emit(out, &v)
        }
        Command::Sweep { config } => {
            require_file(config)?;
            let mut cfg = SweepConfig::load(config)?;
            if let Some(t) = cli.tol {
                cfg.tol = t;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if cli.grid_points.is_some() {
                cfg.grid_points = cli.grid_points;
            }
            let records = run_sweep(&cfg)?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let csv = dir.join(cfg.outputs.records.as_deref().unwrap_or("records.csv"));
            let js = dir.join(cfg.outputs.json.as_deref().unwrap_or("records.json"));
            write_records_csv(std::io::BufWriter::new(std::fs::File::create(&csv)?), &records)?;
            let all: Vec<Value> = records.iter().map(|r| r.to_json()).collect();
            write_json_file(&js, &json!({ "config": cfg, "records": all }))?;
            emit(
                out,
                &json!({
                    "records": records.len(),
                    "failed": records.iter().filter(|r| !r.ok()).count(),
                    "floor": records.iter().filter(|r| r.floor).count(),
                    "csv": csv.display().to_string(),
                    "json": js.display().to_string(),
                }),
            )
        }
        Command::Fit { records, geometry, log_correction } => {
            require_file(records)?;
            require_file(geometry)?;
            let recs = read_records_csv(records)?;
            let g: Value = serde_json::from_str(&std::fs::read_to_string(geometry)?)?;
            let (s, p, rho10) = GeometryReport::fit_inputs(&g)?;
            let report = fit_width_law(&recs, s, p, rho10, FitOptions { log_correction: *log_correction })?;
            let v = report.to_json();
            if let Some(p) = out_path(cli, "fit.json")? {
                write_json_file(&p, &v)?;
            }
            emit(out, &v)
        }
        Command::Weber { eps, z } => {
            let e = weber_y(*eps, *z)?;
            emit(out, &serde_json::to_value(e)?)
        }
    }
}
