//! Command-line front end: configuration, dispatch, sweeps and output files.
//!
//! Every run computes all of its artifacts in memory before anything touches
//! the output directory, so a failed run leaves no files behind. Floats are
//! written with 17 significant digits and JSON via `serde_json`, which makes
//! repeated runs with the same config and seed byte-identical.

pub mod config;
pub mod run;

use std::path::{Path, PathBuf};

use clap::{Args, Parser};
use rayon::prelude::*;
use serde_json::{json, Value};

pub use config::{RunConfig, Subcommand, SweepSpec};
pub use run::{run_subcommand, Artifact, RunOutput, Table};

use crate::error::{Error, Result};
use crate::numeric::fmt_f64;

#[derive(Debug, Parser)]
#[command(name = "rqed-lab", version, about = "Resonant-QED measurement models: numerical laboratory")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed of the pseudorandom generator.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for grids and sweeps.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Defaults to the config's `subcommand`.
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Steady-state field and gain time of the axon model.
    Fel {
        /// Ion density override, m^-3.
        #[arg(long)]
        rho: Option<f64>,
        /// Permanent polarization of the water.
        #[arg(long)]
        p_z: Option<f64>,
    },
    /// Superradiant/normal classification on a reduced (rho/rho_c, kT/eps) grid.
    PhaseDiagram {
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
    },
    /// Mean-field photon/energy-spin trajectory.
    Dynamics {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dt_omega: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Sensory-organ decoherence criterion and dephased state.
    Decoherence {
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Type-I or type-II measurement pipeline with Born-rule reading.
    Measure(MeasureArgs),
    /// Bit coding of elementary optical domains.
    Lattice {
        /// Keep ones unless the domain is perturbed.
        #[arg(long)]
        latch: bool,
    },
    /// Repeats the configured subcommand over a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// `I` or `II`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Comma-separated amplitudes; complex values as `re:im`.
    #[arg(long, allow_hyphen_values = true)]
    pub amplitudes: Option<String>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Reading temperature, K.
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Subcommand to sweep; defaults to the config's `subcommand`.
    #[arg(long)]
    pub subcommand: Option<String>,
    /// JSON pointer into the config, e.g. `/parameters/rho`.
    #[arg(long)]
    pub path: Option<String>,
    /// Comma-separated list of values.
    #[arg(long, allow_hyphen_values = true)]
    pub values: Option<String>,
    /// Grid start, used with `--max` and `--count`.
    #[arg(long, allow_hyphen_values = true)]
    pub min: Option<f64>,
    /// Grid end (inclusive).
    #[arg(long, allow_hyphen_values = true)]
    pub max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub count: Option<usize>,
    /// Space the grid logarithmically.
    #[arg(long)]
    pub log: bool,
}

fn parse_subcommand(s: &str) -> Result<Subcommand> {
    config::parse_at(&Value::String(s.to_string()), "subcommand")
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::invalid(format!("cannot parse `{t}`: {e}"))))
        .collect()
}

/// `0.6,0.8` or `0.6:0,0:0.8`.
pub fn parse_amplitudes(s: &str) -> Result<Vec<[f64; 2]>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let (re, im) = t.split_once(':').unwrap_or((t, "0"));
            let p = |x: &str| x.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad amplitude `{t}`: {e}")));
            Ok([p(re)?, p(im)?])
        })
        .collect()
}

/// Config document with command-line overrides applied.
fn merged_document(cli: &Cli) -> Result<(Value, Option<Subcommand>, Option<SweepSpec>)> {
    let mut doc = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config {
                path: format!("{}: line {} column {}", path.display(), e.line(), e.column()),
                message: e.to_string(),
            })?
        }
        None => json!({}),
    };
    if !doc.is_object() {
        return Err(Error::Config { path: ".".into(), message: "config must be a JSON object".into() });
    }
    let mut set = |ptr: &str, v: Value| config::insert_pointer(&mut doc, ptr, v);
    if let Some(seed) = cli.seed {
        set("/seed", json!(seed))?;
    }
    if let Some(w) = cli.workers {
        set("/workers", json!(w))?;
    }
    let Some(command) = &cli.command else {
        return Ok((doc, None, None));
    };
    let (sub, sweep) = match command {
        Command::Fel { rho, p_z } => {
            if let Some(r) = rho {
                set("/parameters/rho", json!(r))?;
            }
            if let Some(p) = p_z {
                set("/parameters/preset/p_z", json!(p))?;
            }
            (Some(Subcommand::Fel), None)
        }
        Command::PhaseDiagram { rho_max, t_max, nx, ny } => {
            let pairs = [
                ("rho_max", rho_max.map(|v| json!(v))),
                ("t_max", t_max.map(|v| json!(v))),
                ("nx", nx.map(|v| json!(v))),
                ("ny", ny.map(|v| json!(v))),
            ];
            for (k, v) in pairs {
                if let Some(v) = v {
                    set(&format!("/parameters/{k}"), v)?;
                }
            }
            (Some(Subcommand::PhaseDiagram), None)
        }
        Command::Dynamics { steps, dt_omega, stride } => {
            let pairs = [
                ("steps", steps.map(|v| json!(v))),
                ("dt_omega", dt_omega.map(|v| json!(v))),
                ("stride", stride.map(|v| json!(v))),
            ];
            for (k, v) in pairs {
                if let Some(v) = v {
                    set(&format!("/parameters/{k}"), v)?;
                }
            }
            (Some(Subcommand::Dynamics), None)
        }
        Command::Decoherence { threshold } => {
            if let Some(t) = threshold {
                set("/parameters/threshold", json!(t))?;
            }
            (Some(Subcommand::Decoherence), None)
        }
        Command::Measure(m) => {
            if let Some(s) = &m.scheme {
                let scheme: crate::measurement::Scheme = s.parse()?;
                set("/parameters/scheme", serde_json::to_value(scheme).expect("scheme serializes"))?;
            }
            if let Some(a) = &m.amplitudes {
                set("/parameters/amplitudes", json!(parse_amplitudes(a)?))?;
            }
            if let Some(n) = m.samples {
                set("/parameters/samples", json!(n))?;
            }
            if let Some(t) = m.temperature {
                set("/parameters/temperature", json!(t))?;
            }
            (Some(Subcommand::Measure), None)
        }
        Command::Lattice { latch } => {
            if *latch {
                set("/parameters/latch", json!(true))?;
            }
            (Some(Subcommand::Lattice), None)
        }
        Command::Sweep(s) => {
            let sub = s.subcommand.as_deref().map(parse_subcommand).transpose()?;
            let given = s.path.is_some() || s.values.is_some() || s.min.is_some() || s.max.is_some() || s.count.is_some();
            let spec = if given {
                Some(SweepSpec {
                    path: s.path.clone().ok_or_else(|| Error::invalid("sweep needs --path"))?,
                    values: s.values.as_deref().map(parse_list).transpose()?,
                    min: s.min,
                    max: s.max,
                    count: s.count,
                    log: s.log,
                })
            } else {
                None
            };
            return Ok((doc, sub, spec));
        }
    };
    Ok((doc, sub, sweep))
}

/// Runs the subcommand (or sweep) described by `doc` and returns its files.
pub fn execute(doc: &Value, sub: Option<Subcommand>, sweep_override: Option<SweepSpec>, is_sweep: bool) -> Result<Vec<Artifact>> {
    let cfg = RunConfig::from_value(doc)?;
    let sub = match (sub, cfg.subcommand) {
        (Some(a), Some(b)) if a != b && !is_sweep => {
            return Err(Error::Config {
                path: "subcommand".into(),
                message: format!("config is for `{}` but `{}` was requested", b.name(), a.name()),
            })
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => {
            return Err(Error::Config { path: "subcommand".into(), message: "no subcommand given".into() })
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        if is_sweep {
            let spec = sweep_override
                .or_else(|| cfg.sweep.clone())
                .ok_or_else(|| Error::Config { path: "sweep".into(), message: "no sweep specified".into() })?;
            let table = sweep(doc, sub, &spec)?;
            Ok(vec![Artifact { name: "sweep.csv".into(), contents: table.render().into_bytes() }])
        } else {
            Ok(run_subcommand(sub, &cfg)?.artifacts)
        }
    })
}

/// Runs `sub` once per sweep value and concatenates the primary tables with a
/// leading `sweep_value` column, in sweep order.
/// Integral values become JSON integers so count-valued parameters accept them.
fn sweep_value(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        if v >= 0.0 {
            json!(v as u64)
        } else {
            json!(v as i64)
        }
    } else {
        json!(v)
    }
}

pub fn sweep(doc: &Value, sub: Subcommand, spec: &SweepSpec) -> Result<Table> {
    let points = spec.points()?;
    if !spec.path.starts_with('/') || spec.path.starts_with("/sweep") {
        return Err(Error::Config { path: "sweep.path".into(), message: format!("`{}` is not a sweepable JSON pointer", spec.path) });
    }
    let mut base = doc.clone();
    if let Some(obj) = base.as_object_mut() {
        obj.remove("sweep");
    }
    let results: Vec<Result<Table>> = points
        .par_iter()
        .map(|&v| {
            let mut d = base.clone();
            config::insert_pointer(&mut d, &spec.path, sweep_value(v))?;
            let cfg = RunConfig::from_value(&d)?;
            Ok(run_subcommand(sub, &cfg)?.table)
        })
        .collect();
    let mut header = None;
    let mut rows = Vec::new();
    for (v, r) in points.iter().zip(results) {
        let t = r?;
        header.get_or_insert_with(|| format!("sweep_value,{}", t.header));
        let tag = fmt_f64(*v);
        rows.extend(t.rows.into_iter().map(|row| format!("{tag},{row}")));
    }
    Ok(Table { header: header.unwrap_or_default(), rows })
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    let located = |p: &Path, e: std::io::Error| std::io::Error::new(e.kind(), format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| located(dir, e))?;
    for a in artifacts {
        let target = dir.join(&a.name);
        std::fs::write(&target, &a.contents).map_err(|e| located(&target, e))?;
    }
    Ok(())
}

/// Full command-line run: parse, compute, then write.
pub fn run_cli(cli: &Cli) -> Result<Vec<PathBuf>> {
    let (doc, sub, sweep_spec) = merged_document(cli)?;
    let is_sweep = match &cli.command {
        Some(c) => matches!(c, Command::Sweep(_)),
        None => doc.get("sweep").is_some_and(|v| !v.is_null()),
    };
    let artifacts = execute(&doc, sub, sweep_spec, is_sweep)?;
    let dir = match (&cli.out, doc.get("output").and_then(Value::as_str)) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("out"),
    };
    write_artifacts(&dir, &artifacts)?;
    Ok(artifacts.iter().map(|a| dir.join(&a.name)).collect())
}

/// Process entry point; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
