//! Command-line front end.

use crate::config::{DlMode, RunConfig};
use crate::error::{Error, Result};
use crate::feedback::FeedbackMode;
use crate::pilots::{default_catalog, PilotPattern};
use crate::region::{
    build_lookup, evaluate_operating_point, shared_realizations, sweep, weighted_optimum, write_csv, write_json,
    LookupGrids, LookupMeta, LookupTable, OperatingParams, RateRegion,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

const DEFAULT_SAMPLES: usize = 200;
const DEFAULT_WEIGHTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "csiregion", version, about = "Joint uplink/downlink rate regions under imperfect CSI")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed of the channel realizations (overrides the config file).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Channel realizations per operating point [default: 200].
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long = "velocity-kmh", global = true, value_name = "F")]
    velocity_kmh: Option<f64>,
    #[arg(long, global = true, value_enum)]
    feedback: Option<FeedbackMode>,
    #[arg(long = "dl-mode", global = true, value_enum)]
    dl_mode: Option<DlMode>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the CSI-quality lookup table and write it as JSON.
    Lookup,
    /// Rates of a single operating point (JSON).
    Rates {
        #[arg(long = "ul-pattern")]
        ul_pattern: String,
        #[arg(long = "dl-pattern")]
        dl_pattern: String,
        #[arg(long = "n-b")]
        n_b: f64,
        #[arg(long, value_name = "PATH")]
        lookup: Option<PathBuf>,
    },
    /// Sweep all operating points; report frontier and hull membership.
    Region {
        #[arg(long, value_name = "PATH")]
        lookup: Option<PathBuf>,
    },
    /// Weighted optimum `w R_UL + (1 - w) R_DL` for each weight.
    Optimize {
        /// Repeatable; defaults to 0, 0.25, 0.5, 0.75, 1.
        #[arg(long = "weight", value_name = "F")]
        weights: Vec<f64>,
        #[arg(long, value_name = "PATH")]
        lookup: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericFailure(_) | Error::UnusableLink { .. } => EXIT_NUMERIC,
        Error::InvalidArgument(_) | Error::Config(_) | Error::Io { .. } => EXIT_CONFIG,
    }
}

/// Parses `args` (program name first) and runs the subcommand; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("CSIREGION_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.common.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Session {
    cfg: RunConfig,
    seed: u64,
    samples: usize,
    catalog: Vec<PilotPattern>,
}

impl Session {
    fn new(c: &Common) -> Result<Self> {
        let mut cfg = match &c.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = c.velocity_kmh {
            cfg.system.velocity_kmh = v;
        }
        if let Some(f) = c.feedback {
            cfg.system.feedback_mode = f;
        }
        if let Some(m) = c.dl_mode {
            cfg.system.dl_mode = m;
        }
        cfg.validate()?;
        let samples = c.samples.or(cfg.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples == 0 {
            return Err(Error::Config("--samples must be at least 1".into()));
        }
        let seed = c.seed.or(cfg.seed).unwrap_or(0);
        let catalog = default_catalog(&cfg.system.geometry())?;
        Ok(Self { cfg, seed, samples, catalog })
    }

    fn meta(&self) -> LookupMeta {
        let s = &self.cfg.system;
        LookupMeta { feedback_mode: s.feedback_mode, n_d: s.n_d, n_rank: s.n_rank }
    }

    fn build(&self, v_kmh: &[f64], tau_max_us: &[f64]) -> Result<LookupTable> {
        let grids = LookupGrids {
            ul_patterns: &self.catalog,
            dl_patterns: &self.catalog,
            n_b: &self.cfg.grids.n_b,
            v_kmh,
            tau_max_us,
        };
        log::info!("building lookup table");
        build_lookup(&self.cfg.system, &grids)
    }

    /// Table for the configured scenario, loaded from `path` or built.
    fn lookup(&self, path: Option<&Path>) -> Result<LookupTable> {
        let s = &self.cfg.system;
        match path {
            None => self.build(&[s.velocity_kmh], &[s.tau_max_us]),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
                let t = LookupTable::from_json(&text)?;
                if t.meta.is_some_and(|m| m != self.meta()) {
                    return Err(Error::Config(format!(
                        "lookup table {} was built with different feedback settings",
                        p.display()
                    )));
                }
                Ok(t)
            }
        }
    }

    fn region(&self, lookup: Option<&Path>) -> Result<RateRegion> {
        let table = self.lookup(lookup)?;
        let real = shared_realizations(&self.cfg.system, self.samples, self.seed)?;
        let points = sweep(&self.cfg.system, &table, &self.catalog, &self.catalog, &self.cfg.grids.n_b, &real)
            .map_err(|e| match e {
                Error::InvalidArgument(m) => Error::Config(m),
                other => other,
            })?;
        Ok(RateRegion::new(points))
    }

    fn pattern(&self, id: &str) -> Result<&PilotPattern> {
        self.catalog.iter().find(|p| p.id == id).ok_or_else(|| {
            let known: Vec<&str> = self.catalog.iter().map(|p| p.id.as_str()).collect();
            Error::Config(format!("unknown pattern '{id}'; known: {}", known.join(", ")))
        })
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| Error::Io { path: p.display().to_string(), source })?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.map_or("<stdout>".into(), |p| p.display().to_string()), source }
}

#[derive(Serialize)]
struct OptimumRow<'a> {
    weight: f64,
    ul_pattern: &'a str,
    dl_pattern: &'a str,
    rho_ul: f64,
    rho_dl: f64,
    n_b: f64,
    dl_mode: DlMode,
    feedback_mode: FeedbackMode,
    net_ul: f64,
    net_dl: f64,
    objective: f64,
}

fn dispatch(cli: &Cli) -> Result<()> {
    let s = Session::new(&cli.common)?;
    let out_path = cli.common.out.as_deref();
    match &cli.command {
        Command::Lookup => {
            let sys = &s.cfg.system;
            let mut v = s.cfg.grids.velocities_kmh.clone();
            v.push(sys.velocity_kmh);
            let mut tau = s.cfg.grids.tau_max_us.clone();
            tau.push(sys.tau_max_us);
            let table = s.build(&v, &tau)?;
            let mut out = open_out(out_path)?;
            writeln!(out, "{}", table.to_json()?).map_err(io_err(out_path))?;
            out.flush().map_err(io_err(out_path))
        }
        Command::Rates { ul_pattern, dl_pattern, n_b, lookup } => {
            let (u, d) = (s.pattern(ul_pattern)?, s.pattern(dl_pattern)?);
            let params = OperatingParams {
                ul_pattern: u.id.clone(),
                dl_pattern: d.id.clone(),
                rho_ul: u.density(),
                rho_dl: d.density(),
                n_b: *n_b,
                dl_mode: s.cfg.system.dl_mode,
                feedback_mode: s.cfg.system.feedback_mode,
            };
            let table = match lookup {
                Some(p) => s.lookup(Some(p))?,
                None => {
                    let sys = &s.cfg.system;
                    build_lookup(
                        sys,
                        &LookupGrids {
                            ul_patterns: std::slice::from_ref(u),
                            dl_patterns: std::slice::from_ref(d),
                            n_b: &[*n_b],
                            v_kmh: &[sys.velocity_kmh],
                            tau_max_us: &[sys.tau_max_us],
                        },
                    )?
                }
            };
            let real = shared_realizations(&s.cfg.system, s.samples, s.seed)?;
            let point = evaluate_operating_point(&s.cfg.system, &params, &table, &real)?;
            let mut out = open_out(out_path)?;
            serde_json::to_writer_pretty(&mut out, &point).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            writeln!(out).map_err(io_err(out_path))?;
            out.flush().map_err(io_err(out_path))
        }
        Command::Region { lookup } => {
            let region = s.region(lookup.as_deref())?;
            let mut out = open_out(out_path)?;
            match cli.common.format {
                Format::Csv => write_csv(&region, &mut out)?,
                Format::Json => write_json(&region, &mut out)?,
            }
            out.flush().map_err(io_err(out_path))
        }
        Command::Optimize { weights, lookup } => {
            let weights = if weights.is_empty() { DEFAULT_WEIGHTS.to_vec() } else { weights.clone() };
            if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
                return Err(Error::Config(format!("weight must lie in [0, 1], got {w}")));
            }
            let region = s.region(lookup.as_deref())?;
            let rows: Vec<OptimumRow> = weights
                .iter()
                .map(|&w| {
                    let p = weighted_optimum(&region.points, w)?;
                    Ok(OptimumRow {
                        weight: w,
                        ul_pattern: &p.params.ul_pattern,
                        dl_pattern: &p.params.dl_pattern,
                        rho_ul: p.params.rho_ul,
                        rho_dl: p.params.rho_dl,
                        n_b: p.params.n_b,
                        dl_mode: p.params.dl_mode,
                        feedback_mode: p.params.feedback_mode,
                        net_ul: p.net_ul,
                        net_dl: p.net_dl,
                        objective: w * p.net_ul + (1.0 - w) * p.net_dl,
                    })
                })
                .collect::<Result<_>>()?;
            let mut out = open_out(out_path)?;
            match cli.common.format {
                Format::Csv => {
                    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
                    for r in &rows {
                        w.serialize(r).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
                    }
                    w.flush().map_err(io_err(out_path))?;
                }
                Format::Json => {
                    serde_json::to_writer_pretty(&mut out, &rows).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    writeln!(out).map_err(io_err(out_path))?;
                }
            }
            out.flush().map_err(io_err(out_path))
        }
    }
}
