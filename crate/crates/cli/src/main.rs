mod config;
mod output;
mod verify;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use matgibbs::energy::{
    energy, linear_energy, refinement_difference, self_similarity_residual, TestFunction,
};
use matgibbs::gibbs::{direction_field, measure_table};
use matgibbs::ifs::check_cap;
use matgibbs::{GibbsData, Word, DEFAULT_CELL_CAP};

use config::{parse_config, Preset, SystemSource};

#[derive(Parser)]
#[command(
    name = "matgibbs",
    version,
    about = "Matrix Ruelle operators, Gibbs and Kusuoka measures for affine IFS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leading eigenvalue and eigenmatrix of the matrix Ruelle operator.
    Eigen(Common),
    /// Write the cylinder table (tau and kappa) at --depth as CSV.
    Measure(Common),
    /// Evaluate a builtin energy pair at --depth and --depth + 1.
    Energy {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Pair::X1X1)]
        pair: Pair,
    },
    /// Run every applicable acceptance check.
    Verify(Common),
    /// Dominant direction of tau on prefixes of a periodic word.
    Direction {
        #[command(flatten)]
        common: Common,
        /// Period of the word, dot-separated 1-based letters.
        #[arg(long, default_value = "1")]
        word: String,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Builtin system: harmonic-gasket or dyadic-1d.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// JSON system description.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pair {
    /// f = h = x1
    #[value(name = "x1-x1")]
    X1X1,
    /// f = x1, h = x_d
    #[value(name = "x1-xd")]
    X1Xd,
    /// f = h = x1^2 + x1 x2 (x1^2 + x1^3 when d = 1)
    Quadratic,
}

struct RunConfig {
    source: SystemSource,
    depth: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
    out: Option<PathBuf>,
}

impl RunConfig {
    fn from_common(c: &Common, default_depth: usize) -> Result<Self> {
        let source = match (&c.preset, &c.config) {
            (Some(name), _) => {
                let preset = Preset::from_name(name).with_context(|| {
                    format!(
                        "unknown preset {name:?} (expected one of: {})",
                        Preset::NAMES.join(", ")
                    )
                })?;
                SystemSource::preset(preset)
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                parse_config(&text).with_context(|| format!("in {}", path.display()))?
            }
            (None, None) => bail!("one of --preset or --config is required"),
        };
        if c.tol.is_nan() || c.tol <= 0.0 {
            bail!("--tol must be positive, got {}", c.tol);
        }
        let depth = c.depth.unwrap_or(default_depth);
        check_cap("depth", source.system.len(), depth, DEFAULT_CELL_CAP)?;
        Ok(RunConfig {
            source,
            depth,
            tol: c.tol,
            max_iter: c.max_iter,
            seed: c.seed,
            out: c.out.clone(),
        })
    }

    fn gibbs(&self) -> Result<GibbsData> {
        Ok(GibbsData::new(
            &self.source.system,
            self.tol,
            self.max_iter,
        )?)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn cmd_eigen(cfg: &RunConfig) -> Result<ExitCode> {
    let g = cfg.gibbs()?;
    let pair = g.pair();
    let mut out = cfg.writer()?;
    writeln!(out, "beta = {:.12}", pair.beta)?;
    let d = pair.q.dim();
    for i in 0..d {
        for j in i..d {
            writeln!(out, "q_{}{} = {:.12}", i + 1, j + 1, pair.q.get(i, j))?;
        }
    }
    writeln!(out, "residual = {:.3e}", pair.residual)?;
    writeln!(out, "iterations = {}", pair.iterations)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_measure(cfg: &RunConfig) -> Result<ExitCode> {
    let g = cfg.gibbs()?;
    let table = measure_table(&g, cfg.depth, DEFAULT_CELL_CAP)?;
    let mut out = cfg.writer()?;
    output::write_measure_csv(&table, &mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_energy(cfg: &RunConfig, pair: Pair) -> Result<ExitCode> {
    let g = cfg.gibbs()?;
    let d = g.system().dim();
    let x1 = TestFunction::coordinate(d, 0);
    let (f, h, name) = match pair {
        Pair::X1X1 => (x1.clone(), x1, "x1-x1"),
        Pair::X1Xd => (x1, TestFunction::coordinate(d, d - 1), "x1-xd"),
        Pair::Quadratic => {
            let mut sq = vec![0; d];
            sq[0] = 2;
            let mut cross = vec![0; d];
            if d > 1 {
                cross[0] = 1;
                cross[1] = 1;
            } else {
                cross[0] = 3;
            }
            let q = TestFunction::polynomial(d, vec![(1.0, sq), (1.0, cross)])?;
            (q.clone(), q, "quadratic")
        }
    };
    let l = cfg.depth;
    let mut out = cfg.writer()?;
    writeln!(out, "pair = {name}")?;
    writeln!(
        out,
        "energy[{l}] = {:.12e}",
        energy(&g, &f, &h, l, DEFAULT_CELL_CAP)?
    )?;
    writeln!(
        out,
        "energy[{}] = {:.12e}",
        l + 1,
        energy(&g, &f, &h, l + 1, DEFAULT_CELL_CAP)?
    )?;
    writeln!(
        out,
        "refinement = {:.3e}",
        refinement_difference(&g, &f, &h, l, DEFAULT_CELL_CAP)?
    )?;
    writeln!(
        out,
        "self_similarity_residual = {:.3e}",
        self_similarity_residual(&g, &f, &h, l, DEFAULT_CELL_CAP)?
    )?;
    if !matches!(pair, Pair::Quadratic) {
        let a = f.gradient(&nalgebra::DVector::zeros(d));
        let b = h.gradient(&nalgebra::DVector::zeros(d));
        writeln!(out, "closed_form = {:.12e}", linear_energy(&g, &a, &b))?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_direction(cfg: &RunConfig, word: &str) -> Result<ExitCode> {
    let g = cfg.gibbs()?;
    let period = Word::parse(word, g.system().len())?;
    if period.is_empty() {
        bail!("--word must be non-empty");
    }
    let mut out = cfg.writer()?;
    writeln!(
        out,
        "depth,residual,{}",
        (1..=g.system().dim())
            .map(|k| format!("v_{k}"))
            .collect::<Vec<_>>()
            .join(",")
    )?;
    for l in 1..=cfg.depth.max(1) {
        let letters: Vec<usize> = period.letters().iter().copied().cycle().take(l).collect();
        let dir = direction_field(&g, &Word::from_zero_based(letters))?;
        write!(
            out,
            "{l},{}",
            output::format_g(dir.residual, output::CSV_DIGITS)
        )?;
        for v in dir.vector.iter() {
            write!(out, ",{}", output::format_g(*v, output::CSV_DIGITS))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cfg: &RunConfig) -> Result<ExitCode> {
    let checks = verify::run(
        &cfg.source,
        &verify::VerifyOptions {
            depth: cfg.depth,
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            seed: cfg.seed,
        },
    )?;
    let mut out = cfg.writer()?;
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        writeln!(out, "ALL {} CHECKS PASSED", checks.len())?;
        out.flush()?;
        Ok(ExitCode::SUCCESS)
    } else {
        writeln!(out, "FAILED {}", failed.join(","))?;
        out.flush()?;
        Ok(ExitCode::from(1))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Eigen(c) => cmd_eigen(&RunConfig::from_common(&c, 0)?),
        Command::Measure(c) => cmd_measure(&RunConfig::from_common(&c, 4)?),
        Command::Energy { common, pair } => cmd_energy(&RunConfig::from_common(&common, 4)?, pair),
        Command::Verify(c) => cmd_verify(&RunConfig::from_common(&c, 6)?),
        Command::Direction { common, word } => {
            cmd_direction(&RunConfig::from_common(&common, 10)?, &word)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
