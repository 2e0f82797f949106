//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde::Serialize;

use crate::bench::{self, Family};
use crate::error::{Error, Result};
use crate::estimator::{self, CountEstimate, RunConfig};
use crate::model::{parse_with_notes, InputFormat, Polytope};
use crate::oracle;
use crate::rng::{Domain, Rng};
use crate::sampler;

#[derive(Parser, Debug)]
#[command(
    name = "latcount",
    version,
    about = "Approximate lattice point counting in polytopes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate the number of lattice points.
    Count(CountArgs),
    /// Count lattice points exactly by enumeration.
    Exact(ExactArgs),
    /// Print sampled lattice points, one per line.
    Sample(SampleArgs),
    /// Write a generated benchmark instance.
    Gen(GenArgs),
    /// Run the relative-error experiment on a benchmark family.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Polytope file, or `-` for standard input.
    pub file: PathBuf,
    /// Input format: native or dense-matrix.
    #[arg(long, default_value = "native")]
    pub format: InputFormat,
}

#[derive(Args, Debug)]
pub struct CountArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per level per round [default: 2/(δε²) rounded up to a multiple of γ].
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub gamma: usize,
    /// Hit-and-run steps per sample [default: dimension].
    #[arg(long)]
    pub walk_len: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    pub rmin: f64,
    #[arg(long, default_value_t = 0.6)]
    pub rmax: f64,
    #[arg(long, default_value_t = 0.005)]
    pub mu: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_rounds: usize,
    /// Rejection cap per sampling call [default: max(10⁵, 10⁴·s)].
    #[arg(long)]
    pub max_attempts: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub max_disturbs: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Print the full result as JSON.
    #[arg(long)]
    pub json: bool,
}

impl CountArgs {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            s: self.s.unwrap_or_else(|| {
                estimator::default_sample_size(self.epsilon, self.delta, self.gamma.max(1))
            }),
            gamma: self.gamma,
            w: self.walk_len,
            r_min: self.rmin,
            r_max: self.rmax,
            mu: self.mu,
            seed: self.seed,
            max_rounds: self.max_rounds,
            max_attempts: self.max_attempts,
            max_disturbs: self.max_disturbs,
            threads: self.threads,
        }
    }
}

#[derive(Args, Debug)]
pub struct ExactArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Refuse bounding boxes with more lattice points than this.
    #[arg(long, default_value_t = BigUint::from(oracle::DEFAULT_LIMIT))]
    pub limit: BigUint,
    /// Also print every lattice point (at most 10⁵).
    #[arg(long)]
    pub dump_points: bool,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hit-and-run steps per sample [default: dimension].
    #[arg(long)]
    pub walk_len: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub family: GenFamily,
}

#[derive(Subcommand, Debug)]
pub enum GenFamily {
    /// Random integer rows inside the box [−λ, λ]ⁿ.
    Random {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Randomly rotated box with one long axis.
    Thinrect {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        tau: f64,
        /// Skip the rotation.
        #[arg(long)]
        axis_aligned: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// random, thinrect or standard.
    #[arg(long, default_value = "standard")]
    pub family: Family,
    /// `tight` (ε=0.2, δ=0.1), `loose` (ε=0.5, δ=0.1) or a JSON run configuration file.
    #[arg(long, default_value = "tight")]
    pub config: String,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Seed for instance generation and runs.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV report path.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Serialize)]
struct CountOutput<'a> {
    #[serde(flatten)]
    estimate: &'a CountEstimate,
    config: &'a RunConfig,
}

/// Parses `args` (program name first) and runs the command. Returns the exit
/// code: 0 success, 1 usage, 2 input error, 3 resource cap.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read_input(input: &InputArgs, err: &mut dyn Write) -> Result<Polytope> {
    let text = if input.file == Path::new("-") {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(&input.file)?
    };
    let parsed = parse_with_notes(&text, input.format)?;
    for note in &parsed.notes {
        writeln!(err, "note: {note}")?;
    }
    Ok(parsed.polytope)
}

fn write_to(path: &Option<PathBuf>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Count(args) => {
            let p = read_input(&args.input, err)?;
            let cfg = args.config();
            let start = Instant::now();
            let est = estimator::estimate(&p, &cfg)?;
            if args.json {
                // Wall time is left out so equal seeds give equal bytes.
                let json = serde_json::to_string_pretty(&CountOutput {
                    estimate: &est,
                    config: &cfg,
                })
                .map_err(|e| Error::Io(e.into()))?;
                writeln!(out, "{json}")?;
            } else {
                writeln!(out, "estimate: {}", est.estimate)?;
                writeln!(out, "r: {}", est.r)?;
                writeln!(out, "v: {}", est.v)?;
                writeln!(out, "chain length: {}", est.chain_length)?;
                writeln!(out, "rounds: {}", est.rounds)?;
                writeln!(out, "samples: {}", est.total_samples)?;
                writeln!(out, "time: {:.3} s", start.elapsed().as_secs_f64())?;
            }
        }
        Command::Exact(args) => {
            let p = read_input(&args.input, err)?;
            let r = oracle::exact_count(&p, &args.limit, args.dump_points)?;
            writeln!(out, "{}", r.count)?;
            if args.dump_points {
                match r.points {
                    Some(points) => {
                        for q in points {
                            writeln!(out, "{q}")?;
                        }
                    }
                    None => writeln!(
                        err,
                        "note: more than {} points, list omitted",
                        oracle::MAX_DUMP
                    )?,
                }
            }
        }
        Command::Sample(args) => {
            let p = read_input(&args.input, err)?;
            if args.count == 0 {
                return Ok(());
            }
            let w = args.walk_len.unwrap_or(p.dim());
            let mut rng = Rng::derive(args.seed, Domain::Sample, 0, 0);
            let set = sampler::sample_polytope(&p, args.count, w, &mut rng)?;
            for q in set.points {
                writeln!(out, "{q}")?;
            }
        }
        Command::Gen(args) => match args.family {
            GenFamily::Random {
                m,
                n,
                lambda,
                seed,
                output,
            } => {
                let mut rng = Rng::derive(seed, Domain::Generator, 0, 0);
                let g = bench::gen_random_counted(m, n, lambda, &mut rng)?;
                if g.redraws > 0 {
                    writeln!(err, "note: {} infeasible draws discarded", g.redraws)?;
                }
                write_to(&output, &g.polytope.to_native(), out)?;
            }
            GenFamily::Thinrect {
                n,
                tau,
                axis_aligned,
                seed,
                output,
            } => {
                let mut rng = Rng::derive(seed, Domain::Generator, 1, 0);
                let p = bench::gen_thin_rect(n, tau, &mut rng, !axis_aligned)?;
                write_to(&output, &p.to_native(), out)?;
            }
        },
        Command::Bench(args) => {
            let mut cfg = match args.config.as_str() {
                "tight" => RunConfig::with_bounds(0.2, 0.1),
                "loose" => RunConfig::with_bounds(0.5, 0.1),
                path => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str(&text)
                        .map_err(|e| Error::InvalidConfig(format!("{path}: {e}")))?
                }
            };
            cfg.seed = args.seed;
            let suite = bench::family_suite(args.family, args.seed)?;
            let report = bench::bound_experiment(&suite, &cfg, args.repeats)?;
            match &args.output {
                Some(path) => report.write_csv(std::fs::File::create(path)?)?,
                None => report.write_csv(&mut *out)?,
            }
            if let Some(path) = &args.json {
                let json =
                    serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.into()))?;
                std::fs::write(path, json)?;
            }
            writeln!(
                err,
                "{} runs on {} instances, {:.1}% within ±{}",
                report.runs.len(),
                suite.len(),
                100.0 * report.frequency,
                cfg.epsilon
            )?;
        }
    }
    Ok(())
}
