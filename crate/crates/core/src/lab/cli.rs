//! `haarlab` command line. Exit codes: 0 pass, 1 criterion failure,
//! 2 usage or input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{experiment_names, run_experiment, ExperimentConfig, EXPERIMENTS};
use crate::error::{Error, Result};
use crate::grid::{adjacent_family_on, GridSpec};
use crate::haar::{analyze, coefficients_from_csv, coefficients_to_csv, function_from_csv, function_to_csv, synthesize};
use crate::kernels::{discretize, sio_commutator, KernelSpec};
use crate::martops::{
    expectation_operator, lambda, multiplier, paraproduct, paraproduct_adjoint, read_container, remainder,
    write_container, DenseOperator,
};
use crate::median::{complex_median, report, OrthoLinePair, WeightedPointSet};
use crate::norms::{
    besov_continuous, besov_martingale, bmo_martingale, lorentz_norm, schatten, weak_besov, LorentzIndex, NormReport,
};

#[derive(Parser, Debug)]
#[command(name = "haarlab", version, about = "Haar systems, paraproducts, Schatten norms and quadrant medians")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "HAARLAB_SEED")]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Haar analysis and synthesis of sampled functions.
    #[command(subcommand)]
    Haar(HaarCommand),
    /// Compute a norm: schatten, lorentz, besov, bmo, weak_besov, continuous_besov.
    Norm(NormArgs),
    /// Orthogonal line pairs with a quarter of the mass in each quadrant.
    #[command(subcommand)]
    Median(MedianCommand),
    /// Assemble operators as dense matrices.
    #[command(subcommand)]
    Op(OpCommand),
    /// Run or list named experiments.
    #[command(subcommand)]
    Exp(ExpCommand),
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Grid as JSON; overrides the other grid flags.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    branching: usize,
    #[arg(long, default_value_t = 4)]
    levels: usize,
}

impl GridArgs {
    fn build(&self) -> Result<GridSpec> {
        match &self.grid {
            Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
            None if self.dim == 1 => GridSpec::interval(self.branching, self.levels),
            None if self.branching == 2 => GridSpec::unit_cube(self.dim, self.levels),
            None => Err(Error::InvalidArgument("branching other than 2 needs dim = 1".into())),
        }
    }
}

#[derive(Subcommand, Debug)]
enum HaarCommand {
    /// Function CSV (cell_index,re,im) to coefficient CSV.
    Analyze {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        input: PathBuf,
    },
    /// Coefficient CSV back to function CSV.
    Synthesize {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args, Debug)]
struct NormArgs {
    name: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Second Lorentz index; "inf" allowed. Defaults to p.
    #[arg(long)]
    q: Option<String>,
    /// Excision radius for continuous_besov.
    #[arg(long)]
    eps: Option<f64>,
    /// Operator container, function CSV, or one number per line (lorentz).
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Subcommand, Debug)]
enum MedianCommand {
    /// Point CSV (re,im,w) to a certified line pair.
    Solve {
        #[arg(long)]
        input: PathBuf,
    },
    /// Check a given pair against the 1/16 threshold.
    Verify {
        #[arg(long)]
        input: PathBuf,
        /// re,im
        #[arg(long, allow_hyphen_values = true)]
        center: String,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
    },
}

#[derive(Subcommand, Debug)]
enum OpCommand {
    /// multiplier, paraproduct, paraproduct_adjoint, lambda, remainder,
    /// expectation, kernel, kernel_commutator.
    Build {
        name: String,
        #[command(flatten)]
        grid: GridArgs,
        /// Symbol as function CSV.
        #[arg(long)]
        symbol: Option<PathBuf>,
        /// Level of the expectation operator.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "hilbert")]
        kernel: String,
        /// Kernel parameters as JSON.
        #[arg(long)]
        kernel_params: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum ExpCommand {
    /// Run an experiment; the name may come from --config instead.
    /// Writes the JSON report and a CSV of trial records next to it.
    Run { name: Option<String> },
    /// Experiment names with their pass criteria.
    List,
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code.
pub fn cli_main<I, T>(args: I) -> i32
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
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                s.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn read(p: &Path) -> Result<String> {
    Ok(fs::read_to_string(p)?)
}

fn parse_q(q: &Option<String>, p: f64) -> Result<f64> {
    match q.as_deref() {
        None => Ok(p),
        Some("inf") | Some("infinity") => Ok(f64::INFINITY),
        Some(s) => s.parse().map_err(|_| Error::Parse(format!("bad q: {s}"))),
    }
}

fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Haar(HaarCommand::Analyze { grid, input }) => {
            let g = grid.build()?;
            let f = function_from_csv(&g, &read(input)?)?;
            emit(&cli.out, &coefficients_to_csv(&analyze(&f)))?;
            Ok(0)
        }
        Command::Haar(HaarCommand::Synthesize { grid, input }) => {
            let g = grid.build()?;
            let c = coefficients_from_csv(&g, &read(input)?)?;
            emit(&cli.out, &function_to_csv(&synthesize(&c)))?;
            Ok(0)
        }
        Command::Norm(args) => norm(cli, args),
        Command::Median(MedianCommand::Solve { input }) => {
            let p = WeightedPointSet::from_csv(&read(input)?)?;
            let pair = complex_median(&p)?;
            let r = report(&p, &pair);
            emit(&cli.out, &serde_json::to_string_pretty(&r)?)?;
            Ok(if r.certified { 0 } else { 1 })
        }
        Command::Median(MedianCommand::Verify { input, center, theta }) => {
            let p = WeightedPointSet::from_csv(&read(input)?)?;
            let c: Vec<f64> = center
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad center: {center}"))))
                .collect::<Result<_>>()?;
            if c.len() != 2 {
                return Err(Error::Parse(format!("center needs re,im: {center}")));
            }
            let r = report(&p, &OrthoLinePair::from_angle([c[0], c[1]], *theta));
            emit(&cli.out, &serde_json::to_string_pretty(&r)?)?;
            Ok(if r.certified { 0 } else { 1 })
        }
        Command::Op(OpCommand::Build { name, grid, symbol, k, kernel, kernel_params }) => {
            let g = grid.build()?;
            let sym = || -> Result<_> {
                let path = symbol.as_ref().ok_or_else(|| Error::InvalidArgument(format!("{name} needs --symbol")))?;
                function_from_csv(&g, &read(path)?)
            };
            let kspec = || -> Result<KernelSpec> {
                let params = match kernel_params {
                    Some(s) => serde_json::from_str(s)?,
                    None => serde_json::json!({ "n": g.dim() }),
                };
                KernelSpec::from_name(kernel, &params)
            };
            let op: DenseOperator = match name.as_str() {
                "multiplier" => multiplier(&sym()?),
                "paraproduct" => paraproduct(&sym()?),
                "paraproduct_adjoint" => paraproduct_adjoint(&sym()?),
                "lambda" => lambda(&sym()?),
                "remainder" => remainder(&sym()?),
                "expectation" => expectation_operator(&g, k.unwrap_or(0))?,
                "kernel" => discretize(&kspec()?, &g)?,
                "kernel_commutator" => sio_commutator(&kspec()?, &sym()?)?,
                other => return Err(Error::InvalidArgument(format!("unknown operator {other}"))),
            };
            let out = cli.out.as_ref().ok_or_else(|| Error::InvalidArgument("op build needs --out".into()))?;
            write_container(&op, fs::File::create(out)?)?;
            Ok(0)
        }
        Command::Exp(ExpCommand::List) => {
            let mut s = String::new();
            for (name, crit) in EXPERIMENTS {
                s.push_str(&format!("{name}\t{crit}\n"));
            }
            emit(&cli.out, &s)?;
            Ok(0)
        }
        Command::Exp(ExpCommand::Run { name }) => {
            let mut cfg = match &cli.config {
                Some(p) => ExperimentConfig::from_json(&read(p)?)?,
                None => ExperimentConfig::named(name.as_deref().ok_or_else(|| {
                    Error::ConfigInvalid(format!("exp run needs a name or --config; known: {}", experiment_names().join(", ")))
                })?),
            };
            if let Some(n) = name {
                if cli.config.is_some() && n != &cfg.experiment {
                    return Err(Error::ConfigInvalid(format!("config is for {} but {n} was requested", cfg.experiment)));
                }
            }
            if cli.seed.is_some() {
                cfg.seed = cli.seed;
            }
            let out = cli.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from));
            let rep = run_experiment(&cfg)?;
            for v in &rep.verdicts {
                eprintln!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            match &out {
                Some(p) => {
                    fs::write(p, rep.to_json())?;
                    fs::write(p.with_extension("csv"), rep.to_csv())?;
                }
                None => emit(&None, &rep.to_json())?,
            }
            Ok(if rep.pass { 0 } else { 1 })
        }
    }
}

fn norm(cli: &Cli, args: &NormArgs) -> Result<i32> {
    let q = parse_q(&args.q, args.p)?;
    let idx = LorentzIndex::new(args.p, q)?;
    let params = serde_json::json!({ "p": args.p, "q": if q.is_finite() { serde_json::json!(q) } else { serde_json::json!("inf") } });
    let (value, grid, params) = match args.name.as_str() {
        "schatten" => {
            let op = read_container(fs::File::open(&args.input)?)?;
            (schatten(&op, idx)?, op.grid().clone(), params)
        }
        "lorentz" => {
            let vals: Vec<f64> = read(&args.input)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| l.parse::<f64>().map_err(|_| Error::Parse(format!("bad number: {l}"))))
                .collect::<Result<_>>()?;
            (lorentz_norm(&vals, idx), args.grid.build()?, params)
        }
        name => {
            let g = args.grid.build()?;
            let b = function_from_csv(&g, &read(&args.input)?)?;
            let (v, params) = match name {
                "besov" => (besov_martingale(&b, args.p)?, serde_json::json!({ "p": args.p })),
                "bmo" => (bmo_martingale(&b), serde_json::json!({})),
                "weak_besov" => (weak_besov(&b, &adjacent_family_on(&g)?, idx)?, params),
                "continuous_besov" => {
                    let eps = args.eps.unwrap_or(2.0 * g.cube_side(g.levels()) * (g.dim() as f64).sqrt());
                    (besov_continuous(&b, args.p, eps)?, serde_json::json!({ "p": args.p, "eps": eps }))
                }
                other => return Err(Error::InvalidArgument(format!("unknown norm {other}"))),
            };
            (v, g, params)
        }
    };
    let rep = NormReport { norm_name: args.name.clone(), params, value, grid, seed: cli.seed };
    emit(&cli.out, &serde_json::to_string_pretty(&rep)?)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(cli_main(["haarlab", "bogus"]), 2);
        assert_eq!(cli_main(["haarlab", "exp", "run", "no_such_experiment", "--seed", "1"]), 2);
        assert_eq!(cli_main(["haarlab", "exp", "run", "median_stress"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(cli_main(["haarlab", "--help"]), 0);
    }
}
