//! `bspec`: regularity analysis, ray sweeps, eigenvalue searches and seeded
//! dissipativity campaigns for two-point boundary value problems.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use bspec_core::dissipativity::{dissipativity_test, dissipativity_test_with};
use bspec_core::eigen::{eigenvalues_in, EigenOptions, Region};
use bspec_core::experiment::{
    ray_sweep, run_campaign, run_sample, CampaignMode, ExperimentConfig, SigmaDistribution, SweepOptions,
};
use bspec_core::fss::FssOptions;
use bspec_core::green::GreenFunction;
use bspec_core::regularity::{classify_with, Classification};
use bspec_core::{parse_problem, validate, Error as CoreError, Problem};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "bspec", version, about = "Birkhoff regularity and spectral diagnostics for two-point problems")]
struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Validation, regularity and dissipativity report.
    Analyze {
        problem: PathBuf,
        #[arg(long)]
        tol_theta: Option<f64>,
    },
    /// Θ_p(b⁰,b¹) and Θ_p(b¹,b⁰) for p = 0..n.
    Theta {
        problem: PathBuf,
        #[arg(long)]
        tol_theta: Option<f64>,
    },
    /// Characteristic matrix and diagnostics along a ray arg λ = const.
    RaySweep {
        problem: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        arg_lambda: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        rho_grid: Option<Vec<f64>>,
        #[arg(long)]
        tol_theta: Option<f64>,
        /// Skip the Gram condition column.
        #[arg(long)]
        no_gram: bool,
        /// Skip the resolvent column.
        #[arg(long)]
        no_resolvent: bool,
    },
    /// Eigenvalues from zeros of the characteristic determinant.
    Eig {
        problem: PathBuf,
        /// Search 1 ≤ |ρ| ≤ r-max over one branch.
        #[arg(long, default_value_t = 20.0)]
        r_max: f64,
        /// Search a ρ-rectangle instead: re0,re1,im0,im1.
        #[arg(long, value_delimiter = ',', num_args = 4, allow_hyphen_values = true)]
        rect: Option<Vec<f64>>,
    },
    /// Green's function G(x, ξ, λ) on a uniform grid.
    Green {
        problem: PathBuf,
        /// λ as re,im.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// Grid x_i = i/points, i = 0..points.
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
    /// Dissipativity of boundary conditions.
    Dissip {
        #[command(subcommand)]
        action: DissipAction,
    },
    /// Seeded campaign: classify sampled dissipative (or self-adjoint) conditions.
    VerifyKrein {
        /// JSON file with campaign settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<usize>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol_theta: Option<f64>,
        /// Fixed contraction scale instead of the configured distribution.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Dissipative)]
        mode: Mode,
    },
}

#[derive(Subcommand)]
enum DissipAction {
    Test {
        problem: PathBuf,
        #[arg(long)]
        tol_verdict: Option<f64>,
    },
    Sample {
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_enum, default_value_t = Mode::Dissipative)]
        mode: Mode,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Dissipative,
    SelfAdjoint,
}

impl From<Mode> for CampaignMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Dissipative => CampaignMode::Dissipative,
            Mode::SelfAdjoint => CampaignMode::SelfAdjoint,
        }
    }
}

/// Exit status of a successful run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Ok,
    Irregular,
    Counterexample,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Irregular => 2,
            Status::Counterexample => 3,
        }
    }
}

struct Output {
    text: String,
    status: Status,
}

#[derive(Serialize)]
struct Document<T: Serialize> {
    bspec_version: &'static str,
    #[serde(flatten)]
    body: T,
}

fn json_text<T: Serialize>(body: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Document {
        bspec_version: VERSION,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

fn csv_text(body: &str) -> String {
    format!("# bspec {VERSION}\n{body}")
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn load(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_problem(&text)?)
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [re] => Ok(Complex64::new(re.parse()?, 0.0)),
        [re, im] => Ok(Complex64::new(re.parse()?, im.parse()?)),
        _ => bail!("expected re,im, got {s:?}"),
    }
}

fn analyze(problem: &Problem, tol_theta: f64) -> Result<Output> {
    let bc = problem.conditions()?;
    let report = classify_with(&bc, tol_theta)?;
    let status = if report.classification == Classification::Irregular {
        Status::Irregular
    } else {
        Status::Ok
    };
    let text = json_text(json!({
        "name": problem.name,
        "n": problem.expr.order(),
        "validation": validate(&bc),
        "regularity": report,
        "dissipativity": dissipativity_test(&bc)?,
    }))?;
    Ok(Output { text, status })
}

fn theta_table(problem: &Problem, tol_theta: f64, format: Format) -> Result<Output> {
    let bc = problem.conditions()?;
    let report = classify_with(&bc, tol_theta)?;
    let text = match format {
        Format::Json => json_text(json!({ "n": report.n, "q": report.q, "theta": report.theta_by_p }))?,
        Format::Csv => {
            let mut body = String::from("p,forward_re,forward_im,swapped_re,swapped_im,forward_margin,swapped_margin\n");
            for e in &report.theta_by_p {
                let cells = [e.forward.0.re, e.forward.0.im, e.swapped.0.re, e.swapped.0.im, e.forward_margin, e.swapped_margin];
                let cells: Vec<String> = cells.iter().map(|&v| num(v)).collect();
                body.push_str(&format!("{},{}\n", e.p, cells.join(",")));
            }
            csv_text(&body)
        }
    };
    Ok(Output { text, status: Status::Ok })
}

fn sweep(problem: &Problem, config: &ExperimentConfig, opts: &SweepOptions, format: Format) -> Result<Output> {
    let bc = problem.conditions()?;
    let report = classify_with(&bc, config.tol_theta)?;
    if report.classification == Classification::Irregular {
        eprintln!("problem is irregular; the characteristic matrix limit is undefined");
        return Ok(Output {
            text: String::new(),
            status: Status::Irregular,
        });
    }
    let result = match ray_sweep(&bc, &problem.expr, config.arg_lambda, &config.rho_grid, opts) {
        Err(CoreError::NotRegular { p }) => {
            eprintln!("problem is not regular at p = {p} on this ray");
            return Ok(Output {
                text: String::new(),
                status: Status::Irregular,
            });
        }
        r => r?,
    };
    let text = match format {
        Format::Csv => csv_text(&result.to_csv()),
        Format::Json => json_text(&result)?,
    };
    Ok(Output { text, status: Status::Ok })
}

fn eig(problem: &Problem, r_max: f64, rect: Option<Vec<f64>>) -> Result<Output> {
    let bc = problem.conditions()?;
    let region = match rect.as_deref() {
        Some([re0, re1, im0, im1]) => Region::Rect {
            re: (*re0, *re1),
            im: (*im0, *im1),
        },
        Some(_) => bail!("--rect takes four numbers"),
        None => Region::branch(problem.expr.order(), r_max),
    };
    let search = eigenvalues_in(&bc, &problem.expr, region, &EigenOptions::default())?;
    Ok(Output {
        text: json_text(&search)?,
        status: Status::Ok,
    })
}

fn green(problem: &Problem, lambda: Complex64, points: usize, format: Format) -> Result<Output> {
    if points == 0 {
        bail!("--points must be positive");
    }
    let bc = problem.conditions()?;
    let g = GreenFunction::new(&bc, &problem.expr, lambda, &FssOptions::default())?;
    let xs: Vec<f64> = (0..=points).map(|i| i as f64 / points as f64).collect();
    let samples = g.samples(&xs)?;
    let mut values = Vec::with_capacity(xs.len() * xs.len());
    for sx in &samples {
        for sxi in &samples {
            values.push(g.evaluate_samples(sx, sxi));
        }
    }
    let text = match format {
        Format::Json => json_text(json!({ "lambda": { "re": lambda.re, "im": lambda.im }, "values": values }))?,
        Format::Csv => {
            let mut body = String::from("x,xi,re,im,g0_re,g0_im\n");
            for v in &values {
                let cells = [v.x, v.xi, v.value.re, v.value.im, v.g0.re, v.g0.im];
                body.push_str(&cells.iter().map(|&c| num(c)).collect::<Vec<_>>().join(","));
                body.push('\n');
            }
            csv_text(&body)
        }
    };
    Ok(Output { text, status: Status::Ok })
}

fn sample_batch(order: usize, samples: usize, seed: u64, sigma: Option<f64>, mode: Mode) -> Result<Output> {
    let config = ExperimentConfig {
        orders: vec![order],
        samples,
        seed,
        sigma: sigma.map_or(SigmaDistribution::default(), |value| SigmaDistribution::Fixed { value }),
        ..ExperimentConfig::default()
    };
    config.validate(false)?;
    let mut docs = Vec::with_capacity(samples);
    for i in 0..samples {
        docs.push(run_sample(&config, mode.into(), order, i)?.document);
    }
    Ok(Output {
        text: json_text(json!({ "seed": seed, "problems": docs }))?,
        status: Status::Ok,
    })
}

fn campaign(config: &ExperimentConfig, mode: Mode) -> Result<Output> {
    let summary = run_campaign(config, mode.into())?;
    let status = if summary.total_irregular() > 0 {
        eprintln!("{} irregular sample(s); offending problem documents:", summary.total_irregular());
        eprintln!("{}", serde_json::to_string_pretty(&summary.irregular)?);
        Status::Counterexample
    } else {
        Status::Ok
    };
    Ok(Output {
        text: json_text(json!({ "config": config, "summary": summary }))?,
        status,
    })
}

fn krein_config(
    path: Option<&Path>,
    orders: Option<Vec<usize>>,
    samples: Option<usize>,
    seed: Option<u64>,
    tol_theta: Option<f64>,
    sigma: Option<f64>,
) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = orders {
        config.orders = v;
    }
    if let Some(v) = samples {
        config.samples = v;
    }
    if let Some(v) = seed {
        config.seed = v;
    }
    if let Some(v) = tol_theta {
        config.tol_theta = v;
    }
    if let Some(value) = sigma {
        config.sigma = SigmaDistribution::Fixed { value };
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<Output> {
    let defaults = ExperimentConfig::default();
    match cli.command {
        Command::Analyze { problem, tol_theta } => analyze(&load(&problem)?, tol_theta.unwrap_or(defaults.tol_theta)),
        Command::Theta { problem, tol_theta } => theta_table(
            &load(&problem)?,
            tol_theta.unwrap_or(defaults.tol_theta),
            cli.format.unwrap_or(Format::Json),
        ),
        Command::RaySweep {
            problem,
            arg_lambda,
            rho_grid,
            tol_theta,
            no_gram,
            no_resolvent,
        } => {
            let config = ExperimentConfig {
                arg_lambda: arg_lambda.unwrap_or(defaults.arg_lambda),
                rho_grid: rho_grid.unwrap_or_else(|| defaults.rho_grid.clone()),
                tol_theta: tol_theta.unwrap_or(defaults.tol_theta),
                ..defaults
            };
            let opts = SweepOptions {
                gram: !no_gram,
                resolvent: !no_resolvent,
                ..SweepOptions::default()
            };
            sweep(&load(&problem)?, &config, &opts, cli.format.unwrap_or(Format::Csv))
        }
        Command::Eig { problem, r_max, rect } => eig(&load(&problem)?, r_max, rect),
        Command::Green { problem, lambda, points } => {
            green(&load(&problem)?, parse_complex(&lambda)?, points, cli.format.unwrap_or(Format::Json))
        }
        Command::Dissip { action } => match action {
            DissipAction::Test { problem, tol_verdict } => {
                let bc = load(&problem)?.conditions()?;
                let report = dissipativity_test_with(&bc, tol_verdict.unwrap_or(defaults.tol_verdict))?;
                Ok(Output {
                    text: json_text(&report)?,
                    status: Status::Ok,
                })
            }
            DissipAction::Sample {
                order,
                samples,
                seed,
                sigma,
                mode,
            } => sample_batch(order, samples, seed, sigma, mode),
        },
        Command::VerifyKrein {
            config,
            orders,
            samples,
            seed,
            tol_theta,
            sigma,
            mode,
        } => {
            let config = krein_config(config.as_deref(), orders, samples, seed, tol_theta, sigma)?;
            campaign(&config, mode)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("BSPEC_THREADS") else {
        return Ok(());
    };
    let threads: usize = v.trim().parse().map_err(|_| anyhow!("BSPEC_THREADS must be a positive integer, got {v:?}"))?;
    if threads == 0 {
        bail!("BSPEC_THREADS must be a positive integer");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    let result = configure_threads().and_then(|_| run(cli)).and_then(|o| {
        emit(out.as_deref(), &o.text)?;
        Ok(o.status)
    });
    match result {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
