mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use entrosteer::connection::InequalityId;
use entrosteer::LogBase;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "entrosteer", version, about = "Entropies of binned densities and binned EPR-steering witnesses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub dims: usize,
}

fn parse_model(s: &str) -> Result<ModelSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 && parts.len() != 3 {
        return Err("expected SIGMA_PLUS,SIGMA_MINUS[,DIMS]".into());
    }
    let num = |p: &str| {
        let v = p.rsplit('=').next().unwrap_or(p);
        v.parse::<f64>().map_err(|_| format!("cannot parse {p:?}"))
    };
    let dims = match parts.get(2) {
        Some(d) => d.parse().map_err(|_| format!("cannot parse dims {d:?}"))?,
        None => 1,
    };
    Ok(ModelSpec {
        sigma_plus: num(parts[0])?,
        sigma_minus: num(parts[1])?,
        dims,
    })
}

/// Comma-separated numbers given as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

fn parse_list(s: &str) -> Result<List, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("cannot parse {p:?} as a number")))
        .collect::<Result<_, _>>()
        .map(List)
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Logarithm base of every reported entropy: 2, e or 10.
    #[arg(long)]
    pub base: Option<LogBase>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quadrature {
    Position,
    Momentum,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropies, conditional entropies and mutual informations of one input.
    Entropy {
        /// Histogram `.csv` or density `.json`.
        input: PathBuf,
        /// Window widths: overrides histogram widths, or bins a density.
        #[arg(long, value_parser = parse_list)]
        widths: Option<List>,
        /// Rescale an input whose total is not one instead of rejecting it.
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Checks the window decomposition and every continuous/binned bound.
    VerifyConnection {
        /// Density `.json`; omit when `--model` is given.
        input: Option<PathBuf>,
        /// Double-Gaussian model `SIGMA_PLUS,SIGMA_MINUS[,DIMS]`.
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelSpec>,
        #[arg(long, value_enum, default_value = "position")]
        quadrature: Quadrature,
        #[arg(long, value_parser = parse_list, required = true)]
        widths: List,
        #[arg(long)]
        normalize: bool,
        /// Include the per-window terms in the report.
        #[arg(long)]
        windows: bool,
        #[arg(long, default_value_t = 8.0)]
        samples_per_sigma: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Binned steering witness from histograms or the model.
    Steering {
        #[arg(long, requires = "k_hist")]
        x_hist: Option<PathBuf>,
        #[arg(long, requires = "x_hist")]
        k_hist: Option<PathBuf>,
        #[arg(long, value_parser = parse_model, conflicts_with_all = ["x_hist", "k_hist"])]
        model: Option<ModelSpec>,
        /// Position window widths (a list with `--scan`).
        #[arg(long, value_parser = parse_list)]
        dx: Option<List>,
        /// Wavenumber window widths (a list with `--scan`).
        #[arg(long, value_parser = parse_list)]
        dk: Option<List>,
        /// Evaluate every width pair; pairs are zipped unless `--grid`.
        #[arg(long, requires = "model")]
        scan: bool,
        /// Scan the full `dx × dk` product.
        #[arg(long, requires = "scan")]
        grid: bool,
        /// Condition A on B instead of B on A.
        #[arg(long)]
        swap_roles: bool,
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = 8.0)]
        samples_per_sigma: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Gap of one bound as every window width is repeatedly halved.
    Scan {
        input: Option<PathBuf>,
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelSpec>,
        #[arg(long, value_enum, default_value = "position")]
        quadrature: Quadrature,
        #[arg(long, value_parser = parse_list, required = true)]
        widths: List,
        #[arg(long, default_value_t = 3)]
        halvings: usize,
        #[arg(long, value_parser = parse_row, default_value = "marginal_x")]
        row: InequalityId,
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = 8.0)]
        samples_per_sigma: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Continuous and binned conditional mutual information of a triple.
    ProbeCmi {
        /// Three-axis density `.json`; omit for a seeded random Gaussian.
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_list, default_value = "1")]
        widths: List,
        #[arg(long)]
        normalize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Writes model or random-mixture densities, optionally binned.
    Generate {
        #[arg(long, value_parser = parse_model, required_unless_present = "mixture")]
        model: Option<ModelSpec>,
        /// Random Gaussian mixture with this many axes.
        #[arg(long, conflicts_with = "model")]
        mixture: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_list)]
        dx: Option<List>,
        #[arg(long, value_parser = parse_list)]
        dk: Option<List>,
        /// Also write binned histograms with a widths sidecar.
        #[arg(long)]
        histogram: bool,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8.0)]
        samples_per_sigma: f64,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_row(s: &str) -> Result<InequalityId, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        let names: Vec<String> = InequalityId::TABLE
            .iter()
            .chain([&InequalityId::Vector])
            .map(|id| serde_json::to_value(id).expect("serializes").as_str().unwrap_or_default().to_string())
            .collect();
        format!("unknown row {s:?}; expected one of {}", names.join(", "))
    })
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    match cli.command {
        Command::Entropy {
            input,
            widths,
            normalize,
            common,
        } => commands::entropy(&input, widths.as_ref().map(|w| w.0.as_slice()), normalize, &common),
        Command::VerifyConnection {
            input,
            model,
            quadrature,
            widths,
            normalize,
            windows,
            samples_per_sigma,
            common,
        } => {
            let source = commands::DensitySource::resolve(input, model, quadrature, samples_per_sigma)?;
            commands::verify_connection(&source, &widths.0, normalize, windows, &common)
        }
        Command::Steering {
            x_hist,
            k_hist,
            model,
            dx,
            dk,
            scan,
            grid,
            swap_roles,
            normalize,
            samples_per_sigma,
            common,
        } => commands::steering(commands::SteeringArgs {
            x_hist,
            k_hist,
            model,
            dx: dx.map(|l| l.0),
            dk: dk.map(|l| l.0),
            scan,
            grid,
            swap_roles,
            normalize,
            samples_per_sigma,
            common,
        }),
        Command::Scan {
            input,
            model,
            quadrature,
            widths,
            halvings,
            row,
            normalize,
            samples_per_sigma,
            common,
        } => {
            let source = commands::DensitySource::resolve(input, model, quadrature, samples_per_sigma)?;
            commands::scan(&source, &widths.0, halvings, row, normalize, &common)
        }
        Command::ProbeCmi {
            input,
            seed,
            widths,
            normalize,
            common,
        } => commands::probe_cmi(input.as_deref(), seed, &widths.0, normalize, &common),
        Command::Generate {
            model,
            mixture,
            seed,
            dx,
            dk,
            histogram,
            out_dir,
            samples_per_sigma,
            common,
        } => commands::generate(commands::GenerateArgs {
            model,
            mixture,
            seed,
            dx: dx.map(|l| l.0),
            dk: dk.map(|l| l.0),
            histogram,
            out_dir,
            samples_per_sigma,
            common,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ENTROSTEER_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 5,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.text);
            if let Some(b) = out.breach {
                eprintln!("error: tolerance breach: {b}");
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
