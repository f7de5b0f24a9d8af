use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use super::{
    oversampled_count, run_recovery_experiment, Experiment, ExperimentConfig, RateRow,
    SchemeChoice,
};
use crate::error::{Error, Result};
use crate::indexing::{enumerate_threshold, smallest_m, IndexSet};
use crate::least_squares::Approximant;
use crate::sampling::{draw_samples, subsample_with, NuSpec, SamplePlan, Scheme};

#[derive(Debug, Parser)]
#[command(name = "bochner-ls", version, about = "Weighted least-squares recovery in polynomial chaos bases")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Overrides `experiment.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Directory for the output files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Overrides `experiment.scheme`.
    #[arg(long, global = true, value_parser = ["i", "ii"])]
    scheme: Option<String>,

    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sorted weights, the threshold set and the widths d_n.
    Widths,
    /// Draw a sample plan.
    Sample,
    /// One recovery at `experiment.n`.
    Recover,
    /// One PDE collocation run at `experiment.n`.
    Pde,
    /// Rate sweep over `experiment.n_grid`.
    Rates,
}

#[derive(Serialize)]
struct WidthRow {
    n: usize,
    d_n: f64,
}

#[derive(Serialize)]
struct WidthsReport<'a> {
    sigmas: &'a IndexSet,
    xi: f64,
    lambda_size: usize,
    lambda: &'a IndexSet,
    widths: Vec<WidthRow>,
}

#[derive(Serialize)]
struct PdeReport<'a> {
    nh: usize,
    row: &'a RateRow,
    approximant: Option<&'a Approximant>,
}

/// Runs the command line and returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let scheme = cli.scheme.as_deref().map(SchemeChoice::parse).transpose()?;
    let config = config.with_overrides(cli.seed, scheme);
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Widths => widths(cli, &config),
        Command::Sample => sample(cli, &config),
        Command::Recover => recover(cli, &config),
        Command::Pde => pde(cli, &config),
        Command::Rates => rates(cli, &config),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn widths(cli: &Cli, config: &ExperimentConfig) -> Result<()> {
    let count = config.widths_count;
    let sigmas = smallest_m(&config.weights, count + 1)?;
    let lambda = enumerate_threshold(&config.weights, config.widths_xi)?;
    let widths = sigmas
        .sigmas()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, s)| WidthRow { n: i, d_n: 1.0 / s })
        .collect();
    let shown = sigmas.truncated(count);
    let report = WidthsReport {
        sigmas: &shown,
        xi: config.widths_xi,
        lambda_size: lambda.len(),
        lambda: &lambda,
        widths,
    };
    write_json(&cli.out.join("widths.json"), &report)?;
    if !cli.quiet {
        println!("|Lambda({})| = {}, d_{} = {:e}", config.widths_xi, lambda.len(), count, 1.0 / sigmas.sigmas()[count]);
    }
    Ok(())
}

fn sample(cli: &Cli, config: &ExperimentConfig) -> Result<()> {
    let m = config.sample_m;
    let nu = NuSpec::with_tail(config.family, &config.weights, m, config.sampling.tail_tol, config.sampling.max_tail)?;
    let dims = nu.active_dims().max(1);
    let plan: SamplePlan = match config.scheme {
        SchemeChoice::I => draw_samples(&nu, config.sample_count, config.seed, dims, Scheme::IidSchemeI)?,
        SchemeChoice::II => {
            let count = config.sample_count.max(oversampled_count(config.sampling.oversampling, m.max(2)));
            let full = draw_samples(&nu, count, config.seed, dims, Scheme::IidForSubsampling)?;
            let target = (config.sampling.c2 * m as f64).ceil() as usize;
            subsample_with(&full, config.family, &nu.basis, target, &config.sampling.subsample)?
        }
    };
    let file = fs::File::create(cli.out.join("plan.csv"))?;
    plan.write_csv(BufWriter::new(file))?;
    write_json(&cli.out.join("plan.json"), &plan)?;
    if !cli.quiet {
        println!("{} points in {} dimensions ({})", plan.len(), plan.dims(), plan.scheme().name());
    }
    Ok(())
}

fn recover(cli: &Cli, config: &ExperimentConfig) -> Result<()> {
    let exp = Experiment::new(config.clone())?;
    let rec = exp.run_one(config.n)?;
    if let Some(a) = &rec.approximant {
        write_json(&cli.out.join("approximant.json"), a)?;
    }
    write_json(&cli.out.join("recover.json"), &rec.row)?;
    if !cli.quiet {
        print_row(&rec.row);
    }
    if rec.approximant.is_none() {
        return Err(Error::IllConditionedInput {
            lambda_min: rec.row.lambda_min,
        });
    }
    Ok(())
}

fn pde(cli: &Cli, config: &ExperimentConfig) -> Result<()> {
    if !config.target.is_pde() {
        return Err(Error::Config(
            "the pde subcommand needs experiment.target = pde_lognormal or pde_affine".into(),
        ));
    }
    let exp = Experiment::new(config.clone())?;
    let rec = exp.run_one(config.n)?;
    let report = PdeReport {
        nh: config.field.nh,
        row: &rec.row,
        approximant: rec.approximant.as_ref(),
    };
    write_json(&cli.out.join("pde.json"), &report)?;
    if !cli.quiet {
        print_row(&rec.row);
    }
    if rec.approximant.is_none() {
        return Err(Error::IllConditionedInput {
            lambda_min: rec.row.lambda_min,
        });
    }
    Ok(())
}

fn rates(cli: &Cli, config: &ExperimentConfig) -> Result<()> {
    let report = run_recovery_experiment(config)?;
    let file = fs::File::create(cli.out.join("rates.csv"))?;
    report.write_csv(BufWriter::new(file))?;
    write_json(&cli.out.join("rates.json"), &report)?;
    if !cli.quiet {
        for row in &report.rows {
            print_row(row);
        }
        match report.fitted_slope {
            Some(s) => println!("slope {s:.4} (theory {:.4})", report.theory_slope),
            None => println!("slope fit: {}", report.fit_status),
        }
    }
    Ok(())
}

fn print_row(row: &RateRow) {
    println!(
        "n={} m={} samples={} lambda_min={:.4} rmse={:.4e} status={}",
        row.n, row.m, row.samples_used, row.lambda_min, row.rmse, row.status
    );
}
