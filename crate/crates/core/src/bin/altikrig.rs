use std::path::PathBuf;
use std::process::ExitCode;

use altikrig::analysis::ClimatologySource;
use altikrig::pipeline::{self, FitStatus, PipelineError, PredictMode, PredictOptions, Scenario};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "altikrig", version, about = "Altimetric water levels on river networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Climatology {
    Gauge,
    Altimetry,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic data set.
    Simulate {
        /// Simulation config JSON; the Mekong-like preset when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit covariance parameters.
    Fit {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, default_value = "S-I")]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interpolate series at target locations.
    Predict {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
        #[arg(long, default_value_t = 5)]
        step_days: u32,
        #[arg(long, default_value = "uk")]
        mode: String,
        #[arg(long, default_value = "S-I")]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flood indices and skill of predicted series against gauges.
    Validate {
        #[arg(long)]
        network: PathBuf,
        /// Gauge CSV; `<network>/gauges.csv` when omitted.
        #[arg(long)]
        gauges: Option<PathBuf>,
        /// Directory of `<target>.<source>.csv` series.
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        from_year: Option<i32>,
        #[arg(long)]
        to_year: Option<i32>,
        #[arg(long, value_enum, default_value = "gauge")]
        climatology: Climatology,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let n = pipeline::cmd_simulate(config.as_deref(), seed, &out)?;
            eprintln!("simulated {n} observations into {}", out.display());
        }
        Command::Fit {
            network,
            obs,
            scenario,
            out,
        } => {
            let scenario: Scenario = scenario.parse()?;
            let r = pipeline::cmd_fit(&network, &obs, scenario, &out)?;
            eprintln!(
                "{scenario}: {} residuals, {} bins, sill {:.4} m2",
                r.residuals,
                r.bins_used,
                r.params.sigma2_river + r.params.sigma2_basin
            );
            if r.status == FitStatus::AtBound {
                eprintln!("warning: {}", r.message.as_deref().unwrap_or("fit at bound"));
            }
        }
        Command::Predict {
            network,
            obs,
            params,
            targets,
            from,
            to,
            step_days,
            mode,
            scenario,
            out,
        } => {
            if from > to || step_days == 0 {
                return Err(PipelineError::Usage("need --from <= --to and --step-days > 0".into()));
            }
            let opts = PredictOptions {
                scenario: scenario.parse()?,
                window: (from, to),
                step_days,
                mode: mode.parse::<PredictMode>()?,
            };
            let n = pipeline::cmd_predict(&network, &obs, &params, &targets, &opts, &out)?;
            eprintln!("wrote {n} series");
        }
        Command::Validate {
            network,
            gauges,
            series,
            from_year,
            to_year,
            climatology,
            out,
        } => {
            let gauges = gauges.unwrap_or_else(|| network.join("gauges.csv"));
            let years = match (from_year, to_year) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(PipelineError::Usage("give both --from-year and --to-year".into())),
            };
            let mode = match climatology {
                Climatology::Gauge => ClimatologySource::Gauge,
                Climatology::Altimetry => ClimatologySource::Altimetry,
            };
            let r = pipeline::cmd_validate(&network, &gauges, &series, years, mode, &out)?;
            for s in r.skill.iter().filter(|s| s.location.is_none()) {
                let f = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
                eprintln!(
                    "{}: flood PoD {} FAR {}, drought PoD {} FAR {}",
                    s.source.as_str(),
                    f(s.pod_flood),
                    f(s.far_flood),
                    f(s.pod_drought),
                    f(s.far_drought)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
