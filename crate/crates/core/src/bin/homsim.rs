use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use homsim::config::{RunConfig, Scenario};
use homsim::mc::ClickStream;
use homsim::plot::{Figure, Series, Style, PALETTE};
use homsim::tcspc::{correlate, CorrelatorConfig, Normalization};
use homsim::units::{ns, to_ns, PS};
use homsim::{pipeline, presets, Error, Result};

/// Two-photon interference simulator: presets, config-driven runs and
/// offline correlation of click streams.
#[derive(Parser)]
#[command(name = "homsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or a built-in preset.
    Run {
        /// Config file (TOML or JSON), or a scenario name together with --preset.
        target: Option<String>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's output_dir, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Simulated acquisition time in seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// List the built-in presets, or print one as TOML.
    Presets {
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
    /// Check a config file (or preset) without running it.
    Validate {
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// Build a correlation histogram from a click-stream CSV
    /// (columns detector_id,time_ps,provenance).
    Correlate {
        clicks: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Acquisition time in seconds (default: last click time).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value_t = 64)]
        bin_ps: i64,
        #[arg(long, default_value_t = 100.0)]
        window_ns: f64,
        #[arg(long, value_enum, default_value_t = Norm::RateProduct)]
        normalization: Norm,
        /// Odd number of bins merged for the plot.
        #[arg(long, default_value_t = 1)]
        rebin: usize,
        /// Seed recorded in the output header.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Norm {
    RateProduct,
    TailAverage,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 3,
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            target,
            preset,
            seed,
            out,
            duration,
        } => {
            let mut cfg = resolve(target.as_deref(), preset.as_deref())?;
            if seed.is_some() {
                cfg.seed = seed;
            }
            if duration.is_some() {
                cfg.duration_s = duration;
            }
            if let Some(o) = out {
                cfg.output_dir = Some(o);
            }
            let dir = cfg.output_dir();
            let report = pipeline::run(&cfg, &dir).map_err(|e| match e {
                Error::Config(m) => Error::Config(m),
                other => in_scenario(cfg.scenario, other),
            })?;
            eprintln!("wrote {} files to {}", report.artifacts.len(), dir.display());
            println!("{}", report.summary);
            Ok(())
        }
        Command::Presets { show } => {
            match show {
                Some(name) => print!("{}", presets::find(&name, None)?.config.to_toml_string()?),
                None => {
                    for p in presets::presets() {
                        println!("{:<14} {:<12} {}", p.name, p.config.scenario.name(), p.summary);
                        for a in p.anchors {
                            println!("{:<14} {:<12}   target: {a}", "", "");
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Validate { config, preset } => {
            let cfg = match (config, preset) {
                (Some(p), None) => RunConfig::load(&p)?,
                (None, Some(name)) => presets::find(&name, None)?.config,
                _ => return Err(Error::Config("give exactly one of a config path or --preset".into())),
            };
            cfg.validate()?;
            println!("ok: {} scenario", cfg.scenario);
            Ok(())
        }
        Command::Correlate {
            clicks,
            out,
            duration,
            bin_ps,
            window_ns,
            normalization,
            rebin,
            seed,
        } => run_correlate(&clicks, out, duration, bin_ps, window_ns, normalization, rebin, seed),
    }
}

fn in_scenario(s: Scenario, e: Error) -> Error {
    match e {
        Error::Validity(m) => Error::Validity(format!("scenario `{s}`: {m}")),
        Error::Domain(m) => Error::Domain(format!("scenario `{s}`: {m}")),
        Error::NotFound(m) => Error::NotFound(format!("scenario `{s}`: {m}")),
        Error::Range(m) => Error::Range(format!("scenario `{s}`: {m}")),
        other => other,
    }
}

fn resolve(target: Option<&str>, preset: Option<&str>) -> Result<RunConfig> {
    match (target, preset) {
        (t, Some(name)) => {
            let scenario = t.map(str::parse::<Scenario>).transpose()?;
            Ok(presets::find(name, scenario)?.config)
        }
        (Some(t), None) => {
            let path = Path::new(t);
            if path.exists() {
                RunConfig::load(path)
            } else if t.parse::<Scenario>().is_ok() {
                Err(Error::Config(format!(
                    "scenario `{t}` needs --preset NAME (see `homsim presets`) or a config file"
                )))
            } else {
                Err(Error::Config(format!("config file {t} not found")))
            }
        }
        (None, None) => Err(Error::Config("give a config file or --preset NAME".into())),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_correlate(
    clicks: &Path,
    out: Option<PathBuf>,
    duration: Option<f64>,
    bin_ps: i64,
    window_ns: f64,
    normalization: Norm,
    rebin: usize,
    seed: Option<u64>,
) -> Result<()> {
    let cfg = CorrelatorConfig {
        bin_width: bin_ps as f64 * PS,
        window: ns(window_ns),
        normalization: match normalization {
            Norm::RateProduct => Normalization::RateProduct,
            Norm::TailAverage => Normalization::TailAverage,
        },
    };
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    if rebin.is_multiple_of(2) {
        return Err(Error::Config(format!("--rebin {rebin} must be odd")));
    }
    let file = File::open(clicks).map_err(|e| Error::Io {
        path: clicks.to_path_buf(),
        source: e,
    })?;
    let mut stream = ClickStream::read_csv(BufReader::new(file), duration.unwrap_or(f64::MAX), seed.unwrap_or(0))?;
    let duration = match duration {
        Some(d) => d,
        None => {
            let last = stream.clicks.iter().map(|c| c.time_ps).max().unwrap_or(0);
            (last + 1) as f64 * PS
        }
    };
    stream.duration = duration;
    stream.validate()?;
    let hist = correlate(&stream, &cfg)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let csv_path = dir.join("histogram.csv");
    let f = File::create(&csv_path).map_err(|e| Error::Io {
        path: csv_path.clone(),
        source: e,
    })?;
    hist.write_csv(f)?;

    let shown = hist.rebin(rebin)?;
    let c = shown.center_index();
    let header = hist.header(seed);
    let summary = json!({
        "header": header,
        "clicks": stream.clicks.len(),
        "g2_center_bin": shown.g2[c],
        "g2_center_bin_err": shown.g2_err[c],
        "asymmetry": hist.asymmetry(),
        "plot_rebin": rebin,
    });
    let json_path = dir.join("histogram.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::Io {
        path: json_path.clone(),
        source: e,
    })?;

    let xs: Vec<f64> = shown.bin_centers().iter().map(|t| to_ns(*t)).collect();
    let mut fig = Figure::new("Coincidence histogram", "τ (ns)", "g⁽²⁾(τ)");
    fig.add(
        Series::new("data", xs, shown.g2.clone(), Style::Points, PALETTE[0])
            .with_errors(shown.g2_err.iter().map(|e| e.unwrap_or(0.0)).collect()),
    );
    let svg_path = dir.join("histogram.svg");
    std::fs::write(&svg_path, fig.to_svg()).map_err(|e| Error::Io {
        path: svg_path.clone(),
        source: e,
    })?;
    eprintln!("wrote 3 files to {}", dir.display());
    println!(
        "g2(0) = {:.3} over {} coincidences in {:.1} s",
        shown.g2[c],
        hist.total_counts(),
        duration
    );
    Ok(())
}
