use clap::{Parser, Subcommand};
use qecx::config::{ConfigError, ExperimentConfig, NoiseSpec};
use qecx::run::{check_tree, noisy_tree, RunError};
use qecx::{emit_results, fit_slope, footprint, parse_results, run_experiment, Format};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qecx", version, about = "Color-code gadget experiments on a sparse Pauli-frame engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the first-batch shot count.
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the gadget trees (and the ion schedules, if any) without noise.
    Validate { config: PathBuf },
    /// Print the noiseless tree of the first input state as JSON.
    DumpGadget { config: PathBuf },
    /// Run the sweep and write results to the config output or stdout.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the log-log slope of p_L against the sweep value in a result file.
    Fit {
        results: PathBuf,
        /// Row state to fit; defaults to "avg" when present.
        #[arg(long)]
        state: Option<String>,
    },
    /// Run the sweep and report the qubit footprint at each value.
    Footprint { config: PathBuf },
    /// Print the detector error model at the first sweep value.
    ExportDem { config: PathBuf },
}

enum Fail {
    Validation(String),
    Config(String),
}

impl From<ConfigError> for Fail {
    fn from(e: ConfigError) -> Self {
        Fail::Config(e.to_string())
    }
}

impl From<RunError> for Fail {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Gadget(_) => Fail::Config(e.to_string()),
            _ => Fail::Validation(e.to_string()),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Fail {
    Fail::Config(e.to_string())
}

fn format_flag(cli: &Cli, path: Option<&Path>) -> Result<Format, Fail> {
    match &cli.format {
        Some(f) => Format::parse(f).ok_or_else(|| Fail::Config(format!("unknown format {f:?}"))),
        None if path.is_some_and(|p| p.extension().is_some_and(|e| e == "json")) => Ok(Format::Json),
        None => Ok(Format::Csv),
    }
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Fail> {
    let mut c = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(s) = cli.shots {
        c.shots = s;
        c.max_shots = c.max_shots.max(s);
    }
    if let Some(w) = cli.workers {
        c.workers = w;
    }
    c.validate()?;
    Ok(c)
}

fn validate(cfg: &ExperimentConfig) -> Result<(), Fail> {
    let mut problems = Vec::new();
    for s in cfg.gadget.states().map_err(config_err)? {
        let tree = cfg.gadget.build(s).map_err(config_err)?;
        if let Err(e) = check_tree(&tree, cfg.seed) {
            problems.push(e.to_string());
            continue;
        }
        if let NoiseSpec::Multichannel { arch, scenario, .. } = &cfg.noise {
            let arch = iontrap::Architecture::load(iontrap::ArchKind::parse(arch).expect("validated"));
            let timing = iontrap::TimingScenario::load(iontrap::Scenario::parse(scenario).expect("validated"));
            match iontrap::transpile(&tree, &arch, &timing) {
                Ok(sched) => problems.extend(iontrap::audit(&arch, &sched, timing.nbar0).iter().map(|v| format!("{}: {v:?}", tree.name))),
                Err(e) => problems.push(format!("{}: {e}", tree.name)),
            }
        }
        println!("{}: {} paths ok", tree.name, tree.paths().len());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Fail::Validation(problems.join("\n")))
    }
}

fn write_out(cli: &Cli, r: &qecx::RunResult, out: Option<&Path>) -> Result<(), Fail> {
    let fmt = format_flag(cli, out)?;
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(config_err)?;
            emit_results(r, fmt, std::io::BufWriter::new(f)).map_err(config_err)
        }
        None => emit_results(r, fmt, std::io::stdout().lock()).map_err(config_err),
    }
}

fn real_main(cli: &Cli) -> Result<(), Fail> {
    match &cli.cmd {
        Cmd::Validate { config } => validate(&load(cli, config)?),
        Cmd::DumpGadget { config } => {
            let cfg = load(cli, config)?;
            let s = cfg.gadget.states().map_err(config_err)?[0];
            println!("{}", cfg.gadget.build(s).map_err(config_err)?.to_json());
            Ok(())
        }
        Cmd::Run { config, out } => {
            let cfg = load(cli, config)?;
            let r = run_experiment(&cfg)?;
            write_out(cli, &r, out.as_deref().or(cfg.output.as_deref()))
        }
        Cmd::Fit { results, state } => {
            let fmt = format_flag(cli, Some(results))?;
            let f = std::fs::File::open(results).map_err(config_err)?;
            let r = parse_results(f, fmt).map_err(config_err)?;
            let want = state.clone().unwrap_or_else(|| {
                if r.points.iter().any(|p| p.state == "avg") { "avg".into() } else { r.points.first().map(|p| p.state.clone()).unwrap_or_default() }
            });
            let pts: Vec<(f64, f64)> = r.points.iter().filter(|p| p.state == want).map(|p| (p.param, p.p_l)).collect();
            let fit = fit_slope(&pts).map_err(config_err)?;
            println!("slope {:.4} +/- {:.4} over {} points (state {want})", fit.slope, fit.stderr, fit.points);
            Ok(())
        }
        Cmd::Footprint { config } => {
            let cfg = load(cli, config)?;
            let target = cfg.target_pl.ok_or_else(|| Fail::Config("footprint needs target_pl in the config".into()))?;
            if !matches!(cfg.noise, NoiseSpec::Scem { .. }) {
                return Err(Fail::Config("footprint needs a scem sweep".into()));
            }
            let r = run_experiment(&cfg)?;
            for p in r.points.iter().filter(|p| p.state == "avg" || cfg.gadget.states().map_or(false, |s| s.len() == 1)) {
                let fp = footprint(&[(3, p.p_l.max(f64::MIN_POSITIVE))], p.param, target).map_err(config_err)?;
                println!("{}", serde_json::json!({ "p": p.param, "p_l_d3": p.p_l, "target": target, "footprint": fp }));
            }
            Ok(())
        }
        Cmd::ExportDem { config } => {
            let cfg = load(cli, config)?;
            let s = cfg.gadget.states().map_err(config_err)?[0];
            let tree = cfg.gadget.build(s).map_err(config_err)?;
            let noisy = noisy_tree(&tree, &cfg.noise, cfg.noise.sweep()[0])?;
            let dem = colorcode::decoders::export_dem(&noisy).map_err(config_err)?;
            print!("{}", dem.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Validation(m)) => {
            eprintln!("validation failed: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
    }
}
