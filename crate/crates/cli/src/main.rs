use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dejam_core::denoiser::gradcheck::{run_gradcheck, GradCheckConfig};
use dejam_core::denoiser::train;
use dejam_core::harness::{
    evaluate, format_sweep_table, load_model_file, meta_path, save_model_file, scenario_codes,
    suppression_ratio, sweep, write_loss_csv, write_sweep_csv, ExperimentConfig,
};
use dejam_core::sigmodel::{generate_dataset, read_dataset, write_dataset, SymbolAlphabet};

/// Jammer suppression for spreading-code uplinks: simulate, train, evaluate.
#[derive(Parser, Debug)]
#[command(name = "dejam", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Config file (TOML key = value pairs), applied on top of the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base preset: paper, desk or fast.
    #[arg(long, global = true, default_value = "paper")]
    preset: String,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a training dataset file.
    GenData {
        /// Number of examples (default: num_examples from the config).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train a denoiser; writes the model, `<model>.loss.csv` and `<model>.meta.json`.
    Train {
        /// Dataset file from gen-data; generated from the config when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Monte-Carlo error rates of a model against the plain MFB.
    Eval {
        /// Model file (default: model_path from the config).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also report the suppression ratio on this many held-out examples.
        #[arg(long)]
        held_out: Option<usize>,
    },
    /// Error rates over a range of one scenario parameter, as CSV.
    Sweep {
        /// Model file (default: model_path from the config).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Sweep the MFB alone; proposed columns are left empty.
        #[arg(long)]
        baseline_only: bool,
    },
    /// Finite-difference check of every analytic gradient.
    Gradcheck {
        #[arg(long, default_value_t = GradCheckConfig::default().trials)]
        trials: usize,
    },
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load_config(g: &Global) -> Result<ExperimentConfig, Failure> {
    let base = ExperimentConfig::preset(&g.preset).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut cfg = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
            base.merged_with(&text)
                .map_err(|e| Failure::Usage(format!("config {}: {e}", p.display())))?
        }
        None => base,
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn model_arg(arg: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    arg.or_else(|| cfg.model_path.clone())
        .ok_or_else(|| Failure::Usage("a model is required: pass --model or set model_path".into()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.global)?;
    let scenario = cfg.scenario();
    let output = cli.global.output.clone();
    match cli.command {
        Command::GenData { count } => {
            let out = output.ok_or_else(|| Failure::Usage("gen-data needs --output".into()))?;
            let codes = scenario_codes(&scenario).context("building codes")?;
            let n = count.unwrap_or(cfg.num_examples);
            let data = generate_dataset(&scenario, &codes, &SymbolAlphabet::qpsk(), n, cfg.seed)
                .context("generating dataset")?;
            let mut w = create(&out)?;
            write_dataset(&mut w, &data).context("writing dataset")?;
            w.flush().context("writing dataset")?;
            log::info!("wrote {n} examples to {}", out.display());
        }
        Command::Train { dataset } => {
            let out = output.unwrap_or_else(|| PathBuf::from("model.jsdn"));
            let codes = scenario_codes(&scenario).context("building codes")?;
            let data = match dataset {
                Some(p) => {
                    let f = File::open(&p).with_context(|| format!("cannot open {}", p.display()))?;
                    read_dataset(&mut BufReader::new(f))
                        .with_context(|| format!("reading {}", p.display()))?
                }
                None => generate_dataset(
                    &scenario,
                    &codes,
                    &SymbolAlphabet::qpsk(),
                    cfg.num_examples,
                    cfg.seed,
                )
                .context("generating dataset")?,
            };
            let start = Instant::now();
            let model = train(&data, &codes, &scenario, &cfg.network(), &cfg.training(), |s| {
                log::info!(
                    "epoch {} mean loss {:.6} ({:.0}s)",
                    s.epoch,
                    s.mean_loss,
                    start.elapsed().as_secs_f64()
                );
            })
            .context("training")?;
            save_model_file(&model, &out).context("saving model")?;
            let meta = model.meta.as_ref().expect("train fills metadata");
            let loss_path = with_suffix(&out, ".loss.csv");
            write_loss_csv(meta.initial_loss, &meta.epoch_losses, create(&loss_path)?)
                .context("writing loss log")?;
            eprintln!(
                "model {} (metadata {}, loss log {}); final loss {:.6}",
                out.display(),
                meta_path(&out).display(),
                loss_path.display(),
                meta.final_loss
            );
        }
        Command::Eval { model, held_out } => {
            let path = model_arg(model, &cfg)?;
            let m = load_model_file(&path).with_context(|| format!("loading {}", path.display()))?;
            let counts = evaluate(Some(&m), &scenario, cfg.num_runs, cfg.seed).context("evaluating")?;
            let mut text = format!(
                "runs {}\nproposed_error_rate {} ± {:.4} ({} errors)\nbaseline_error_rate {} ± {:.4} ({} errors)\n",
                counts.num_runs,
                counts.proposed_rate().unwrap_or_default(),
                counts.proposed_half_width().unwrap_or_default(),
                counts.errors_proposed.unwrap_or_default(),
                counts.baseline_rate(),
                counts.baseline_half_width(),
                counts.errors_baseline
            );
            if let Some(n) = held_out {
                let ratio = suppression_ratio(&m, &scenario, n, cfg.seed).context("held-out ratio")?;
                text.push_str(&format!("suppression_ratio {ratio}\n"));
            }
            match output {
                Some(p) => create(&p)?.write_all(text.as_bytes()).context("writing result")?,
                None => print!("{text}"),
            }
        }
        Command::Sweep {
            model,
            baseline_only,
        } => {
            let spec = cfg.sweep_spec().map_err(|e| Failure::Usage(e.to_string()))?;
            let m = if baseline_only {
                None
            } else {
                let path = model_arg(model.or(spec.model_path.clone()), &cfg)?;
                Some(load_model_file(&path).with_context(|| format!("loading {}", path.display()))?)
            };
            let result = sweep(&spec, m.as_ref()).context("sweeping")?;
            match output {
                Some(p) => write_sweep_csv(&result, create(&p)?).context("writing csv")?,
                None => write_sweep_csv(&result, io::stdout().lock()).context("writing csv")?,
            }
            eprint!("{}", format_sweep_table(&result));
        }
        Command::Gradcheck { trials } => {
            let gc = GradCheckConfig {
                trials,
                seed: cfg.seed,
                ..Default::default()
            };
            let report = run_gradcheck(&gc).context("gradient check")?;
            for c in &report.checks {
                println!(
                    "{:<4} {:<28} trials {:>3}  max rel error {:.3e}",
                    if c.passed { "ok" } else { "FAIL" },
                    c.name,
                    c.trials,
                    c.max_rel_error
                );
            }
            if !report.passed() {
                return Err(Failure::Runtime(anyhow::anyhow!("gradient check failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
