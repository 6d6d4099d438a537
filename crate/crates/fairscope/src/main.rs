use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairscope::commands::{self, Grid};
use fairscope::{AppResult, PipelineConfig};
use fairscope_core::data::Split;

#[derive(Parser)]
#[command(name = "fairscope", version, about = "Fairness-aware deepfake detection lab on synthetic video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for both generation and training.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// vanilla, proposed, variant, or a variant label such as PC+BS+PF.
    #[arg(long)]
    mode: Option<String>,
    /// Dataset directory (overrides `data_dir`).
    #[arg(long)]
    data: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> AppResult<PipelineConfig> {
        let mut cfg = PipelineConfig::load(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        if let Some(mode) = &self.mode {
            cfg.set_mode(mode)?;
        }
        if let Some(data) = &self.data {
            cfg.data_dir = data.clone();
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write train/val/test splits and the concept bank (to --out, else data_dir).
    Generate(Common),
    /// Run the configured mode and write checkpoints and a run report.
    Train(Common),
    /// Score a split and write metrics.json, metrics.md and scores.json.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Defaults to <out>/checkpoint.bin.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Saliency images and the ranked concept scores for one video.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Training output directory; defaults to out_dir from the config.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        video: String,
    },
    /// Run the ablation grid and write ablation.md.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        grid: Grid,
    },
    /// Write PGM previews of one frequency-aware CutMix pair.
    PreviewAugment(Common),
}

fn parse_split(name: &str) -> AppResult<Split> {
    Split::ALL
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| fairscope::AppError::Usage(format!("unknown split {name:?}")))
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Generate(common) => {
            let mut cfg = common.load()?;
            if let Some(out) = &common.out {
                cfg.data_dir = out.clone();
            }
            let dir = commands::generate(&cfg)?;
            println!("{}", dir.display());
        }
        Command::Train(common) => {
            let cfg = common.load()?;
            let report = commands::train(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report.timings).expect("timings serialize"));
            println!("artifacts in {}", cfg.out_dir.display());
        }
        Command::Evaluate { common, checkpoint, split } => {
            let cfg = common.load()?;
            let ckpt = checkpoint.unwrap_or_else(|| cfg.out_dir.join(commands::CHECKPOINT));
            let name = cfg.out_dir.file_name().map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned());
            let m = commands::evaluate(&ckpt, &cfg.data_dir, parse_split(&split)?, cfg.run.threshold, &cfg.out_dir, &name)?;
            print!("{}", fairscope::report::metrics_markdown(&name, &m));
        }
        Command::Explain { common, run, video } => {
            // --out names the image directory here, not the run
            let out = common.out.clone();
            let cfg = Common { out: None, ..common }.load()?;
            let run_dir = run.unwrap_or_else(|| cfg.out_dir.clone());
            let out = out.unwrap_or_else(|| run_dir.join("explain"));
            let e = commands::explain(&run_dir, &cfg.data_dir, &video, &out)?;
            for p in e.saliency.iter().chain([&e.css_report]) {
                println!("{}", p.display());
            }
        }
        Command::Ablate { common, grid } => {
            let cfg = common.load()?;
            let cells = commands::ablate(&cfg, grid, commands::grid_threads())?;
            print!("{}", commands::ablation_markdown(&cells));
        }
        Command::PreviewAugment(common) => {
            let cfg = common.load()?;
            for p in commands::preview_augment(&cfg, &cfg.out_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
