use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rankfilter::harness::{commands, PipelineConfig};
use rankfilter::selection::SelectorMode;
use rankfilter::{Error, Result};

#[derive(Parser)]
#[command(name = "rankfilter", version, about = "Greedy matching, rank features and learned query filtering for redundant detections")]
struct Cli {
    /// Pipeline config (JSON). Command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    n_scenes: Option<usize>,
    #[arg(long, global = true)]
    n_gts: Option<usize>,
    #[arg(long, global = true)]
    categories: Option<u32>,
    #[arg(long, global = true)]
    gt_overlap: Option<f64>,
    #[arg(long, global = true)]
    dups_per_gt: Option<usize>,
    #[arg(long, global = true)]
    jitter_sigma: Option<f64>,
    #[arg(long, global = true)]
    score_iou_corr: Option<f64>,
    #[arg(long, global = true)]
    score_sigma: Option<f64>,
    #[arg(long, global = true)]
    fp_rate: Option<f64>,

    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<SelectorMode>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    nms_iou: Option<f64>,

    #[arg(long, global = true)]
    theta: Option<usize>,
    #[arg(long, global = true)]
    iou_floor: Option<f64>,

    #[arg(long, global = true)]
    conf_threshold: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    train_seed: Option<u64>,
    /// Train with the rank embedding zeroed and frozen.
    #[arg(long, global = true)]
    no_rank_feature: bool,
}

fn parse_mode(s: &str) -> std::result::Result<SelectorMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene file.
    Gen {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace each scene's detections with its sparse query pool.
    Select {
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit greedy-matching labels for every detection.
    Assign {
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the query filter and write a checkpoint.
    Train {
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Per-epoch loss trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run select -> filter -> evaluate with a trained checkpoint.
    Run {
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Metrics CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Final detections as a scene file.
        #[arg(long)]
        detections_out: Option<PathBuf>,
    },
    /// Ablation sweep over one axis.
    Sweep {
        /// nms_iou, theta, dups_per_gt or gt_overlap
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics of a scene file whose detections are predictions.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply_overrides(cfg: &mut PipelineConfig, o: &Overrides) {
    macro_rules! set {
        ($src:expr => $dst:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(o.seed => cfg.synth.seed);
    set!(o.n_scenes => cfg.n_scenes);
    set!(o.n_gts => cfg.synth.n_gts);
    set!(o.categories => cfg.synth.categories);
    set!(o.gt_overlap => cfg.synth.gt_overlap);
    set!(o.dups_per_gt => cfg.synth.dups_per_gt);
    set!(o.jitter_sigma => cfg.synth.jitter_sigma);
    set!(o.score_iou_corr => cfg.synth.score_iou_corr);
    set!(o.score_sigma => cfg.synth.score_sigma);
    set!(o.fp_rate => cfg.synth.fp_rate);
    set!(o.mode => cfg.selector.mode);
    set!(o.k => cfg.selector.k);
    set!(o.nms_iou => cfg.selector.nms_iou);
    set!(o.theta => cfg.greedy.theta);
    set!(o.iou_floor => cfg.greedy.iou_floor);
    set!(o.conf_threshold => cfg.filter.conf_threshold);
    set!(o.epochs => cfg.filter.epochs);
    set!(o.learning_rate => cfg.filter.learning_rate);
    set!(o.train_seed => cfg.filter.seed);
    if o.no_rank_feature {
        cfg.filter.rank_feature = false;
    }
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Error::Config(format!("missing {what} path (flag or config paths)")))
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    apply_overrides(&mut cfg, &cli.overrides);
    cfg.validate()?;
    let paths = cfg.paths.clone();
    let out_or = |flag: Option<PathBuf>| flag.or_else(|| paths.output.clone());

    match cli.command {
        Command::Gen { out } => {
            let out = out.or_else(|| paths.scenes.clone());
            commands::gen(&cfg, out.as_deref())?;
        }
        Command::Select { scenes, out } => {
            let scenes = required(scenes, &paths.scenes, "scenes")?;
            commands::select(&cfg, &scenes, out_or(out).as_deref())?;
        }
        Command::Assign { scenes, out } => {
            let scenes = required(scenes, &paths.scenes, "scenes")?;
            commands::assign(&cfg, &scenes, out_or(out).as_deref())?;
        }
        Command::Train {
            scenes,
            checkpoint,
            trace,
        } => {
            let scenes = required(scenes, &paths.scenes, "scenes")?;
            let checkpoint = required(checkpoint, &paths.checkpoint, "checkpoint")?;
            let outcome = commands::train(&cfg, &scenes, &checkpoint, trace.as_deref())?;
            if let Some(last) = outcome.loss_trace.last() {
                eprintln!("trained {} epochs, final mean loss {last:.6}", outcome.loss_trace.len());
            }
        }
        Command::Run {
            scenes,
            checkpoint,
            out,
            detections_out,
        } => {
            let scenes = required(scenes, &paths.scenes, "scenes")?;
            let checkpoint = required(checkpoint, &paths.checkpoint, "checkpoint")?;
            commands::run(
                &cfg,
                &scenes,
                &checkpoint,
                out_or(out).as_deref(),
                detections_out.as_deref(),
            )?;
        }
        Command::Sweep { axis, values, out } => {
            commands::sweep_cmd(&cfg, &axis, &values, out_or(out).as_deref())?;
        }
        Command::Eval { detections, out } => {
            commands::eval(Path::new(&detections), out_or(out).as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
