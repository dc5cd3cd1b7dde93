//! `ecg-gaf`: encode heartbeat CSVs as Gramian Angular Field images, train the
//! CNN on them, evaluate checkpoints and summarise evaluation runs.

mod data;
mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ecg_gaf::evalx::{self, export_report, export_trace, TrainConfig};
use ecg_gaf::gaf::{encode, export_image, EncoderConfig, GafKind, Reduction};
use ecg_gaf::model::{Model, ModelConfig};
use ecg_gaf::nn::OptimizerKind;
use serde::Serialize;

use data::{encode_cached, Role};
use manifest::RunManifest;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ecg-gaf", version, about)]
struct Cli {
    /// Seed for subsampling, splitting, initialisation and batch order.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory receiving all outputs of the command.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,
    /// Worker threads for encoding and evaluation (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Encode CSV heartbeats into GAF tensors (and optional PNG samples).
    Encode(EncodeArgs),
    /// Train the CNN and write a checkpoint plus loss trace.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write metrics, confusion matrix and ROC curves.
    Evaluate(EvaluateArgs),
    /// Summarise the metrics of an evaluation directory.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Training CSV: 187 samples then the label on each row.
    #[arg(long)]
    pub train_csv: Option<PathBuf>,
    /// Test CSV in the same format.
    #[arg(long)]
    pub test_csv: Option<PathBuf>,
    /// PTB normal-beat file (label 0); use with --ptb-abnormal instead of the CSV flags.
    #[arg(long)]
    pub ptb_normal: Option<PathBuf>,
    /// PTB abnormal-beat file (label 1).
    #[arg(long)]
    pub ptb_abnormal: Option<PathBuf>,
    /// Share of the PTB records held out for testing.
    #[arg(long, default_value_t = 0.2)]
    pub ptb_test_fraction: f64,
    /// Stratified share of each class to keep, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub subsample_fraction: f64,
}

impl DataArgs {
    fn has(&self, role: Role) -> bool {
        self.ptb_normal.is_some()
            || match role {
                Role::Train => self.train_csv.is_some(),
                Role::Test => self.test_csv.is_some(),
            }
    }
}

#[derive(Debug, Args, Serialize)]
struct EncoderArgs {
    /// Field type: gasf or gadf.
    #[arg(long, default_value_t = GafKind::Gasf)]
    gaf_kind: GafKind,
    /// Size reduction: bilinear or paa.
    #[arg(long, default_value_t = Reduction::Bilinear)]
    reduction: Reduction,
    /// Output image side [default: 32, or the checkpoint's input size].
    #[arg(long)]
    size: Option<usize>,
    /// Replicated channels [default: 3, or the checkpoint's input channels].
    #[arg(long)]
    channels: Option<usize>,
}

impl EncoderArgs {
    fn resolve(&self, size: usize, channels: usize) -> Result<EncoderConfig> {
        let cfg = EncoderConfig {
            kind: self.gaf_kind,
            reduction: self.reduction,
            target_size: self.size.unwrap_or(size),
            channels: self.channels.unwrap_or(channels),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
struct CacheArgs {
    /// Encoded-tensor cache [default: <out-dir>/cache].
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Always re-encode.
    #[arg(long)]
    no_cache: bool,
}

impl CacheArgs {
    fn dir(&self, out_dir: &Path) -> Option<PathBuf> {
        (!self.no_cache).then(|| {
            self.cache_dir
                .clone()
                .unwrap_or_else(|| out_dir.join("cache"))
        })
    }
}

#[derive(Debug, Args, Serialize)]
struct EncodeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    encoder: EncoderArgs,
    #[arg(long, default_value_t = 5)]
    num_classes: usize,
    /// Write one [n, size, size, channels] file per split instead of one file per record.
    #[arg(long)]
    packed: bool,
    /// Also write the first N images of each split as grayscale PNG.
    #[arg(long, default_value_t = 0)]
    export_png: usize,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    encoder: EncoderArgs,
    #[command(flatten)]
    cache: CacheArgs,
    #[arg(long, default_value_t = 5)]
    num_classes: usize,
    #[arg(long, default_value_t = 64)]
    dense_units: usize,
    /// Width of the final layer when it should exceed --num-classes.
    #[arg(long)]
    output_units: Option<usize>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// sgd or adam.
    #[arg(long, default_value_t = OptimizerKind::Adam)]
    optimizer: OptimizerKind,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    encoder: EncoderArgs,
    #[command(flatten)]
    cache: CacheArgs,
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Classes to score [default: the checkpoint's output width]. A smaller
    /// value uses the leading logits of a wider head.
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    /// Evaluation directory holding metrics.txt [default: --out-dir].
    #[arg(long)]
    run_dir: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let name = match &cli.command {
        Command::Encode(_) => "encode",
        Command::Train(_) => "train",
        Command::Evaluate(_) => "evaluate",
        Command::Report(_) => "report",
    };
    let mut manifest = RunManifest::new(
        name,
        cli.seed,
        rayon::current_num_threads(),
        serde_json::to_value(&cli)?,
    );
    match &cli.command {
        Command::Encode(a) => cmd_encode(&cli, a, &mut manifest)?,
        Command::Train(a) => cmd_train(&cli, a, &mut manifest)?,
        Command::Evaluate(a) => cmd_evaluate(&cli, a, &mut manifest)?,
        Command::Report(a) => cmd_report(&cli, a, &mut manifest)?,
    }
    let path = manifest.write(&cli.out_dir)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn cmd_encode(cli: &Cli, args: &EncodeArgs, manifest: &mut RunManifest) -> Result<()> {
    let cfg = args.encoder.resolve(32, 3)?;
    let roles: Vec<Role> = [Role::Train, Role::Test]
        .into_iter()
        .filter(|&r| args.data.has(r))
        .collect();
    if roles.is_empty() {
        bail!("nothing to encode: pass --train-csv, --test-csv or the PTB files");
    }
    let dir = cli.out_dir.join("encoded");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for role in roles {
        let tag = role.as_str();
        manifest.phase(&format!("load_{tag}"));
        let loaded = data::load(&args.data, role, args.num_classes, cli.seed)?;
        manifest.phase(&format!("encode_{tag}"));
        let (images, _) = encode_cached(&loaded, &cfg, None)?;
        let labels = loaded.dataset.labels();
        manifest.phase(&format!("write_{tag}"));
        if args.packed {
            let path = dir.join(format!("{tag}.gaf"));
            images.save(&path)?;
            manifest.artifact(path);
        } else {
            let sub = dir.join(tag);
            fs::create_dir_all(&sub).with_context(|| format!("creating {}", sub.display()))?;
            let per = [cfg.target_size, cfg.target_size, cfg.channels];
            for i in 0..labels.len() {
                let path = sub.join(format!("{i:06}.gaf"));
                images.slice_outer(i, 1)?.reshape(&per)?.save(&path)?;
            }
            manifest.artifact(sub);
        }
        let mut csv = String::from("index,label\n");
        for (i, l) in labels.iter().enumerate() {
            let _ = writeln!(csv, "{i},{l}");
        }
        let path = dir.join(format!("{tag}_labels.csv"));
        fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        manifest.artifact(path);

        if args.export_png > 0 {
            let png_dir = cli.out_dir.join("png");
            fs::create_dir_all(&png_dir)
                .with_context(|| format!("creating {}", png_dir.display()))?;
            for (i, record) in loaded
                .dataset
                .records()
                .iter()
                .take(args.export_png)
                .enumerate()
            {
                let path = png_dir.join(format!("{tag}_{i:05}_label{}.png", record.label()));
                export_image(&encode(record, &cfg)?, &path)?;
                manifest.artifact(path);
            }
        }
        log::info!(
            "encoded {} {tag} records to {:?}",
            labels.len(),
            images.dims()
        );
        manifest.datasets.push(loaded.entry);
    }
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs, manifest: &mut RunManifest) -> Result<()> {
    let enc = args.encoder.resolve(32, 3)?;
    let model_cfg = ModelConfig {
        input_size: enc.target_size,
        input_channels: enc.channels,
        num_classes: args.num_classes,
        dense_units: args.dense_units,
        output_units: args.output_units,
    };
    let train_cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        optimizer: args.optimizer,
        seed: cli.seed,
        shuffle: true,
    };
    train_cfg.validate()?;
    let mut model = Model::build(model_cfg, cli.seed)?;
    log::info!("model with {} parameters", model.param_count());

    manifest.phase("load");
    let loaded = data::load(&args.data, Role::Train, args.num_classes, cli.seed)?;
    manifest.phase("encode");
    let (images, hit) = encode_cached(&loaded, &enc, args.cache.dir(&cli.out_dir).as_deref())?;
    if !hit {
        log::info!("encoded {} records", loaded.dataset.len());
    }
    let labels = loaded.dataset.labels();
    manifest.datasets.push(loaded.entry);

    manifest.phase("train");
    let trace = evalx::train(&mut model, &images, &labels, &train_cfg, |s| {
        log::info!(
            "epoch {}/{}: loss {:.4}, train accuracy {:.4}",
            s.epoch + 1,
            train_cfg.epochs,
            s.loss,
            s.train_accuracy
        )
    })?;

    manifest.phase("save");
    let ckpt = cli.out_dir.join("model.cnn");
    model.save(&ckpt)?;
    manifest.artifact(&ckpt);
    export_trace(&trace, &cli.out_dir)?;
    manifest.artifact(cli.out_dir.join("loss_trace.csv"));
    log::info!("wrote {}", ckpt.display());
    Ok(())
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs, manifest: &mut RunManifest) -> Result<()> {
    manifest.phase("load");
    let mut model = Model::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let width = model.config().num_classes;
    let k = args.num_classes.unwrap_or(width);
    if k > width {
        bail!(ecg_gaf::Error::Config(format!(
            "checkpoint scores {width} classes, --num-classes asks for {k}"
        )));
    }
    if k < width {
        model = model.with_num_classes(k)?;
    }
    let (size, channels) = (model.config().input_size, model.config().input_channels);
    let enc = args.encoder.resolve(size, channels)?;
    if (enc.target_size, enc.channels) != (size, channels) {
        bail!(ecg_gaf::Error::Config(format!(
            "checkpoint expects {size}x{size}x{channels} images, encoder produces {0}x{0}x{1}",
            enc.target_size, enc.channels
        )));
    }
    let loaded = data::load(&args.data, Role::Test, k, cli.seed)?;

    manifest.phase("encode");
    let (images, _) = encode_cached(&loaded, &enc, args.cache.dir(&cli.out_dir).as_deref())?;
    let labels = loaded.dataset.labels();
    manifest.datasets.push(loaded.entry);

    manifest.phase("evaluate");
    let report = evalx::evaluate(&model, &images, &labels, args.batch_size)?;
    export_report(&report, &cli.out_dir)?;
    manifest.artifact(cli.out_dir.join("metrics.txt"));
    manifest.artifact(cli.out_dir.join("confusion.csv"));
    for c in 0..k {
        manifest.artifact(cli.out_dir.join(format!("roc_class_{c}.csv")));
    }
    println!("accuracy={:.6}", report.accuracy);
    println!("f1_macro={:.6}", report.f1_macro);
    println!("f1_weighted={:.6}", report.f1_weighted);
    Ok(())
}

fn cmd_report(cli: &Cli, args: &ReportArgs, manifest: &mut RunManifest) -> Result<()> {
    let dir = args.run_dir.as_ref().unwrap_or(&cli.out_dir);
    let path = dir.join("metrics.txt");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let summary = render_summary(&text).with_context(|| format!("parsing {}", path.display()))?;
    print!("{summary}");
    let out = cli.out_dir.join("report.txt");
    fs::write(&out, &summary).with_context(|| format!("writing {}", out.display()))?;
    manifest.artifact(out);
    Ok(())
}

fn render_summary(metrics: &str) -> Result<String> {
    let kv: std::collections::HashMap<&str, &str> =
        metrics.lines().filter_map(|l| l.split_once('=')).collect();
    let get = |key: &str| {
        kv.get(key)
            .copied()
            .with_context(|| format!("missing key {key}"))
    };
    let k: usize = get("num_classes")?.parse()?;
    let mut s = String::new();
    writeln!(s, "samples      {}", get("samples")?)?;
    writeln!(s, "accuracy     {}", get("accuracy")?)?;
    writeln!(s, "f1 macro     {}", get("f1_macro")?)?;
    writeln!(s, "f1 weighted  {}", get("f1_weighted")?)?;
    writeln!(s)?;
    writeln!(
        s,
        "{:>5} {:>9} {:>9} {:>9} {:>8} {:>9}",
        "class", "precision", "recall", "f1", "support", "auc"
    )?;
    for c in 0..k {
        writeln!(
            s,
            "{c:>5} {:>9} {:>9} {:>9} {:>8} {:>9}",
            get(&format!("precision_class_{c}"))?,
            get(&format!("recall_class_{c}"))?,
            get(&format!("f1_class_{c}"))?,
            get(&format!("support_class_{c}"))?,
            get(&format!("auc_class_{c}"))?,
        )?;
    }
    writeln!(s)?;
    writeln!(s, "confusion (rows true, columns predicted)")?;
    for c in 0..k {
        let row: Vec<&str> = get(&format!("confusion_row_{c}"))?.split(' ').collect();
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>7}")).collect();
        writeln!(s, "{c:>5} {}", cells.join(""))?;
    }
    Ok(s)
}
