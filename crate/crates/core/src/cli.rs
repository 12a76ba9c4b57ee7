//! The `dct-snn` command line: argument definitions and command bodies.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{RunConfig, Settings};
use crate::data::{load_dataset, Dataset, Split};
use crate::encoder::{block_samples, EncoderKind, FrequencySchedule, InputEncoder, SpikeTrain};
use crate::energy::{encoder_ops_for, spike_rates, OpsReport};
use crate::error::{config, Error, Result};
use crate::snn::{Architecture, Checkpoint, EncoderMeta, ModelKind, Network, SnnModel};
use crate::train::{
    balance_thresholds, evaluate_ann, evaluate_snn, read_metrics, train_ann, train_snn,
    write_metrics, EpochMetrics, Optimizer, SpikeSource,
};
use crate::transforms::{build_transform, TransformKind};

#[derive(Debug, Parser)]
#[command(
    name = "dct-snn",
    version,
    about = "Frequency-domain spike encoding and hybrid ANN-to-SNN training"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every command. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Config file of `key = value` lines under `[section]` headers.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Built-in defaults: full or desk.
    #[arg(long, global = true)]
    pub profile: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// idx or cifar-binary.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Preset (tiny, digits, vgg5) or descriptor such as `conv:1:8:3:1:1,avgpool:2,linear:1568:10`.
    #[arg(long, global = true)]
    pub arch: Option<String>,
    #[arg(long, global = true)]
    pub block_size: Option<usize>,
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    #[arg(long, global = true)]
    pub padding: Option<usize>,
    #[arg(long, global = true)]
    pub cycles: Option<usize>,
    #[arg(long, global = true)]
    pub timesteps: Option<usize>,
    /// Leading zigzag bases kept per cycle.
    #[arg(long, global = true)]
    pub curtail: Option<usize>,
    /// dct, pca, rand-ortho, rand or poisson.
    #[arg(long, global = true)]
    pub encoder: Option<String>,
    /// level-shift or unit.
    #[arg(long, global = true)]
    pub normalization: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// sgd or adam.
    #[arg(long, global = true)]
    pub optimizer: Option<String>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Training images used to calibrate generator and LIF thresholds.
    #[arg(long, global = true)]
    pub calib_size: Option<usize>,
    /// LIF threshold percentile; 100 takes the maximum pre-activation.
    #[arg(long, global = true)]
    pub threshold_percentile: Option<f64>,
    #[arg(long, global = true)]
    pub train_limit: Option<usize>,
    #[arg(long, global = true)]
    pub test_limit: Option<usize>,
    /// Record wall-clock seconds in metrics files.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the analog network on block-tiled encoder input.
    TrainAnn {
        #[arg(long, value_name = "CHECKPOINT")]
        out: PathBuf,
        /// Per-epoch CSV: epoch,train_loss,train_acc,test_acc,wall_seconds.
        #[arg(long, value_name = "CSV")]
        metrics: Option<PathBuf>,
        /// Continue from an ANN checkpoint written by an earlier run.
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
    },
    /// Convert an ANN checkpoint to an SNN by threshold balancing.
    Convert {
        #[arg(long, value_name = "CHECKPOINT")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "CHECKPOINT")]
        out: PathBuf,
    },
    /// Surrogate-gradient training of an SNN.
    TrainSnn {
        /// Converted SNN to fine-tune.
        #[arg(long, value_name = "CHECKPOINT", conflicts_with_all = ["from_scratch", "resume"])]
        checkpoint: Option<PathBuf>,
        /// Start from Xavier weights with balanced thresholds instead.
        #[arg(long, conflicts_with = "resume")]
        from_scratch: bool,
        /// Continue an interrupted run from its last epoch checkpoint.
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
        #[arg(long, value_name = "CHECKPOINT")]
        out: PathBuf,
        #[arg(long, value_name = "CSV")]
        metrics: Option<PathBuf>,
    },
    /// Top-1 accuracy on the test split, optionally with an operations report.
    Eval {
        #[arg(long, value_name = "CHECKPOINT")]
        checkpoint: PathBuf,
        /// Write the per-layer operations and energy report here.
        #[arg(long, value_name = "CSV")]
        record_spikes: Option<PathBuf>,
        /// Write `accuracy,correct,images` here.
        #[arg(long, value_name = "CSV")]
        out: Option<PathBuf>,
    },
    /// Accuracy with a full first cycle and a second cycle cut after k bases.
    SweepLatency {
        #[arg(long, value_name = "CHECKPOINT")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
        /// Comma-separated k values; all of 1..=n² by default.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Export the spike train of one image.
    Encode {
        /// Take encoder and schedule from this checkpoint.
        #[arg(long, value_name = "CHECKPOINT")]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Take the image from the training split instead of the test split.
        #[arg(long)]
        train_split: bool,
        /// Binary spike tensor.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write `t,channel,y,x,spike` rows for nonzero spikes.
        #[arg(long, value_name = "CSV")]
        raster: Option<PathBuf>,
    },
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfiguration(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Stage whose optimizer settings the shared training flags address.
fn train_section(cmd: &Command) -> &'static str {
    match cmd {
        Command::TrainAnn { .. } => "ann-train",
        _ => "snn-train",
    }
}

fn flag_settings(c: &Common, section: &str) -> Settings {
    let mut s = Settings::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            s.insert(k.to_string(), v);
        }
    };
    let str = |v: &Option<usize>| v.map(|x| x.to_string());
    put("general.profile", c.profile.clone());
    put("general.seed", c.seed.map(|x| x.to_string()));
    put(
        "general.dataset",
        c.dataset.as_ref().map(|p| p.display().to_string()),
    );
    put("general.format", c.format.clone());
    put("general.arch", c.arch.clone());
    put("general.train_limit", str(&c.train_limit));
    put("general.test_limit", str(&c.test_limit));
    put("general.timing", c.timing.then(|| "true".into()));
    put("encoder.kind", c.encoder.clone());
    put("encoder.block_size", str(&c.block_size));
    put("encoder.stride", str(&c.stride));
    put("encoder.padding", str(&c.padding));
    put("encoder.cycles", str(&c.cycles));
    put("encoder.timesteps", str(&c.timesteps));
    put("encoder.curtail", str(&c.curtail));
    put("encoder.normalization", c.normalization.clone());
    put("convert.calib_size", str(&c.calib_size));
    put(
        "convert.threshold_percentile",
        c.threshold_percentile.map(|x| x.to_string()),
    );
    put(&format!("{section}.epochs"), str(&c.epochs));
    put(&format!("{section}.lr"), c.lr.map(|x| x.to_string()));
    put(&format!("{section}.optimizer"), c.optimizer.clone());
    put(&format!("{section}.batch_size"), str(&c.batch_size));
    s
}

/// Resolved configuration plus the keys the user set explicitly.
struct Ctx {
    cfg: RunConfig,
    explicit: Settings,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let file_text = match &cli.common.config {
            Some(p) => Some(
                std::fs::read_to_string(p)
                    .map_err(|e| config(format!("cannot read config file {}: {e}", p.display())))?,
            ),
            None => None,
        };
        let file = match &file_text {
            Some(t) => crate::config::parse_config(t)?,
            None => Settings::new(),
        };
        let flags = flag_settings(&cli.common, train_section(&cli.command));
        let merged = crate::config::merge(&file, &flags)?;
        let cfg = RunConfig::from_settings(&merged)?;
        let mut explicit = file;
        explicit.extend(flags);
        Ok(Ctx { cfg, explicit })
    }

    fn set(&self, key: &str) -> bool {
        self.explicit.contains_key(key)
    }

    /// Schedule override requested on the command line or in the file.
    fn schedule_overridden(&self) -> bool {
        ["encoder.timesteps", "encoder.curtail", "encoder.cycles"]
            .iter()
            .any(|k| self.set(k))
    }

    /// Rejects encoder settings that contradict a checkpoint.
    fn check_encoder(&self, meta: &EncoderMeta) -> Result<()> {
        if self.set("encoder.kind") && self.cfg.encoder != meta.kind {
            return Err(config(format!(
                "--encoder {} contradicts the checkpoint's {} encoder",
                self.cfg.encoder.name(),
                meta.kind.name()
            )));
        }
        if self.set("encoder.block_size") && self.cfg.block_size != meta.block_size {
            return Err(config(format!(
                "--block-size {} contradicts the checkpoint's {}",
                self.cfg.block_size, meta.block_size
            )));
        }
        Ok(())
    }

    /// The configured schedule if the user asked for one, else the checkpoint's.
    fn schedule_for(&self, meta: &EncoderMeta) -> Result<FrequencySchedule> {
        if self.schedule_overridden() {
            FrequencySchedule::cyclic(meta.block_size, self.cfg.curtail(), self.cfg.timesteps())
                .map_err(|e| config(format!("schedule: {e}")))
        } else {
            meta.schedule()
        }
    }

    fn load_split(&self, split: Split) -> Result<Dataset> {
        let dir = self
            .cfg
            .dataset
            .as_ref()
            .ok_or_else(|| config("no dataset given (use --dataset DIR)"))?;
        if !dir.is_dir() {
            return Err(config(format!(
                "dataset directory {} does not exist",
                dir.display()
            )));
        }
        let d = load_dataset(dir, self.cfg.format, split)?;
        let limit = match split {
            Split::Train => self.cfg.train_limit,
            Split::Test => self.cfg.test_limit,
        };
        let d = match limit {
            Some(n) => d.take(n),
            None => d,
        };
        if d.is_empty() {
            return Err(Error::invalid(format!("{split:?} split is empty")));
        }
        Ok(d)
    }

    fn calib_images<'d>(&self, train: &'d Dataset) -> Vec<&'d crate::data::Image> {
        train.images.iter().take(self.cfg.calib_size).collect()
    }

    /// Encoder described by the configuration; PCA learns from training blocks.
    fn build_encoder(&self, train: &Dataset) -> Result<InputEncoder> {
        let cfg = &self.cfg;
        let shape = train
            .image_shape()
            .ok_or_else(|| Error::invalid("training split is empty"))?;
        match cfg.encoder {
            EncoderKind::Poisson => InputEncoder::poisson(shape, cfg.block_size, cfg.seed),
            EncoderKind::Transform(kind) => {
                let spec = cfg.block_spec()?;
                let samples = match kind {
                    TransformKind::Pca => Some(block_samples(
                        &self.calib_images(train),
                        &spec,
                        cfg.normalization,
                    )?),
                    _ => None,
                };
                let t = build_transform(kind, cfg.block_size, cfg.seed, samples.as_deref())?;
                Ok(InputEncoder::with_transform(t, spec, shape)?
                    .with_normalization(cfg.normalization))
            }
        }
    }

    fn architecture(&self, enc: &InputEncoder, classes: usize) -> Result<Architecture> {
        let (c, h, w) = enc.input_shape();
        let input = [c, h, w];
        let arch = &self.cfg.arch;
        if arch.contains(':') {
            Architecture::parse(input, arch)
        } else {
            let (_, ih, _) = enc.image_shape();
            let enlarge = if h > ih && h % ih == 0 { h / ih } else { 1 };
            Architecture::preset(arch, input, classes, enlarge)
        }
    }

    /// Generator calibration over whole cycles, then threshold balancing on
    /// spike trains under `schedule`.
    fn convert_network(
        &self,
        net: Network,
        enc: &mut InputEncoder,
        schedule: &FrequencySchedule,
        train: &Dataset,
    ) -> Result<SnnModel> {
        let calib = self.calib_images(train);
        if enc.kind() != EncoderKind::Poisson {
            let cal =
                FrequencySchedule::full_cycles(enc.block_spec().block_size, self.cfg.calib_cycles)?;
            let (lo, hi) = enc.calibrate(&calib, &cal, self.cfg.generator_percentiles)?;
            println!("generator thresholds: theta- = {lo:.6}, theta+ = {hi:.6}");
        }
        let trains = calib
            .par_iter()
            .enumerate()
            .map(|(i, img)| enc.encode(img, schedule, i as u64))
            .collect::<Result<Vec<SpikeTrain>>>()?;
        let leak = self.cfg.leak as f32;
        let th = balance_thresholds(&net, &trains, self.cfg.threshold_percentile, leak)?;
        println!("LIF thresholds: {th:?}");
        SnnModel::new(net, th, leak)
    }
}

fn classes(train: &Dataset, test: &Dataset) -> usize {
    train.classes.max(test.classes)
}

/// Rows of an earlier metrics file up to and including epoch `upto`.
fn prior_rows(path: Option<&Path>, upto: usize) -> Result<Vec<EpochMetrics>> {
    match path {
        Some(p) if upto > 0 && p.is_file() => Ok(read_metrics(p)?
            .into_iter()
            .filter(|r| r.epoch <= upto)
            .collect()),
        _ => Ok(Vec::new()),
    }
}

fn print_row(stage: &str, r: &EpochMetrics) {
    println!(
        "{stage} epoch {}: loss {:.4}, train acc {:.4}, test acc {:.4}",
        r.epoch, r.train_loss, r.train_acc, r.test_acc
    );
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx::new(cli)?;
    match &cli.command {
        Command::TrainAnn {
            out,
            metrics,
            resume,
        } => cmd_train_ann(&ctx, out, metrics.as_deref(), resume.as_deref()),
        Command::Convert { checkpoint, out } => cmd_convert(&ctx, checkpoint, out),
        Command::TrainSnn {
            checkpoint,
            from_scratch,
            resume,
            out,
            metrics,
        } => {
            let start =
                match (checkpoint, resume, from_scratch) {
                    (Some(p), None, false) => SnnStart::Checkpoint(p),
                    (None, Some(p), false) => SnnStart::Resume(p),
                    (None, None, true) => SnnStart::Scratch,
                    _ => return Err(config(
                        "train-snn needs exactly one of --checkpoint, --resume or --from-scratch",
                    )),
                };
            cmd_train_snn(&ctx, start, out, metrics.as_deref())
        }
        Command::Eval {
            checkpoint,
            record_spikes,
            out,
        } => cmd_eval(&ctx, checkpoint, record_spikes.as_deref(), out.as_deref()),
        Command::SweepLatency { checkpoint, out, k } => cmd_sweep_latency(&ctx, checkpoint, out, k),
        Command::Encode {
            checkpoint,
            index,
            train_split,
            out,
            raster,
        } => cmd_encode(
            &ctx,
            checkpoint.as_deref(),
            *index,
            *train_split,
            out,
            raster.as_deref(),
        ),
    }
}

fn load_checkpoint(path: &Path, kind: ModelKind) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    if ck.kind != kind {
        return Err(config(format!(
            "{} holds a {:?} model, this command needs {kind:?}",
            path.display(),
            ck.kind
        )));
    }
    Ok(ck)
}

fn cmd_train_ann(
    ctx: &Ctx,
    out: &Path,
    metrics: Option<&Path>,
    resume: Option<&Path>,
) -> Result<()> {
    let cfg = &ctx.cfg;
    let train = ctx.load_split(Split::Train)?;
    let test = ctx.load_split(Split::Test)?;
    let (enc, mut net, mut opt, start) = match resume {
        Some(p) => {
            let ck = load_checkpoint(p, ModelKind::Ann)?;
            ctx.check_encoder(&ck.encoder)?;
            let enc = ck.encoder.encoder()?;
            let mut opt = cfg.ann.optimizer();
            if let Some(state) = &ck.optimizer {
                opt.import(state, &ck.network.weights)?;
            }
            (enc, ck.network, opt, ck.epoch)
        }
        None => {
            let enc = ctx.build_encoder(&train)?;
            let arch = ctx.architecture(&enc, classes(&train, &test))?;
            (enc, Network::xavier(arch, cfg.seed), cfg.ann.optimizer(), 0)
        }
    };
    let meta = EncoderMeta::from_encoder(&enc, &cfg.schedule()?);
    println!(
        "train-ann: {} parameters, input {:?}, {} train / {} test images",
        net.parameter_count(),
        net.arch.input_shape(),
        train.len(),
        test.len()
    );
    let to_analog = |d: &Dataset| {
        d.images
            .par_iter()
            .map(|i| enc.analog_input(i))
            .collect::<Result<Vec<_>>>()
    };
    let xs = to_analog(&train)?;
    let xt = to_analog(&test)?;
    let save = |net: &Network, opt: Option<&Optimizer>, epoch: usize| {
        Checkpoint {
            kind: ModelKind::Ann,
            network: net.clone(),
            thresholds: Vec::new(),
            leak: cfg.leak as f32,
            encoder: meta.clone(),
            epoch,
            optimizer: opt.map(Optimizer::export),
        }
        .save(out)
    };
    let mut rows = prior_rows(metrics, start)?;
    if start >= cfg.ann.epochs {
        save(&net, Some(&opt), start)?;
        if let Some(m) = metrics {
            write_metrics(m, &rows)?;
        }
        println!("no epochs to run; wrote {}", out.display());
        return Ok(());
    }
    train_ann(
        &mut net,
        &mut opt,
        (&xs, &train.labels),
        (&xt, &test.labels),
        &cfg.ann,
        start,
        cfg.timing,
        &mut |row, net, opt| {
            print_row("ann", row);
            save(net, Some(opt), row.epoch)?;
            rows.push(*row);
            if let Some(m) = metrics {
                write_metrics(m, &rows)?;
            }
            Ok(())
        },
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_convert(ctx: &Ctx, checkpoint: &Path, out: &Path) -> Result<()> {
    let ck = load_checkpoint(checkpoint, ModelKind::Ann)?;
    ctx.check_encoder(&ck.encoder)?;
    let train = ctx.load_split(Split::Train)?;
    let mut enc = ck.encoder.encoder()?;
    let schedule = ctx.schedule_for(&ck.encoder)?;
    let model = ctx.convert_network(ck.network, &mut enc, &schedule, &train)?;
    Checkpoint {
        kind: ModelKind::Snn,
        network: model.network,
        thresholds: model.thresholds,
        leak: model.leak,
        encoder: EncoderMeta::from_encoder(&enc, &schedule),
        epoch: 0,
        optimizer: None,
    }
    .save(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

enum SnnStart<'a> {
    Checkpoint(&'a Path),
    Resume(&'a Path),
    Scratch,
}

fn cmd_train_snn(ctx: &Ctx, start: SnnStart<'_>, out: &Path, metrics: Option<&Path>) -> Result<()> {
    let cfg = &ctx.cfg;
    let train = ctx.load_split(Split::Train)?;
    let test = ctx.load_split(Split::Test)?;
    let (enc, schedule, mut model, mut opt, first_epoch) = match start {
        SnnStart::Checkpoint(p) | SnnStart::Resume(p) => {
            let ck = load_checkpoint(p, ModelKind::Snn)?;
            ctx.check_encoder(&ck.encoder)?;
            let enc = ck.encoder.encoder()?;
            let schedule = ctx.schedule_for(&ck.encoder)?;
            let mut opt = cfg.snn.optimizer();
            let mut epoch = 0;
            if let SnnStart::Resume(_) = start {
                if let Some(state) = &ck.optimizer {
                    opt.import(state, &ck.network.weights)?;
                }
                epoch = ck.epoch;
            }
            let model = SnnModel::new(ck.network, ck.thresholds, ck.leak)?;
            (enc, schedule, model, opt, epoch)
        }
        SnnStart::Scratch => {
            let mut enc = ctx.build_encoder(&train)?;
            let arch = ctx.architecture(&enc, classes(&train, &test))?;
            let schedule = cfg.schedule()?;
            let net = Network::xavier(arch, cfg.seed);
            let model = ctx.convert_network(net, &mut enc, &schedule, &train)?;
            (enc, schedule, model, cfg.snn.optimizer(), 0)
        }
    };
    println!(
        "train-snn: {} encoder, {} timesteps, {} bases per cycle",
        enc.kind().name(),
        schedule.total_timesteps(),
        schedule.curtail()
    );
    let meta = EncoderMeta::from_encoder(&enc, &schedule);
    let save = |m: &SnnModel, opt: &Optimizer, epoch: usize| {
        Checkpoint {
            kind: ModelKind::Snn,
            network: m.network.clone(),
            thresholds: m.thresholds.clone(),
            leak: m.leak,
            encoder: meta.clone(),
            epoch,
            optimizer: Some(opt.export()),
        }
        .save(out)
    };
    let mut rows = prior_rows(metrics, first_epoch)?;
    if first_epoch >= cfg.snn.epochs {
        save(&model, &opt, first_epoch)?;
        if let Some(p) = metrics {
            write_metrics(p, &rows)?;
        }
        println!("no epochs to run; wrote {}", out.display());
        return Ok(());
    }
    let src = SpikeSource::new(&enc, schedule.clone(), &train.images);
    let tsrc = SpikeSource::new(&enc, schedule.clone(), &test.images);
    train_snn(
        &mut model,
        &mut opt,
        (&src, &train.labels),
        (&tsrc, &test.labels),
        &cfg.snn,
        &cfg.surrogate,
        first_epoch,
        cfg.timing,
        &mut |row, m, opt| {
            print_row("snn", row);
            save(m, opt, row.epoch)?;
            rows.push(*row);
            if let Some(p) = metrics {
                write_metrics(p, &rows)?;
            }
            Ok(())
        },
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_eval(
    ctx: &Ctx,
    checkpoint: &Path,
    record_spikes: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    ctx.check_encoder(&ck.encoder)?;
    let test = ctx.load_split(Split::Test)?;
    let enc = ck.encoder.encoder()?;
    let (accuracy, correct) = match ck.kind {
        ModelKind::Ann => {
            if record_spikes.is_some() {
                return Err(config("--record-spikes needs an SNN checkpoint"));
            }
            let xs = test
                .images
                .par_iter()
                .map(|i| enc.analog_input(i))
                .collect::<Result<Vec<_>>>()?;
            let acc = evaluate_ann(&ck.network, &xs, &test.labels)?;
            (acc, (acc * test.len() as f64).round() as usize)
        }
        ModelKind::Snn => {
            let schedule = ctx.schedule_for(&ck.encoder)?;
            RunConfig::check_eval_schedule(&schedule, enc.kind())?;
            let model = SnnModel::new(ck.network, ck.thresholds, ck.leak)?;
            let src = SpikeSource::new(&enc, schedule.clone(), &test.images);
            let r = evaluate_snn(&model, &src, &test.labels)?;
            if let Some(p) = record_spikes {
                let arch = &model.network.arch;
                let rates = spike_rates(arch, &r.spike_counts, r.images)?;
                let report =
                    OpsReport::from_rates(arch, &rates, encoder_ops_for(&enc, &schedule)?)?;
                write_file(p, &report.to_csv())?;
                print!("{}", report.summary());
            }
            println!("timesteps: {}", schedule.total_timesteps());
            (r.accuracy, r.correct)
        }
    };
    println!("accuracy: {accuracy:.4} ({correct}/{})", test.len());
    if let Some(p) = out {
        write_file(
            p,
            &format!(
                "accuracy,correct,images\n{accuracy:.6},{correct},{}\n",
                test.len()
            ),
        )?;
    }
    Ok(())
}

fn cmd_sweep_latency(ctx: &Ctx, checkpoint: &Path, out: &Path, ks: &[usize]) -> Result<()> {
    let ck = load_checkpoint(checkpoint, ModelKind::Snn)?;
    ctx.check_encoder(&ck.encoder)?;
    let meta = &ck.encoder;
    let n = meta.block_size;
    if meta.kind == EncoderKind::Poisson {
        return Err(config("latency sweep needs a transform encoder"));
    }
    if meta.curtail != n * n || meta.timesteps < n * n {
        return Err(config(format!(
            "checkpoint was trained with {} of {} bases over {} timesteps; the sweep needs the full schedule",
            meta.curtail,
            n * n,
            meta.timesteps
        )));
    }
    if ctx.schedule_overridden() {
        return Err(config(
            "sweep-latency sets its own schedules; drop --timesteps, --curtail and --cycles",
        ));
    }
    let mut ks: Vec<usize> = if ks.is_empty() {
        (1..=n * n).collect()
    } else {
        ks.to_vec()
    };
    ks.sort_unstable();
    ks.dedup();
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n * n) {
        return Err(config(format!("k = {k} outside [1, {}]", n * n)));
    }
    let test = ctx.load_split(Split::Test)?;
    let enc = meta.encoder()?;
    let model = SnnModel::new(ck.network, ck.thresholds, ck.leak)?;
    let mut csv = String::from("k,timesteps,accuracy\n");
    for k in ks {
        let schedule = FrequencySchedule::truncated_second_cycle(n, k)?;
        let src = SpikeSource::new(&enc, schedule.clone(), &test.images);
        let r = evaluate_snn(&model, &src, &test.labels)?;
        println!(
            "k = {k:2}, timesteps = {:2}: accuracy {:.4}",
            schedule.total_timesteps(),
            r.accuracy
        );
        csv.push_str(&format!(
            "{k},{},{:.6}\n",
            schedule.total_timesteps(),
            r.accuracy
        ));
    }
    write_file(out, &csv)
}

fn cmd_encode(
    ctx: &Ctx,
    checkpoint: Option<&Path>,
    index: usize,
    train_split: bool,
    out: &Path,
    raster: Option<&Path>,
) -> Result<()> {
    let data = ctx.load_split(if train_split {
        Split::Train
    } else {
        Split::Test
    })?;
    let img = data.images.get(index).ok_or_else(|| {
        config(format!(
            "image index {index} out of range ({} images)",
            data.len()
        ))
    })?;
    let (enc, schedule) = match checkpoint {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            ctx.check_encoder(&ck.encoder)?;
            let mut enc = ck.encoder.encoder()?;
            let schedule = ctx.schedule_for(&ck.encoder)?;
            if enc.kind() != EncoderKind::Poisson && enc.thresholds().is_none() {
                let train = ctx.load_split(Split::Train)?;
                calibrate(ctx, &mut enc, &train)?;
            }
            (enc, schedule)
        }
        None => {
            let train = ctx.load_split(Split::Train)?;
            let mut enc = ctx.build_encoder(&train)?;
            calibrate(ctx, &mut enc, &train)?;
            (enc, ctx.cfg.schedule()?)
        }
    };
    let spikes = enc.encode(img, &schedule, index as u64)?;
    std::fs::write(out, spikes.to_bytes()).map_err(|e| Error::io(out, e))?;
    if let Some(p) = raster {
        let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
        spikes
            .write_csv_raster(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(p, e))?;
    }
    let (pos, neg) = spikes.counts();
    println!(
        "image {index}: {} timesteps, {} positive / {} negative spikes",
        schedule.total_timesteps(),
        pos,
        neg
    );
    Ok(())
}

fn calibrate(ctx: &Ctx, enc: &mut InputEncoder, train: &Dataset) -> Result<()> {
    if enc.kind() == EncoderKind::Poisson {
        return Ok(());
    }
    let cal = FrequencySchedule::full_cycles(enc.block_spec().block_size, ctx.cfg.calib_cycles)?;
    enc.calibrate(
        &ctx.calib_images(train),
        &cal,
        ctx.cfg.generator_percentiles,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn training_flags_address_the_running_stage() {
        let cli =
            Cli::try_parse_from(["dct-snn", "train-ann", "--out", "x", "--lr", "0.3"]).unwrap();
        let s = flag_settings(&cli.common, train_section(&cli.command));
        assert_eq!(s["ann-train.lr"], "0.3");
        let cli = Cli::try_parse_from([
            "dct-snn",
            "--lr",
            "0.3",
            "train-snn",
            "--from-scratch",
            "--out",
            "x",
        ])
        .unwrap();
        let s = flag_settings(&cli.common, train_section(&cli.command));
        assert_eq!(s["snn-train.lr"], "0.3");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["dct-snn", "no-such-command"]), 2);
        assert_eq!(main_with_args(["dct-snn", "eval"]), 2);
        assert_eq!(
            main_with_args(["dct-snn", "train-ann", "--out", "x", "--curtail", "99"]),
            2
        );
    }
}
