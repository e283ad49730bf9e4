//! The `transda` command line: `synth`, `train`, `transduce`, `eval`,
//! `inspect`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 numerical failure. Every command echoes its resolved configuration as
//! `key=value` lines on the error stream.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use crate::datamodel::{self, load_checkpoint, save_checkpoint, SourceDataset, SynthConfig, TargetDataset};
use crate::error::{Error, Result};
use crate::features::ArchKind;
use crate::trainer::{self, EvalMode, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "transda", version, about = "Transductive domain adaptation with an asymmetric metric")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the rotated-blobs benchmark.
    Synth(SynthArgs),
    /// Train a metric (and features) and write a checkpoint.
    Train(TrainArgs),
    /// Label a target set with a trained checkpoint.
    Transduce(TransduceArgs),
    /// Score a checkpoint against target ground truth.
    Eval(EvalArgs),
    /// Print checkpoint metadata.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    /// Target rotation in degrees.
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    rotate: f64,
    /// Target translation as `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 0.0], allow_negative_numbers = true)]
    shift: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory for source.csv, target.csv, target_labels.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Optional target ground truth, used only to report final accuracy.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Trace CSV path (default: `<out>.trace.csv`).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    arch: Option<ArchKind>,
    #[arg(long)]
    d_out: Option<usize>,
    #[arg(long)]
    d_hidden: Option<usize>,
    #[arg(long)]
    lambda_w: Option<f64>,
    #[arg(long)]
    adagrad_eps: Option<f64>,
    #[arg(long)]
    no_label_propagation: bool,
    #[arg(long)]
    no_feature_learning: bool,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            margin: self.margin.unwrap_or(d.margin),
            lambda: self.lambda.unwrap_or(d.lambda),
            knn_k: self.knn_k.unwrap_or(d.knn_k),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            max_iters: self.iters.unwrap_or(d.max_iters),
            seed: self.seed.unwrap_or(d.seed),
            arch: self.arch.unwrap_or(d.arch),
            d_out: self.d_out.unwrap_or(d.d_out),
            d_hidden: self.d_hidden.unwrap_or(d.d_hidden),
            lambda_w: self.lambda_w.unwrap_or(d.lambda_w),
            label_propagation: !self.no_label_propagation,
            feature_learning: !self.no_feature_learning,
            adagrad_epsilon: self.adagrad_eps.unwrap_or(d.adagrad_epsilon),
        }
    }
}

#[derive(Debug, Args)]
struct TransduceArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Propagated)]
    mode: EvalMode,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Propagated)]
    mode: EvalMode,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    ckpt: PathBuf,
}

/// Formats a real with 6 significant digits, `%g` style.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::NonFinite(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => synth(a, out, err),
        Command::Train(a) => train(a, out, err),
        Command::Transduce(a) => transduce(a, out, err),
        Command::Eval(a) => eval(a, out, err),
        Command::Inspect(a) => inspect(a, out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn echo(err: &mut dyn Write, command: &str, pairs: &[(&str, String)]) -> Result<()> {
    writeln!(err, "command={command}")?;
    for (k, v) in pairs {
        writeln!(err, "{k}={v}")?;
    }
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn is_rawmat(path: &Path) -> Result<bool> {
    let bytes = fs::read(path)?;
    Ok(bytes.starts_with(datamodel::RAWMAT_MAGIC))
}

fn rawmat_f64(path: &Path) -> Result<Array2<f64>> {
    Ok(datamodel::load_rawmat(path)?.mapv(f64::from))
}

/// Loads a labeled source file: CSV, or a raw matrix whose column 0 holds
/// integer labels.
fn read_source(path: &Path) -> Result<SourceDataset> {
    if !is_rawmat(path)? {
        return datamodel::load_source_csv(path, None);
    }
    let m = rawmat_f64(path)?;
    if m.ncols() < 2 {
        return Err(Error::Format("labeled raw matrix needs a label column and features".into()));
    }
    let mut labels = Vec::with_capacity(m.nrows());
    for (r, &v) in m.column(0).iter().enumerate() {
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Parse {
                row: r + 1,
                column: 1,
                message: format!("label {v} is not a non-negative integer"),
            });
        }
        labels.push(v as usize);
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    SourceDataset::new(m.slice(ndarray::s![.., 1..]).to_owned(), labels, k)
}

fn read_target_points(path: &Path) -> Result<Array2<f64>> {
    if is_rawmat(path)? {
        rawmat_f64(path)
    } else {
        Ok(datamodel::load_csv(path, false)?.points)
    }
}

fn read_target(path: &Path, labels: Option<&Path>, class_count: usize) -> Result<TargetDataset> {
    let points = read_target_points(path)?;
    match labels {
        None => TargetDataset::new(points),
        Some(l) => {
            let truth = datamodel::load_labels(l)?;
            let k = truth.iter().max().map_or(class_count, |m| class_count.max(m + 1));
            TargetDataset::with_ground_truth(points, truth, k)
        }
    }
}

fn synth(a: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = SynthConfig {
        class_count: a.classes,
        per_class: a.per_class,
        rotation_deg: a.rotate,
        shift: [a.shift[0], a.shift[1]],
        noise_sd: a.noise,
        seed: a.seed,
    };
    echo(
        err,
        "synth",
        &[
            ("classes", cfg.class_count.to_string()),
            ("per_class", cfg.per_class.to_string()),
            ("rotate", cfg.rotation_deg.to_string()),
            ("shift", format!("{},{}", cfg.shift[0], cfg.shift[1])),
            ("noise", cfg.noise_sd.to_string()),
            ("seed", cfg.seed.to_string()),
            ("out", path_str(&a.out)),
        ],
    )?;
    let (source, target) = datamodel::synth_blobs(&cfg)?;
    fs::create_dir_all(&a.out)?;
    let paths = [
        a.out.join("source.csv"),
        a.out.join("target.csv"),
        a.out.join("target_labels.csv"),
    ];
    datamodel::write_source_csv(BufWriter::new(File::create(&paths[0])?), &source)?;
    datamodel::write_points_csv(BufWriter::new(File::create(&paths[1])?), target.points())?;
    let truth = target.evaluation_labels().expect("synthetic targets carry ground truth");
    datamodel::write_labels(BufWriter::new(File::create(&paths[2])?), truth)?;
    for p in &paths {
        writeln!(out, "wrote={}", path_str(p))?;
    }
    Ok(())
}

fn train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = a.config();
    let trace = a
        .trace
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.trace.csv", a.out.display())));
    let mut pairs = vec![
        ("source", path_str(&a.source)),
        ("target", path_str(&a.target)),
        ("labels", a.labels.as_deref().map_or_else(|| "none".into(), path_str)),
        ("out", path_str(&a.out)),
        ("trace", path_str(&trace)),
    ];
    pairs.extend(cfg.describe());
    echo(err, "train", &pairs)?;
    cfg.validate()?;

    let source = read_source(&a.source)?;
    let target = read_target(&a.target, a.labels.as_deref(), source.class_count())?;
    let (ckpt, report) = trainer::train(&source, &target, &cfg)?;
    for w in &report.warnings {
        writeln!(err, "warning: {w}")?;
    }
    save_checkpoint(&ckpt, &a.out)?;
    report.write_trace_csv(BufWriter::new(File::create(&trace)?))?;

    writeln!(out, "iterations={}", ckpt.iteration)?;
    if let Some(last) = report.records.last() {
        writeln!(out, "final_loss={}", fmt_g6(last.loss))?;
        writeln!(out, "final_energy={}", fmt_g6(last.energy))?;
    }
    if let Some(it) = report.converged_at {
        writeln!(out, "converged_at={it}")?;
    }
    if let Some(acc) = report.final_accuracy {
        writeln!(out, "accuracy={}", fmt_g6(acc))?;
    }
    Ok(())
}

fn transduce(a: &TransduceArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let mut pairs = vec![
        ("ckpt", path_str(&a.ckpt)),
        ("source", path_str(&a.source)),
        ("target", path_str(&a.target)),
        ("mode", mode_name(a.mode).into()),
    ];
    pairs.extend(ckpt.config.describe());
    echo(err, "transduce", &pairs)?;
    let source = read_source(&a.source)?;
    let points = read_target_points(&a.target)?;
    let assignment = trainer::label_targets(&ckpt, &source, &points, a.mode)?;
    for (i, y) in assignment.labels.iter().enumerate() {
        writeln!(out, "{i},{y}")?;
    }
    writeln!(out, "# energy={}", fmt_g6(assignment.energy))?;
    Ok(())
}

fn eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let mut pairs = vec![
        ("ckpt", path_str(&a.ckpt)),
        ("source", path_str(&a.source)),
        ("target", path_str(&a.target)),
        ("labels", path_str(&a.labels)),
        ("mode", mode_name(a.mode).into()),
    ];
    pairs.extend(ckpt.config.describe());
    echo(err, "eval", &pairs)?;
    let source = read_source(&a.source)?;
    let target = read_target(&a.target, Some(&a.labels), source.class_count())?;
    let acc = trainer::evaluate(&ckpt, &source, &target, a.mode)?;
    writeln!(out, "accuracy={}", fmt_g6(acc))?;
    Ok(())
}

fn inspect(a: &InspectArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    echo(err, "inspect", &[("ckpt", path_str(&a.ckpt))])?;
    let ckpt = load_checkpoint(&a.ckpt)?;
    let arch = ckpt.features.arch();
    writeln!(out, "arch={}", arch.kind())?;
    writeln!(out, "d_in={}", arch.d_in())?;
    writeln!(out, "d_hidden={}", arch.d_hidden())?;
    writeln!(out, "d_out={}", arch.d_out())?;
    writeln!(out, "params={}", arch.param_count())?;
    writeln!(out, "iteration={}", ckpt.iteration)?;
    writeln!(out, "seed={}", ckpt.seed())?;
    for (k, v) in ckpt.config.describe() {
        if k != "seed" {
            writeln!(out, "config.{k}={v}")?;
        }
    }
    Ok(())
}

fn mode_name(mode: EvalMode) -> &'static str {
    match mode {
        EvalMode::Nn => "nn",
        EvalMode::Propagated => "propagated",
    }
}
