//! Command-line front end: dataset synthesis, streaming sweeps, batch
//! evaluation, continuous segmentation, and snapshot inspection.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use coverstream::dataset::{read_feature_file, write_feature_file, Dataset, Split};
use coverstream::error::{Error, Result};
use coverstream::eval::{
    batch_to_csv, curves_to_csv, run_batch_experiment, run_stream_cell_with_model,
    run_stream_experiment, ExperimentPlan, Mode,
};
use coverstream::model::{CoverModel, ModelConfig};
use coverstream::segment::{
    detect_segments, frame_scores, sequence_error, DEFAULT_SMOOTHING, DEFAULT_WINDOW,
};
use coverstream::synth::{
    drift_preset, generate, generate_frame_sequence, vowels_preset, DriftKind, DriftSpec,
    NovelSpec, SynthSpec,
};
use coverstream::ClassId;

#[derive(Parser)]
#[command(
    name = "coverstream",
    about = "Streaming bag classifier with budgeted active learning",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (plus frame sequences for the actions
    /// preset).
    Synth(SynthArgs),
    /// Run the streaming protocol over a budget grid.
    Stream(StreamArgs),
    /// Train/test or K-fold batch evaluation.
    Batch(BatchArgs),
    /// Continuous recognition over one frame-feature sequence.
    Segment(SegmentArgs),
    /// Print summary statistics of a model snapshot.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the manifest and feature files.
    #[arg(long)]
    out: PathBuf,
    /// blobs | vowels | drift | actions
    #[arg(long, default_value = "blobs")]
    preset: String,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    bags: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Descriptors per bag: `N` or `MIN:MAX`.
    #[arg(long)]
    descriptors: Option<String>,
    /// Per-class mean offset along its own axis.
    #[arg(long)]
    sep: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Move all class means at this bag index.
    #[arg(long)]
    drift_at: Option<usize>,
    /// Translation magnitude for --drift-at.
    #[arg(long)]
    drift_shift: Option<f64>,
    /// Rotate class means at --drift-at instead of translating.
    #[arg(long, default_value_t = false)]
    drift_rotate: bool,
    /// Withhold this class index until --novel-at.
    #[arg(long)]
    novel_class: Option<usize>,
    #[arg(long)]
    novel_at: Option<usize>,
    /// Tag the first fraction of bags `train` and the rest `test`.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Number of frame sequences to emit (actions preset).
    #[arg(long, default_value_t = 5)]
    sequences: usize,
    /// Actions per sequence (actions preset).
    #[arg(long, default_value_t = 3)]
    segments: usize,
    /// Frames per action: `N` or `MIN:MAX` (actions preset).
    #[arg(long, default_value = "60:90")]
    seg_len: String,
}

#[derive(Args)]
struct StreamArgs {
    /// Dataset manifest path (overrides the plan's dataset).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Plan file with `key = value` lines.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Variant to run (repeatable); default: all four.
    #[arg(long)]
    variant: Vec<String>,
    /// Budget to run (repeatable); default: the standard grid.
    #[arg(long)]
    budget: Vec<f64>,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of seeds (seed, seed+1, ...).
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_balls: Option<usize>,
    /// Keep the manifest order instead of permuting per seed.
    #[arg(long, default_value_t = false)]
    no_permute: bool,
    /// Output directory for results.csv and step logs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Save the trained model here (single-cell runs only).
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Fold count for K-fold mode (omit to use the manifest's split).
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Frame-feature file to segment.
    #[arg(long)]
    sequence: PathBuf,
    /// Model snapshot to load.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Manifest to train from instead of --model (train split if tagged,
    /// otherwise every bag).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Ground-truth label sequence (one label per line).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Scoring window in frames.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Smoothing width in frames.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    smooth: usize,
    /// Confidence gate; spans below it are emitted as unknown.
    #[arg(long, default_value_t = 0.5)]
    gate: f64,
    /// Labels an unknown span may stand for when scoring against --truth.
    #[arg(long)]
    unknown_matches: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// Model snapshot to summarize.
    #[arg(long)]
    model: PathBuf,
}

fn main() {
    // behave like a classic pipeline tool when the reader goes away
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Stream(args) => run_stream(args),
        Command::Batch(args) => run_batch(args),
        Command::Segment(args) => run_segment(args),
        Command::Inspect(args) => run_inspect(args),
    }
}

fn parse_range(text: &str, name: &'static str) -> Result<(usize, usize)> {
    let parse_one = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(name, format!("bad value `{t}`")))
    };
    match text.split_once(':') {
        Some((lo, hi)) => Ok((parse_one(lo)?, parse_one(hi)?)),
        None => {
            let n = parse_one(text)?;
            Ok((n, n))
        }
    }
}

fn build_synth_spec(args: &SynthArgs) -> Result<SynthSpec> {
    let mut spec = match args.preset.as_str() {
        "blobs" | "actions" => SynthSpec::default(),
        "vowels" => vowels_preset(),
        "drift" => drift_preset(),
        other => {
            return Err(Error::invalid(
                "preset",
                format!("`{other}` is not one of blobs, vowels, drift, actions"),
            ))
        }
    };
    if let Some(c) = args.classes {
        spec.classes = c;
        spec.dim = spec.dim.max(c);
    }
    if let Some(b) = args.bags {
        spec.bags = b;
    }
    if let Some(d) = args.dim {
        spec.dim = d;
    }
    if let Some(desc) = &args.descriptors {
        spec.bag_len = parse_range(desc, "descriptors")?;
    }
    if let Some(s) = args.sep {
        spec.separation = s;
    }
    if let Some(s) = args.sigma {
        spec.sigma = s;
    }
    if let Some(at) = args.drift_at {
        let kind = if args.drift_rotate {
            DriftKind::Rotate
        } else {
            let mag = args.drift_shift.ok_or_else(|| {
                Error::invalid("drift", "--drift-at needs --drift-shift or --drift-rotate")
            })?;
            DriftKind::Shift(mag)
        };
        spec.drift = Some(DriftSpec { at_bag: at, kind });
    }
    match (args.novel_class, args.novel_at) {
        (Some(class), Some(at_bag)) => spec.novel = Some(NovelSpec { class, at_bag }),
        (None, None) => {}
        _ => {
            return Err(Error::invalid(
                "novel",
                "--novel-class and --novel-at must be given together",
            ))
        }
    }
    if let Some(f) = args.train_fraction {
        spec.train_fraction = Some(f);
    }
    Ok(spec)
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let spec = build_synth_spec(&args)?;
    let dataset = generate(&spec, args.seed)?;
    let manifest = dataset.write_to_dir(&args.out)?;
    println!(
        "wrote {} bags ({} classes, dim {}) to {}",
        dataset.len(),
        spec.classes,
        spec.dim,
        manifest.display()
    );

    if args.preset == "actions" {
        let seg_len = parse_range(&args.seg_len, "seg_len")?;
        let seq_dir = args.out.join("sequences");
        fs::create_dir_all(&seq_dir)?;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed ^ 0xac71_0375);
        for s in 0..args.sequences {
            // adjacent segments always change class so every boundary is real
            let mut classes: Vec<usize> = Vec::with_capacity(args.segments);
            for _ in 0..args.segments {
                let prev = classes.last().copied();
                let c = loop {
                    let c = rng.gen_range(0..spec.classes);
                    if Some(c) != prev {
                        break c;
                    }
                };
                classes.push(c);
            }
            let (frames, labels, _) = generate_frame_sequence(
                &spec,
                &classes,
                seg_len,
                args.seed.wrapping_add(s as u64),
            )?;
            write_feature_file(seq_dir.join(format!("seq_{s:03}.csv")), &frames)?;
            let mut truth = String::from("# labels v1\n");
            for l in &labels {
                truth.push_str(l);
                truth.push('\n');
            }
            fs::write(seq_dir.join(format!("seq_{s:03}.labels.txt")), truth)?;
        }
        println!(
            "wrote {} sequences to {}",
            args.sequences,
            seq_dir.display()
        );
    }
    Ok(())
}

fn load_plan(path: Option<&Path>) -> Result<ExperimentPlan> {
    match path {
        Some(p) => ExperimentPlan::parse(&fs::read_to_string(p)?),
        None => Ok(ExperimentPlan::default()),
    }
}

fn expand_seeds(base: u64, count: Option<u64>) -> Vec<u64> {
    match count {
        Some(n) => (base..base + n).collect(),
        None => vec![base],
    }
}

fn resolve_dataset(cli_data: Option<&Path>, plan: &ExperimentPlan) -> Result<Dataset> {
    let path = cli_data
        .map(Path::to_path_buf)
        .or_else(|| plan.dataset.clone())
        .ok_or_else(|| Error::invalid("data", "no dataset given (flag --data or plan key)"))?;
    Dataset::load_manifest(path)
}

fn run_stream(args: StreamArgs) -> Result<()> {
    let mut plan = load_plan(args.plan.as_deref())?;
    plan.mode = Mode::Stream;
    if !args.variant.is_empty() {
        plan.variants = args
            .variant
            .iter()
            .map(|v| v.parse())
            .collect::<Result<_>>()?;
    }
    if !args.budget.is_empty() {
        plan.budgets = args.budget.clone();
    }
    if args.seeds.is_some() || args.plan.is_none() {
        plan.seeds = expand_seeds(args.seed, args.seeds);
    }
    if let Some(tau) = args.tau {
        plan.tau = tau;
    }
    if let Some(m) = args.max_balls {
        plan.max_balls = m;
    }
    if args.no_permute {
        plan.permute = false;
    }
    let dataset = resolve_dataset(args.data.as_deref(), &plan)?;

    let (cells, curves) = run_stream_experiment(&plan, &dataset)?;
    let csv = curves_to_csv(&curves);
    print!("{csv}");

    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("results.csv"), &csv)?;
        for cell in &cells {
            let name = format!(
                "steplog_{}_b{}_s{}.csv",
                cell.variant, cell.budget, cell.seed
            );
            let mut buf = Vec::new();
            cell.stats.write_csv(&mut buf)?;
            fs::write(out.join(name), buf)?;
        }
        println!("wrote {} step logs to {}", cells.len(), out.display());
    }

    if let Some(path) = &args.save_model {
        if cells.len() != 1 {
            return Err(Error::invalid(
                "save_model",
                format!("needs a single-cell run, this plan expands to {}", cells.len()),
            ));
        }
        let c = &cells[0];
        let (_, model) = run_stream_cell_with_model(
            &dataset,
            c.variant,
            c.budget,
            c.seed,
            plan.tau,
            plan.max_balls,
            plan.permute,
        )?;
        model.save(path)?;
        println!("saved model to {}", path.display());
    }
    Ok(())
}

fn run_batch(args: BatchArgs) -> Result<()> {
    let mut plan = load_plan(args.plan.as_deref())?;
    plan.mode = Mode::Batch;
    if args.folds.is_some() {
        plan.folds = args.folds;
    }
    if args.seeds.is_some() || args.plan.is_none() {
        plan.seeds = expand_seeds(args.seed, args.seeds);
    }
    let dataset = resolve_dataset(args.data.as_deref(), &plan)?;
    let report = run_batch_experiment(&plan, &dataset)?;
    let csv = batch_to_csv(&report);
    print!("{csv}");
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("batch.csv"), &csv)?;
    }
    Ok(())
}

fn train_from_manifest(path: &Path, seed: u64) -> Result<CoverModel> {
    let dataset = Dataset::load_manifest(path)?;
    let bags = if dataset.has_split(Split::Train) {
        dataset.split_bags(Split::Train)
    } else {
        dataset.bags().collect()
    };
    if bags.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = CoverModel::new(ModelConfig {
        seed,
        ..ModelConfig::default()
    });
    for bag in bags {
        let label = bag
            .true_label()
            .ok_or_else(|| Error::OracleMiss(bag.id().to_string()))?;
        model.learn_bag(bag, label)?;
    }
    Ok(model)
}

fn run_segment(args: SegmentArgs) -> Result<()> {
    let model = match (&args.model, &args.train) {
        (Some(snap), None) => CoverModel::load(snap)?,
        (None, Some(manifest)) => train_from_manifest(manifest, args.seed)?,
        _ => {
            return Err(Error::invalid(
                "model",
                "give exactly one of --model or --train",
            ))
        }
    };
    let dim = model.dim().ok_or(Error::EmptyModel)?;
    let frames = read_feature_file(&args.sequence, dim)?;
    let series = frame_scores(&model, &frames, args.window, args.smooth)?;
    let segments = detect_segments(&series, args.gate);

    let mut csv = String::from("# segments v1\nstart,end,label,confidence\n");
    for s in &segments {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            s.start,
            s.end,
            s.label.as_deref().unwrap_or("?"),
            s.confidence
        ));
    }
    print!("{csv}");

    if let Some(truth_path) = &args.truth {
        let truth = read_label_file(truth_path)?;
        let unknown: Option<HashSet<String>> = if args.unknown_matches.is_empty() {
            None
        } else {
            Some(args.unknown_matches.iter().cloned().collect())
        };
        let err = sequence_error(&segments, &truth, unknown.as_ref())?;
        println!("# levenshtein_error {err}");
    }

    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("segments.csv"), &csv)?;
    }
    Ok(())
}

fn read_label_file(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn run_inspect(args: InspectArgs) -> Result<()> {
    let model = CoverModel::load(&args.model)?;
    println!("balls: {}", model.num_balls());
    println!("classes: {}", model.num_classes());
    println!("dim: {}", model.dim().unwrap_or(0));
    let radii: Vec<f64> = model.balls().map(|b| b.radius()).collect();
    if !radii.is_empty() {
        let min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("radius min: {min}");
        println!("radius max: {max}");
        let buckets = 8usize;
        let width = if max > min {
            (max - min) / buckets as f64
        } else {
            1.0
        };
        let mut hist = vec![0usize; buckets];
        for r in &radii {
            let b = (((r - min) / width) as usize).min(buckets - 1);
            hist[b] += 1;
        }
        for (i, count) in hist.iter().enumerate() {
            let lo = min + i as f64 * width;
            println!("radius [{lo:.4}, {:.4}): {count}", lo + width);
        }
    }
    for (y, name) in model.labels().names().iter().enumerate() {
        let total: u64 = model.balls().map(|b| b.count(ClassId(y as u32))).sum();
        println!("count[{name}]: {total}");
    }
    let mistakes: u64 = model.balls().map(|b| b.mistakes()).sum();
    println!("mistakes: {mistakes}");
    Ok(())
}
