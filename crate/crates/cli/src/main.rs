//! Command-line driver: loads datasets, runs library operations, and writes
//! canonical reports and plot CSVs. The CLI performs no arithmetic of its
//! own; every number in its outputs comes from library calls.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error. Diagnostics go to
//! stderr; machine-readable output goes to files or stdout.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use contextval::io_yolo::{dataset_dir_sha256, read_yolo_dir, write_yolo_dir};
use contextval::report::{
    self, InputRef, PlotKind, PlotSource, Provenance,
};
use contextval::synthgen::{
    generate_dataset, perturb_layout, synthesize_predictions, CorruptionModel, Placement,
    ScenarioConfig,
};
use contextval::{
    compare, dataset_summary, pointwise_compare, sweep_patch, sweep_theta, validate_dataset,
    ClassId, CompareConfig, CompareReport, Dataset, PatchSpec, Reduction,
};

#[derive(Parser)]
#[command(
    name = "contextval",
    version,
    about = "Validate one labeled detection dataset against another by \
             comparing contextualized performance distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure dataset B's ability to predict performance on dataset A.
    Compare(CompareArgs),
    /// Run one comparison per similarity threshold and tabulate the series.
    SweepTheta(SweepThetaArgs),
    /// Run one comparison per patch size and tabulate the series.
    SweepPatch(SweepPatchArgs),
    /// Compare paired datasets point-wise and distribution-wise.
    Pointwise(PointwiseArgs),
    /// Generate a synthetic ground-truth dataset.
    Gen(GenArgs),
    /// Synthesize corrupted predictions for an existing dataset.
    Corrupt(CorruptArgs),
    /// Jitter ground-truth boxes, preserving pair keys.
    Perturb(PerturbArgs),
    /// Print a dataset summary document.
    Summary(SummaryArgs),
    /// Check a dataset directory against every invariant.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Direction {
    A2b,
    B2a,
    Both,
}

#[derive(Args)]
struct CommonCompare {
    /// Dataset A directory; the reference loop runs over its contexts.
    #[arg(long = "set-a", value_name = "DIR")]
    set_a: PathBuf,
    /// Dataset B directory.
    #[arg(long = "set-b", value_name = "DIR")]
    set_b: PathBuf,
    /// Discard predictions below this confidence before matching.
    #[arg(long = "confidence-floor", default_value_t = 0.0)]
    confidence_floor: f64,
    /// Skip batches smaller than this on either side.
    #[arg(long = "min-batch", default_value_t = 1, value_name = "N")]
    min_batch: usize,
    /// Restrict the run to these class ids.
    #[arg(long, value_delimiter = ',', value_name = "IDS")]
    classes: Option<Vec<u32>>,
    /// Reduction over the per-batch distance lists.
    #[arg(long, default_value = "mean", value_name = "mean|median|max")]
    reduction: String,
    /// Center-distance limit when pairing objects point-wise, in pixels.
    #[arg(long = "pairing-radius", default_value_t = 32.0)]
    pairing_radius: f64,
    /// Report path; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Plot CSV outputs as `<kind>:<path>`; may be repeated.
    #[arg(long = "plot-csv", value_name = "KIND:PATH")]
    plot_csv: Vec<String>,
    /// Omit the provenance timestamp so outputs are byte-reproducible.
    #[arg(long = "no-timestamp")]
    no_timestamp: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonCompare,
    /// Similarity threshold for batch membership.
    #[arg(long, default_value_t = 0.8)]
    theta: f64,
    /// Context patch size as HxW.
    #[arg(long, default_value = "120x120", value_name = "HxW")]
    patch: String,
    /// Which comparison direction(s) to run.
    #[arg(long, value_enum, default_value = "a2b")]
    direction: Direction,
}

#[derive(Args)]
struct SweepThetaArgs {
    #[command(flatten)]
    common: CommonCompare,
    /// Ascending thresholds to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.6,0.7,0.8,0.9")]
    thetas: Vec<f64>,
    /// Context patch size as HxW, constant over the sweep.
    #[arg(long, default_value = "120x120", value_name = "HxW")]
    patch: String,
}

#[derive(Args)]
struct SweepPatchArgs {
    #[command(flatten)]
    common: CommonCompare,
    /// Patch sizes to sweep, as HxW values.
    #[arg(long, value_delimiter = ',', default_value = "80x80,100x100,120x120,140x140,160x160,180x180")]
    patches: Vec<String>,
    /// Similarity threshold, constant over the sweep.
    #[arg(long, default_value_t = 0.8)]
    theta: f64,
}

#[derive(Args)]
struct PointwiseArgs {
    #[command(flatten)]
    common: CommonCompare,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory; must not already contain files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 100)]
    images: u32,
    #[arg(long, default_value_t = 1280)]
    width: u32,
    #[arg(long, default_value_t = 720)]
    height: u32,
    /// Objects per image, as `N` or `MIN..MAX` (inclusive).
    #[arg(long, default_value = "10..18")]
    objects: String,
    /// Number of classes; ids run from 0.
    #[arg(long, default_value_t = 2)]
    classes: u32,
    /// Relative class frequencies, comma-separated; one value means equal.
    #[arg(long = "class-mix", value_delimiter = ',', default_value = "1")]
    class_mix: Vec<f64>,
    /// Box height range in pixels, as `N` or `MIN..MAX`.
    #[arg(long = "box-height", default_value = "18..42")]
    box_height: String,
    /// Width-to-height ratio of generated boxes.
    #[arg(long, default_value_t = 0.75)]
    aspect: f64,
    /// Minimum center-to-center separation in pixels.
    #[arg(long = "min-sep", default_value_t = 24.0)]
    min_sep: f64,
    /// Placement model.
    #[arg(long, value_enum, default_value = "uniform")]
    placement: PlacementArg,
    /// Normal radius for clustered placement, in pixels.
    #[arg(long = "cluster-radius", default_value_t = 120.0)]
    cluster_radius: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlacementArg {
    Uniform,
    Clustered,
}

#[derive(Args)]
struct CorruptArgs {
    /// Input dataset directory.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output directory; must not already contain files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Miss probability, one value or one per class.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    miss: Vec<f64>,
    /// Center jitter standard deviation in pixels.
    #[arg(long = "center-jitter", default_value_t = 0.0)]
    center_jitter: f64,
    /// Multiplicative size jitter standard deviation.
    #[arg(long = "size-jitter", default_value_t = 0.0)]
    size_jitter: f64,
    /// Expected false positives per image.
    #[arg(long = "fp-rate", default_value_t = 0.0)]
    fp_rate: f64,
    /// Confidence range, as `V` or `LO..HI`.
    #[arg(long, default_value = "1")]
    conf: String,
    /// Probability of reporting a wrong class.
    #[arg(long = "class-confusion", default_value_t = 0.0)]
    class_confusion: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct PerturbArgs {
    /// Input dataset directory.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Output directory; must not already contain files.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Positional jitter standard deviation in pixels.
    #[arg(long = "pos-stddev", default_value_t = 2.0)]
    pos_stddev: f64,
    /// Multiplicative size jitter standard deviation.
    #[arg(long = "size-stddev", default_value_t = 0.0)]
    size_stddev: f64,
    #[arg(long, default_value_t = 9)]
    seed: u64,
}

#[derive(Args)]
struct SummaryArgs {
    /// Dataset directory.
    #[arg(value_name = "DIR")]
    dir: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Omit the provenance timestamp.
    #[arg(long = "no-timestamp")]
    no_timestamp: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Dataset directory.
    #[arg(value_name = "DIR")]
    dir: PathBuf,
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

/// Honors CONTEXTVAL_THREADS as a cap on the rayon worker count.
fn init_thread_pool() {
    if let Ok(raw) = std::env::var("CONTEXTVAL_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring invalid CONTEXTVAL_THREADS='{raw}'"),
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Compare(args) => run_compare(args),
        Command::SweepTheta(args) => run_sweep_theta(args),
        Command::SweepPatch(args) => run_sweep_patch(args),
        Command::Pointwise(args) => run_pointwise(args),
        Command::Gen(args) => run_gen(args),
        Command::Corrupt(args) => run_corrupt(args),
        Command::Perturb(args) => run_perturb(args),
        Command::Summary(args) => run_summary(args),
        Command::Validate(args) => run_validate(args),
    }
}

fn load_dir(path: &Path) -> Result<Dataset> {
    read_yolo_dir(path).with_context(|| format!("loading dataset from {}", path.display()))
}

fn parse_range_u32(raw: &str) -> Result<(u32, u32)> {
    match raw.split_once("..") {
        Some((lo, hi)) => Ok((lo.trim().parse()?, hi.trim().parse()?)),
        None => {
            let v: u32 = raw.trim().parse()?;
            Ok((v, v))
        }
    }
}

fn parse_range_f64(raw: &str) -> Result<(f64, f64)> {
    match raw.split_once("..") {
        Some((lo, hi)) => Ok((lo.trim().parse()?, hi.trim().parse()?)),
        None => {
            let v: f64 = raw.trim().parse()?;
            Ok((v, v))
        }
    }
}

fn build_config(common: &CommonCompare, theta: f64, patch: &str) -> Result<CompareConfig> {
    Ok(CompareConfig {
        theta,
        patch: PatchSpec::from_str(patch)?,
        confidence_floor: common.confidence_floor,
        min_batch_size: common.min_batch,
        classes: common
            .classes
            .as_ref()
            .map(|ids| ids.iter().map(|&id| ClassId(id)).collect()),
        reduction: Reduction::from_str(&common.reduction)?,
        pairing_radius: common.pairing_radius,
    })
}

fn provenance(no_timestamp: bool, inputs: Vec<InputRef>) -> Provenance {
    Provenance {
        timestamp: (!no_timestamp).then(|| {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        }),
        tool: format!("contextval {}", env!("CARGO_PKG_VERSION")),
        inputs,
    }
}

fn input_refs(common: &CommonCompare) -> Result<Vec<InputRef>> {
    Ok(vec![
        InputRef {
            role: "set_a".into(),
            path: common.set_a.display().to_string(),
            sha256: dataset_dir_sha256(&common.set_a)?,
        },
        InputRef {
            role: "set_b".into(),
            path: common.set_b.display().to_string(),
            sha256: dataset_dir_sha256(&common.set_b)?,
        },
    ])
}

fn write_output(doc: &serde_json::Value, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            report::write_document(doc, file)?;
        }
        None => {
            let stdout = std::io::stdout();
            report::write_document(doc, stdout.lock())?;
        }
    }
    Ok(())
}

struct PlotRequest {
    kind: PlotKind,
    path: PathBuf,
}

fn parse_plot_requests(raw: &[String]) -> Result<Vec<PlotRequest>> {
    raw.iter()
        .map(|entry| {
            let (kind, path) = entry
                .split_once(':')
                .ok_or_else(|| anyhow!("--plot-csv expects <kind>:<path>, got '{entry}'"))?;
            Ok(PlotRequest {
                kind: PlotKind::from_str(kind)?,
                path: PathBuf::from(path),
            })
        })
        .collect()
}

fn emit_plots(requests: &[PlotRequest], source: PlotSource<'_>) -> Result<()> {
    for request in requests {
        let file = File::create(&request.path)
            .with_context(|| format!("creating {}", request.path.display()))?;
        report::emit_plot_csv(source, request.kind, file)?;
    }
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<ExitCode> {
    let cfg = build_config(&args.common, args.theta, &args.patch)?;
    let plots = parse_plot_requests(&args.common.plot_csv)?;
    let a = load_dir(&args.common.set_a)?;
    let b = load_dir(&args.common.set_b)?;

    let mut results: Vec<(&str, CompareReport)> = Vec::new();
    if matches!(args.direction, Direction::A2b | Direction::Both) {
        results.push(("a_to_b", compare(&a, &b, &cfg)?));
    }
    if matches!(args.direction, Direction::B2a | Direction::Both) {
        results.push(("b_to_a", compare(&b, &a, &cfg)?));
    }

    let prov = provenance(args.common.no_timestamp, input_refs(&args.common)?);
    let borrowed: Vec<(&str, &CompareReport)> =
        results.iter().map(|(d, r)| (*d, r)).collect();
    let doc = report::compare_document(&borrowed, &prov);
    write_output(&doc, &args.common.out)?;
    // plot data comes from the first computed direction
    emit_plots(&plots, PlotSource::Compare(&results[0].1))?;
    Ok(ExitCode::SUCCESS)
}

fn run_sweep_theta(args: SweepThetaArgs) -> Result<ExitCode> {
    if args.thetas.is_empty() {
        bail!("--thetas needs at least one value");
    }
    let cfg = build_config(&args.common, args.thetas[0], &args.patch)?;
    let plots = parse_plot_requests(&args.common.plot_csv)?;
    let a = load_dir(&args.common.set_a)?;
    let b = load_dir(&args.common.set_b)?;
    let rows = sweep_theta(&a, &b, &cfg, &args.thetas)?;
    let prov = provenance(args.common.no_timestamp, input_refs(&args.common)?);
    let doc = report::theta_sweep_document(&rows, &cfg, &prov);
    write_output(&doc, &args.common.out)?;
    emit_plots(&plots, PlotSource::Theta(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn run_sweep_patch(args: SweepPatchArgs) -> Result<ExitCode> {
    if args.patches.is_empty() {
        bail!("--patches needs at least one size");
    }
    let specs: Vec<PatchSpec> = args
        .patches
        .iter()
        .map(|raw| PatchSpec::from_str(raw).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let cfg = build_config(&args.common, args.theta, &args.patches[0])?;
    let plots = parse_plot_requests(&args.common.plot_csv)?;
    let a = load_dir(&args.common.set_a)?;
    let b = load_dir(&args.common.set_b)?;
    let rows = sweep_patch(&a, &b, &cfg, &specs)?;
    let prov = provenance(args.common.no_timestamp, input_refs(&args.common)?);
    let doc = report::patch_sweep_document(&rows, &cfg, &prov);
    write_output(&doc, &args.common.out)?;
    emit_plots(&plots, PlotSource::Patch(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn run_pointwise(args: PointwiseArgs) -> Result<ExitCode> {
    let cfg = build_config(&args.common, 0.8, "120x120")?;
    let plots = parse_plot_requests(&args.common.plot_csv)?;
    let a = load_dir(&args.common.set_a)?;
    let b = load_dir(&args.common.set_b)?;
    let result = pointwise_compare(&a, &b, &cfg)?;
    let prov = provenance(args.common.no_timestamp, input_refs(&args.common)?);
    let doc = report::pointwise_document(&result, &prov);
    write_output(&doc, &args.common.out)?;
    emit_plots(&plots, PlotSource::Pointwise(&result))?;
    Ok(ExitCode::SUCCESS)
}

fn run_gen(args: GenArgs) -> Result<ExitCode> {
    let sc = ScenarioConfig {
        name: args.name,
        images: args.images,
        width: args.width,
        height: args.height,
        objects_per_image: parse_range_u32(&args.objects)?,
        classes: args.classes,
        class_mix: args.class_mix,
        box_height: parse_range_f64(&args.box_height)?,
        aspect_ratio: args.aspect,
        min_separation: args.min_sep,
        placement: match args.placement {
            PlacementArg::Uniform => Placement::Uniform,
            PlacementArg::Clustered => Placement::Clustered {
                radius: args.cluster_radius,
            },
        },
    };
    let generated = generate_dataset(&sc, args.seed)?;
    write_yolo_dir(&generated.dataset, &args.out)?;
    eprintln!(
        "generated {} images, {} objects ({} skipped) at {}",
        generated.dataset.images.len(),
        generated.dataset.object_count(),
        generated.skipped_placements,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_corrupt(args: CorruptArgs) -> Result<ExitCode> {
    let d = load_dir(&args.input)?;
    let cm = CorruptionModel {
        miss_probability: args.miss,
        center_jitter_px: args.center_jitter,
        size_jitter: args.size_jitter,
        false_positive_rate: args.fp_rate,
        confidence_range: parse_range_f64(&args.conf)?,
        class_confusion: args.class_confusion,
    };
    let corrupted = synthesize_predictions(&d, &cm, args.seed)?;
    write_yolo_dir(&corrupted, &args.out)?;
    eprintln!(
        "wrote {} images with {} predictions to {}",
        corrupted.images.len(),
        corrupted.images.iter().map(|i| i.predictions.len()).sum::<usize>(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run_perturb(args: PerturbArgs) -> Result<ExitCode> {
    let d = load_dir(&args.input)?;
    let perturbed = perturb_layout(&d, args.pos_stddev, args.size_stddev, args.seed)?;
    write_yolo_dir(&perturbed, &args.out)?;
    eprintln!("wrote perturbed dataset to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_summary(args: SummaryArgs) -> Result<ExitCode> {
    let d = load_dir(&args.dir)?;
    let summary = dataset_summary(&d);
    let prov = provenance(
        args.no_timestamp,
        vec![InputRef {
            role: "dataset".into(),
            path: args.dir.display().to_string(),
            sha256: dataset_dir_sha256(&args.dir)?,
        }],
    );
    let doc = report::summary_document(&d.name, &summary, &prov);
    write_output(&doc, &args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn run_validate(args: ValidateArgs) -> Result<ExitCode> {
    let d = load_dir(&args.dir)?;
    let violations = validate_dataset(&d);
    let doc = report::validation_document(&violations);
    let stdout = std::io::stdout();
    report::write_document(&doc, stdout.lock())?;
    if violations.is_empty() {
        eprintln!("{}: ok", d.name);
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{}: {} violation(s)", d.name, violations.len());
        Ok(ExitCode::from(1))
    }
}
