use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use auv_core::dataset::{list_volumes, read_class_sidecar, read_ground_truth, score_directory};
use auv_core::duo::{
    check_gradients, compare_gradients, duo_gradients, random_case, DuoConfig, GradCheckCase,
    PredictionBatch, DEFAULT_FD_STEP, DEFAULT_GRAD_TOLERANCE,
};
use auv_core::filtering::{
    export_histogram, filter_global, filter_per_class, ClassCombine, FilterManifest, Strategy,
};
use auv_core::npy::read_npy;
use auv_core::records::{
    read_records, read_stats, write_manifest, write_records, write_stats, RecordsHeader, StatsFile,
    StatsSource,
};
use auv_core::spectrum::{
    auv_from_range, auv_values, export_labeled_curves, log_range, sample_scale, singular_values_with,
    AuvRecord, ScaleConfig, SvdMethod, DEFAULT_EPSILON, DEFAULT_FLOOR,
};
use auv_core::synth::{make_dataset, SynthSpec};
use auv_core::tensor::{class_matrix, load_feature_volume, FeatureVolume};
use auv_core::ClassId;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_ACCEPTANCE: u8 = 4;

pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl From<auv_core::Error> for CliError {
    fn from(e: auv_core::Error) -> Self {
        let code = match e {
            auv_core::Error::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        CliError {
            code: EXIT_INPUT,
            error,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn acceptance_failure(msg: String) -> CliError {
    CliError {
        code: EXIT_ACCEPTANCE,
        error: anyhow!(msg),
    }
}

#[derive(Debug, Parser)]
#[command(name = "auv", version, about = "Aleatoric uncertainty scoring, filtering, and loss checks")]
pub struct Cli {
    /// Worker threads; 0 uses every available core. Output never depends on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic feature-volume dataset.
    Synth(SynthCmd),
    /// Score every volume in a directory and write AUV records.
    ComputeAuv(ComputeAuvArgs),
    /// Turn AUV records into a retain/drop manifest.
    Filter(FilterArgs),
    /// Export singular-value decay and cumulative-energy curves.
    Curves(CurvesArgs),
    /// Export an AUV histogram.
    Histogram(HistogramArgs),
    /// Verify loss gradients against central finite differences.
    CheckGrad(CheckGradArgs),
    /// End-to-end synthetic noisy-sample recovery.
    Demo(DemoArgs),
}

/// Comma-separated class ids, e.g. `1,2`.
#[derive(Debug, Clone)]
pub struct ClassList(pub Vec<ClassId>);

fn parse_class_list(s: &str) -> Result<ClassList, String> {
    let ids = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<ClassId>().map_err(|e| format!("bad class id {t:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if ids.is_empty() {
        return Err("empty class list".into());
    }
    Ok(ClassList(ids))
}

fn parse_shape(s: &str) -> Result<[usize; 4], String> {
    let dims: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad dimension {t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    dims.try_into().map_err(|_| "shape needs four comma-separated values C,D,H,W".to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// C,D,H,W
    #[arg(long, value_parser = parse_shape, default_value = "2,16,32,32")]
    pub shape: [usize; 4],
    #[arg(long, default_value_t = 16)]
    pub clean_rank: usize,
    #[arg(long, default_value_t = 2)]
    pub noisy_rank: usize,
    #[arg(long, default_value_t = 0.05)]
    pub frac_noisy: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            n_samples: self.n,
            shape: self.shape,
            clean_rank: self.clean_rank,
            noisy_rank: self.noisy_rank,
            frac_noisy: self.frac_noisy,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub synth: SynthArgs,
}

#[derive(Debug, Args)]
pub struct ComputeAuvArgs {
    /// Directory of `(C, D, H, W)` NPY feature volumes.
    #[arg(long)]
    pub input: PathBuf,
    /// AUV records (JSON Lines).
    #[arg(long)]
    pub output: PathBuf,
    /// Classes summed into the sample scale, e.g. `1,2`. Defaults to all.
    #[arg(long, value_parser = parse_class_list)]
    pub classes: Option<ClassList>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    /// Use raw rows instead of mean-centered rows.
    #[arg(long)]
    pub no_center: bool,
    /// Reuse frozen min/max statistics instead of the batch's own.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Where to write the statistics used. Defaults to `<output>.stats.json`.
    #[arg(long)]
    pub save_stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub quantile: f64,
    /// global-raw | global-normalized | per-class-raw | per-class-normalized (or a-d)
    #[arg(long, default_value = "global-raw")]
    pub strategy: String,
    /// Classes for per-class strategies. Defaults to every class in the records.
    #[arg(long, value_parser = parse_class_list)]
    pub classes: Option<ClassList>,
    /// Keep a sample if any selected class passes, instead of all.
    #[arg(long)]
    pub union: bool,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Comma-separated sample ids. Defaults to every volume.
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long, value_parser = parse_class_list)]
    pub classes: Option<ClassList>,
    #[arg(long)]
    pub no_center: bool,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Histogram of one class's AUVs instead of the sample AUVs.
    #[arg(long)]
    pub class: Option<ClassId>,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of random batches, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 10)]
    pub trials: u64,
    #[arg(long, default_value_t = 2)]
    pub samples: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Edge length of the cubic volume.
    #[arg(long, default_value_t = 4)]
    pub side: usize,
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_GRAD_TOLERANCE)]
    pub tolerance: f64,
    /// Check a stored batch (probs.npy, labels.npy, noise_head.npy,
    /// epsilon_hat_raw.npy, optional scales.json) instead of random ones.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Write the loss report (batch mode) or check summary as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Negate one analytic gradient component before comparing.
    #[arg(long, hide = true)]
    pub inject_sign_flip: bool,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Filtering quantile; defaults to 1 - frac_noisy.
    #[arg(long)]
    pub quantile: Option<f64>,
    /// Keep the generated dataset here instead of a temporary directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::ComputeAuv(a) => cmd_compute_auv(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Histogram(a) => cmd_histogram(a),
        Command::CheckGrad(a) => cmd_check_grad(a),
        Command::Demo(a) => cmd_demo(a),
    })
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut text = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        text.push_str(": ");
        text.push_str(&s.to_string());
        source = s.source();
    }
    text
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn cmd_synth(args: SynthCmd) -> CliResult {
    let spec = args.synth.spec();
    let truth = make_dataset(&spec, &args.out)?;
    let noisy = truth.values().filter(|&&b| b).count();
    println!(
        "wrote {} volumes ({} noisy) to {}",
        truth.len(),
        noisy,
        args.out.display()
    );
    Ok(())
}

/// Scores a directory and normalises the batch, or applies frozen stats.
fn compute_records(
    input: &Path,
    config: &ScaleConfig,
    floor: f64,
    frozen: Option<&StatsFile>,
) -> CliResult<(Vec<AuvRecord>, auv_core::spectrum::LogRange)> {
    if list_volumes(input)?.is_empty() {
        return Err(anyhow!("no .npy volumes in {}", input.display()).into());
    }
    let outcome = score_directory(input, config)?;
    for f in &outcome.failures {
        eprintln!("skipped {}: {}", f.path.display(), error_chain(&f.error));
    }
    if outcome.scales.is_empty() {
        let numerical = outcome
            .failures
            .iter()
            .all(|f| matches!(f.error, auv_core::Error::Numerical(_)));
        return Err(CliError {
            code: if numerical { EXIT_NUMERICAL } else { EXIT_INPUT },
            error: anyhow!("every volume in {} failed", input.display()),
        });
    }
    let totals = outcome
        .scales
        .iter()
        .map(|s| sample_scale(&s.per_class_scale, None))
        .collect::<Result<Vec<f64>, _>>()?;
    let (range, auvs) = match frozen {
        Some(stats) => {
            let range = stats.range();
            let auvs = totals.iter().map(|&s| auv_from_range(s, floor, range)).collect();
            (range, auvs)
        }
        None => (log_range(&totals, floor)?, auv_values(&totals, floor)?),
    };
    let records = outcome
        .scales
        .into_iter()
        .zip(totals)
        .zip(auvs)
        .map(|((s, total), auv)| AuvRecord {
            sample_id: s.sample_id,
            per_class_scale: s.per_class_scale,
            sample_scale: total,
            auv,
        })
        .collect();
    Ok((records, range))
}

fn cmd_compute_auv(args: ComputeAuvArgs) -> CliResult {
    if !(args.epsilon > 0.0) || !(args.floor > 0.0) {
        return Err(anyhow!("epsilon and floor must be > 0").into());
    }
    let frozen = args.stats.as_deref().map(read_stats).transpose()?;
    let floor = frozen.as_ref().map_or(args.floor, |s| s.floor);
    let config = ScaleConfig {
        epsilon: args.epsilon,
        center: !args.no_center,
        method: SvdMethod::Auto,
        classes: args.classes.clone().map(|c| c.0),
    };
    let (records, range) = compute_records(&args.input, &config, floor, frozen.as_ref())?;
    let source = if frozen.is_some() {
        StatsSource::Frozen
    } else {
        StatsSource::Batch
    };
    let header = RecordsHeader::new(
        args.epsilon,
        floor,
        config.center,
        config.classes.clone(),
        range,
        source,
        records.len(),
    );
    write_records(&header, &records, create(&args.output)?)?;
    let stats_path = args
        .save_stats
        .unwrap_or_else(|| args.output.with_extension("stats.json"));
    write_stats(&stats_path, &StatsFile::new(range, floor, args.epsilon, config.classes))?;
    println!(
        "scored {} samples -> {} (stats: {})",
        records.len(),
        args.output.display(),
        stats_path.display()
    );
    Ok(())
}

fn all_classes(records: &[AuvRecord]) -> Vec<ClassId> {
    records
        .iter()
        .flat_map(|r| r.per_class_scale.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn cmd_filter(args: FilterArgs) -> CliResult {
    let strategy: Strategy = args.strategy.parse()?;
    let (header, records) = read_records(&args.records)?;
    let combine = if args.union {
        ClassCombine::Any
    } else {
        ClassCombine::All
    };
    let (manifest, classes) = if strategy.is_per_class() {
        let classes = args.classes.clone().map(|c| c.0).unwrap_or_else(|| all_classes(&records));
        let m = filter_per_class(&records, args.quantile, &classes, header.floor, combine, strategy)?;
        (m, Some(classes))
    } else {
        (filter_global(&records, args.quantile, strategy)?, header.classes.clone())
    };
    write_manifest(&manifest, classes, header.epsilon, header.floor, create(&args.output)?)?;
    println!(
        "retained {} / {} (p̃={})",
        manifest.retained_count(),
        manifest.entries.len(),
        args.quantile
    );
    Ok(())
}

fn cmd_curves(args: CurvesArgs) -> CliResult {
    let wanted: Option<BTreeSet<String>> = args
        .samples
        .as_ref()
        .map(|s| s.split(',').map(|t| t.trim().to_string()).collect());
    let sidecar = read_class_sidecar(&args.input)?;
    let mut spectra = Vec::new();
    for path in list_volumes(&args.input)? {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if wanted.as_ref().is_some_and(|w| !w.contains(&stem)) {
            continue;
        }
        let ids = sidecar.as_ref().and_then(|m| m.get(&stem)).cloned().unwrap_or_default();
        let volume: FeatureVolume<f64> = load_feature_volume(&path, &ids)?;
        for &c in volume.class_ids() {
            if args.classes.as_ref().is_some_and(|cs| !cs.0.contains(&c)) {
                continue;
            }
            let m = class_matrix(&volume, c, !args.no_center)?;
            spectra.push((format!("{stem}:{c}"), singular_values_with(&m, SvdMethod::Auto)?));
        }
    }
    if spectra.is_empty() {
        return Err(anyhow!("no matching volumes in {}", args.input.display()).into());
    }
    export_labeled_curves(&spectra, &args.output)?;
    println!("wrote {} curves to {}", spectra.len(), args.output.display());
    Ok(())
}

fn cmd_histogram(args: HistogramArgs) -> CliResult {
    let (header, records) = read_records(&args.records)?;
    let values = match args.class {
        None => records.iter().map(|r| r.auv).collect::<Vec<_>>(),
        Some(c) => {
            let scales: Vec<f64> = records
                .iter()
                .filter_map(|r| r.per_class_scale.get(&c).copied())
                .collect();
            if scales.is_empty() {
                return Err(auv_core::Error::Class(format!("class {c} absent from records")).into());
            }
            auv_values(&scales, header.floor)?
        }
    };
    let bins = export_histogram(&values, args.bins, &args.output)?;
    println!(
        "wrote {} bins ({} values) to {}",
        bins.len(),
        values.len(),
        args.output.display()
    );
    Ok(())
}

fn load_batch(dir: &Path, alpha: f64, beta: f64) -> CliResult<GradCheckCase> {
    let probs = read_npy(dir.join("probs.npy"))?;
    let labels = read_npy(dir.join("labels.npy"))?;
    let head = read_npy(dir.join("noise_head.npy"))?;
    let raw = read_npy(dir.join("epsilon_hat_raw.npy"))?;
    let dims: [usize; 5] = probs.shape.as_slice().try_into().map_err(|_| {
        auv_core::Error::Shape(format!("probs.npy must be (N, C, D, H, W), got {:?}", probs.shape))
    })?;
    for (name, arr) in [("labels", &labels), ("noise_head", &head)] {
        if arr.shape != probs.shape {
            return Err(auv_core::Error::Shape(format!(
                "{name}.npy shape {:?} differs from probs {:?}",
                arr.shape, probs.shape
            ))
            .into());
        }
    }
    if raw.shape != [dims[0]] {
        return Err(auv_core::Error::Shape(format!(
            "epsilon_hat_raw.npy must be ({},), got {:?}",
            dims[0], raw.shape
        ))
        .into());
    }
    let batch = PredictionBatch::new(dims, probs.data, labels.data, head.data)?;
    let scales_path = dir.join("scales.json");
    let scales: BTreeMap<ClassId, f64> = if scales_path.exists() {
        let text = std::fs::read_to_string(&scales_path)?;
        serde_json::from_str(&text)
            .map_err(|e| auv_core::Error::Format(format!("{}: {e}", scales_path.display())))?
    } else {
        batch.class_ids().iter().map(|&c| (c, 0.0)).collect()
    };
    Ok(GradCheckCase {
        batch,
        raw_noise: raw.data,
        scales,
        config: DuoConfig {
            alpha,
            beta,
            ..DuoConfig::default()
        },
    })
}

#[derive(Serialize)]
struct TrialSummary {
    label: String,
    max_rel_probs: f64,
    max_rel_noise_head: f64,
    max_rel_epsilon: f64,
    noise_degenerate: bool,
    passed: bool,
}

fn cmd_check_grad(args: CheckGradArgs) -> CliResult {
    let cases: Vec<(String, GradCheckCase)> = match &args.batch {
        Some(dir) => vec![(dir.display().to_string(), load_batch(dir, args.alpha, args.beta)?)],
        None => (0..args.trials)
            .map(|t| {
                let seed = args.seed + t;
                let mut case = random_case(seed, args.samples, args.classes, args.side);
                case.config.alpha = args.alpha;
                (format!("seed {seed}"), case)
            })
            .collect(),
    };
    let mut summaries = Vec::new();
    let mut loss_report = None;
    for (label, case) in &cases {
        let check = if args.inject_sign_flip {
            let mut report = duo_gradients(&case.batch, &case.raw_noise, &case.scales, &case.config)?;
            report.grads.probs[0] = -report.grads.probs[0];
            compare_gradients(case, &report.grads, args.step, args.tolerance)?
        } else {
            check_gradients(case, args.step, args.tolerance)?
        };
        println!(
            "{label}: max rel err probs {:.3e} noise_head {:.3e} epsilon {:.3e}{} -> {}",
            check.max_rel_probs,
            check.max_rel_noise_head,
            check.max_rel_epsilon,
            if check.noise_degenerate { " (degenerate noise)" } else { "" },
            if check.passed { "PASS" } else { "FAIL" }
        );
        if args.batch.is_some() {
            loss_report = Some(duo_gradients(&case.batch, &case.raw_noise, &case.scales, &case.config)?);
        }
        summaries.push(TrialSummary {
            label: label.clone(),
            max_rel_probs: check.max_rel_probs,
            max_rel_noise_head: check.max_rel_noise_head,
            max_rel_epsilon: check.max_rel_epsilon,
            noise_degenerate: check.noise_degenerate,
            passed: check.passed,
        });
    }
    if let Some(path) = &args.report {
        let mut out = create(path)?;
        match &loss_report {
            Some(r) => serde_json::to_writer_pretty(&mut out, r),
            None => serde_json::to_writer_pretty(&mut out, &summaries),
        }
        .map_err(anyhow::Error::from)?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    let failed = summaries.iter().filter(|s| !s.passed).count();
    if failed > 0 {
        return Err(acceptance_failure(format!(
            "{failed} of {} gradient checks exceeded tolerance {}",
            summaries.len(),
            args.tolerance
        )));
    }
    println!("PASS: {} gradient checks within {}", summaries.len(), args.tolerance);
    Ok(())
}

#[derive(Debug, Serialize)]
struct DemoReport {
    seed: u64,
    n_samples: usize,
    n_noisy: usize,
    quantile: f64,
    retained: usize,
    dropped: usize,
    true_positives: usize,
    precision: Option<f64>,
    recall: Option<f64>,
}

fn score_recovery(manifest: &FilterManifest, truth: &BTreeMap<String, bool>) -> (usize, usize, usize) {
    let dropped = manifest.dropped_ids();
    let noisy = truth.values().filter(|&&b| b).count();
    let hits = dropped.iter().filter(|id| truth.get(**id).copied().unwrap_or(false)).count();
    (dropped.len(), noisy, hits)
}

fn cmd_demo(args: DemoArgs) -> CliResult {
    let spec = args.synth.spec();
    let quantile = args.quantile.unwrap_or(1.0 - spec.frac_noisy);
    let tmp;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => {
            tmp = tempfile::tempdir()?;
            tmp.path().to_path_buf()
        }
    };
    make_dataset(&spec, &dir)?;
    let truth = read_ground_truth(&dir)?;
    let (records, _) = compute_records(&dir, &ScaleConfig::default(), DEFAULT_FLOOR, None)?;
    let manifest = filter_global(&records, quantile, Strategy::GlobalRaw)?;
    let (dropped, noisy, hits) = score_recovery(&manifest, &truth);
    let precision = (dropped > 0).then(|| hits as f64 / dropped as f64);
    let recall = (noisy > 0).then(|| hits as f64 / noisy as f64);
    let report = DemoReport {
        seed: spec.seed,
        n_samples: records.len(),
        n_noisy: noisy,
        quantile,
        retained: manifest.retained_count(),
        dropped,
        true_positives: hits,
        precision,
        recall,
    };
    println!(
        "samples {} noisy {} quantile {} retained {} dropped {}",
        report.n_samples, noisy, quantile, report.retained, dropped
    );
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
    match recall {
        Some(_) => println!("precision {} recall {}", fmt(precision), fmt(recall)),
        None => println!(
            "precision {} recall n/a (no ground-truth noisy samples; recall is vacuous)",
            fmt(precision)
        ),
    }
    if let Some(path) = &args.report {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report).map_err(anyhow::Error::from)?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    if noisy > 0 && (recall.unwrap_or(0.0) < 0.9 || precision.unwrap_or(0.0) < 0.8) {
        return Err(acceptance_failure(format!(
            "recovery below target: precision {} recall {}",
            fmt(precision),
            fmt(recall)
        )));
    }
    Ok(())
}
