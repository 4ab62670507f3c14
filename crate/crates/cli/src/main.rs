use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hashbench::classifier::{fit_softmax_cv, GaussianAnchorMap, HeadConfig, LbfgsOptions, ProbabilisticClassifier};
use hashbench::codecs::{CodecSpec, PqCodebook, TightFrame, FRAME_TOLERANCE};
use hashbench::container::{anchors_record, frame_record, pq_record, softmax_record, Record};
use hashbench::dataio::{generate_synthetic_dataset, save_ivecs, Dataset, DatasetManifest, SyntheticSpec};
use hashbench::protocols::{
    csv_string, curve_csv, make_class_splits, markdown_for_reports, markdown_table, read_summary_csv, run_protocol1,
    run_protocol2, run_ssh_strategies, transfer_curve, ProtocolReport, SshConfig, SshStrategy, TransferConfig,
    UnseenConfig, UnseenMetric,
};
use hashbench::{derive_seed, FeatureMatrix};

#[derive(Parser)]
#[command(name = "hashbench", version, about = "Classifier-based hashing baselines and retrieval evaluation protocols")]
struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true, env = "HASHBENCH_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian-mixture dataset with fvecs, labels, split and manifest files.
    GenSynthetic(GenSynthetic),
    /// Fit anchor features and a cross-validated softmax classifier on the training split.
    TrainClassifier(TrainClassifier),
    /// Train a codec on the training split and encode every item.
    Encode(Encode),
    /// SH/SSH evaluation of the classifier-based hashing strategies.
    EvalSsh(EvalSsh),
    /// Retrieval of unseen classes (codec fitted on the other 75% of classes).
    EvalUnseen(EvalUnseen),
    /// Transfer learning on reconstructed codes of unseen classes.
    EvalTransfer(EvalTransfer),
    /// Merge report CSVs into one Markdown table.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenSynthetic {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    per_class: usize,
    #[arg(long)]
    dim: usize,
    /// Class separation in units of the within-class spread.
    #[arg(long)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    within_sigma: f64,
    /// Items per class marked as queries in the stored split.
    #[arg(long, default_value_t = 0)]
    test_per_class: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "synthetic")]
    name: String,
}

#[derive(Args)]
struct TrainClassifier {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Number of Gaussian anchors.
    #[arg(long)]
    h: usize,
    #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-3,1e-2,1e-1,1,10,100")]
    lambda_grid: Vec<f64>,
    /// Model container (anchors record followed by the softmax record).
    #[arg(long)]
    out: PathBuf,
    /// CSV of validation accuracy per λ.
    #[arg(long)]
    cv_out: Option<PathBuf>,
}

#[derive(Args)]
struct Encode {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: u64,
    /// `pq:M`, `pq:M:KS` or `lsh:B`.
    #[arg(long)]
    codec: CodecSpec,
    /// Codes as ivecs: PQ sub-indices, or LSH bits packed into 32-bit words.
    #[arg(long)]
    out: PathBuf,
    /// Container holding the trained codebook or frame.
    #[arg(long)]
    codec_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalSsh {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Comma list of onehot, lsh, topline, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    strategy: Vec<String>,
    /// Labeled database items; omit for SH (everything labeled).
    #[arg(long)]
    n_label: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    h: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Queries per class when the dataset has no stored split.
    #[arg(long, default_value_t = 100)]
    queries_per_class: usize,
    #[arg(long, default_value_t = 64)]
    lsh_bits: usize,
    /// Hash posteriors without subtracting the uniform vector.
    #[arg(long)]
    no_lsh_center: bool,
    #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-3,1e-2,1e-1,1,10,100")]
    lambda_grid: Vec<f64>,
    /// mAP cutoff (defaults to the database size).
    #[arg(long)]
    map_k: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EvalUnseen {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Seed of the class shuffle (defaults to `--seed`).
    #[arg(long)]
    split_seed: Option<u64>,
    /// `none`, `pq:M[:KS]` or `lsh:B`.
    #[arg(long, default_value = "none")]
    codec: CodecSpec,
    /// Similarity for uncompressed features: l2 or ip.
    #[arg(long, default_value = "l2")]
    metric: UnseenMetric,
    #[arg(long, default_value_t = 1.0 / 6.0)]
    test_fraction: f64,
    #[arg(long)]
    map_k: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EvalTransfer {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    split_seed: Option<u64>,
    /// `none`, `pq:M[:KS]`, or `pq` together with `--m-sweep`.
    #[arg(long, default_value = "none")]
    codec: String,
    /// Sub-quantizer counts to sweep.
    #[arg(long, value_delimiter = ',')]
    m_sweep: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    ks: usize,
    /// Also evaluate uncompressed features alongside a sweep.
    #[arg(long)]
    with_baseline: bool,
    /// `linear` or `hidden:UNITS`.
    #[arg(long, default_value = "linear")]
    head: String,
    #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-3,1e-2,1e-1,1,10,100")]
    lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 1.0 / 6.0)]
    test_fraction: f64,
    /// Accuracy-vs-bytes CSV for a sweep.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct Output {
    /// Report CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a Markdown summary.
    #[arg(long)]
    markdown: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report CSVs to merge.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A violated invariant detected after a run.
#[derive(Debug)]
struct SelfCheckFailure {
    invariant: &'static str,
    detail: String,
}

impl std::fmt::Display for SelfCheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "self-check failed: {}: {}", self.invariant, self.detail)
    }
}

impl std::error::Error for SelfCheckFailure {}

fn check(ok: bool, invariant: &'static str, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SelfCheckFailure {
            invariant,
            detail: detail(),
        }
        .into())
    }
}

fn load(manifest: &Path) -> Result<Dataset> {
    let m = DatasetManifest::load(manifest).with_context(|| format!("reading manifest {}", manifest.display()))?;
    m.load_dataset()
        .with_context(|| format!("loading dataset of {}", manifest.display()))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for r in records {
        r.write_to(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn check_reports(reports: &[ProtocolReport]) -> Result<()> {
    for r in reports {
        for rec in &r.records {
            check((0.0..=1.0).contains(&rec.value), "metric-in-unit-interval", || {
                format!("{} {} run {} gave {}", r.protocol, r.method, rec.run, rec.value)
            })?;
        }
    }
    Ok(())
}

fn emit(reports: &[ProtocolReport], output: &Output) -> Result<()> {
    check_reports(reports)?;
    write_text(output.out.as_deref(), &csv_string(reports)?)?;
    if let Some(md) = &output.markdown {
        write_text(Some(md), &markdown_for_reports(reports))?;
    }
    Ok(())
}

fn gen_synthetic(a: GenSynthetic) -> Result<()> {
    let spec = SyntheticSpec {
        within_sigma: a.within_sigma,
        ..SyntheticSpec::new(a.classes, a.per_class, a.dim, a.separation, a.seed)
    }
    .with_test_per_class(a.test_per_class);
    let ds = generate_synthetic_dataset(&spec, &a.name)?;
    let manifest = ds.write_with_manifest(&a.out_dir, &a.name)?;
    println!("{}", manifest.display());
    Ok(())
}

fn train_items(ds: &Dataset) -> Vec<usize> {
    match &ds.test_mask {
        Some(mask) => (0..ds.len()).filter(|&i| !mask[i]).collect(),
        None => (0..ds.len()).collect(),
    }
}

fn train_classifier(a: TrainClassifier) -> Result<()> {
    let ds = load(&a.manifest)?;
    let train = train_items(&ds);
    let x = ds.features.select_rows(&train);
    let y = ds.labels.select(&train);
    let anchors = GaussianAnchorMap::fit(&x, &x, a.h, derive_seed(a.seed, "anchors", 0))?;
    let phi = anchors.apply_all(&x)?;
    let (model, cv) = fit_softmax_cv(&phi, &y, &a.lambda_grid, derive_seed(a.seed, "cv", 0), LbfgsOptions::default())?;

    let p = model.predict_proba(&phi)?;
    for i in 0..p.rows() {
        let s: f64 = p.row(i).iter().sum();
        check((s - 1.0).abs() < 1e-9, "posterior-normalization", || format!("row {i} sums to {s}"))?;
    }
    write_records(&a.out, &[anchors_record(&anchors)?, softmax_record(&model, a.seed)?])?;

    let mut text = String::from("lambda,validation_accuracy,chosen\n");
    for (i, (l, acc)) in cv.grid.iter().zip(&cv.validation_accuracy).enumerate() {
        text.push_str(&format!("{l},{acc},{}\n", i == cv.chosen_index));
    }
    match &a.cv_out {
        Some(p) => write_text(Some(p), &text)?,
        None => eprint!("{text}"),
    }
    eprintln!(
        "chosen λ = {} ({} train / {} validation items{})",
        cv.chosen_lambda,
        cv.train_size,
        cv.validation_size,
        if cv.stratified { "" } else { ", unstratified" }
    );
    Ok(())
}

fn pack_words(bytes: &[u8]) -> Vec<i32> {
    bytes
        .chunks(4)
        .map(|c| {
            let mut w = [0u8; 4];
            w[..c.len()].copy_from_slice(c);
            i32::from_le_bytes(w)
        })
        .collect()
}

fn encode(a: Encode) -> Result<()> {
    let ds = load(&a.manifest)?;
    let train = ds.features.select_rows(&train_items(&ds));
    let seed = derive_seed(a.seed, "codec", 0);
    let (rows, record): (Vec<Vec<i32>>, Record) = match a.codec {
        CodecSpec::None => bail!("encode needs a codec (pq:M[:KS] or lsh:B), got none"),
        CodecSpec::Pq { m, ks } => {
            let cb = PqCodebook::train(&train, m, ks, seed)?;
            let codes = cb.encode_all(&ds.features)?;
            let rows = codes.iter().map(|c| c.indices().iter().map(|&v| v as i32).collect()).collect();
            (rows, pq_record(&cb)?)
        }
        CodecSpec::Lsh { bits } => {
            let frame = TightFrame::new(train.cols(), bits, seed)?.with_center(column_mean(&train))?;
            let residual = frame.identity_residual();
            check(residual < FRAME_TOLERANCE, "tight-frame-identity", || {
                format!("residual {residual:e} exceeds {FRAME_TOLERANCE:e}")
            })?;
            let codes = frame.encode_all(&ds.features)?;
            let rows = codes.iter().map(|c| pack_words(c.as_bytes())).collect();
            (rows, frame_record(&frame)?)
        }
    };
    save_ivecs(&a.out, &rows)?;
    if let Some(p) = &a.codec_out {
        write_records(p, &[record])?;
    }
    eprintln!("encoded {} items with {} ({} bits each)", rows.len(), a.codec, a.codec.code_size_bits().unwrap_or(0));
    Ok(())
}

fn column_mean(x: &FeatureMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter().map(|m| m / x.rows().max(1) as f64).collect()
}

fn parse_strategies(names: &[String]) -> Result<Vec<SshStrategy>> {
    let mut out = Vec::new();
    for n in names {
        if n == "all" {
            out.extend([SshStrategy::OneHot, SshStrategy::Lsh, SshStrategy::Topline]);
        } else {
            out.push(n.parse()?);
        }
    }
    let mut seen = Vec::new();
    out.retain(|s| {
        let fresh = !seen.contains(s);
        seen.push(*s);
        fresh
    });
    Ok(out)
}

fn eval_ssh(a: EvalSsh) -> Result<()> {
    let ds = load(&a.manifest)?;
    let strategies = parse_strategies(&a.strategy)?;
    let cfg = SshConfig {
        n_label: a.n_label,
        h: a.h,
        queries_per_class: a.queries_per_class,
        runs: a.runs,
        seed: a.seed,
        lsh_bits: a.lsh_bits,
        lsh_center: !a.no_lsh_center,
        lambda_grid: a.lambda_grid,
        map_k: a.map_k,
        optimizer: LbfgsOptions::default(),
    };
    let reports = run_ssh_strategies(&ds, &cfg, &strategies)?;
    // with every database label known, a correctly classified query ranks all
    // its class first, so one-hot mAP can't fall below accuracy
    if a.n_label.is_none() && a.map_k.is_none() {
        for (s, r) in strategies.iter().zip(&reports) {
            if *s != SshStrategy::OneHot {
                continue;
            }
            for rec in &r.records {
                let acc = rec.accuracy.unwrap_or(0.0);
                check(rec.value >= acc - 1e-12, "map-lower-bound", || {
                    format!("run {}: mAP {} < accuracy {}", rec.run, rec.value, acc)
                })?;
            }
        }
    }
    emit(&reports, &a.output)
}

fn eval_unseen(a: EvalUnseen) -> Result<()> {
    let ds = load(&a.manifest)?;
    let splits = make_class_splits(ds.num_classes(), a.split_seed.unwrap_or(a.seed))?;
    let mut held: Vec<usize> = splits.iter().flat_map(|s| s.held_out_classes.iter().copied()).collect();
    held.sort_unstable();
    check(held == (0..ds.num_classes()).collect::<Vec<_>>(), "fold-partition", || {
        "held-out class sets are not disjoint and exhaustive".into()
    })?;
    let cfg = UnseenConfig {
        seed: a.seed,
        test_fraction: a.test_fraction,
        map_k: a.map_k,
        metric: a.metric,
    };
    let report = run_protocol1(&ds, &splits, a.codec, &cfg)?;
    emit(&[report], &a.output)
}

fn parse_head(s: &str) -> Result<HeadConfig> {
    if s == "linear" {
        return Ok(HeadConfig::Linear);
    }
    if let Some(units) = s.strip_prefix("hidden:") {
        let units: usize = units.parse().with_context(|| format!("bad hidden unit count in '{s}'"))?;
        if units == 0 {
            bail!("hidden layer needs at least one unit");
        }
        return Ok(HeadConfig::HiddenLayer { units });
    }
    bail!("unknown head '{s}' (linear or hidden:UNITS)")
}

fn eval_transfer(a: EvalTransfer) -> Result<()> {
    let ds = load(&a.manifest)?;
    let splits = make_class_splits(ds.num_classes(), a.split_seed.unwrap_or(a.seed))?;
    let cfg = TransferConfig {
        seed: a.seed,
        test_fraction: a.test_fraction,
        head: parse_head(&a.head)?,
        lambda_grid: a.lambda_grid,
        optimizer: LbfgsOptions::default(),
    };
    let mut reports = Vec::new();
    if a.m_sweep.is_empty() {
        if a.codec == "pq" {
            bail!("--codec pq needs --m-sweep (or give pq:M)");
        }
        if a.curve_out.is_some() {
            bail!("--curve-out needs --m-sweep");
        }
        let codec: CodecSpec = a.codec.parse()?;
        reports.push(run_protocol2(&ds, &splits, codec, &cfg)?);
    } else {
        if a.codec != "pq" {
            bail!("--m-sweep needs --codec pq, got '{}'", a.codec);
        }
        if a.with_baseline {
            reports.push(run_protocol2(&ds, &splits, CodecSpec::None, &cfg)?);
        }
        let (swept, points) = transfer_curve(&ds, &splits, &a.m_sweep, a.ks, &cfg)?;
        reports.extend(swept);
        match &a.curve_out {
            Some(p) => write_text(Some(p), &curve_csv(&points))?,
            None => eprint!("{}", curve_csv(&points)),
        }
    }
    emit(&reports, &a.output)
}

fn report(a: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.inputs {
        let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        rows.extend(read_summary_csv(f).with_context(|| format!("reading {}", p.display()))?);
    }
    write_text(a.out.as_deref(), &markdown_table(&rows))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::TrainClassifier(a) => train_classifier(a),
        Command::Encode(a) => encode(a),
        Command::EvalSsh(a) => eval_ssh(a),
        Command::EvalUnseen(a) => eval_unseen(a),
        Command::EvalTransfer(a) => eval_transfer(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
