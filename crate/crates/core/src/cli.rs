//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 3 for
//! data errors. Every command writes a manifest next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{export_tree, MergeTree, TreeFormat};
use crate::error::{Error, Result};
use crate::ingest::{load_csv_bytes, Dataset, RunConfig, TargetKind};
use crate::noise::standard_normal_channels;
use crate::pipeline::{cluster_dataset, evaluate_dataset, Symbolization};

#[derive(Debug, Parser)]
#[command(
    name = "gcluster",
    version,
    about = "Transfer-entropy hierarchical clustering of time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for pair scoring (outputs do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit partitions on the training rows and write symbol sequences.
    Symbolize(RunArgs),
    /// Build the merge tree.
    Cluster(RunArgs),
    /// Evaluate every tree level as a target estimator.
    Evaluate(EvaluateArgs),
    /// Append standard-normal noise channels, then cluster.
    InjectNoise(NoiseArgs),
    /// Render a tree.json as JSON or Graphviz DOT.
    ExportTree(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Plain-text key=value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated source columns.
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<String>>,
    #[arg(long)]
    pub alphabet: Option<usize>,
    #[arg(long)]
    pub target_alphabet: Option<usize>,
    #[arg(long, value_enum)]
    pub target_kind: Option<TargetKindArg>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub fused_alphabet: Option<usize>,
    #[arg(long)]
    pub stop_at: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Column carried through to predictions.csv.
    #[arg(long)]
    pub timestamp: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetKindArg {
    Auto,
    Discrete,
    Continuous,
}

impl From<TargetKindArg> for TargetKind {
    fn from(k: TargetKindArg) -> Self {
        match k {
            TargetKindArg::Auto => TargetKind::Auto,
            TargetKindArg::Discrete => TargetKind::Discrete,
            TargetKindArg::Continuous => TargetKind::Continuous,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub noise_count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Directory holding tree.json and manifest.json; outputs go here too.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Dot,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long, value_enum, default_value = "dot")]
    pub format: FormatArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub rows_used: usize,
    pub rows_dropped: usize,
    pub train_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseInfo {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEvaluations {
    pub level: usize,
    pub active_nodes: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Option<RunConfig>,
    pub input: Option<InputInfo>,
    pub noise: Option<NoiseInfo>,
    pub symbolization: Option<Symbolization>,
    pub candidate_evaluations: Vec<LevelEvaluations>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: None,
            input: None,
            noise: None,
            symbolization: None,
            candidate_evaluations: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("--config {}: {e}", path.display())))?;
        config.apply_kv_text(&text)?;
    }
    if let Some(v) = &args.target {
        config.target_column = v.clone();
    }
    if let Some(v) = &args.sources {
        config.source_columns = v
            .iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    if let Some(v) = args.alphabet {
        config.alphabet = v;
    }
    if let Some(v) = args.target_alphabet {
        config.target_alphabet = v;
    }
    if let Some(v) = args.target_kind {
        config.target_kind = v.into();
    }
    if let Some(v) = args.depth {
        config.depth = v;
    }
    if let Some(v) = args.fused_alphabet {
        config.fused_alphabet = Some(v);
    }
    if let Some(v) = args.stop_at {
        config.stop_at = v;
    }
    if let Some(v) = args.train_fraction {
        config.train_fraction = v;
    }
    if let Some(v) = &args.timestamp {
        config.timestamp_column = Some(v.clone());
    }
    config.validate()?;
    Ok(config)
}

struct Loaded {
    dataset: Dataset,
    info: InputInfo,
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("--input {}: {e}", path.display()),
        ))
    })
}

fn load(path: &Path, config: &RunConfig, noise: Option<&NoiseInfo>) -> Result<Loaded> {
    let bytes = read_input(path)?;
    let mut dataset = load_csv_bytes(&bytes, config)?;
    if let Some(noise) = noise {
        for column in standard_normal_channels(noise.count, dataset.len(), noise.seed) {
            dataset.push_source(column)?;
        }
    }
    let info = InputInfo {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        rows_used: dataset.len(),
        rows_dropped: dataset.dropped_rows,
        train_rows: config.train_len(dataset.len()),
    };
    Ok(Loaded { dataset, info })
}

fn write(dir: &Path, name: &str, bytes: &[u8], manifest: &mut Manifest) -> Result<()> {
    fs::write(dir.join(name), bytes)?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

fn write_manifest(dir: &Path, name: &str, manifest: &Manifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

fn cmd_cluster(args: &RunArgs, noise: Option<NoiseInfo>) -> Result<()> {
    let mut config = build_config(args)?;
    if let Some(n) = &noise {
        if n.count == 0 {
            return Err(Error::Config("--noise-count must be at least 1".into()));
        }
        config.seed = n.seed;
    }
    let Loaded { dataset, info } = load(&args.input, &config, noise.as_ref())?;
    let run_config = RunConfig {
        source_columns: dataset.source_names(),
        ..config.clone()
    };
    let run = cluster_dataset(&dataset, &run_config)?;

    fs::create_dir_all(&args.out)?;
    let command = if noise.is_some() {
        "inject-noise"
    } else {
        "cluster"
    };
    let mut manifest = Manifest::new(command);
    write(&args.out, "tree.json", &run.tree.to_json()?, &mut manifest)?;
    write(&args.out, "tree.dot", run.tree.to_dot().as_bytes(), &mut manifest)?;
    manifest.candidate_evaluations = run
        .tree
        .merges
        .iter()
        .map(|m| LevelEvaluations {
            level: m.level,
            active_nodes: run.tree.levels[m.level].len(),
            evaluations: m.evaluations,
        })
        .collect();
    manifest.config = Some(config);
    manifest.input = Some(info);
    manifest.noise = noise;
    manifest.symbolization = Some(run.symbolization);
    manifest.warnings = run.warnings;
    write_manifest(&args.out, "manifest.json", &manifest)
}

fn cmd_symbolize(args: &RunArgs) -> Result<()> {
    let config = build_config(args)?;
    let Loaded { dataset, info } = load(&args.input, &config, None)?;
    let (symbolization, warnings) = Symbolization::fit(&dataset, &config, info.train_rows)?;
    let n = dataset.len();
    let sources = symbolization.source_sequences(&dataset, 0..n)?;
    let target = symbolization.target_sequence(&dataset, 0..n);

    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = sources.iter().map(|s| s.name.as_str()).collect();
    header.push(&dataset.target.name);
    csv.write_record(&header)?;
    for t in 0..n {
        let mut row: Vec<String> = sources.iter().map(|s| s.symbols[t].to_string()).collect();
        row.push(target.symbols[t].to_string());
        csv.write_record(&row)?;
    }
    let bytes = csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;

    fs::create_dir_all(&args.out)?;
    let mut manifest = Manifest::new("symbolize");
    write(&args.out, "symbols.csv", &bytes, &mut manifest)?;
    let mut partitions = serde_json::to_vec_pretty(&symbolization)?;
    partitions.push(b'\n');
    write(&args.out, "partitions.json", &partitions, &mut manifest)?;
    manifest.config = Some(config);
    manifest.input = Some(info);
    manifest.symbolization = Some(symbolization);
    manifest.warnings = warnings;
    write_manifest(&args.out, "manifest.json", &manifest)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let read_json = |name: &str| -> Result<Vec<u8>> {
        let path = args.out.join(name);
        fs::read(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
    };
    let tree = MergeTree::from_json(&read_json("tree.json")?)?;
    let manifest: Manifest = serde_json::from_slice(&read_json("manifest.json")?)?;
    let (Some(config), Some(input), Some(symbolization)) = (
        manifest.config.as_ref(),
        manifest.input.as_ref(),
        manifest.symbolization.as_ref(),
    ) else {
        return Err(Error::TreeDatasetMismatch(
            "manifest.json is not from a cluster run".into(),
        ));
    };

    let bytes = read_input(&args.input)?;
    let digest = sha256_hex(&bytes);
    if digest != input.sha256 {
        return Err(Error::TreeDatasetMismatch(format!(
            "input digest {digest} differs from {} recorded in manifest.json",
            input.sha256
        )));
    }
    let Loaded { dataset, info } = load(&args.input, config, manifest.noise.as_ref())?;
    let (report, predictions) = evaluate_dataset(&tree, symbolization, &dataset, config)?;

    let mut out = Manifest::new("evaluate");
    write(&args.out, "report.csv", report.to_csv().as_bytes(), &mut out)?;
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    write(&args.out, "report.json", &json, &mut out)?;
    let csv = predictions.to_csv(dataset.timestamps.as_deref());
    write(&args.out, "predictions.csv", csv.as_bytes(), &mut out)?;
    out.config = Some(config.clone());
    out.input = Some(info);
    out.noise = manifest.noise.clone();
    write_manifest(&args.out, "evaluation_manifest.json", &out)
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let bytes =
        fs::read(&args.tree).map_err(|e| Error::Config(format!("--tree {}: {e}", args.tree.display())))?;
    let tree = MergeTree::from_json(&bytes)?;
    let format = match args.format {
        FormatArg::Json => TreeFormat::Json,
        FormatArg::Dot => TreeFormat::Dot,
    };
    let rendered = export_tree(&tree, format)?;
    match &args.output {
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&rendered)?;
        }
        Some(path) => {
            fs::write(path, &rendered)?;
            let mut manifest = Manifest::new("export-tree");
            manifest.input = Some(InputInfo {
                path: args.tree.display().to_string(),
                sha256: sha256_hex(&bytes),
                rows_used: 0,
                rows_dropped: 0,
                train_rows: 0,
            });
            manifest.outputs.push(path.display().to_string());
            let name = format!(
                "{}.manifest.json",
                path.file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default()
            );
            let dir = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            write_manifest(dir, &name, &manifest)?;
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let dispatch = || match &cli.command {
        Command::Symbolize(a) => cmd_symbolize(a),
        Command::Cluster(a) => cmd_cluster(a, None),
        Command::InjectNoise(a) => {
            let seed = a.seed.unwrap_or_default();
            cmd_cluster(
                &a.run,
                Some(NoiseInfo {
                    count: a.noise_count,
                    seed,
                }),
            )
        }
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::ExportTree(a) => cmd_export(a),
    };
    match cli.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?
            .install(dispatch),
        None => dispatch(),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    if err.is_config() {
        2
    } else {
        3
    }
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
