use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use fteval::adfd::adfd;
use fteval::dist::{estimate_stats, frechet_distance};
use fteval::image_metrics::{psnr, ssim};
use fteval::ingest::{
    encode_ftev, read_embeddings, read_features, read_frames, read_landmarks, read_stats,
    write_features_csv, write_frames, write_landmarks_csv, write_landmarks_jsonl, FeatureFormat,
    LandmarkFormat,
};
use fteval::lmd::lmd;
use fteval::model::{validate_pair, FeatureSet, LandmarkSequence, MismatchPolicy};
use fteval::report::{
    evaluate, format_value, render_table, write_demo_manifest, EvalConfig, Manifest,
    ManifestEntry, MetricReport, Settings, TableFormat,
};
use fteval::sync::{sync_score, EmbeddingStream};
use fteval::synth::{
    synth_features, synth_frames, synth_landmarks, synth_stream, HeadDrift, SynthSpec,
};
use fteval::{Error, Result};

#[derive(Parser)]
#[command(name = "fteval", version, about = "Scores talking-face videos from precomputed inputs")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Landmark scheme: `ibug68`, `generic`, a scheme file, or a name under $FTEVAL_SCHEME_DIR.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Mouth landmark indices for the generic scheme.
    #[arg(long, global = true, value_delimiter = ',')]
    mouth: Option<Vec<usize>>,
    #[arg(long, global = true)]
    w1: Option<f64>,
    #[arg(long, global = true)]
    w2: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mismatch: Option<Mismatch>,
    /// Largest sync offset searched, in video frames.
    #[arg(long, global = true)]
    max_offset: Option<usize>,
    #[arg(long, global = true)]
    fid_eps: Option<f64>,
    /// Worker threads for batch evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Frame width for CSV landmark files.
    #[arg(long, global = true)]
    csv_width: Option<u32>,
    #[arg(long, global = true)]
    csv_height: Option<u32>,
    #[arg(long, global = true)]
    csv_fps: Option<f64>,
    /// Video frames between consecutive embedding vectors.
    #[arg(long, global = true)]
    hop: Option<usize>,
    /// Method name used in reports and tables.
    #[arg(long, global = true)]
    name: Option<String>,
    /// How the feature files were produced; copied into report metadata.
    #[arg(long, global = true)]
    feature_provenance: Option<String>,
    #[arg(long, global = true, env = "FTEVAL_SCHEME_DIR", hide_env_values = true)]
    scheme_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mismatch {
    Strict,
    Truncate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Markdown,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    gt: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Audio-driven facial dynamics score of two landmark tracks.
    Adfd(PairArgs),
    /// Full-face and mouth landmark distances.
    Lmd(PairArgs),
    /// PSNR between two PNG frame directories.
    Psnr(PairArgs),
    /// SSIM between two PNG frame directories.
    Ssim(PairArgs),
    /// Fréchet distance between feature sets or precomputed statistics.
    Fid(FidArgs),
    /// Audio-visual offset and confidence from embedding streams.
    Sync(SyncArgs),
    /// Every metric over a manifest, or over one pair given by flags.
    Eval(EvalArgs),
    /// Deterministic synthetic inputs.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Side-by-side table of report files.
    Table(TableArgs),
}

#[derive(Args)]
struct FidArgs {
    #[arg(long, conflicts_with = "gen_stats", required_unless_present = "gen_stats")]
    gen: Option<PathBuf>,
    #[arg(long, conflicts_with = "gt_stats", required_unless_present = "gt_stats")]
    gt: Option<PathBuf>,
    /// JSON `{"mean": [...], "cov": [[...]]}` used instead of --gen.
    #[arg(long)]
    gen_stats: Option<PathBuf>,
    #[arg(long)]
    gt_stats: Option<PathBuf>,
}

#[derive(Args)]
struct SyncArgs {
    #[arg(long)]
    audio: PathBuf,
    #[arg(long)]
    visual: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Manifest JSON; omit to evaluate the pair given by the flags below.
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "pair")]
    id: String,
    #[arg(long)]
    gen_landmarks: Option<PathBuf>,
    #[arg(long)]
    gt_landmarks: Option<PathBuf>,
    #[arg(long)]
    gen_frames: Option<PathBuf>,
    #[arg(long)]
    gt_frames: Option<PathBuf>,
    #[arg(long)]
    gen_features: Option<PathBuf>,
    #[arg(long)]
    gt_features: Option<PathBuf>,
    #[arg(long)]
    audio_embed: Option<PathBuf>,
    #[arg(long)]
    visual_embed: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Landmark track (JSONL, or CSV when the output ends in .csv).
    Landmarks(SynthLandmarks),
    /// Gaussian feature matrix (FTEV, or CSV when the output ends in .csv).
    Features(SynthFeatures),
    /// Embedding stream of standard-normal vectors.
    Stream(SynthStream),
    /// Directory of PNG frames.
    Frames(SynthFrames),
    /// A full set of synthetic pairs plus manifest.json in a directory.
    Manifest(SynthManifest),
}

#[derive(Args)]
struct SynthLandmarks {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    frames: usize,
    #[arg(long, default_value_t = 68)]
    landmarks: usize,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    #[arg(long, default_value_t = 0.0)]
    drift_amplitude: f64,
    #[arg(long, default_value_t = 25.0)]
    drift_period: f64,
    /// Mouth-opening envelope in [0, 1], cycled over frames.
    #[arg(long, value_delimiter = ',')]
    mouth_open: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
}

#[derive(Args)]
struct SynthFeatures {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    rows: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Added to every coordinate of the mean.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    shift: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Args)]
struct SynthStream {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    len: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Delay the stream by this many vectors: out[t] = stream[t - delay].
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    delay: i64,
}

#[derive(Args)]
struct SynthFrames {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 64)]
    width: u32,
    #[arg(long, default_value_t = 64)]
    height: u32,
    #[arg(long, default_value_t = 3)]
    channels: u8,
}

#[derive(Args)]
struct SynthManifest {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    entries: usize,
}

#[derive(Args)]
struct TableArgs {
    /// Report JSON files produced by `eval`.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

impl GlobalArgs {
    fn settings(&self) -> Settings {
        Settings {
            scheme: self.scheme.clone(),
            mouth: self.mouth.clone(),
            w1: self.w1,
            w2: self.w2,
            mismatch: self.mismatch.map(|m| match m {
                Mismatch::Strict => MismatchPolicy::Strict,
                Mismatch::Truncate => MismatchPolicy::Truncate,
            }),
            max_offset: self.max_offset,
            fid_eps: self.fid_eps,
            csv_width: self.csv_width,
            csv_height: self.csv_height,
            csv_fps: self.csv_fps,
            embed_hop: self.hop,
            name: self.name.clone(),
            feature_provenance: self.feature_provenance.clone(),
        }
    }

    fn config(&self) -> Result<EvalConfig> {
        self.settings().resolve(self.scheme_dir.as_deref())
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .map_err(|e| io_error(Path::new("<stdout>"), e))
            }
        }
    }

    fn out_path(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Usage("this command needs --out".into()))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source: e,
    }
}

/// JSON as is; CSV and Markdown list the top-level scalar fields.
fn render_result<T: Serialize>(value: &T, format: Format) -> String {
    let value = serde_json::to_value(value).expect("result serializes");
    if format == Format::Json {
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        return s;
    }
    let scalars: Vec<(String, String)> = value
        .as_object()
        .into_iter()
        .flatten()
        .filter_map(|(k, v)| {
            let text = match v {
                Value::Number(n) => format_value(n.as_f64()?),
                Value::String(s) => s.clone(),
                Value::Bool(b) => b.to_string(),
                Value::Null => "absent".into(),
                _ => return None,
            };
            Some((k.clone(), text))
        })
        .collect();
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("metric,value\n");
            for (k, v) in scalars {
                out.push_str(&format!("{k},{v}\n"));
            }
        }
        _ => {
            out.push_str("| metric | value |\n|---|---:|\n");
            for (k, v) in scalars {
                out.push_str(&format!("| {k} | {v} |\n"));
            }
        }
    }
    out
}

fn read_track(path: &Path, config: &EvalConfig) -> Result<LandmarkSequence> {
    read_landmarks(path, LandmarkFormat::from_path(path), config.csv_geometry)
}

#[derive(Serialize)]
struct WithWarnings<T: Serialize> {
    #[serde(flatten)]
    result: T,
    warnings: Vec<String>,
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Adfd(p) | Command::Lmd(p) => {
            let config = g.config()?;
            let pair = validate_pair(
                read_track(&p.gen, &config)?,
                read_track(&p.gt, &config)?,
                config.mismatch,
            )?;
            let text = if matches!(cli.command, Command::Adfd(_)) {
                let result = adfd(&pair.gen, &pair.gt, config.weights)?;
                render_result(&WithWarnings { result, warnings: pair.warnings }, g.format)
            } else {
                let scheme = config.scheme.for_count(pair.gen.landmark_count())?;
                let result = lmd(&pair.gen, &pair.gt, &scheme)?;
                render_result(&WithWarnings { result, warnings: pair.warnings }, g.format)
            };
            g.emit(&text)
        }
        Command::Psnr(p) | Command::Ssim(p) => {
            let gen = read_frames(&p.gen)?;
            let gt = read_frames(&p.gt)?;
            let warnings: Vec<String> = gen.warnings.into_iter().chain(gt.warnings).collect();
            let text = if matches!(cli.command, Command::Psnr(_)) {
                let result = psnr(&gen.source, &gt.source)?;
                render_result(&WithWarnings { result, warnings }, g.format)
            } else {
                let result = ssim(&gen.source, &gt.source)?;
                render_result(&WithWarnings { result, warnings }, g.format)
            };
            g.emit(&text)
        }
        Command::Fid(f) => {
            let config = g.config()?;
            let load = |features: &Option<PathBuf>, stats: &Option<PathBuf>| match (features, stats) {
                (_, Some(s)) => read_stats(s),
                (Some(f), None) => estimate_stats(&read_features(f, FeatureFormat::from_path(f))?),
                (None, None) => Err(Error::Usage("missing feature input".into())),
            };
            let a = load(&f.gen, &f.gen_stats)?.regularized(config.fid_eps);
            let b = load(&f.gt, &f.gt_stats)?.regularized(config.fid_eps);
            let fid = frechet_distance(&a, &b)?;
            let value = serde_json::json!({ "fid": fid, "dim": a.dim(), "fid_eps": config.fid_eps });
            g.emit(&render_result(&value, g.format))
        }
        Command::Sync(s) => {
            let config = g.config()?;
            let read = |p: &Path| read_embeddings(p, FeatureFormat::from_path(p), config.embed_hop);
            let result = sync_score(&read(&s.audio)?, &read(&s.visual)?, config.max_offset)?;
            g.emit(&render_result(&result, g.format))
        }
        Command::Eval(e) => run_eval(g, e),
        Command::Synth(s) => run_synth(g, s),
        Command::Table(t) => {
            let reports = t
                .reports
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
                    MetricReport::from_json(p, &text)
                })
                .collect::<Result<Vec<_>>>()?;
            let format = match g.format {
                Format::Json => TableFormat::Json,
                Format::Csv => TableFormat::Csv,
                Format::Markdown => TableFormat::Markdown,
            };
            g.emit(&render_table(&reports, format)?)
        }
    }
}

fn run_eval(g: &GlobalArgs, e: &EvalArgs) -> Result<()> {
    let single = ManifestEntry {
        id: e.id.clone(),
        gen_landmarks: e.gen_landmarks.clone(),
        gt_landmarks: e.gt_landmarks.clone(),
        gen_frames: e.gen_frames.clone(),
        gt_frames: e.gt_frames.clone(),
        gen_features: e.gen_features.clone(),
        gt_features: e.gt_features.clone(),
        audio_embed: e.audio_embed.clone(),
        visual_embed: e.visual_embed.clone(),
    };
    let manifest = match &e.manifest {
        Some(path) => {
            if single != (ManifestEntry { id: e.id.clone(), ..Default::default() }) {
                return Err(Error::Usage(
                    "give either a manifest or per-pair input flags, not both".into(),
                ));
            }
            Manifest::load(path)?
        }
        None => Manifest {
            options: Settings::default(),
            entries: vec![single],
        },
    };
    let config = manifest
        .options
        .clone()
        .merge(g.settings())
        .resolve(g.scheme_dir.as_deref())?;
    let report = evaluate(&manifest, &config, g.jobs)?;
    let text = match g.format {
        Format::Json => report.to_json(),
        Format::Csv => render_table(std::slice::from_ref(&report), TableFormat::Csv)?,
        Format::Markdown => render_table(std::slice::from_ref(&report), TableFormat::Markdown)?,
    };
    for w in &report.metadata.warnings {
        eprintln!("warning: {w}");
    }
    for entry in &report.entries {
        for err in &entry.errors {
            eprintln!("error: {}: {err}", entry.id);
        }
    }
    g.emit(&text)
}

fn features_of(stream: &EmbeddingStream) -> Result<FeatureSet> {
    FeatureSet::new(stream.len(), stream.dim(), stream.iter().flatten().copied().collect())
}

fn write_features(g: &GlobalArgs, features: &FeatureSet) -> Result<()> {
    let path = g.out_path()?;
    let bytes = match FeatureFormat::from_path(path) {
        FeatureFormat::Csv => write_features_csv(features).into_bytes(),
        FeatureFormat::Ftev => encode_ftev(features)?,
    };
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn run_synth(g: &GlobalArgs, s: &SynthCommand) -> Result<()> {
    match s {
        SynthCommand::Landmarks(a) => {
            let spec = SynthSpec {
                head_drift: HeadDrift {
                    amplitude: a.drift_amplitude,
                    period: a.drift_period,
                },
                mouth_open: a.mouth_open.clone(),
                jitter_sigma: a.jitter,
                ..SynthSpec::still(a.seed, a.frames, a.landmarks, a.width, a.height)
            };
            let seq = synth_landmarks(&spec)?;
            let csv = g
                .out
                .as_deref()
                .is_some_and(|p| LandmarkFormat::from_path(p) == LandmarkFormat::Csv);
            let schema = (a.landmarks == 68).then_some("ibug68");
            let text = if csv {
                write_landmarks_csv(&seq)
            } else {
                write_landmarks_jsonl(&seq, schema)
            };
            g.emit(&text)
        }
        SynthCommand::Features(a) => {
            let mean = vec![a.shift; a.dim];
            write_features(g, &synth_features(a.seed, a.rows, a.dim, &mean, a.scale)?)
        }
        SynthCommand::Stream(a) => {
            let mut stream = synth_stream(a.seed, a.len, a.dim)?;
            if a.delay != 0 {
                stream = fteval::synth::shift_stream(&stream, a.delay, a.seed ^ 0x5EED)?;
            }
            write_features(g, &features_of(&stream)?)
        }
        SynthCommand::Frames(a) => {
            let frames = synth_frames(a.seed, a.frames, a.width, a.height, a.channels)?;
            write_frames(g.out_path()?, &frames)
        }
        SynthCommand::Manifest(a) => {
            let path = write_demo_manifest(g.out_path()?, a.entries, a.seed)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
