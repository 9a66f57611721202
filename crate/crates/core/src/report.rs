//! Batch evaluation over a manifest of video pairs, aggregation, and table
//! rendering.
//!
//! Reports are deterministic: metric values are rounded to six significant
//! digits (ties to even), keys are sorted, and entries keep manifest order
//! regardless of how many worker threads evaluate them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adfd::adfd;
use crate::dist::{fid, DEFAULT_FID_EPS};
use crate::error::{Error, ErrorClass, Result};
use crate::image_metrics::{self, psnr, ssim};
use crate::ingest::{
    self, encode_ftev, read_embeddings, read_features, read_frames, read_landmarks,
    write_frames, write_landmarks_jsonl, CsvGeometry, FeatureFormat, LandmarkFormat,
};
use crate::linalg::JACOBI_TOLERANCE;
use crate::lmd::lmd;
use crate::model::{
    validate_pair, AdfdWeights, FeatureSet, FrameSource, LandmarkScheme, MismatchPolicy,
    DEFAULT_FPS,
};
use crate::sync::{sync_score, EmbeddingStream, DEFAULT_MAX_OFFSET, MIN_OVERLAP};
use crate::synth::{
    noisy_frames, perturb, shift_stream, synth_features, synth_frames, synth_landmarks,
    synth_stream, HeadDrift, Perturbation, SynthSpec,
};

pub const TOOL_NAME: &str = "fteval";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SIGNIFICANT_DIGITS: usize = 6;

pub const ADFD_SPATIAL_RULE: &str =
    "per frame: 1 - mean landmark distance / frame diagonal, clamped to [0, 1]; mean over frames";
pub const ADFD_MOTION_RULE: &str =
    "per transition: (cos + 1) / 2 of flattened displacement fields, both zero = 1, one zero = 0.5; \
     mean over all transitions; 1 for single-frame sequences";

/// Every metric a report can carry, in display order.
pub const METRICS: [&str; 9] = [
    "adfd",
    "f_lmd",
    "m_lmd",
    "psnr",
    "ssim",
    "fid",
    "sync_conf",
    "sync_dist",
    "sync_offset",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Higher,
    Lower,
}

impl Direction {
    pub fn of(metric: &str) -> Option<Self> {
        match metric {
            "adfd" | "psnr" | "ssim" | "sync_conf" => Some(Direction::Higher),
            "f_lmd" | "m_lmd" | "fid" | "sync_dist" => Some(Direction::Lower),
            _ => None,
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Higher => "↑",
            Direction::Lower => "↓",
        }
    }

    /// Whether `a` is strictly better than `b`.
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Higher => a > b,
            Direction::Lower => a < b,
        }
    }
}

/// Rounds to six significant digits, ties to even.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .expect("formatted float parses")
}

/// Display form of a rounded value.
pub fn format_value(v: f64) -> String {
    round_sig(v).to_string()
}

/// One metric for one entry or aggregate.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    Value(f64),
    /// Inputs for this metric were not supplied.
    Absent,
    /// PSNR of a pair whose frames are all bit-identical.
    Identical,
    Failed(String),
}

impl MetricValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, MetricValue::Absent)
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MetricValue::Value(v) => s.serialize_f64(round_sig(*v)),
            MetricValue::Absent => s.serialize_str("absent"),
            MetricValue::Identical => s.serialize_str("identical"),
            MetricValue::Failed(msg) => {
                let mut m = BTreeMap::new();
                m.insert("error", msg);
                m.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
            Failed { error: String },
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(MetricValue::Value(v)),
            Raw::Tag(t) if t == "absent" => Ok(MetricValue::Absent),
            Raw::Tag(t) if t == "identical" => Ok(MetricValue::Identical),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown metric marker `{t}`"))),
            Raw::Failed { error } => Ok(MetricValue::Failed(error)),
        }
    }
}

/// Evaluation options as written in a manifest or given on the command
/// line; unset fields fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mouth: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fid_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_width: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_height: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_fps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed_hop: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Free-form description of how the feature files were produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_provenance: Option<String>,
}

impl Settings {
    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: Settings) -> Settings {
        Settings {
            scheme: over.scheme.or(self.scheme),
            mouth: over.mouth.or(self.mouth),
            w1: over.w1.or(self.w1),
            w2: over.w2.or(self.w2),
            mismatch: over.mismatch.or(self.mismatch),
            max_offset: over.max_offset.or(self.max_offset),
            fid_eps: over.fid_eps.or(self.fid_eps),
            csv_width: over.csv_width.or(self.csv_width),
            csv_height: over.csv_height.or(self.csv_height),
            csv_fps: over.csv_fps.or(self.csv_fps),
            embed_hop: over.embed_hop.or(self.embed_hop),
            name: over.name.or(self.name),
            feature_provenance: over.feature_provenance.or(self.feature_provenance),
        }
    }

    pub fn resolve(&self, scheme_dir: Option<&Path>) -> Result<EvalConfig> {
        let scheme = resolve_scheme(
            self.scheme.as_deref().unwrap_or(LandmarkScheme::IBUG68),
            self.mouth.clone(),
            scheme_dir,
        )?;
        let weights = AdfdWeights::new(self.w1.unwrap_or(1.0), self.w2.unwrap_or(1.0))
            .map_err(|e| Error::Usage(e.to_string()))?;
        let fid_eps = self.fid_eps.unwrap_or(DEFAULT_FID_EPS);
        if !(fid_eps.is_finite() && fid_eps >= 0.0) {
            return Err(Error::Usage(format!("fid eps must be non-negative, got {fid_eps}")));
        }
        let embed_hop = self.embed_hop.unwrap_or(1);
        if embed_hop == 0 {
            return Err(Error::Usage("embedding hop must be at least 1".into()));
        }
        let csv_geometry = match (self.csv_width, self.csv_height) {
            (Some(width), Some(height)) => {
                let fps = self.csv_fps.unwrap_or(DEFAULT_FPS);
                if width == 0 || height == 0 || !(fps.is_finite() && fps > 0.0) {
                    return Err(Error::Usage("CSV geometry must be positive".into()));
                }
                Some(CsvGeometry { width, height, fps })
            }
            (None, None) => None,
            _ => {
                return Err(Error::Usage(
                    "CSV width and height must be given together".into(),
                ))
            }
        };
        Ok(EvalConfig {
            scheme,
            weights,
            mismatch: self.mismatch.unwrap_or_default(),
            max_offset: self.max_offset.unwrap_or(DEFAULT_MAX_OFFSET),
            fid_eps,
            csv_geometry,
            embed_hop,
            name: self.name.clone(),
            feature_provenance: self.feature_provenance.clone(),
        })
    }
}

/// A landmark scheme, or the generic scheme whose size comes from the data.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeChoice {
    Fixed(LandmarkScheme),
    Generic { mouth: Vec<usize> },
}

impl SchemeChoice {
    pub fn name(&self) -> &str {
        match self {
            SchemeChoice::Fixed(s) => s.name(),
            SchemeChoice::Generic { .. } => LandmarkScheme::GENERIC,
        }
    }

    pub fn for_count(&self, n: usize) -> Result<LandmarkScheme> {
        match self {
            SchemeChoice::Fixed(s) => Ok(s.clone()),
            SchemeChoice::Generic { mouth } => LandmarkScheme::generic(n, mouth.clone())
                .map_err(|e| Error::precondition(e.to_string())),
        }
    }

    fn mouth(&self) -> Vec<usize> {
        match self {
            SchemeChoice::Fixed(s) => s.mouth_indices().to_vec(),
            SchemeChoice::Generic { mouth } => mouth.clone(),
        }
    }
}

/// Resolves `spec` as, in order: `generic` (needs `mouth`), the built-in
/// `ibug68`, a path to a scheme file, or `<scheme_dir>/<spec>.json`.
pub fn resolve_scheme(
    spec: &str,
    mouth: Option<Vec<usize>>,
    scheme_dir: Option<&Path>,
) -> Result<SchemeChoice> {
    if spec == LandmarkScheme::GENERIC {
        let mouth = mouth.ok_or_else(|| {
            Error::Usage("the generic scheme needs explicit mouth indices".into())
        })?;
        if mouth.is_empty() {
            return Err(Error::Usage("mouth index list is empty".into()));
        }
        return Ok(SchemeChoice::Generic { mouth });
    }
    if mouth.is_some() {
        return Err(Error::Usage(
            "mouth indices can only be given with the generic scheme".into(),
        ));
    }
    if spec == LandmarkScheme::IBUG68 {
        return Ok(SchemeChoice::Fixed(LandmarkScheme::ibug68()));
    }
    let direct = Path::new(spec);
    if direct.is_file() {
        return ingest::read_scheme(direct).map(SchemeChoice::Fixed);
    }
    if let Some(dir) = scheme_dir {
        let candidate = dir.join(format!("{spec}.json"));
        if candidate.is_file() {
            return ingest::read_scheme(&candidate).map(SchemeChoice::Fixed);
        }
    }
    Err(Error::Usage(format!(
        "unknown landmark scheme `{spec}` (not built in, not a file{})",
        scheme_dir.map_or(String::new(), |d| format!(", not in {}", d.display()))
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub scheme: SchemeChoice,
    pub weights: AdfdWeights,
    pub mismatch: MismatchPolicy,
    pub max_offset: usize,
    pub fid_eps: f64,
    pub csv_geometry: Option<CsvGeometry>,
    pub embed_hop: usize,
    pub name: Option<String>,
    pub feature_provenance: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Settings::default().resolve(None).expect("defaults are valid")
    }
}

/// Every resolved parameter that influences metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub adfd_spatial: String,
    pub adfd_motion: String,
    pub feature_provenance: Option<String>,
    pub scheme: String,
    pub mouth_indices: Vec<usize>,
    pub w1: f64,
    pub w2: f64,
    pub mismatch: MismatchPolicy,
    pub max_offset: usize,
    pub min_overlap: usize,
    pub embed_hop: usize,
    pub fid_eps: f64,
    pub jacobi_tolerance: f64,
    pub psnr_peak: f64,
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub ssim_k1: f64,
    pub ssim_k2: f64,
    pub luma_weights: [f64; 3],
    pub csv_geometry: Option<[f64; 3]>,
    pub significant_digits: usize,
}

impl EvalConfig {
    pub fn parameters(&self) -> Parameters {
        Parameters {
            adfd_spatial: ADFD_SPATIAL_RULE.to_owned(),
            adfd_motion: ADFD_MOTION_RULE.to_owned(),
            feature_provenance: self.feature_provenance.clone(),
            scheme: self.scheme.name().to_owned(),
            mouth_indices: self.scheme.mouth(),
            w1: self.weights.w1,
            w2: self.weights.w2,
            mismatch: self.mismatch,
            max_offset: self.max_offset,
            min_overlap: MIN_OVERLAP,
            embed_hop: self.embed_hop,
            fid_eps: self.fid_eps,
            jacobi_tolerance: JACOBI_TOLERANCE,
            psnr_peak: image_metrics::PEAK,
            ssim_window: image_metrics::SSIM_WINDOW,
            ssim_sigma: image_metrics::SSIM_SIGMA,
            ssim_k1: image_metrics::SSIM_K1,
            ssim_k2: image_metrics::SSIM_K2,
            luma_weights: image_metrics::LUMA_WEIGHTS,
            csv_geometry: self
                .csv_geometry
                .map(|g| [f64::from(g.width), f64::from(g.height), g.fps]),
            significant_digits: SIGNIFICANT_DIGITS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_landmarks: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_landmarks: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_frames: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_frames: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_embed: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_embed: Option<PathBuf>,
}

impl ManifestEntry {
    fn pairs(&self) -> [(&'static str, Option<&PathBuf>, Option<&PathBuf>); 4] {
        [
            ("landmarks", self.gen_landmarks.as_ref(), self.gt_landmarks.as_ref()),
            ("frames", self.gen_frames.as_ref(), self.gt_frames.as_ref()),
            ("features", self.gen_features.as_ref(), self.gt_features.as_ref()),
            ("embeddings", self.audio_embed.as_ref(), self.visual_embed.as_ref()),
        ]
    }

    fn rebased(&self, base: &Path) -> Self {
        let join = |p: &Option<PathBuf>| p.as_ref().map(|p| base.join(p));
        ManifestEntry {
            id: self.id.clone(),
            gen_landmarks: join(&self.gen_landmarks),
            gt_landmarks: join(&self.gt_landmarks),
            gen_frames: join(&self.gen_frames),
            gt_frames: join(&self.gt_frames),
            gen_features: join(&self.gen_features),
            gt_features: join(&self.gt_features),
            audio_embed: join(&self.audio_embed),
            visual_embed: join(&self.visual_embed),
        }
    }
}

/// A batch of pairs to evaluate. Relative paths are resolved against the
/// directory of the manifest file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub options: Settings,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = ingest::read_text(path)?;
        let manifest: Manifest = ingest::parse_json(path, &text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let manifest = Manifest {
            options: manifest.options,
            entries: manifest.entries.iter().map(|e| e.rebased(base)).collect(),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::invalid("manifest has no entries"));
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if entry.id.is_empty() {
                return Err(Error::invalid("manifest entry with an empty id"));
            }
            if !seen.insert(entry.id.as_str()) {
                return Err(Error::invalid(format!("duplicate manifest id `{}`", entry.id)));
            }
            let mut complete = 0;
            for (what, a, b) in entry.pairs() {
                match (a, b) {
                    (Some(_), Some(_)) => complete += 1,
                    (None, None) => {}
                    _ => {
                        return Err(Error::invalid(format!(
                            "entry `{}` gives only one side of its {what} pair",
                            entry.id
                        )))
                    }
                }
            }
            if complete == 0 {
                return Err(Error::invalid(format!(
                    "entry `{}` has no complete input pair",
                    entry.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub id: String,
    pub metrics: BTreeMap<String, MetricValue>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl EntryReport {
    /// True when at least one input group was supplied and none yielded a value.
    pub fn failed(&self) -> bool {
        !self.errors.is_empty()
            && !self
                .metrics
                .values()
                .any(|m| matches!(m, MetricValue::Value(_) | MetricValue::Identical))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Mean of the entries that produced a value.
    pub mean: MetricValue,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub parameters: Parameters,
    pub failed_entries: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub directions: BTreeMap<String, String>,
    pub aggregate: BTreeMap<String, Aggregate>,
    pub entries: Vec<EntryReport>,
    pub metadata: Metadata,
}

impl MetricReport {
    /// Metrics with at least one value in the aggregate.
    pub fn metric_set(&self) -> BTreeSet<String> {
        self.aggregate
            .iter()
            .filter(|(_, a)| !a.mean.is_absent())
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregate.get(metric).and_then(|a| a.mean.value())
    }

    /// Canonical JSON: sorted keys, rounded values, trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
        out.push('\n');
        out
    }

    pub fn from_json(path: &Path, text: &str) -> Result<Self> {
        ingest::parse_json(path, text)
    }
}

struct EntryOutcome {
    report: EntryReport,
    first_error: Option<ErrorClass>,
}

fn record(
    metrics: &mut BTreeMap<String, MetricValue>,
    errors: &mut Vec<String>,
    first_error: &mut Option<ErrorClass>,
    names: &[&str],
    what: &str,
    err: Error,
) {
    let msg = format!("{what}: {err}");
    for name in names {
        metrics.insert((*name).to_owned(), MetricValue::Failed(msg.clone()));
    }
    first_error.get_or_insert(err.class());
    errors.push(msg);
}

fn align_frames(
    gen: FrameSource,
    gt: FrameSource,
    policy: MismatchPolicy,
    warnings: &mut Vec<String>,
) -> Result<(FrameSource, FrameSource)> {
    if gen.len() == gt.len() {
        return Ok((gen, gt));
    }
    match policy {
        MismatchPolicy::Strict => Err(Error::precondition(format!(
            "frame count mismatch: generated has {}, ground truth has {} (use the truncate policy to align)",
            gen.len(),
            gt.len()
        ))),
        MismatchPolicy::Truncate => {
            let len = gen.len().min(gt.len());
            warnings.push(format!(
                "frames truncated to {len} (generated had {}, ground truth had {})",
                gen.len(),
                gt.len()
            ));
            let cut = |s: &FrameSource| {
                FrameSource::new(s.frames()[..len].to_vec(), s.width(), s.height(), s.channels())
            };
            Ok((cut(&gen)?, cut(&gt)?))
        }
    }
}

fn landmark_group(
    entry: &ManifestEntry,
    config: &EvalConfig,
    out: &mut BTreeMap<String, MetricValue>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let (Some(gen_path), Some(gt_path)) = (&entry.gen_landmarks, &entry.gt_landmarks) else {
        return Ok(());
    };
    let read = |p: &Path| read_landmarks(p, LandmarkFormat::from_path(p), config.csv_geometry);
    let pair = validate_pair(read(gen_path)?, read(gt_path)?, config.mismatch)?;
    warnings.extend(pair.warnings.iter().cloned());
    let a = adfd(&pair.gen, &pair.gt, config.weights)?;
    out.insert("adfd".into(), MetricValue::Value(a.score));
    let scheme = config.scheme.for_count(pair.gen.landmark_count())?;
    let l = lmd(&pair.gen, &pair.gt, &scheme)?;
    out.insert("f_lmd".into(), MetricValue::Value(l.f_lmd));
    out.insert("m_lmd".into(), MetricValue::Value(l.m_lmd));
    Ok(())
}

fn frame_group(
    entry: &ManifestEntry,
    config: &EvalConfig,
    out: &mut BTreeMap<String, MetricValue>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let (Some(gen_dir), Some(gt_dir)) = (&entry.gen_frames, &entry.gt_frames) else {
        return Ok(());
    };
    let gen = read_frames(gen_dir)?;
    let gt = read_frames(gt_dir)?;
    warnings.extend(gen.warnings.into_iter().chain(gt.warnings));
    let (gen, gt) = align_frames(gen.source, gt.source, config.mismatch, warnings)?;
    let p = psnr(&gen, &gt)?;
    let s = ssim(&gen, &gt)?;
    out.insert(
        "psnr".into(),
        p.mean_db.map_or(MetricValue::Identical, MetricValue::Value),
    );
    out.insert("ssim".into(), MetricValue::Value(s.mean));
    Ok(())
}

fn feature_group(
    entry: &ManifestEntry,
    config: &EvalConfig,
    out: &mut BTreeMap<String, MetricValue>,
) -> Result<()> {
    let (Some(gen_path), Some(gt_path)) = (&entry.gen_features, &entry.gt_features) else {
        return Ok(());
    };
    let gen = read_features(gen_path, FeatureFormat::from_path(gen_path))?;
    let gt = read_features(gt_path, FeatureFormat::from_path(gt_path))?;
    out.insert("fid".into(), MetricValue::Value(fid(&gen, &gt, config.fid_eps)?));
    Ok(())
}

fn sync_group(
    entry: &ManifestEntry,
    config: &EvalConfig,
    out: &mut BTreeMap<String, MetricValue>,
) -> Result<()> {
    let (Some(audio_path), Some(visual_path)) = (&entry.audio_embed, &entry.visual_embed) else {
        return Ok(());
    };
    let read = |p: &Path| read_embeddings(p, FeatureFormat::from_path(p), config.embed_hop);
    let r = sync_score(&read(audio_path)?, &read(visual_path)?, config.max_offset)?;
    out.insert("sync_conf".into(), MetricValue::Value(r.lse_c));
    out.insert("sync_dist".into(), MetricValue::Value(r.lse_d));
    out.insert("sync_offset".into(), MetricValue::Value(r.best_offset as f64));
    Ok(())
}

fn evaluate_entry(entry: &ManifestEntry, config: &EvalConfig) -> EntryOutcome {
    let mut metrics: BTreeMap<String, MetricValue> = METRICS
        .iter()
        .map(|m| ((*m).to_owned(), MetricValue::Absent))
        .collect();
    let mut warnings = Vec::new();
    let mut errors = Vec::new();
    let mut first_error = None;

    if let Err(e) = landmark_group(entry, config, &mut metrics, &mut warnings) {
        // a failed LMD keeps an already computed ADFD
        let names: Vec<&str> = ["adfd", "f_lmd", "m_lmd"]
            .into_iter()
            .filter(|m| metrics[*m].is_absent())
            .collect();
        record(&mut metrics, &mut errors, &mut first_error, &names, "landmarks", e);
    }
    if let Err(e) = frame_group(entry, config, &mut metrics, &mut warnings) {
        record(&mut metrics, &mut errors, &mut first_error, &["psnr", "ssim"], "frames", e);
    }
    if let Err(e) = feature_group(entry, config, &mut metrics) {
        record(&mut metrics, &mut errors, &mut first_error, &["fid"], "features", e);
    }
    if let Err(e) = sync_group(entry, config, &mut metrics) {
        let names = ["sync_conf", "sync_dist", "sync_offset"];
        record(&mut metrics, &mut errors, &mut first_error, &names, "embeddings", e);
    }
    EntryOutcome {
        report: EntryReport {
            id: entry.id.clone(),
            metrics,
            warnings,
            errors,
        },
        first_error,
    }
}

fn aggregate(entries: &[EntryReport]) -> BTreeMap<String, Aggregate> {
    METRICS
        .iter()
        .map(|&m| {
            let values: Vec<f64> = entries.iter().filter_map(|e| e.metrics[m].value()).collect();
            let mean = if values.is_empty() {
                MetricValue::Absent
            } else {
                MetricValue::Value(values.iter().sum::<f64>() / values.len() as f64)
            };
            (
                m.to_owned(),
                Aggregate {
                    mean,
                    count: values.len(),
                },
            )
        })
        .collect()
}

/// Evaluates every entry with at most `jobs` worker threads. Output does not
/// depend on `jobs`.
pub fn evaluate(manifest: &Manifest, config: &EvalConfig, jobs: usize) -> Result<MetricReport> {
    manifest.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    let outcomes: Vec<EntryOutcome> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| evaluate_entry(e, config))
            .collect()
    });

    let failed: Vec<&EntryOutcome> = outcomes.iter().filter(|o| o.report.failed()).collect();
    let failed_entries = failed.len();
    if failed_entries == outcomes.len() {
        let class = failed[0].first_error.unwrap_or(ErrorClass::Input);
        let detail = failed
            .iter()
            .map(|o| format!("{}: {}", o.report.id, o.report.errors.join("; ")))
            .collect::<Vec<_>>()
            .join("\n  ");
        let msg = format!("all {} entries failed\n  {detail}", outcomes.len());
        return Err(match class {
            ErrorClass::Precondition => Error::precondition(msg),
            ErrorClass::Usage => Error::Usage(msg),
            ErrorClass::Input => Error::invalid(msg),
        });
    }

    let entries: Vec<EntryReport> = outcomes.into_iter().map(|o| o.report).collect();
    let warnings = entries
        .iter()
        .flat_map(|e| e.warnings.iter().map(move |w| format!("{}: {w}", e.id)))
        .collect();
    let directions = METRICS
        .iter()
        .filter_map(|&m| Direction::of(m).map(|d| (m.to_owned(), d.arrow().to_owned())))
        .collect();
    Ok(MetricReport {
        name: config.name.clone().unwrap_or_else(|| "method".to_owned()),
        directions,
        aggregate: aggregate(&entries),
        metadata: Metadata {
            tool: TOOL_NAME.to_owned(),
            version: TOOL_VERSION.to_owned(),
            parameters: config.parameters(),
            failed_entries,
            warnings,
        },
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Usage(format!("unknown table format `{other}`"))),
        }
    }
}

/// Markdown columns: header and the metrics shown in the cell.
const TABLE_COLUMNS: [(&str, &[&str]); 6] = [
    ("PSNR↑", &["psnr"]),
    ("SSIM↑", &["ssim"]),
    ("M/F-LMD↓", &["m_lmd", "f_lmd"]),
    ("FID↓", &["fid"]),
    ("SyncNet↑", &["sync_conf"]),
    ("ADFD↑", &["adfd"]),
];

/// Rounded value of the best report for `metric`, if any report has one.
fn best(reports: &[MetricReport], metric: &str) -> Option<f64> {
    let dir = Direction::of(metric)?;
    reports
        .iter()
        .filter_map(|r| r.mean(metric).map(round_sig))
        .reduce(|a, b| if dir.better(b, a) { b } else { a })
}

fn check_metric_sets(reports: &[MetricReport]) -> Result<()> {
    let Some(first) = reports.first() else {
        return Err(Error::invalid("no reports to tabulate"));
    };
    let reference = first.metric_set();
    for r in &reports[1..] {
        let set = r.metric_set();
        if set != reference {
            let diff: Vec<&str> = reference
                .symmetric_difference(&set)
                .map(String::as_str)
                .collect();
            return Err(Error::invalid(format!(
                "reports `{}` and `{}` have different metric sets; symmetric difference: {}",
                first.name,
                r.name,
                diff.join(", ")
            )));
        }
    }
    Ok(())
}

pub fn render_table(reports: &[MetricReport], format: TableFormat) -> Result<String> {
    check_metric_sets(reports)?;
    Ok(match format {
        TableFormat::Markdown => render_markdown(reports),
        TableFormat::Csv => render_csv(reports),
        TableFormat::Json => render_json(reports),
    })
}

fn render_markdown(reports: &[MetricReport]) -> String {
    let mut out = String::from("| Method |");
    for (header, _) in TABLE_COLUMNS {
        write!(out, " {header} |").unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(TABLE_COLUMNS.len()));
    out.push('\n');
    for r in reports {
        write!(out, "| {} |", r.name.replace('|', "\\|")).unwrap();
        for (_, metrics) in TABLE_COLUMNS {
            let parts: Vec<String> = metrics
                .iter()
                .map(|m| match r.mean(m) {
                    None => "-".to_owned(),
                    Some(v) if best(reports, m) == Some(round_sig(v)) => {
                        format!("**{}**", format_value(v))
                    }
                    Some(v) => format_value(v),
                })
                .collect();
            write!(out, " {} |", parts.join(" / ")).unwrap();
        }
        out.push('\n');
    }
    out
}

fn render_csv(reports: &[MetricReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_owned()];
    header.extend(METRICS.iter().map(|m| (*m).to_owned()));
    w.write_record(&header).expect("in-memory write");
    for r in reports {
        let mut row = vec![r.name.clone()];
        row.extend(METRICS.iter().map(|m| match &r.aggregate.get(*m).map(|a| &a.mean) {
            Some(MetricValue::Value(v)) => format_value(*v),
            Some(MetricValue::Identical) => "identical".to_owned(),
            Some(MetricValue::Failed(_)) => "failed".to_owned(),
            _ => "absent".to_owned(),
        }));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn render_json(reports: &[MetricReport]) -> String {
    let rows: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            let metrics: BTreeMap<&str, &MetricValue> = METRICS
                .iter()
                .map(|m| (*m, &r.aggregate[*m].mean))
                .collect();
            serde_json::json!({ "method": r.name, "metrics": metrics })
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&rows).expect("rows serialize");
    out.push('\n');
    out
}

/// Writes `entries` synthetic pairs with every input kind plus a
/// `manifest.json` referencing them, and returns the manifest path.
pub fn write_demo_manifest(dir: &Path, entries: usize, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    let stream_features = |s: &EmbeddingStream| {
        FeatureSet::new(s.len(), s.dim(), s.iter().flatten().copied().collect())
    };
    let mut manifest = Manifest::default();
    for i in 0..entries {
        let s = seed.wrapping_add(i as u64 * 1000);
        let id = format!("pair{i:03}");
        let spec = SynthSpec {
            head_drift: HeadDrift {
                amplitude: 3.0,
                period: 24.0,
            },
            mouth_open: vec![0.0, 0.3, 0.7, 1.0, 0.6, 0.2],
            jitter_sigma: 0.3,
            ..SynthSpec::still(s, 30, 68, 256, 256)
        };
        let gt = synth_landmarks(&spec)?;
        let gen = perturb(&gt, Perturbation::Jitter { sigma: 1.5, seed: s + 1 })?;
        write(&format!("{id}_gt.jsonl"), write_landmarks_jsonl(&gt, Some("ibug68")).as_bytes())?;
        write(&format!("{id}_gen.jsonl"), write_landmarks_jsonl(&gen, Some("ibug68")).as_bytes())?;

        let gt_frames = synth_frames(s + 2, 3, 32, 32, 3)?;
        write_frames(&dir.join(format!("{id}_gt_frames")), &gt_frames)?;
        write_frames(
            &dir.join(format!("{id}_gen_frames")),
            &noisy_frames(&gt_frames, 6, s + 3)?,
        )?;

        let dim = 8;
        let gt_feat = synth_features(s + 4, 64, dim, &vec![0.0; dim], 1.0)?;
        let gen_feat = synth_features(s + 5, 64, dim, &vec![0.25; dim], 1.1)?;
        write(&format!("{id}_gt.ftev"), &encode_ftev(&gt_feat)?)?;
        write(&format!("{id}_gen.ftev"), &encode_ftev(&gen_feat)?)?;

        let audio = synth_stream(s + 6, 60, 16)?;
        let visual = shift_stream(&audio, (i % 5) as i64 - 2, s + 7)?;
        write(&format!("{id}_audio.ftev"), &encode_ftev(&stream_features(&audio)?)?)?;
        write(&format!("{id}_visual.ftev"), &encode_ftev(&stream_features(&visual)?)?)?;

        manifest.entries.push(ManifestEntry {
            gen_landmarks: Some(format!("{id}_gen.jsonl").into()),
            gt_landmarks: Some(format!("{id}_gt.jsonl").into()),
            gen_frames: Some(format!("{id}_gen_frames").into()),
            gt_frames: Some(format!("{id}_gt_frames").into()),
            gen_features: Some(format!("{id}_gen.ftev").into()),
            gt_features: Some(format!("{id}_gt.ftev").into()),
            audio_embed: Some(format!("{id}_audio.ftev").into()),
            visual_embed: Some(format!("{id}_visual.ftev").into()),
            id,
        });
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write("manifest.json", text.as_bytes())?;
    Ok(path)
}
