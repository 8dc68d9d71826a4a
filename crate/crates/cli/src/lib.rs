//! Command-line pipeline over the `groundmine` library, one subcommand per
//! stage.
//!
//! Every command resolves its settings as flag, then `--config` JSON key, then
//! built-in default, and writes a [`RunManifest`] next to its main output.

mod manifest;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use groundmine::attention::{
    build_supervision, downsample, rank_correlation, round_sig9, stack_records, to_pgm, vqa_accuracy,
    AttentionMap, MapError, MapRecord,
};
use groundmine::dataset::{self, assemble, IngestReport, QaTriplet};
use groundmine::lexicon::Lexicon;
use groundmine::miner::{self, labels_to_ndjson, Containment, GroundingLabel, MinerConfig};
use groundmine::schedule::{AlphaMode, Schedule};
use groundmine::toy::{self, make_synthetic, metrics_to_csv, ToyConfig, ToyError, TrainOutput};

pub use manifest::{sha256_hex, RunManifest};

/// Files read from a WordNet dict directory.
pub const WORDNET_FILES: [&str; 4] = ["index.noun", "index.verb", "noun.exc", "verb.exc"];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration.
    #[error("{0}")]
    Usage(String),
    /// Missing, unreadable or inconsistent input data.
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Usage(_) | CliError::Input(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "groundmine", version, about = "Grounding-label mining and attention supervision tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine region and object grounding labels for every QA triplet.
    Mine(MineArgs),
    /// Turn grounding labels into normalized grid attention maps.
    Rasterize(RasterizeArgs),
    /// Rank correlation between two attention-map files.
    EvalRank(EvalRankArgs),
    /// VQA accuracy of predicted answers against ten references each.
    EvalAcc(EvalAccArgs),
    /// Train the toy attention model on the synthetic task.
    TrainToy(TrainToyArgs),
    /// Write one PGM heatmap per (qa_id, glimpse).
    Render(RenderArgs),
}

/// Declares an argument struct whose fields are all optional so that flags,
/// the `--config` file and defaults can be layered.
macro_rules! command_args {
    ($(#[$smeta:meta])* $name:ident { $( $(#[$meta:meta])* $field:ident : $ty:ty ),* $(,)? }) => {
        $(#[$smeta])*
        #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
        #[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
        pub struct $name {
            /// JSON file whose keys mirror the flag names; flags take precedence.
            #[arg(long, value_name = "FILE")]
            #[serde(skip)]
            pub config: Option<PathBuf>,
            $( $(#[$meta])* #[arg(long)] pub $field: Option<$ty>, )*
        }

        impl $name {
            /// Fill flags left unset from the config file, if one was given.
            pub fn merge_config(mut self) -> Result<Self> {
                if let Some(path) = self.config.take() {
                    let file: $name = read_config(&path)?;
                    $( if self.$field.is_none() { self.$field = file.$field; } )*
                }
                Ok(self)
            }
        }
    };
}

command_args!(MineArgs {
    /// Region descriptions: JSON array of per-image records.
    regions: PathBuf,
    /// Object annotations: JSON array of per-image records.
    objects: PathBuf,
    /// QA triplets: JSON array.
    qa: PathBuf,
    /// WordNet dict directory holding index.noun, index.verb, noun.exc, verb.exc.
    wordnet_dir: PathBuf,
    /// Alias file, one comma-separated equivalence class per line.
    aliases: PathBuf,
    /// Output labels, NDJSON.
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    manifest: PathBuf,
    /// IoU above which a smaller duplicate object box is dropped.
    iou_threshold: f64,
    /// Minimum matching words for a region description to be kept.
    min_region_matches: usize,
    /// Comma-separated stopword list.
    #[arg(value_delimiter = ',')]
    stopwords: Vec<String>,
    /// Comma-separated question prefixes that mark counting questions.
    #[arg(value_delimiter = ',')]
    counting_prefixes: Vec<String>,
    /// Object-in-region test: center or full.
    #[arg(value_parser = parse_containment)]
    containment: Containment,
});

command_args!(RasterizeArgs {
    /// Grounding labels, NDJSON.
    labels: PathBuf,
    /// QA triplets supplying image sizes.
    qa: PathBuf,
    /// Grid height and width.
    #[arg(num_args = 2, value_names = ["H", "W"])]
    grid: Vec<usize>,
    /// Output attention maps, NDJSON.
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    manifest: PathBuf,
});

command_args!(EvalRankArgs {
    /// Attention maps, NDJSON.
    maps_a: PathBuf,
    /// Attention maps to compare against, NDJSON; a finer grid is block-mean pooled.
    maps_b: PathBuf,
    /// Output CSV.
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    manifest: PathBuf,
});

command_args!(EvalAccArgs {
    /// Predictions, NDJSON rows `{qa_id, answer}`.
    preds: PathBuf,
    /// References, NDJSON rows `{qa_id, answers}` with ten answers each.
    refs: PathBuf,
    /// Output CSV.
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    manifest: PathBuf,
});

command_args!(TrainToyArgs {
    /// Attention-loss weighting.
    #[arg(value_enum)]
    alpha_mode: AlphaModeArg,
    /// Weight used by the fixed mode.
    alpha_value: f64,
    /// Steps over which cosine decay runs; defaults to --steps.
    t_max: u64,
    /// Seed for initialization and the synthetic data.
    seed: u64,
    /// Gradient steps, each over the full sample set.
    steps: u64,
    /// Learning rate.
    lr: f64,
    /// Question feature size.
    question_dim: usize,
    /// Image feature channels per cell.
    channels: usize,
    /// Grid height.
    height: usize,
    /// Grid width.
    width: usize,
    /// Attention glimpses.
    glimpses: usize,
    /// Answer classes.
    classes: usize,
    /// Fused feature size.
    fusion_dim: usize,
    /// Number of synthetic training samples.
    samples: usize,
    /// Output metrics CSV, one row per step.
    metrics: PathBuf,
    /// Output parameters, NDJSON of named arrays.
    params: PathBuf,
    /// Manifest path; defaults to `<metrics>.manifest.json`.
    manifest: PathBuf,
});

command_args!(RenderArgs {
    /// Attention maps, NDJSON.
    maps: PathBuf,
    /// Directory receiving `qa<id>_g<glimpse>.pgm` files.
    out_dir: PathBuf,
    /// Manifest path; defaults to `<out-dir>/manifest.json`.
    manifest: PathBuf,
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaModeArg {
    Cosine,
    Fixed,
}

fn parse_containment(s: &str) -> std::result::Result<Containment, String> {
    match s {
        "center" => Ok(Containment::Center),
        "full" => Ok(Containment::Full),
        other => Err(format!("expected center or full, got {other}")),
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| CliError::Usage(format!("missing --{flag} (flag or config key)")))
}

fn manifest_beside(path: &Path) -> PathBuf {
    PathBuf::from(format!("{}.manifest.json", path.display()))
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_manifest(m: &mut RunManifest, inputs: &[&Path], path: &Path) -> Result<()> {
    for p in inputs {
        m.add_input(p).map_err(|e| input_err(p, e))?;
    }
    write_file(path, m.to_json())
}

/// JSON array file; an empty or whitespace-only file is an empty array.
fn read_array<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    dataset::read_json_file(path).map_err(|e| CliError::Input(e.to_string()))
}

/// One JSON value per non-blank line.
fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Nine significant digits.
pub fn fmt_num(v: f64) -> String {
    round_sig9(v).to_string()
}

// ---------------------------------------------------------------------------
// mine

pub struct MineOutput {
    pub labels: Vec<GroundingLabel>,
    pub report: IngestReport,
    pub manifest: RunManifest,
}

pub fn cmd_mine(args: MineArgs) -> Result<MineOutput> {
    let mut a = args.merge_config()?;
    let defaults = MinerConfig::default();
    a.iou_threshold.get_or_insert(defaults.iou_threshold);
    a.min_region_matches.get_or_insert(defaults.min_region_matches);
    a.stopwords
        .get_or_insert_with(|| defaults.stopwords.iter().cloned().collect());
    a.counting_prefixes
        .get_or_insert_with(|| defaults.counting_prefixes.clone());
    a.containment.get_or_insert(defaults.containment);
    let (regions, objects, qa) = (need(&a.regions, "regions")?, need(&a.objects, "objects")?, need(&a.qa, "qa")?);
    let wordnet_dir = need(&a.wordnet_dir, "wordnet-dir")?;
    let out = need(&a.out, "out")?;
    let manifest_path = a.manifest.get_or_insert_with(|| manifest_beside(&out)).clone();

    let cfg = MinerConfig {
        iou_threshold: a.iou_threshold.unwrap_or_default(),
        min_region_matches: a.min_region_matches.unwrap_or_default(),
        stopwords: a.stopwords.iter().flatten().filter(|s| !s.is_empty()).cloned().collect(),
        counting_prefixes: a.counting_prefixes.iter().flatten().filter(|s| !s.is_empty()).cloned().collect(),
        containment: a.containment.unwrap_or_default(),
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    if !wordnet_dir.is_dir() {
        return Err(CliError::Input(format!("wordnet directory not found: {}", wordnet_dir.display())));
    }
    let mut lex = Lexicon::load_wordnet(&wordnet_dir).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(aliases) = &a.aliases {
        lex.load_aliases(aliases).map_err(|e| CliError::Input(e.to_string()))?;
    }

    let (d, report) = assemble(read_array(&regions)?, read_array(&objects)?, read_array(&qa)?);
    let labels = miner::mine(&d, &lex, &cfg);
    write_file(&out, labels_to_ndjson(&labels))?;

    let mut manifest = RunManifest::new("mine", &a);
    let wordnet_files: Vec<PathBuf> = WORDNET_FILES.iter().map(|f| wordnet_dir.join(f)).collect();
    let mut inputs: Vec<&Path> = vec![&regions, &objects, &qa];
    inputs.extend(a.aliases.as_deref());
    inputs.extend(wordnet_files.iter().map(PathBuf::as_path));
    write_manifest(&mut manifest, &inputs, &manifest_path)?;
    Ok(MineOutput {
        labels,
        report,
        manifest,
    })
}

// ---------------------------------------------------------------------------
// rasterize

pub fn cmd_rasterize(args: RasterizeArgs) -> Result<Vec<MapRecord>> {
    let mut a = args.merge_config()?;
    let grid = a.grid.get_or_insert_with(|| vec![14, 14]).clone();
    let (labels_path, qa_path, out) = (need(&a.labels, "labels")?, need(&a.qa, "qa")?, need(&a.out, "out")?);
    let manifest_path = a.manifest.get_or_insert_with(|| manifest_beside(&out)).clone();
    let [h, w] = grid[..] else {
        return Err(CliError::Usage(format!("--grid takes two values, got {}", grid.len())));
    };
    if h == 0 || w == 0 {
        return Err(CliError::Usage(format!("--grid must be positive, got {h} {w}")));
    }

    let labels: Vec<GroundingLabel> = read_ndjson(&labels_path)?;
    let triplets: HashMap<u64, QaTriplet> = read_array::<QaTriplet>(&qa_path)?
        .into_iter()
        .map(|t| (t.qa_id, t))
        .collect();
    let mut records = Vec::new();
    for label in &labels {
        let t = triplets.get(&label.qa_id).ok_or_else(|| {
            CliError::Input(format!("label {} has no QA triplet in {}", label.qa_id, qa_path.display()))
        })?;
        let stack = build_supervision(label, t, h, w).map_err(|e| input_err(&labels_path, e))?;
        records.extend(stack_records(label.qa_id, &stack));
    }
    write_file(&out, groundmine::attention::records_to_ndjson(&records))?;
    let mut manifest = RunManifest::new("rasterize", &a);
    write_manifest(&mut manifest, &[&labels_path, &qa_path], &manifest_path)?;
    Ok(records)
}

// ---------------------------------------------------------------------------
// eval-rank

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub qa_id: u64,
    pub glimpse: usize,
    /// `None` when either map is constant.
    pub rank_corr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rows: Vec<RankRow>,
    /// Mean over the rows with a defined correlation.
    pub mean: f64,
}

impl RankReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("qa_id,glimpse,rank_corr\n");
        for r in &self.rows {
            let v = r.rank_corr.map_or_else(|| "undefined".to_string(), fmt_num);
            out.push_str(&format!("{},{},{v}\n", r.qa_id, r.glimpse));
        }
        out.push_str(&format!("mean,,{}\n", fmt_num(self.mean)));
        out
    }
}

/// Bring two maps onto a common grid by pooling the finer one.
fn align(a: AttentionMap, b: AttentionMap) -> std::result::Result<(AttentionMap, AttentionMap), MapError> {
    if (a.h, a.w) == (b.h, b.w) {
        Ok((a, b))
    } else if b.h >= a.h && b.w >= a.w {
        let b = downsample(&b.values, b.h, b.w, a.h, a.w)?;
        Ok((a, b))
    } else {
        let a = downsample(&a.values, a.h, a.w, b.h, b.w)?;
        Ok((a, b))
    }
}

/// Correlate every unmasked (qa_id, glimpse) map present in both inputs.
pub fn rank_report(a: &[MapRecord], b: &[MapRecord]) -> std::result::Result<RankReport, String> {
    let index: HashMap<(u64, usize), &MapRecord> = b
        .iter()
        .filter(|r| r.mask)
        .map(|r| ((r.qa_id, r.glimpse), r))
        .collect();
    let mut rows = Vec::new();
    for ra in a.iter().filter(|r| r.mask) {
        let Some(rb) = index.get(&(ra.qa_id, ra.glimpse)) else {
            continue;
        };
        let pair = ra
            .to_map()
            .and_then(|ma| Ok((ma, rb.to_map()?)))
            .and_then(|(ma, mb)| align(ma, mb));
        let (ma, mb) = pair.map_err(|e| format!("qa {} glimpse {}: {e}", ra.qa_id, ra.glimpse))?;
        let rank_corr = match rank_correlation(&ma, &mb) {
            Ok(v) => Some(v),
            Err(MapError::UndefinedCorrelation) => None,
            Err(e) => return Err(format!("qa {} glimpse {}: {e}", ra.qa_id, ra.glimpse)),
        };
        rows.push(RankRow {
            qa_id: ra.qa_id,
            glimpse: ra.glimpse,
            rank_corr,
        });
    }
    if rows.is_empty() {
        return Err("no unmasked (qa_id, glimpse) map is present in both inputs".to_string());
    }
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.rank_corr).collect();
    if defined.is_empty() {
        return Err("every paired map is constant, correlation undefined".to_string());
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(RankReport { rows, mean })
}

pub fn cmd_eval_rank(args: EvalRankArgs) -> Result<RankReport> {
    let mut a = args.merge_config()?;
    let (pa, pb, out) = (need(&a.maps_a, "maps-a")?, need(&a.maps_b, "maps-b")?, need(&a.out, "out")?);
    let manifest_path = a.manifest.get_or_insert_with(|| manifest_beside(&out)).clone();
    let report = rank_report(&read_ndjson(&pa)?, &read_ndjson(&pb)?)
        .map_err(|e| CliError::Input(format!("{} vs {}: {e}", pa.display(), pb.display())))?;
    write_file(&out, report.to_csv())?;
    let mut manifest = RunManifest::new("eval-rank", &a);
    write_manifest(&mut manifest, &[&pa, &pb], &manifest_path)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// eval-acc

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub qa_id: u64,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub qa_id: u64,
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccReport {
    pub rows: Vec<(u64, f64)>,
    pub mean: f64,
}

impl AccReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("qa_id,accuracy\n");
        for (id, acc) in &self.rows {
            out.push_str(&format!("{id},{}\n", fmt_num(*acc)));
        }
        out.push_str(&format!("mean,{}\n", fmt_num(self.mean)));
        out
    }
}

pub fn acc_report(preds: &[Prediction], refs: &[References]) -> std::result::Result<AccReport, String> {
    if preds.is_empty() {
        return Err("no predictions".to_string());
    }
    let index: HashMap<u64, &References> = refs.iter().map(|r| (r.qa_id, r)).collect();
    let rows = preds
        .iter()
        .map(|p| {
            let r = index
                .get(&p.qa_id)
                .ok_or_else(|| format!("no references for qa {}", p.qa_id))?;
            let acc = vqa_accuracy(&p.answer, &r.answers).map_err(|e| format!("qa {}: {e}", p.qa_id))?;
            Ok((p.qa_id, acc))
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    let mean = rows.iter().map(|(_, a)| a).sum::<f64>() / rows.len() as f64;
    Ok(AccReport { rows, mean })
}

pub fn cmd_eval_acc(args: EvalAccArgs) -> Result<AccReport> {
    let mut a = args.merge_config()?;
    let (pp, pr, out) = (need(&a.preds, "preds")?, need(&a.refs, "refs")?, need(&a.out, "out")?);
    let manifest_path = a.manifest.get_or_insert_with(|| manifest_beside(&out)).clone();
    let report = acc_report(&read_ndjson(&pp)?, &read_ndjson(&pr)?)
        .map_err(|e| CliError::Input(format!("{} vs {}: {e}", pp.display(), pr.display())))?;
    write_file(&out, report.to_csv())?;
    let mut manifest = RunManifest::new("eval-acc", &a);
    write_manifest(&mut manifest, &[&pp, &pr], &manifest_path)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// train-toy

pub fn cmd_train_toy(args: TrainToyArgs) -> Result<TrainOutput> {
    let mut a = args.merge_config()?;
    let d = ToyConfig::default();
    let mode = *a.alpha_mode.get_or_insert(AlphaModeArg::Cosine);
    let alpha_value = *a.alpha_value.get_or_insert(1.0);
    let steps = *a.steps.get_or_insert(d.steps);
    let t_max = *a.t_max.get_or_insert(steps.max(1));
    let cfg = ToyConfig {
        d: *a.question_dim.get_or_insert(d.d),
        c: *a.channels.get_or_insert(d.c),
        h: *a.height.get_or_insert(d.h),
        w: *a.width.get_or_insert(d.w),
        glimpses: *a.glimpses.get_or_insert(d.glimpses),
        k: *a.classes.get_or_insert(d.k),
        o: *a.fusion_dim.get_or_insert(d.o),
        seed: *a.seed.get_or_insert(d.seed),
        steps,
        learning_rate: *a.lr.get_or_insert(d.learning_rate),
    };
    let samples = *a.samples.get_or_insert(64);
    let metrics_path = need(&a.metrics, "metrics")?;
    let manifest_path = a
        .manifest
        .get_or_insert_with(|| manifest_beside(&metrics_path))
        .clone();

    let alpha_mode = match mode {
        AlphaModeArg::Cosine => AlphaMode::CosineDecay,
        AlphaModeArg::Fixed => AlphaMode::Fixed(alpha_value),
    };
    let sched = Schedule::new(t_max, alpha_mode).map_err(|e| CliError::Usage(e.to_string()))?;
    if samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".to_string()));
    }
    let toy_err = |e: ToyError| match e {
        ToyError::Config(_) | ToyError::Schedule(_) => CliError::Usage(e.to_string()),
        other => CliError::Internal(other.to_string()),
    };
    let data = make_synthetic(&cfg, samples, cfg.seed).map_err(toy_err)?;
    let trained = toy::train(&data, &cfg, &sched).map_err(toy_err)?;

    write_file(&metrics_path, metrics_to_csv(&trained.metrics))?;
    if let Some(p) = &a.params {
        write_file(p, trained.params.to_ndjson())?;
    }
    let mut manifest = RunManifest::new("train-toy", &a);
    write_manifest(&mut manifest, &[], &manifest_path)?;
    Ok(trained)
}

// ---------------------------------------------------------------------------
// render

pub fn pgm_name(qa_id: u64, glimpse: usize) -> String {
    format!("qa{qa_id}_g{glimpse}.pgm")
}

pub fn cmd_render(args: RenderArgs) -> Result<Vec<PathBuf>> {
    let mut a = args.merge_config()?;
    let (maps_path, out_dir) = (need(&a.maps, "maps")?, need(&a.out_dir, "out-dir")?);
    let manifest_path = a
        .manifest
        .get_or_insert_with(|| out_dir.join("manifest.json"))
        .clone();
    let records: Vec<MapRecord> = read_ndjson(&maps_path)?;
    fs::create_dir_all(&out_dir).map_err(|e| input_err(&out_dir, e))?;
    let mut written = Vec::with_capacity(records.len());
    for r in &records {
        let map = r.to_map().map_err(|e| input_err(&maps_path, e))?;
        let path = out_dir.join(pgm_name(r.qa_id, r.glimpse));
        write_file(&path, to_pgm(&map))?;
        written.push(path);
    }
    let mut manifest = RunManifest::new("render", &a);
    write_manifest(&mut manifest, &[&maps_path], &manifest_path)?;
    Ok(written)
}

// ---------------------------------------------------------------------------

/// Run one parsed command, printing a short summary to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mine(a) => {
            let out = cmd_mine(a)?;
            let r = &out.report;
            println!(
                "{} labels; clamped {} boxes, dropped {} triplets, {} regions, {} objects, {} duplicate ids",
                out.labels.len(),
                r.clamped_boxes,
                r.dropped_triplets,
                r.dropped_regions,
                r.dropped_objects,
                r.duplicate_ids
            );
        }
        Command::Rasterize(a) => {
            let records = cmd_rasterize(a)?;
            let masked = records.iter().filter(|r| !r.mask).count();
            println!("{} maps, {masked} masked", records.len());
        }
        Command::EvalRank(a) => {
            let report = cmd_eval_rank(a)?;
            println!("mean rank correlation {} over {} pairs", fmt_num(report.mean), report.rows.len());
        }
        Command::EvalAcc(a) => {
            let report = cmd_eval_acc(a)?;
            println!("mean accuracy {} over {} predictions", fmt_num(report.mean), report.rows.len());
        }
        Command::TrainToy(a) => {
            let out = cmd_train_toy(a)?;
            if let Some(m) = out.metrics.last() {
                println!(
                    "step {}: ce {} kl {} accuracy {} rank_corr {}",
                    m.step,
                    fmt_num(m.ce),
                    fmt_num(m.kl),
                    fmt_num(m.accuracy),
                    fmt_num(m.rank_corr)
                );
            }
        }
        Command::Render(a) => {
            let written = cmd_render(a)?;
            println!("{} heatmaps written", written.len());
        }
    }
    Ok(())
}

