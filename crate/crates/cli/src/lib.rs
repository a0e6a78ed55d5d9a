//! Command definitions and their implementations for the `jitterlab` binary.
//!
//! Every command reads and writes the on-disk formats of the other crates:
//! dataset directories (`samples.jsonl`, `pairs.jsonl`, `images/`,
//! optionally `clusters.json`), model checkpoints and embedding indexes.
//! Commands print their result to stdout; progress goes to the log.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use jitterlab_assess::eval::EvalReport;
use jitterlab_assess::harness::{baseline, evaluate, EvalDataset, EvalTasks};
use jitterlab_assess::{
    build_index, design_score, rank_candidates, search, suggest_defects, EmbeddingIndex,
    SuggestMode, DEFAULT_LAMBDA,
};
use jitterlab_core::dataset::{
    assign_splits, cluster_by_caption, krippendorff_alpha, read_jsonl, synthesize_corpus,
    write_jsonl, Choice, ClusterAssignment, ForgeLayout, ForgeOptions, HashedTfEmbedder,
    PreferencePair, Split, SplitKey, SplitRatios, UISample, DEFAULT_EPSILON, DEFAULT_MIN_SAMPLES,
    DEFAULT_VARIANTS,
};
use jitterlab_core::fixtures::write_fixture_corpus;
use jitterlab_core::jitter::DefectTag;
use jitterlab_core::raster::Bitmap;
use jitterlab_model::{checkpoint, run_schedule, DatasetView, Model, ModelConfig, ScheduleConfig};

#[derive(Debug, Parser)]
#[command(
    name = "jitterlab",
    version,
    about = "Synthetic UI design-quality data, training and assessment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and maintain datasets.
    #[command(subcommand)]
    Forge(ForgeCommand),
    /// Train a model through stages 1..=N of the schedule.
    Train(TrainArgs),
    /// Quality score of one screenshot for a caption.
    Score(ScoreArgs),
    /// Design defects the model sees in a screenshot.
    Suggest(SuggestArgs),
    /// Embed a dataset's screenshots into a search index.
    Index(IndexArgs),
    /// Quality-aware search over an index.
    Search(SearchArgs),
    /// Order candidate screenshots best-first for a caption.
    Rank(RankArgs),
    /// Evaluate models on a dataset and write a report.
    Eval(EvalArgs),
}

#[derive(Debug, Subcommand)]
pub enum ForgeCommand {
    /// Write a corpus of procedurally generated HTML pages.
    Corpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        pages: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render and jitter every corpus page into a dataset.
    Synth {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_VARIANTS)]
        variants: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster captions and write `clusters.json` into the dataset.
    Cluster {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f32,
        #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
        min_samples: usize,
    },
    /// Assign train/val/test splits in place.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        /// `train,val,test` fractions summing to 1.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        ratios: SplitRatios,
        /// `url` or `cluster` (the latter reads `clusters.json`).
        #[arg(long, default_value = "url")]
        key: SplitKey,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Krippendorff's alpha over pairs rated by several raters.
    Alpha {
        #[arg(long)]
        dataset: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Synthetic (jittered web) dataset for stages 1–2.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Rated dataset for stages 3–4.
    #[arg(long)]
    pub betterapp: Option<PathBuf>,
    /// Last stage to run (1–4).
    #[arg(long, default_value_t = 2)]
    pub stage: usize,
    /// `desk` or `paper`.
    #[arg(long, default_value = "desk")]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split trained on; `all` ignores splits.
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Override the preset's epochs for every stage.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Stop each stage after this many optimizer steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub caption: String,
}

#[derive(Debug, Args)]
pub struct SuggestArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub caption: String,
    /// Report the four CRAP principle tags instead of raw defect tags.
    #[arg(long)]
    pub crap_only: bool,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Index only un-jittered originals.
    #[arg(long)]
    pub originals_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub query: String,
    /// Prompt the results are pushed away from.
    #[arg(long)]
    pub negative: Option<String>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub caption: String,
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate; repeat for several models (named by file stem).
    #[arg(long, required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Pairs file to use instead of the dataset's `pairs.jsonl`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, default_value = "choice,suggest,mrr")]
    pub tasks: EvalTasks,
    /// Split evaluated; `all` ignores splits.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command, writing its result to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Forge(f) => forge(f, out),
        Command::Train(a) => train(a, out),
        Command::Score(a) => {
            let model = load_model(&a.model)?;
            let score = design_score(&model, &load_png(&a.image)?, &a.caption)?;
            writeln!(out, "{score:.6}")?;
            Ok(())
        }
        Command::Suggest(a) => {
            let model = load_model(&a.model)?;
            let mode = if a.crap_only {
                SuggestMode::CrapOnly
            } else {
                SuggestMode::AllTags
            };
            let (threshold, suggestions) = suggest_defects(
                &model,
                &load_png(&a.image)?,
                &a.caption,
                &DefectTag::ALL,
                mode,
            )?;
            writeln!(out, "threshold\t{threshold:.6}")?;
            for s in suggestions {
                writeln!(out, "{}\t{:.6}", s.tag, s.score)?;
            }
            Ok(())
        }
        Command::Index(a) => {
            let model = load_model(&a.model)?;
            let samples: Vec<UISample> = read_jsonl(&ForgeLayout::new(&a.dataset).samples())?;
            let samples: Vec<UISample> = samples
                .into_iter()
                .filter(|s| !a.originals_only || s.is_original())
                .collect();
            let index = build_index(&model, &a.dataset, &samples)?;
            index.save(&a.out)?;
            writeln!(
                out,
                "indexed {} screenshots into {}",
                index.len(),
                a.out.display()
            )?;
            Ok(())
        }
        Command::Search(a) => {
            let model = load_model(&a.model)?;
            let index = EmbeddingIndex::load(&a.index)?;
            for hit in search(
                &model,
                &index,
                &a.query,
                a.k,
                a.negative.as_deref(),
                a.lambda,
            )? {
                writeln!(out, "{}\t{:.6}\t{}", hit.id, hit.score, hit.image)?;
            }
            Ok(())
        }
        Command::Rank(a) => {
            let model = load_model(&a.model)?;
            let bitmaps = a
                .images
                .iter()
                .map(|p| load_png(p))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Bitmap> = bitmaps.iter().collect();
            for (place, i) in rank_candidates(&model, &refs, &a.caption)?
                .into_iter()
                .enumerate()
            {
                writeln!(out, "{}\t{}", place + 1, a.images[i].display())?;
            }
            Ok(())
        }
        Command::Eval(a) => eval(a, out),
    }
}

fn load_model(path: &Path) -> Result<Model> {
    checkpoint::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_png(path: &Path) -> Result<Bitmap> {
    Bitmap::read_png(path).with_context(|| format!("reading {}", path.display()))
}

/// `all` → no filter; otherwise a split name.
pub fn parse_split(s: &str) -> Result<Option<Split>> {
    if s == "all" {
        return Ok(None);
    }
    s.parse::<Split>().map(Some).map_err(anyhow::Error::msg)
}

fn forge(cmd: ForgeCommand, out: &mut dyn Write) -> Result<()> {
    match cmd {
        ForgeCommand::Corpus {
            out: dir,
            pages,
            seed,
        } => {
            let entries = write_fixture_corpus(&dir, pages, seed)?;
            writeln!(out, "wrote {} pages to {}", entries.len(), dir.display())?;
        }
        ForgeCommand::Synth {
            corpus,
            variants,
            seed,
            out: dir,
        } => {
            let opts = ForgeOptions {
                variants_per_page: variants,
                seed,
                renderer: None,
            };
            let forged = synthesize_corpus(&corpus, &dir, &opts)?;
            writeln!(
                out,
                "forged {} samples and {} pairs into {}",
                forged.samples.len(),
                forged.pairs.len(),
                dir.display()
            )?;
        }
        ForgeCommand::Cluster {
            dataset,
            eps,
            min_samples,
        } => {
            let layout = ForgeLayout::new(&dataset);
            let samples: Vec<UISample> = read_jsonl(&layout.samples())?;
            let clusters =
                cluster_by_caption(&samples, eps, min_samples, &HashedTfEmbedder::default());
            std::fs::write(layout.clusters(), serde_json::to_string(&clusters)?)
                .with_context(|| format!("writing {}", layout.clusters().display()))?;
            let noise = clusters.clusters.values().filter(|c| c.is_none()).count();
            writeln!(
                out,
                "{} clusters, {} noise samples",
                clusters.cluster_count(),
                noise
            )?;
        }
        ForgeCommand::Split {
            dataset,
            ratios,
            key,
            seed,
        } => {
            let layout = ForgeLayout::new(&dataset);
            let mut samples: Vec<UISample> = read_jsonl(&layout.samples())?;
            let mut pairs: Vec<PreferencePair> = read_jsonl(&layout.pairs())?;
            let clusters: Option<ClusterAssignment> = match key {
                SplitKey::Cluster => {
                    let text = std::fs::read_to_string(layout.clusters()).with_context(|| {
                        "cluster split needs clusters.json; run `forge cluster` first"
                    })?;
                    Some(serde_json::from_str(&text)?)
                }
                SplitKey::Url => None,
            };
            let groups = assign_splits(
                &mut samples,
                &mut pairs,
                ratios,
                key,
                clusters.as_ref(),
                seed,
            )?;
            write_jsonl(&layout.samples(), &samples)?;
            write_jsonl(&layout.pairs(), &pairs)?;
            for split in Split::ASSIGNED {
                let n = samples.iter().filter(|s| s.split == split).count();
                let p = pairs.iter().filter(|p| p.split == split).count();
                let g = groups.get(&split).copied().unwrap_or(0);
                writeln!(out, "{split:?}\t{g} groups\t{n} samples\t{p} pairs")?;
            }
        }
        ForgeCommand::Alpha { dataset } => {
            let layout = ForgeLayout::new(&dataset);
            let samples: Vec<UISample> = read_jsonl(&layout.samples())?;
            let pairs: Vec<PreferencePair> = read_jsonl(&layout.pairs())?;
            let alpha = krippendorff_alpha(&rater_table(&samples, &pairs))?;
            writeln!(out, "{alpha:.6}")?;
        }
    }
    Ok(())
}

/// Rater → item → choice, where an item is the unordered pair of origin
/// screenshots and choices are expressed relative to the sorted order.
pub fn rater_table(
    samples: &[UISample],
    pairs: &[PreferencePair],
) -> BTreeMap<String, BTreeMap<String, Choice>> {
    let origin: BTreeMap<&str, &str> = samples
        .iter()
        .map(|s| (s.id.as_str(), s.origin_id.as_str()))
        .collect();
    let mut table: BTreeMap<String, BTreeMap<String, Choice>> = BTreeMap::new();
    for p in pairs {
        let Some(rater) = &p.rater_id else { continue };
        let a = origin.get(p.a.as_str()).copied().unwrap_or(&p.a);
        let b = origin.get(p.b.as_str()).copied().unwrap_or(&p.b);
        let (item, choice) = if a <= b {
            (format!("{a}|{b}"), p.preferred)
        } else {
            let flipped = match p.preferred {
                Choice::A => Choice::B,
                Choice::B => Choice::A,
                Choice::Same => Choice::Same,
            };
            (format!("{b}|{a}"), flipped)
        };
        table.entry(rater.clone()).or_default().insert(item, choice);
    }
    table
}

fn load_view(dir: &Path, split: Option<Split>) -> Result<DatasetView> {
    let view = DatasetView::load(dir, split, jitterlab_assess::WINDOW)
        .with_context(|| format!("loading dataset {}", dir.display()))?;
    if view.contrastive.is_empty() {
        bail!(
            "{} has no samples in the requested split; run `forge split` or pass --split all",
            dir.display()
        );
    }
    Ok(view)
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let split = parse_split(&a.split)?;
    let mut schedule = ScheduleConfig::new(&a.preset, a.stage, a.seed)?;
    for stage in &mut schedule.stages {
        if let Some(e) = a.epochs {
            stage.epochs = e;
        }
        stage.max_steps = a.max_steps.or(stage.max_steps);
    }
    let jitterweb = load_view(&a.dataset, split)?;
    let betterapp = match (&a.betterapp, a.stage > 2) {
        (Some(dir), true) => Some(load_view(dir, split)?),
        _ => None,
    };
    tracing::info!(
        samples = jitterweb.contrastive.len(),
        pairs = jitterweb.pairs.len(),
        "training"
    );
    let init = Model::init(ModelConfig::default(), a.seed);
    let (model, traces) = run_schedule(init, &jitterweb, betterapp.as_ref(), &schedule)?;
    checkpoint::save(&model, &a.out)?;
    for t in &traces {
        let first = t.losses.first().copied().unwrap_or(f64::NAN);
        let last = t.losses.last().copied().unwrap_or(f64::NAN);
        writeln!(
            out,
            "stage {}\t{} steps\tloss {first:.4} -> {last:.4}",
            t.stage,
            t.losses.len()
        )?;
    }
    writeln!(out, "saved {}", a.out.display())?;
    Ok(())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let data = EvalDataset::load(&a.dataset, a.pairs.as_deref(), parse_split(&a.split)?)?;
    if data.pairs.is_empty() {
        bail!(
            "no usable pairs in {} (split {})",
            a.dataset.display(),
            a.split
        );
    }
    let mut report = EvalReport {
        config: serde_json::json!({
            "dataset": a.dataset,
            "pairs": a.pairs,
            "split": a.split,
            "tasks": a.tasks.to_string(),
        }),
        ..Default::default()
    };
    let mut dim = None;
    for path in &a.model {
        let model = load_model(path)?;
        dim = Some(model.config.embed_dim);
        let name = path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        report.models.push(evaluate(&name, &model, &data, a.tasks)?);
    }
    if let (true, Some(dim)) = (a.tasks.mrr, dim) {
        report.models.push(baseline(&data, dim)?);
    }
    let table = jitterlab_assess::eval::emit_report(&report, &a.out)?;
    write!(out, "{}", report.table())?;
    writeln!(out, "wrote {} and {}", a.out.display(), table.display())?;
    Ok(())
}
