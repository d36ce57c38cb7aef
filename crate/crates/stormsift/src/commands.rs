//! Operator commands. Each command maps onto one pipeline stage and keeps
//! its artifacts in the configured work directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stormsift_core::fusion::{cdf_table, default_thresholds, filter_stream, write_cdf_csv, write_scored_ndjson, ThresholdVector};
use stormsift_core::image::{train_toy_classifier, ToyImageScorer};
use stormsift_core::ingest::LabelRecord;

use crate::api::{self, AppState};
use crate::config::PipelineConfig;
use crate::mapctx::MockMapProvider;
use crate::pipeline::{
    self, image_results, ImageBackend, ImageScoreFile, IngestedData, Models, PipelineError, Stage, WorkDir,
};
use crate::scenario::{generate_scenario, ScenarioSpec};
use crate::snapshot::{Store, StoreSnapshot};

macro_rules! config_args {
    ($($field:ident),* $(,)?) => {
        /// One flag per configuration key; a flag overrides the config file.
        #[derive(Debug, Default, Clone, Args)]
        pub struct ConfigArgs {
            $(
                #[arg(long, global = true, value_name = "VALUE", help_heading = "Configuration")]
                pub $field: Option<String>,
            )*
        }

        impl ConfigArgs {
            pub fn overrides(&self) -> Vec<(&'static str, &str)> {
                let mut v = Vec::new();
                $(
                    if let Some(x) = &self.$field {
                        v.push((stringify!($field), x.as_str()));
                    }
                )*
                v
            }
        }
    };
}

config_args!(
    study_start,
    study_end,
    tweets,
    sensors,
    track,
    labels,
    image_scores,
    image_model,
    work_dir,
    idw_power,
    d_min,
    epsilon,
    min_precip_stations,
    window_size,
    dimension,
    min_count,
    negative_samples,
    epochs,
    learning_rate,
    seed_term,
    segment_hours,
    text_formula,
    user_classifier,
    n_trees,
    max_depth,
    min_samples_split,
    max_leaf_nodes,
    user_grid,
    image_gate,
    geo_min,
    text_min,
    user_min,
    image_min,
    bind,
    seed,
    user_learning_rate,
);

#[derive(Debug, Parser)]
#[command(name = "stormsift", version, about = "Multi-modal relevance filtering for hurricane social-media streams")]
pub struct Cli {
    /// Config file in key=value format.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic hurricane scenario and its config file.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Parse inputs; write accepted messages and reject reports.
    Ingest,
    /// Rank the geo function/transform candidates and save the chosen model.
    SelectGeo,
    /// Train per-segment word embeddings.
    TrainText,
    /// Train the user credibility classifier (grid search when configured).
    TrainUser,
    /// Score message media with the configured image scorer.
    ScoreImages {
        /// Train the toy classifier on labels keyed by media id first.
        #[arg(long)]
        train_toy: Option<PathBuf>,
    },
    /// Score every message with the saved models and write the snapshot.
    Score,
    /// Print the messages passing the given thresholds as JSON lines.
    Filter {
        #[arg(long, default_value_t = 0.0)]
        geo: f64,
        #[arg(long, default_value_t = 0.0)]
        text: f64,
        #[arg(long, default_value_t = 0.0)]
        user: f64,
        #[arg(long, default_value_t = 0.0)]
        image: f64,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the run manifest, or the per-axis pass-rate table with --cdf.
    Report {
        #[arg(long)]
        cdf: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the query API over the saved snapshot.
    Serve {
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Ingest, train, score and write every artifact in one go.
    Run,
}

impl Cli {
    pub fn pipeline_config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p).map_err(|e| PipelineError::new(Stage::Config, e))?,
            None => PipelineConfig::default(),
        };
        cfg.apply_overrides(self.settings.overrides()).map_err(|e| PipelineError::new(Stage::Config, e))?;
        Ok(cfg)
    }
}

fn emit(out: &mut dyn Write, path: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("[output] {}", p.display())),
        None => out.write_all(bytes).context("[output] stdout"),
    }
}

fn load_snapshot(path: &Path) -> Result<StoreSnapshot> {
    StoreSnapshot::load(path).map_err(|e| anyhow!("[output] {e} (run score first)"))
}

/// Runs one command, writing its primary output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    if let Command::Generate { out: dir, count } = &cli.command {
        let seed = match &cli.settings.seed {
            Some(s) => s.parse().map_err(|_| anyhow!("[config] seed: cannot parse {s:?}"))?,
            None => ScenarioSpec::default().seed,
        };
        let files = generate_scenario(dir, &ScenarioSpec { tweets: *count, seed, ..ScenarioSpec::default() })
            .with_context(|| format!("[output] {}", dir.display()))?;
        writeln!(out, "scenario written; config at {}", files.config.display())?;
        return Ok(());
    }

    let cfg = cli.pipeline_config()?;
    cfg.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
    let work = WorkDir::new(&cfg.work_dir);
    match &cli.command {
        Command::Generate { .. } => unreachable!(),
        Command::Ingest => {
            let data = pipeline::ingest(&cfg)?;
            work.ensure()?;
            pipeline::write_ingest(&work, &data)?;
            writeln!(out, "accepted {} rejected {}", data.tweets.len(), data.rejected.len())?;
        }
        Command::SelectGeo => {
            let data = pipeline::ingest(&cfg)?;
            let features = pipeline::geo_features(&cfg, &data);
            let selection = pipeline::select_geo(&cfg, &data, &features)?;
            pipeline::write_geo(&work, &selection)?;
            for line in pipeline::geo_ranking(&selection) {
                writeln!(out, "{line}")?;
            }
        }
        Command::TrainText => {
            let data = pipeline::ingest(&cfg)?;
            let corpus = pipeline::tokenize_corpus(&data);
            let model = pipeline::train_text(&cfg, &corpus)?;
            pipeline::write_text(&work, &model)?;
            for s in &model.summaries {
                writeln!(out, "segment {} tweets {} vocab {}", s.segment, s.tweets, s.vocab_size)?;
                if let Some(w) = &s.warning {
                    writeln!(out, "warning: {w}")?;
                }
            }
        }
        Command::TrainUser => {
            let data = pipeline::ingest(&cfg)?;
            let training = pipeline::train_user(&cfg, &data)?;
            pipeline::write_user(&work, &training)?;
            writeln!(out, "{} {}", training.model.kind, training.model.hyperparams.label())?;
            if let Some(g) = &training.grid {
                let r = g.best_report();
                writeln!(out, "cv f1 {:.4} +/- {:.4} auroc {:.4}", r.f1.mean, r.f1.std, r.auroc.mean)?;
            }
        }
        Command::ScoreImages { train_toy } => {
            let data = pipeline::ingest(&cfg)?;
            let root = pipeline::media_root(&cfg);
            let backend = match train_toy {
                Some(labels) => {
                    let (scorer, accuracy) = train_toy_from_media(&cfg, &data, labels, &root)?;
                    let model_path = work.root.join("image_model.txt");
                    work.ensure()?;
                    std::fs::write(&model_path, scorer.to_text()).with_context(|| format!("[output] {}", model_path.display()))?;
                    if let Some(a) = accuracy {
                        writeln!(out, "toy classifier hold-out accuracy {a:.4}")?;
                    }
                    ImageBackend::Toy(scorer)
                }
                None => ImageBackend::from_config(&cfg)?,
            };
            let (results, warnings) = image_results(&backend, &data, &root);
            let file = ImageScoreFile {
                info: backend.info(cfg.image_gate),
                scores: data.tweets.iter().map(|t| t.id.clone()).zip(results).collect(),
                warnings,
            };
            pipeline::write_images(&work, &file)?;
            let with_media = data.tweets.iter().filter(|t| !t.media.is_empty()).count();
            writeln!(out, "image source {} messages with media {} warnings {}", file.info.source, with_media, file.warnings.len())?;
        }
        Command::Score => {
            let (geo, geo_ranking) = pipeline::load_geo(&work)?;
            let text = pipeline::load_text(&work)?;
            let user = pipeline::load_user(&work)?;
            let data = pipeline::ingest(&cfg)?;
            let image = match std::fs::read_to_string(work.image_scores()) {
                Ok(json) => ImageBackend::Stored(
                    serde_json::from_str(&json).map_err(|e| PipelineError::new(Stage::Image, e))?,
                ),
                Err(_) => ImageBackend::from_config(&cfg)?,
            };
            let models = Models { geo, geo_ranking, text, user, user_grid: None, image };
            let run = pipeline::score_with_models(&cfg, &data, &models, BTreeMap::new())?;
            pipeline::write_run(&work, &run)?;
            writeln!(out, "scored {} passed {} manifest {}", run.snapshot.len(), run.manifest.counts.passed_default_thresholds, run.manifest.digest())?;
        }
        Command::Filter { geo, text, user, image, snapshot, out: path } => {
            let t = ThresholdVector::new(*geo, *text, *user, *image).map_err(|e| anyhow!("[fusion] {e}"))?;
            let snap = load_snapshot(&snapshot.clone().unwrap_or_else(|| work.snapshot()))?;
            let passing = filter_stream(snap.tweets(), &t);
            let mut buf = Vec::new();
            write_scored_ndjson(&mut buf, &passing).map_err(|e| anyhow!("[output] {e}"))?;
            emit(out, path, &buf)?;
        }
        Command::Report { cdf, out: path } => {
            if *cdf {
                let snap = load_snapshot(&work.snapshot())?;
                let scores: Vec<_> = snap.tweets().iter().map(|s| s.scores).collect();
                let rows = cdf_table(&scores, &default_thresholds()).map_err(|e| anyhow!("[fusion] {e}"))?;
                let mut buf = Vec::new();
                write_cdf_csv(&mut buf, &rows).map_err(|e| anyhow!("[output] {e}"))?;
                emit(out, path, &buf)?;
            } else {
                let manifest = pipeline::read_manifest(&work.manifest())?;
                let mut text = serde_json::to_string_pretty(&manifest)?;
                text.push_str(&format!("\nmanifest digest {}\n", manifest.digest()));
                emit(out, path, text.as_bytes())?;
            }
        }
        Command::Serve { snapshot } => {
            let snap = load_snapshot(&snapshot.clone().unwrap_or_else(|| work.snapshot()))?;
            let state = AppState {
                store: Arc::new(Store::new(snap)),
                config: Arc::new(cfg.clone()),
                provider: Arc::new(MockMapProvider::default()),
            };
            writeln!(out, "serving on http://{}", cfg.bind)?;
            out.flush()?;
            let rt = tokio::runtime::Runtime::new().context("[serve] runtime")?;
            rt.block_on(api::serve(state, cfg.bind)).with_context(|| format!("[serve] {}", cfg.bind))?;
        }
        Command::Run => {
            let run = pipeline::run_pipeline(&cfg)?;
            pipeline::write_run(&work, &run)?;
            writeln!(out, "scored {} passed {} manifest {}", run.snapshot.len(), run.manifest.counts.passed_default_thresholds, run.manifest.digest())?;
        }
    }
    Ok(())
}

/// Trains the toy image classifier on the media of accepted messages that
/// have labels keyed by media id.
fn train_toy_from_media(
    cfg: &PipelineConfig,
    data: &IngestedData,
    labels_path: &Path,
    root: &Path,
) -> Result<(ToyImageScorer, Option<f64>)> {
    let labels = stormsift_core::ingest::load_labels(labels_path).map_err(|e| anyhow!("[image] {e}"))?;
    let consensus = stormsift_core::ingest::consensus_related(&labels);
    let mut tags: HashMap<&str, BTreeSet<_>> = HashMap::new();
    for l in labels.iter().filter(|l| l.related) {
        tags.entry(l.subject_id.as_str()).or_default().extend(l.tags.iter().copied());
    }
    let mut set = Vec::new();
    let mut seen = BTreeSet::new();
    for m in data.tweets.iter().flat_map(|t| &t.media) {
        let Some(&related) = consensus.get(&m.media_id) else { continue };
        if !seen.insert(m.media_id.clone()) {
            continue;
        }
        let path = root.join(&m.path);
        let img = image::open(&path).map_err(|e| anyhow!("[image] {}: {e}", path.display()))?.to_rgb8();
        let t: Vec<_> = if related { tags.get(m.media_id.as_str()).map(|s| s.iter().copied().collect()).unwrap_or_default() } else { vec![] };
        let label = LabelRecord::new(m.media_id.clone(), "consensus", related, t).map_err(|e| anyhow!("[image] {e}"))?;
        set.push((img, label));
    }
    if set.is_empty() {
        bail!("[image] no labelled media found");
    }
    let (scorer, report) = train_toy_classifier(&set, cfg.seed, cfg.image_gate).map_err(|e| anyhow!("[image] {e}"))?;
    Ok((scorer, report.holdout_accuracy))
}
