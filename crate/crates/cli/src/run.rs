//! File-based stages. Every stage reads its inputs from disk, writes its
//! artifacts atomically and records them in `<out>/manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use xmodal_core::graph::{as_lf, Thresholds, PROPAGATION_SCORES_REF};
use xmodal_core::label_model::{audit_jsonl, ProbLabels};
use xmodal_core::lf::{lfs_to_jsonl, read_lfs};
use xmodal_core::metrics::{
    auprc, cross_over, factor_analysis, metrics_report, pr_curve_csv, weak_label_prf, CrossOverConfig,
    MetricsReport,
};
use xmodal_core::synth::generate;
use xmodal_core::train::{LabeledSet, SavedModel};
use xmodal_core::types::{load_dataset, read_records, validate, Severity};
use xmodal_core::{Dataset, FeatureSchema, Label, LabelingFunction, PropagationScores, Split};

use crate::config::{DataRole, PipelineConfig, Strategy};
use crate::pipeline::{run_propagation, seed_subset, train_strategy, weak_label, TrainInputs};
use crate::StageError;

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".xmodal.lock";

pub const MINED_LFS: &str = "lfs/mined.jsonl";
pub const PROP_SCORES: &str = "propagation/scores.jsonl";
pub const PROP_THRESHOLDS: &str = "propagation/thresholds.json";
pub const PROP_EDGES: &str = "propagation/edges.jsonl";
pub const PROP_DIAGNOSTICS: &str = "propagation/diagnostics.json";
pub const PROB_LABELS: &str = "weak/prob_labels.jsonl";
pub const LABEL_MODEL: &str = "weak/label_model.jsonl";
pub const WEAK_REPORT: &str = "weak/report.json";
pub const TRAIN_REPORT: &str = "reports/train.json";
pub const VALIDATION_REPORT: &str = "reports/validation.json";
pub const METRICS_REPORT: &str = "reports/metrics.json";
pub const CROSSOVER_REPORT: &str = "reports/crossover.json";
pub const FACTOR_REPORT: &str = "reports/factor.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Synth,
    Validate,
    Mine,
    Propagate,
    WeakLabel,
    Train,
    Evaluate,
    Crossover,
    Factor,
    RunAll,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Validate => "validate",
            Stage::Mine => "mine",
            Stage::Propagate => "propagate",
            Stage::WeakLabel => "weak-label",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Crossover => "crossover",
            Stage::Factor => "factor",
            Stage::RunAll => "run-all",
        }
    }
}

pub fn model_path(strategy: Strategy) -> String {
    format!("models/{}.json", strategy.name())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a sibling temp file and a rename, so readers never see a
/// partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub sha256: String,
    pub stage: String,
    pub config_digest: String,
    pub seed: u64,
    /// Digest of every file the producing stage read.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_digest: String,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Option<Manifest>, StageError> {
        let path = out.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let m = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Some(m))
    }
}

/// Exclusive writer lock on a run directory, released on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(out: &Path) -> Result<RunLock, StageError> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(anyhow::anyhow!(
                "{} is locked by another writer (delete {} if it is stale)",
                out.display(),
                path.display()
            )
            .into()),
            Err(e) => Err(anyhow::Error::new(e).context(format!("creating {}", path.display())).into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

struct Ctx<'a> {
    out: &'a Path,
    cfg: &'a PipelineConfig,
    stage: &'static str,
    config_digest: String,
    manifest: Manifest,
    inputs: BTreeMap<String, String>,
}

impl<'a> Ctx<'a> {
    fn new(out: &'a Path, cfg: &'a PipelineConfig, stage: Stage) -> Result<Self, StageError> {
        let config_digest = sha256_hex(cfg.to_toml().as_bytes());
        let mut manifest = Manifest::load(out)?.unwrap_or_else(|| Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            config_digest: config_digest.clone(),
            artifacts: BTreeMap::new(),
        });
        manifest.tool_version = env!("CARGO_PKG_VERSION").into();
        manifest.seed = cfg.seed;
        manifest.config_digest = config_digest.clone();
        Ok(Ctx {
            out,
            cfg,
            stage: stage.name(),
            config_digest,
            manifest,
            inputs: BTreeMap::new(),
        })
    }

    fn key(&self, path: &Path) -> String {
        path.strip_prefix(self.out)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    /// Records an input's digest, failing with exit code 3 if it is absent.
    fn input(&mut self, path: &Path) -> Result<PathBuf, StageError> {
        if !path.is_file() {
            return Err(StageError::MissingArtifact(path.to_path_buf()));
        }
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(self.key(path), sha256_hex(&bytes));
        Ok(path.to_path_buf())
    }

    fn artifact(&mut self, rel: &str) -> Result<PathBuf, StageError> {
        self.input(&self.out.join(rel))
    }

    fn data(&mut self, role: DataRole) -> Result<PathBuf, StageError> {
        let p = self.cfg.require(role, self.out)?;
        self.input(&p)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), StageError> {
        let path = self.out.join(rel);
        write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.artifacts.insert(
            rel.to_string(),
            ArtifactEntry {
                sha256: sha256_hex(bytes),
                stage: self.stage.to_string(),
                config_digest: self.config_digest.clone(),
                seed: self.cfg.seed,
                inputs: self.inputs.clone(),
            },
        );
        Ok(())
    }

    fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<(), StageError> {
        let mut text = serde_json::to_string_pretty(value).context("serializing report")?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    fn finish(self) -> Result<(), StageError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).context("serializing manifest")?;
        text.push('\n');
        let path = self.out.join(MANIFEST);
        write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn schema(ctx: &mut Ctx) -> Result<Arc<FeatureSchema>, StageError> {
    let p = ctx.data(DataRole::Schema)?;
    Ok(Arc::new(FeatureSchema::load(&p)?))
}

fn dataset(ctx: &mut Ctx, schema: &Arc<FeatureSchema>, role: DataRole) -> Result<Dataset, StageError> {
    let p = ctx.data(role)?;
    Ok(load_dataset(&p, schema.clone(), split_of(role))?)
}

fn split_of(role: DataRole) -> Split {
    match role {
        DataRole::TextDev => Split::Dev,
        DataRole::ImageUnlabeled | DataRole::ImageUnlabeledTruth => Split::TrainUnlabeled,
        DataRole::ImageTest => Split::Test,
        _ => Split::TrainLabeled,
    }
}

fn read_file(path: &Path) -> Result<String, StageError> {
    Ok(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StageError> {
    Ok(serde_json::from_str(&read_file(path)?).with_context(|| format!("parsing {}", path.display()))?)
}

fn open(path: &Path) -> Result<BufReader<fs::File>, StageError> {
    Ok(BufReader::new(fs::File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    id: String,
    label: i8,
}

fn truth_jsonl(ids: &[String], labels: &[Label]) -> String {
    let mut out = String::new();
    for (id, l) in ids.iter().zip(labels) {
        out.push_str(&serde_json::to_string(&TruthRecord { id: id.clone(), label: l.as_i8() }).expect("serializes"));
        out.push('\n');
    }
    out
}

/// Attaches latent labels from a truth file to an unlabeled dataset.
fn attach_truth(data: &Dataset, path: &Path) -> Result<Dataset, StageError> {
    let mut by_id = BTreeMap::new();
    for line in read_file(path)?.lines().filter(|l| !l.trim().is_empty()) {
        let r: TruthRecord = serde_json::from_str(line).with_context(|| format!("parsing {}", path.display()))?;
        let l = Label::from_i64(r.label as i64)
            .ok_or_else(|| anyhow::anyhow!("{}: label {} is not +1/-1", path.display(), r.label))?;
        by_id.insert(r.id, l);
    }
    let mut d = data.clone();
    d.split = Split::Test;
    for p in &mut d.points {
        let l = by_id
            .get(&p.id)
            .ok_or_else(|| anyhow::anyhow!("{}: no label for {:?}", path.display(), p.id))?;
        p.gold_label = Some(*l);
    }
    Ok(d)
}

fn strategies(cfg: &PipelineConfig) -> Vec<Strategy> {
    cfg.model.strategies.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

fn synth(ctx: &mut Ctx) -> Result<String, StageError> {
    let data = generate(&ctx.cfg.synth)?;
    ctx.write(DataRole::Schema.generated_path(), data.schema.to_json_string().as_bytes())?;
    for (role, ds) in [
        (DataRole::TextLabeled, &data.text_labeled),
        (DataRole::TextDev, &data.text_dev),
        (DataRole::ImageUnlabeled, &data.image_unlabeled),
        (DataRole::ImageTest, &data.image_test),
        (DataRole::ImageGoldPool, &data.image_gold_pool),
    ] {
        ctx.write(role.generated_path(), ds.to_jsonl().as_bytes())?;
    }
    let ids: Vec<String> = data.image_unlabeled.points.iter().map(|p| p.id.clone()).collect();
    ctx.write(
        DataRole::ImageUnlabeledTruth.generated_path(),
        truth_jsonl(&ids, &data.image_unlabeled_truth).as_bytes(),
    )?;
    Ok(format!(
        "{} text, {} dev, {} unlabeled image, {} test image points",
        data.text_labeled.len(),
        data.text_dev.len(),
        data.image_unlabeled.len(),
        data.image_test.len()
    ))
}

fn validate_stage(ctx: &mut Ctx) -> Result<String, StageError> {
    let schema = schema(ctx)?;
    let roles = [
        DataRole::TextLabeled,
        DataRole::TextDev,
        DataRole::ImageUnlabeled,
        DataRole::ImageTest,
        DataRole::ImageGoldPool,
    ];
    let mut report = BTreeMap::new();
    let mut n_errors = 0;
    for role in roles {
        let Some(path) = ctx.cfg.data.resolve(role, ctx.out) else {
            continue;
        };
        ctx.input(&path)?;
        let points = read_records(open(&path)?)?;
        let ds = Dataset::new(schema.clone(), split_of(role), points);
        let violations = validate(&ds);
        let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
        n_errors += errors;
        report.insert(
            role.field(),
            json!({
                "n_points": ds.len(),
                "n_errors": errors,
                "n_warnings": violations.len() - errors,
                "violations": violations.iter().take(50).collect::<Vec<_>>(),
            }),
        );
    }
    ctx.write_json(VALIDATION_REPORT, &report)?;
    if n_errors > 0 {
        return Err(anyhow::anyhow!("{n_errors} schema violations, see {VALIDATION_REPORT}").into());
    }
    Ok(format!("{} datasets valid", report.len()))
}

fn mine(ctx: &mut Ctx) -> Result<String, StageError> {
    let schema = schema(ctx)?;
    let dev = dataset(ctx, &schema, DataRole::TextDev)?;
    let mined = crate::pipeline::mine(&dev, ctx.cfg)?;
    ctx.write(MINED_LFS, lfs_to_jsonl(mined.iter().map(|(lf, s)| (lf, Some(s)))).as_bytes())?;
    Ok(format!("{} LFs", mined.len()))
}

fn propagate(ctx: &mut Ctx) -> Result<String, StageError> {
    if !ctx.cfg.propagation.enabled {
        return Ok("disabled, skipped".into());
    }
    let schema = schema(ctx)?;
    let labeled = dataset(ctx, &schema, DataRole::TextLabeled)?;
    let dev = dataset(ctx, &schema, DataRole::TextDev)?;
    let targets = dataset(ctx, &schema, DataRole::ImageUnlabeled)?;
    let seeds = seed_subset(&labeled, ctx.cfg.propagation.max_seeds, ctx.cfg.seed);
    let run = run_propagation(&seeds, &dev, &[&targets], &ctx.cfg.graph)?;
    ctx.write(PROP_SCORES, run.scores.to_jsonl().as_bytes())?;
    ctx.write_json(PROP_THRESHOLDS, &run.thresholds)?;
    if ctx.cfg.propagation.write_edges {
        ctx.write(PROP_EDGES, run.graph.edges_to_jsonl().as_bytes())?;
    }
    ctx.write_json(
        PROP_DIAGNOSTICS,
        &json!({
            "n_nodes": run.graph.len(),
            "n_edges": run.graph.n_edges(),
            "n_seeds": seeds.len(),
            "iterations_run": run.scores.iterations_run,
            "final_delta": run.scores.final_delta,
            "converged": run.scores.converged,
        }),
    )?;
    Ok(format!(
        "{} nodes, {} edges, band [{:.4}, {:.4}], dev macro-F1 {:.3}",
        run.graph.len(),
        run.graph.n_edges(),
        run.thresholds.theta_neg,
        run.thresholds.theta_pos,
        run.thresholds.dev_f1
    ))
}

fn weak_label_stage(ctx: &mut Ctx) -> Result<String, StageError> {
    let schema = schema(ctx)?;
    let data = dataset(ctx, &schema, DataRole::ImageUnlabeled)?;
    let mut lfs: Vec<LabelingFunction> = read_lfs(open(&ctx.artifact(MINED_LFS)?)?)?
        .into_iter()
        .map(|(lf, _)| lf)
        .collect();
    let scores = if ctx.cfg.propagation.enabled {
        let t: Thresholds = read_json(&ctx.artifact(PROP_THRESHOLDS)?)?;
        let scores = PropagationScores::read_jsonl(open(&ctx.artifact(PROP_SCORES)?)?)?;
        lfs.push(as_lf(PROPAGATION_SCORES_REF, t.theta_pos, t.theta_neg)?);
        Some(scores)
    } else {
        None
    };
    if lfs.is_empty() {
        return Err(anyhow::anyhow!("no labeling functions: {MINED_LFS} is empty and propagation is disabled").into());
    }
    let truth = match ctx.cfg.data.resolve(DataRole::ImageUnlabeledTruth, ctx.out) {
        Some(p) if p.is_file() => Some(attach_truth(&data, &ctx.input(&p)?)?),
        _ => None,
    };
    let weak = weak_label(&lfs, &data, scores.as_ref(), &ctx.cfg.label_model)?;
    let prf = match &truth {
        Some(t) => Some(weak_label_prf(&weak.probs, t, 0.5, ctx.cfg.weak_label.prf_epsilon)?),
        None => None,
    };
    ctx.write(PROB_LABELS, weak.probs.to_jsonl().as_bytes())?;
    ctx.write(LABEL_MODEL, audit_jsonl(&weak.fit.params).as_bytes())?;
    ctx.write_json(
        WEAK_REPORT,
        &json!({
            "n_points": weak.matrix.n_rows(),
            "n_lfs": weak.matrix.n_cols(),
            "coverage": weak.matrix.coverage(),
            "pi": weak.fit.params.pi,
            "iterations": weak.fit.iterations,
            "converged": weak.fit.converged,
            "flipped": weak.fit.flipped,
            "log_likelihood": weak.fit.log_likelihood,
            "prf": prf,
        }),
    )?;
    let quality = match prf.and_then(|p| p.recall.zip(p.f1)) {
        Some((r, f)) => format!(", recall {r:.3}, F1 {f:.3}"),
        None => String::new(),
    };
    Ok(format!("{} LFs over {} points, pi {:.4}{quality}", lfs.len(), data.len(), weak.fit.params.pi))
}

fn load_weak(ctx: &mut Ctx) -> Result<ProbLabels, StageError> {
    Ok(ProbLabels::read_jsonl(open(&ctx.artifact(PROB_LABELS)?)?)?)
}

fn train_stage(ctx: &mut Ctx) -> Result<String, StageError> {
    let strategies = strategies(ctx.cfg);
    let supervised = strategies.contains(&Strategy::Supervised);
    let schema = schema(ctx)?;
    let text = dataset(ctx, &schema, DataRole::TextLabeled)?;
    let image = dataset(ctx, &schema, DataRole::ImageUnlabeled)?;
    let weak = load_weak(ctx)?;
    let pool = if supervised {
        Some(dataset(ctx, &schema, DataRole::ImageGoldPool)?)
    } else {
        None
    };
    let inputs = TrainInputs {
        text: &text,
        image: &image,
        weak: &weak,
        gold_pool: pool.as_ref(),
    };
    let mut reports = BTreeMap::new();
    for s in &strategies {
        let (model, report) = train_strategy(*s, &inputs, ctx.cfg)?;
        ctx.write(&model_path(*s), SavedModel::new(model).to_json().as_bytes())?;
        reports.insert(s.name(), report);
    }
    ctx.write_json(TRAIN_REPORT, &reports)?;
    Ok(format!("{} models", strategies.len()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub baseline: Option<String>,
    pub strategies: BTreeMap<String, MetricsReport>,
}

fn evaluate_stage(ctx: &mut Ctx) -> Result<String, StageError> {
    let schema = schema(ctx)?;
    let test = dataset(ctx, &schema, DataRole::ImageTest)?;
    let labels = test.gold_labels()?;
    let mut scores = BTreeMap::new();
    for s in strategies(ctx.cfg) {
        let path = ctx.artifact(&model_path(s))?;
        let model = SavedModel::from_json(&read_file(&path)?)?.model;
        scores.insert(s, model.score_dataset(&test)?);
    }
    let base = ctx.cfg.evaluate.baseline;
    let baseline = match scores.get(&base) {
        Some(sc) => Some((base.name(), auprc(sc, &labels)?)),
        None => None,
    };
    let mut out = BTreeMap::new();
    let mut line = Vec::new();
    for (s, sc) in &scores {
        let report = metrics_report(sc, &labels, baseline)?;
        ctx.write(&format!("reports/pr_{}.csv", s.name()), pr_curve_csv(&report.pr_curve).as_bytes())?;
        line.push(format!("{} {:.3}", s.name(), report.auprc));
        out.insert(s.name().to_string(), report);
    }
    ctx.write_json(
        METRICS_REPORT,
        &EvaluationReport {
            baseline: baseline.map(|(n, _)| n.to_string()),
            strategies: out,
        },
    )?;
    Ok(format!("test AUPRC: {}", line.join(", ")))
}

fn crossover_stage(ctx: &mut Ctx) -> Result<String, StageError> {
    let report: EvaluationReport = read_json(&ctx.artifact(METRICS_REPORT)?)?;
    let name = ctx.cfg.evaluate.cross_modal.name();
    let target = report
        .strategies
        .get(name)
        .ok_or_else(|| StageError::Config(format!("evaluate.cross_modal = {name} was not evaluated")))?
        .auprc;
    let schema = schema(ctx)?;
    let pool = dataset(ctx, &schema, DataRole::ImageGoldPool)?;
    let test = dataset(ctx, &schema, DataRole::ImageTest)?;
    let sizes: Vec<usize> = ctx.cfg.evaluate.crossover_sizes.iter().copied().filter(|&s| s <= pool.len()).collect();
    if sizes.is_empty() {
        return Err(StageError::Config(format!(
            "every evaluate.crossover_sizes entry exceeds the gold pool size {}",
            pool.len()
        )));
    }
    let result = cross_over(
        target,
        &pool,
        &test,
        &CrossOverConfig {
            sizes,
            repeats: ctx.cfg.evaluate.crossover_repeats,
            kind: ctx.cfg.model.kind,
            train: ctx.cfg.train.clone(),
            seed: ctx.cfg.seed,
        },
    )?;
    ctx.write_json(CROSSOVER_REPORT, &result)?;
    Ok(match result.cross_over_n {
        Some(n) => format!("supervised matches {name} (AUPRC {target:.3}) at {n} gold labels"),
        None => format!("no tested size matches {name} (AUPRC {target:.3})"),
    })
}

fn factor_stage(ctx: &mut Ctx) -> Result<String, StageError> {
    let schema = schema(ctx)?;
    let text = dataset(ctx, &schema, DataRole::TextLabeled)?;
    let image = dataset(ctx, &schema, DataRole::ImageUnlabeled)?;
    let test = dataset(ctx, &schema, DataRole::ImageTest)?;
    let weak = load_weak(ctx)?;
    let sets: Vec<(String, String)> = ctx
        .cfg
        .evaluate
        .factor_sets
        .iter()
        .map(|[m, t]| (m.clone(), t.clone()))
        .collect();
    let rows = factor_analysis(
        &sets,
        &[LabeledSet::gold(&text)?, LabeledSet::weak(&image, &weak)?],
        &test,
        ctx.cfg.model.kind,
        &ctx.cfg.train,
    )?;
    ctx.write_json(FACTOR_REPORT, &rows)?;
    let last = rows.last().expect("at least one row");
    Ok(format!("{} prefixes, full set relative AUPRC {:.3}", rows.len(), last.relative_auprc))
}

fn dispatch(ctx: &mut Ctx, stage: Stage) -> Result<String, StageError> {
    match stage {
        Stage::Synth => synth(ctx),
        Stage::Validate => validate_stage(ctx),
        Stage::Mine => mine(ctx),
        Stage::Propagate => propagate(ctx),
        Stage::WeakLabel => weak_label_stage(ctx),
        Stage::Train => train_stage(ctx),
        Stage::Evaluate => evaluate_stage(ctx),
        Stage::Crossover => crossover_stage(ctx),
        Stage::Factor => factor_stage(ctx),
        Stage::RunAll => unreachable!("run-all is expanded by run_stage"),
    }
}

/// The stages `run-all` chains, in order.
pub fn run_all_stages(cfg: &PipelineConfig) -> Vec<Stage> {
    let mut v = Vec::new();
    if cfg.data.generated {
        v.push(Stage::Synth);
    }
    v.extend([Stage::Validate, Stage::Mine]);
    if cfg.propagation.enabled {
        v.push(Stage::Propagate);
    }
    v.extend([Stage::WeakLabel, Stage::Train, Stage::Evaluate]);
    v
}

/// Dataset paths a stage cannot run without.
pub fn required_roles(stage: Stage, cfg: &PipelineConfig) -> Vec<DataRole> {
    use DataRole::*;
    let mut roles = match stage {
        Stage::Synth | Stage::RunAll => vec![],
        Stage::Validate => vec![Schema],
        Stage::Mine => vec![Schema, TextDev],
        Stage::Propagate if !cfg.propagation.enabled => vec![],
        Stage::Propagate => vec![Schema, TextLabeled, TextDev, ImageUnlabeled],
        Stage::WeakLabel => vec![Schema, ImageUnlabeled],
        Stage::Train => vec![Schema, TextLabeled, ImageUnlabeled],
        Stage::Evaluate => vec![Schema, ImageTest],
        Stage::Crossover => vec![Schema, ImageGoldPool, ImageTest],
        Stage::Factor => vec![Schema, TextLabeled, ImageUnlabeled, ImageTest],
    };
    if stage == Stage::Train && cfg.model.strategies.contains(&Strategy::Supervised) {
        roles.push(ImageGoldPool);
    }
    roles
}

/// Runs one stage (or the whole chain) against the run directory `out`,
/// returning a one-line summary per executed stage.
pub fn run_stage(stage: Stage, config: &PipelineConfig, out: &Path) -> Result<Vec<(Stage, String)>, StageError> {
    let cfg = config.clone().with_seed(config.seed);
    cfg.validate()?;
    let stages = if stage == Stage::RunAll { run_all_stages(&cfg) } else { vec![stage] };
    let missing: BTreeSet<&str> = stages
        .iter()
        .flat_map(|s| required_roles(*s, &cfg))
        .filter(|r| cfg.data.resolve(*r, out).is_none())
        .map(|r| r.field())
        .collect();
    if !missing.is_empty() {
        let names: Vec<String> = missing.iter().map(|f| format!("data.{f}")).collect();
        return Err(StageError::Config(format!("required paths not set: {}", names.join(", "))));
    }
    let _lock = RunLock::acquire(out)?;
    let mut done = Vec::new();
    for s in stages {
        let mut ctx = Ctx::new(out, &cfg, s)?;
        let summary = dispatch(&mut ctx, s)?;
        ctx.finish()?;
        done.push((s, summary));
    }
    Ok(done)
}
