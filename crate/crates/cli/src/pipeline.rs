//! Stage logic over in-memory values. The file-based stages in `run` wrap
//! these one to one.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use xmodal_core::graph::{as_lf, fit_norm_stats, Thresholds, PROPAGATION_SCORES_REF};
use xmodal_core::label_model::{
    apply_lfs, fit_label_model, predict_prob_labels, LabelModelConfig, LabelModelFit, ProbLabels, WeakLabelMatrix,
};
use xmodal_core::metrics::{auprc, weak_label_prf, Prf};
use xmodal_core::synth::{generate, SynthData};
use xmodal_core::train::{
    train_devise, train_early_fusion, train_intermediate_fusion, FusionModel, LabeledSet, TrainReport,
};
use xmodal_core::{
    build_graph, mine_lfs, propagate, tune_thresholds, Dataset, GraphConfig, LabelingFunction, LfStats,
    PropagationScores, Result, SimilarityGraph,
};

use crate::config::{PipelineConfig, Strategy};

/// Deterministic subsample of at most `max` points, kept in input order.
/// `max == 0` keeps everything.
pub fn seed_subset(data: &Dataset, max: usize, seed: u64) -> Dataset {
    if max == 0 || data.len() <= max {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, data.len(), max).into_vec();
    idx.sort_unstable();
    Dataset::new(
        data.schema.clone(),
        data.split,
        idx.into_iter().map(|i| data.points[i].clone()).collect(),
    )
}

pub struct PropagationRun {
    pub graph: SimilarityGraph,
    pub scores: PropagationScores,
    pub thresholds: Thresholds,
    pub lf: LabelingFunction,
}

/// Builds one graph over seeds, dev and targets, clamps the gold seeds,
/// propagates, and tunes the band thresholds on dev.
pub fn run_propagation(
    seeds: &Dataset,
    dev: &Dataset,
    targets: &[&Dataset],
    config: &GraphConfig,
) -> Result<PropagationRun> {
    let mut all: Vec<&Dataset> = vec![seeds, dev];
    all.extend_from_slice(targets);
    let norm = fit_norm_stats(&all);
    let graph = build_graph(&all, config, &norm)?;
    let seed_map: BTreeMap<String, f64> = seeds
        .points
        .iter()
        .zip(seeds.gold_labels()?)
        .map(|(p, l)| (p.id.clone(), l.as_target()))
        .collect();
    let scores = propagate(&graph, &seed_map, config)?;
    let thresholds = tune_thresholds(&scores, dev)?;
    let lf = as_lf(PROPAGATION_SCORES_REF, thresholds.theta_pos, thresholds.theta_neg)?;
    Ok(PropagationRun {
        graph,
        scores,
        thresholds,
        lf,
    })
}

pub struct WeakLabels {
    pub matrix: WeakLabelMatrix,
    pub fit: LabelModelFit,
    pub probs: ProbLabels,
}

pub fn weak_label(
    lfs: &[LabelingFunction],
    data: &Dataset,
    scores: Option<&PropagationScores>,
    config: &LabelModelConfig,
) -> Result<WeakLabels> {
    let matrix = apply_lfs(lfs, data, scores)?;
    let fit = fit_label_model(&matrix, config)?;
    let probs = predict_prob_labels(&fit.params, &matrix)?;
    Ok(WeakLabels { matrix, fit, probs })
}

/// Training inputs shared by every strategy.
pub struct TrainInputs<'a> {
    pub text: &'a Dataset,
    pub image: &'a Dataset,
    pub weak: &'a ProbLabels,
    pub gold_pool: Option<&'a Dataset>,
}

pub fn train_strategy(
    strategy: Strategy,
    inputs: &TrainInputs,
    config: &PipelineConfig,
) -> Result<(FusionModel, BTreeMap<String, TrainReport>)> {
    let kind = config.model.kind;
    let text = || LabeledSet::gold(inputs.text);
    let image = || LabeledSet::weak(inputs.image, inputs.weak);
    let single = |r: (FusionModel, TrainReport)| (r.0, BTreeMap::from([("model".to_string(), r.1)]));
    Ok(match strategy {
        Strategy::TextTransfer => single(train_early_fusion(&[text()?], kind, &config.train, None)?),
        Strategy::WsImage => single(train_early_fusion(&[image()?], kind, &config.train, None)?),
        Strategy::Early => single(train_early_fusion(&[text()?, image()?], kind, &config.train, None)?),
        Strategy::Intermediate => train_intermediate_fusion(&[text()?, image()?], &config.intermediate, None)?,
        Strategy::Devise => train_devise(&[text()?], &[image()?], &config.devise)?,
        Strategy::Supervised => {
            let pool = inputs.gold_pool.ok_or_else(|| {
                xmodal_core::Error::Config("the supervised strategy needs data.image_gold_pool".into())
            })?;
            single(train_early_fusion(&[LabeledSet::gold(pool)?], kind, &config.train, None)?)
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutcome {
    pub seed: u64,
    pub n_mined: usize,
    pub thresholds: Option<Thresholds>,
    pub auprc: BTreeMap<String, f64>,
    pub weak_prf: Option<Prf>,
}

fn with_truth(data: &SynthData) -> Dataset {
    let mut d = data.image_unlabeled.clone();
    for (p, &l) in d.points.iter_mut().zip(&data.image_unlabeled_truth) {
        p.gold_label = Some(l);
    }
    d
}

pub fn mine(dev: &Dataset, config: &PipelineConfig) -> Result<Vec<(LabelingFunction, LfStats)>> {
    mine_lfs(dev, &config.miner)
}

/// Mined LFs plus, if enabled, the propagation LF and its scores.
pub struct Supervision {
    pub mined: Vec<(LabelingFunction, LfStats)>,
    pub propagation: Option<PropagationRun>,
}

impl Supervision {
    pub fn lfs(&self, with_propagation: bool) -> Vec<LabelingFunction> {
        let mut lfs: Vec<LabelingFunction> = self.mined.iter().map(|(lf, _)| lf.clone()).collect();
        if with_propagation {
            if let Some(run) = &self.propagation {
                lfs.push(run.lf.clone());
            }
        }
        lfs
    }

    pub fn scores(&self) -> Option<&PropagationScores> {
        self.propagation.as_ref().map(|r| &r.scores)
    }
}

pub fn supervise(data: &SynthData, config: &PipelineConfig) -> Result<Supervision> {
    let mined = mine(&data.text_dev, config)?;
    let propagation = if config.propagation.enabled {
        let seeds = seed_subset(&data.text_labeled, config.propagation.max_seeds, config.seed);
        Some(run_propagation(&seeds, &data.text_dev, &[&data.image_unlabeled], &config.graph)?)
    } else {
        None
    };
    Ok(Supervision { mined, propagation })
}

/// Weak-label P/R/F1 on the unlabeled images against their latent labels.
pub fn weak_label_quality(
    data: &SynthData,
    supervision: &Supervision,
    with_propagation: bool,
    config: &PipelineConfig,
) -> Result<Prf> {
    let lfs = supervision.lfs(with_propagation);
    let weak = weak_label(&lfs, &data.image_unlabeled, supervision.scores(), &config.label_model)?;
    weak_label_prf(&weak.probs, &with_truth(data), 0.5, config.weak_label.prf_epsilon)
}

/// The whole pipeline in memory on generated data: test AUPRC per strategy
/// and weak-label quality.
pub fn run_experiment(config: &PipelineConfig) -> Result<ExperimentOutcome> {
    let config = config.clone().with_seed(config.seed);
    let data = generate(&config.synth)?;
    let supervision = supervise(&data, &config)?;
    let lfs = supervision.lfs(true);
    let weak = weak_label(&lfs, &data.image_unlabeled, supervision.scores(), &config.label_model)?;
    let weak_prf = weak_label_prf(&weak.probs, &with_truth(&data), 0.5, config.weak_label.prf_epsilon).ok();

    let inputs = TrainInputs {
        text: &data.text_labeled,
        image: &data.image_unlabeled,
        weak: &weak.probs,
        gold_pool: Some(&data.image_gold_pool),
    };
    let test_labels = data.image_test.gold_labels()?;
    let strategies: BTreeSet<Strategy> = config.model.strategies.iter().copied().collect();
    let mut out = BTreeMap::new();
    for s in strategies {
        let (model, _) = train_strategy(s, &inputs, &config)?;
        out.insert(s.name().to_string(), auprc(&model.score_dataset(&data.image_test)?, &test_labels)?);
    }
    Ok(ExperimentOutcome {
        seed: config.seed,
        n_mined: supervision.mined.len(),
        thresholds: supervision.propagation.as_ref().map(|r| r.thresholds),
        auprc: out,
        weak_prf,
    })
}
