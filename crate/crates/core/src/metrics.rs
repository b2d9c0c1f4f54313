//! Precision-recall curves, AUPRC, weak-label quality, cross-over and factor
//! analysis.

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_model::ProbLabels;
use crate::par;
use crate::train::{train_model, LabeledSet, ModelKind, TrainConfig};
use crate::types::{Dataset, Label};

/// (recall, precision) after each tie group of the descending-score sweep.
struct Sweep {
    points: Vec<(f64, f64)>,
    /// (tp added by the group, tp so far, fired so far)
    groups: Vec<(usize, usize, usize)>,
    n_pos: usize,
}

fn sweep(scores: &[f64], labels: &[Label]) -> Result<Sweep> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Metric(format!("non-finite score {bad}")));
    }
    let n_pos = labels.iter().filter(|&&l| l == Label::Pos).count();
    if n_pos == 0 {
        return Err(Error::Metric("precision-recall needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fired) = (0, 0);
    let mut groups = Vec::new();
    let mut points = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let before = tp;
        while i < order.len() && scores[order[i]] == s {
            tp += (labels[order[i]] == Label::Pos) as usize;
            fired += 1;
            i += 1;
        }
        groups.push((tp - before, tp, fired));
        points.push((tp as f64 / n_pos as f64, tp as f64 / fired as f64));
    }
    Ok(Sweep { points, groups, n_pos })
}

/// PR curve with equal scores treated as one threshold; the first point is
/// (0, precision of the first group).
pub fn pr_curve(scores: &[f64], labels: &[Label]) -> Result<Vec<(f64, f64)>> {
    let s = sweep(scores, labels)?;
    let mut out = Vec::with_capacity(s.points.len() + 1);
    out.push((0.0, s.points[0].1));
    out.extend(s.points);
    Ok(out)
}

/// Error-free transformation of `a + b`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Average precision `sum_k (R_k - R_{k-1}) P_k`. Each term is
/// `dtp * tp / (fired * n_pos)` over integers; the sum is compensated
/// (including each division's residual) so the result is correctly rounded
/// in all but pathological cases.
pub fn auprc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let s = sweep(scores, labels)?;
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &(dtp, tp, fired) in &s.groups {
        if dtp == 0 {
            continue;
        }
        let num = (dtp * tp) as f64;
        let den = (fired * s.n_pos) as f64;
        let q = num / den;
        let residual = (-q).mul_add(den, num) / den;
        let (t, e) = two_sum(sum, q);
        sum = t;
        comp += e + residual;
    }
    Ok(sum + comp)
}

pub fn pr_curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("recall,precision\n");
    for (r, p) in curve {
        out.push_str(&format!("{r},{p}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    /// None when nothing is labeled positive.
    pub precision: Option<f64>,
    /// None when every point abstains.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub coverage: f64,
    pub n: usize,
}

/// Positive-class P/R/F1 of thresholded probabilistic labels. Points with
/// `|p - threshold| <= epsilon` abstain.
pub fn weak_label_prf(prob: &ProbLabels, gold: &Dataset, threshold: f64, epsilon: f64) -> Result<Prf> {
    if !(epsilon >= 0.0) {
        return Err(Error::Config("epsilon must be >= 0".into()));
    }
    let gold_by_id: HashMap<&str, Option<Label>> = gold.points.iter().map(|p| (p.id.as_str(), p.gold_label)).collect();
    let (mut tp, mut fp, mut pos, mut covered) = (0usize, 0usize, 0usize, 0usize);
    for (id, &p) in prob.ids.iter().zip(&prob.p) {
        let y = gold_by_id
            .get(id.as_str())
            .copied()
            .flatten()
            .ok_or_else(|| Error::Metric(format!("no gold label for {id:?}")))?;
        pos += (y == Label::Pos) as usize;
        if (p - threshold).abs() <= epsilon {
            continue;
        }
        covered += 1;
        if p > threshold {
            if y == Label::Pos {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    if pos == 0 {
        return Err(Error::UndefinedRecall { label: 1 });
    }
    let n = prob.len();
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (covered > 0).then(|| tp as f64 / pos as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Ok(Prf {
        precision,
        recall,
        f1,
        coverage: covered as f64 / n.max(1) as f64,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auprc: f64,
    pub pr_curve: Vec<(f64, f64)>,
    pub prf: Option<Prf>,
    pub relative_auprc: Option<f64>,
    pub baseline: Option<String>,
}

pub fn metrics_report(scores: &[f64], labels: &[Label], baseline: Option<(&str, f64)>) -> Result<MetricsReport> {
    let a = auprc(scores, labels)?;
    Ok(MetricsReport {
        auprc: a,
        pr_curve: pr_curve(scores, labels)?,
        prf: None,
        relative_auprc: baseline.map(|(_, b)| a / b),
        baseline: baseline.map(|(name, _)| name.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossOverResult {
    pub sample_sizes: Vec<usize>,
    /// Mean test AUPRC per size.
    pub supervised_auprc: Vec<f64>,
    /// Every repeat, per size.
    pub supervised_runs: Vec<Vec<f64>>,
    pub cross_modal_auprc: f64,
    pub cross_over_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossOverConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub kind: ModelKind,
    pub train: TrainConfig,
    pub seed: u64,
}

/// Fully supervised models on seeded subsamples of `gold_pool`, compared
/// against a cross-modal AUPRC on `test`.
pub fn cross_over(cross_modal_auprc: f64, gold_pool: &Dataset, test: &Dataset, config: &CrossOverConfig) -> Result<CrossOverResult> {
    if config.repeats == 0 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    if config.sizes.is_empty() || config.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sizes must be non-empty and strictly increasing".into()));
    }
    if config.sizes.iter().any(|&s| s == 0 || s > gold_pool.len()) {
        return Err(Error::Config(format!("sizes must be in 1..={}", gold_pool.len())));
    }
    let pool_targets = LabeledSet::gold(gold_pool)?.targets;
    let test_labels = test.gold_labels()?;
    let modalities: BTreeSet<String> = gold_pool.points.iter().map(|p| p.modality.clone()).collect();
    let features = crate::train::servable_features_for(&gold_pool.schema, &modalities);

    let cells: Vec<(usize, usize)> = (0..config.sizes.len())
        .flat_map(|s| (0..config.repeats).map(move |r| (s, r)))
        .collect();
    let results = par::map(&cells, |&(si, r)| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream((si * config.repeats + r) as u64 + 1);
        let mut idx = rand::seq::index::sample(&mut rng, gold_pool.len(), config.sizes[si]).into_vec();
        idx.sort_unstable();
        let sub = Dataset::new(
            gold_pool.schema.clone(),
            gold_pool.split,
            idx.iter().map(|&i| gold_pool.points[i].clone()).collect(),
        );
        let set = LabeledSet {
            data: &sub,
            targets: idx.iter().map(|&i| pool_targets[i]).collect(),
        };
        let (model, _) = train_model(&[set], &features, config.kind, &config.train, None)?;
        auprc(&model.score_dataset(test)?, &test_labels)
    });
    let results: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    let runs: Vec<Vec<f64>> = results.chunks(config.repeats).map(<[f64]>::to_vec).collect();
    let means: Vec<f64> = runs.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let cross_over_n = config
        .sizes
        .iter()
        .zip(&means)
        .find(|(_, &m)| m >= cross_modal_auprc)
        .map(|(&s, _)| s);
    Ok(CrossOverResult {
        sample_sizes: config.sizes.clone(),
        supervised_auprc: means,
        supervised_runs: runs,
        cross_modal_auprc,
        cross_over_n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    /// The prefix of (modality, feature-set) pairs, e.g. `text:A+image:E`.
    pub config: String,
    pub features: Vec<String>,
    pub auprc: f64,
    pub relative_auprc: f64,
}

/// Trains one model per prefix of `feature_sets` on the merged training
/// sets; relative AUPRC is against the first prefix.
pub fn factor_analysis(
    feature_sets: &[(String, String)],
    sets: &[LabeledSet],
    test: &Dataset,
    kind: ModelKind,
    config: &TrainConfig,
) -> Result<Vec<FactorRow>> {
    if feature_sets.is_empty() {
        return Err(Error::Config("factor analysis needs at least one feature set".into()));
    }
    let Some(first) = sets.first() else {
        return Err(Error::InvalidData("no training sets".into()));
    };
    let schema = first.data.schema.clone();
    for (_, tag) in feature_sets {
        if !schema.features().iter().any(|f| f.feature_set.as_deref() == Some(tag.as_str())) {
            return Err(Error::Schema(format!("no feature carries feature_set {tag:?}")));
        }
    }
    let test_labels = test.gold_labels()?;
    let prefixes: Vec<usize> = (1..=feature_sets.len()).collect();
    let rows = par::map(&prefixes, |&k| -> Result<FactorRow> {
        let chosen = &feature_sets[..k];
        let features: BTreeSet<String> = schema
            .features()
            .iter()
            .filter(|f| {
                f.servable
                    && chosen
                        .iter()
                        .any(|(m, t)| f.feature_set.as_deref() == Some(t.as_str()) && f.modalities.contains(m))
            })
            .map(|f| f.feature_id.clone())
            .collect();
        let (model, _) = train_model(sets, &features, kind, config, None)?;
        let a = auprc(&model.score_dataset(test)?, &test_labels)?;
        Ok(FactorRow {
            config: chosen.iter().map(|(m, t)| format!("{m}:{t}")).collect::<Vec<_>>().join("+"),
            features: features.into_iter().collect(),
            auprc: a,
            relative_auprc: f64::NAN,
        })
    });
    let mut rows: Vec<FactorRow> = rows.into_iter().collect::<Result<_>>()?;
    let base = rows[0].auprc;
    for r in &mut rows {
        r.relative_auprc = r.auprc / base;
    }
    Ok(rows)
}
