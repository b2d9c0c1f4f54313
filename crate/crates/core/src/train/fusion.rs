//! Cross-modal training strategies: early fusion over the merged feature
//! space, intermediate fusion of frozen per-modality models through a head,
//! and an adapted DeViSE that projects a new-modality model into the
//! penultimate space of a frozen existing-modality model.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::{servable_features_for, train_model, LabeledSet, Model};
use super::{train, ModelKind, Network, SparseRows, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::par;
use crate::types::{DataPoint, Dataset, FORMAT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub modality: String,
    pub model: Model,
}

/// Affine map `x = W y + c`, W stored row-major with `out_dim` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Projection {
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.in_dim {
            return Err(Error::WidthMismatch {
                expected: self.in_dim,
                got: y.len(),
            });
        }
        Ok((0..self.out_dim)
            .map(|r| {
                let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
                self.bias[r] + row.iter().zip(y).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect())
    }

    /// Frobenius distance of W from the identity.
    pub fn distance_from_identity(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.out_dim {
            for c in 0..self.in_dim {
                let target = if r == c { 1.0 } else { 0.0 };
                s += (self.weights[r * self.in_dim + c] - target).powi(2);
            }
        }
        s.sqrt()
    }
}

/// Ridge least squares for `min sum_i ||W y_i + c - x_i||^2 + ridge * n * ||W||^2`.
/// The bias is not penalized.
pub fn fit_projection(ys: &[Vec<f64>], xs: &[Vec<f64>], ridge: f64) -> Result<Projection> {
    if ys.is_empty() || ys.len() != xs.len() {
        return Err(Error::Fusion(format!("projection needs paired activations, got {} and {}", ys.len(), xs.len())));
    }
    if !(ridge >= 0.0) {
        return Err(Error::Config("ridge must be >= 0".into()));
    }
    let (n, p, q) = (ys.len(), ys[0].len(), xs[0].len());
    if ys.iter().any(|y| y.len() != p) || xs.iter().any(|x| x.len() != q) {
        return Err(Error::Fusion("activation widths are inconsistent".into()));
    }
    let z = DMatrix::from_fn(n, p + 1, |i, j| if j < p { ys[i][j] } else { 1.0 });
    let x = DMatrix::from_fn(n, q, |i, j| xs[i][j]);
    let mut gram = z.tr_mul(&z);
    for j in 0..p {
        gram[(j, j)] += ridge * n as f64;
    }
    let rhs = z.tr_mul(&x);
    let theta = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Fusion("projection normal equations are singular; raise the ridge".into()))?,
    };
    // theta is (p+1) x q; W = theta[..p]^T
    let mut weights = vec![0.0; q * p];
    for r in 0..q {
        for c in 0..p {
            weights[r * p + c] = theta[(c, r)];
        }
    }
    let bias = (0..q).map(|r| theta[(p, r)]).collect();
    Ok(Projection {
        in_dim: p,
        out_dim: q,
        weights,
        bias,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum FusionModel {
    Early {
        model: Model,
    },
    Intermediate {
        members: Vec<Member>,
        head: Network,
    },
    Devise {
        existing: Model,
        new: Model,
        projection: Projection,
    },
}

fn concat_penultimates(members: &[Member], point: &DataPoint) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for m in members {
        out.extend(m.model.penultimate(point)?);
    }
    Ok(out)
}

impl FusionModel {
    pub fn strategy(&self) -> &'static str {
        match self {
            FusionModel::Early { .. } => "early",
            FusionModel::Intermediate { .. } => "intermediate",
            FusionModel::Devise { .. } => "devise",
        }
    }

    pub fn score(&self, point: &DataPoint) -> Result<f64> {
        match self {
            FusionModel::Early { model } => model.score(point),
            FusionModel::Intermediate { members, head } => head.score_dense(&concat_penultimates(members, point)?),
            FusionModel::Devise {
                existing,
                new,
                projection,
            } => existing.network.head_score(&projection.apply(&new.penultimate(point)?)?),
        }
    }

    pub fn score_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        match self {
            FusionModel::Early { model } => model.score_dataset(data),
            _ => par::map(&data.points, |p| self.score(p)).into_iter().collect(),
        }
    }
}

/// A versioned model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedModel {
    pub format_version: u32,
    pub model: FusionModel,
}

impl SavedModel {
    pub fn new(model: FusionModel) -> Self {
        SavedModel {
            format_version: FORMAT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let saved: SavedModel = serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        if saved.format_version != FORMAT_VERSION {
            return Err(Error::Parse {
                line: 1,
                reason: format!("unsupported model format_version {}", saved.format_version),
            });
        }
        Ok(saved)
    }
}

fn union_modalities(sets: &[LabeledSet]) -> BTreeSet<String> {
    sets.iter().flat_map(|s| s.modalities()).collect()
}

/// One model over the merged servable feature space of every modality
/// present in `sets`. Features a modality lacks encode as zeros.
pub fn train_early_fusion(
    sets: &[LabeledSet],
    kind: ModelKind,
    config: &TrainConfig,
    dev: Option<&LabeledSet>,
) -> Result<(FusionModel, TrainReport)> {
    if sets.iter().all(|s| s.data.is_empty()) {
        return Err(Error::Fusion("early fusion over an empty union of datasets".into()));
    }
    let schema = &sets[0].data.schema;
    let features = servable_features_for(schema, &union_modalities(sets));
    let (model, report) = train_model(sets, &features, kind, config, dev)?;
    Ok((FusionModel::Early { model }, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntermediateConfig {
    pub member_kind: ModelKind,
    pub member: TrainConfig,
    pub head_kind: ModelKind,
    pub head: TrainConfig,
}

impl Default for IntermediateConfig {
    fn default() -> Self {
        IntermediateConfig {
            member_kind: ModelKind::Mlp,
            member: TrainConfig::default(),
            head_kind: ModelKind::Logreg,
            head: TrainConfig::default(),
        }
    }
}

/// Splits labeled sets by point modality into owned datasets.
fn split_by_modality(sets: &[LabeledSet]) -> BTreeMap<String, (Dataset, Vec<f64>)> {
    let mut out: BTreeMap<String, (Dataset, Vec<f64>)> = BTreeMap::new();
    for s in sets {
        for (p, &t) in s.data.points.iter().zip(&s.targets) {
            let entry = out
                .entry(p.modality.clone())
                .or_insert_with(|| (Dataset::new(s.data.schema.clone(), s.data.split, Vec::new()), Vec::new()));
            entry.0.points.push(p.clone());
            entry.1.push(t);
        }
    }
    out
}

fn head_rows(members: &[Member], points: &[&DataPoint]) -> Result<SparseRows> {
    let width = members.iter().map(|m| m.model.network.penultimate_width()).sum();
    let dense: Vec<Vec<f64>> = par::map(points, |p| concat_penultimates(members, p))
        .into_iter()
        .collect::<Result<_>>()?;
    SparseRows::from_dense(width, &dense)
}

/// Pass 1 trains one model per modality on that modality's points; pass 2
/// freezes them and trains a head on their concatenated penultimate
/// activations over every point.
pub fn train_intermediate_fusion(
    sets: &[LabeledSet],
    config: &IntermediateConfig,
    dev: Option<&LabeledSet>,
) -> Result<(FusionModel, BTreeMap<String, TrainReport>)> {
    let groups = split_by_modality(sets);
    if groups.len() < 2 {
        return Err(Error::Fusion(format!(
            "intermediate fusion needs at least 2 modalities, got {}; use early fusion",
            groups.len()
        )));
    }
    let mut reports = BTreeMap::new();
    let mut members = Vec::new();
    for (modality, (data, targets)) in &groups {
        let set = LabeledSet {
            data,
            targets: targets.clone(),
        };
        let features = servable_features_for(&data.schema, &BTreeSet::from([modality.clone()]));
        let (model, report) = train_model(&[set], &features, config.member_kind, &config.member, None)?;
        reports.insert(format!("member:{modality}"), report);
        members.push(Member {
            modality: modality.clone(),
            model,
        });
    }

    let points: Vec<&DataPoint> = sets.iter().flat_map(|s| s.data.points.iter()).collect();
    let targets: Vec<f64> = sets.iter().flat_map(|s| s.targets.iter().copied()).collect();
    let x = head_rows(&members, &points)?;
    let dev_rows = match dev {
        Some(d) => Some((head_rows(&members, &d.data.points.iter().collect::<Vec<_>>())?, d.targets.as_slice())),
        None => None,
    };
    let (head, report) = train(
        &x,
        &targets,
        config.head_kind,
        dev_rows.as_ref().map(|(x, t)| (x, *t)),
        &config.head,
    )?;
    reports.insert("head".into(), report);
    Ok((FusionModel::Intermediate { members, head }, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviseConfig {
    pub existing_kind: ModelKind,
    pub existing: TrainConfig,
    pub new_kind: ModelKind,
    pub new: TrainConfig,
    pub ridge: f64,
}

impl Default for DeviseConfig {
    fn default() -> Self {
        DeviseConfig {
            existing_kind: ModelKind::Mlp,
            existing: TrainConfig::default(),
            new_kind: ModelKind::Mlp,
            new: TrainConfig::default(),
            ridge: 1e-4,
        }
    }
}

/// Stages 2 and 3 given a trained existing-modality model, which is moved
/// into the result untouched.
pub fn devise_from_existing(
    existing: Model,
    new_sets: &[LabeledSet],
    config: &DeviseConfig,
) -> Result<(FusionModel, TrainReport)> {
    let Some(first) = new_sets.first() else {
        return Err(Error::Fusion("DeViSE needs new-modality data".into()));
    };
    let schema = first.data.schema.clone();
    let new_features = servable_features_for(&schema, &union_modalities(new_sets));
    let shared: Vec<&str> = existing
        .encoding
        .feature_ids()
        .filter(|f| new_features.contains(*f))
        .collect();
    if shared.is_empty() {
        return Err(Error::Fusion("existing and new modalities share no features".into()));
    }
    let (new, report) = train_model(new_sets, &new_features, config.new_kind, &config.new, None)?;

    let points: Vec<&DataPoint> = new_sets.iter().flat_map(|s| s.data.points.iter()).collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = par::map(&points, |p| Ok((new.penultimate(p)?, existing.penultimate(p)?)))
        .into_iter()
        .collect::<Result<_>>()?;
    let (ys, xs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let projection = fit_projection(&ys, &xs, config.ridge)?;
    Ok((
        FusionModel::Devise {
            existing,
            new,
            projection,
        },
        report,
    ))
}

/// Stage 1 trains the existing-modality model by early fusion and freezes
/// it; stages 2 and 3 follow [`devise_from_existing`].
pub fn train_devise(
    existing_sets: &[LabeledSet],
    new_sets: &[LabeledSet],
    config: &DeviseConfig,
) -> Result<(FusionModel, BTreeMap<String, TrainReport>)> {
    let (early, report_a) = train_early_fusion(existing_sets, config.existing_kind, &config.existing, None)?;
    let FusionModel::Early { model: existing } = early else {
        unreachable!("early fusion returns an early model")
    };
    let (model, report_b) = devise_from_existing(existing, new_sets, config)?;
    Ok((model, BTreeMap::from([("existing".into(), report_a), ("new".into(), report_b)])))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::label_model::ProbLabels;
    use crate::synth::{generate, SynthConfig};
    use crate::train::Activation;

    fn small() -> crate::synth::SynthData {
        generate(&SynthConfig {
            n_text: 600,
            n_dev: 200,
            n_image_unlabeled: 400,
            n_image_test: 300,
            n_image_gold_pool: 10,
            positive_rate: 0.3,
            seed: 4,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn truth_labels(d: &crate::synth::SynthData) -> ProbLabels {
        ProbLabels::new(
            d.image_unlabeled.points.iter().map(|p| p.id.clone()).collect(),
            d.image_unlabeled_truth.iter().map(|l| l.as_target()).collect(),
        )
        .unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 5,
            ..Default::default()
        }
    }

    #[test]
    fn projection_of_matched_activations_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ys: Vec<Vec<f64>> = (0..500).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let p = fit_projection(&ys, &ys, 1e-6).unwrap();
        assert!(p.distance_from_identity() <= 0.05, "{}", p.distance_from_identity());
        assert!(p.bias.iter().all(|b| b.abs() < 1e-3));
        let y = &ys[0];
        let x = p.apply(y).unwrap();
        assert!(x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-3));
    }

    #[test]
    fn early_fusion_on_text_alone_equals_plain_training() {
        let d = small();
        let text = LabeledSet::gold(&d.text_labeled).unwrap();
        let (fused, _) = train_early_fusion(&[text.clone()], ModelKind::Logreg, &quick(), None).unwrap();
        let features = servable_features_for(&d.text_labeled.schema, &BTreeSet::from(["text".to_string()]));
        let (plain, _) = train_model(&[text], &features, ModelKind::Logreg, &quick(), None).unwrap();
        assert_eq!(fused, FusionModel::Early { model: plain });
    }

    #[test]
    fn early_fusion_merges_modality_slots() {
        let d = small();
        let sets = [
            LabeledSet::gold(&d.text_labeled).unwrap(),
            LabeledSet::weak(&d.image_unlabeled, &truth_labels(&d)).unwrap(),
        ];
        let (fused, _) = train_early_fusion(&sets, ModelKind::Logreg, &quick(), None).unwrap();
        let FusionModel::Early { model } = fused else { panic!() };
        let emb = model.encoding.feature(crate::synth::EMBEDDING_FEATURE).unwrap();
        let v = model.encoding.encode(&d.text_labeled.points[0]);
        assert!(v[emb.offset..emb.offset + emb.width()].iter().all(|&x| x == 0.0));
        assert!(model.encoding.feature_ids().all(|f| d.text_labeled.schema.get(f).unwrap().servable));
        assert!(train_early_fusion(&[], ModelKind::Logreg, &quick(), None).is_err());
    }

    #[test]
    fn intermediate_head_width_is_sum_of_penultimates() {
        let d = small();
        let sets = [
            LabeledSet::gold(&d.text_labeled).unwrap(),
            LabeledSet::weak(&d.image_unlabeled, &truth_labels(&d)).unwrap(),
        ];
        for member_kind in [ModelKind::Logreg, ModelKind::Mlp] {
            let cfg = IntermediateConfig {
                member_kind,
                member: quick(),
                head: quick(),
                ..Default::default()
            };
            let (fm, _) = train_intermediate_fusion(&sets, &cfg, None).unwrap();
            let FusionModel::Intermediate { members, head } = &fm else { panic!() };
            let sum: usize = members.iter().map(|m| m.model.network.penultimate_width()).sum();
            assert_eq!(head.input_width, sum);
            let s = fm.score(&d.image_test.points[0]).unwrap();
            assert!(s > 0.0 && s < 1.0);
        }
        let err = train_intermediate_fusion(&sets[..1], &IntermediateConfig::default(), None).unwrap_err();
        assert!(err.to_string().contains("early fusion"));
    }

    #[test]
    fn passthrough_members_match_early_fusion() {
        let d = small();
        let sets = [
            LabeledSet::gold(&d.text_labeled).unwrap(),
            LabeledSet::weak(&d.image_unlabeled, &truth_labels(&d)).unwrap(),
        ];
        let test_truth = ProbLabels::new(
            d.image_test.points.iter().map(|p| p.id.clone()).collect(),
            d.image_test.gold_labels().unwrap().iter().map(|l| l.as_target()).collect(),
        )
        .unwrap();
        let dev = LabeledSet::weak(&d.image_test, &test_truth).unwrap();
        let head_cfg = TrainConfig {
            epochs: 40,
            ..Default::default()
        };
        let (_, early_report) = train_early_fusion(&sets, ModelKind::Logreg, &head_cfg, Some(&dev)).unwrap();

        // Identity-initialized MLP members with no training: each penultimate
        // is tanh of the member's own encoding.
        let mut members = Vec::new();
        for (modality, (data, targets)) in &split_by_modality(&sets) {
            let f = servable_features_for(&data.schema, &BTreeSet::from([modality.clone()]));
            let width = crate::encoding::fit_encoding(&[data], &f).unwrap().width;
            let cfg = TrainConfig {
                epochs: 0,
                hidden_width: width,
                identity_init: true,
                activation: Activation::Tanh,
                ..Default::default()
            };
            let set = LabeledSet {
                data,
                targets: targets.clone(),
            };
            let (model, _) = train_model(&[set], &f, ModelKind::Mlp, &cfg, None).unwrap();
            members.push(Member {
                modality: modality.clone(),
                model,
            });
        }
        let points: Vec<&DataPoint> = sets.iter().flat_map(|s| s.data.points.iter()).collect();
        let targets: Vec<f64> = sets.iter().flat_map(|s| s.targets.iter().copied()).collect();
        let x = head_rows(&members, &points).unwrap();
        let dx = head_rows(&members, &d.image_test.points.iter().collect::<Vec<_>>()).unwrap();
        let (_, head_report) = train(&x, &targets, ModelKind::Logreg, Some((&dx, &dev.targets)), &head_cfg).unwrap();
        let a = *early_report.dev_loss.last().unwrap();
        let b = *head_report.dev_loss.last().unwrap();
        assert!((a - b).abs() <= 0.05 * a, "early {a} vs passthrough head {b}");
    }

    #[test]
    fn devise_freezes_existing_model() {
        let d = small();
        let text = [LabeledSet::gold(&d.text_labeled).unwrap()];
        let image = [LabeledSet::weak(&d.image_unlabeled, &truth_labels(&d)).unwrap()];
        let cfg = DeviseConfig {
            existing: quick(),
            new: quick(),
            ..Default::default()
        };
        let (early, _) = train_early_fusion(&text, cfg.existing_kind, &cfg.existing, None).unwrap();
        let FusionModel::Early { model: a } = early else { panic!() };
        let before = serde_json::to_vec(&a).unwrap();
        let (fm, _) = devise_from_existing(a, &image, &cfg).unwrap();
        let FusionModel::Devise { existing, .. } = &fm else { panic!() };
        assert_eq!(serde_json::to_vec(existing).unwrap(), before);
        let s = fm.score(&d.image_test.points[0]).unwrap();
        assert!(s > 0.0 && s < 1.0);

        let (full, reports) = train_devise(&text, &image, &cfg).unwrap();
        assert_eq!(full, fm);
        assert!(reports.contains_key("existing") && reports.contains_key("new"));
    }

    #[test]
    fn devise_without_shared_features_fails() {
        let d = small();
        let text = [LabeledSet::gold(&d.text_labeled).unwrap()];
        let only_emb = d
            .image_unlabeled
            .restrict_features(|_, f| f == crate::synth::EMBEDDING_FEATURE);
        let image_set = LabeledSet::weak(&only_emb, &truth_labels(&d)).unwrap();
        // shrink the existing model's encoding to nothing the image side has
        let (early, _) = train_early_fusion(&text, ModelKind::Logreg, &quick(), None).unwrap();
        let FusionModel::Early { model: mut a } = early else { panic!() };
        a.encoding.features.retain(|f| f.feature_id.starts_with("ns"));
        let ok = devise_from_existing(a, &[image_set], &DeviseConfig::default());
        assert!(matches!(ok, Err(Error::Fusion(_))));
    }

    #[test]
    fn saved_model_roundtrip_and_servability() {
        let d = small();
        let sets = [
            LabeledSet::gold(&d.text_labeled).unwrap(),
            LabeledSet::weak(&d.image_unlabeled, &truth_labels(&d)).unwrap(),
        ];
        let (fm, _) = train_early_fusion(&sets, ModelKind::Mlp, &quick(), None).unwrap();
        let saved = SavedModel::new(fm.clone());
        let back = SavedModel::from_json(&saved.to_json()).unwrap();
        assert_eq!(back, saved);
        let p = &d.image_test.points[3];
        let stripped = d.image_test.restrict_features(|_, f| d.image_test.schema.get(f).unwrap().servable);
        let q = &stripped.points[3];
        assert_eq!(fm.score(p).unwrap(), fm.score(q).unwrap());
        assert_eq!(fm.score(p).unwrap(), back.model.score(p).unwrap());
        let bumped = saved.to_json().replace("\"format_version\":1", "\"format_version\":9");
        assert!(SavedModel::from_json(&bumped).is_err());
    }
}
