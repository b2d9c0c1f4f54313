//! Deterministic synthetic text/image benchmark with a planted, recoverable
//! class signal in a shared categorical feature space.
//!
//! Every shared categorical feature has a vocabulary split into three blocks:
//! positive-indicative tokens, negative-indicative tokens and background
//! tokens. A point draws 1..=`max_tokens_per_feature` background tokens and,
//! with probability `signal_strength`, one indicative token of its own class.
//! On nonservable features, a positive also adds one token from a small topic
//! block at the start of the background vocabulary with probability
//! `topic_strength`. Topic tokens are common background in both classes, so
//! no single one is a precise LF, but positives end up similar to each other
//! in exactly the features a deployed model never sees.
//! Image points additionally have each servable token replaced by a uniformly
//! random background token with probability `modality_noise`, so the image
//! side loses signal recall but never gains spurious indicative tokens, and
//! carry an image-only embedding whose mean shifts with the class.
//! Nonservable features stand in for precomputed organizational resources
//! and are identical across modalities.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    DataPoint, Dataset, FeatureDef, FeatureKind, FeatureSchema, FeatureValue, Label, Split,
};

pub const TEXT: &str = "text";
pub const IMAGE: &str = "image";
pub const EMBEDDING_FEATURE: &str = "img_emb";
pub const SIGNAL_SETS: [&str; 3] = ["A", "B", "C"];
pub const NOISE_SET: &str = "N";
pub const NONSERVABLE_SET: &str = "S";
pub const EMBEDDING_SET: &str = "E";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_text: usize,
    pub n_dev: usize,
    pub n_image_unlabeled: usize,
    pub n_image_test: usize,
    pub n_image_gold_pool: usize,
    pub positive_rate: f64,
    /// Class-signal categorical features shared by text and image.
    pub n_shared_categorical: usize,
    pub vocab_size: usize,
    /// Indicative tokens per class per feature.
    pub n_indicative_tokens: usize,
    pub max_tokens_per_feature: usize,
    pub signal_strength: f64,
    /// Size of the positive topic block at the start of each nonservable
    /// feature's background vocabulary.
    pub n_topic_tokens: usize,
    /// Probability that a positive adds one token from the topic block on
    /// top of its background draw.
    pub topic_strength: f64,
    pub modality_noise: f64,
    pub n_image_only_embedding_dims: usize,
    /// Euclidean distance between the class means of the image embedding.
    pub embedding_shift: f64,
    /// Shared categorical features carrying no class signal.
    pub n_noise_categorical: usize,
    /// Shared class-signal categorical features flagged as nonservable.
    pub n_nonservable_categorical: usize,
    pub n_numeric: usize,
    /// Shift of the numeric class means, in units of the unit standard deviation.
    pub numeric_shift: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_text: 20_000,
            n_dev: 2_000,
            n_image_unlabeled: 10_000,
            n_image_test: 5_000,
            n_image_gold_pool: 10_000,
            positive_rate: 0.05,
            n_shared_categorical: 6,
            vocab_size: 24,
            n_indicative_tokens: 2,
            max_tokens_per_feature: 3,
            signal_strength: 0.5,
            n_topic_tokens: 1,
            topic_strength: 0.9,
            modality_noise: 0.4,
            n_image_only_embedding_dims: 8,
            embedding_shift: 3.0,
            n_noise_categorical: 1,
            n_nonservable_categorical: 6,
            n_numeric: 1,
            numeric_shift: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad(format!("positive_rate must be in (0,1), got {}", self.positive_rate));
        }
        for (name, v) in [
            ("signal_strength", self.signal_strength),
            ("topic_strength", self.topic_strength),
            ("modality_noise", self.modality_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0,1], got {v}"));
            }
        }
        if self.max_tokens_per_feature == 0 {
            return bad("max_tokens_per_feature must be >= 1".into());
        }
        if self.vocab_size < 2 * self.n_indicative_tokens + self.max_tokens_per_feature {
            return bad(format!(
                "vocab_size {} too small for {} indicative tokens per class and {} background tokens per point",
                self.vocab_size, self.n_indicative_tokens, self.max_tokens_per_feature
            ));
        }
        if self.n_topic_tokens > self.vocab_size - 2 * self.n_indicative_tokens {
            return bad(format!(
                "n_topic_tokens {} exceeds the background vocabulary",
                self.n_topic_tokens
            ));
        }
        if self.n_topic_tokens == 0 && self.topic_strength > 0.0 && self.n_nonservable_categorical > 0 {
            return bad("n_topic_tokens must be >= 1 when topic_strength > 0".into());
        }
        if self.n_indicative_tokens == 0 && self.signal_strength > 0.0 && self.n_shared_categorical > 0 {
            return bad("n_indicative_tokens must be >= 1 when signal_strength > 0".into());
        }
        if !self.embedding_shift.is_finite() || !self.numeric_shift.is_finite() {
            return bad("shifts must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CatRole {
    Signal,
    Noise,
}

#[derive(Debug, Clone)]
struct CatSpec {
    id: String,
    role: CatRole,
    servable: bool,
}

/// The generated splits. `image_unlabeled_truth` holds the latent labels of
/// the unlabeled image points, for diagnostics only.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub schema: Arc<FeatureSchema>,
    pub text_labeled: Dataset,
    pub text_dev: Dataset,
    pub image_unlabeled: Dataset,
    pub image_test: Dataset,
    pub image_gold_pool: Dataset,
    pub image_unlabeled_truth: Vec<Label>,
}

fn token(fid: &str, j: usize) -> String {
    format!("{fid}_t{j:02}")
}

/// Name of the `j`-th positive-indicative token of a signal feature.
pub fn positive_token(feature_id: &str, j: usize) -> String {
    token(feature_id, j)
}

/// Name of the `j`-th negative-indicative token of a signal feature.
pub fn negative_token(config: &SynthConfig, feature_id: &str, j: usize) -> String {
    token(feature_id, config.n_indicative_tokens + j)
}

fn cat_specs(config: &SynthConfig) -> Vec<(CatSpec, FeatureDef)> {
    let both: BTreeSet<String> = [TEXT.to_string(), IMAGE.to_string()].into();
    let mut out = Vec::new();
    let mut cat = |id: String, role: CatRole, servable: bool, set: &str| {
        out.push((
            CatSpec { id: id.clone(), role, servable },
            FeatureDef {
                feature_id: id.clone(),
                name: id,
                kind: FeatureKind::CategoricalMultivalent,
                embedding_dim: None,
                servable,
                modalities: both.clone(),
                feature_set: Some(set.to_string()),
            },
        ))
    };
    for i in 0..config.n_shared_categorical {
        cat(format!("sig{i}"), CatRole::Signal, true, SIGNAL_SETS[i % SIGNAL_SETS.len()]);
    }
    for i in 0..config.n_nonservable_categorical {
        cat(format!("ns{i}"), CatRole::Signal, false, NONSERVABLE_SET);
    }
    for i in 0..config.n_noise_categorical {
        cat(format!("noise{i}"), CatRole::Noise, true, NOISE_SET);
    }
    out
}

pub fn schema(config: &SynthConfig) -> Arc<FeatureSchema> {
    let both: BTreeSet<String> = [TEXT.to_string(), IMAGE.to_string()].into();
    let mut defs: Vec<FeatureDef> = cat_specs(config).into_iter().map(|(_, d)| d).collect();
    for i in 0..config.n_numeric {
        defs.push(FeatureDef {
            feature_id: format!("num{i}"),
            name: format!("num{i}"),
            kind: FeatureKind::Numeric,
            embedding_dim: None,
            servable: true,
            modalities: both.clone(),
            feature_set: Some(SIGNAL_SETS[i % SIGNAL_SETS.len()].to_string()),
        });
    }
    if config.n_image_only_embedding_dims > 0 {
        defs.push(FeatureDef {
            feature_id: EMBEDDING_FEATURE.into(),
            name: "image embedding".into(),
            kind: FeatureKind::Embedding,
            embedding_dim: Some(config.n_image_only_embedding_dims),
            servable: true,
            modalities: [IMAGE.to_string()].into(),
            feature_set: Some(EMBEDDING_SET.to_string()),
        });
    }
    Arc::new(FeatureSchema::new(defs).expect("generated schema is valid"))
}

struct Generator<'a> {
    config: &'a SynthConfig,
    cats: Vec<CatSpec>,
    emb_normal: Normal<f64>,
}

impl Generator<'_> {
    fn categorical(&self, rng: &mut ChaCha8Rng, spec: &CatSpec, y: Label, image: bool) -> BTreeSet<String> {
        let c = self.config;
        let n_ind = c.n_indicative_tokens;
        let (bg_start, bg_len) = match spec.role {
            CatRole::Signal => (2 * n_ind, c.vocab_size - 2 * n_ind),
            CatRole::Noise => (0, c.vocab_size),
        };
        let count = rng.random_range(1..=c.max_tokens_per_feature);
        let mut idx: Vec<usize> = sample(rng, bg_len, count).into_iter().map(|i| bg_start + i).collect();
        if spec.role == CatRole::Signal && !spec.servable && y == Label::Pos && c.topic_strength > 0.0 && rng.random_bool(c.topic_strength) {
            idx.push(bg_start + rng.random_range(0..c.n_topic_tokens));
        }
        if spec.role == CatRole::Signal && n_ind > 0 && rng.random_bool(c.signal_strength) {
            let base = if y == Label::Pos { 0 } else { n_ind };
            idx.push(base + rng.random_range(0..n_ind));
        }
        if image && spec.servable && c.modality_noise > 0.0 {
            for j in idx.iter_mut() {
                if rng.random_bool(c.modality_noise) {
                    *j = bg_start + rng.random_range(0..bg_len);
                }
            }
        }
        idx.into_iter().map(|j| token(&spec.id, j)).collect()
    }

    fn point(&self, rng: &mut ChaCha8Rng, id: String, modality: &str, y: Label) -> DataPoint {
        let c = self.config;
        let image = modality == IMAGE;
        let mut p = DataPoint::new(id, modality);
        for spec in &self.cats {
            let set = self.categorical(rng, spec, y, image);
            p.features.insert(spec.id.clone(), FeatureValue::CategoricalSet(set));
        }
        for i in 0..c.n_numeric {
            let mean = if y == Label::Pos { c.numeric_shift } else { 0.0 };
            let x: f64 = mean + rng.sample::<f64, _>(rand_distr::StandardNormal);
            p.features.insert(format!("num{i}"), FeatureValue::Numeric(x));
        }
        if image && c.n_image_only_embedding_dims > 0 {
            let d = c.n_image_only_embedding_dims;
            let shift = if y == Label::Pos { c.embedding_shift / (d as f64).sqrt() } else { 0.0 };
            let v = (0..d).map(|_| shift + self.emb_normal.sample(rng)).collect();
            p.features.insert(EMBEDDING_FEATURE.into(), FeatureValue::Embedding(v));
        }
        p
    }

    fn split(
        &self,
        stream: u64,
        n: usize,
        prefix: &str,
        modality: &str,
        split: Split,
        keep_labels: bool,
        schema: &Arc<FeatureSchema>,
    ) -> (Dataset, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream);
        let mut points = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let y = if rng.random_bool(self.config.positive_rate) {
                Label::Pos
            } else {
                Label::Neg
            };
            let mut p = self.point(&mut rng, format!("{prefix}-{i:06}"), modality, y);
            if keep_labels {
                p.gold_label = Some(y);
            }
            truth.push(y);
            points.push(p);
        }
        (Dataset::new(schema.clone(), split, points), truth)
    }
}

/// Generates all splits. Each split draws from its own seeded stream, so
/// resizing one split leaves the others unchanged.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let schema = schema(config);
    let g = Generator {
        config,
        cats: cat_specs(config).into_iter().map(|(s, _)| s).collect(),
        emb_normal: Normal::new(0.0, 1.0).expect("unit normal"),
    };
    let (text_labeled, _) = g.split(1, config.n_text, "text", TEXT, Split::TrainLabeled, true, &schema);
    let (text_dev, _) = g.split(2, config.n_dev, "dev", TEXT, Split::Dev, true, &schema);
    let (image_unlabeled, image_unlabeled_truth) = g.split(
        3,
        config.n_image_unlabeled,
        "img-u",
        IMAGE,
        Split::TrainUnlabeled,
        false,
        &schema,
    );
    let (image_test, _) = g.split(4, config.n_image_test, "img-t", IMAGE, Split::Test, true, &schema);
    let (image_gold_pool, _) = g.split(
        5,
        config.n_image_gold_pool,
        "img-g",
        IMAGE,
        Split::TrainLabeled,
        true,
        &schema,
    );
    Ok(SynthData {
        schema,
        text_labeled,
        text_dev,
        image_unlabeled,
        image_test,
        image_gold_pool,
        image_unlabeled_truth,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use statrs::distribution::{ChiSquared, ContinuousCDF};

    use super::*;
    use crate::types::validate;

    fn small() -> SynthConfig {
        SynthConfig {
            n_text: 300,
            n_dev: 200,
            n_image_unlabeled: 200,
            n_image_test: 100,
            n_image_gold_pool: 100,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn all_splits_validate() {
        let d = generate(&small()).unwrap();
        for ds in [&d.text_labeled, &d.text_dev, &d.image_unlabeled, &d.image_test, &d.image_gold_pool] {
            assert!(validate(ds).is_empty(), "{:?}", validate(ds).first());
        }
        assert!(d.image_unlabeled.points.iter().all(|p| p.gold_label.is_none()));
        assert!(d.image_test.points.iter().all(|p| p.gold_label.is_some()));
        assert!(d.image_gold_pool.points.iter().all(|p| p.gold_label.is_some()));
        assert!(d.text_labeled.points.iter().all(|p| !p.features.contains_key(EMBEDDING_FEATURE)));
    }

    #[test]
    fn zero_text_leaves_other_splits_unchanged() {
        let a = generate(&small()).unwrap();
        let b = generate(&SynthConfig { n_text: 0, ..small() }).unwrap();
        assert!(b.text_labeled.is_empty());
        assert_eq!(a.image_test.to_jsonl(), b.image_test.to_jsonl());
        assert_eq!(b.image_unlabeled.len(), 200);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.text_labeled.to_jsonl(), b.text_labeled.to_jsonl());
        assert_eq!(a.image_unlabeled.to_jsonl(), b.image_unlabeled.to_jsonl());
        assert_eq!(a.schema.to_json_string(), b.schema.to_json_string());
        let c = generate(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.text_labeled.to_jsonl(), c.text_labeled.to_jsonl());
    }

    #[test]
    fn planted_tokens_are_pure_without_noise() {
        let cfg = SynthConfig {
            signal_strength: 1.0,
            modality_noise: 0.0,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        // brute force: every indicative token of every signal feature fires only on its class
        for i in 0..cfg.n_shared_categorical {
            let fid = format!("sig{i}");
            for j in 0..cfg.n_indicative_tokens {
                for (tok, class) in [
                    (positive_token(&fid, j), Label::Pos),
                    (negative_token(&cfg, &fid, j), Label::Neg),
                ] {
                    let fired: Vec<_> = d
                        .text_dev
                        .points
                        .iter()
                        .filter(|p| matches!(p.feature(&fid), FeatureValue::CategoricalSet(s) if s.contains(&tok)))
                        .collect();
                    assert!(!fired.is_empty(), "{tok} never fired");
                    assert!(fired.iter().all(|p| p.gold_label == Some(class)), "{tok} impure");
                }
            }
        }
    }

    #[test]
    fn positive_rate_within_three_points() {
        let cfg = SynthConfig {
            n_text: 4000,
            n_dev: 0,
            n_image_unlabeled: 0,
            n_image_test: 0,
            n_image_gold_pool: 0,
            positive_rate: 0.2,
            ..SynthConfig::default()
        };
        let d = generate(&cfg).unwrap();
        let rate = d.text_labeled.count_label(Label::Pos) as f64 / 4000.0;
        assert!((rate - 0.2).abs() <= 0.03, "{rate}");
    }

    /// Chi-square homogeneity test of per-class token frequencies between
    /// text and image when there is no modality noise.
    #[test]
    fn token_frequencies_match_across_modalities_without_noise() {
        let cfg = SynthConfig {
            n_text: 6000,
            n_dev: 0,
            n_image_unlabeled: 0,
            n_image_test: 6000,
            n_image_gold_pool: 0,
            positive_rate: 0.3,
            modality_noise: 0.0,
            ..SynthConfig::default()
        };
        let d = generate(&cfg).unwrap();
        for fid in ["sig0", "sig3", "noise0"] {
            for class in [Label::Pos, Label::Neg] {
                let count = |ds: &Dataset| {
                    let mut m: BTreeMap<String, f64> = BTreeMap::new();
                    for p in ds.points.iter().filter(|p| p.gold_label == Some(class)) {
                        if let FeatureValue::CategoricalSet(s) = p.feature(fid) {
                            for t in s {
                                *m.entry(t.clone()).or_default() += 1.0;
                            }
                        }
                    }
                    m
                };
                let (a, b) = (count(&d.text_labeled), count(&d.image_test));
                let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
                let (ta, tb): (f64, f64) = (a.values().sum(), b.values().sum());
                let mut chi2 = 0.0;
                for k in &keys {
                    let (oa, ob) = (a.get(*k).copied().unwrap_or(0.0), b.get(*k).copied().unwrap_or(0.0));
                    let row = oa + ob;
                    let (ea, eb) = (row * ta / (ta + tb), row * tb / (ta + tb));
                    chi2 += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
                }
                let dof = (keys.len() - 1) as f64;
                let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
                assert!(p > 0.01, "{fid} {class:?}: chi2 {chi2} dof {dof} p {p}");
            }
        }
    }

    #[test]
    fn nonservable_features_skip_noise_and_carry_the_topic() {
        let cfg = SynthConfig {
            signal_strength: 1.0,
            modality_noise: 1.0,
            topic_strength: 1.0,
            positive_rate: 0.5,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        let topic = token("ns0", 2 * cfg.n_indicative_tokens);
        let has = |p: &DataPoint, fid: &str, tok: &str| {
            matches!(p.feature(fid), FeatureValue::CategoricalSet(s) if s.contains(tok))
        };
        let pos: Vec<&DataPoint> = d.image_test.points.iter().filter(|p| p.gold_label == Some(Label::Pos)).collect();
        assert!(!pos.is_empty());
        for p in &pos {
            assert!(has(p, "ns0", &topic));
            assert!((0..cfg.n_indicative_tokens).any(|j| has(p, "ns0", &positive_token("ns0", j))));
            assert!(!(0..cfg.n_indicative_tokens).any(|j| has(p, "sig0", &positive_token("sig0", j))));
        }
        let sig_topic = token("sig0", 2 * cfg.n_indicative_tokens);
        let rate = |pts: &[&DataPoint]| pts.iter().filter(|p| has(p, "sig0", &sig_topic)).count() as f64 / pts.len() as f64;
        let neg: Vec<&DataPoint> = d.text_labeled.points.iter().filter(|p| p.gold_label == Some(Label::Neg)).collect();
        let text_pos: Vec<&DataPoint> = d.text_labeled.points.iter().filter(|p| p.gold_label == Some(Label::Pos)).collect();
        assert!(rate(&text_pos) < 0.3, "servable feature got the topic: {}", rate(&text_pos));
        assert!(rate(&neg) < 0.3);
    }

    #[test]
    fn rejects_out_of_range_rates() {
        assert!(generate(&SynthConfig { positive_rate: 1.0, ..small() }).is_err());
        assert!(generate(&SynthConfig { modality_noise: 1.5, ..small() }).is_err());
    }
}
