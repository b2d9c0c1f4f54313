//! Dense encoding of data points: multi-hot categoricals, min-max scaled
//! numerics and passthrough embeddings.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DataPoint, Dataset, FeatureKind, FeatureValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotEncoding {
    /// Sorted vocabulary; token `vocab[i]` maps to slot `offset + i`.
    Categorical { vocab: Vec<String> },
    /// `min == max` marks a constant feature, encoded as 0.0.
    Numeric { min: f64, max: f64 },
    Embedding { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedFeature {
    pub feature_id: String,
    pub offset: usize,
    pub slots: SlotEncoding,
}

impl EncodedFeature {
    pub fn width(&self) -> usize {
        match &self.slots {
            SlotEncoding::Categorical { vocab } => vocab.len(),
            SlotEncoding::Numeric { .. } => 1,
            SlotEncoding::Embedding { dim } => *dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub features: Vec<EncodedFeature>,
    pub width: usize,
}

/// Min-max scaling with clipping to [0, 1]; constant features map to 0.
pub fn min_max_scale(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((x - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Fits an encoding over `datasets` restricted to `feature_subset`. Features
/// are laid out in schema order.
pub fn fit_encoding(datasets: &[&Dataset], feature_subset: &BTreeSet<String>) -> Result<Encoding> {
    let Some(first) = datasets.first() else {
        return Err(Error::Config("fit_encoding needs at least one dataset".into()));
    };
    let schema = &first.schema;
    for d in datasets {
        if !Arc::ptr_eq(&d.schema, schema) && *d.schema != **schema {
            return Err(Error::Schema("datasets passed to fit_encoding use different schemas".into()));
        }
    }
    for fid in feature_subset {
        if schema.get(fid).is_none() {
            return Err(Error::Schema(format!("feature subset names unknown feature {fid:?}")));
        }
    }

    let mut features = Vec::new();
    let mut offset = 0;
    for def in schema.features() {
        if !feature_subset.contains(&def.feature_id) {
            continue;
        }
        let values = datasets
            .iter()
            .flat_map(|d| d.points.iter())
            .map(|p| p.feature(&def.feature_id));
        let slots = match def.kind {
            FeatureKind::CategoricalMultivalent => {
                let mut vocab = BTreeSet::new();
                for v in values {
                    if let FeatureValue::CategoricalSet(s) = v {
                        vocab.extend(s.iter().cloned());
                    }
                }
                SlotEncoding::Categorical {
                    vocab: vocab.into_iter().collect(),
                }
            }
            FeatureKind::Numeric => {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for v in values {
                    if let FeatureValue::Numeric(x) = v {
                        min = min.min(*x);
                        max = max.max(*x);
                    }
                }
                if min > max {
                    // never observed
                    min = 0.0;
                    max = 0.0;
                }
                SlotEncoding::Numeric { min, max }
            }
            FeatureKind::Embedding => SlotEncoding::Embedding {
                dim: def.embedding_dim.unwrap_or(0),
            },
        };
        let f = EncodedFeature {
            feature_id: def.feature_id.clone(),
            offset,
            slots,
        };
        offset += f.width();
        features.push(f);
    }
    Ok(Encoding { features, width: offset })
}

impl Encoding {
    pub fn feature_ids(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.feature_id.as_str())
    }

    pub fn feature(&self, feature_id: &str) -> Option<&EncodedFeature> {
        self.features.iter().find(|f| f.feature_id == feature_id)
    }

    /// Writes the encoding of `point` into `out`, which must be `width` long
    /// and is overwritten entirely.
    pub fn encode_into(&self, point: &DataPoint, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.width);
        out.fill(0.0);
        for f in &self.features {
            let slot = &mut out[f.offset..f.offset + f.width()];
            match (&f.slots, point.feature(&f.feature_id)) {
                (SlotEncoding::Categorical { vocab }, FeatureValue::CategoricalSet(tokens)) => {
                    for t in tokens {
                        if let Ok(i) = vocab.binary_search(t) {
                            slot[i] = 1.0;
                        }
                    }
                }
                (SlotEncoding::Numeric { min, max }, FeatureValue::Numeric(x)) => {
                    slot[0] = min_max_scale(*x, *min, *max);
                }
                (SlotEncoding::Embedding { dim }, FeatureValue::Embedding(v)) if v.len() == *dim => {
                    slot.copy_from_slice(v);
                }
                _ => {}
            }
        }
    }

    pub fn encode(&self, point: &DataPoint) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.encode_into(point, &mut out);
        out
    }
}

/// Convenience wrapper matching the free-function form used elsewhere.
pub fn encode(point: &DataPoint, encoding: &Encoding) -> Vec<f64> {
    encoding.encode(point)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::types::{FeatureDef, FeatureSchema, Split};

    fn schema() -> Arc<FeatureSchema> {
        let mods: BTreeSet<String> = ["text".to_string()].into();
        let def = |id: &str, kind, dim| FeatureDef {
            feature_id: id.into(),
            name: id.into(),
            kind,
            embedding_dim: dim,
            servable: true,
            modalities: mods.clone(),
            feature_set: None,
        };
        Arc::new(
            FeatureSchema::new(vec![
                def("cat", FeatureKind::CategoricalMultivalent, None),
                def("num", FeatureKind::Numeric, None),
                def("emb", FeatureKind::Embedding, Some(8)),
            ])
            .unwrap(),
        )
    }

    fn ds(points: Vec<DataPoint>) -> Dataset {
        Dataset::new(schema(), Split::TrainUnlabeled, points)
    }

    fn subset(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn categorical_vocab_sorted() {
        let d = ds(vec![
            DataPoint::new("1", "text").with_feature("cat", FeatureValue::categorical(["c", "a"])),
            DataPoint::new("2", "text").with_feature("cat", FeatureValue::categorical(["b"])),
        ]);
        let enc = fit_encoding(&[&d], &subset(&["cat"])).unwrap();
        assert_eq!(enc.width, 3);
        assert_eq!(
            enc.features[0].slots,
            SlotEncoding::Categorical {
                vocab: vec!["a".into(), "b".into(), "c".into()]
            }
        );
        let p = DataPoint::new("3", "text").with_feature("cat", FeatureValue::categorical(["a", "c"]));
        assert_eq!(enc.encode(&p), vec![1.0, 0.0, 1.0]);
        assert_eq!(enc.encode(&DataPoint::new("4", "text")), vec![0.0, 0.0, 0.0]);
        // unseen token encodes to zeros
        let q = DataPoint::new("5", "text").with_feature("cat", FeatureValue::categorical(["zzz"]));
        assert_eq!(enc.encode(&q), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn numeric_min_max_with_clipping() {
        let d = ds([2.0, 4.0, 10.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| DataPoint::new(i.to_string(), "text").with_feature("num", FeatureValue::Numeric(x)))
            .collect());
        let enc = fit_encoding(&[&d], &subset(&["num"])).unwrap();
        assert_eq!(enc.features[0].slots, SlotEncoding::Numeric { min: 2.0, max: 10.0 });
        let at = |x| enc.encode(&DataPoint::new("q", "text").with_feature("num", FeatureValue::Numeric(x)))[0];
        assert_eq!(at(4.0), 0.25);
        assert_eq!(at(12.0), 1.0);
        assert_eq!(at(-3.0), 0.0);
    }

    #[test]
    fn constant_numeric_encodes_zero() {
        let d = ds(vec![
            DataPoint::new("1", "text").with_feature("num", FeatureValue::Numeric(5.0)),
            DataPoint::new("2", "text").with_feature("num", FeatureValue::Numeric(5.0)),
        ]);
        let enc = fit_encoding(&[&d], &subset(&["num"])).unwrap();
        assert_eq!(enc.encode(&d.points[0]), vec![0.0]);
    }

    #[test]
    fn embedding_plus_categorical_width() {
        let d = ds(vec![DataPoint::new("1", "text")
            .with_feature("cat", FeatureValue::categorical(["a", "b", "c"]))
            .with_feature("emb", FeatureValue::Embedding(vec![0.5; 8]))]);
        let enc = fit_encoding(&[&d], &subset(&["cat", "emb"])).unwrap();
        assert_eq!(enc.width, 11);
        let v = enc.encode(&d.points[0]);
        assert_eq!(&v[3..], &[0.5; 8]);
    }

    #[test]
    fn unknown_subset_feature_is_error() {
        let d = ds(vec![]);
        assert!(fit_encoding(&[&d], &subset(&["nope"])).is_err());
    }

    proptest! {
        #[test]
        fn multi_hot_roundtrip(mask in prop::collection::vec(any::<bool>(), 6)) {
            let vocab: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
            let d = ds(vec![DataPoint::new("all", "text").with_feature("cat", FeatureValue::categorical(vocab.clone()))]);
            let enc = fit_encoding(&[&d], &subset(&["cat"])).unwrap();
            let chosen: BTreeSet<String> = vocab.iter().zip(&mask).filter(|(_, &m)| m).map(|(t, _)| t.clone()).collect();
            let p = DataPoint::new("p", "text").with_feature("cat", FeatureValue::CategoricalSet(chosen.clone()));
            let v = enc.encode(&p);
            prop_assert_eq!(v.len(), enc.width);
            let back: BTreeSet<String> = v.iter().enumerate().filter(|(_, &x)| x == 1.0).map(|(i, _)| vocab[i].clone()).collect();
            prop_assert_eq!(back, chosen);
            prop_assert_eq!(enc.encode(&p), v);
        }

        #[test]
        fn numeric_encoding_monotone(a in -100.0f64..100.0, b in -100.0f64..100.0) {
            let d = ds(vec![
                DataPoint::new("1", "text").with_feature("num", FeatureValue::Numeric(-20.0)),
                DataPoint::new("2", "text").with_feature("num", FeatureValue::Numeric(30.0)),
            ]);
            let enc = fit_encoding(&[&d], &subset(&["num"])).unwrap();
            let e = |x| enc.encode(&DataPoint::new("q", "text").with_feature("num", FeatureValue::Numeric(x)))[0];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(e(lo) <= e(hi));
            prop_assert!((0.0..=1.0).contains(&e(a)));
        }
    }
}
