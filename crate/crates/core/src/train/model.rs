use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{train, ModelKind, Network, SparseRows, TrainConfig, TrainReport};
use crate::encoding::{fit_encoding, Encoding};
use crate::error::{Error, Result};
use crate::label_model::ProbLabels;
use crate::par;
use crate::types::{DataPoint, Dataset, FeatureSchema};

/// A dataset paired with one training target per point: gold labels as 0/1,
/// weak labels as posteriors.
#[derive(Debug, Clone)]
pub struct LabeledSet<'a> {
    pub data: &'a Dataset,
    pub targets: Vec<f64>,
}

impl<'a> LabeledSet<'a> {
    pub fn gold(data: &'a Dataset) -> Result<Self> {
        let targets = data.gold_labels()?.into_iter().map(|l| l.as_target()).collect();
        Ok(LabeledSet { data, targets })
    }

    pub fn weak(data: &'a Dataset, labels: &ProbLabels) -> Result<Self> {
        let map: HashMap<&str, f64> = labels.to_map();
        let targets = data
            .points
            .iter()
            .map(|p| {
                map.get(p.id.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidData(format!("no probabilistic label for point {:?}", p.id)))
            })
            .collect::<Result<_>>()?;
        Ok(LabeledSet { data, targets })
    }

    pub fn modalities(&self) -> BTreeSet<String> {
        self.data.points.iter().map(|p| p.modality.clone()).collect()
    }
}

/// Servable features available in at least one of `modalities`.
pub fn servable_features_for(schema: &FeatureSchema, modalities: &BTreeSet<String>) -> BTreeSet<String> {
    schema
        .features()
        .iter()
        .filter(|f| f.servable && f.modalities.iter().any(|m| modalities.contains(m)))
        .map(|f| f.feature_id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub network: Network,
    pub encoding: Encoding,
}

pub(crate) fn encode_points<'p>(encoding: &Encoding, points: impl Iterator<Item = &'p DataPoint>) -> SparseRows {
    let mut rows = SparseRows::new(encoding.width);
    let mut buf = vec![0.0; encoding.width];
    for p in points {
        encoding.encode_into(p, &mut buf);
        rows.push_dense(&buf).expect("buffer has encoding width");
    }
    rows
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.network.kind
    }

    fn check(&self) -> Result<()> {
        if self.encoding.width != self.network.input_width {
            return Err(Error::WidthMismatch {
                expected: self.network.input_width,
                got: self.encoding.width,
            });
        }
        Ok(())
    }

    pub fn encode(&self, points: &[DataPoint]) -> SparseRows {
        encode_points(&self.encoding, points.iter())
    }

    pub fn score(&self, point: &DataPoint) -> Result<f64> {
        self.check()?;
        self.network.score_dense(&self.encoding.encode(point))
    }

    pub fn score_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.check()?;
        let x = self.encode(&data.points);
        self.network.scores(&x)
    }

    pub fn penultimate(&self, point: &DataPoint) -> Result<Vec<f64>> {
        self.check()?;
        self.network.penultimate_dense(&self.encoding.encode(point))
    }

    pub fn penultimates(&self, points: &[DataPoint]) -> Result<Vec<Vec<f64>>> {
        self.check()?;
        par::map(points, |p| self.network.penultimate_dense(&self.encoding.encode(p)))
            .into_iter()
            .collect()
    }
}

/// Fits an encoding over `features` on every set, then trains one network on
/// all points. Nonservable features are rejected.
pub fn train_model(
    sets: &[LabeledSet],
    features: &BTreeSet<String>,
    kind: ModelKind,
    config: &TrainConfig,
    dev: Option<&LabeledSet>,
) -> Result<(Model, TrainReport)> {
    let Some(first) = sets.first() else {
        return Err(Error::InvalidData("no training sets".into()));
    };
    let schema = &first.data.schema;
    for fid in features {
        match schema.get(fid) {
            Some(def) if !def.servable => {
                return Err(Error::Config(format!("feature {fid:?} is not servable and cannot be trained on")))
            }
            None => return Err(Error::Schema(format!("unknown feature {fid:?}"))),
            _ => {}
        }
    }
    let datasets: Vec<&Dataset> = sets.iter().map(|s| s.data).collect();
    let encoding = fit_encoding(&datasets, features)?;
    let x = encode_points(&encoding, sets.iter().flat_map(|s| s.data.points.iter()));
    let targets: Vec<f64> = sets.iter().flat_map(|s| s.targets.iter().copied()).collect();
    if x.is_empty() {
        return Err(Error::InvalidData("training sets contain no points".into()));
    }
    let dev_rows = dev.map(|d| (encode_points(&encoding, d.data.points.iter()), d.targets.as_slice()));
    let (network, report) = train(&x, &targets, kind, dev_rows.as_ref().map(|(x, t)| (x, *t)), config)?;
    Ok((Model { network, encoding }, report))
}
