//! Feature schema, data points and datasets, plus the line-delimited record
//! format they are read from and written to.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Binary class label. Abstain is represented separately as `0` wherever
/// labeling-function outputs are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    pub fn from_i64(v: i64) -> Option<Label> {
        match v {
            1 => Some(Label::Pos),
            -1 => Some(Label::Neg),
            _ => None,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// Target used by the discriminative trainers: 1.0 for positive, 0.0 for negative.
    pub fn as_target(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => 0.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.as_i8())
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Label::from_i64(v).ok_or_else(|| serde::de::Error::custom(format!("label must be +1 or -1, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    CategoricalMultivalent,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub feature_id: String,
    #[serde(default)]
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[serde(default = "default_true")]
    pub servable: bool,
    pub modalities: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_set: Option<String>,
}

fn default_true() -> bool {
    true
}

impl FeatureDef {
    pub fn available_in(&self, modality: &str) -> bool {
        self.modalities.contains(modality)
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    format_version: u32,
    features: Vec<FeatureDef>,
}

/// The common feature space shared by every modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
    index: HashMap<String, usize>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self> {
        let mut index = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if f.feature_id.is_empty() {
                return Err(Error::Schema(format!("feature #{i} has an empty feature_id")));
            }
            if index.insert(f.feature_id.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate feature_id {:?}", f.feature_id)));
            }
            if f.modalities.is_empty() {
                return Err(Error::Schema(format!("feature {:?} lists no modalities", f.feature_id)));
            }
            match (f.kind, f.embedding_dim) {
                (FeatureKind::Embedding, Some(d)) if d >= 1 => {}
                (FeatureKind::Embedding, _) => {
                    return Err(Error::Schema(format!(
                        "embedding feature {:?} must declare embedding_dim >= 1",
                        f.feature_id
                    )))
                }
                (_, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "feature {:?} declares embedding_dim but is not an embedding",
                        f.feature_id
                    )))
                }
                _ => {}
            }
        }
        Ok(FeatureSchema { features, index })
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn get(&self, feature_id: &str) -> Option<&FeatureDef> {
        self.index.get(feature_id).map(|&i| &self.features[i])
    }

    pub fn position(&self, feature_id: &str) -> Option<usize> {
        self.index.get(feature_id).copied()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Ids of every servable feature, in schema order.
    pub fn servable_ids(&self) -> BTreeSet<String> {
        self.features
            .iter()
            .filter(|f| f.servable)
            .map(|f| f.feature_id.clone())
            .collect()
    }

    /// Every modality mentioned by any feature.
    pub fn modalities(&self) -> BTreeSet<String> {
        self.features.iter().flat_map(|f| f.modalities.iter().cloned()).collect()
    }

    pub fn to_json_string(&self) -> String {
        let doc = SchemaDoc {
            format_version: FORMAT_VERSION,
            features: self.features.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("schema serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: SchemaDoc = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_doc(doc)
    }

    /// Builds a schema from any deserialized document with `format_version` and `features`.
    pub fn from_value(v: Value) -> Result<Self> {
        let doc: SchemaDoc = serde_json::from_value(v).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: SchemaDoc) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema format_version {}",
                doc.format_version
            )));
        }
        Self::new(doc.features)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Numeric(f64),
    CategoricalSet(BTreeSet<String>),
    Embedding(Vec<f64>),
    Missing,
}

impl FeatureValue {
    pub fn categorical<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        FeatureValue::CategoricalSet(tokens.into_iter().map(Into::into).collect())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }

    fn to_json(&self) -> Option<Value> {
        match self {
            FeatureValue::Numeric(x) => Some(json!({ "num": x })),
            FeatureValue::CategoricalSet(s) => Some(json!({ "cat": s })),
            FeatureValue::Embedding(v) => Some(json!({ "emb": v })),
            FeatureValue::Missing => None,
        }
    }

    fn from_json(v: &Value) -> std::result::Result<Self, String> {
        let obj = match v {
            Value::Null => return Ok(FeatureValue::Missing),
            Value::Object(o) => o,
            other => return Err(format!("feature value must be an object, got {other}")),
        };
        if obj.len() != 1 {
            return Err("feature value must have exactly one of num/cat/emb".into());
        }
        let (tag, inner) = obj.iter().next().expect("len checked");
        match tag.as_str() {
            "num" => inner
                .as_f64()
                .map(FeatureValue::Numeric)
                .ok_or_else(|| "num must be a number".to_string()),
            "cat" => {
                let arr = inner.as_array().ok_or("cat must be an array of strings")?;
                let mut set = BTreeSet::new();
                for t in arr {
                    set.insert(t.as_str().ok_or("cat tokens must be strings")?.to_string());
                }
                Ok(FeatureValue::CategoricalSet(set))
            }
            "emb" => {
                let arr = inner.as_array().ok_or("emb must be an array of numbers")?;
                arr.iter()
                    .map(|x| x.as_f64().ok_or_else(|| "emb entries must be numbers".to_string()))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map(FeatureValue::Embedding)
            }
            other => Err(format!("unknown feature value tag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub id: String,
    pub modality: String,
    pub features: BTreeMap<String, FeatureValue>,
    pub gold_label: Option<Label>,
}

impl DataPoint {
    pub fn new(id: impl Into<String>, modality: impl Into<String>) -> Self {
        DataPoint {
            id: id.into(),
            modality: modality.into(),
            features: BTreeMap::new(),
            gold_label: None,
        }
    }

    pub fn with_feature(mut self, feature_id: impl Into<String>, value: FeatureValue) -> Self {
        self.features.insert(feature_id.into(), value);
        self
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.gold_label = Some(label);
        self
    }

    /// The feature value, treating absent keys as `Missing`.
    pub fn feature(&self, feature_id: &str) -> &FeatureValue {
        const MISSING: FeatureValue = FeatureValue::Missing;
        self.features.get(feature_id).unwrap_or(&MISSING)
    }

    pub fn to_json_line(&self) -> String {
        let mut features = Map::new();
        for (k, v) in &self.features {
            if let Some(j) = v.to_json() {
                features.insert(k.clone(), j);
            }
        }
        let mut rec = Map::new();
        rec.insert("id".into(), Value::String(self.id.clone()));
        rec.insert("modality".into(), Value::String(self.modality.clone()));
        if let Some(l) = self.gold_label {
            rec.insert("gold_label".into(), json!(l.as_i8()));
        }
        rec.insert("features".into(), Value::Object(features));
        serde_json::to_string(&Value::Object(rec)).expect("record serializes")
    }

    fn from_json_line(line: &str) -> std::result::Result<Self, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let obj = v.as_object().ok_or("record must be an object")?;
        for k in obj.keys() {
            if !matches!(k.as_str(), "id" | "modality" | "gold_label" | "features" | "format_version") {
                return Err(format!("unknown record field {k:?}"));
            }
        }
        if let Some(fv) = obj.get("format_version") {
            if fv.as_u64() != Some(FORMAT_VERSION as u64) {
                return Err(format!("unsupported format_version {fv}"));
            }
        }
        let id = obj.get("id").and_then(Value::as_str).ok_or("missing string field \"id\"")?;
        let modality = obj
            .get("modality")
            .and_then(Value::as_str)
            .ok_or("missing string field \"modality\"")?;
        let gold_label = match obj.get("gold_label") {
            None | Some(Value::Null) => None,
            Some(g) => Some(
                g.as_i64()
                    .and_then(Label::from_i64)
                    .ok_or_else(|| format!("gold_label must be +1 or -1, got {g}"))?,
            ),
        };
        let mut features = BTreeMap::new();
        match obj.get("features") {
            None | Some(Value::Null) => {}
            Some(Value::Object(fm)) => {
                for (fid, fv) in fm {
                    let value = FeatureValue::from_json(fv).map_err(|e| format!("feature {fid:?}: {e}"))?;
                    if !value.is_missing() {
                        features.insert(fid.clone(), value);
                    }
                }
            }
            Some(_) => return Err("\"features\" must be an object".into()),
        }
        Ok(DataPoint {
            id: id.to_string(),
            modality: modality.to_string(),
            features,
            gold_label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Dev,
    TrainLabeled,
    TrainUnlabeled,
    Test,
}

impl Split {
    pub fn requires_gold(self) -> bool {
        !matches!(self, Split::TrainUnlabeled)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: Arc<FeatureSchema>,
    pub split: Split,
    pub points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(schema: Arc<FeatureSchema>, split: Split, points: Vec<DataPoint>) -> Self {
        Dataset { schema, split, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Gold labels in point order; fails if any point is unlabeled.
    pub fn gold_labels(&self) -> Result<Vec<Label>> {
        self.points
            .iter()
            .map(|p| {
                p.gold_label
                    .ok_or_else(|| Error::InvalidData(format!("point {:?} has no gold label", p.id)))
            })
            .collect()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.points.iter().filter(|p| p.gold_label == Some(label)).count()
    }

    /// Copy with only the features accepted by `keep`; the rest become Missing.
    pub fn restrict_features(&self, keep: impl Fn(&DataPoint, &str) -> bool) -> Dataset {
        let points = self
            .points
            .iter()
            .map(|p| {
                let mut q = p.clone();
                q.features.retain(|fid, _| keep(p, fid));
                q
            })
            .collect();
        Dataset::new(self.schema.clone(), self.split, points)
    }

    /// Copy with gold labels removed, as an unlabeled training split.
    pub fn without_labels(&self) -> Dataset {
        let points = self
            .points
            .iter()
            .map(|p| DataPoint {
                gold_label: None,
                ..p.clone()
            })
            .collect();
        Dataset::new(self.schema.clone(), Split::TrainUnlabeled, points)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&p.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> std::io::Result<()> {
        for p in &self.points {
            writeln!(w, "{}", p.to_json_line())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub point_id: String,
    pub field: String,
    pub message: String,
    pub severity: Severity,
}

fn check_point(schema: &FeatureSchema, split: Split, p: &DataPoint, out: &mut Vec<Violation>) {
    let mut push = |field: &str, message: String, severity| {
        out.push(Violation {
            point_id: p.id.clone(),
            field: field.to_string(),
            message,
            severity,
        })
    };
    if p.id.is_empty() {
        push("id", "empty id".into(), Severity::Error);
    }
    if p.modality.is_empty() {
        push("modality", "empty modality".into(), Severity::Error);
    }
    match (split.requires_gold(), p.gold_label) {
        (true, None) => push("gold_label", format!("{split:?} points must carry a gold label"), Severity::Error),
        (false, Some(_)) => push(
            "gold_label",
            "train_unlabeled points must not carry a gold label".into(),
            Severity::Error,
        ),
        _ => {}
    }
    let mut present = 0usize;
    for (fid, value) in &p.features {
        let Some(def) = schema.get(fid) else {
            push(fid, format!("unknown feature {fid:?}"), Severity::Error);
            continue;
        };
        if value.is_missing() {
            continue;
        }
        present += 1;
        if !def.available_in(&p.modality) {
            push(
                fid,
                format!("feature {fid:?} is not available in modality {:?}", p.modality),
                Severity::Error,
            );
        }
        match (def.kind, value) {
            (FeatureKind::Numeric, FeatureValue::Numeric(x)) => {
                if !x.is_finite() {
                    push(fid, "numeric value is not finite".into(), Severity::Error);
                }
            }
            (FeatureKind::CategoricalMultivalent, FeatureValue::CategoricalSet(s)) => {
                if s.is_empty() {
                    push(fid, "categorical set is empty".into(), Severity::Error);
                }
            }
            (FeatureKind::Embedding, FeatureValue::Embedding(v)) => {
                let dim = def.embedding_dim.unwrap_or(0);
                if v.len() != dim {
                    push(
                        fid,
                        format!("embedding length {} != declared dim {dim}", v.len()),
                        Severity::Error,
                    );
                } else if v.iter().any(|x| !x.is_finite()) {
                    push(fid, "embedding has non-finite entries".into(), Severity::Error);
                }
            }
            (kind, _) => push(fid, format!("value kind does not match schema kind {kind:?}"), Severity::Error),
        }
    }
    if present == 0 {
        push("features", "all features missing".into(), Severity::Warning);
    }
}

/// Lists every invariant violation in `dataset`; warnings are included with
/// [`Severity::Warning`].
pub fn validate(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::with_capacity(dataset.points.len());
    for p in &dataset.points {
        if !seen.insert(p.id.as_str()) {
            out.push(Violation {
                point_id: p.id.clone(),
                field: "id".into(),
                message: "duplicate id".into(),
                severity: Severity::Error,
            });
        }
        check_point(&dataset.schema, dataset.split, p, &mut out);
    }
    out
}

/// Parses records without checking them against the schema. Only malformed
/// lines fail; use [`validate`] to list schema violations.
pub fn read_records(reader: impl BufRead) -> Result<Vec<DataPoint>> {
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let p = DataPoint::from_json_line(&line).map_err(|reason| Error::Parse { line: line_no, reason })?;
        points.push(p);
    }
    Ok(points)
}

/// Parses and validates a dataset, failing on the first violation.
pub fn parse_dataset(reader: impl BufRead, schema: Arc<FeatureSchema>, split: Split) -> Result<Dataset> {
    let mut points = Vec::new();
    let mut seen = HashSet::new();
    let mut violations = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let p = DataPoint::from_json_line(&line).map_err(|reason| Error::Parse { line: line_no, reason })?;
        if !seen.insert(p.id.clone()) {
            return Err(Error::DuplicateId { line: line_no, id: p.id });
        }
        violations.clear();
        check_point(&schema, split, &p, &mut violations);
        if let Some(v) = violations.iter().find(|v| v.severity == Severity::Error) {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("point {:?} field {:?}: {}", v.point_id, v.field, v.message),
            });
        }
        points.push(p);
    }
    Ok(Dataset::new(schema, split, points))
}

pub fn load_dataset(path: &Path, schema: Arc<FeatureSchema>, split: Split) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(f), schema, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn text_image_schema() -> Arc<FeatureSchema> {
        let both: BTreeSet<String> = ["text", "image"].iter().map(|s| s.to_string()).collect();
        let text_only: BTreeSet<String> = ["text"].iter().map(|s| s.to_string()).collect();
        Arc::new(
            FeatureSchema::new(vec![
                FeatureDef {
                    feature_id: "profanity".into(),
                    name: "profanity".into(),
                    kind: FeatureKind::CategoricalMultivalent,
                    embedding_dim: None,
                    servable: true,
                    modalities: both.clone(),
                    feature_set: Some("A".into()),
                },
                FeatureDef {
                    feature_id: "setting".into(),
                    name: "setting".into(),
                    kind: FeatureKind::CategoricalMultivalent,
                    embedding_dim: None,
                    servable: true,
                    modalities: both,
                    feature_set: Some("A".into()),
                },
                FeatureDef {
                    feature_id: "caption_len".into(),
                    name: "caption length".into(),
                    kind: FeatureKind::Numeric,
                    embedding_dim: None,
                    servable: true,
                    modalities: text_only,
                    feature_set: None,
                },
            ])
            .unwrap(),
        )
    }

    #[test]
    fn loads_text_example_record() {
        let line = r#"{"id":"t1","modality":"text","gold_label":1,"features":{"profanity":{"cat":["True"]},"setting":{"cat":["outdoor"]}}}"#;
        let ds = parse_dataset(line.as_bytes(), text_image_schema(), Split::Dev).unwrap();
        assert_eq!(ds.len(), 1);
        let p = &ds.points[0];
        assert_eq!(p.feature("profanity"), &FeatureValue::categorical(["True"]));
        assert_eq!(p.feature("setting"), &FeatureValue::categorical(["outdoor"]));
        assert_eq!(p.gold_label, Some(Label::Pos));
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = parse_dataset("".as_bytes(), text_image_schema(), Split::Test).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn duplicate_id_reports_second_line() {
        let src = concat!(
            r#"{"id":"a","modality":"text","gold_label":1,"features":{}}"#,
            "\n",
            r#"{"id":"a","modality":"text","gold_label":-1,"features":{}}"#,
            "\n"
        );
        match parse_dataset(src.as_bytes(), text_image_schema(), Split::Dev) {
            Err(Error::DuplicateId { line, id }) => {
                assert_eq!(line, 2);
                assert_eq!(id, "a");
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn schema_violations_fail_load_with_line() {
        let cases = [
            r#"{"id":"a","modality":"text","gold_label":1,"features":{"nope":{"num":1}}}"#,
            r#"{"id":"a","modality":"text","gold_label":1,"features":{"profanity":{"num":1}}}"#,
            r#"{"id":"a","modality":"text","features":{}}"#,
            r#"{"id":"a","modality":"text","gold_label":2,"features":{}}"#,
            r#"{"id":"a","modality":"text","gold_label":1,"features":{"profanity":{"cat":[]}}}"#,
        ];
        for src in cases {
            let err = parse_dataset(src.as_bytes(), text_image_schema(), Split::Dev).unwrap_err();
            assert!(matches!(err, Error::Parse { line: 1, .. }), "{src}: {err:?}");
        }
    }

    #[test]
    fn validate_reports_foreign_modality_and_split_label() {
        let schema = text_image_schema();
        let ok = DataPoint::new("ok", "text")
            .with_feature("profanity", FeatureValue::categorical(["True"]))
            .with_label(Label::Pos);
        assert!(validate(&Dataset::new(schema.clone(), Split::Dev, vec![ok])).is_empty());

        let video = DataPoint::new("v1", "video")
            .with_feature("caption_len", FeatureValue::Numeric(3.0))
            .with_label(Label::Neg);
        let v = validate(&Dataset::new(schema.clone(), Split::Test, vec![video]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].point_id, "v1");
        assert_eq!(v[0].field, "caption_len");

        let labeled = DataPoint::new("u1", "image")
            .with_feature("setting", FeatureValue::categorical(["indoor"]))
            .with_label(Label::Pos);
        let v = validate(&Dataset::new(schema, Split::TrainUnlabeled, vec![labeled]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "gold_label");
    }

    #[test]
    fn all_missing_point_is_a_warning() {
        let p = DataPoint::new("empty", "image");
        let v = validate(&Dataset::new(text_image_schema(), Split::TrainUnlabeled, vec![p]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].severity, Severity::Warning);
    }

    #[test]
    fn schema_rejects_bad_definitions() {
        let mk = |kind, dim, mods: &[&str]| FeatureDef {
            feature_id: "f".into(),
            name: String::new(),
            kind,
            embedding_dim: dim,
            servable: true,
            modalities: mods.iter().map(|s| s.to_string()).collect(),
            feature_set: None,
        };
        assert!(FeatureSchema::new(vec![mk(FeatureKind::Embedding, None, &["image"])]).is_err());
        assert!(FeatureSchema::new(vec![mk(FeatureKind::Embedding, Some(0), &["image"])]).is_err());
        assert!(FeatureSchema::new(vec![mk(FeatureKind::Numeric, None, &[])]).is_err());
        let f = mk(FeatureKind::Numeric, None, &["text"]);
        assert!(FeatureSchema::new(vec![f.clone(), f]).is_err());
    }

    #[test]
    fn record_json_roundtrip() {
        let p = DataPoint::new("x", "image")
            .with_feature("setting", FeatureValue::categorical(["b", "a"]))
            .with_feature("caption_len", FeatureValue::Numeric(0.1 + 0.2))
            .with_label(Label::Neg);
        let back = DataPoint::from_json_line(&p.to_json_line()).unwrap();
        assert_eq!(p, back);
        let schema = text_image_schema();
        let back = FeatureSchema::from_json_str(&schema.to_json_string()).unwrap();
        assert_eq!(*schema, back);
    }
}
