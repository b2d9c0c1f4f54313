//! Labeling functions and their automatic mining from a labeled dev set.
//!
//! Categorical LFs are value-set containment rules within a single
//! multivalent feature. Mining walks the value-set lattice level-wise: a set
//! is extended only while its class support and recall stay above the
//! configured floors (both are anti-monotone), and it is emitted when its
//! precision also clears `min_precision`.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PropagationScores;
use crate::par;
use crate::types::{DataPoint, Dataset, FeatureKind, FeatureValue, Label};

/// Pseudo feature id carried by propagation-threshold LFs.
pub const PROPAGATION_FEATURE: &str = "propagation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

impl Comparator {
    pub fn holds(self, x: f64, threshold: f64) -> bool {
        match self {
            Comparator::Ge => x >= threshold,
            Comparator::Le => x <= threshold,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum LfParams {
    /// Fires when every token is present in the feature's categorical set.
    ValueMatch { tokens: BTreeSet<String> },
    NumericThreshold { comparator: Comparator, threshold: f64 },
    /// Band LF over propagation scores: `emit_label` at or above `theta_pos`,
    /// the opposite label at or below `theta_neg`, abstain in between.
    PropagationThreshold {
        theta_pos: f64,
        theta_neg: f64,
        scores_ref: String,
    },
}

impl LfParams {
    fn kind_rank(&self) -> u8 {
        match self {
            LfParams::ValueMatch { .. } => 0,
            LfParams::NumericThreshold { .. } => 1,
            LfParams::PropagationThreshold { .. } => 2,
        }
    }

    /// Total order used to break ties deterministically.
    pub fn cmp_key(&self, other: &LfParams) -> Ordering {
        use LfParams::*;
        match (self, other) {
            (ValueMatch { tokens: a }, ValueMatch { tokens: b }) => a.cmp(b),
            (
                NumericThreshold {
                    comparator: ca,
                    threshold: ta,
                },
                NumericThreshold {
                    comparator: cb,
                    threshold: tb,
                },
            ) => ca.cmp(cb).then(ta.total_cmp(tb)),
            (
                PropagationThreshold {
                    theta_pos: pa,
                    theta_neg: na,
                    ..
                },
                PropagationThreshold {
                    theta_pos: pb,
                    theta_neg: nb,
                    ..
                },
            ) => pa.total_cmp(pb).then(na.total_cmp(nb)),
            _ => self.kind_rank().cmp(&other.kind_rank()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingFunction {
    pub lf_id: String,
    pub feature_id: String,
    #[serde(flatten)]
    pub params: LfParams,
    pub emit_label: Label,
    #[serde(default = "default_true")]
    pub servable: bool,
}

fn default_true() -> bool {
    true
}

impl LabelingFunction {
    pub fn value_match<I, S>(feature_id: &str, tokens: I, emit_label: Label) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        let joined: Vec<&str> = tokens.iter().map(String::as_str).collect();
        LabelingFunction {
            lf_id: format!("{feature_id}:{}:{emit_label}", joined.join("+")),
            feature_id: feature_id.to_string(),
            params: LfParams::ValueMatch { tokens },
            emit_label,
            servable: true,
        }
    }

    pub fn numeric_threshold(feature_id: &str, comparator: Comparator, threshold: f64, emit_label: Label) -> Self {
        LabelingFunction {
            lf_id: format!("{feature_id}:{comparator}{threshold}:{emit_label}"),
            feature_id: feature_id.to_string(),
            params: LfParams::NumericThreshold { comparator, threshold },
            emit_label,
            servable: true,
        }
    }

    pub fn needs_scores(&self) -> bool {
        matches!(self.params, LfParams::PropagationThreshold { .. })
    }
}

/// Output of `lf` on `point`: `+1`, `-1` or `0` for abstain.
pub fn apply_lf(lf: &LabelingFunction, point: &DataPoint, scores: Option<&PropagationScores>) -> Result<i8> {
    let emit = lf.emit_label.as_i8();
    Ok(match &lf.params {
        LfParams::ValueMatch { tokens } => match point.feature(&lf.feature_id) {
            FeatureValue::CategoricalSet(s) if tokens.iter().all(|t| s.contains(t)) => emit,
            _ => 0,
        },
        LfParams::NumericThreshold { comparator, threshold } => match point.feature(&lf.feature_id) {
            FeatureValue::Numeric(x) if comparator.holds(*x, *threshold) => emit,
            _ => 0,
        },
        LfParams::PropagationThreshold {
            theta_pos, theta_neg, ..
        } => {
            let scores = scores.ok_or_else(|| Error::MissingPropagationScores {
                lf_id: lf.lf_id.clone(),
            })?;
            match scores.get(&point.id) {
                Some(s) if s >= *theta_pos => emit,
                Some(s) if s <= *theta_neg => -emit,
                _ => 0,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfStats {
    pub precision: f64,
    pub recall: f64,
    pub coverage: f64,
    pub n_fired: usize,
    pub n_correct: usize,
    /// Set when the LF never fired; precision is then reported as 1.0.
    #[serde(default)]
    pub degenerate: bool,
}

impl LfStats {
    fn from_counts(n_correct: usize, n_fired: usize, n_class: usize, n_total: usize) -> Self {
        LfStats {
            precision: if n_fired == 0 { 1.0 } else { n_correct as f64 / n_fired as f64 },
            recall: n_correct as f64 / n_class as f64,
            coverage: if n_total == 0 { 0.0 } else { n_fired as f64 / n_total as f64 },
            n_fired,
            n_correct,
            degenerate: n_fired == 0,
        }
    }

    pub fn f1(&self) -> f64 {
        if self.precision + self.recall == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / (self.precision + self.recall)
        }
    }
}

/// Precision, recall and coverage of `lf` on a gold-labeled dev set. Fires
/// of the opposite label (propagation bands) count as correct when they
/// match gold, but recall is measured for `emit_label` only.
pub fn evaluate_lf(lf: &LabelingFunction, dev: &Dataset, scores: Option<&PropagationScores>) -> Result<LfStats> {
    let gold = dev.gold_labels()?;
    let target = lf.emit_label;
    let n_class = gold.iter().filter(|&&g| g == target).count();
    if n_class == 0 {
        return Err(Error::UndefinedRecall { label: target.as_i8() });
    }
    let (mut fired, mut correct, mut correct_target) = (0, 0, 0);
    for (p, g) in dev.points.iter().zip(&gold) {
        let out = apply_lf(lf, p, scores)?;
        if out != 0 {
            fired += 1;
            if out == g.as_i8() {
                correct += 1;
                if *g == target {
                    correct_target += 1;
                }
            }
        }
    }
    let mut stats = LfStats::from_counts(correct, fired, n_class, dev.len());
    stats.recall = correct_target as f64 / n_class as f64;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinerConfig {
    pub min_precision: f64,
    pub min_recall: f64,
    pub max_order: usize,
    pub min_support: usize,
    pub mine_negatives: bool,
    pub numeric_split_candidates: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            min_precision: 0.99,
            min_recall: 0.05,
            max_order: 1,
            min_support: 5,
            mine_negatives: true,
            numeric_split_candidates: 32,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("min_precision", self.min_precision), ("min_recall", self.min_recall)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0,1], got {v}")));
            }
        }
        if self.max_order == 0 {
            return Err(Error::Config("max_order must be >= 1".into()));
        }
        Ok(())
    }

    /// The full emission rule; the first two conditions are anti-monotone and
    /// gate lattice extension.
    fn emits(&self, n_correct: usize, n_fired: usize, n_class: usize) -> bool {
        self.is_frequent(n_correct, n_class) && n_fired > 0 && n_correct as f64 / n_fired as f64 >= self.min_precision
    }

    fn is_frequent(&self, n_correct: usize, n_class: usize) -> bool {
        n_correct >= self.min_support.max(1) && n_correct as f64 / n_class as f64 >= self.min_recall
    }
}

pub type MinedLf = (LabelingFunction, LfStats);

/// Fixed-width bitset over dev point indices.
#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
    fn count_and(&self, other: &Bits) -> usize {
        self.0.iter().zip(&other.0).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }
}

struct ClassMasks {
    pos: Bits,
    neg: Bits,
    n_pos: usize,
    n_neg: usize,
}

impl ClassMasks {
    fn get(&self, label: Label) -> (&Bits, usize) {
        match label {
            Label::Pos => (&self.pos, self.n_pos),
            Label::Neg => (&self.neg, self.n_neg),
        }
    }
}

fn mine_categorical(
    dev: &Dataset,
    feature_id: &str,
    masks: &ClassMasks,
    classes: &[Label],
    config: &MinerConfig,
) -> Vec<MinedLf> {
    let n = dev.len();
    let mut vocab: BTreeSet<&str> = BTreeSet::new();
    for p in &dev.points {
        if let FeatureValue::CategoricalSet(s) = p.feature(feature_id) {
            vocab.extend(s.iter().map(String::as_str));
        }
    }
    let vocab: Vec<&str> = vocab.into_iter().collect();
    let mut tids: Vec<Bits> = vec![Bits::zeros(n); vocab.len()];
    for (i, p) in dev.points.iter().enumerate() {
        if let FeatureValue::CategoricalSet(s) = p.feature(feature_id) {
            for t in s {
                let k = vocab.binary_search(&t.as_str()).expect("token interned");
                tids[k].set(i);
            }
        }
    }

    let mut out = Vec::new();
    for &class in classes {
        let (class_mask, n_class) = masks.get(class);
        // level 1
        let mut level: Vec<(Vec<u32>, Bits)> = tids
            .iter()
            .enumerate()
            .filter(|(_, b)| config.is_frequent(b.count_and(class_mask), n_class))
            .map(|(k, b)| (vec![k as u32], b.clone()))
            .collect();
        let mut order = 1;
        loop {
            for (set, bits) in &level {
                let fired = bits.count();
                let correct = bits.count_and(class_mask);
                if config.emits(correct, fired, n_class) {
                    let lf = LabelingFunction::value_match(feature_id, set.iter().map(|&k| vocab[k as usize]), class);
                    out.push((lf, LfStats::from_counts(correct, fired, n_class, n)));
                }
            }
            if order >= config.max_order || level.len() < 2 {
                break;
            }
            // Apriori join on a shared (k-1)-prefix, then prune by k-subsets.
            let frequent: HashSet<&[u32]> = level.iter().map(|(s, _)| s.as_slice()).collect();
            let mut next = Vec::new();
            for a in 0..level.len() {
                for b in a + 1..level.len() {
                    let (sa, ba) = &level[a];
                    let (sb, bb) = &level[b];
                    let k = sa.len();
                    if sa[..k - 1] != sb[..k - 1] {
                        break; // level is sorted, so later b cannot share the prefix either
                    }
                    let mut cand = sa.clone();
                    cand.push(sb[k - 1]);
                    let all_subsets_frequent = (0..cand.len() - 2).all(|drop| {
                        let sub: Vec<u32> = cand
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != drop)
                            .map(|(_, &t)| t)
                            .collect();
                        frequent.contains(sub.as_slice())
                    });
                    if !all_subsets_frequent {
                        continue;
                    }
                    let bits = ba.and(bb);
                    if config.is_frequent(bits.count_and(class_mask), n_class) {
                        next.push((cand, bits));
                    }
                }
            }
            level = next;
            order += 1;
        }
    }
    out
}

/// Equi-quantile threshold candidates over the observed values.
fn quantile_thresholds(values: &mut [f64], count: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 || count == 0 {
        return Vec::new();
    }
    let mut out: Vec<f64> = (1..=count)
        .map(|i| values[((i * n) / (count + 1)).min(n - 1)])
        .collect();
    out.dedup();
    out
}

fn mine_numeric(
    dev: &Dataset,
    feature_id: &str,
    gold: &[Label],
    masks: &ClassMasks,
    classes: &[Label],
    config: &MinerConfig,
) -> Vec<MinedLf> {
    let n = dev.len();
    let observed: Vec<(f64, Label)> = dev
        .points
        .iter()
        .zip(gold)
        .filter_map(|(p, g)| match p.feature(feature_id) {
            FeatureValue::Numeric(x) => Some((*x, *g)),
            _ => None,
        })
        .collect();
    let mut values: Vec<f64> = observed.iter().map(|(x, _)| *x).collect();
    let thresholds = quantile_thresholds(&mut values, config.numeric_split_candidates);
    let mut out = Vec::new();
    for &class in classes {
        let (_, n_class) = masks.get(class);
        for &t in &thresholds {
            for cmp in [Comparator::Ge, Comparator::Le] {
                let (mut fired, mut correct) = (0, 0);
                for (x, g) in &observed {
                    if cmp.holds(*x, t) {
                        fired += 1;
                        if *g == class {
                            correct += 1;
                        }
                    }
                }
                if config.emits(correct, fired, n_class) {
                    out.push((
                        LabelingFunction::numeric_threshold(feature_id, cmp, t, class),
                        LfStats::from_counts(correct, fired, n_class, n),
                    ));
                }
            }
        }
    }
    out
}

/// Orders mined LFs by descending dev F1, then feature id, params and label.
pub fn sort_mined(lfs: &mut [MinedLf]) {
    lfs.sort_by(|(la, sa), (lb, sb)| {
        sb.f1()
            .total_cmp(&sa.f1())
            .then_with(|| la.feature_id.cmp(&lb.feature_id))
            .then_with(|| la.params.cmp_key(&lb.params))
            .then_with(|| lb.emit_label.cmp(&la.emit_label))
    });
}

/// Mines single-feature LFs from a gold-labeled dev set.
pub fn mine_lfs(dev: &Dataset, config: &MinerConfig) -> Result<Vec<MinedLf>> {
    config.validate()?;
    let gold = dev.gold_labels()?;
    let mut masks = ClassMasks {
        pos: Bits::zeros(dev.len()),
        neg: Bits::zeros(dev.len()),
        n_pos: 0,
        n_neg: 0,
    };
    for (i, g) in gold.iter().enumerate() {
        match g {
            Label::Pos => {
                masks.pos.set(i);
                masks.n_pos += 1;
            }
            Label::Neg => {
                masks.neg.set(i);
                masks.n_neg += 1;
            }
        }
    }
    if masks.n_pos == 0 {
        return Err(Error::MissingClass { label: 1 });
    }
    if masks.n_neg == 0 {
        return Err(Error::MissingClass { label: -1 });
    }
    let classes: Vec<Label> = if config.mine_negatives {
        vec![Label::Pos, Label::Neg]
    } else {
        vec![Label::Pos]
    };

    let features: Vec<(String, FeatureKind)> = dev
        .schema
        .features()
        .iter()
        .filter(|f| f.kind != FeatureKind::Embedding)
        .map(|f| (f.feature_id.clone(), f.kind))
        .collect();
    let per_feature = par::map(&features, |(fid, kind)| {
        let mut mined = match kind {
            FeatureKind::CategoricalMultivalent => mine_categorical(dev, fid, &masks, &classes, config),
            FeatureKind::Numeric => mine_numeric(dev, fid, &gold, &masks, &classes, config),
            FeatureKind::Embedding => Vec::new(),
        };
        let servable = dev.schema.get(fid).map(|d| d.servable).unwrap_or(true);
        for (lf, _) in &mut mined {
            lf.servable = servable;
        }
        mined
    });

    let mut seen = HashSet::new();
    let mut out: Vec<MinedLf> = per_feature
        .into_iter()
        .flatten()
        .filter(|(lf, _)| seen.insert(lf.lf_id.clone()))
        .collect();
    sort_mined(&mut out);
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct LfRecord {
    #[serde(flatten)]
    lf: LabelingFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stats: Option<LfStats>,
}

/// Line-delimited serialization of LFs with optional dev stats.
pub fn lfs_to_jsonl<'a>(lfs: impl IntoIterator<Item = (&'a LabelingFunction, Option<&'a LfStats>)>) -> String {
    let mut out = String::new();
    for (lf, stats) in lfs {
        let rec = LfRecord {
            lf: lf.clone(),
            stats: stats.copied(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("lf serializes"));
        out.push('\n');
    }
    out
}

pub fn read_lfs(reader: impl BufRead) -> Result<Vec<(LabelingFunction, Option<LfStats>)>> {
    let mut out = Vec::new();
    let mut ids = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LfRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if ids.insert(rec.lf.lf_id.clone(), i + 1).is_some() {
            return Err(Error::DuplicateId {
                line: i + 1,
                id: rec.lf.lf_id,
            });
        }
        out.push((rec.lf, rec.stats));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::types::{FeatureDef, FeatureSchema, Split};

    fn schema() -> Arc<FeatureSchema> {
        let mods: BTreeSet<String> = ["text".to_string(), "image".to_string()].into();
        let cat = |id: &str| FeatureDef {
            feature_id: id.into(),
            name: id.into(),
            kind: FeatureKind::CategoricalMultivalent,
            embedding_dim: None,
            servable: true,
            modalities: mods.clone(),
            feature_set: None,
        };
        Arc::new(
            FeatureSchema::new(vec![
                cat("profanity"),
                cat("setting"),
                cat("topic"),
                FeatureDef {
                    kind: FeatureKind::Numeric,
                    ..cat("score")
                },
            ])
            .unwrap(),
        )
    }

    fn pt(id: &str, feature: &str, tokens: &[&str], label: Label) -> DataPoint {
        DataPoint::new(id, "text")
            .with_feature(feature, FeatureValue::categorical(tokens.iter().copied()))
            .with_label(label)
    }

    /// 4 positives (3 with spamX), 4 negatives (none with spamX).
    fn spam_dev() -> Dataset {
        use Label::*;
        Dataset::new(
            schema(),
            Split::Dev,
            vec![
                pt("p1", "topic", &["spamX", "news"], Pos),
                pt("p2", "topic", &["spamX"], Pos),
                pt("p3", "topic", &["spamX", "sports"], Pos),
                pt("p4", "topic", &["news"], Pos),
                pt("n1", "topic", &["news"], Neg),
                pt("n2", "topic", &["sports"], Neg),
                pt("n3", "topic", &["news", "sports"], Neg),
                pt("n4", "topic", &["weather"], Neg),
            ],
        )
    }

    #[test]
    fn apply_profanity_example() {
        let lf = LabelingFunction::value_match("profanity", ["True"], Label::Pos);
        let p = DataPoint::new("t", "text")
            .with_feature("profanity", FeatureValue::categorical(["True"]))
            .with_feature("setting", FeatureValue::categorical(["outdoor"]));
        assert_eq!(apply_lf(&lf, &p, None).unwrap(), 1);
        let missing = DataPoint::new("t2", "text").with_feature("setting", FeatureValue::categorical(["outdoor"]));
        assert_eq!(apply_lf(&lf, &missing, None).unwrap(), 0);
    }

    #[test]
    fn value_match_requires_subset() {
        let lf = LabelingFunction::value_match("setting", ["outdoor", "indoor"], Label::Pos);
        let cases: [(&[&str], i8); 4] = [
            (&["outdoor"], 0),
            (&["indoor"], 0),
            (&["outdoor", "indoor"], 1),
            (&["outdoor", "indoor", "beach"], 1),
        ];
        for (tokens, want) in cases {
            let p = DataPoint::new("x", "image").with_feature("setting", FeatureValue::categorical(tokens.iter().copied()));
            assert_eq!(apply_lf(&lf, &p, None).unwrap(), want, "{tokens:?}");
        }
    }

    #[test]
    fn numeric_threshold_lf() {
        let lf = LabelingFunction::numeric_threshold("score", Comparator::Le, 0.5, Label::Neg);
        let p = |x| DataPoint::new("x", "text").with_feature("score", FeatureValue::Numeric(x));
        assert_eq!(apply_lf(&lf, &p(0.5), None).unwrap(), -1);
        assert_eq!(apply_lf(&lf, &p(0.6), None).unwrap(), 0);
        assert_eq!(apply_lf(&lf, &DataPoint::new("y", "text"), None).unwrap(), 0);
    }

    #[test]
    fn propagation_lf_without_scores_errors() {
        let lf = LabelingFunction {
            lf_id: "prop".into(),
            feature_id: PROPAGATION_FEATURE.into(),
            params: LfParams::PropagationThreshold {
                theta_pos: 0.8,
                theta_neg: 0.2,
                scores_ref: "scores".into(),
            },
            emit_label: Label::Pos,
            servable: false,
        };
        let err = apply_lf(&lf, &DataPoint::new("x", "text"), None).unwrap_err();
        assert!(matches!(err, Error::MissingPropagationScores { .. }));
    }

    #[test]
    fn evaluate_spam_lf() {
        let lf = LabelingFunction::value_match("topic", ["spamX"], Label::Pos);
        let s = evaluate_lf(&lf, &spam_dev(), None).unwrap();
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 0.75);
        assert_eq!(s.coverage, 0.375);
        assert_eq!(s.n_fired, 3);
        assert!(!s.degenerate);
    }

    #[test]
    fn never_firing_lf_is_degenerate() {
        let lf = LabelingFunction::value_match("topic", ["nothing"], Label::Pos);
        let s = evaluate_lf(&lf, &spam_dev(), None).unwrap();
        assert_eq!((s.precision, s.recall, s.coverage), (1.0, 0.0, 0.0));
        assert!(s.degenerate);
    }

    #[test]
    fn recall_undefined_without_target_class() {
        let mut dev = spam_dev();
        dev.points.retain(|p| p.gold_label == Some(Label::Neg));
        let lf = LabelingFunction::value_match("topic", ["spamX"], Label::Pos);
        assert!(matches!(
            evaluate_lf(&lf, &dev, None),
            Err(Error::UndefinedRecall { label: 1 })
        ));
    }

    #[test]
    fn mines_spam_token() {
        let cfg = MinerConfig {
            min_precision: 0.8,
            min_recall: 0.5,
            min_support: 2,
            max_order: 1,
            mine_negatives: false,
            ..MinerConfig::default()
        };
        let mined = mine_lfs(&spam_dev(), &cfg).unwrap();
        let ids: Vec<&str> = mined.iter().map(|(lf, _)| lf.lf_id.as_str()).collect();
        assert_eq!(ids, vec!["topic:spamX:+1"]);
        let (lf, stats) = &mined[0];
        assert_eq!(*stats, evaluate_lf(lf, &spam_dev(), None).unwrap());
    }

    #[test]
    fn perfect_thresholds_on_inseparable_data_mine_nothing() {
        use Label::*;
        let dev = Dataset::new(
            schema(),
            Split::Dev,
            (0..10)
                .map(|i| pt(&format!("p{i}"), "topic", &["a", "b"], if i % 2 == 0 { Pos } else { Neg }))
                .collect(),
        );
        let cfg = MinerConfig {
            min_precision: 1.0,
            min_recall: 1.0,
            min_support: 1,
            ..MinerConfig::default()
        };
        assert!(mine_lfs(&dev, &cfg).unwrap().is_empty());
    }

    #[test]
    fn single_class_dev_is_error() {
        let mut dev = spam_dev();
        dev.points.retain(|p| p.gold_label == Some(Label::Pos));
        assert!(matches!(
            mine_lfs(&dev, &MinerConfig::default()),
            Err(Error::MissingClass { label: -1 })
        ));
    }

    /// 40 points, 20 per class. u and v each have precision 0.7 alone;
    /// {u,v} has precision 10/11 and recall 0.5.
    fn pair_dev() -> Dataset {
        use Label::*;
        let mut pts = Vec::new();
        let mut push = |tokens: &[&str], label, n: usize| {
            for _ in 0..n {
                let id = format!("x{}", pts.len());
                pts.push(pt(&id, "topic", tokens, label));
            }
        };
        // positives: 10 with {u,v}, 4 with {u}, 4 with {v}, 2 with {w}
        push(&["u", "v"], Pos, 10);
        push(&["u"], Pos, 4);
        push(&["v"], Pos, 4);
        push(&["w"], Pos, 2);
        // negatives: {u,v} once (so pair precision 10/11 ~ 0.909), u alone 5, v alone 5, w 9
        push(&["u", "v"], Neg, 1);
        push(&["u"], Neg, 5);
        push(&["v"], Neg, 5);
        push(&["w"], Neg, 9);
        Dataset::new(schema(), Split::Dev, pts)
    }

    #[test]
    fn pair_survives_only_at_order_two() {
        let dev = pair_dev();
        // brute-force counts
        let u = evaluate_lf(&LabelingFunction::value_match("topic", ["u"], Label::Pos), &dev, None).unwrap();
        let v = evaluate_lf(&LabelingFunction::value_match("topic", ["v"], Label::Pos), &dev, None).unwrap();
        let uv = evaluate_lf(&LabelingFunction::value_match("topic", ["u", "v"], Label::Pos), &dev, None).unwrap();
        assert_eq!(u.precision, 0.7);
        assert_eq!(v.precision, 0.7);
        assert!(uv.precision >= 0.9 && uv.recall == 0.5, "{uv:?}");

        let base = MinerConfig {
            min_precision: 0.9,
            min_recall: 0.4,
            min_support: 2,
            mine_negatives: false,
            ..MinerConfig::default()
        };
        let order1 = mine_lfs(&dev, &MinerConfig { max_order: 1, ..base.clone() }).unwrap();
        assert!(order1.is_empty());
        let order2 = mine_lfs(&dev, &MinerConfig { max_order: 2, ..base }).unwrap();
        let ids: Vec<&str> = order2.iter().map(|(lf, _)| lf.lf_id.as_str()).collect();
        assert_eq!(ids, vec!["topic:u+v:+1"]);
    }

    #[test]
    fn numeric_features_are_swept() {
        use Label::*;
        let pts = (0..40)
            .map(|i| {
                let label = if i < 10 { Pos } else { Neg };
                DataPoint::new(format!("n{i}"), "text")
                    .with_feature("score", FeatureValue::Numeric(if label == Pos { 10.0 + i as f64 } else { i as f64 - 40.0 }))
                    .with_label(label)
            })
            .collect();
        let dev = Dataset::new(schema(), Split::Dev, pts);
        let cfg = MinerConfig {
            min_precision: 0.95,
            min_recall: 0.5,
            min_support: 2,
            ..MinerConfig::default()
        };
        let mined = mine_lfs(&dev, &cfg).unwrap();
        assert!(mined
            .iter()
            .any(|(lf, s)| lf.emit_label == Pos && matches!(lf.params, LfParams::NumericThreshold { comparator: Comparator::Ge, .. }) && s.precision == 1.0));
        for (lf, s) in &mined {
            assert_eq!(*s, evaluate_lf(lf, &dev, None).unwrap(), "{}", lf.lf_id);
        }
    }

    #[test]
    fn lf_jsonl_roundtrip() {
        let mined = mine_lfs(&spam_dev(), &MinerConfig { min_support: 1, min_recall: 0.2, ..MinerConfig::default() }).unwrap();
        assert!(!mined.is_empty());
        let s = lfs_to_jsonl(mined.iter().map(|(l, s)| (l, Some(s))));
        let back = read_lfs(s.as_bytes()).unwrap();
        assert_eq!(back.len(), mined.len());
        for ((a, sa), (b, sb)) in mined.iter().zip(&back) {
            assert_eq!(a, b);
            assert_eq!(Some(*sa), *sb);
        }
        let first: serde_json::Value = serde_json::from_str(s.lines().next().unwrap()).unwrap();
        for key in ["lf_id", "kind", "feature_id", "params", "emit_label", "stats"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
    }
}
