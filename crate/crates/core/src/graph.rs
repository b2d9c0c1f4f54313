//! Cross-modal similarity graph over the common feature space and
//! harmonic label propagation from gold seeds.
//!
//! Edge weights sum one similarity in [0, 1] per feature present in both
//! endpoints: Jaccard for categorical sets, `1 - |a - b|` on min-max scaled
//! numerics and `1 - ||a - b|| / d_max` for embeddings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::encoding::min_max_scale;
use crate::error::{Error, Result};
use crate::lf::{LabelingFunction, LfParams, PROPAGATION_FEATURE};
use crate::par;
use crate::types::{Dataset, FeatureKind, FeatureSchema, FeatureValue, Label};

pub const PROPAGATION_SCORES_REF: &str = "propagation_scores";

/// Above this many points the embedding `d_max` is estimated on an evenly
/// strided subsample.
const DMAX_EXACT_LIMIT: usize = 1000;

/// Rows weighed per parallel block in graph construction.
const PAIR_BLOCK: usize = 128;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormStats {
    /// feature id -> (min, max)
    pub numeric: BTreeMap<String, (f64, f64)>,
    /// feature id -> max pairwise Euclidean distance estimate
    pub embedding_dmax: BTreeMap<String, f64>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Fits per-feature normalization over the node population.
pub fn fit_norm_stats(datasets: &[&Dataset]) -> NormStats {
    let mut stats = NormStats::default();
    let Some(first) = datasets.first() else {
        return stats;
    };
    for def in first.schema.features() {
        let values = datasets.iter().flat_map(|d| d.points.iter()).map(|p| p.feature(&def.feature_id));
        match def.kind {
            FeatureKind::Numeric => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for v in values {
                    if let FeatureValue::Numeric(x) = v {
                        lo = lo.min(*x);
                        hi = hi.max(*x);
                    }
                }
                if lo <= hi {
                    stats.numeric.insert(def.feature_id.clone(), (lo, hi));
                }
            }
            FeatureKind::Embedding => {
                let vecs: Vec<&[f64]> = values
                    .filter_map(|v| match v {
                        FeatureValue::Embedding(e) => Some(e.as_slice()),
                        _ => None,
                    })
                    .collect();
                let sample: Vec<&[f64]> = if vecs.len() <= DMAX_EXACT_LIMIT {
                    vecs
                } else {
                    let stride = vecs.len() as f64 / DMAX_EXACT_LIMIT as f64;
                    (0..DMAX_EXACT_LIMIT).map(|i| vecs[(i as f64 * stride) as usize]).collect()
                };
                let mut dmax: f64 = 0.0;
                for i in 0..sample.len() {
                    for j in i + 1..sample.len() {
                        dmax = dmax.max(euclid(sample[i], sample[j]));
                    }
                }
                stats.embedding_dmax.insert(def.feature_id.clone(), dmax);
            }
            FeatureKind::CategoricalMultivalent => {}
        }
    }
    stats
}

#[derive(Debug, Clone)]
enum Compact {
    Missing,
    Cat(Vec<u32>),
    /// Categorical set over a vocabulary of at most 64 tokens.
    Bits(u64),
    Num(f64),
    Emb(Vec<f64>),
}

/// Feature values interned and normalized for fast pairwise weights.
struct Compactor<'a> {
    schema: &'a FeatureSchema,
    norm: &'a NormStats,
    tokens: Vec<HashMap<String, u32>>,
    dmax: Vec<f64>,
}

impl<'a> Compactor<'a> {
    fn new(schema: &'a FeatureSchema, norm: &'a NormStats) -> Self {
        let dmax = schema
            .features()
            .iter()
            .map(|f| norm.embedding_dmax.get(&f.feature_id).copied().unwrap_or(0.0))
            .collect();
        Compactor {
            schema,
            norm,
            tokens: vec![HashMap::new(); schema.len()],
            dmax,
        }
    }

    fn compact(&mut self, features: &BTreeMap<String, FeatureValue>) -> Vec<Compact> {
        let mut out = vec![Compact::Missing; self.schema.len()];
        for (fid, value) in features {
            let Some(k) = self.schema.position(fid) else {
                continue;
            };
            let def = &self.schema.features()[k];
            out[k] = match (def.kind, value) {
                (FeatureKind::CategoricalMultivalent, FeatureValue::CategoricalSet(s)) => {
                    let table = &mut self.tokens[k];
                    let mut ids: Vec<u32> = s
                        .iter()
                        .map(|t| {
                            let next = table.len() as u32;
                            *table.entry(t.clone()).or_insert(next)
                        })
                        .collect();
                    ids.sort_unstable();
                    Compact::Cat(ids)
                }
                (FeatureKind::Numeric, FeatureValue::Numeric(x)) => {
                    let (lo, hi) = self.norm.numeric.get(fid).copied().unwrap_or((0.0, 0.0));
                    Compact::Num(min_max_scale(*x, lo, hi))
                }
                (FeatureKind::Embedding, FeatureValue::Embedding(v)) => Compact::Emb(v.clone()),
                _ => Compact::Missing,
            };
        }
        out
    }

    /// Rewrites categorical sets as bitmasks for features whose interned
    /// vocabulary fits in 64 tokens. Must run after every point is compacted.
    fn pack(&self, points: &mut [Vec<Compact>]) {
        let small: Vec<bool> = self.tokens.iter().map(|t| t.len() <= 64).collect();
        for p in points {
            for (k, v) in p.iter_mut().enumerate() {
                if let (true, Compact::Cat(ids)) = (small[k], &*v) {
                    *v = Compact::Bits(ids.iter().fold(0u64, |m, &i| m | (1 << i)));
                }
            }
        }
    }
}

fn jaccard_sorted(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn compact_weight(a: &[Compact], b: &[Compact], dmax: &[f64]) -> f64 {
    let mut w = 0.0;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        w += match (x, y) {
            (Compact::Bits(x), Compact::Bits(y)) => {
                let union = (x | y).count_ones();
                if union == 0 {
                    0.0
                } else {
                    (x & y).count_ones() as f64 / union as f64
                }
            }
            (Compact::Cat(x), Compact::Cat(y)) => jaccard_sorted(x, y),
            (Compact::Num(x), Compact::Num(y)) => 1.0 - (x - y).abs(),
            (Compact::Emb(x), Compact::Emb(y)) => {
                let d = euclid(x, y);
                if dmax[k] > 0.0 {
                    (1.0 - d / dmax[k]).clamp(0.0, 1.0)
                } else if d == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
    }
    w
}

/// Similarity weight between two feature maps. Features missing from either
/// side contribute nothing, so `0 <= w <= #features present in both`.
pub fn compute_weight(
    fi: &BTreeMap<String, FeatureValue>,
    fj: &BTreeMap<String, FeatureValue>,
    schema: &FeatureSchema,
    norm: &NormStats,
) -> f64 {
    let mut c = Compactor::new(schema, norm);
    let a = c.compact(fi);
    let b = c.compact(fj);
    compact_weight(&a, &b, &c.dmax)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub k_neighbors: usize,
    pub min_weight: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            k_neighbors: 10,
            min_weight: 0.0,
            tol: 1e-6,
            max_iters: 1000,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be >= 1".into()));
        }
        if !(self.min_weight >= 0.0) {
            return Err(Error::Config("min_weight must be >= 0".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub node_ids: Vec<String>,
    pub modalities: Vec<String>,
    /// Symmetric adjacency, sorted by neighbor index.
    pub adjacency: Vec<Vec<(u32, f64)>>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge<'a> {
    pub src: &'a str,
    pub dst: &'a str,
    pub weight: f64,
}

impl SimilarityGraph {
    /// Builds a graph from explicit undirected edges (`i < j` or not, each
    /// listed once); used for hand-built instances.
    pub fn from_edges(node_ids: Vec<String>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = node_ids.len();
        let mut adj: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Graph(format!("edge ({i},{j}) out of range")));
            }
            if i == j {
                return Err(Error::Graph("self-edges are not allowed".into()));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Graph(format!("invalid weight {w}")));
            }
            adj[i].insert(j as u32, w);
            adj[j].insert(i as u32, w);
        }
        Self::assemble(node_ids, vec![String::new(); n], adj)
    }

    fn assemble(node_ids: Vec<String>, modalities: Vec<String>, adj: Vec<BTreeMap<u32, f64>>) -> Result<Self> {
        let mut index = HashMap::with_capacity(node_ids.len());
        for (i, id) in node_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Graph(format!("duplicate node id {id:?}")));
            }
        }
        Ok(SimilarityGraph {
            node_ids,
            modalities,
            adjacency: adj.into_iter().map(|m| m.into_iter().collect()).collect(),
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let row = &self.adjacency[i];
        row.binary_search_by_key(&(j as u32), |&(k, _)| k).ok().map(|p| row[p].1)
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `src` index below `dst` index.
    pub fn edges(&self) -> impl Iterator<Item = Edge<'_>> {
        self.adjacency.iter().enumerate().flat_map(move |(i, row)| {
            row.iter().filter(move |&&(j, _)| (j as usize) > i).map(move |&(j, w)| Edge {
                src: &self.node_ids[i],
                dst: &self.node_ids[j as usize],
                weight: w,
            })
        })
    }

    pub fn edges_to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in self.edges() {
            out.push_str(&serde_json::to_string(&e).expect("edge serializes"));
            out.push('\n');
        }
        out
    }
}

/// Bounded best-k list ordered by (weight desc, id rank asc).
struct TopK {
    k: usize,
    items: Vec<(f64, u32, u32)>, // (weight, rank, node)
}

impl TopK {
    fn better(a: (f64, u32), b: (f64, u32)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    fn offer(&mut self, w: f64, rank: u32, node: u32) {
        if self.items.len() == self.k {
            let last = self.items[self.k - 1];
            if !Self::better((w, rank), (last.0, last.1)) {
                return;
            }
            self.items.pop();
        }
        let pos = self
            .items
            .iter()
            .position(|&(w2, r2, _)| Self::better((w, rank), (w2, r2)))
            .unwrap_or(self.items.len());
        self.items.insert(pos, (w, rank, node));
    }
}

/// Builds the top-k similarity graph over every point of `datasets`.
pub fn build_graph(datasets: &[&Dataset], config: &GraphConfig, norm: &NormStats) -> Result<SimilarityGraph> {
    config.validate()?;
    let Some(first) = datasets.first() else {
        return Err(Error::Graph("no datasets".into()));
    };
    let schema = first.schema.clone();
    if datasets.iter().any(|d| *d.schema != *schema) {
        return Err(Error::Graph("datasets do not share a schema".into()));
    }
    let points: Vec<_> = datasets.iter().flat_map(|d| d.points.iter()).collect();
    let n = points.len();
    if n < 2 {
        return Err(Error::Graph(format!("need at least 2 nodes, got {n}")));
    }
    let mut compactor = Compactor::new(&schema, norm);
    let mut compact: Vec<Vec<Compact>> = points.iter().map(|p| compactor.compact(&p.features)).collect();
    compactor.pack(&mut compact);
    let dmax = compactor.dmax.clone();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].id.cmp(&points[b].id));
    let mut rank = vec![0u32; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as u32;
    }

    // Each pair is scored once: a block of rows is weighed against every
    // later node in parallel, then offered to both endpoints in order.
    let k = config.k_neighbors.min(n - 1);
    let mut tops: Vec<TopK> = (0..n)
        .map(|_| TopK {
            k,
            items: Vec::with_capacity(k + 1),
        })
        .collect();
    let mut start = 0;
    while start < n {
        let end = (start + PAIR_BLOCK).min(n);
        let rows = par::map_range(end - start, |r| {
            let i = start + r;
            ((i + 1)..n)
                .map(|j| compact_weight(&compact[i], &compact[j], &dmax))
                .collect::<Vec<f64>>()
        });
        for (r, ws) in rows.into_iter().enumerate() {
            let i = start + r;
            for (off, w) in ws.into_iter().enumerate() {
                let j = i + 1 + off;
                tops[i].offer(w, rank[j], j as u32);
                tops[j].offer(w, rank[i], i as u32);
            }
        }
        start = end;
    }
    let tops: Vec<Vec<(f64, u32, u32)>> = tops.into_iter().map(|t| t.items).collect();

    let mut adj: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n];
    for (i, items) in tops.into_iter().enumerate() {
        for (w, _, j) in items {
            if w > 0.0 && w >= config.min_weight {
                adj[i].insert(j, w);
                adj[j as usize].insert(i as u32, w);
            }
        }
    }
    SimilarityGraph::assemble(
        points.iter().map(|p| p.id.clone()).collect(),
        points.iter().map(|p| p.modality.clone()).collect(),
        adj,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationScores {
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
    pub clamped: BTreeSet<String>,
    pub iterations_run: usize,
    pub final_delta: f64,
    pub converged: bool,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ScoreRecord {
    id: String,
    score: f64,
}

impl PropagationScores {
    pub fn new(ids: Vec<String>, scores: Vec<f64>) -> Self {
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        PropagationScores {
            ids,
            scores,
            clamped: BTreeSet::new(),
            iterations_run: 0,
            final_delta: 0.0,
            converged: true,
            index,
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.index.get(id).map(|&i| self.scores[i])
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `{"id", "score"}` lines in node order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, &score) in self.ids.iter().zip(&self.scores) {
            let rec = ScoreRecord { id: id.clone(), score };
            out.push_str(&serde_json::to_string(&rec).expect("score serializes"));
            out.push('\n');
        }
        out
    }

    /// Reads a score table; diagnostics and clamped ids are not stored in it.
    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let (mut ids, mut scores) = (Vec::new(), Vec::new());
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScoreRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if !(0.0..=1.0).contains(&rec.score) {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("score {} outside [0,1]", rec.score),
                });
            }
            ids.push(rec.id);
            scores.push(rec.score);
        }
        Ok(Self::new(ids, scores))
    }
}

/// Jacobi sweeps of `s_i <- sum_j w_ij s_j / sum_j w_ij` over unlabeled
/// nodes with seeds clamped. Isolated unlabeled nodes keep 0.5.
pub fn propagate(graph: &SimilarityGraph, seeds: &BTreeMap<String, f64>, config: &GraphConfig) -> Result<PropagationScores> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::Graph("propagation needs at least one seed".into()));
    }
    let n = graph.len();
    let mut scores = vec![0.5; n];
    let mut is_seed = vec![false; n];
    for (id, &s) in seeds {
        let i = graph
            .node_index(id)
            .ok_or_else(|| Error::Graph(format!("seed {id:?} is not a graph node")))?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Graph(format!("seed score {s} for {id:?} outside [0,1]")));
        }
        scores[i] = s;
        is_seed[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_seed[i] && !graph.adjacency[i].is_empty()).collect();

    let (mut iterations, mut delta) = (0, 0.0);
    let mut converged = true;
    if !free.is_empty() {
        converged = false;
        while iterations < config.max_iters {
            let updates = par::map(&free, |&i| {
                let (mut num, mut den) = (0.0, 0.0);
                for &(j, w) in &graph.adjacency[i] {
                    num += w * scores[j as usize];
                    den += w;
                }
                if den > 0.0 {
                    num / den
                } else {
                    scores[i]
                }
            });
            delta = 0.0f64;
            for (&i, s) in free.iter().zip(updates) {
                delta = delta.max((s - scores[i]).abs());
                scores[i] = s;
            }
            iterations += 1;
            if delta < config.tol {
                converged = true;
                break;
            }
        }
    }
    let mut out = PropagationScores::new(graph.node_ids.clone(), scores);
    out.clamped = seeds.keys().cloned().collect();
    out.iterations_run = iterations;
    out.final_delta = delta;
    out.converged = converged;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta_pos: f64,
    pub theta_neg: f64,
    pub dev_f1: f64,
    /// The tuned labeler never emits one of the two labels on dev.
    pub degenerate: bool,
}

/// F1 of one emitted class: `2 correct / (fires + class size)`, 0 when
/// nothing is correct.
fn class_f1(correct: usize, fires: usize, class_size: usize) -> f64 {
    if correct == 0 {
        0.0
    } else {
        2.0 * correct as f64 / (fires + class_size) as f64
    }
}

/// Picks the (theta_pos >= theta_neg) band maximizing dev macro-F1 of the
/// induced three-way labeler: the mean of the +1 and -1 class F1, where
/// abstentions count against recall. Ties prefer the wider abstain band,
/// then the lower theta_neg.
pub fn tune_thresholds(scores: &PropagationScores, dev: &Dataset) -> Result<Thresholds> {
    if dev.is_empty() {
        return Err(Error::Graph("threshold tuning needs a non-empty dev set".into()));
    }
    let gold = dev.gold_labels()?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (p, g) in dev.points.iter().zip(&gold) {
        if scores.clamped.contains(&p.id) {
            return Err(Error::Graph(format!("dev point {:?} was a propagation seed", p.id)));
        }
        let s = scores
            .get(&p.id)
            .ok_or_else(|| Error::Graph(format!("dev point {:?} has no propagation score", p.id)))?;
        match g {
            Label::Pos => pos.push(s),
            Label::Neg => neg.push(s),
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Graph("threshold tuning needs both classes in dev".into()));
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut cands: Vec<f64> = pos.iter().chain(&neg).copied().chain([0.0, 1.0]).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();

    let count_ge = |v: &[f64], t: f64| v.len() - v.partition_point(|&x| x < t);
    let count_le = |v: &[f64], t: f64| v.partition_point(|&x| x <= t);
    let count_lt = |v: &[f64], t: f64| v.partition_point(|&x| x < t);

    // (f1, theta_pos, theta_neg, n_plus, n_minus)
    let mut best: Option<(f64, f64, f64, usize, usize)> = None;
    for (a, &tp_theta) in cands.iter().enumerate() {
        let tp = count_ge(&pos, tp_theta);
        let fp = count_ge(&neg, tp_theta);
        let f1_pos = class_f1(tp, tp + fp, pos.len());
        for &tn_theta in &cands[..=a] {
            // score >= theta_pos wins when the band is empty
            let (tn, fnn) = if tn_theta < tp_theta {
                (count_le(&neg, tn_theta), count_le(&pos, tn_theta))
            } else {
                (count_lt(&neg, tp_theta), count_lt(&pos, tp_theta))
            };
            let f1 = 0.5 * (f1_pos + class_f1(tn, tn + fnn, neg.len()));
            let better = match best {
                None => true,
                Some((bf1, bp, bn, ..)) => {
                    f1 > bf1
                        || (f1 == bf1
                            && ((tp_theta - tn_theta) > (bp - bn)
                                || ((tp_theta - tn_theta) == (bp - bn) && tn_theta < bn)))
                }
            };
            if better {
                best = Some((f1, tp_theta, tn_theta, tp + fp, tn + fnn));
            }
        }
    }
    let (f1, theta_pos, theta_neg, n_plus, n_minus) = best.expect("at least one candidate");
    Ok(Thresholds {
        theta_pos,
        theta_neg,
        dev_f1: f1,
        degenerate: n_plus == 0 || n_minus == 0,
    })
}

/// Packages tuned thresholds as a nonservable propagation-threshold LF.
pub fn as_lf(scores_ref: &str, theta_pos: f64, theta_neg: f64) -> Result<LabelingFunction> {
    if !(theta_pos >= theta_neg) {
        return Err(Error::Config(format!(
            "theta_pos {theta_pos} must be >= theta_neg {theta_neg}"
        )));
    }
    Ok(LabelingFunction {
        lf_id: format!("{PROPAGATION_FEATURE}:[{theta_neg},{theta_pos}]"),
        feature_id: PROPAGATION_FEATURE.into(),
        params: LfParams::PropagationThreshold {
            theta_pos,
            theta_neg,
            scores_ref: scores_ref.to_string(),
        },
        emit_label: Label::Pos,
        servable: false,
    })
}
