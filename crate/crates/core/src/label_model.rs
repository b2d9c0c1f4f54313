//! Generative label model: applies LFs to unlabeled data and fits per-LF
//! accuracies by EM under conditionally independent, abstention-uninformative
//! LFs.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PropagationScores;
use crate::lf::{apply_lf, LabelingFunction};
use crate::par;
use crate::types::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabelMatrix {
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    /// Row-major, entries in {-1, 0, +1}.
    entries: Vec<i8>,
}

impl WeakLabelMatrix {
    pub fn new(row_ids: Vec<String>, col_ids: Vec<String>, entries: Vec<i8>) -> Result<Self> {
        if entries.len() != row_ids.len() * col_ids.len() {
            return Err(Error::LabelModel(format!(
                "{} entries for a {}x{} matrix",
                entries.len(),
                row_ids.len(),
                col_ids.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::LabelModel(format!("entry {bad} not in {{-1,0,+1}}")));
        }
        Ok(WeakLabelMatrix {
            row_ids,
            col_ids,
            entries,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_ids.len()
    }

    pub fn row(&self, i: usize) -> &[i8] {
        let m = self.n_cols();
        &self.entries[i * m..(i + 1) * m]
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n_cols() + j]
    }

    /// Every entry negated.
    pub fn negated(&self) -> Self {
        WeakLabelMatrix {
            row_ids: self.row_ids.clone(),
            col_ids: self.col_ids.clone(),
            entries: self.entries.iter().map(|v| -v).collect(),
        }
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(self.n_rows() * cols.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            entries.extend(cols.iter().map(|&j| row[j]));
        }
        WeakLabelMatrix {
            row_ids: self.row_ids.clone(),
            col_ids: cols.iter().map(|&j| self.col_ids[j].clone()).collect(),
            entries,
        }
    }

    /// Fraction of rows with at least one non-abstain entry.
    pub fn coverage(&self) -> f64 {
        if self.n_rows() == 0 {
            return 0.0;
        }
        let covered = (0..self.n_rows()).filter(|&i| self.row(i).iter().any(|&v| v != 0)).count();
        covered as f64 / self.n_rows() as f64
    }
}

pub fn apply_lfs(lfs: &[LabelingFunction], data: &Dataset, scores: Option<&PropagationScores>) -> Result<WeakLabelMatrix> {
    if scores.is_none() {
        if let Some(lf) = lfs.iter().find(|lf| lf.needs_scores()) {
            return Err(Error::MissingPropagationScores { lf_id: lf.lf_id.clone() });
        }
    }
    let rows = par::map(&data.points, |p| lfs.iter().map(|lf| apply_lf(lf, p, scores)).collect::<Result<Vec<i8>>>());
    let mut entries = Vec::with_capacity(data.len() * lfs.len());
    for r in rows {
        entries.extend(r?);
    }
    WeakLabelMatrix::new(
        data.points.iter().map(|p| p.id.clone()).collect(),
        lfs.iter().map(|lf| lf.lf_id.clone()).collect(),
        entries,
    )
}

/// Point id -> P(y = +1).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbLabels {
    pub ids: Vec<String>,
    pub p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProbRecord {
    id: String,
    p: f64,
}

impl ProbLabels {
    pub fn new(ids: Vec<String>, p: Vec<f64>) -> Result<Self> {
        if ids.len() != p.len() {
            return Err(Error::LabelModel("ids and probabilities differ in length".into()));
        }
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::LabelModel(format!("probability {bad} outside [0,1]")));
        }
        Ok(ProbLabels { ids, p })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_map(&self) -> HashMap<&str, f64> {
        self.ids.iter().map(String::as_str).zip(self.p.iter().copied()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (id, &p) in self.ids.iter().zip(&self.p) {
            out.push_str(&serde_json::to_string(&ProbRecord { id: id.clone(), p }).expect("serializes"));
            out.push('\n');
        }
        out
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let (mut ids, mut p) = (Vec::new(), Vec::new());
        for (i, line) in reader.lines().enumerate() {
            let parse_err = |reason: String| Error::Parse { line: i + 1, reason };
            let line = line.map_err(|e| parse_err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ProbRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            ids.push(rec.id);
            p.push(rec.p);
        }
        Self::new(ids, p)
    }
}

/// p = 1 for a positive vote sum, 0 for negative, 0.5 on ties and empty rows.
pub fn majority_vote(matrix: &WeakLabelMatrix) -> ProbLabels {
    let p = (0..matrix.n_rows())
        .map(|i| match matrix.row(i).iter().map(|&v| v as i64).sum::<i64>() {
            s if s > 0 => 1.0,
            s if s < 0 => 0.0,
            _ => 0.5,
        })
        .collect();
    ProbLabels {
        ids: matrix.row_ids.clone(),
        p,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelModelConfig {
    pub pi_init: f64,
    pub alpha_init: f64,
    pub max_em_iters: usize,
    pub em_tol: f64,
    pub clamp: (f64, f64),
}

impl Default for LabelModelConfig {
    fn default() -> Self {
        LabelModelConfig {
            pi_init: 0.5,
            alpha_init: 0.7,
            max_em_iters: 100,
            em_tol: 1e-6,
            clamp: (0.01, 0.99),
        }
    }
}

impl LabelModelConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.clamp;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!("clamp ({lo}, {hi}) must satisfy 0 < lo < hi < 1")));
        }
        for (name, v) in [("pi_init", self.pi_init), ("alpha_init", self.alpha_init)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0,1), got {v}")));
            }
        }
        if !(self.em_tol > 0.0) {
            return Err(Error::Config("em_tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModelParams {
    pub lf_ids: Vec<String>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub pi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelModelFit {
    pub params: LabelModelParams,
    /// Observed-data log-likelihood at the initial parameters and after every
    /// EM update.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The fitted solution was mirrored to agree with majority vote.
    pub flipped: bool,
}

/// Sparse rows: (column, sign) for every fire.
fn sparse_rows(matrix: &WeakLabelMatrix) -> Vec<Vec<(u32, i8)>> {
    (0..matrix.n_rows())
        .map(|i| {
            matrix
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(j, &v)| (j as u32, v))
                .collect()
        })
        .collect()
}

/// Log joint of the fired entries under y = +1 and y = -1.
fn log_joint(row: &[(u32, i8)], ln_a: &[f64], ln_1a: &[f64], pi: f64) -> (f64, f64) {
    let (mut lp, mut ln) = (pi.ln(), (1.0 - pi).ln());
    for &(j, v) in row {
        let j = j as usize;
        if v > 0 {
            lp += ln_a[j];
            ln += ln_1a[j];
        } else {
            lp += ln_1a[j];
            ln += ln_a[j];
        }
    }
    (lp, ln)
}

/// Posterior from the two log joints, written so that swapping them yields
/// exactly `1 - p`.
fn posterior(lp: f64, ln: f64) -> f64 {
    if lp >= ln {
        1.0 / (1.0 + (ln - lp).exp())
    } else {
        1.0 - 1.0 / (1.0 + (lp - ln).exp())
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn e_step(rows: &[Vec<(u32, i8)>], alpha: &[f64], pi: f64) -> (Vec<f64>, f64) {
    let ln_a: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
    let ln_1a: Vec<f64> = alpha.iter().map(|a| (1.0 - a).ln()).collect();
    let out = par::map(rows, |row| {
        if row.is_empty() {
            return (pi, 0.0);
        }
        let (lp, ln) = log_joint(row, &ln_a, &ln_1a, pi);
        (posterior(lp, ln), log_sum_exp(lp, ln))
    });
    let ll = out.iter().map(|(_, l)| l).sum();
    (out.into_iter().map(|(p, _)| p).collect(), ll)
}

pub fn fit_label_model(matrix: &WeakLabelMatrix, config: &LabelModelConfig) -> Result<LabelModelFit> {
    config.validate()?;
    let m = matrix.n_cols();
    if m == 0 {
        return Err(Error::LabelModel("label model needs at least one LF".into()));
    }
    let rows = sparse_rows(matrix);
    let mut fires = vec![0usize; m];
    for row in &rows {
        for &(j, _) in row {
            fires[j as usize] += 1;
        }
    }
    if fires.iter().all(|&f| f == 0) {
        return Err(Error::LabelModel("every entry of the weak label matrix abstains".into()));
    }
    let (lo, hi) = config.clamp;
    let n = matrix.n_rows() as f64;
    let beta: Vec<f64> = fires.iter().map(|&f| (f as f64 / n).clamp(lo, 1.0)).collect();

    let mut alpha = vec![config.alpha_init.clamp(lo, hi); m];
    let mut pi = config.pi_init.clamp(lo, hi);
    let (mut post, ll0) = e_step(&rows, &alpha, pi);
    let mut trace = vec![ll0];
    let (mut iterations, mut converged) = (0, false);

    while iterations < config.max_em_iters {
        let mut agree = vec![0.0; m];
        for (row, &p) in rows.iter().zip(&post) {
            for &(j, v) in row {
                agree[j as usize] += if v > 0 { p } else { 1.0 - p };
            }
        }
        let new_alpha: Vec<f64> = (0..m)
            .map(|j| {
                if fires[j] == 0 {
                    alpha[j]
                } else {
                    (agree[j] / fires[j] as f64).clamp(lo, hi)
                }
            })
            .collect();
        let new_pi = (post.iter().sum::<f64>() / n).clamp(lo, hi);
        let change = alpha
            .iter()
            .zip(&new_alpha)
            .map(|(a, b)| (a - b).abs())
            .fold((pi - new_pi).abs(), f64::max);
        alpha = new_alpha;
        pi = new_pi;
        iterations += 1;
        let (p, ll) = e_step(&rows, &alpha, pi);
        post = p;
        trace.push(ll);
        if change < config.em_tol {
            converged = true;
            break;
        }
    }

    // The model is identifiable only up to a global flip; side with majority vote.
    let mv = majority_vote(matrix);
    let (mut agree, mut disagree) = (0usize, 0usize);
    for (&q, &v) in post.iter().zip(&mv.p) {
        if v == 0.5 || q == 0.5 {
            continue;
        }
        if (q > 0.5) == (v > 0.5) {
            agree += 1;
        } else {
            disagree += 1;
        }
    }
    let flipped = disagree > agree;
    if flipped {
        for a in &mut alpha {
            *a = 1.0 - *a;
        }
        pi = 1.0 - pi;
    }

    Ok(LabelModelFit {
        params: LabelModelParams {
            lf_ids: matrix.col_ids.clone(),
            alpha,
            beta,
            pi,
        },
        log_likelihood: trace,
        iterations,
        converged,
        flipped,
    })
}

pub fn predict_prob_labels(params: &LabelModelParams, matrix: &WeakLabelMatrix) -> Result<ProbLabels> {
    if matrix.n_cols() != params.alpha.len() {
        return Err(Error::LabelModel(format!(
            "matrix has {} columns, model has {} LFs",
            matrix.n_cols(),
            params.alpha.len()
        )));
    }
    let rows = sparse_rows(matrix);
    let (p, _) = e_step(&rows, &params.alpha, params.pi);
    Ok(ProbLabels {
        ids: matrix.row_ids.clone(),
        p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfAudit {
    pub lf_id: String,
    pub alpha: f64,
    pub beta: f64,
    pub pi: f64,
    /// Fitted accuracy below 0.5: the LF disagrees with the consensus more
    /// often than not. Kept clamped, not flipped.
    pub below_chance: bool,
}

pub fn audit_records(params: &LabelModelParams) -> Vec<LfAudit> {
    params
        .lf_ids
        .iter()
        .zip(params.alpha.iter().zip(&params.beta))
        .map(|(id, (&alpha, &beta))| LfAudit {
            lf_id: id.clone(),
            alpha,
            beta,
            pi: params.pi,
            below_chance: alpha < 0.5,
        })
        .collect()
}

pub fn audit_jsonl(params: &LabelModelParams) -> String {
    let mut out = String::new();
    for rec in audit_records(params) {
        out.push_str(&serde_json::to_string(&rec).expect("serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::types::{DataPoint, FeatureDef, FeatureKind, FeatureSchema, FeatureValue, Label, Split};

    fn matrix(rows: &[&[i8]]) -> WeakLabelMatrix {
        let m = rows.first().map_or(0, |r| r.len());
        WeakLabelMatrix::new(
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            (0..m).map(|j| format!("lf{j}")).collect(),
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
        .unwrap()
    }

    /// Draws (matrix, truth) from the model itself.
    fn sample(alpha: &[f64], beta: &[f64], pi: f64, n: usize, seed: u64) -> (WeakLabelMatrix, Vec<i8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = alpha.len();
        let mut entries = Vec::with_capacity(n * m);
        let mut truth = Vec::with_capacity(n);
        for _ in 0..n {
            let y: i8 = if rng.random_bool(pi) { 1 } else { -1 };
            truth.push(y);
            for j in 0..m {
                entries.push(if !rng.random_bool(beta[j]) {
                    0
                } else if rng.random_bool(alpha[j]) {
                    y
                } else {
                    -y
                });
            }
        }
        let m = WeakLabelMatrix::new(
            (0..n).map(|i| format!("r{i}")).collect(),
            (0..m).map(|j| format!("lf{j}")).collect(),
            entries,
        )
        .unwrap();
        (m, truth)
    }

    fn schema() -> Arc<FeatureSchema> {
        Arc::new(
            FeatureSchema::new(vec![FeatureDef {
                feature_id: "topic".into(),
                name: "topic".into(),
                kind: FeatureKind::CategoricalMultivalent,
                embedding_dim: None,
                servable: true,
                modalities: BTreeSet::from(["text".to_string()]),
                feature_set: None,
            }])
            .unwrap(),
        )
    }

    #[test]
    fn apply_lfs_examples() {
        let d = Dataset::new(
            schema(),
            Split::TrainUnlabeled,
            vec![DataPoint::new("a", "text").with_feature("topic", FeatureValue::categorical(["spamX", "z"]))],
        );
        let lfs = vec![
            LabelingFunction::value_match("topic", ["spamX"], Label::Pos),
            LabelingFunction::value_match("topic", ["ok"], Label::Neg),
        ];
        let w = apply_lfs(&lfs, &d, None).unwrap();
        assert_eq!(w.row(0), &[1, 0]);
        assert_eq!(w.col_ids, vec!["topic:spamX:+1", "topic:ok:-1"]);

        let never = vec![LabelingFunction::value_match("topic", ["nothing"], Label::Pos)];
        assert_eq!(apply_lfs(&never, &d, None).unwrap().row(0), &[0]);

        let empty = apply_lfs(&[], &d, None).unwrap();
        assert_eq!((empty.n_rows(), empty.n_cols()), (1, 0));
    }

    #[test]
    fn apply_lfs_requires_scores_for_band_lf() {
        let d = Dataset::new(schema(), Split::TrainUnlabeled, vec![DataPoint::new("a", "image")]);
        let band = crate::graph::as_lf("s", 0.8, 0.2).unwrap();
        assert!(matches!(
            apply_lfs(&[band.clone()], &d, None),
            Err(Error::MissingPropagationScores { .. })
        ));
        let scores = PropagationScores::new(vec!["a".into()], vec![0.9]);
        assert_eq!(apply_lfs(&[band], &d, Some(&scores)).unwrap().row(0), &[1]);
    }

    #[test]
    fn majority_vote_examples() {
        let mv = majority_vote(&matrix(&[&[1, 1, -1], &[0, 0, 0], &[1, -1, 0], &[-1, 0, 0]]));
        assert_eq!(mv.p, vec![1.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn degenerate_single_lf_climbs_to_ceiling() {
        let w = matrix(&vec![&[1i8][..]; 50]);
        let fit = fit_label_model(&w, &LabelModelConfig::default()).unwrap();
        // by hand: posterior = x^2 / (x^2 + (1-x)^2) feeds both alpha and pi
        let mut x: f64 = 0.7;
        let mut pi: f64 = 0.5;
        let p1 = pi * x / (pi * x + (1.0 - pi) * (1.0 - x));
        assert!((p1 - 0.7).abs() < 1e-12);
        pi = p1;
        x = p1;
        let p2 = pi * x / (pi * x + (1.0 - pi) * (1.0 - x));
        assert!(p2 > 0.84);
        assert_eq!(fit.params.alpha, vec![0.99]);
        assert_eq!(fit.params.pi, 0.99);
        assert_eq!(fit.params.beta, vec![1.0]);
    }

    #[test]
    fn agreeing_pair_gets_equal_accuracies() {
        let rows: Vec<&[i8]> = (0..100).map(|i| if i % 2 == 0 { &[1i8, 1][..] } else { &[-1i8, -1][..] }).collect();
        let fit = fit_label_model(&matrix(&rows), &LabelModelConfig::default()).unwrap();
        assert_eq!(fit.params.alpha[0], fit.params.alpha[1]);
    }

    #[test]
    fn recovers_generating_accuracies() {
        let (alpha, beta) = ([0.9, 0.7, 0.6], [0.8, 0.5, 0.9]);
        let (w, _) = sample(&alpha, &beta, 0.3, 10_000, 11);
        let fit = fit_label_model(&w, &LabelModelConfig::default()).unwrap();
        for (got, want) in fit.params.alpha.iter().zip(alpha) {
            assert!((got - want).abs() <= 0.05, "{:?}", fit.params);
        }
        for (got, want) in fit.params.beta.iter().zip(beta) {
            assert!((got - want).abs() <= 0.02);
        }
        assert!((fit.params.pi - 0.3).abs() <= 0.05);
        for pair in fit.log_likelihood.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9, "{:?}", fit.log_likelihood);
        }
    }

    #[test]
    fn flip_alignment_follows_majority() {
        // Start EM from an anti-correlated guess; alignment must still agree with the votes.
        let (w, truth) = sample(&[0.85, 0.8, 0.75], &[0.9, 0.9, 0.9], 0.5, 2000, 5);
        let cfg = LabelModelConfig {
            alpha_init: 0.2,
            ..Default::default()
        };
        let fit = fit_label_model(&w, &cfg).unwrap();
        assert!(fit.params.alpha.iter().all(|&a| a > 0.5), "{:?}", fit.params);
        let p = predict_prob_labels(&fit.params, &w).unwrap();
        let acc = p.p.iter().zip(&truth).filter(|(&q, &y)| (q > 0.5) == (y > 0)).count() as f64 / truth.len() as f64;
        assert!(acc > 0.85, "{acc}");
    }

    #[test]
    fn predict_examples() {
        let params = |alpha: Vec<f64>, pi| LabelModelParams {
            lf_ids: (0..alpha.len()).map(|j| format!("lf{j}")).collect(),
            beta: vec![1.0; alpha.len()],
            alpha,
            pi,
        };
        let p = predict_prob_labels(&params(vec![0.8], 0.3), &matrix(&[&[0]])).unwrap();
        assert_eq!(p.p, vec![0.3]);
        let p = predict_prob_labels(&params(vec![0.9], 0.5), &matrix(&[&[1]])).unwrap();
        assert!((p.p[0] - 0.5 * 0.9 / (0.5 * 0.9 + 0.5 * 0.1)).abs() < 1e-12);
        let p = predict_prob_labels(&params(vec![0.7, 0.7], 0.25), &matrix(&[&[1, -1]])).unwrap();
        assert!((p.p[0] - 0.25).abs() < 1e-15);
        assert!(predict_prob_labels(&params(vec![0.7], 0.5), &matrix(&[&[1, 1]])).is_err());
    }

    #[test]
    fn flip_symmetry_is_exact_for_dyadic_prior() {
        let (w, _) = sample(&[0.9, 0.7, 0.6], &[0.8, 0.5, 0.9], 0.3, 500, 3);
        let params = LabelModelParams {
            lf_ids: w.col_ids.clone(),
            alpha: vec![0.9, 0.7, 0.6],
            beta: vec![0.8, 0.5, 0.9],
            pi: 0.375,
        };
        let mirrored = LabelModelParams {
            pi: 1.0 - params.pi,
            ..params.clone()
        };
        let p = predict_prob_labels(&params, &w).unwrap();
        let q = predict_prob_labels(&mirrored, &w.negated()).unwrap();
        for (a, b) in p.p.iter().zip(&q.p) {
            assert_eq!(*b, 1.0 - *a);
        }
    }

    #[test]
    fn perfect_lfs_recover_truth() {
        let (w, truth) = sample(&[1.0, 1.0], &[1.0, 0.6], 0.4, 1000, 9);
        let fit = fit_label_model(&w, &LabelModelConfig::default()).unwrap();
        let p = predict_prob_labels(&fit.params, &w).unwrap();
        for (q, y) in p.p.iter().zip(&truth) {
            assert_eq!(*q > 0.5, *y > 0);
        }
    }

    #[test]
    fn posteriors_are_calibrated() {
        let (w, truth) = sample(&[0.8, 0.7, 0.65, 0.6], &[0.7, 0.6, 0.8, 0.9], 0.35, 40_000, 21);
        let fit = fit_label_model(&w, &LabelModelConfig::default()).unwrap();
        let p = predict_prob_labels(&fit.params, &w).unwrap();
        let mut bins = vec![(0usize, 0.0f64, 0usize); 10];
        for (&q, &y) in p.p.iter().zip(&truth) {
            let b = ((q * 10.0) as usize).min(9);
            bins[b].0 += 1;
            bins[b].1 += q;
            bins[b].2 += (y > 0) as usize;
        }
        let mut checked = 0;
        for (count, sum_p, pos) in bins {
            if count >= 200 {
                let (mean_p, rate) = (sum_p / count as f64, pos as f64 / count as f64);
                assert!((mean_p - rate).abs() <= 0.05, "bin of {count}: predicted {mean_p}, observed {rate}");
                checked += 1;
            }
        }
        assert!(checked >= 3);
    }

    #[test]
    fn all_abstain_is_error() {
        assert!(fit_label_model(&matrix(&[&[0, 0], &[0, 0]]), &LabelModelConfig::default()).is_err());
        let no_cols = WeakLabelMatrix::new(vec!["a".into()], vec![], vec![]).unwrap();
        assert!(fit_label_model(&no_cols, &LabelModelConfig::default()).is_err());
    }

    #[test]
    fn below_chance_lfs_are_flagged() {
        let params = LabelModelParams {
            lf_ids: vec!["good".into(), "bad".into()],
            alpha: vec![0.8, 0.3],
            beta: vec![0.5, 0.5],
            pi: 0.5,
        };
        let flags: Vec<bool> = audit_records(&params).iter().map(|a| a.below_chance).collect();
        assert_eq!(flags, vec![false, true]);
        assert_eq!(audit_jsonl(&params).lines().count(), 2);
    }

    #[test]
    fn prob_labels_roundtrip() {
        let p = ProbLabels::new(vec!["a".into(), "b".into()], vec![0.25, 1.0 / 3.0]).unwrap();
        let back = ProbLabels::read_jsonl(p.to_jsonl().as_bytes()).unwrap();
        assert_eq!(back, p);
        assert!(ProbLabels::new(vec!["a".into()], vec![1.5]).is_err());
    }
}
