//! WebAssembly bindings for the demo page in `www/`. Each export wraps a
//! plain function so the logic is testable off the browser.

use std::collections::BTreeMap;

use serde_json::json;
use wasm_bindgen::prelude::*;
use xmodal_core::graph::SimilarityGraph;
use xmodal_core::label_model::{fit_label_model, LabelModelConfig, WeakLabelMatrix};
use xmodal_core::metrics::{auprc, pr_curve};
use xmodal_core::{propagate, GraphConfig, Label, Result};

fn node_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn labels_from(values: &[i8]) -> Result<Vec<Label>> {
    values
        .iter()
        .map(|&v| {
            Label::from_i64(v as i64)
                .ok_or_else(|| xmodal_core::Error::Config(format!("label must be 1 or -1, got {v}")))
        })
        .collect()
}

/// `edges` holds flat `(i, j, w)` triples; `seeds` maps node index to a
/// score in [0,1].
pub fn propagate_scores(n: usize, edges: &[f64], seeds: &BTreeMap<usize, f64>) -> Result<Vec<f64>> {
    if edges.len() % 3 != 0 {
        return Err(xmodal_core::Error::Graph("edges must be (i, j, w) triples".into()));
    }
    let triples: Vec<(usize, usize, f64)> = edges
        .chunks(3)
        .map(|t| (t[0] as usize, t[1] as usize, t[2]))
        .collect();
    let graph = SimilarityGraph::from_edges(node_ids(n), &triples)?;
    let seeds: BTreeMap<String, f64> = seeds.iter().map(|(i, s)| (i.to_string(), *s)).collect();
    let scores = propagate(&graph, &seeds, &GraphConfig::default())?;
    Ok((0..n).map(|i| scores.get(&i.to_string()).unwrap_or(0.5)).collect())
}

/// AUPRC and the PR curve as `{"auprc": .., "curve": [[r, p], ..]}`.
pub fn precision_recall(scores: &[f64], labels: &[i8]) -> Result<String> {
    let labels = labels_from(labels)?;
    let ap = auprc(scores, &labels)?;
    let curve = pr_curve(scores, &labels)?;
    Ok(json!({ "auprc": ap, "curve": curve }).to_string())
}

/// Fits the label model to a row-major vote matrix with `n_lfs` columns.
pub fn label_model(n_lfs: usize, votes: &[i8]) -> Result<String> {
    if n_lfs == 0 || votes.len() % n_lfs != 0 {
        return Err(xmodal_core::Error::Config("votes must fill whole rows".into()));
    }
    let n = votes.len() / n_lfs;
    let matrix = WeakLabelMatrix::new(
        (0..n).map(|i| format!("row{i}")).collect(),
        (0..n_lfs).map(|j| format!("lf{j}")).collect(),
        votes.to_vec(),
    )?;
    let fit = fit_label_model(&matrix, &LabelModelConfig::default())?;
    let probs = xmodal_core::label_model::predict_prob_labels(&fit.params, &matrix)?;
    Ok(json!({
        "alpha": fit.params.alpha,
        "beta": fit.params.beta,
        "pi": fit.params.pi,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "posterior": probs.p,
    })
    .to_string())
}

fn js_err(e: xmodal_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = propagate)]
pub fn propagate_js(n: usize, edges: &[f64], seed_nodes: &[u32], seed_scores: &[f64]) -> std::result::Result<Vec<f64>, JsError> {
    if seed_nodes.len() != seed_scores.len() {
        return Err(JsError::new("seed_nodes and seed_scores differ in length"));
    }
    let seeds = seed_nodes.iter().map(|&i| i as usize).zip(seed_scores.iter().copied()).collect();
    propagate_scores(n, edges, &seeds).map_err(js_err)
}

#[wasm_bindgen(js_name = precisionRecall)]
pub fn precision_recall_js(scores: &[f64], labels: &[i8]) -> std::result::Result<String, JsError> {
    precision_recall(scores, labels).map_err(js_err)
}

#[wasm_bindgen(js_name = labelModel)]
pub fn label_model_js(n_lfs: usize, votes: &[i8]) -> std::result::Result<String, JsError> {
    label_model(n_lfs, votes).map_err(js_err)
}
