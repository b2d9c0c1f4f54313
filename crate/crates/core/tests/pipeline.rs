use std::collections::BTreeMap;
use std::sync::Arc;

use xmodal_core::graph::{as_lf, fit_norm_stats, PROPAGATION_SCORES_REF};
use xmodal_core::label_model::{apply_lfs, fit_label_model, predict_prob_labels, LabelModelConfig, ProbLabels};
use xmodal_core::lf::{lfs_to_jsonl, read_lfs};
use xmodal_core::metrics::auprc;
use xmodal_core::synth::{generate, SynthConfig, SynthData};
use xmodal_core::train::{train_early_fusion, LabeledSet, ModelKind, SavedModel, TrainConfig};
use xmodal_core::types::{parse_dataset, read_records};
use xmodal_core::{
    build_graph, mine_lfs, propagate, tune_thresholds, FeatureSchema, GraphConfig, Label, MinerConfig,
    PropagationScores, Split,
};

fn small() -> SynthData {
    generate(&SynthConfig {
        seed: 3,
        n_text: 1_500,
        n_dev: 600,
        n_image_unlabeled: 800,
        n_image_test: 600,
        n_image_gold_pool: 10,
        positive_rate: 0.1,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn weak_labels_train_a_useful_image_model() {
    let data = small();
    let mined = mine_lfs(&data.text_dev, &MinerConfig::default()).unwrap();
    assert!(!mined.is_empty());

    let sets = [&data.text_labeled, &data.text_dev, &data.image_unlabeled];
    let cfg = GraphConfig::default();
    let graph = build_graph(&sets, &cfg, &fit_norm_stats(&sets)).unwrap();
    let seeds: BTreeMap<String, f64> = data
        .text_labeled
        .points
        .iter()
        .map(|p| (p.id.clone(), p.gold_label.unwrap().as_target()))
        .collect();
    let scores = propagate(&graph, &seeds, &cfg).unwrap();
    assert!(scores.converged);
    let t = tune_thresholds(&scores, &data.text_dev).unwrap();
    assert!(t.theta_pos >= t.theta_neg);

    let mut lfs: Vec<_> = mined.into_iter().map(|(lf, _)| lf).collect();
    lfs.push(as_lf(PROPAGATION_SCORES_REF, t.theta_pos, t.theta_neg).unwrap());
    let matrix = apply_lfs(&lfs, &data.image_unlabeled, Some(&scores)).unwrap();
    let fit = fit_label_model(&matrix, &LabelModelConfig::default()).unwrap();
    let probs = predict_prob_labels(&fit.params, &matrix).unwrap();
    assert!(auprc(&probs.p, &data.image_unlabeled_truth).unwrap() > 0.8);

    let weak = LabeledSet::weak(&data.image_unlabeled, &probs).unwrap();
    let (model, report) = train_early_fusion(&[weak], ModelKind::Logreg, &TrainConfig::default(), None).unwrap();
    assert!(report.epochs_run > 0);
    let test = model.score_dataset(&data.image_test).unwrap();
    assert!(auprc(&test, &data.image_test.gold_labels().unwrap()).unwrap() > 0.8);

    let restored = SavedModel::from_json(&SavedModel::new(model.clone()).to_json()).unwrap();
    assert_eq!(restored.model.score_dataset(&data.image_test).unwrap(), test);
}

#[test]
fn artifacts_round_trip_through_text() {
    let data = small();
    let schema = Arc::new(FeatureSchema::from_json_str(&data.schema.to_json_string()).unwrap());
    assert_eq!(*schema, *data.schema);

    let text = data.text_dev.to_jsonl();
    let back = parse_dataset(text.as_bytes(), schema.clone(), Split::Dev).unwrap();
    assert_eq!(back.points, data.text_dev.points);
    assert_eq!(read_records(text.as_bytes()).unwrap().len(), data.text_dev.len());

    let mined = mine_lfs(&data.text_dev, &MinerConfig::default()).unwrap();
    let lines = lfs_to_jsonl(mined.iter().map(|(lf, s)| (lf, Some(s))));
    let read = read_lfs(lines.as_bytes()).unwrap();
    assert_eq!(read.len(), mined.len());
    for ((lf, stats), (lf2, stats2)) in mined.iter().zip(&read) {
        assert_eq!(lf, lf2);
        assert_eq!(Some(stats), stats2.as_ref());
    }

    let ids: Vec<String> = data.image_test.points.iter().map(|p| p.id.clone()).collect();
    let p: Vec<f64> = (0..ids.len()).map(|i| (i as f64 + 0.5) / ids.len() as f64).collect();
    let probs = ProbLabels::new(ids.clone(), p.clone()).unwrap();
    assert_eq!(ProbLabels::read_jsonl(probs.to_jsonl().as_bytes()).unwrap(), probs);
    let scores = PropagationScores::new(ids, p);
    let scores2 = PropagationScores::read_jsonl(scores.to_jsonl().as_bytes()).unwrap();
    assert_eq!(scores2.get(&data.image_test.points[7].id), scores.get(&data.image_test.points[7].id));
}

#[test]
fn generation_is_seeded() {
    let a = small();
    let b = small();
    assert_eq!(a.image_unlabeled.points, b.image_unlabeled.points);
    assert_eq!(a.image_unlabeled_truth, b.image_unlabeled_truth);
    let pos = a.text_labeled.count_label(Label::Pos) as f64 / a.text_labeled.len() as f64;
    assert!((pos - 0.1).abs() < 0.03, "{pos}");
}
