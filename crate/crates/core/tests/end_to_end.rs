mod common;

use swarmdyn::analysis::{residual_metrics, holdout_reconstruct};
use swarmdyn::bundle::Bundle;
use swarmdyn::dynamics::{learn, IcmConfig, LearnConfig, LearnInput};
use swarmdyn::features::{extract_all, BinSpec};
use swarmdyn::layout::{init_layout, update_layout, LayoutConfig};
use swarmdyn::synth::{generate_sequence, SynthConfig};

use common::worst_matching_iou;

#[test]
fn bundle_round_trip_of_the_synthetic_sequence() {
    let seq = generate_sequence(&SynthConfig::standard(true)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bundle = Bundle {
        frames: seq.frames.clone(),
        layout: seq.layout.clone(),
        segments: Some(seq.segments.clone()),
        ground_truth: Some(seq.ground_truth.clone()),
    };
    bundle.write(dir.path()).unwrap();
    let back = Bundle::read(dir.path()).unwrap();
    assert_eq!(back.frames, seq.frames);
    assert_eq!(back.layout, seq.layout);
    assert_eq!(back.segments.unwrap(), seq.segments);
    assert_eq!(back.ground_truth.unwrap(), seq.ground_truth);
}

#[test]
fn one_layout_update_recovers_the_elements() {
    let seq = generate_sequence(&SynthConfig::standard(false)).unwrap();
    let cfg = LayoutConfig::default();
    let lay0 = init_layout(&seq.segments, &cfg).unwrap();
    // every element is split into two segments
    assert_eq!(lay0.element_count(1), 16);
    let lay = update_layout(&seq.frames, &seq.segments, &lay0, None, &BinSpec::new(8).unwrap(), &cfg).unwrap();
    let chains = lay.chains();
    assert_eq!(chains.len(), 8);
    assert!(chains.iter().all(|c| c.start == 1 && c.end == 25));
    assert!(worst_matching_iou(&seq.layout, &lay) >= 0.9);
}

#[test]
fn learning_from_segments_matches_the_ground_truth_layout() {
    let seq = generate_sequence(&SynthConfig::standard(false)).unwrap();
    let cfg = LearnConfig {
        icm: IcmConfig { k_max: 5, ..IcmConfig::default() },
        j_max: 1,
        bins: 4,
        ..LearnConfig::default()
    };
    let model = learn(
        LearnInput::Segments { frames: &seq.frames, segments: &seq.segments },
        &cfg,
    )
    .unwrap();
    assert_eq!(model.layout.chains().len(), 8);
    assert!(worst_matching_iou(&seq.layout, &model.layout) >= 0.9);
    assert_eq!(model.transforms.len(), 8 * 24);
}

#[test]
fn standard_config_at_reduced_dimension_yields_finite_metrics() {
    let seq = generate_sequence(&SynthConfig::standard(false)).unwrap();
    let features = extract_all(&seq.layout, &seq.frames, BinSpec::new(6).unwrap()).unwrap();
    let cfg = LearnConfig { icm: IcmConfig { k_max: 10, ..IcmConfig::default() }, ..LearnConfig::default() };
    let model = learn(LearnInput::Layout { layout: &seq.layout, features: &features }, &cfg).unwrap();
    assert_eq!(model.elements().len(), 8);
    let rep = residual_metrics(&model, &features).unwrap();
    assert_eq!(rep.rows.len(), 24);
    assert!(rep.rows.iter().all(|r| r.zeta_r.is_finite() && r.zeta_s.is_finite() && r.zeta_t.is_finite()));
    let h = holdout_reconstruct(&model, &features, 21, 25).unwrap();
    assert!(h.ratio.is_finite() && h.ratio > 0.0);
}
