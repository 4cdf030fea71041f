//! Disk round-trip and cross-module integration checks.

use contextval::io_yolo::{dataset_dir_sha256, load_dataset, write_yolo_dir, DatasetFormat};
use contextval::synthgen::{
    generate_dataset, synthesize_predictions, CorruptionModel, Placement, ScenarioConfig,
};
use contextval::{validate_dataset, Dataset};

fn scenario() -> ScenarioConfig {
    ScenarioConfig {
        images: 8,
        objects_per_image: (2, 6),
        width: 1280,
        height: 720,
        box_height: (14.0, 40.0),
        min_separation: 30.0,
        ..ScenarioConfig::default()
    }
}

fn generate_with_predictions(seed: u64) -> Dataset {
    let gt = generate_dataset(&scenario(), seed).unwrap().dataset;
    let cm = CorruptionModel {
        center_jitter_px: 1.5,
        size_jitter: 0.05,
        miss_probability: vec![0.1],
        false_positive_rate: 0.5,
        confidence_range: (0.4, 1.0),
        class_confusion: 0.05,
    };
    synthesize_predictions(&gt, &cm, seed + 1).unwrap()
}

#[test]
fn generated_datasets_round_trip_through_disk() {
    let d = generate_with_predictions(3);
    let tmp = tempfile::tempdir().unwrap();
    write_yolo_dir(&d, tmp.path()).unwrap();
    let reloaded = load_dataset(tmp.path(), DatasetFormat::YoloDir).unwrap();

    assert_eq!(d.name, reloaded.name);
    assert_eq!(d.class_table, reloaded.class_table);
    assert_eq!(d.images.len(), reloaded.images.len());
    for (orig, back) in d.images.iter().zip(&reloaded.images) {
        assert_eq!(orig.image_id, back.image_id);
        assert_eq!(orig.pair_key, back.pair_key);
        assert_eq!(orig.ground_truth.len(), back.ground_truth.len());
        assert_eq!(orig.predictions.len(), back.predictions.len());
        for (g, h) in orig.ground_truth.iter().zip(&back.ground_truth) {
            assert_eq!(g.id, h.id);
            assert_eq!(g.class, h.class);
            for (u, v) in [
                (g.bbox.x_min, h.bbox.x_min),
                (g.bbox.y_min, h.bbox.y_min),
                (g.bbox.x_max, h.bbox.x_max),
                (g.bbox.y_max, h.bbox.y_max),
            ] {
                assert!((u - v).abs() < 1e-6, "{} vs {}", u, v);
            }
        }
        for (p, q) in orig.predictions.iter().zip(&back.predictions) {
            assert_eq!(p.class, q.class);
            assert!((p.confidence - q.confidence).abs() < 1e-9);
            assert!((p.bbox.x_min - q.bbox.x_min).abs() < 1e-6);
        }
    }
}

#[test]
fn loaded_generator_output_validates_cleanly() {
    let d = generate_with_predictions(11);
    let tmp = tempfile::tempdir().unwrap();
    write_yolo_dir(&d, tmp.path()).unwrap();
    let reloaded = load_dataset(tmp.path(), DatasetFormat::YoloDir).unwrap();
    assert_eq!(validate_dataset(&reloaded), vec![]);
}

#[test]
fn writing_is_deterministic_including_hash() {
    let d = generate_with_predictions(5);
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    write_yolo_dir(&d, tmp_a.path()).unwrap();
    write_yolo_dir(&d, tmp_b.path()).unwrap();
    assert_eq!(
        dataset_dir_sha256(tmp_a.path()).unwrap(),
        dataset_dir_sha256(tmp_b.path()).unwrap()
    );
}

#[test]
fn clustered_scenes_round_trip_too() {
    let sc = ScenarioConfig {
        placement: Placement::Clustered { radius: 80.0 },
        ..scenario()
    };
    let d = generate_dataset(&sc, 23).unwrap().dataset;
    let tmp = tempfile::tempdir().unwrap();
    write_yolo_dir(&d, tmp.path()).unwrap();
    let reloaded = load_dataset(tmp.path(), DatasetFormat::YoloDir).unwrap();
    assert_eq!(validate_dataset(&reloaded), vec![]);
    assert_eq!(d.object_count(), reloaded.object_count());
}
