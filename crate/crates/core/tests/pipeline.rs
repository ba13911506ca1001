use candyman::atlas::{build_atlas, build_knn_graph, expand_clusters, kmeans};
use candyman::eval::{estimate_period, transition_smoothness};
use candyman::experiment::{generate_data, train_model, ExperimentConfig, Model};
use candyman::neuralnet::{train_autoencoder, Autoencoder};
use candyman::systems::gen_torus_quasiperiodic;
use candyman::Matrix;
use proptest::prelude::*;

#[test]
fn circle_model_end_to_end() {
    let cfg = ExperimentConfig::preset("s1").unwrap();
    let bundle = generate_data(&cfg).unwrap();
    let model = train_model(&cfg, &bundle).unwrap();
    let traj = model.default_rollout().unwrap();
    assert_eq!(traj.len(), 1001);
    let states = traj.states().unwrap();
    for r in states.iter_rows() {
        assert!((r[0].hypot(r[1]) - 1.0).abs() < 0.05);
    }
    let period = estimate_period(&states, 1.0).unwrap().period().unwrap();
    assert!((period - 40.0).abs() <= 1.0, "period {period}");
    assert!(!traj.transitions.is_empty());
    assert!(transition_smoothness(&traj).max_first_ratio().unwrap() < 5.0);

    let tmp = tempfile::tempdir().unwrap();
    model.save(&tmp.path().join("m"), false).unwrap();
    let back = Model::load(&tmp.path().join("m")).unwrap();
    assert_eq!(back.default_rollout().unwrap(), traj);
}

#[test]
fn circle_autoencoder_loss_decreases() {
    let cfg = ExperimentConfig::preset("s1").unwrap();
    let bundle = generate_data(&cfg).unwrap();
    let atlas_cfg = cfg.atlas_config().unwrap();
    let xs = bundle.data.points().clone();
    let ae = Autoencoder::build(atlas_cfg.mode, &xs, &atlas_cfg.encoder, &atlas_cfg.decoder, 5).unwrap();
    let train = atlas_cfg.train.clone().with_seed(5);
    let (_, report) = train_autoencoder(ae, &xs, &train).unwrap();
    let window = |k: usize| report.history[k * 100..(k + 1) * 100].iter().sum::<f64>() / 100.0;
    assert!(window(9) < 0.1 * window(0));
    assert!(report.final_loss < 0.1 * report.history[0]);
}

#[test]
fn quasiperiodic_torus_data_are_not_periodic() {
    let d = gen_torus_quasiperiodic(50_000).unwrap();
    assert!(!estimate_period(d.points(), 1.0).unwrap().is_periodic());
}

#[test]
fn atlas_on_quasiperiodic_torus_has_overlapping_domains() {
    let mut cfg = ExperimentConfig::preset("s3").unwrap();
    cfg.autoencoder.epochs = 50;
    let bundle = generate_data(&cfg).unwrap();
    let (atlas, _) = build_atlas(bundle.data.points(), &cfg.atlas_config().unwrap()).unwrap();
    assert_eq!(atlas.charts.len(), 6);
    let max_owners = (0..atlas.len())
        .map(|i| atlas.charts.iter().filter(|c| c.contains(i)).count())
        .max()
        .unwrap();
    assert!(max_owners >= 2);
    for c in atlas.overlap_consistency().unwrap() {
        assert!(c.discrepancy <= c.bound * (1.0 + 1e-12) + 1e-15);
    }
}

fn cloud() -> impl Strategy<Value = (Vec<Vec<f64>>, usize, usize, usize)> {
    (8usize..60, 1usize..4).prop_flat_map(|(n, dim)| {
        (
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), n),
            1usize..5,
            1usize..4,
            0usize..3,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expansion_keeps_a_partition_of_interiors((rows, k, knn, rounds) in cloud(), seed in 0u64..1000) {
        let points = Matrix::from_rows(&rows).unwrap();
        let k = k.min(points.rows());
        let km = kmeans(&points, k, seed, 100).unwrap();
        let graph = build_knn_graph(&points, knn.min(points.rows() - 1)).unwrap();
        let domains = expand_clusters(&km.labels, k, &graph, rounds).unwrap();
        let mut owners = vec![0usize; points.rows()];
        for (c, d) in domains.iter().enumerate() {
            for &i in &d.interior {
                owners[i] += 1;
                prop_assert_eq!(km.labels[i], c);
            }
            for &i in &d.border {
                prop_assert!(!d.interior.contains(&i));
                prop_assert_ne!(km.labels[i], c);
            }
        }
        prop_assert!(owners.iter().all(|&o| o == 1));
        if rounds == 0 {
            prop_assert!(domains.iter().all(|d| d.border.is_empty()));
        }
    }
}
