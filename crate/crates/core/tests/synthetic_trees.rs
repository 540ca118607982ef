use vessaff::metrics::morphology::count_components;
use vessaff::metrics::{buffer_match, skeletonize, topo_metrics};
use vessaff::synthgen::{generate_tree, TreeParams};

fn tree(seed: u64) -> vessaff::synthgen::GeneratedTree {
    generate_tree(&TreeParams {
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn skeleton_invariants_on_200_trees() {
    for seed in 0..200 {
        let t = tree(seed);
        let sk = skeletonize(&t.mask);
        assert_eq!(skeletonize(&sk), sk, "seed {seed}: not idempotent");
        assert_eq!(
            count_components(&sk),
            count_components(&t.mask),
            "seed {seed}: component count changed"
        );
    }
}

#[test]
fn generator_skeleton_recovered_at_threshold_two() {
    for seed in 0..50 {
        let t = tree(seed);
        let m = buffer_match(&skeletonize(&t.mask), &t.skeleton, 2.0).unwrap();
        let c = topo_metrics(&m).completeness;
        assert!(c >= 0.95, "seed {seed}: completeness {c}");
    }
}

#[test]
fn generator_is_pure() {
    for seed in [0, 17, 1 << 40] {
        assert_eq!(tree(seed), tree(seed));
    }
}
