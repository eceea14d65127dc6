use proptest::prelude::*;
use rand::Rng;

use switchdex::generate::instance_rng;
use switchdex::verify::mixed_instance;
use switchdex::{at_index_table, compute_index_table, compute_stage1, ProjectSpec, Stage1Mode};

fn spec_for(seed: u64, n: usize, shape: usize) -> ProjectSpec {
    let mut rng = instance_rng(seed, 0);
    mixed_instance(&mut rng, n, shape)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>(), n in 1usize..8, shape in 0usize..6) {
        let once = spec_for(seed, n, shape).normalize().unwrap();
        let twice = ProjectSpec::from(once.clone()).normalize().unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn reward_shift_moves_both_indices(seed in any::<u64>(), n in 1usize..10, shape in 0usize..6, b in -2.0f64..2.0) {
        let spec = spec_for(seed, n, shape);
        let mut shifted = spec.clone();
        shifted.reward.iter_mut().for_each(|r| *r += b);
        let t = compute_index_table(&spec).unwrap();
        let s = compute_index_table(&shifted).unwrap();
        for i in 0..n {
            prop_assert!((s.nu_cont[i] - t.nu_cont[i] - b).abs() < 1e-9);
            prop_assert!((s.nu_switch[i] - t.nu_switch[i] - b).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_rewards_and_costs_scales_indices(seed in any::<u64>(), n in 1usize..10, shape in 0usize..6, a in 0.1f64..10.0) {
        let spec = spec_for(seed, n, shape);
        let scaled = ProjectSpec::new(
            spec.transition.clone(),
            spec.reward.iter().map(|x| a * x).collect(),
            spec.startup_cost.iter().map(|x| a * x).collect(),
            spec.shutdown_cost.iter().map(|x| a * x).collect(),
            spec.beta,
        );
        let t = compute_index_table(&spec).unwrap();
        let s = compute_index_table(&scaled).unwrap();
        for i in 0..n {
            prop_assert!((s.nu_cont[i] - a * t.nu_cont[i]).abs() < 1e-9 * a.max(1.0));
            prop_assert!((s.nu_switch[i] - a * t.nu_switch[i]).abs() < 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn two_stage_equals_augmented(seed in any::<u64>(), n in 1usize..16, shape in 0usize..6) {
        let spec = spec_for(seed, n, shape);
        let t = compute_index_table(&spec).unwrap();
        let a = at_index_table(&spec).unwrap();
        prop_assert!(t.max_abs_diff(&a) < 1e-9);
    }

    #[test]
    fn hysteresis_and_monotone_streams(seed in any::<u64>(), n in 1usize..16, shape in 0usize..6) {
        let t = compute_index_table(&spec_for(seed, n, shape)).unwrap();
        for i in 0..n {
            prop_assert!(t.nu_switch[i] <= t.nu_cont[i] + 1e-12);
        }
        for w in t.merged.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-12);
        }
        let mut cont = t.order_cont.clone();
        let mut switch = t.order_switch.clone();
        cont.sort_unstable();
        switch.sort_unstable();
        prop_assert_eq!(&cont, &(0..n).collect::<Vec<_>>());
        prop_assert_eq!(&switch, &(0..n).collect::<Vec<_>>());
    }
}

#[test]
fn reference_and_fast_first_stage_agree() {
    for k in 0..200u64 {
        let mut rng = instance_rng(31, k);
        let n = rng.random_range(2..=30);
        let spec = mixed_instance(&mut rng, n, k as usize);
        let a = compute_stage1(&spec, Stage1Mode::Reference).unwrap();
        let b = compute_stage1(&spec, Stage1Mode::Fast).unwrap();
        assert_eq!(a.order, b.order, "instance {k}");
        for (x, y) in a.nu_cont.iter().zip(&b.nu_cont) {
            assert!((x - y).abs() < 1e-9);
        }
        for step in 1..=n {
            let (wa, na) = a.tables.step(step);
            let (wb, nb) = b.tables.step(step);
            for j in 0..step {
                assert!((wa[j] - wb[j]).abs() < 1e-9);
                assert!((na[j] - nb[j]).abs() < 1e-9);
            }
        }
    }
}
