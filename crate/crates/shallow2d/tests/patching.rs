use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shallow2d::architecture::*;
use shallow2d::oracle::{simulate_exact, DEFAULT_CAP_BITS};
use shallow2d::patching::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_covers_lattice_once_and_patches_are_far_apart(rows in 1usize..14, cols in 1usize..14, l in 1usize..5) {
        let plan = plan_patches_relaxed(rows, cols, l).unwrap();
        let mut seen = BTreeSet::new();
        for r in &plan.regions {
            for s in &r.sites {
                prop_assert!(seen.insert(*s));
            }
        }
        prop_assert_eq!(seen.len(), rows * cols);
        let patches: Vec<_> = plan.stage(1).collect();
        for (i, a) in patches.iter().enumerate() {
            prop_assert!(a.conditioning.is_empty());
            for b in &patches[i + 1..] {
                let d = a.sites.iter().flat_map(|x| b.sites.iter().map(move |y| x.dist(y))).min().unwrap();
                prop_assert!(d >= l);
            }
        }
        // Stages run in order and condition only on earlier regions.
        let mut done = BTreeSet::new();
        let mut last = 0;
        for r in &plan.regions {
            prop_assert!(r.stage >= last);
            last = r.stage;
            for c in &r.conditioning {
                prop_assert!(done.contains(c));
            }
            done.extend(r.sites.iter().copied());
        }
    }
}

#[test]
fn depth_constraint_is_enforced() {
    let layout = brickwork_layout(4, 20, 2).unwrap();
    assert!(plan_patches(&layout, 6).is_err());
    let plan = plan_patches(&layout, 7).unwrap();
    assert_eq!(plan.stage(1).count(), 2);
}

#[test]
fn lightcone_marginal_matches_oracle() {
    let layout = brickwork_layout(3, 4, 2).unwrap();
    for seed in 0..3 {
        let inst = CircuitInstance::sample(layout.clone(), seed);
        let full = simulate_exact(&inst).unwrap().probabilities();
        for sites in [vec![Site::new(0, 0)], vec![Site::new(0, 3), Site::new(2, 0)], vec![Site::new(1, 1), Site::new(1, 2), Site::new(2, 3)]] {
            let m = marginal_distribution(&inst, &sites, DEFAULT_CAP_BITS).unwrap();
            let mut sorted = sites.clone();
            sorted.sort();
            let idx: Vec<usize> = sorted.iter().map(|s| layout.site_index(*s)).collect();
            assert!(m.tv(&full.marginal(&idx)) < 1e-10);
        }
    }
}

#[test]
fn single_patch_is_exact() {
    let layout = brickwork_layout(3, 4, 2).unwrap();
    let inst = CircuitInstance::sample(layout.clone(), 5);
    let full = simulate_exact(&inst).unwrap().probabilities();
    let plan = plan_patches_relaxed(3, 4, 4).unwrap();
    assert_eq!(plan.regions.len(), 1);
    let mut eng = PatchEngine::new(&inst, DEFAULT_CAP_BITS);
    assert!(stitched_distribution(&mut eng, &plan).unwrap().tv(&full) < 1e-10);
}

#[test]
fn stitching_error_obeys_union_and_pinsker_bounds() {
    let layout = brickwork_layout(3, 6, 2).unwrap();
    for seed in 0..3 {
        let inst = CircuitInstance::sample(layout.clone(), seed);
        let full = simulate_exact(&inst).unwrap().probabilities();
        for l in [1, 2] {
            let plan = plan_patches_relaxed(3, 6, l).unwrap();
            let mut eng = PatchEngine::new(&inst, DEFAULT_CAP_BITS);
            let stitched = stitched_distribution(&mut eng, &plan).unwrap();
            assert!((stitched.total() - 1.0).abs() < 1e-9);
            let tv = stitched.tv(&full);
            let steps = stitch_step_errors(&plan, &full, &layout).unwrap();
            let union: f64 = steps.iter().map(|s| s.tv).sum();
            assert!(tv <= union + 1e-10, "tv {tv} > union {union}");
            for s in &steps {
                let pinsker = 0.5 * (2.0 * std::f64::consts::LN_2 * s.cmi.max(0.0)).sqrt();
                assert!(s.tv <= pinsker + 1e-7, "step {} tv {} cmi {}", s.region, s.tv, s.cmi);
            }
            // Direct evaluation agrees with the enumerated law.
            for x in [vec![0; 18], full.outcome_of(12345)] {
                let p = patching_probability(&mut eng, &plan, &x).unwrap();
                assert!((p - stitched.prob(&x)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn recovery_stitch_draws_supported_strings() {
    let layout = brickwork_layout(3, 6, 2).unwrap();
    let inst = CircuitInstance::sample(layout, 9);
    let plan = plan_patches_relaxed(3, 6, 2).unwrap();
    let mut eng = PatchEngine::new(&inst, DEFAULT_CAP_BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let x = recovery_stitch(&mut eng, &plan, &mut rng).unwrap();
        assert_eq!(x.len(), 18);
        assert!(patching_probability(&mut eng, &plan, &x).unwrap() > 0.0);
    }
}

#[test]
fn cmi_vanishes_once_lightcones_separate() {
    let t = cmi_decay_scan(2, 8, 2, &[1, 2, 3, 4, 5], 8, 3).unwrap();
    for r in &t.rows {
        assert_eq!(r.n_instances, 8);
        if r.separation >= 3 {
            assert!(r.cmi_raw_mean.abs() < 1e-9, "{r:?}");
        }
    }
    assert!(t.rows[0].cmi_mean > 1e-4);
    let mut buf = Vec::new();
    t.write_csv(3, "abc", &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("separation,cmi_mean,cmi_stderr,n_instances"));
}
