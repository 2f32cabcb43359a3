use num_rational::Ratio;
use shallow2d::architecture::*;
use shallow2d::statmech::*;

fn layout_1x(n: usize, pairs: &[(usize, usize, usize)], q: usize) -> CircuitLayout {
    let ev = pairs
        .iter()
        .map(|&(layer, a, b)| GateEvent::new(layer, vec![Site::new(0, a), Site::new(0, b)], GateKind::HaarTwoSite))
        .collect();
    CircuitLayout::new(1, n, q, ev).unwrap()
}

#[test]
fn weingarten_values_at_q2() {
    assert_eq!(weingarten_k2(E, 2), Ratio::new(1, 15));
    assert_eq!(weingarten_k2(SWAP, 2), Ratio::new(-1, 60));
    assert_eq!(weingarten_k2(E, 2) + weingarten_k2(SWAP, 2), Ratio::new(1, 20));
}

#[test]
fn single_gate_partition_functions() {
    for q in [2usize, 3] {
        let l = layout_1x(2, &[(1, 0, 1)], q);
        let z0 = partition_function_exact(&build_spin_model(&l, &boundaries(&l, &[], &[], false)).unwrap()).unwrap();
        let za = partition_function_exact(&build_spin_model(&l, &boundaries(&l, &[Site::new(0, 0)], &[], false)).unwrap()).unwrap();
        assert!((z0 - 1.0).abs() < 1e-12, "{z0}");
        let qf = q as f64;
        assert!((za - 2.0 * qf / (qf * qf + 1.0)).abs() < 1e-12, "{za}");
    }
}

#[test]
fn decimation_preserves_partition_function() {
    let l = layout_1x(4, &[(1, 0, 1), (1, 2, 3), (2, 1, 2), (3, 0, 1), (3, 2, 3)], 2);
    for (a, m) in [(vec![], vec![]), (vec![Site::new(0, 0), Site::new(0, 1)], vec![]), (vec![Site::new(0, 1)], vec![Site::new(0, 3)])] {
        let b = boundaries(&l, &a, &m, false);
        let z1 = partition_function_exact(&build_spin_model(&l, &b).unwrap()).unwrap();
        let z2 = partition_function_exact(&build_decimated_model(&l, &b).unwrap()).unwrap();
        assert!((z1 - z2).abs() < 1e-12 * z1.abs().max(1.0), "{z1} {z2}");
        let mc = circuit_average(&l, &b, 20000, 7).unwrap();
        assert!((mc.mean - z1).abs() < 4.0 * mc.stderr + 1e-12, "{} +- {} vs {}", mc.mean, mc.stderr, z1);
    }
}

#[test]
fn constants() {
    let b = brickwork_couplings(2.0).unwrap();
    assert!((b.j_vert - 0.1116).abs() < 5e-4 && (b.j_horiz - 0.3190).abs() < 5e-4, "{b:?}");
    let b4 = brickwork_couplings(4.0).unwrap();
    assert!((b4.j_horiz - 0.500).abs() < 1e-3 && (b4.j_vert - 0.377).abs() < 1e-3, "{b4:?}");
    let qc = triangular_critical_q().unwrap();
    assert!((qc - 3.249).abs() < 1e-3, "{qc}");
    let c = dephased_cmi_infinite_q(2, 3, 2);
    assert!((c.closed_form - c.numeric).abs() < 1e-4, "{c:?}");
}
