use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shallow2d::mps::*;
use shallow2d::oracle::{hermitian_eigenvalues, reduced_density, von_neumann_bits, Statevector};
use shallow2d::tensor::{haar_unitary, ComplexTensor, C64};

fn random_state<R: Rng>(n: usize, q: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..q.pow(n as u32)).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    v
}

fn overlap(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Equal up to a global phase.
fn same_ray(a: &[C64], b: &[C64]) -> f64 {
    1.0 - overlap(a, b).norm()
}

fn cz() -> ComplexTensor {
    let mut m = ComplexTensor::identity(4);
    m.set(&[3, 3], C64::new(-1.0, 0.0));
    m
}

fn hadamard_pair() -> Vec<C64> {
    vec![C64::new(0.5, 0.0); 4]
}

#[test]
fn product_state_examples() {
    let mut m = MatrixProductState::product_state(&[2, 2, 2], &[0, 0, 0]).unwrap();
    assert_eq!(m.bond_dims(), vec![1, 1]);
    assert_eq!(m.norm_sqr(), 1.0);
    for cut in 0..2 {
        let s = m.schmidt_spectrum(cut).unwrap();
        assert_eq!(s.len(), 1);
        assert!(renyi_bits(&s, 1.0).abs() < 1e-15);
    }
    assert_eq!(m.to_dense(), Statevector::zero(3, 2).amplitudes);
    assert!(MatrixProductState::product_state(&[2, 2], &[0, 2]).is_err());
}

#[test]
fn two_site_gate_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let psi = random_state(3, 2, &mut rng);
    let mut m = MatrixProductState::from_dense(&psi, &[2, 2, 2]).unwrap();
    m.apply_two_site(0, &ComplexTensor::identity(4)).unwrap();
    assert!(same_ray(&m.to_dense(), &psi) < 1e-12);

    let mut p = MatrixProductState::from_dense(&hadamard_pair(), &[2, 2]).unwrap();
    p.apply_two_site(0, &cz()).unwrap();
    let s = p.schmidt_spectrum(0).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((s[0] - h).abs() < 1e-12 && (s[1] - h).abs() < 1e-12);

    // Random circuit against the statevector.
    let mut m = MatrixProductState::product_state(&[2, 2, 2], &[0, 0, 0]).unwrap();
    let mut sv = Statevector::zero(3, 2);
    for k in 0..6 {
        let u = haar_unitary(4, &mut rng);
        let pos = k % 2;
        let before = m.bond_dims()[pos];
        m.apply_two_site(pos, &u).unwrap();
        sv.apply(&[pos, pos + 1], &u);
        assert!(m.bond_dims()[pos] <= before * 2);
        assert!((m.norm_sqr() - 1.0).abs() < 1e-10);
    }
    let d = m.to_dense();
    assert!(d.iter().zip(&sv.amplitudes).all(|(a, b)| (a - b).norm() < 1e-10));
    assert!(m.apply_two_site(2, &cz()).is_err());
    assert!(m.apply_two_site(0, &ComplexTensor::identity(8)).is_err());
}

#[test]
fn absorb_then_project_is_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let psi = random_state(3, 2, &mut rng);
    let mut m = MatrixProductState::from_dense(&psi, &[2, 2, 2]).unwrap();
    m.absorb_site(1, 3).unwrap();
    assert_eq!(m.physical_dims(), vec![2, 6, 2]);
    assert_eq!(m.factors(1), &[2, 3]);
    assert!((m.norm_sqr() - 1.0).abs() < 1e-12);
    let p = m.project_factor(1, 1, 0).unwrap();
    assert!((p - 1.0).abs() < 1e-12);
    assert!(same_ray(&m.to_dense(), &psi) < 1e-12);
}

#[test]
fn compress_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let psi = random_state(4, 2, &mut rng);
    let mut m = MatrixProductState::from_dense(&psi, &[2, 2, 2, 2]).unwrap();
    let mut log = TruncationLog::new();
    let rep = m.compress(&TruncationPolicy::exact(), 0, &mut log).unwrap();
    assert_eq!(rep.discarded_weight, 0.0);
    assert!(same_ray(&m.to_dense(), &psi) < 1e-12);

    // Schmidt weights (0.9995, 0.0005).
    let (a, b) = (0.9995f64.sqrt(), 0.0005f64.sqrt());
    let pair = vec![C64::new(a, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(b, 0.0)];
    let mut m = MatrixProductState::from_dense(&pair, &[2, 2]).unwrap();
    let mut log = TruncationLog::new();
    let rep = m.compress(&TruncationPolicy::new(1e-3, None).unwrap(), 0, &mut log).unwrap();
    assert_eq!(m.bond_dims(), vec![1]);
    assert!((rep.discarded_weight - 5e-4).abs() < 1e-12);
    assert!((log.eps_total() - 5e-4).abs() < 1e-12);
    assert!((log.lambda() - b).abs() < 1e-12);
}

#[test]
fn measurement_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut m = MatrixProductState::product_state(&[2, 2], &[0, 1]).unwrap();
    assert_eq!(m.measure_site(0, &mut rng).unwrap(), (0, 1.0));
    let mut m = MatrixProductState::product_state(&[2, 2], &[0, 0]).unwrap();
    assert_eq!(m.project_site(1, 1).unwrap(), 0.0);

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let bell = vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)];
    let mut ones = 0;
    for _ in 0..2000 {
        let mut b = MatrixProductState::from_dense(&bell, &[2, 2]).unwrap();
        let (x, p) = b.measure_site(0, &mut rng).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let (y, p2) = b.measure_site(1, &mut rng).unwrap();
        assert_eq!(x, y);
        assert!((p2 - 1.0).abs() < 1e-12);
        ones += x;
    }
    assert!((ones as f64 - 1000.0).abs() < 4.0 * 500f64.sqrt());
}

#[test]
fn sampled_frequencies_match_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let psi = random_state(6, 2, &mut rng);
    let dist = Statevector::from_amplitudes(6, 2, psi.clone()).unwrap().probabilities();
    let base = MatrixProductState::from_dense(&psi, &[2; 6]).unwrap();
    let n = 100_000;
    let mut counts = [0usize; 6];
    for _ in 0..n {
        let mut m = base.clone();
        for (s, c) in counts.iter_mut().enumerate() {
            *c += m.measure_site(s, &mut rng).unwrap().0;
        }
    }
    for (s, &c) in counts.iter().enumerate() {
        let p = dist.marginal(&[s]).probs[1];
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((c as f64 - n as f64 * p).abs() < 4.0 * sigma, "site {s}");
    }
}

#[test]
fn projection_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let psi = random_state(4, 3, &mut rng);
    let sv = Statevector::from_amplitudes(4, 3, psi.clone()).unwrap();
    let dist = sv.probabilities();
    for idx in [0, 17, 42, 80] {
        let x = dist.outcome_of(idx);
        let mut m = MatrixProductState::from_dense(&psi, &[3; 4]).unwrap();
        let p: f64 = x.iter().enumerate().map(|(s, &o)| m.project_site(s, o).unwrap()).product();
        assert!((p - dist.probs[idx]).abs() < 1e-10 * dist.probs[idx]);
    }
    // Project one site and compare the remaining state.
    let mut m = MatrixProductState::from_dense(&psi, &[3; 4]).unwrap();
    m.project_site(2, 1).unwrap();
    let mut o = sv.clone();
    o.project(2, 1).unwrap();
    let kept: Vec<C64> = (0..81).filter(|i| (i / 3) % 3 == 1).map(|i| o.amplitudes[i]).collect();
    assert!(same_ray(&m.to_dense(), &kept) < 1e-10);
}

#[test]
fn schmidt_values_match_reduced_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let psi = random_state(3, 2, &mut rng);
        let sv = Statevector::from_amplitudes(3, 2, psi.clone()).unwrap();
        let mut m = MatrixProductState::from_dense(&psi, &[2, 2, 2]).unwrap();
        for cut in 0..2 {
            let s = m.schmidt_spectrum(cut).unwrap();
            assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
            let rho = reduced_density(&sv, &(0..=cut).collect::<Vec<_>>()).unwrap();
            let mut ev = hermitian_eigenvalues(&rho).unwrap();
            ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (k, &x) in s.iter().enumerate() {
                assert!((x - ev[k].max(0.0).sqrt()).abs() < 1e-9);
            }
            assert!((renyi_bits(&s, 1.0) - von_neumann_bits(&rho).unwrap()).abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gauge_moves_preserve_spectra(seed in any::<u64>(), n in 3usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_state(n, 2, &mut rng);
        let mut m = MatrixProductState::from_dense(&psi, &vec![2; n]).unwrap();
        let before: Vec<Vec<f64>> = (0..n - 1).map(|c| m.schmidt_spectrum(c).unwrap()).collect();
        m.move_center(0).unwrap();
        m.move_center(n - 1).unwrap();
        m.move_center(0).unwrap();
        for (c, b) in before.iter().enumerate() {
            let a = m.schmidt_spectrum(c).unwrap();
            prop_assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-10));
        }
        prop_assert!(same_ray(&m.to_dense(), &psi) < 1e-10);
    }

    #[test]
    fn truncation_obeys_trace_distance_bound(seed in any::<u64>(), n in 3usize..7, eps in 1e-4f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_state(n, 2, &mut rng);
        let mut m = MatrixProductState::from_dense(&psi, &vec![2; n]).unwrap();
        let mut log = TruncationLog::new();
        let rep = m.compress(&TruncationPolicy::new(eps, None).unwrap(), 0, &mut log).unwrap();
        prop_assert!(log.epsilons().iter().all(|&(_, e)| e >= 0.0));
        prop_assert!((m.norm_sqr() - 1.0).abs() < 1e-9);
        let f = overlap(&psi, &m.to_dense()).norm_sqr().min(1.0);
        // Trace norm of the difference of two pure-state projectors is
        // 2 sqrt(1 - f); compared squared so roundoff in f stays small.
        prop_assert!(4.0 * (1.0 - f) <= 8.0 * rep.discarded_weight + 1e-12, "1 - f = {} vs {}", 1.0 - f, rep.discarded_weight);
    }
}
