use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shallow2d::architecture::{chr_layout, chr_layout_rect, CircuitInstance};
use shallow2d::effective1d::*;
use shallow2d::oracle::{simulate_exact, Statevector};
use shallow2d::stats;
use shallow2d::tensor::{ComplexTensor, C64, ZERO};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_qubit<R: Rng>(rng: &mut R) -> [C64; 2] {
    let v: Vec<C64> = (0..2).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

fn mat_vec(m: &ComplexTensor, v: [C64; 2]) -> [C64; 2] {
    [m.get(&[0, 0]) * v[0] + m.get(&[0, 1]) * v[1], m.get(&[1, 0]) * v[0] + m.get(&[1, 1]) * v[1]]
}

fn projector(k: [C64; 2]) -> ComplexTensor {
    ComplexTensor::from_fn(vec![2, 2], |ix| k[ix[0]] * k[ix[1]].conj())
}

#[test]
fn cz_projector_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = hadamard();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..100 {
        let xi = random_qubit(&mut rng);
        let (th, ph) = haar_basis(&mut rng);
        let plus = [C64::new(s, 0.0), C64::new(s, 0.0)];
        let amps = vec![xi[0] * plus[0], xi[0] * plus[1], xi[1] * plus[0], xi[1] * plus[1]];
        for (ket, m) in [(basis_ket(th, ph), chr_m0(th, ph)), (basis_perp(th, ph), chr_m1(th, ph))] {
            let mut st = Statevector::from_amplitudes(2, 2, amps.clone()).unwrap();
            cz_chain(&mut st);
            st.apply(&[0], &projector(ket));
            let right = mat_vec(&h, mat_vec(&m, xi));
            for a in 0..2 {
                for b in 0..2 {
                    assert!((st.amplitudes[2 * a + b] - ket[a] * right[b]).norm() < 1e-12);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weak_measurements_are_complete(th in 0.0..std::f64::consts::PI, ph in 0.0..std::f64::consts::TAU, x in -1.0f64..=1.0) {
        prop_assert!(completeness_defect(&[chr_m0(th, ph), chr_m1(th, ph)]) < 1e-12);
        prop_assert!(completeness_defect(&[n_op(x), n_op(-x)]) < 1e-12);
        prop_assert!(completeness_defect(&[toy_m0(th), toy_m1(th)]) < 1e-12);
    }
}

#[test]
fn n_of_one_projects_on_zero() {
    let m = n_op(1.0);
    assert!((m.get(&[0, 0]).re - 1.0).abs() < 1e-15 && m.get(&[1, 1]) == ZERO);
}

#[test]
fn alg3_matches_cluster_state_oracle() {
    for (layout, seeds) in [(chr_layout(3).unwrap(), 0..4), (chr_layout_rect(2, 4).unwrap(), 0..2), (chr_layout_rect(4, 2).unwrap(), 0..2)] {
        for seed in seeds {
            let inst = CircuitInstance::sample(layout.clone(), seed);
            let bases = bases_from_instance(&inst).unwrap();
            let d3 = alg3_distribution(&bases).unwrap();
            let exact = simulate_exact(&inst).unwrap().probabilities();
            assert!(d3.tv(&exact) < 1e-10, "seed {seed}: {}", d3.tv(&exact));
        }
    }
}

#[test]
fn fixed_and_randomized_dynamics_agree_in_law() {
    let (n, steps, trials) = (6, 5, 10_000);
    let run = |random: bool, seed: u64| -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials)
            .map(|_| {
                let mut st = plus_chain(n);
                for _ in 0..steps {
                    if random {
                        chr_effective_step_random(&mut st, &mut rng).unwrap();
                    } else {
                        let b: Vec<(f64, f64)> = (0..n).map(|_| haar_basis(&mut rng)).collect();
                        chr_effective_step_fixed(&mut st, &b, &mut rng).unwrap();
                    }
                    assert!((st.norm_sqr() - 1.0).abs() < 1e-10);
                }
                chain_entropy(&st, n / 2).unwrap()
            })
            .collect()
    };
    let a = run(false, 1);
    let b = run(true, 2);
    let d = stats::ks_statistic_two_sample(&a, &b);
    let crit = stats::ks_coefficient(0.01) * ((2.0 * trials as f64) / (trials as f64).powi(2)).sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
}

#[test]
fn toy_pair_counts_follow_binomial_mixture() {
    let (theta, m, trials) = (std::f64::consts::FRAC_PI_4, 10, 100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = vec![0.0; m + 1];
    for _ in 0..trials {
        counts[toy_pair_m1_count(theta, m, &mut rng)] += 1.0;
    }
    let law = toy_pair_m1_law(theta, m);
    assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let chi2: f64 = counts.iter().zip(&law).map(|(o, p)| (o - p * trials as f64).powi(2) / (p * trials as f64)).sum();
    let crit = ChiSquared::new(m as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
}

#[test]
fn toy_model_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let strong = toy_model_run(20, 0.0, 30, 4, 1, &mut rng).unwrap();
    assert!(strong.entropies.iter().all(|&s| s <= 1.0 + 1e-12));
    let none = toy_model_run(20, std::f64::consts::FRAC_PI_2, 10, 4, 1, &mut rng).unwrap();
    assert!((none.entropies[9] - 10.0).abs() < 1e-9);
    let t = toy_model_run(40, std::f64::consts::FRAC_PI_4, 40, 64, 5, &mut rng).unwrap();
    for (_, sp) in &t.spectra {
        assert!(sp.windows(2).all(|w| w[0] >= w[1] * (1.0 - 1e-12)));
        assert!(sp.iter().sum::<f64>() <= 1.0 + 1e-9);
    }
    // The full spectrum of a short chain sums to one and matches the entropy.
    let small = toy_model_run(12, std::f64::consts::FRAC_PI_4, 12, 64, 0, &mut rng).unwrap();
    let full = small.final_state.top_spectrum(64);
    assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let h = shallow2d::oracle::shannon_bits(full.iter().copied());
    assert!((h - small.final_state.half_chain_entropy()).abs() < 1e-9);
    let mut buf = Vec::new();
    write_trace_csv(&small, 0, "h", &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("step,cut,index,lambda"));
}

#[test]
fn spectrum_fit_discriminates_models() {
    let a = 0.7;
    let sp: Vec<f64> = (1..=200).map(|i: usize| (-a * (i as f64).ln().powi(2)).exp()).collect();
    let f = spectrum_fit(&sp, 2).unwrap();
    assert!((f.log_squared.slope + a).abs() < 1e-6);
    let pl: Vec<f64> = (1..=200).map(|i: usize| (i as f64).powf(-2.0)).collect();
    let g = spectrum_fit(&pl, 2).unwrap();
    assert!(g.log_squared.r_squared < g.power_law.r_squared);
    assert!(spectrum_fit(&sp[..5], 2).is_err());
}

#[test]
fn rank_tradeoff_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let states: Vec<ToyState> = (0..10).map(|_| toy_model_run(60, 0.8, 40, 0, 0, &mut rng).unwrap().final_state).collect();
    let grid = [1.0, 1e-2, 1e-4, 1e-6, 1e-8];
    let rows = rank_epsilon_tradeoff(&states, &grid, 0.1, 1 << 16);
    assert_eq!(rows[0].rank, 1);
    assert!(rows.windows(2).all(|w| w[0].rank <= w[1].rank));
}

#[test]
fn measuring_a_block_reduces_entanglement() {
    let rows = entanglement_decay(8, 2, &[2, 4], 40, 1).unwrap();
    assert!(rows[0].mean_entropy > rows[1].mean_entropy);
}
