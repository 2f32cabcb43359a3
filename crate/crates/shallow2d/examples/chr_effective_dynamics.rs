//! Cluster state with Haar-random measurements: the effective 1D weak
//! measurement dynamics reproduce the 2D output law.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shallow2d::architecture::{chr_layout, CircuitInstance};
use shallow2d::effective1d::{alg3_distribution, bases_from_instance, chain_entropy, chr_effective_step_random, plus_chain};
use shallow2d::oracle::simulate_exact;

fn main() -> shallow2d::Result<()> {
    let inst = CircuitInstance::sample(chr_layout(3)?, 2);
    let d = alg3_distribution(&bases_from_instance(&inst)?)?;
    println!("3x3 CHR: TV(effective 1D, statevector) = {:.2e}", d.tv(&simulate_exact(&inst)?.probabilities()));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut st = plus_chain(14);
    for step in 0..20 {
        chr_effective_step_random(&mut st, &mut rng)?;
        if step % 4 == 3 {
            println!("step {:>2}: half-chain entropy {:.3} bits", step + 1, chain_entropy(&st, 7)?);
        }
    }
    Ok(())
}
