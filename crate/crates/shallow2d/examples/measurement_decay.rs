//! Entanglement left across a measured block of a depth-2 chain.

use shallow2d::effective1d::entanglement_decay;

fn main() -> shallow2d::Result<()> {
    for r in entanglement_decay(12, 2, &[2, 3, 4, 5, 6], 300, 8)? {
        println!("|B|={}  S(A) = {:.4} +- {:.4} bits", r.block, r.mean_entropy, r.stderr);
    }
    Ok(())
}
