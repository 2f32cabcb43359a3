//! Half-chain Rényi entropies along the sweep for growing brickwork sizes.

use shallow2d::architecture::Family;
use shallow2d::mps::TruncationPolicy;
use shallow2d::sebd::{entanglement_scan, ScanSpec};

fn main() -> shallow2d::Result<()> {
    let spec = ScanSpec {
        family: Family::Brickwork,
        sizes: vec![6, 10, 14, 18],
        trials: 20,
        policy: TruncationPolicy::new(1e-10, None)?,
        seed: 3,
        q: 2,
        r: 1,
        v: 1,
        window: 4,
    };
    let (_, summary) = entanglement_scan(&spec)?;
    println!("L    S_1/2   S_1     S_2     (bits, {} instances)", spec.trials);
    for s in summary {
        println!("{:<4} {:.4}  {:.4}  {:.4}  +- {:.4}", s.size, s.mean_s_half, s.mean_s1, s.mean_s2, s.stderr_s1);
    }
    Ok(())
}
