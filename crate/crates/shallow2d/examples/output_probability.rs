//! Output probabilities from a column sweep against the statevector.

use shallow2d::architecture::{brickwork_layout, CircuitInstance};
use shallow2d::mps::TruncationPolicy;
use shallow2d::oracle::simulate_exact;
use shallow2d::sebd::sebd_probability;

fn main() -> shallow2d::Result<()> {
    let inst = CircuitInstance::sample(brickwork_layout(3, 4, 2)?, 7);
    let exact = simulate_exact(&inst)?.probabilities();
    for idx in [0, 100, 2049, 4095] {
        let x = exact.outcome_of(idx);
        let p = sebd_probability(&inst, &TruncationPolicy::exact(), &x)?;
        let pt = sebd_probability(&inst, &TruncationPolicy::new(1e-3, None)?, &x)?;
        println!("x={idx:>4}  exact {:.6e}  sebd {p:.6e}  truncated {pt:.6e}", exact.probs[idx]);
    }
    // Large instances: log-space keeps tiny probabilities representable.
    let big = CircuitInstance::sample(brickwork_layout(30, 30, 2)?, 7);
    let ln_p = shallow2d::sebd::sebd_log_probability(&big, &TruncationPolicy::new(1e-10, None)?, &vec![0; 900])?;
    println!("30x30, all zeros: ln p = {:?}", ln_p);
    Ok(())
}
