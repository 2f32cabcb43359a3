//! Stat-mech mapping of second moments: couplings, critical point, and the
//! exact partition function checked against Haar averages.

use shallow2d::architecture::{brickwork_layout, Site};
use shallow2d::statmech::*;

fn main() -> shallow2d::Result<()> {
    let b = brickwork_couplings(2.0)?;
    println!("brickwork q=2: J_vert {:.4}, J_horiz {:.4}", b.j_vert, b.j_horiz);
    println!("triangular model critical q: {:.4}", triangular_critical_q()?);
    println!("Wg(e) = {}, Wg(swap) = {} at q=2", weingarten_k2(E, 2), weingarten_k2(SWAP, 2));

    let layout = brickwork_layout(2, 3, 2)?;
    let a = [Site::new(0, 2), Site::new(1, 2)];
    let measured = [Site::new(0, 0), Site::new(1, 0)];
    let bounds = boundaries(&layout, &a, &measured, false);
    let z = partition_function_exact(&build_decimated_model(&layout, &bounds)?)?;
    let mc = circuit_average(&layout, &bounds, 20_000, 1)?;
    println!("E Z_A: spin model {z:.5}, circuit average {:.5} +- {:.5}", mc.mean, mc.stderr);
    println!("quasi-entropy S2 of the last column: {:.4} bits", quasi_entropy_exact(&layout, &a, &measured)?);
    Ok(())
}
