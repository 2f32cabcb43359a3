//! Conditional mutual information of brickwork outputs against separation.

use shallow2d::patching::cmi_decay_scan;

fn main() -> shallow2d::Result<()> {
    let t = cmi_decay_scan(3, 8, 2, &[1, 2, 3, 4, 5], 20, 6)?;
    for r in &t.rows {
        println!("l={}  I(A:C|B) = {:.3e} +- {:.1e}", r.separation, r.cmi_mean, r.cmi_stderr);
    }
    t.write_csv(6, "example", std::io::stdout())?;
    Ok(())
}
