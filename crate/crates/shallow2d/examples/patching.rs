//! Patch-and-stitch sampling on a strip, compared with the exact law.

use shallow2d::architecture::{brickwork_layout, CircuitInstance};
use shallow2d::oracle::{simulate_exact, DEFAULT_CAP_BITS};
use shallow2d::patching::{plan_patches_relaxed, recovery_stitch, stitch_step_errors, stitched_distribution, PatchEngine};
use shallow2d::rng;

fn main() -> shallow2d::Result<()> {
    let layout = brickwork_layout(3, 6, 2)?;
    let inst = CircuitInstance::sample(layout.clone(), 4);
    let exact = simulate_exact(&inst)?.probabilities();
    for l in [1, 2, 3] {
        let plan = plan_patches_relaxed(3, 6, l)?;
        let mut eng = PatchEngine::new(&inst, DEFAULT_CAP_BITS);
        let stitched = stitched_distribution(&mut eng, &plan)?;
        let steps = stitch_step_errors(&plan, &exact, &layout)?;
        let union: f64 = steps.iter().map(|s| s.tv).sum();
        let cmi: f64 = steps.iter().map(|s| s.cmi).sum();
        println!("l={l}: {} regions, TV {:.3e}, summed step errors {:.3e}, summed CMI {cmi:.3e}", plan.regions.len(), stitched.tv(&exact), union);
        let x = recovery_stitch(&mut eng, &plan, &mut rng::tagged(4, rng::domain::MEASURE, l as u64))?;
        println!("     sample {}", x.iter().map(|b| b.to_string()).collect::<String>());
    }
    Ok(())
}
