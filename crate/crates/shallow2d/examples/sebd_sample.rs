//! Draw SEBD samples from a 16x16 brickwork instance and report the
//! truncation certificate.

use shallow2d::architecture::{brickwork_layout, CircuitInstance};
use shallow2d::mps::TruncationPolicy;
use shallow2d::rng;
use shallow2d::sebd::{sebd_sample, trial_certificate};

fn main() -> shallow2d::Result<()> {
    let inst = CircuitInstance::sample(brickwork_layout(16, 16, 2)?, 1);
    let policy = TruncationPolicy::new(1e-8, Some(64))?;
    let mut samples = Vec::new();
    for i in 0..500 {
        let s = sebd_sample(&inst, &policy, &mut rng::tagged(1, rng::domain::MEASURE, i))?;
        if i < 5 {
            match &s.outcome {
                Some(x) => println!("{}...  max bond {}", x[..32].iter().map(|b| b.to_string()).collect::<String>(), s.max_bond),
                None => println!("FAIL"),
            }
        }
        samples.push(s);
    }
    let fails = samples.iter().filter(|s| s.failed()).count();
    println!("{fails} FAIL in {} samples", samples.len());
    let cert = trial_certificate(&samples, 0.95)?;
    println!("TV <= {:.3e} (sqrt term {:.3e}, failure term {:.3e} at 95%)", cert.tv_bound, cert.sqrt_term, cert.failure_term);
    Ok(())
}
