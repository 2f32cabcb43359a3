//! Toy model of the weak-measurement dynamics: half-chain spectrum and the
//! rank needed for a given truncation error.

use shallow2d::effective1d::{default_i_star, rank_epsilon_tradeoff, spectrum_fit, toy_model_run};
use shallow2d::rng;

fn main() -> shallow2d::Result<()> {
    let n = 200;
    let theta = std::f64::consts::FRAC_PI_4;
    let t = toy_model_run(n, theta, 2 * n, 256, 0, &mut rng::tagged(5, rng::domain::TASK, 0))?;
    let sp = &t.spectra.last().expect("last step is recorded").1;
    let fit = spectrum_fit(sp, default_i_star(n))?;
    println!("entropy after {} steps: {:.3} bits", 2 * n, t.entropies.last().unwrap());
    println!(
        "ln lambda_i vs ln^2 i: slope {:.4}, R^2 {:.4} (power law R^2 {:.4})",
        fit.log_squared.slope, fit.log_squared.r_squared, fit.power_law.r_squared
    );

    let states: Vec<_> = (0..20)
        .map(|i| toy_model_run(n, theta, 2 * n, 0, 0, &mut rng::tagged(5, rng::domain::TASK, 100 + i)).map(|t| t.final_state))
        .collect::<shallow2d::Result<_>>()?;
    for row in rank_epsilon_tradeoff(&states, &[1e-2, 1e-4, 1e-6, 1e-8, 1e-10], 0.1, 1 << 20) {
        println!("eps {:.0e}: rank {}", row.eps, row.rank);
    }
    Ok(())
}
