//! Simulate a heaped panel, fit a variant and print the posterior summary.
//!
//! Usage: simulate_and_fit [n_subjects] [iterations] [variant]

use heaplab::datagen::{simulate_panel, SimConfig};
use heaplab::fitstats::{dic, sspe, summarize};
use heaplab::model::{Hyperparams, Variant};
use heaplab::sampler::{run_mcmc, SamplerConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_subjects: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(20);
    let iters: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let variant: Variant = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(Variant::Heaping);

    let sim = SimConfig { n_subjects, seed: 42, ..SimConfig::default() };
    let (panel, truth) = simulate_panel(&sim).unwrap();
    println!("panel: {} obs, {} subjects, mean y = {:.2}", panel.n_obs(), panel.n_subjects(), panel.mean_y());
    let div5 = panel.obs.iter().filter(|o| o.y > 0 && o.y % 5 == 0).count() as f64
        / panel.obs.iter().filter(|o| o.y > 0).count().max(1) as f64;
    println!("fraction of positive reports divisible by 5: {:.3}", div5);

    let hyper = Hyperparams::default();
    let cfg = SamplerConfig {
        iterations: iters,
        burn_in: iters / 4,
        thin: 5,
        seed: 7,
        ..SamplerConfig::default()
    };
    let t0 = Instant::now();
    let chain = run_mcmc(&panel, &hyper, variant, &cfg).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("fit {} in {:.1}s ({:.2} ms/iter), kept {}", variant, dt, dt * 1e3 / iters as f64, chain.samples.len());
    for (k, v) in &chain.acceptance {
        println!("  accept[{k}] = {v:.3}");
    }
    let rep = summarize(&chain, &panel).unwrap();
    println!("{}", rep.render());
    println!("truth: alpha={} theta_disp={} theta_heap={} gamma={:?}", truth.alpha, truth.theta_disp, truth.theta_heap, truth.gamma);
    let t1 = Instant::now();
    let d = dic(&chain, &panel, &hyper, &cfg.solver).unwrap();
    let s = sspe(&chain, &panel, &hyper, &cfg.solver, 99).unwrap();
    println!("DIC {:.1}  SSPE {:.1}  (post-processing {:.1}s)", d, s, t1.elapsed().as_secs_f64());
}
