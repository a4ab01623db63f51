use awflow::analysis::*;
use awflow::anisotropy::AnisotropyModel;
use awflow::solver::SolverConfig;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let iso = AnisotropyModel::isotropic();
    let base = StudyConfig {
        n_min: 4,
        n_max: 8,
        target_time: 0.1542,
        law: TimeStepLaw::ProportionalH0Sq(1.0),
        h0_constant: Some(2.0 * std::f64::consts::PI),
        r0: 1.0,
        sampling: SamplingKind::GaussMap,
        solver: SolverConfig::new(1.0, 1.0),
        threads: 4,
    };
    let left = run_convergence_study(&iso, &base).unwrap();
    println!("circle left (tau = h0^2, t = 0.1542):");
    for r in &left.rows {
        println!(
            "  n={} steps={:4} h(t)={:.4e} err={:.4e} eoc={:?} iters={}",
            r.n, r.steps, r.h_t, r.error, r.eoc, r.max_newton_iterations
        );
    }
    let mut right_cfg = base.clone();
    right_cfg.law = TimeStepLaw::ProportionalH0(1.0);
    right_cfg.target_time = 0.3927;
    let right = run_convergence_study(&iso, &right_cfg).unwrap();
    println!("circle right (tau = h0, t = 0.3927):");
    for r in &right.rows {
        println!(
            "  n={} steps={:4} h(t)={:.4e} err={:.4e} eoc={:?} iters={}",
            r.n, r.steps, r.h_t, r.error, r.eoc, r.max_newton_iterations
        );
    }
    println!("elapsed: {:.1?}", t0.elapsed());
}
