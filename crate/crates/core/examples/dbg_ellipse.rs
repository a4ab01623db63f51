use awflow::analysis::*;
use awflow::anisotropy::AnisotropyModel;
use awflow::solver::SolverConfig;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let model = AnisotropyModel::elliptic(6.0, 1.0).unwrap();
    for (name, law, time) in [
        ("left (tau = h0^2, t = 0.596576)", TimeStepLaw::ProportionalH0Sq(1.0), 0.596576),
        ("right (tau = h0, t = 0.77238)", TimeStepLaw::ProportionalH0(1.0), 0.77238),
    ] {
        let cfg = StudyConfig {
            n_min: 5,
            n_max: 8,
            target_time: time,
            law,
            h0_constant: Some(24.172),
            r0: 1.0,
            sampling: SamplingKind::ArcLength,
            solver: SolverConfig::new(1.0, 1.0),
            threads: 4,
        };
        match run_convergence_study(&model, &cfg) {
            Ok(study) => {
                println!("ellipse {name}:");
                for r in &study.rows {
                    println!(
                        "  n={} steps={:4} h0={:.4} h(t)={:.4e} err={:.4e} eoc={:?} iters={}",
                        r.n, r.steps, r.h0, r.h_t, r.error, r.eoc, r.max_newton_iterations
                    );
                }
            }
            Err(e) => println!("ellipse {name}: FAILED: {e}"),
        }
    }
    println!("elapsed: {:.1?}", t0.elapsed());
}
