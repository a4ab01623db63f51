use awflow::analysis::*;
use awflow::anisotropy::AnisotropyModel;
use awflow::geometry::SimplicialSurface;
use awflow::solver::{run_flow, SolverConfig};
use std::time::Instant;

fn run_one_theta(name: &str, model: &AnisotropyModel, m: usize, tau_is_h0: bool, steps: usize, theta0: f64) {
    let t0 = Instant::now();
    let pts = model.wulff_sample_arclength(1.0, m).unwrap();
    let initial = SimplicialSurface::closed_curve(&pts).unwrap();
    let h0 = initial.mesh_size();
    let tau = if tau_is_h0 { h0 } else { h0 * h0 };
    let mut cfg = SolverConfig::new(tau, h0 * h0);
    cfg.steps = steps;
    cfg.theta0 = theta0;
    match run_flow(model, &initial, &cfg) {
        Ok(traj) => {
            let mut area_monotone = true;
            let mut prev = initial.enclosed_area().unwrap();
            let mut max_iters = 0;
            let mut energy_ok = true;
            for d in &traj.steps {
                if d.area <= prev {
                    area_monotone = false;
                }
                prev = d.area;
                max_iters = max_iters.max(d.newton_iterations);
                if d.e_out > d.e_out_trivial + 1e-10 {
                    energy_ok = false;
                }
            }
            let report = energy_report(model, &traj, Some(1.0)).unwrap();
            let errs: Vec<f64> = report.iter().map(|r| r.error.unwrap()).collect();
            let peak_idx = errs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            println!(
                "{name}: h0={h0:.4} tau={tau:.5} steps={} area_monotone={area_monotone} max_iters={max_iters} energy_ok={energy_ok}",
                traj.steps.len()
            );
            println!(
                "  err[0]={:.3e} err[peak@{}]={:.3e} err[mid]={:.3e} err[last]={:.3e}",
                errs[0],
                peak_idx,
                errs[peak_idx],
                errs[errs.len() / 2],
                errs[errs.len() - 1]
            );
            println!("  elapsed {:.1?}", t0.elapsed());
        }
        Err(e) => println!("{name}: FAILED: {e} ({:.1?})", t0.elapsed()),
    }
}

fn main() {
    let theta0: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let steps_scale: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    println!("theta0 = {theta0}");
    let l1 = AnisotropyModel::reg_l1(1e-4).unwrap();
    run_one_theta("square under reg-l1(1e-4), tau=h0", &l1, 200, true, (200.0 * steps_scale) as usize, theta0);
    let linf3 = AnisotropyModel::reg_linf(1e-3).unwrap();
    run_one_theta("diamond under reg-linf(1e-3), tau=h0^2", &linf3, 256, false, (1000.0 * steps_scale) as usize, theta0);
    let linf4 = AnisotropyModel::reg_linf(1e-4).unwrap();
    run_one_theta("diamond under reg-linf(1e-4), tau=h0", &linf4, 200, true, (275.0 * steps_scale) as usize, theta0);
}
