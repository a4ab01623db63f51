use awflow::anisotropy::AnisotropyModel;
use awflow::assembly::FlowParams;
use awflow::geometry::{NodalField, SimplicialSurface};
use awflow::lagrangian::{lagrangian_gradient, lagrangian_hessian};
use awflow::linalg::{max_abs, DenseLu, DenseMatrix};
use awflow::solver::{solve_inner, solve_adjoint, SolverConfig};

fn main() {
    let model = AnisotropyModel::reg_l1(1e-4).unwrap();
    let m = 200;
    let pts = model.wulff_sample_arclength(1.0, m).unwrap();
    let xk = SimplicialSurface::closed_curve(&pts).unwrap();
    let h0 = xk.mesh_size();
    let tau = h0;
    let tt = h0 * h0;
    let params = FlowParams { tau, tau_tilde: tt, lambda: 0.0 };
    let cfg = SolverConfig::new(tau, tt);
    println!("h0 = {h0:.5}, tau/tt^2 = {:.3e}", tau / (tt * tt));

    let (y0, _) = solve_inner(&model, &xk, tt, &cfg).unwrap();
    let x0: Vec<f64> = xk.coords().iter().zip(y0.coords()).map(|(a, b)| a + 1e-3 * (b - a)).collect();
    let mut x = xk.with_coords(x0).unwrap();
    let (mut y, _) = solve_inner(&model, &x, tt, &cfg).unwrap();
    let mut p = solve_adjoint(&model, &xk, &x, &y, &params, &cfg).unwrap();
    let n = 2 * m;

    for it in 0..6 {
        let kkt = lagrangian_hessian(&model, &xk, &x, &y, &p, &params).unwrap();
        let g = kkt.gradient();
        let dense = kkt.to_dense();
        let lu = DenseLu::factor(&dense).unwrap();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = lu.solve(&neg);
        // solve quality
        let hd = dense.matvec(&delta);
        let solve_res: f64 = hd.iter().zip(&neg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // hessian consistency: directional FD of the gradient along delta
        let eps = 1e-7 / max_abs(&delta).max(1.0);
        let probe = |t: f64| -> Vec<f64> {
            let xs = x.with_coords(x.coords().iter().zip(&delta[..n]).map(|(c, d)| c + t * d).collect()).unwrap();
            let ys = y.with_coords(y.coords().iter().zip(&delta[n..2 * n]).map(|(c, d)| c + t * d).collect()).unwrap();
            let ps = NodalField::from_vec(p.as_slice().iter().zip(&delta[2 * n..]).map(|(c, d)| c + t * d).collect(), 2).unwrap();
            let (gx, gy, gp) = lagrangian_gradient(&model, &xk, &xs, &ys, &ps, &params).unwrap();
            let mut gg = gx; gg.extend(gy); gg.extend(gp); gg
        };
        let gp_ = probe(eps);
        let gm_ = probe(-eps);
        let mut fd_dir = vec![0.0; 3 * n];
        for i in 0..3 * n {
            fd_dir[i] = (gp_[i] - gm_[i]) / (2.0 * eps);
        }
        let hd2 = dense.matvec(&delta);
        let dir_dev = fd_dir.iter().zip(&hd2).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max)
            / hd2.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-12);
        println!(
            "it {it}: |G| = {:.3e}, solve_res = {:.3e}, min_pivot = {:.3e}, dirFD dev = {:.3e}",
            max_abs(&g), solve_res, lu.min_pivot, dir_dev
        );
        // take the full step (no line search) to see raw newton behavior
        let xs: Vec<f64> = x.coords().iter().zip(&delta[..n]).map(|(c, d)| c + d).collect();
        let ys: Vec<f64> = y.coords().iter().zip(&delta[n..2 * n]).map(|(c, d)| c + d).collect();
        let ps: Vec<f64> = p.as_slice().iter().zip(&delta[2 * n..]).map(|(c, d)| c + d).collect();
        x = x.with_coords(xs).unwrap();
        y = y.with_coords(ys).unwrap();
        p = NodalField::from_vec(ps, 2).unwrap();
    }
    let _ = DenseMatrix::zeros(1, 1);
}
