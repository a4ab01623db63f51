use awflow::anisotropy::AnisotropyModel;
use awflow::assembly::FlowParams;
use awflow::geometry::{NodalField, SimplicialSurface};
use awflow::lagrangian::{lagrangian_gradient, lagrangian_hessian};
use awflow::linalg::{max_abs, DenseLu};
use awflow::solver::{solve_adjoint, solve_inner, SolverConfig};
use awflow::verify::{fd_jacobian, relative_deviation};

fn main() {
    let model = AnisotropyModel::reg_linf(1e-4).unwrap();
    let m = 48; // smaller for the FD jacobian
    let pts = model.wulff_sample_arclength(1.0, m).unwrap();
    let xk = SimplicialSurface::closed_curve(&pts).unwrap();
    let h0 = xk.mesh_size();
    let (tau, tt) = (h0, h0 * h0);
    let params = FlowParams { tau, tau_tilde: tt, lambda: 0.0 };
    let cfg = SolverConfig::new(tau, tt);
    let n = 2 * m;

    let mut x = xk.clone();
    let (mut y, _) = solve_inner(&model, &x, tt, &cfg).unwrap();
    let mut p = solve_adjoint(&model, &xk, &x, &y, &params, &cfg).unwrap();

    let gradient_of = |u: &[f64]| -> Vec<f64> {
        let xs = xk.with_coords(u[..n].to_vec()).unwrap();
        let ys = xk.with_coords(u[n..2 * n].to_vec()).unwrap();
        let ps = NodalField::from_vec(u[2 * n..].to_vec(), 2).unwrap();
        let (gx, gy, gp) = lagrangian_gradient(&model, &xk, &xs, &ys, &ps, &params).unwrap();
        let mut g = gx;
        g.extend(gy);
        g.extend(gp);
        g
    };

    for it in 0..8 {
        let kkt = lagrangian_hessian(&model, &xk, &x, &y, &p, &params).unwrap();
        let g = kkt.gradient();
        let dense = kkt.to_dense();
        let mut u = x.coords().to_vec();
        u.extend_from_slice(y.coords());
        u.extend_from_slice(p.as_slice());
        let jac = fd_jacobian(gradient_of, &u, 1e-7);
        let dev = relative_deviation(&dense.data, &jac.data);
        println!("it {it}: |G| = {:.3e}, hessian FD deviation = {:.3e}", max_abs(&g), dev);

        let lu = DenseLu::factor(&dense).unwrap();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = lu.solve(&neg);
        let merit0 = 0.5 * g.iter().map(|v| v * v).sum::<f64>();
        let mut alpha = 1.0f64;
        loop {
            if alpha < 1e-9 {
                println!("       line search dead, merit {merit0:.3e}");
                return;
            }
            let xs: Vec<f64> = x.coords().iter().zip(&delta[..n]).map(|(c, d)| c + alpha * d).collect();
            let ys: Vec<f64> = y.coords().iter().zip(&delta[n..2 * n]).map(|(c, d)| c + alpha * d).collect();
            let ps: Vec<f64> = p.as_slice().iter().zip(&delta[2 * n..]).map(|(c, d)| c + alpha * d).collect();
            let mut ut = xs.clone();
            ut.extend_from_slice(&ys);
            ut.extend_from_slice(&ps);
            let gt = gradient_of(&ut);
            let mt = 0.5 * gt.iter().map(|v| v * v).sum::<f64>();
            if mt <= merit0 * (1.0 - 2.0 * 1e-4 * alpha) {
                x = x.with_coords(xs).unwrap();
                y = y.with_coords(ys).unwrap();
                p = NodalField::from_vec(ps, 2).unwrap();
                println!("       alpha = {alpha:.2e}, merit {merit0:.3e} -> {mt:.3e}");
                break;
            }
            alpha *= 0.5;
        }
    }
}
