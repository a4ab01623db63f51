use awflow::anisotropy::AnisotropyModel;
use awflow::assembly::FlowParams;
use awflow::geometry::{NodalField, SimplicialSurface};
use awflow::lagrangian::lagrangian_hessian;
use awflow::linalg::{max_abs, DenseLu};
use awflow::solver::{solve_adjoint, solve_inner, SolverConfig};

fn main() {
    let model = AnisotropyModel::reg_linf(1e-4).unwrap();
    let m = 200;
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

    let minmax_z = |a: &SimplicialSurface, b: &SimplicialSurface| {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..m {
            let pa = a.vertex(i);
            let pb = b.vertex(i);
            let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    };

    for it in 0..12 {
        let kkt = lagrangian_hessian(&model, &xk, &x, &y, &p, &params).unwrap();
        let g = kkt.gradient();
        let gx = max_abs(&g[..n]);
        let gy = max_abs(&g[n..2 * n]);
        let gp = max_abs(&g[2 * n..]);
        let (z1lo, z1hi) = minmax_z(&x, &xk);
        let (z2lo, z2hi) = minmax_z(&y, &x);
        println!(
            "it {it}: |G|=({gx:.2e},{gy:.2e},{gp:.2e}) z1=[{z1lo:.2e},{z1hi:.2e}] z2=[{z2lo:.2e},{z2hi:.2e}]"
        );
        let lu = DenseLu::factor(&kkt.to_dense()).unwrap();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = lu.solve(&neg);
        // backtracking as in the solver
        let merit0 = 0.5 * g.iter().map(|v| v * v).sum::<f64>();
        let mut alpha = 1.0f64;
        let mut taken = false;
        while alpha >= 2.0_f64.powi(-30) {
            let xs: Vec<f64> = x.coords().iter().zip(&delta[..n]).map(|(c, d)| c + alpha * d).collect();
            let ys: Vec<f64> = y.coords().iter().zip(&delta[n..2 * n]).map(|(c, d)| c + alpha * d).collect();
            let ps: Vec<f64> = p.as_slice().iter().zip(&delta[2 * n..]).map(|(c, d)| c + alpha * d).collect();
            let xt = x.with_coords(xs).unwrap();
            let yt = y.with_coords(ys).unwrap();
            let ptf = NodalField::from_vec(ps, 2).unwrap();
            let k2 = lagrangian_hessian(&model, &xk, &xt, &yt, &ptf, &params);
            if let Ok(k2) = k2 {
                let gt = k2.gradient();
                let mt = 0.5 * gt.iter().map(|v| v * v).sum::<f64>();
                if mt <= merit0 * (1.0 - 2.0 * 1e-4 * alpha) {
                    x = xt;
                    y = yt;
                    p = ptf;
                    taken = true;
                    println!("       accepted alpha = {alpha:.3e}, merit {merit0:.3e} -> {mt:.3e}");
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !taken {
            println!("       line search failed");
            break;
        }
    }
}
