use awflow::analysis::*;
use awflow::anisotropy::AnisotropyModel;
use awflow::geometry::SimplicialSurface;

fn main() {
    let model = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
    for m in [64usize, 128, 256, 512] {
        let pts = model.wulff_sample(1.0, m).unwrap();
        let poly = SimplicialSurface::closed_curve(&pts).unwrap();
        let e = projected_l2_error(&model, &poly, 1.0).unwrap();
        let h = poly.mesh_size();
        println!("m = {m:4}  h = {h:.5}  err = {e:.3e}  err/h^2 = {:.4e}", e / (h * h));
    }
    // recursion root
    let (r, _) = discrete_wulff_recursion(1.0, 0.01, 0.01).unwrap();
    println!("recursion root: {r:.10}");
    // symmetry deviation of the hessian
    use awflow::assembly::FlowParams;
    use awflow::geometry::NodalField;
    use awflow::lagrangian::lagrangian_hessian;
    let model = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
    let xk = awflow::geometry::regular_polygon(1.0, 8).unwrap();
    let xc: Vec<f64> = xk.coords().iter().enumerate().map(|(i, v)| v * 1.02 + 0.003 * ((i * 7 % 5) as f64 - 2.0)).collect();
    let x = xk.with_coords(xc).unwrap();
    let yc: Vec<f64> = x.coords().iter().enumerate().map(|(i, v)| v * 0.99 + 0.002 * ((i * 3 % 7) as f64 - 3.0)).collect();
    let y = x.with_coords(yc).unwrap();
    let p = NodalField::from_vec((0..16).map(|i| 0.05 * ((i as f64) * 0.9).sin()).collect(), 2).unwrap();
    let params = FlowParams { tau: 0.01, tau_tilde: 0.02, lambda: 0.5 };
    let kkt = lagrangian_hessian(&model, &xk, &x, &y, &p, &params).unwrap();
    println!("asymmetry: {:e}", kkt.to_dense().max_abs_asymmetry());
}
