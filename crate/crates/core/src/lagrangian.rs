//! Saddle-point formulation of one flow time step.
//!
//! The constrained minimization (outer energy subject to the inner
//! stationarity condition) is handled through the scalar function
//! `L[X, Y, P] = E_out[X_prev, X, Y] - dE_in/dY [X, Y](P)`. This module
//! evaluates `L`, its three-block gradient, and its symmetric 3x3-block
//! Hessian, assembled from the derivative bundles of the discrete
//! functionals. Block order is (X, Y, P); within a block the unknown index
//! is `(d+1) * vertex + component`.

use std::io::Write;

use crate::anisotropy::AnisotropyModel;
use crate::assembly::{
    a_gamma, a_gamma_derivatives, energy_outer, m_gamma_derivatives, FlowParams, MTerm,
};
use crate::error::{Error, Result};
use crate::geometry::{NodalField, SimplicialSurface};
use crate::linalg::{CooMatrix, DenseMatrix};

/// Gradient blocks and symmetric Hessian blocks of the time-step Lagrangian.
/// The bottom-right (P, P) block is identically zero and not stored.
#[derive(Debug)]
pub struct KktSystem {
    /// Dofs per block.
    pub n: usize,
    pub g_x: Vec<f64>,
    pub g_y: Vec<f64>,
    pub g_p: Vec<f64>,
    pub h_xx: CooMatrix,
    pub h_xy: CooMatrix,
    pub h_xp: CooMatrix,
    pub h_yy: CooMatrix,
    pub h_yp: CooMatrix,
}

impl KktSystem {
    /// Concatenated gradient (X, Y, P).
    pub fn gradient(&self) -> Vec<f64> {
        let mut g = Vec::with_capacity(3 * self.n);
        g.extend_from_slice(&self.g_x);
        g.extend_from_slice(&self.g_y);
        g.extend_from_slice(&self.g_p);
        g
    }

    pub fn residual_max(&self) -> f64 {
        self.g_x
            .iter()
            .chain(&self.g_y)
            .chain(&self.g_p)
            .fold(0.0_f64, |a, &b| a.max(b.abs()))
    }

    /// Triplets of the full symmetric matrix; off-diagonal blocks are
    /// mirrored from the same assembled values.
    pub fn full_matrix_triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        let mut out = Vec::new();
        let mut put = |coo: &CooMatrix, br: usize, bc: usize, mirror: bool| {
            for &(i, j, v) in &coo.entries {
                out.push((br * n + i, bc * n + j, v));
                if mirror {
                    out.push((bc * n + j, br * n + i, v));
                }
            }
        };
        put(&self.h_xx, 0, 0, false);
        put(&self.h_yy, 1, 1, false);
        put(&self.h_xy, 0, 1, true);
        put(&self.h_xp, 0, 2, true);
        put(&self.h_yp, 1, 2, true);
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = 3 * self.n;
        let mut d = DenseMatrix::zeros(n, n);
        for (i, j, v) in self.full_matrix_triplets() {
            *d.at_mut(i, j) += v;
        }
        d
    }

    /// Writes the full matrix in `row col value` coordinate text format.
    pub fn write_coo<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut t = self.full_matrix_triplets();
        t.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for (i, j, v) in t {
            writeln!(w, "{i} {j} {v}")?;
        }
        Ok(())
    }
}

fn check_shapes(
    x_prev: &SimplicialSurface,
    x: &SimplicialSurface,
    y: &SimplicialSurface,
    p: &NodalField,
) -> Result<()> {
    if !x_prev.same_connectivity(x) || !x.same_connectivity(y) {
        return Err(Error::InvalidInput("surfaces must share one connectivity".into()));
    }
    if !p.aligned_with(x) {
        return Err(Error::InvalidInput("multiplier field does not match the mesh".into()));
    }
    Ok(())
}

/// `L = E_out - dE_in/dY (P)`.
pub fn lagrangian_value(
    model: &AnisotropyModel,
    x_prev: &SimplicialSurface,
    x: &SimplicialSurface,
    y: &SimplicialSurface,
    p: &NodalField,
    params: &FlowParams,
) -> Result<f64> {
    check_shapes(x_prev, x, y, p)?;
    let e_out = energy_outer(model, x_prev, x, y, params)?;
    let z_inner = NodalField::difference(y, x)?;
    let m2 = m_gamma_derivatives(model, &z_inner, x, &[MTerm::DZ])?;
    let ay = a_gamma_derivatives(model, y, 1)?;
    let inner_grad_dot_p: f64 = m2
        .d_z
        .as_ref()
        .unwrap()
        .iter()
        .zip(p.as_slice())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + 2.0
            * params.tau_tilde
            * ay.d_x
                .as_ref()
                .unwrap()
                .iter()
                .zip(p.as_slice())
                .map(|(a, b)| a * b)
                .sum::<f64>();
    Ok(e_out - inner_grad_dot_p)
}

/// Gradient blocks of the Lagrangian.
pub fn lagrangian_gradient(
    model: &AnisotropyModel,
    x_prev: &SimplicialSurface,
    x: &SimplicialSurface,
    y: &SimplicialSurface,
    p: &NodalField,
    params: &FlowParams,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_shapes(x_prev, x, y, p)?;
    params.validate()?;
    let n = x.m() * x.nv();
    let tt2 = params.tau / (params.tau_tilde * params.tau_tilde);

    let z_step = NodalField::difference(x, x_prev)?;
    let z_inner = NodalField::difference(y, x)?;
    let m1 = m_gamma_derivatives(model, &z_step, x_prev, &[MTerm::DZ])?;
    let m2 = m_gamma_derivatives(model, &z_inner, x, &[MTerm::DZ, MTerm::DX, MTerm::DZZ, MTerm::DZX])?;
    let ay = a_gamma_derivatives(model, y, 2)?;

    let m2_dz = m2.d_z.as_ref().unwrap();
    let m2_dx = m2.d_x.as_ref().unwrap();
    let m2_zz = m2.d_zz.as_ref().unwrap();
    let m2_zx = m2.d_zx.as_ref().unwrap();
    let ay_d = ay.d_x.as_ref().unwrap();
    let ay_h = ay.d_xx.as_ref().unwrap();

    // X block: step term + chain rule of the inner distance through both
    // slots + area penalty + constraint coupling.
    let mut g_x = m1.d_z.clone().unwrap();
    for i in 0..n {
        g_x[i] += tt2 * (m2_dx[i] - m2_dz[i]);
    }
    if params.lambda != 0.0 {
        let ax = a_gamma_derivatives(model, x, 1)?;
        let axd = ax.d_x.as_ref().unwrap();
        for i in 0..n {
            g_x[i] += 2.0 * params.tau * params.lambda * axd[i];
        }
    }
    m2_zz.matvec_add(p.as_slice(), &mut g_x);
    let mut kt_p = vec![0.0; n];
    m2_zx.matvec_transpose_add(p.as_slice(), &mut kt_p);
    for i in 0..n {
        g_x[i] -= kt_p[i];
    }

    // Y block: outer distance response minus the inner Hessian acting on P.
    let mut g_y = vec![0.0; n];
    for i in 0..n {
        g_y[i] = tt2 * m2_dz[i];
    }
    let mut hp = vec![0.0; n];
    m2_zz.matvec_add(p.as_slice(), &mut hp);
    let mut ahp = vec![0.0; n];
    ay_h.matvec_add(p.as_slice(), &mut ahp);
    for i in 0..n {
        g_y[i] -= hp[i] + 2.0 * params.tau_tilde * ahp[i];
    }

    // P block: negative inner stationarity residual.
    let mut g_p = vec![0.0; n];
    for i in 0..n {
        g_p[i] = -(m2_dz[i] + 2.0 * params.tau_tilde * ay_d[i]);
    }
    Ok((g_x, g_y, g_p))
}

/// Gradient and symmetric block Hessian of the Lagrangian. Third-order
/// tensors enter only contracted against the multiplier `p`.
pub fn lagrangian_hessian(
    model: &AnisotropyModel,
    x_prev: &SimplicialSurface,
    x: &SimplicialSurface,
    y: &SimplicialSurface,
    p: &NodalField,
    params: &FlowParams,
) -> Result<KktSystem> {
    check_shapes(x_prev, x, y, p)?;
    params.validate()?;
    let n = x.m() * x.nv();
    let tt2 = params.tau / (params.tau_tilde * params.tau_tilde);
    let tt = params.tau_tilde;

    let z_step = NodalField::difference(x, x_prev)?;
    let z_inner = NodalField::difference(y, x)?;
    let m1 = m_gamma_derivatives(model, &z_step, x_prev, &[MTerm::DZ, MTerm::DZZ])?;
    let m2 = m_gamma_derivatives(
        model,
        &z_inner,
        x,
        &[
            MTerm::DZ,
            MTerm::DX,
            MTerm::DZZ,
            MTerm::DXX,
            MTerm::DZX,
            MTerm::DZZZ,
            MTerm::DXZZ,
            MTerm::DXXZ,
        ],
    )?;
    let ay = a_gamma_derivatives(model, y, 3)?;

    let pw = p.as_slice();
    let t_zzz = m2.third_zzz_contract(pw)?;
    let t_xzz = m2.third_xzz_contract(pw)?;
    let t_xxz = m2.third_xxz_contract(pw)?;
    let a3p = ay.third_xxx_contract(pw)?;

    let m2_zz = m2.d_zz.as_ref().unwrap();
    let m2_zx = m2.d_zx.as_ref().unwrap();
    let m2_xx = m2.d_xx.as_ref().unwrap();
    let ay_h = ay.d_xx.as_ref().unwrap();

    // gradients (same expressions as lagrangian_gradient, reusing bundles)
    let m2_dz = m2.d_z.as_ref().unwrap();
    let m2_dx = m2.d_x.as_ref().unwrap();
    let ay_d = ay.d_x.as_ref().unwrap();
    let mut g_x = m1.d_z.clone().unwrap();
    for i in 0..n {
        g_x[i] += tt2 * (m2_dx[i] - m2_dz[i]);
    }
    m2_zz.matvec_add(pw, &mut g_x);
    {
        let mut kt_p = vec![0.0; n];
        m2_zx.matvec_transpose_add(pw, &mut kt_p);
        for i in 0..n {
            g_x[i] -= kt_p[i];
        }
    }
    let mut g_y = vec![0.0; n];
    for i in 0..n {
        g_y[i] = tt2 * m2_dz[i];
    }
    {
        let mut hp = vec![0.0; n];
        m2_zz.matvec_add(pw, &mut hp);
        let mut ahp = vec![0.0; n];
        ay_h.matvec_add(pw, &mut ahp);
        for i in 0..n {
            g_y[i] -= hp[i] + 2.0 * tt * ahp[i];
        }
    }
    let mut g_p = vec![0.0; n];
    for i in 0..n {
        g_p[i] = -(m2_dz[i] + 2.0 * tt * ay_d[i]);
    }

    // H_XX
    let mut h_xx = m1.d_zz.clone().unwrap();
    h_xx.add_scaled(m2_xx, tt2);
    h_xx.add_scaled(m2_zx, -tt2);
    h_xx.add_scaled(&m2_zx.transposed(), -tt2);
    h_xx.add_scaled(m2_zz, tt2);
    h_xx.add_scaled(&t_zzz, -1.0);
    h_xx.add_scaled(&t_xzz, 1.0);
    h_xx.add_scaled(&t_xzz.transposed(), 1.0);
    h_xx.add_scaled(&t_xxz, -1.0);

    // H_XY
    let mut h_xy = m2_zx.transposed();
    h_xy.add_scaled(m2_zz, -1.0);
    let mut h_xy = h_xy.scaled(tt2);
    h_xy.add_scaled(&t_zzz, 1.0);
    h_xy.add_scaled(&t_xzz.transposed(), -1.0);

    // H_XP
    let mut h_xp = m2_zz.clone();
    h_xp.add_scaled(&m2_zx.transposed(), -1.0);

    // H_YY
    let mut h_yy = m2_zz.scaled(tt2);
    h_yy.add_scaled(&t_zzz, -1.0);
    h_yy.add_scaled(&a3p, -2.0 * tt);

    // H_YP
    let mut h_yp = m2_zz.scaled(-1.0);
    h_yp.add_scaled(ay_h, -2.0 * tt);

    // area penalty enters the X block
    if params.lambda != 0.0 {
        let ax = a_gamma_derivatives(model, x, 2)?;
        let axd = ax.d_x.as_ref().unwrap();
        for i in 0..n {
            g_x[i] += 2.0 * params.tau * params.lambda * axd[i];
        }
        h_xx.add_scaled(ax.d_xx.as_ref().unwrap(), 2.0 * params.tau * params.lambda);
    }

    // diagonal blocks are symmetric up to summation order; mirror them so
    // the assembled matrix is symmetric to the bit
    let h_xx = h_xx.into_mirrored();
    let h_yy = h_yy.into_mirrored();
    for c in [&mut h_xy, &mut h_xp, &mut h_yp] {
        c.compress();
    }

    Ok(KktSystem { n, g_x, g_y, g_p, h_xx, h_xy, h_xp, h_yy, h_yp })
}

/// Outer energy evaluated together with its trivial-candidate baseline
/// (`x = x_prev`, `y` the inner minimizer at `x_prev`); used for per-step
/// energy diagnostics.
pub fn outer_energy_parts(
    model: &AnisotropyModel,
    x_prev: &SimplicialSurface,
    x: &SimplicialSurface,
    y: &SimplicialSurface,
    params: &FlowParams,
) -> Result<(f64, f64)> {
    let e = energy_outer(model, x_prev, x, y, params)?;
    let a = a_gamma(model, x_prev)?;
    Ok((e, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::regular_polygon;

    fn setup() -> (AnisotropyModel, SimplicialSurface, SimplicialSurface, SimplicialSurface, NodalField, FlowParams) {
        let model = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
        let xk = regular_polygon(1.0, 8).unwrap();
        let xc: Vec<f64> = xk
            .coords()
            .iter()
            .enumerate()
            .map(|(i, v)| v * 1.02 + 0.003 * ((i * 7 % 5) as f64 - 2.0))
            .collect();
        let x = xk.with_coords(xc).unwrap();
        let yc: Vec<f64> = x
            .coords()
            .iter()
            .enumerate()
            .map(|(i, v)| v * 0.99 + 0.002 * ((i * 3 % 7) as f64 - 3.0))
            .collect();
        let y = x.with_coords(yc).unwrap();
        let p = NodalField::from_vec((0..16).map(|i| 0.05 * ((i as f64) * 0.9).sin()).collect(), 2).unwrap();
        let params = FlowParams { tau: 0.01, tau_tilde: 0.02, lambda: 0.5 };
        (model, xk, x, y, p, params)
    }

    #[test]
    fn value_reduces_to_outer_energy_at_zero_multiplier() {
        let (model, xk, x, y, _, params) = setup();
        let p0 = NodalField::from_vec(vec![0.0; 16], 2).unwrap();
        let l = lagrangian_value(&model, &xk, &x, &y, &p0, &params).unwrap();
        let e = energy_outer(&model, &xk, &x, &y, &params).unwrap();
        assert!((l - e).abs() < 1e-14 * e.abs().max(1.0));
    }

    #[test]
    fn value_is_linear_in_the_multiplier() {
        let (model, xk, x, y, p, params) = setup();
        let p2 = NodalField::from_vec(p.as_slice().iter().map(|v| 2.0 * v).collect(), 2).unwrap();
        let p0 = NodalField::from_vec(vec![0.0; 16], 2).unwrap();
        let l0 = lagrangian_value(&model, &xk, &x, &y, &p0, &params).unwrap();
        let l1 = lagrangian_value(&model, &xk, &x, &y, &p, &params).unwrap();
        let l2 = lagrangian_value(&model, &xk, &x, &y, &p2, &params).unwrap();
        assert!(((l2 - l0) - 2.0 * (l1 - l0)).abs() < 1e-12);
    }

    #[test]
    fn hessian_matrix_is_symmetric() {
        let (model, xk, x, y, p, params) = setup();
        let kkt = lagrangian_hessian(&model, &xk, &x, &y, &p, &params).unwrap();
        let dense = kkt.to_dense();
        assert_eq!(dense.max_abs_asymmetry(), 0.0);
    }

    #[test]
    fn gradient_blocks_match_between_entry_points() {
        let (model, xk, x, y, p, params) = setup();
        let (gx, gy, gp) = lagrangian_gradient(&model, &xk, &x, &y, &p, &params).unwrap();
        let kkt = lagrangian_hessian(&model, &xk, &x, &y, &p, &params).unwrap();
        for (a, b) in gx.iter().zip(&kkt.g_x) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in gy.iter().zip(&kkt.g_y) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in gp.iter().zip(&kkt.g_p) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn coo_dump_is_sorted_rows_cols() {
        let (model, xk, x, y, p, params) = setup();
        let kkt = lagrangian_hessian(&model, &xk, &x, &y, &p, &params).unwrap();
        let mut buf = Vec::new();
        kkt.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut last = (0usize, 0usize);
        let mut first = true;
        for line in text.lines() {
            let mut it = line.split_whitespace();
            let i: usize = it.next().unwrap().parse().unwrap();
            let j: usize = it.next().unwrap().parse().unwrap();
            let _v: f64 = it.next().unwrap().parse().unwrap();
            if !first {
                assert!((i, j) >= last);
            }
            last = (i, j);
            first = false;
        }
    }
}
