//! Discrete anisotropic functionals on simplicial meshes.
//!
//! Two local quantities drive everything: the lumped quadratic form
//! `m_gamma[Z, X] = sum_T 1/(d+1)! (sum_i dual_sq(Z_i)) gamma(R_T[X])` and
//! the discrete anisotropic area `a_gamma[X] = sum_T 1/d! gamma(R_T[X])`,
//! with `R_T` the element normal map. This module assembles their values,
//! gradients, Hessians, and the third-derivative families needed by the
//! Newton solver; third derivatives are kept as per-element blocks and
//! contracted against a direction on demand.

use crate::anisotropy::{AnisotropyModel, ScalarDerivs};
use crate::error::{Error, Result};
use crate::geometry::{element_normal_map, NodalField, SimplicialSurface};
use crate::linalg::CooMatrix;

/// Time-step parameters of the flow.
#[derive(Debug, Clone, Copy)]
pub struct FlowParams {
    pub tau: f64,
    pub tau_tilde: f64,
    pub lambda: f64,
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() || !(self.tau_tilde > 0.0) || !self.tau_tilde.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "time steps must be positive, got tau = {}, tau_tilde = {}",
                self.tau, self.tau_tilde
            )));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("area weight must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// The derivative families of the lumped quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MTerm {
    /// First derivative in the field slot.
    DZ,
    /// Second derivative in the field slot (node-diagonal).
    DZZ,
    /// Third derivative in the field slot (node-diagonal; contracted on demand).
    DZZZ,
    /// First derivative in the surface slot.
    DX,
    /// Second derivative in the surface slot.
    DXX,
    /// Mixed second derivative (field row, surface column).
    DZX,
    /// Mixed third derivative, two field slots and one surface slot.
    DXZZ,
    /// Mixed third derivative, one field slot and two surface slots.
    DXXZ,
}

/// Assembled value and requested derivative tensors of a functional.
/// Third-order families are stored as per-element dense blocks and turned
/// into sparse matrices by contraction against a direction vector.
#[derive(Debug)]
pub struct DerivativeBundle {
    pub value: f64,
    pub d_z: Option<Vec<f64>>,
    pub d_x: Option<Vec<f64>>,
    pub d_zz: Option<CooMatrix>,
    pub d_xx: Option<CooMatrix>,
    /// Rows indexed by field dofs, columns by surface dofs.
    pub d_zx: Option<CooMatrix>,
    third_zzz: Option<Vec<ElemZzz>>,
    third_xzz: Option<Vec<ElemXzz>>,
    third_xxz: Option<Vec<ElemXxz>>,
    third_xxx: Option<Vec<ElemXxx>>,
    ndofs: usize,
    m: usize,
}

#[derive(Debug)]
struct ElemZzz {
    nodes: [usize; 3],
    /// Per node: dual third derivative scaled by the element weight.
    blocks: Vec<[[[f64; 3]; 3]; 3]>,
}

#[derive(Debug)]
struct ElemXzz {
    nodes: [usize; 3],
    nn: usize,
    /// Per node: dual Hessian scaled by the element factor.
    f2: Vec<[[f64; 3]; 3]>,
    /// Gradient of `gamma(R_T)` w.r.t. local surface dofs.
    gx: [[f64; 3]; 3],
}

#[derive(Debug)]
struct ElemXxz {
    nodes: [usize; 3],
    nn: usize,
    /// Per node: dual gradient scaled by the element factor.
    f1: Vec<[f64; 3]>,
    /// Hessian of `gamma(R_T)` w.r.t. local surface dofs, (nn*m)^2.
    gxx: Vec<f64>,
}

#[derive(Debug)]
struct ElemXxx {
    nodes: [usize; 3],
    nn: usize,
    /// Third derivative of `gamma(R_T)` w.r.t. local surface dofs, scaled.
    gxxx: Vec<f64>,
}

impl DerivativeBundle {
    fn empty(ndofs: usize, m: usize) -> Self {
        DerivativeBundle {
            value: 0.0,
            d_z: None,
            d_x: None,
            d_zz: None,
            d_xx: None,
            d_zx: None,
            third_zzz: None,
            third_xzz: None,
            third_xxz: None,
            third_xxx: None,
            ndofs,
            m,
        }
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    fn check_direction(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.ndofs {
            return Err(Error::InvalidInput(format!(
                "contraction direction has {} entries, expected {}",
                w.len(),
                self.ndofs
            )));
        }
        Ok(())
    }

    /// Field-slot third derivative contracted with `w` in one slot; the
    /// result is a symmetric matrix over field dofs.
    pub fn third_zzz_contract(&self, w: &[f64]) -> Result<CooMatrix> {
        self.check_direction(w)?;
        let store = self
            .third_zzz
            .as_ref()
            .ok_or_else(|| Error::Unsupported("third field derivative was not requested".into()))?;
        let m = self.m;
        let mut out = CooMatrix::new(self.ndofs, self.ndofs);
        for el in store {
            for (a, blk) in el.blocks.iter().enumerate() {
                let gi = el.nodes[a];
                for r in 0..m {
                    for s in 0..m {
                        let mut acc = 0.0;
                        for t in 0..m {
                            acc += blk[r][s][t] * w[m * gi + t];
                        }
                        out.push(m * gi + r, m * gi + s, acc);
                    }
                }
            }
        }
        out.compress();
        Ok(out)
    }

    /// Mixed third derivative (two field slots, one surface slot) contracted
    /// with `w` in a field slot; rows are field dofs, columns surface dofs.
    pub fn third_xzz_contract(&self, w: &[f64]) -> Result<CooMatrix> {
        self.check_direction(w)?;
        let store = self
            .third_xzz
            .as_ref()
            .ok_or_else(|| Error::Unsupported("mixed field-field-surface derivative was not requested".into()))?;
        let m = self.m;
        let mut out = CooMatrix::new(self.ndofs, self.ndofs);
        for el in store {
            for (a, f2) in el.f2.iter().enumerate() {
                let gi = el.nodes[a];
                let mut v = [0.0; 3];
                for s in 0..m {
                    for r in 0..m {
                        v[s] += w[m * gi + r] * f2[r][s];
                    }
                }
                for s in 0..m {
                    if v[s] == 0.0 {
                        continue;
                    }
                    for (b, &gl) in el.nodes[..el.nn].iter().enumerate() {
                        for t in 0..m {
                            out.push(m * gi + s, m * gl + t, v[s] * el.gx[b][t]);
                        }
                    }
                }
            }
        }
        out.compress();
        Ok(out)
    }

    /// Mixed third derivative (one field slot, two surface slots) contracted
    /// with `w` in the field slot; symmetric over surface dofs.
    pub fn third_xxz_contract(&self, w: &[f64]) -> Result<CooMatrix> {
        self.check_direction(w)?;
        let store = self
            .third_xxz
            .as_ref()
            .ok_or_else(|| Error::Unsupported("mixed field-surface-surface derivative was not requested".into()))?;
        let m = self.m;
        let mut out = CooMatrix::new(self.ndofs, self.ndofs);
        for el in store {
            let mut u = 0.0;
            for (a, f1) in el.f1.iter().enumerate() {
                let gi = el.nodes[a];
                for r in 0..m {
                    u += w[m * gi + r] * f1[r];
                }
            }
            if u == 0.0 {
                continue;
            }
            let nl = el.nn * m;
            for a in 0..nl {
                let ga = m * el.nodes[a / m] + a % m;
                for b in 0..nl {
                    let gb = m * el.nodes[b / m] + b % m;
                    let v = el.gxx[a * nl + b];
                    if v != 0.0 {
                        out.push(ga, gb, u * v);
                    }
                }
            }
        }
        out.compress();
        Ok(out)
    }

    /// Surface-slot third derivative (area functional) contracted with `w`;
    /// symmetric over surface dofs.
    pub fn third_xxx_contract(&self, w: &[f64]) -> Result<CooMatrix> {
        self.check_direction(w)?;
        let store = self
            .third_xxx
            .as_ref()
            .ok_or_else(|| Error::Unsupported("third surface derivative was not requested".into()))?;
        let m = self.m;
        let mut out = CooMatrix::new(self.ndofs, self.ndofs);
        for el in store {
            let nl = el.nn * m;
            for a in 0..nl {
                let ga = m * el.nodes[a / m] + a % m;
                for b in 0..nl {
                    let gb = m * el.nodes[b / m] + b % m;
                    let mut acc = 0.0;
                    for c in 0..nl {
                        let gc = m * el.nodes[c / m] + c % m;
                        acc += el.gxxx[(a * nl + b) * nl + c] * w[gc];
                    }
                    if acc != 0.0 {
                        out.push(ga, gb, acc);
                    }
                }
            }
        }
        out.compress();
        Ok(out)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).product::<usize>() as f64
}

fn check_aligned(z: &NodalField, x: &SimplicialSurface) -> Result<()> {
    if !z.aligned_with(x) {
        return Err(Error::InvalidInput(format!(
            "field with {} vertices x {} components does not match mesh with {} vertices x {} components",
            z.nv(),
            z.m(),
            x.nv(),
            x.m()
        )));
    }
    Ok(())
}

/// Per-element chain-rule data for `gamma(R_T[X])`.
struct GammaChain {
    g: f64,
    /// d gamma(R_T) / d X_(j s)
    gx: [[f64; 3]; 3],
    /// second derivatives over local dofs, (nn*m)^2, row-major
    gxx: Vec<f64>,
    /// third derivatives over local dofs, (nn*m)^3 (only when requested)
    gxxx: Vec<f64>,
}

fn gamma_chain(
    model: &AnisotropyModel,
    d: usize,
    xl: &[[f64; 3]; 3],
    order: usize,
) -> Result<GammaChain> {
    let m = d + 1;
    let nn = d + 1;
    let nl = nn * m;
    let nm = element_normal_map(d, xl);
    let g = model.gamma(&nm.r[..m])?;
    let mut out = GammaChain { g, gx: [[0.0; 3]; 3], gxx: Vec::new(), gxxx: Vec::new() };
    if order == 0 {
        return Ok(out);
    }
    let gd = model.gamma_derivatives(&nm.r[..m], order.min(3))?;
    for j in 0..nn {
        for s in 0..m {
            let mut acc = 0.0;
            for u in 0..m {
                acc += gd.grad[u] * nm.dr[u][j][s];
            }
            out.gx[j][s] = acc;
        }
    }
    if order >= 2 {
        out.gxx = vec![0.0; nl * nl];
        for a in 0..nl {
            let (ja, sa) = (a / m, a % m);
            for b in 0..nl {
                let (jb, sb) = (b / m, b % m);
                let mut acc = 0.0;
                for u in 0..m {
                    acc += gd.grad[u] * nm.d2r[u][ja][sa][jb][sb];
                    for v in 0..m {
                        acc += gd.hess[u][v] * nm.dr[u][ja][sa] * nm.dr[v][jb][sb];
                    }
                }
                out.gxx[a * nl + b] = acc;
            }
        }
    }
    if order >= 3 {
        out.gxxx = vec![0.0; nl * nl * nl];
        for a in 0..nl {
            let (ja, sa) = (a / m, a % m);
            for b in 0..nl {
                let (jb, sb) = (b / m, b % m);
                for c in 0..nl {
                    let (jc, sc) = (c / m, c % m);
                    let mut acc = 0.0;
                    for u in 0..m {
                        for v in 0..m {
                            acc += gd.hess[u][v]
                                * (nm.d2r[u][ja][sa][jb][sb] * nm.dr[v][jc][sc]
                                    + nm.d2r[u][ja][sa][jc][sc] * nm.dr[v][jb][sb]
                                    + nm.dr[u][ja][sa] * nm.d2r[v][jb][sb][jc][sc]);
                            for w in 0..m {
                                acc += gd.third[u][v][w]
                                    * nm.dr[u][ja][sa]
                                    * nm.dr[v][jb][sb]
                                    * nm.dr[w][jc][sc];
                            }
                        }
                    }
                    out.gxxx[(a * nl + b) * nl + c] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Lumped anisotropic quadratic form of a nodal field over a mesh.
pub fn m_gamma(model: &AnisotropyModel, z: &NodalField, x: &SimplicialSurface) -> Result<f64> {
    check_aligned(z, x)?;
    let m = x.m();
    let fac = 1.0 / factorial(x.d() + 1);
    let mut total = 0.0;
    for e in 0..x.ne() {
        let xl = x.element_coords(e);
        let nm = element_normal_map(x.d(), &xl);
        let g = model.gamma(&nm.r[..m])?;
        let mut dual_sum = 0.0;
        for &v in x.element(e) {
            dual_sum += model.dual_sq(z.vertex(v))?;
        }
        total += fac * dual_sum * g;
    }
    Ok(total)
}

/// Assembles the requested derivative families of the quadratic form. The
/// value is always filled.
pub fn m_gamma_derivatives(
    model: &AnisotropyModel,
    z: &NodalField,
    x: &SimplicialSurface,
    terms: &[MTerm],
) -> Result<DerivativeBundle> {
    check_aligned(z, x)?;
    let d = x.d();
    let m = x.m();
    let nn = d + 1;
    let ndofs = m * x.nv();
    let fac = 1.0 / factorial(d + 1);
    let has = |t: MTerm| terms.contains(&t);

    let order_x = if has(MTerm::DXX) || has(MTerm::DXXZ) {
        2
    } else if has(MTerm::DX) || has(MTerm::DZX) || has(MTerm::DXZZ) {
        1
    } else {
        0
    };
    let order_z = if has(MTerm::DZZZ) {
        3
    } else if has(MTerm::DZZ) || has(MTerm::DXZZ) {
        2
    } else if has(MTerm::DZ) || has(MTerm::DZX) || has(MTerm::DXXZ) {
        1
    } else {
        0
    };

    let mut bundle = DerivativeBundle::empty(ndofs, m);
    let mut d_z = if has(MTerm::DZ) { Some(vec![0.0; ndofs]) } else { None };
    let mut d_x = if has(MTerm::DX) { Some(vec![0.0; ndofs]) } else { None };
    let mut d_zz = if has(MTerm::DZZ) { Some(CooMatrix::new(ndofs, ndofs)) } else { None };
    let mut d_xx = if has(MTerm::DXX) { Some(CooMatrix::new(ndofs, ndofs)) } else { None };
    let mut d_zx = if has(MTerm::DZX) { Some(CooMatrix::new(ndofs, ndofs)) } else { None };
    let mut s_zzz = if has(MTerm::DZZZ) { Some(Vec::with_capacity(x.ne())) } else { None };
    let mut s_xzz = if has(MTerm::DXZZ) { Some(Vec::with_capacity(x.ne())) } else { None };
    let mut s_xxz = if has(MTerm::DXXZ) { Some(Vec::with_capacity(x.ne())) } else { None };

    for e in 0..x.ne() {
        let xl = x.element_coords(e);
        let chain = gamma_chain(model, d, &xl, order_x)?;
        let el = x.element(e);
        let mut nodes = [0usize; 3];
        nodes[..nn].copy_from_slice(el);

        let mut dual_vals = [0.0; 3];
        let mut dual_derivs: Vec<ScalarDerivs> = Vec::with_capacity(nn);
        let mut dual_sum = 0.0;
        for (a, &v) in el.iter().enumerate() {
            let (val, der) = model.dual_sq_with_derivatives(z.vertex(v), order_z)?;
            dual_vals[a] = val;
            dual_sum += val;
            dual_derivs.push(der);
        }
        bundle.value += fac * dual_sum * chain.g;

        if let Some(gz) = d_z.as_mut() {
            for (a, &gi) in el.iter().enumerate() {
                for r in 0..m {
                    gz[m * gi + r] += fac * dual_derivs[a].grad[r] * chain.g;
                }
            }
        }
        if let Some(gx) = d_x.as_mut() {
            for (b, &gj) in el.iter().enumerate() {
                for s in 0..m {
                    gx[m * gj + s] += fac * dual_sum * chain.gx[b][s];
                }
            }
        }
        if let Some(mzz) = d_zz.as_mut() {
            for (a, &gi) in el.iter().enumerate() {
                for r in 0..m {
                    for s in 0..m {
                        mzz.push(m * gi + r, m * gi + s, fac * dual_derivs[a].hess[r][s] * chain.g);
                    }
                }
            }
        }
        if let Some(mzx) = d_zx.as_mut() {
            for (a, &gi) in el.iter().enumerate() {
                for (b, &gj) in el.iter().enumerate() {
                    for r in 0..m {
                        if dual_derivs[a].grad[r] == 0.0 {
                            continue;
                        }
                        for s in 0..m {
                            mzx.push(m * gi + r, m * gj + s, fac * dual_derivs[a].grad[r] * chain.gx[b][s]);
                        }
                    }
                }
            }
        }
        if let Some(mxx) = d_xx.as_mut() {
            let nl = nn * m;
            for a in 0..nl {
                let ga = m * el[a / m] + a % m;
                for b in 0..nl {
                    let gb = m * el[b / m] + b % m;
                    let v = chain.gxx[a * nl + b];
                    if v != 0.0 {
                        mxx.push(ga, gb, fac * dual_sum * v);
                    }
                }
            }
        }
        if let Some(store) = s_zzz.as_mut() {
            let mut blocks = Vec::with_capacity(nn);
            for der in dual_derivs.iter().take(nn) {
                let mut blk = [[[0.0; 3]; 3]; 3];
                for r in 0..m {
                    for s in 0..m {
                        for t in 0..m {
                            blk[r][s][t] = fac * der.third[r][s][t] * chain.g;
                        }
                    }
                }
                blocks.push(blk);
            }
            store.push(ElemZzz { nodes, blocks });
        }
        if let Some(store) = s_xzz.as_mut() {
            let mut f2 = Vec::with_capacity(nn);
            for der in dual_derivs.iter().take(nn) {
                let mut h = [[0.0; 3]; 3];
                for r in 0..m {
                    for s in 0..m {
                        h[r][s] = fac * der.hess[r][s];
                    }
                }
                f2.push(h);
            }
            store.push(ElemXzz { nodes, nn, f2, gx: chain.gx });
        }
        if let Some(store) = s_xxz.as_mut() {
            let mut f1 = Vec::with_capacity(nn);
            for der in dual_derivs.iter().take(nn) {
                let mut gvec = [0.0; 3];
                gvec[..m].copy_from_slice(&der.grad[..m]);
                f1.push(gvec);
            }
            store.push(ElemXxz { nodes, nn, f1: f1.iter().map(|g| [fac * g[0], fac * g[1], fac * g[2]]).collect(), gxx: chain.gxx.clone() });
        }
    }

    if let Some(mut c) = d_zz.take() {
        c.compress();
        bundle.d_zz = Some(c);
    }
    if let Some(mut c) = d_xx.take() {
        c.compress();
        bundle.d_xx = Some(c);
    }
    if let Some(mut c) = d_zx.take() {
        c.compress();
        bundle.d_zx = Some(c);
    }
    bundle.d_z = d_z;
    bundle.d_x = d_x;
    bundle.third_zzz = s_zzz;
    bundle.third_xzz = s_xzz;
    bundle.third_xxz = s_xxz;
    Ok(bundle)
}

/// Discrete anisotropic area of a mesh.
pub fn a_gamma(model: &AnisotropyModel, x: &SimplicialSurface) -> Result<f64> {
    let m = x.m();
    let fac = 1.0 / factorial(x.d());
    let dm = x.degeneracy_threshold();
    let mut total = 0.0;
    for e in 0..x.ne() {
        let nm = element_normal_map(x.d(), &x.element_coords(e));
        let scale: f64 = nm.r[..m].iter().map(|v| v * v).sum::<f64>().sqrt();
        if scale < dm {
            return Err(Error::NearSingular(format!("element {e} is degenerate")));
        }
        total += fac * model.gamma(&nm.r[..m])?;
    }
    Ok(total)
}

/// Derivatives of the discrete anisotropic area up to `order <= 3`; the
/// first derivative lands in `d_x`, the second in `d_xx`, the third is kept
/// per element for contraction via `third_xxx_contract`.
pub fn a_gamma_derivatives(
    model: &AnisotropyModel,
    x: &SimplicialSurface,
    order: usize,
) -> Result<DerivativeBundle> {
    if order > 3 {
        return Err(Error::Unsupported(format!("area derivatives of order {order} are not available")));
    }
    let d = x.d();
    let m = x.m();
    let nn = d + 1;
    let ndofs = m * x.nv();
    let fac = 1.0 / factorial(d);
    let dm = x.degeneracy_threshold();

    let mut bundle = DerivativeBundle::empty(ndofs, m);
    let mut d_x = if order >= 1 { Some(vec![0.0; ndofs]) } else { None };
    let mut d_xx = if order >= 2 { Some(CooMatrix::new(ndofs, ndofs)) } else { None };
    let mut s_xxx = if order >= 3 { Some(Vec::with_capacity(x.ne())) } else { None };

    for e in 0..x.ne() {
        let xl = x.element_coords(e);
        let nm = element_normal_map(d, &xl);
        let scale: f64 = nm.r[..m].iter().map(|v| v * v).sum::<f64>().sqrt();
        if scale < dm {
            return Err(Error::NearSingular(format!("element {e} is degenerate")));
        }
        let chain = gamma_chain(model, d, &xl, order)?;
        let el = x.element(e);
        bundle.value += fac * chain.g;
        if let Some(gx) = d_x.as_mut() {
            for (b, &gj) in el.iter().enumerate() {
                for s in 0..m {
                    gx[m * gj + s] += fac * chain.gx[b][s];
                }
            }
        }
        if let Some(axx) = d_xx.as_mut() {
            let nl = nn * m;
            for a in 0..nl {
                let ga = m * el[a / m] + a % m;
                for b in 0..nl {
                    let gb = m * el[b / m] + b % m;
                    let v = chain.gxx[a * nl + b];
                    if v != 0.0 {
                        axx.push(ga, gb, fac * v);
                    }
                }
            }
        }
        if let Some(store) = s_xxx.as_mut() {
            let mut nodes = [0usize; 3];
            nodes[..nn].copy_from_slice(el);
            store.push(ElemXxx { nodes, nn, gxxx: chain.gxxx.iter().map(|v| fac * v).collect() });
        }
    }

    if let Some(mut c) = d_xx.take() {
        c.compress();
        bundle.d_xx = Some(c);
    }
    bundle.d_x = d_x;
    bundle.third_xxx = s_xxx;
    Ok(bundle)
}

/// Inner time-step energy: distance from `x` plus weighted area of `y`.
pub fn energy_inner(
    model: &AnisotropyModel,
    x: &SimplicialSurface,
    y: &SimplicialSurface,
    tau_tilde: f64,
) -> Result<f64> {
    if !(tau_tilde >= 0.0) || !tau_tilde.is_finite() {
        return Err(Error::InvalidConfig(format!("inner time step must be >= 0, got {tau_tilde}")));
    }
    let z = NodalField::difference(y, x)?;
    Ok(m_gamma(model, &z, x)? + 2.0 * tau_tilde * a_gamma(model, y)?)
}

/// Outer time-step energy: squared distance from the previous step plus the
/// implicit curvature energy extracted from the inner step, plus an optional
/// area penalty.
pub fn energy_outer(
    model: &AnisotropyModel,
    x_prev: &SimplicialSurface,
    x: &SimplicialSurface,
    y: &SimplicialSurface,
    params: &FlowParams,
) -> Result<f64> {
    params.validate()?;
    let z_step = NodalField::difference(x, x_prev)?;
    let z_inner = NodalField::difference(y, x)?;
    let mut e = m_gamma(model, &z_step, x_prev)?
        + params.tau / (params.tau_tilde * params.tau_tilde) * m_gamma(model, &z_inner, x)?;
    if params.lambda != 0.0 {
        e += 2.0 * params.tau * params.lambda * a_gamma(model, x)?;
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::AnisotropyModel;
    use crate::geometry::regular_polygon;

    fn segment_pair() -> SimplicialSurface {
        // smallest legal closed curve containing the segment (0,0)-(1,0)
        SimplicialSurface::closed_curve(&[[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]]).unwrap()
    }

    #[test]
    fn m_gamma_single_segment_value() {
        // isolate one segment by zeroing the field on the third vertex
        let x = segment_pair();
        let iso = AnisotropyModel::isotropic();
        let z = NodalField::from_vec(vec![0.0, 1.0, 0.0, 3.0, 0.0, 0.0], 2).unwrap();
        // only element 0 (vertices 0,1) sees a nonzero field sum:
        // 1/2 (1 + 9) * |R_0| = 5; element 1 contributes 1/2*9*|R_1|, element 2 1/2*1*|R_2|
        let e0 = 0.5 * (1.0 + 9.0) * 1.0;
        let l1 = ((0.5f64 - 1.0).powi(2) + 1.0).sqrt();
        let l2 = (0.5f64.powi(2) + 1.0).sqrt();
        let expect = e0 + 0.5 * 9.0 * l1 + 0.5 * 1.0 * l2;
        let got = m_gamma(&iso, &z, &x).unwrap();
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
    }

    #[test]
    fn m_gamma_zero_field_is_zero() {
        let x = regular_polygon(1.0, 12).unwrap();
        for model in [
            AnisotropyModel::isotropic(),
            AnisotropyModel::elliptic(6.0, 1.0).unwrap(),
            AnisotropyModel::reg_l1(1e-3).unwrap(),
        ] {
            let z = NodalField::zeros(&x);
            assert_eq!(m_gamma(&model, &z, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn m_gamma_misaligned_field_errors() {
        let x = regular_polygon(1.0, 8).unwrap();
        let z = NodalField::from_vec(vec![0.0; 10], 2).unwrap();
        assert!(m_gamma(&AnisotropyModel::isotropic(), &z, &x).is_err());
    }

    #[test]
    fn m_gamma_brute_force_resummation() {
        // elliptic weight, radial unit field on a 64-gon, summed independently
        let model = AnisotropyModel::elliptic(6.0, 1.0).unwrap();
        let x = regular_polygon(1.0, 64).unwrap();
        let mut zdata = Vec::with_capacity(128);
        for i in 0..64 {
            let p = x.vertex(i);
            let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
            zdata.push(p[0] / n);
            zdata.push(p[1] / n);
        }
        let z = NodalField::from_vec(zdata, 2).unwrap();
        let mut brute = 0.0;
        for e in 0..64 {
            let el = x.element(e);
            let a = x.vertex(el[0]);
            let b = x.vertex(el[1]);
            let r = [a[1] - b[1], b[0] - a[0]];
            let g = (36.0 * r[0] * r[0] + r[1] * r[1]).sqrt();
            let mut dual_sum = 0.0;
            for &v in el {
                let zi = z.vertex(v);
                dual_sum += zi[0] * zi[0] / 36.0 + zi[1] * zi[1];
            }
            brute += 0.5 * dual_sum * g;
        }
        let got = m_gamma(&model, &z, &x).unwrap();
        assert!((got - brute).abs() <= 1e-12 * brute.abs().max(1.0));
    }

    #[test]
    fn a_gamma_values() {
        // l1 limit on the unit square: every unit edge has weight 1
        let sq = SimplicialSurface::closed_curve(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let l1 = AnisotropyModel::reg_l1(1e-12).unwrap();
        assert!((a_gamma(&l1, &sq).unwrap() - 4.0).abs() < 1e-5);
        // isotropic: polygon perimeter
        let m = 48;
        let poly = regular_polygon(1.0, m).unwrap();
        let perim = 2.0 * (m as f64) * (std::f64::consts::PI / m as f64).sin();
        assert!((a_gamma(&AnisotropyModel::isotropic(), &poly).unwrap() - perim).abs() < 1e-12);
    }

    #[test]
    fn translation_and_scaling_invariance() {
        let model = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
        let poly = regular_polygon(1.0, 10).unwrap();
        let z = NodalField::from_vec((0..20).map(|i| (i as f64 * 0.37).sin()).collect(), 2).unwrap();
        let a0 = a_gamma(&model, &poly).unwrap();
        let m0 = m_gamma(&model, &z, &poly).unwrap();
        // translation
        let shifted: Vec<f64> = poly
            .coords()
            .iter()
            .enumerate()
            .map(|(k, v)| v + if k % 2 == 0 { 3.7 } else { -1.2 })
            .collect();
        let poly_t = poly.with_coords(shifted).unwrap();
        assert!((a_gamma(&model, &poly_t).unwrap() - a0).abs() < 1e-12 * a0);
        assert!((m_gamma(&model, &z, &poly_t).unwrap() - m0).abs() < 1e-12 * m0.abs().max(1.0));
        // scaling: degree-d homogeneity in the surface slot
        let lam = 1.7;
        let scaled: Vec<f64> = poly.coords().iter().map(|v| lam * v).collect();
        let poly_s = poly.with_coords(scaled).unwrap();
        assert!((a_gamma(&model, &poly_s).unwrap() - lam * a0).abs() < 1e-12 * a0 * lam);
        assert!((m_gamma(&model, &z, &poly_s).unwrap() - lam * m0).abs() < 1e-12 * (lam * m0).abs().max(1.0));
        // quadratic structure in the field slot (exactly quadratic duals)
        let z2 = NodalField::from_vec(z.as_slice().iter().map(|v| 2.0 * v).collect(), 2).unwrap();
        assert!((m_gamma(&model, &z2, &poly).unwrap() - 4.0 * m0).abs() < 1e-12 * m0.abs().max(1.0));
    }

    #[test]
    fn field_hessian_is_node_diagonal() {
        let model = AnisotropyModel::elliptic(3.0, 1.0).unwrap();
        let poly = regular_polygon(1.0, 8).unwrap();
        let z = NodalField::from_vec((0..16).map(|i| 0.3 + 0.1 * i as f64).collect(), 2).unwrap();
        let b = m_gamma_derivatives(&model, &z, &poly, &[MTerm::DZZ]).unwrap();
        for &(i, j, _) in &b.d_zz.as_ref().unwrap().entries {
            assert_eq!(i / 2, j / 2, "field Hessian couples distinct nodes");
        }
    }

    #[test]
    fn field_gradient_vanishes_at_zero_for_quadratic_duals() {
        let model = AnisotropyModel::elliptic(6.0, 1.0).unwrap();
        let poly = regular_polygon(1.0, 8).unwrap();
        let z = NodalField::zeros(&poly);
        let b = m_gamma_derivatives(&model, &z, &poly, &[MTerm::DZ]).unwrap();
        assert!(b.d_z.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_inner_reduces_to_area_at_rest() {
        let model = AnisotropyModel::isotropic();
        let poly = regular_polygon(1.0, 64).unwrap();
        let tt = 0.01;
        let e = energy_inner(&model, &poly, &poly, tt).unwrap();
        let perim = a_gamma(&model, &poly).unwrap();
        assert!((e - 2.0 * tt * perim).abs() < 1e-13);
    }

    #[test]
    fn energy_outer_trivial_candidate_and_lambda_linearity() {
        let model = AnisotropyModel::isotropic();
        let poly = regular_polygon(1.0, 32).unwrap();
        let p0 = FlowParams { tau: 0.01, tau_tilde: 0.01, lambda: 0.0 };
        let e0 = energy_outer(&model, &poly, &poly, &poly, &p0).unwrap();
        assert_eq!(e0, 0.0);
        let p4 = FlowParams { lambda: 4.0, ..p0 };
        let e4 = energy_outer(&model, &poly, &poly, &poly, &p4).unwrap();
        let area = a_gamma(&model, &poly).unwrap();
        assert!((e4 - 0.08 * area).abs() < 1e-12);
        assert!(energy_outer(&model, &poly, &poly, &poly, &FlowParams { tau: -1.0, tau_tilde: 0.01, lambda: 0.0 }).is_err());
    }

    #[test]
    fn energy_outer_wulff_radial_identity() {
        // scaled samplings of the dual unit ball turn the outer energy into
        // a scalar function of the radii, exactly for quadratic duals
        let model = AnisotropyModel::elliptic(6.0, 1.0).unwrap();
        let pts = model.wulff_sample(1.0, 128).unwrap();
        let base = SimplicialSurface::closed_curve(&pts).unwrap();
        let (tau, tt) = (0.02, 0.004);
        let rk = 1.0;
        let r = 1.013;
        let rt = r - tt / r;
        let scale = |s: f64| {
            let c: Vec<f64> = base.coords().iter().map(|v| s * v).collect();
            base.with_coords(c).unwrap()
        };
        let e = energy_outer(
            &model,
            &scale(rk),
            &scale(r),
            &scale(rt),
            &FlowParams { tau, tau_tilde: tt, lambda: 0.0 },
        )
        .unwrap();
        let area_k = a_gamma(&model, &scale(rk)).unwrap();
        let expect = area_k * ((r - rk).powi(2) + tau / (r * rk));
        assert!((e - expect).abs() < 1e-10 * expect, "{e} vs {expect}");
    }
}
