//! Anisotropic direction weights.
//!
//! An anisotropy is a positive, 1-homogeneous weight `gamma` on directions;
//! the squared dual norm `dual_sq` weights displacement fields in the metric
//! of the flow. Every model here writes `gamma` as a sum of square roots of
//! positive definite quadratic forms, so all derivatives up to third order
//! are available in closed form away from the origin.
//!
//! Concrete models:
//! - `Isotropic` — the Euclidean norm; dual is Euclidean too.
//! - `Elliptic` — `sqrt(sum a_l^2 p_l^2)`; dual `sum z_l^2 / a_l^2` (exact).
//! - `RegL1(eps)` — smoothed l1 norm `sum_l sqrt(eps|p|^2 + p_l^2)` in the
//!   plane; its dual is taken as the smoothed l-infinity norm with the same
//!   `eps` (exact duals in the limit `eps -> 0`).
//! - `RegLInf(eps)` — smoothed l-infinity norm, dual smoothed l1.
//! - `QuadSum` — general `sum_k sqrt(p . G_k p)`; usable as a primal weight,
//!   dual evaluation requires an explicitly supplied dual model.

use crate::error::{Error, Result};

/// Default threshold below which dual-norm derivatives switch to the guarded
/// quadratic fallback.
pub const DEFAULT_DUAL_GUARD: f64 = 1e-10;

/// Square 3x3 array; only the leading `dim x dim` block is used.
pub type Mat3 = [[f64; 3]; 3];

/// Derivatives of a scalar function of a vector argument in up to three
/// components, filled up to the requested order.
#[derive(Debug, Clone, Copy)]
pub struct ScalarDerivs {
    pub dim: usize,
    pub grad: [f64; 3],
    pub hess: Mat3,
    pub third: [Mat3; 3],
}

impl ScalarDerivs {
    fn zero(dim: usize) -> Self {
        ScalarDerivs { dim, grad: [0.0; 3], hess: [[0.0; 3]; 3], third: [[[0.0; 3]; 3]; 3] }
    }
}

#[derive(Debug, Clone)]
pub enum AnisotropyKind {
    Isotropic,
    Elliptic { axes: Vec<f64> },
    RegL1 { eps: f64 },
    RegLInf { eps: f64 },
    QuadSum { dim: usize, mats: Vec<Mat3>, dual: Option<Box<AnisotropyModel>> },
}

/// An anisotropy model together with its dual-guard threshold. Immutable
/// after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct AnisotropyModel {
    kind: AnisotropyKind,
    dual_guard: f64,
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has non-finite entries: {v:?}")));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl AnisotropyModel {
    pub fn isotropic() -> Self {
        AnisotropyModel { kind: AnisotropyKind::Isotropic, dual_guard: DEFAULT_DUAL_GUARD }
    }

    /// Elliptic weight in the plane, `gamma(p) = sqrt(a1^2 p1^2 + a2^2 p2^2)`.
    pub fn elliptic(a1: f64, a2: f64) -> Result<Self> {
        Self::elliptic_axes(vec![a1, a2])
    }

    /// Elliptic weight with one positive coefficient per component; three
    /// coefficients give the surface-dimension variant.
    pub fn elliptic_axes(axes: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&axes.len()) || axes.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidConfig(format!("elliptic axes must be 2 or 3 positive values, got {axes:?}")));
        }
        Ok(AnisotropyModel { kind: AnisotropyKind::Elliptic { axes }, dual_guard: DEFAULT_DUAL_GUARD })
    }

    pub fn reg_l1(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidConfig(format!("regularization parameter must be positive, got {eps}")));
        }
        Ok(AnisotropyModel { kind: AnisotropyKind::RegL1 { eps }, dual_guard: DEFAULT_DUAL_GUARD })
    }

    pub fn reg_linf(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidConfig(format!("regularization parameter must be positive, got {eps}")));
        }
        Ok(AnisotropyModel { kind: AnisotropyKind::RegLInf { eps }, dual_guard: DEFAULT_DUAL_GUARD })
    }

    /// `gamma(p) = sum_k sqrt(p . G_k p)` with symmetric positive definite
    /// `G_k`. The dual norm has no closed form; pass `dual` whose `gamma`
    /// is used as the dual norm when dual evaluations are required.
    pub fn quad_sum(dim: usize, mats: Vec<Mat3>, dual: Option<AnisotropyModel>) -> Result<Self> {
        if !(2..=3).contains(&dim) || mats.is_empty() {
            return Err(Error::InvalidConfig("quad-sum model needs dim 2 or 3 and at least one matrix".into()));
        }
        for g in &mats {
            for r in 0..dim {
                for s in 0..dim {
                    if (g[r][s] - g[s][r]).abs() > 1e-14 {
                        return Err(Error::InvalidConfig("quad-sum matrix not symmetric".into()));
                    }
                }
            }
            // positive definiteness via leading principal minors
            let d1 = g[0][0];
            let d2 = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let d3 = if dim == 3 {
                g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
                    - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
                    + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
            } else {
                1.0
            };
            if !(d1 > 0.0 && d2 > 0.0 && d3 > 0.0) {
                return Err(Error::InvalidConfig("quad-sum matrix not positive definite".into()));
            }
        }
        Ok(AnisotropyModel {
            kind: AnisotropyKind::QuadSum { dim, mats, dual: dual.map(Box::new) },
            dual_guard: DEFAULT_DUAL_GUARD,
        })
    }

    pub fn with_dual_guard(mut self, guard: f64) -> Self {
        self.dual_guard = guard;
        self
    }

    pub fn dual_guard(&self) -> f64 {
        self.dual_guard
    }

    pub fn kind(&self) -> &AnisotropyKind {
        &self.kind
    }

    /// Regularization parameter of the smoothed crystalline models.
    pub fn regularization(&self) -> Option<f64> {
        match &self.kind {
            AnisotropyKind::RegL1 { eps } | AnisotropyKind::RegLInf { eps } => Some(*eps),
            _ => None,
        }
    }

    /// The same model family at a different regularization parameter.
    pub fn with_regularization(&self, eps: f64) -> Option<AnisotropyModel> {
        match &self.kind {
            AnisotropyKind::RegL1 { .. } => AnisotropyModel::reg_l1(eps).ok(),
            AnisotropyKind::RegLInf { .. } => AnisotropyModel::reg_linf(eps).ok(),
            _ => None,
        }
        .map(|m| m.with_dual_guard(self.dual_guard))
    }

    fn dim_ok(&self, dim: usize) -> Result<()> {
        let fixed = match &self.kind {
            AnisotropyKind::Isotropic => None,
            AnisotropyKind::Elliptic { axes } => Some(axes.len()),
            AnisotropyKind::RegL1 { .. } | AnisotropyKind::RegLInf { .. } => Some(2),
            AnisotropyKind::QuadSum { dim, .. } => Some(*dim),
        };
        match fixed {
            Some(f) if f != dim => Err(Error::InvalidInput(format!(
                "model expects {f}-component vectors, got {dim}"
            ))),
            _ if !(2..=3).contains(&dim) => {
                Err(Error::InvalidInput(format!("vectors must have 2 or 3 components, got {dim}")))
            }
            _ => Ok(()),
        }
    }

    /// Quadratic forms whose square-rooted sum is `gamma` at dimension `dim`.
    fn primal_mats(&self, dim: usize) -> Result<Vec<Mat3>> {
        self.dim_ok(dim)?;
        Ok(match &self.kind {
            AnisotropyKind::Isotropic => vec![identity(dim)],
            AnisotropyKind::Elliptic { axes } => {
                let mut g = [[0.0; 3]; 3];
                for (l, a) in axes.iter().enumerate() {
                    g[l][l] = a * a;
                }
                vec![g]
            }
            AnisotropyKind::RegL1 { eps } => reg_l1_mats(*eps),
            AnisotropyKind::RegLInf { eps } => reg_linf_mats(*eps),
            AnisotropyKind::QuadSum { mats, .. } => mats.clone(),
        })
    }

    /// How the squared dual is evaluated at dimension `dim`.
    fn dual_form(&self, dim: usize) -> Result<DualForm> {
        self.dim_ok(dim)?;
        Ok(match &self.kind {
            AnisotropyKind::Isotropic => DualForm::Quadratic(identity(dim)),
            AnisotropyKind::Elliptic { axes } => {
                let mut q = [[0.0; 3]; 3];
                for (l, a) in axes.iter().enumerate() {
                    q[l][l] = 1.0 / (a * a);
                }
                DualForm::Quadratic(q)
            }
            AnisotropyKind::RegL1 { eps } => DualForm::SqrtSumSquared(reg_linf_mats(*eps)),
            AnisotropyKind::RegLInf { eps } => DualForm::SqrtSumSquared(reg_l1_mats(*eps)),
            AnisotropyKind::QuadSum { dual, .. } => match dual {
                Some(d) => DualForm::SqrtSumSquared(d.primal_mats(dim)?),
                None => {
                    return Err(Error::Unsupported(
                        "quad-sum anisotropy has no closed-form dual; supply an explicit dual model".into(),
                    ))
                }
            },
        })
    }

    /// `gamma(p)`; 1-homogeneous, positive away from the origin.
    pub fn gamma(&self, p: &[f64]) -> Result<f64> {
        check_finite(p, "direction")?;
        let mats = self.primal_mats(p.len())?;
        Ok(mats.iter().map(|g| quad_value(g, p).max(0.0).sqrt()).sum())
    }

    /// Analytic derivatives of `gamma` up to `order` (1, 2 or 3).
    pub fn gamma_derivatives(&self, p: &[f64], order: usize) -> Result<ScalarDerivs> {
        check_finite(p, "direction")?;
        check_order(order)?;
        if norm(p) < self.dual_guard {
            return Err(Error::NearSingular(format!(
                "gamma derivatives requested at |p| = {:e} < guard {:e}",
                norm(p),
                self.dual_guard
            )));
        }
        let mats = self.primal_mats(p.len())?;
        let mut out = ScalarDerivs::zero(p.len());
        for g in &mats {
            let d = sqrt_quad_derivs(g, p, order);
            accumulate(&mut out, &d.1, 1.0, order, p.len());
        }
        Ok(out)
    }

    /// Squared dual norm `dual_sq(z) = gamma*(z)^2`.
    pub fn dual_sq(&self, z: &[f64]) -> Result<f64> {
        Ok(self.dual_sq_with_derivatives(z, 0)?.0)
    }

    /// Derivatives of the squared dual norm up to `order`.
    pub fn dual_sq_derivatives(&self, z: &[f64], order: usize) -> Result<ScalarDerivs> {
        check_order(order)?;
        Ok(self.dual_sq_with_derivatives(z, order)?.1)
    }

    /// Value and derivatives of the squared dual norm in one pass. Near the
    /// origin non-quadratic duals fall back to `c |z|^2` with `c` the mean of
    /// `dual_sq` over the coordinate directions, so evaluation never fails on
    /// small arguments.
    pub fn dual_sq_with_derivatives(&self, z: &[f64], order: usize) -> Result<(f64, ScalarDerivs)> {
        check_finite(z, "dual argument")?;
        let dim = z.len();
        match self.dual_form(dim)? {
            DualForm::Quadratic(q) => {
                let mut d = ScalarDerivs::zero(dim);
                let qz = mat_vec(&q, z, dim);
                let value = dot_n(z, &qz, dim);
                if order >= 1 {
                    for r in 0..dim {
                        d.grad[r] = 2.0 * qz[r];
                    }
                }
                if order >= 2 {
                    for r in 0..dim {
                        for s in 0..dim {
                            d.hess[r][s] = 2.0 * q[r][s];
                        }
                    }
                }
                Ok((value, d))
            }
            DualForm::SqrtSumSquared(mats) => {
                if norm(z) < self.dual_guard {
                    let c = self.dual_fallback_coefficient(dim, &mats);
                    let mut d = ScalarDerivs::zero(dim);
                    let value = c * z.iter().map(|x| x * x).sum::<f64>();
                    if order >= 1 {
                        for r in 0..dim {
                            d.grad[r] = 2.0 * c * z[r];
                        }
                    }
                    if order >= 2 {
                        for r in 0..dim {
                            d.hess[r][r] = 2.0 * c;
                        }
                    }
                    return Ok((value, d));
                }
                let mut f = 0.0;
                let mut fd = ScalarDerivs::zero(dim);
                for g in &mats {
                    let (v, d) = sqrt_quad_derivs(g, z, order.max(1));
                    f += v;
                    accumulate(&mut fd, &d, 1.0, order.max(1), dim);
                }
                Ok((f * f, square_compose(f, &fd, order, dim)))
            }
        }
    }

    fn dual_fallback_coefficient(&self, dim: usize, mats: &[Mat3]) -> f64 {
        let mut c = 0.0;
        for l in 0..dim {
            let mut e = [0.0; 3];
            e[l] = 1.0;
            let f: f64 = mats.iter().map(|g| quad_value(g, &e[..dim]).max(0.0).sqrt()).sum();
            c += f * f;
        }
        c / dim as f64
    }

    /// Duality map `T(z) = gamma*(z) grad gamma*(z) = grad dual_sq(z) / 2`.
    pub fn duality_map(&self, z: &[f64]) -> Result<Vec<f64>> {
        if norm(z) < self.dual_guard {
            return Err(Error::NearSingular(format!(
                "duality map requested at |z| = {:e} < guard {:e}",
                norm(z),
                self.dual_guard
            )));
        }
        let d = self.dual_sq_derivatives(z, 1)?;
        Ok((0..z.len()).map(|r| 0.5 * d.grad[r]).collect())
    }

    /// Inverse duality map `T^{-1}(xi) = gamma(xi) grad gamma(xi)`.
    pub fn duality_map_inverse(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if norm(xi) < self.dual_guard {
            return Err(Error::NearSingular(format!(
                "inverse duality map requested at |xi| = {:e} < guard {:e}",
                norm(xi),
                self.dual_guard
            )));
        }
        let g = self.gamma(xi)?;
        let d = self.gamma_derivatives(xi, 1)?;
        Ok((0..xi.len()).map(|r| g * d.grad[r]).collect())
    }

    /// Samples the boundary of the rescaled unit dual ball: vertex `i` is
    /// `radius * grad gamma(nu_i)` with `nu_i` the direction at angle
    /// `2 pi i / m`. Positively oriented for the convex models here.
    pub fn wulff_sample(&self, radius: f64, m: usize) -> Result<Vec<[f64; 2]>> {
        if m < 3 {
            return Err(Error::InvalidInput(format!("polygon needs at least 3 vertices, got {m}")));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        let mut pts = Vec::with_capacity(m);
        for i in 0..m {
            let theta = 2.0 * std::f64::consts::PI * (i as f64) / (m as f64);
            let nu = [theta.cos(), theta.sin()];
            let d = self.gamma_derivatives(&nu, 1)?;
            pts.push([radius * d.grad[0], radius * d.grad[1]]);
        }
        Ok(pts)
    }

    /// Like `wulff_sample`, but redistributes the `m` vertices to equal arc
    /// length along the boundary (dense boundary sampling followed by
    /// chord-length reparametrization).
    pub fn wulff_sample_arclength(&self, radius: f64, m: usize) -> Result<Vec<[f64; 2]>> {
        let dense_n = (m * 256).max(16384);
        let dense = self.wulff_sample(radius, dense_n)?;
        let mut cum = Vec::with_capacity(dense_n + 1);
        cum.push(0.0);
        let mut total = 0.0;
        for i in 0..dense_n {
            let a = dense[i];
            let b = dense[(i + 1) % dense_n];
            total += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cum.push(total);
        }
        let mut pts = Vec::with_capacity(m);
        let mut seg = 0usize;
        for i in 0..m {
            let target = total * (i as f64) / (m as f64);
            while cum[seg + 1] < target {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
            let a = dense[seg];
            let b = dense[(seg + 1) % dense_n];
            pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
        Ok(pts)
    }
}

enum DualForm {
    /// `dual_sq(z) = z . Q z` exactly (smooth everywhere).
    Quadratic(Mat3),
    /// `dual_sq(z) = (sum_k sqrt(z . G_k z))^2`.
    SqrtSumSquared(Vec<Mat3>),
}

fn identity(dim: usize) -> Mat3 {
    let mut g = [[0.0; 3]; 3];
    for l in 0..dim {
        g[l][l] = 1.0;
    }
    g
}

fn reg_l1_mats(eps: f64) -> Vec<Mat3> {
    // sum_l sqrt(eps |p|^2 + p_l^2): G_l = eps I + e_l e_l^T
    (0..2)
        .map(|l| {
            let mut g = [[0.0; 3]; 3];
            g[0][0] = eps;
            g[1][1] = eps;
            g[l][l] += 1.0;
            g
        })
        .collect()
}

fn reg_linf_mats(eps: f64) -> Vec<Mat3> {
    // 1/2 sqrt(eps |p|^2 + (p1 + p2)^2) + 1/2 sqrt(eps |p|^2 + (p1 - p2)^2):
    // G_pm = (eps I + u u^T) / 4 with u = (1, +-1)
    [1.0, -1.0]
        .iter()
        .map(|&s| {
            let u = [1.0, s];
            let mut g = [[0.0; 3]; 3];
            for r in 0..2 {
                for c in 0..2 {
                    g[r][c] = (if r == c { eps } else { 0.0 } + u[r] * u[c]) / 4.0;
                }
            }
            g
        })
        .collect()
}

fn check_order(order: usize) -> Result<()> {
    if order > 3 {
        return Err(Error::Unsupported(format!("derivative order {order} not available (max 3)")));
    }
    Ok(())
}

fn quad_value(g: &Mat3, p: &[f64]) -> f64 {
    let dim = p.len();
    let mut acc = 0.0;
    for r in 0..dim {
        for s in 0..dim {
            acc += p[r] * g[r][s] * p[s];
        }
    }
    acc
}

fn mat_vec(g: &Mat3, p: &[f64], dim: usize) -> [f64; 3] {
    let mut out = [0.0; 3];
    for r in 0..dim {
        for s in 0..dim {
            out[r] += g[r][s] * p[s];
        }
    }
    out
}

fn dot_n(a: &[f64], b: &[f64; 3], dim: usize) -> f64 {
    (0..dim).map(|r| a[r] * b[r]).sum()
}

/// Value and derivatives of `f(p) = sqrt(p . G p)` up to `order`.
fn sqrt_quad_derivs(g: &Mat3, p: &[f64], order: usize) -> (f64, ScalarDerivs) {
    let dim = p.len();
    let gp = mat_vec(g, p, dim);
    let q = dot_n(p, &gp, dim).max(0.0);
    let f = q.sqrt();
    let mut d = ScalarDerivs::zero(dim);
    if order == 0 {
        return (f, d);
    }
    let inv_f = 1.0 / f;
    let inv_f3 = inv_f / q;
    for r in 0..dim {
        d.grad[r] = gp[r] * inv_f;
    }
    if order >= 2 {
        for r in 0..dim {
            for s in 0..dim {
                d.hess[r][s] = g[r][s] * inv_f - gp[r] * gp[s] * inv_f3;
            }
        }
    }
    if order >= 3 {
        let inv_f5 = inv_f3 / q;
        for r in 0..dim {
            for s in 0..dim {
                for t in 0..dim {
                    d.third[r][s][t] = -(g[r][s] * gp[t] + g[r][t] * gp[s] + g[s][t] * gp[r])
                        * inv_f3
                        + 3.0 * gp[r] * gp[s] * gp[t] * inv_f5;
                }
            }
        }
    }
    (f, d)
}

fn accumulate(out: &mut ScalarDerivs, d: &ScalarDerivs, s: f64, order: usize, dim: usize) {
    for r in 0..dim {
        out.grad[r] += s * d.grad[r];
        if order >= 2 {
            for t in 0..dim {
                out.hess[r][t] += s * d.hess[r][t];
            }
        }
        if order >= 3 {
            for t in 0..dim {
                for u in 0..dim {
                    out.third[r][t][u] += s * d.third[r][t][u];
                }
            }
        }
    }
}

/// Derivatives of `F = f^2` from derivatives of `f`.
fn square_compose(f: f64, fd: &ScalarDerivs, order: usize, dim: usize) -> ScalarDerivs {
    let mut out = ScalarDerivs::zero(dim);
    if order >= 1 {
        for r in 0..dim {
            out.grad[r] = 2.0 * f * fd.grad[r];
        }
    }
    if order >= 2 {
        for r in 0..dim {
            for s in 0..dim {
                out.hess[r][s] = 2.0 * (fd.grad[r] * fd.grad[s] + f * fd.hess[r][s]);
            }
        }
    }
    if order >= 3 {
        for r in 0..dim {
            for s in 0..dim {
                for t in 0..dim {
                    out.third[r][s][t] = 2.0
                        * (fd.hess[r][s] * fd.grad[t]
                            + fd.hess[r][t] * fd.grad[s]
                            + fd.hess[s][t] * fd.grad[r]
                            + f * fd.third[r][s][t]);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_matches_closed_forms() {
        let ell = AnisotropyModel::elliptic(6.0, 1.0).unwrap();
        assert!((ell.gamma(&[1.0, 0.0]).unwrap() - 6.0).abs() < 1e-14);
        let iso = AnisotropyModel::isotropic();
        assert!((iso.gamma(&[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-14);
        // l1 limit as eps -> 0
        let l1 = AnisotropyModel::reg_l1(1e-12).unwrap();
        assert!((l1.gamma(&[1.0, -2.0]).unwrap() - 3.0).abs() < 1e-5);
    }

    #[test]
    fn gamma_rejects_non_finite() {
        let iso = AnisotropyModel::isotropic();
        assert!(iso.gamma(&[f64::NAN, 0.0]).is_err());
        assert!(iso.gamma(&[f64::INFINITY, 1.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let iso = AnisotropyModel::isotropic();
        let d = iso.gamma_derivatives(&[0.0, 1.0], 1).unwrap();
        assert!((d.grad[0]).abs() < 1e-15 && (d.grad[1] - 1.0).abs() < 1e-15);
        let ell = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
        let d = ell.gamma_derivatives(&[1.0, 0.0], 1).unwrap();
        assert!((d.grad[0] - 2.0).abs() < 1e-14 && d.grad[1].abs() < 1e-15);
    }

    #[test]
    fn derivatives_below_guard_error_out() {
        let iso = AnisotropyModel::isotropic();
        assert!(matches!(
            iso.gamma_derivatives(&[1e-12, 0.0], 1),
            Err(Error::NearSingular(_))
        ));
    }

    #[test]
    fn dual_sq_closed_forms() {
        let ell = AnisotropyModel::elliptic(6.0, 1.0).unwrap();
        assert!((ell.dual_sq(&[6.0, 0.0]).unwrap() - 1.0).abs() < 1e-14);
        let iso = AnisotropyModel::isotropic();
        let (v, d) = iso.dual_sq_with_derivatives(&[0.0, 0.0], 2).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(d.grad[0], 0.0);
        assert!((d.hess[0][0] - 2.0).abs() < 1e-15 && (d.hess[1][1] - 2.0).abs() < 1e-15);
        assert!(d.hess[0][1].abs() < 1e-15);
    }

    #[test]
    fn dual_fallback_is_finite_near_zero() {
        let l1 = AnisotropyModel::reg_l1(1e-4).unwrap();
        let z = [1e-12, -3e-13];
        let (v, d) = l1.dual_sq_with_derivatives(&z, 3).unwrap();
        assert!(v >= 0.0 && v.is_finite());
        assert!(d.grad.iter().all(|x| x.is_finite()));
        assert!((d.hess[0][0] - d.hess[1][1]).abs() < 1e-12); // isotropic fallback
        assert_eq!(d.third[0][0][0], 0.0);
    }

    #[test]
    fn duality_map_examples() {
        let iso = AnisotropyModel::isotropic();
        let t = iso.duality_map(&[2.0, 0.0]).unwrap();
        assert!((t[0] - 2.0).abs() < 1e-14 && t[1].abs() < 1e-15);
        let ell = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
        let t = ell.duality_map(&[2.0, 0.0]).unwrap();
        assert!((t[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn duality_map_is_odd() {
        let models = [
            AnisotropyModel::isotropic(),
            AnisotropyModel::elliptic(3.0, 0.5).unwrap(),
            AnisotropyModel::reg_l1(1e-3).unwrap(),
            AnisotropyModel::reg_linf(1e-3).unwrap(),
        ];
        for m in &models {
            for z in [[0.3, -0.7], [1.0, 2.0], [-0.2, 0.05]] {
                let tp = m.duality_map(&z).unwrap();
                let tm = m.duality_map(&[-z[0], -z[1]]).unwrap();
                assert!((tp[0] + tm[0]).abs() <= 1e-14 && (tp[1] + tm[1]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn duality_round_trip_elliptic() {
        use rand::Rng;
        use rand::SeedableRng;
        let ell = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let z: [f64; 2] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            if (z[0] * z[0] + z[1] * z[1]).sqrt() < 0.05 {
                continue;
            }
            let t = ell.duality_map(&z).unwrap();
            let back = ell.duality_map_inverse(&t).unwrap();
            let err = ((back[0] - z[0]).powi(2) + (back[1] - z[1]).powi(2)).sqrt()
                / (z[0] * z[0] + z[1] * z[1]).sqrt();
            worst = worst.max(err);
        }
        assert!(worst <= 1e-10, "round-trip error {worst:e}");
    }

    #[test]
    fn wulff_vertices_on_dual_unit_ball() {
        let ell = AnisotropyModel::elliptic(6.0, 1.0).unwrap();
        let pts = ell.wulff_sample(1.0, 64).unwrap();
        assert!((pts[0][0] - 6.0).abs() < 1e-12 && pts[0][1].abs() < 1e-12);
        for p in &pts {
            let r = ell.dual_sq(&[p[0], p[1]]).unwrap().sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
        let iso = AnisotropyModel::isotropic();
        let sq = iso.wulff_sample(2.0, 4).unwrap();
        let expect = [[2.0, 0.0], [0.0, 2.0], [-2.0, 0.0], [0.0, -2.0]];
        for (p, e) in sq.iter().zip(&expect) {
            assert!((p[0] - e[0]).abs() < 1e-12 && (p[1] - e[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn wulff_sample_crystalline_duality_residual() {
        // Residual of gamma*(grad gamma(nu)) - 1 stays O(sqrt(eps)) for the
        // eps-paired regularized norms.
        let eps = 1e-4;
        let l1 = AnisotropyModel::reg_l1(eps).unwrap();
        let pts = l1.wulff_sample(1.0, 200).unwrap();
        let mut worst = 0.0_f64;
        for p in &pts {
            let r = l1.dual_sq(&[p[0], p[1]]).unwrap().sqrt();
            worst = worst.max((r - 1.0).abs());
        }
        assert!(worst <= 10.0 * eps.sqrt(), "duality residual {worst:e}");
    }

    #[test]
    fn quad_sum_matches_elliptic_and_needs_dual() {
        let mut g = [[0.0; 3]; 3];
        g[0][0] = 4.0;
        g[1][1] = 1.0;
        let qs = AnisotropyModel::quad_sum(2, vec![g], None).unwrap();
        let ell = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
        for p in [[0.3, -0.9], [1.5, 0.2]] {
            assert!((qs.gamma(&p).unwrap() - ell.gamma(&p).unwrap()).abs() < 1e-14);
        }
        assert!(matches!(qs.dual_sq(&[1.0, 0.0]), Err(Error::Unsupported(_))));
        // supplying a dual model routes dual evaluations through it
        let dual = AnisotropyModel::elliptic(0.5, 1.0).unwrap();
        let qs2 = AnisotropyModel::quad_sum(2, vec![g], Some(dual)).unwrap();
        let v = qs2.dual_sq(&[2.0, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn gamma_is_one_homogeneous(
            px in -10.0f64..10.0, py in -10.0f64..10.0, lam in -5.0f64..5.0
        ) {
            prop_assume!((px * px + py * py).sqrt() > 0.1);
            for m in [
                AnisotropyModel::isotropic(),
                AnisotropyModel::elliptic(6.0, 1.0).unwrap(),
                AnisotropyModel::reg_l1(1e-3).unwrap(),
                AnisotropyModel::reg_linf(1e-2).unwrap(),
            ] {
                let g1 = m.gamma(&[lam * px, lam * py]).unwrap();
                let g0 = m.gamma(&[px, py]).unwrap();
                prop_assert!((g1 - lam.abs() * g0).abs() <= 1e-12 * g0.max(1.0));
            }
        }

        #[test]
        fn gradient_is_zero_homogeneous(px in -3.0f64..3.0, py in -3.0f64..3.0, lam in 0.1f64..7.0) {
            prop_assume!((px * px + py * py).sqrt() > 0.1);
            let m = AnisotropyModel::elliptic(2.0, 0.7).unwrap();
            let d0 = m.gamma_derivatives(&[px, py], 1).unwrap();
            let d1 = m.gamma_derivatives(&[lam * px, lam * py], 1).unwrap();
            prop_assert!((d0.grad[0] - d1.grad[0]).abs() < 1e-11);
            prop_assert!((d0.grad[1] - d1.grad[1]).abs() < 1e-11);
        }
    }

    #[test]
    fn wulff_boundary_duality_smooth_models() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for m in [AnisotropyModel::isotropic(), AnisotropyModel::elliptic(6.0, 1.0).unwrap()] {
            for _ in 0..100 {
                let xi: [f64; 2] = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                if (xi[0] * xi[0] + xi[1] * xi[1]).sqrt() < 0.1 {
                    continue;
                }
                let d = m.gamma_derivatives(&xi, 1).unwrap();
                let gstar = m.dual_sq(&[d.grad[0], d.grad[1]]).unwrap().sqrt();
                assert!((gstar - 1.0).abs() <= 1e-10);
            }
        }
    }
}
