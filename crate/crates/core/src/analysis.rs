//! Reference solutions and convergence diagnostics.
//!
//! Scaled dual unit balls evolve self-similarly under the flow; their radius
//! obeys a scalar ODE with closed-form solution and, at the time-discrete
//! level, a scalar recursion per step. This module provides both, the
//! projected L2 error of a discrete curve against such a reference, the
//! experimental order of convergence, energy reporting, and the refinement
//! study driver.

use std::io::Write;

use crate::anisotropy::AnisotropyModel;
use crate::error::{Error, Result};
use crate::geometry::SimplicialSurface;
use crate::solver::{run_flow, FlowTrajectory, SolverConfig};

/// Radius of the self-similar solution at time `t`: `(r0^4 + 2 t)^(1/4)`.
pub fn exact_wulff_radius(r0: f64, t: f64) -> f64 {
    assert!(r0 > 0.0 && t >= 0.0);
    (r0.powi(4) + 2.0 * t).powf(0.25)
}

/// One radius step of the time-discrete scheme restricted to scaled dual
/// unit balls: `r` is the root above `r_prev` of
/// `2 r^2 (r - r_prev) r_prev = tau`, and the inner radius is
/// `r - tau_tilde / r`. Solved by bisection to 1e-14.
pub fn discrete_wulff_recursion(r_prev: f64, tau: f64, tau_tilde: f64) -> Result<(f64, f64)> {
    if !(r_prev > 0.0) || tau < 0.0 || tau_tilde < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "recursion needs positive radius and nonnegative steps, got r = {r_prev}, tau = {tau}"
        )));
    }
    let r = if tau == 0.0 {
        r_prev
    } else {
        let f = |r: f64| 2.0 * r * r * (r - r_prev) * r_prev - tau;
        let mut lo = r_prev;
        let mut hi = r_prev + tau / (2.0 * r_prev.powi(3)) + tau.cbrt() + 1.0;
        if f(hi) <= 0.0 {
            return Err(Error::InvalidConfig("no bracketing root for the radius recursion".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 * r_prev.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    Ok((r, r - tau_tilde / r))
}

/// Lumped L2 distance between a discrete curve and the scaled dual unit
/// ball of radius `r_exact`: each vertex is compared against the boundary
/// point reached in the direction of its discrete outward normal.
pub fn projected_l2_error(
    model: &AnisotropyModel,
    curve: &SimplicialSurface,
    r_exact: f64,
) -> Result<f64> {
    if curve.d() != 1 {
        return Err(Error::Unsupported("the error metric is defined for curves".into()));
    }
    let mut acc = 0.0;
    for i in 0..curve.nv() {
        let nu = curve.vertex_normal(i)?;
        let d = model.gamma_derivatives(&nu, 1)?;
        let target = [r_exact * d.grad[0], r_exact * d.grad[1]];
        let p = curve.vertex(i);
        let w = curve.lumped_vertex_weight(i)?;
        acc += ((p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2)) * w;
    }
    Ok(acc.sqrt())
}

/// Experimental orders of convergence of consecutive rows:
/// `log(err_i / err_{i+1}) / log(h_i / h_{i+1})`.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidInput("need equally many errors and grid sizes, at least two".into()));
    }
    if errors.iter().chain(hs).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("errors and grid sizes must be positive".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Mean dual norm of the vertices: the radius for curves sampled from a
/// scaled dual unit ball.
pub fn wulff_radius_of(model: &AnisotropyModel, curve: &SimplicialSurface) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..curve.nv() {
        acc += model.dual_sq(curve.vertex(i))?.sqrt();
    }
    Ok(acc / curve.nv() as f64)
}

/// Per-step energy summary of a trajectory; errors are filled when a
/// self-similar reference with initial radius `r0` applies.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EnergyReportRow {
    pub step: usize,
    pub time: f64,
    pub e_out: f64,
    pub e_out_trivial: f64,
    pub a_gamma: f64,
    pub willmore: f64,
    pub area: f64,
    pub error: Option<f64>,
}

pub fn energy_report(
    model: &AnisotropyModel,
    traj: &FlowTrajectory,
    exact_r0: Option<f64>,
) -> Result<Vec<EnergyReportRow>> {
    let mut rows = Vec::with_capacity(traj.steps.len());
    for (k, d) in traj.steps.iter().enumerate() {
        let error = match exact_r0 {
            Some(r0) => Some(projected_l2_error(
                model,
                &traj.surfaces[k + 1],
                exact_wulff_radius(r0, d.time),
            )?),
            None => None,
        };
        rows.push(EnergyReportRow {
            step: d.step,
            time: d.time,
            e_out: d.e_out,
            e_out_trivial: d.e_out_trivial,
            a_gamma: d.a_gamma,
            willmore: d.willmore,
            area: d.area,
            error,
        });
    }
    Ok(rows)
}

/// Time-step law for studies and runs: the coefficient multiplies 1, `h0`,
/// or `h0^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStepLaw {
    Absolute(f64),
    ProportionalH0(f64),
    ProportionalH0Sq(f64),
}

impl TimeStepLaw {
    pub fn step(&self, h0: f64) -> f64 {
        match *self {
            TimeStepLaw::Absolute(c) => c,
            TimeStepLaw::ProportionalH0(c) => c * h0,
            TimeStepLaw::ProportionalH0Sq(c) => c * h0 * h0,
        }
    }
}

/// Vertex distribution of sampled initial curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingKind {
    /// Uniform in the normal direction angle.
    GaussMap,
    /// Uniform in arc length.
    ArcLength,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub n_min: u32,
    pub n_max: u32,
    /// Target time at which the error is measured.
    pub target_time: f64,
    /// Time-step law; the number of steps is rounded so that an integer
    /// number of steps lands exactly on the target time.
    pub law: TimeStepLaw,
    /// Constant `L` in `h0 = L / 2^n`; when absent the measured initial
    /// mesh size is used.
    pub h0_constant: Option<f64>,
    pub r0: f64,
    pub sampling: SamplingKind,
    pub solver: SolverConfig,
    pub threads: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StudyRow {
    pub n: u32,
    pub vertices: usize,
    pub h0: f64,
    pub h_t: f64,
    pub time_reached: f64,
    pub steps: usize,
    pub error: f64,
    pub eoc: Option<f64>,
    pub max_newton_iterations: usize,
}

/// Result of a refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
}

impl ConvergenceStudy {
    /// CSV with header `n,h0,h_t,error,eoc`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "n,h0,h_t,error,eoc")?;
        for r in &self.rows {
            let eoc = r.eoc.map(|v| format!("{v}")).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", r.n, r.h0, r.h_t, r.error, eoc)?;
        }
        Ok(())
    }
}

fn study_row(model: &AnisotropyModel, cfg: &StudyConfig, n: u32) -> Result<StudyRow> {
    let m = 2usize.pow(n);
    let pts = match cfg.sampling {
        SamplingKind::GaussMap => model.wulff_sample(cfg.r0, m)?,
        SamplingKind::ArcLength => model.wulff_sample_arclength(cfg.r0, m)?,
    };
    let initial = SimplicialSurface::closed_curve(&pts)?;
    let h0 = match cfg.h0_constant {
        Some(l) => l / m as f64,
        None => initial.mesh_size(),
    };
    let tau_law = cfg.law.step(h0);
    let steps = (cfg.target_time / tau_law).round().max(1.0) as usize;
    let tau = cfg.target_time / steps as f64;
    let mut solver = cfg.solver.clone();
    solver.tau = tau;
    solver.tau_tilde = tau;
    solver.steps = steps;
    let traj = run_flow(model, &initial, &solver)?;
    let time_reached = tau * steps as f64;
    let r_exact = exact_wulff_radius(cfg.r0, time_reached);
    let final_surface = traj.final_surface();
    let error = projected_l2_error(model, final_surface, r_exact)?;
    let max_newton = traj.steps.iter().map(|d| d.newton_iterations).max().unwrap_or(0);
    Ok(StudyRow {
        n,
        vertices: m,
        h0,
        h_t: final_surface.mesh_size(),
        time_reached,
        steps,
        error,
        eoc: None,
        max_newton_iterations: max_newton,
    })
}

/// Runs the refinement study; rows execute concurrently (bounded by
/// `threads`) and are reported in refinement order.
pub fn run_convergence_study(model: &AnisotropyModel, cfg: &StudyConfig) -> Result<ConvergenceStudy> {
    if cfg.n_min < 2 || cfg.n_max < cfg.n_min {
        return Err(Error::InvalidConfig(format!(
            "bad refinement range {}..{}",
            cfg.n_min, cfg.n_max
        )));
    }
    if !(cfg.target_time > 0.0) {
        return Err(Error::InvalidConfig("study needs a positive target time".into()));
    }
    let ns: Vec<u32> = (cfg.n_min..=cfg.n_max).collect();
    let threads = cfg.threads.max(1).min(ns.len());
    let mut results: Vec<Option<Result<StudyRow>>> = Vec::new();
    results.resize_with(ns.len(), || None);
    if threads <= 1 {
        for (slot, &n) in results.iter_mut().zip(&ns) {
            *slot = Some(study_row(model, cfg, n));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<Result<StudyRow>>>> =
            ns.iter().map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= ns.len() {
                        break;
                    }
                    let row = study_row(model, cfg, ns[i]);
                    *slots[i].lock().unwrap() = Some(row);
                });
            }
        });
        for (slot, cell) in results.iter_mut().zip(slots) {
            *slot = cell.into_inner().unwrap();
        }
    }
    let mut rows = Vec::with_capacity(ns.len());
    for (i, r) in results.into_iter().enumerate() {
        let row = r.unwrap().map_err(|e| {
            Error::Nonconvergence(format!("study row n = {} failed: {e}", ns[i]))
        })?;
        rows.push(row);
    }
    let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.h_t).collect();
    if rows.len() >= 2 {
        let orders = eoc(&errs, &hs)?;
        for (row, o) in rows.iter_mut().skip(1).zip(orders) {
            row.eoc = Some(o);
        }
    }
    Ok(ConvergenceStudy { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::regular_polygon;

    #[test]
    fn exact_radius_examples() {
        assert_eq!(exact_wulff_radius(1.0, 0.0), 1.0);
        // closed form against a fine fourth-order integration of the radius ODE
        let t_end = 0.3927;
        let mut r = 1.0_f64;
        let k = 100_000;
        let dt = t_end / k as f64;
        let f = |r: f64| 1.0 / (2.0 * r * r * r);
        for _ in 0..k {
            let k1 = f(r);
            let k2 = f(r + 0.5 * dt * k1);
            let k3 = f(r + 0.5 * dt * k2);
            let k4 = f(r + dt * k3);
            r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let closed = exact_wulff_radius(1.0, t_end);
        assert!((closed - r).abs() < 1e-10, "closed {closed} vs rk4 {r}");
        assert!((closed - 1.1559355).abs() < 1e-6);
        // derivative at t = 0 matches the ODE right-hand side
        let fd = (exact_wulff_radius(1.0, 1e-7) - exact_wulff_radius(1.0, 0.0)) / 1e-7;
        assert!((fd - 0.5).abs() < 1e-6);
    }

    #[test]
    fn recursion_examples() {
        let (r, _) = discrete_wulff_recursion(1.0, 0.01, 0.01).unwrap();
        // root of 2 r^2 (r - 1) = 0.01
        assert!((2.0 * r * r * (r - 1.0) - 0.01).abs() < 1e-12);
        assert!((r - 1.0049509).abs() < 1e-6);
        let (r0, rt0) = discrete_wulff_recursion(1.0, 0.0, 0.5).unwrap();
        assert_eq!(r0, 1.0);
        assert!((rt0 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn recursion_converges_to_the_ode_at_first_order() {
        let t_end = 0.5;
        let exact = exact_wulff_radius(1.0, t_end);
        let run = |tau: f64| {
            let k = (t_end / tau).round() as usize;
            let mut r = 1.0;
            for _ in 0..k {
                r = discrete_wulff_recursion(r, tau, tau).unwrap().0;
            }
            (r - exact).abs()
        };
        let e1 = run(1e-3);
        let e2 = run(5e-4);
        let ratio = e1 / e2;
        assert!((ratio - 2.0).abs() < 0.2, "first-order ratio {ratio}");
    }

    #[test]
    fn projected_error_self_consistency() {
        // aligned case: regular polygons have exactly radial vertex normals
        let iso = AnisotropyModel::isotropic();
        let poly = regular_polygon(1.0, 64).unwrap();
        assert!(projected_l2_error(&iso, &poly, 1.0).unwrap() <= 1e-12);
        // anisotropic case: the discrete normals deviate at second order, so
        // the self-error scales like h^2 with a constant below the diameter
        let model = AnisotropyModel::elliptic(2.0, 1.0).unwrap();
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for m in [64usize, 128, 256] {
            let pts = model.wulff_sample(1.0, m).unwrap();
            let poly = SimplicialSurface::closed_curve(&pts).unwrap();
            let e = projected_l2_error(&model, &poly, 1.0).unwrap();
            let h = poly.mesh_size();
            assert!(e <= 0.3 * h * h, "m = {m}: error {e:e}, h = {h}");
            errs.push(e);
            hs.push(h);
        }
        for o in eoc(&errs, &hs).unwrap() {
            assert!(o >= 1.9, "self-consistency order {o}");
        }
    }

    #[test]
    fn projected_error_sees_uniform_radial_shifts() {
        let model = AnisotropyModel::isotropic();
        let poly = regular_polygon(1.0, 128).unwrap();
        let delta = 1e-3;
        let shifted: Vec<f64> = poly.coords().iter().map(|v| v * (1.0 + delta)).collect();
        let curve = poly.with_coords(shifted).unwrap();
        let e = projected_l2_error(&model, &curve, 1.0).unwrap();
        let perim = poly.total_edge_length() * (1.0 + delta);
        let expect = delta * perim.sqrt();
        assert!((e - expect).abs() < 1e-3 * expect, "{e} vs {expect}");
    }

    #[test]
    fn eoc_examples() {
        let o = eoc(&[4e-2, 1e-2], &[2.0, 1.0]).unwrap();
        assert!((o[0] - 2.0).abs() < 1e-14);
        let o = eoc(&[2e-2, 1e-2], &[2.0, 1.0]).unwrap();
        assert!((o[0] - 1.0).abs() < 1e-14);
        // frozen published sequence for the quadratic-step circle study
        let errs = [4.830e-3, 1.328e-3, 3.403e-4, 8.561e-5, 2.144e-5];
        let hs = [4.166e-1, 2.096e-1, 1.049e-1, 5.249e-2, 2.625e-2];
        let o = eoc(&errs, &hs).unwrap();
        let expect = [1.879, 1.969, 1.992, 1.998];
        for (a, b) in o.iter().zip(expect) {
            assert!((a - b).abs() < 2e-3, "{a} vs {b}");
        }
        assert!(eoc(&[1.0, -1.0], &[2.0, 1.0]).is_err());
        assert!(eoc(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn eoc_recovers_manufactured_order() {
        let p = 1.7;
        let hs: Vec<f64> = (0..5).map(|k| 0.5_f64.powi(k)).collect();
        let errs: Vec<f64> = hs.iter().map(|h| 3.0 * h.powf(p)).collect();
        for o in eoc(&errs, &hs).unwrap() {
            assert!((o - p).abs() < 1e-12);
        }
    }
}
