//! Hopf-Lax semigroup, Hopf-Cole viscous semigroup and the vanishing
//! viscosity experiment with its contraction and Laplacian-bound checks.
//!
//! Sign bookkeeping, fixed once: the inf-convolution Q_t f = inf_y {f(y) +
//! d^2/(2t)} drives the decreasing evolution, its sup counterpart is
//! -Q_t(-f) and is the limit of the viscous solutions eps log h_{eps t/2}
//! e^{phi/eps} as eps goes to zero.

use crate::error::{HeatLabError, Result};
use crate::heat::HeatOperator;
use crate::space::{DiscreteSpace, ScalarField};
use std::sync::Arc;

/// Hopf-Lax evaluation with the per-point optimizer index (ties broken by
/// the lowest index).
#[derive(Debug, Clone)]
pub struct HopfLax {
    pub values: ScalarField,
    pub arg_index: Vec<usize>,
}

/// Q_t f(x) = min_y { f(y) + d(x,y)^2 / (2t) }, exact O(n^2) scan.
pub fn hopf_lax_inf(space: &DiscreteSpace, f: &ScalarField, t: f64) -> Result<HopfLax> {
    space.check_field(f)?;
    if !(t > 0.0) {
        return Err(HeatLabError::NonPositiveTime(t));
    }
    let n = space.n();
    let mut values = Vec::with_capacity(n);
    let mut arg_index = Vec::with_capacity(n);
    for x in 0..n {
        let mut best = f64::INFINITY;
        let mut best_y = 0usize;
        for y in 0..n {
            let d = space.dist(x, y);
            let cand = f[y] + d * d / (2.0 * t);
            if cand < best {
                best = cand;
                best_y = y;
            }
        }
        values.push(best);
        arg_index.push(best_y);
    }
    Ok(HopfLax {
        values: space.field(values)?,
        arg_index,
    })
}

/// sup_y { f(y) - d(x,y)^2 / (2t) } = -Q_t(-f)(x), the viscous-limit target.
pub fn hopf_lax_sup(space: &DiscreteSpace, f: &ScalarField, t: f64) -> Result<HopfLax> {
    let neg = f.map(|v| -v);
    let inf = hopf_lax_inf(space, &neg, t)?;
    Ok(HopfLax {
        values: inf.values.map(|v| -v),
        arg_index: inf.arg_index,
    })
}

/// Viscous Hamilton-Jacobi solution phi_t^eps = eps log h_{eps t/2} e^{phi/eps},
/// evaluated per point as a max-shifted log-sum-exp over the log kernel; the
/// exponential e^{phi/eps} is never formed in linear scale.
#[derive(Debug, Clone)]
pub struct ViscousSolution {
    pub phi0: ScalarField,
    pub t: f64,
    pub eps: f64,
    pub values: ScalarField,
    /// per-point shift used inside the log-sum-exp
    pub log_shifts: Vec<f64>,
    /// kernel time eps*t/2 fell below mesh^2/100: the discrete kernel is
    /// essentially a delta there and the viscous value is unresolved
    pub below_resolution: bool,
}

pub fn viscous_semigroup(
    op: &HeatOperator,
    phi: &ScalarField,
    t: f64,
    eps: f64,
) -> Result<ViscousSolution> {
    let space = op.space();
    space.check_field(phi)?;
    if !(t > 0.0) {
        return Err(HeatLabError::NonPositiveTime(t));
    }
    if !(eps > 0.0) {
        return Err(HeatLabError::NonPositive {
            what: "viscosity",
            value: eps,
        });
    }
    let n = space.n();
    let s = eps * t / 2.0;
    let below_resolution = s < space.mesh() * space.mesh() / 100.0;
    let kernel = op.kernel_matrix(s)?;
    let log_w: Vec<f64> = space.weights().iter().map(|&w| w.ln()).collect();

    let mut values = Vec::with_capacity(n);
    let mut log_shifts = Vec::with_capacity(n);
    for i in 0..n {
        let mut shift = f64::NEG_INFINITY;
        for j in 0..n {
            let v = phi[j] / eps + kernel.log_value(i, j) + log_w[j];
            if v > shift {
                shift = v;
            }
        }
        let mut acc = 0.0;
        for j in 0..n {
            let v = phi[j] / eps + kernel.log_value(i, j) + log_w[j];
            if v > f64::NEG_INFINITY {
                acc += (v - shift).exp();
            }
        }
        values.push(eps * (shift + acc.ln()));
        log_shifts.push(shift);
    }
    Ok(ViscousSolution {
        phi0: phi.clone(),
        t,
        eps,
        values: space.field(values)?,
        log_shifts,
        below_resolution,
    })
}

/// Contraction report: Lipschitz and Laplacian negative parts of the evolved
/// solution against the curvature bounds
/// Lip(phi_t^eps) <= e^{-K eps t/2} Lip(phi) and
/// (L phi_t^eps)^- <= ||(L phi)^-|| + K^- t e^{K^- eps t} Lip(phi)^2,
/// with the sup bound ||phi_t^eps|| <= ||phi|| carried along.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub t: f64,
    pub eps: f64,
    pub lip_initial: f64,
    pub lip_evolved: f64,
    pub bound_lip: f64,
    pub lap_neg_initial: f64,
    pub lap_neg_evolved: f64,
    pub bound_lap: f64,
    pub sup_initial: f64,
    pub sup_evolved: f64,
    pub rtol: f64,
    pub pass_lip: bool,
    pub pass_lap: bool,
    pub pass_sup: bool,
}

impl ContractionReport {
    pub fn pass(&self) -> bool {
        self.pass_lip && self.pass_lap && self.pass_sup
    }
}

/// Relative slack absorbing discretization error in the contraction checks.
fn contraction_rtol(mesh: f64) -> f64 {
    1e-6 + mesh
}

pub fn contraction_check(
    op: &HeatOperator,
    phi: &ScalarField,
    t: f64,
    eps: f64,
) -> Result<ContractionReport> {
    let space = op.space();
    let sol = viscous_semigroup(op, phi, t, eps)?;

    let lip_initial = space.lipschitz_constant(phi)?;
    let lip_evolved = space.lipschitz_constant(&sol.values)?;
    let lap_neg_initial = op.generator().neg_part_sup(phi)?;
    let lap_neg_evolved = op.generator().neg_part_sup(&sol.values)?;

    let k = space.k_lower();
    let k_minus = space.k_minus();
    let bound_lip = (-k * eps * t / 2.0).exp() * lip_initial;
    let bound_lap =
        lap_neg_initial + k_minus * t * (k_minus * eps * t).exp() * lip_initial * lip_initial;

    let sup_initial = phi.sup_norm();
    let sup_evolved = sol.values.sup_norm();
    let rtol = contraction_rtol(space.mesh());
    let lap_scale = {
        let lphi = op.generator().apply(phi)?;
        lphi.sup_norm()
    };
    // floating-point floors: the evolved values carry ~1e-13 relative noise,
    // which difference quotients amplify by 1/mesh (Lipschitz) and 1/mesh^2
    // (Laplacian); without these a constant datum could never pass its own
    // zero bounds
    let mesh = space.mesh();
    let fp_lip = 1e-12 * (1.0 + sup_initial) / mesh;
    let fp_lap = 4e-12 * (1.0 + sup_initial) / (mesh * mesh);

    Ok(ContractionReport {
        t,
        eps,
        lip_initial,
        lip_evolved,
        bound_lip,
        lap_neg_initial,
        lap_neg_evolved,
        bound_lap,
        sup_initial,
        sup_evolved,
        rtol,
        pass_lip: lip_evolved <= bound_lip * (1.0 + rtol) + fp_lip,
        pass_lap: lap_neg_evolved <= bound_lap + rtol * lap_scale + fp_lap,
        pass_sup: sup_evolved <= sup_initial + 1e-10,
    })
}

/// One row of the vanishing-viscosity sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub t: f64,
    pub sup_err: f64,
    pub mean_err: f64,
    pub contraction: ContractionReport,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Discretization floor: the sup error of the smallest-eps viscous run
    /// re-measured on the once-refined grid. NaN for graph spaces (no
    /// canonical refinement).
    pub floor: f64,
    /// Hopf-Lax self-difference between the two grids at the common points;
    /// the pure grid bias of the limit target alone.
    pub hopflax_self_difference: f64,
}

impl SweepTable {
    /// sup errors strictly decrease along the (decreasing) epsilon list
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_err < w[0].sup_err)
    }
}

/// Vanishing-viscosity sweep: for each eps (decreasing) the sup and
/// measure-weighted mean distance between phi_t^eps and the Hopf-Lax
/// sup-convolution target, plus the contraction diagnostics.
pub fn convergence_sweep(
    op: &HeatOperator,
    phi: &ScalarField,
    t: f64,
    eps_list: &[f64],
) -> Result<SweepTable> {
    let space = op.space();
    space.check_field(phi)?;
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(HeatLabError::BadEpsList);
    }
    if !(eps_list[eps_list.len() - 1] > 0.0) {
        return Err(HeatLabError::BadEpsList);
    }

    let target = hopf_lax_sup(space, phi, t)?;
    let total_mass = space.total_mass();

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let sol = viscous_semigroup(op, phi, t, eps)?;
        let mut sup_err: f64 = 0.0;
        let mut mean_err = 0.0;
        for i in 0..space.n() {
            let e = (sol.values[i] - target.values[i]).abs();
            sup_err = sup_err.max(e);
            mean_err += e * space.weight(i);
        }
        mean_err /= total_mass;
        let contraction = contraction_check(op, phi, t, eps)?;
        rows.push(SweepRow {
            eps,
            t,
            sup_err,
            mean_err,
            contraction,
        });
    }

    let (floor, hopflax_self_difference) =
        measure_refinement_floor(space, phi, t, eps_list[eps_list.len() - 1])?;
    Ok(SweepTable {
        rows,
        floor,
        hopflax_self_difference,
    })
}

/// Rebuilds the grid one refinement finer (old points are kept), re-runs the
/// smallest-eps viscous comparison there, and also measures the Hopf-Lax
/// self-difference at the common points.
fn measure_refinement_floor(
    space: &DiscreteSpace,
    phi: &ScalarField,
    t: f64,
    smallest_eps: f64,
) -> Result<(f64, f64)> {
    use crate::space::Topology;
    let n = space.n();
    let (fine, coarse_to_fine): (Arc<DiscreteSpace>, Box<dyn Fn(usize) -> usize>) =
        match space.topology() {
            Topology::Interval => {
                let length = space.coords().expect("grid")[n - 1];
                (
                    Arc::new(DiscreteSpace::interval(2 * n - 1, length)?),
                    Box::new(|i| 2 * i),
                )
            }
            Topology::Circle => {
                let circumference = space.mesh() * n as f64;
                (
                    Arc::new(DiscreteSpace::circle(2 * n, circumference)?),
                    Box::new(|i| 2 * i),
                )
            }
            Topology::Graph => return Ok((f64::NAN, f64::NAN)),
        };
    // transplant phi onto the fine grid by linear interpolation of the
    // coarse values (exact at the common points)
    let coarse = phi;
    let mut fine_vals = vec![0.0; fine.n()];
    for i in 0..n {
        fine_vals[coarse_to_fine(i)] = coarse[i];
    }
    for i in 0..n {
        let a = coarse_to_fine(i);
        let b = coarse_to_fine((i + 1) % n);
        if b > a {
            fine_vals[a + 1] = 0.5 * (fine_vals[a] + fine_vals[b]);
        } else if space.topology() == Topology::Circle {
            // wrap segment on the circle
            fine_vals[a + 1] = 0.5 * (fine_vals[a] + fine_vals[0]);
        }
    }
    let fine_phi = fine.field(fine_vals)?;
    let fine_target = hopf_lax_sup(&fine, &fine_phi, t)?;
    let coarse_target = hopf_lax_sup(space, coarse, t)?;
    let mut self_diff: f64 = 0.0;
    for i in 0..n {
        self_diff =
            self_diff.max((fine_target.values[coarse_to_fine(i)] - coarse_target.values[i]).abs());
    }

    let fine_op = HeatOperator::new(crate::heat::Generator::assemble(fine.clone())?)?;
    let fine_sol = viscous_semigroup(&fine_op, &fine_phi, t, smallest_eps)?;
    let mut floor: f64 = 0.0;
    for i in 0..fine.n() {
        floor = floor.max((fine_sol.values[i] - fine_target.values[i]).abs());
    }
    Ok((floor, self_diff))
}

/// Integrated Laplacian bound: lhs = sum Q_t(-phi) (L eta) w over the space,
/// rhs = C(t, phi) * sum eta w with C(t, phi) = ||(L phi)^-|| + K^- t Lip(phi)^2.
/// The inequality lhs <= rhs is the caller's assertion.
pub fn laplacian_bound_integrated(
    op: &HeatOperator,
    phi: &ScalarField,
    t: f64,
    eta: &ScalarField,
) -> Result<(f64, f64)> {
    let space = op.space();
    space.check_field(phi)?;
    space.check_field(eta)?;
    if let Some(i) = eta.values().iter().position(|&v| v < 0.0) {
        return Err(HeatLabError::NegativeEntry(i));
    }
    let q = hopf_lax_inf(space, &phi.map(|v| -v), t)?;
    let l_eta = op.generator().apply(eta)?;
    let mut lhs = 0.0;
    let mut eta_mass = 0.0;
    for i in 0..space.n() {
        lhs += q.values[i] * l_eta[i] * space.weight(i);
        eta_mass += eta[i] * space.weight(i);
    }
    let c = op.generator().neg_part_sup(phi)?
        + space.k_minus() * t * space.lipschitz_constant(phi)?.powi(2);
    Ok((lhs, c * eta_mass))
}

/// Finite-difference residual of the Hopf-Lax equation
/// d/dt Q_t f + (1/2) (lip Q_t f)^2 = 0: max over points of the defect with
/// a centered difference in t. Expected O(mesh + dt), reported not asserted.
pub fn hopflax_residual(space: &DiscreteSpace, f: &ScalarField, t: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0 && dt < t) {
        return Err(HeatLabError::NonPositive {
            what: "time increment (must satisfy 0 < dt < t)",
            value: dt,
        });
    }
    let plus = hopf_lax_inf(space, f, t + dt)?;
    let minus = hopf_lax_inf(space, f, t - dt)?;
    let mid = hopf_lax_inf(space, f, t)?;
    let slope = space.local_slope(&mid.values)?;
    let mut res: f64 = 0.0;
    for i in 0..space.n() {
        let ddt = (plus.values[i] - minus.values[i]) / (2.0 * dt);
        res = res.max((ddt + 0.5 * slope[i] * slope[i]).abs());
    }
    Ok(res)
}
