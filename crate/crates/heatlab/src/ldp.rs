//! Small-time large deviations of the heat kernel: rate functions, pointwise
//! and set-level limits, the exponential-integral form, relative entropy and
//! the Dirac-point Gamma-convergence recovery.
//!
//! Every limit is extrapolated the same way: values v(t) on a decreasing time
//! grid inside the resolution window, affine fit on the three smallest times,
//! the intercept is the reported limit.

use crate::error::{HeatLabError, Result};
use crate::fit::{check_t_grid, LimitFit};
use crate::heat::HeatOperator;
use crate::numeric::log_sum_exp;
use crate::space::{Density, DiscreteSpace, ScalarField};

/// I(z) = d(x, z)^2 / 4.
#[derive(Debug, Clone)]
pub struct RateFunction {
    pub base_point: usize,
    pub values: ScalarField,
}

pub fn rate_function(space: &DiscreteSpace, x: usize) -> Result<RateFunction> {
    if x >= space.n() {
        return Err(HeatLabError::PointOutOfRange {
            got: x,
            n: space.n(),
        });
    }
    let values = space.field(
        (0..space.n())
            .map(|z| {
                let d = space.dist(x, z);
                d * d / 4.0
            })
            .collect(),
    )?;
    Ok(RateFunction {
        base_point: x,
        values,
    })
}

fn check_grid_in_window(op: &HeatOperator, t_grid: &[f64]) -> Result<()> {
    check_t_grid(t_grid)?;
    for &t in t_grid {
        op.check_window(t)?;
    }
    Ok(())
}

/// Varadhan pointwise limit: `v(t) = t log p_t[x](y)`, expected to fit toward
/// -d(x,y)^2/4.
pub fn varadhan_pointwise(
    op: &HeatOperator,
    x: usize,
    y: usize,
    t_grid: &[f64],
) -> Result<LimitFit> {
    check_grid_in_window(op, t_grid)?;
    let values = t_grid
        .iter()
        .map(|&t| Ok(t * op.kernel_matrix(t)?.log_value(x, y)))
        .collect::<Result<Vec<_>>>()?;
    LimitFit::new(t_grid.to_vec(), values)
}

/// Whether a point set is treated as open or closed. Every subset of a
/// finite space is clopen, so both labels target the same limit; the label
/// is carried so both large-deviations bounds can be asserted against one
/// another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Open,
    Closed,
}

/// Set-level limit: `v(t) = t log mu_t[x](A)`, expected to fit toward
/// -min_{z in A} I(z).
pub fn ldp_set_bounds(
    op: &HeatOperator,
    x: usize,
    set: &[usize],
    t_grid: &[f64],
    _kind: SetKind,
) -> Result<LimitFit> {
    if set.is_empty() {
        return Err(HeatLabError::EmptySet);
    }
    check_grid_in_window(op, t_grid)?;
    let space = op.space();
    let values = t_grid
        .iter()
        .map(|&t| {
            let kernel = op.kernel_matrix(t)?;
            Ok(t * kernel.log_measure(space, x, set)?)
        })
        .collect::<Result<Vec<_>>>()?;
    LimitFit::new(t_grid.to_vec(), values)
}

/// -min over the set of the rate function: the target of `ldp_set_bounds`.
pub fn set_target(space: &DiscreteSpace, x: usize, set: &[usize]) -> Result<f64> {
    if set.is_empty() {
        return Err(HeatLabError::EmptySet);
    }
    let rate = rate_function(space, x)?;
    Ok(-set
        .iter()
        .map(|&z| rate.values[z])
        .fold(f64::INFINITY, f64::min))
}

/// Exponential-integral form: `v(t) = t log integral of e^{phi/t} d mu_t[x]`,
/// expected to fit toward max_z (phi(z) - I(z)).
pub fn varadhan_lemma_check(
    op: &HeatOperator,
    x: usize,
    phi: &ScalarField,
    t_grid: &[f64],
) -> Result<LimitFit> {
    let space = op.space();
    space.check_field(phi)?;
    check_grid_in_window(op, t_grid)?;
    let n = space.n();
    let log_w: Vec<f64> = space.weights().iter().map(|&w| w.ln()).collect();
    let values = t_grid
        .iter()
        .map(|&t| {
            let kernel = op.kernel_matrix(t)?;
            let terms: Vec<f64> = (0..n)
                .map(|j| phi[j] / t + kernel.log_value(x, j) + log_w[j])
                .collect();
            Ok(t * log_sum_exp(&terms).0)
        })
        .collect::<Result<Vec<_>>>()?;
    LimitFit::new(t_grid.to_vec(), values)
}

/// max_z (phi(z) - I(z)): the target of `varadhan_lemma_check`, by
/// exhaustive scan.
pub fn lemma_target(space: &DiscreteSpace, x: usize, phi: &ScalarField) -> Result<f64> {
    space.check_field(phi)?;
    let rate = rate_function(space, x)?;
    Ok((0..space.n())
        .map(|z| phi[z] - rate.values[z])
        .fold(f64::NEG_INFINITY, f64::max))
}

/// H(sigma | nu) = sum sigma_i log(sigma_i / nu_i) w_i, with 0 log 0 = 0 and
/// +infinity as soon as sigma charges a point where nu vanishes (below
/// 1e-300). The ratio is formed first so that conditioned measures hit the
/// identity H(nu|_A / nu(A) | nu) = -log nu(A) at machine precision.
pub fn relative_entropy(space: &DiscreteSpace, sigma: &Density, nu: &Density) -> Result<f64> {
    space.check_field(sigma.field())?;
    space.check_field(nu.field())?;
    let mut acc = 0.0;
    for i in 0..space.n() {
        let s = sigma[i];
        if s == 0.0 {
            continue;
        }
        if nu[i] < 1e-300 {
            return Ok(f64::INFINITY);
        }
        acc += s * (s / nu[i]).ln() * space.weight(i);
    }
    Ok(acc)
}

/// Radius schedule for the Dirac recovery family: r(t) = max(mesh_multiple *
/// mesh, t^power * diam * diam_fraction). Shrinks slower than the kernel
/// resolution so the conditioned measures stay visible.
#[derive(Debug, Clone, Copy)]
pub struct RadiusRule {
    pub mesh_multiple: f64,
    pub power: f64,
    pub diam_fraction: f64,
}

impl Default for RadiusRule {
    fn default() -> Self {
        RadiusRule {
            mesh_multiple: 4.0,
            power: 0.25,
            diam_fraction: 1.0 / 8.0,
        }
    }
}

impl RadiusRule {
    pub fn radius(&self, t: f64, mesh: f64, diam: f64) -> f64 {
        (self.mesh_multiple * mesh).max(t.powf(self.power) * diam * self.diam_fraction)
    }
}

/// Gamma-limsup recovery at a Dirac: conditioning `mu_t[x]` to shrinking balls
/// around z gives t H(nu_t | mu_t) = -t log mu_t[x](B_{r(t)}(z)), which must
/// fit toward I(z).
#[derive(Debug, Clone)]
pub struct DiracRecovery {
    pub fit: LimitFit,
    pub radii: Vec<f64>,
    /// conditioned family nu_t, one density per grid time; concentrates at z
    pub conditioned: Vec<Density>,
}

pub fn gamma_dirac_check(
    op: &HeatOperator,
    x: usize,
    z: usize,
    t_grid: &[f64],
    rule: RadiusRule,
) -> Result<DiracRecovery> {
    check_grid_in_window(op, t_grid)?;
    let space = op.space();
    let mesh = space.mesh();
    let diam = space.diameter();
    let mut values = Vec::with_capacity(t_grid.len());
    let mut radii = Vec::with_capacity(t_grid.len());
    let mut conditioned = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let r = rule.radius(t, mesh, diam);
        let ball = space.ball(z, r);
        if ball.is_empty() {
            return Err(HeatLabError::EmptyBall { center: z, r });
        }
        let kernel = op.kernel_matrix(t)?;
        let log_mass = kernel.log_measure(space, x, &ball)?;
        values.push(-t * log_mass);
        radii.push(r);
        // conditioned density: kernel row restricted to the ball, normalized
        let mut v = vec![0.0; space.n()];
        for &j in &ball {
            v[j] = (kernel.log_value(x, j) - log_mass).exp();
        }
        conditioned.push(space.density_from_unnormalized(v)?);
    }
    Ok(DiracRecovery {
        fit: LimitFit::new(t_grid.to_vec(), values)?,
        radii,
        conditioned,
    })
}
