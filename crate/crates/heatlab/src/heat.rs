//! Measure-symmetric generator, spectral decomposition and heat kernels.
//!
//! The generator convention is the full Laplacian (no 1/2 factor): the
//! kernel's small-time decay is then exp(-d^2/(4t)) and every time scaling
//! downstream (viscous semigroup, rate functions, entropic reference
//! couplings) relies on this single normalization.
//!
//! Kernel matrices are exact spectral objects p_t = U e^{-t Lambda} U* with
//! U orthonormal in the weighted inner product. For deep small-time tails the
//! alternating spectral sum loses all relative accuracy to cancellation, so
//! `kernel_matrix` switches to a dyadic semigroup evaluation: a directly
//! summed base kernel at t/2^k, cleaned below a certified roundoff threshold,
//! composed k times with itself through the measure. Composition sums are
//! positive, so relative accuracy survives to arbitrary log-depth.

use crate::error::{HeatLabError, Result};
use crate::space::{DiscreteSpace, ScalarField, SpaceId, Topology};
use ndarray::{Array1, Array2};
use std::sync::Arc;

/// Dense cap for the symmetric eigensolve.
pub const SPECTRAL_CAP: usize = 2048;

/// Deepest log-value the direct spectral sum is trusted for; beyond it the
/// dyadic route takes over.
const DIRECT_DEPTH: f64 = 26.0;

#[derive(Debug)]
pub struct Generator {
    space: Arc<DiscreteSpace>,
    action: Array2<f64>,
}

impl Generator {
    /// Discrete Laplacian with nearest-neighbor conductances.
    ///
    /// Interval/circle: the interior action is the standard second difference
    /// (f_{i+1} + f_{i-1} - 2 f_i)/h^2 with zero-flux closure at interval
    /// endpoints and periodic closure on the circle. Graph: conductance
    /// (w_i + w_j)/(2 len^2) per edge, which reduces to the grid stencil on
    /// equispaced paths.
    pub fn assemble(space: Arc<DiscreteSpace>) -> Result<Generator> {
        let n = space.n();
        let mut action = Array2::zeros((n, n));
        let add_conductance = |action: &mut Array2<f64>, i: usize, j: usize, c: f64| {
            action[[i, j]] += c / space.weight(i);
            action[[i, i]] -= c / space.weight(i);
            action[[j, i]] += c / space.weight(j);
            action[[j, j]] -= c / space.weight(j);
        };
        match space.topology() {
            Topology::Interval => {
                let h = space.mesh();
                for i in 0..n - 1 {
                    add_conductance(&mut action, i, i + 1, 1.0 / h);
                }
            }
            Topology::Circle => {
                let h = space.mesh();
                for i in 0..n {
                    add_conductance(&mut action, i, (i + 1) % n, 1.0 / h);
                }
            }
            Topology::Graph => {
                let edges = space.edges().expect("graph topology keeps its edges");
                for &(i, j, len) in edges {
                    let c = (space.weight(i) + space.weight(j)) / (2.0 * len * len);
                    add_conductance(&mut action, i, j, c);
                }
            }
        }
        Ok(Generator { space, action })
    }

    pub fn space(&self) -> &Arc<DiscreteSpace> {
        &self.space
    }

    pub fn action(&self) -> &Array2<f64> {
        &self.action
    }

    /// L f.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        self.space.check_field(f)?;
        let out = self.action.dot(f.values());
        self.space.field(out.to_vec())
    }

    /// sup of the negative part of L f, i.e. ||(Lf)^-||_inf.
    pub fn neg_part_sup(&self, f: &ScalarField) -> Result<f64> {
        let lf = self.apply(f)?;
        Ok(lf.values().iter().fold(0.0f64, |m, &v| m.max(-v)))
    }
}

#[derive(Debug)]
pub struct HeatOperator {
    gen: Generator,
    /// ascending, lambda_0 = 0 clamped
    eigenvalues: Vec<f64>,
    /// column k: eigenfield u_k, orthonormal for sum_i w_i f_i g_i
    eigenfields: Array2<f64>,
    /// per-mode sup of u_k^2, for roundoff bounds on spectral sums
    mode_sup_sq: Vec<f64>,
    /// measured-over-formula noise ratio of the spectral sums; the
    /// eigensolver's backward error can exceed the pure summation bound by
    /// orders of magnitude, so grids calibrate it empirically
    noise_coeff: f64,
}

impl HeatOperator {
    /// Spectral decomposition of the generator, symmetrized by the
    /// square-root measure similarity and solved densely.
    pub fn new(gen: Generator) -> Result<HeatOperator> {
        let n = gen.space.n();
        if n > SPECTRAL_CAP {
            return Err(HeatLabError::SizeCap {
                n,
                cap: SPECTRAL_CAP,
            });
        }
        let w = gen.space.weights();
        let sqrt_w: Vec<f64> = w.iter().map(|&x| x.sqrt()).collect();

        // A = D^{1/2} L D^{-1/2}, symmetric; force exact symmetry before solving
        let mut a = faer::Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = gen.action[[i, j]] * sqrt_w[i] / sqrt_w[j];
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let s = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = s;
                a[(j, i)] = s;
            }
        }

        let evd = a
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| HeatLabError::Eigensolver(format!("{e:?}")))?;
        let s = evd.S();
        let u = evd.U();

        // eigenvalues of -A ascending; faer returns A's ascending, so reverse
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| (-s[p]).total_cmp(&(-s[q])));

        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenfields = Array2::zeros((n, n));
        for (col, &k) in order.iter().enumerate() {
            eigenvalues.push((-s[k]).max(0.0));
            for i in 0..n {
                eigenfields[[i, col]] = u[(i, k)] / sqrt_w[i];
            }
        }

        let mode_sup_sq = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| eigenfields[[i, k]] * eigenfields[[i, k]])
                    .fold(0.0f64, f64::max)
            })
            .collect();

        let mut op = HeatOperator {
            gen,
            eigenvalues,
            eigenfields,
            mode_sup_sq,
            noise_coeff: 1.0,
        };
        op.check_reconstruction()?;
        op.noise_coeff = op.measure_noise_coeff();
        Ok(op)
    }

    /// Empirical noise floor of the spectral sums, relative to the summation
    /// bound. On fine grids the kernel at s* = diam^2/1000 is certifiably
    /// below any representable value for pairs beyond 0.7 diam (at least 44
    /// lattice hops), so whatever survives there is eigensolver noise.
    fn measure_noise_coeff(&self) -> f64 {
        let space = self.gen.space();
        let n = space.n();
        if n < 65 || space.topology() == Topology::Graph {
            // too coarse to certify a noise-only region; keep the formula
            // bound and rely on the larger safety margin
            return 1.0;
        }
        let s_star = space.diameter() * space.diameter() / 1000.0;
        let probe = self.direct_kernel_values(s_star);
        let cut = 0.7 * space.diameter();
        let mut floor: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if space.dist(i, j) >= cut {
                    floor = floor.max(probe[[i, j]].abs());
                }
            }
        }
        let formula = self.direct_noise_bound(s_star);
        (floor / formula).max(1.0)
    }

    /// Spectral sum applied to a fixed pseudo-random field must reproduce the
    /// generator action within 1e-8 (relative to the spectral radius).
    fn check_reconstruction(&self) -> Result<()> {
        use rand::{Rng, SeedableRng};
        let n = self.gen.space.n();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lf = self.gen.action.dot(&Array1::from_vec(f.clone()));
        let coeff = self.weighted_coefficients(&Array1::from_vec(f));
        let mut recon = Array1::<f64>::zeros(n);
        for k in 0..n {
            let c = -self.eigenvalues[k] * coeff[k];
            for i in 0..n {
                recon[i] += c * self.eigenfields[[i, k]];
            }
        }
        let scale = 1.0 + self.eigenvalues[n - 1];
        let residual = lf
            .iter()
            .zip(recon.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            / scale;
        if residual > 1e-8 {
            return Err(HeatLabError::ReconstructionResidual {
                residual,
                tol: 1e-8,
            });
        }
        Ok(())
    }

    fn weighted_coefficients(&self, f: &Array1<f64>) -> Vec<f64> {
        let n = f.len();
        let w = self.gen.space.weights();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| w[i] * f[i] * self.eigenfields[[i, k]])
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn space(&self) -> &Arc<DiscreteSpace> {
        self.gen.space()
    }

    pub fn space_id(&self) -> SpaceId {
        self.gen.space.id()
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest nonzero eigenvalue (spectral gap) of a connected space.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// Resolution window [10 mesh^2, diam^2]: times below it see the lattice,
    /// times above it see only the equilibrium.
    pub fn resolution_window(&self) -> (f64, f64) {
        let s = self.space();
        (10.0 * s.mesh() * s.mesh(), s.diameter() * s.diameter())
    }

    pub fn check_window(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.resolution_window();
        if t < lo || t > hi {
            return Err(HeatLabError::OutsideWindow { t, lo, hi });
        }
        Ok(())
    }

    /// h_t f by spectral application; t = 0 returns f unchanged.
    pub fn apply(&self, t: f64, f: &ScalarField) -> Result<ScalarField> {
        self.gen.space.check_field(f)?;
        if t < 0.0 {
            return Err(HeatLabError::NonPositiveTime(t));
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        let n = f.len();
        let coeff = self.weighted_coefficients(f.values());
        let mut out = Array1::<f64>::zeros(n);
        for k in 0..n {
            let c = (-self.eigenvalues[k] * t).exp() * coeff[k];
            if c != 0.0 {
                for i in 0..n {
                    out[i] += c * self.eigenfields[[i, k]];
                }
            }
        }
        self.gen.space.field(out.to_vec())
    }

    /// Summation-roundoff bound of the direct spectral sum at time t (per
    /// kernel entry). Multiply by `noise_coeff` for the full noise estimate
    /// including eigensolver backward error.
    fn direct_noise_bound(&self, t: f64) -> f64 {
        let n = self.eigenvalues.len() as f64;
        let terms: f64 = self
            .eigenvalues
            .iter()
            .zip(&self.mode_sup_sq)
            .map(|(&l, &m)| (-l * t).exp() * m)
            .sum();
        n * f64::EPSILON * terms
    }

    fn noise_estimate(&self, t: f64) -> f64 {
        self.noise_coeff * self.direct_noise_bound(t)
    }

    /// Direct spectral kernel p_t = B B^T with B = U e^{-t Lambda / 2},
    /// symmetrized exactly after the product.
    fn direct_kernel_values(&self, t: f64) -> Array2<f64> {
        let n = self.eigenvalues.len();
        let mut b = Array2::<f64>::zeros((n, n));
        for k in 0..n {
            let e = (-self.eigenvalues[k] * t / 2.0).exp();
            for i in 0..n {
                b[[i, k]] = self.eigenfields[[i, k]] * e;
            }
        }
        symmetrized(b.dot(&b.t()))
    }

    /// Heat kernel matrix at time t > 0, values and log-values.
    pub fn kernel_matrix(&self, t: f64) -> Result<KernelMatrix> {
        if !(t > 0.0) {
            return Err(HeatLabError::NonPositiveTime(t));
        }
        let n = self.eigenvalues.len();
        let diam = self.space().diameter();
        let depth = diam * diam / (4.0 * t);

        if depth <= DIRECT_DEPTH {
            let values = self.direct_kernel_values(t);
            let log_values = values.mapv(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
            return Ok(KernelMatrix::assemble(
                self.space_id(),
                t,
                values,
                log_values,
            ));
        }

        // dyadic evaluation: base at t / 2^levels, truncated below a
        // certified noise threshold, then composed through the measure.
        // The level count is chosen so the per-level depth stays safely
        // inside the retained range of the truncated base.
        let mut levels = 1usize;
        let mut threshold;
        loop {
            let base_t = t / (1u64 << levels) as f64;
            threshold = 1e3 * self.noise_estimate(base_t);
            let retained_depth = -threshold.ln();
            if depth / (1u64 << levels) as f64 <= 0.6 * retained_depth || levels >= 60 {
                break;
            }
            levels += 1;
        }
        let base_t = t / (1u64 << levels) as f64;
        let mut values = self.direct_kernel_values(base_t);
        values.mapv_inplace(|v| if v > threshold { v } else { 0.0 });

        // the cut removes ~threshold*mesh of true mass per row; renormalize
        // so every composition below stays stochastic, then restore symmetry
        let w = self.space().weights();
        let n_pts = self.space().n();
        for i in 0..n_pts {
            let mut mass = 0.0;
            for j in 0..n_pts {
                mass += values[[i, j]] * w[j];
            }
            for j in 0..n_pts {
                values[[i, j]] /= mass;
            }
        }
        values = symmetrized(values);
        for _ in 0..levels {
            let max_log =
                values.iter().fold(
                    f64::NEG_INFINITY,
                    |m, &v| if v > 0.0 { m.max(v.ln()) } else { m },
                );
            let min_log =
                values.iter().fold(
                    f64::INFINITY,
                    |m, &v| if v > 0.0 { m.min(v.ln()) } else { m },
                );
            // products of two entries plus weights must stay in range
            if 2.0 * min_log > -650.0 && 2.0 * max_log < 650.0 {
                // linear composition: p' = p W p, all terms nonnegative
                let mut scaled = values.clone();
                for i in 0..n {
                    for j in 0..n {
                        scaled[[i, j]] *= w[j];
                    }
                }
                values = symmetrized(scaled.dot(&values));
            } else {
                values = log_domain_compose(&values, w);
            }
        }
        let log_values = values.mapv(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
        Ok(KernelMatrix::assemble(
            self.space_id(),
            t,
            values,
            log_values,
        ))
    }
}

fn symmetrized(mut m: Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = s;
            m[[j, i]] = s;
        }
    }
    m
}

/// One dyadic doubling in log arithmetic: out(i,j) = LSE_k of
/// log p(i,k) + log w_k + log p(k,j). Only used when linear products would
/// leave the representable range. Rows are independent, so the work splits
/// over the configured thread cap without changing any output bit.
fn log_domain_compose(values: &Array2<f64>, w: &Array1<f64>) -> Array2<f64> {
    let n = values.nrows();
    let logs: Array2<f64> = values.mapv(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
    let log_w: Vec<f64> = w.iter().map(|&x| x.ln()).collect();
    let mut out = vec![f64::NEG_INFINITY; n * n];
    let logs_ref = &logs;
    let log_w_ref = &log_w;
    crate::threads::for_row_chunks(&mut out, n, |start_row, chunk| {
        for (r, row) in chunk.chunks_mut(n).enumerate() {
            let i = start_row + r;
            for (j, slot) in row.iter_mut().enumerate() {
                let mut shift = f64::NEG_INFINITY;
                for k in 0..n {
                    let v = logs_ref[[i, k]] + log_w_ref[k] + logs_ref[[k, j]];
                    if v > shift {
                        shift = v;
                    }
                }
                if shift > f64::NEG_INFINITY {
                    let mut acc = 0.0;
                    for k in 0..n {
                        let v = logs_ref[[i, k]] + log_w_ref[k] + logs_ref[[k, j]];
                        if v > f64::NEG_INFINITY {
                            acc += (v - shift).exp();
                        }
                    }
                    *slot = shift + acc.ln();
                }
            }
        }
    });
    let out_log = Array2::from_shape_vec((n, n), out).expect("shape");
    symmetrized(out_log.mapv(|lv| {
        if lv > f64::NEG_INFINITY {
            lv.exp()
        } else {
            0.0
        }
    }))
}

/// Heat kernel matrix: entries are densities in the second argument with
/// respect to the weights. Log-values are carried alongside because the
/// small-time experiments live far below linear underflow.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    space: SpaceId,
    t: f64,
    values: Array2<f64>,
    log_values: Array2<f64>,
    min_entry: f64,
    underflow_flagged: bool,
}

impl KernelMatrix {
    fn assemble(space: SpaceId, t: f64, values: Array2<f64>, log_values: Array2<f64>) -> Self {
        let min_entry = values.iter().copied().fold(f64::INFINITY, f64::min);
        KernelMatrix {
            space,
            t,
            values,
            log_values,
            min_entry,
            underflow_flagged: min_entry < 1e-300,
        }
    }

    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn log_value(&self, i: usize, j: usize) -> f64 {
        self.log_values[[i, j]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn log_values(&self) -> &Array2<f64> {
        &self.log_values
    }

    pub fn min_entry(&self) -> f64 {
        self.min_entry
    }

    /// True when some entry sits below 1e-300 in linear scale.
    pub fn underflow_flagged(&self) -> bool {
        self.underflow_flagged
    }

    /// `mu_t[x](A)` in log scale: log of the sum over the set of `p_t[x](j) w_j`.
    pub fn log_measure(&self, space: &DiscreteSpace, x: usize, set: &[usize]) -> Result<f64> {
        if set.is_empty() {
            return Err(HeatLabError::EmptySet);
        }
        let terms: Vec<f64> = set
            .iter()
            .map(|&j| self.log_values[[x, j]] + space.weight(j).ln())
            .collect();
        Ok(crate::numeric::log_sum_exp(&terms).0)
    }
}

/// Validity report: mass, symmetry, positivity and the Chapman-Kolmogorov
/// composition defect (the discrete Markov-property check).
#[derive(Debug, Clone)]
pub struct KernelReport {
    pub mass_error: f64,
    pub asymmetry: f64,
    pub min_entry: f64,
    pub underflow_flagged: bool,
    pub ck_defect: Option<f64>,
}

/// Checks one kernel matrix; when `ck_times = Some((s, t))` also composes
/// p_s with p_t through the measure and reports the sup defect against
/// p_{s+t}.
pub fn validate_kernel(
    op: &HeatOperator,
    kernel: &KernelMatrix,
    ck_times: Option<(f64, f64)>,
) -> Result<KernelReport> {
    let space = op.space();
    let n = space.n();
    let w = space.weights();

    let mut mass_error: f64 = 0.0;
    for i in 0..n {
        let mut mass = 0.0;
        for j in 0..n {
            mass += kernel.value(i, j) * w[j];
        }
        mass_error = mass_error.max((mass - 1.0).abs());
    }

    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            asymmetry = asymmetry.max((kernel.value(i, j) - kernel.value(j, i)).abs());
        }
    }

    let ck_defect = match ck_times {
        None => None,
        Some((s, t)) => {
            let ps = op.kernel_matrix(s)?;
            let pt = op.kernel_matrix(t)?;
            let pst = op.kernel_matrix(s + t)?;
            let mut defect: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += ps.value(i, k) * w[k] * pt.value(k, j);
                    }
                    defect = defect.max((acc - pst.value(i, j)).abs());
                }
            }
            Some(defect)
        }
    };

    Ok(KernelReport {
        mass_error,
        asymmetry,
        min_entry: kernel.min_entry(),
        underflow_flagged: kernel.underflow_flagged(),
        ck_defect,
    })
}

/// Wrapped-Gaussian heat kernel on the flat circle: the independent oracle
/// for the spectral kernel. Generator d^2/dx^2 (no 1/2), so the summand is
/// (4 pi t)^{-1/2} exp(-(x - y + kC)^2 / (4t)). Errors when the truncation
/// leaves a tail bound above 1e-14.
pub fn circle_kernel_oracle(
    circumference: f64,
    t: f64,
    x: f64,
    y: f64,
    terms: usize,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(HeatLabError::NonPositiveTime(t));
    }
    if terms < 1 {
        return Err(HeatLabError::OracleTruncation {
            tail: f64::INFINITY,
            bound: 1e-14,
        });
    }
    let c = circumference;
    // reduce |x - y| into [0, C/2]; starting from the absolute difference
    // keeps the value exactly symmetric in (x, y)
    let mut raw = (x - y).abs() % c;
    if raw > c / 2.0 {
        raw = c - raw;
    }
    let norm = 1.0 / (4.0 * std::f64::consts::PI * t).sqrt();
    // image distances are raw + kC and (C - raw) + kC, k >= 0
    let mut sum = 0.0;
    for k in 0..=(terms as i64) {
        let z1 = raw + k as f64 * c;
        let z2 = (c - raw) + k as f64 * c;
        sum += (-z1 * z1 / (4.0 * t)).exp() + (-z2 * z2 / (4.0 * t)).exp();
    }
    // first omitted images sit at |z| >= (terms + 1/2) C; consecutive omitted
    // terms shrink at least geometrically with ratio exp(-(terms+1) C^2/(2t))
    let edge = (terms as f64 + 0.5) * c;
    let base = (-edge * edge / (4.0 * t)).exp();
    let ratio = (-(terms as f64 + 1.0) * c * c / (2.0 * t)).exp();
    let tail = if ratio < 0.999 {
        2.0 * norm * base / (1.0 - ratio)
    } else {
        2.0 * norm * base * (1.0 + 2.0 * t / ((terms as f64 + 1.0) * c * c))
    };
    if tail > 1e-14 {
        return Err(HeatLabError::OracleTruncation { tail, bound: 1e-14 });
    }
    Ok(norm * sum)
}

/// Oracle with the truncation chosen automatically so the tail bound stays
/// below 1e-14.
pub fn circle_kernel_oracle_auto(circumference: f64, t: f64, x: f64, y: f64) -> Result<f64> {
    // images decay like exp(-(kC)^2/(4t)); k ~ sqrt(180 t)/C caps the tail
    let k = 3 + ((180.0 * t).sqrt() / circumference).ceil() as usize;
    circle_kernel_oracle(circumference, t, x, y, k)
}
