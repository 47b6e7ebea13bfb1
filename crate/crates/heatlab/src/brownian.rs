//! Slowed Brownian motion on the discrete space: finite-dimensional
//! marginals through the Markov product formula, seeded path sampling, the
//! partition kinetic rate and exact tube probabilities by masked kernel
//! recursion.

use crate::error::{HeatLabError, Result};
use crate::fit::LimitFit;
use crate::heat::{HeatOperator, KernelMatrix};
use crate::numeric::log_sum_exp;
use crate::space::DiscreteSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::sync::Arc;

/// Time partition of [0, 1] with pinned endpoints.
#[derive(Debug, Clone)]
pub struct Partition {
    times: Vec<f64>,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Partition> {
        if times.len() < 2
            || times[0] != 0.0
            || *times.last().unwrap() != 1.0
            || times.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(HeatLabError::BadPartition);
        }
        Ok(Partition { times })
    }

    pub fn uniform(segments: usize) -> Partition {
        let times = (0..=segments).map(|i| i as f64 / segments as f64).collect();
        Partition { times }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }
}

/// One point index per partition node.
#[derive(Debug, Clone)]
pub struct PartitionPath {
    pub partition: Partition,
    pub points: Vec<usize>,
}

impl PartitionPath {
    pub fn new(partition: Partition, points: Vec<usize>) -> Result<PartitionPath> {
        if points.len() != partition.times.len() {
            return Err(HeatLabError::PathLengthMismatch {
                points: points.len(),
                nodes: partition.times.len(),
            });
        }
        Ok(PartitionPath { partition, points })
    }
}

/// Brownian path law restricted to [0, t_scale] and rescaled to [0, 1]:
/// transitions over a partition segment [s, s'] are heat kernels at time
/// t_scale * (s' - s).
#[derive(Debug, Clone)]
pub struct SlowedBrownian {
    op: Arc<HeatOperator>,
    start: usize,
    t_scale: f64,
}

impl SlowedBrownian {
    pub fn new(op: Arc<HeatOperator>, start: usize, t_scale: f64) -> Result<SlowedBrownian> {
        if start >= op.space().n() {
            return Err(HeatLabError::PointOutOfRange {
                got: start,
                n: op.space().n(),
            });
        }
        if !(t_scale > 0.0) {
            return Err(HeatLabError::NonPositiveTime(t_scale));
        }
        Ok(SlowedBrownian { op, start, t_scale })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn t_scale(&self) -> f64 {
        self.t_scale
    }

    pub fn space(&self) -> &Arc<DiscreteSpace> {
        self.op.space()
    }

    fn segment_floor(&self) -> f64 {
        let mesh = self.space().mesh();
        mesh * mesh / 100.0
    }

    /// Kernels per distinct segment duration (uniform partitions share one).
    fn segment_kernels(&self, partition: &Partition) -> Result<HashMap<u64, KernelMatrix>> {
        let mut kernels = HashMap::new();
        for w in partition.times.windows(2) {
            let dt = self.t_scale * (w[1] - w[0]);
            if dt < self.segment_floor() {
                return Err(HeatLabError::IncrementBelowResolution {
                    dt,
                    floor: self.segment_floor(),
                });
            }
            kernels
                .entry(dt.to_bits())
                .or_insert(self.op.kernel_matrix(dt)?);
        }
        Ok(kernels)
    }

    /// log of the finite-dimensional marginal density of the path variables
    /// (gamma_{t_1}, ..., gamma_{t_m}) with respect to the product measure,
    /// i.e. the sum of log transition kernels along the path.
    pub fn marginal_log_density(&self, path: &PartitionPath) -> Result<f64> {
        if path.points[0] != self.start {
            return Err(HeatLabError::PathStartMismatch {
                got: path.points[0],
                expected: self.start,
            });
        }
        let kernels = self.segment_kernels(&path.partition)?;
        let mut acc = 0.0;
        for (k, w) in path.partition.times.windows(2).enumerate() {
            let dt = self.t_scale * (w[1] - w[0]);
            let kernel = &kernels[&dt.to_bits()];
            acc += kernel.log_value(path.points[k], path.points[k + 1]);
        }
        Ok(acc)
    }

    /// Forward sampling of the Markov chain at the partition nodes;
    /// deterministic given (seed, path_index) through a split RNG stream.
    pub fn sample_path(
        &self,
        partition: &Partition,
        seed: u64,
        path_index: u64,
    ) -> Result<PartitionPath> {
        let kernels = self.segment_kernels(partition)?;
        Ok(self.sample_with_kernels(&kernels, partition, seed, path_index))
    }

    /// Batch sampling with the segment kernels computed once; path k of the
    /// batch is identical to `sample_path(partition, seed, k)`.
    pub fn sample_paths(
        &self,
        partition: &Partition,
        seed: u64,
        count: usize,
    ) -> Result<Vec<PartitionPath>> {
        let kernels = self.segment_kernels(partition)?;
        Ok((0..count)
            .map(|idx| self.sample_with_kernels(&kernels, partition, seed, idx as u64))
            .collect())
    }

    fn sample_with_kernels(
        &self,
        kernels: &HashMap<u64, KernelMatrix>,
        partition: &Partition,
        seed: u64,
        path_index: u64,
    ) -> PartitionPath {
        let space = self.space();
        let n = space.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);

        let mut points = vec![self.start];
        for w in partition.times.windows(2) {
            let dt = self.t_scale * (w[1] - w[0]);
            let kernel = &kernels[&dt.to_bits()];
            let x = *points.last().unwrap();
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut next = n - 1;
            for j in 0..n {
                acc += kernel.value(x, j) * space.weight(j);
                if u < acc {
                    next = j;
                    break;
                }
            }
            points.push(next);
        }
        PartitionPath {
            partition: partition.clone(),
            points,
        }
    }

    /// log of the probability that the path stays in the closed ball of
    /// radius r around the reference at every partition node, computed
    /// exactly by masked kernel recursion in log arithmetic.
    pub fn tube_log_probability(&self, ref_path: &PartitionPath, r: f64) -> Result<f64> {
        let space = self.space();
        if r < space.mesh() {
            return Err(HeatLabError::RadiusBelowMesh {
                r,
                mesh: space.mesh(),
            });
        }
        let kernels = self.segment_kernels(&ref_path.partition)?;
        let n = space.n();
        let log_w: Vec<f64> = space.weights().iter().map(|&w| w.ln()).collect();

        let first_ball = space.ball(ref_path.points[0], r);
        if first_ball.is_empty() {
            return Err(HeatLabError::EmptyBall {
                center: ref_path.points[0],
                r,
            });
        }
        // mass vector over points, log scale; starts as the point mass at
        // the declared start masked by the first ball
        let mut log_mass = vec![f64::NEG_INFINITY; n];
        if space.dist(self.start, ref_path.points[0]) <= r {
            log_mass[self.start] = 0.0;
        }

        for (k, w) in ref_path.partition.times.windows(2).enumerate() {
            let dt = self.t_scale * (w[1] - w[0]);
            let kernel = &kernels[&dt.to_bits()];
            let ball = space.ball(ref_path.points[k + 1], r);
            if ball.is_empty() {
                return Err(HeatLabError::EmptyBall {
                    center: ref_path.points[k + 1],
                    r,
                });
            }
            let mut next = vec![f64::NEG_INFINITY; n];
            for &y in &ball {
                let mut shift = f64::NEG_INFINITY;
                for x in 0..n {
                    let v = log_mass[x] + kernel.log_value(x, y);
                    if v > shift {
                        shift = v;
                    }
                }
                if shift > f64::NEG_INFINITY {
                    let mut acc = 0.0;
                    for x in 0..n {
                        let v = log_mass[x] + kernel.log_value(x, y);
                        if v > f64::NEG_INFINITY {
                            acc += (v - shift).exp();
                        }
                    }
                    next[y] = shift + acc.ln() + log_w[y];
                }
            }
            log_mass = next;
        }
        Ok(log_sum_exp(&log_mass).0)
    }
}

/// Partition kinetic rate (1/4) sum d(gamma_k, gamma_{k+1})^2 / dt_k for a
/// path pinned at the declared start; +infinity for a wrong start.
pub fn kinetic_rate(space: &DiscreteSpace, start: usize, path: &PartitionPath) -> f64 {
    if path.points[0] != start {
        return f64::INFINITY;
    }
    let mut acc = 0.0;
    for (k, w) in path.partition.times.windows(2).enumerate() {
        let d = space.dist(path.points[k], path.points[k + 1]);
        acc += d * d / (w[1] - w[0]);
    }
    acc / 4.0
}

/// Tube large-deviations fit: t log of the tube probability over the t-grid
/// against the window [-ell - delta, -ell + C r + delta], where ell is the
/// kinetic rate of the reference path and C = sum d_i / dt_i is the declared
/// first-order ball slack.
#[derive(Debug, Clone)]
pub struct TubeFit {
    pub fit: LimitFit,
    pub ell: f64,
    pub slack_c: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub in_window: bool,
}

pub fn tube_ldp_check(
    op: &Arc<HeatOperator>,
    start: usize,
    ref_path: &PartitionPath,
    r: f64,
    t_grid: &[f64],
    delta: f64,
) -> Result<TubeFit> {
    crate::fit::check_t_grid(t_grid)?;
    let space = op.space();
    if ref_path.points[0] != start {
        return Err(HeatLabError::PathStartMismatch {
            got: ref_path.points[0],
            expected: start,
        });
    }
    let mut slack_c = 0.0;
    for (k, w) in ref_path.partition.times.windows(2).enumerate() {
        let d = space.dist(ref_path.points[k], ref_path.points[k + 1]);
        if d <= 0.0 {
            return Err(HeatLabError::ZeroLengthSegment(k));
        }
        slack_c += d / (w[1] - w[0]);
    }
    let ell = kinetic_rate(space, start, ref_path);

    let mut values = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let bm = SlowedBrownian::new(op.clone(), start, t)?;
        values.push(t * bm.tube_log_probability(ref_path, r)?);
    }
    let fit = LimitFit::new(t_grid.to_vec(), values)?;
    let window_lo = -ell - delta;
    let window_hi = -ell + slack_c * r + delta;
    let in_window = fit.fitted_limit >= window_lo && fit.fitted_limit <= window_hi;
    Ok(TubeFit {
        fit,
        ell,
        slack_c,
        window_lo,
        window_hi,
        in_window,
    })
}
