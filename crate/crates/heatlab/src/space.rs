//! Discrete metric measure spaces and metric calculus on them.
//!
//! A [`DiscreteSpace`] is a finite point set with a full distance matrix, a
//! positive weight per point (the discrete reference measure) and a declared
//! curvature lower bound. Distances satisfy the triangle inequality *exactly*
//! in floating point: grid builders regularize the closed-form profile to a
//! subadditive one, the graph builder relaxes shortest paths to a fixpoint.

use crate::error::{HeatLabError, Result};
use ndarray::{Array1, Array2};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicU64, Ordering};

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

/// Opaque identity of a space; fields carry it so that mixing spaces is caught.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceId(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Interval,
    Circle,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetDistance {
    /// d_-(x, A) = inf over the set.
    Inf,
    /// d_+(x, A) = sup over the set.
    Sup,
}

#[derive(Debug)]
pub struct DiscreteSpace {
    id: SpaceId,
    n: usize,
    dist: Array2<f64>,
    weight: Array1<f64>,
    coords: Option<Vec<f64>>,
    /// graph topology keeps its edge list for the generator assembly
    edges: Option<Vec<(usize, usize, f64)>>,
    k_lower: f64,
    mesh: f64,
    diameter: f64,
    topology: Topology,
}

/// Real-valued vector over the points of one space.
#[derive(Debug, Clone)]
pub struct ScalarField {
    space: SpaceId,
    values: Array1<f64>,
}

/// Non-negative field integrating to 1 against the weights.
#[derive(Debug, Clone)]
pub struct Density {
    field: ScalarField,
}

/// Subadditive, monotone regularization of the profile m -> m*h.
///
/// Starts from the rounded closed form and lowers entries (by at most a few
/// ulps) until c[a] <= c[b] + c[a-b] holds exactly in floating point.
fn subadditive_profile(m_max: usize, h: f64) -> Vec<f64> {
    let mut c: Vec<f64> = (0..=m_max).map(|m| m as f64 * h).collect();
    loop {
        let mut changed = false;
        for m in 2..=m_max {
            for b in 1..m / 2 + 1 {
                let s = c[b] + c[m - b];
                if s < c[m] {
                    c[m] = s;
                    changed = true;
                }
            }
        }
        if !changed {
            return c;
        }
    }
}

impl DiscreteSpace {
    /// Equispaced grid on [0, L] with trapezoid weights (half weight at the
    /// two endpoints) and flat curvature bound K = 0.
    pub fn interval(n: usize, length: f64) -> Result<DiscreteSpace> {
        if n < 2 {
            return Err(HeatLabError::TooFewPoints { min: 2, got: n });
        }
        if !(length > 0.0) {
            return Err(HeatLabError::NonPositive {
                what: "interval length",
                value: length,
            });
        }
        let h = length / (n - 1) as f64;
        let profile = subadditive_profile(n - 1, h);
        let mut dist = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                dist[[i, j]] = profile[i.abs_diff(j)];
            }
        }
        let mut weight = Array1::from_elem(n, h);
        weight[0] = h / 2.0;
        weight[n - 1] = h / 2.0;
        Ok(DiscreteSpace {
            id: SpaceId(NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed)),
            n,
            dist,
            weight,
            coords: Some((0..n).map(|i| i as f64 * h).collect()),
            edges: None,
            k_lower: 0.0,
            mesh: h,
            diameter: profile[n - 1],
            topology: Topology::Interval,
        })
    }

    /// Equispaced points on a circle of circumference C, arc-length metric,
    /// uniform weight C/n, flat curvature bound K = 0.
    pub fn circle(n: usize, circumference: f64) -> Result<DiscreteSpace> {
        if n < 3 {
            return Err(HeatLabError::TooFewPoints { min: 3, got: n });
        }
        if !(circumference > 0.0) {
            return Err(HeatLabError::NonPositive {
                what: "circumference",
                value: circumference,
            });
        }
        let h = circumference / n as f64;
        let m_max = n / 2;
        let profile = subadditive_profile(m_max, h);
        let mut dist = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let raw = i.abs_diff(j);
                dist[[i, j]] = profile[raw.min(n - raw)];
            }
        }
        Ok(DiscreteSpace {
            id: SpaceId(NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed)),
            n,
            dist,
            weight: Array1::from_elem(n, h),
            coords: Some((0..n).map(|i| i as f64 * h).collect()),
            edges: None,
            k_lower: 0.0,
            mesh: h,
            diameter: profile[m_max],
            topology: Topology::Circle,
        })
    }

    /// Weighted graph with all-pairs shortest-path metric. Requires a
    /// connected edge list with positive lengths, positive node weights and
    /// an explicit curvature lower bound (none is inferred).
    pub fn graph(
        node_weights: &[f64],
        edges: &[(usize, usize, f64)],
        k_lower: f64,
    ) -> Result<DiscreteSpace> {
        let n = node_weights.len();
        if n < 2 {
            return Err(HeatLabError::TooFewPoints { min: 2, got: n });
        }
        for (i, &w) in node_weights.iter().enumerate() {
            if !(w > 0.0) {
                return Err(HeatLabError::NonPositive {
                    what: "node weight",
                    value: w,
                });
            }
            let _ = i;
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, len) in edges {
            for &e in &[a, b] {
                if e >= n {
                    return Err(HeatLabError::EdgeOutOfRange { endpoint: e, n });
                }
            }
            if !(len > 0.0) {
                return Err(HeatLabError::NonPositive {
                    what: "edge length",
                    value: len,
                });
            }
            adj[a].push((b, len));
            adj[b].push((a, len));
        }

        let mut dist = Array2::from_elem((n, n), f64::INFINITY);
        for src in 0..n {
            let row = dijkstra(&adj, src);
            for (j, d) in row.into_iter().enumerate() {
                dist[[src, j]] = d;
            }
        }
        for j in 0..n {
            if dist[[0, j]].is_infinite() {
                return Err(HeatLabError::Disconnected(j));
            }
        }
        // symmetrize, then relax to a floating-point triangle fixpoint
        for i in 0..n {
            for j in i + 1..n {
                let d = dist[[i, j]].min(dist[[j, i]]);
                dist[[i, j]] = d;
                dist[[j, i]] = d;
            }
        }
        loop {
            let mut changed = false;
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let via = dist[[i, k]] + dist[[k, j]];
                        if via < dist[[i, j]] {
                            dist[[i, j]] = via;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut mesh: f64 = 0.0;
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            let mut nearest = f64::INFINITY;
            for j in 0..n {
                if i != j {
                    nearest = nearest.min(dist[[i, j]]);
                    diameter = diameter.max(dist[[i, j]]);
                }
            }
            mesh = mesh.max(nearest);
        }
        Ok(DiscreteSpace {
            id: SpaceId(NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed)),
            n,
            dist,
            weight: Array1::from_vec(node_weights.to_vec()),
            coords: None,
            edges: Some(edges.to_vec()),
            k_lower,
            mesh,
            diameter,
            topology: Topology::Graph,
        })
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[[i, j]]
    }

    pub fn dist_matrix(&self) -> &Array2<f64> {
        &self.dist
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weight[i]
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weight
    }

    pub fn total_mass(&self) -> f64 {
        self.weight.sum()
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn k_lower(&self) -> f64 {
        self.k_lower
    }

    /// K^- = max(0, -K).
    pub fn k_minus(&self) -> f64 {
        (-self.k_lower).max(0.0)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn coords(&self) -> Option<&[f64]> {
        self.coords.as_deref()
    }

    pub fn edges(&self) -> Option<&[(usize, usize, f64)]> {
        self.edges.as_deref()
    }

    /// Grid index nearest to coordinate x (grid-built spaces only).
    pub fn nearest_point(&self, x: f64) -> Option<usize> {
        let coords = self.coords.as_ref()?;
        let key = |i: &usize| -> f64 {
            match self.topology {
                Topology::Circle => {
                    let c = self.weight[0] * self.n as f64; // uniform weight = h, h*n = C
                    let mut d = (coords[*i] - x).abs() % c;
                    if d > c / 2.0 {
                        d = c - d;
                    }
                    d
                }
                _ => (coords[*i] - x).abs(),
            }
        };
        (0..self.n).min_by(|a, b| key(a).total_cmp(&key(b)))
    }

    /// Closed metric ball as an index set.
    pub fn ball(&self, center: usize, r: f64) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| self.dist[[center, j]] <= r)
            .collect()
    }

    pub fn field(&self, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != self.n {
            return Err(HeatLabError::LengthMismatch {
                expected: self.n,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HeatLabError::NonFinite(i));
        }
        Ok(ScalarField {
            space: self.id,
            values: Array1::from_vec(values),
        })
    }

    /// Field built from the grid coordinates; only for grid spaces.
    pub fn field_from_coords(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        let coords = self.coords.as_ref().ok_or(HeatLabError::NotAnInterval)?;
        self.field(coords.iter().map(|&x| f(x)).collect())
    }

    pub fn density(&self, values: Vec<f64>) -> Result<Density> {
        let field = self.field(values)?;
        if let Some(i) = field.values.iter().position(|&v| v < 0.0) {
            return Err(HeatLabError::NegativeDensity(i));
        }
        let mass: f64 = field
            .values
            .iter()
            .zip(self.weight.iter())
            .map(|(v, w)| v * w)
            .sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(HeatLabError::NotNormalized(mass));
        }
        Ok(Density { field })
    }

    /// Normalizes a non-negative field into a density.
    pub fn density_from_unnormalized(&self, values: Vec<f64>) -> Result<Density> {
        if let Some(i) = values.iter().position(|&v| v < 0.0) {
            return Err(HeatLabError::NegativeDensity(i));
        }
        let mass: f64 = values
            .iter()
            .zip(self.weight.iter())
            .map(|(v, w)| v * w)
            .sum();
        if !(mass > 0.0) {
            return Err(HeatLabError::NotNormalized(mass));
        }
        self.density(values.into_iter().map(|v| v / mass).collect())
    }

    pub fn uniform_density(&self) -> Density {
        let total = self.total_mass();
        Density {
            field: ScalarField {
                space: self.id,
                values: Array1::from_elem(self.n, 1.0 / total),
            },
        }
    }

    /// Point mass at i as a density: 1/weight_i at i, zero elsewhere.
    pub fn dirac_density(&self, i: usize) -> Result<Density> {
        if i >= self.n {
            return Err(HeatLabError::PointOutOfRange { got: i, n: self.n });
        }
        let mut v = vec![0.0; self.n];
        v[i] = 1.0 / self.weight[i];
        Ok(Density {
            field: ScalarField {
                space: self.id,
                values: Array1::from_vec(v),
            },
        })
    }

    pub fn check_field(&self, f: &ScalarField) -> Result<()> {
        if f.space != self.id {
            return Err(HeatLabError::SpaceMismatch);
        }
        Ok(())
    }

    /// Lip(f) = max over pairs of |f_i - f_j| / d(i, j).
    pub fn lipschitz_constant(&self, f: &ScalarField) -> Result<f64> {
        self.check_field(f)?;
        let mut lip: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                lip = lip.max((f.values[i] - f.values[j]).abs() / self.dist[[i, j]]);
            }
        }
        Ok(lip)
    }

    /// Nearest-neighbor slope: at i, the max of |f_i - f_j|/d(i,j) over j
    /// with d(i,j) <= (1 + 1e-9) * mesh; zero if no such neighbor exists.
    pub fn local_slope(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_field(f)?;
        let cutoff = (1.0 + 1e-9) * self.mesh;
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let mut s: f64 = 0.0;
            for j in 0..self.n {
                if j != i && self.dist[[i, j]] <= cutoff {
                    s = s.max((f.values[i] - f.values[j]).abs() / self.dist[[i, j]]);
                }
            }
            out[i] = s;
        }
        Ok(ScalarField {
            space: self.id,
            values: Array1::from_vec(out),
        })
    }

    /// d_-(i, A) (mode Inf) or d_+(i, A) (mode Sup).
    pub fn dist_to_set(&self, i: usize, set: &[usize], mode: SetDistance) -> Result<f64> {
        if set.is_empty() {
            return Err(HeatLabError::EmptySet);
        }
        if i >= self.n {
            return Err(HeatLabError::PointOutOfRange { got: i, n: self.n });
        }
        let mut acc = match mode {
            SetDistance::Inf => f64::INFINITY,
            SetDistance::Sup => f64::NEG_INFINITY,
        };
        for &j in set {
            if j >= self.n {
                return Err(HeatLabError::PointOutOfRange { got: j, n: self.n });
            }
            let d = self.dist[[i, j]];
            acc = match mode {
                SetDistance::Inf => acc.min(d),
                SetDistance::Sup => acc.max(d),
            };
        }
        Ok(acc)
    }

    /// Exhaustive triangle-inequality scan; returns the first violating
    /// triple, or None when the inequality holds exactly everywhere.
    pub fn verify_triangle(&self) -> Option<(usize, usize, usize)> {
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    if self.dist[[i, k]] > self.dist[[i, j]] + self.dist[[j, k]] {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((0, src)));
    while let Some(Reverse((key, u))) = heap.pop() {
        if done[u] || key > dist[u].to_bits() {
            continue;
        }
        done[u] = true;
        for &(v, len) in &adj[u] {
            let cand = dist[u] + len;
            if cand < dist[v] {
                dist[v] = cand;
                // nonnegative floats order like their bit patterns
                heap.push(Reverse((cand.to_bits(), v)));
            }
        }
    }
    dist
}

impl ScalarField {
    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("contiguous")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    /// Same-space map preserving the space binding.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            space: self.space,
            values: self.values.mapv(&f),
        }
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl Density {
    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.field.values
    }

    pub fn space_id(&self) -> SpaceId {
        self.field.space
    }

    /// Mass of an index set against the carrying weights.
    pub fn mass_on(&self, space: &DiscreteSpace, set: &[usize]) -> Result<f64> {
        space.check_field(&self.field)?;
        Ok(set
            .iter()
            .map(|&j| self.field.values[j] * space.weight(j))
            .sum())
    }
}

impl std::ops::Index<usize> for Density {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.field.values[i]
    }
}
