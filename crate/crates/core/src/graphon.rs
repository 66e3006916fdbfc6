//! Partition, weighting, and intensity mathematics.
//!
//! A regular-grid partition of the unit square is built from two segment
//! distributions. The piecewise-constant graphon assigns each block a single
//! Bernoulli rate; the smoothing graphon blends all block rates with weights
//! obtained by integrating a Laplace kernel centred at the node coordinate
//! over each segment and normalising over the unit interval.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Segment weights are clamped at this floor before any logarithm so that
/// extreme smoothing parameters cannot produce -inf log-weights.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// `ln` of a segment weight with the floor applied.
pub fn ln_weight(w: f64) -> f64 {
    w.max(WEIGHT_FLOOR).ln()
}

/// Laplace scale controlling graphon sharpness. Large values approach the
/// piecewise-constant graphon, small values a globally constant one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParameter(f64);

impl SmoothingParameter {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must be positive and finite, got {lambda}"),
            ));
        }
        Ok(SmoothingParameter(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// CDF of the Laplace distribution with location 0 and scale `1/lambda`.
///
/// Both branches only ever exponentiate non-positive numbers, so the result
/// saturates to 0/1 without overflow for arbitrarily large `lambda * |x|`.
pub fn laplace_cdf(x: f64, lambda: SmoothingParameter) -> f64 {
    let l = lambda.value();
    if x < 0.0 {
        0.5 * (l * x).exp()
    } else {
        1.0 - 0.5 * (-l * x).exp()
    }
}

/// Mass of the Laplace kernel over `[x1, x2]` (coordinates relative to the
/// kernel centre): `G(x2) - G(x1)`, evaluated in `exp_m1` form where the two
/// CDF values are close enough to cancel.
fn interval_mass(x1: f64, x2: f64, l: f64) -> f64 {
    debug_assert!(x1 <= x2);
    if x2 <= 0.0 {
        let d = l * (x2 - x1);
        if d <= 1.0 {
            0.5 * (l * x1).exp() * d.exp_m1()
        } else {
            0.5 * ((l * x2).exp() - (l * x1).exp())
        }
    } else if x1 >= 0.0 {
        -0.5 * (-l * x1).exp() * (-l * (x2 - x1)).exp_m1()
    } else {
        -0.5 * (l * x1).exp_m1() - 0.5 * (-l * x2).exp_m1()
    }
}

/// Group proportions for one dimension together with their cumulative
/// boundaries partitioning `[0, 1]` into segments.
///
/// Proportions must be non-negative and sum to one; a zero-length segment is
/// degenerate but legal (its weight is exactly zero and `lookup` never
/// returns it).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDistribution {
    theta: Vec<f64>,
    boundaries: Vec<f64>,
}

impl SegmentDistribution {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::invalid("theta", "needs at least one segment"));
        }
        if theta.iter().any(|&t| !t.is_finite() || t < 0.0) {
            return Err(Error::invalid(
                "theta",
                format!("entries must be finite and non-negative, got {theta:?}"),
            ));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "theta",
                format!("entries must sum to 1, got {sum}"),
            ));
        }
        let mut boundaries = Vec::with_capacity(theta.len() + 1);
        boundaries.push(0.0);
        let mut acc = 0.0;
        for &t in &theta {
            acc += t;
            boundaries.push(acc);
        }
        *boundaries.last_mut().unwrap() = 1.0;
        Ok(SegmentDistribution { theta, boundaries })
    }

    /// Equal proportions `1/k`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        SegmentDistribution::new(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Cumulative boundaries `L_0 = 0, ..., L_K = 1`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Segment containing `u` under the half-open convention
    /// `[L_k, L_{k+1})`, with `u = 1` mapping to the last segment.
    pub fn lookup(&self, u: f64) -> usize {
        assert!((0.0..=1.0).contains(&u), "coordinate {u} outside [0, 1]");
        let idx = self.boundaries[1..].partition_point(|&b| b <= u);
        idx.min(self.k() - 1)
    }

    /// Unnormalised Laplace-kernel mass of segment `k` seen from `u`.
    pub fn segment_mass(&self, u: f64, k: usize, lambda: SmoothingParameter) -> f64 {
        let l = lambda.value();
        interval_mass(self.boundaries[k] - u, self.boundaries[k + 1] - u, l)
    }

    /// Normalised weight of segment `k` for coordinate `u`: the kernel mass
    /// of the segment divided by the kernel mass of the whole unit interval.
    pub fn segment_weight(&self, u: f64, k: usize, lambda: SmoothingParameter) -> f64 {
        self.segment_mass(u, k, lambda) / self.total_mass(u, lambda)
    }

    fn total_mass(&self, u: f64, lambda: SmoothingParameter) -> f64 {
        interval_mass(-u, 1.0 - u, lambda.value())
    }

    /// Normalised weights of all segments for coordinate `u`. The
    /// normalising mass is computed once per call, not per segment.
    pub fn weights(&self, u: f64, lambda: SmoothingParameter) -> Vec<f64> {
        assert!((0.0..=1.0).contains(&u), "coordinate {u} outside [0, 1]");
        let l = lambda.value();
        let den = self.total_mass(u, lambda);
        (0..self.k())
            .map(|k| interval_mass(self.boundaries[k] - u, self.boundaries[k + 1] - u, l) / den)
            .collect()
    }
}

/// Regular-grid partition of the unit square: one segment distribution per
/// dimension, both with the same number of groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    dim1: SegmentDistribution,
    dim2: SegmentDistribution,
}

impl Partition {
    pub fn new(dim1: SegmentDistribution, dim2: SegmentDistribution) -> Result<Self> {
        if dim1.k() != dim2.k() {
            return Err(Error::invalid(
                "partition",
                format!("dimension group counts differ: {} vs {}", dim1.k(), dim2.k()),
            ));
        }
        Ok(Partition { dim1, dim2 })
    }

    pub fn k(&self) -> usize {
        self.dim1.k()
    }

    pub fn dim1(&self) -> &SegmentDistribution {
        &self.dim1
    }

    pub fn dim2(&self) -> &SegmentDistribution {
        &self.dim2
    }
}

/// `K x K` matrix of Bernoulli rates, one per block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockIntensities {
    b: Array2<f64>,
}

impl BlockIntensities {
    pub fn new(b: Array2<f64>) -> Result<Self> {
        if b.nrows() != b.ncols() || b.nrows() == 0 {
            return Err(Error::invalid(
                "block intensities",
                format!("must be square and non-empty, got {}x{}", b.nrows(), b.ncols()),
            ));
        }
        if b.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::invalid(
                "block intensities",
                "entries must lie in [0, 1]",
            ));
        }
        Ok(BlockIntensities { b })
    }

    pub fn constant(k: usize, value: f64) -> Result<Self> {
        BlockIntensities::new(Array2::from_elem((k, k), value))
    }

    pub fn k(&self) -> usize {
        self.b.nrows()
    }

    pub fn get(&self, k1: usize, k2: usize) -> f64 {
        self.b[[k1, k2]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.b
    }

    pub(crate) fn set(&mut self, k1: usize, k2: usize, value: f64) {
        debug_assert!((0.0..=1.0).contains(&value));
        self.b[[k1, k2]] = value;
    }
}

/// Normalised weight of block `(k1, k2)` for coordinates `(u1, u2)`: the
/// product of the two per-dimension segment weights.
pub fn block_weight(
    u1: f64,
    u2: f64,
    p: &Partition,
    lambda: SmoothingParameter,
    k1: usize,
    k2: usize,
) -> f64 {
    p.dim1().segment_weight(u1, k1, lambda) * p.dim2().segment_weight(u2, k2, lambda)
}

/// Smoothed graphon intensity: the sum of all block intensities weighted by
/// their normalised block weights.
pub fn mixture_intensity(
    u1: f64,
    u2: f64,
    p: &Partition,
    b: &BlockIntensities,
    lambda: SmoothingParameter,
) -> f64 {
    let w1 = p.dim1().weights(u1, lambda);
    let w2 = p.dim2().weights(u2, lambda);
    let mut g = 0.0;
    for (k1, &a) in w1.iter().enumerate() {
        for (k2, &c) in w2.iter().enumerate() {
            g += a * c * b.get(k1, k2);
        }
    }
    g
}

/// Piecewise-constant graphon intensity: the rate of the block containing
/// `(u1, u2)`.
pub fn piecewise_intensity(u1: f64, u2: f64, p: &Partition, b: &BlockIntensities) -> f64 {
    b.get(p.dim1().lookup(u1), p.dim2().lookup(u2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    Smooth,
    Piecewise,
}

/// Evaluate the intensity on a `resolution x resolution` grid of cell
/// midpoints; cell `(a, b)` holds the intensity at
/// `((a + 1/2) / resolution, (b + 1/2) / resolution)`.
pub fn intensity_grid(
    p: &Partition,
    b: &BlockIntensities,
    lambda: SmoothingParameter,
    resolution: usize,
    mode: GridMode,
) -> Result<Array2<f64>> {
    if resolution < 2 {
        return Err(Error::invalid("resolution", "must be at least 2"));
    }
    let mid = |a: usize| (a as f64 + 0.5) / resolution as f64;
    let mut grid = Array2::zeros((resolution, resolution));
    match mode {
        GridMode::Piecewise => {
            for a in 0..resolution {
                for c in 0..resolution {
                    grid[[a, c]] = piecewise_intensity(mid(a), mid(c), p, b);
                }
            }
        }
        GridMode::Smooth => {
            // Weight vectors are shared across the row/column of the grid.
            let w1: Vec<Vec<f64>> = (0..resolution).map(|a| p.dim1().weights(mid(a), lambda)).collect();
            let w2: Vec<Vec<f64>> = (0..resolution).map(|c| p.dim2().weights(mid(c), lambda)).collect();
            for a in 0..resolution {
                for c in 0..resolution {
                    let mut g = 0.0;
                    for (k1, &x) in w1[a].iter().enumerate() {
                        for (k2, &y) in w2[c].iter().enumerate() {
                            g += x * y * b.get(k1, k2);
                        }
                    }
                    grid[[a, c]] = g;
                }
            }
        }
    }
    Ok(grid)
}

/// Write a grid as CSV, one grid row per line.
pub fn write_grid_csv<W: std::io::Write>(grid: &Array2<f64>, w: &mut W) -> std::io::Result<()> {
    for row in grid.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Write a grid as an ASCII "P2" PGM with pixel value `round(255 * (1 - g))`,
/// so darker pixels mark higher intensity.
pub fn write_grid_pgm<W: std::io::Write>(grid: &Array2<f64>, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "P2")?;
    writeln!(w, "{} {}", grid.ncols(), grid.nrows())?;
    writeln!(w, "255")?;
    for row in grid.outer_iter() {
        let line: Vec<String> = row
            .iter()
            .map(|&g| ((255.0 * (1.0 - g.clamp(0.0, 1.0))).round() as u32).to_string())
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Per-node segment weights for a whole coordinate vector in each dimension.
/// Samplers cache one of these per state so the normalising mass is computed
/// once per node, and refresh single rows when a coordinate update is
/// accepted.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl WeightTable {
    pub fn new(p: &Partition, lambda: SmoothingParameter, u1: &[f64], u2: &[f64]) -> Self {
        let k = p.k();
        let mut w1 = Array2::zeros((u1.len(), k));
        let mut w2 = Array2::zeros((u2.len(), k));
        for (i, &u) in u1.iter().enumerate() {
            for (kk, v) in p.dim1().weights(u, lambda).into_iter().enumerate() {
                w1[[i, kk]] = v;
            }
        }
        for (j, &u) in u2.iter().enumerate() {
            for (kk, v) in p.dim2().weights(u, lambda).into_iter().enumerate() {
                w2[[j, kk]] = v;
            }
        }
        WeightTable { w1, w2 }
    }

    /// Mixture intensity for the node pair `(i, j)` under `b`.
    pub fn intensity(&self, b: &BlockIntensities, i: usize, j: usize) -> f64 {
        let k = b.k();
        let mut g = 0.0;
        for k1 in 0..k {
            let wi = self.w1[[i, k1]];
            for k2 in 0..k {
                g += wi * self.w2[[j, k2]] * b.get(k1, k2);
            }
        }
        g
    }

    pub fn set_row1(&mut self, i: usize, w: &[f64]) {
        for (kk, &v) in w.iter().enumerate() {
            self.w1[[i, kk]] = v;
        }
    }

    pub fn set_row2(&mut self, j: usize, w: &[f64]) {
        for (kk, &v) in w.iter().enumerate() {
            self.w2[[j, kk]] = v;
        }
    }
}
