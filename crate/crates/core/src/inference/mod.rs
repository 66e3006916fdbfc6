//! MCMC posterior samplers: sufficient-count bookkeeping, Metropolis ratio
//! helpers shared by the update families, retained traces and posterior
//! predictive scoring.
//!
//! Every sampler draws each sweep's update family from its own RNG
//! substream keyed by `(seed, sweep, family)`, so traces are reproducible
//! bit for bit under a fixed seed.

mod isg;
mod lfsg;
mod mmsb;
mod sbm;

pub use isg::run_isg_sampler;
pub use lfsg::run_lfsg_sampler;
pub use mmsb::run_mmsb_sampler;
pub use sbm::run_sbm_sampler;

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::graphon::{ln_weight, BlockIntensities, Partition, SegmentDistribution, SmoothingParameter};
use crate::models::{Hyperparameters, ModelKind};
use crate::relational::{Cell, RelationalMatrix};

/// Update-family indices used in sweep substream keys.
pub(crate) mod family {
    pub const U: u64 = 0;
    pub const THETA: u64 = 1;
    pub const B: u64 = 2;
    pub const LABELS: u64 = 3;
    pub const LAMBDA: u64 = 4;
}

/// Label-occurrence and edge tallies over the training cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientCounts {
    /// `m1[i, k]`: training cells in row i with sender label k.
    pub m1: Array2<u64>,
    /// `m2[i, k]`: training cells in column i with receiver label k.
    pub m2: Array2<u64>,
    /// `n1[k1, k2]` / `n0[k1, k2]`: training edges / non-edges under the
    /// label pair.
    pub n1: Array2<u64>,
    pub n0: Array2<u64>,
}

impl SufficientCounts {
    pub fn zeros(n: usize, k: usize) -> Self {
        SufficientCounts {
            m1: Array2::zeros((n, k)),
            m2: Array2::zeros((n, k)),
            n1: Array2::zeros((k, k)),
            n0: Array2::zeros((k, k)),
        }
    }
}

/// Tally the sufficient counts from scratch; excluded and test cells
/// contribute nothing.
pub fn counts_from_labels(
    labels_s: &Array2<usize>,
    labels_r: &Array2<usize>,
    r: &RelationalMatrix,
    k: usize,
) -> Result<SufficientCounts> {
    let n = r.n();
    if labels_s.dim() != (n, n) || labels_r.dim() != (n, n) {
        return Err(Error::Data(format!(
            "label arrays must be {n}x{n}, got {:?} and {:?}",
            labels_s.dim(),
            labels_r.dim()
        )));
    }
    let mut counts = SufficientCounts::zeros(n, k);
    for i in 0..n {
        for j in 0..n {
            if r.mask(i, j) != Cell::Train {
                continue;
            }
            let (s, rr) = (labels_s[[i, j]], labels_r[[i, j]]);
            if s >= k || rr >= k {
                return Err(Error::Data(format!(
                    "label out of range at cell ({i}, {j}): ({s}, {rr}) with K = {k}"
                )));
            }
            counts.m1[[i, s]] += 1;
            counts.m2[[j, rr]] += 1;
            if r.entry(i, j) == 1 {
                counts.n1[[s, rr]] += 1;
            } else {
                counts.n0[[s, rr]] += 1;
            }
        }
    }
    Ok(counts)
}

/// Sampler configuration shared by all model families. The `update_*`
/// flags freeze individual update families (useful for oracle checks and
/// diagnostics); `free_b_entries` restricts the ISG intensity update to a
/// subset of blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub model: ModelKind,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Beta independence-proposal shape for coordinate updates.
    pub alpha_u: f64,
    pub beta_u: f64,
    /// Logit-scale random-walk step for the ISG intensity update.
    pub sigma_b: f64,
    pub update_u: bool,
    pub update_theta: bool,
    pub update_b: bool,
    pub update_labels: bool,
    pub update_lambda: bool,
    pub free_b_entries: Option<Vec<(usize, usize)>>,
}

impl SamplerConfig {
    pub fn new(model: ModelKind, seed: u64) -> Self {
        SamplerConfig {
            model,
            iterations: 2000,
            burn_in: 1000,
            thin: 5,
            seed,
            alpha_u: 1.0,
            beta_u: 1.0,
            sigma_b: 0.2,
            update_u: true,
            update_theta: true,
            update_b: true,
            update_labels: true,
            update_lambda: true,
            free_b_entries: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(
                "burn_in",
                format!("must be below iterations ({} >= {})", self.burn_in, self.iterations),
            ));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin", "must be at least 1"));
        }
        for (name, v) in [
            ("alpha_u", self.alpha_u),
            ("beta_u", self.beta_u),
            ("sigma_b", self.sigma_b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid {
                    field: "sampler",
                    msg: format!("{name} must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Number of retained samples: `floor((T - burn_in) / thin)`.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// Whether sweep `t` (1-based) is retained.
    pub fn retains(&self, t: usize) -> bool {
        t > self.burn_in && (t - self.burn_in) % self.thin == 0
    }
}

/// Proposed/accepted counters per update family.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcceptanceStats {
    counters: BTreeMap<String, (u64, u64)>,
}

impl AcceptanceStats {
    pub fn record(&mut self, family: &str, accepted: bool) {
        let entry = self.counters.entry(family.to_owned()).or_insert((0, 0));
        entry.0 += 1;
        entry.1 += accepted as u64;
    }

    pub fn rate(&self, family: &str) -> Option<f64> {
        self.counters
            .get(family)
            .map(|&(proposed, accepted)| accepted as f64 / proposed as f64)
    }

    pub fn families(&self) -> impl Iterator<Item = (&str, u64, u64)> {
        self.counters
            .iter()
            .map(|(name, &(p, a))| (name.as_str(), p, a))
    }

    /// Key-value text report: one `family rate` line per family.
    pub fn write_summary<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (name, proposed, accepted) in self.families() {
            writeln!(w, "{name} {}", accepted as f64 / proposed as f64)?;
        }
        Ok(())
    }
}

/// One retained posterior sample. Fields that a model family does not have
/// stay `None`/empty: the SBM stores node labels, the MMSB stores the
/// membership matrix, the coordinate models store `u1`/`u2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub sweep: usize,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub b: Array2<f64>,
    pub lambda: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub z1: Option<Vec<usize>>,
    pub z2: Option<Vec<usize>>,
    pub f: Option<Array2<f64>>,
    pub log_likelihood: f64,
}

/// Retained post-burn-in samples plus pooled label histograms and
/// acceptance counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub model: ModelKind,
    pub n: usize,
    pub k: usize,
    pub samples: Vec<TraceSample>,
    pub test_pairs: Vec<(usize, usize)>,
    /// Pooled sender/receiver label counts over retained sweeps (n x K),
    /// present for label-carrying models (LFSG, MMSB).
    pub label_counts_s: Option<Array2<u64>>,
    pub label_counts_r: Option<Array2<u64>>,
    pub acceptance: AcceptanceStats,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV export: one row per retained sample with columns
    /// `sweep, lambda, theta1 (K), theta2 (K), B row-major (K^2), loglik`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut header = vec!["sweep".to_owned(), "lambda".to_owned()];
        for d in 1..=2 {
            for k in 1..=self.k {
                header.push(format!("theta{d}_{k}"));
            }
        }
        for k1 in 1..=self.k {
            for k2 in 1..=self.k {
                header.push(format!("b_{k1}_{k2}"));
            }
        }
        header.push("loglik".to_owned());
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.sweep.to_string(), s.lambda.to_string()];
            row.extend(s.theta1.iter().map(|v| v.to_string()));
            row.extend(s.theta2.iter().map(|v| v.to_string()));
            row.extend(s.b.iter().map(|v| v.to_string()));
            row.push(s.log_likelihood.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// CSV export of the per-sample coordinates: `sweep, u1 (n), u2 (n)`.
    /// Only meaningful for the coordinate models.
    pub fn write_coordinates_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut header = vec!["sweep".to_owned()];
        for d in 1..=2 {
            for i in 0..self.n {
                header.push(format!("u{d}_{i}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.sweep.to_string()];
            row.extend(s.u1.iter().map(|v| v.to_string()));
            row.extend(s.u2.iter().map(|v| v.to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Mean posterior-predictive edge score for each requested pair: the
/// per-sample intensity (mixture intensity for ISG/LFSG, the labelled block
/// rate for the SBM, `F_i' B F_j` for the MMSB) averaged over retained
/// samples.
pub fn posterior_predictive(trace: &Trace, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::Data("trace has no retained samples".into()));
    }
    let mut scores = vec![0.0; pairs.len()];
    for sample in &trace.samples {
        accumulate_sample_scores(trace.model, sample, pairs, &mut scores)?;
    }
    let count = trace.len() as f64;
    for s in &mut scores {
        *s /= count;
    }
    Ok(scores)
}

fn accumulate_sample_scores(
    model: ModelKind,
    sample: &TraceSample,
    pairs: &[(usize, usize)],
    scores: &mut [f64],
) -> Result<()> {
    match model {
        ModelKind::Isg | ModelKind::Lfsg => {
            let partition = Partition::new(
                SegmentDistribution::new(sample.theta1.clone())?,
                SegmentDistribution::new(sample.theta2.clone())?,
            )?;
            let lambda = SmoothingParameter::new(sample.lambda)?;
            let b = BlockIntensities::new(sample.b.clone())?;
            let k = b.k();
            for (out, &(i, j)) in scores.iter_mut().zip(pairs) {
                let w1 = partition.dim1().weights(sample.u1[i], lambda);
                let w2 = partition.dim2().weights(sample.u2[j], lambda);
                let mut g = 0.0;
                for k1 in 0..k {
                    for k2 in 0..k {
                        g += w1[k1] * w2[k2] * b.get(k1, k2);
                    }
                }
                *out += g;
            }
        }
        ModelKind::Sbm => {
            let (z1, z2) = match (&sample.z1, &sample.z2) {
                (Some(z1), Some(z2)) => (z1, z2),
                _ => return Err(Error::Data("SBM trace sample lacks node labels".into())),
            };
            for (out, &(i, j)) in scores.iter_mut().zip(pairs) {
                *out += sample.b[[z1[i], z2[j]]];
            }
        }
        ModelKind::Mmsb => {
            let f = sample
                .f
                .as_ref()
                .ok_or_else(|| Error::Data("MMSB trace sample lacks memberships".into()))?;
            let k = sample.b.nrows();
            for (out, &(i, j)) in scores.iter_mut().zip(pairs) {
                let mut g = 0.0;
                for k1 in 0..k {
                    for k2 in 0..k {
                        g += f[[i, k1]] * sample.b[[k1, k2]] * f[[j, k2]];
                    }
                }
                *out += g;
            }
        }
    }
    Ok(())
}

/// Average the smooth intensity grid over the retained samples of a trace.
pub fn posterior_mean_grid(trace: &Trace, resolution: usize) -> Result<Array2<f64>> {
    if trace.is_empty() {
        return Err(Error::Data("trace has no retained samples".into()));
    }
    let mut acc: Option<Array2<f64>> = None;
    for sample in &trace.samples {
        let partition = Partition::new(
            SegmentDistribution::new(sample.theta1.clone())?,
            SegmentDistribution::new(sample.theta2.clone())?,
        )?;
        let b = BlockIntensities::new(sample.b.clone())?;
        let lambda = SmoothingParameter::new(sample.lambda)?;
        let grid = crate::graphon::intensity_grid(
            &partition,
            &b,
            lambda,
            resolution,
            crate::graphon::GridMode::Smooth,
        )?;
        acc = Some(match acc {
            None => grid,
            Some(mut a) => {
                a += &grid;
                a
            }
        });
    }
    let mut grid = acc.unwrap();
    grid /= trace.len() as f64;
    Ok(grid)
}

/// Log acceptance ratio for one coordinate under the Beta independence
/// proposal: the Beta density ratio `Be(u)/Be(u*)` times the product of
/// floored weight ratios raised to the label counts.
pub fn u_log_acceptance(
    current_weights: &[f64],
    proposed_weights: &[f64],
    m_counts: &[u64],
    u_current: f64,
    u_proposed: f64,
    alpha_u: f64,
    beta_u: f64,
) -> f64 {
    let mut acc = 0.0;
    if alpha_u != 1.0 {
        acc += (alpha_u - 1.0) * (u_current.ln() - u_proposed.ln());
    }
    if beta_u != 1.0 {
        acc += (beta_u - 1.0) * ((1.0 - u_current).ln() - (1.0 - u_proposed).ln());
    }
    for ((&wc, &wp), &m) in current_weights
        .iter()
        .zip(proposed_weights)
        .zip(m_counts)
    {
        if m > 0 {
            acc += m as f64 * (ln_weight(wp) - ln_weight(wc));
        }
    }
    acc
}

/// Log of the product over nodes and segments of proposed/current weight
/// ratios raised to the label counts. Drives the segment-distribution and
/// smoothing-parameter updates.
pub fn weight_power_log_ratio(
    current: &Array2<f64>,
    proposed: &Array2<f64>,
    m_counts: &Array2<u64>,
) -> f64 {
    debug_assert_eq!(current.dim(), proposed.dim());
    debug_assert_eq!(current.dim(), m_counts.dim());
    let mut acc = 0.0;
    for ((&wc, &wp), &m) in current.iter().zip(proposed).zip(m_counts) {
        if m > 0 {
            acc += m as f64 * (ln_weight(wp) - ln_weight(wc));
        }
    }
    acc
}

/// Unnormalised conditional over one hidden label: prior weight times the
/// Bernoulli likelihood of the observed cell against the partner label.
/// `partner_rates[k]` must hold the block rate linking label `k` with the
/// partner's current label.
pub fn label_conditional(weights: &[f64], partner_rates: &[f64], observed: u8) -> Vec<f64> {
    weights
        .iter()
        .zip(partner_rates)
        .map(|(&w, &b)| {
            let lik = if observed == 1 { b } else { 1.0 - b };
            w.max(crate::graphon::WEIGHT_FLOOR) * lik
        })
        .collect()
}

/// Conjugate block-intensity refresh: each entry drawn from
/// `Beta(alpha0 + n1, beta0 + n0)` independently.
pub fn update_b<R: Rng>(
    counts: &SufficientCounts,
    h: &Hyperparameters,
    rng: &mut R,
) -> Result<BlockIntensities> {
    let k = counts.n1.nrows();
    let mut b = Array2::zeros((k, k));
    for k1 in 0..k {
        for k2 in 0..k {
            let a = h.alpha0 + counts.n1[[k1, k2]] as f64;
            let bb = h.beta0 + counts.n0[[k1, k2]] as f64;
            b[[k1, k2]] = Beta::new(a, bb)
                .map_err(|e| Error::Numerical(format!("Beta({a}, {bb}): {e}")))?
                .sample(rng);
        }
    }
    BlockIntensities::new(b)
}

/// Standard Metropolis accept step on a log ratio.
pub(crate) fn mh_accept<R: Rng>(log_ratio: f64, rng: &mut R) -> bool {
    debug_assert!(!log_ratio.is_nan(), "NaN Metropolis ratio");
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

pub(crate) fn ln_bernoulli(observed: u8, p: f64) -> f64 {
    if observed == 1 {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}
