//! SBM Gibbs sampler: node labels from their categorical conditionals,
//! segment distributions by Dirichlet conjugacy, block intensities by
//! Beta conjugacy.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{sample_categorical, sample_dirichlet, sample_prior, Hyperparameters, ModelKind};
use crate::relational::RelationalMatrix;
use crate::rng::{phase, substream};

use super::{family, ln_bernoulli, AcceptanceStats, SamplerConfig, Trace, TraceSample};

struct SbmChain<'a> {
    r: &'a RelationalMatrix,
    h: &'a Hyperparameters,
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    b: Array2<f64>,
    z1: Vec<usize>,
    z2: Vec<usize>,
    train_cols: Vec<Vec<usize>>,
    train_rows: Vec<Vec<usize>>,
}

impl<'a> SbmChain<'a> {
    fn new(r: &'a RelationalMatrix, h: &'a Hyperparameters, cfg: &SamplerConfig) -> Result<Self> {
        let n = r.n();
        let state = sample_prior(h, n, ModelKind::Sbm, &mut substream(cfg.seed, &[phase::PRIOR]))?;
        let z1: Vec<usize> = state.u1.iter().map(|&u| state.partition.dim1().lookup(u)).collect();
        let z2: Vec<usize> = state.u2.iter().map(|&u| state.partition.dim2().lookup(u)).collect();
        let mut train_cols = vec![Vec::new(); n];
        let mut train_rows = vec![Vec::new(); n];
        for (i, j) in r.train_pairs() {
            train_cols[i].push(j);
            train_rows[j].push(i);
        }
        Ok(SbmChain {
            r,
            h,
            theta1: state.partition.dim1().theta().to_vec(),
            theta2: state.partition.dim2().theta().to_vec(),
            b: state.b.as_array().clone(),
            z1,
            z2,
            train_cols,
            train_rows,
        })
    }

    fn k(&self) -> usize {
        self.h.k()
    }

    fn sample_log_conditional<R: Rng>(logits: &mut [f64], rng: &mut R) -> usize {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in logits.iter_mut() {
            *v = (*v - max).exp();
        }
        sample_categorical(logits, rng)
    }

    fn resample_labels<R: Rng>(&mut self, rng: &mut R) {
        let k = self.k();
        let mut logits = vec![0.0; k];
        for i in 0..self.r.n() {
            for (kk, l) in logits.iter_mut().enumerate() {
                *l = self.theta1[kk].max(crate::graphon::WEIGHT_FLOOR).ln();
                for &j in &self.train_cols[i] {
                    *l += ln_bernoulli(self.r.entry(i, j), self.b[[kk, self.z2[j]]]);
                }
            }
            self.z1[i] = Self::sample_log_conditional(&mut logits, rng);
        }
        for j in 0..self.r.n() {
            for (kk, l) in logits.iter_mut().enumerate() {
                *l = self.theta2[kk].max(crate::graphon::WEIGHT_FLOOR).ln();
                for &i in &self.train_rows[j] {
                    *l += ln_bernoulli(self.r.entry(i, j), self.b[[self.z1[i], kk]]);
                }
            }
            self.z2[j] = Self::sample_log_conditional(&mut logits, rng);
        }
    }

    fn resample_theta<R: Rng>(&mut self, rng: &mut R) {
        let k = self.k();
        let mut post1 = self.h.alpha_vec.clone();
        let mut post2 = self.h.alpha_vec.clone();
        for &z in &self.z1 {
            post1[z] += 1.0;
        }
        for &z in &self.z2 {
            post2[z] += 1.0;
        }
        self.theta1 = sample_dirichlet(&post1, rng);
        self.theta2 = sample_dirichlet(&post2, rng);
        debug_assert_eq!(self.theta1.len(), k);
    }

    fn resample_b<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let k = self.k();
        let mut counts = super::SufficientCounts::zeros(self.r.n(), k);
        for (i, cols) in self.train_cols.iter().enumerate() {
            for &j in cols {
                if self.r.entry(i, j) == 1 {
                    counts.n1[[self.z1[i], self.z2[j]]] += 1;
                } else {
                    counts.n0[[self.z1[i], self.z2[j]]] += 1;
                }
            }
        }
        self.b = super::update_b(&counts, self.h, rng)?.as_array().clone();
        Ok(())
    }

    fn train_log_likelihood(&self) -> f64 {
        let mut total = 0.0;
        for (i, cols) in self.train_cols.iter().enumerate() {
            for &j in cols {
                total += ln_bernoulli(self.r.entry(i, j), self.b[[self.z1[i], self.z2[j]]]);
            }
        }
        total
    }

    fn retain(&self, sweep: usize) -> TraceSample {
        TraceSample {
            sweep,
            theta1: self.theta1.clone(),
            theta2: self.theta2.clone(),
            b: self.b.clone(),
            lambda: 0.0,
            u1: Vec::new(),
            u2: Vec::new(),
            z1: Some(self.z1.clone()),
            z2: Some(self.z2.clone()),
            f: None,
            log_likelihood: self.train_log_likelihood(),
        }
    }
}

/// Run the SBM Gibbs sampler and collect the retained trace.
pub fn run_sbm_sampler(
    r: &RelationalMatrix,
    h: &Hyperparameters,
    cfg: &SamplerConfig,
) -> Result<Trace> {
    cfg.validate()?;
    if cfg.model != ModelKind::Sbm {
        return Err(Error::invalid(
            "model",
            format!("SBM sampler called with model {}", cfg.model),
        ));
    }
    let mut chain = SbmChain::new(r, h, cfg)?;
    let mut samples = Vec::with_capacity(cfg.retained());
    for t in 1..=cfg.iterations {
        let sweep = t as u64;
        if cfg.update_labels {
            chain.resample_labels(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::LABELS]));
        }
        if cfg.update_theta {
            chain.resample_theta(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::THETA]));
        }
        if cfg.update_b {
            chain.resample_b(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::B]))?;
        }
        if cfg.retains(t) {
            samples.push(chain.retain(t));
        }
    }
    Ok(Trace {
        model: ModelKind::Sbm,
        n: r.n(),
        k: h.k(),
        samples,
        test_pairs: r.test_pairs(),
        label_counts_s: None,
        label_counts_r: None,
        acceptance: AcceptanceStats::default(),
    })
}
