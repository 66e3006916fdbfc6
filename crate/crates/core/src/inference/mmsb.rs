//! MMSB Gibbs sampler: pairwise labels from their categorical
//! conditionals with the per-node membership rows as priors, membership
//! rows by Dirichlet conjugacy, block intensities by Beta conjugacy.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{sample_categorical, sample_dirichlet, sample_mmsb_prior, Hyperparameters, ModelKind};
use crate::relational::RelationalMatrix;
use crate::rng::{phase, substream};

use super::{
    counts_from_labels, family, ln_bernoulli, AcceptanceStats, SamplerConfig, SufficientCounts,
    Trace, TraceSample,
};

struct MmsbChain<'a> {
    r: &'a RelationalMatrix,
    h: &'a Hyperparameters,
    f: Array2<f64>,
    b: Array2<f64>,
    labels_s: Array2<usize>,
    labels_r: Array2<usize>,
    counts: SufficientCounts,
    train_cells: Vec<(usize, usize)>,
}

impl<'a> MmsbChain<'a> {
    fn new(r: &'a RelationalMatrix, h: &'a Hyperparameters, cfg: &SamplerConfig) -> Result<Self> {
        let n = r.n();
        let k = h.k();
        let state = sample_mmsb_prior(h, n, &mut substream(cfg.seed, &[phase::PRIOR]))?;
        let mut init_rng = substream(cfg.seed, &[phase::INIT_LABELS]);
        let mut labels_s = Array2::zeros((n, n));
        let mut labels_r = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                labels_s[[i, j]] = sample_categorical(state.f.row(i).as_slice().unwrap(), &mut init_rng);
                labels_r[[i, j]] = sample_categorical(state.f.row(j).as_slice().unwrap(), &mut init_rng);
            }
        }
        let counts = counts_from_labels(&labels_s, &labels_r, r, k)?;
        Ok(MmsbChain {
            r,
            h,
            f: state.f,
            b: state.b.as_array().clone(),
            labels_s,
            labels_r,
            counts,
            train_cells: r.train_pairs(),
        })
    }

    fn resample_labels<R: Rng>(&mut self, rng: &mut R) {
        let k = self.h.k();
        let mut rates = vec![0.0; k];
        for &(i, j) in &self.train_cells {
            let observed = self.r.entry(i, j);
            let partner = self.labels_r[[i, j]];
            for (kk, rate) in rates.iter_mut().enumerate() {
                *rate = self.b[[kk, partner]];
            }
            let un = super::label_conditional(self.f.row(i).as_slice().unwrap(), &rates, observed);
            let new = sample_categorical(&un, rng);
            let old = self.labels_s[[i, j]];
            if new != old {
                self.labels_s[[i, j]] = new;
                self.counts.m1[[i, old]] -= 1;
                self.counts.m1[[i, new]] += 1;
                let tally = if observed == 1 { &mut self.counts.n1 } else { &mut self.counts.n0 };
                tally[[old, partner]] -= 1;
                tally[[new, partner]] += 1;
            }
        }
        for &(i, j) in &self.train_cells {
            let observed = self.r.entry(i, j);
            let partner = self.labels_s[[i, j]];
            for (kk, rate) in rates.iter_mut().enumerate() {
                *rate = self.b[[partner, kk]];
            }
            let un = super::label_conditional(self.f.row(j).as_slice().unwrap(), &rates, observed);
            let new = sample_categorical(&un, rng);
            let old = self.labels_r[[i, j]];
            if new != old {
                self.labels_r[[i, j]] = new;
                self.counts.m2[[j, old]] -= 1;
                self.counts.m2[[j, new]] += 1;
                let tally = if observed == 1 { &mut self.counts.n1 } else { &mut self.counts.n0 };
                tally[[partner, old]] -= 1;
                tally[[partner, new]] += 1;
            }
        }
    }

    /// Membership rows are conjugate: node i's row gathers its sender
    /// counts (row cells) and receiver counts (column cells).
    fn resample_f<R: Rng>(&mut self, rng: &mut R) {
        let k = self.h.k();
        for i in 0..self.r.n() {
            let mut post = self.h.alpha_vec.clone();
            for kk in 0..k {
                post[kk] += (self.counts.m1[[i, kk]] + self.counts.m2[[i, kk]]) as f64;
            }
            for (kk, v) in sample_dirichlet(&post, rng).into_iter().enumerate() {
                self.f[[i, kk]] = v;
            }
        }
    }

    fn resample_b<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        self.b = super::update_b(&self.counts, self.h, rng)?.as_array().clone();
        Ok(())
    }

    fn train_log_likelihood(&self) -> f64 {
        let mut total = 0.0;
        for &(i, j) in &self.train_cells {
            total += ln_bernoulli(self.r.entry(i, j), self.b[[self.labels_s[[i, j]], self.labels_r[[i, j]]]]);
        }
        total
    }

    fn retain(&self, sweep: usize) -> TraceSample {
        // the trace's theta columns hold the average membership profile
        let k = self.h.k();
        let n = self.r.n() as f64;
        let mean_f: Vec<f64> = (0..k).map(|kk| self.f.column(kk).sum() / n).collect();
        TraceSample {
            sweep,
            theta1: mean_f.clone(),
            theta2: mean_f,
            b: self.b.clone(),
            lambda: 0.0,
            u1: Vec::new(),
            u2: Vec::new(),
            z1: None,
            z2: None,
            f: Some(self.f.clone()),
            log_likelihood: self.train_log_likelihood(),
        }
    }

    #[cfg(debug_assertions)]
    fn assert_counts_consistent(&self) {
        let fresh = counts_from_labels(&self.labels_s, &self.labels_r, self.r, self.h.k())
            .expect("labels in range");
        assert_eq!(fresh, self.counts, "incremental counts drifted");
    }
}

/// Run the MMSB Gibbs sampler and collect the retained trace.
pub fn run_mmsb_sampler(
    r: &RelationalMatrix,
    h: &Hyperparameters,
    cfg: &SamplerConfig,
) -> Result<Trace> {
    cfg.validate()?;
    if cfg.model != ModelKind::Mmsb {
        return Err(Error::invalid(
            "model",
            format!("MMSB sampler called with model {}", cfg.model),
        ));
    }
    let mut chain = MmsbChain::new(r, h, cfg)?;
    let n = r.n();
    let k = h.k();
    let mut samples = Vec::with_capacity(cfg.retained());
    let mut pooled_s: Array2<u64> = Array2::zeros((n, k));
    let mut pooled_r: Array2<u64> = Array2::zeros((n, k));
    for t in 1..=cfg.iterations {
        let sweep = t as u64;
        if cfg.update_labels {
            chain.resample_labels(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::LABELS]));
        }
        if cfg.update_theta {
            chain.resample_f(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::THETA]));
        }
        if cfg.update_b {
            chain.resample_b(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::B]))?;
        }
        #[cfg(debug_assertions)]
        if t % 100 == 0 {
            chain.assert_counts_consistent();
        }
        if cfg.retains(t) {
            samples.push(chain.retain(t));
            pooled_s += &chain.counts.m1;
            pooled_r += &chain.counts.m2;
        }
    }
    Ok(Trace {
        model: ModelKind::Mmsb,
        n,
        k,
        samples,
        test_pairs: r.test_pairs(),
        label_counts_s: Some(pooled_s),
        label_counts_r: Some(pooled_r),
        acceptance: AcceptanceStats::default(),
    })
}
