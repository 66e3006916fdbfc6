//! LFSG posterior sampler. Sweep order: coordinates, segment
//! distributions, block intensities, hidden labels, smoothing parameter.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::error::Result;
use crate::graphon::{Partition, SegmentDistribution, SmoothingParameter, WeightTable};
use crate::models::{sample_categorical, sample_dirichlet, sample_prior, Hyperparameters, LatentState, ModelKind};
use crate::relational::RelationalMatrix;
use crate::rng::{phase, substream};

use super::{
    counts_from_labels, family, ln_bernoulli, mh_accept, u_log_acceptance,
    weight_power_log_ratio, AcceptanceStats, SamplerConfig, SufficientCounts, Trace, TraceSample,
};

struct LfsgChain<'a> {
    r: &'a RelationalMatrix,
    h: &'a Hyperparameters,
    cfg: &'a SamplerConfig,
    state: LatentState,
    labels_s: Array2<usize>,
    labels_r: Array2<usize>,
    counts: SufficientCounts,
    table: WeightTable,
    train_cells: Vec<(usize, usize)>,
    stats: AcceptanceStats,
}

impl<'a> LfsgChain<'a> {
    fn new(r: &'a RelationalMatrix, h: &'a Hyperparameters, cfg: &'a SamplerConfig) -> Result<Self> {
        let n = r.n();
        let k = h.k();
        let state = sample_prior(h, n, ModelKind::Lfsg, &mut substream(cfg.seed, &[phase::PRIOR]))?;
        let table = WeightTable::new(&state.partition, state.lambda, &state.u1, &state.u2);

        // labels start at their prior given the coordinates
        let mut init_rng = substream(cfg.seed, &[phase::INIT_LABELS]);
        let mut labels_s = Array2::zeros((n, n));
        let mut labels_r = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                labels_s[[i, j]] = sample_categorical(table.w1.row(i).as_slice().unwrap(), &mut init_rng);
                labels_r[[i, j]] = sample_categorical(table.w2.row(j).as_slice().unwrap(), &mut init_rng);
            }
        }
        let counts = counts_from_labels(&labels_s, &labels_r, r, k)?;
        Ok(LfsgChain {
            r,
            h,
            cfg,
            state,
            labels_s,
            labels_r,
            counts,
            table,
            train_cells: r.train_pairs(),
            stats: AcceptanceStats::default(),
        })
    }

    fn update_u<R: Rng>(&mut self, rng: &mut R) {
        let proposal = Beta::new(self.cfg.alpha_u, self.cfg.beta_u).expect("valid proposal");
        for i in 0..self.r.n() {
            let u_star = proposal.sample(rng);
            let wp = self.state.partition.dim1().weights(u_star, self.state.lambda);
            let log_a = u_log_acceptance(
                self.table.w1.row(i).as_slice().unwrap(),
                &wp,
                self.counts.m1.row(i).as_slice().unwrap(),
                self.state.u1[i],
                u_star,
                self.cfg.alpha_u,
                self.cfg.beta_u,
            );
            let ok = mh_accept(log_a, rng);
            self.stats.record("u", ok);
            if ok {
                self.state.u1[i] = u_star;
                self.table.set_row1(i, &wp);
            }

            let u_star = proposal.sample(rng);
            let wp = self.state.partition.dim2().weights(u_star, self.state.lambda);
            let log_a = u_log_acceptance(
                self.table.w2.row(i).as_slice().unwrap(),
                &wp,
                self.counts.m2.row(i).as_slice().unwrap(),
                self.state.u2[i],
                u_star,
                self.cfg.alpha_u,
                self.cfg.beta_u,
            );
            let ok = mh_accept(log_a, rng);
            self.stats.record("u", ok);
            if ok {
                self.state.u2[i] = u_star;
                self.table.set_row2(i, &wp);
            }
        }
    }

    fn weight_rows(seg: &SegmentDistribution, us: &[f64], lambda: SmoothingParameter) -> Array2<f64> {
        let mut rows = Array2::zeros((us.len(), seg.k()));
        for (i, &u) in us.iter().enumerate() {
            for (k, w) in seg.weights(u, lambda).into_iter().enumerate() {
                rows[[i, k]] = w;
            }
        }
        rows
    }

    fn update_theta<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        // dimension 1
        let seg_star = SegmentDistribution::new(sample_dirichlet(&self.h.alpha_vec, rng))?;
        let wp = Self::weight_rows(&seg_star, &self.state.u1, self.state.lambda);
        let log_a = weight_power_log_ratio(&self.table.w1, &wp, &self.counts.m1);
        let ok = mh_accept(log_a, rng);
        self.stats.record("theta", ok);
        if ok {
            self.state.partition = Partition::new(seg_star, self.state.partition.dim2().clone())?;
            self.table.w1 = wp;
        }

        // dimension 2
        let seg_star = SegmentDistribution::new(sample_dirichlet(&self.h.alpha_vec, rng))?;
        let wp = Self::weight_rows(&seg_star, &self.state.u2, self.state.lambda);
        let log_a = weight_power_log_ratio(&self.table.w2, &wp, &self.counts.m2);
        let ok = mh_accept(log_a, rng);
        self.stats.record("theta", ok);
        if ok {
            self.state.partition = Partition::new(self.state.partition.dim1().clone(), seg_star)?;
            self.table.w2 = wp;
        }
        Ok(())
    }

    fn refresh_b<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        self.state.b = super::update_b(&self.counts, self.h, rng)?;
        Ok(())
    }

    /// Resample every sender label, then every receiver label, from their
    /// exact conditionals, maintaining the sufficient counts in place.
    fn resample_labels<R: Rng>(&mut self, rng: &mut R) {
        let k = self.h.k();
        let mut rates = vec![0.0; k];
        for &(i, j) in &self.train_cells {
            let observed = self.r.entry(i, j);
            let partner = self.labels_r[[i, j]];
            for (kk, rate) in rates.iter_mut().enumerate() {
                *rate = self.state.b.get(kk, partner);
            }
            let un = super::label_conditional(self.table.w1.row(i).as_slice().unwrap(), &rates, observed);
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
                *rate = self.state.b.get(partner, kk);
            }
            let un = super::label_conditional(self.table.w2.row(j).as_slice().unwrap(), &rates, observed);
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

    fn update_lambda<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        // proposal equals the prior, so prior and proposal terms cancel
        let lambda_star = Gamma::new(self.h.lambda_shape, 1.0 / self.h.lambda_rate)
            .expect("valid gamma parameters")
            .sample(rng)
            .max(f64::MIN_POSITIVE);
        let lambda_star = SmoothingParameter::new(lambda_star)?;
        let w1p = Self::weight_rows(self.state.partition.dim1(), &self.state.u1, lambda_star);
        let w2p = Self::weight_rows(self.state.partition.dim2(), &self.state.u2, lambda_star);
        let log_a = weight_power_log_ratio(&self.table.w1, &w1p, &self.counts.m1)
            + weight_power_log_ratio(&self.table.w2, &w2p, &self.counts.m2);
        let ok = mh_accept(log_a, rng);
        self.stats.record("lambda", ok);
        if ok {
            self.state.lambda = lambda_star;
            self.table.w1 = w1p;
            self.table.w2 = w2p;
        }
        Ok(())
    }

    fn train_log_likelihood(&self) -> f64 {
        let mut total = 0.0;
        for &(i, j) in &self.train_cells {
            let p = self.state.b.get(self.labels_s[[i, j]], self.labels_r[[i, j]]);
            total += ln_bernoulli(self.r.entry(i, j), p);
        }
        total
    }

    fn retain(&self, sweep: usize) -> TraceSample {
        TraceSample {
            sweep,
            theta1: self.state.partition.dim1().theta().to_vec(),
            theta2: self.state.partition.dim2().theta().to_vec(),
            b: self.state.b.as_array().clone(),
            lambda: self.state.lambda.value(),
            u1: self.state.u1.clone(),
            u2: self.state.u2.clone(),
            z1: None,
            z2: None,
            f: None,
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

/// Run the LFSG sampler and collect the retained trace.
pub fn run_lfsg_sampler(
    r: &RelationalMatrix,
    h: &Hyperparameters,
    cfg: &SamplerConfig,
) -> Result<Trace> {
    cfg.validate()?;
    if cfg.model != ModelKind::Lfsg {
        return Err(crate::error::Error::invalid(
            "model",
            format!("LFSG sampler called with model {}", cfg.model),
        ));
    }
    let mut chain = LfsgChain::new(r, h, cfg)?;
    let n = r.n();
    let k = h.k();
    let mut samples = Vec::with_capacity(cfg.retained());
    let mut pooled_s: Array2<u64> = Array2::zeros((n, k));
    let mut pooled_r: Array2<u64> = Array2::zeros((n, k));

    for t in 1..=cfg.iterations {
        let sweep = t as u64;
        if cfg.update_u {
            chain.update_u(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::U]));
        }
        if cfg.update_theta {
            chain.update_theta(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::THETA]))?;
        }
        if cfg.update_b {
            chain.refresh_b(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::B]))?;
        }
        if cfg.update_labels {
            chain.resample_labels(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::LABELS]));
        }
        if cfg.update_lambda {
            chain.update_lambda(&mut substream(cfg.seed, &[phase::SWEEP, sweep, family::LAMBDA]))?;
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
        model: ModelKind::Lfsg,
        n,
        k,
        samples,
        test_pairs: r.test_pairs(),
        label_counts_s: Some(pooled_s),
        label_counts_r: Some(pooled_r),
        acceptance: chain.stats,
    })
}
