//! Generative processes for the SBM, ISG, LFSG and MMSB, shared priors and
//! state containers, and training log-likelihoods.

use std::io::BufRead;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::graphon::{
    ln_weight, BlockIntensities, Partition, SegmentDistribution, SmoothingParameter, WeightTable,
};
use crate::relational::{Cell, RelationalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Sbm,
    Isg,
    Lfsg,
    Mmsb,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sbm => "sbm",
            ModelKind::Isg => "isg",
            ModelKind::Lfsg => "lfsg",
            ModelKind::Mmsb => "mmsb",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sbm" => Ok(ModelKind::Sbm),
            "isg" => Ok(ModelKind::Isg),
            "lfsg" => Ok(ModelKind::Lfsg),
            "mmsb" => Ok(ModelKind::Mmsb),
            other => Err(Error::invalid(
                "model",
                format!("unknown model {other:?}; expected sbm, isg, lfsg or mmsb"),
            )),
        }
    }
}

/// Prior hyperparameters shared by every model family.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Beta shape parameters for the block intensities.
    pub alpha0: f64,
    pub beta0: f64,
    /// Dirichlet concentration for the segment distributions (length K).
    pub alpha_vec: Vec<f64>,
    /// Gamma prior on the smoothing parameter.
    pub lambda_shape: f64,
    pub lambda_rate: f64,
}

impl Hyperparameters {
    /// Flat defaults: Beta(1, 1) intensities, Dirichlet(1, ..., 1) segment
    /// proportions, Gamma(1, 1) smoothing.
    pub fn flat(k: usize) -> Result<Self> {
        Hyperparameters::new(1.0, 1.0, vec![1.0; k], 1.0, 1.0)
    }

    pub fn new(
        alpha0: f64,
        beta0: f64,
        alpha_vec: Vec<f64>,
        lambda_shape: f64,
        lambda_rate: f64,
    ) -> Result<Self> {
        let positive = |field: &'static str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be positive, got {v}")))
            }
        };
        positive("alpha0", alpha0)?;
        positive("beta0", beta0)?;
        positive("lambda_shape", lambda_shape)?;
        positive("lambda_rate", lambda_rate)?;
        if alpha_vec.is_empty() {
            return Err(Error::invalid("alpha_vec", "needs at least one group"));
        }
        for &a in &alpha_vec {
            positive("alpha_vec", a)?;
        }
        Ok(Hyperparameters {
            alpha0,
            beta0,
            alpha_vec,
            lambda_shape,
            lambda_rate,
        })
    }

    pub fn k(&self) -> usize {
        self.alpha_vec.len()
    }
}

/// Latent state of the coordinate-based models. Label fields are populated
/// by the matching generator or sampler: `z1`/`z2` for the SBM,
/// `labels_s`/`labels_r` for the LFSG, neither for the ISG.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub kind: ModelKind,
    pub partition: Partition,
    pub b: BlockIntensities,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub lambda: SmoothingParameter,
    pub z1: Option<Vec<usize>>,
    pub z2: Option<Vec<usize>>,
    pub labels_s: Option<Array2<usize>>,
    pub labels_r: Option<Array2<usize>>,
}

impl LatentState {
    pub fn n(&self) -> usize {
        self.u1.len()
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }
}

/// State of the MMSB baseline: independent per-node group distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsbState {
    /// n x K membership rows, each summing to one.
    pub f: Array2<f64>,
    pub b: BlockIntensities,
    pub labels_s: Option<Array2<usize>>,
    pub labels_r: Option<Array2<usize>>,
}

impl MmsbState {
    pub fn new(f: Array2<f64>, b: BlockIntensities) -> Result<Self> {
        if f.ncols() != b.k() {
            return Err(Error::invalid(
                "f",
                format!("has {} columns but B is {0}x{0}", b.k()),
            ));
        }
        for row in f.outer_iter() {
            let s: f64 = row.sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
                return Err(Error::invalid("f", "rows must be probability vectors"));
            }
        }
        Ok(MmsbState {
            f,
            b,
            labels_s: None,
            labels_r: None,
        })
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn k(&self) -> usize {
        self.b.k()
    }
}

/// Dirichlet draw via normalised Gamma variates; works for any runtime K.
pub(crate) fn sample_dirichlet<R: Rng>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("valid gamma shape").sample(rng))
            .collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            return draws.into_iter().map(|d| d / sum).collect();
        }
    }
}

/// Draw an index proportional to the (unnormalised, non-negative) weights.
pub(crate) fn sample_categorical<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    assert!(
        total > 0.0 && total.is_finite(),
        "categorical weights must have positive finite total, got {total}"
    );
    let mut t = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = k;
        }
        t -= w;
        if t < 0.0 {
            return k;
        }
    }
    last_positive
}

fn sample_beta<R: Rng>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    Beta::new(alpha, beta)
        .expect("valid beta parameters")
        .sample(rng)
}

/// Draw a full latent state from the prior: block intensities from
/// Beta(alpha0, beta0), segment distributions from Dirichlet(alpha),
/// coordinates uniform on the unit interval and the smoothing parameter
/// from its Gamma prior. Labels start unpopulated.
pub fn sample_prior<R: Rng>(
    h: &Hyperparameters,
    n: usize,
    kind: ModelKind,
    rng: &mut R,
) -> Result<LatentState> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let k = h.k();
    let mut b = Array2::zeros((k, k));
    for v in b.iter_mut() {
        *v = sample_beta(h.alpha0, h.beta0, rng);
    }
    let theta1 = SegmentDistribution::new(sample_dirichlet(&h.alpha_vec, rng))?;
    let theta2 = SegmentDistribution::new(sample_dirichlet(&h.alpha_vec, rng))?;
    let u1: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let u2: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let lambda_draw = Gamma::new(h.lambda_shape, 1.0 / h.lambda_rate)
        .expect("valid gamma parameters")
        .sample(rng);
    Ok(LatentState {
        kind,
        partition: Partition::new(theta1, theta2)?,
        b: BlockIntensities::new(b)?,
        u1,
        u2,
        lambda: SmoothingParameter::new(lambda_draw.max(f64::MIN_POSITIVE))?,
        z1: None,
        z2: None,
        labels_s: None,
        labels_r: None,
    })
}

/// Draw an MMSB state from the prior: membership rows from
/// Dirichlet(alpha), block intensities from Beta(alpha0, beta0).
pub fn sample_mmsb_prior<R: Rng>(h: &Hyperparameters, n: usize, rng: &mut R) -> Result<MmsbState> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let k = h.k();
    let mut f = Array2::zeros((n, k));
    for i in 0..n {
        for (kk, v) in sample_dirichlet(&h.alpha_vec, rng).into_iter().enumerate() {
            f[[i, kk]] = v;
        }
    }
    let mut b = Array2::zeros((k, k));
    for v in b.iter_mut() {
        *v = sample_beta(h.alpha0, h.beta0, rng);
    }
    MmsbState::new(f, BlockIntensities::new(b)?)
}

fn require_kind(state: &LatentState, want: ModelKind) -> Result<()> {
    if state.kind == want {
        Ok(())
    } else {
        Err(Error::invalid(
            "state",
            format!("generator for {want} called on a {} state", state.kind),
        ))
    }
}

/// SBM generation: node labels from the segment lookup of the coordinates,
/// then one Bernoulli per cell from the block rate. Records `z1`, `z2`.
pub fn generate_sbm<R: Rng>(state: &mut LatentState, rng: &mut R) -> Result<RelationalMatrix> {
    require_kind(state, ModelKind::Sbm)?;
    let n = state.n();
    let z1: Vec<usize> = state.u1.iter().map(|&u| state.partition.dim1().lookup(u)).collect();
    let z2: Vec<usize> = state.u2.iter().map(|&u| state.partition.dim2().lookup(u)).collect();
    let mut m = RelationalMatrix::new(n, false)?;
    for i in 0..n {
        for j in 0..n {
            let p = state.b.get(z1[i], z2[j]);
            m.set_entry(i, j, (rng.random::<f64>() < p) as u8);
        }
    }
    state.z1 = Some(z1);
    state.z2 = Some(z2);
    Ok(m)
}

/// ISG generation: one Bernoulli per cell from the mixture intensity.
pub fn generate_isg<R: Rng>(state: &mut LatentState, rng: &mut R) -> Result<RelationalMatrix> {
    require_kind(state, ModelKind::Isg)?;
    let n = state.n();
    let table = WeightTable::new(&state.partition, state.lambda, &state.u1, &state.u2);
    let mut m = RelationalMatrix::new(n, false)?;
    for i in 0..n {
        for j in 0..n {
            let g = table.intensity(&state.b, i, j);
            m.set_entry(i, j, (rng.random::<f64>() < g) as u8);
        }
    }
    Ok(m)
}

/// LFSG generation: per-cell hidden sender/receiver labels from the
/// coordinate weight vectors, then one Bernoulli from the labelled block
/// rate. Records `labels_s`, `labels_r`.
pub fn generate_lfsg<R: Rng>(state: &mut LatentState, rng: &mut R) -> Result<RelationalMatrix> {
    require_kind(state, ModelKind::Lfsg)?;
    let n = state.n();
    let table = WeightTable::new(&state.partition, state.lambda, &state.u1, &state.u2);
    let mut labels_s = Array2::zeros((n, n));
    let mut labels_r = Array2::zeros((n, n));
    let mut m = RelationalMatrix::new(n, false)?;
    for i in 0..n {
        let wi = table.w1.row(i);
        for j in 0..n {
            let s = sample_categorical(wi.as_slice().unwrap(), rng);
            let r = sample_categorical(table.w2.row(j).as_slice().unwrap(), rng);
            labels_s[[i, j]] = s;
            labels_r[[i, j]] = r;
            let p = state.b.get(s, r);
            m.set_entry(i, j, (rng.random::<f64>() < p) as u8);
        }
    }
    state.labels_s = Some(labels_s);
    state.labels_r = Some(labels_r);
    Ok(m)
}

/// MMSB generation: labels from the per-node membership rows, then one
/// Bernoulli from the labelled block rate.
pub fn generate_mmsb<R: Rng>(state: &mut MmsbState, rng: &mut R) -> Result<RelationalMatrix> {
    let n = state.n();
    let mut labels_s = Array2::zeros((n, n));
    let mut labels_r = Array2::zeros((n, n));
    let mut m = RelationalMatrix::new(n, false)?;
    for i in 0..n {
        for j in 0..n {
            let s = sample_categorical(state.f.row(i).as_slice().unwrap(), rng);
            let r = sample_categorical(state.f.row(j).as_slice().unwrap(), rng);
            labels_s[[i, j]] = s;
            labels_r[[i, j]] = r;
            let p = state.b.get(s, r);
            m.set_entry(i, j, (rng.random::<f64>() < p) as u8);
        }
    }
    state.labels_s = Some(labels_s);
    state.labels_r = Some(labels_r);
    Ok(m)
}

fn ln_bernoulli(observed: u8, p: f64) -> f64 {
    if observed == 1 {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Training log-likelihood of the relation matrix under the state's model
/// kind, summed over cells currently masked as training data. Degenerate
/// intensities conflicting with the data yield `-inf`.
pub fn log_likelihood(state: &LatentState, r: &RelationalMatrix) -> Result<f64> {
    let n = state.n();
    if r.n() != n {
        return Err(Error::Data(format!(
            "matrix size {} does not match state size {n}",
            r.n()
        )));
    }
    let mut total = 0.0;
    match state.kind {
        ModelKind::Isg => {
            let table = WeightTable::new(&state.partition, state.lambda, &state.u1, &state.u2);
            for i in 0..n {
                for j in 0..n {
                    if r.mask(i, j) == Cell::Train {
                        total += ln_bernoulli(r.entry(i, j), table.intensity(&state.b, i, j));
                    }
                }
            }
        }
        ModelKind::Lfsg => {
            let (s, rr) = match (&state.labels_s, &state.labels_r) {
                (Some(s), Some(rr)) => (s, rr),
                _ => return Err(Error::invalid("state", "LFSG likelihood needs labels")),
            };
            for i in 0..n {
                for j in 0..n {
                    if r.mask(i, j) == Cell::Train {
                        total += ln_bernoulli(r.entry(i, j), state.b.get(s[[i, j]], rr[[i, j]]));
                    }
                }
            }
        }
        ModelKind::Sbm => {
            let (z1, z2) = match (&state.z1, &state.z2) {
                (Some(z1), Some(z2)) => (z1, z2),
                _ => return Err(Error::invalid("state", "SBM likelihood needs node labels")),
            };
            for i in 0..n {
                for j in 0..n {
                    if r.mask(i, j) == Cell::Train {
                        total += ln_bernoulli(r.entry(i, j), state.b.get(z1[i], z2[j]));
                    }
                }
            }
        }
        ModelKind::Mmsb => {
            return Err(Error::invalid(
                "state",
                "MMSB likelihood lives on MmsbState; use log_likelihood_mmsb",
            ))
        }
    }
    Ok(total)
}

/// Training log-likelihood of an MMSB state given its current labels.
pub fn log_likelihood_mmsb(state: &MmsbState, r: &RelationalMatrix) -> Result<f64> {
    let n = state.n();
    if r.n() != n {
        return Err(Error::Data(format!(
            "matrix size {} does not match state size {n}",
            r.n()
        )));
    }
    let (s, rr) = match (&state.labels_s, &state.labels_r) {
        (Some(s), Some(rr)) => (s, rr),
        _ => return Err(Error::invalid("state", "MMSB likelihood needs labels")),
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if r.mask(i, j) == Cell::Train {
                total += ln_bernoulli(r.entry(i, j), state.b.get(s[[i, j]], rr[[i, j]]));
            }
        }
    }
    Ok(total)
}

/// Per-cell LFSG label log-weight under the floor, exposed for samplers.
pub fn ln_label_weight(w: f64) -> f64 {
    ln_weight(w)
}

/// Either flavour of serialisable model state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSnapshot {
    Latent(LatentState),
    Mmsb(MmsbState),
}

impl StateSnapshot {
    pub fn kind(&self) -> ModelKind {
        match self {
            StateSnapshot::Latent(s) => s.kind,
            StateSnapshot::Mmsb(_) => ModelKind::Mmsb,
        }
    }
}

fn write_vec<W: std::io::Write>(w: &mut W, key: &str, vals: &[f64]) -> std::io::Result<()> {
    let joined: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
    writeln!(w, "{key} {}", joined.join(" "))
}

/// Serialise a state snapshot as flat key-value sections.
pub fn write_state<W: std::io::Write>(snapshot: &StateSnapshot, w: &mut W) -> std::io::Result<()> {
    match snapshot {
        StateSnapshot::Latent(s) => {
            writeln!(w, "model {}", s.kind)?;
            writeln!(w, "n {}", s.n())?;
            writeln!(w, "k {}", s.k())?;
            writeln!(w, "lambda {}", s.lambda.value())?;
            write_vec(w, "theta1", s.partition.dim1().theta())?;
            write_vec(w, "theta2", s.partition.dim2().theta())?;
            let b: Vec<f64> = s.b.as_array().iter().cloned().collect();
            write_vec(w, "b", &b)?;
            write_vec(w, "u1", &s.u1)?;
            write_vec(w, "u2", &s.u2)?;
        }
        StateSnapshot::Mmsb(s) => {
            writeln!(w, "model mmsb")?;
            writeln!(w, "n {}", s.n())?;
            writeln!(w, "k {}", s.k())?;
            let b: Vec<f64> = s.b.as_array().iter().cloned().collect();
            write_vec(w, "b", &b)?;
            let f: Vec<f64> = s.f.iter().cloned().collect();
            write_vec(w, "f", &f)?;
        }
    }
    Ok(())
}

/// Parse a snapshot previously written by [`write_state`].
pub fn read_state<R: BufRead>(reader: R) -> Result<StateSnapshot> {
    let mut sections: std::collections::HashMap<String, Vec<String>> =
        std::collections::HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::DataLine {
            line: line_no,
            msg: e.to_string(),
        })?;
        let mut tokens = line.split_whitespace().map(str::to_owned);
        if let Some(key) = tokens.next() {
            sections.insert(key, tokens.collect());
        }
    }
    let want = |key: &str| -> Result<Vec<String>> {
        sections
            .get(key)
            .cloned()
            .ok_or_else(|| Error::Data(format!("state snapshot missing section {key:?}")))
    };
    let floats = |key: &str| -> Result<Vec<f64>> {
        want(key)?
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad number {t:?} in section {key:?}")))
            })
            .collect()
    };
    let scalar = |key: &str| -> Result<f64> {
        let v = floats(key)?;
        if v.len() != 1 {
            return Err(Error::Data(format!("section {key:?} must hold one value")));
        }
        Ok(v[0])
    };

    let kind: ModelKind = want("model")?
        .first()
        .ok_or_else(|| Error::Data("empty model section".into()))?
        .parse()?;
    let n = scalar("n")? as usize;
    let k = scalar("k")? as usize;
    let check_len = |key: &str, v: &[f64], len: usize| -> Result<()> {
        if v.len() != len {
            return Err(Error::Data(format!(
                "section {key:?} has {} values, expected {len}",
                v.len()
            )));
        }
        Ok(())
    };

    let b_vals = floats("b")?;
    check_len("b", &b_vals, k * k)?;
    let b = BlockIntensities::new(Array2::from_shape_vec((k, k), b_vals).unwrap())?;

    if kind == ModelKind::Mmsb {
        let f_vals = floats("f")?;
        check_len("f", &f_vals, n * k)?;
        let f = Array2::from_shape_vec((n, k), f_vals).unwrap();
        return Ok(StateSnapshot::Mmsb(MmsbState::new(f, b)?));
    }

    let theta1 = floats("theta1")?;
    let theta2 = floats("theta2")?;
    check_len("theta1", &theta1, k)?;
    check_len("theta2", &theta2, k)?;
    let u1 = floats("u1")?;
    let u2 = floats("u2")?;
    check_len("u1", &u1, n)?;
    check_len("u2", &u2, n)?;
    Ok(StateSnapshot::Latent(LatentState {
        kind,
        partition: Partition::new(
            SegmentDistribution::new(theta1)?,
            SegmentDistribution::new(theta2)?,
        )?,
        b,
        u1,
        u2,
        lambda: SmoothingParameter::new(scalar("lambda")?)?,
        z1: None,
        z2: None,
        labels_s: None,
        labels_r: None,
    }))
}
