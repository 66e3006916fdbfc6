//! Link-prediction metrics and posterior label summaries.
//!
//! Ties are handled deterministically: AUC uses midranks (Mann-Whitney),
//! average precision averages each tied block over all orderings of the
//! block, so no input permutation is favoured.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::inference::Trace;

/// Scores and binary truths for a set of held-out cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCells {
    scores: Vec<f64>,
    truths: Vec<u8>,
}

impl ScoredCells {
    pub fn new(scores: Vec<f64>, truths: Vec<u8>) -> Result<Self> {
        if scores.len() != truths.len() {
            return Err(Error::Data(format!(
                "scores ({}) and truths ({}) differ in length",
                scores.len(),
                truths.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("scores must be finite".into()));
        }
        if truths.iter().any(|&t| t > 1) {
            return Err(Error::Data("truths must be 0 or 1".into()));
        }
        Ok(ScoredCells { scores, truths })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.truths.iter().filter(|&&t| t == 1).count()
    }

    /// Indices sorted by descending score, together with tied-block extents:
    /// each `(start, end)` half-open range shares one score.
    fn descending_blocks(&self) -> (Vec<usize>, Vec<(usize, usize)>) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .expect("finite scores")
                .then(a.cmp(&b))
        });
        let mut blocks = Vec::new();
        let mut start = 0;
        for pos in 1..=order.len() {
            if pos == order.len() || self.scores[order[pos]] != self.scores[order[start]] {
                blocks.push((start, pos));
                start = pos;
            }
        }
        (order, blocks)
    }
}

/// Probability that a random positive cell outranks a random negative one,
/// ties counting one half (Mann-Whitney midrank form).
pub fn auc_roc(sc: &ScoredCells) -> Result<f64> {
    let pos = sc.positives();
    let neg = sc.len() - pos;
    if pos == 0 {
        return Err(Error::Data("AUC undefined: no positive cells".into()));
    }
    if neg == 0 {
        return Err(Error::Data("AUC undefined: no negative cells".into()));
    }
    let (order, blocks) = sc.descending_blocks();
    // midranks over the ascending order = len + 1 - descending midrank
    let mut rank_sum = 0.0;
    for &(start, end) in &blocks {
        let desc_midrank = (start + 1 + end) as f64 / 2.0;
        let asc_midrank = sc.len() as f64 + 1.0 - desc_midrank;
        for &idx in &order[start..end] {
            if sc.truths[idx] == 1 {
                rank_sum += asc_midrank;
            }
        }
    }
    let p = pos as f64;
    let n = neg as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Area under the precision-recall curve: the mean, over positives in
/// score-descending order, of the precision at that rank. Tied blocks
/// contribute their exact expectation over all orderings of the block.
pub fn average_precision(sc: &ScoredCells) -> Result<f64> {
    let pos = sc.positives();
    if pos == 0 {
        return Err(Error::Data("average precision undefined: no positive cells".into()));
    }
    let (order, blocks) = sc.descending_blocks();
    let mut total = 0.0;
    let mut above = 0.0; // positives ranked above the current block
    for &(start, end) in &blocks {
        let b = (end - start) as f64;
        let c = order[start..end]
            .iter()
            .filter(|&&idx| sc.truths[idx] == 1)
            .count() as f64;
        if c > 0.0 {
            if end - start == 1 {
                total += (above + 1.0) / (start as f64 + 1.0);
            } else {
                // E[precision sum] for a uniformly shuffled block: position
                // t holds a positive with probability c/b, and carries
                // 1 + (t-1)(c-1)/(b-1) expected block positives up to t
                for t in 1..=(end - start) {
                    let inner = 1.0 + (t as f64 - 1.0) * (c - 1.0) / (b - 1.0);
                    total += (c / b) * (above + inner) / (start as f64 + t as f64);
                }
            }
        }
        above += c;
    }
    Ok(total / pos as f64)
}

/// Expected fraction of positives among the top `k` scores, with blocks
/// straddling the cutoff contributing proportionally.
pub fn precision_at_k(sc: &ScoredCells, k: usize) -> Result<f64> {
    if k == 0 || k > sc.len() {
        return Err(Error::invalid(
            "k",
            format!("must lie in 1..={}, got {k}", sc.len()),
        ));
    }
    let (order, blocks) = sc.descending_blocks();
    let mut expected = 0.0;
    for &(start, end) in &blocks {
        if start >= k {
            break;
        }
        let c = order[start..end]
            .iter()
            .filter(|&&idx| sc.truths[idx] == 1)
            .count() as f64;
        let held = (end.min(k) - start) as f64;
        expected += c * held / (end - start) as f64;
    }
    Ok(expected / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelDimension {
    Sender,
    Receiver,
}

/// Per-node label proportions pooled over retained sweeps and partners.
/// Rows sum to one; nodes that never carry a label in the requested role
/// fall back to the uniform distribution.
pub fn label_proportions(trace: &Trace, dimension: LabelDimension) -> Result<Array2<f64>> {
    let counts = match dimension {
        LabelDimension::Sender => trace.label_counts_s.as_ref(),
        LabelDimension::Receiver => trace.label_counts_r.as_ref(),
    }
    .ok_or_else(|| {
        Error::Data(format!(
            "trace of model {} does not retain hidden labels",
            trace.model
        ))
    })?;
    Ok(proportions_from_counts(counts))
}

pub(crate) fn proportions_from_counts(counts: &Array2<u64>) -> Array2<f64> {
    let (n, k) = counts.dim();
    let mut props = Array2::zeros((n, k));
    for i in 0..n {
        let total: u64 = counts.row(i).sum();
        for kk in 0..k {
            props[[i, kk]] = if total == 0 {
                1.0 / k as f64
            } else {
                counts[[i, kk]] as f64 / total as f64
            };
        }
    }
    props
}

/// Presentation ordering of the nodes: grouped by dominant label, most
/// concentrated nodes first within a group, node id as the final tiebreak.
pub fn node_order(props: &Array2<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..props.nrows()).collect();
    let dominant = |i: usize| {
        let row = props.row(i);
        let mut best = 0;
        for k in 1..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        (best, row[best])
    };
    order.sort_by(|&a, &b| {
        let (ka, pa) = dominant(a);
        let (kb, pb) = dominant(b);
        ka.cmp(&kb)
            .then(pb.partial_cmp(&pa).expect("finite proportions"))
            .then(a.cmp(&b))
    });
    order
}

/// Key-value metrics report.
pub fn write_metrics<W: std::io::Write>(
    w: &mut W,
    auc: f64,
    ap: f64,
    n_test: usize,
    n_pos_test: usize,
    precision_k: Option<f64>,
) -> std::io::Result<()> {
    writeln!(w, "auc {auc}")?;
    writeln!(w, "average_precision {ap}")?;
    writeln!(w, "n_test {n_test}")?;
    writeln!(w, "n_pos_test {n_pos_test}")?;
    if let Some(p) = precision_k {
        writeln!(w, "precision_at_k {p}")?;
    }
    Ok(())
}
