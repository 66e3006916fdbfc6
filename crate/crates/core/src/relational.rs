//! Relational data: directed binary adjacency matrices with tri-state
//! observation masks, edge-list / dense CSV ingestion, activity-based node
//! subsampling, and row-wise train/test splits.

use std::io::BufRead;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// Observation state of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Excluded,
    Train,
    Test,
}

impl Cell {
    /// Export code used by the mask CSV: 0 = excluded, 1 = train, 2 = test.
    pub fn code(self) -> u8 {
        match self {
            Cell::Excluded => 0,
            Cell::Train => 1,
            Cell::Test => 2,
        }
    }
}

/// Directed binary relation matrix with an observation mask of the same
/// shape. Diagonal cells are excluded unless `self_loops` is requested at
/// construction; everything else starts as training data.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalMatrix {
    n: usize,
    entries: Array2<u8>,
    mask: Array2<Cell>,
}

/// Positive-link count and sparsity of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSummary {
    pub positive_links: u64,
    /// Positive links divided by the number of non-excluded cells.
    pub sparsity: f64,
}

fn default_mask(n: usize, self_loops: bool) -> Array2<Cell> {
    let mut mask = Array2::from_elem((n, n), Cell::Train);
    if !self_loops {
        for i in 0..n {
            mask[[i, i]] = Cell::Excluded;
        }
    }
    mask
}

impl RelationalMatrix {
    /// All-zero matrix with the default mask.
    pub fn new(n: usize, self_loops: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        Ok(RelationalMatrix {
            n,
            entries: Array2::zeros((n, n)),
            mask: default_mask(n, self_loops),
        })
    }

    pub fn from_entries(entries: Array2<u8>, self_loops: bool) -> Result<Self> {
        let n = entries.nrows();
        let mask = default_mask(n, self_loops);
        RelationalMatrix::from_parts(entries, mask)
    }

    /// Assemble a matrix from explicit entries and mask of matching shape.
    pub fn from_parts(entries: Array2<u8>, mask: Array2<Cell>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::Data(format!(
                "relation matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if mask.dim() != entries.dim() {
            return Err(Error::Data(format!(
                "mask shape {:?} does not match entries shape {:?}",
                mask.dim(),
                entries.dim()
            )));
        }
        if entries.iter().any(|&v| v > 1) {
            return Err(Error::Data("relation entries must be 0 or 1".into()));
        }
        Ok(RelationalMatrix { n, entries, mask })
    }

    /// Parse a "src<TAB>dst" edge list (any whitespace separator accepted;
    /// `#` starts a comment line). Duplicate edges are idempotent.
    pub fn load_edge_list<R: BufRead>(reader: R, n: usize, self_loops: bool) -> Result<Self> {
        let mut m = RelationalMatrix::new(n, self_loops)?;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::DataLine {
                line: line_no,
                msg: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let (src, dst) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::DataLine {
                        line: line_no,
                        msg: format!("expected \"src dst\", got {trimmed:?}"),
                    })
                }
            };
            let parse = |tok: &str| -> Result<usize> {
                tok.parse::<usize>().map_err(|_| Error::DataLine {
                    line: line_no,
                    msg: format!("invalid node id {tok:?}"),
                })
            };
            let (i, j) = (parse(src)?, parse(dst)?);
            if i >= n || j >= n {
                return Err(Error::DataLine {
                    line: line_no,
                    msg: format!("node id out of range: edge ({i}, {j}) with n = {n}"),
                });
            }
            m.entries[[i, j]] = 1;
        }
        Ok(m)
    }

    /// Parse a dense CSV of 0/1 values, n rows by n columns.
    pub fn load_dense_csv<R: BufRead>(reader: R, self_loops: bool) -> Result<Self> {
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::DataLine {
                line: line_no,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<u8>> = line
                .split(',')
                .map(|tok| match tok.trim() {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(Error::DataLine {
                        line: line_no,
                        msg: format!("expected 0 or 1, got {other:?}"),
                    }),
                })
                .collect();
            rows.push(row?);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::Data("dense CSV is empty".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::DataLine {
                line: bad + 1,
                msg: format!("row has {} columns, expected {n}", rows[bad].len()),
            });
        }
        let flat: Vec<u8> = rows.into_iter().flatten().collect();
        RelationalMatrix::from_entries(Array2::from_shape_vec((n, n), flat).unwrap(), self_loops)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> u8 {
        self.entries[[i, j]]
    }

    pub fn mask(&self, i: usize, j: usize) -> Cell {
        self.mask[[i, j]]
    }

    pub fn entries(&self) -> &Array2<u8> {
        &self.entries
    }

    pub(crate) fn set_entry(&mut self, i: usize, j: usize, v: u8) {
        debug_assert!(v <= 1);
        self.entries[[i, j]] = v;
    }

    /// All cells currently marked as training data, row-major.
    pub fn train_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs_with(Cell::Train)
    }

    /// All cells currently marked as held-out test data, row-major.
    pub fn test_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs_with(Cell::Test)
    }

    fn pairs_with(&self, state: Cell) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.mask[[i, j]] == state {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Re-split the observation mask row by row: within each row, exactly
    /// `round(train_ratio * cells)` of the non-excluded cells become
    /// training data (round half up), the remainder test data. Rows with
    /// fewer than two usable cells stay entirely in training.
    pub fn row_wise_split<R: Rng>(&self, train_ratio: f64, rng: &mut R) -> Result<Self> {
        if !(train_ratio > 0.0 && train_ratio < 1.0) {
            return Err(Error::invalid(
                "train_ratio",
                format!("must lie strictly between 0 and 1, got {train_ratio}"),
            ));
        }
        let mut out = self.clone();
        for i in 0..self.n {
            let cols: Vec<usize> = (0..self.n)
                .filter(|&j| self.mask[[i, j]] != Cell::Excluded)
                .collect();
            if cols.len() < 2 {
                log::warn!("row {i} has fewer than 2 observable cells; keeping it all-train");
                for &j in &cols {
                    out.mask[[i, j]] = Cell::Train;
                }
                continue;
            }
            let quota = (train_ratio * cols.len() as f64 + 0.5).floor() as usize;
            let quota = quota.min(cols.len());
            for &j in &cols {
                out.mask[[i, j]] = Cell::Test;
            }
            for idx in rand::seq::index::sample(rng, cols.len(), quota) {
                out.mask[[i, cols[idx]]] = Cell::Train;
            }
        }
        Ok(out)
    }

    /// Positive-link count over the full grid and sparsity over the
    /// non-excluded cells.
    pub fn summarize(&self) -> DatasetSummary {
        let positive_links = self.entries.iter().map(|&v| v as u64).sum();
        let observable = self.mask.iter().filter(|&&c| c != Cell::Excluded).count();
        let sparsity = if observable == 0 {
            0.0
        } else {
            positive_links as f64 / observable as f64
        };
        DatasetSummary {
            positive_links,
            sparsity,
        }
    }

    /// Write the positive entries as an edge list, row-major.
    pub fn write_edge_list<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                if self.entries[[i, j]] == 1 {
                    writeln!(w, "{i}\t{j}")?;
                }
            }
        }
        Ok(())
    }

    pub fn write_dense_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for row in self.entries.outer_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn write_mask_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for row in self.mask.outer_iter() {
            let line: Vec<String> = row.iter().map(|c| c.code().to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Uniformly sample `sample` node ids without replacement from the `pool`
/// most active nodes of an edge list, activity being in-degree plus
/// out-degree with ties broken by smaller id. Returns the chosen ids in
/// ascending order. If fewer than `pool` distinct nodes appear, all of them
/// form the pool (with a warning).
pub fn top_active_subsample<R: Rng>(
    edges: &[(usize, usize)],
    pool: usize,
    sample: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if pool < sample {
        return Err(Error::invalid(
            "pool",
            format!("pool ({pool}) must be at least sample ({sample})"),
        ));
    }
    let mut degree: std::collections::HashMap<usize, u64> = std::collections::HashMap::new();
    for &(src, dst) in edges {
        *degree.entry(src).or_insert(0) += 1;
        *degree.entry(dst).or_insert(0) += 1;
    }
    let mut ranked: Vec<(usize, u64)> = degree.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if ranked.len() < pool {
        log::warn!(
            "only {} distinct nodes available for a pool of {pool}; using all of them",
            ranked.len()
        );
    }
    let pool_ids: Vec<usize> = ranked.iter().take(pool).map(|&(id, _)| id).collect();
    let take = sample.min(pool_ids.len());
    let mut chosen: Vec<usize> = rand::seq::index::sample(rng, pool_ids.len(), take)
        .into_iter()
        .map(|idx| pool_ids[idx])
        .collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Restrict an edge list to the given nodes and relabel endpoints by their
/// position in `ids` (which must be sorted ascending).
pub fn induced_edges(edges: &[(usize, usize)], ids: &[usize]) -> Vec<(usize, usize)> {
    debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    let pos = |node: usize| ids.binary_search(&node).ok();
    edges
        .iter()
        .filter_map(|&(s, d)| Some((pos(s)?, pos(d)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::io::Cursor;

    fn load(text: &str, n: usize) -> Result<RelationalMatrix> {
        RelationalMatrix::load_edge_list(Cursor::new(text), n, false)
    }

    #[test]
    fn loads_simple_edge_list() {
        let m = load("0 1\n1 0\n", 2).unwrap();
        assert_eq!(m.entry(0, 1), 1);
        assert_eq!(m.entry(1, 0), 1);
        assert_eq!(m.entry(0, 0), 0);
        assert_eq!(m.mask(0, 0), Cell::Excluded);
        assert_eq!(m.mask(0, 1), Cell::Train);
    }

    #[test]
    fn empty_stream_gives_zero_matrix() {
        let m = load("", 3).unwrap();
        assert!(m.entries().iter().all(|&v| v == 0));
        assert_eq!(m.n(), 3);
    }

    #[test]
    fn duplicate_edges_are_idempotent() {
        // oracle: set-union of the edge list
        let text = "0 1\n0\t1\n";
        let m = load(text, 2).unwrap();
        let mut union = std::collections::HashSet::new();
        union.insert((0usize, 1usize));
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.entry(i, j), union.contains(&(i, j)) as u8);
            }
        }
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let m = load("# header\n\n0 1\n", 2).unwrap();
        assert_eq!(m.entry(0, 1), 1);
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        match load("0 1\n5 0\n", 2) {
            Err(Error::DataLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected line error, got {other:?}"),
        }
        match load("0 1\nbogus\n", 2) {
            Err(Error::DataLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected line error, got {other:?}"),
        }
        match load("0 1 7\n", 2) {
            Err(Error::DataLine { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected line error, got {other:?}"),
        }
    }

    #[test]
    fn edge_list_round_trip_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = 2 + (rand::Rng::random::<u32>(&mut rng) % 8) as usize;
            let mut m = RelationalMatrix::new(n, false).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if rand::Rng::random::<f64>(&mut rng) < 0.4 {
                        m.set_entry(i, j, 1);
                    }
                }
            }
            let mut buf = Vec::new();
            m.write_edge_list(&mut buf).unwrap();
            let back =
                RelationalMatrix::load_edge_list(Cursor::new(buf), n, false).unwrap();
            assert_eq!(back.entries(), m.entries());
        }
    }

    #[test]
    fn dense_csv_round_trip() {
        let m = load("0 1\n1 0\n", 2).unwrap();
        let mut buf = Vec::new();
        m.write_dense_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0,1\n1,0\n");
        let back = RelationalMatrix::load_dense_csv(Cursor::new(buf), false).unwrap();
        assert_eq!(back.entries(), m.entries());

        assert!(RelationalMatrix::load_dense_csv(Cursor::new("0,2\n1,0\n"), false).is_err());
        assert!(RelationalMatrix::load_dense_csv(Cursor::new("0,1\n1\n"), false).is_err());
    }

    #[test]
    fn mask_csv_uses_documented_codes() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let m = RelationalMatrix::new(3, false).unwrap();
        let split = m.row_wise_split(0.5, &mut rng).unwrap();
        let mut buf = Vec::new();
        split.write_mask_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for i in 0..3 {
            let row: Vec<&str> = text.lines().nth(i).unwrap().split(',').collect();
            assert_eq!(row[i], "0"); // excluded diagonal
        }
        assert!(text.chars().all(|c| "012,\n".contains(c)));
    }

    #[test]
    fn split_row_quotas_are_exact() {
        // n = 4, diagonal excluded -> 3 usable cells per row; ratio 2/3
        // forces exactly 2 train and 1 test per row
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let m = RelationalMatrix::new(4, false).unwrap();
        let split = m.row_wise_split(2.0 / 3.0, &mut rng).unwrap();
        for i in 0..4 {
            let train = (0..4).filter(|&j| split.mask(i, j) == Cell::Train).count();
            let test = (0..4).filter(|&j| split.mask(i, j) == Cell::Test).count();
            assert_eq!((train, test), (2, 1));
        }
    }

    #[test]
    fn split_quota_matches_rounding_at_scale() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let m = RelationalMatrix::new(100, false).unwrap();
        let split = m.row_wise_split(0.9, &mut rng).unwrap();
        for i in 0..100 {
            let train = (0..100).filter(|&j| split.mask(i, j) == Cell::Train).count();
            // round(0.9 * 99) = 89
            assert_eq!(train, 89);
        }
    }

    #[test]
    fn split_counts_are_seed_invariant() {
        let m = RelationalMatrix::new(12, false).unwrap();
        let mut reference: Option<Vec<usize>> = None;
        for seed in 0..8 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let split = m.row_wise_split(0.7, &mut rng).unwrap();
            let counts: Vec<usize> = (0..12)
                .map(|i| (0..12).filter(|&j| split.mask(i, j) == Cell::Train).count())
                .collect();
            match &reference {
                None => reference = Some(counts),
                Some(r) => assert_eq!(&counts, r),
            }
        }
    }

    #[test]
    fn split_is_deterministic_for_fixed_seed() {
        let m = RelationalMatrix::new(10, false).unwrap();
        let a = m
            .row_wise_split(0.6, &mut ChaCha12Rng::seed_from_u64(11))
            .unwrap();
        let b = m
            .row_wise_split(0.6, &mut ChaCha12Rng::seed_from_u64(11))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_rows_fall_back_to_train() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let m = RelationalMatrix::new(2, false).unwrap(); // 1 usable cell per row
        let split = m.row_wise_split(0.5, &mut rng).unwrap();
        assert_eq!(split.mask(0, 1), Cell::Train);
        assert_eq!(split.mask(1, 0), Cell::Train);
    }

    #[test]
    fn split_rejects_bad_ratio() {
        let m = RelationalMatrix::new(4, false).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        assert!(m.row_wise_split(0.0, &mut rng).is_err());
        assert!(m.row_wise_split(1.0, &mut rng).is_err());
    }

    #[test]
    fn summary_examples() {
        let zero = RelationalMatrix::new(5, false).unwrap();
        let s = zero.summarize();
        assert_eq!(s.positive_links, 0);
        assert_eq!(s.sparsity, 0.0);

        // 2x2, off-diagonal both 1, diagonal excluded -> L = 2, S = 1.0
        let m = load("0 1\n1 0\n", 2).unwrap();
        let s = m.summarize();
        assert_eq!(s.positive_links, 2);
        assert_eq!(s.sparsity, 1.0);
    }

    #[test]
    fn summary_matches_reported_sparsity_with_full_grid() {
        // a 500x500 matrix with 10,775 positive links and the diagonal kept
        // observable has sparsity 10775 / 250000 = 4.31%
        let mut m = RelationalMatrix::new(500, true).unwrap();
        let mut placed = 0u64;
        'outer: for i in 0..500 {
            for j in 0..500 {
                if placed == 10_775 {
                    break 'outer;
                }
                m.set_entry(i, j, 1);
                placed += 1;
            }
        }
        let s = m.summarize();
        assert_eq!(s.positive_links, 10_775);
        assert!((s.sparsity - 0.0431).abs() < 0.0431 * 1e-4);
    }

    #[test]
    fn top_active_examples() {
        // degenerate: pool = sample = n returns every node
        let edges = vec![(0, 1), (1, 2), (2, 0)];
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let ids = top_active_subsample(&edges, 3, 3, &mut rng).unwrap();
        assert_eq!(ids, vec![0, 1, 2]);

        // degrees (5, 3, 1): node0 from 5 incident edges, node1 from 3,
        // node2 from 1 -> pool of 2 is {0, 1}
        let edges = vec![(0, 1), (0, 1), (1, 0), (0, 2), (0, 3), (4, 0)];
        // degrees: 0 -> 6, 1 -> 3, 2 -> 1, 3 -> 1, 4 -> 1
        let ids = top_active_subsample(&edges, 2, 2, &mut rng).unwrap();
        assert_eq!(ids, vec![0, 1]);

        assert!(top_active_subsample(&edges, 1, 2, &mut rng).is_err());
    }

    #[test]
    fn top_active_paper_setting() {
        // 2000 nodes in a ring, sample 500 from the top 1000
        let edges: Vec<(usize, usize)> = (0..2000).map(|i| (i, (i + 1) % 2000)).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let ids = top_active_subsample(&edges, 1000, 500, &mut rng).unwrap();
        assert_eq!(ids.len(), 500);
        let distinct: std::collections::HashSet<_> = ids.iter().collect();
        assert_eq!(distinct.len(), 500);
    }

    #[test]
    fn ties_break_by_smaller_id() {
        // all nodes have equal degree; pool of 2 must be {0, 1}
        let edges = vec![(0, 1), (2, 3)];
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let ids = top_active_subsample(&edges, 2, 2, &mut rng).unwrap();
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn induced_edges_relabels() {
        let edges = vec![(0, 5), (5, 9), (9, 0), (3, 5)];
        let ids = vec![0, 5, 9];
        let sub = induced_edges(&edges, &ids);
        assert_eq!(sub, vec![(0, 1), (1, 2), (2, 0)]);
    }
}
