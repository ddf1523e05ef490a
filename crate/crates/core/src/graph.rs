//! Graph and series containers plus the two standardizations applied to
//! real-data series before fitting.

use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    NoNodes,
    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },
    #[error("edge endpoint {node} out of range for {n_nodes} nodes")]
    EndpointOutOfRange { node: usize, n_nodes: usize },
}

/// A neighbour of some node together with the id of the connecting edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

/// Undirected simple graph on dense node ids `0..n_nodes`.
///
/// Edges are stored once, as `(min, max)` pairs in ascending order; edge ids
/// index into [`Graph::edges`]. Isolated nodes are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    adjacency: Vec<Neighbor>,
}

impl Graph {
    /// Canonicalizes, deduplicates and indexes an edge list.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n_nodes == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for node in [a, b] {
                if node >= n_nodes {
                    return Err(GraphError::EndpointOutOfRange { node, n_nodes });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop { node: a });
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        canonical.dedup();

        let mut degree = alloc::vec![0usize; n_nodes];
        for &(a, b) in &canonical {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = Vec::with_capacity(n_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n_nodes].to_vec();
        let mut adjacency = alloc::vec![Neighbor { node: 0, edge: 0 }; offsets[n_nodes]];
        for (edge, &(a, b)) in canonical.iter().enumerate() {
            adjacency[cursor[a]] = Neighbor { node: b, edge };
            cursor[a] += 1;
            adjacency[cursor[b]] = Neighbor { node: a, edge };
            cursor[b] += 1;
        }
        for i in 0..n_nodes {
            adjacency[offsets[i]..offsets[i + 1]].sort_unstable_by_key(|nb| nb.node);
        }
        Ok(Self {
            n_nodes,
            edges: canonical,
            offsets,
            adjacency,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(min, max)` edges in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbours of `node`, sorted by node id.
    pub fn neighbors(&self, node: usize) -> &[Neighbor] {
        &self.adjacency[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n_nodes
            && self
                .neighbors(a)
                .binary_search_by_key(&b, |nb| nb.node)
                .is_ok()
    }

    /// Induced relabeling: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GraphError> {
        let edges: Vec<_> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Self::from_edges(self.n_nodes, &edges)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series matrix is empty")]
    Empty,
    #[error("row {row} has {found} values, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("series length {len} is not period {period} x {n_periods} periods")]
    PeriodMismatch {
        len: usize,
        period: usize,
        n_periods: usize,
    },
    #[error("need at least two periods to estimate a seasonal variance, got {0}")]
    TooFewPeriods(usize),
    #[error("need at least two observations to estimate a variance, got {0}")]
    TooShort(usize),
    #[error("zero sample variance at seasonal position {position}")]
    ZeroSeasonalVariance { position: usize },
    #[error("zero sample variance")]
    ZeroVariance,
}

/// `N x n` matrix of node series, row `i` is the series of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSeries {
    n_nodes: usize,
    len: usize,
    values: Vec<f64>,
}

impl NodeSeries {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SeriesError> {
        let len = rows.first().map(Vec::len).ok_or(SeriesError::Empty)?;
        let mut values = Vec::with_capacity(rows.len() * len);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != len {
                return Err(SeriesError::Ragged {
                    row,
                    expected: len,
                    found: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), len, values)
    }

    /// Row-major constructor.
    pub fn from_flat(n_nodes: usize, len: usize, values: Vec<f64>) -> Result<Self, SeriesError> {
        if n_nodes == 0 || len == 0 {
            return Err(SeriesError::Empty);
        }
        if values.len() != n_nodes * len {
            return Err(SeriesError::Ragged {
                row: values.len() / len,
                expected: len,
                found: values.len() % len,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite {
                row: pos / len,
                col: pos % len,
            });
        }
        Ok(Self {
            n_nodes,
            len,
            values,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Series length `n`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.len..(i + 1) * self.len]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.len)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Copy with row `i` replaced by `row`.
    pub fn with_row(&self, i: usize, row: &[f64]) -> Result<Self, SeriesError> {
        let mut values = self.values.clone();
        values[i * self.len..(i + 1) * self.len].copy_from_slice(row);
        Self::from_flat(self.n_nodes, self.len, values)
    }

    /// Applies a per-row transformation such as [`standardize_zscore`].
    pub fn map_rows<F>(&self, mut f: F) -> Result<Self, SeriesError>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>, SeriesError>,
    {
        let mut values = Vec::with_capacity(self.values.len());
        for (row, r) in self.rows().enumerate() {
            let out = f(r)?;
            if out.len() != self.len {
                return Err(SeriesError::Ragged {
                    row,
                    expected: self.len,
                    found: out.len(),
                });
            }
            values.extend(out);
        }
        Self::from_flat(self.n_nodes, self.len, values)
    }

    /// Reorders rows so that row `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut values = alloc::vec![0.0; self.values.len()];
        for (i, r) in self.rows().enumerate() {
            values[perm[i] * self.len..(perm[i] + 1) * self.len].copy_from_slice(r);
        }
        Self {
            n_nodes: self.n_nodes,
            len: self.len,
            values,
        }
    }
}

fn mean_and_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let count = values.clone().count();
    let mean = values.clone().sum::<f64>() / count as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let var = if count > 1 { ss / (count - 1) as f64 } else { 0.0 };
    (mean, libm::sqrt(var), count)
}

/// Removes per-position seasonal mean and scale.
///
/// Position `k * period + v` is mapped to `(y - mean_v) / sd_v`, where the
/// mean and unbiased standard deviation of seasonal position `v` are taken
/// over the `n_periods` values sharing that position.
pub fn standardize_seasonal(
    series: &[f64],
    period: usize,
    n_periods: usize,
) -> Result<Vec<f64>, SeriesError> {
    if period == 0 || series.len() != period * n_periods {
        return Err(SeriesError::PeriodMismatch {
            len: series.len(),
            period,
            n_periods,
        });
    }
    if n_periods < 2 {
        return Err(SeriesError::TooFewPeriods(n_periods));
    }
    let mut out = alloc::vec![0.0; series.len()];
    for position in 0..period {
        let column = series.iter().copied().skip(position).step_by(period);
        let (mean, sd, _) = mean_and_sd(column);
        if !(sd > 0.0) {
            return Err(SeriesError::ZeroSeasonalVariance { position });
        }
        for k in 0..n_periods {
            let t = k * period + position;
            out[t] = (series[t] - mean) / sd;
        }
    }
    Ok(out)
}

/// `(y - mean) / sd` with the unbiased sample standard deviation.
pub fn standardize_zscore(series: &[f64]) -> Result<Vec<f64>, SeriesError> {
    if series.len() < 2 {
        return Err(SeriesError::TooShort(series.len()));
    }
    let (mean, sd, _) = mean_and_sd(series.iter().copied());
    if !(sd > 0.0) {
        return Err(SeriesError::ZeroVariance);
    }
    Ok(series.iter().map(|v| (v - mean) / sd).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn dedups_and_symmetrizes() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 0), (1, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let nb: Vec<usize> = g.neighbors(1).iter().map(|n| n.node).collect();
        assert_eq!(nb, vec![0, 2]);
        assert!(g.has_edge(2, 1));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn empty_edge_list() {
        let g = Graph::from_edges(2, &[]).unwrap();
        assert_eq!(g.n_edges(), 0);
        assert!(g.neighbors(0).is_empty() && g.neighbors(1).is_empty());
    }

    #[test]
    fn rejects_self_loop_and_range() {
        assert_eq!(
            Graph::from_edges(4, &[(0, 0)]),
            Err(GraphError::SelfLoop { node: 0 })
        );
        assert_eq!(
            Graph::from_edges(2, &[(0, 2)]),
            Err(GraphError::EndpointOutOfRange { node: 2, n_nodes: 2 })
        );
        assert_eq!(Graph::from_edges(0, &[]), Err(GraphError::NoNodes));
    }

    #[test]
    fn neighbor_edge_ids_point_back() {
        let g = Graph::from_edges(4, &[(3, 0), (2, 1), (0, 2), (1, 3)]).unwrap();
        for i in 0..4 {
            for nb in g.neighbors(i) {
                let (a, b) = g.edges()[nb.edge];
                assert!((a, b) == (i.min(nb.node), i.max(nb.node)));
            }
        }
    }

    #[test]
    fn seasonal_hand_example() {
        let out = standardize_seasonal(&[1.0, 10.0, 3.0, 20.0], 2, 2).unwrap();
        let s0 = libm::sqrt(2.0);
        let s1 = libm::sqrt(50.0);
        let expected = [-1.0 / s0, -5.0 / s1, 1.0 / s0, 5.0 / s1];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-12, "{o} vs {e}");
        }
    }

    #[test]
    fn seasonal_zero_variance_names_position() {
        let err = standardize_seasonal(&[1.0, 2.0, 1.0, 3.0], 2, 2).unwrap_err();
        assert_eq!(err, SeriesError::ZeroSeasonalVariance { position: 0 });
        assert!(matches!(
            standardize_seasonal(&[1.0, 2.0, 3.0], 2, 2),
            Err(SeriesError::PeriodMismatch { .. })
        ));
        assert_eq!(
            standardize_seasonal(&[1.0, 2.0], 2, 1),
            Err(SeriesError::TooFewPeriods(1))
        );
    }

    #[test]
    fn zscore_examples() {
        let out = standardize_zscore(&[0.0, 2.0]).unwrap();
        assert!((out[0] + core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((out[1] - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(standardize_zscore(&[5.0, 5.0, 5.0]), Err(SeriesError::ZeroVariance));
    }

    #[test]
    fn node_series_validation() {
        assert!(matches!(
            NodeSeries::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(SeriesError::Ragged { row: 1, .. })
        ));
        assert_eq!(
            NodeSeries::from_rows(&[vec![1.0, f64::NAN]]),
            Err(SeriesError::NonFinite { row: 0, col: 1 })
        );
        let s = NodeSeries::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(s.row(1), &[3.0, 4.0]);
        assert_eq!(s.permuted(&[1, 0]).row(0), &[3.0, 4.0]);
    }

    fn edge_list() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..20).prop_flat_map(|n| {
            let pair = (0..n, 0..n).prop_filter("no loops", |(a, b)| a != b);
            (Just(n), proptest::collection::vec(pair, 0..60))
        })
    }

    proptest! {
        #[test]
        fn canonical_edges_are_idempotent((n, edges) in edge_list()) {
            let g = Graph::from_edges(n, &edges).unwrap();
            let again = Graph::from_edges(n, g.edges()).unwrap();
            prop_assert_eq!(&g, &again);
        }

        #[test]
        fn degree_sum_is_twice_edges((n, edges) in edge_list()) {
            let g = Graph::from_edges(n, &edges).unwrap();
            let total: usize = (0..n).map(|i| g.degree(i)).sum();
            prop_assert_eq!(total, 2 * g.n_edges());
            for &(a, b) in &edges {
                prop_assert!(g.has_edge(a, b) && g.has_edge(b, a));
            }
        }

        #[test]
        fn seasonal_output_is_centered_and_restandardizes(
            period in 1usize..5,
            n_periods in 3usize..8,
            seed in proptest::collection::vec(-50.0f64..50.0, 40),
        ) {
            let len = period * n_periods;
            let series: Vec<f64> = (0..len).map(|t| seed[t % 40] + (t as f64) * 0.37).collect();
            let out = match standardize_seasonal(&series, period, n_periods) {
                Ok(o) => o,
                Err(_) => return Ok(()),
            };
            for v in 0..period {
                let mean: f64 = out.iter().skip(v).step_by(period).sum::<f64>() / n_periods as f64;
                prop_assert!(mean.abs() < 1e-12);
            }
            let again = standardize_seasonal(&out, period, n_periods).unwrap();
            for (a, b) in out.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn zscore_is_centered(values in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            if let Ok(out) = standardize_zscore(&values) {
                let mean = out.iter().sum::<f64>() / out.len() as f64;
                prop_assert!(mean.abs() < 1e-12);
                let var = out.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (out.len() - 1) as f64;
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }
}
