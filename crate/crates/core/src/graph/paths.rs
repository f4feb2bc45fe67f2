use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use ndarray::{Array2, ArrayView2};

use super::Graph;
use crate::error::{Error, Result};

/// Hop (unweighted shortest-path) distances from a set of source nodes.
///
/// Row `r` holds the distances from `sources()[r]` to every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMatrix {
    sources: Vec<usize>,
    hops: Array2<u32>,
}

impl HopMatrix {
    pub const UNREACHABLE: u32 = u32::MAX;

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    /// Hops between the `row`-th source and node `j`; `None` when unreachable.
    pub fn get(&self, row: usize, j: usize) -> Option<u32> {
        match self.hops[[row, j]] {
            Self::UNREACHABLE => None,
            h => Some(h),
        }
    }

    /// Same as [`get`](Self::get) with unreachable mapped to `+inf`.
    pub fn get_f64(&self, row: usize, j: usize) -> f64 {
        self.get(row, j).map_or(f64::INFINITY, f64::from)
    }

    /// Raw table; unreachable entries equal [`HopMatrix::UNREACHABLE`].
    pub fn raw(&self) -> ArrayView2<'_, u32> {
        self.hops.view()
    }
}

fn bfs(g: &Graph, source: usize, out: &mut [u32], queue: &mut VecDeque<usize>) {
    out.fill(HopMatrix::UNREACHABLE);
    out[source] = 0;
    queue.clear();
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let next = out[u] + 1;
        for &v in g.neighbors(u) {
            if out[v] == HopMatrix::UNREACHABLE {
                out[v] = next;
                queue.push_back(v);
            }
        }
    }
}

fn check_sources(n: usize, sources: Option<&[usize]>) -> Result<Vec<usize>> {
    match sources {
        None => Ok((0..n).collect()),
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidInput(format!(
                    "source node {bad} out of range for {n} nodes"
                )));
            }
            Ok(s.to_vec())
        }
    }
}

/// Breadth-first hop distances from `sources` (all nodes when `None`).
pub fn hop_distances(g: &Graph, sources: Option<&[usize]>) -> Result<HopMatrix> {
    let n = g.n();
    let sources = check_sources(n, sources)?;
    let mut hops = Array2::from_elem((sources.len(), n), HopMatrix::UNREACHABLE);
    let mut row = vec![0u32; n];
    let mut queue = VecDeque::with_capacity(n);
    for (r, &s) in sources.iter().enumerate() {
        bfs(g, s, &mut row, &mut queue);
        hops.row_mut(r)
            .iter_mut()
            .zip(&row)
            .for_each(|(dst, &h)| *dst = h);
    }
    Ok(HopMatrix { sources, hops })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Weighted shortest-path lengths (Dijkstra) over the edges of `g`, using
/// `edge_lengths[i][j]` as the length of edge `(i, j)`.
///
/// An infinite length removes the edge. Returns one row per source (all
/// nodes when `sources` is `None`); unreachable entries are `+inf`.
pub fn metric_shortest_paths(
    g: &Graph,
    edge_lengths: ArrayView2<'_, f64>,
    sources: Option<&[usize]>,
) -> Result<Array2<f64>> {
    let n = g.n();
    if edge_lengths.dim() != (n, n) {
        return Err(Error::InvalidInput(format!(
            "edge lengths have shape {:?}, expected ({n}, {n})",
            edge_lengths.dim()
        )));
    }
    for i in 0..n {
        for &j in g.neighbors(i) {
            let len = edge_lengths[[i, j]];
            if len.is_nan() || len < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) has invalid length {len}"
                )));
            }
            if len != edge_lengths[[j, i]] {
                return Err(Error::InvalidInput(format!(
                    "edge lengths are not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let sources = check_sources(n, sources)?;

    let mut out = Array2::from_elem((sources.len(), n), f64::INFINITY);
    let mut heap = BinaryHeap::new();
    for (r, &s) in sources.iter().enumerate() {
        let mut dist = out.row_mut(r);
        dist[s] = 0.0;
        heap.clear();
        heap.push(Reverse((Dist(0.0), s)));
        while let Some(Reverse((Dist(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &v in g.neighbors(u) {
                let cand = d + edge_lengths[[u, v]];
                if cand < dist[v] {
                    dist[v] = cand;
                    heap.push(Reverse((Dist(cand), v)));
                }
            }
        }
    }
    Ok(out)
}
