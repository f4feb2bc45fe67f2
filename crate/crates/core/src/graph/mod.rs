//! Weighted undirected graphs, k-NN construction and the normalized Laplacian.
//!
//! Graphs are stored densely: the problems this crate targets have at most a
//! few thousand nodes and every downstream operator is dense anyway.

mod paths;
mod spectral;

pub use paths::{hop_distances, metric_shortest_paths, HopMatrix};
pub use spectral::{spectral_decomposition, SpectralDecomposition};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Symmetric tolerance used when validating user-provided matrices.
const SYMMETRY_TOL: f64 = 1e-10;

/// Undirected graph with non-negative edge weights.
///
/// A zero weight means "no edge". The diagonal is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: Array2<f64>,
    coords: Option<Array2<f64>>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from a weight matrix, validating symmetry, sign and the
    /// zero diagonal.
    pub fn from_weights(weights: Array2<f64>) -> Result<Self> {
        let (rows, cols) = weights.dim();
        if rows != cols {
            return Err(Error::InvalidInput(format!(
                "weight matrix must be square, got {rows}x{cols}"
            )));
        }
        for i in 0..rows {
            if weights[[i, i]] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight matrix has non-zero diagonal at node {i}"
                )));
            }
            for j in 0..cols {
                let w = weights[[i, j]];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "weight ({i}, {j}) = {w} is not a finite non-negative number"
                    )));
                }
                if w != weights[[j, i]] {
                    return Err(Error::InvalidInput(format!(
                        "weight matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let adjacency = (0..rows)
            .map(|i| (0..rows).filter(|&j| weights[[i, j]] > 0.0).collect())
            .collect();
        Ok(Graph {
            weights,
            coords: None,
            adjacency,
        })
    }

    /// Attaches node coordinates (one row per node).
    pub fn with_coords(mut self, coords: Array2<f64>) -> Result<Self> {
        if coords.nrows() != self.n() {
            return Err(Error::InvalidInput(format!(
                "coordinates have {} rows for a graph of {} nodes",
                coords.nrows(),
                self.n()
            )));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[[i, j]]
    }

    pub fn coords(&self) -> Option<ArrayView2<'_, f64>> {
        self.coords.as_ref().map(|c| c.view())
    }

    /// Indices of the nodes sharing an edge with `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Weighted degree `sum_j W_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.weights.row(i).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected component label per node; labels are assigned in order of
    /// the lowest node index of each component.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.components().iter().all(|&c| c == 0)
    }
}

/// Input geometry for [`build_knn_graph`].
#[derive(Debug, Clone, Copy)]
pub enum KnnInput<'a> {
    /// `n x d` coordinates; Euclidean distances are used.
    Points(ArrayView2<'a, f64>),
    /// Precomputed `n x n` metric (e.g. road distances).
    Distances(ArrayView2<'a, f64>),
}

/// Gaussian kernel bandwidth `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2 {
    /// Mean squared distance over the retained edges.
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Sigma2 {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Sigma2::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| format!("expected 'auto' or a positive number, got '{s}'"))?;
        if v.is_finite() && v > 0.0 {
            Ok(Sigma2::Fixed(v))
        } else {
            Err(format!("sigma2 must be positive, got {v}"))
        }
    }
}

/// Pairwise Euclidean distances between the rows of `points`.
pub fn euclidean_distances(points: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = points.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[[i, j]] = dist;
            d[[j, i]] = dist;
        }
    }
    d
}

fn validate_distances(d: ArrayView2<'_, f64>) -> Result<()> {
    let (rows, cols) = d.dim();
    if rows != cols {
        return Err(Error::InvalidInput(format!(
            "distance matrix must be square, got {rows}x{cols}"
        )));
    }
    for i in 0..rows {
        if d[[i, i]] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "distance matrix has non-zero diagonal at node {i}"
            )));
        }
        for j in (i + 1)..rows {
            let (a, b) = (d[[i, j]], d[[j, i]]);
            if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "distance ({i}, {j}) is not a finite non-negative number"
                )));
            }
            if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "distance matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

/// Builds a k-nearest-neighbour graph with Gaussian weights
/// `exp(-d(i,j)^2 / sigma^2)`.
///
/// An edge `(i, j)` exists when `j` is among the `k` nearest neighbours of `i`
/// or vice versa. Distance ties are broken by the lower node index. A
/// disconnected result is logged but still returned.
pub fn build_knn_graph(input: KnnInput<'_>, k: usize, sigma2: Sigma2) -> Result<Graph> {
    let (distances, coords) = match input {
        KnnInput::Points(p) => {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite coordinate".into()));
            }
            (euclidean_distances(p), Some(p.to_owned()))
        }
        KnnInput::Distances(d) => {
            validate_distances(d)?;
            // exact symmetry for the weight matrix
            let sym = (&d + &d.t()) * 0.5;
            (sym, None)
        }
    };
    let n = distances.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k >= n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be smaller than the node count {n}"
        )));
    }
    if let Sigma2::Fixed(s) = sigma2 {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive, got {s}"
            )));
        }
    }

    let mut edge = Array2::from_elem((n, n), false);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| distances[[i, a]].total_cmp(&distances[[i, b]]).then(a.cmp(&b)));
        for &j in &order[..k] {
            edge[[i, j]] = true;
            edge[[j, i]] = true;
        }
    }

    let s2 = match sigma2 {
        Sigma2::Fixed(s) => s,
        Sigma2::Auto => {
            let (sum, count) = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter(|&(i, j)| edge[[i, j]])
                .fold((0.0, 0usize), |(s, c), (i, j)| {
                    (s + distances[[i, j]].powi(2), c + 1)
                });
            let mean = sum / count as f64;
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };

    let mut weights = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if edge[[i, j]] {
                weights[[i, j]] = (-distances[[i, j]].powi(2) / s2).exp();
            }
        }
    }

    let mut g = Graph::from_weights(weights)?;
    if let Some(c) = coords {
        g = g.with_coords(c)?;
    }
    if !g.is_connected() {
        let comps = g.components().into_iter().max().map_or(0, |m| m + 1);
        log::warn!("k-NN graph with k = {k} on {n} nodes is disconnected ({comps} components)");
    }
    Ok(g)
}

/// Normalized Laplacian `I - D^{-1/2} W D^{-1/2}`.
pub fn normalized_laplacian(g: &Graph) -> Result<Array2<f64>> {
    let n = g.n();
    let mut inv_sqrt = Vec::with_capacity(n);
    for i in 0..n {
        let d = g.degree(i);
        if d <= 0.0 {
            return Err(Error::DegenerateGraph { node: i });
        }
        inv_sqrt.push(1.0 / d.sqrt());
    }
    let w = g.weights();
    let mut lap = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let off = w[[i, j]] * inv_sqrt[i] * inv_sqrt[j];
            lap[[i, j]] = if i == j { 1.0 - off } else { -off };
        }
    }
    // bitwise symmetry regardless of multiplication order
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (lap[[i, j]] + lap[[j, i]]);
            lap[[i, j]] = v;
            lap[[j, i]] = v;
        }
    }
    Ok(lap)
}
