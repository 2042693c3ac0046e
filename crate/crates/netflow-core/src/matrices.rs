//! Structural matrices of a network and the velocity-weighted boundary
//! operator.
//!
//! Conventions: rows of the incidence matrices are vertices, columns are
//! edges. The adjacency matrix `A = Phi+ (Phi-)^T` is vertex by vertex, the
//! line-graph adjacency `B = (Phi-)^T Phi+` is edge by edge with
//! `B[i][j] = 1` exactly when edge `j` flows into edge `i` through a shared
//! vertex. Every product construction is cross-checked against its
//! entrywise rule; a mismatch would indicate an index-convention bug and is
//! surfaced as an error rather than silently accepted.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::DirectedGraph;
use crate::sparse::SparseMatrix;

/// Internal consistency failure between a matrix product and its entrywise rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyError {
    pub matrix: &'static str,
    pub row: usize,
    pub col: usize,
    pub product: i64,
    pub entrywise: i64,
}

impl fmt::Display for ConsistencyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} mismatch at ({}, {}): product gives {}, entrywise rule gives {}",
            self.matrix,
            self.row + 1,
            self.col + 1,
            self.product,
            self.entrywise
        )
    }
}

/// Incidence, adjacency and line-graph matrices of a validated graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrices {
    pub phi_minus: SparseMatrix<i64>,
    pub phi_plus: SparseMatrix<i64>,
    pub phi: SparseMatrix<i64>,
    pub adjacency: SparseMatrix<i64>,
    pub line_adjacency: SparseMatrix<i64>,
}

/// Outgoing and incoming incidence matrices plus their difference.
pub fn incidence_matrices(
    g: &DirectedGraph,
) -> (SparseMatrix<i64>, SparseMatrix<i64>, SparseMatrix<i64>) {
    let (nv, ne) = (g.vertex_count(), g.edge_count());
    let minus: Vec<(usize, usize, i64)> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(j, &(t, _))| (t, j, 1))
        .collect();
    let plus: Vec<(usize, usize, i64)> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(j, &(_, h))| (h, j, 1))
        .collect();
    let phi_minus = SparseMatrix::from_triplets(nv, ne, &minus);
    let phi_plus = SparseMatrix::from_triplets(nv, ne, &plus);
    let diff: Vec<(usize, usize, i64)> = plus
        .into_iter()
        .chain(minus.into_iter().map(|(r, c, v)| (r, c, -v)))
        .collect();
    let phi = SparseMatrix::from_triplets(nv, ne, &diff);
    (phi_minus, phi_plus, phi)
}

fn adjacency_entrywise(g: &DirectedGraph) -> SparseMatrix<i64> {
    let nv = g.vertex_count();
    let triplets: Vec<(usize, usize, i64)> = g.edges().iter().map(|&(t, h)| (h, t, 1)).collect();
    SparseMatrix::from_triplets(nv, nv, &triplets)
}

fn line_adjacency_entrywise(g: &DirectedGraph) -> SparseMatrix<i64> {
    let ne = g.edge_count();
    let mut triplets = Vec::new();
    for (i, &(ti, _)) in g.edges().iter().enumerate() {
        for (j, &(_, hj)) in g.edges().iter().enumerate() {
            if hj == ti {
                triplets.push((i, j, 1));
            }
        }
    }
    SparseMatrix::from_triplets(ne, ne, &triplets)
}

fn cross_check(
    name: &'static str,
    product: &SparseMatrix<i64>,
    entrywise: &SparseMatrix<i64>,
) -> Result<(), ConsistencyError> {
    if product == entrywise {
        return Ok(());
    }
    for r in 0..product.rows() {
        for c in 0..product.cols() {
            let (p, e) = (product.get(r, c), entrywise.get(r, c));
            if p != e {
                return Err(ConsistencyError {
                    matrix: name,
                    row: r,
                    col: c,
                    product: p,
                    entrywise: e,
                });
            }
        }
    }
    unreachable!("matrices differ but no entry mismatch found");
}

impl NetworkMatrices {
    /// Builds all five matrices of a validated graph, cross-checking each
    /// product against its entrywise description.
    pub fn from_graph(g: &DirectedGraph) -> Result<Self, ConsistencyError> {
        let (phi_minus, phi_plus, phi) = incidence_matrices(g);
        let adjacency = phi_plus.matmul(&phi_minus.transpose());
        cross_check("adjacency", &adjacency, &adjacency_entrywise(g))?;
        let line_adjacency = phi_minus.transpose().matmul(&phi_plus);
        cross_check(
            "line adjacency",
            &line_adjacency,
            &line_adjacency_entrywise(g),
        )?;
        Ok(Self {
            phi_minus,
            phi_plus,
            phi,
            adjacency,
            line_adjacency,
        })
    }
}

/// Per-edge positive velocities with their uniform bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    c: Vec<f64>,
    min: f64,
    max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocityError {
    NonPositive { index: usize, value: f64 },
    NotFinite { index: usize },
}

impl fmt::Display for VelocityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VelocityError::NonPositive { index, value } => {
                write!(f, "velocity c{} = {} must be positive", index + 1, value)
            }
            VelocityError::NotFinite { index } => {
                write!(f, "velocity c{} is not finite", index + 1)
            }
        }
    }
}

impl VelocityProfile {
    pub fn new(c: Vec<f64>) -> Result<Self, VelocityError> {
        for (j, &v) in c.iter().enumerate() {
            if !v.is_finite() {
                return Err(VelocityError::NotFinite { index: j });
            }
            if v <= 0.0 {
                return Err(VelocityError::NonPositive { index: j, value: v });
            }
        }
        let min = c.iter().copied().fold(f64::INFINITY, f64::min);
        let max = c.iter().copied().fold(0.0, f64::max);
        Ok(Self { c, min, max })
    }

    pub fn unit(edge_count: usize) -> Self {
        Self {
            c: vec![1.0; edge_count],
            min: 1.0,
            max: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn get(&self, edge: usize) -> f64 {
        self.c[edge]
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    /// Lower uniform bound m with 0 < m <= c_j.
    pub fn min_bound(&self) -> f64 {
        self.min
    }

    /// Upper uniform bound M with c_j <= M.
    pub fn max_bound(&self) -> f64 {
        self.max
    }

    pub fn is_unit(&self) -> bool {
        self.c.iter().all(|&v| v == 1.0)
    }

    /// Keeps the velocities of the first `edge_count` edges.
    pub fn prefix(&self, edge_count: usize) -> Result<Self, VelocityError> {
        Self::new(self.c[..edge_count].to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryError {
    ShapeMismatch {
        rows: usize,
        cols: usize,
        edges: usize,
    },
    NegativeWeight {
        row: usize,
        col: usize,
        value: f64,
    },
    Velocity(VelocityError),
}

impl fmt::Display for BoundaryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryError::ShapeMismatch { rows, cols, edges } => write!(
                f,
                "boundary weights are {}x{} but the network has {} edges",
                rows, cols, edges
            ),
            BoundaryError::NegativeWeight { row, col, value } => write!(
                f,
                "boundary weight at ({}, {}) is negative: {}",
                row + 1,
                col + 1,
                value
            ),
            BoundaryError::Velocity(e) => write!(f, "{}", e),
        }
    }
}

/// The velocity-weighted boundary coupling `B_C` with its l1 operator norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperator {
    b_c: SparseMatrix<f64>,
    l1_norm: f64,
}

impl BoundaryOperator {
    /// Scales nonnegative boundary weights entrywise by `c_j / c_i`.
    pub fn new(weights: &SparseMatrix<f64>, v: &VelocityProfile) -> Result<Self, BoundaryError> {
        if weights.rows() != weights.cols() || weights.rows() != v.len() {
            return Err(BoundaryError::ShapeMismatch {
                rows: weights.rows(),
                cols: weights.cols(),
                edges: v.len(),
            });
        }
        for (r, c, w) in weights.iter() {
            if w < 0.0 || !w.is_finite() {
                return Err(BoundaryError::NegativeWeight {
                    row: r,
                    col: c,
                    value: w,
                });
            }
        }
        let b_c = weights.map(|i, j, w| w * v.get(j) / v.get(i));
        let l1_norm = b_c.l1_operator_norm();
        Ok(Self { b_c, l1_norm })
    }

    /// Boundary operator induced by the 0/1 line-graph adjacency.
    pub fn from_line_adjacency(
        line: &SparseMatrix<i64>,
        v: &VelocityProfile,
    ) -> Result<Self, BoundaryError> {
        Self::new(&line.to_f64(), v)
    }

    pub fn matrix(&self) -> &SparseMatrix<f64> {
        &self.b_c
    }

    /// Maximum absolute column sum, the l1 operator norm.
    pub fn l1_operator_norm(&self) -> f64 {
        self.l1_norm
    }
}
