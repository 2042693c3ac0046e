//! Discretized edge functions and the embed/cut-off pair between networks.
//!
//! An edge function is piecewise constant on a uniform grid of the unit
//! interval: `values[j][k]` is the average of component `j` over the cell
//! `[k/N, (k+1)/N)`. Cell averages make the l1 quadrature exact and keep the
//! upwind scheme conservative. The trace at an endpoint is the adjacent
//! cell's value, the only first-order-consistent choice without
//! extrapolation; discrete domain-membership tests inherit an `O(1/N)`
//! tolerance from this convention.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};
use num_complex::Complex64;

/// Scalar types an edge function can carry (real or complex).
pub trait Scalar:
    Copy + PartialEq + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    const ZERO: Self;
    fn abs(self) -> f64;
    fn is_finite(self) -> bool;
    fn scale(self, k: f64) -> Self;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;

    fn abs(self) -> f64 {
        libm::fabs(self)
    }

    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn scale(self, k: f64) -> Self {
        self * k
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);

    fn abs(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    fn scale(self, k: f64) -> Self {
        Complex64::new(self.re * k, self.im * k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridError {
    EmptyShape,
    ValueCount {
        expected: usize,
        got: usize,
    },
    NonFinite {
        edge: usize,
        cell: usize,
    },
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GridError::EmptyShape => {
                write!(f, "grid functions need at least one edge and one cell")
            }
            GridError::ValueCount { expected, got } => {
                write!(f, "expected {} values, got {}", expected, got)
            }
            GridError::NonFinite { edge, cell } => {
                write!(
                    f,
                    "non-finite value at edge {}, cell {}",
                    edge + 1,
                    cell + 1
                )
            }
            GridError::ShapeMismatch { left, right } => write!(
                f,
                "shape mismatch: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
        }
    }
}

/// Piecewise-constant function on `edge_count` copies of the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T = f64> {
    edge_count: usize,
    cells: usize,
    values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn zeros(edge_count: usize, cells: usize) -> Self {
        assert!(edge_count > 0 && cells > 0, "degenerate grid shape");
        Self {
            edge_count,
            cells,
            values: vec![T::ZERO; edge_count * cells],
        }
    }

    /// Builds from row-major values, checking shape and finiteness.
    pub fn from_values(edge_count: usize, cells: usize, values: Vec<T>) -> Result<Self, GridError> {
        if edge_count == 0 || cells == 0 {
            return Err(GridError::EmptyShape);
        }
        if values.len() != edge_count * cells {
            return Err(GridError::ValueCount {
                expected: edge_count * cells,
                got: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(GridError::NonFinite {
                    edge: i / cells,
                    cell: i % cells,
                });
            }
        }
        Ok(Self {
            edge_count,
            cells,
            values,
        })
    }

    /// Samples `f(edge, cell_center)` on every cell.
    pub fn from_fn(edge_count: usize, cells: usize, mut f: impl FnMut(usize, f64) -> T) -> Self {
        let mut g = Self::zeros(edge_count, cells);
        let h = 1.0 / cells as f64;
        for j in 0..edge_count {
            for k in 0..cells {
                let s = (k as f64 + 0.5) * h;
                g.values[j * cells + k] = f(j, s);
            }
        }
        g
    }

    pub fn constant(edge_count: usize, cells: usize, value: T) -> Self {
        let mut g = Self::zeros(edge_count, cells);
        g.values.iter_mut().for_each(|v| *v = value);
        g
    }

    /// Indicator of one edge: the constant 1-profile there, zero elsewhere.
    pub fn edge_indicator(edge_count: usize, cells: usize, edge: usize, one: T) -> Self {
        assert!(edge < edge_count);
        let mut g = Self::zeros(edge_count, cells);
        for k in 0..cells {
            g.values[edge * cells + k] = one;
        }
        g
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn get(&self, edge: usize, cell: usize) -> T {
        self.values[edge * self.cells + cell]
    }

    pub fn set(&mut self, edge: usize, cell: usize, value: T) {
        self.values[edge * self.cells + cell] = value;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn edge_values(&self, edge: usize) -> &[T] {
        &self.values[edge * self.cells..(edge + 1) * self.cells]
    }

    /// Exact l1 norm of the represented piecewise-constant function.
    pub fn l1_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.abs()).sum();
        sum / self.cells as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Result<Self, GridError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self, GridError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.scale(k));
        out
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, GridError> {
        if self.edge_count != other.edge_count || self.cells != other.cells {
            return Err(GridError::ShapeMismatch {
                left: (self.edge_count, self.cells),
                right: (other.edge_count, other.cells),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            edge_count: self.edge_count,
            cells: self.cells,
            values,
        })
    }

    /// l1 distance between two functions of the same shape.
    pub fn l1_distance(&self, other: &Self) -> Result<f64, GridError> {
        Ok(self.sub(other)?.l1_norm())
    }

    /// Traces at the endpoints: `(f(0), f(1))` per edge, using the adjacent
    /// cell's value.
    pub fn boundary_traces(&self) -> (Vec<T>, Vec<T>) {
        let at_zero = (0..self.edge_count).map(|j| self.get(j, 0)).collect();
        let at_one = (0..self.edge_count)
            .map(|j| self.get(j, self.cells - 1))
            .collect();
        (at_zero, at_one)
    }
}

impl GridFunction<f64> {
    pub fn to_complex(&self) -> GridFunction<Complex64> {
        GridFunction {
            edge_count: self.edge_count,
            cells: self.cells,
            values: self
                .values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        }
    }
}

impl GridFunction<Complex64> {
    pub fn real_part(&self) -> GridFunction<f64> {
        GridFunction {
            edge_count: self.edge_count,
            cells: self.cells,
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.values
            .iter()
            .map(|v| libm::fabs(v.im))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApproxPairError {
    InjectionLength { expected: usize, got: usize },
    TargetOutOfRange { small_edge: usize, image: usize },
    NotInjective { image: usize },
}

impl fmt::Display for ApproxPairError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ApproxPairError::InjectionLength { expected, got } => {
                write!(f, "injection has length {}, expected {}", got, expected)
            }
            ApproxPairError::TargetOutOfRange { small_edge, image } => write!(
                f,
                "edge {} maps to {} outside the large edge set",
                small_edge + 1,
                image + 1
            ),
            ApproxPairError::NotInjective { image } => {
                write!(f, "two edges map to the same large edge {}", image + 1)
            }
        }
    }
}

/// Edge injection behind the embedding `E_n` and the cut-off `P_n`.
///
/// Under the coinciding-labels convention of nested networks the injection
/// is the identity on the first `small_edges` indices, but any injective map
/// is supported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApproxPair {
    small_edges: usize,
    large_edges: usize,
    injection: Vec<usize>,
}

impl ApproxPair {
    pub fn new(
        small_edges: usize,
        large_edges: usize,
        injection: Vec<usize>,
    ) -> Result<Self, ApproxPairError> {
        if injection.len() != small_edges {
            return Err(ApproxPairError::InjectionLength {
                expected: small_edges,
                got: injection.len(),
            });
        }
        let mut seen = vec![false; large_edges];
        for (j, &img) in injection.iter().enumerate() {
            if img >= large_edges {
                return Err(ApproxPairError::TargetOutOfRange {
                    small_edge: j,
                    image: img,
                });
            }
            if seen[img] {
                return Err(ApproxPairError::NotInjective { image: img });
            }
            seen[img] = true;
        }
        Ok(Self {
            small_edges,
            large_edges,
            injection,
        })
    }

    /// Identity injection of the first `small_edges` indices.
    pub fn prefix(small_edges: usize, large_edges: usize) -> Self {
        assert!(small_edges <= large_edges);
        Self {
            small_edges,
            large_edges,
            injection: (0..small_edges).collect(),
        }
    }

    pub fn small_edges(&self) -> usize {
        self.small_edges
    }

    pub fn large_edges(&self) -> usize {
        self.large_edges
    }

    pub fn injection(&self) -> &[usize] {
        &self.injection
    }

    /// `E_n`: copies the components onto their injected indices and extends
    /// by zeros. Norm preserving.
    pub fn embed<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction<T>, GridError> {
        if f.edge_count() != self.small_edges {
            return Err(GridError::ShapeMismatch {
                left: (f.edge_count(), f.cells()),
                right: (self.small_edges, f.cells()),
            });
        }
        let mut out = GridFunction::zeros(self.large_edges, f.cells());
        for (j, &img) in self.injection.iter().enumerate() {
            for k in 0..f.cells() {
                out.set(img, k, f.get(j, k));
            }
        }
        Ok(out)
    }

    /// `P_n`: keeps the injected components only. A contraction with
    /// `P_n E_n = Id` exactly.
    pub fn project<T: Scalar>(&self, f: &GridFunction<T>) -> Result<GridFunction<T>, GridError> {
        if f.edge_count() != self.large_edges {
            return Err(GridError::ShapeMismatch {
                left: (f.edge_count(), f.cells()),
                right: (self.large_edges, f.cells()),
            });
        }
        let mut out = GridFunction::zeros(self.small_edges, f.cells());
        for (j, &img) in self.injection.iter().enumerate() {
            for k in 0..f.cells() {
                out.set(j, k, f.get(img, k));
            }
        }
        Ok(out)
    }
}
