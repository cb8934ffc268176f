//! Uniform space-time grids on a rectangle and the finite-difference
//! machinery built on them.
//!
//! Node `(i, j)` has flat index `i + nx * j`. Boundary nodes are the nodes on
//! the four edges; the measurement set Γ is a union of edges with the corner
//! nodes removed (corners sit on two edges and have no single normal).

mod cg;
pub mod convergence;
mod solver;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Table;

pub use solver::{
    solve_adjoint, solve_adjoint_direct, solve_forward, Coefficients, ParabolicProblem,
    RobinData, Source,
};

/// One side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    pub fn normal(self) -> [f64; 2] {
        match self {
            Edge::Left => [-1.0, 0.0],
            Edge::Right => [1.0, 0.0],
            Edge::Bottom => [0.0, -1.0],
            Edge::Top => [0.0, 1.0],
        }
    }
}

/// Spatial part of a grid: an `nx × ny` lattice over `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialMesh {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl SpatialMesh {
    pub fn new(nx: usize, ny: usize, x: [f64; 2], y: [f64; 2]) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Invalid(format!(
                "mesh needs at least 3 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(x[1] > x[0]) || !(y[1] > y[0]) {
            return Err(Error::Invalid("mesh bounds must be increasing".into()));
        }
        Ok(Self {
            nx,
            ny,
            x0: x[0],
            x1: x[1],
            y0: y[0],
            y1: y[1],
        })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, [0.0, 1.0], [0.0, 1.0])
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }

    pub fn lx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn ly(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.lx() * self.ly()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x1
        } else {
            self.x0 + i as f64 * self.hx()
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            self.y1
        } else {
            self.y0 + j as f64 * self.hy()
        }
    }

    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.ij(node);
        (self.x(i), self.y(j))
    }

    /// Trapezoid weight of column `i` (half spacing on the two end columns).
    pub fn weight_x(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.nx {
            0.5 * self.hx()
        } else {
            self.hx()
        }
    }

    pub fn weight_y(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.ny {
            0.5 * self.hy()
        } else {
            self.hy()
        }
    }

    /// Tensor trapezoid weight of a node; also the lumped mass of its cell.
    pub fn weight(&self, node: usize) -> f64 {
        let (i, j) = self.ij(node);
        self.weight_x(i) * self.weight_y(j)
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let (i, j) = self.ij(node);
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Edges a node lies on (two for corners, none for interior nodes).
    pub fn edges_of(&self, node: usize) -> Vec<Edge> {
        let (i, j) = self.ij(node);
        let mut out = Vec::with_capacity(2);
        if i == 0 {
            out.push(Edge::Left);
        }
        if i + 1 == self.nx {
            out.push(Edge::Right);
        }
        if j == 0 {
            out.push(Edge::Bottom);
        }
        if j + 1 == self.ny {
            out.push(Edge::Top);
        }
        out
    }

    /// Node indices along an edge, corners excluded.
    pub fn edge_nodes(&self, edge: Edge) -> Vec<usize> {
        match edge {
            Edge::Left => (1..self.ny - 1).map(|j| self.node(0, j)).collect(),
            Edge::Right => (1..self.ny - 1).map(|j| self.node(self.nx - 1, j)).collect(),
            Edge::Bottom => (1..self.nx - 1).map(|i| self.node(i, 0)).collect(),
            Edge::Top => (1..self.nx - 1).map(|i| self.node(i, self.ny - 1)).collect(),
        }
    }

    /// Node spacing along an edge.
    pub fn edge_spacing(&self, edge: Edge) -> f64 {
        match edge {
            Edge::Left | Edge::Right => self.hy(),
            Edge::Bottom | Edge::Top => self.hx(),
        }
    }

    pub fn edge_length(&self, edge: Edge) -> f64 {
        match edge {
            Edge::Left | Edge::Right => self.ly(),
            Edge::Bottom | Edge::Top => self.lx(),
        }
    }

    /// Outward unit normal; corners get the normalized diagonal.
    pub fn normal(&self, node: usize) -> Option<[f64; 2]> {
        let edges = self.edges_of(node);
        if edges.is_empty() {
            return None;
        }
        let mut n = [0.0, 0.0];
        for e in &edges {
            let en = e.normal();
            n[0] += en[0];
            n[1] += en[1];
        }
        let norm = (n[0] * n[0] + n[1] * n[1]).sqrt();
        Some([n[0] / norm, n[1] / norm])
    }

    /// One-sided second-order x-derivative at a boundary column, centered
    /// difference elsewhere.
    fn ddx(&self, values: &[f64], i: usize, j: usize) -> f64 {
        let h = self.hx();
        let v = |ii: usize| values[self.node(ii, j)];
        if i == 0 {
            (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
        } else if i + 1 == self.nx {
            let n = self.nx - 1;
            (3.0 * v(n) - 4.0 * v(n - 1) + v(n - 2)) / (2.0 * h)
        } else {
            (v(i + 1) - v(i - 1)) / (2.0 * h)
        }
    }

    fn ddy(&self, values: &[f64], i: usize, j: usize) -> f64 {
        let h = self.hy();
        let v = |jj: usize| values[self.node(i, jj)];
        if j == 0 {
            (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
        } else if j + 1 == self.ny {
            let n = self.ny - 1;
            (3.0 * v(n) - 4.0 * v(n - 1) + v(n - 2)) / (2.0 * h)
        } else {
            (v(j + 1) - v(j - 1)) / (2.0 * h)
        }
    }

    /// Outward normal derivative of nodal values at a boundary node.
    pub fn normal_derivative(&self, values: &[f64], node: usize) -> Option<f64> {
        let n = self.normal(node)?;
        let (i, j) = self.ij(node);
        let mut d = 0.0;
        if n[0] != 0.0 {
            d += n[0] * self.ddx(values, i, j);
        }
        if n[1] != 0.0 {
            d += n[1] * self.ddy(values, i, j);
        }
        Some(d)
    }

    /// Bilinear interpolation of nodal values; points outside are clamped.
    pub fn interpolate(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let (i, fx) = locate(x, self.x0, self.hx(), self.nx);
        let (j, fy) = locate(y, self.y0, self.hy(), self.ny);
        let v00 = values[self.node(i, j)];
        let v10 = values[self.node(i + 1, j)];
        let v01 = values[self.node(i, j + 1)];
        let v11 = values[self.node(i + 1, j + 1)];
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }
}

/// Cell index and fractional offset of `x` on a uniform axis, clamped.
fn locate(x: f64, x0: f64, h: f64, n: usize) -> (usize, f64) {
    let s = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    (i, s - i as f64)
}

/// Trapezoid weights for an increasing sequence of sample times.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let dt = times[k] - times[k - 1];
        w[k - 1] += 0.5 * dt;
        w[k] += 0.5 * dt;
    }
    w
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| {
                if k + 1 == n {
                    b
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// A node of the measurement set Γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaNode {
    pub node: usize,
    pub edge: Edge,
    /// Quadrature weight along the edge (the node spacing).
    pub weight: f64,
}

/// Uniform space-time grid over `Ω × [0, T]` with the measurement set Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    pub mesh: SpatialMesh,
    pub nt: usize,
    pub final_time: f64,
    gamma: Vec<GammaNode>,
    gamma_edges: Vec<Edge>,
}

impl SpaceTimeGrid {
    pub fn new(mesh: SpatialMesh, nt: usize, final_time: f64, gamma: &[Edge]) -> Result<Self> {
        if nt < 2 {
            return Err(Error::Invalid(format!("need at least 2 time levels, got {nt}")));
        }
        if !(final_time > 0.0) {
            return Err(Error::Invalid("final time must be positive".into()));
        }
        let mut edges: Vec<Edge> = Vec::new();
        for e in gamma {
            if !edges.contains(e) {
                edges.push(*e);
            }
        }
        if edges.is_empty() {
            return Err(Error::Invalid("measurement set must contain at least one edge".into()));
        }
        let gamma = edges
            .iter()
            .flat_map(|&edge| {
                let weight = mesh.edge_spacing(edge);
                mesh.edge_nodes(edge)
                    .into_iter()
                    .map(move |node| GammaNode { node, edge, weight })
            })
            .collect();
        Ok(Self {
            mesh,
            nt,
            final_time,
            gamma,
            gamma_edges: edges,
        })
    }

    /// Unit square, full boundary as Γ.
    pub fn unit(n_space: usize, nt: usize, final_time: f64) -> Result<Self> {
        Self::new(SpatialMesh::unit_square(n_space)?, nt, final_time, &Edge::ALL)
    }

    pub fn ht(&self) -> f64 {
        self.final_time / (self.nt - 1) as f64
    }

    pub fn time(&self, level: usize) -> f64 {
        if level + 1 == self.nt {
            self.final_time
        } else {
            level as f64 * self.ht()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|n| self.time(n)).collect()
    }

    pub fn gamma(&self) -> &[GammaNode] {
        &self.gamma
    }

    pub fn gamma_edges(&self) -> &[Edge] {
        &self.gamma_edges
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.mesh.len()).filter(|&k| self.mesh.is_boundary(k)).collect()
    }

    /// Same domain and Γ with `factor`× finer spacing in space and time.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let m = &self.mesh;
        let mesh = SpatialMesh::new(
            factor * (m.nx - 1) + 1,
            factor * (m.ny - 1) + 1,
            [m.x0, m.x1],
            [m.y0, m.y1],
        )?;
        Self::new(mesh, factor * (self.nt - 1) + 1, self.final_time, &self.gamma_edges)
    }
}

/// Scalar field values at every node for a sequence of times.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub mesh: SpatialMesh,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl FieldSeries {
    pub fn zeros(mesh: SpatialMesh, times: Vec<f64>) -> Self {
        let values = vec![vec![0.0; mesh.len()]; times.len()];
        Self { mesh, times, values }
    }

    pub fn on_grid(grid: &SpaceTimeGrid) -> Self {
        Self::zeros(grid.mesh, grid.times())
    }

    pub fn from_fn(mesh: SpatialMesh, times: Vec<f64>, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = times
            .iter()
            .map(|&t| {
                (0..mesh.len())
                    .map(|k| {
                        let (x, y) = mesh.coords(k);
                        f(x, y, t)
                    })
                    .collect()
            })
            .collect();
        Self { mesh, times, values }
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.values.len() != self.times.len() {
            return Err(Error::Shape(format!(
                "{} time levels but {} value rows",
                self.times.len(),
                self.values.len()
            )));
        }
        if let Some(row) = self.values.iter().find(|r| r.len() != self.mesh.len()) {
            return Err(Error::Shape(format!(
                "row of length {} on a mesh of {} nodes",
                row.len(),
                self.mesh.len()
            )));
        }
        Ok(())
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .filter(|v| !v.is_nan())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Linear-in-time, bilinear-in-space interpolation.
    pub fn sample(&self, x: f64, y: f64, t: f64) -> f64 {
        let (n, w) = self.time_bracket(t);
        let a = self.mesh.interpolate(&self.values[n], x, y);
        if w == 0.0 || n + 1 == self.times.len() {
            return a;
        }
        let b = self.mesh.interpolate(&self.values[n + 1], x, y);
        (1.0 - w) * a + w * b
    }

    /// Nodal values at time `t` (linear interpolation between levels).
    pub fn at_time(&self, t: f64) -> Vec<f64> {
        let (n, w) = self.time_bracket(t);
        if w == 0.0 || n + 1 == self.times.len() {
            return self.values[n].clone();
        }
        self.values[n]
            .iter()
            .zip(&self.values[n + 1])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }

    fn time_bracket(&self, t: f64) -> (usize, f64) {
        let ts = &self.times;
        if ts.len() == 1 || t <= ts[0] {
            return (0, 0.0);
        }
        if t >= ts[ts.len() - 1] {
            return (ts.len() - 1, 0.0);
        }
        let n = ts.partition_point(|&s| s <= t) - 1;
        let w = (t - ts[n]) / (ts[n + 1] - ts[n]);
        (n, w)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mesh: self.mesh,
            times: self.times.clone(),
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_domain(other)?;
        Ok(Self {
            mesh: self.mesh,
            times: self.times.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect())
                .collect(),
        })
    }

    fn same_domain(&self, other: &Self) -> Result<()> {
        if self.mesh != other.mesh || self.times != other.times {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(())
    }

    /// CSV rows `t, x, y, value`.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(["t", "x", "y", "value"]);
        for (t, row) in self.times.iter().zip(&self.values) {
            for (k, &v) in row.iter().enumerate() {
                let (x, y) = self.mesh.coords(k);
                table.push(vec![*t, x, y, v]);
            }
        }
        table
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::export_table(&self.to_table(), path)
    }
}

/// Values on Γ for a sequence of times: `values[time][gamma_index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub mesh: SpatialMesh,
    pub nodes: Vec<GammaNode>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl BoundaryTrace {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self {
            mesh: grid.mesh,
            nodes: grid.gamma().to_vec(),
            times: grid.times(),
            values: vec![vec![0.0; grid.gamma().len()]; grid.nt],
        }
    }

    /// Trace from `f(x, y, t, normal)` at every Γ node and grid time.
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, f64, f64, [f64; 2]) -> f64) -> Self {
        let mut trace = Self::zeros(grid);
        for (n, t) in grid.times().into_iter().enumerate() {
            for (g, gn) in grid.gamma().iter().enumerate() {
                let (x, y) = grid.mesh.coords(gn.node);
                trace.values[n][g] = f(x, y, t, gn.edge.normal());
            }
        }
        trace
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn coords(&self, g: usize) -> (f64, f64) {
        self.mesh.coords(self.nodes[g].node)
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.values.len() != self.times.len()
            || self.values.iter().any(|r| r.len() != self.nodes.len())
        {
            return Err(Error::Shape(format!(
                "trace expects {} x {} values",
                self.times.len(),
                self.nodes.len()
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|&v| f(v)).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_domain(other)?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect())
                .collect(),
            ..self.clone()
        })
    }

    fn same_domain(&self, other: &Self) -> Result<()> {
        if self.mesh != other.mesh || self.times != other.times || self.nodes != other.nodes {
            return Err(Error::Shape("traces live on different boundary sets".into()));
        }
        Ok(())
    }

    /// Time-reversed copy; level `n` becomes level `nt - 1 - n`.
    pub fn reversed(&self) -> Self {
        let t_end = *self.times.last().unwrap_or(&0.0);
        let mut values = self.values.clone();
        values.reverse();
        let times = self.times.iter().rev().map(|t| t_end - t).collect();
        Self {
            values,
            times,
            ..self.clone()
        }
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).map(f64::sqrt).unwrap_or(f64::NAN)
    }

    /// CSV rows `t, x, y, value`.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(["t", "x", "y", "value"]);
        for (t, row) in self.times.iter().zip(&self.values) {
            for (g, &v) in row.iter().enumerate() {
                let (x, y) = self.coords(g);
                table.push(vec![*t, x, y, v]);
            }
        }
        table
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::export_table(&self.to_table(), path)
    }
}

/// Trapezoid-rule L² pairing over the space-time domain of a field type.
pub trait SpaceTimeInner {
    fn inner(&self, other: &Self) -> Result<f64>;
}

impl SpaceTimeInner for FieldSeries {
    fn inner(&self, other: &Self) -> Result<f64> {
        self.same_domain(other)?;
        self.check_shape()?;
        let wt = trapezoid_weights(&self.times);
        let mut acc = 0.0;
        for (n, w) in wt.iter().enumerate() {
            let a = &self.values[n];
            let b = &other.values[n];
            let s: f64 = (0..a.len()).map(|k| self.mesh.weight(k) * a[k] * b[k]).sum();
            acc += w * s;
        }
        Ok(acc)
    }
}

impl SpaceTimeInner for BoundaryTrace {
    fn inner(&self, other: &Self) -> Result<f64> {
        self.same_domain(other)?;
        self.check_shape()?;
        let wt = trapezoid_weights(&self.times);
        let mut acc = 0.0;
        for (n, w) in wt.iter().enumerate() {
            let a = &self.values[n];
            let b = &other.values[n];
            let s: f64 = self
                .nodes
                .iter()
                .enumerate()
                .map(|(g, gn)| gn.weight * a[g] * b[g])
                .sum();
            acc += w * s;
        }
        Ok(acc)
    }
}

/// `∫∫ a·b` over `Ω×(0,T)` or `Γ×(0,T)` by the trapezoid rule.
pub fn inner_product_space_time<T: SpaceTimeInner>(a: &T, b: &T) -> Result<f64> {
    a.inner(b)
}

/// Outward normal derivative of `field` at every Γ node and time level.
pub fn boundary_flux(field: &FieldSeries, grid: &SpaceTimeGrid) -> Result<BoundaryTrace> {
    if field.mesh != grid.mesh {
        return Err(Error::Shape("field mesh differs from grid mesh".into()));
    }
    field.check_shape()?;
    let values = field
        .values
        .iter()
        .map(|row| {
            grid.gamma()
                .iter()
                .map(|gn| {
                    grid.mesh
                        .normal_derivative(row, gn.node)
                        .expect("Γ nodes are boundary nodes")
                })
                .collect()
        })
        .collect();
    Ok(BoundaryTrace {
        mesh: grid.mesh,
        nodes: grid.gamma().to_vec(),
        times: field.times.clone(),
        values,
    })
}
