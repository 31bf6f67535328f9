//! Supra-matrices and the spectral quantities built on them.
//!
//! The degree tensor of the multilayer Laplacian contracts to the diagonal
//! matrix of row strengths of the supra-adjacency, so `supra_laplacian` is
//! computed as `diag(rowsum(A)) - A` directly on the flattened matrix.

use super::eigen::symmetric_eigenvalues;
use super::{LayerGraph, LayerId, MultilayerNetwork};
use crate::error::{Error, Result};

/// Margins at or below this (relative to the largest layer `λ2`, floored at
/// one) count as "not superdiffusive". Identical-layer multiplexes have an
/// exact tie that round-off would otherwise break either way.
pub const SUPERDIFFUSION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupraKind {
    Adjacency,
    Degree,
    Laplacian,
}

/// Dense row-major square matrix tagged with what it represents.
#[derive(Clone, Debug, PartialEq)]
pub struct SupraMatrix {
    dim: usize,
    kind: SupraKind,
    data: Vec<f64>,
}

impl SupraMatrix {
    pub fn new(dim: usize, kind: SupraKind, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::InvalidArgument(format!("{} entries for dim {dim}", data.len())));
        }
        Ok(Self { dim, kind, data })
    }

    pub fn zeros(dim: usize, kind: SupraKind) -> Self {
        Self { dim, kind, data: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> SupraKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `dim × dim` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, size: usize) -> Vec<f64> {
        (0..size).flat_map(|i| self.row(r0 + i)[c0..c0 + size].iter().copied()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Exact symmetry, to the last bit.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (i + 1..self.dim).all(|j| self.get(i, j) == self.get(j, i)))
    }

    fn is_nearly_symmetric(&self) -> bool {
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        (0..self.dim)
            .all(|i| (i + 1..self.dim).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= 1e-12 * scale))
    }

    /// `y = M x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn laplacian_of(adj: &SupraMatrix) -> SupraMatrix {
        let n = adj.dim;
        let mut data: Vec<f64> = adj.data.iter().map(|a| -a).collect();
        for (i, s) in adj.row_sums().into_iter().enumerate() {
            data[i * n + i] += s;
        }
        SupraMatrix { dim: n, kind: SupraKind::Laplacian, data }
    }
}

fn write_layer(m: &mut SupraMatrix, g: &LayerGraph, offset: usize) {
    let n = m.dim;
    for e in g.edges() {
        let (i, j) = (offset + e.src, offset + e.dst);
        m.data[i * n + j] = e.weight;
        if !g.is_directed() {
            m.data[j * n + i] = e.weight;
        }
    }
}

/// `NL × NL` matricized adjacency tensor. Diagonal blocks are the layers;
/// off-diagonal blocks hold the inter-layer edges, written symmetrically.
pub fn supra_adjacency(net: &MultilayerNetwork) -> SupraMatrix {
    let n = net.n_nodes();
    let total = net.n_replicas();
    let mut m = SupraMatrix::zeros(total, SupraKind::Adjacency);
    for (a, g) in net.layers().iter().enumerate() {
        write_layer(&mut m, g, a * n);
    }
    for e in net.inter_edges() {
        let (i, j) = (e.src.flat(n), e.dst.flat(n));
        m.data[i * total + j] = e.weight;
        m.data[j * total + i] = e.weight;
    }
    m
}

/// Diagonal supra-degree (row strengths of the supra-adjacency).
pub fn supra_degree(net: &MultilayerNetwork) -> SupraMatrix {
    let adj = supra_adjacency(net);
    let n = adj.dim;
    let mut m = SupraMatrix::zeros(n, SupraKind::Degree);
    for (i, s) in adj.row_sums().into_iter().enumerate() {
        m.data[i * n + i] = s;
    }
    m
}

pub fn layer_adjacency(net: &MultilayerNetwork, layer: LayerId) -> SupraMatrix {
    let mut m = SupraMatrix::zeros(net.n_nodes(), SupraKind::Adjacency);
    write_layer(&mut m, net.layer(layer), 0);
    m
}

pub fn supra_laplacian(net: &MultilayerNetwork) -> Result<SupraMatrix> {
    if let Some(a) = net.layers().iter().position(LayerGraph::is_directed) {
        return Err(Error::DirectedLayer(a));
    }
    Ok(SupraMatrix::laplacian_of(&supra_adjacency(net)))
}

/// Combinatorial Laplacian of a single layer.
pub fn layer_laplacian(net: &MultilayerNetwork, layer: LayerId) -> Result<SupraMatrix> {
    if layer >= net.n_layers() {
        return Err(Error::InvalidArgument(format!("no layer {layer}")));
    }
    if net.layer(layer).is_directed() {
        return Err(Error::DirectedLayer(layer));
    }
    Ok(SupraMatrix::laplacian_of(&layer_adjacency(net, layer)))
}

/// Full ascending spectrum of a symmetric matrix.
pub fn laplacian_spectrum(m: &SupraMatrix) -> Result<Vec<f64>> {
    if !m.is_nearly_symmetric() {
        return Err(Error::NotSymmetric);
    }
    symmetric_eigenvalues(&m.data, m.dim)
}

/// Second-smallest eigenvalue, counting multiplicity; zero for disconnected
/// graphs. Tiny negative round-off is clamped to zero.
pub fn algebraic_connectivity(m: &SupraMatrix) -> Result<f64> {
    if m.dim < 2 {
        return Err(Error::InvalidArgument("algebraic connectivity needs at least two vertices".into()));
    }
    let spectrum = laplacian_spectrum(m)?;
    Ok(spectrum[1].max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Superdiffusion {
    pub label: bool,
    /// `λ2(supra) - max_α λ2(layer α)`.
    pub margin: f64,
    pub supra_lambda2: f64,
    pub layer_lambda2: Vec<f64>,
}

/// Superdiffusion holds when the supra-Laplacian's `λ2` exceeds that of every
/// individual layer.
pub fn is_superdiffusive(net: &MultilayerNetwork) -> Result<Superdiffusion> {
    let supra = algebraic_connectivity(&supra_laplacian(net)?)?;
    let layer_lambda2 = (0..net.n_layers())
        .map(|a| algebraic_connectivity(&layer_laplacian(net, a)?))
        .collect::<Result<Vec<_>>>()?;
    let best = layer_lambda2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = supra - best;
    Ok(Superdiffusion {
        label: margin > SUPERDIFFUSION_TOL * best.abs().max(1.0),
        margin,
        supra_lambda2: supra,
        layer_lambda2,
    })
}

/// Integrates `dx/dt = -L x` with explicit Euler from `x0` (projected
/// orthogonal to the constant vector) and returns the asymptotic decay rate
/// of `‖x‖`, fitted between the points where the norm has fallen by `1e-15`
/// and by `1e-30`.
///
/// The step is `dt = step_fraction / g`, where `g` is the Gershgorin bound on
/// the largest eigenvalue.
pub fn diffusion_decay_rate(lap: &SupraMatrix, x0: &[f64], step_fraction: f64) -> Result<f64> {
    const MAX_STEPS: usize = 50_000_000;
    let n = lap.dim();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!("initial state of length {} for dim {n}", x0.len())));
    }
    let gersh = (0..n)
        .map(|i| lap.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if gersh == 0.0 {
        return Ok(0.0);
    }
    let dt = step_fraction / gersh;
    let mean = x0.iter().sum::<f64>() / n as f64;
    let mut x: Vec<f64> = x0.iter().map(|v| v - mean).collect();
    let norm0 = norm(&x);
    if norm0 == 0.0 {
        return Err(Error::InvalidArgument("initial state is constant".into()));
    }
    let mut lx = vec![0.0; n];
    let mut t = 0.0;
    let mut start: Option<(f64, f64)> = None;
    for _ in 0..MAX_STEPS {
        lap.mul_vec(&x, &mut lx);
        for (xi, li) in x.iter_mut().zip(&lx) {
            *xi -= dt * li;
        }
        // round-off leaks into the consensus direction, which never decays
        let drift = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= drift);
        t += dt;
        let rel = norm(&x) / norm0;
        match start {
            None if rel <= 1e-15 => start = Some((t, rel.ln())),
            Some((t0, l0)) if rel <= 1e-30 => return Ok(-(rel.ln() - l0) / (t - t0)),
            _ => {}
        }
    }
    // slow decay: a disconnected graph or a tiny λ2
    Ok(0.0)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
