//! Finite-difference frequency-domain solver on the unit square.
//!
//! Discretizes `Δu − ηu = rhs` with the 5-point stencil on a vertex-centred
//! grid `x_i = i h`, `h = 1/(n + 1)`. Dirichlet sides carry no unknowns;
//! impedance (Robin) sides keep their boundary nodes as unknowns and
//! eliminate the ghost node through the centred condition
//! `∂ₙu + s u = g`, i.e. `u_ghost = u_inner − 2h s u_b + 2h g`.
//!
//! Systems are stored banded with the shorter grid direction varying
//! fastest and factorized by banded LU without pivoting; every solve is
//! gated by a residual check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode_analysis::Side;
use crate::model::{compute_eta, DampedCoefficient, PhysicalParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative residual every solve must reach.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Pivots below this fraction of their row scale are rejected.
pub const PIVOT_TOL: f64 = 1e-14;

/// Uniform grid with `n_interior` interior nodes per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid2D {
    n_interior: usize,
}

impl Grid2D {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior == 0 {
            return Err(Error::InvalidGrid("need at least one interior node".into()));
        }
        Ok(Self { n_interior })
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Nodes per direction including both boundary nodes.
    pub fn nodes(&self) -> usize {
        self.n_interior + 2
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n_interior + 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Points per wavelength `2π/(ωh)`.
    pub fn points_per_wavelength(&self, omega: f64) -> f64 {
        2.0 * std::f64::consts::PI / (omega * self.h())
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        ((x / self.h()).round().max(0.0) as usize).min(self.n_interior + 1)
    }
}

/// Conditions on the four sides of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sides {
    pub west: Side,
    pub east: Side,
    pub south: Side,
    pub north: Side,
}

impl Sides {
    pub const fn uniform(side: Side) -> Self {
        Self {
            west: side,
            east: side,
            south: side,
            north: side,
        }
    }

    pub fn for_preset(preset: GreensPreset) -> Self {
        match preset {
            GreensPreset::Cavity => Self::uniform(Side::Dirichlet),
            GreensPreset::FreeSpace => Self::uniform(Side::Impedance),
            GreensPreset::Waveguide => Self {
                west: Side::Impedance,
                east: Side::Impedance,
                south: Side::Dirichlet,
                north: Side::Dirichlet,
            },
        }
    }
}

/// Outer configurations for Greens-function fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreensPreset {
    Cavity,
    Waveguide,
    /// Impedance on all four sides.
    FreeSpace,
}

impl GreensPreset {
    pub fn name(self) -> &'static str {
        match self {
            GreensPreset::Cavity => "cavity",
            GreensPreset::Waveguide => "waveguide",
            GreensPreset::FreeSpace => "free_space",
        }
    }
}

impl std::str::FromStr for GreensPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cavity" => Ok(Self::Cavity),
            "waveguide" => Ok(Self::Waveguide),
            "free_space" | "free-space" | "freespace" => Ok(Self::FreeSpace),
            other => Err(Error::Config(format!("unknown field preset '{other}'"))),
        }
    }
}

/// Condition beyond one edge of a [`Patch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchEdge {
    /// The node just outside the patch is zero.
    Dirichlet,
    /// The edge nodes are unknowns with `∂ₙu + s u = g`.
    Robin,
}

impl From<Side> for PatchEdge {
    fn from(side: Side) -> Self {
        match side {
            Side::Dirichlet => PatchEdge::Dirichlet,
            Side::Impedance => PatchEdge::Robin,
        }
    }
}

/// Which edge of a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeId {
    West,
    East,
    South,
    North,
}

/// Rectangular block of unknowns `ix.0..=ix.1` × `iy.0..=iy.1` (global node
/// indices) with a condition on each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub grid: Grid2D,
    pub ix: (usize, usize),
    pub iy: (usize, usize),
    pub west: PatchEdge,
    pub east: PatchEdge,
    pub south: PatchEdge,
    pub north: PatchEdge,
}

impl Patch {
    /// The whole square with the given sides.
    pub fn full(grid: Grid2D, sides: Sides) -> Self {
        let last = grid.n_interior + 1;
        let lo = |s: Side| if s == Side::Impedance { 0 } else { 1 };
        let hi = |s: Side| if s == Side::Impedance { last } else { last - 1 };
        Self {
            grid,
            ix: (lo(sides.west), hi(sides.east)),
            iy: (lo(sides.south), hi(sides.north)),
            west: sides.west.into(),
            east: sides.east.into(),
            south: sides.south.into(),
            north: sides.north.into(),
        }
    }

    pub fn nx(&self) -> usize {
        self.ix.1 - self.ix.0 + 1
    }

    pub fn ny(&self) -> usize {
        self.iy.1 - self.iy.0 + 1
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn x_fast(&self) -> bool {
        self.nx() <= self.ny()
    }

    /// Half bandwidth of the assembled matrix.
    pub fn bandwidth(&self) -> usize {
        self.nx().min(self.ny())
    }

    /// Local unknown index of local node `(p, q)`.
    pub fn index(&self, p: usize, q: usize) -> usize {
        if self.x_fast() {
            q * self.nx() + p
        } else {
            p * self.ny() + q
        }
    }

    /// Global node of local unknown `k`.
    pub fn node(&self, k: usize) -> (usize, usize) {
        let (p, q) = if self.x_fast() {
            (k % self.nx(), k / self.nx())
        } else {
            (k / self.ny(), k % self.ny())
        };
        (self.ix.0 + p, self.iy.0 + q)
    }

    fn validate(&self) -> Result<()> {
        let last = self.grid.n_interior + 1;
        if self.ix.0 > self.ix.1 || self.iy.0 > self.iy.1 || self.ix.1 > last || self.iy.1 > last {
            return Err(Error::InvalidGrid(format!("bad patch ranges {:?} {:?}", self.ix, self.iy)));
        }
        let robin_x = self.west == PatchEdge::Robin || self.east == PatchEdge::Robin;
        let robin_y = self.south == PatchEdge::Robin || self.north == PatchEdge::Robin;
        if (robin_x && self.nx() < 2) || (robin_y && self.ny() < 2) {
            return Err(Error::InvalidGrid("Robin edges need at least two nodes across".into()));
        }
        // Dirichlet edges rely on a zero node just outside the patch.
        if (self.west == PatchEdge::Dirichlet && self.ix.0 == 0)
            || (self.south == PatchEdge::Dirichlet && self.iy.0 == 0)
            || (self.east == PatchEdge::Dirichlet && self.ix.1 == last)
            || (self.north == PatchEdge::Dirichlet && self.iy.1 == last)
        {
            return Err(Error::InvalidGrid("Dirichlet edge placed on the outer node row".into()));
        }
        Ok(())
    }

    /// Local indices of the nodes along `edge`, in increasing coordinate.
    pub fn edge_indices(&self, edge: EdgeId) -> Vec<usize> {
        match edge {
            EdgeId::West => (0..self.ny()).map(|q| self.index(0, q)).collect(),
            EdgeId::East => (0..self.ny()).map(|q| self.index(self.nx() - 1, q)).collect(),
            EdgeId::South => (0..self.nx()).map(|p| self.index(p, 0)).collect(),
            EdgeId::North => (0..self.nx()).map(|p| self.index(p, self.ny() - 1)).collect(),
        }
    }

    /// Adds the Robin data `g` along `edge` to a right-hand side.
    pub fn add_robin_data(&self, rhs: &mut [Complex64], edge: EdgeId, g: &[Complex64]) {
        let idx = self.edge_indices(edge);
        assert_eq!(idx.len(), g.len(), "edge data has wrong length");
        let f = 2.0 / self.grid.h();
        for (k, gv) in idx.into_iter().zip(g) {
            rhs[k] -= gv * f;
        }
    }

    /// Right-hand side sampled from `f(i, j)` at the patch nodes.
    pub fn sample(&self, mut f: impl FnMut(usize, usize) -> Complex64) -> Vec<Complex64> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.node(k);
                f(i, j)
            })
            .collect()
    }

    /// Writes patch values into a full-grid field.
    pub fn scatter(&self, local: &[Complex64], field: &mut ComplexField) {
        for (k, &v) in local.iter().enumerate() {
            let (i, j) = self.node(k);
            field.set(i, j, v);
        }
    }
}

/// Matrix-free 5-point operator `Δ_h − η` on a patch.
#[derive(Debug, Clone)]
pub struct FdOperator {
    patch: Patch,
    eta: Complex64,
    s: Complex64,
}

impl FdOperator {
    pub fn patch(&self) -> &Patch {
        &self.patch
    }

    /// Row `k` as (column, value) pairs.
    fn row(&self, k: usize, out: &mut Vec<(usize, Complex64)>) {
        out.clear();
        let pt = &self.patch;
        let h = pt.grid.h();
        let inv_h2 = 1.0 / (h * h);
        let (i, j) = pt.node(k);
        let (p, q) = (i - pt.ix.0, j - pt.iy.0);
        let (nx, ny) = (pt.nx(), pt.ny());
        let mut diag = Complex64::new(-4.0 * inv_h2, 0.0) - self.eta;
        let robin = self.s * (2.0 / h);

        let mut axis = |pos: usize, len: usize, lo: PatchEdge, hi: PatchEdge, prev: Option<usize>, next: Option<usize>| {
            let mut w_prev = if pos > 0 { inv_h2 } else { 0.0 };
            let mut w_next = if pos + 1 < len { inv_h2 } else { 0.0 };
            if pos == 0 && lo == PatchEdge::Robin {
                w_next += inv_h2;
                diag -= robin;
            }
            if pos + 1 == len && hi == PatchEdge::Robin {
                w_prev += inv_h2;
                diag -= robin;
            }
            let mut v = Vec::with_capacity(2);
            if let (Some(c), true) = (prev, w_prev != 0.0) {
                v.push((c, Complex64::new(w_prev, 0.0)));
            }
            if let (Some(c), true) = (next, w_next != 0.0) {
                v.push((c, Complex64::new(w_next, 0.0)));
            }
            v
        };
        let xs = axis(
            p,
            nx,
            pt.west,
            pt.east,
            p.checked_sub(1).map(|pp| pt.index(pp, q)),
            (p + 1 < nx).then(|| pt.index(p + 1, q)),
        );
        let ys = axis(
            q,
            ny,
            pt.south,
            pt.north,
            q.checked_sub(1).map(|qq| pt.index(p, qq)),
            (q + 1 < ny).then(|| pt.index(p, q + 1)),
        );
        out.extend(xs);
        out.extend(ys);
        out.push((k, diag));
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut row = Vec::with_capacity(5);
        (0..self.patch.len())
            .map(|k| {
                self.row(k, &mut row);
                row.iter().map(|&(c, a)| a * u[c]).sum()
            })
            .collect()
    }

    /// Dense copy of the matrix, for small test problems.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.patch.len();
        let mut m = vec![vec![ZERO; n]; n];
        let mut row = Vec::new();
        for (k, mrow) in m.iter_mut().enumerate() {
            self.row(k, &mut row);
            for &(c, a) in &row {
                mrow[c] += a;
            }
        }
        m
    }
}

/// Square band matrix with equal lower and upper half bandwidth, row-major.
#[derive(Debug, Clone)]
struct Band {
    n: usize,
    bw: usize,
    data: Vec<Complex64>,
}

impl Band {
    fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![ZERO; n * (2 * bw + 1)],
        }
    }

    fn stride(&self) -> usize {
        2 * self.bw + 1
    }

    fn at(&mut self, i: usize, j: usize) -> &mut Complex64 {
        let s = self.stride();
        &mut self.data[i * s + j + self.bw - i]
    }

    /// In-place LU without pivoting; L has unit diagonal.
    fn factor(&mut self, row_scale: &[f64]) -> Result<()> {
        let (n, bw, s) = (self.n, self.bw, self.stride());
        for k in 0..n {
            let pivot = self.data[k * s + bw];
            if !(pivot.norm() > PIVOT_TOL * row_scale[k]) {
                return Err(Error::SingularSystem {
                    row: k,
                    pivot: pivot.norm(),
                });
            }
            let inv = pivot.inv();
            let last = (k + bw).min(n - 1);
            let width = last - k;
            let (head, tail) = self.data.split_at_mut((k + 1) * s);
            let pivot_row = &head[k * s + bw + 1..k * s + bw + 1 + width];
            for i in k + 1..=last {
                let row = &mut tail[(i - k - 1) * s..(i - k) * s];
                let off = k + bw - i;
                let l = row[off] * inv;
                row[off] = l;
                if l == ZERO {
                    continue;
                }
                for (a, &u) in row[off + 1..off + 1 + width].iter_mut().zip(pivot_row) {
                    *a -= l * u;
                }
            }
        }
        Ok(())
    }

    fn solve_in_place(&self, x: &mut [Complex64]) {
        let (n, bw, s) = (self.n, self.bw, self.stride());
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let row = &self.data[i * s..(i + 1) * s];
            let mut acc = x[i];
            for j in start..i {
                acc -= row[j + bw - i] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let end = (i + bw).min(n - 1);
            let row = &self.data[i * s..(i + 1) * s];
            let mut acc = x[i];
            for j in i + 1..=end {
                acc -= row[j + bw - i] * x[j];
            }
            x[i] = acc / row[bw];
        }
    }
}

/// Assembled banded system on a patch.
#[derive(Debug, Clone)]
pub struct BandedSystem {
    op: FdOperator,
    band: Band,
    row_scale: Vec<f64>,
}

/// Assembles `Δ_h − η` on `patch` with Robin parameter `s = √η`.
pub fn assemble(patch: &Patch, coeff: &DampedCoefficient) -> Result<BandedSystem> {
    patch.validate()?;
    let op = FdOperator {
        patch: patch.clone(),
        eta: coeff.eta,
        s: coeff.sqrt_eta,
    };
    let n = patch.len();
    let mut band = Band::zeros(n, patch.bandwidth());
    let mut row_scale = vec![0.0; n];
    let mut row = Vec::with_capacity(5);
    for k in 0..n {
        op.row(k, &mut row);
        for &(c, a) in &row {
            *band.at(k, c) += a;
            row_scale[k] = f64::max(row_scale[k], a.norm());
        }
    }
    Ok(BandedSystem { op, band, row_scale })
}

impl BandedSystem {
    pub fn operator(&self) -> &FdOperator {
        &self.op
    }

    pub fn patch(&self) -> &Patch {
        &self.op.patch
    }

    pub fn len(&self) -> usize {
        self.band.n
    }

    pub fn is_empty(&self) -> bool {
        self.band.n == 0
    }

    pub fn bandwidth(&self) -> usize {
        self.band.bw
    }

    pub fn factor(mut self) -> Result<Factorization> {
        self.band.factor(&self.row_scale)?;
        Ok(Factorization {
            op: self.op,
            lu: self.band,
        })
    }
}

/// LU factors of a [`BandedSystem`]; reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct Factorization {
    op: FdOperator,
    lu: Band,
}

impl Factorization {
    pub fn patch(&self) -> &Patch {
        &self.op.patch
    }

    pub fn operator(&self) -> &FdOperator {
        &self.op
    }

    /// Solves `A u = rhs`; one step of iterative refinement if the relative
    /// residual exceeds [`RESIDUAL_TOL`].
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        assert_eq!(rhs.len(), self.lu.n, "rhs has wrong length");
        let bnorm = norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![ZERO; rhs.len()]);
        }
        let mut u = rhs.to_vec();
        self.lu.solve_in_place(&mut u);
        let mut res = self.residual(&u, rhs);
        let mut rel = norm(&res) / bnorm;
        if !(rel < RESIDUAL_TOL) {
            self.lu.solve_in_place(&mut res);
            u.iter_mut().zip(&res).for_each(|(a, d)| *a += d);
            res = self.residual(&u, rhs);
            rel = norm(&res) / bnorm;
            if !(rel < RESIDUAL_TOL) {
                return Err(Error::NonConvergedResidual(rel));
            }
        }
        Ok(u)
    }

    fn residual(&self, u: &[Complex64], rhs: &[Complex64]) -> Vec<Complex64> {
        self.op.apply(u).iter().zip(rhs).map(|(a, b)| b - a).collect()
    }
}

/// Factorizes and solves in one go.
pub fn solve(system: BandedSystem, rhs: &[Complex64]) -> Result<ComplexField> {
    let patch = system.patch().clone();
    let u = system.factor()?.solve(rhs)?;
    let mut field = ComplexField::zeros(patch.grid);
    patch.scatter(&u, &mut field);
    Ok(field)
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Complex grid function over all `(n + 2)²` nodes, boundary included;
/// `values[j * nodes + i]` is the value at `(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid2D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![ZERO; grid.nodes() * grid.nodes()],
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[j * self.grid.nodes() + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let n = self.grid.nodes();
        self.values[j * n + i] = v;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `(i, j, value)` for every node.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let n = self.grid.nodes();
        self.values.iter().enumerate().map(move |(k, &v)| (k % n, k / n, v))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum `|u|` over nodes satisfying `keep(x, y)`.
    pub fn max_abs_where(&self, mut keep: impl FnMut(f64, f64) -> bool) -> f64 {
        self.iter()
            .filter(|&(i, j, _)| keep(self.grid.coord(i), self.grid.coord(j)))
            .map(|(_, _, v)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Right-hand side data `f` of `Δu − ηu = −f/(1 + iγω)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    /// Discrete delta `1/h²` at the node nearest `(x, y)`.
    Point { x: f64, y: f64 },
    /// Values over all grid nodes (same layout as [`ComplexField`]).
    Grid(Vec<Complex64>),
}

impl SourceTerm {
    fn values(&self, grid: Grid2D) -> Result<Vec<Complex64>> {
        let n = grid.nodes();
        match self {
            SourceTerm::Point { x, y } => {
                if !(*x > 0.0 && *x < 1.0 && *y > 0.0 && *y < 1.0) {
                    return Err(Error::Config(format!("source ({x}, {y}) outside the open square")));
                }
                let h = grid.h();
                let mut v = vec![ZERO; n * n];
                v[grid.nearest(*y) * n + grid.nearest(*x)] = Complex64::new(1.0 / (h * h), 0.0);
                Ok(v)
            }
            SourceTerm::Grid(v) => {
                if v.len() != n * n {
                    return Err(Error::Config("grid source has wrong length".into()));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Solves the full problem with source `f` and homogeneous outer conditions.
pub fn solve_source(
    params: &PhysicalParams,
    sides: Sides,
    grid: Grid2D,
    source: &SourceTerm,
) -> Result<ComplexField> {
    let coeff = compute_eta(params);
    let ppw = grid.points_per_wavelength(params.omega());
    if ppw < 10.0 {
        log::warn!("only {ppw:.1} points per wavelength");
    }
    let f = source.values(grid)?;
    let patch = Patch::full(grid, sides);
    let n = grid.nodes();
    let rhs = patch.sample(|i, j| -f[j * n + i] * coeff.rhs_scale);
    let system = assemble(&patch, &coeff)?;
    solve(system, &rhs)
}

/// Greens function of a point source at `source` for one of the outer
/// configurations.
pub fn greens_field(
    params: &PhysicalParams,
    preset: GreensPreset,
    source: (f64, f64),
    n_interior: usize,
) -> Result<ComplexField> {
    let grid = Grid2D::new(n_interior)?;
    solve_source(
        params,
        Sides::for_preset(preset),
        grid,
        &SourceTerm::Point {
            x: source.0,
            y: source.1,
        },
    )
}
