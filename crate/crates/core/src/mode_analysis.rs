//! Fourier analysis of the parallel Schwarz iteration.
//!
//! With Dirichlet walls in `y`, each lateral mode `sin(ξy)` decouples and the
//! error on subdomain `j` solves `e'' − λ² e = 0` with `λ = √(ξ² + η)`. We
//! write it in the scaled two-sided basis
//!
//! ```text
//! e_j(x) = A_j e^{−λ(x − a_j)} + B_j e^{−λ(b_j − x)},
//! ```
//!
//! so only decaying exponentials (`Re λ ≥ 0`, non-negative distances) are ever
//! evaluated. Incoming Robin data `(−∂x + s)e = g` at `a_j` and
//! `(∂x + s)e = g` at `b_j`, `s = √η`, determine `(A_j, B_j)`; the outgoing
//! traces at the neighbours' interfaces form the next iterate. The
//! convergence factor `ρ(ξ)` is the spectral radius of that linear map on the
//! `2N − 2` interface values.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Decomposition;
use crate::model::{compute_eta, principal_sqrt, DampedCoefficient, PhysicalParams};
use crate::spectra::{power_radius_with_retry, spectral_radius, DenseComplexMatrix};

/// Modes with `|λ|` below this are treated as cut-off and perturbed.
pub const DEGENERATE_LAMBDA: f64 = 1e-12;
/// Relative determinant threshold of a singular local solve.
pub const SINGULAR_LOCAL_TOL: f64 = 1e-13;

/// Outer condition at `x = 0` or `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `∂ₙu + √η u = 0`.
    Impedance,
    /// `u = 0`.
    Dirichlet,
}

/// Outer conditions in `x`; the lateral walls are always Dirichlet here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    pub left: Side,
    pub right: Side,
}

impl BoundaryConfig {
    pub const fn waveguide() -> Self {
        Self {
            left: Side::Impedance,
            right: Side::Impedance,
        }
    }

    pub const fn cavity() -> Self {
        Self {
            left: Side::Dirichlet,
            right: Side::Dirichlet,
        }
    }
}

/// Named outer-boundary configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Waveguide,
    Cavity,
}

impl Problem {
    pub fn boundary(self) -> BoundaryConfig {
        match self {
            Problem::Waveguide => BoundaryConfig::waveguide(),
            Problem::Cavity => BoundaryConfig::cavity(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Problem::Waveguide => "waveguide",
            Problem::Cavity => "cavity",
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "waveguide" => Ok(Problem::Waveguide),
            "cavity" => Ok(Problem::Cavity),
            other => Err(Error::Config(format!("unknown boundary preset '{other}'"))),
        }
    }
}

/// `λ = √(ξ² + η)` on the principal branch.
pub fn lambda_of(xi: f64, coeff: &DampedCoefficient) -> Result<Complex64> {
    let lambda = principal_sqrt(Complex64::new(xi * xi, 0.0) + coeff.eta);
    if lambda.norm() < DEGENERATE_LAMBDA {
        return Err(Error::Degenerate(lambda.norm()));
    }
    Ok(lambda)
}

/// Kind of condition imposed on one end of a one-dimensional local problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Robin,
    Dirichlet,
}

/// One lateral Fourier mode of the decomposed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProblem {
    xi: f64,
    lambda: Complex64,
    coeff: DampedCoefficient,
    decomp: Decomposition,
    bc: BoundaryConfig,
    perturbed: bool,
}

impl ModeProblem {
    /// Cut-off modes (`|λ| < 1e-12`) are shifted to `ξ + 1e-8·max(1, √|η|)`;
    /// [`ModeProblem::perturbed`] records it.
    pub fn new(xi: f64, coeff: DampedCoefficient, decomp: Decomposition, bc: BoundaryConfig) -> Result<Self> {
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(Error::Config(format!("lateral frequency must be >= 0, got {xi}")));
        }
        let (xi, lambda, perturbed) = match lambda_of(xi, &coeff) {
            Ok(l) => (xi, l, false),
            Err(Error::Degenerate(_)) => {
                let shifted = xi + 1e-8 * coeff.eta.norm().sqrt().max(1.0);
                (shifted, lambda_of(shifted, &coeff)?, true)
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            xi,
            lambda,
            coeff,
            decomp,
            bc,
            perturbed,
        })
    }

    /// Frequency actually analysed (after any cut-off perturbation).
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn coeff(&self) -> &DampedCoefficient {
        &self.coeff
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomp
    }

    pub fn boundary(&self) -> BoundaryConfig {
        self.bc
    }

    pub fn perturbed(&self) -> bool {
        self.perturbed
    }

    fn edges(&self, j: usize) -> (Edge, Edge) {
        let n = self.decomp.n_subdomains();
        let outer = |side: Side| match side {
            Side::Impedance => Edge::Robin,
            Side::Dirichlet => Edge::Dirichlet,
        };
        let left = if j == 0 { outer(self.bc.left) } else { Edge::Robin };
        let right = if j + 1 == n { outer(self.bc.right) } else { Edge::Robin };
        (left, right)
    }

    /// Coefficients `(A, B)` of subdomain `j` for incoming data `g_left` at
    /// `a_j` and `g_right` at `b_j`. Outer edges take their condition from the
    /// boundary configuration; for Dirichlet edges the data is the imposed
    /// value.
    pub fn local_solve(&self, j: usize, g_left: Complex64, g_right: Complex64) -> Result<(Complex64, Complex64)> {
        let (left, right) = self.edges(j);
        solve_local(
            self.lambda,
            self.coeff.sqrt_eta,
            self.decomp.width(),
            left,
            right,
            g_left,
            g_right,
        )
        .map_err(|e| match e {
            Error::SingularLocalSolve { det, .. } => Error::SingularLocalSolve { subdomain: j, det },
            other => other,
        })
    }

    /// One parallel Schwarz sweep applied to stacked interface data
    /// `(g_2^left..g_N^left, g_1^right..g_{N−1}^right)`.
    pub fn apply(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.decomp.n_subdomains();
        let m = n - 1;
        assert_eq!(g.len(), 2 * m, "interface vector has wrong length");
        let lambda = self.lambda;
        let s = self.coeff.sqrt_eta;
        let far = decay(lambda, self.decomp.pitch());
        let near = decay(lambda, self.decomp.overlap());
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; 2 * m];
        for j in 0..n {
            let gl = if j > 0 { g[j - 1] } else { zero };
            let gr = if j < m { g[m + j] } else { zero };
            let (a, b) = self.local_solve(j, gl, gr)?;
            if j < m {
                // (−∂x + s) e_j at a_{j+1}: distance H from a_j, L from b_j
                out[j] = (lambda + s) * far * a + (s - lambda) * near * b;
            }
            if j > 0 {
                // (∂x + s) e_j at b_{j−1}: distance L from a_j, H from b_j
                out[m + j - 1] = (s - lambda) * near * a + (lambda + s) * far * b;
            }
        }
        Ok(out)
    }
}

/// `e^{−λd}` for `d ≥ 0`; never grows since `Re λ ≥ 0`.
fn decay(lambda: Complex64, distance: f64) -> Complex64 {
    let arg = -lambda * distance;
    debug_assert!(arg.re <= 0.0, "growing exponential in assembly: {arg}");
    arg.exp()
}

/// Solves the 2×2 system for `(A, B)` of `A e^{−λ(x−a)} + B e^{−λ(b−x)}` on
/// an interval of length `width`.
pub fn solve_local(
    lambda: Complex64,
    s: Complex64,
    width: f64,
    left: Edge,
    right: Edge,
    g_left: Complex64,
    g_right: Complex64,
) -> Result<(Complex64, Complex64)> {
    let e = decay(lambda, width);
    let one = Complex64::new(1.0, 0.0);
    let (r00, r01) = match left {
        Edge::Robin => (lambda + s, (s - lambda) * e),
        Edge::Dirichlet => (one, e),
    };
    let (r10, r11) = match right {
        Edge::Robin => ((s - lambda) * e, lambda + s),
        Edge::Dirichlet => (e, one),
    };
    let det = r00 * r11 - r01 * r10;
    let scale = r00.norm().hypot(r01.norm()) * r10.norm().hypot(r11.norm());
    if !(det.norm() >= SINGULAR_LOCAL_TOL * scale) {
        return Err(Error::SingularLocalSolve {
            subdomain: 0,
            det: det.norm(),
        });
    }
    let a = (g_left * r11 - r01 * g_right) / det;
    let b = (r00 * g_right - r10 * g_left) / det;
    Ok((a, b))
}

/// Dense iteration matrix of the interface data.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMatrix {
    matrix: DenseComplexMatrix,
}

impl IterationMatrix {
    pub fn order(&self) -> usize {
        self.matrix.order()
    }

    pub fn matrix(&self) -> &DenseComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseComplexMatrix {
        self.matrix
    }
}

/// Builds `T` column by column from unit interface data.
pub fn assemble_iteration_matrix(mode: &ModeProblem) -> Result<IterationMatrix> {
    let order = mode.decomp.interface_count();
    let mut matrix = DenseComplexMatrix::zeros(order);
    let mut unit = vec![Complex64::new(0.0, 0.0); order];
    for col in 0..order {
        unit[col] = Complex64::new(1.0, 0.0);
        let image = mode.apply(&unit)?;
        matrix.set_column(col, &image);
        unit[col] = Complex64::new(0.0, 0.0);
    }
    Ok(IterationMatrix { matrix })
}

/// Convergence factor of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeFactor {
    /// Requested lateral frequency.
    pub xi: f64,
    /// `+∞` for modes with a singular local solve.
    pub rho: f64,
    pub diverged: bool,
    /// The mode was a cut-off mode and was analysed at a shifted `ξ`.
    pub perturbed: bool,
}

/// `ρ(ξ)`, the spectral radius of the mode's iteration matrix.
pub fn convergence_factor(mode: &ModeProblem) -> ModeFactor {
    let diverged = |xi| ModeFactor {
        xi,
        rho: f64::INFINITY,
        diverged: true,
        perturbed: mode.perturbed,
    };
    let t = match assemble_iteration_matrix(mode) {
        Ok(t) => t,
        Err(Error::SingularLocalSolve { subdomain, det }) => {
            log::debug!("xi = {}: singular local solve on subdomain {subdomain} (det {det:e})", mode.xi);
            return diverged(mode.xi);
        }
        Err(e) => unreachable!("assembly only fails on singular solves: {e}"),
    };
    if !t.matrix.is_finite() {
        return diverged(mode.xi);
    }
    let rho = match spectral_radius(&t.matrix) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("xi = {}: {e}; falling back to power iteration", mode.xi);
            power_radius_with_retry(&t.matrix, 20_000, 0).radius
        }
    };
    ModeFactor {
        xi: mode.xi,
        rho,
        diverged: false,
        perturbed: mode.perturbed,
    }
}

/// Lateral frequencies at which `ρ` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum XiGrid {
    /// Dirichlet modes `kπ`, `k = 1..=count`; `count` defaults to `⌈3ω/π⌉`.
    Physical { count: Option<usize> },
    /// `ξ/ω` uniformly on `(0, max_ratio]`.
    Scan { max_ratio: f64, points: usize },
}

impl Default for XiGrid {
    fn default() -> Self {
        XiGrid::Scan {
            max_ratio: 2.0,
            points: 400,
        }
    }
}

impl XiGrid {
    pub fn physical() -> Self {
        XiGrid::Physical { count: None }
    }

    pub fn points(&self, omega: f64) -> Vec<f64> {
        match *self {
            XiGrid::Physical { count } => {
                let k_max = count.unwrap_or_else(|| default_mode_count(omega));
                (1..=k_max).map(|k| k as f64 * std::f64::consts::PI).collect()
            }
            XiGrid::Scan { max_ratio, points } => (1..=points)
                .map(|i| omega * max_ratio * i as f64 / points as f64)
                .collect(),
        }
    }
}

/// `⌈3ω/π⌉`, the default number of physical modes.
pub fn default_mode_count(omega: f64) -> usize {
    (3.0 * omega / std::f64::consts::PI).ceil() as usize
}

/// `ρ(ξ)` for every `ξ` in `xi_grid`, evaluated in parallel and returned in
/// grid order.
pub fn convergence_factor_profile(
    params: &PhysicalParams,
    decomp: &Decomposition,
    bc: BoundaryConfig,
    xi_grid: &[f64],
) -> Result<Vec<ModeFactor>> {
    if xi_grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Config("xi grid must be finite and nonnegative".into()));
    }
    if xi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("xi grid must be strictly increasing".into()));
    }
    let coeff = compute_eta(params);
    xi_grid
        .par_iter()
        .map(|&xi| {
            let mode = ModeProblem::new(xi, coeff, decomp.clone(), bc)?;
            let mut f = convergence_factor(&mode);
            f.xi = xi;
            Ok(f)
        })
        .collect()
}

/// Largest `ρ` over a profile (`+∞` if any mode diverged).
pub fn max_rho(profile: &[ModeFactor]) -> f64 {
    profile.iter().map(|f| f.rho).fold(0.0, f64::max)
}

/// `max_ξ ρ(ξ)` over the given grid.
pub fn max_mode_rho(
    params: &PhysicalParams,
    decomp: &Decomposition,
    bc: BoundaryConfig,
    grid: XiGrid,
) -> Result<f64> {
    let xi = grid.points(params.omega());
    Ok(max_rho(&convergence_factor_profile(params, decomp, bc, &xi)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn coeff(omega: f64, r: f64, gamma: f64) -> DampedCoefficient {
        compute_eta(&PhysicalParams::new(omega, r, gamma).unwrap())
    }

    fn mode(xi: f64, omega: f64, r: f64, gamma: f64, n: usize, l: f64, bc: BoundaryConfig) -> ModeProblem {
        ModeProblem::new(xi, coeff(omega, r, gamma), Decomposition::new(n, l).unwrap(), bc).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let k = coeff(100.0, 0.0, 0.0);
        assert_eq!(lambda_of(0.0, &k).unwrap(), c(0.0, 100.0));
        let l = lambda_of(200.0, &k).unwrap();
        assert!((l - c(30000f64.sqrt(), 0.0)).norm() < 1e-12);
        let l = lambda_of(50.0, &k).unwrap();
        assert!((l - c(0.0, 7500f64.sqrt())).norm() < 1e-12);
        assert!(matches!(lambda_of(100.0, &k), Err(Error::Degenerate(_))));
    }

    #[test]
    fn cut_off_mode_is_perturbed() {
        let m = mode(100.0, 100.0, 0.0, 0.0, 2, 0.0, BoundaryConfig::waveguide());
        assert!(m.perturbed());
        assert!((m.xi() - 100.0 - 1e-6).abs() < 1e-12);
        let f = convergence_factor(&m);
        assert!(f.perturbed && f.rho.is_finite());
    }

    #[test]
    fn homogeneous_local_data() {
        let m = mode(3.0, 100.0, 1.0, 0.0, 3, 0.01, BoundaryConfig::waveguide());
        let zero = c(0.0, 0.0);
        for j in 0..3 {
            assert_eq!(m.local_solve(j, zero, zero).unwrap(), (zero, zero));
        }
    }

    #[test]
    fn transparent_single_interval() {
        let k = coeff(100.0, 1.0, 0.0);
        let s = k.sqrt_eta;
        let (a, b) = solve_local(s, s, 1.0, Edge::Robin, Edge::Robin, 2.0 * s, c(0.0, 0.0)).unwrap();
        assert!((a - 1.0).norm() < 1e-14 && b.norm() < 1e-14);
    }

    #[test]
    fn dirichlet_row_residual() {
        let k = coeff(100.0, 0.0, 0.0);
        let lambda = lambda_of(7.0 * std::f64::consts::PI, &k).unwrap();
        let s = k.sqrt_eta;
        let w = 0.4;
        let g = lambda + s;
        let (a, b) = solve_local(lambda, s, w, Edge::Dirichlet, Edge::Robin, c(0.0, 0.0), g).unwrap();
        let e = (-lambda * w).exp();
        assert!((a + e * b).norm() < 1e-12);
        assert!(((s - lambda) * e * a + (lambda + s) * b - g).norm() < 1e-12 * g.norm());
    }

    #[test]
    fn two_subdomains_zero_diagonal() {
        let m = mode(5.0, 50.0, 1.0, 0.0, 2, 0.02, BoundaryConfig::cavity());
        let t = assemble_iteration_matrix(&m).unwrap();
        assert_eq!(t.order(), 2);
        assert_eq!(t.matrix()[(0, 0)], c(0.0, 0.0));
        assert_eq!(t.matrix()[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn assembled_matrix_matches_direct_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (bc, n) in [(BoundaryConfig::waveguide(), 5), (BoundaryConfig::cavity(), 4)] {
            let m = mode(40.0, 60.0, 0.5, 1e-4, n, 0.01, bc);
            let t = assemble_iteration_matrix(&m).unwrap();
            let g: Vec<Complex64> = (0..t.order())
                .map(|_| c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let direct = m.apply(&g).unwrap();
            let via = t.matrix().mul_vec(&g);
            for (x, y) in direct.iter().zip(&via) {
                assert!((x - y).norm() < 1e-13 * (1.0 + x.norm()));
            }
        }
    }

    #[test]
    fn neighbour_coupling_only() {
        // interface data of subdomain j only reaches interfaces of j ± 1
        let n = 6;
        let m = mode(20.0, 60.0, 1.0, 0.0, n, 0.02, BoundaryConfig::waveguide());
        let t = assemble_iteration_matrix(&m).unwrap();
        let k = n - 1;
        // column for g_{j}^left (j = col + 1) feeds out[j] (left of j+1)
        // and out[k + j − 1] (right of j−1)
        for col in 0..2 * k {
            let j = if col < k { col + 1 } else { col - k };
            for row in 0..2 * k {
                let target = if row < k { row } else { row - k + 1 };
                if t.matrix()[(row, col)].norm() > 0.0 {
                    assert!(target == j, "row {row} col {col}");
                }
            }
        }
    }

    #[test]
    fn transparency_at_normal_incidence() {
        let m = mode(0.0, 100.0, 0.0, 0.0, 2, 0.0, BoundaryConfig::waveguide());
        assert_eq!(convergence_factor(&m).rho, 0.0);
    }

    #[test]
    fn undamped_cavity_does_not_converge() {
        let bc = BoundaryConfig::cavity();
        let p = PhysicalParams::undamped(100.0).unwrap();
        let d = Decomposition::new(8, 1.0 / 300.0).unwrap();
        assert!(max_mode_rho(&p, &d, bc, XiGrid::physical()).unwrap() >= 0.999);
    }

    #[test]
    fn damping_drives_rho_down() {
        let xi = 0.5 * 100.0;
        let rhos: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&r| convergence_factor(&mode(xi, 100.0, r, 0.0, 2, 0.0, BoundaryConfig::waveguide())).rho)
            .collect();
        assert!(rhos[0] > rhos[1] && rhos[1] > rhos[2], "{rhos:?}");
    }

    #[test]
    fn overlap_helps_evanescent_modes() {
        for xi in [120.0, 150.0, 190.0] {
            let mut prev = f64::INFINITY;
            for l in [0.0, 0.002, 0.005, 0.01, 0.02] {
                let rho = convergence_factor(&mode(xi, 100.0, 0.0, 0.0, 2, l, BoundaryConfig::waveguide())).rho;
                assert!(rho <= prev + 1e-12, "xi {xi} L {l}: {rho} > {prev}");
                prev = rho;
            }
        }
    }

    #[test]
    fn damping_helps_evanescent_modes_and_overall() {
        let p0 = PhysicalParams::undamped(100.0).unwrap();
        let p1 = PhysicalParams::new(100.0, 1.0, 0.0).unwrap();
        let d = Decomposition::new(2, 0.0).unwrap();
        let grid = XiGrid::default().points(100.0);
        let a = convergence_factor_profile(&p0, &d, BoundaryConfig::waveguide(), &grid).unwrap();
        let b = convergence_factor_profile(&p1, &d, BoundaryConfig::waveguide(), &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            if x.xi > 100.0 {
                assert!(y.rho <= x.rho + 1e-12, "xi {}: {} > {}", x.xi, y.rho, x.rho);
            }
        }
        assert!(max_rho(&b) < max_rho(&a));
    }

    #[test]
    fn profile_validation_and_single_point() {
        let p = PhysicalParams::new(100.0, 1.0, 0.0).unwrap();
        let d = Decomposition::new(2, 0.0).unwrap();
        let bc = BoundaryConfig::waveguide();
        assert!(convergence_factor_profile(&p, &d, bc, &[1.0, 1.0]).is_err());
        assert!(convergence_factor_profile(&p, &d, bc, &[-1.0]).is_err());
        let one = convergence_factor_profile(&p, &d, bc, &[0.0]).unwrap();
        let direct = convergence_factor(&ModeProblem::new(0.0, compute_eta(&p), d.clone(), bc).unwrap());
        assert_eq!(one[0].rho, direct.rho);
    }

    #[test]
    fn grids() {
        let pts = XiGrid::physical().points(100.0);
        assert_eq!(pts.len(), 96);
        assert!((pts[0] - std::f64::consts::PI).abs() < 1e-15);
        let scan = XiGrid::default().points(100.0);
        assert_eq!(scan.len(), 400);
        assert!((scan[399] - 200.0).abs() < 1e-12 && scan[0] > 0.0);
    }
}
