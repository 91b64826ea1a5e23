//! Dense complex eigenvalue machinery.
//!
//! [`spectral_radius`] reduces to upper Hessenberg form with Householder
//! reflectors and runs single-shift complex QR with Wilkinson shifts and
//! deflation. [`power_iteration_radius`] is an independent estimate used to
//! cross-check it.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseComplexMatrix {
    order: usize,
    data: Vec<Complex64>,
}

impl DenseComplexMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![ZERO; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in 0..order {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a
    /// perfect square.
    pub fn from_row_major(entries: Vec<Complex64>) -> Result<Self> {
        let order = (entries.len() as f64).sqrt().round() as usize;
        if order == 0 || order * order != entries.len() {
            return Err(Error::BadMatrix);
        }
        Ok(Self {
            order,
            data: entries,
        })
    }

    /// Matrix with entries drawn from the complex standard normal
    /// distribution.
    pub fn random(order: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(order);
        for z in &mut m.data {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z = Complex64::new(re, im);
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.order).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[Complex64]) {
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.order)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.order;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            order: self.order,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn max_row_sum_norm(&self) -> f64 {
        (0..self.order)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.order;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&p, &q| a[(p, col)].norm().total_cmp(&a[(q, col)].norm()))
                .unwrap();
            if a[(piv, col)].norm() == 0.0 {
                return Err(Error::BadMatrix);
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let d = a[(col, col)].inv();
            for j in 0..n {
                a[(col, j)] *= d;
                inv[(col, j)] *= d;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f == ZERO {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                    a[(i, j)] -= f * ac;
                    inv[(i, j)] -= f * ic;
                }
            }
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for DenseComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.order + j]
    }
}

impl IndexMut<(usize, usize)> for DenseComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.order + j]
    }
}

/// Reduces `m` to upper Hessenberg form in place by Householder similarity
/// transforms.
fn hessenberg(m: &mut DenseComplexMatrix) {
    let n = m.order;
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    for k in 0..n - 2 {
        let alpha_norm: f64 = (k + 1..n).map(|i| m[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = m[(k + 1, k)];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        // v = x + phase·‖x‖ e1, H = I − 2 v v*/(v* v)
        for i in k + 1..n {
            v[i] = m[(i, k)];
        }
        v[k + 1] += phase * alpha_norm;
        let vnorm2: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // left: rows k+1.., all columns from k
        for j in k..n {
            let dot: Complex64 = (k + 1..n).map(|i| v[i].conj() * m[(i, j)]).sum();
            let f = dot * beta;
            for i in k + 1..n {
                m[(i, j)] -= v[i] * f;
            }
        }
        // right: all rows, columns k+1..
        for i in 0..n {
            let dot: Complex64 = (k + 1..n).map(|j| m[(i, j)] * v[j]).sum();
            let f = dot * beta;
            for j in k + 1..n {
                m[(i, j)] -= f * v[j].conj();
            }
        }
        for i in k + 2..n {
            m[(i, k)] = ZERO;
        }
    }
}

/// Complex Givens rotation `[c s; −s̄ c]` mapping `(a, b)` to `(ρ, 0)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = an.hypot(bn);
    (an / r, (a / an) * b.conj() / r)
}

/// All eigenvalues of a general complex matrix.
pub fn eigenvalues(m: &DenseComplexMatrix) -> Result<Vec<Complex64>> {
    let n = m.order;
    if n == 0 || !m.is_finite() {
        return Err(Error::BadMatrix);
    }
    let mut h = m.clone();
    hessenberg(&mut h);
    let mut eig = vec![ZERO; n];
    let max_sweeps = 30 * n.max(1);
    let mut sweeps = 0;
    let mut since_deflation = 0;
    let mut hi = n - 1;
    let mut rot = Vec::with_capacity(n);

    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let scale = if scale == 0.0 { 1.0 } else { scale };
            if sub <= f64::EPSILON * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        sweeps += 1;
        since_deflation += 1;
        if sweeps > max_sweeps {
            return Err(Error::NoConvergence(max_sweeps));
        }

        let a = h[(hi - 1, hi - 1)];
        let b = h[(hi - 1, hi)];
        let c = h[(hi, hi - 1)];
        let d = h[(hi, hi)];
        let shift = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            d + Complex64::new(0.75 * c.norm(), 0.0)
        } else {
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let mid = (a + d) * 0.5;
            let (mu1, mu2) = (mid + disc, mid - disc);
            if (mu1 - d).norm() <= (mu2 - d).norm() {
                mu1
            } else {
                mu2
            }
        };

        for k in lo..=hi {
            h[(k, k)] -= shift;
        }
        rot.clear();
        for k in lo..hi {
            let (cs, sn) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * cs + sn * y;
                h[(k + 1, j)] = -sn.conj() * x + y * cs;
            }
            rot.push((cs, sn));
        }
        for (idx, &(cs, sn)) in rot.iter().enumerate() {
            let k = lo + idx;
            for i in lo..=(k + 1).min(hi) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * cs + y * sn.conj();
                h[(i, k + 1)] = -x * sn + y * cs;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += shift;
        }
    }
    eig[0] = h[(0, 0)];
    Ok(eig)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DenseComplexMatrix) -> Result<f64> {
    let radius = eigenvalues(m)?
        .into_iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    debug_assert!(radius <= m.max_row_sum_norm() * (1.0 + 1e-10) + 1e-300);
    Ok(radius)
}

/// Outcome of a power iteration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub radius: f64,
    pub iterations: usize,
    /// The last estimates oscillated by more than 1e-4 relative, or the
    /// final iterate was not an eigenvector.
    pub stagnated: bool,
    pub seed: u64,
    /// The estimate came from `M^(2^p)` with `p = squarings`.
    pub squarings: u32,
}

const STAGNATION_TOL: f64 = 1e-4;
/// Eigen-residual `‖Mx − θx‖/‖Mx‖` below which the run stops early.
const CONVERGED_TOL: f64 = 1e-11;
/// Final eigen-residual above which the estimate is not trusted; for a
/// normal matrix it bounds the relative error of the estimate.
const RESIDUAL_TOL: f64 = 1e-6;

/// Rayleigh-quotient magnitude of the dominant eigenvalue from a seeded
/// random complex start, renormalized each step.
///
/// The run is flagged as stagnated when the last estimates oscillate by
/// more than `1e-4` relative or when the iterate is not an eigenvector
/// (a dominant `±μ` pair makes the iterate cycle with a steady but
/// meaningless quotient).
pub fn power_iteration_radius(m: &DenseComplexMatrix, iters: usize, seed: u64) -> PowerEstimate {
    let n = m.order;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    normalize(&mut x);

    let window = 8;
    let mut history: Vec<f64> = Vec::with_capacity(iters.min(4096));
    let mut residual = f64::INFINITY;
    let mut done = 0;
    for it in 0..iters.max(1) {
        let y = m.mul_vec(&x);
        let theta = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum::<Complex64>();
        let ynorm = norm(&y);
        done = it + 1;
        if ynorm == 0.0 || !ynorm.is_finite() {
            return PowerEstimate {
                radius: if ynorm == 0.0 { 0.0 } else { f64::INFINITY },
                iterations: done,
                stagnated: false,
                seed,
                squarings: 0,
            };
        }
        residual = y.iter().zip(&x).map(|(b, a)| (b - theta * a).norm_sqr()).sum::<f64>().sqrt() / ynorm;
        history.push(theta.norm());
        x = y;
        x.iter_mut().for_each(|z| *z /= ynorm);
        if residual <= CONVERGED_TOL {
            break;
        }
    }
    let radius = *history.last().unwrap();
    let tail = &history[history.len().saturating_sub(window)..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let stagnated = (tail.len() > 1 && hi - lo > STAGNATION_TOL * hi) || residual > RESIDUAL_TOL;
    PowerEstimate {
        radius,
        iterations: done,
        stagnated,
        seed,
        squarings: 0,
    }
}

/// Largest number of squarings tried by [`power_radius_with_retry`].
pub const MAX_SQUARINGS: u32 = 12;

/// Power iteration with recovery. A stagnating run is repeated on the
/// normalized powers `M², M⁴, …, M^(2^12)`, which separates a dominant `±μ`
/// pair at the first squaring and near-ties in modulus after a few more;
/// the radius is the matching root. Runs with fresh seeds come last.
pub fn power_radius_with_retry(m: &DenseComplexMatrix, iters: usize, seed: u64) -> PowerEstimate {
    let first = power_iteration_radius(m, iters, seed);
    if !first.stagnated {
        return first;
    }
    // power = M^(2^p) / exp(log_scale)
    let mut power = m.clone();
    let mut log_scale = 0.0;
    for p in 1..=MAX_SQUARINGS {
        power = power.matmul(&power);
        log_scale *= 2.0;
        let f = power.frobenius_norm();
        if f == 0.0 || !f.is_finite() {
            break;
        }
        power = power.scaled(Complex64::new(1.0 / f, 0.0));
        log_scale += f.ln();
        let mut est = power_iteration_radius(&power, iters, seed.wrapping_add(p as u64));
        if !est.stagnated {
            let root = 2f64.powi(p as i32);
            est.radius = ((est.radius.ln() + log_scale) / root).exp();
            est.squarings = p;
            return est;
        }
    }
    for attempt in 1..4u64 {
        let est = power_iteration_radius(m, iters, seed.wrapping_add(1000 * attempt));
        if !est.stagnated {
            return est;
        }
    }
    first
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(x: &mut [Complex64]) {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|z| *z /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_diagonal() {
        assert!((spectral_radius(&DenseComplexMatrix::identity(2)).unwrap() - 1.0).abs() < 1e-15);
        let d = DenseComplexMatrix::from_diagonal(&[c(0.5, 0.0), c(0.0, -2.0)]);
        assert!((spectral_radius(&d).unwrap() - 2.0).abs() < 1e-14);
        let one = DenseComplexMatrix::from_diagonal(&[c(-3.0, 4.0)]);
        assert_eq!(spectral_radius(&one).unwrap(), 5.0);
    }

    #[test]
    fn eigenvalues_of_known_triangular_similarity() {
        // upper triangular with known diagonal, conjugated by a random matrix
        let diag = [c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 0.3), c(2.0, -1.0), c(0.1, 0.1)];
        let mut t = DenseComplexMatrix::from_diagonal(&diag);
        for i in 0..5 {
            for j in i + 1..5 {
                t[(i, j)] = c(0.3 * (i + j) as f64, -0.2);
            }
        }
        let p = DenseComplexMatrix::random(5, 3);
        let m = p.inverse().unwrap().matmul(&t).matmul(&p);
        let mut eig = eigenvalues(&m).unwrap();
        for d in diag {
            let (k, _) = eig
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - d).norm().total_cmp(&(b.1 - d).norm()))
                .unwrap();
            assert!((eig[k] - d).norm() < 1e-9, "{} vs {}", eig[k], d);
            eig.remove(k);
        }
    }

    #[test]
    fn random_matrix_agrees_with_power_iteration() {
        let m = DenseComplexMatrix::random(6, 11);
        let qr = spectral_radius(&m).unwrap();
        let pw = power_radius_with_retry(&m, 20_000, 5);
        assert!((qr - pw.radius).abs() <= 1e-6 * qr, "{qr} vs {:?}", pw);
    }

    #[test]
    fn power_identity_and_nilpotent() {
        let e = power_iteration_radius(&DenseComplexMatrix::identity(3), 1, 0);
        assert!((e.radius - 1.0).abs() < 1e-14);
        let mut nil = DenseComplexMatrix::zeros(3);
        nil[(0, 1)] = c(1.0, 0.0);
        nil[(1, 2)] = c(2.0, 0.0);
        let e = power_iteration_radius(&nil, 10, 1);
        assert_eq!(e.radius, 0.0);
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
    }

    #[test]
    fn plus_minus_pair_is_flagged_and_recovered() {
        let mut m = DenseComplexMatrix::zeros(2);
        m[(0, 1)] = c(0.3, 0.1);
        m[(1, 0)] = c(0.8, -0.4);
        let plain = power_iteration_radius(&m, 200, 2);
        assert!(plain.stagnated);
        let fixed = power_radius_with_retry(&m, 200, 2);
        assert!(fixed.squarings == 1 && !fixed.stagnated);
        let qr = spectral_radius(&m).unwrap();
        assert!((fixed.radius - qr).abs() < 1e-12 * qr);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = DenseComplexMatrix::identity(2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(spectral_radius(&m), Err(Error::BadMatrix)));
        assert!(DenseComplexMatrix::from_row_major(vec![ZERO; 3]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn similarity_invariance(n in 2usize..12, seed in 0u64..10_000) {
                let m = DenseComplexMatrix::random(n, seed);
                // well-conditioned P = I + small perturbation
                let e = DenseComplexMatrix::random(n, seed + 1).scaled(c(0.3 / n as f64, 0.0));
                let id = DenseComplexMatrix::identity(n);
                let p = DenseComplexMatrix::from_fn(n, |i, j| id[(i, j)] + e[(i, j)]);
                let cond = p.max_row_sum_norm() * p.inverse().unwrap().max_row_sum_norm();
                prop_assume!(cond < 100.0);
                let sim = p.inverse().unwrap().matmul(&m).matmul(&p);
                let a = spectral_radius(&m).unwrap();
                let b = spectral_radius(&sim).unwrap();
                prop_assert!((a - b).abs() <= 1e-8 * a);
            }

            #[test]
            fn scaling(n in 1usize..15, seed in 0u64..10_000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
                let m = DenseComplexMatrix::random(n, seed);
                let z = c(re, im);
                let a = spectral_radius(&m).unwrap();
                let b = spectral_radius(&m.scaled(z)).unwrap();
                prop_assert!((b - z.norm() * a).abs() <= 1e-12 * z.norm() * a * 10.0 + 1e-300);
            }

            #[test]
            fn bounded_by_row_sum_norm(n in 1usize..30, seed in 0u64..10_000) {
                let m = DenseComplexMatrix::random(n, seed);
                prop_assert!(spectral_radius(&m).unwrap() <= m.max_row_sum_norm() * (1.0 + 1e-12));
            }
        }
    }
}
