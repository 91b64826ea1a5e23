//! The acceptance suite, shared by the `acceptance` test target and the
//! `validate` subcommand.
//!
//! Each criterion returns a pass flag and a one-line detail string with the
//! measured numbers. Runtime budgets count toward passing.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fd::{assemble, greens_field, ComplexField, EdgeId, GreensPreset, Grid2D, Patch, Sides};
use crate::geometry::Decomposition;
use crate::mode_analysis::{
    assemble_iteration_matrix, convergence_factor_profile, max_mode_rho, max_rho, BoundaryConfig, ModeProblem,
    Problem, XiGrid,
};
use crate::model::{
    compute_eta, imag_real_ratio, principal_sqrt, viscoelastic_coefficient, zeroth_order_approx, PhysicalParams,
    Regime,
};
use crate::schwarz::{per_mode_contraction, run_schwarz, InterfaceTraces, SchwarzRunner};
use crate::spectra::{power_radius_with_retry, spectral_radius, DenseComplexMatrix};
use crate::sweep::preset;

/// Result of one acceptance criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl Outcome {
    /// `PASS [3] name (1.2 s): detail`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub budget: Option<Duration>,
    check: Check,
}

impl Criterion {
    pub fn run(&self) -> Outcome {
        let start = Instant::now();
        let result = (self.check)();
        let elapsed = start.elapsed();
        let (mut passed, mut detail) = match result {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(b) = self.budget {
            if elapsed > b {
                passed = false;
                detail.push_str(&format!("; over the {:.0} s budget", b.as_secs_f64()));
            }
        }
        Outcome {
            id: self.id,
            name: self.name,
            passed,
            detail,
            elapsed,
            budget: self.budget,
        }
    }
}

pub fn criteria() -> Vec<Criterion> {
    let secs = |s| Some(Duration::from_secs(s));
    vec![
        Criterion { id: 1, name: "exact identities", budget: secs(1), check: exact_identities },
        Criterion { id: 2, name: "eigensolver oracle equivalence", budget: secs(10), check: eigensolver_oracle },
        Criterion { id: 3, name: "undamped cavity divergence", budget: secs(120), check: undamped_cavity },
        Criterion { id: 4, name: "damping monotonicity and decay", budget: None, check: damping_monotonicity },
        Criterion { id: 5, name: "gamma/r correspondence", budget: None, check: gamma_r_correspondence },
        Criterion { id: 6, name: "wavenumber robustness with damping", budget: None, check: wavenumber_robustness },
        Criterion { id: 7, name: "N-scaling", budget: None, check: n_scaling },
        Criterion { id: 8, name: "end-to-end cross-validation", budget: secs(120), check: cross_validation },
        Criterion { id: 9, name: "Greens-field qualitative reproduction", budget: secs(300), check: greens_qualitative },
        Criterion { id: 10, name: "FD convergence order", budget: secs(120), check: fd_order },
    ]
}

pub fn run_criterion(id: u8) -> Outcome {
    criteria()
        .into_iter()
        .find(|c| c.id == id)
        .unwrap_or_else(|| panic!("no criterion {id}"))
        .run()
}

pub fn run_all() -> Vec<Outcome> {
    criteria().iter().map(Criterion::run).collect()
}

fn params(omega: f64, r: f64, gamma: f64) -> Result<PhysicalParams> {
    PhysicalParams::new(omega, r, gamma)
}

fn scan() -> XiGrid {
    XiGrid::default()
}

fn profile(p: &PhysicalParams, n: usize, l: f64, problem: Problem, grid: XiGrid) -> Result<Vec<f64>> {
    let d = Decomposition::new(n, l)?;
    let xi = grid.points(p.omega());
    Ok(convergence_factor_profile(p, &d, problem.boundary(), &xi)?
        .into_iter()
        .map(|f| f.rho)
        .collect())
}

fn exact_identities() -> Result<(bool, String)> {
    let mut fails = Vec::new();
    let eta = compute_eta(&params(100.0, 1.0, 0.0)?).eta;
    if (eta - Complex64::new(-10000.0, 100.0)).norm() > 1e-12 {
        fails.push(format!("eta = {eta}"));
    }
    let ratio_r = imag_real_ratio(&params(100.0, 1.0, 0.0)?)?;
    let ratio_g = imag_real_ratio(&params(100.0, 0.0, 1e-4)?)?;
    if (ratio_r + 0.01).abs() > 1e-12 || (ratio_g + 0.01).abs() > 1e-12 {
        fails.push(format!("ratios {ratio_r}, {ratio_g}"));
    }
    let mut branch_bad = 0;
    for &omega in &[1.0, 20.0, 100.0, 400.0] {
        for &r in &[0.0, 0.1, 1.0, 100.0] {
            for &gamma in &[0.0, 1e-6, 1e-3, 1.0] {
                let c = compute_eta(&params(omega, r, gamma)?);
                let s = c.sqrt_eta;
                let ok = s.re >= 0.0
                    && (s.re > 0.0 || s.im >= 0.0)
                    && (s * s - c.eta).norm() <= 1e-14 * c.eta.norm()
                    && principal_sqrt(c.eta) == s;
                branch_bad += usize::from(!ok);
            }
        }
        if principal_sqrt(Complex64::new(-omega * omega, 0.0)) != Complex64::new(0.0, omega) {
            branch_bad += 1;
        }
    }
    if branch_bad > 0 {
        fails.push(format!("{branch_bad} branch violations"));
    }
    let p = params(100.0, 0.0, 1e-4)?;
    let approx = zeroth_order_approx(&p, Regime::Small)?.value;
    let exact = viscoelastic_coefficient(100.0, 1e-4);
    let rel = (approx - exact).norm() / exact.norm();
    if rel > 1e-3 {
        fails.push(format!("small-regime error {rel:e}"));
    }
    let detail = format!("eta = {eta}, ratios {ratio_r} / {ratio_g}, approximation error {rel:.2e}");
    Ok((fails.is_empty(), if fails.is_empty() { detail } else { fails.join("; ") }))
}

pub fn assembled_sample() -> Result<Vec<DenseComplexMatrix>> {
    let mut all = Vec::new();
    for name in ["fig1", "fig5", "fig9", "fig13", "fig24", "fig1012"] {
        let cfg = preset(name)?;
        for c in cfg.curves()? {
            let d = Decomposition::new(c.n_subdomains, c.overlap)?;
            for ratio in [0.37, 1.23] {
                all.push((c.params, d.clone(), cfg.problem.boundary(), ratio * c.params.omega()));
            }
        }
    }
    let stride = all.len() as f64 / 50.0;
    (0..50)
        .map(|i| {
            let (p, d, bc, xi) = all[(i as f64 * stride) as usize].clone();
            let m = ModeProblem::new(xi, compute_eta(&p), d, bc)?;
            Ok(assemble_iteration_matrix(&m)?.into_matrix())
        })
        .collect()
}

fn eigensolver_oracle() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    let random = (0..100u64).map(|i| DenseComplexMatrix::random(2 + (i as usize * 48) / 99, 1000 + i));
    for (i, m) in random.chain(assembled_sample()?).enumerate() {
        let qr = spectral_radius(&m)?;
        let pw = power_radius_with_retry(&m, 20_000, i as u64).radius;
        let rel = (qr - pw).abs() / qr.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if !(rel <= 1e-6) {
            bad.push(format!("#{i} (order {}): {qr} vs {pw}", m.order()));
        }
    }
    let detail = format!("150 matrices, worst relative difference {worst:.2e}");
    Ok((bad.is_empty(), if bad.is_empty() { detail } else { format!("{detail}; {}", bad.join(", ")) }))
}

fn undamped_cavity() -> Result<(bool, String)> {
    let p = PhysicalParams::undamped(100.0)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [2, 8] {
        for l in [0.0, 1.0 / 300.0] {
            let rho = max_mode_rho(&p, &Decomposition::new(n, l)?, BoundaryConfig::cavity(), XiGrid::physical())?;
            ok &= rho >= 0.999;
            parts.push(format!("N={n} L={l:.4}: {rho:.6}"));
        }
    }
    let grid = Grid2D::new(255)?;
    let discrete = match run_schwarz(&p, &Decomposition::new(8, 1.0 / 300.0)?, BoundaryConfig::cavity(), grid, 200, 11) {
        Err(Error::Diverged { iteration, .. }) => format!("discrete run diverged at iteration {iteration}"),
        Ok(rep) => {
            ok &= rep.rate >= 0.99;
            format!("discrete rate {:.5}", rep.rate)
        }
        Err(e) => return Err(e),
    };
    parts.push(discrete);
    Ok((ok, parts.join(", ")))
}

fn damping_monotonicity() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for l in [0.0, 1.0 / 300.0] {
        let curves: Vec<Vec<f64>> = [10.0, 1.0, 0.1, 0.0]
            .iter()
            .map(|&r| profile(&params(100.0, r, 0.0)?, 2, l, Problem::Waveguide, scan()))
            .collect::<Result<_>>()?;
        let xi = scan().points(100.0);
        let mut violations = 0;
        let mut worst = (0.0, 0.0, 0.0);
        for i in 0..xi.len() {
            for w in curves.windows(2) {
                let excess = w[0][i] - w[1][i];
                if excess > 1e-12 {
                    violations += 1;
                    if excess > worst.0 {
                        worst = (excess, xi[i] / 100.0, w[0][i]);
                    }
                }
            }
        }
        ok &= violations == 0;
        parts.push(if violations == 0 {
            format!("L={l:.4}: chain holds on all {} points", xi.len())
        } else {
            format!(
                "L={l:.4}: {violations} chain violations, worst excess {:.3} at xi/omega = {:.3} (rho = {:.3})",
                worst.0, worst.1, worst.2
            )
        });
    }
    let rs = [10.0, 30.0, 100.0, 300.0];
    let maxes: Vec<f64> = rs
        .iter()
        .map(|&r| Ok(max_rho_of(&profile(&params(100.0, r, 0.0)?, 2, 1.0 / 300.0, Problem::Waveguide, scan())?)))
        .collect::<Result<_>>()?;
    let decreasing = maxes.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    let pts: Vec<(f64, f64)> = rs.iter().zip(&maxes).map(|(r, m)| (r.sqrt(), m.ln())).collect();
    let (slope, rms) = line_fit(&pts);
    parts.push(format!(
        "max rho over r=10,30,100,300: {:.4}, {:.4}, {:.4}, {:.4} ({}), log-vs-sqrt(r) slope {slope:.4}, rms residual {rms:.4}",
        maxes[0],
        maxes[1],
        maxes[2],
        maxes[3],
        if decreasing { "decreasing" } else { "not decreasing" }
    ));
    Ok((ok, parts.join("; ")))
}

fn max_rho_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Least-squares line through `pts`: slope and RMS residual.
fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rms = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

fn gamma_r_correspondence() -> Result<(bool, String)> {
    let a = profile(&params(100.0, 0.0, 1e-4)?, 2, 0.0, Problem::Waveguide, scan())?;
    let b = profile(&params(100.0, 1.0, 0.0)?, 2, 0.0, Problem::Waveguide, scan())?;
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok((diff < 0.05, format!("max |rho(gamma=1e-4) - rho(r=1)| = {diff:.4}")))
}

fn wavenumber_robustness() -> Result<(bool, String)> {
    let omegas = [50.0, 100.0, 200.0];
    let max_for = |r: f64| -> Result<Vec<f64>> {
        omegas
            .iter()
            .map(|&w| {
                let d = Decomposition::new(2, 1.0 / (3.0 * w))?;
                max_mode_rho(&params(w, r, 0.0)?, &d, BoundaryConfig::waveguide(), XiGrid::physical())
            })
            .collect()
    };
    let damped = max_for(1.0)?;
    let undamped = max_for(0.0)?;
    let factor = |v: &[f64]| max_rho_of(v) / v.iter().copied().fold(f64::INFINITY, f64::min);
    let fd = factor(&damped);
    let larger = damped.iter().zip(&undamped).all(|(d, u)| u > d || u.is_infinite());
    let ok = fd < 1.25 && larger;
    Ok((
        ok,
        format!(
            "r=1: {:.4}, {:.4}, {:.4} (factor {fd:.4}); r=0: {:.4}, {:.4}, {:.4} (factor {:.4}); r=0 larger at every omega: {larger}",
            damped[0],
            damped[1],
            damped[2],
            undamped[0],
            undamped[1],
            undamped[2],
            factor(&undamped)
        ),
    ))
}

fn n_scaling() -> Result<(bool, String)> {
    let p = params(100.0, 0.0, 1e-3)?;
    let rho = |n: usize| -> Result<f64> {
        max_mode_rho(&p, &Decomposition::new(n, 0.1 / n as f64)?, BoundaryConfig::waveguide(), XiGrid::physical())
    };
    let (r4, r8, r16) = (rho(4)?, rho(8)?, rho(16)?);
    let q1 = (1.0 - r8) / (1.0 - r4);
    let q2 = (1.0 - r16) / (1.0 - r8);
    let ok = (0.3..=0.8).contains(&q1) && (0.3..=0.8).contains(&q2);
    Ok((
        ok,
        format!("rho(4,8,16) = {r4:.5}, {r8:.5}, {r16:.5}; ratios {q1:.4}, {q2:.4}"),
    ))
}

fn cross_validation() -> Result<(bool, String)> {
    let grid = Grid2D::new(255)?;
    let p = params(20.0, 1.0, 0.0)?;
    let bc = BoundaryConfig::waveguide();
    let runner = SchwarzRunner::new(&p, &Decomposition::new(2, 4.0 * grid.h())?, bc, grid)?;
    let report = runner.run(InterfaceTraces::random(runner.interfaces(), runner.ny(), 7), 80, Some(7))?;
    if report.diverged() {
        return Ok((false, "discrete iteration diverged".into()));
    }
    let snapped = Decomposition::new(2, report.geometry.effective_overlap())?;
    let xi: Vec<f64> = (1..=40).map(|k| k as f64 * PI).collect();
    let predicted = convergence_factor_profile(&p, &snapped, bc, &xi)?;
    let observed = per_mode_contraction(&report);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        match observed[k].rate {
            Some(o) => {
                let rel = (o - predicted[k].rho).abs() / predicted[k].rho;
                worst = worst.max(rel);
                ok &= rel <= 0.1;
            }
            None => ok = false,
        }
    }
    let max_pred = max_rho(&predicted);
    let overall = (report.rate - max_pred).abs() / max_pred;
    ok &= overall <= 0.1;
    Ok((
        ok,
        format!(
            "modes 1-5 worst relative error {worst:.4}; overall rate {:.5} vs predicted {max_pred:.5} ({overall:.4})",
            report.rate
        ),
    ))
}

/// Boundary-ring max `|u|` over near-source max `|u|` for a centred source.
pub fn ring_ratio(field: &ComplexField) -> f64 {
    let ring = field.max_abs_where(|x, y| x.min(y).min(1.0 - x).min(1.0 - y) <= 0.1);
    let near = field.max_abs_where(|x, y| ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt() <= 0.1);
    ring / near
}

fn greens_qualitative() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for preset in [GreensPreset::Cavity, GreensPreset::Waveguide] {
        let ratio = |r: f64, gamma: f64| -> Result<f64> {
            Ok(ring_ratio(&greens_field(&params(100.0, r, gamma)?, preset, (0.5, 0.5), 255)?))
        };
        let undamped = ratio(0.0, 0.0)?;
        let first = ratio(1.0, 0.0)?;
        let visco = ratio(0.0, 0.003)?;
        ok &= first < undamped && visco < undamped;
        parts.push(format!(
            "{}: undamped {undamped:.4}, r=1 {first:.4}, gamma=0.003 {visco:.4}",
            preset.name()
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// A smooth exact solution with its Laplacian and x-derivative.
struct Manufactured {
    u: fn(f64, f64) -> Complex64,
    lap: fn(f64, f64) -> Complex64,
    ux: fn(f64, f64) -> Complex64,
}

fn cavity_solution() -> Manufactured {
    Manufactured {
        u: |x, y| Complex64::new((PI * x).sin() * (PI * y).sin(), 0.0),
        lap: |x, y| Complex64::new(-2.0 * PI * PI * (PI * x).sin() * (PI * y).sin(), 0.0),
        ux: |x, y| Complex64::new(PI * (PI * x).cos() * (PI * y).sin(), 0.0),
    }
}

/// `sin(πy)(cos 4x + i x²)`, nonzero on the impedance sides.
fn waveguide_solution() -> Manufactured {
    Manufactured {
        u: |x, y| (PI * y).sin() * Complex64::new((4.0 * x).cos(), x * x),
        lap: |x, y| {
            let phi = Complex64::new((4.0 * x).cos(), x * x);
            let phi_xx = Complex64::new(-16.0 * (4.0 * x).cos(), 2.0);
            (PI * y).sin() * (phi_xx - PI * PI * phi)
        },
        ux: |x, y| (PI * y).sin() * Complex64::new(-4.0 * (4.0 * x).sin(), 2.0 * x),
    }
}

/// Discrete L² error of the manufactured solution on an `n × n` grid.
pub fn manufactured_error(sides: Sides, params: &PhysicalParams, n: usize, waveguide: bool) -> Result<f64> {
    let m = if waveguide { waveguide_solution() } else { cavity_solution() };
    let grid = Grid2D::new(n)?;
    let coeff = compute_eta(params);
    let patch = Patch::full(grid, sides);
    let x = |i: usize| grid.coord(i);
    let mut rhs = patch.sample(|i, j| (m.lap)(x(i), x(j)) - coeff.eta * (m.u)(x(i), x(j)));
    if waveguide {
        let ys: Vec<f64> = (patch.iy.0..=patch.iy.1).map(x).collect();
        let s = coeff.sqrt_eta;
        let west: Vec<Complex64> = ys.iter().map(|&y| -(m.ux)(0.0, y) + s * (m.u)(0.0, y)).collect();
        let east: Vec<Complex64> = ys.iter().map(|&y| (m.ux)(1.0, y) + s * (m.u)(1.0, y)).collect();
        patch.add_robin_data(&mut rhs, EdgeId::West, &west);
        patch.add_robin_data(&mut rhs, EdgeId::East, &east);
    }
    let u = assemble(&patch, &coeff)?.factor()?.solve(&rhs)?;
    let h = grid.h();
    let sq: f64 = u
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let (i, j) = patch.node(k);
            (v - (m.u)(x(i), x(j))).norm_sqr()
        })
        .sum();
    Ok((h * h * sq).sqrt())
}

fn fd_order() -> Result<(bool, String)> {
    let p = PhysicalParams::undamped(8.0)?;
    let mut ok = true;
    let mut parts = Vec::new();
    let configs = [
        ("cavity", Sides::for_preset(GreensPreset::Cavity), false),
        ("waveguide", Sides::for_preset(GreensPreset::Waveguide), true),
    ];
    for (name, sides, wg) in configs {
        let errs: Vec<f64> = [63, 127, 255]
            .iter()
            .map(|&n| manufactured_error(sides, &p, n, wg))
            .collect::<Result<_>>()?;
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        ok &= o1 >= 1.9 && o2 >= 1.9;
        parts.push(format!("{name}: errors {:.3e}, {:.3e}, {:.3e}, orders {o1:.3}, {o2:.3}", errs[0], errs[1], errs[2]));
    }
    Ok((ok, parts.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_exact() {
        let (slope, rms) = line_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        assert!((slope - 2.0).abs() < 1e-12 && rms < 1e-12);
    }

    #[test]
    fn ids_are_one_to_ten() {
        let ids: Vec<u8> = criteria().iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn manufactured_error_is_small_on_a_coarse_grid() {
        let p = PhysicalParams::undamped(8.0).unwrap();
        let e = manufactured_error(Sides::for_preset(GreensPreset::Waveguide), &p, 31, true).unwrap();
        assert!(e < 1e-2, "{e}");
    }
}
