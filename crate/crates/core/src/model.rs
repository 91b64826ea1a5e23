//! Physical parameters and the damped Helmholtz coefficient.
//!
//! Time-harmonic solutions `u(x) e^{iωt}` of the wave equation with
//! first-order damping `r u_t` and viscoelastic damping `γ ∂_t Δu` satisfy
//!
//! ```text
//! Δu − η u = −f / (1 + iγω),   η = −ω² (1 − i r/ω) / (1 + iγω).
//! ```
//!
//! The impedance parameter of all transmission and outer conditions is the
//! principal root `s = √η`, with the branch fixed by [`principal_sqrt`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wavenumber and damping strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    omega: f64,
    r: f64,
    gamma: f64,
}

impl PhysicalParams {
    pub fn new(omega: f64, r: f64, gamma: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParams(format!("omega must be finite and > 0, got {omega}")));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParams(format!("r must be finite and >= 0, got {r}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParams(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { omega, r, gamma })
    }

    /// Undamped problem at wavenumber `omega`.
    pub fn undamped(omega: f64) -> Result<Self> {
        Self::new(omega, 0.0, 0.0)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_undamped(&self) -> bool {
        self.r == 0.0 && self.gamma == 0.0
    }
}

/// The coefficient `η`, its principal root and the source scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedCoefficient {
    pub eta: Complex64,
    /// Impedance parameter `s = √η`.
    pub sqrt_eta: Complex64,
    /// `1 / (1 + iγω)`, multiplies `−f` on the right-hand side.
    pub rhs_scale: Complex64,
}

/// Principal square root with `Re ≥ 0`; on the cut (`Re = 0`) the root with
/// `Im ≥ 0` is returned, so `√(−ω²) = +iω`.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let modulus = z.norm();
    // Half-angle formulas, arranged to avoid cancellation.
    let t = ((modulus + z.re.abs()) * 0.5).sqrt();
    let w = if z.re >= 0.0 {
        Complex64::new(t, z.im / (2.0 * t))
    } else {
        // z.im == -0.0 must still land on +i.
        let im = if z.im.is_sign_negative() && z.im != 0.0 { -t } else { t };
        Complex64::new(z.im.abs() / (2.0 * t), im)
    };
    if w.re == 0.0 && w.im < 0.0 {
        -w
    } else {
        w
    }
}

/// `η = −ω²(1 − i r/ω)(1 + iγω)⁻¹` together with `√η` and `1/(1 + iγω)`.
pub fn compute_eta(params: &PhysicalParams) -> DampedCoefficient {
    let omega = params.omega;
    // −ω²(1 − ir/ω) = −ω² + iωr, formed directly so the first-order case is exact.
    let numerator = Complex64::new(-omega * omega, omega * params.r);
    let (eta, rhs_scale) = if params.gamma == 0.0 {
        (numerator, Complex64::new(1.0, 0.0))
    } else {
        let denom = Complex64::new(1.0, params.gamma * omega);
        (numerator / denom, denom.inv())
    };
    DampedCoefficient {
        eta,
        sqrt_eta: principal_sqrt(eta),
        rhs_scale,
    }
}

impl From<&PhysicalParams> for DampedCoefficient {
    fn from(params: &PhysicalParams) -> Self {
        compute_eta(params)
    }
}

/// Asymptotic regimes of `ω²/(1 + iωγ)` in the viscoelastic product `ωγ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `ωγ ≪ 1`: `ω² − iω³γ`.
    Small,
    /// `ωγ ≈ 1`: `cω²(1 − i)` with `c = 1/(1 + ω²γ²)`.
    Unit,
    /// `ωγ ≫ 1`: `γ⁻² − iωγ⁻¹`.
    Large,
}

/// Regimes are considered consistent with `ωγ` within this factor of their
/// nominal scale (`≤ 1/F`, `[1/F, F]`, `≥ F`).
pub const REGIME_FACTOR: f64 = 10.0;

impl Regime {
    pub fn is_consistent(self, omega_gamma: f64) -> bool {
        match self {
            Regime::Small => omega_gamma <= 1.0 / REGIME_FACTOR,
            Regime::Unit => (1.0 / REGIME_FACTOR..=REGIME_FACTOR).contains(&omega_gamma),
            Regime::Large => omega_gamma >= REGIME_FACTOR,
        }
    }
}

/// Result of [`zeroth_order_approx`]; `consistent` is false when the regime
/// was requested outside its range of validity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approximation {
    pub value: Complex64,
    pub consistent: bool,
}

/// Asymptotic form of the viscoelastic zeroth-order coefficient `ω²/(1 + iωγ)`.
pub fn zeroth_order_approx(params: &PhysicalParams, regime: Regime) -> Result<Approximation> {
    let (omega, gamma) = (params.omega, params.gamma);
    if gamma <= 0.0 {
        return Err(Error::RegimeNeedsGamma);
    }
    let og = omega * gamma;
    let value = match regime {
        Regime::Small => Complex64::new(omega * omega, -omega * omega * omega * gamma),
        Regime::Unit => {
            let c = 1.0 / (1.0 + og * og);
            Complex64::new(c * omega * omega, -c * omega * omega)
        }
        Regime::Large => Complex64::new(1.0 / (gamma * gamma), -omega / gamma),
    };
    let consistent = regime.is_consistent(og);
    if !consistent {
        log::warn!("regime {regime:?} requested at omega*gamma = {og}");
    }
    Ok(Approximation { value, consistent })
}

/// Exact `ω²/(1 + iωγ)`, the quantity approximated by [`zeroth_order_approx`].
pub fn viscoelastic_coefficient(omega: f64, gamma: f64) -> Complex64 {
    Complex64::new(omega * omega, 0.0) / Complex64::new(1.0, omega * gamma)
}

/// `Im/Re` of the zeroth-order coefficient `−η`: `−ωγ` for viscoelastic and
/// `−r/ω` for first-order damping.
pub fn imag_real_ratio(params: &PhysicalParams) -> Result<f64> {
    let first_order = params.r > 0.0;
    let viscoelastic = params.gamma > 0.0;
    if first_order == viscoelastic {
        return Err(Error::RatioUndefined {
            r: params.r,
            gamma: params.gamma,
        });
    }
    let zeroth = -compute_eta(params).eta;
    Ok(zeroth.im / zeroth.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_bad_params() {
        assert!(PhysicalParams::new(0.0, 0.0, 0.0).is_err());
        assert!(PhysicalParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(PhysicalParams::new(1.0, -0.1, 0.0).is_err());
        assert!(PhysicalParams::new(1.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn undamped_eta() {
        let k = compute_eta(&PhysicalParams::undamped(100.0).unwrap());
        assert_eq!(k.eta, c(-10000.0, 0.0));
        assert_eq!(k.sqrt_eta, c(0.0, 100.0));
        assert_eq!(k.rhs_scale, c(1.0, 0.0));
    }

    #[test]
    fn first_order_eta_is_exact() {
        let k = compute_eta(&PhysicalParams::new(100.0, 1.0, 0.0).unwrap());
        assert_eq!(k.eta, c(-10000.0, 100.0));
    }

    #[test]
    fn viscoelastic_eta() {
        // -1e4 (1 - 0.01i) / (1 + 1e-4), evaluated independently
        let k = compute_eta(&PhysicalParams::new(100.0, 0.0, 1e-4).unwrap());
        let expected = c(-10000.0 / 1.0001, 100.0 / 1.0001);
        assert!((k.eta - expected).norm() < 1e-10);
        assert!((k.eta.re + 9999.0001).abs() < 1e-3);
        assert!((k.eta.im - 99.9900).abs() < 1e-3);
        assert!((k.rhs_scale - c(1.0, 0.01).inv()).norm() < 1e-15);
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(principal_sqrt(c(-10000.0, 0.0)), c(0.0, 100.0));
        assert_eq!(principal_sqrt(c(-10000.0, -0.0)), c(0.0, 100.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((principal_sqrt(c(0.0, 1.0)) - c(h, h)).norm() < 1e-15);
        // polar form: |z| = sqrt(1e8 + 1e4), half angle of arg z
        let z = c(-10000.0, 100.0);
        let m = z.norm().sqrt();
        let half = z.arg() / 2.0;
        let oracle = c(m * half.cos(), m * half.sin());
        let w = principal_sqrt(z);
        assert!((w - oracle).norm() < 1e-12);
        assert!((w.re - 0.5).abs() < 1e-4 && (w.im - 100.0012).abs() < 1e-4);
        assert_eq!(principal_sqrt(c(0.0, 0.0)), c(0.0, 0.0));
        assert_eq!(principal_sqrt(c(4.0, 0.0)), c(2.0, 0.0));
    }

    #[test]
    fn approximations() {
        let p = PhysicalParams::new(100.0, 0.0, 1e-4).unwrap();
        let a = zeroth_order_approx(&p, Regime::Small).unwrap();
        assert!(a.consistent);
        assert!((a.value - c(10000.0, -100.0)).norm() < 1e-9);
        let exact = viscoelastic_coefficient(100.0, 1e-4);
        let rel = (a.value - exact).norm() / exact.norm();
        assert!(rel <= 1e-3 && rel > 1e-6, "rel = {rel}");

        let p = PhysicalParams::new(100.0, 0.0, 1e-2).unwrap();
        let a = zeroth_order_approx(&p, Regime::Unit).unwrap();
        assert!((a.value - c(5000.0, -5000.0)).norm() < 1e-9);
        // at ωγ = 1 the unit form is exact
        assert!((a.value - viscoelastic_coefficient(100.0, 1e-2)).norm() < 1e-9);

        let p = PhysicalParams::new(100.0, 0.0, 1.0).unwrap();
        let a = zeroth_order_approx(&p, Regime::Large).unwrap();
        assert_eq!(a.value, c(1.0, -100.0));

        let mismatch = zeroth_order_approx(&p, Regime::Small).unwrap();
        assert!(!mismatch.consistent);
        let p = PhysicalParams::new(100.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            zeroth_order_approx(&p, Regime::Small),
            Err(Error::RegimeNeedsGamma)
        ));
    }

    #[test]
    fn ratios() {
        let r = |o, r, g| imag_real_ratio(&PhysicalParams::new(o, r, g).unwrap());
        assert!((r(100.0, 0.0, 1e-4).unwrap() + 0.01).abs() < 1e-12);
        assert!((r(100.0, 1.0, 0.0).unwrap() + 0.01).abs() < 1e-12);
        assert!((r(50.0, 0.0, 0.003).unwrap() + 0.15).abs() < 1e-12);
        assert!(matches!(r(50.0, 0.0, 0.0), Err(Error::RatioUndefined { .. })));
        assert!(matches!(r(50.0, 1.0, 0.1), Err(Error::RatioUndefined { .. })));
    }

    #[test]
    fn viscoelastic_components() {
        let (o, g) = (37.0_f64, 2.5e-3_f64);
        let k = compute_eta(&PhysicalParams::new(o, 0.0, g).unwrap());
        let d = 1.0 + o * o * g * g;
        assert!((k.eta.im - o.powi(3) * g / d).abs() < 1e-12 * o * o);
        assert!((k.eta.re + o * o / d).abs() < 1e-12 * o * o);
    }

    #[test]
    fn gamma_mimics_r() {
        let a = compute_eta(&PhysicalParams::new(100.0, 0.0, 1e-4).unwrap()).eta;
        let b = compute_eta(&PhysicalParams::new(100.0, 1.0, 0.0).unwrap()).eta;
        assert!((a - b).norm() / b.norm() < 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sqrt_eta_squares_back(omega in 0.1f64..500.0, r in 0.0f64..1e3, gamma in 0.0f64..1.0) {
                let k = compute_eta(&PhysicalParams::new(omega, r, gamma).unwrap());
                let s = k.sqrt_eta;
                prop_assert!((s * s - k.eta).norm() <= 1e-14 * k.eta.norm() * 4.0);
                prop_assert!(s.re >= 0.0);
                prop_assert!(k.eta.im >= 0.0);
                if s.re == 0.0 { prop_assert!(s.im >= 0.0); }
            }

            #[test]
            fn first_order_expansion(omega in 0.1f64..500.0, r in 0.0f64..1e3) {
                let k = compute_eta(&PhysicalParams::new(omega, r, 0.0).unwrap());
                prop_assert_eq!(k.eta, Complex64::new(-omega * omega, omega * r));
            }

            #[test]
            fn sqrt_continuous_on_upper_half_plane(re in -1e4f64..1e4, im in 0.0f64..1e4) {
                let z = Complex64::new(re, im);
                let dz = Complex64::new(1e-7 * (1.0 + re.abs()), 1e-7 * (1.0 + im));
                let (a, b) = (principal_sqrt(z), principal_sqrt(z + dz));
                let bound = 1e-3 * (1.0 + z.norm().sqrt());
                prop_assert!((a - b).norm() < bound, "{} {}", a, b);
            }
        }
    }
}
