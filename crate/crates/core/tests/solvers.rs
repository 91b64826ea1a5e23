use std::f64::consts::PI;
use std::sync::OnceLock;

use helmdamp::fd::{greens_field, ComplexField, solve_source, GreensPreset, Grid2D, Sides, SourceTerm};
use helmdamp::mode_analysis::{assemble_iteration_matrix, BoundaryConfig, ModeProblem};
use helmdamp::schwarz::run_schwarz;
use helmdamp::spectra::{power_iteration_radius, spectral_radius};
use helmdamp::{compute_eta, Decomposition, Error, PhysicalParams};

fn near_boundary(x: f64, y: f64) -> bool {
    x.min(y).min(1.0 - x).min(1.0 - y) <= 0.1
}

#[test]
fn power_iteration_matches_qr_on_assembled_waveguide_matrix() {
    let p = PhysicalParams::new(100.0, 1.0, 0.0).unwrap();
    let mode = ModeProblem::new(
        PI,
        compute_eta(&p),
        Decomposition::new(4, 1.0 / 300.0).unwrap(),
        BoundaryConfig::waveguide(),
    )
    .unwrap();
    let t = assemble_iteration_matrix(&mode).unwrap();
    let qr = spectral_radius(t.matrix()).unwrap();
    let pw = helmdamp::spectra::power_radius_with_retry(t.matrix(), 20_000, 5);
    assert!((qr - pw.radius).abs() <= 1e-6 * qr, "{qr} vs {pw:?}");
    // the plain run either agrees or says it could not settle
    let plain = power_iteration_radius(t.matrix(), 20_000, 5);
    assert!(plain.stagnated || (qr - plain.radius).abs() <= 1e-6 * qr);
}

#[test]
fn damped_cavity_field_is_weaker_near_the_walls() {
    let field = |r| greens_field(&PhysicalParams::new(100.0, r, 0.0).unwrap(), GreensPreset::Cavity, (0.5, 0.5), 255);
    let damped = field(1.0).unwrap().max_abs_where(near_boundary);
    let undamped = field(0.0).unwrap().max_abs_where(near_boundary);
    println!("boundary-ring max |u|: r=1 {damped:.4e}, r=0 {undamped:.4e}");
    assert!(damped < undamped);
}

fn undamped_fields_at_50() -> &'static (ComplexField, ComplexField) {
    static FIELDS: OnceLock<(ComplexField, ComplexField)> = OnceLock::new();
    FIELDS.get_or_init(|| {
        let p = PhysicalParams::undamped(50.0).unwrap();
        let cavity = greens_field(&p, GreensPreset::Cavity, (0.5, 0.5), 255).unwrap();
        let free = greens_field(&p, GreensPreset::FreeSpace, (0.5, 0.5), 255).unwrap();
        (cavity, free)
    })
}

#[test]
fn cavity_field_dominates_free_space() {
    let (cavity, free) = undamped_fields_at_50();
    let (c, f) = (cavity.max_abs(), free.max_abs());
    println!("max |u| at omega = 50: cavity {c:.4e}, free space {f:.4e}");
    assert!(c >= f, "cavity {c} < free space {f}");
}

#[test]
fn cavity_field_dominates_free_space_away_from_the_source() {
    let (cavity, free) = undamped_fields_at_50();
    let away = |x: f64, y: f64| (x - 0.5).hypot(y - 0.5) > 0.1;
    let (c, f) = (cavity.max_abs_where(away), free.max_abs_where(away));
    println!("max |u| beyond 0.1 of the source: cavity {c:.4e}, free space {f:.4e}");
    assert!(c >= f);
}

#[test]
fn near_resonant_cavity_still_passes_the_residual_gate() {
    // omega² = 2π², the lowest continuous cavity eigenvalue
    let grid = Grid2D::new(63).unwrap();
    let source = SourceTerm::Point { x: 0.3, y: 0.4 };
    let solve = |omega| solve_source(&PhysicalParams::undamped(omega).unwrap(), Sides::uniform(helmdamp::Side::Dirichlet), grid, &source);
    let resonant = solve(2f64.sqrt() * PI).unwrap();
    let detuned = solve(0.5 * 2f64.sqrt() * PI).unwrap();
    println!("max |u|: resonant {:.4e}, detuned {:.4e}", resonant.max_abs(), detuned.max_abs());
    assert!(resonant.is_finite());
    assert!(resonant.max_abs() > 10.0 * detuned.max_abs());
}

#[test]
fn discrete_undamped_cavity_does_not_converge() {
    let p = PhysicalParams::undamped(100.0).unwrap();
    let d = Decomposition::new(8, 1.0 / 300.0).unwrap();
    let grid = Grid2D::new(255).unwrap();
    match run_schwarz(&p, &d, BoundaryConfig::cavity(), grid, 200, 3) {
        Err(Error::Diverged { iteration, ratio }) => println!("diverged at {iteration} (growth {ratio:e})"),
        Ok(rep) => {
            println!("rate {}", rep.rate);
            assert!(rep.rate >= 0.999, "rate {}", rep.rate);
        }
        Err(e) => panic!("{e}"),
    }
}
