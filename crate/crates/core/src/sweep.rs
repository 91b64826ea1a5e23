//! Parameter sweeps over `ρ(ξ)` profiles.
//!
//! A [`SweepConfig`] is a list of panels. Each panel is one curve family in
//! which exactly one of damping, `ω`, `N` or the overlap varies; every curve
//! is a `ρ(ξ)` profile on the configured `ξ` grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Decomposition;
use crate::mode_analysis::{convergence_factor_profile, Problem, XiGrid};
use crate::model::PhysicalParams;
use crate::output::{emit_csv, emit_svg_lineplot, fmt_f64, write_file, AxesSpec, Curve, Provenance, Table};

/// Which damping parameter the damping list sets (the other one is zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DampingAxis {
    R,
    Gamma,
}

/// How the overlap `L` is chosen for each curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OverlapRule {
    Fixed { values: Vec<f64> },
    /// `L = factor / ω`.
    PerOmega { factor: f64 },
    /// `L = c / N`.
    PerCount { c: f64 },
}

impl OverlapRule {
    fn len(&self) -> usize {
        match self {
            OverlapRule::Fixed { values } => values.len(),
            _ => 1,
        }
    }
}

/// One curve family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub label: String,
    pub damping: DampingAxis,
    pub damping_values: Vec<f64>,
    pub omegas: Vec<f64>,
    pub n_subdomains: Vec<usize>,
    pub overlap: OverlapRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub preset: String,
    pub problem: Problem,
    #[serde(default)]
    pub xi: XiGrid,
    pub panels: Vec<Panel>,
    #[serde(default)]
    pub seed: u64,
}

/// A fully resolved curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    pub panel: usize,
    pub label: String,
    pub params: PhysicalParams,
    pub n_subdomains: usize,
    pub overlap: f64,
}

/// One row of the profile CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub preset: String,
    pub bc: Problem,
    pub omega: f64,
    pub r: f64,
    pub gamma: f64,
    pub n_subdomains: usize,
    pub l_nominal: f64,
    pub l_effective: f64,
    pub xi: f64,
    pub xi_over_omega: f64,
    pub rho: f64,
    pub diverged: bool,
    pub note: String,
}

pub const PROFILE_COLUMNS: [&str; 13] = [
    "preset",
    "bc",
    "omega",
    "r",
    "gamma",
    "N",
    "L_nominal",
    "L_effective",
    "xi",
    "xi_over_omega",
    "rho",
    "diverged",
    "note",
];

impl ProfileRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.preset.clone(),
            self.bc.name().to_string(),
            fmt_f64(self.omega),
            fmt_f64(self.r),
            fmt_f64(self.gamma),
            self.n_subdomains.to_string(),
            fmt_f64(self.l_nominal),
            fmt_f64(self.l_effective),
            fmt_f64(self.xi),
            fmt_f64(self.xi_over_omega),
            fmt_f64(self.rho),
            self.diverged.to_string(),
            self.note.clone(),
        ]
    }

    pub fn from_record(rec: &[String]) -> Result<Self> {
        if rec.len() != PROFILE_COLUMNS.len() {
            return Err(Error::Config(format!("profile row has {} fields", rec.len())));
        }
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Config(format!("column {}: bad number {:?}", PROFILE_COLUMNS[i], rec[i])))
        };
        Ok(Self {
            preset: rec[0].clone(),
            bc: rec[1].parse()?,
            omega: f(2)?,
            r: f(3)?,
            gamma: f(4)?,
            n_subdomains: rec[5]
                .parse()
                .map_err(|_| Error::Config(format!("column N: bad count {:?}", rec[5])))?,
            l_nominal: f(6)?,
            l_effective: f(7)?,
            xi: f(8)?,
            xi_over_omega: f(9)?,
            rho: f(10)?,
            diverged: rec[11]
                .parse()
                .map_err(|_| Error::Config(format!("column diverged: bad flag {:?}", rec[11])))?,
            note: rec[12].clone(),
        })
    }
}

pub fn profile_table(rows: &[ProfileRow]) -> Table {
    let mut t = Table::new(&PROFILE_COLUMNS);
    rows.iter().for_each(|r| t.push(r.to_record()));
    t
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels.is_empty() {
            return Err(Error::Config("panels: list is empty".into()));
        }
        match self.xi {
            XiGrid::Scan { max_ratio, points } if !(max_ratio > 0.0 && max_ratio.is_finite()) || points == 0 => {
                return Err(Error::Config("xi: scan needs max_ratio > 0 and points > 0".into()))
            }
            XiGrid::Physical { count: Some(0) } => return Err(Error::Config("xi: count must be positive".into())),
            _ => {}
        }
        for (i, p) in self.panels.iter().enumerate() {
            let lens = [
                ("damping_values", p.damping_values.len()),
                ("omegas", p.omegas.len()),
                ("n_subdomains", p.n_subdomains.len()),
                ("overlap.values", p.overlap.len()),
            ];
            if let Some((name, _)) = lens.iter().find(|(_, n)| *n == 0) {
                return Err(Error::Config(format!("panels[{i}].{name}: list is empty")));
            }
            let varying = lens.iter().filter(|(_, n)| *n > 1).count();
            if varying != 1 {
                return Err(Error::Config(format!(
                    "panels[{i}]: exactly one axis must vary, found {varying}"
                )));
            }
        }
        // reject bad parameter combinations before any compute
        self.curves().map(|_| ())
    }

    /// Resolves every curve, in output order.
    pub fn curves(&self) -> Result<Vec<CurveSpec>> {
        let mut out = Vec::new();
        for (pi, p) in self.panels.iter().enumerate() {
            for &d in &p.damping_values {
                for &omega in &p.omegas {
                    for &n in &p.n_subdomains {
                        let overlaps = match &p.overlap {
                            OverlapRule::Fixed { values } => values.clone(),
                            OverlapRule::PerOmega { factor } => vec![factor / omega],
                            OverlapRule::PerCount { c } => vec![c / n as f64],
                        };
                        for l in overlaps {
                            let params = match p.damping {
                                DampingAxis::R => PhysicalParams::new(omega, d, 0.0)?,
                                DampingAxis::Gamma => PhysicalParams::new(omega, 0.0, d)?,
                            };
                            Decomposition::new(n, l)?;
                            let label = curve_label(p, d, omega, n, l);
                            out.push(CurveSpec {
                                panel: pi,
                                label,
                                params,
                                n_subdomains: n,
                                overlap: l,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn provenance(&self) -> Provenance {
        let compact = serde_json::to_string(self).expect("config serializes");
        Provenance::new()
            .with("preset", &self.preset)
            .with("seed", self.seed)
            .with("config", compact)
            .with("overlap", "L_effective equals L_nominal (mode analysis is continuous in x)")
    }
}

fn curve_label(p: &Panel, d: f64, omega: f64, n: usize, l: f64) -> String {
    if p.damping_values.len() > 1 {
        match p.damping {
            DampingAxis::R => format!("r = {d}"),
            DampingAxis::Gamma => format!("gamma = {d}"),
        }
    } else if p.omegas.len() > 1 {
        format!("omega = {omega}")
    } else if p.n_subdomains.len() > 1 {
        format!("N = {n}")
    } else {
        format!("L = {}", short(l))
    }
}

fn short(v: f64) -> String {
    let s = format!("{v:.5}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Computed rows and the curves they belong to.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub curves: Vec<CurveSpec>,
    /// `rows[c]` holds the profile of `curves[c]`.
    pub rows: Vec<Vec<ProfileRow>>,
}

impl SweepResult {
    pub fn flat_rows(&self) -> Vec<ProfileRow> {
        self.rows.iter().flatten().cloned().collect()
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let curves = cfg.curves()?;
    let rows = curves
        .iter()
        .map(|c| profile_rows(&cfg.preset, cfg.problem, c, cfg.xi))
        .collect::<Result<_>>()?;
    Ok(SweepResult { curves, rows })
}

/// The `ρ(ξ)` profile of one curve as CSV rows.
pub fn profile_rows(preset: &str, problem: Problem, curve: &CurveSpec, xi: XiGrid) -> Result<Vec<ProfileRow>> {
    let omega = curve.params.omega();
    let decomp = Decomposition::new(curve.n_subdomains, curve.overlap)?;
    let profile = convergence_factor_profile(&curve.params, &decomp, problem.boundary(), &xi.points(omega))?;
    Ok(profile
        .iter()
        .map(|f| ProfileRow {
            preset: preset.to_string(),
            bc: problem,
            omega,
            r: curve.params.r(),
            gamma: curve.params.gamma(),
            n_subdomains: curve.n_subdomains,
            l_nominal: curve.overlap,
            l_effective: curve.overlap,
            xi: f.xi,
            xi_over_omega: f.xi / omega,
            rho: f.rho,
            diverged: f.diverged,
            note: match (f.diverged, f.perturbed) {
                (true, _) => "singular local solve".into(),
                (false, true) => "cut-off mode shifted".into(),
                _ => String::new(),
            },
        })
        .collect())
}

/// Writes `<preset>.csv`, `<preset>.json` and one `<preset>_panelK.svg`
/// per panel into `dir`. Returns the written paths.
pub fn write_sweep(cfg: &SweepConfig, result: &SweepResult, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let prov = cfg.provenance();
    let mut written = Vec::new();

    let csv_path = dir.join(format!("{}.csv", cfg.preset));
    emit_csv(&profile_table(&result.flat_rows()), &prov, &csv_path)?;
    written.push(csv_path);

    let json_path = dir.join(format!("{}.json", cfg.preset));
    write_file(&json_path, format!("{}\n", cfg.to_json()).as_bytes())?;
    written.push(json_path);

    for (pi, panel) in cfg.panels.iter().enumerate() {
        let curves: Vec<Curve> = result
            .curves
            .iter()
            .zip(&result.rows)
            .filter(|(c, _)| c.panel == pi)
            .map(|(c, rows)| Curve {
                label: c.label.clone(),
                points: rows.iter().map(|r| (r.xi_over_omega, r.rho)).collect(),
            })
            .collect();
        let axes = AxesSpec {
            title: format!("{} {}: {}", cfg.preset, cfg.problem.name(), panel.label),
            x_label: "xi / omega".into(),
            y_label: "rho".into(),
            log_y: true,
            y_range: None,
        };
        let path = dir.join(format!("{}_panel{}.svg", cfg.preset, pi + 1));
        emit_svg_lineplot(&curves, &axes, &prov.clone().with("panel", &panel.label), &path)?;
        written.push(path);
    }
    Ok(written)
}

pub const R_VALUES: [f64; 5] = [0.0, 0.1, 1.0, 10.0, 100.0];
pub const GAMMA_VALUES: [f64; 6] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3];
pub const OMEGA_VALUES: [f64; 5] = [25.0, 50.0, 100.0, 200.0, 400.0];
pub const N_VALUES: [usize; 5] = [2, 4, 8, 16, 32];
/// `c` in the overlap rule `L = c/N`.
pub const OVERLAP_PER_COUNT: f64 = 0.1;

pub const PRESETS: [&str; 8] = ["fig1", "fig5", "fig9", "fig13", "fig24", "fig68", "fig1012", "fig1416"];

/// Built-in sweep presets.
///
/// - `fig1`, `fig5`, `fig9`, `fig13`: damping families (`r` or `γ`) for the
///   waveguide and the cavity at `ω = 100`, `N = 2`, one panel per
///   `L ∈ {0, 1/300}`.
/// - `fig24`, `fig68`, `fig1012`, `fig1416`: multi-panel sweeps over `ω`,
///   `N` and `L` for the same four damping/boundary combinations.
pub fn preset(name: &str) -> Result<SweepConfig> {
    let (problem, axis, multi) = match name {
        "fig1" => (Problem::Waveguide, DampingAxis::R, false),
        "fig5" => (Problem::Waveguide, DampingAxis::Gamma, false),
        "fig9" => (Problem::Cavity, DampingAxis::R, false),
        "fig13" => (Problem::Cavity, DampingAxis::Gamma, false),
        "fig24" => (Problem::Waveguide, DampingAxis::R, true),
        "fig68" => (Problem::Waveguide, DampingAxis::Gamma, true),
        "fig1012" => (Problem::Cavity, DampingAxis::R, true),
        "fig1416" => (Problem::Cavity, DampingAxis::Gamma, true),
        _ => {
            return Err(Error::Config(format!(
                "unknown preset {name:?} (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    let panels = if multi { multi_panels(axis) } else { damping_panels(axis) };
    let cfg = SweepConfig {
        preset: name.to_string(),
        problem,
        xi: XiGrid::default(),
        panels,
        seed: 0,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn damping_list(axis: DampingAxis) -> Vec<f64> {
    match axis {
        DampingAxis::R => R_VALUES.to_vec(),
        DampingAxis::Gamma => GAMMA_VALUES.to_vec(),
    }
}

fn damping_panels(axis: DampingAxis) -> Vec<Panel> {
    [0.0, 1.0 / 300.0]
        .iter()
        .map(|&l| Panel {
            label: format!("L = {}", short(l)),
            damping: axis,
            damping_values: damping_list(axis),
            omegas: vec![100.0],
            n_subdomains: vec![2],
            overlap: OverlapRule::Fixed { values: vec![l] },
        })
        .collect()
}

fn multi_panels(axis: DampingAxis) -> Vec<Panel> {
    let (damped, name) = match axis {
        DampingAxis::R => (1.0, "r = 1"),
        DampingAxis::Gamma => (1e-4, "gamma = 0.0001"),
    };
    let mut panels = Vec::new();
    for &(d, dname) in &[(0.0, "undamped"), (damped, name)] {
        panels.push(Panel {
            label: format!("omega varies, {dname}, N = 2, L = 1/(3 omega)"),
            damping: axis,
            damping_values: vec![d],
            omegas: OMEGA_VALUES.to_vec(),
            n_subdomains: vec![2],
            overlap: OverlapRule::PerOmega { factor: 1.0 / 3.0 },
        });
    }
    for &(d, dname) in &[(0.0, "undamped"), (damped, name)] {
        panels.push(Panel {
            label: format!("N varies, {dname}, omega = 100, L = 0.1/N"),
            damping: axis,
            damping_values: vec![d],
            omegas: vec![100.0],
            n_subdomains: N_VALUES.to_vec(),
            overlap: OverlapRule::PerCount { c: OVERLAP_PER_COUNT },
        });
    }
    for &n in &[2usize, 8] {
        let omega = 100.0;
        panels.push(Panel {
            label: format!("L varies, {name}, omega = 100, N = {n}"),
            damping: axis,
            damping_values: vec![damped],
            omegas: vec![omega],
            n_subdomains: vec![n],
            overlap: OverlapRule::Fixed {
                values: vec![0.0, 1.0 / (3.0 * omega), 2.0 / (3.0 * omega)],
            },
        });
    }
    panels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(cfg: &mut SweepConfig) {
        cfg.xi = XiGrid::Scan {
            max_ratio: 2.0,
            points: 20,
        };
    }

    #[test]
    fn every_preset_validates() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            assert!(!cfg.curves().unwrap().is_empty(), "{name}");
        }
        assert!(preset("fig99").is_err());
    }

    #[test]
    fn fig1_layout() {
        let cfg = preset("fig1").unwrap();
        let curves = cfg.curves().unwrap();
        assert_eq!(curves.len(), 10);
        assert_eq!(cfg.problem, Problem::Waveguide);
        let rs: Vec<f64> = curves.iter().take(5).map(|c| c.params.r()).collect();
        assert_eq!(rs, R_VALUES.to_vec());
        assert!(curves[..5].iter().all(|c| c.overlap == 0.0));
        assert!(curves[5..].iter().all(|c| c.overlap == 1.0 / 300.0));
        assert!(curves.iter().all(|c| c.n_subdomains == 2 && c.params.omega() == 100.0));
    }

    #[test]
    fn exactly_one_axis_varies() {
        let mut cfg = preset("fig1").unwrap();
        cfg.panels[0].omegas = vec![50.0, 100.0];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.panels[0].omegas.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn invalid_combination_rejected_before_compute() {
        let mut cfg = preset("fig24").unwrap();
        cfg.panels[2].overlap = OverlapRule::PerCount { c: 2.0 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_diagnostics() {
        let cfg = preset("fig68").unwrap();
        assert_eq!(SweepConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let err = SweepConfig::from_json("{\n  \"preset\": \"x\",\n  \"problem\": \"tube\"\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let mut cfg = preset("fig9").unwrap();
        small(&mut cfg);
        let res = run_sweep(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_sweep(&cfg, &res, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let table = crate::output::read_csv(&files[0]).unwrap();
        let back: Vec<ProfileRow> = table.rows.iter().map(|r| ProfileRow::from_record(r).unwrap()).collect();
        assert_eq!(back, res.flat_rows());
    }

    #[test]
    fn sweep_is_byte_deterministic() {
        let mut cfg = preset("fig5").unwrap();
        small(&mut cfg);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = write_sweep(&cfg, &run_sweep(&cfg).unwrap(), a.path()).unwrap();
        let fb = write_sweep(&cfg, &run_sweep(&cfg).unwrap(), b.path()).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }
}
