mod args;

use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use args::{Bc, Cli, Command, FieldBc, Modes, XiArgs};
use helmdamp::fd::{greens_field, GreensPreset, Grid2D, PIVOT_TOL, RESIDUAL_TOL};
use helmdamp::mode_analysis::convergence_factor_profile;
use helmdamp::model::imag_real_ratio;
use helmdamp::output::{
    csv_bytes, emit_csv, emit_svg_lineplot, field_table, schwarz_mode_table, schwarz_norm_table, svg_field,
    write_file, AxesSpec, Curve, FieldComponent, Provenance,
};
use helmdamp::schwarz::{per_mode_contraction, InterfaceTraces, SchwarzRunner, DIVERGENCE_FACTOR, MODAL_FLOOR};
use helmdamp::sweep::{preset, profile_rows, profile_table, run_sweep, write_sweep, CurveSpec, SweepConfig};
use helmdamp::validation::{criteria, Outcome};
use helmdamp::{compute_eta, Decomposition, PhysicalParams, Problem, XiGrid};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Eta(p) => eta(&params(&p)?),
        Command::Rho(a) => rho(a),
        Command::Sweep(a) => sweep(a),
        Command::Greens(a) => greens(a),
        Command::RunSchwarz(a) => run_schwarz(a),
        Command::Validate(a) => validate(&a.only),
    }
}

fn params(p: &args::Physics) -> Result<PhysicalParams> {
    Ok(PhysicalParams::new(p.omega, p.r, p.gamma)?)
}

fn problem(bc: Bc) -> Problem {
    match bc {
        Bc::Waveguide => Problem::Waveguide,
        Bc::Cavity => Problem::Cavity,
    }
}

/// Applies the `--modes/--xi-*` flags on top of `base`.
fn xi_grid(base: XiGrid, a: &XiArgs) -> Result<XiGrid> {
    let physical = match a.modes {
        Some(m) => m == Modes::Physical,
        None => matches!(base, XiGrid::Physical { .. }),
    };
    if physical {
        if a.xi_max_ratio.is_some() || a.xi_points.is_some() {
            bail!("--xi-max-ratio and --xi-points apply to --modes scan");
        }
        return Ok(if matches!(base, XiGrid::Physical { .. }) { base } else { XiGrid::physical() });
    }
    let (max_ratio, points) = match (base, XiGrid::default()) {
        (XiGrid::Scan { max_ratio, points }, _) | (_, XiGrid::Scan { max_ratio, points }) => (max_ratio, points),
        _ => unreachable!("the default grid is a scan"),
    };
    let max_ratio = a.xi_max_ratio.unwrap_or(max_ratio);
    let points = a.xi_points.unwrap_or(points);
    if !(max_ratio > 0.0 && max_ratio.is_finite()) || points == 0 {
        bail!("--xi-max-ratio must be positive and --xi-points at least 1");
    }
    Ok(XiGrid::Scan { max_ratio, points })
}

fn eta(p: &PhysicalParams) -> Result<ExitCode> {
    let c = compute_eta(p);
    println!("eta = {}", c.eta);
    println!("sqrt(eta) = {}", c.sqrt_eta);
    println!("rhs scale 1/(1 + i gamma omega) = {}", c.rhs_scale);
    match imag_real_ratio(p) {
        Ok(ratio) => println!("Im/Re of -eta = {ratio}"),
        Err(e) => println!("Im/Re of -eta: {e}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn rho(a: args::RhoArgs) -> Result<ExitCode> {
    let p = params(&a.physics)?;
    let problem = problem(a.bc);
    let grid = xi_grid(XiGrid::default(), &a.xi)?;
    Decomposition::new(a.n, a.l)?;
    let curve = CurveSpec {
        panel: 0,
        label: format!("r = {}, gamma = {}", p.r(), p.gamma()),
        params: p,
        n_subdomains: a.n,
        overlap: a.l,
    };
    let rows = profile_rows("rho", problem, &curve, grid)?;
    let prov = Provenance::new()
        .with("command", "rho")
        .with("bc", problem.name())
        .with("omega", p.omega())
        .with("r", p.r())
        .with("gamma", p.gamma())
        .with("N", a.n)
        .with("L", a.l)
        .with("xi", format!("{grid:?}"));
    let max = rows.iter().map(|r| r.rho).fold(0.0, f64::max);
    let table = profile_table(&rows);
    match a.out {
        Some(dir) => {
            fs::create_dir_all(&dir)?;
            emit_csv(&table, &prov, &dir.join("rho.csv"))?;
            let curves = [Curve {
                label: curve.label.clone(),
                points: rows.iter().map(|r| (r.xi_over_omega, r.rho)).collect(),
            }];
            let axes = AxesSpec {
                title: format!("{} omega = {} N = {} L = {}", problem.name(), p.omega(), a.n, a.l),
                x_label: "xi / omega".into(),
                y_label: "rho".into(),
                log_y: true,
                y_range: None,
            };
            emit_svg_lineplot(&curves, &axes, &prov, &dir.join("rho.svg"))?;
            println!("max rho = {max}");
            println!("wrote {}", dir.display());
        }
        None => {
            print!("{}", String::from_utf8(csv_bytes(&table, &prov)?)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(a: args::SweepArgs) -> Result<ExitCode> {
    let mut cfg = match (&a.preset, &a.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SweepConfig::from_json(&text).with_context(|| format!("in {}", path.display()))?
        }
        _ => bail!("give exactly one of --preset and --config"),
    };
    if let Some(bc) = a.bc {
        cfg.problem = problem(bc);
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.xi = xi_grid(cfg.xi, &a.xi)?;
    cfg.validate()?;
    let result = run_sweep(&cfg)?;
    let files = write_sweep(&cfg, &result, &a.out)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn greens(a: args::GreensArgs) -> Result<ExitCode> {
    let p = params(&a.physics)?;
    let preset = match a.bc {
        FieldBc::Cavity => GreensPreset::Cavity,
        FieldBc::Waveguide => GreensPreset::Waveguide,
        FieldBc::FreeSpace => GreensPreset::FreeSpace,
    };
    let field = greens_field(&p, preset, (a.source_x, a.source_y), a.grid)?;
    let grid = field.grid();
    let prov = Provenance::new()
        .with("command", "greens")
        .with("bc", preset.name())
        .with("omega", p.omega())
        .with("r", p.r())
        .with("gamma", p.gamma())
        .with("grid", a.grid)
        .with("source", format!("({}, {})", a.source_x, a.source_y))
        .with(
            "source_node",
            format!("({}, {})", grid.coord(grid.nearest(a.source_x)), grid.coord(grid.nearest(a.source_y))),
        )
        .with("residual_tol", RESIDUAL_TOL)
        .with("pivot_tol", PIVOT_TOL);
    fs::create_dir_all(&a.out)?;
    let stem = format!("greens_{}", preset.name());
    emit_csv(&field_table(&field), &prov, &a.out.join(format!("{stem}.csv")))?;
    for (component, suffix, label) in [
        (FieldComponent::Magnitude, "abs", "|u|"),
        (FieldComponent::Real, "re", "Re u"),
    ] {
        let title = format!("{label}, {} omega = {} r = {} gamma = {}", preset.name(), p.omega(), p.r(), p.gamma());
        let svg = svg_field(&field, component, &title, &prov);
        write_file(&a.out.join(format!("{stem}_{suffix}.svg")), svg.as_bytes())?;
    }
    println!("max |u| = {}", field.max_abs());
    println!("wrote {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_schwarz(a: args::SchwarzArgs) -> Result<ExitCode> {
    let p = params(&a.physics)?;
    let grid = Grid2D::new(a.grid)?;
    let l = match (a.l, a.overlap_cells) {
        (_, Some(cells)) => cells as f64 * grid.h(),
        (Some(l), None) => l,
        (None, None) => 0.0,
    };
    let bc = problem(a.bc).boundary();
    let decomp = Decomposition::new(a.n, l)?;
    let runner = SchwarzRunner::new(&p, &decomp, bc, grid)?;
    let initial = InterfaceTraces::random(runner.interfaces(), runner.ny(), a.seed);
    let report = runner.run(initial, a.iters, Some(a.seed))?;

    let snapped = Decomposition::new(a.n, report.geometry.effective_overlap())?;
    let xi: Vec<f64> = (1..=report.mode_cutoff).map(|k| k as f64 * PI).collect();
    let predicted: Vec<f64> = convergence_factor_profile(&p, &snapped, bc, &xi)?
        .iter()
        .map(|f| f.rho)
        .collect();
    let rates = per_mode_contraction(&report);

    let prov = Provenance::new()
        .with("command", "run-schwarz")
        .with("bc", problem(a.bc).name())
        .with("omega", p.omega())
        .with("r", p.r())
        .with("gamma", p.gamma())
        .with("N", a.n)
        .with("L_nominal", l)
        .with("L_effective", report.geometry.effective_overlap())
        .with("overlap_cells", format!("{:?}", report.geometry.overlap_cells))
        .with("grid", a.grid)
        .with("iterations", report.iterations)
        .with("seed", a.seed)
        .with("divergence_factor", DIVERGENCE_FACTOR)
        .with("modal_floor", MODAL_FLOOR);
    fs::create_dir_all(&a.out)?;
    emit_csv(&schwarz_norm_table(&report), &prov, &a.out.join("schwarz_norms.csv"))?;
    emit_csv(&schwarz_mode_table(&rates, &predicted), &prov, &a.out.join("schwarz_modes.csv"))?;

    println!("L nominal {l}, snapped {}", report.geometry.effective_overlap());
    match report.diverged_at {
        Some(it) => println!("status: diverged at iteration {it}"),
        None => println!("status: completed {} iterations", report.iterations),
    }
    println!("observed rate {}", report.rate);
    let upto = 40.min(predicted.len());
    println!("predicted max rho over k = 1..{upto}: {}", max_rho_slice(&predicted[..upto]));
    for (m, pr) in rates.iter().zip(&predicted).take(5) {
        match m.rate {
            Some(o) => println!("k = {}: observed {o:.6}, predicted {pr:.6}", m.k),
            None => println!("k = {}: below floor, predicted {pr:.6}", m.k),
        }
    }
    println!("wrote {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn max_rho_slice(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

fn validate(only: &[u8]) -> Result<ExitCode> {
    let selected: Vec<_> = criteria()
        .into_iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .collect();
    if selected.is_empty() {
        bail!("no criteria match {only:?}");
    }
    let mut outcomes: Vec<Outcome> = Vec::new();
    for c in &selected {
        let o = c.run();
        println!("{}", o.line());
        outcomes.push(o);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
