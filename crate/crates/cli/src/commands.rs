use std::path::{Path, PathBuf};

use hpa_core::dde::{
    find_fixed_point, find_limit_cycle, fixed_point_residual, integrate, History, LimitCycle, DEFAULT_INITIAL_STATE,
};
use hpa_core::floquet::{self, assemble_monodromy, floquet_kreiss, floquet_pseudospectrum, floquet_spectrum, FloquetOptions};
use hpa_core::jacobian::{self, characteristic_roots, pencil_on_cycle, pencil_pseudospectrum, sweep_trajectory, DEFAULT_RE_MIN};
use hpa_core::koopman::{
    self, block_axes, block_queries, eigenfunction_field, generate_snapshots, koopman_kreiss, koopman_pseudospectrum,
    KoopmanModel, SnapshotDataset,
};
use hpa_core::numerics::C64;

use crate::cli::{Command, Target};
use crate::config::{validate_levels, Overlay, RunConfig};
use crate::error::CliError;
use crate::provenance::{OutputSink, Provenance};
use crate::render::{read_grid_csv, read_points_csv, resolve_overlay, ContourRendering};

/// Runs one subcommand and returns the files it wrote.
pub fn run(command: &Command, cfg: &RunConfig, output_dir: PathBuf) -> Result<Vec<PathBuf>, CliError> {
    let prov = Provenance::new(cfg.hash(), cfg.seed, command.name());
    let mut out = OutputSink::new(output_dir, prov)?;
    match command {
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::FixedPoint => fixed_point(cfg, &mut out)?,
        Command::LimitCycle => limit_cycle(cfg, &mut out)?,
        Command::JacobianSweep => jacobian_sweep(cfg, &mut out)?,
        Command::JacobianGrid => jacobian_grid(cfg, &mut out)?,
        Command::Floquet => floquet_run(cfg, &mut out)?,
        Command::Koopman => koopman_run(cfg, &mut out)?,
        Command::SweepH { target } => sweep_h(cfg, *target, &mut out)?,
        Command::Render {
            grid,
            eigs,
            overlay,
            out: target,
        } => render(cfg, grid, eigs.as_deref(), *overlay, target.as_deref(), &mut out)?,
    }
    Ok(out.written().to_vec())
}

fn cycle(cfg: &RunConfig) -> Result<LimitCycle, CliError> {
    Ok(find_limit_cycle(&cfg.params()?, &cfg.cycle)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn simulate(cfg: &RunConfig, out: &mut OutputSink) -> Result<(), CliError> {
    let p = cfg.params()?;
    let s = &cfg.simulate;
    let traj = integrate(&p, History::Constant(cfg.initial_state()), 0.0, s.t_end, s.step)?;
    out.write("trajectory.csv", |w| traj.write_csv(w))?;
    let last = traj.final_state();
    println!("final state at tau = {}: x = {:.6}, y = {:.6}", s.t_end, last.x, last.y);
    Ok(())
}

fn fixed_point(cfg: &RunConfig, out: &mut OutputSink) -> Result<(), CliError> {
    let p = cfg.params()?;
    let root = find_fixed_point(&p, DEFAULT_INITIAL_STATE)?;
    let r = fixed_point_residual(&p, root);
    let quoted = fixed_point_residual(&p, DEFAULT_INITIAL_STATE);
    println!("fixed point: x = {:.6}, y = {:.6} (residual {r:.3e})", root.x, root.y);
    println!(
        "residual at the reference point ({}, {}): {quoted:.4e}",
        DEFAULT_INITIAL_STATE.x, DEFAULT_INITIAL_STATE.y
    );
    out.write("fixed_point.csv", |w| {
        writeln!(w, "x,y,residual")?;
        writeln!(w, "{},{},{r}", root.x, root.y)
    })?;
    Ok(())
}

fn limit_cycle(cfg: &RunConfig, out: &mut OutputSink) -> Result<(), CliError> {
    let c = cycle(cfg)?;
    println!("period = {:.6}, closure defect = {:.3e}", c.period, c.closure_defect());
    out.write("limit_cycle.csv", |w| c.write_csv(w))?;
    Ok(())
}

fn jacobian_sweep(cfg: &RunConfig, out: &mut OutputSink) -> Result<(), CliError> {
    let c = cycle(cfg)?;
    let rows = sweep_trajectory(&c, cfg.jacobian.samples)?;
    out.write("jacobian_trajectory.csv", |w| {
        writeln!(w, "tau,x,y,dx,dy")?;
        for r in &rows {
            let (s, d) = (c.eval(r.tau), c.deriv(r.tau));
            writeln!(w, "{},{},{},{},{}", r.tau, s.x, s.y, d.x, d.y)?;
        }
        Ok(())
    })?;
    out.write("jacobian_abscissa.csv", |w| {
        writeln!(w, "tau,alpha")?;
        rows.iter().try_for_each(|r| writeln!(w, "{},{}", r.tau, r.alpha))
    })?;
    out.write("jacobian_distance.csv", |w| {
        writeln!(w, "tau,d")?;
        rows.iter().try_for_each(|r| writeln!(w, "{},{}", r.tau, opt(r.d)))
    })?;
    out.write("jacobian_index.csv", |w| {
        writeln!(w, "tau,index")?;
        rows.iter().try_for_each(|r| writeln!(w, "{},{}", r.tau, opt(r.index)))
    })?;
    out.write("jacobian_indicators.csv", |w| jacobian::write_indicators_csv(&rows, w))?;
    let unstable = rows.iter().filter(|r| r.alpha > 0.0).count();
    println!("period = {:.6}; {unstable} of {} samples unstable", c.period, rows.len());
    Ok(())
}

fn jacobian_grid(cfg: &RunConfig, out: &mut OutputSink) -> Result<(), CliError> {
    let c = cycle(cfg)?;
    for (k, &phase) in cfg.jacobian.phases.iter().enumerate() {
        let tau = phase * c.period;
        let pencil = pencil_on_cycle(&c, tau)?;
        let grid = pencil_pseudospectrum(&pencil, &cfg.jacobian.grid)?;
        let roots = characteristic_roots(&pencil, DEFAULT_RE_MIN)?;
        out.write(&format!("jacobian_grid_{k}.csv"), |w| grid.write_csv(w, "sigma_min"))?;
        out.write(&format!("jacobian_roots_{k}.csv"), |w| {
            writeln!(w, "re,im")?;
            roots.roots.iter().try_for_each(|z| writeln!(w, "{},{}", z.re, z.im))
        })?;
        println!("tau = {tau:.6}: abscissa {}", opt(roots.abscissa()));
    }
    Ok(())
}

fn floquet_run(cfg: &RunConfig, out: &mut OutputSink) -> Result<(), CliError> {
    let c = cycle(cfg)?;
    let m = assemble_monodromy(&c, cfg.n_floquet, cfg.floquet.step)?;
    let spectrum = floquet_spectrum(&m)?;
    if cfg.floquet.dump_matrix {
        out.write("monodromy.csv", |w| m.write_csv(w))?;
    }
    out.write("floquet_multipliers.csv", |w| {
        writeln!(w, "re,im")?;
        spectrum.iter().try_for_each(|z| writeln!(w, "{},{}", z.re, z.im))
    })?;
    let grid = floquet_pseudospectrum(&m, &cfg.floquet.grid)?;
    out.write("floquet_grid.csv", |w| grid.write_csv(w, "value"))?;
    println!("dominant multiplier = {:.6} (modulus {:.6})", spectrum[0], spectrum[0].norm());
    let k = floquet_kreiss(&m, cfg.floquet.c, &cfg.floquet.kreiss)?;
    println!("Kreiss constant K_{} = {:.4} at z = {:.4}", k.c, k.value, k.argmax_z);
    Ok(())
}

fn dataset(cfg: &RunConfig, period: f64, out: &mut OutputSink) -> Result<SnapshotDataset, CliError> {
    let p = cfg.params()?;
    let embedding = cfg.koopman_options().embedding(period);
    match &cfg.koopman.dataset {
        Some(path) if path.exists() => {
            let ds = SnapshotDataset::load(path)?;
            if ds.config != embedding {
                return Err(CliError::Usage(format!(
                    "cached dataset {} was generated with different settings",
                    path.display()
                )));
            }
            log::info!("loaded {} snapshots from {}", ds.len(), path.display());
            Ok(ds)
        }
        Some(path) => {
            let ds = generate_snapshots(&p, &embedding)?;
            ds.save(path)?;
            out.attach(path)?;
            Ok(ds)
        }
        None => Ok(generate_snapshots(&p, &embedding)?),
    }
}

fn koopman_run(cfg: &RunConfig, out: &mut OutputSink) -> Result<(), CliError> {
    let c = cycle(cfg)?;
    let ds = dataset(cfg, c.period, out)?;
    let e = &cfg.embedding;
    let model = KoopmanModel::fit(&ds, e.n_centers, cfg.seed, e.rank_tol)?;
    out.write("koopman_eigs.csv", |w| koopman::write_eigs_csv(&model.eigenpairs, w))?;
    let grid = koopman_pseudospectrum(&model.whitened, &cfg.koopman.grid)?;
    out.write("koopman_grid.csv", |w| grid.write_csv(w, "value"))?;

    let harmonics: Vec<_> = model
        .circle_eigenpairs(0.05, 0.1)
        .into_iter()
        .filter(|p| p.value.im > 1e-8)
        .take(cfg.koopman.fields)
        .collect();
    let axes = block_axes(&c, cfg.koopman.field_n);
    let queries = block_queries(&c, e.d, 0, &axes)?;
    for (k, pair) in harmonics.iter().enumerate() {
        let values = eigenfunction_field(&model.dictionary, &pair.g, &queries)?;
        out.write(&format!("koopman_field_{k}.csv"), |w| koopman::write_field_csv(&axes, &values, w))?;
        println!("eigenvalue {:.6} (residual {:.3e})", pair.value, pair.residual);
    }
    println!(
        "{} snapshots, rank {}, {} eigenvalues",
        ds.len(),
        model.whitened.rank(),
        model.eigenpairs.len()
    );
    let k = koopman_kreiss(&model.whitened, cfg.koopman.c, &cfg.koopman.kreiss)?;
    println!("Kreiss constant K_{} = {:.4} at z = {:.4}", k.c, k.value, k.argmax_z);
    Ok(())
}

fn sweep_h(cfg: &RunConfig, target: Target, out: &mut OutputSink) -> Result<(), CliError> {
    let p = cfg.params()?;
    let hs = &cfg.sweep.h;
    let errors: Vec<Option<String>> = match target {
        Target::Jacobian => {
            let rows = jacobian::sweep_h(hs, &p, &cfg.cycle, cfg.sweep.samples);
            out.write("jacobian_h_sweep.csv", |w| jacobian::write_h_sweep_csv(&rows, w))?;
            rows.into_iter().map(|r| r.error).collect()
        }
        Target::Floquet => {
            let opts = FloquetOptions {
                n: cfg.n_floquet,
                step: cfg.floquet.step,
                c: cfg.floquet.c,
            };
            let rows = floquet::floquet_sweep_h(hs, &p, &cfg.cycle, &opts, &cfg.floquet.kreiss);
            out.write("floquet_h_sweep.csv", |w| floquet::write_sweep_csv(&rows, w))?;
            rows.into_iter().map(|r| r.error).collect()
        }
        Target::Koopman => {
            let rows = koopman::koopman_sweep_h(
                hs,
                &p,
                &cfg.cycle,
                &cfg.koopman_options(),
                cfg.koopman.c,
                &cfg.koopman.kreiss,
            );
            out.write("koopman_h_sweep.csv", |w| koopman::write_sweep_csv(&rows, w))?;
            rows.into_iter().map(|r| r.error).collect()
        }
    };
    for (h, e) in hs.iter().zip(&errors) {
        if let Some(e) = e {
            eprintln!("h = {h}: {e}");
        }
    }
    if errors.iter().all(Option::is_some) {
        return Err(CliError::NonConvergence("every value of h failed".into()));
    }
    Ok(())
}

fn render(
    cfg: &RunConfig,
    grid_path: &Path,
    eigs: Option<&Path>,
    overlay: Option<Overlay>,
    target: Option<&Path>,
    out: &mut OutputSink,
) -> Result<(), CliError> {
    validate_levels(&cfg.render.levels)?;
    let text = std::fs::read_to_string(grid_path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", grid_path.display())))?;
    let (grid, column) = read_grid_csv(&text)?;
    let points: Vec<C64> = match eigs {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            read_points_csv(std::io::BufReader::new(f))?
        }
        None => Vec::new(),
    };
    let stem = grid_path.file_stem().and_then(|s| s.to_str()).unwrap_or("grid");
    let rendering = ContourRendering {
        grid,
        levels: cfg.render.levels.clone(),
        overlay_points: points,
        overlay_curve: resolve_overlay(overlay.unwrap_or(cfg.render.overlay), &column),
        title: stem.to_string(),
    };
    let svg = rendering.to_svg();
    let path = match target {
        Some(t) => t.to_path_buf(),
        None => out.path(&format!("{stem}.svg")),
    };
    std::fs::write(&path, svg)?;
    out.attach(&path)?;
    Ok(())
}
