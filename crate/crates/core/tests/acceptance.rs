//! Acceptance run over the twelve published criteria. Prints one PASS/FAIL
//! line per criterion. Failures listed in `KNOWN_FAILURES` are expected with
//! the model as printed and do not fail the process unless
//! `HPA_ACCEPTANCE_STRICT=1` is set.

use std::time::{Duration, Instant};

use hpa_core::dde::{
    find_fixed_point, find_limit_cycle, fixed_point_residual, integrate, CycleOptions, DimensionalParams, History,
    LimitCycle, NondimParams, State,
};
use hpa_core::floquet::{assemble_monodromy, floquet_kreiss, floquet_spectrum, MonodromyMatrix};
use hpa_core::jacobian::{characteristic_roots, pencil_on_cycle, sweep_trajectory, StabilityIndicators, DEFAULT_RE_MIN};
use hpa_core::koopman::{
    cycle_queries, eigenfunction_field, eval_dictionary, generate_snapshots, koopman_kreiss, koopman_pseudospectrum,
    normalized_correlation, residual, run_pipeline, EmbeddingConfig, KoopmanModel, KoopmanOptions,
};
use hpa_core::numerics::{power_bound, GridAxes, KreissOptions, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_FAILURES: [usize; 5] = [1, 4, 6, 7, 11];
const H_GRID: [f64; 5] = [4.0, 7.66, 12.0, 18.0, 23.0];
const FLOQUET_C: f64 = 1.01;
const KOOPMAN_C: f64 = 1.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn default_cycle() -> LimitCycle {
    find_limit_cycle(&NondimParams::default(), &CycleOptions::default()).expect("cycle at h = 7.66")
}

fn criterion_1() -> Outcome {
    let p = NondimParams::default();
    let quoted = State::new(0.8858, 1.7461);
    match find_fixed_point(&p, quoted) {
        Ok(s) => {
            let pass = (s.x - quoted.x).abs() <= 1e-3 && (s.y - quoted.y).abs() <= 1e-3;
            outcome(
                pass,
                format!(
                    "root ({:.6}, {:.6}), residual {:.1e}; quoted point residual {:.4}",
                    s.x,
                    s.y,
                    fixed_point_residual(&p, s),
                    fixed_point_residual(&p, quoted)
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_2() -> Outcome {
    match DimensionalParams::default().nondimensionalize() {
        Ok(p) => {
            let pass = p.c1 == 4.0
                && (p.c2 - 4.7619).abs() <= 1e-4
                && (p.c3 - 16.3666).abs() <= 1e-3
                && p.t1 == 0.15
                && p.t2 == 0.15;
            outcome(pass, format!("c1 = {}, c2 = {:.5}, c3 = {:.4}, t1 = {}, t2 = {}", p.c1, p.c2, p.c3, p.t1, p.t2))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_3(cycle: &LimitCycle) -> Outcome {
    let p = cycle.params;
    let step = 1e-3;
    let transient = 200.0;
    let orbit: Vec<State> = (0..2000).map(|k| cycle.eval(cycle.period * k as f64 / 2000.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0;
    let mut worst_miss = 0.0f64;
    for _ in 0..100 {
        let s = State::new(rng.gen_range(-3.0..5.0), rng.gen_range(-1.0..8.0));
        let Ok(traj) = integrate(&p, History::Constant(s), 0.0, transient + cycle.period, step) else {
            continue;
        };
        let sup = traj
            .nodes()
            .filter(|(t, _, _)| *t >= transient)
            .map(|(_, u, _)| orbit.iter().map(|o| (u - *o).norm_inf()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        if sup <= 0.05 {
            hits += 1;
        } else {
            worst_miss = worst_miss.max(sup);
        }
    }
    outcome(hits >= 95, format!("{hits}/100 histories within 0.05 of the cycle (worst miss {worst_miss:.3})"))
}

fn criterion_4(cycle: &LimitCycle, rows: &[StabilityIndicators]) -> Outcome {
    let unstable: Vec<f64> = rows.iter().filter(|r| r.alpha > 0.0).map(|r| r.tau).collect();
    if unstable.is_empty() {
        return outcome(false, "no sample with alpha > 0".into());
    }
    let rising = unstable
        .iter()
        .filter(|&&t| cycle.eval(t + 0.02).y > cycle.eval(t).y)
        .count();
    let frac = rising as f64 / unstable.len() as f64;
    outcome(
        frac >= 0.8,
        format!(
            "{} unstable samples in [{:.3}, {:.3}], cortisol rising at {rising} ({:.0}%)",
            unstable.len(),
            unstable[0],
            unstable[unstable.len() - 1],
            100.0 * frac
        ),
    )
}

fn criterion_5(rows: &[StabilityIndicators], period: f64) -> Outcome {
    let n = rows.len() - 1; // last sample repeats the first
    let idx = |k: usize| rows[k % n].index;
    let mut indices: Vec<f64> = rows[..n].iter().filter_map(|r| r.index).collect();
    indices.sort_by(f64::total_cmp);
    let median = indices[indices.len() / 2];
    let unstable: Vec<usize> = (0..n).filter(|&k| rows[k].alpha > 0.0).collect();
    if unstable.is_empty() {
        return outcome(false, "no unstable window".into());
    }
    // window edges on the periodic sample ring
    let start = *unstable
        .iter()
        .find(|&&k| rows[(k + n - 1) % n].alpha <= 0.0)
        .expect("window has a start");
    let end = *unstable
        .iter()
        .find(|&&k| rows[(k + 1) % n].alpha <= 0.0)
        .expect("window has an end");
    let reach = n / 4;
    let local_max = |k: usize| -> Option<f64> {
        let v = idx(k)?;
        let l = idx(k + n - 1).unwrap_or(f64::NEG_INFINITY);
        let r = idx(k + 1).unwrap_or(f64::NEG_INFINITY);
        (v >= l && v >= r).then_some(v)
    };
    let before = (1..=reach)
        .filter_map(|j| local_max((start + n - j) % n).map(|v| (v, (start + n - j) % n)))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let after = (1..=reach)
        .filter_map(|j| local_max((end + j) % n).map(|v| (v, (end + j) % n)))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match (before, after) {
        (Some((b, kb)), Some((a, ka))) => {
            let tau = |k: usize| period * k as f64 / n as f64;
            outcome(
                b >= 2.0 * median && a >= 2.0 * median,
                format!(
                    "peaks {b:.3} at tau {:.3} and {a:.3} at tau {:.3}, median index {median:.3}",
                    tau(kb),
                    tau(ka)
                ),
            )
        }
        _ => outcome(false, "no local maximum on one side of the window".into()),
    }
}

fn criterion_6(m: &MonodromyMatrix) -> Outcome {
    match floquet_spectrum(m) {
        Ok(ev) => {
            let d = ev[0];
            let rest = ev[1..].iter().map(|z| z.norm()).fold(0.0, f64::max);
            let pass = d.im.abs() < 1e-10
                && (0.985..=1.0).contains(&d.re)
                && (d.re - 0.9946).abs() <= 0.005
                && rest <= 0.3;
            outcome(pass, format!("dominant {:.6}{:+.1e}i, next modulus {rest:.4}", d.re, d.im))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn kreiss_grid(c: f64) -> KreissOptions {
    KreissOptions {
        radial: 40,
        angular: 64,
        r_max: c + 10.0,
    }
}

fn criterion_7(m: &MonodromyMatrix) -> Outcome {
    match floquet_kreiss(m, 1.0, &KreissOptions::for_threshold(1.0)) {
        Ok(k) => outcome((k.value - 7.4014).abs() <= 0.2 * 7.4014, format!("K_1 = {:.4}", k.value)),
        Err(e) => {
            let diag: Vec<String> = [1.001, 1.01]
                .iter()
                .filter_map(|&c| floquet_kreiss(m, c, &kreiss_grid(c)).ok().map(|k| format!("K_{c} = {:.4}", k.value)))
                .collect();
            outcome(false, format!("{e}; {}", diag.join(", ")))
        }
    }
}

fn criterion_8(cycle: &LimitCycle) -> Outcome {
    let dist = |n: usize| -> Option<f64> {
        let m = assemble_monodromy(cycle, n, 1e-3).ok()?;
        Some((floquet_spectrum(&m).ok()?[0] - 1.0).norm())
    };
    match (dist(20), dist(80)) {
        (Some(a), Some(b)) => outcome(b < a, format!("|lambda - 1| = {a:.3e} at N = 20, {b:.3e} at N = 80")),
        _ => outcome(false, "monodromy assembly failed".into()),
    }
}

fn fundamental(model: &KoopmanModel) -> Option<&hpa_core::koopman::DmdEigenpair> {
    model
        .circle_eigenpairs(0.05, 0.15)
        .into_iter()
        .filter(|p| p.value.arg() > 1e-6)
        .min_by(|a, b| a.value.arg().total_cmp(&b.value.arg()))
}

/// Area of the union of disks, by midpoint sampling of their bounding box.
fn disk_union_area(centers: &[C64], r: f64) -> f64 {
    if centers.is_empty() {
        return 0.0;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in centers {
        x0 = x0.min(c.re - r);
        x1 = x1.max(c.re + r);
        y0 = y0.min(c.im - r);
        y1 = y1.max(c.im + r);
    }
    let n = 1500;
    let (dx, dy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let mut inside = 0usize;
    for j in 0..n {
        let y = y0 + (j as f64 + 0.5) * dy;
        for i in 0..n {
            let z = C64::new(x0 + (i as f64 + 0.5) * dx, y);
            if centers.iter().any(|c| (z - c).norm() <= r) {
                inside += 1;
            }
        }
    }
    inside as f64 * dx * dy
}

fn criterion_9(model: &KoopmanModel) -> Outcome {
    let near_one = model
        .eigenpairs
        .iter()
        .filter(|p| (p.value - 1.0).norm() <= 0.02 && p.residual <= 0.1)
        .count();
    let circle = model.circle_eigenpairs(0.05, 0.15);
    let lattice = match fundamental(model) {
        Some(base) => {
            let theta = base.value.arg();
            circle
                .iter()
                .all(|p| (p.value.arg() - (p.value.arg() / theta).round() * theta).abs() <= 0.05)
        }
        None => false,
    };
    let grid = match koopman_pseudospectrum(&model.whitened, &GridAxes::centered(1.5, 121)) {
        Ok(g) => g,
        Err(e) => return outcome(false, e.to_string()),
    };
    let area = grid.sublevel_area(0.3);
    let centers: Vec<C64> = circle.iter().map(|p| p.value).collect();
    let disks = disk_union_area(&centers, 0.05);
    let pass = near_one > 0 && circle.len() >= 5 && lattice && area >= 3.0 * disks;
    outcome(
        pass,
        format!(
            "(a) {near_one} eigenvalue(s) near 1; (b) {} circle eigenvalues, lattice {}; (c) area {area:.3} vs disks {disks:.4}",
            circle.len(),
            if lattice { "ok" } else { "broken" }
        ),
    )
}

fn criterion_10(model: &KoopmanModel, cycle: &LimitCycle) -> Outcome {
    let Some(l0) = fundamental(model) else {
        return outcome(false, "no fundamental circle eigenvalue".into());
    };
    let target = l0.value * l0.value;
    let l2 = model
        .eigenpairs
        .iter()
        .min_by(|a, b| (a.value - target).norm().total_cmp(&(b.value - target).norm()))
        .expect("eigenpairs are non-empty");
    let q = cycle_queries(cycle, 10, 500);
    let (Ok(f0), Ok(f2)) = (
        eigenfunction_field(&model.dictionary, &l0.g, &q),
        eigenfunction_field(&model.dictionary, &l2.g, &q),
    ) else {
        return outcome(false, "field evaluation failed".into());
    };
    let sq: Vec<C64> = f0.iter().map(|z| z * z).collect();
    let corr = normalized_correlation(&sq, &f2);
    outcome(
        corr >= 0.9,
        format!("lambda0 = {:.4}, lambda0^2 matched by {:.4}, correlation {corr:.4}", l0.value, l2.value),
    )
}

fn is_decreasing_after_peak(v: &[f64]) -> bool {
    let peak = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    v[peak..].windows(2).all(|w| w[1] < w[0])
}

fn criterion_11(koopman_opts: &KoopmanOptions) -> Outcome {
    let mut fl = Vec::new();
    let mut ko = Vec::new();
    for &h in &H_GRID {
        let p = NondimParams::default().with_h(h);
        let Ok(cycle) = find_limit_cycle(&p, &CycleOptions::default()) else {
            return outcome(false, format!("no cycle at h = {h}"));
        };
        match assemble_monodromy(&cycle, 50, 1e-3).map(|m| floquet_kreiss(&m, FLOQUET_C, &kreiss_grid(FLOQUET_C))) {
            Ok(Ok(k)) => fl.push(k.value),
            Ok(Err(e)) | Err(e) => return outcome(false, format!("Floquet at h = {h}: {e}")),
        }
        let k = run_pipeline(&p, cycle.period, koopman_opts).and_then(|(_, m)| {
            koopman_kreiss(&m.whitened, KOOPMAN_C, &hpa_core::koopman::default_kreiss_options(KOOPMAN_C))
        });
        match k {
            Ok(k) => ko.push(k.value),
            Err(e) => return outcome(false, format!("Koopman at h = {h}: {e}")),
        }
    }
    let fl_ok = is_decreasing_after_peak(&fl);
    let ko_ok = ko.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    outcome(
        fl_ok && ko_ok,
        format!(
            "Floquet K_{FLOQUET_C} [{}] {}; Koopman K_{KOOPMAN_C} [{}] {}",
            fmt(&fl),
            if fl_ok { "decreasing after peak" } else { "not decreasing" },
            fmt(&ko),
            if ko_ok { "increasing" } else { "not increasing" }
        ),
    )
}

fn criterion_12(cycle: &LimitCycle, m: &MonodromyMatrix, model: &KoopmanModel, opts: &KoopmanOptions) -> Outcome {
    let mut failures = Vec::new();
    let p = cycle.params;

    // root containment and conjugate symmetry of the pointwise pencils
    for k in 0..8 {
        let Ok(pencil) = pencil_on_cycle(cycle, cycle.period * k as f64 / 8.0) else {
            failures.push("pencil".to_string());
            continue;
        };
        let roots = characteristic_roots(&pencil, DEFAULT_RE_MIN).map(|r| r.roots).unwrap_or_default();
        if roots.iter().any(|z| pencil.sigma_min(*z) > 1e-8) {
            failures.push(format!("containment at sample {k}"));
        }
        if roots
            .iter()
            .any(|z| roots.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min) > 1e-8)
        {
            failures.push(format!("root conjugacy at sample {k}"));
        }
    }

    // RK4 order
    let hist = History::Constant(State::new(1.2, 0.8));
    let end = |step: f64| integrate(&p, hist.clone(), 0.0, 5.0, step).map(|t| t.final_state());
    if let (Ok(r), Ok(a), Ok(b)) = (end(0.005 / 8.0), end(0.005), end(0.0025)) {
        let ratio = (a - r).norm_inf() / (b - r).norm_inf();
        if ratio < 12.0 {
            failures.push(format!("RK4 ratio {ratio:.2}"));
        }
    } else {
        failures.push("RK4 integration".into());
    }

    // Kreiss inequality for the period map
    match (floquet_kreiss(m, FLOQUET_C, &kreiss_grid(FLOQUET_C)), power_bound(&m.t, FLOQUET_C, 100)) {
        (Ok(k), Ok(b)) if b >= k.value => {}
        _ => failures.push("Kreiss power bound".into()),
    }

    // ResDMD residual identity on a probe subset
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = EmbeddingConfig {
        n_init: 200,
        seed: 77,
        ..opts.embedding(cycle.period)
    };
    if let Ok(ds) = generate_snapshots(&p, &cfg) {
        let psi0 = eval_dictionary(&model.dictionary, &ds.x0).expect("dimensions agree");
        let psi1 = eval_dictionary(&model.dictionary, &ds.x1).expect("dimensions agree");
        let mats = hpa_core::koopman::assemble_matrices(&psi0, &psi1).expect("shapes agree");
        for _ in 0..5 {
            let g: Vec<C64> = (0..psi0.ncols())
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let z = C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let a: Vec<C64> = psi0.row_iter().map(|r| r.iter().zip(&g).map(|(x, c)| c * *x).sum()).collect();
            let b: Vec<C64> = psi1.row_iter().map(|r| r.iter().zip(&g).map(|(x, c)| c * *x).sum()).collect();
            let num: f64 = a.iter().zip(&b).map(|(x, y)| (y - z * x).norm_sqr()).sum();
            let den: f64 = a.iter().map(|x| x.norm_sqr()).sum();
            let r = residual(z, &g, &mats).expect("positive Gram form");
            if (r * r - num / den).abs() > 1e-10 * (num / den).max(1e-3) {
                failures.push("ResDMD identity".into());
            }
        }
        // Koopman conjugate symmetry
        for _ in 0..5 {
            let z = C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(0.05..1.5));
            match (model.whitened.minimal_residual(z), model.whitened.minimal_residual(z.conj())) {
                (Ok(a), Ok(b)) if (a - b).abs() <= 1e-8 * (1.0 + a) => {}
                _ => failures.push("Koopman conjugacy".into()),
            }
        }
    } else {
        failures.push("held-out snapshots".into());
    }

    // seeded determinism
    let small = KoopmanOptions {
        n_init: 120,
        n_centers: 50,
        seed: 5,
        ..opts.clone()
    };
    match (run_pipeline(&p, cycle.period, &small), run_pipeline(&p, cycle.period, &small)) {
        (Ok((da, ma)), Ok((db, mb))) => {
            let same = da == db
                && ma.matrices == mb.matrices
                && ma
                    .eigenpairs
                    .iter()
                    .zip(&mb.eigenpairs)
                    .all(|(x, y)| x.value == y.value);
            if !same {
                failures.push("seeded determinism".into());
            }
        }
        _ => failures.push("determinism pipeline".into()),
    }

    if failures.is_empty() {
        outcome(true, "containment, conjugacy, RK4 order, Kreiss bound, ResDMD identity, determinism".into())
    } else {
        outcome(false, failures.join(", "))
    }
}

fn report(k: usize, o: Outcome, elapsed: Duration, results: &mut Vec<(usize, bool)>) {
    println!(
        "criterion {k:>2} {}: {} [{:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    results.push((k, o.pass));
}

fn main() {
    let mut results = Vec::new();
    macro_rules! run {
        ($k:expr, $e:expr) => {{
            let t = Instant::now();
            let o = $e;
            report($k, o, t.elapsed(), &mut results);
        }};
    }

    run!(1, criterion_1());
    run!(2, criterion_2());
    let cycle = default_cycle();
    run!(3, criterion_3(&cycle));
    let t = Instant::now();
    let rows = sweep_trajectory(&cycle, 200).expect("indicator sweep");
    let sweep_time = t.elapsed();
    run!(4, criterion_4(&cycle, &rows));
    run!(5, criterion_5(&rows, cycle.period));
    log_time("indicator sweep", sweep_time);
    let m = assemble_monodromy(&cycle, 50, 1e-3).expect("monodromy at N = 50");
    run!(6, criterion_6(&m));
    run!(7, criterion_7(&m));
    run!(8, criterion_8(&cycle));
    let opts = KoopmanOptions {
        n_init: 2000,
        ..KoopmanOptions::default()
    };
    let t = Instant::now();
    let (_, model) = run_pipeline(&cycle.params, cycle.period, &opts).expect("Koopman pipeline");
    log_time("Koopman fit", t.elapsed());
    run!(9, criterion_9(&model));
    run!(10, criterion_10(&model, &cycle));
    run!(11, criterion_11(&opts));
    run!(12, criterion_12(&cycle, &m, &model, &opts));

    let passed = results.iter().filter(|r| r.1).count();
    let unexpected: Vec<usize> = results
        .iter()
        .filter(|r| !r.1 && !KNOWN_FAILURES.contains(&r.0))
        .map(|r| r.0)
        .collect();
    println!("{passed}/{} criteria passed", results.len());
    let strict = std::env::var("HPA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if !unexpected.is_empty() || (strict && passed < results.len()) {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn log_time(what: &str, d: Duration) {
    println!("  ({what}: {:.1}s)", d.as_secs_f64());
}
