//! Acceptance run: evaluates each criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpfe2::coefficients::evaluate_cell;
use dpfe2::constitutive::{
    neo_hookean_stress, neo_hookean_stress_3d, neo_hookean_tangent, tensor_h, Kinematics, Mat2, MaterialParams,
};
use dpfe2::driver::{self, RunSummary, ScenarioKind};
use dpfe2::geometry::{build_unit_cell, CellParams};
use dpfe2::io::config::RunConfig;
use dpfe2::io::table::Table;
use dpfe2::micro::MicroState;

/// Criteria that cannot be met by the specified model; reported as FAIL
/// without aborting the run.
const KNOWN_FAILURES: [usize; 1] = [9];

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn col(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap()
}

fn with_output(kind: ScenarioKind, dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/{}.toml", kind_name(kind))))
        .unwrap();
    cfg.output.directory = dir.to_path_buf();
    cfg
}

fn kind_name(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::Validation => "validation",
        ScenarioKind::Shear => "shear",
        ScenarioKind::Inflation => "inflation",
        ScenarioKind::Custom => "custom",
    }
}

/// Worst Biot-pair residual and the incremental-tensor checks of an
/// identities table.
fn identity_worst(t: &Table) -> (f64, f64, f64, f64) {
    let biot = max_abs(&col(t, "biot_adjoint_1")).max(max_abs(&col(t, "biot_adjoint_2")));
    (biot, max_abs(&col(t, "d_cross")), max_abs(&col(t, "d_major")), max_abs(&col(t, "d_minor")))
}

fn truesdell_fd(f: &Mat2, l: &Mat2, mu: f64, h: f64) -> Mat2 {
    let s = |t: f64| {
        let ft = (Mat2::identity() + l * t) * f;
        neo_hookean_stress(&Kinematics::new(ft).unwrap(), mu)
    };
    let sig = s(0.0);
    let rate = (s(h) - s(-h)) / (2.0 * h);
    rate - l * sig - sig * l.transpose() + sig * l.trace()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut fd_worst, mut trace_worst, mut h_worst): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut states = 0;
    while states < 100 {
        let f = Mat2::from_fn(|i, j| if i == j { rng.random_range(0.6..1.6) } else { rng.random_range(-0.4..0.4) });
        if f.determinant() <= 0.2 {
            continue;
        }
        states += 1;
        let mu = rng.random_range(0.1e6..2.0e6);
        let l = Mat2::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let kin = Kinematics::new(f).unwrap();
        let exact = neo_hookean_tangent(&kin, mu).contract(&((l + l.transpose()) * 0.5));
        let fd = truesdell_fd(&f, &l, mu, 1e-6);
        fd_worst = fd_worst.max((fd - exact).norm() / exact.norm().max(1e-8 * mu));
        let s3 = neo_hookean_stress_3d(&kin, mu);
        trace_worst = trace_worst.max(s3.trace().abs() / mu);
        let k = Mat2::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let k = k * k.transpose() + Mat2::identity() * 0.1;
        let g = Mat2::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let h = tensor_h(&g, &k);
        h_worst = h_worst.max((h - h.transpose()).abs().max());
    }
    Outcome {
        id: 4,
        pass: fd_worst <= 1e-5 && trace_worst <= 1e-15 && h_worst == 0.0,
        detail: format!(
            "tangent vs central FD over 100 states {fd_worst:.2e} (limit 1e-5); |tr σ_eff|/μ {trace_worst:.1e}; |H − Hᵀ| {h_worst:.1e}"
        ),
    }
}

fn band_c11(density: usize, k: f64) -> f64 {
    let cell = build_unit_cell(&CellParams::straight([0.2, 0.2], density)).unwrap();
    let iso = |v: f64| Mat2::identity() * v;
    let mat = MaterialParams {
        mu: [0.6e6, 0.6e6, 1.0e6],
        permeability: [iso(k), iso(2e-6), iso(1e-4)],
        eps: 0.025,
        permeability_update: Default::default(),
    };
    let state = MicroState::new(cell, mat).unwrap();
    let (_, _, c) = evaluate_cell(&state, 0.025, &Default::default()).unwrap();
    c.c[0][(0, 0)]
}

fn criterion_6() -> Outcome {
    let k = 1e-6;
    let c = band_c11(64, k);
    let c2 = band_c11(64, 2.0 * k);
    let rel = (c - 0.2 * k).abs() / (0.2 * k);
    let lin = (c2 / c - 2.0).abs();
    Outcome {
        id: 6,
        pass: rel <= 0.01 && lin <= 1e-12,
        detail: format!("straight band 64×64: C11/(w k) − 1 = {rel:.2e} (limit 1e-2); C11(2k)/C11(k) − 2 = {lin:.1e} (limit 1e-12)"),
    }
}

/// Increments of the hold phase decrease until they reach the round-off
/// floor; the last one is at most 1e-3 of the largest.
fn hold_decays(incs: &[f64], hold_from: usize, scale: f64) -> (bool, f64) {
    let peak = incs.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-12 * scale;
    let hold = &incs[hold_from..];
    let monotone = hold.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor);
    let last = *hold.last().unwrap();
    (monotone && last <= 1e-3 * peak, last / peak)
}

fn main() {
    let started = Instant::now();
    let mut out: Vec<Outcome> = Vec::new();
    let tmp = tempfile::tempdir().unwrap();

    // Validation run, both solvers.
    let vdir = tmp.path().join("validation");
    let vcfg = with_output(ScenarioKind::Validation, &vdir);
    let t0 = Instant::now();
    let val: RunSummary = driver::run(&vcfg, false).unwrap();
    let val_time = t0.elapsed();
    let rep = val.comparison.as_ref().unwrap();
    let worst_linf = rep.quantities.iter().map(|d| d.linf).fold(0.0, f64::max);
    let worst_l2 = rep.quantities.iter().map(|d| d.l2).fold(0.0, f64::max);
    out.push(Outcome {
        id: 1,
        pass: rep.passes(0.10, 0.05) && val_time <= Duration::from_secs(300),
        detail: format!(
            "validation vs reference: worst L∞ {worst_linf:.2e} (limit 0.10), worst L² {worst_l2:.2e} (limit 0.05), runtime {:.0} s (limit 300 s)",
            val_time.as_secs_f64()
        ),
    });

    // Shear and inflation demos.
    let sdir = tmp.path().join("shear");
    let shear = driver::run(&with_output(ScenarioKind::Shear, &sdir), false);
    let idir = tmp.path().join("inflation");
    let inflation = driver::run(&with_output(ScenarioKind::Inflation, &idir), false);

    // Identity tables of every shipped scenario, partial ones included.
    let tables: Vec<(&str, Table)> = [("validation", &vdir), ("shear", &sdir), ("inflation", &idir)]
        .iter()
        .filter_map(|(n, d)| Table::read(&d.join("identities.csv")).ok().map(|t| (*n, t)))
        .collect();
    let biot = tables.iter().map(|(_, t)| identity_worst(t).0).fold(0.0, f64::max);
    let steps: Vec<String> = tables.iter().map(|(n, t)| format!("{n} {} rows", t.rows.len())).collect();
    out.push(Outcome {
        id: 2,
        pass: tables.len() == 3 && biot <= 1e-9,
        detail: format!("‖B−R‖∞/max(1,‖B‖∞) worst {biot:.2e} (limit 1e-9) over {}", steps.join(", ")),
    });

    let (_, _, c) = evaluate_cell(&val.two_scale.state.micro[0], vcfg.scenario.dt, &vcfg.coefficients).unwrap();
    let (mut cross, mut major, mut minor) = (c.checks.d_cross, c.checks.d_major, c.checks.d_minor);
    for (_, t) in &tables {
        let (_, a, b, m) = identity_worst(t);
        cross = cross.max(a);
        major = major.max(b);
        minor = minor.max(m);
    }
    out.push(Outcome {
        id: 3,
        pass: cross <= 1e-9 && major <= 1e-9,
        detail: format!("incremental tensor: expressions differ {cross:.2e}, major asymmetry {major:.2e} (limits 1e-9); minor asymmetry {minor:.2e} (reported)"),
    });

    out.push(criterion_4());

    let hom = &val.two_scale.pressures;
    let refp = &val.reference.as_ref().unwrap().pressures;
    let cov_cols = ["cov_matrix", "cov_channel_1", "cov_channel_2"];
    let cov_hom = cov_cols.iter().map(|c| max_abs(&col(hom, c))).fold(0.0, f64::max);
    let cov_ref = cov_cols.iter().map(|c| max_abs(&col(refp, c))).fold(0.0, f64::max);
    out.push(Outcome {
        id: 5,
        pass: cov_hom <= 1e-4 && cov_ref <= 1e-2,
        detail: format!("spatial CoV per compartment: two-scale {cov_hom:.2e} (limit 1e-4), reference {cov_ref:.2e} (limit 1e-2)"),
    });

    out.push(criterion_6());

    // Stationarity: zero amplitude and post-ramp hold.
    let u_scale = max_abs(&val.two_scale.state.macro_state.u);
    let p_scale = max_abs(&col(hom, "p_matrix")).max(max_abs(&col(hom, "p_channel")));
    let mut zcfg = vcfg.clone();
    zcfg.scenario = vcfg.scenario.zero_amplitude();
    zcfg.scenario.steps = 4;
    let z = driver::run_two_scale(&zcfg, None, false).unwrap();
    let zr = driver::run_reference(&zcfg, None, false).unwrap();
    let zu = z.increments.iter().map(|i| i[0]).chain(zr.increments.iter().map(|i| i[0])).fold(0.0, f64::max) / u_scale;
    let zp = z
        .increments
        .iter()
        .flat_map(|i| [i[1], i[2]])
        .chain(zr.increments.iter().map(|i| i[1]))
        .fold(0.0, f64::max)
        / p_scale;
    let ramp_end = vcfg.scenario.ramps.values().flat_map(|r| r.points.last().map(|p| p[0])).fold(0.0, f64::max);
    let hold_from = (ramp_end / vcfg.scenario.dt).round() as usize;
    let ts = &val.two_scale.increments;
    let rs = &val.reference.as_ref().unwrap().increments;
    let series: Vec<(Vec<f64>, f64)> = vec![
        (ts.iter().map(|i| i[0]).collect(), u_scale),
        (ts.iter().map(|i| i[1]).collect(), p_scale),
        (ts.iter().map(|i| i[2]).collect(), p_scale),
        (rs.iter().map(|i| i[0]).collect(), u_scale),
        (rs.iter().map(|i| i[1]).collect(), p_scale),
    ];
    let holds: Vec<(bool, f64)> = series.iter().map(|(s, sc)| hold_decays(s, hold_from, *sc)).collect();
    let hold_ok = holds.iter().all(|h| h.0);
    let hold_ratio = holds.iter().map(|h| h.1).fold(0.0, f64::max);
    out.push(Outcome {
        id: 7,
        pass: zu <= 1e-12 && zp <= 1e-12 && hold_ok,
        detail: format!(
            "zero amplitude: increments/scale u {zu:.1e}, p {zp:.1e} (limit 1e-12); hold after t = {ramp_end}: monotone {hold_ok}, final/peak {hold_ratio:.1e} (limit 1e-3)"
        ),
    });

    // Determinism: a second validation run must reproduce every CSV byte for byte.
    let vdir2 = tmp.path().join("validation_repeat");
    driver::run(&with_output(ScenarioKind::Validation, &vdir2), false).unwrap();
    let files = ["pressures.csv", "history.csv", "coefficients.csv", "identities.csv", "compare.csv", "reference/pressures.csv"];
    let differing: Vec<&str> = files
        .iter()
        .filter(|f| std::fs::read(vdir.join(f)).ok() != std::fs::read(vdir2.join(f)).ok() || !vdir.join(f).exists())
        .copied()
        .collect();
    out.push(Outcome {
        id: 8,
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} CSV files bitwise identical across repeated validation runs", files.len())
        } else {
            format!("differing or missing: {}", differing.join(", "))
        },
    });

    let demo = |name: &str, dir: &Path, r: &dpfe2::Result<RunSummary>| -> (bool, String) {
        let histories = ["coefficients.csv", "history.csv", "pressures.csv"].iter().all(|f| dir.join(f).exists());
        match r {
            Ok(s) => {
                let ok = s.two_scale.identity_max <= 1e-9 && histories;
                (ok, format!("{name} completed, identities {:.1e}, histories written {histories}", s.two_scale.identity_max))
            }
            Err(e) => (false, format!("{name} stopped: {e}; partial histories written {histories}")),
        }
    };
    let (s_ok, s_msg) = demo("shear", &sdir, &shear);
    let (i_ok, i_msg) = demo("inflation", &idir, &inflation);
    out.push(Outcome {
        id: 9,
        pass: s_ok && i_ok,
        detail: format!("{s_msg}; {i_msg}"),
    });

    out.sort_by_key(|o| o.id);
    println!();
    for o in &out {
        println!("criterion {}: {}  {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let unexpected: Vec<usize> = out.iter().filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    let known: Vec<usize> = out.iter().filter(|o| !o.pass && KNOWN_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    println!(
        "acceptance: {}/{} criteria pass; known failures {:?}; total time {:.0} s",
        out.iter().filter(|o| o.pass).count(),
        out.len(),
        known,
        started.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        eprintln!("acceptance failed for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
