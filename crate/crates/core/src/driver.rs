//! Full runs of the two-scale scheme and the direct reference, with CSV
//! and VTK output.

use std::path::{Path, PathBuf};

use crate::coefficients::HomCoeffs;
use crate::coupler::{self, StepReport, TwoScaleState};
use crate::error::{Error, Result};
use crate::fem::forms::element_table;
use crate::fem::shape::{point_data, scalar_gradient, scalar_value, vector_gradient};
use crate::geometry::{build_unit_cell, channel_label, tile_cell, MacroDomain, MATRIX};
use crate::io::compare::{self, Report, PRESSURE_FILE};
use crate::io::table::Table;
use crate::io::vtk::{Field, VtkData};
use crate::io::{checkpoint, RunConfig};
use crate::micro::{MicroState, PAIRS, QP_STRIDE};
use crate::reference::{self, CompartmentPressures, DirectState};

// Re-exported for the CLI.
pub use crate::io::config::ScenarioKind;

pub const PRESSURE_COLUMNS: [&str; 8] = [
    "t",
    "p_matrix",
    "p_channel",
    "p_channel_1",
    "p_channel_2",
    "cov_matrix",
    "cov_channel_1",
    "cov_channel_2",
];

fn pressure_row(t: f64, c: &CompartmentPressures) -> Vec<f64> {
    vec![
        t,
        c.matrix,
        c.channel,
        c.channels[0],
        c.channels[1],
        c.cov_matrix,
        c.cov_channels[0],
        c.cov_channels[1],
    ]
}

/// Weighted mean and coefficient of variation.
fn mean_cov(values: &[(f64, f64)]) -> (f64, f64) {
    let w: f64 = values.iter().map(|v| v.0).sum();
    if w <= 0.0 {
        return (0.0, 0.0);
    }
    let m = values.iter().map(|v| v.0 * v.1).sum::<f64>() / w;
    let var = values.iter().map(|v| v.0 * (v.1 - m) * (v.1 - m)).sum::<f64>() / w;
    let cov = if m != 0.0 {
        var.sqrt() / m.abs()
    } else if var == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    (m, cov)
}

/// Mean of `p₃` over the matrix part of a cell.
pub fn cell_matrix_pressure(m: &MicroState) -> Result<f64> {
    let ed = element_table(&m.cell.mesh)?;
    let (mut a, mut s) = (0.0, 0.0);
    for e in 0..m.cell.mesh.n_elements() {
        if m.cell.mesh.regions[e] != MATRIX {
            continue;
        }
        for q in 0..ed[e].nq {
            let pd = &ed[e].qp[q];
            a += pd.jxw;
            s += pd.jxw * scalar_value(pd, &m.cell.mesh.elements[e], &m.p3);
        }
    }
    Ok(if a > 0.0 { s / a } else { 0.0 })
}

/// Compartment pressures of the two-scale state: the matrix value is the
/// sample-weighted cell mean of `p₃`, the channel value the volume-fraction
/// weighted mean of the macroscopic channel pressures.
pub fn two_scale_compartments(state: &TwoScaleState, fractions: [f64; 2]) -> Result<CompartmentPressures> {
    let dom = &state.macro_state.domain;
    let ed = element_table(&dom.mesh)?;
    let mut sample_w = vec![0.0; dom.sample_points.len()];
    let mut ch: [Vec<(f64, f64)>; 2] = Default::default();
    for e in 0..dom.mesh.n_elements() {
        for q in 0..ed[e].nq {
            let pd = &ed[e].qp[q];
            sample_w[dom.sample_index(e, q)] += pd.jxw;
            for a in 0..2 {
                ch[a].push((pd.jxw, scalar_value(pd, &dom.mesh.elements[e], &state.macro_state.p[a])));
            }
        }
    }
    let mut mat = Vec::with_capacity(sample_w.len());
    for (s, m) in state.micro.iter().enumerate() {
        mat.push((sample_w[s], cell_matrix_pressure(m)?));
    }
    let (pm, cm) = mean_cov(&mat);
    let (p1, c1) = mean_cov(&ch[0]);
    let (p2, c2) = mean_cov(&ch[1]);
    let ftot = fractions[0] + fractions[1];
    Ok(CompartmentPressures {
        matrix: pm,
        channel: if ftot > 0.0 { (fractions[0] * p1 + fractions[1] * p2) / ftot } else { 0.0 },
        channels: [p1, p2],
        cov_matrix: cm,
        cov_channels: [c1, c2],
    })
}

fn coefficient_columns() -> Vec<String> {
    let mut c = vec!["t".to_string(), "sample".to_string()];
    let ij = |i: usize, j: usize| format!("{}{}", i + 1, j + 1);
    for &(i, j) in &PAIRS {
        for &(k, l) in &PAIRS {
            c.push(format!("D_{}{}", ij(i, j), ij(k, l)));
        }
    }
    for name in ["B1", "B2", "C1", "C2", "S", "Q"] {
        for &(i, j) in &PAIRS {
            c.push(format!("{name}_{}", ij(i, j)));
        }
    }
    for &(a, b) in &PAIRS {
        c.push(format!("G_{}", ij(a, b)));
    }
    c.push("zeta_1".into());
    c.push("zeta_2".into());
    for a in 0..2 {
        for i in 0..2 {
            c.push(format!("gamma{}_{}", a + 1, i + 1));
        }
    }
    c
}

fn coefficient_row(t: f64, s: usize, h: &HomCoeffs) -> Vec<f64> {
    let mut r = vec![t, s as f64];
    for &(i, j) in &PAIRS {
        for &(k, l) in &PAIRS {
            r.push(h.d.get(i, j, k, l));
        }
    }
    for m in [&h.b[0], &h.b[1], &h.c[0], &h.c[1], &h.s, &h.q] {
        for &(i, j) in &PAIRS {
            r.push(m[(i, j)]);
        }
    }
    for &(a, b) in &PAIRS {
        r.push(h.g[a][b]);
    }
    r.extend(h.zeta);
    r.extend(h.gamma.iter().flatten());
    r
}

pub const IDENTITY_COLUMNS: [&str; 9] = [
    "t",
    "sample",
    "d_cross",
    "d_major",
    "d_minor",
    "biot_adjoint_1",
    "biot_adjoint_2",
    "c_asymmetry_1",
    "c_asymmetry_2",
];

/// Sample point closest to a location in the initial configuration.
pub fn nearest_sample(dom: &MacroDomain, p: [f64; 2]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for s in 0..dom.sample_points.len() {
        let x = dom.position(s);
        let d = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2);
        if d < best.0 {
            best = (d, s);
        }
    }
    best.1
}

/// Result of a two-scale run.
pub struct TwoScaleRun {
    pub pressures: Table,
    pub probes: Table,
    pub coefficients: Table,
    pub identities: Table,
    /// Largest nodal increments of `u`, `p₁`, `p₂` per step.
    pub increments: Vec<[f64; 3]>,
    /// Worst bounded identity residual over all steps and cells.
    pub identity_max: f64,
    pub warnings: Vec<String>,
    pub state: TwoScaleState,
}

/// Result of a reference run.
pub struct ReferenceRun {
    pub pressures: Table,
    pub increments: Vec<[f64; 2]>,
    pub volume_balance: Vec<f64>,
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", p.display())))
}

fn macro_snapshot(state: &TwoScaleState) -> VtkData {
    let ms = &state.macro_state;
    VtkData::from_mesh(&ms.domain.mesh)
        .point("u", Field::from_interleaved(&ms.u))
        .point("p_channel_1", Field::Scalar(ms.p[0].clone()))
        .point("p_channel_2", Field::Scalar(ms.p[1].clone()))
}

/// Cell snapshot with the matrix pressure and the perfusion velocity
/// `w = −K ∇p₃` at element centers (zero in the channels).
pub fn cell_snapshot(m: &MicroState) -> VtkData {
    let mesh = &m.cell.mesh;
    let mut w = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        if mesh.regions[e] != MATRIX {
            w.push([0.0, 0.0]);
            continue;
        }
        let (xe, nn) = mesh.element_coords(e);
        let pd = point_data(&xe, nn, crate::fem::shape::center(nn), 0.0);
        let g = scalar_gradient(&pd, &mesh.elements[e], &m.p3);
        let k = m.k[e * QP_STRIDE];
        w.push([-(k[(0, 0)] * g[0] + k[(0, 1)] * g[1]), -(k[(1, 0)] * g[0] + k[(1, 1)] * g[1])]);
    }
    VtkData::from_mesh(mesh)
        .point("p3", Field::Scalar(m.p3.clone()))
        .point("displacement_increment", Field::from_interleaved(&m.ubar))
        .cell("perfusion", Field::Vector(w))
}

pub fn initial_state(cfg: &RunConfig) -> Result<TwoScaleState> {
    let d = &cfg.domain;
    let dom = MacroDomain::rectangle(d.lx, d.ly, d.nx, d.ny, d.sampling)?;
    let cell = build_unit_cell(&cfg.cell)?;
    TwoScaleState::new(dom, cell, cfg.material.params())
}

/// Runs the two-scale scheme; with `out` set, writes its CSV, VTK and
/// checkpoint output there.
pub fn run_two_scale(cfg: &RunConfig, out: Option<&Path>, progress: bool) -> Result<TwoScaleRun> {
    cfg.validate()?;
    let mut state = initial_state(cfg)?;
    let template = &state.micro[0];
    let vol = template.volume();
    let fractions = [0, 1].map(|a| template.cell.mesh.region_area(channel_label(a)) / vol);

    let probe_names: Vec<(String, usize)> = cfg
        .output
        .probes
        .iter()
        .map(|(n, p)| (n.clone(), nearest_sample(&state.macro_state.domain, *p)))
        .collect();
    let mut probe_cols = vec!["t".to_string()];
    for (n, _) in &probe_names {
        for q in ["u1", "u2", "p1", "p2", "p3", "F11", "F12", "F21", "F22", "S11", "S12", "S21", "S22"] {
            probe_cols.push(format!("{q}_{n}"));
        }
    }
    let initial_mesh = state.macro_state.domain.mesh.clone();
    let mut pressures = Table::new(PRESSURE_COLUMNS);
    let mut probes = Table::new(probe_cols);
    let mut coefficients = Table::new(coefficient_columns());
    let mut identities = Table::new(IDENTITY_COLUMNS);
    let mut increments = Vec::new();
    let mut warnings = Vec::new();
    let mut identity_max: f64 = 0.0;
    let mut last_s: Vec<crate::constitutive::Mat2> = vec![crate::constitutive::Mat2::zeros(); state.micro.len()];

    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    let snapshot = |state: &TwoScaleState, dir: &Path| -> Result<()> {
        let k = state.step;
        macro_snapshot(state).write(&dir.join(format!("macro_{k:04}.vtk")), "macroscopic fields")?;
        for &s in &cfg.output.micro_cells {
            cell_snapshot(&state.micro[s]).write(&dir.join(format!("cell_{s}_{k:04}.vtk")), "cell fields")?;
        }
        Ok(())
    };
    let record = |state: &TwoScaleState, last_s: &[crate::constitutive::Mat2], pressures: &mut Table, probes: &mut Table| -> Result<()> {
        let c = two_scale_compartments(state, fractions)?;
        pressures.push(pressure_row(state.time, &c));
        let mut row = vec![state.time];
        let dom = &state.macro_state.domain;
        for (_, s) in &probe_names {
            let sp = dom.sample_points[*s];
            let nodes = &dom.mesh.elements[sp.element];
            let (xe, nn) = dom.mesh.element_coords(sp.element);
            let pd = point_data(&xe, nn, sp.xi, 0.0);
            let (x0, _) = initial_mesh.element_coords(sp.element);
            let pd0 = point_data(&x0, nn, sp.xi, 0.0);
            let u = [0, 1].map(|i| {
                (0..nn).map(|a| pd.n[a] * state.macro_state.u[2 * nodes[a] + i]).sum::<f64>()
            });
            let f = crate::constitutive::Mat2::identity() + vector_gradient(&pd0, nodes, &state.macro_state.u);
            row.extend(u);
            row.push(scalar_value(&pd, nodes, &state.macro_state.p[0]));
            row.push(scalar_value(&pd, nodes, &state.macro_state.p[1]));
            row.push(cell_matrix_pressure(&state.micro[*s])?);
            row.extend([f[(0, 0)], f[(0, 1)], f[(1, 0)], f[(1, 1)]]);
            let sm = last_s[*s];
            row.extend([sm[(0, 0)], sm[(0, 1)], sm[(1, 0)], sm[(1, 1)]]);
        }
        probes.push(row);
        Ok(())
    };

    record(&state, &last_s, &mut pressures, &mut probes)?;
    if let (Some(dir), true) = (out, cfg.output.vtk_every > 0) {
        snapshot(&state, dir)?;
    }
    // A failed step still leaves the histories up to the last completed step on disk.
    let mut failure = None;
    for _ in 0..cfg.scenario.steps {
        let t0 = state.time;
        let (next, rep): (TwoScaleState, StepReport) = match coupler::step(&state, &cfg.scenario, &cfg.coefficients) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        for (s, h) in rep.coeffs.iter().enumerate() {
            coefficients.push(coefficient_row(t0, s, h));
            let c = &h.checks;
            identities.push(vec![
                t0,
                s as f64,
                c.d_cross,
                c.d_major,
                c.d_minor,
                c.biot_adjoint[0],
                c.biot_adjoint[1],
                c.c_asymmetry[0],
                c.c_asymmetry[1],
            ]);
            identity_max = identity_max.max(c.worst());
        }
        increments.push(rep.increment);
        warnings.extend(rep.warnings.iter().map(|w| format!("step {}: {w}", rep.step)));
        state = next;
        // Stress reported with the state it belongs to: recompute the cell averages.
        for (s, m) in state.micro.iter().enumerate() {
            let ed = element_table(&m.cell.mesh)?;
            let mut acc = crate::constitutive::Mat2::zeros();
            for e in 0..m.cell.mesh.n_elements() {
                for q in 0..ed[e].nq {
                    acc += m.total_stress(&ed, e, q) * ed[e].qp[q].jxw;
                }
            }
            last_s[s] = acc / m.volume();
        }
        record(&state, &last_s, &mut pressures, &mut probes)?;
        if progress {
            eprintln!(
                "step {:>4}  t = {:.4}  max|du| = {:.3e}  max|dp| = {:.3e} {:.3e}",
                rep.step, rep.time, rep.increment[0], rep.increment[1], rep.increment[2]
            );
        }
        if let Some(dir) = out {
            if cfg.output.vtk_every > 0 && state.step % cfg.output.vtk_every == 0 {
                snapshot(&state, dir)?;
            }
        }
    }
    if let Some(dir) = out {
        pressures.write(&dir.join(PRESSURE_FILE))?;
        probes.write(&dir.join("history.csv"))?;
        coefficients.write(&dir.join("coefficients.csv"))?;
        identities.write(&dir.join("identities.csv"))?;
        if cfg.output.checkpoint {
            checkpoint::save(&state, &dir.join("checkpoint.json"))?;
        }
        if !warnings.is_empty() {
            std::fs::write(dir.join("warnings.txt"), warnings.join("\n") + "\n")?;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(TwoScaleRun {
        pressures,
        probes,
        coefficients,
        identities,
        increments,
        identity_max,
        warnings,
        state,
    })
}

/// Runs the direct solver on the tiling of the cell.
pub fn run_reference(cfg: &RunConfig, out: Option<&Path>, progress: bool) -> Result<ReferenceRun> {
    cfg.validate()?;
    let cell = build_unit_cell(&cfg.cell)?;
    let [tx, ty] = cfg.reference.tiling;
    let mesh = tile_cell(&cell, tx, ty, cfg.material.eps)?;
    let mut state = DirectState::new(mesh, cfg.material.params())?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    let mut pressures = Table::new(PRESSURE_COLUMNS);
    pressures.push(pressure_row(0.0, &state.compartments()?));
    let mut increments = Vec::new();
    let mut volume_balance = Vec::new();
    for _ in 0..cfg.scenario.steps {
        let (next, rep) = reference::step(&state, &cfg.scenario).map_err(|e| e.at_stage("reference step", None))?;
        pressures.push(pressure_row(rep.time, &rep.pressures));
        increments.push(rep.increment);
        volume_balance.push(rep.volume_balance);
        if progress {
            eprintln!(
                "reference step {:>4}  t = {:.4}  p_matrix = {:.4e}  p_channel = {:.4e}",
                rep.step, rep.time, rep.pressures.matrix, rep.pressures.channel
            );
        }
        state = next;
        if let Some(dir) = out {
            if cfg.output.vtk_every > 0 && state.step % cfg.output.vtk_every == 0 {
                VtkData::from_mesh(&state.mesh)
                    .point("u", Field::from_interleaved(&state.u))
                    .point("p", Field::Scalar(state.p.clone()))
                    .write(&dir.join(format!("reference_{:04}.vtk", state.step)), "reference fields")?;
            }
        }
    }
    if let Some(dir) = out {
        pressures.write(&dir.join(PRESSURE_FILE))?;
    }
    Ok(ReferenceRun {
        pressures,
        increments,
        volume_balance,
    })
}

/// Side-by-side compartment pressures of both solvers.
pub fn compare_table(reference: &Table, hom: &Table) -> Result<Table> {
    let mut t = Table::new(["t", "p_matrix_ref", "p_matrix_hom", "p_channel_ref", "p_channel_hom"]);
    let tr = reference.column("t")?;
    let th = hom.column("t")?;
    let (mr, cr) = (reference.column("p_matrix")?, reference.column("p_channel")?);
    let (mh, chn) = (hom.column("p_matrix")?, hom.column("p_channel")?);
    for (i, &x) in th.iter().enumerate() {
        t.push(vec![
            x,
            compare::interpolate(&tr, &mr, x),
            mh[i],
            compare::interpolate(&tr, &cr, x),
            chn[i],
        ]);
    }
    Ok(t)
}

/// Outcome of a complete run.
pub struct RunSummary {
    pub two_scale: TwoScaleRun,
    pub reference: Option<ReferenceRun>,
    pub comparison: Option<Report>,
    pub output: PathBuf,
}

impl RunSummary {
    /// Whether every configured check passed.
    pub fn passes(&self, cfg: &RunConfig) -> bool {
        let ids = self.two_scale.identity_max <= cfg.coefficients.identity_tol;
        let cmp = self.comparison.as_ref().is_none_or(|r| r.passes(cfg.compare.linf, cfg.compare.l2));
        ids && cmp
    }
}

pub fn run(cfg: &RunConfig, progress: bool) -> Result<RunSummary> {
    let dir = cfg.output.directory.clone();
    ensure_dir(&dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let two_scale = run_two_scale(cfg, Some(&dir), progress)?;
    let (reference, comparison) = if cfg.reference.enabled {
        let rdir = dir.join("reference");
        let r = run_reference(cfg, Some(&rdir), progress)?;
        compare_table(&r.pressures, &two_scale.pressures)?.write(&dir.join("compare.csv"))?;
        let rep = compare::compare_tables(&r.pressures, &two_scale.pressures, &compare::QUANTITIES)?;
        std::fs::write(
            dir.join("comparison.json"),
            serde_json::to_string_pretty(&rep).map_err(|e| Error::Format(e.to_string()))?,
        )?;
        (Some(r), Some(rep))
    } else {
        (None, None)
    };
    Ok(RunSummary {
        two_scale,
        reference,
        comparison,
        output: dir,
    })
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub limit: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.value <= self.limit
    }
}

/// Identity and property suite on the configured cell: once in the
/// reference state and once after a random admissible macroscopic
/// increment drawn from `seed`.
pub fn check(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckResult>> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let cell = build_unit_cell(&cfg.cell)?;
    let state0 = MicroState::new(cell, cfg.material.params())?;
    let dt = cfg.scenario.dt;
    let tol = cfg.coefficients.identity_tol;
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inc = crate::micro::MacroIncrementAt::default();
    for v in inc.grad_du.iter_mut() {
        *v = rng.random_range(-0.05..0.05);
    }
    for a in 0..2 {
        inc.dp[a] = rng.random_range(-1e4..1e4);
        inc.grad_dp[a] = [rng.random_range(-1e5..1e5), rng.random_range(-1e5..1e5)];
        inc.p0_new[a] = inc.dp[a];
        inc.grad_p0_new[a] = inc.grad_dp[a];
    }
    let (_, resp0, _) = crate::coefficients::evaluate_cell(&state0, dt, &cfg.coefficients)?;
    let state1 = crate::micro::reconstruct_micro(&state0, &resp0, &inc)?;
    for (label, st) in [("reference state", &state0), ("perturbed state", &state1)] {
        let (_, _, h) = crate::coefficients::evaluate_cell(st, dt, &cfg.coefficients)?;
        let c = &h.checks;
        let mut push = |name: &str, value: f64, limit: f64| {
            out.push(CheckResult {
                name: format!("{label}: {name}"),
                value,
                limit,
            })
        };
        push("incremental tensor cross-check", c.d_cross, tol);
        push("incremental tensor major symmetry", c.d_major, tol);
        push("Biot/adjoint identity, channel 1", c.biot_adjoint[0], tol);
        push("Biot/adjoint identity, channel 2", c.biot_adjoint[1], tol);
        if std::ptr::eq(st, &state0) {
            for a in 0..2 {
                let m = h.c[a];
                let tr = m.trace().abs().max(f64::MIN_POSITIVE);
                let min_eig = 0.5 * (m[(0, 0)] + m[(1, 1)])
                    - (0.25 * (m[(0, 0)] - m[(1, 1)]).powi(2) + m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
                push(&format!("channel {} permeability symmetry", a + 1), c.c_asymmetry[a], 1e-12);
                push(&format!("channel {} permeability semidefinite", a + 1), (-min_eig / tr).max(0.0), 1e-14);
            }
        }
    }
    Ok(out)
}
