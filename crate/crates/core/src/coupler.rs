//! One step of the two-scale scheme: cell problems, coefficients, macro
//! solve, configuration update and cell reconstruction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{evaluate_cell, CoefficientOptions, HomCoeffs};
use crate::error::{Error, Result};
use crate::geometry::{CellDomain, MacroDomain};
use crate::macroscale::{apply_increment, assemble_macro, sample_increments, solve_macro_increment, MacroSpaces, MacroState};
use crate::micro::{reconstruct_micro, MicroState};
use crate::constitutive::MaterialParams;
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleState {
    pub macro_state: MacroState,
    /// One cell per macroscopic sample point, in sample order.
    pub micro: Vec<MicroState>,
    pub step: usize,
    pub time: f64,
}

impl TwoScaleState {
    pub fn new(domain: MacroDomain, cell: CellDomain, material: MaterialParams) -> Result<TwoScaleState> {
        let template = MicroState::new(cell, material)?;
        let micro = vec![template; domain.sample_points.len()];
        Ok(TwoScaleState {
            macro_state: MacroState::new(domain),
            micro,
            step: 0,
            time: 0.0,
        })
    }
}

/// Diagnostics of one completed step. Coefficients are those used for the
/// step, i.e. evaluated on the configuration at its start.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub coeffs: Vec<HomCoeffs>,
    /// Largest nodal increment of `u`, `p₁`, `p₂`.
    pub increment: [f64; 3],
    pub warnings: Vec<String>,
}

/// Runs `f` on every item in parallel and returns results in item order,
/// failing with the first error by index.
fn gather<T: Sync, R: Send>(items: &[T], stage: &'static str, f: impl Fn(usize, &T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let results: Vec<Result<R>> = items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect();
    let mut out = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        out.push(r.map_err(|e| e.at_stage(stage, Some(i)))?);
    }
    Ok(out)
}

pub fn step(state: &TwoScaleState, scenario: &Scenario, opts: &CoefficientOptions) -> Result<(TwoScaleState, StepReport)> {
    let dt = scenario.dt;
    let k = state.step;

    let cells = gather(&state.micro, "cell problems", |_, m| {
        let (forms, resp, coeffs) = evaluate_cell(m, dt, opts)?;
        coeffs.checks.assert_within(opts.identity_tol)?;
        Ok((forms.warnings, resp, coeffs))
    })?;
    let mut warnings = Vec::new();
    for (i, (w, _, _)) in cells.iter().enumerate() {
        warnings.extend(w.iter().map(|s| format!("sample point {i}: {s}")));
    }
    let coeffs: Vec<HomCoeffs> = cells.iter().map(|c| c.2.clone()).collect();

    let mesh = &state.macro_state.domain.mesh;
    let spaces = MacroSpaces::new(mesh, scenario).map_err(|e| e.at_stage("macro solve", None))?;
    let asm = assemble_macro(&state.macro_state.domain, &coeffs, dt, scenario, k, opts.pressure_stabilization)
        .map_err(|e| e.at_stage("macro assembly", None))?;
    let inc = solve_macro_increment(&asm, &spaces, mesh, scenario, k).map_err(|e| e.at_stage("macro solve", None))?;

    let macro_next = apply_increment(&state.macro_state, &inc).map_err(|e| e.at_stage("macro update", None))?;
    let at = sample_increments(&state.macro_state, &macro_next, &inc);
    let micro = gather(&state.micro, "cell reconstruction", |i, m| reconstruct_micro(m, &cells[i].1, &at[i]))?;

    let next = TwoScaleState {
        macro_state: macro_next,
        micro,
        step: k + 1,
        time: scenario.time(k + 1),
    };
    let report = StepReport {
        step: k + 1,
        time: next.time,
        coeffs,
        increment: inc.max_abs(),
        warnings,
    };
    Ok((next, report))
}

/// Whether an error is a step-size failure anywhere in its chain.
pub fn is_step_size(err: &Error) -> bool {
    matches!(err.root(), Error::StepSize(_))
}
