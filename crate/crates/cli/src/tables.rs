//! Golden reproductions of the four summary tables.

use crate::analyses::scheme_name;
use crate::output::Artifact;
use anyhow::{bail, Result};
use qgloop::algebra::Model;
use qgloop::meanfield::saddle_phase;
use qgloop::params::{preset, NoiseScheme, PRESET_NAMES};
use qgloop::precision::{pruned_preset, propagate, DEFAULT_BCH_ORDER, DEFAULT_K_ORDER};
use qgloop::robustness::{epsilon_threshold, fluctuation_phase, table_case, vertex_case, FluctuationCase};
use rayon::prelude::*;
use serde::Serialize;

/// Presets of the three published parameter sets, in table order.
pub const TABLE_PRESETS: [&str; 3] = ["pikovski-mu", "pikovski-gamma", "pikovski-beta"];

pub fn table(n: u8) -> Result<Artifact> {
    match n {
        1 => table1(),
        2 => table2(),
        3 => table3(),
        4 => table4(),
        _ => bail!("no table {} (expected 1, 2, 3 or 4)", n),
    }
}

#[derive(Serialize)]
struct ParamRow {
    preset: &'static str,
    model: &'static str,
    finesse: f64,
    mass: f64,
    omega_m: f64,
    lambda_l: f64,
    cavity_length: f64,
    n_p: f64,
    n_runs: f64,
    x0: f64,
    lambda0: f64,
    k: f64,
    /// commutator coefficient at unit dimensionless strength
    qg_unit: f64,
    min_phase_uncertainty: f64,
}

fn table1() -> Result<Artifact> {
    let rows: Vec<ParamRow> = PRESET_NAMES
        .iter()
        .map(|&name| {
            let (model, p) = preset(name).expect("listed preset");
            ParamRow {
                preset: name,
                model: model.symbol(),
                finesse: p.finesse,
                mass: p.mass,
                omega_m: p.omega_m,
                lambda_l: p.lambda_l,
                cavity_length: p.cavity_length,
                n_p: p.n_p,
                n_runs: p.n_runs,
                x0: p.x0(),
                lambda0: p.lambda0(),
                k: p.k(),
                qg_unit: p.qg_value(model),
                min_phase_uncertainty: p.min_phase_uncertainty(),
            }
        })
        .collect();
    Artifact::from_rows("table1", &rows)
}

#[derive(Serialize)]
struct BudgetRow {
    preset: &'static str,
    #[serde(rename = "loop")]
    loop_name: &'static str,
    model: &'static str,
    bch_order: usize,
    k_order: u8,
    qg_phase: f64,
    qm_leading: f64,
    qm_extras: f64,
    min_uncertainty: f64,
}

fn table2() -> Result<Artifact> {
    let rows: Vec<BudgetRow> = TABLE_PRESETS
        .par_iter()
        .map(|&name| {
            let (model, p) = preset(name).expect("listed preset");
            let b = saddle_phase(&pruned_preset("square", model, &p)?, &p)?;
            Ok(BudgetRow {
                preset: name,
                loop_name: "square",
                model: model.symbol(),
                bch_order: DEFAULT_BCH_ORDER,
                k_order: DEFAULT_K_ORDER,
                qg_phase: b.qg_term,
                qm_leading: b.qm_phase_of(1, 2, 0),
                qm_extras: b.qm_phase_of(2, 3, 1) + b.qm_phase_of(3, 4, 2),
                min_uncertainty: b.min_uncertainty,
            })
        })
        .collect::<Result<_>>()?;
    Artifact::from_rows("table2", &rows)
}

#[derive(Serialize)]
struct RunsRow {
    preset: &'static str,
    #[serde(rename = "loop")]
    loop_name: &'static str,
    model: &'static str,
    bch_order: usize,
    k_order: u8,
    scheme: &'static str,
    epsilon: Option<f64>,
    variance_per_run: f64,
    n_runs: f64,
}

fn table3() -> Result<Artifact> {
    let jobs: Vec<(&'static str, NoiseScheme)> = TABLE_PRESETS
        .iter()
        .flat_map(|&p| [(p, NoiseScheme::QuantumNoise), (p, NoiseScheme::ClassicalNoise)])
        .collect();
    let rows: Vec<RunsRow> = jobs
        .par_iter()
        .map(|&(name, scheme)| {
            let (model, p) = preset(name).expect("listed preset");
            let p = p.with_scheme(scheme);
            let rep = propagate(model, "square", &p)?;
            Ok(RunsRow {
                preset: name,
                loop_name: "square",
                model: model.symbol(),
                bch_order: rep.bch_order,
                k_order: rep.k_order,
                scheme: scheme_name(scheme),
                epsilon: (scheme == NoiseScheme::ClassicalNoise).then_some(p.epsilon),
                variance_per_run: rep.variance_per_run,
                n_runs: rep.n_runs_unit_precision,
            })
        })
        .collect::<Result<_>>()?;
    Artifact::from_rows("table3", &rows)
}

#[derive(Serialize)]
struct FluctuationRow {
    kind: &'static str,
    case: String,
    #[serde(rename = "loop")]
    loop_name: &'static str,
    model: &'static str,
    eps_power: Option<u8>,
    leading_term: Option<String>,
    leading_coefficient: Option<String>,
    other_terms: Option<String>,
    preset: Option<&'static str>,
    epsilon_threshold: Option<f64>,
}

/// Deviation terms do not depend on the deformation, so each case is
/// composed once: the four-loop cases under gamma, the vertex under mu.
fn table4_cases() -> Vec<(FluctuationCase, Model)> {
    let mut v: Vec<_> = (1..=5).filter_map(table_case).map(|c| (c, Model::Gamma)).collect();
    v.insert(2, (vertex_case(), Model::Mu));
    v
}

fn table4() -> Result<Artifact> {
    let cases = table4_cases();
    let (_, ref_params) = preset("pikovski-gamma").expect("listed preset");
    let mut rows: Vec<FluctuationRow> = cases
        .par_iter()
        .map(|(case, model)| {
            let f = fluctuation_phase(*model, case, &ref_params)?;
            let fmt = |t: &qgloop::robustness::DeviationTerm| {
                format!("{} n^{} lambda0^{} k^{}", t.coefficient, t.powers.0, t.powers.1, t.powers.2)
            };
            let lead = f.leading();
            let others: Vec<String> = f.terms.iter().skip(1).map(fmt).collect();
            Ok(FluctuationRow {
                kind: "leading_term",
                case: case.name.clone(),
                loop_name: case.base.name(),
                model: "any",
                eps_power: f.eps_power,
                leading_term: lead.map(|t| format!("n^{} lambda0^{} k^{}", t.powers.0, t.powers.1, t.powers.2)),
                leading_coefficient: lead.map(|t| t.coefficient.clone()),
                other_terms: (!others.is_empty()).then(|| others.join("; ")),
                preset: None,
                epsilon_threshold: None,
            })
        })
        .collect::<Result<_>>()?;
    let thresholds: Vec<FluctuationRow> = ["pikovski-gamma", "pikovski-beta", "pikovski-mu", "improved-mu"]
        .par_iter()
        .map(|&name| {
            let (model, p) = preset(name).expect("listed preset");
            let case = table_case(1).expect("row 1");
            Ok(FluctuationRow {
                kind: "epsilon_threshold",
                case: case.name.clone(),
                loop_name: case.base.name(),
                model: model.symbol(),
                eps_power: None,
                leading_term: None,
                leading_coefficient: None,
                other_terms: None,
                preset: Some(name),
                epsilon_threshold: Some(epsilon_threshold(model, &case, &p)?),
            })
        })
        .collect::<Result<_>>()?;
    rows.extend(thresholds);
    Artifact::from_rows("table4", &rows)
}
