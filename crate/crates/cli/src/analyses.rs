//! Scenario analyses, one artifact each.

use crate::config::{design_loops, Analysis, LoopChoice, Scenario};
use crate::output::{Artifact, Provenance};
use anyhow::Result;
use qgloop::algebra::{Model, Truncation};
use qgloop::designer::{solve_cancellation, DesignProblem};
use qgloop::loops::{compose, prune, ComposeOptions, LoopExponent};
use qgloop::meanfield::{saddle_phase, PhaseOrigin};
use qgloop::oracle::oracle_comparison;
use qgloop::params::{ExperimentParams, NoiseScheme};
use qgloop::precision::{check_registered, preset_exponent, propagate_exponent, PrecisionReport};
use qgloop::robustness::{
    epsilon_threshold, fluctuation_phase, impure_thermal_phase, signal_loop, table_case, vertex_case, FluctuationCase,
    ImpurityState,
};
use serde::Serialize;

pub fn scheme_name(s: NoiseScheme) -> &'static str {
    match s {
        NoiseScheme::QuantumNoise => "quantum_noise",
        NoiseScheme::ClassicalNoise => "classical_noise",
    }
}

impl Scenario {
    pub fn provenance(&self) -> Provenance {
        self.provenance_for(&self.loop_choice.name(), self.model, self.params.scheme)
    }

    pub fn provenance_for(&self, loop_name: &str, model: Model, scheme: NoiseScheme) -> Provenance {
        Provenance {
            loop_name: loop_name.into(),
            model: model.symbol().into(),
            bch_order: self.bch_order,
            k_order: self.k_order,
            scheme: scheme_name(scheme).into(),
        }
    }

    /// Loop exponent at the scenario orders, pruned at the minimum phase uncertainty.
    pub fn exponent(&self) -> Result<LoopExponent> {
        let full = match &self.loop_choice {
            LoopChoice::Preset(name) => (*preset_exponent(name, self.model, self.bch_order, self.k_order)?).clone(),
            LoopChoice::Inline(lp) => {
                let trunc = Truncation { max_lambda: Truncation::default().max_lambda.max(self.bch_order as u8), ..Truncation::default() };
                compose(lp, &ComposeOptions::new(self.model, self.bch_order, self.k_order).with_trunc(trunc))?
            }
        };
        Ok(prune(&full, &self.params, self.params.min_phase_uncertainty()))
    }

    /// Preset loops must have a registered inversion; inline loops are tried as given.
    fn check_inversion(&self) -> Result<()> {
        if let LoopChoice::Preset(name) = &self.loop_choice {
            check_registered(self.model, name)?;
        }
        Ok(())
    }
}

pub fn run_analysis(sc: &Scenario, a: Analysis) -> Result<Artifact> {
    match a {
        Analysis::PhaseBudget => phase_budget(sc),
        Analysis::Precision => precision(sc),
        Analysis::NrVsSqueezing => nr_vs_squeezing(sc),
        Analysis::Design => design(sc),
        Analysis::Robustness => robustness(sc),
        Analysis::OracleCheck => oracle_check(sc),
    }
}

#[derive(Serialize)]
struct BudgetRow {
    #[serde(flatten)]
    prov: Provenance,
    part: &'static str,
    origin: String,
    term: String,
    n_power: Option<u8>,
    lambda_power: Option<u8>,
    k_power: Option<u8>,
    phase: f64,
}

fn origin_name(o: &PhaseOrigin) -> String {
    format!("{:?}", o).to_lowercase()
}

pub fn phase_budget(sc: &Scenario) -> Result<Artifact> {
    let b = saddle_phase(&sc.exponent()?, &sc.params)?;
    let mut art = Artifact::new(Analysis::PhaseBudget.name());
    for (part, terms) in [("qg", &b.qg_terms), ("qm", &b.qm_terms)] {
        for t in terms {
            art.push(&BudgetRow {
                prov: sc.provenance(),
                part,
                origin: origin_name(&t.origin),
                term: t.descriptor.clone(),
                n_power: Some(t.powers.0),
                lambda_power: Some(t.powers.1),
                k_power: Some(t.powers.2),
                phase: t.phase,
            })?;
        }
    }
    let summary = [
        ("qg_total", b.qg_term),
        ("qm_total", b.qm_total()),
        ("total", b.total),
        ("min_uncertainty", b.min_uncertainty),
        ("amplitude_ratio", b.amplitude_ratio),
        ("next_order_estimate", b.next_order_estimate),
    ];
    for (name, v) in summary {
        art.push(&BudgetRow {
            prov: sc.provenance(),
            part: "summary",
            origin: String::new(),
            term: name.into(),
            n_power: None,
            lambda_power: None,
            k_power: None,
            phase: v,
        })?;
    }
    Ok(art)
}

#[derive(Serialize)]
struct PrecisionRow {
    #[serde(flatten)]
    prov: Provenance,
    r: f64,
    delta_phi: f64,
    delta_np: f64,
    d_param_d_phi: f64,
    d_param_d_np: f64,
    variance_per_run: f64,
    n_runs: f64,
    log10_n_runs: f64,
}

fn precision_row(sc: &Scenario, rep: &PrecisionReport) -> PrecisionRow {
    PrecisionRow {
        prov: sc.provenance_for(&sc.loop_choice.name(), rep.model, rep.scheme),
        r: rep.r,
        delta_phi: rep.delta_phi,
        delta_np: rep.delta_np,
        d_param_d_phi: rep.d_param_d_phi,
        d_param_d_np: rep.d_param_d_np,
        variance_per_run: rep.variance_per_run,
        n_runs: rep.n_runs_unit_precision,
        log10_n_runs: rep.n_runs_unit_precision.log10(),
    }
}

/// Both noise schemes, the configured one first.
pub fn precision(sc: &Scenario) -> Result<Artifact> {
    sc.check_inversion()?;
    let exp = sc.exponent()?;
    let other = match sc.params.scheme {
        NoiseScheme::QuantumNoise => NoiseScheme::ClassicalNoise,
        NoiseScheme::ClassicalNoise => NoiseScheme::QuantumNoise,
    };
    let mut art = Artifact::new(Analysis::Precision.name());
    for scheme in [sc.params.scheme, other] {
        let rep = propagate_exponent(&exp, &sc.params.with_scheme(scheme), 1.0)?;
        art.push(&precision_row(sc, &rep))?;
    }
    Ok(art)
}

pub fn nr_vs_squeezing(sc: &Scenario) -> Result<Artifact> {
    sc.check_inversion()?;
    let exp = sc.exponent()?;
    let mut art = Artifact::new(Analysis::NrVsSqueezing.name());
    for r in sc.sweep.grid() {
        let p = sc.params.with_r(r);
        p.validate().map_err(anyhow::Error::msg)?;
        art.push(&precision_row(sc, &propagate_exponent(&exp, &p, 1.0)?))?;
    }
    Ok(art)
}

#[derive(Serialize)]
struct DesignRow {
    #[serde(flatten)]
    prov: Provenance,
    solution: usize,
    values: String,
    exact: Option<String>,
    residual: f64,
    qg_coefficient: f64,
    cancelled_terms: String,
}

pub fn design(sc: &Scenario) -> Result<Artifact> {
    let mut problem = DesignProblem::new(sc.model, design_loops(&sc.design)?, sc.design.targets, sc.params.clone());
    problem.k_order = sc.k_order;
    let out = solve_cancellation(&problem)?;
    let cancelled = out.targets.iter().map(|t| t.descriptor.clone()).collect::<Vec<_>>().join("; ");
    let prov = Provenance { bch_order: problem.bch_order, ..sc.provenance_for("design", sc.model, sc.params.scheme) };
    let mut art = Artifact::new(Analysis::Design.name());
    for (i, s) in out.solutions.iter().enumerate() {
        art.push(&DesignRow {
            prov: prov.clone(),
            solution: i,
            values: s.values.iter().map(|v| format!("{:.12}", v)).collect::<Vec<_>>().join(" "),
            exact: s.rational_text.as_ref().map(|r| r.join(" ")),
            residual: s.residual,
            qg_coefficient: s.qg_coefficient,
            cancelled_terms: cancelled.clone(),
        })?;
    }
    Ok(art)
}

#[derive(Serialize)]
struct RobustnessRow {
    #[serde(flatten)]
    prov: Provenance,
    kind: &'static str,
    case: String,
    eps: f64,
    eps_power: Option<u8>,
    leading_term: Option<String>,
    leading_coefficient: Option<String>,
    phase_deviation: Option<f64>,
    epsilon_threshold: Option<f64>,
    amplitude_ratio: Option<f64>,
    offset: Option<f64>,
    correction: Option<f64>,
    correction_exact: Option<f64>,
}

pub fn robustness_cases(include_x_edges: bool) -> Vec<FluctuationCase> {
    let mut cases = vec![vertex_case()];
    for row in 1..=5 {
        if row == 4 && !include_x_edges {
            continue;
        }
        cases.extend(table_case(row));
    }
    cases
}

pub fn robustness(sc: &Scenario) -> Result<Artifact> {
    let model = sc.model;
    let mut art = Artifact::new(Analysis::Robustness.name());
    for mut case in robustness_cases(sc.robustness.include_x_edges) {
        case.epsilon = sc.robustness.fluctuation_epsilon;
        let f = fluctuation_phase(model, &case, &sc.params)?;
        let lead = f.leading();
        art.push(&RobustnessRow {
            prov: sc.provenance_for(&case.base.name(), model, sc.params.scheme),
            kind: "fluctuation",
            case: case.name.clone(),
            eps: case.epsilon,
            eps_power: f.eps_power,
            leading_term: lead.map(|t| format!("n^{} lambda0^{} k^{}", t.powers.0, t.powers.1, t.powers.2)),
            leading_coefficient: lead.map(|t| t.coefficient.clone()),
            phase_deviation: Some(f.phase_deviation),
            epsilon_threshold: if model == Model::None { None } else { Some(epsilon_threshold(model, &case, &sc.params)?) },
            amplitude_ratio: None,
            offset: None,
            correction: None,
            correction_exact: None,
        })?;
    }
    if model != Model::None {
        let name = signal_loop(model);
        let exp = prune(&*preset_exponent(name, model, sc.bch_order, sc.k_order)?, &sc.params, sc.params.min_phase_uncertainty());
        let imp = ImpurityState { epsilon: sc.robustness.impurity_epsilon };
        let r = impure_thermal_phase(model, &imp, &exp, &sc.params)?;
        art.push(&RobustnessRow {
            prov: sc.provenance_for(name, model, sc.params.scheme),
            kind: "impurity",
            case: "impure-thermal".into(),
            eps: imp.epsilon,
            eps_power: Some(1),
            leading_term: None,
            leading_coefficient: None,
            phase_deviation: None,
            epsilon_threshold: None,
            amplitude_ratio: Some(r.amplitude_ratio),
            offset: Some(r.offset),
            correction: Some(r.correction),
            correction_exact: Some(r.correction_exact),
        })?;
    }
    Ok(art)
}

#[derive(Serialize)]
pub struct OracleRow {
    #[serde(flatten)]
    pub prov: Provenance,
    pub n_p: f64,
    pub nbar: f64,
    pub lambda0: f64,
    pub k: f64,
    pub strength: f64,
    pub dim_light: usize,
    pub dim_mech: usize,
    pub oracle_phase: f64,
    pub exact_sum_phase: f64,
    pub difference: f64,
    pub error_bound: f64,
    pub within_bound: bool,
}

/// Oracle comparison of an arbitrary loop; provenance comes from the caller.
pub fn oracle_row(
    prov: Provenance,
    lp: &qgloop::loops::LoopSpec,
    model: Model,
    p: &ExperimentParams,
    bch: usize,
    k_order: u8,
    dim_mech: usize,
) -> Result<OracleRow> {
    let c = oracle_comparison(lp, model, p, bch, k_order, dim_mech)?;
    Ok(OracleRow {
        prov,
        n_p: p.n_p,
        nbar: p.nbar,
        lambda0: p.lambda0(),
        k: if p.k().is_finite() { p.k() } else { 0.0 },
        strength: p.qg_value(model),
        dim_light: c.dim_light,
        dim_mech: c.dim_mech,
        oracle_phase: c.oracle_phase,
        exact_sum_phase: c.exact_sum_phase,
        difference: c.difference,
        error_bound: c.error_bound,
        within_bound: c.within_bound(),
    })
}

pub fn oracle_check(sc: &Scenario) -> Result<Artifact> {
    let p = sc.oracle.params(sc.model, &sc.params);
    let row = oracle_row(sc.provenance(), &sc.loop_choice.spec(), sc.model, &p, sc.bch_order, sc.k_order, sc.oracle.dim_mech)?;
    Artifact::from_rows(Analysis::OracleCheck.name(), &[row])
}
