mod analyses;
mod config;
mod output;
mod tables;

use analyses::{oracle_row, run_analysis, scheme_name};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use config::{Format, Overrides, Scenario, ScenarioConfig};
use output::{emit, write_atomic, Artifact, Provenance};
use qgloop::oracle::random_case;
use rayon::prelude::*;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_ANALYSIS: u8 = 2;
const DEFAULT_OUT: &str = "qgloop-out";

#[derive(Parser)]
#[command(name = "qgloop", version, about = "Phase-space loop compiler and precision planner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// BCH order inside each loop segment
    #[arg(long, global = true)]
    bch_order: Option<usize>,
    /// order of the cavity Hamiltonian expansion in k
    #[arg(long, global = true)]
    k_order: Option<u8>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// output directory; subcommands other than `run` print to stdout without it
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the analyses listed in a scenario file
    Run { config: PathBuf },
    /// Reproduce one of the summary tables
    Tables {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        table: u8,
    },
    /// Required runs against the squeezing parameter
    SweepSqueezing {
        #[arg(long, default_value = "pikovski-gamma")]
        preset: String,
        #[arg(long = "loop")]
        loop_name: Option<String>,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        r_min: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        r_max: f64,
        #[arg(long, default_value_t = 81)]
        steps: usize,
    },
    /// Solve for loop dimensions cancelling the largest QM terms
    Design {
        #[arg(long, default_value = "pikovski-gamma")]
        preset: String,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 2)]
        targets: usize,
    },
    /// Compare the Fock-space simulation with the exact mean-field sum
    OracleCheck {
        #[arg(long = "loop", default_value = "square")]
        loop_name: String,
        #[arg(long, default_value = "gamma")]
        model: String,
        #[arg(long, default_value_t = 16.0)]
        n_p: f64,
        #[arg(long, default_value_t = 0.5)]
        nbar: f64,
        #[arg(long, default_value_t = 0.05)]
        lambda0: f64,
        #[arg(long, default_value_t = 0.03)]
        k: f64,
        /// commutator coefficient
        #[arg(long, default_value_t = 1e-3)]
        strength: f64,
        #[arg(long, default_value_t = 32)]
        dim_mech: usize,
        /// run this many randomized loops instead
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Config(anyhow::Error),
    Analysis { analysis: String, error: anyhow::Error },
}

impl Failure {
    fn analysis(name: &str) -> impl FnOnce(anyhow::Error) -> Failure + '_ {
        move |error| Failure::Analysis { analysis: name.into(), error }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    e.downcast_ref::<qgloop::Error>().map(|q| q.kind()).unwrap_or("analysis")
}

fn error_record(analysis: &str, e: &anyhow::Error) -> serde_json::Value {
    json!({ "status": "error", "analysis": analysis, "kind": error_kind(e), "message": format!("{:#}", e) })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {} threads: {}", n, e);
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {:#}", e);
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Analysis { analysis, error }) => {
            let rec = error_record(&analysis, &error);
            eprintln!("{}", rec);
            if let Some(dir) = out_dir(&cli) {
                let body = serde_json::to_string_pretty(&rec).expect("json") + "\n";
                if let Err(w) = write_atomic(&dir.join("error.json"), &body) {
                    eprintln!("error: {:#}", w);
                }
            }
            ExitCode::from(EXIT_ANALYSIS)
        }
    }
}

/// Where `run` writes; other subcommands only write with `--out`.
fn out_dir(cli: &Cli) -> Option<PathBuf> {
    match &cli.cmd {
        Cmd::Run { config } => cli.out.clone().or_else(|| {
            ScenarioConfig::load(config).ok().map(|c| c.output.path.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)))
        }),
        _ => cli.out.clone(),
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides { bch_order: cli.bch_order, k_order: cli.k_order, out: cli.out.clone(), format: cli.format }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let format = cli.format.unwrap_or_default();
    let out = cli.out.as_deref();
    match &cli.cmd {
        Cmd::Run { config } => run(config, &overrides(cli)),
        Cmd::Tables { table } => {
            let name = format!("table{}", table);
            let art = tables::table(*table).map_err(Failure::analysis(&name))?;
            write_or_print(&art, format, out)
        }
        Cmd::SweepSqueezing { preset, loop_name, r_min, r_max, steps } => {
            let mut cfg = json!({
                "schema_version": config::SCHEMA_VERSION,
                "preset": preset,
                "sweep": { "r_min": r_min, "r_max": r_max, "steps": steps },
            });
            if let Some(l) = loop_name {
                cfg["loop"] = json!(l);
            }
            let sc = scenario(cfg, cli)?;
            let art = analyses::nr_vs_squeezing(&sc).map_err(Failure::analysis("nr_vs_squeezing"))?;
            write_or_print(&art, format, out)
        }
        Cmd::Design { preset, model, targets } => {
            let mut cfg = json!({
                "schema_version": config::SCHEMA_VERSION,
                "preset": preset,
                "design": { "targets": targets },
            });
            if let Some(m) = model {
                cfg["model"] = json!(m);
            }
            let sc = scenario(cfg, cli)?;
            let art = analyses::design(&sc).map_err(Failure::analysis("design"))?;
            write_or_print(&art, format, out)
        }
        Cmd::OracleCheck { loop_name, model, n_p, nbar, lambda0, k, strength, dim_mech, random, seed } => {
            let cfg = json!({
                "schema_version": config::SCHEMA_VERSION,
                "model": model,
                "loop": loop_name,
                "oracle": { "n_p": n_p, "nbar": nbar, "lambda0": lambda0, "k": k, "strength": strength, "dim_mech": dim_mech },
            });
            let sc = scenario(cfg, cli)?;
            let art = match random {
                None => analyses::oracle_check(&sc),
                Some(count) => random_oracle(&sc, *count, *seed),
            }
            .map_err(Failure::analysis("oracle_check"))?;
            write_or_print(&art, format, out)
        }
    }
}

fn scenario(cfg: serde_json::Value, cli: &Cli) -> Result<Scenario, Failure> {
    ScenarioConfig::from_value(cfg).and_then(|c| c.resolve(&overrides(cli))).map_err(Failure::Config)
}

fn write_or_print(art: &Artifact, format: Format, out: Option<&Path>) -> Result<(), Failure> {
    if let Some(p) = emit(art, format, out).map_err(Failure::Config)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn random_oracle(sc: &Scenario, count: usize, seed: u64) -> Result<Artifact> {
    let rows = (0..count)
        .into_par_iter()
        .map(|i| {
            let c = random_case(seed, i);
            let prov = Provenance {
                loop_name: c.loop_spec.name.clone(),
                model: c.model.symbol().into(),
                bch_order: sc.bch_order,
                k_order: sc.k_order,
                scheme: scheme_name(c.params.scheme).into(),
            };
            oracle_row(prov, &c.loop_spec, c.model, &c.params, sc.bch_order, sc.k_order, sc.oracle.dim_mech)
                .with_context(|| format!("random case {}", i))
        })
        .collect::<Result<Vec<_>>>()?;
    Artifact::from_rows("oracle_check", &rows)
}

fn run(path: &Path, ov: &Overrides) -> Result<(), Failure> {
    let sc = ScenarioConfig::load(path).and_then(|c| c.resolve(ov)).map_err(Failure::Config)?;
    if sc.analyses.is_empty() {
        return Ok(());
    }
    let dir = sc.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let results: Vec<(config::Analysis, Result<Artifact>)> =
        sc.analyses.par_iter().map(|&a| (a, run_analysis(&sc, a))).collect();
    let mut failure = None;
    for (a, r) in results {
        match r {
            Ok(art) => {
                let p = emit(&art, sc.format, Some(&dir)).map_err(Failure::Config)?;
                if let Some(p) = p {
                    eprintln!("wrote {}", p.display());
                }
            }
            Err(error) if failure.is_none() => failure = Some(Failure::Analysis { analysis: a.name().into(), error }),
            Err(error) => eprintln!("{}", error_record(a.name(), &error)),
        }
    }
    failure.map_or(Ok(()), Err)
}
