//! `drawlab`: simulate constrained group draws and quantify how far a
//! procedure strays from a uniform draw.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use drawlab::draw::{label_ex_post, run_skip_draw, Procedure};
use drawlab::exact::{enumerate_skip, enumerate_uniform, EnumerateOptions, PairProbabilityMatrix};
use drawlab::experiments::{
    demonstrate_claim1, estimate_acceptance_rate, estimate_deadlock_rate, metrics_csv, run_sweep,
    sweep_report, SimulationJob,
};
use drawlab::metrics::{compute_metrics, count_pairs, delta_table, render_delta_table, TeamSets};
use drawlab::model::{fixtures, load_instance, serialize_instance, Confederation, Instance, Labelling};

#[derive(Parser)]
#[command(
    name = "drawlab",
    version,
    about = "Constrained group-draw simulator and non-uniformity analysis"
)]
struct Cli {
    /// Worker threads for simulations (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabellingArg {
    ExAnte,
    ExPost,
}

impl From<LabellingArg> for Labelling {
    fn from(v: LabellingArg) -> Labelling {
        match v {
            LabellingArg::ExAnte => Labelling::ExAnte,
            LabellingArg::ExPost => Labelling::ExPost,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EnumerateMode {
    Uniform,
    Skip,
}

#[derive(Subcommand)]
enum Command {
    /// Run one televised-style draw and print the groups.
    Draw {
        /// Built-in instance name or path to an instance JSON file.
        #[arg(long)]
        instance: String,
        /// Pot order, e.g. 1,2,3,4 or 1-2-3-4.
        #[arg(long, default_value = "1,2,3,4")]
        order: String,
        #[arg(long, value_enum, default_value = "ex-ante")]
        labelling: LabellingArg,
        #[arg(long)]
        seed: u64,
        /// Write a JSON-lines transcript of the draw.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Simulate many procedures and report the non-uniformity measures.
    Sweep {
        #[arg(long)]
        instance: String,
        /// Semicolon-separated pot orders, or `all` for every permutation.
        #[arg(long, default_value = "all")]
        orders: String,
        /// `ex-ante`, `ex-post`, or `both`.
        #[arg(long, default_value = "both")]
        labelling: String,
        /// Skip draws per procedure.
        #[arg(long, default_value_t = 100_000)]
        draws: u64,
        /// Accepted uniform samples per labelling policy.
        #[arg(long, default_value_t = 10_000)]
        uniform_accepted: u64,
        /// Proposal budget for the uniform baseline.
        #[arg(long)]
        uniform_max_proposals: Option<u64>,
        #[arg(long)]
        seed: u64,
        /// Output directory for metrics.csv, report.txt and the matrices.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the rejection sampler's acceptance rate.
    Uniform {
        #[arg(long)]
        instance: String,
        #[arg(long, value_enum, default_value = "ex-ante")]
        labelling: LabellingArg,
        #[arg(long)]
        proposals: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Exhaustively enumerate pair probabilities on a small instance.
    Enumerate {
        #[arg(long)]
        instance: String,
        #[arg(long, value_enum, default_value = "uniform")]
        mode: EnumerateMode,
        #[arg(long, default_value = "1,2,3,4")]
        order: String,
        #[arg(long, value_enum, default_value = "ex-ante")]
        labelling: LabellingArg,
        /// State-space ceiling before refusing.
        #[arg(long)]
        ceiling: Option<u128>,
        /// Write the matrix CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate how often a two-pot prefix cannot be completed.
    Deadlock {
        #[arg(long)]
        instance: String,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 2)]
        prefix_pots: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Show the naive backtracker stalling on the published dead state.
    Claim1 {
        #[arg(long)]
        budget: u64,
    },
    /// Compute the five measures from two matrix CSV files.
    Metrics {
        #[arg(long)]
        instance: String,
        /// Procedure matrix CSV.
        #[arg(long)]
        draw: PathBuf,
        /// Uniform baseline matrix CSV.
        #[arg(long)]
        baseline: PathBuf,
        /// Also print the per-pair delta table.
        #[arg(long)]
        deltas: bool,
    },
    /// Print a built-in instance as JSON, or structural pair counts.
    Instance {
        #[arg(long)]
        instance: String,
        /// Print prohibited-pair counts instead of the document.
        #[arg(long)]
        counts: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    BudgetExhausted(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::BudgetExhausted(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn resolve_instance(spec: &str) -> Result<Instance, CliError> {
    if let Some(inst) = fixtures::builtin(spec) {
        return Ok(inst);
    }
    if Path::new(spec).exists() {
        let text = fs::read_to_string(spec)?;
        return load_instance(&text).map_err(validation);
    }
    Err(CliError::Validation(format!(
        "`{spec}` is neither a built-in instance ({}) nor a readable file",
        fixtures::builtin_names().join(", ")
    )))
}

fn parse_orders(spec: &str, inst: &Instance, labelling: Labelling) -> Result<Vec<Procedure>, CliError> {
    if spec == "all" {
        return Ok(Procedure::all_orders(inst.pot_count(), labelling));
    }
    spec.split(';')
        .map(|o| Procedure::parse(o, labelling).map_err(validation))
        .collect()
}

fn print_groups(inst: &Instance, state: &drawlab::model::DrawState) {
    for g in 0..inst.group_count() {
        let members: Vec<String> = (0..inst.pot_count())
            .filter_map(|p| state.team_at(g, p))
            .map(|t| {
                let team = inst.team(t);
                format!("{} ({})", team.name, team.confeds.iter().map(|c| c.code()).collect::<Vec<_>>().join("/"))
            })
            .collect();
        println!("Group {}: {}", inst.label(g), members.join(", "));
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(validation)?;
    }
    match cli.command {
        Command::Draw {
            instance,
            order,
            labelling,
            seed,
            transcript,
        } => {
            let inst = resolve_instance(&instance)?;
            let labelling = Labelling::from(labelling);
            let procedure = Procedure::parse(&order, labelling).map_err(validation)?;
            let (state, record) = run_skip_draw(&inst, &procedure, seed, 0).map_err(validation)?;
            let state = match labelling {
                Labelling::ExAnte => state,
                Labelling::ExPost => label_ex_post(&inst, &state).map_err(validation)?,
            };
            println!("instance: {} procedure: {procedure} seed: {seed}", inst.name());
            print_groups(&inst, &state);
            if let Some(path) = transcript {
                fs::write(&path, record.to_jsonl())?;
                println!("transcript written to {}", path.display());
            }
            Ok(())
        }
        Command::Sweep {
            instance,
            orders,
            labelling,
            draws,
            uniform_accepted,
            uniform_max_proposals,
            seed,
            out,
        } => {
            let inst = resolve_instance(&instance)?;
            let mut procedures = Vec::new();
            match labelling.as_str() {
                "both" => {
                    procedures.extend(parse_orders(&orders, &inst, Labelling::ExAnte)?);
                    procedures.extend(parse_orders(&orders, &inst, Labelling::ExPost)?);
                }
                other => {
                    let labelling: Labelling = other.parse().map_err(validation)?;
                    procedures.extend(parse_orders(&orders, &inst, labelling)?);
                }
            }
            let job = SimulationJob {
                procedures,
                draws_per_procedure: draws,
                uniform_target: uniform_accepted,
                uniform_max_proposals: uniform_max_proposals.unwrap_or(u64::MAX),
                master_seed: seed,
            };
            let result = run_sweep(&inst, &job).map_err(validation)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("metrics.csv"), metrics_csv(&result, seed))?;
            fs::write(out.join("report.txt"), sweep_report(&result))?;
            for (labelling, matrix) in &result.baselines {
                fs::write(out.join(format!("baseline_{labelling}.csv")), matrix.to_csv())?;
            }
            for row in &result.rows {
                let name = format!(
                    "matrix_{}_{}.csv",
                    row.procedure.order_string(),
                    row.procedure.labelling
                );
                fs::write(out.join(name), row.matrix.to_csv())?;
            }
            print!("{}", sweep_report(&result));
            println!("outputs written to {}", out.display());
            if result.uniform_exhausted {
                return Err(CliError::BudgetExhausted(
                    "uniform proposal budget exhausted before the acceptance target".into(),
                ));
            }
            Ok(())
        }
        Command::Uniform {
            instance,
            labelling,
            proposals,
            seed,
        } => {
            let inst = resolve_instance(&instance)?;
            let est = estimate_acceptance_rate(&inst, labelling.into(), proposals, seed);
            println!("acceptance rate: {est}");
            if est.hits == 0 {
                return Err(CliError::BudgetExhausted(
                    "no proposal was accepted within the budget".into(),
                ));
            }
            Ok(())
        }
        Command::Enumerate {
            instance,
            mode,
            order,
            labelling,
            ceiling,
            out,
        } => {
            let inst = resolve_instance(&instance)?;
            let labelling = Labelling::from(labelling);
            let mut opts = EnumerateOptions::default();
            if let Some(c) = ceiling {
                opts.ceiling = c;
            }
            let matrix = match mode {
                EnumerateMode::Uniform => enumerate_uniform(&inst, labelling, &opts),
                EnumerateMode::Skip => {
                    let procedure = Procedure::parse(&order, labelling).map_err(validation)?;
                    enumerate_skip(&inst, &procedure, &opts)
                }
            };
            let matrix = match matrix {
                Ok(m) => m,
                Err(e @ drawlab::exact::ExactError::CeilingExceeded { .. }) => {
                    return Err(CliError::BudgetExhausted(e.to_string()));
                }
                Err(e) => return Err(validation(e)),
            };
            match out {
                Some(path) => {
                    fs::write(&path, matrix.to_csv())?;
                    println!("matrix written to {}", path.display());
                }
                None => {
                    print!("{}", matrix.to_csv());
                }
            }
            Ok(())
        }
        Command::Deadlock {
            instance,
            samples,
            prefix_pots,
            seed,
        } => {
            let inst = resolve_instance(&instance)?;
            let est = estimate_deadlock_rate(&inst, samples, seed, prefix_pots);
            println!("dead prefixes: {est}");
            Ok(())
        }
        Command::Claim1 { budget } => {
            let report = demonstrate_claim1(budget);
            println!("{report}");
            Ok(())
        }
        Command::Metrics {
            instance,
            draw,
            baseline,
            deltas,
        } => {
            let inst = resolve_instance(&instance)?;
            let mat_d = PairProbabilityMatrix::from_csv(&fs::read_to_string(&draw)?).map_err(validation)?;
            let mat_u =
                PairProbabilityMatrix::from_csv(&fs::read_to_string(&baseline)?).map_err(validation)?;
            let sets = sets_for_matrix(&inst, &mat_d)?;
            let report = compute_metrics(&mat_d, &mat_u, &sets).map_err(validation)?;
            println!("procedure: {}", report.procedure);
            println!("baseline:  {}", report.baseline_provenance);
            println!("pairs with positive baseline probability: {}", report.p_positive);
            for (k, v) in report.m.iter().enumerate() {
                println!("m{} = {v:.4} pp", k + 1);
            }
            if deltas {
                let rows = delta_table(&mat_d, &mat_u, &inst).map_err(validation)?;
                print!("{}", render_delta_table(&rows));
            }
            Ok(())
        }
        Command::Instance { instance, counts } => {
            let inst = resolve_instance(&instance)?;
            if counts {
                let c = count_pairs(&inst);
                for confed in Confederation::ALL {
                    if confed != Confederation::Uefa {
                        println!("{confed}: {}", c.prohibited[confed.index()]);
                    }
                }
                println!("prohibited total: {}", c.prohibited_total);
                println!("cross-pot pairs: {}", c.cross_pot);
                println!("allowed pairs: {}", c.p_positive);
            } else {
                println!("{}", serialize_instance(&inst));
            }
            Ok(())
        }
    }
}

/// Team sets must index the matrix's team order, which may differ from the
/// instance order after a CSV round trip.
fn sets_for_matrix(inst: &Instance, matrix: &PairProbabilityMatrix) -> Result<TeamSets, CliError> {
    let remap = |ids: Vec<usize>| -> Result<Vec<usize>, CliError> {
        ids.into_iter()
            .map(|t| {
                matrix.team_index(&inst.team(t).id).ok_or_else(|| {
                    CliError::Validation(format!(
                        "matrix does not cover team `{}` of instance `{}`",
                        inst.team(t).id,
                        inst.name()
                    ))
                })
            })
            .collect()
    };
    let sets = TeamSets::from_instance(inst);
    Ok(TeamSets {
        t1: remap(sets.t1)?,
        t123: remap(sets.t123)?,
        t4u: remap(sets.t4u)?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::BudgetExhausted(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
