use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use choicedag::active::{alg_dag, EstimationConfig};
use choicedag::dag::{
    build_dag_exact, dag_diff, dag_from_model, dag_to_json, load_dag, DiffMetrics,
};
use choicedag::experiments::{
    distinct_ordered_prefixes, emit_report, load_sushi, run_choice_prob_experiment,
    run_recovery_experiment, ExperimentSpec, Scenario,
};
use choicedag::indist::{confusable_model, find_witnesses, IndistWitness};
use choicedag::model::{generate_model, load_model, model_to_json, GenParams};
use choicedag::oracle::{ExactOracle, SampledOracle};
use choicedag::Error;

#[derive(Parser)]
#[command(
    name = "choicedag",
    about = "Ranking-based choice models: DAG construction, active-learning estimation, experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic model and write it as JSON.
    Gen(GenArgs),
    /// DAG construction and comparison.
    #[command(subcommand)]
    Dag(DagCommand),
    /// Learn a DAG from sampled queries against a known model.
    Estimate(EstimateArgs),
    /// List indistinguishable type pairs; optionally write the confusable model.
    Indist(IndistArgs),
    /// Experiment sweeps.
    #[command(subcommand)]
    Exp(ExpCommand),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    frequent: usize,
    #[arg(long, default_value_t = 20)]
    rare: usize,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.1)]
    cv: f64,
    #[arg(long, default_value_t = 0.01)]
    kappa: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Merge duplicate random rankings instead of redrawing them.
    #[arg(long)]
    allow_merge: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DagCommand {
    /// Reconstruct the complete DAG from exact choice probabilities.
    BuildExact {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two DAG files at a truncation level.
    Diff {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        n0: usize,
    },
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.01)]
    kappa: f64,
    #[arg(long, default_value_t = 10_000)]
    mcap: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-edge query ledger as CSV.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Args)]
struct IndistArgs {
    #[arg(long)]
    model: PathBuf,
    /// Restrict the search to frequent types.
    #[arg(long)]
    frequent_only: bool,
    /// Write the confusable model for the witness at this index.
    #[arg(long)]
    confuse: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExpCommand {
    /// L1 choice-probability sweep over random assortments.
    ChoiceProb(SweepArgs),
    /// Frequent-DAG recovery sweep.
    Recovery(SweepArgs),
    /// Load a ranking survey file; report prefix counts and recovery quality.
    Sushi(SushiArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    frequent: usize,
    #[arg(long, default_value_t = 20)]
    rare: usize,
    #[arg(long, default_value_t = 0.01)]
    kappa: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    cv: f64,
    #[arg(long = "rho", required = true)]
    rhos: Vec<f64>,
    #[arg(long = "eps", default_values_t = [0.01])]
    epsilons: Vec<f64>,
    #[arg(long = "n0", required = true)]
    levels: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 100)]
    sets: usize,
    #[arg(long, default_value_t = 4)]
    set_size: usize,
    #[arg(long, default_value_t = 10_000)]
    mcap: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable instance-level parallelism.
    #[arg(long)]
    sequential: bool,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SushiArgs {
    #[arg(long)]
    file: PathBuf,
    #[arg(long, default_value_t = 0.0001)]
    kappa: f64,
    #[arg(long, default_value_t = 2)]
    n0: usize,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 10_000)]
    mcap: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SweepArgs {
    fn to_spec(&self, scenario: Scenario) -> ExperimentSpec {
        ExperimentSpec {
            scenario,
            n: self.n,
            num_frequent: self.frequent,
            num_rare: self.rare,
            kappa: self.kappa,
            delta: self.delta,
            cv: self.cv,
            rhos: self.rhos.clone(),
            epsilons: self.epsilons.clone(),
            levels: self.levels.clone(),
            instances: self.instances,
            num_random_sets: self.sets,
            set_size: self.set_size,
            m_cap: self.mcap,
            seed: self.seed,
            parallel: !self.sequential,
        }
    }
}

fn run(cli: Cli) -> choicedag::Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let model = generate_model(&GenParams {
                n: args.n,
                num_frequent: args.frequent,
                num_rare: args.rare,
                rho: args.rho,
                cv: args.cv,
                kappa: args.kappa,
                seed: args.seed,
                allow_merge: args.allow_merge,
            })?;
            std::fs::write(&args.out, model_to_json(&model))?;
            println!(
                "wrote {} types over {} items to {}",
                model.types().len(),
                model.n(),
                args.out.display()
            );
        }
        Command::Dag(DagCommand::BuildExact { model, out }) => {
            let m = load_model(&model)?;
            let mut oracle = ExactOracle::new(&m);
            let dag = build_dag_exact(&mut oracle, m.n())?;
            std::fs::write(&out, dag_to_json(&dag))?;
            println!(
                "wrote DAG with {} nodes, {} edges to {}",
                dag.nodes().len(),
                dag.edges().len(),
                out.display()
            );
        }
        Command::Dag(DagCommand::Diff { truth, est, n0 }) => {
            let t = load_dag(&truth)?;
            let e = load_dag(&est)?;
            let diff = dag_diff(&t, &e, n0)?;
            println!("{}", DiffMetrics::csv_header());
            println!("{}", diff.to_csv_row());
        }
        Command::Estimate(args) => {
            let m = load_model(&args.model)?;
            if m.rho() >= args.kappa / 4.0 && m.rho() > 0.0 {
                eprintln!(
                    "warning: rho={} >= kappa/4={}; recovery guarantees do not apply",
                    m.rho(),
                    args.kappa / 4.0
                );
            }
            let cfg = EstimationConfig {
                alpha: args.alpha,
                epsilon: args.eps,
                delta: args.delta,
                kappa: args.kappa,
                k_bound: None,
                m_cap: args.mcap,
            };
            use rand::SeedableRng;
            let rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
            let mut oracle = SampledOracle::new(&m, rng);
            let (dag, ledger) = alg_dag(&mut oracle, &cfg)?;
            std::fs::write(&args.out, dag_to_json(&dag))?;
            if let Some(ledger_path) = &args.ledger {
                std::fs::write(ledger_path, ledger.to_csv())?;
            }
            println!(
                "estimated {} nodes, {} edges with {} consumers ({} capped edges)",
                dag.nodes().len(),
                dag.edges().len(),
                ledger.total_consumers(),
                ledger.rows.iter().filter(|r| r.capped).count()
            );
        }
        Command::Indist(args) => {
            let m = load_model(&args.model)?;
            let witnesses = find_witnesses(&m, args.frequent_only);
            match args.confuse {
                None => {
                    println!("type1,type2,i");
                    for w in &witnesses {
                        println!("{},{},{}", w.pi1, w.pi2, w.i);
                    }
                }
                Some(idx) => {
                    let w: &IndistWitness = witnesses.get(idx).ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "witness index {idx} out of range (found {})",
                            witnesses.len()
                        ))
                    })?;
                    let alt = confusable_model(&m, w)?;
                    let out = args.out.ok_or_else(|| {
                        Error::InvalidParameter("--confuse requires --out".into())
                    })?;
                    std::fs::write(&out, model_to_json(&alt))?;
                    println!(
                        "wrote confusable model for pair ({}, {}) at i={} to {}",
                        w.pi1,
                        w.pi2,
                        w.i,
                        out.display()
                    );
                }
            }
        }
        Command::Exp(ExpCommand::ChoiceProb(args)) => {
            let spec = args.to_spec(Scenario::ChoiceProb);
            let rep = run_choice_prob_experiment(&spec)?;
            emit_report(&rep, &args.format, &args.out)?;
            for s in &rep.l1_stats {
                println!(
                    "rho={} eps={} n0={}: mean L1 {:.4} (std {:.4}, p25 {:.4}, p50 {:.4}, p75 {:.4})",
                    s.rho, s.eps, s.n0, s.mean, s.std, s.p25, s.p50, s.p75
                );
            }
        }
        Command::Exp(ExpCommand::Recovery(args)) => {
            let spec = args.to_spec(Scenario::Recovery);
            let rep = run_recovery_experiment(&spec)?;
            emit_report(&rep, &args.format, &args.out)?;
            for s in &rep.recovery_stats {
                println!(
                    "rho={} n0={}: max discrepancy {:.4}±{:.4}, %-diff vertices {:.2}±{:.2}",
                    s.rho,
                    s.n0,
                    s.mean_max_discrepancy,
                    s.stderr_max_discrepancy,
                    s.mean_pct_diff,
                    s.stderr_pct_diff
                );
            }
        }
        Command::Exp(ExpCommand::Sushi(args)) => {
            let m = load_sushi(&args.file, args.kappa)?;
            println!("{} distinct types over {} items", m.types().len(), m.n());
            for j in 2..=5.min(m.n()) {
                println!(
                    "distinct ordered top-{j} prefixes: {}",
                    distinct_ordered_prefixes(&m, j)
                );
            }
            let cfg = EstimationConfig {
                alpha: args.n0 as f64 / m.n() as f64,
                epsilon: args.eps,
                delta: args.delta,
                kappa: args.kappa,
                k_bound: None,
                m_cap: args.mcap,
            };
            use rand::SeedableRng;
            let rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
            let mut oracle = SampledOracle::new(&m, rng);
            let (dag, ledger) = alg_dag(&mut oracle, &cfg)?;
            let truth = dag_from_model(&m, args.n0, true)?;
            let diff = dag_diff(&truth, &dag, args.n0)?;
            println!("queries_total,{}", ledger.total_consumers());
            println!("{}", DiffMetrics::csv_header());
            println!("{}", diff.to_csv_row());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
