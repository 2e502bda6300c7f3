use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use maxdp::envs::{markovize, random_stochastic_policy, GoldMiningEnv, GridAction};
use maxdp::experiments::{run_experiment, ExperimentConfig, LayoutSource};
use maxdp::operators::{solve_fixed_point, OperatorKind, DEFAULT_MAX_ITER, DEFAULT_TOL};
use maxdp::oracle::{enumerate_deterministic, DEFAULT_BUDGET};
use maxdp::{Error, Policy, QTable, Result, TabularMdp};

#[derive(Parser)]
#[command(
    name = "maxdp",
    version,
    about = "Max-Bellman dynamic programming and gold-mining experiments"
)]
struct Cli {
    /// Base RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-seed learning experiment from a key=value config file.
    Run {
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Iterate an operator to its fixed point on an MDP text file.
    Solve {
        mdp: PathBuf,
        #[arg(long, value_enum)]
        operator: OperatorArg,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Policy for the evaluation operators.
        #[arg(long, value_enum, default_value_t = PolicyArg::Uniform)]
        policy: PolicyArg,
    },
    /// Enumerate every action sequence of a gold-mining layout.
    Oracle {
        /// Layout file, or `default`.
        layout: String,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
    },
    /// Expand a layout into an exact MDP over (cell, mined set).
    Markovize {
        /// Layout file, or `default`.
        layout: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorArg {
    MaxEval,
    MaxOpt,
    StdEval,
    StdOpt,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PolicyArg {
    Uniform,
    /// Seeded random stochastic policy.
    Random,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn action_names(actions: &[usize]) -> String {
    actions
        .iter()
        .map(|&a| GridAction::from_index(a).map_or("?", GridAction::name))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out_dir } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = cli.seed {
                cfg.base_seed = seed;
            }
            if out_dir.is_some() {
                cfg.out_dir = out_dir;
            }
            let summary = run_experiment(&cfg)?;
            for alg in &summary.algorithms {
                let last = alg.curve.last().expect("at least one bucket");
                println!(
                    "{}: final mean_return = {} (std {}), final mean_max_reward = {} (std {})",
                    alg.rule.name(),
                    last.mean_return,
                    last.std_return,
                    last.mean_max_reward,
                    last.std_max_reward
                );
                for r in &alg.runs {
                    println!(
                        "  seed {}: greedy return {} max {} [{}]",
                        r.seed,
                        r.rollout.cumulative_return(),
                        r.rollout.max_reward(),
                        action_names(&r.rollout.actions)
                    );
                }
            }
            if let Some(dir) = &cfg.out_dir {
                println!("wrote {}", dir.display());
            }
        }
        Command::Solve {
            mdp,
            operator,
            tol,
            max_iter,
            policy,
        } => {
            let mdp = TabularMdp::parse(&read(&mdp)?)?;
            let pi = match policy {
                PolicyArg::Uniform => Policy::uniform(mdp.n_states(), mdp.n_actions()),
                PolicyArg::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
                    random_stochastic_policy(mdp.n_states(), mdp.n_actions(), &mut rng)
                }
            };
            let kind = match operator {
                OperatorArg::MaxEval => OperatorKind::MaxBellmanEvaluation(pi),
                OperatorArg::MaxOpt => OperatorKind::MaxBellmanOptimality,
                OperatorArg::StdEval => OperatorKind::StandardEvaluation(pi),
                OperatorArg::StdOpt => OperatorKind::StandardOptimality,
            };
            let q0 = QTable::zeros(mdp.n_states(), mdp.n_actions());
            let res = solve_fixed_point(&kind, &mdp, &q0, tol, max_iter)?;
            println!("operator = {}", kind.name());
            println!("iterations = {}", res.iterations);
            println!("residual = {:e}", res.residual);
            println!("converged = {}", res.converged);
            for s in 0..res.q.n_states() {
                for a in 0..res.q.n_actions() {
                    println!("Q(s{s},a{a}) = {}", res.q.get(s, a));
                }
            }
            res.into_converged()?;
        }
        Command::Oracle {
            layout,
            horizon,
            gamma,
            budget,
        } => {
            let layout = LayoutSource::from_arg(&layout).load()?;
            let horizon = horizon.unwrap_or(layout.horizon);
            let env = GoldMiningEnv::new(layout);
            let st = enumerate_deterministic(&env, horizon, gamma, budget)?;
            println!("sequences = {}", st.sequences);
            println!("best_cumulative_return = {}", st.best_cumulative_return);
            println!("  actions: {}", action_names(&st.best_return_actions));
            println!("best_max_raw_reward = {}", st.best_max_raw_reward);
            println!("  actions: {}", action_names(&st.best_raw_actions));
            println!(
                "best_max_discounted_reward = {}",
                st.best_max_discounted_reward
            );
            println!("  actions: {}", action_names(&st.best_discounted_actions));
            println!(
                "best_return_reaching_raw_max = {}",
                st.best_return_reaching_raw_max
            );
            println!(
                "  actions: {}",
                action_names(&st.best_return_reaching_raw_max_actions)
            );
        }
        Command::Markovize {
            layout,
            output,
            gamma,
        } => {
            let layout = LayoutSource::from_arg(&layout).load()?;
            let m = markovize(&layout, gamma)?;
            fs::write(&output, m.mdp.to_text()).map_err(|e| Error::io(&output, e))?;
            println!(
                "wrote {} states x {} actions to {} (start state {})",
                m.mdp.n_states(),
                m.mdp.n_actions(),
                output.display(),
                m.start_state
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
