//! Multi-seed gold-mining experiments: config parsing, parallel training,
//! bucketed learning curves, and CSV/text outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::envs::{default_gold_layout, load_layout, GoldMiningEnv, GridAction, GridLayout};
use crate::error::{Error, Result};
use crate::learners::{greedy_rollout, train, LearnerConfig, Rollout, Schedule, UpdateRule};
use crate::mdp::QTable;

pub const DEFAULT_CADENCE: usize = 500;
pub const THREADS_ENV: &str = "MAXDP_THREADS";

pub const CURVE_COLUMNS: [&str; 6] = [
    "algorithm",
    "episode",
    "mean_return",
    "std_return",
    "mean_max_reward",
    "std_max_reward",
];

/// Where the gridworld layout comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LayoutSource {
    Default,
    File(PathBuf),
}

impl LayoutSource {
    /// `"default"` selects the shipped layout, anything else is a path.
    pub fn from_arg(arg: &str) -> Self {
        if arg == "default" {
            LayoutSource::Default
        } else {
            LayoutSource::File(PathBuf::from(arg))
        }
    }

    pub fn load(&self) -> Result<GridLayout> {
        match self {
            LayoutSource::Default => Ok(default_gold_layout()),
            LayoutSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                load_layout(&text)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub layout: LayoutSource,
    pub rules: Vec<UpdateRule>,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: Schedule,
    pub episodes: usize,
    pub n_seeds: usize,
    /// Seeds are `base_seed .. base_seed + n_seeds`.
    pub base_seed: u64,
    pub cadence: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// Both learners on the default layout with the gold-mining hyperparameters.
    fn default() -> Self {
        let base = LearnerConfig::gold_mining(UpdateRule::QLearning, 0);
        Self {
            layout: LayoutSource::Default,
            rules: vec![UpdateRule::QLearning, UpdateRule::MaxQ],
            alpha: base.alpha,
            gamma: base.gamma,
            epsilon: base.epsilon,
            episodes: base.episodes,
            n_seeds: 10,
            base_seed: 0,
            cadence: DEFAULT_CADENCE,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses flat `key = value` text on top of [`ExperimentConfig::default`].
    ///
    /// Relative `env.layout` and `out_dir` paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let (mut start, mut end, mut over) = match cfg.epsilon {
            Schedule::LinearDecay {
                start,
                end,
                over_episodes,
            } => (start, end, over_episodes),
            Schedule::Constant(v) => (v, v, 1),
        };
        let resolve = |raw: &str| -> PathBuf {
            let p = PathBuf::from(raw);
            match base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("expected key=value, got `{line}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn std::fmt::Display| Error::parse(line_no, format!("{key}: {e}"));
            match key {
                "env.layout" => {
                    cfg.layout = match LayoutSource::from_arg(value) {
                        LayoutSource::File(p) => LayoutSource::File(resolve(&p.to_string_lossy())),
                        d => d,
                    }
                }
                "learner.rule" => {
                    cfg.rules = value
                        .split(',')
                        .map(|r| UpdateRule::parse(r.trim()))
                        .collect::<Result<_>>()
                        .map_err(|e| bad(&e))?;
                }
                "learner.alpha" => cfg.alpha = value.parse().map_err(|e| bad(&e))?,
                "learner.gamma" => cfg.gamma = value.parse().map_err(|e| bad(&e))?,
                "schedule.start" => start = value.parse().map_err(|e| bad(&e))?,
                "schedule.end" => end = value.parse().map_err(|e| bad(&e))?,
                "schedule.over" => over = value.parse().map_err(|e| bad(&e))?,
                "episodes" => cfg.episodes = value.parse().map_err(|e| bad(&e))?,
                "seeds" => cfg.n_seeds = value.parse().map_err(|e| bad(&e))?,
                "seed" => cfg.base_seed = value.parse().map_err(|e| bad(&e))?,
                "cadence" => cfg.cadence = value.parse().map_err(|e| bad(&e))?,
                "out_dir" => cfg.out_dir = Some(resolve(value)),
                other => return Err(Error::parse(line_no, format!("unknown key `{other}`"))),
            }
        }
        cfg.epsilon = Schedule::LinearDecay {
            start,
            end,
            over_episodes: over,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.rules.is_empty() {
            return Err(Error::Config(
                "at least one learner rule is required".into(),
            ));
        }
        if self.cadence == 0 || !self.episodes.is_multiple_of(self.cadence) {
            return Err(Error::Config(format!(
                "cadence {} must be positive and divide episodes {}",
                self.cadence, self.episodes
            )));
        }
        if let LayoutSource::File(p) = &self.layout {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "layout file {} does not exist",
                    p.display()
                )));
            }
        }
        self.learner(self.rules[0], self.base_seed).validate()
    }

    pub fn learner(&self, rule: UpdateRule, seed: u64) -> LearnerConfig {
        LearnerConfig {
            rule,
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon: self.epsilon,
            episodes: self.episodes,
            seed,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64)
            .map(|k| self.base_seed + k)
            .collect()
    }
}

/// Cross-seed statistics for one bucket of `cadence` episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Number of episodes completed at the end of the bucket.
    pub episode: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_max_reward: f64,
    pub std_max_reward: f64,
}

/// Final state of one seeded run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub q: QTable,
    pub rollout: Rollout,
    /// Per-bucket means of (return, max reward).
    pub buckets: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct AlgorithmSummary {
    pub rule: UpdateRule,
    pub curve: Vec<CurvePoint>,
    /// Ordered by seed.
    pub runs: Vec<SeedRun>,
}

impl AlgorithmSummary {
    /// Greedy rollout of the lowest seed.
    pub fn rollout(&self) -> &Rollout {
        &self.runs[0].rollout
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub cadence: usize,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl RunSummary {
    pub fn algorithm(&self, rule: UpdateRule) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.rule == rule)
    }

    pub fn curve_rows(&self) -> Vec<(String, CurvePoint)> {
        self.algorithms
            .iter()
            .flat_map(|a| a.curve.iter().map(move |p| (a.rule.name().to_string(), *p)))
            .collect()
    }
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

/// Trains one seed and plays the final greedy rollout.
pub fn run_seed(
    layout: &GridLayout,
    config: &ExperimentConfig,
    rule: UpdateRule,
    seed: u64,
) -> Result<SeedRun> {
    let mut env = GoldMiningEnv::new(layout.clone());
    let outcome = train(&mut env, &config.learner(rule, seed))?;
    let rollout = greedy_rollout(&mut env, &outcome.q)?;
    let buckets = outcome
        .logs
        .chunks(config.cadence)
        .map(|chunk| {
            let n = chunk.len() as f64;
            let ret = chunk.iter().map(|l| l.cumulative_return).sum::<f64>() / n;
            let max = chunk.iter().map(|l| l.max_reward).sum::<f64>() / n;
            (ret, max)
        })
        .collect();
    Ok(SeedRun {
        seed,
        q: outcome.q,
        rollout,
        buckets,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Cross-seed curve for one learner; `runs` may arrive in any order.
pub fn aggregate(
    rule: UpdateRule,
    cadence: usize,
    mut runs: Vec<SeedRun>,
) -> Result<AlgorithmSummary> {
    if runs.is_empty() {
        return Err(Error::Config("no runs to aggregate".into()));
    }
    runs.sort_by_key(|r| r.seed);
    let n_buckets = runs[0].buckets.len();
    let mut curve = Vec::with_capacity(n_buckets);
    for b in 0..n_buckets {
        let rets: Vec<f64> = runs.iter().map(|r| r.buckets[b].0).collect();
        let maxes: Vec<f64> = runs.iter().map(|r| r.buckets[b].1).collect();
        let (mean_return, std_return) = mean_std(&rets);
        let (mean_max_reward, std_max_reward) = mean_std(&maxes);
        let point = CurvePoint {
            episode: (b + 1) * cadence,
            mean_return,
            std_return,
            mean_max_reward,
            std_max_reward,
        };
        if ![mean_return, std_return, mean_max_reward, std_max_reward]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite(format!(
                "{} bucket ending at episode {}: {point:?}",
                rule.name(),
                point.episode
            )));
        }
        curve.push(point);
    }
    Ok(AlgorithmSummary { rule, curve, runs })
}

/// Trains every configured learner over all seeds and, when `out_dir` is
/// set, writes `curves.csv`, `policy_<alg>.txt` and `qtable_<alg>.csv`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let layout = config.layout.load()?;
    let jobs: Vec<(UpdateRule, u64)> = config
        .rules
        .iter()
        .flat_map(|&rule| config.seeds().into_iter().map(move |s| (rule, s)))
        .collect();
    let run_all = || -> Result<Vec<SeedRun>> {
        jobs.par_iter()
            .map(|&(rule, seed)| run_seed(&layout, config, rule, seed))
            .collect()
    };
    let mut results = match thread_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    }
    .into_iter();

    let mut algorithms = Vec::with_capacity(config.rules.len());
    for &rule in &config.rules {
        let runs: Vec<SeedRun> = results.by_ref().take(config.n_seeds).collect();
        algorithms.push(aggregate(rule, config.cadence, runs)?);
    }
    let summary = RunSummary {
        cadence: config.cadence,
        algorithms,
    };
    if let Some(dir) = &config.out_dir {
        write_outputs(&summary, &layout, dir)?;
    }
    Ok(summary)
}

pub fn write_outputs(summary: &RunSummary, layout: &GridLayout, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_curves(&summary.curve_rows(), &dir.join("curves.csv"))?;
    for alg in &summary.algorithms {
        let name = alg.rule.name();
        let policy_path = dir.join(format!("policy_{name}.txt"));
        fs::write(&policy_path, format_rollout(alg.rollout(), layout))
            .map_err(|e| Error::io(&policy_path, e))?;
        write_qtable(
            &alg.runs[0].q,
            layout,
            &dir.join(format!("qtable_{name}.csv")),
        )?;
    }
    Ok(())
}

pub fn write_curves(rows: &[(String, CurvePoint)], path: &Path) -> Result<()> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CURVE_COLUMNS).map_err(csv_err)?;
    for (alg, p) in rows {
        w.write_record([
            alg.clone(),
            p.episode.to_string(),
            p.mean_return.to_string(),
            p.std_return.to_string(),
            p.mean_max_reward.to_string(),
            p.std_max_reward.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reloads rows written by [`write_curves`].
pub fn read_curves(path: &Path) -> Result<Vec<(String, CurvePoint)>> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CURVE_COLUMNS) {
        return Err(Error::parse(
            1,
            format!("unexpected curve header {headers:?}"),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            record[k]
                .parse()
                .map_err(|e| Error::parse(line, format!("{}: {e}", CURVE_COLUMNS[k])))
        };
        let episode = record[1]
            .parse()
            .map_err(|e| Error::parse(line, format!("episode: {e}")))?;
        rows.push((
            record[0].to_string(),
            CurvePoint {
                episode,
                mean_return: num(2)?,
                std_return: num(3)?,
                mean_max_reward: num(4)?,
                std_max_reward: num(5)?,
            },
        ));
    }
    Ok(rows)
}

fn write_qtable(q: &QTable, layout: &GridLayout, path: &Path) -> Result<()> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["state".to_string(), "row".into(), "col".into()];
    header.extend(GridAction::ALL.iter().map(|a| a.name().to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for s in 0..q.n_states() {
        let mut rec = vec![
            s.to_string(),
            (s / layout.cols).to_string(),
            (s % layout.cols).to_string(),
        ];
        rec.extend(q.row(s).iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Human-readable greedy trace: one line per step plus totals.
pub fn format_rollout(rollout: &Rollout, layout: &GridLayout) -> String {
    let mut out = String::from("step\trow\tcol\taction\treward\n");
    for (t, (&a, &r)) in rollout.actions.iter().zip(&rollout.rewards).enumerate() {
        let cell = rollout.observations[t + 1];
        let action = GridAction::from_index(a).map_or("?", GridAction::name);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{action}\t{r}",
            t + 1,
            cell / layout.cols,
            cell % layout.cols
        );
    }
    let _ = writeln!(out, "return\t{}", rollout.cumulative_return());
    let _ = writeln!(out, "max_reward\t{}", rollout.max_reward());
    out
}
