use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use brwlab::barrier::{euler_curve, first_crossing, solve_variational, BarrierError, Crossing};
use brwlab::brw::{count_below_barrier, count_windowed, exact_offset, BrwError, TreeRandomness};
use brwlab::harness::csv::{fmt_f64, CsvTable};
use brwlab::harness::study::{run_convergence_study, run_tube_study, StudyError, TubeStudyConfig};
use brwlab::harness::{parse_config, ConfigError};
use brwlab::ldtool::{ld_profile, LdError, LdProfile};
use brwlab::{DistError, MogulskiiError, StepDistribution, TubeRegion};

const EXIT_CONFIG: u8 = 2;
const EXIT_ASSUMPTION: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "brwlab", version, about = "Minimal displacement of branching random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Large-deviation profile of a step law.
    Profile {
        #[arg(long)]
        dist: StepDistribution,
        #[arg(long)]
        b: u32,
    },
    /// Euler barrier curve with its closed form.
    Barrier {
        #[arg(long)]
        dist: StepDistribution,
        #[arg(long)]
        b: u32,
        #[arg(long)]
        l: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        inv_eps: usize,
        /// Report the first index with s_k >= l1.
        #[arg(long)]
        l1: Option<f64>,
    },
    /// Discretized minimax problem min_w max_t { w + ∫ c/w² }.
    Variational {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 1000)]
        grid: usize,
    },
    /// Exact offset L_n per seed (the law is centered first).
    Offset {
        #[arg(long)]
        dist: StepDistribution,
        #[arg(long)]
        b: u32,
        #[arg(long)]
        n: usize,
        /// `a..b` (half-open), `a..=b`, or a single seed.
        #[arg(long)]
        seeds: SeedRange,
        #[arg(long, default_value_t = 1_000_000_000)]
        node_budget: u64,
    },
    /// Population below l·n^{1/3}, or inside the barrier windows when --delta and --inv-eps are given.
    Count {
        #[arg(long)]
        dist: StepDistribution,
        #[arg(long)]
        b: u32,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seeds: SeedRange,
        #[arg(long)]
        barrier_l: f64,
        #[arg(long, default_value_t = 100_000_000)]
        pop_budget: u64,
        #[arg(long, requires = "inv_eps")]
        delta: Option<f64>,
        #[arg(long, requires = "delta")]
        inv_eps: Option<usize>,
    },
    /// Monte Carlo stay probability of the tilted walk in a tube.
    Tube {
        #[arg(long)]
        dist: StepDistribution,
        #[arg(long)]
        b: u32,
        /// `t0:f1:f2;t1:f1:f2;...` with `inf`/`-inf` allowed.
        #[arg(long)]
        tube: TubeRegion,
        /// One walk length or a comma-separated list.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Convergence study from a configuration file.
    Study {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Debug)]
struct SeedRange(Vec<u64>);

impl std::str::FromStr for SeedRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}"));
        let seeds = if let Some((a, b)) = s.split_once("..=") {
            (num(a)?..=num(b)?).collect()
        } else if let Some((a, b)) = s.split_once("..") {
            (num(a)?..num(b)?).collect()
        } else {
            vec![num(s)?]
        };
        if seeds.is_empty() {
            return Err(format!("empty seed range `{s}`"));
        }
        Ok(SeedRange(seeds))
    }
}

fn emit(text: &str) -> Result<()> {
    io::stdout().lock().write_all(text.as_bytes()).context("writing to stdout")
}

fn profile_of(dist: &StepDistribution, b: u32) -> Result<LdProfile> {
    Ok(ld_profile(dist, b)?)
}

fn cmd_profile(dist: &StepDistribution, b: u32) -> Result<u8> {
    let p = profile_of(dist, b)?;
    let mut t = CsvTable::new(&["dist", "b", "lambda_minus", "lambda_plus", "m", "M", "sigma_q_sq", "l0"]);
    let spec = dist.to_string();
    let spec = if spec.contains(',') { format!("\"{spec}\"") } else { spec };
    t.push_raw(vec![
        spec,
        b.to_string(),
        fmt_f64(p.lambda_minus),
        fmt_f64(p.lambda_plus),
        fmt_f64(p.min_speed),
        fmt_f64(p.max_speed),
        fmt_f64(p.sigma_q_sq),
        fmt_f64(p.l0),
    ]);
    emit(t.as_str())?;
    Ok(0)
}

fn cmd_barrier(dist: &StepDistribution, b: u32, l: f64, delta: f64, inv_eps: usize, l1: Option<f64>) -> Result<u8> {
    let p = profile_of(dist, b)?;
    let (curve, blowup) = match euler_curve(&p, l, delta, inv_eps) {
        Ok(c) => (c, None),
        Err(BarrierError::CurveBlowup { k, partial }) => (*partial, Some(k)),
        Err(e) => return Err(e.into()),
    };
    let closed = curve.closed_form();
    let mut t = CsvTable::new(&["k", "s_k", "w_k", "s_closed_form"]);
    for (k, ((s, w), c)) in curve.s.iter().zip(&curve.w).zip(&closed).enumerate() {
        t.push_raw(vec![k.to_string(), fmt_f64(*s), fmt_f64(*w), fmt_f64(*c)]);
    }
    let mut out = t.into_string();
    if let Some(k) = blowup {
        out.push_str(&format!("# curve reached its ceiling at k={k}\n"));
    }
    if let Some(l1) = l1 {
        match first_crossing(&curve, l1) {
            Crossing::Crossed { k, gamma_slack } => {
                out.push_str(&format!("# K={k},gamma_slack={}\n", fmt_f64(gamma_slack)))
            }
            Crossing::NotCrossed => out.push_str("# K=none\n"),
        }
    }
    emit(&out)?;
    Ok(0)
}

fn cmd_variational(c: f64, grid: usize) -> Result<u8> {
    let sol = solve_variational(c, grid)?;
    let mut t = CsvTable::new(&["t", "w_star"]);
    for (tj, wj) in sol.t.iter().zip(&sol.w_star) {
        t.push_raw(vec![fmt_f64(*tj), fmt_f64(*wj)]);
    }
    let mut out = t.into_string();
    out.push_str(&format!("# value={}\n", fmt_f64(sol.value)));
    emit(&out)?;
    Ok(0)
}

fn budget_code(exhausted: usize, total: usize) -> u8 {
    if 2 * exhausted > total {
        EXIT_BUDGET
    } else {
        0
    }
}

fn cmd_offset(dist: &StepDistribution, b: u32, n: usize, seeds: &[u64], node_budget: u64) -> Result<u8> {
    let p = profile_of(dist, b)?;
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&s| exact_offset(&p.centered, &TreeRandomness::new(s, b as usize), n, node_budget))
        .collect();
    let mut t =
        CsvTable::new(&["seed", "n", "l_n", "l_n_over_cbrt_n", "nodes_explored", "budget_exhausted", "lower_bound"]);
    for r in &results {
        t.push_raw(vec![
            r.seed.to_string(),
            n.to_string(),
            fmt_f64(r.l_n),
            fmt_f64(r.l_n / (n.max(1) as f64).cbrt()),
            r.nodes_explored.to_string(),
            u8::from(r.budget_exhausted).to_string(),
            fmt_f64(r.lower_bound),
        ]);
    }
    emit(t.as_str())?;
    Ok(budget_code(results.iter().filter(|r| r.budget_exhausted).count(), results.len()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_count(
    dist: &StepDistribution,
    b: u32,
    n: usize,
    seeds: &[u64],
    barrier_l: f64,
    pop_budget: u64,
    windows: Option<(f64, usize)>,
) -> Result<u8> {
    let p = profile_of(dist, b)?;
    let curve = match windows {
        Some((delta, inv_eps)) => Some(match euler_curve(&p, barrier_l, delta, inv_eps) {
            Ok(c) => c,
            Err(BarrierError::CurveBlowup { k, .. }) => {
                bail!("barrier curve reaches its ceiling at k={k}; windows need l >= l0 = {}", p.l0)
            }
            Err(e) => return Err(e.into()),
        }),
        None => None,
    };
    let barrier = barrier_l * (n as f64).cbrt();
    let results = seeds
        .par_iter()
        .map(|&s| {
            let rand = TreeRandomness::new(s, b as usize);
            match &curve {
                Some(c) => count_windowed(&p.centered, &rand, n, c, barrier_l, pop_budget),
                None => Ok(count_below_barrier(&p.centered, &rand, n, barrier, pop_budget)),
            }
            .map(|r| (s, r))
        })
        .collect::<Result<Vec<_>, BrwError>>()?;
    let mut t = CsvTable::new(&["seed", "n", "barrier", "count", "truncated", "peak_population"]);
    for (s, r) in &results {
        t.push_raw(vec![
            s.to_string(),
            n.to_string(),
            fmt_f64(barrier),
            r.count.to_string(),
            u8::from(r.truncated).to_string(),
            r.peak_population.to_string(),
        ]);
    }
    emit(t.as_str())?;
    Ok(budget_code(results.iter().filter(|(_, r)| r.truncated).count(), results.len()))
}

fn cmd_tube(config: TubeStudyConfig) -> Result<u8> {
    let (_, csv) = run_tube_study(&config)?;
    emit(&csv)?;
    Ok(0)
}

fn cmd_study(path: &PathBuf) -> Result<u8> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = parse_config(&text)?;
    let out = run_convergence_study(&config)?;
    emit(&out.summary_csv)?;
    eprintln!(
        "wrote {} and {}",
        config.output_path.join("trials.csv").display(),
        config.output_path.join("summary.csv").display()
    );
    let exhausted = out.rows.iter().filter(|r| r.budget_exhausted).count();
    Ok(budget_code(exhausted, out.rows.len()))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Profile { dist, b } => cmd_profile(&dist, b),
        Command::Barrier { dist, b, l, delta, inv_eps, l1 } => cmd_barrier(&dist, b, l, delta, inv_eps, l1),
        Command::Variational { c, grid } => cmd_variational(c, grid),
        Command::Offset { dist, b, n, seeds, node_budget } => cmd_offset(&dist, b, n, &seeds.0, node_budget),
        Command::Count { dist, b, n, seeds, barrier_l, pop_budget, delta, inv_eps } => {
            cmd_count(&dist, b, n, &seeds.0, barrier_l, pop_budget, delta.zip(inv_eps))
        }
        Command::Tube { dist, b, tube, n, samples, seed } => {
            cmd_tube(TubeStudyConfig { dist, b, tube, n_grid: n, samples, seed })
        }
        Command::Study { config } => cmd_study(&config),
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    let assumption = |e: &LdError| match e {
        LdError::AssumptionViolated { .. } => EXIT_ASSUMPTION,
        LdError::InvalidArgument(_) => EXIT_CONFIG,
    };
    if let Some(e) = err.downcast_ref::<LdError>() {
        return assumption(e);
    }
    if let Some(e) = err.downcast_ref::<StudyError>() {
        return match e {
            StudyError::Assumption(ld) => assumption(ld),
            StudyError::Tube(_) | StudyError::Malformed(_) => EXIT_CONFIG,
            _ => 1,
        };
    }
    if err.is::<ConfigError>() || err.is::<DistError>() || err.is::<BarrierError>() || err.is::<BrwError>() {
        return EXIT_CONFIG;
    }
    if let Some(e) = err.downcast_ref::<MogulskiiError>() {
        return match e {
            MogulskiiError::ZeroHits { .. } => 1,
            _ => EXIT_CONFIG,
        };
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
