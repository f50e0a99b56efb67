use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ordfactor::harness::{fit_dataset, format_tables, run_study_with, StudyPlan};
use ordfactor::io::{
    category_table, load_toml, read_dataset, write_dataset, write_draws, write_json, write_prior_draws, write_study, write_summary,
    MomentTargets, PriorPredictConfig, Provenance, RunConfig,
};
use ordfactor::priors::{solve_informative_sequential, PriorConfig, ThresholdPriorConfig};
use ordfactor::sampler::SamplerConfig;
use ordfactor::simgen::{generate_dataset, SimCondition};
use ordfactor::Error;

/// Bayesian item factor analysis for ordered-categorical indicators.
#[derive(Debug, Parser)]
#[command(name = "ordfactor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one dataset from a condition file; writes data.csv, truth.json
    /// and a fit.toml that fits it with the default priors.
    Simulate {
        #[arg(long)]
        condition: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model described by a run config.
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a Monte Carlo study plan.
    McStudy {
        #[arg(long)]
        plan: PathBuf,
        /// Results directory; defaults to `study-out` next to the plan.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample realized threshold priors.
    PriorPredict {
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        draws: usize,
        /// Output CSV; defaults to `prior-draws.csv` next to the prior file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for sequential-prior hyperparameters matching target moments.
    PriorSolve {
        #[arg(long)]
        targets: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Sampler(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> ordfactor::Result<()> {
    match command {
        Command::Simulate { condition, out } => simulate(&condition, &out),
        Command::Fit { config } => fit(&config),
        Command::McStudy { plan, out } => {
            let out = out.unwrap_or_else(|| sibling(&plan, "study-out"));
            mc_study(&plan, &out)
        }
        Command::PriorPredict { prior, draws, out } => {
            let out = out.unwrap_or_else(|| sibling(&prior, "prior-draws.csv"));
            prior_predict(&prior, draws, &out)
        }
        Command::PriorSolve { targets } => prior_solve(&targets),
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new("")).join(name)
}

fn simulate(condition: &Path, out: &Path) -> ordfactor::Result<()> {
    let (cond, bytes): (SimCondition, _) = load_toml(condition)?;
    cond.validate()?;
    let pop = cond.population()?;
    let spec = pop.model_spec()?;
    let data = generate_dataset(&pop, cond.n_respondents, cond.seed)?;
    let prov = Provenance::new(&bytes, cond.seed);
    write_dataset(&out.join("data.csv"), &spec, &data, &prov)?;
    write_json(&out.join("truth.json"), &pop.truth())?;
    let run = RunConfig {
        data: Some("data.csv".into()),
        groups: Vec::new(),
        output: "fit".into(),
        seed: Some(cond.seed),
        model: spec.clone(),
        priors: PriorConfig::new(ThresholdPriorConfig::joint()),
        sampler: SamplerConfig::default(),
    };
    let path = out.join("fit.toml");
    std::fs::write(&path, run.to_toml()?).map_err(|e| Error::Io { path, source: e })?;
    print!("{}", category_table(&spec, &data));
    println!("wrote {}", out.display());
    Ok(())
}

fn fit(config: &Path) -> ordfactor::Result<()> {
    let (cfg, bytes) = RunConfig::load(config)?;
    let sampler = cfg.sampler();
    let prov = Provenance::new(&bytes, sampler.seed);
    for job in cfg.jobs() {
        let data = read_dataset(&job.data, &cfg.model)?;
        let dir = match &job.group {
            Some(g) => {
                println!("group {g}");
                cfg.output.join(g)
            }
            None => cfg.output.clone(),
        };
        print!("{}", category_table(&cfg.model, &data));
        for i in data.degenerate_items() {
            eprintln!(
                "warning: item `{}` has a single observed category; its thresholds are driven by the prior",
                cfg.model.items[i].item_id
            );
        }
        let fit = fit_dataset(&cfg.model, &data, &job.priors, &sampler)?;
        write_draws(&dir.join("draws.csv"), &fit.draws, &prov)?;
        write_summary(&dir.join("summary.csv"), &fit.summaries, &prov)?;
        let unconverged = fit.summaries.iter().filter(|s| !s.converged()).count();
        println!(
            "{} draws, {} divergent transitions, {} of {} parameters with R-hat >= 1.1 or undefined",
            fit.draws.n_draws() * fit.draws.n_chains(),
            fit.draws.n_divergent(),
            unconverged,
            fit.summaries.len()
        );
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn mc_study(plan_path: &Path, out: &Path) -> ordfactor::Result<()> {
    let (plan, bytes): (StudyPlan, _) = load_toml(plan_path)?;
    plan.validate()?;
    let total = plan.cells.len() * plan.replications * plan.priors.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results = run_study_with(&plan, &|f| {
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        let status = if f.completed { "ok".to_string() } else { format!("skipped: {}", f.message) };
        eprintln!("[{k}/{total}] cell {} rep {} {}: {status}", f.cell + 1, f.replication + 1, f.prior);
    })?;
    write_study(out, &results, &Provenance::new(&bytes, plan.base_seed))?;
    print!("{}", format_tables(&results));
    println!("wrote {}", out.display());
    Ok(())
}

fn prior_predict(prior: &Path, draws: usize, out: &Path) -> ordfactor::Result<()> {
    let (cfg, bytes): (PriorPredictConfig, _) = load_toml(prior)?;
    let rows = cfg.sample(draws)?;
    let k = cfg.n_categories - 1;
    write_prior_draws(out, k, &rows, &Provenance::new(&bytes, cfg.seed))?;
    print!("{:20}", "prior");
    for c in 1..=k {
        print!(" {:>12}", format!("E[tau_{c}]"));
    }
    println!();
    for spec in &cfg.priors {
        let mine: Vec<&Vec<f64>> = rows.iter().filter(|(l, _)| *l == spec.label).map(|(_, t)| t).collect();
        print!("{:20}", spec.label);
        for c in 0..k {
            let mean = mine.iter().map(|t| t[c]).sum::<f64>() / mine.len().max(1) as f64;
            print!(" {mean:>12.4}");
        }
        println!();
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn prior_solve(targets: &Path) -> ordfactor::Result<()> {
    let (t, _): (MomentTargets, _) = load_toml(targets)?;
    let prior = solve_informative_sequential(&t.mean, &t.variance)?;
    println!("{:>9} {:>10} {:>10}  prior", "component", "mean", "variance");
    for (c, (m, v)) in prior.mu_star.iter().zip(prior.variance()).enumerate() {
        println!("{:>9} {m:>10.4} {v:>10.4}  Normal({m:.2}, {v:.2})", c + 1);
    }
    Ok(())
}
