use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use multisample::bench::{
    cluster_samples, generate_trial, run_experiment, write_summary_json, write_trials_csv, Algorithm, ClusterParams,
    ExperimentConfig,
};
use multisample::data::{load_with_sidecar, save_dataset, save_sidecar, Sidecar};
use multisample::dsc::build_tree;
use multisample::theory::compute_gap;
use multisample::{Dataset, Error, Result, RngHandle};

/// Learn mixture models from two samples with different mixing weights.
#[derive(Debug, Parser)]
#[command(name = "multisample", version)]
struct Cli {
    /// Worker threads (default: one per core). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the two labelled samples of one synthetic trial as CSV.
    Gen(GenArgs),
    /// Run the synthetic benchmark and write per-trial CSV and a JSON summary.
    Run(RunArgs),
    /// Print the gap between two weight vectors as JSON.
    Gap(GapArgs),
    /// Cluster two CSV samples with one algorithm and write the assignments.
    Cluster(ClusterArgs),
}

/// Overrides applied on top of a config file or the defaults.
#[derive(Debug, Args)]
struct ExperimentArgs {
    /// JSON or TOML experiment config (`.toml` selects TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total dimension: the signal dimensions plus appended noise.
    #[arg(long)]
    dims: Option<usize>,
    /// Standard deviation of each noise coordinate.
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.dims {
            cfg = cfg.with_total_dims(d)?;
        }
        if let Some(s) = self.noise_sigma {
            cfg.noise_sigma = s;
        }
        if let Some(n) = self.points {
            cfg.points_per_sample = n;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Trial index to generate.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// Output directory; receives s1.csv, s2.csv, their sidecars and weights.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of kmeans,random_proj,pca_proj,msp,dsc.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    /// DSC stopping threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Output directory; receives trials.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GapArgs {
    /// First weight vector, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    phi1: Vec<f64>,
    /// Second weight vector, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    phi2: Vec<f64>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// First sample (CSV; an optional `<stem>.json` sidecar is read).
    #[arg(long)]
    s1: PathBuf,
    /// Second sample.
    #[arg(long)]
    s2: PathBuf,
    #[arg(long, default_value = "dsc")]
    algorithm: Algorithm,
    /// Number of clusters for the k-means based methods.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV of `sample,index,cluster` rows.
    #[arg(long)]
    out: PathBuf,
    /// Also write the DSC tree as JSON.
    #[arg(long)]
    tree: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run_bench(a),
        Command::Gap(a) => gap(a),
        Command::Cluster(a) => cluster(a),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let cfg = a.experiment.config()?;
    let trial = generate_trial(&cfg, a.trial)?;
    fs::create_dir_all(&a.out)?;
    for (name, d, labels) in [("s1", &trial.s1, &trial.labels1), ("s2", &trial.s2, &trial.labels2)] {
        let path = a.out.join(format!("{name}.csv"));
        save_dataset(&path, d)?;
        save_sidecar(
            &path,
            &Sidecar {
                sample_id: d.sample_id().to_string(),
                labels: Some(labels.clone()),
            },
        )?;
    }
    write_json(
        &a.out.join("weights.json"),
        &serde_json::json!({ "phi1": trial.phi1, "phi2": trial.phi2, "rng": trial.rng }),
    )?;
    println!("wrote {} and {} points to {}", trial.s1.len(), trial.s2.len(), a.out.display());
    Ok(())
}

fn run_bench(a: RunArgs) -> Result<()> {
    let mut cfg = a.experiment.config()?;
    if let Some(t) = a.trials {
        cfg.num_trials = t;
    }
    if let Some(algs) = a.algorithms {
        cfg.algorithms = algs;
    }
    if let Some(t) = a.tau {
        cfg.dsc.tau = t;
    }
    let report = run_experiment(&cfg)?;
    fs::create_dir_all(&a.out)?;
    write_trials_csv(a.out.join("trials.csv"), &report.trials)?;
    write_summary_json(a.out.join("summary.json"), &report.summary)?;
    println!("dims {} trials {}", report.summary.total_dims, report.summary.num_trials);
    for (alg, acc) in &report.summary.mean_accuracy {
        println!("  {alg:<12} mean accuracy {acc:.4}");
    }
    Ok(())
}

fn gap(a: GapArgs) -> Result<()> {
    let report = compute_gap(&a.phi1, &a.phi2)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let (s1, _) = load_with_sidecar(&a.s1)?;
    let (s2, _) = load_with_sidecar(&a.s2)?;
    let mut params = ClusterParams::new(a.k);
    if let Some(t) = a.tau {
        params.dsc.tau = t;
    }
    let pooled = Dataset::concat(&[&s1, &s2])?;
    let rng = RngHandle::new(a.seed, 0);
    let ids = match (a.algorithm, &a.tree) {
        (Algorithm::Dsc, Some(path)) => {
            let tree = build_tree(&s1, &s2, &params.dsc, rng)?;
            write_json(path, &tree)?;
            tree.assign_all(&pooled)?
        }
        (_, Some(_)) => return Err(Error::InvalidArgument("--tree requires --algorithm dsc".into())),
        (alg, None) => cluster_samples(&params, &s1, &s2, &pooled, alg, rng)?,
    };
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["sample", "index", "cluster"])?;
    for (i, id) in ids.iter().enumerate() {
        let (sample, idx) = if i < s1.len() { ("1", i) } else { ("2", i - s1.len()) };
        w.write_record([sample.to_string(), idx.to_string(), id.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
