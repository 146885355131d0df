//! `gunet`: train, evaluate, ablate and verify Graph U-Nets.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config
//! error, 3 runtime abort.

mod settings;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use gunet::demo::{pool_fixture, run_fixture, run_pool_demo, FIXTURE_NAMES};
use gunet::training::{
    evaluate, fit_config_to, format_ablation, format_results, format_sweep, run_ablations, run_depth_sweep, train_runs,
    write_loss_curve,
};
use gunet::verify::{run_gradcheck, GradcheckOptions, DEFAULT_EPS};
use gunet::{Dataset, GraphUNet, LoadOptions, SplitSizes, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use settings::{ModelArgs, Settings};

#[derive(Parser, Debug)]
#[command(name = "gunet", version, about = "Graph U-Nets for node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model per seed; writes results, loss curves and checkpoints.
    Train(ModelArgs),
    /// Report accuracy of a saved checkpoint on every split.
    Eval {
        #[command(flatten)]
        args: ModelArgs,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Compare the full model with its no-pool and no-augmentation variants.
    Ablate(ModelArgs),
    /// Train at several depths.
    DepthSweep {
        #[command(flatten)]
        args: ModelArgs,
        #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "2,3,4,5")]
        depths: Vec<usize>,
    },
    /// Finite-difference check of every layer and a depth-2 model.
    Gradcheck {
        #[arg(long, value_name = "E", default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "0,1,2")]
        seed: Vec<u64>,
        #[arg(long, hide = true, value_name = "OP")]
        corrupt_backward: Option<String>,
    },
    /// Print every step of one gPool / gUnpool round trip.
    PoolDemo {
        /// Built-in graph: fig1, fig2 or path.
        #[arg(long, default_value = "fig1", conflicts_with = "dataset_content")]
        fixture: String,
        #[arg(long, value_name = "PATH", requires = "dataset_cites")]
        dataset_content: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dataset_cites: Option<PathBuf>,
        /// Nodes kept when pooling a dataset file.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Seed for the projection vector of a dataset file.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Verification(String),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "error: {e:#}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Runtime(e) => write!(f, "aborted: {e:#}"),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Train(args) => cmd_train(&args),
        Command::Eval { args, checkpoint } => cmd_eval(&args, &checkpoint),
        Command::Ablate(args) => cmd_ablate(&args),
        Command::DepthSweep { args, depths } => cmd_depth_sweep(&args, &depths),
        Command::Gradcheck {
            eps,
            seed,
            corrupt_backward,
        } => cmd_gradcheck(eps, seed, corrupt_backward),
        Command::PoolDemo {
            fixture,
            dataset_content,
            dataset_cites,
            k,
            seed,
        } => cmd_pool_demo(&fixture, dataset_content.as_deref().zip(dataset_cites.as_deref()), k, seed),
    }
}

fn load_dataset(content: Option<&Path>, cites: Option<&Path>, split: SplitSizes) -> CliResult<Dataset> {
    let content = content.ok_or_else(|| usage(anyhow!("missing --dataset-content")))?;
    let cites = cites.ok_or_else(|| usage(anyhow!("missing --dataset-cites")))?;
    for p in [content, cites] {
        if !p.is_file() {
            return Err(usage(anyhow!("dataset file not found: {}", p.display())));
        }
    }
    let opts = LoadOptions {
        split,
        ..Default::default()
    };
    let ds = Dataset::load_with(content, cites, opts).map_err(usage)?;
    for (name, mask) in [("training", &ds.train_mask), ("validation", &ds.val_mask), ("test", &ds.test_mask)] {
        if !mask.iter().any(|&m| m) {
            return Err(usage(anyhow!("the {name} split is empty; adjust the split sizes")));
        }
    }
    Ok(ds)
}

/// Resolved settings with the loaded dataset and a model config sized to it.
fn prepare(args: &ModelArgs) -> CliResult<(Settings, Dataset)> {
    let mut s = args.resolve().map_err(usage)?;
    let ds = load_dataset(s.dataset_content.as_deref(), s.dataset_cites.as_deref(), s.split)?;
    s.model = fit_config_to(&s.model, &ds);
    s.model.validate().map_err(usage)?;
    Ok((s, ds))
}

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(usage)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime)
}

fn cmd_train(args: &ModelArgs) -> CliResult<()> {
    let (s, ds) = prepare(args)?;
    create_out(&s.out)?;
    let runs = train_runs(&ds, &s.model, &s.train, &s.seeds).map_err(runtime)?;
    for run in &runs {
        let seed = run.result.seed;
        write_loss_curve(&s.out.join(format!("loss_seed{seed}.csv")), &run.result).map_err(runtime)?;
        run.model
            .save_checkpoint(&s.out.join(format!("checkpoint_seed{seed}.bin")))
            .map_err(runtime)?;
    }
    let results: Vec<_> = runs.into_iter().map(|r| r.result).collect();
    let text = format_results(&results);
    write_text(&s.out.join("results.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_eval(args: &ModelArgs, checkpoint: &Path) -> CliResult<()> {
    let (s, ds) = prepare(args)?;
    if !checkpoint.is_file() {
        return Err(usage(anyhow!("checkpoint not found: {}", checkpoint.display())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = GraphUNet::build(&s.model, &mut rng).map_err(usage)?;
    model.load_checkpoint(checkpoint).map_err(usage)?;
    let mut line = Vec::new();
    for (name, mask) in [("train_acc", &ds.train_mask), ("val_acc", &ds.val_mask), ("test_acc", &ds.test_mask)] {
        let acc = evaluate(&model, &ds, mask).map_err(runtime)?;
        line.push(format!("{name}={acc:.6}"));
    }
    println!("{}", line.join(" "));
    Ok(())
}

fn cmd_ablate(args: &ModelArgs) -> CliResult<()> {
    let (s, ds) = prepare(args)?;
    create_out(&s.out)?;
    let rows = run_ablations(&ds, &s.model, &s.train, &s.seeds).map_err(runtime)?;
    let text = format_ablation(&rows);
    write_text(&s.out.join("ablation.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_depth_sweep(args: &ModelArgs, depths: &[usize]) -> CliResult<()> {
    let (s, ds) = prepare(args)?;
    if depths.is_empty() || depths.contains(&0) {
        return Err(usage(anyhow!("--depths must list positive depths")));
    }
    create_out(&s.out)?;
    let rows = run_depth_sweep(&ds, depths, &s.model, &s.train, &s.seeds).map_err(runtime)?;
    let text = format_sweep(&rows);
    write_text(&s.out.join("depth_sweep.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_gradcheck(eps: f64, seeds: Vec<u64>, corrupt: Option<String>) -> CliResult<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(usage(anyhow!("--eps must be positive")));
    }
    let opts = GradcheckOptions {
        eps,
        seeds,
        fault: corrupt.map(|op| &*Box::leak(op.into_boxed_str())),
        ..Default::default()
    };
    let report = run_gradcheck(&opts).map_err(runtime)?;
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        Err(Failure::Verification(names.join(", ")))
    }
}

fn cmd_pool_demo(fixture: &str, files: Option<(&Path, &Path)>, k: usize, seed: u64) -> CliResult<()> {
    let demo = match files {
        Some((content, cites)) => {
            let ds = Dataset::load(content, cites).map_err(usage)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = Tensor::glorot_uniform(ds.num_features(), 1, &mut rng);
            let name = content.display().to_string();
            run_pool_demo(&name, &ds.adjacency, &ds.features, &p, k.min(ds.num_nodes())).map_err(usage)?
        }
        None => {
            let f = pool_fixture(fixture)
                .ok_or_else(|| usage(anyhow!("unknown fixture `{fixture}` (expected one of {})", FIXTURE_NAMES.join(", "))))?;
            run_fixture(&f).map_err(runtime)?
        }
    };
    println!("{demo}");
    Ok(())
}
