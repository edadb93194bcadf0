use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use xsub::attack::{build_golden_cache, GoldenCache};
use xsub::data::write_netpbm;
use xsub::defense::{detection_rate, score, DetectionResult};
use xsub::model::Classifier;

use xsub_cli::config::RunConfig;
use xsub_cli::error::CliError;
use xsub_cli::experiment::{
    attack_config, cells, load_split, run_adversarial_cell, run_backdoor_cell, SeedContext,
};
use xsub_cli::plot::emit_plot_data;
use xsub_cli::sweep::{append_csv, run_sweep};

#[derive(Parser)]
#[command(
    name = "xsub",
    version,
    about = "Explanation-driven feature-substitution attacks on black-box classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (line-oriented `key = value`).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to $XSUB_OUT, then ./xsub-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep cells.
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Run with this single seed instead of the configured list.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the clean classifier and write model.bin.
    Train(Common),
    /// Build and persist the per-class golden cache.
    Golden(Common),
    /// Run the adversarial grid for one seed; write outcome summaries.
    Attack(Common),
    /// Poison the training set, retrain, and evaluate the backdoored model.
    Backdoor(Common),
    /// Calibrate the activation defense and score perturbed samples.
    Defend(Common),
    /// Run the full grid over all seeds, appending to results.csv.
    Sweep(Common),
    /// Export original/perturbed samples as PGM/PPM images.
    ExportImages(Common),
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Train(c) => cmd_train(c),
        Command::Golden(c) => cmd_golden(c),
        Command::Attack(c) => cmd_attack(c),
        Command::Backdoor(c) => cmd_backdoor(c),
        Command::Defend(c) => cmd_defend(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::ExportImages(c) => cmd_export_images(c),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| CliError::File(format!("{}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = common.seed_override {
        cfg.sweep.seeds = vec![seed];
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<PathBuf, CliError> {
    let dir = common
        .out
        .clone()
        .or_else(|| env::var_os("XSUB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("xsub-out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_model(path: &Path) -> Result<Classifier, CliError> {
    Classifier::load(path).map_err(|e| CliError::File(format!("{}: {e}", path.display())))
}

/// Context for the one-shot subcommands: dataset from config, model from the
/// checkpoint, golden cache loaded or rebuilt on the spot.
fn loaded_context(cfg: &RunConfig, dir: &Path) -> Result<SeedContext, CliError> {
    let seed = cfg.sweep.seeds[0];
    let (train_set, test_set) = load_split(cfg, seed)?;
    let model = load_model(&dir.join("model.bin"))?;
    let clean_accuracy = xsub::attack::accuracy(&model, &test_set.samples)?;
    let explainer = xsub::explainer::Explainer::new(
        xsub::explainer::ExplainerConfig {
            mode: cfg.explainer.mode,
            coalitions: cfg.explainer.coalitions,
            seed,
        },
        xsub::explainer::Background::from_dataset(&train_set, cfg.explainer.background, seed)?,
    );
    let cache_path = dir.join("golden_cache.json");
    let cache = if cache_path.exists() {
        GoldenCache::load(&cache_path)?
    } else {
        // missing cache: rebuild offline and persist before attacking
        let first = cells(cfg)[0];
        let cache = build_golden_cache(&model, &explainer, &test_set, &attack_config(cfg, &first, seed))?;
        cache.save(&cache_path)?;
        cache
    };
    let reference = if cfg.defense.enabled {
        let cap = cfg.defense.calibration_size.min(train_set.len());
        Some(xsub::defense::calibrate(&model, &train_set.samples[..cap])?)
    } else {
        None
    };
    Ok(SeedContext {
        seed,
        train_set,
        test_set,
        model,
        clean_accuracy,
        explainer,
        cache,
        reference,
    })
}

fn cmd_train(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let dir = out_dir(common)?;
    let seed = cfg.sweep.seeds[0];
    let (train_set, test_set) = load_split(&cfg, seed)?;
    let model = xsub::model::train(&train_set, &xsub_cli::experiment::train_config(&cfg, seed))?;
    let acc = xsub::attack::accuracy(&model, &test_set.samples)?;
    let path = dir.join("model.bin");
    model.save(&path)?;
    println!(
        "trained on {} samples (seed {seed}): test accuracy {acc:.4} -> {}",
        train_set.len(),
        path.display()
    );
    Ok(())
}

fn cmd_golden(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let dir = out_dir(common)?;
    let seed = cfg.sweep.seeds[0];
    let (train_set, test_set) = load_split(&cfg, seed)?;
    let model = load_model(&dir.join("model.bin"))?;
    let explainer = xsub::explainer::Explainer::new(
        xsub::explainer::ExplainerConfig {
            mode: cfg.explainer.mode,
            coalitions: cfg.explainer.coalitions,
            seed,
        },
        xsub::explainer::Background::from_dataset(&train_set, cfg.explainer.background, seed)?,
    );
    let first = cells(&cfg)[0];
    let cache = build_golden_cache(&model, &explainer, &test_set, &attack_config(&cfg, &first, seed))?;
    let path = dir.join("golden_cache.json");
    cache.save(&path)?;
    println!(
        "golden cache: {} classes, {} warnings (offline queries: {} predicts, {} explains) -> {}",
        cache.entries.len(),
        cache.warnings.len(),
        cache.offline_predicts,
        cache.offline_explains,
        path.display()
    );
    for w in &cache.warnings {
        println!("  warning: {w}");
    }
    Ok(())
}

#[derive(Serialize)]
struct CellSummary {
    alpha: f64,
    beta: f64,
    k: usize,
    mode: String,
    victims: usize,
    attack_sr: f64,
    detection_rate: Option<f64>,
    queries_predict: u64,
    queries_explain: u64,
    succeeded_samples: Vec<usize>,
}

fn cmd_attack(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let dir = out_dir(common)?;
    let ctx = loaded_context(&cfg, &dir)?;
    let mut summaries = Vec::new();
    for cell in cells(&cfg) {
        let (record, outcomes) = run_adversarial_cell(&ctx, &cfg, &cell)?;
        println!(
            "attack a={} b={} k={} {}: SR {:.4} over {} victims (2 predicts + 1 explain each)",
            cell.alpha,
            cell.beta,
            cell.k,
            cell.mode.as_str(),
            record.attack_sr,
            outcomes.len()
        );
        summaries.push(CellSummary {
            alpha: cell.alpha,
            beta: cell.beta,
            k: cell.k,
            mode: cell.mode.as_str().to_string(),
            victims: outcomes.len(),
            attack_sr: record.attack_sr,
            detection_rate: record.detection_rate,
            queries_predict: record.queries_predict,
            queries_explain: record.queries_explain,
            succeeded_samples: outcomes
                .iter()
                .filter(|o| o.success)
                .map(|o| o.sample_index)
                .collect(),
        });
    }
    let path = dir.join("outcomes.json");
    fs::write(&path, serde_json::to_string_pretty(&summaries).expect("serializes"))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_backdoor(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let dir = out_dir(common)?;
    let ctx = loaded_context(&cfg, &dir)?;
    let cell = cells(&cfg)[0];
    let (record, outcome) = run_backdoor_cell(&ctx, &cfg, &cell)?;
    let path = dir.join("backdoor_model.bin");
    outcome.model.save(&path)?;
    println!(
        "backdoor a={} b={} k={} p={}: poisoned {} of {} train samples",
        cell.alpha,
        cell.beta,
        cell.k,
        cfg.attack.poison_fraction,
        outcome.poisoned.poisoned_count(),
        ctx.train_set.len()
    );
    println!(
        "  clean accuracy {:.4} (clean model {:.4}), trigger SR {:.4} -> {}",
        record.accuracy,
        ctx.clean_accuracy,
        record.attack_sr,
        path.display()
    );
    Ok(())
}

fn cmd_defend(common: &Common) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    cfg.defense.enabled = true;
    let dir = out_dir(common)?;
    let ctx = loaded_context(&cfg, &dir)?;
    let reference = ctx.reference.as_ref().expect("defense enabled");
    let ref_path = dir.join("defense_reference.json");
    reference.save(&ref_path)?;

    let calibration: Vec<DetectionResult> = ctx
        .train_set
        .samples
        .iter()
        .take(cfg.defense.calibration_size.min(ctx.train_set.len()))
        .enumerate()
        .map(|(i, s)| score(reference, &ctx.model, &s.data, i))
        .collect::<xsub::Result<_>>()?;
    let false_flags = detection_rate(&calibration)?;

    let cell = cells(&cfg)[0];
    let (record, outcomes) = run_adversarial_cell(&ctx, &cfg, &cell)?;
    println!(
        "defense threshold {:.4} (99th percentile of {} clean scores), calibration false-flag rate {:.4}",
        reference.threshold,
        reference.calibration_size,
        false_flags
    );
    println!(
        "  detection rate at a={} b={} k={} {}: {:.4} over {} perturbed samples -> {}",
        cell.alpha,
        cell.beta,
        cell.k,
        cell.mode.as_str(),
        record.detection_rate.unwrap_or(0.0),
        outcomes.len(),
        ref_path.display()
    );
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let dir = out_dir(common)?;
    let records = run_sweep(&cfg, common.workers)?;
    let csv_path = dir.join("results.csv");
    append_csv(&csv_path, &records)?;
    let plots = emit_plot_data(&csv_path, &dir)?;
    println!(
        "sweep: {} cells ({} seeds x {} grid points) -> {}",
        records.len(),
        cfg.sweep.seeds.len(),
        cells(&cfg).len(),
        csv_path.display()
    );
    for p in plots {
        println!("  plot series: {}", p.display());
    }
    Ok(())
}

fn cmd_export_images(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let dir = out_dir(common)?;
    let ctx = loaded_context(&cfg, &dir)?;
    let image_dir = dir.join("images");
    fs::create_dir_all(&image_dir)?;
    let cell = cells(&cfg)[0];
    let (_, outcomes) = run_adversarial_cell(&ctx, &cfg, &cell)?;
    let channels = ctx.test_set.descriptor.channels();
    let ext = if channels == 3 { "ppm" } else { "pgm" };
    let mut written = 0usize;
    for o in outcomes.iter().take(8) {
        let orig = image_dir.join(format!("sample{}_orig.{ext}", o.sample_index));
        let pert = image_dir.join(format!(
            "sample{}_a{}_b{}_k{}_{}.{ext}",
            o.sample_index,
            cell.alpha,
            cell.beta,
            cell.k,
            cell.mode.as_str()
        ));
        write_netpbm(&o.original.data, &ctx.test_set.descriptor, &orig)?;
        write_netpbm(&o.perturbed, &ctx.test_set.descriptor, &pert)?;
        written += 2;
    }
    println!("wrote {written} images to {}", image_dir.display());
    Ok(())
}
