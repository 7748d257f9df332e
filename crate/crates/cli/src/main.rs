use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use susketch_core::corpus::{build_corpus, read_corpus, split_dataset, GeneratorParams};
use susketch_core::maps::load_predefined;
use susketch_core::metrics::GameplayMetrics;
use susketch_core::suggest::{suggest_class_pairs, suggest_powerups, SuggestMethod, SuggestOptions};
use susketch_core::surrogate::{
    evaluate_mean_baseline, evaluate_model, predict, save_model, train_model, Dataset, EvalReport, ModelConfig,
    ModelSet, SurrogateModel, Target,
};
use susketch_core::sweep::{fixture_levels, run_sweep};
use susketch_core::{extract_metrics, is_valid_match, simulate_match, ClassKind, ClassPair, LevelDocument};
use susketch_service::{serve, spawn_snapshotter, AppState, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "susketch",
    version,
    about = "Shooter level sketching with surrogate gameplay models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate matches on random levels and write a training corpus.
    Corpus {
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        wall_density: f64,
        #[arg(long, default_value_t = 2)]
        platforms: usize,
        #[arg(long, default_value_t = 8)]
        powerups: usize,
    },
    /// Train surrogate models on a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Targets to train (kr, duration, dh, da, cp); all when omitted.
        #[arg(long = "target")]
        targets: Vec<Target>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
    },
    /// Score trained models on the held-out side of a corpus.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
    },
    /// Predict gameplay for a level.
    Predict {
        /// Level file, or `map:NAME` for a shipped map.
        level: String,
        #[arg(long)]
        models: PathBuf,
    },
    /// Suggest a class pair or a powerup layout.
    Suggest {
        level: String,
        #[arg(long)]
        models: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::Replacement)]
        kind: Kind,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the suggested level here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Budget sweep of both powerup methods over generated levels.
    Sweep {
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value_t = 20)]
        levels: usize,
        #[arg(long, default_value_t = 50)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "Scout")]
        class1: ClassKind,
        #[arg(long, default_value = "Heavy")]
        class2: ClassKind,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the session server.
    Serve {
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        snapshot_secs: u64,
    },
    /// Simulate matches on a level.
    Simulate {
        level: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Print every trace instead of a summary.
        #[arg(long)]
        traces: bool,
    },
    /// Check a level's playability.
    Validate { level: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Classes,
    Replacement,
    Adjustment,
}

fn read_level(source: &str) -> Result<LevelDocument> {
    if let Some(name) = source.strip_prefix("map:") {
        return Ok(load_predefined(name)?);
    }
    let text = fs::read_to_string(source).with_context(|| format!("reading {source}"))?;
    LevelDocument::parse(&text).with_context(|| format!("parsing {source}"))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_models(dir: &Path) -> Result<ModelSet> {
    ModelSet::load_dir(dir).with_context(|| format!("loading models from {}", dir.display()))
}

fn load_dataset(path: &Path) -> Result<Vec<susketch_core::corpus::CorpusRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_corpus(BufReader::new(file))?.records)
}

fn report_line(target: Target, model: &EvalReport, baseline: &EvalReport) {
    println!(
        "{target:<9} MAE {:.4} (mean baseline {:.4})  R² {:.4}",
        model.mean_mae, baseline.mean_mae, model.mean_r2
    );
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Corpus {
            n,
            seed,
            out,
            wall_density,
            platforms,
            powerups,
        } => {
            let params = GeneratorParams {
                wall_density,
                platform_count: platforms,
                powerup_count: powerups,
            };
            let started = Instant::now();
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            build_corpus(n, seed, &params, &mut w, |done| info!("{done}/{n} records"))?;
            w.flush()?;
            info!("wrote {} in {:.1?}", out.display(), started.elapsed());
        }
        Command::Train {
            corpus,
            out_dir,
            targets,
            epochs,
            seed,
            split_seed,
            holdout,
        } => {
            let records = load_dataset(&corpus)?;
            let split = split_dataset(records.len(), holdout, split_seed)?;
            fs::create_dir_all(&out_dir)?;
            let targets = if targets.is_empty() {
                Target::ALL.to_vec()
            } else {
                targets
            };
            for target in targets {
                let data = Dataset::from_records(&records, target)?;
                let mut config = ModelConfig::preset(target);
                config.seed = seed;
                if let Some(e) = epochs {
                    config.epochs = e;
                }
                let mut model = SurrogateModel::new(config, target)?;
                let curve = train_model(&mut model, &data, &split, |s| {
                    info!(
                        "{target} epoch {} train {:.5} test {:.5} lr {}",
                        s.epoch,
                        s.train_loss,
                        s.validation_loss.unwrap_or(f64::NAN),
                        s.learning_rate
                    )
                })?;
                save_model(&model, &out_dir.join(format!("{}.json", target.name())))?;
                fs::write(
                    out_dir.join(format!("{}.curve.json", target.name())),
                    serde_json::to_string_pretty(&curve)?,
                )?;
                if !split.test.is_empty() {
                    let report = evaluate_model(&model, &data, &split.test)?;
                    let baseline = evaluate_mean_baseline(&data, &split.train, &split.test)?;
                    report_line(target, &report, &baseline);
                }
            }
        }
        Command::Evaluate {
            corpus,
            models,
            split_seed,
            holdout,
        } => {
            let records = load_dataset(&corpus)?;
            let split = split_dataset(records.len(), holdout, split_seed)?;
            let set = load_models(&models)?;
            let mut scored = 0;
            for target in Target::ALL {
                let Some(model) = set.get(target) else {
                    continue;
                };
                let data = Dataset::from_records(&records, target)?;
                let model_report = evaluate_model(model, &data, &split.test)?;
                let baseline = evaluate_mean_baseline(&data, &split.train, &split.test)?;
                report_line(target, &model_report, &baseline);
                scored += 1;
            }
            if scored == 0 {
                bail!("no models found in {}", models.display());
            }
        }
        Command::Predict { level, models } => {
            let doc = read_level(&level)?;
            let set = load_models(&models)?;
            let (a, b) = (doc.classes.class1.preset(), doc.classes.class2.preset());
            print_json(&predict(&set, &doc.level, &a, &b)?)?;
        }
        Command::Suggest {
            level,
            models,
            kind,
            k,
            seed,
            out,
        } => {
            let doc = read_level(&level)?;
            let set = load_models(&models)?;
            let model = set.require(Target::KillRatio)?;
            let method = match kind {
                Kind::Classes => {
                    print_json(&suggest_class_pairs(model, &doc.level, doc.classes)?)?;
                    return Ok(());
                }
                Kind::Replacement => SuggestMethod::Replacement,
                Kind::Adjustment => SuggestMethod::Adjustment,
            };
            let opts = SuggestOptions {
                k,
                seed,
                ..Default::default()
            };
            let s = suggest_powerups(model, &doc.level, doc.classes, method, &opts, &|| false)?;
            if let Some(path) = out {
                fs::write(&path, LevelDocument::new(s.level.clone(), doc.classes).serialize())?;
            }
            println!(
                "{method:?}: KR {:.3}, f {:.3} (was {:.3}, {:+.1}%), powerups {:+} H {:+} A {:+} D",
                s.predicted_kr,
                s.fitness,
                s.seed_fitness,
                s.improvement_pct,
                s.powerup_deltas.health,
                s.powerup_deltas.armor,
                s.powerup_deltas.damage
            );
        }
        Command::Sweep {
            models,
            levels,
            k_max,
            seed,
            class1,
            class2,
            out_dir,
        } => {
            let set = load_models(&models)?;
            let model = set.require(Target::KillRatio)?;
            let fixtures = fixture_levels(levels, seed);
            let result = run_sweep(model, &fixtures, ClassPair::new(class1, class2), k_max, seed)?;
            fs::create_dir_all(&out_dir)?;
            fs::write(out_dir.join("sweep.csv"), result.to_csv())?;
            fs::write(out_dir.join("sweep.svg"), result.to_svg())?;
            println!("seed mean f {:.4}", result.seed_mean);
            for s in &result.series {
                if let Some(p) = s.points.iter().find(|p| p.k == 10.min(k_max)) {
                    println!(
                        "{:?} k={} mean f {:.4} [{:.4}, {:.4}]",
                        s.method, p.k, p.mean, p.ci_low, p.ci_high
                    );
                }
            }
        }
        Command::Serve {
            models,
            addr,
            snapshot_dir,
            snapshot_secs,
        } => {
            let set = load_models(&models)?;
            if !set.is_complete() {
                log::warn!("not every model is loaded; /predict will answer 503");
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let state = AppState::new(set, ServiceConfig { snapshot_dir });
                spawn_snapshotter(state.clone(), Duration::from_secs(snapshot_secs.max(1)));
                serve(state, addr).await
            })?;
        }
        Command::Simulate {
            level,
            seed,
            runs,
            traces,
        } => {
            let doc = read_level(&level)?;
            let (a, b) = (doc.classes.class1.preset(), doc.classes.class2.preset());
            let mut valid = 0;
            let mut kr = 0.0;
            for i in 0..runs {
                let trace = simulate_match(&doc.level, &a, &b, seed + i)?;
                if traces {
                    println!("{}", serde_json::to_string(&trace)?);
                }
                if is_valid_match(&trace) {
                    valid += 1;
                }
                let m: GameplayMetrics = extract_metrics(&trace);
                kr += m.kill_ratio;
            }
            if !traces {
                println!("{runs} matches, {valid} valid, mean KR {:.4}", kr / runs.max(1) as f64);
            }
        }
        Command::Validate { level } => {
            let doc = read_level(&level)?;
            let report = doc.level.validate();
            print_json(&report)?;
            if !report.playable {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
