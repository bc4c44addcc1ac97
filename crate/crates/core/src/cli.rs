//! Command-line front end. Configuration resolves as defaults, then an
//! optional TOML file, then flags; the resolved result is written into the
//! output directory before any work starts.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{make_folds, scan_corpus, synth_corpus, Manifest, SynthSpec};
use crate::error::{LidError, Result};
use crate::features::FeatureCache;
use crate::hpo::{read_trials, report_search, run_search, ManifestFeatures, SearchOptions, SearchSpace, TRIALS_LOG};
use crate::models::{ArchConfig, Model};
use crate::train::{cross_validate, load_features, load_report, write_run, TrainConfig, REPORT_JSON};

pub const CACHE_ENV: &str = "LIDF_CACHE_DIR";
pub const RESOLVED_CONFIG: &str = "config.toml";
pub const SEARCH_SPACE: &str = "space.toml";
pub const SEARCH_SUMMARY_CSV: &str = "summary.csv";
pub const SEARCH_SUMMARY_TXT: &str = "summary.txt";
/// Clips per language in the full-size protocol.
pub const FULL_CLIPS_PER_LANGUAGE: usize = 1500;

#[derive(Debug, Parser)]
#[command(name = "lidf", version, about = "Spoken language identification toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchId {
    #[value(name = "1d")]
    Conv1d,
    #[value(name = "2d")]
    Conv2d,
    #[value(name = "2d-attn-gru")]
    AttnGru,
}

impl ArchId {
    pub fn as_str(self) -> &'static str {
        match self {
            ArchId::Conv1d => "1d",
            ArchId::Conv2d => "2d",
            ArchId::AttnGru => "2d-attn-gru",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a manifest from a tree of per-language WAV directories.
    Scan {
        #[arg(long)]
        root: PathBuf,
        /// Comma-separated language directories; all subdirectories if omitted.
        #[arg(long, value_delimiter = ',')]
        languages: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic multi-class corpus and its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        classes: usize,
        #[arg(long, default_value_t = 40)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extract and cache log-Mel images for every manifest entry.
    Featurize {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cross-validated training.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        arch: Option<ArchId>,
        /// Enable mixup.
        #[arg(long)]
        mixup: bool,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Full-size protocol: 5 folds, preset architecture, and a check that
        /// every language has 1500 clips.
        #[arg(long)]
        full: bool,
    },
    /// Random hyperparameter search on one fold.
    Search {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// TOML search space; the architecture's default space if omitted.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long, value_enum)]
        arch: Option<ArchId>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Epochs per trial.
        #[arg(long, default_value_t = crate::hpo::DEFAULT_TRIAL_EPOCHS)]
        epochs: usize,
        /// Force a divergent learning rate onto this trial.
        #[arg(long, hide = true)]
        fault_trial: Option<usize>,
    },
    /// Summarise a finished training run or search directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Print an architecture's layer table.
    Summary {
        #[arg(long, value_enum)]
        arch: ArchId,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML training configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Feature cache; defaults to $LIDF_CACHE_DIR, then `.lidf-cache` next to the manifest.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Square image size for the 2D models.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| LidError::io(path, e))?;
    toml::from_str(&text).map_err(|e| LidError::InvalidConfig(format!("{}: {e}", path.display())))
}

fn write_toml<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| LidError::InvalidState(e.to_string()))?;
    fs::write(path, text).map_err(|e| LidError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LidError::io(dir, e))
}

pub fn cache_dir(flag: Option<&Path>, manifest: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(CACHE_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => manifest.parent().unwrap_or(Path::new(".")).join(".lidf-cache"),
    }
}

fn set_image_size(config: &mut TrainConfig, size: usize) {
    match &mut config.model {
        ArchConfig::Conv2d(c) => c.image_size = size,
        ArchConfig::AttnGru(c) => c.base.image_size = size,
        ArchConfig::Conv1d(_) => {}
    }
    config.features.image_size = size;
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(common: &CommonArgs, arch: Option<ArchId>, manifest: &Manifest) -> Result<TrainConfig> {
    let mut config = match &common.config {
        Some(p) => read_toml::<TrainConfig>(p)?,
        None => TrainConfig::default(),
    };
    if let Some(a) = arch {
        if config.model.id() != a.as_str() {
            config.model = ArchConfig::preset(a.as_str())?;
        }
    }
    config.model.set_num_classes(manifest.num_classes());
    config.sync_image_size();
    if let Some(size) = common.size {
        set_image_size(&mut config, size);
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.workers = common.workers;
    Ok(config)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    run_from(std::env::args_os())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Scan { root, languages, out } => {
            let (m, report) = scan_corpus(&root, &languages)?;
            m.write(&out)?;
            println!(
                "{} entries over {} languages written to {} ({} unreadable, {} duplicates skipped)",
                m.entries.len(),
                m.num_classes(),
                out.display(),
                report.skipped_unreadable,
                report.skipped_duplicates
            );
        }
        Command::Synth { out, classes, per_class, seed } => {
            let spec = SynthSpec { n_classes: classes, n_per_class: per_class, seed, ..Default::default() };
            let m = synth_corpus(&out, &spec)?;
            let path = out.join("manifest.tsv");
            m.write(&path)?;
            println!("{} clips written; manifest {}", m.entries.len(), path.display());
        }
        Command::Featurize { manifest, common } => {
            eprintln!("workers: {}", common.workers);
            let m = Manifest::read(&manifest)?;
            let config = resolve_config(&common, Some(ArchId::Conv2d), &m)?;
            let cache = FeatureCache::new(cache_dir(common.cache_dir.as_deref(), &manifest));
            let (set, stats) = load_features(&m, &config.model, &config.features, Some(&cache), common.workers)?;
            let shape = set.inputs.first().map(|t| t.shape().to_vec()).unwrap_or_default();
            println!(
                "{} images {shape:?} in {}: {} cached, {} computed, {} recomputed",
                set.len(),
                cache.dir().display(),
                stats.hits,
                stats.computed,
                stats.recomputed
            );
        }
        Command::Train { manifest, out, common, arch, mixup, folds, epochs, batch_size, lr, full } => {
            eprintln!("workers: {}", common.workers);
            let m = Manifest::read(&manifest)?;
            let mut config = resolve_config(&common, arch, &m)?;
            if full {
                let n = config.model.num_classes();
                config.model = ArchConfig::preset(config.model.id())?;
                config.model.set_num_classes(n);
                config.sync_image_size();
                config.folds.k = crate::dataset::DEFAULT_K;
                if let Some(c) = m.class_counts().iter().find(|&&c| c < FULL_CLIPS_PER_LANGUAGE) {
                    log::warn!("full protocol expects {FULL_CLIPS_PER_LANGUAGE} clips per language; found a language with {c}");
                }
            }
            if mixup {
                config.mixup.enabled = true;
            }
            if let Some(k) = folds {
                config.folds.k = k;
            }
            if let Some(e) = epochs {
                config.epochs = e;
            }
            if let Some(b) = batch_size {
                config.batch_size = b;
            }
            if let Some(lr) = lr {
                config.optimizer.lr = lr;
            }
            config.validate()?;
            create_dir(&out)?;
            write_toml(&out.join(RESOLVED_CONFIG), &config)?;
            let plan = make_folds(&m, config.folds.k, config.folds.seed)?;
            let cache = FeatureCache::new(cache_dir(common.cache_dir.as_deref(), &manifest));
            let (set, _) = load_features(&m, &config.model, &config.features, Some(&cache), config.workers)?;
            let cv = cross_validate(&config, &set, &m.languages, &plan)?;
            let report = write_run(&out, &config, &cv)?;
            print!("{}", report.render());
        }
        Command::Search { manifest, out, common, space, arch, trials, epochs, fault_trial } => {
            eprintln!("workers: {}", common.workers);
            let m = Manifest::read(&manifest)?;
            let base = resolve_config(&common, arch, &m)?;
            let space = match space {
                Some(p) => read_toml::<SearchSpace>(&p)?,
                None => SearchSpace::default_for(base.model.id())?,
            };
            space.validate()?;
            create_dir(&out)?;
            write_toml(&out.join(RESOLVED_CONFIG), &base)?;
            write_toml(&out.join(SEARCH_SPACE), &space)?;
            let opts = SearchOptions { trials, epochs, fold: 0, seed: base.seed, workers: common.workers, fault_trial };
            let cache = FeatureCache::new(cache_dir(common.cache_dir.as_deref(), &manifest));
            let source = ManifestFeatures::new(&m, Some(cache), 1);
            let results = run_search(&space, &base, &opts, &m, &source, &out)?;
            for r in &results {
                let acc = r.mean_accuracy.map_or("-".to_string(), |a| format!("{:.2}%", 100.0 * a));
                println!("trial {:>3} {:>8} {acc:>8} {:?}", r.trial, format!("{:?}", r.status).to_lowercase(), r.choices);
            }
            write_search_summary(&out, &results)?;
        }
        Command::Report { run_dir } => {
            if run_dir.join(REPORT_JSON).exists() {
                let report = load_report(&run_dir)?;
                crate::train::save_report(&run_dir, &report)?;
                print!("{}", report.render());
            } else if run_dir.join(TRIALS_LOG).exists() {
                let results = read_trials(run_dir.join(TRIALS_LOG))?;
                report_search(&results)?;
                print!("{}", write_search_summary(&run_dir, &results)?);
            } else {
                return Err(LidError::InvalidArgument(format!(
                    "{} holds neither {REPORT_JSON} nor {TRIALS_LOG}",
                    run_dir.display()
                )));
            }
        }
        Command::Summary { arch, config } => {
            let mut model = match config {
                Some(p) => read_toml::<TrainConfig>(&p)?.model,
                None => ArchConfig::preset(arch.as_str())?,
            };
            if model.id() != arch.as_str() {
                model = ArchConfig::preset(arch.as_str())?;
            }
            print!("{}", Model::<f32>::seeded(&model, 0)?.summarize()?);
        }
    }
    Ok(())
}

fn write_search_summary(dir: &Path, results: &[crate::hpo::TrialResult]) -> Result<String> {
    match report_search(results) {
        Ok(r) => {
            let csv = dir.join(SEARCH_SUMMARY_CSV);
            fs::write(&csv, r.to_csv()).map_err(|e| LidError::io(&csv, e))?;
            let text = r.render();
            let txt = dir.join(SEARCH_SUMMARY_TXT);
            fs::write(&txt, &text).map_err(|e| LidError::io(&txt, e))?;
            Ok(text)
        }
        Err(LidError::EmptyReport) => {
            log::warn!("no completed trials; summary not written");
            Ok(String::new())
        }
        Err(e) => Err(e),
    }
}
