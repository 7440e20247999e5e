//! Run settings, merged from flags, environment, a config file and defaults
//! (in that order of precedence). Clap handles the first two; the file and
//! the defaults fill whatever is still unset.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use orderpipe::gateway::{BackendConfig, RetryPolicy};
use orderpipe::orders::PostprocessConfig;
use orderpipe::strategies::{LlmSettings, PromptCatalog, ReactConfig, StrategySettings};
use orderpipe::transcript::{LoadMode, Split};
use serde::Deserialize;

use crate::CliError;

/// Flags shared by `extract` and `record`. Every value is optional here so
/// that an unset flag can fall through to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Dataset file or directory.
    #[arg(long, env = "ORDERPIPE_INPUT")]
    pub input: Option<PathBuf>,
    /// Predictions file to write.
    #[arg(long, env = "ORDERPIPE_OUTPUT")]
    pub output: Option<PathBuf>,
    /// train, dev or custom. Selects a split inside a dataset directory.
    #[arg(long, env = "ORDERPIPE_SPLIT")]
    pub split: Option<Split>,
    /// oneshot, react or agentic.
    #[arg(long, env = "ORDERPIPE_STRATEGY")]
    pub strategy: Option<String>,
    #[arg(long, env = "ORDERPIPE_MODEL")]
    pub model: Option<String>,
    /// http, replay or scripted.
    #[arg(long, env = "ORDERPIPE_BACKEND")]
    pub backend: Option<String>,
    #[arg(long, env = "ORDERPIPE_BASE_URL")]
    pub base_url: Option<String>,
    /// Fixture directory (replay reads it, record writes it).
    #[arg(long, env = "ORDERPIPE_FIXTURES")]
    pub fixtures: Option<PathBuf>,
    /// Script file for the scripted backend.
    #[arg(long, env = "ORDERPIPE_SCRIPT")]
    pub script: Option<PathBuf>,
    /// Directory overriding the built-in prompt texts.
    #[arg(long, env = "ORDERPIPE_PROMPTS")]
    pub prompts: Option<PathBuf>,
    #[arg(long, env = "ORDERPIPE_CONCURRENCY")]
    pub concurrency: Option<usize>,
    #[arg(long, env = "ORDERPIPE_MAX_ITERATIONS")]
    pub max_iterations: Option<usize>,
    #[arg(long, env = "ORDERPIPE_MAX_ATTEMPTS")]
    pub max_attempts: Option<u32>,
    /// Seconds before the first retry.
    #[arg(long, env = "ORDERPIPE_BACKOFF")]
    pub backoff: Option<f64>,
    /// Request timeout in seconds.
    #[arg(long, env = "ORDERPIPE_TIMEOUT")]
    pub timeout: Option<f64>,
    #[arg(long, env = "ORDERPIPE_TEMPERATURE")]
    pub temperature: Option<f64>,
    #[arg(long, env = "ORDERPIPE_SEED")]
    pub seed: Option<u64>,
    /// Abort on the first malformed dataset record.
    #[arg(long)]
    pub strict: bool,
    /// Flat TOML file with defaults for any of these settings.
    #[arg(long, env = "ORDERPIPE_CONFIG")]
    pub config: Option<PathBuf>,
}

/// Keys accepted in the config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub split: Option<String>,
    pub strategy: Option<String>,
    pub model: Option<String>,
    pub backend: Option<String>,
    pub base_url: Option<String>,
    pub fixtures: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub max_iterations: Option<usize>,
    pub max_attempts: Option<u32>,
    pub backoff: Option<f64>,
    pub timeout: Option<f64>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    pub strict: Option<bool>,
    pub max_words: Option<usize>,
    pub max_orders: Option<usize>,
    pub max_provenance: Option<usize>,
    pub require_doctor_provenance: Option<bool>,
    pub wording_overlap_threshold: Option<f64>,
    pub include_prior_output: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.input,
            &mut cfg.output,
            &mut cfg.fixtures,
            &mut cfg.script,
            &mut cfg.prompts,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for one extraction run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub split: Split,
    pub strategy: String,
    pub backend: String,
    pub backend_config: BackendConfig,
    pub settings: StrategySettings,
    pub concurrency: usize,
    pub load_mode: LoadMode,
}

fn secs(value: f64, name: &str) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(value)
        .map_err(|_| CliError::Config(format!("{name} must be a non-negative number of seconds")))
}

impl RunConfig {
    /// Merges `args` over the config file (if any) over defaults.
    /// `default_backend` differs between `extract` and `record`.
    pub fn resolve(args: &RunArgs, default_backend: &str) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let required = |flag: Option<PathBuf>, from_file: Option<PathBuf>, name: &str| {
            flag.or(from_file)
                .ok_or_else(|| CliError::Config(format!("--{name} is required")))
        };
        let input = required(args.input.clone(), file.input.clone(), "input")?;
        let output = required(args.output.clone(), file.output.clone(), "output")?;

        let split = match (args.split, &file.split) {
            (Some(s), _) => s,
            (None, Some(s)) => s.parse().map_err(CliError::Config)?,
            (None, None) => Split::Custom,
        };

        let pp_default = PostprocessConfig::default();
        let postprocess = PostprocessConfig {
            max_words: file.max_words.unwrap_or(pp_default.max_words),
            max_orders: file.max_orders.unwrap_or(pp_default.max_orders),
            max_provenance: file.max_provenance.unwrap_or(pp_default.max_provenance),
            require_doctor_provenance: file
                .require_doctor_provenance
                .unwrap_or(pp_default.require_doctor_provenance),
        };
        postprocess.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let react_default = ReactConfig::default();
        let react = ReactConfig {
            max_iterations: args
                .max_iterations
                .or(file.max_iterations)
                .unwrap_or(react_default.max_iterations),
            wording_overlap_threshold: file
                .wording_overlap_threshold
                .unwrap_or(react_default.wording_overlap_threshold),
            include_prior_output: file.include_prior_output.unwrap_or(react_default.include_prior_output),
            postprocess,
        };
        if react.max_iterations == 0 {
            return Err(CliError::Config("--max-iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&react.wording_overlap_threshold) {
            return Err(CliError::Config(
                "wording_overlap_threshold must be within [0, 1]".into(),
            ));
        }

        let llm_default = LlmSettings::default();
        let retry_default = RetryPolicy::default();
        let mut retry = RetryPolicy {
            max_attempts: args
                .max_attempts
                .or(file.max_attempts)
                .unwrap_or(retry_default.max_attempts),
            ..retry_default
        };
        if let Some(b) = args.backoff.or(file.backoff) {
            retry.base_backoff = secs(b, "backoff")?;
        }
        if retry.max_attempts == 0 {
            return Err(CliError::Config("--max-attempts must be at least 1".into()));
        }
        let llm = LlmSettings {
            model: args.model.clone().or(file.model.clone()).unwrap_or(llm_default.model),
            temperature: args.temperature.or(file.temperature).unwrap_or(llm_default.temperature),
            max_tokens: file.max_tokens.unwrap_or(llm_default.max_tokens),
            seed: args.seed.or(file.seed),
            retry,
        };

        let catalog = match args.prompts.as_ref().or(file.prompts.as_ref()) {
            Some(dir) => PromptCatalog::load_dir(dir).map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?,
            None => PromptCatalog::builtin(),
        };

        let backend_default = BackendConfig::default();
        let backend_config = BackendConfig {
            base_url: args
                .base_url
                .clone()
                .or(file.base_url.clone())
                .unwrap_or(backend_default.base_url),
            timeout: match args.timeout.or(file.timeout) {
                Some(t) => secs(t, "timeout")?,
                None => backend_default.timeout,
            },
            api_key: None,
            fixtures: args.fixtures.clone().or(file.fixtures.clone()),
            script: args.script.clone().or(file.script.clone()),
            record_to: None,
        };

        let concurrency = args.concurrency.or(file.concurrency).unwrap_or(1);
        if concurrency == 0 {
            return Err(CliError::Config("--concurrency must be at least 1".into()));
        }
        let strict = args.strict || file.strict.unwrap_or(false);

        Ok(Self {
            input,
            output,
            split,
            strategy: args
                .strategy
                .clone()
                .or(file.strategy.clone())
                .unwrap_or_else(|| "oneshot".into()),
            backend: args
                .backend
                .clone()
                .or(file.backend.clone())
                .unwrap_or_else(|| default_backend.into()),
            backend_config,
            settings: StrategySettings {
                llm,
                postprocess,
                react,
                catalog: Arc::new(catalog),
            },
            concurrency,
            load_mode: if strict { LoadMode::Strict } else { LoadMode::Lenient },
        })
    }
}
