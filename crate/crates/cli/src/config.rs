//! Run configuration, layered flags > config file > environment > defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tourrank::eval::Perturbation;
use tourrank::{default_schedule, LlmConfig, TournamentSchedule, DEFAULT_ROUNDS};

/// Environment variable holding the API key. Keys are never read from
/// flags or config files.
pub const API_KEY_VAR: &str = "TOURRANK_API_KEY";
const ENV_PREFIX: &str = "TOURRANK_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum JudgeKind {
    Oracle,
    Noisy,
    Llm,
}

impl std::str::FromStr for JudgeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

/// One configuration source. Unset fields fall through to the next one.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub judge: Option<JudgeKind>,
    pub epsilon: Option<f64>,
    pub schedule: Option<String>,
    pub rounds: Option<usize>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub perturb: Option<Perturbation>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub lenient: Option<bool>,
    pub timeout_secs: Option<f64>,
    pub max_retries: Option<u32>,
}

impl Layer {
    /// Fields of `self` win over `lower`.
    pub fn over(self, lower: Layer) -> Layer {
        Layer {
            judge: self.judge.or(lower.judge),
            epsilon: self.epsilon.or(lower.epsilon),
            schedule: self.schedule.or(lower.schedule),
            rounds: self.rounds.or(lower.rounds),
            seed: self.seed.or(lower.seed),
            parallelism: self.parallelism.or(lower.parallelism),
            perturb: self.perturb.or(lower.perturb),
            endpoint: self.endpoint.or(lower.endpoint),
            model: self.model.or(lower.model),
            lenient: self.lenient.or(lower.lenient),
            timeout_secs: self.timeout_secs.or(lower.timeout_secs),
            max_retries: self.max_retries.or(lower.max_retries),
        }
    }

    pub fn from_file(path: &Path) -> Result<Layer> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }

    /// `TOURRANK_<FIELD>` variables, read through `get`.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Layer> {
        fn parse<T: std::str::FromStr>(
            get: &impl Fn(&str) -> Option<String>,
            name: &str,
        ) -> Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            let var = format!("{ENV_PREFIX}{name}");
            match get(&var) {
                None => Ok(None),
                Some(v) if v.trim().is_empty() => Ok(None),
                Some(v) => v
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|e| anyhow::anyhow!("{var}={v:?}: {e}")),
            }
        }
        Ok(Layer {
            judge: parse(&get, "JUDGE")?,
            epsilon: parse(&get, "EPSILON")?,
            schedule: parse(&get, "SCHEDULE")?,
            rounds: parse(&get, "ROUNDS")?,
            seed: parse(&get, "SEED")?,
            parallelism: parse(&get, "PARALLELISM")?,
            perturb: parse(&get, "PERTURB")?,
            endpoint: parse(&get, "ENDPOINT")?,
            model: parse(&get, "MODEL")?,
            lenient: parse(&get, "LENIENT")?,
            timeout_secs: parse(&get, "TIMEOUT_SECS")?,
            max_retries: parse(&get, "MAX_RETRIES")?,
        })
    }
}

/// Run flags shared by `rank` and `compare`.
#[derive(Args, Clone, Debug, Default)]
pub struct RunFlags {
    /// Relevance judge.
    #[arg(long, value_enum)]
    pub judge: Option<JudgeKind>,
    /// Noise level of the noisy judge, in [0, 1].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Tournament schedule: `default` or a JSON file.
    #[arg(long, value_name = "FILE|default")]
    pub schedule: Option<String>,
    /// Number of tournaments R.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Run seed; drawn and printed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, which also bounds in-flight judge calls.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Disturb the initial order before re-ranking.
    #[arg(long, value_parser = parse_perturbation)]
    pub perturb: Option<Perturbation>,
    /// Chat-completions URL for the llm judge.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name for the llm judge.
    #[arg(long)]
    pub model: Option<String>,
    /// Abort when any round fails (default).
    #[arg(long, conflicts_with = "lenient")]
    pub strict: bool,
    /// Drop failed rounds and rank with the rest.
    #[arg(long)]
    pub lenient: bool,
    /// Per-request timeout for the llm judge, seconds.
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Retries for transient llm failures.
    #[arg(long)]
    pub max_retries: Option<u32>,
}

pub fn parse_perturbation(s: &str) -> Result<Perturbation, String> {
    s.parse()
}

impl RunFlags {
    pub fn layer(&self) -> Layer {
        Layer {
            judge: self.judge,
            epsilon: self.epsilon,
            schedule: self.schedule.clone(),
            rounds: self.rounds,
            seed: self.seed,
            parallelism: self.parallelism,
            perturb: self.perturb,
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            lenient: match (self.strict, self.lenient) {
                (true, _) => Some(false),
                (_, true) => Some(true),
                _ => None,
            },
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
        }
    }
}

/// Fully resolved configuration, echoed before every run.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub judge: JudgeKind,
    pub epsilon: f64,
    pub schedule: String,
    pub rounds: usize,
    pub seed: u64,
    pub seed_drawn: bool,
    pub parallelism: usize,
    pub perturb: Perturbation,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: &'static str,
    pub lenient: bool,
    pub timeout_secs: f64,
    pub max_retries: u32,
    #[serde(skip)]
    pub resolved_schedule: TournamentSchedule,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

fn load_schedule(spec: &str) -> Result<TournamentSchedule> {
    if spec == "default" {
        return Ok(default_schedule());
    }
    let path = PathBuf::from(spec);
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading schedule file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| {
        format!(
            "parsing schedule file {} (expected {{\"stages\": [...], \"rounds\": R}})",
            path.display()
        )
    })
}

impl RunConfig {
    pub fn resolve(layer: Layer) -> Result<RunConfig> {
        let llm = LlmConfig::default();
        let schedule_spec = layer.schedule.unwrap_or_else(|| "default".into());
        let mut schedule = load_schedule(&schedule_spec)?;
        let rounds = layer.rounds.unwrap_or(if schedule_spec == "default" {
            DEFAULT_ROUNDS
        } else {
            schedule.rounds
        });
        if rounds == 0 {
            bail!("rounds must be at least 1");
        }
        schedule.rounds = rounds;
        let epsilon = layer.epsilon.unwrap_or(0.2);
        if !(0.0..=1.0).contains(&epsilon) {
            bail!("epsilon must be in [0, 1], got {epsilon}");
        }
        let parallelism = layer.parallelism.unwrap_or_else(default_parallelism);
        if parallelism == 0 {
            bail!("parallelism must be at least 1");
        }
        let (seed, seed_drawn) = match layer.seed {
            Some(s) => (s, false),
            None => (rand::random::<u64>() >> 11, true),
        };
        Ok(RunConfig {
            judge: layer.judge.unwrap_or(JudgeKind::Oracle),
            epsilon,
            schedule: schedule_spec,
            rounds,
            seed,
            seed_drawn,
            parallelism,
            perturb: layer.perturb.unwrap_or_default(),
            endpoint: layer.endpoint.unwrap_or(llm.endpoint),
            model: layer.model.unwrap_or(llm.model),
            api_key_env: API_KEY_VAR,
            lenient: layer.lenient.unwrap_or(false),
            timeout_secs: layer.timeout_secs.unwrap_or(llm.timeout.as_secs_f64()),
            max_retries: layer.max_retries.unwrap_or(llm.max_retries),
            resolved_schedule: schedule,
        })
    }

    /// Flags over an optional config file over the process environment.
    pub fn from_sources(flags: &RunFlags, file: Option<&Path>) -> Result<RunConfig> {
        let file_layer = match file {
            Some(p) => Layer::from_file(p)?,
            None => Layer::default(),
        };
        let env_layer = Layer::from_env(|k| std::env::var(k).ok())?;
        Self::resolve(flags.layer().over(file_layer).over(env_layer))
    }

    pub fn llm_config(&self, api_key: String) -> LlmConfig {
        LlmConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key: Some(api_key),
            timeout: Duration::from_secs_f64(self.timeout_secs),
            max_retries: self.max_retries,
            max_in_flight: self.parallelism,
            ..LlmConfig::default()
        }
    }

    /// One line that, fed back as flags, replays the run.
    pub fn echo(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut line = format!("effective config: {json}");
        if self.seed_drawn {
            line.push_str(&format!(
                "\nseed: {} (drawn; pass --seed {} to replay)",
                self.seed, self.seed
            ));
        } else {
            line.push_str(&format!("\nseed: {}", self.seed));
        }
        line
    }
}
