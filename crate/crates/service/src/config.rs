//! Service settings, read from `LOOPINV_*` environment variables.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use loopinv_core::solver::SolverConfig;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub levels_dir: PathBuf,
    /// Directory of the event log; `None` keeps sessions in memory only.
    pub data_dir: Option<PathBuf>,
    pub prover_command: Vec<String>,
    pub timeout: Duration,
    pub pool_size: usize,
    /// Requests allowed to wait on one (session, level) queue.
    pub queue_limit: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Error, PartialEq)]
#[error("{var}: {message}")]
pub struct ConfigError {
    pub var: &'static str,
    pub message: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            levels_dir: PathBuf::from("levels"),
            data_dir: None,
            prover_command: SolverConfig::default().command,
            timeout: Duration::from_secs(10),
            pool_size: 4,
            queue_limit: 8,
            max_iterations: 10_000,
        }
    }
}

fn parsed<T: std::str::FromStr>(var: &'static str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse().map_err(|e: T::Err| ConfigError {
        var,
        message: e.to_string(),
    })
}

fn positive(var: &'static str, raw: &str) -> Result<usize, ConfigError> {
    match parsed(var, raw)? {
        0 => Err(ConfigError {
            var,
            message: "must be positive".into(),
        }),
        n => Ok(n),
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Builds a configuration from a variable lookup, starting from the
    /// defaults.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = ServiceConfig::default();
        if let Some(v) = get("LOOPINV_BIND") {
            cfg.bind = parsed("LOOPINV_BIND", &v)?;
        }
        if let Some(v) = get("LOOPINV_LEVELS") {
            cfg.levels_dir = v.into();
        }
        if let Some(v) = get("LOOPINV_DATA_DIR").filter(|v| !v.is_empty()) {
            cfg.data_dir = Some(v.into());
        }
        if let Some(v) = get("LOOPINV_PROVER") {
            cfg.prover_command = v.split_whitespace().map(String::from).collect();
            if cfg.prover_command.is_empty() {
                return Err(ConfigError {
                    var: "LOOPINV_PROVER",
                    message: "empty command".into(),
                });
            }
        }
        if let Some(v) = get("LOOPINV_TIMEOUT_SECS") {
            let secs: f64 = parsed("LOOPINV_TIMEOUT_SECS", &v)?;
            if !(secs > 0.0 && secs.is_finite()) {
                return Err(ConfigError {
                    var: "LOOPINV_TIMEOUT_SECS",
                    message: "must be positive".into(),
                });
            }
            cfg.timeout = Duration::from_secs_f64(secs);
        }
        if let Some(v) = get("LOOPINV_POOL_SIZE") {
            cfg.pool_size = positive("LOOPINV_POOL_SIZE", &v)?;
        }
        if let Some(v) = get("LOOPINV_QUEUE_LIMIT") {
            cfg.queue_limit = positive("LOOPINV_QUEUE_LIMIT", &v)?;
        }
        if let Some(v) = get("LOOPINV_MAX_ITERATIONS") {
            cfg.max_iterations = positive("LOOPINV_MAX_ITERATIONS", &v)?;
        }
        Ok(cfg)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            command: self.prover_command.clone(),
            timeout: self.timeout,
            pool_size: self.pool_size,
            ..SolverConfig::default()
        }
    }
}
