//! Level files: a SIP program plus presentation metadata.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineConfig;
use crate::interp::{eval_bool, initial_state};
use crate::lang::{load_program, LoadError, Program, TypeEnv};
use crate::value::{State, Value, ValueError};

/// On-disk form of a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelFile {
    pub id: String,
    pub title: String,
    pub source: String,
    #[serde(default)]
    pub starter_inputs: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub tutorial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unroll_bound: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Level {
    pub id: String,
    pub title: String,
    pub source: String,
    pub program: Program,
    pub starter_inputs: State,
    pub tutorial: bool,
    pub unroll_bound: Option<usize>,
}

#[derive(Debug, Error)]
pub enum LevelError {
    #[error("cannot read level file {path}: {error}")]
    Io { path: String, error: std::io::Error },
    #[error("malformed level JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("level `{id}`: {error}")]
    Program { id: String, error: LoadError },
    #[error("level `{id}`: starter inputs: {error}")]
    Inputs { id: String, error: ValueError },
    #[error("level `{id}`: starter inputs violate the precondition")]
    Precondition { id: String },
    #[error("level `{id}`: unroll bound must be at least 1")]
    Unroll { id: String },
}

/// Reads wire-form inputs for the program's parameters.
pub fn parse_inputs(
    p: &Program,
    raw: &serde_json::Map<String, serde_json::Value>,
) -> Result<State, ValueError> {
    let params: TypeEnv = p.params.iter().cloned().collect();
    if let Some(extra) = raw.keys().find(|k| !params.contains_key(*k)) {
        return Err(ValueError::Unknown(extra.clone()));
    }
    params
        .iter()
        .map(|(name, ty)| {
            let v = raw
                .get(name)
                .ok_or_else(|| ValueError::Missing(name.clone()))?;
            Ok((name.clone(), Value::from_json(v, *ty)?))
        })
        .collect()
}

impl Level {
    pub fn from_file(file: LevelFile) -> Result<Level, LevelError> {
        let id = file.id.clone();
        let program = load_program(&file.source).map_err(|error| LevelError::Program {
            id: id.clone(),
            error,
        })?;
        let starter_inputs =
            parse_inputs(&program, &file.starter_inputs).map_err(|error| LevelError::Inputs {
                id: id.clone(),
                error,
            })?;
        if let Some(pre) = &program.pre {
            let st =
                initial_state(&program, &starter_inputs).map_err(|error| LevelError::Inputs {
                    id: id.clone(),
                    error,
                })?;
            if eval_bool(pre, &st) != Ok(true) {
                return Err(LevelError::Precondition { id });
            }
        }
        if file.unroll_bound == Some(0) {
            return Err(LevelError::Unroll { id });
        }
        Ok(Level {
            id: file.id,
            title: file.title,
            source: file.source,
            program,
            starter_inputs,
            tutorial: file.tutorial,
            unroll_bound: file.unroll_bound,
        })
    }

    /// `base` with this level's unroll bound applied.
    pub fn engine_config(&self, base: &EngineConfig) -> EngineConfig {
        EngineConfig {
            unroll: self.unroll_bound.unwrap_or(base.unroll),
            ..base.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Level, LevelError> {
        Level::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Level, LevelError> {
        let text = std::fs::read_to_string(path).map_err(|error| LevelError::Io {
            path: path.display().to_string(),
            error,
        })?;
        Level::from_json(&text)
    }

    /// Loads every `*.json` file in `dir`, sorted by id.
    pub fn load_dir(dir: &Path) -> Result<Vec<Level>, LevelError> {
        let io = |error| LevelError::Io {
            path: dir.display().to_string(),
            error,
        };
        let mut levels = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_some_and(|e| e == "json") {
                levels.push(Level::load(&path)?);
            }
        }
        levels.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs_and_pre() {
        let src = "fn f(x: Natural): Integer { pre(x > 2); while (x > 0) { x := x - 1; } }";
        let mk = |inputs: serde_json::Value| LevelFile {
            id: "t".into(),
            title: "t".into(),
            source: src.into(),
            starter_inputs: inputs.as_object().unwrap().clone(),
            tutorial: false,
            unroll_bound: None,
        };
        assert!(Level::from_file(mk(serde_json::json!({"x": "5"}))).is_ok());
        assert!(matches!(
            Level::from_file(mk(serde_json::json!({"x": "1"}))),
            Err(LevelError::Precondition { .. })
        ));
        assert!(matches!(
            Level::from_file(mk(serde_json::json!({"x": "-1"}))),
            Err(LevelError::Inputs { .. })
        ));
        assert!(matches!(
            Level::from_file(mk(serde_json::json!({}))),
            Err(LevelError::Inputs { .. })
        ));
        assert!(matches!(
            Level::from_file(mk(serde_json::json!({"x": 4, "y": 1}))),
            Err(LevelError::Inputs { .. })
        ));
    }
}
