//! Run configuration loaded from TOML or JSON.

use std::fs;
use std::path::{Path, PathBuf};

use molgrammar_core::generate::Limits;
use molgrammar_core::rank::AssemblyMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::CassetteMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Shared-bond merging, minimum-intersection edge removal, largest root.
    #[default]
    Heuristic,
    /// The default heuristic with the merge phase switched off.
    HeuristicNoMerge,
    /// Merging and rooting guided by `membership_pattern`.
    Pattern,
    /// Seeded uniform choices.
    Random,
    /// JSON selection protocol at `endpoint`.
    Remote,
    /// Prompt chain against an OpenAI-style chat endpoint.
    Chat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeKind {
    /// Prefers the story with more steps. Meant for tests and dry runs.
    #[default]
    Length,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// One SMILES per line.
    pub dataset: PathBuf,
    pub output: PathBuf,
    pub oracle: OracleKind,
    pub endpoint: Option<String>,
    /// Chat model name for `oracle = "chat"`.
    pub model: String,
    /// Environment variable holding a bearer token for remote calls.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    /// Prompt templates (TOML or JSON); built-in wording when absent.
    pub prompts: Option<PathBuf>,
    pub cassette: Option<PathBuf>,
    pub cassette_mode: CassetteMode,
    /// Decomposition passes per molecule (K).
    pub passes: usize,
    pub k: usize,
    pub mode: AssemblyMode,
    pub rounds: usize,
    pub judge: JudgeKind,
    pub judge_endpoint: Option<String>,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub samples: usize,
    /// Attempts per output slot before it is counted as rejected.
    pub max_attempts: usize,
    pub limits: Limits,
    pub membership_pattern: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::from("molecules.smi"),
            output: PathBuf::from("out"),
            oracle: OracleKind::Heuristic,
            endpoint: None,
            model: "gpt-4o".into(),
            api_key_env: None,
            timeout_secs: 120,
            prompts: None,
            cassette: None,
            cassette_mode: CassetteMode::Replay,
            passes: 1,
            k: 1,
            mode: AssemblyMode::FirstK,
            rounds: 4,
            judge: JudgeKind::Length,
            judge_endpoint: None,
            seed: 0,
            workers: 0,
            samples: 10_000,
            max_attempts: 20,
            limits: Limits::default(),
            membership_pattern: None,
        }
    }
}

impl RunConfig {
    /// Reads `.json` as JSON and anything else as TOML. Relative paths in the
    /// file are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let parse = |message: String| ConfigError::Parse { path: path.to_owned(), message };
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse(e.to_string()))?
        };
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        fix(&mut self.output);
        for p in [&mut self.prompts, &mut self.cassette].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if self.passes == 0 {
            return bad("passes must be at least 1");
        }
        if self.k == 0 || self.k > self.passes {
            return bad("k must lie in 1..=passes");
        }
        if matches!(self.oracle, OracleKind::Remote | OracleKind::Chat) && self.endpoint.is_none() {
            return bad("remote and chat oracles need an endpoint");
        }
        if self.oracle == OracleKind::Pattern && self.membership_pattern.is_none() {
            return bad("the pattern oracle needs membership_pattern");
        }
        if self.judge == JudgeKind::Remote && self.judge_endpoint.is_none() {
            return bad("the remote judge needs judge_endpoint");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        Ok(())
    }
}
