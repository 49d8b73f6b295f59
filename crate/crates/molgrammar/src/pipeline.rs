//! The induce / rank / generate / eval / roundtrip-check commands as library
//! functions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use molgrammar_core::canon::isomorphic;
use molgrammar_core::decompose::{decompose_with, DecomposeError, DecomposeOptions, DecompositionLog};
use molgrammar_core::derive_seed;
use molgrammar_core::eval::{evaluate, EvalError, MetricReport};
use molgrammar_core::generate::{derive_msg, sample_slot, RejectReason};
use molgrammar_core::hrg::{atom_only_msg, extract_rules, pool, Grammar, HrgError, Msg, GRAMMAR_FORMAT};
use molgrammar_core::molecule::{parse_smiles, write_smiles, MolecularGraph, SmilesError};
use molgrammar_core::oracle::{ChatOracle, HeuristicOracle, HeuristicPolicy, Oracle, PromptSet, RandomOracle};
use molgrammar_core::rank::{
    build_story, rank_molecule, rule_signature, select_passes, AssemblyMode, Judge, LengthJudge, MoleculeRanking,
    RankError,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, JudgeKind, OracleKind, RunConfig};
use crate::files::{read_dataset, read_json, read_lines, write_json, DatasetEntry, FileError};
use crate::http::{Cassette, CassetteMode, HttpClient, JsonPost, TransportError};
use crate::remote::{ChatEndpoint, RemoteJudge, RemoteOracle};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("membership pattern: {0}")]
    Pattern(SmilesError),
    #[error("thread pool: {0}")]
    Threads(String),
    #[error("molecule {index}: {source}")]
    Rank { index: usize, source: RankError },
    #[error("{path} is not a grammar file")]
    NotAGrammar { path: PathBuf },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no valid samples were produced")]
    NoValidSamples,
}

/// Where every artifact of a run lives under the output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_owned() }
    }

    pub fn msg(&self, molecule: usize, pass: usize) -> PathBuf {
        self.root.join("msgs").join(format!("{molecule:04}_p{pass}.json"))
    }

    pub fn log(&self, molecule: usize, pass: usize) -> PathBuf {
        self.root.join("logs").join(format!("{molecule:04}_p{pass}.json"))
    }

    pub fn grammar(&self) -> PathBuf {
        self.root.join("grammar.json")
    }

    pub fn topk_grammar(&self) -> PathBuf {
        self.root.join("grammar_topk.json")
    }

    pub fn standings(&self) -> PathBuf {
        self.root.join("standings.json")
    }

    pub fn failures(&self) -> PathBuf {
        self.root.join("failures.json")
    }

    pub fn samples(&self) -> PathBuf {
        self.root.join("samples.smi")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

/// Network plumbing shared by the oracle and the judge.
pub struct Remote {
    pub client: Arc<dyn JsonPost>,
    cassette: Option<Arc<Cassette<HttpClient>>>,
}

impl Remote {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let bearer = cfg.api_key_env.as_ref().and_then(|var| std::env::var(var).ok());
        let http = HttpClient::new(Duration::from_secs(cfg.timeout_secs), bearer);
        Ok(match (&cfg.cassette, cfg.cassette_mode) {
            (Some(path), CassetteMode::Replay) => {
                let c = Arc::new(Cassette::replay(path)?);
                Remote { client: c.clone(), cassette: Some(c) }
            }
            (Some(path), CassetteMode::Record) => {
                let c = Arc::new(Cassette::record(path, http)?);
                Remote { client: c.clone(), cassette: Some(c) }
            }
            (None, _) => Remote { client: Arc::new(http), cassette: None },
        })
    }

    /// A caller-supplied client, e.g. an in-process fake service.
    pub fn with_client(client: Arc<dyn JsonPost>) -> Self {
        Remote { client, cassette: None }
    }

    pub fn save(&self) -> Result<(), PipelineError> {
        if let Some(c) = &self.cassette {
            c.save()?;
        }
        Ok(())
    }
}

pub fn membership_pattern(cfg: &RunConfig) -> Result<Option<MolecularGraph>, PipelineError> {
    cfg.membership_pattern.as_deref().map(parse_smiles).transpose().map_err(PipelineError::Pattern)
}

fn load_prompts(path: &Path) -> Result<PromptSet, PipelineError> {
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(read_json(path)?);
    }
    let text = fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    toml::from_str(&text)
        .map_err(|e| ConfigError::Parse { path: path.to_owned(), message: e.to_string() }.into())
}

pub fn build_oracle(cfg: &RunConfig, remote: &Remote) -> Result<Box<dyn Oracle>, PipelineError> {
    let endpoint = || cfg.endpoint.clone().unwrap_or_default();
    Ok(match cfg.oracle {
        OracleKind::Heuristic => Box::new(HeuristicOracle::default()),
        OracleKind::HeuristicNoMerge => Box::new(HeuristicOracle::new(HeuristicPolicy::default().without_merge())),
        OracleKind::Pattern => {
            let pattern = membership_pattern(cfg)?.ok_or_else(|| {
                ConfigError::Invalid("the pattern oracle needs membership_pattern".into())
            })?;
            Box::new(HeuristicOracle::new(HeuristicPolicy::pattern_guided(pattern)))
        }
        OracleKind::Random => Box::new(RandomOracle),
        OracleKind::Remote => Box::new(RemoteOracle { client: remote.client.clone(), endpoint: endpoint() }),
        OracleKind::Chat => {
            let prompts = match &cfg.prompts {
                Some(p) => load_prompts(p)?,
                None => PromptSet::default(),
            };
            let transport = ChatEndpoint { client: remote.client.clone(), endpoint: endpoint(), model: cfg.model.clone() };
            Box::new(ChatOracle::new(transport, prompts))
        }
    })
}

pub fn build_judge(cfg: &RunConfig, remote: &Remote) -> Box<dyn Judge> {
    match cfg.judge {
        JudgeKind::Length => Box::new(LengthJudge),
        JudgeKind::Remote => Box::new(RemoteJudge {
            client: remote.client.clone(),
            endpoint: cfg.judge_endpoint.clone().unwrap_or_default(),
        }),
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| PipelineError::Threads(e.to_string()))
}

/// Seed for pass `pass` of molecule `index`.
pub fn pass_seed(root: u64, index: usize, pass: usize) -> u64 {
    derive_seed(derive_seed(root, index as u64), pass as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub molecule: usize,
    pub smiles: String,
    pub pass: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct Pass {
    pub msg: Msg,
    /// `None` for bond-free molecules, which need no decomposition.
    pub log: Option<DecompositionLog>,
}

#[derive(Debug, Error)]
enum PassError {
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Hrg(#[from] HrgError),
}

fn run_pass(g: &MolecularGraph, oracle: &dyn Oracle, seed: u64) -> Result<Pass, PassError> {
    if g.bond_count() == 0 && g.atom_count() == 1 {
        return Ok(Pass { msg: atom_only_msg(g), log: None });
    }
    let d = decompose_with(g, &oracle, seed, DecomposeOptions::default())?;
    let msg = extract_rules(g, &d)?;
    Ok(Pass { msg, log: Some(d.log) })
}

/// Decomposes every molecule `cfg.passes` times in parallel.
pub fn decompose_dataset(
    cfg: &RunConfig,
    data: &[DatasetEntry],
    oracle: &dyn Oracle,
) -> Result<Vec<Result<Vec<Pass>, Failure>>, PipelineError> {
    let pool = thread_pool(cfg.workers)?;
    Ok(pool.install(|| {
        data.par_iter()
            .enumerate()
            .map(|(i, entry)| {
                (0..cfg.passes)
                    .map(|p| {
                        run_pass(&entry.molecule, oracle, pass_seed(cfg.seed, i, p)).map_err(|e| Failure {
                            molecule: i,
                            smiles: entry.smiles.clone(),
                            pass: p,
                            error: e.to_string(),
                        })
                    })
                    .collect()
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InduceSummary {
    pub molecules: usize,
    pub passes: usize,
    pub msgs_written: usize,
    pub failures: Vec<Failure>,
    pub rules: usize,
    pub total_count: u64,
    pub grammar: PathBuf,
}

/// Rankings for every molecule; passes stay in index order when there is
/// only one pass.
pub fn rank_passes(
    cfg: &RunConfig,
    data: &[DatasetEntry],
    passes: &[Vec<Pass>],
    judge: &dyn Judge,
) -> Result<Vec<MoleculeRanking>, PipelineError> {
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        data.par_iter()
            .zip(passes.par_iter())
            .enumerate()
            .map(|(i, (entry, ps))| {
                let stories = ps
                    .iter()
                    .enumerate()
                    .map(|(p, pass)| match &pass.log {
                        Some(log) => build_story(&entry.smiles, p, log),
                        None => Ok(molgrammar_core::rank::DesignStory {
                            molecule: entry.smiles.clone(),
                            pass: p,
                            steps: Vec::new(),
                        }),
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|source| PipelineError::Rank { index: i, source })?;
                let sigs: Vec<Vec<String>> = ps.iter().map(|p| rule_signature(&p.msg.rules)).collect();
                rank_molecule(&entry.smiles, &stories, &sigs, &judge, cfg.rounds)
                    .map_err(|source| PipelineError::Rank { index: i, source })
            })
            .collect()
    })
}

/// Pools the selected passes of every molecule.
pub fn assemble(
    passes: &[Vec<Pass>],
    rankings: Option<&[MoleculeRanking]>,
    k: usize,
    mode: AssemblyMode,
) -> Result<Grammar, PipelineError> {
    let mut chosen: Vec<&[molgrammar_core::hrg::ProductionRule]> = Vec::new();
    for (i, ps) in passes.iter().enumerate() {
        let order: Vec<usize> = match rankings {
            Some(r) => r[i].order.clone(),
            None => (0..ps.len()).collect(),
        };
        let mode = if rankings.is_some() { mode } else { AssemblyMode::FirstK };
        for p in select_passes(&order, k, mode).map_err(|source| PipelineError::Rank { index: i, source })? {
            chosen.push(&ps[p].msg.rules);
        }
    }
    Ok(pool(chosen))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standing {
    pub molecule: usize,
    pub smiles: String,
    pub ranking: MoleculeRanking,
}

fn write_passes(layout: &Layout, i: usize, ps: &[Pass]) -> Result<(), PipelineError> {
    for (p, pass) in ps.iter().enumerate() {
        write_json(&layout.msg(i, p), &pass.msg)?;
        if let Some(log) = &pass.log {
            write_json(&layout.log(i, p), log)?;
        }
    }
    Ok(())
}

/// Decomposes the dataset, writes per-pass MSGs and logs, and pools the
/// grammar for `(k, mode)`. Molecules that fail are listed in the summary
/// and in `failures.json`; the grammar is built from the rest.
pub fn induce(cfg: &RunConfig, remote: &Remote) -> Result<InduceSummary, PipelineError> {
    cfg.validate()?;
    let data = read_dataset(&cfg.dataset)?;
    let oracle = build_oracle(cfg, remote)?;
    let layout = Layout::new(&cfg.output);
    let results = decompose_dataset(cfg, &data, oracle.as_ref())?;
    remote.save()?;

    let mut failures = Vec::new();
    let mut ok_data = Vec::new();
    let mut ok_passes = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(ps) => {
                write_passes(&layout, i, &ps)?;
                ok_data.push(data[i].clone());
                ok_passes.push(ps);
            }
            Err(f) => failures.push(f),
        }
    }
    write_json(&layout.failures(), &failures)?;

    let rankings = if cfg.mode == AssemblyMode::TopK && cfg.passes > 1 {
        let judge = build_judge(cfg, remote);
        let r = rank_passes(cfg, &ok_data, &ok_passes, judge.as_ref())?;
        remote.save()?;
        Some(r)
    } else {
        None
    };
    let grammar = assemble(&ok_passes, rankings.as_deref(), cfg.k, cfg.mode)?;
    write_json(&layout.grammar(), &grammar)?;

    let summary = InduceSummary {
        molecules: data.len(),
        passes: cfg.passes,
        msgs_written: ok_passes.iter().map(Vec::len).sum(),
        failures,
        rules: grammar.len(),
        total_count: grammar.total_count(),
        grammar: layout.grammar(),
    };
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub molecules: usize,
    pub discrepant: usize,
    pub standings: Vec<Standing>,
    pub grammar: PathBuf,
}

/// Reloads MSGs and logs written by [`induce`], runs the tournaments and
/// writes standings plus the Top-k grammar.
pub fn rank(cfg: &RunConfig, remote: &Remote) -> Result<RankSummary, PipelineError> {
    cfg.validate()?;
    let data = read_dataset(&cfg.dataset)?;
    let layout = Layout::new(&cfg.output);
    let failed: Vec<Failure> = if layout.failures().exists() { read_json(&layout.failures())? } else { Vec::new() };
    let mut kept = Vec::new();
    let mut passes = Vec::new();
    for (i, entry) in data.iter().enumerate() {
        if failed.iter().any(|f| f.molecule == i) {
            continue;
        }
        let mut ps = Vec::new();
        for p in 0..cfg.passes {
            let msg: Msg = read_json(&layout.msg(i, p))?;
            let log_path = layout.log(i, p);
            let log = if log_path.exists() { Some(read_json(&log_path)?) } else { None };
            ps.push(Pass { msg, log });
        }
        kept.push((i, entry.clone()));
        passes.push(ps);
    }
    let entries: Vec<DatasetEntry> = kept.iter().map(|(_, e)| e.clone()).collect();
    let judge = build_judge(cfg, remote);
    let rankings = rank_passes(cfg, &entries, &passes, judge.as_ref())?;
    remote.save()?;
    let grammar = assemble(&passes, Some(&rankings), cfg.k, AssemblyMode::TopK)?;
    write_json(&layout.topk_grammar(), &grammar)?;
    let standings: Vec<Standing> = kept
        .into_iter()
        .zip(rankings)
        .map(|((molecule, e), ranking)| Standing { molecule, smiles: e.smiles, ranking })
        .collect();
    write_json(&layout.standings(), &standings)?;
    Ok(RankSummary {
        molecules: standings.len(),
        discrepant: standings.iter().filter(|s| s.ranking.discrepant()).count(),
        standings,
        grammar: layout.topk_grammar(),
    })
}

pub fn load_grammar(path: &Path) -> Result<Grammar, PipelineError> {
    let g: Grammar = read_json(path)?;
    if g.format != GRAMMAR_FORMAT {
        return Err(PipelineError::NotAGrammar { path: path.to_owned() });
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub samples: Vec<String>,
    /// Rejections by reason over all attempts, accepted slots included.
    pub rejections: BTreeMap<String, usize>,
    pub report: MetricReport,
}

/// Draws `cfg.samples` slots from `grammar`, writes `samples.smi` and the
/// metric report.
pub fn generate(cfg: &RunConfig, grammar: &Grammar) -> Result<GenerateSummary, PipelineError> {
    let pool = thread_pool(cfg.workers)?;
    let outcomes: Vec<_> = pool.install(|| {
        (0..cfg.samples as u64)
            .into_par_iter()
            .map(|i| sample_slot(grammar, cfg.seed, i, cfg.limits, cfg.max_attempts))
            .collect()
    });
    let mut samples = Vec::new();
    let mut rejected_slots = 0;
    let mut rejections: BTreeMap<String, usize> = BTreeMap::new();
    for o in &outcomes {
        for (_, reason) in &o.rejections {
            *rejections.entry(reason_name(*reason).to_owned()).or_default() += 1;
        }
        match &o.accepted {
            Some((_, s)) => samples.push(write_smiles(&s.molecule)),
            None => rejected_slots += 1,
        }
    }
    let train: Vec<String> = read_dataset(&cfg.dataset)?.into_iter().map(|e| e.smiles).collect();
    let pattern = membership_pattern(cfg)?.unwrap_or_else(empty_pattern);
    let report = evaluate(&samples, &train, &pattern, rejected_slots)?;
    let layout = Layout::new(&cfg.output);
    let mut text = samples.join("\n");
    text.push('\n');
    crate::files::write_atomic(&layout.samples(), text.as_bytes())
        .map_err(|source| FileError::Io { path: layout.samples(), source })?;
    write_json(&layout.report(), &report)?;
    if report.valid == 0.0 {
        return Err(PipelineError::NoValidSamples);
    }
    Ok(GenerateSummary { samples, rejections, report })
}

fn reason_name(r: RejectReason) -> &'static str {
    match r {
        RejectReason::DepthExceeded => "depth_exceeded",
        RejectReason::SizeExceeded => "size_exceeded",
        RejectReason::ValenceViolation => "valence_violation",
        RejectReason::DeadEnd => "dead_end",
    }
}

fn empty_pattern() -> MolecularGraph {
    MolecularGraph::new(Vec::new(), Vec::new()).expect("empty graph")
}

/// Metrics for an existing sample file against the configured dataset.
pub fn eval(cfg: &RunConfig, samples: &Path) -> Result<MetricReport, PipelineError> {
    let samples = read_lines(samples)?;
    let train: Vec<String> = read_dataset(&cfg.dataset)?.into_iter().map(|e| e.smiles).collect();
    let pattern = membership_pattern(cfg)?.unwrap_or_else(empty_pattern);
    Ok(evaluate(&samples, &train, &pattern, 0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripSummary {
    pub molecules: usize,
    pub reproduced: usize,
    pub mismatched: Vec<String>,
    pub failures: Vec<Failure>,
}

/// Decomposes each molecule once and re-derives it from its own MSG.
pub fn roundtrip_check(cfg: &RunConfig, remote: &Remote) -> Result<RoundTripSummary, PipelineError> {
    cfg.validate()?;
    let data = read_dataset(&cfg.dataset)?;
    let oracle = build_oracle(cfg, remote)?;
    let one = RunConfig { passes: 1, ..cfg.clone() };
    let results = decompose_dataset(&one, &data, oracle.as_ref())?;
    remote.save()?;
    let mut summary = RoundTripSummary { molecules: data.len(), reproduced: 0, mismatched: Vec::new(), failures: Vec::new() };
    for (entry, r) in data.iter().zip(results) {
        match r {
            Ok(ps) => match derive_msg(&ps[0].msg) {
                Ok(back) if isomorphic(&back, &entry.molecule) => summary.reproduced += 1,
                _ => summary.mismatched.push(entry.smiles.clone()),
            },
            Err(f) => summary.failures.push(f),
        }
    }
    Ok(summary)
}
