//! Selection oracles: the request/response contract, the atom-numbered text
//! encoding, heuristic and seeded-random policies, and a prompt-chain client
//! that runs over any chat transport.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::Clique;
use crate::molecule::{substructure_matches, write_smiles_mapped, MolecularGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Triangulate,
    Merge,
    EdgeElim,
    Root,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Triangulate => "triangulate",
            Phase::Merge => "merge",
            Phase::EdgeElim => "edge_elim",
            Phase::Root => "root",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Single,
    Pair,
}

/// A choice refers to motifs by their index in `SelectionRequest::motifs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Choice {
    Single(usize),
    Pair(usize, usize),
}

/// One clique of the current clique graph as shown to the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Motif {
    pub clique: Clique,
    /// Sorted atom IDs covered by the clique's bonds.
    pub atoms: Vec<usize>,
}

impl Motif {
    pub fn new(g: &MolecularGraph, clique: Clique) -> Self {
        let atoms = g.atoms_of_bonds(&clique.members);
        Motif { clique, atoms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRequest {
    pub kind: SelectionKind,
    pub phase: Phase,
    pub choices: Vec<Choice>,
    pub context: String,
    pub allow_refusal: bool,
    /// Per-request seed derived from the decomposition seed and step.
    pub seed: u64,
    pub step: usize,
    pub motifs: Vec<Motif>,
    #[serde(skip)]
    pub molecule: Option<MolecularGraph>,
}

impl SelectionRequest {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.choices.is_empty() {
            return Err(OracleError::InvalidRequest("no choices".to_owned()));
        }
        for c in &self.choices {
            let ok = match (self.kind, *c) {
                (SelectionKind::Single, Choice::Single(i)) => i < self.motifs.len(),
                (SelectionKind::Pair, Choice::Pair(i, j)) => i < self.motifs.len() && j < self.motifs.len() && i != j,
                _ => false,
            };
            if !ok {
                return Err(OracleError::InvalidRequest(format!("malformed choice {c:?}")));
            }
        }
        Ok(())
    }

    fn pair(&self, i: usize) -> (&Motif, &Motif) {
        match self.choices[i] {
            Choice::Pair(a, b) => (&self.motifs[a], &self.motifs[b]),
            Choice::Single(a) => (&self.motifs[a], &self.motifs[a]),
        }
    }

    fn single(&self, i: usize) -> &Motif {
        match self.choices[i] {
            Choice::Single(a) | Choice::Pair(a, _) => &self.motifs[a],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResponse {
    /// Index into `choices`, or `None` for a refusal.
    pub chosen: Option<usize>,
    pub reasoning: String,
    pub summarized: String,
}

impl SelectionResponse {
    pub fn validate(&self, req: &SelectionRequest) -> Result<(), OracleError> {
        match self.chosen {
            None if !req.allow_refusal => Err(OracleError::RefusalNotAllowed),
            Some(i) if i >= req.choices.len() => Err(OracleError::ParseFailure(format!(
                "choice {i} out of range for {} options",
                req.choices.len()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("could not extract an answer: {0}")]
    ParseFailure(String),
    #[error("refusal is not allowed in this phase")]
    RefusalNotAllowed,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("script exhausted at step {0}")]
    ScriptExhausted(usize),
}

pub trait Oracle: Send + Sync {
    fn select(&self, req: &SelectionRequest) -> Result<SelectionResponse, OracleError>;
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn select(&self, req: &SelectionRequest) -> Result<SelectionResponse, OracleError> {
        (**self).select(req)
    }
}

impl<T: Oracle + ?Sized> Oracle for Box<T> {
    fn select(&self, req: &SelectionRequest) -> Result<SelectionResponse, OracleError> {
        (**self).select(req)
    }
}

/// Atom-mapped SMILES followed by one `Motif i: a,b,c` line per motif, with
/// 1-based atom numbers in parse order.
pub fn encode_text(g: &MolecularGraph, motifs: &[Clique]) -> String {
    let mut s = write_smiles_mapped(g);
    for (i, m) in motifs.iter().enumerate() {
        let atoms: Vec<String> = g.atoms_of_bonds(&m.members).iter().map(|a| (a + 1).to_string()).collect();
        let _ = write!(s, "\nMotif {}: {}", i + 1, atoms.join(","));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum MergePolicy {
    /// Always refuse: the merge phase is skipped.
    Off,
    /// Merge the pair sharing the most bonds, provided the union stays
    /// within `cap` bonds; refuse otherwise.
    SharedBonds { cap: usize },
    /// Merge only inside occurrences of `pattern` until each occurrence
    /// lies in a single clique.
    Pattern { pattern: MolecularGraph },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeElimPolicy {
    /// Drop the edge with the smallest clique intersection.
    MinIntersection,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RootPolicy {
    Largest,
    Random,
    /// The clique holding the most bonds of a `pattern` occurrence, then largest.
    Pattern { pattern: MolecularGraph },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicPolicy {
    pub merge: MergePolicy,
    pub edge_elim: EdgeElimPolicy,
    pub root: RootPolicy,
}

pub const DEFAULT_MERGE_CAP: usize = 8;

impl Default for HeuristicPolicy {
    fn default() -> Self {
        HeuristicPolicy {
            merge: MergePolicy::SharedBonds { cap: DEFAULT_MERGE_CAP },
            edge_elim: EdgeElimPolicy::MinIntersection,
            root: RootPolicy::Largest,
        }
    }
}

impl HeuristicPolicy {
    /// Motif-guided merging and rooting for a class-defining pattern.
    pub fn pattern_guided(pattern: MolecularGraph) -> Self {
        HeuristicPolicy {
            merge: MergePolicy::Pattern { pattern: pattern.clone() },
            edge_elim: EdgeElimPolicy::MinIntersection,
            root: RootPolicy::Pattern { pattern },
        }
    }

    pub fn without_merge(mut self) -> Self {
        self.merge = MergePolicy::Off;
        self
    }
}

/// Deterministic policy oracle; a pure function of the request.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeuristicOracle {
    pub policy: HeuristicPolicy,
}

impl HeuristicOracle {
    pub fn new(policy: HeuristicPolicy) -> Self {
        HeuristicOracle { policy }
    }
}

impl Oracle for HeuristicOracle {
    fn select(&self, req: &SelectionRequest) -> Result<SelectionResponse, OracleError> {
        req.validate()?;
        let resp = heuristic_select(req, &self.policy);
        resp.validate(req)?;
        Ok(resp)
    }
}

fn shared_len(a: &Clique, b: &Clique) -> usize {
    a.members.iter().filter(|&&x| b.contains(x)).count()
}

fn union_len(a: &Clique, b: &Clique) -> usize {
    a.len() + b.len() - shared_len(a, b)
}

fn argmax_by<K: Ord>(n: usize, mut key: impl FnMut(usize) -> K) -> usize {
    let mut best = 0;
    let mut best_key = key(0);
    for i in 1..n {
        let k = key(i);
        if k > best_key {
            best = i;
            best_key = k;
        }
    }
    best
}

/// Bond sets of every occurrence of `pattern` in the request's molecule.
fn occurrences(req: &SelectionRequest, pattern: &MolecularGraph) -> Vec<Vec<usize>> {
    let Some(g) = &req.molecule else { return Vec::new() };
    let mut out: Vec<Vec<usize>> = Vec::new();
    for m in substructure_matches(g, pattern) {
        let mut bonds: Vec<usize> = pattern
            .bonds()
            .iter()
            .filter_map(|b| g.bond_between(m[b.atoms[0]], m[b.atoms[1]]))
            .collect();
        bonds.sort_unstable();
        if !out.contains(&bonds) {
            out.push(bonds);
        }
    }
    out
}

fn respond(chosen: Option<usize>, why: String) -> SelectionResponse {
    SelectionResponse { chosen, summarized: why.clone(), reasoning: why }
}

fn motif_label(req: &SelectionRequest, m: &Motif) -> usize {
    req.motifs.iter().position(|x| x.clique.id == m.clique.id).map_or(0, |i| i + 1)
}

pub fn heuristic_select(req: &SelectionRequest, policy: &HeuristicPolicy) -> SelectionResponse {
    let n = req.choices.len();
    match req.phase {
        Phase::Triangulate => {
            let i = argmax_by(n, |i| {
                let (a, b) = req.pair(i);
                (shared_len(&a.clique, &b.clique), core::cmp::Reverse(union_len(&a.clique, &b.clique)))
            });
            let (a, b) = req.pair(i);
            respond(
                Some(i),
                format!(
                    "Motif {} and Motif {} overlap the most, so joining them closes the open ring cheaply.",
                    motif_label(req, a),
                    motif_label(req, b)
                ),
            )
        }
        Phase::Merge => merge_select(req, &policy.merge),
        Phase::EdgeElim => {
            let i = match policy.edge_elim {
                EdgeElimPolicy::MinIntersection => argmax_by(n, |i| {
                    let (a, b) = req.pair(i);
                    core::cmp::Reverse(shared_len(&a.clique, &b.clique))
                }),
                EdgeElimPolicy::Random => ChaCha8Rng::seed_from_u64(req.seed).random_range(0..n),
            };
            let (a, b) = req.pair(i);
            respond(
                Some(i),
                format!(
                    "The link between Motif {} and Motif {} carries the least shared structure, so it is cut.",
                    motif_label(req, a),
                    motif_label(req, b)
                ),
            )
        }
        Phase::Root => {
            let largest = |i: usize| req.single(i).clique.len();
            let i = match &policy.root {
                RootPolicy::Largest => argmax_by(n, largest),
                RootPolicy::Random => ChaCha8Rng::seed_from_u64(req.seed).random_range(0..n),
                RootPolicy::Pattern { pattern } => {
                    let occ = occurrences(req, pattern);
                    argmax_by(n, |i| {
                        let c = &req.single(i).clique;
                        let hits = occ.iter().map(|o| o.iter().filter(|&&b| c.contains(b)).count()).max().unwrap_or(0);
                        (hits, largest(i))
                    })
                }
            };
            respond(
                Some(i),
                format!("Motif {} is the most central piece and anchors the rest.", motif_label(req, req.single(i))),
            )
        }
    }
}

fn merge_select(req: &SelectionRequest, policy: &MergePolicy) -> SelectionResponse {
    let refuse = |why: &str| respond(None, why.to_owned());
    match policy {
        MergePolicy::Off => refuse("No merge is needed."),
        MergePolicy::SharedBonds { cap } => {
            let eligible: Vec<usize> = (0..req.choices.len())
                .filter(|&i| {
                    let (a, b) = req.pair(i);
                    shared_len(&a.clique, &b.clique) >= 1 && union_len(&a.clique, &b.clique) <= *cap
                })
                .collect();
            let Some(&i) = eligible.iter().max_by_key(|&&i| {
                let (a, b) = req.pair(i);
                (shared_len(&a.clique, &b.clique), core::cmp::Reverse(i))
            }) else {
                return refuse("Every remaining pair would form an oversized motif.");
            };
            let (a, b) = req.pair(i);
            respond(
                Some(i),
                format!(
                    "Motif {} and Motif {} share bonds and together form one compact unit.",
                    motif_label(req, a),
                    motif_label(req, b)
                ),
            )
        }
        MergePolicy::Pattern { pattern } => {
            let occ = occurrences(req, pattern);
            let covered = |o: &Vec<usize>| req.motifs.iter().any(|m| o.iter().all(|&b| m.clique.contains(b)));
            // (fully inside, bonds gained, smaller union)
            type Score = (bool, usize, core::cmp::Reverse<usize>);
            let mut best: Option<(usize, Score)> = None;
            for o in occ.iter().filter(|o| !covered(o)) {
                for i in 0..req.choices.len() {
                    let (a, b) = req.pair(i);
                    let touches = |c: &Clique| o.iter().any(|&x| c.contains(x));
                    if !touches(&a.clique) || !touches(&b.clique) {
                        continue;
                    }
                    let inside = a.clique.members.iter().chain(&b.clique.members).all(|x| o.contains(x));
                    let gain = o.iter().filter(|&&x| a.clique.contains(x) || b.clique.contains(x)).count();
                    let key = (inside, gain, core::cmp::Reverse(union_len(&a.clique, &b.clique)));
                    if best.as_ref().is_none_or(|(_, k)| key > *k) {
                        best = Some((i, key));
                    }
                }
            }
            match best {
                Some((i, _)) => {
                    let (a, b) = req.pair(i);
                    respond(
                        Some(i),
                        format!(
                            "Motif {} and Motif {} both belong to the class-defining group and should stay together.",
                            motif_label(req, a),
                            motif_label(req, b)
                        ),
                    )
                }
                None => refuse("The class-defining group already sits in a single motif."),
            }
        }
    }
}

/// Uniform choices from the request seed; merges refuse half of the time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RandomOracle;

impl Oracle for RandomOracle {
    fn select(&self, req: &SelectionRequest) -> Result<SelectionResponse, OracleError> {
        req.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        if req.allow_refusal && req.phase == Phase::Merge && rng.random_bool(0.5) {
            return Ok(respond(None, "Random refusal.".to_owned()));
        }
        let i = rng.random_range(0..req.choices.len());
        Ok(respond(Some(i), format!("Random pick {}.", i + 1)))
    }
}

/// Replays recorded responses in order, ignoring request content. Used to
/// reproduce a decomposition from its log.
#[derive(Debug)]
pub struct ScriptedOracle {
    responses: Vec<SelectionResponse>,
    next: core::sync::atomic::AtomicUsize,
}

impl ScriptedOracle {
    pub fn new(responses: Vec<SelectionResponse>) -> Self {
        ScriptedOracle { responses, next: core::sync::atomic::AtomicUsize::new(0) }
    }
}

impl Oracle for ScriptedOracle {
    fn select(&self, req: &SelectionRequest) -> Result<SelectionResponse, OracleError> {
        let i = self.next.fetch_add(1, core::sync::atomic::Ordering::SeqCst);
        let resp = self.responses.get(i).cloned().ok_or(OracleError::ScriptExhausted(i))?;
        resp.validate(req)?;
        Ok(resp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        ChatMessage { role: role.to_owned(), content: content.into() }
    }
}

/// A chat-completion endpoint: given the conversation so far, returns the
/// assistant's reply.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, OracleError>;
}

/// Prompt templates. `<name>` marks a slot filled per request:
/// `<molecule>`, `<choices>`, `<phase>`, `<answer>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub system: String,
    pub describe: String,
    pub triangulate: String,
    pub merge: String,
    pub edge_elim: String,
    pub root: String,
    pub extract_single: String,
    pub extract_pair: String,
    pub summarize: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            system: "You are an organic chemist helping to split molecules into meaningful building blocks.".into(),
            describe: "Atoms in the molecule below carry numbers, and each motif lists the atoms it covers.\n<molecule>\n\
                       Describe what each motif is in chemical terms."
                .into(),
            triangulate: "Some motifs form a loop that must be closed by joining two of them. Options:\n<choices>\n\
                          Which pair is most natural to join? Explain briefly."
                .into(),
            merge: "You may join two neighbouring motifs into one if they belong to the same functional group. \
                    Options:\n<choices>\nPick the pair to join, or say none if every motif is already complete."
                .into(),
            edge_elim: "These motif pairs form a loop of connections; one connection must be dropped. Options:\n\
                        <choices>\nWhich connection is the weakest?"
                .into(),
            root: "Choose the motif that best represents the core of the molecule. Options:\n<choices>".into(),
            extract_single: "Reply with only the chosen motif number, or none.".into(),
            extract_pair: "Reply with only the two chosen motif numbers separated by a comma, or none.".into(),
            summarize: "Summarize your reasoning for this step in one sentence.".into(),
        }
    }
}

impl PromptSet {
    pub fn task(&self, phase: Phase) -> &str {
        match phase {
            Phase::Triangulate => &self.triangulate,
            Phase::Merge => &self.merge,
            Phase::EdgeElim => &self.edge_elim,
            Phase::Root => &self.root,
        }
    }
}

pub fn fill_template(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_owned();
    for (name, value) in slots {
        out = out.replace(&format!("<{name}>"), value);
    }
    out
}

pub fn render_choices(req: &SelectionRequest) -> String {
    let mut s = String::new();
    for c in &req.choices {
        match *c {
            Choice::Single(i) => {
                let _ = writeln!(s, "- Motif {}", i + 1);
            }
            Choice::Pair(i, j) => {
                let _ = writeln!(s, "- Motif {} and Motif {}", i + 1, j + 1);
            }
        }
    }
    s
}

/// Parses an extraction reply ("5,7", "Motif 5", "none") into a choice index.
pub fn parse_answer(req: &SelectionRequest, reply: &str) -> Result<Option<usize>, OracleError> {
    let numbers: Vec<usize> = reply
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse().ok())
        .collect();
    if numbers.is_empty() {
        let lower = reply.to_ascii_lowercase();
        if lower.contains("none") || lower.contains("refus") {
            return if req.allow_refusal { Ok(None) } else { Err(OracleError::RefusalNotAllowed) };
        }
        return Err(OracleError::ParseFailure(format!("no motif numbers in {reply:?}")));
    }
    let wanted = match req.kind {
        SelectionKind::Single => Choice::Single(numbers[0].wrapping_sub(1)),
        SelectionKind::Pair if numbers.len() >= 2 => Choice::Pair(numbers[0].wrapping_sub(1), numbers[1].wrapping_sub(1)),
        SelectionKind::Pair => return Err(OracleError::ParseFailure(format!("expected two motif numbers in {reply:?}"))),
    };
    req.choices
        .iter()
        .position(|&c| match (c, wanted) {
            (Choice::Pair(a, b), Choice::Pair(x, y)) => (a, b) == (x, y) || (a, b) == (y, x),
            _ => c == wanted,
        })
        .map(Some)
        .ok_or_else(|| OracleError::ParseFailure(format!("{reply:?} names no offered option")))
}

/// Prompt-chain oracle: describe, task, extract, summarize; one chat round
/// trip per stage, each appended to the same conversation.
pub struct ChatOracle<T> {
    pub transport: T,
    pub prompts: PromptSet,
}

impl<T: ChatTransport> ChatOracle<T> {
    pub fn new(transport: T, prompts: PromptSet) -> Self {
        ChatOracle { transport, prompts }
    }

    fn ask(&self, convo: &mut Vec<ChatMessage>, prompt: String) -> Result<String, OracleError> {
        convo.push(ChatMessage::new("user", prompt));
        let reply = self.transport.complete(convo)?;
        convo.push(ChatMessage::new("assistant", reply.clone()));
        Ok(reply)
    }
}

impl<T: ChatTransport> Oracle for ChatOracle<T> {
    fn select(&self, req: &SelectionRequest) -> Result<SelectionResponse, OracleError> {
        req.validate()?;
        let choices = render_choices(req);
        let slots = [("molecule", req.context.as_str()), ("choices", choices.as_str()), ("phase", req.phase.name())];
        let mut convo = alloc::vec![ChatMessage::new("system", self.prompts.system.clone())];
        self.ask(&mut convo, fill_template(&self.prompts.describe, &slots))?;
        let reasoning = self.ask(&mut convo, fill_template(self.prompts.task(req.phase), &slots))?;
        let extract = match req.kind {
            SelectionKind::Single => &self.prompts.extract_single,
            SelectionKind::Pair => &self.prompts.extract_pair,
        };
        let answer = self.ask(&mut convo, fill_template(extract, &slots))?;
        let chosen = parse_answer(req, &answer)?;
        let summarized = self.ask(&mut convo, fill_template(&self.prompts.summarize, &slots))?;
        let resp = SelectionResponse { chosen, reasoning, summarized: summarized.trim().to_owned() };
        resp.validate(req)?;
        Ok(resp)
    }
}
