//! Oracle-guided clique-tree decomposition: triangulate, merge, eliminate
//! cycles from the clique graph, and pick a root.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chordal::{candidate_merge_pairs, is_chordal, merge_cliques, ChordalError, Chordality};
use crate::hypergraph::{
    build_base_hypergraph, clique_extract, graph_of, BondGraph, Clique, CliqueGraph, CliqueId, Hypergraph,
};
use crate::molecule::{minimal_rings, MolecularGraph};
use crate::oracle::{
    encode_text, Choice, HeuristicOracle, Motif, Oracle, OracleError, Phase, ScriptedOracle, SelectionKind,
    SelectionRequest, SelectionResponse,
};
use crate::seed::derive_seed;

/// Call counts at the end of each phase: entries `0..t1` triangulate,
/// `t1..t2` merge, `t2..t3` edge elimination, `t3..t` root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PhaseMarks {
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    pub t: usize,
}

impl PhaseMarks {
    pub fn phase_of(&self, step: usize) -> Phase {
        if step < self.t1 {
            Phase::Triangulate
        } else if step < self.t2 {
            Phase::Merge
        } else if step < self.t3 {
            Phase::EdgeElim
        } else {
            Phase::Root
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueTree {
    /// Nodes sorted by member list.
    pub nodes: Vec<Clique>,
    /// `(parent, child)` node indices.
    pub tree_edges: Vec<(usize, usize)>,
    pub root: usize,
    pub phase_marks: PhaseMarks,
}

impl CliqueTree {
    pub fn root_id(&self) -> CliqueId {
        self.nodes[self.root].id
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.tree_edges.iter().find(|e| e.1 == node).map(|e| e.0)
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        self.tree_edges.iter().filter(|e| e.0 == node).map(|e| e.1).collect()
    }

    /// Nodes in breadth-first order from the root.
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut order = vec![self.root];
        let mut i = 0;
        while i < order.len() {
            order.extend(self.children(order[i]));
            i += 1;
        }
        order
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub phase: Phase,
    pub request: SelectionRequest,
    pub response: SelectionResponse,
    /// Failed attempts before this response.
    #[serde(default)]
    pub failures: Vec<String>,
    /// The response came from the heuristic fallback after repeated failures.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecompositionLog {
    pub entries: Vec<LogEntry>,
    pub phase_marks: PhaseMarks,
}

impl DecompositionLog {
    pub fn responses(&self) -> Vec<SelectionResponse> {
        self.entries.iter().map(|e| e.response.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecomposeError {
    #[error("molecule has no bonds")]
    DegenerateMolecule,
    #[error("molecule is not connected")]
    Disconnected,
    #[error("oracle failed after {attempts} attempts: {last}")]
    OracleFailure { attempts: usize, last: OracleError },
    #[error(transparent)]
    Chordal(#[from] ChordalError),
    #[error("no edge of the cycle {0:?} can be removed without breaking running intersection")]
    NoRemovableEdge(Vec<usize>),
    #[error("hyperedge {0} is not contained in any tree node")]
    UncoveredHyperedge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeViolation {
    #[error("bond {0} is in no node")]
    Coverage(usize),
    #[error("hyperedge {0} is not assigned to exactly one containing node")]
    Assignment(usize),
    #[error("nodes containing bond {0} are not connected")]
    RunningIntersection(usize),
    #[error("tree edges do not form a spanning tree")]
    NotATree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecomposeOptions {
    pub max_attempts: usize,
    /// Use the default heuristic after `max_attempts` failures instead of
    /// aborting.
    pub heuristic_fallback: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { max_attempts: 3, heuristic_fallback: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub hypergraph: Hypergraph,
    pub tree: CliqueTree,
    /// Tree node index per base hyperedge.
    pub assignment: Vec<usize>,
    pub log: DecompositionLog,
}

struct Driver<'a, O> {
    g: &'a MolecularGraph,
    oracle: &'a O,
    seed: u64,
    opts: DecomposeOptions,
    log: DecompositionLog,
}

impl<O: Oracle> Driver<'_, O> {
    fn ask(
        &mut self,
        phase: Phase,
        kind: SelectionKind,
        cliques: &[Clique],
        choices: Vec<Choice>,
        allow_refusal: bool,
    ) -> Result<Option<usize>, DecomposeError> {
        let step = self.log.entries.len();
        let req = SelectionRequest {
            kind,
            phase,
            choices,
            context: encode_text(self.g, cliques),
            allow_refusal,
            seed: derive_seed(self.seed, step as u64),
            step,
            motifs: cliques.iter().map(|c| Motif::new(self.g, c.clone())).collect(),
            molecule: Some(self.g.clone()),
        };
        let mut failures = Vec::new();
        let mut response = None;
        for _ in 0..self.opts.max_attempts.max(1) {
            match self.oracle.select(&req).and_then(|r| r.validate(&req).map(|()| r)) {
                Ok(r) => {
                    response = Some(r);
                    break;
                }
                Err(e) => failures.push(e),
            }
        }
        let fallback = response.is_none();
        let response = match response {
            Some(r) => r,
            None if self.opts.heuristic_fallback => HeuristicOracle::default()
                .select(&req)
                .map_err(|last| DecomposeError::OracleFailure { attempts: failures.len(), last })?,
            None => {
                let last = failures.pop().expect("at least one attempt");
                return Err(DecomposeError::OracleFailure { attempts: failures.len() + 1, last });
            }
        };
        let chosen = response.chosen;
        self.log.entries.push(LogEntry {
            step,
            phase,
            request: req,
            response,
            failures: failures.iter().map(|e| format!("{e}")).collect(),
            fallback,
        });
        Ok(chosen)
    }
}

fn index_pairs(gc: &CliqueGraph, pairs: &[(CliqueId, CliqueId)]) -> Vec<Choice> {
    pairs
        .iter()
        .map(|&(a, b)| Choice::Pair(gc.index_of(a).expect("known clique"), gc.index_of(b).expect("known clique")))
        .collect()
}

/// Runs the four oracle phases on `g`. Every oracle call becomes one log entry.
pub fn decompose<O: Oracle>(g: &MolecularGraph, oracle: &O, seed: u64) -> Result<Decomposition, DecomposeError> {
    decompose_with(g, oracle, seed, DecomposeOptions::default())
}

pub fn decompose_with<O: Oracle>(
    g: &MolecularGraph,
    oracle: &O,
    seed: u64,
    opts: DecomposeOptions,
) -> Result<Decomposition, DecomposeError> {
    if g.bond_count() == 0 {
        return Err(DecomposeError::DegenerateMolecule);
    }
    if !g.is_connected() {
        return Err(DecomposeError::Disconnected);
    }
    let h = build_base_hypergraph(g, &minimal_rings(g)).map_err(|_| DecomposeError::DegenerateMolecule)?;
    let mut gh = graph_of(&h);
    let mut gc = clique_extract(&gh);
    let mut d = Driver { g, oracle, seed, opts, log: DecompositionLog::default() };

    // triangulation: one fill pair per round, resolved by merging two cliques
    while let Chordality::Fill(fp) = is_chordal(&gh) {
        let pairs = candidate_merge_pairs(&fp, &gc)?;
        let choices = index_pairs(&gc, &pairs);
        let i = d.ask(Phase::Triangulate, SelectionKind::Pair, &gc.cliques, choices, false)?.expect("refusal rejected");
        (gh, gc) = merge_cliques(&gh, &gc, pairs[i].0, pairs[i].1)?;
    }
    let t1 = d.log.entries.len();

    // optional merges of adjacent cliques, limited to those keeping G_H chordal
    let cap = gc.cliques.len();
    for _ in 0..cap {
        let pairs: Vec<(CliqueId, CliqueId)> = gc
            .edges
            .iter()
            .filter(|&&(i, j)| merge_keeps_chordal(&gh, &gc.cliques[i], &gc.cliques[j]))
            .map(|&(i, j)| (gc.cliques[i].id, gc.cliques[j].id))
            .collect();
        if pairs.is_empty() {
            break;
        }
        let choices = index_pairs(&gc, &pairs);
        match d.ask(Phase::Merge, SelectionKind::Pair, &gc.cliques, choices, true)? {
            Some(i) => (gh, gc) = merge_cliques(&gh, &gc, pairs[i].0, pairs[i].1)?,
            None => break,
        }
    }
    let t2 = d.log.entries.len();

    // cycle elimination on the clique graph
    let mut edges: BTreeSet<(usize, usize)> = gc.edges.iter().copied().collect();
    let target = max_spanning_weight(&gc.cliques, &edges).expect("clique graph of a connected molecule is connected");
    while edges.len() + 1 > gc.cliques.len() {
        let cycle = shortest_cycle(gc.cliques.len(), &edges).expect("graph with n or more edges has a cycle");
        // a removal is safe when the remaining graph still holds a clique
        // tree, i.e. a maximum-weight spanning tree keeps the optimal weight
        let safe = |edges: &BTreeSet<(usize, usize)>, e: (usize, usize)| {
            if !check_running_intersection(&gc.cliques, edges, e) {
                return false;
            }
            let mut rest = edges.clone();
            rest.remove(&e);
            max_spanning_weight(&gc.cliques, &rest) == Some(target)
        };
        let mut candidates: Vec<(usize, usize)> = cycle_edges(&cycle).into_iter().filter(|&e| safe(&edges, e)).collect();
        if candidates.is_empty() {
            candidates = edges
                .iter()
                .copied()
                .filter(|&e| on_cycle(gc.cliques.len(), &edges, e) && safe(&edges, e))
                .collect();
        }
        if candidates.is_empty() {
            return Err(DecomposeError::NoRemovableEdge(cycle));
        }
        let choices = candidates.iter().map(|&(a, b)| Choice::Pair(a, b)).collect();
        let i = d.ask(Phase::EdgeElim, SelectionKind::Pair, &gc.cliques, choices, false)?.expect("refusal rejected");
        edges.remove(&candidates[i]);
    }
    let t3 = d.log.entries.len();

    let choices = (0..gc.cliques.len()).map(Choice::Single).collect();
    let root = match d.ask(Phase::Root, SelectionKind::Single, &gc.cliques, choices, true)? {
        Some(i) => i,
        None => largest_clique(&gc.cliques),
    };
    let marks = PhaseMarks { t1, t2, t3, t: d.log.entries.len() };
    d.log.phase_marks = marks;

    let tree = orient(gc.cliques, &edges, root, marks);
    let assignment = assign_hyperedges(&tree, &h)?;
    Ok(Decomposition { hypergraph: h, tree, assignment, log: d.log })
}

/// Re-runs a decomposition feeding back the logged responses in order.
pub fn replay(g: &MolecularGraph, log: &DecompositionLog, seed: u64) -> Result<Decomposition, DecomposeError> {
    let scripted = ScriptedOracle::new(log.responses());
    let opts = DecomposeOptions { max_attempts: 1, heuristic_fallback: false };
    decompose_with(g, &scripted, seed, opts)
}

fn largest_clique(cliques: &[Clique]) -> usize {
    let mut best = 0;
    for (i, c) in cliques.iter().enumerate() {
        if c.len() > cliques[best].len() {
            best = i;
        }
    }
    best
}

fn merge_keeps_chordal(gh: &BondGraph, a: &Clique, b: &Clique) -> bool {
    let mut next = gh.clone();
    for &x in &a.members {
        for &y in &b.members {
            next.add_edge(x, y);
        }
    }
    is_chordal(&next).is_chordal()
}

/// Weight of a maximum spanning tree with edge weight `|c_i ∩ c_j|`, or
/// `None` when the graph is disconnected.
fn max_spanning_weight(cliques: &[Clique], edges: &BTreeSet<(usize, usize)>) -> Option<usize> {
    let mut weighted: Vec<(usize, usize, usize)> =
        edges.iter().map(|&(a, b)| (cliques[a].shared(&cliques[b]).len(), a, b)).collect();
    weighted.sort_unstable_by(|x, y| y.cmp(x));
    let mut parent: Vec<usize> = (0..cliques.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let (mut total, mut joined) = (0, 0);
    for (w, a, b) in weighted {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            total += w;
            joined += 1;
        }
    }
    (joined + 1 == cliques.len()).then_some(total)
}

fn adjacency(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

/// Shortest path from `from` to `to` avoiding the direct edge between them.
fn path_avoiding(adj: &[Vec<usize>], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; adj.len()];
    prev[from] = from;
    let mut q = VecDeque::from([from]);
    while let Some(x) = q.pop_front() {
        for &y in &adj[x] {
            if (x == from && y == to) || prev[y] != usize::MAX {
                continue;
            }
            prev[y] = x;
            if y == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            q.push_back(y);
        }
    }
    None
}

/// A shortest cycle as a node sequence; ties go to the first edge in order.
pub fn shortest_cycle(n: usize, edges: &BTreeSet<(usize, usize)>) -> Option<Vec<usize>> {
    let adj = adjacency(n, edges);
    let mut best: Option<Vec<usize>> = None;
    for &(a, b) in edges {
        if let Some(path) = path_avoiding(&adj, a, b) {
            if best.as_ref().is_none_or(|c| path.len() < c.len()) {
                best = Some(path);
            }
        }
    }
    best
}

fn on_cycle(n: usize, edges: &BTreeSet<(usize, usize)>, e: (usize, usize)) -> bool {
    path_avoiding(&adjacency(n, edges), e.0, e.1).is_some()
}

fn cycle_edges(cycle: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..cycle.len())
        .map(|i| {
            let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
            (a.min(b), a.max(b))
        })
        .collect();
    out.sort_unstable();
    out
}

/// True iff, after removing `removed`, the cliques containing each bond still
/// induce a connected subgraph.
pub fn check_running_intersection(
    cliques: &[Clique],
    edges: &BTreeSet<(usize, usize)>,
    removed: (usize, usize),
) -> bool {
    let (a, b) = removed;
    // only bonds shared by both endpoints can lose connectivity
    cliques[a].shared(&cliques[b]).into_iter().all(|bond| {
        let holders: Vec<usize> = (0..cliques.len()).filter(|&i| cliques[i].contains(bond)).collect();
        let mut seen = vec![false; cliques.len()];
        seen[a] = true;
        let mut stack = vec![a];
        while let Some(x) = stack.pop() {
            for &y in &holders {
                let e = (x.min(y), x.max(y));
                if !seen[y] && e != (a.min(b), a.max(b)) && edges.contains(&e) {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen[b]
    })
}

fn orient(nodes: Vec<Clique>, edges: &BTreeSet<(usize, usize)>, root: usize, phase_marks: PhaseMarks) -> CliqueTree {
    let adj = adjacency(nodes.len(), edges);
    let mut seen = vec![false; nodes.len()];
    seen[root] = true;
    let mut tree_edges = Vec::new();
    let mut q = VecDeque::from([root]);
    while let Some(x) = q.pop_front() {
        let mut kids: Vec<usize> = adj[x].iter().copied().filter(|&y| !seen[y]).collect();
        kids.sort_unstable();
        for y in kids {
            seen[y] = true;
            tree_edges.push((x, y));
            q.push_back(y);
        }
    }
    CliqueTree { nodes, tree_edges, root, phase_marks }
}

/// Maps each hyperedge to the containing node with the smallest clique ID.
pub fn assign_hyperedges(tree: &CliqueTree, h: &Hypergraph) -> Result<Vec<usize>, DecomposeError> {
    h.hyperedges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            (0..tree.nodes.len())
                .filter(|&i| e.bonds.iter().all(|&b| tree.nodes[i].contains(b)))
                .min_by_key(|&i| tree.nodes[i].id)
                .ok_or(DecomposeError::UncoveredHyperedge(k))
        })
        .collect()
}

/// Checks coverage, unique hyperedge assignment, running intersection, and
/// that `tree_edges` form a tree rooted at `root`.
pub fn validate_tree(tree: &CliqueTree, h: &Hypergraph, assignment: &[usize]) -> Result<(), TreeViolation> {
    let n = tree.nodes.len();
    if tree.tree_edges.len() + 1 != n {
        return Err(TreeViolation::NotATree);
    }
    let mut parent = vec![usize::MAX; n];
    for &(p, c) in &tree.tree_edges {
        if p >= n || c >= n || c == tree.root || parent[c] != usize::MAX {
            return Err(TreeViolation::NotATree);
        }
        parent[c] = p;
    }
    for start in 0..n {
        let mut x = start;
        let mut hops = 0;
        while x != tree.root {
            x = parent[x];
            hops += 1;
            if x == usize::MAX || hops > n {
                return Err(TreeViolation::NotATree);
            }
        }
    }
    for bond in 0..h.node_count {
        let holders: Vec<usize> = (0..n).filter(|&i| tree.nodes[i].contains(bond)).collect();
        if holders.is_empty() {
            return Err(TreeViolation::Coverage(bond));
        }
        // in a rooted tree, a node set is connected iff exactly one member
        // has its parent outside the set
        let tops = holders.iter().filter(|&&i| i == tree.root || !tree.nodes[parent[i]].contains(bond)).count();
        if tops != 1 {
            return Err(TreeViolation::RunningIntersection(bond));
        }
    }
    if assignment.len() != h.hyperedges.len() {
        return Err(TreeViolation::Assignment(assignment.len().min(h.hyperedges.len())));
    }
    for (k, e) in h.hyperedges.iter().enumerate() {
        let node = assignment[k];
        if node >= n || !e.bonds.iter().all(|&b| tree.nodes[node].contains(b)) {
            return Err(TreeViolation::Assignment(k));
        }
    }
    Ok(())
}
