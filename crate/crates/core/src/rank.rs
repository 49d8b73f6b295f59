//! Ranking alternative decompositions of one molecule: design stories, a
//! Swiss tournament of judged pairings, and a Bradley-Terry fit.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::DecompositionLog;
use crate::hrg::{pool, Grammar, ProductionRule};
use crate::oracle::Phase;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryStep {
    pub step: usize,
    pub phase: Phase,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignStory {
    pub molecule: String,
    pub pass: usize,
    /// Root rationale first, then the remaining steps in timestep order.
    pub steps: Vec<StoryStep>,
}

impl DesignStory {
    /// Plain-text narrative with a header whenever the phase changes.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut current = None;
        for st in &self.steps {
            if current != Some(st.phase) {
                let title = match st.phase {
                    Phase::Root => "Core motif",
                    Phase::Triangulate => "Closing rings",
                    Phase::Merge => "Grouping motifs",
                    Phase::EdgeElim => "Choosing connections",
                };
                let _ = writeln!(s, "## {title}");
                current = Some(st.phase);
            }
            let _ = writeln!(s, "{}. {}", st.step + 1, st.text);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankError {
    #[error("decomposition log is empty")]
    EmptyLog,
    #[error("judge transport: {0}")]
    JudgeTransport(String),
    #[error("judge reply could not be parsed: {0}")]
    JudgeParseFailure(String),
    #[error("k = {k} outside 1..={passes}")]
    BadK { k: usize, passes: usize },
}

pub fn build_story(molecule: &str, pass: usize, log: &DecompositionLog) -> Result<DesignStory, RankError> {
    if log.entries.is_empty() {
        return Err(RankError::EmptyLog);
    }
    let marks = log.phase_marks;
    let step = |e: &crate::decompose::LogEntry| StoryStep {
        step: e.step,
        phase: marks.phase_of(e.step),
        text: e.response.summarized.clone(),
    };
    let mut steps: Vec<StoryStep> = log.entries.iter().filter(|e| e.phase == Phase::Root).map(step).collect();
    steps.extend(log.entries.iter().filter(|e| e.phase != Phase::Root).map(step));
    Ok(DesignStory { molecule: molecule.into(), pass, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub pass_a: usize,
    pub pass_b: usize,
    /// Soft outcome for `pass_a`; `pass_b` receives `1 - weight_a`.
    pub weight_a: f64,
    pub round: usize,
}

/// A pairwise judge. Returns the probability that the story shown first is
/// the better one.
pub trait Judge: Send + Sync {
    fn p_first(&self, molecule: &str, first: &DesignStory, second: &DesignStory) -> Result<f64, RankError>;
}

impl<T: Judge + ?Sized> Judge for &T {
    fn p_first(&self, molecule: &str, first: &DesignStory, second: &DesignStory) -> Result<f64, RankError> {
        (**self).p_first(molecule, first, second)
    }
}

/// Order-debiased weight for `a`: the mean of `p(a first)` and
/// `1 - p(b first)`.
pub fn judge<J: Judge + ?Sized>(
    j: &J,
    a: &DesignStory,
    b: &DesignStory,
    round: usize,
) -> Result<MatchRecord, RankError> {
    let check = |p: f64| {
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(RankError::JudgeParseFailure(format!("probability {p} outside [0, 1]")))
        }
    };
    let ab = check(j.p_first(&a.molecule, a, b)?)?;
    let ba = check(j.p_first(&a.molecule, b, a)?)?;
    Ok(MatchRecord { pass_a: a.pass, pass_b: b.pass, weight_a: (ab + 1.0 - ba) / 2.0, round })
}

/// Test double: the longer story wins outright; equal lengths tie.
#[derive(Debug, Clone, Copy, Default)]
pub struct LengthJudge;

impl Judge for LengthJudge {
    fn p_first(&self, _: &str, first: &DesignStory, second: &DesignStory) -> Result<f64, RankError> {
        Ok(match first.steps.len().cmp(&second.steps.len()) {
            Ordering::Greater => 1.0,
            Ordering::Less => 0.0,
            Ordering::Equal => 0.5,
        })
    }
}

/// Transitive graded judge over fixed positive strengths per pass:
/// `p = s_first / (s_first + s_second)`.
#[derive(Debug, Clone, Default)]
pub struct StrengthJudge {
    pub strengths: Vec<f64>,
}

impl Judge for StrengthJudge {
    fn p_first(&self, _: &str, first: &DesignStory, second: &DesignStory) -> Result<f64, RankError> {
        let (a, b) = (self.strengths[first.pass], self.strengths[second.pass]);
        Ok(a / (a + b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairings {
    pub pairs: Vec<(usize, usize)>,
    pub bye: Option<usize>,
}

/// Pairings for one round. Round 0 pairs in seed order. Later rounds sort by
/// score (then seed) and pair neighbours, searching for a pairing without
/// rematches and falling back to plain neighbour pairing when none exists.
/// With an odd field the lowest-ranked player without a previous bye sits out.
pub fn swiss_schedule(
    k: usize,
    round: usize,
    scores: &[f64],
    played: &[(usize, usize)],
    had_bye: &[usize],
) -> Pairings {
    let mut order: Vec<usize> = (0..k).collect();
    if round > 0 {
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    }
    let mut bye = None;
    if k % 2 == 1 {
        let pos = order.iter().rposition(|p| !had_bye.contains(p)).unwrap_or(order.len() - 1);
        bye = Some(order.remove(pos));
    }
    let met = |a: usize, b: usize| played.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a));
    let pairs = if round == 0 {
        None
    } else {
        let mut used = vec![false; order.len()];
        let mut out = Vec::new();
        pair_without_rematch(&order, &mut used, &mut out, &met).then_some(out)
    };
    let pairs = pairs.unwrap_or_else(|| order.chunks(2).map(|c| (c[0], c[1])).collect());
    Pairings { pairs, bye }
}

fn pair_without_rematch(
    order: &[usize],
    used: &mut [bool],
    out: &mut Vec<(usize, usize)>,
    met: &dyn Fn(usize, usize) -> bool,
) -> bool {
    let Some(i) = used.iter().position(|u| !u) else {
        return true;
    };
    used[i] = true;
    for j in i + 1..order.len() {
        if used[j] || met(order[i], order[j]) {
            continue;
        }
        used[j] = true;
        out.push((order[i], order[j]));
        if pair_without_rematch(order, used, out, met) {
            return true;
        }
        out.pop();
        used[j] = false;
    }
    used[i] = false;
    false
}

pub const BT_EPSILON: f64 = 1e-3;
pub const BT_TOLERANCE: f64 = 1e-8;
const BT_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityVector {
    /// Positive abilities with geometric mean 1 within each connected
    /// component of the comparison graph.
    pub abilities: Vec<f64>,
    /// Component index per player.
    pub component: Vec<usize>,
    /// Some player won or lost every match outright (before clamping).
    pub degenerate: bool,
    pub iterations: usize,
}

fn components(n: usize, matches: &[MatchRecord]) -> Vec<usize> {
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], mut x: usize) -> usize {
        while c[x] != x {
            c[x] = c[c[x]];
            x = c[x];
        }
        x
    }
    for m in matches {
        let (a, b) = (find(&mut comp, m.pass_a), find(&mut comp, m.pass_b));
        if a != b {
            comp[a.max(b)] = a.min(b);
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut comp, i)).collect();
    let mut label = BTreeMap::new();
    roots.iter().map(|r| { let next = label.len(); *label.entry(*r).or_insert(next) }).collect()
}

/// Minorization-maximization fit of `p(i beats j) = a_i / (a_i + a_j)` on
/// soft outcomes clamped to `[ε, 1 − ε]`. Iterates until the largest relative
/// change falls below 1e-8.
pub fn fit_bradley_terry(n: usize, matches: &[MatchRecord]) -> AbilityVector {
    let clamp = |w: f64| w.clamp(BT_EPSILON, 1.0 - BT_EPSILON);
    let mut wins = vec![0.0; n];
    let mut games = vec![0usize; n];
    for m in matches {
        wins[m.pass_a] += clamp(m.weight_a);
        wins[m.pass_b] += clamp(1.0 - m.weight_a);
        games[m.pass_a] += 1;
        games[m.pass_b] += 1;
    }
    let degenerate = (0..n).any(|i| all_same_extreme(i, matches));
    let component = components(n, matches);
    let mut a = vec![1.0; n];
    let mut iterations = 0;
    while iterations < BT_MAX_ITERATIONS {
        iterations += 1;
        let mut denom = vec![0.0; n];
        for m in matches {
            let s = 1.0 / (a[m.pass_a] + a[m.pass_b]);
            denom[m.pass_a] += s;
            denom[m.pass_b] += s;
        }
        let mut next: Vec<f64> = (0..n).map(|i| if games[i] == 0 { 1.0 } else { wins[i] / denom[i] }).collect();
        normalize(&mut next, &component);
        let change = (0..n).map(|i| ((next[i] - a[i]) / a[i]).abs()).fold(0.0, f64::max);
        a = next;
        if change < BT_TOLERANCE {
            break;
        }
    }
    AbilityVector { abilities: a, component, degenerate, iterations }
}

fn all_same_extreme(i: usize, matches: &[MatchRecord]) -> bool {
    let mut outcomes = matches.iter().filter_map(|m| {
        if m.pass_a == i {
            Some(m.weight_a)
        } else if m.pass_b == i {
            Some(1.0 - m.weight_a)
        } else {
            None
        }
    });
    let Some(first) = outcomes.next() else { return false };
    (first == 0.0 || first == 1.0) && outcomes.all(|w| w == first)
}

/// Scales each component to geometric mean 1.
fn normalize(a: &mut [f64], component: &[usize]) {
    let groups = component.iter().copied().max().map_or(0, |m| m + 1);
    for c in 0..groups {
        let members: Vec<usize> = (0..a.len()).filter(|&i| component[i] == c).collect();
        let mean_log = members.iter().map(|&i| libm::log(a[i])).sum::<f64>() / members.len() as f64;
        let g = libm::exp(mean_log);
        for &i in &members {
            a[i] /= g;
        }
    }
}

/// Log-likelihood of soft outcomes under given abilities (clamped weights).
pub fn log_likelihood(abilities: &[f64], matches: &[MatchRecord]) -> f64 {
    matches
        .iter()
        .map(|m| {
            let w = m.weight_a.clamp(BT_EPSILON, 1.0 - BT_EPSILON);
            let (x, y) = (abilities[m.pass_a], abilities[m.pass_b]);
            w * libm::log(x / (x + y)) + (1.0 - w) * libm::log(y / (x + y))
        })
        .sum()
}

/// Best-first order: components by mean tournament score (then smallest
/// member), players within a component by ability; exact ties go to the
/// smaller pass index.
pub fn ranking(fit: &AbilityVector, scores: &[f64]) -> Vec<usize> {
    let n = fit.abilities.len();
    let groups = fit.component.iter().copied().max().map_or(0, |m| m + 1);
    let mut comp_score = vec![(0.0, 0usize, usize::MAX); groups];
    for i in 0..n {
        let c = &mut comp_score[fit.component[i]];
        c.0 += scores.get(i).copied().unwrap_or(0.0);
        c.1 += 1;
        c.2 = c.2.min(i);
    }
    let mean = |c: usize| comp_score[c].0 / comp_score[c].1 as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        let (cx, cy) = (fit.component[x], fit.component[y]);
        mean(cy)
            .partial_cmp(&mean(cx))
            .unwrap_or(Ordering::Equal)
            .then(comp_score[cx].2.cmp(&comp_score[cy].2))
            .then(fit.abilities[y].partial_cmp(&fit.abilities[x]).unwrap_or(Ordering::Equal))
            .then(x.cmp(&y))
    });
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentReport {
    pub matches: Vec<MatchRecord>,
    pub scores: Vec<f64>,
    pub byes: Vec<usize>,
    pub fit: AbilityVector,
    /// Player indices (positions in the story list), best first.
    pub ranking: Vec<usize>,
}

/// Swiss tournament over `stories`; players are positions in the slice.
pub fn tournament<J: Judge + ?Sized>(
    stories: &[DesignStory],
    j: &J,
    rounds: usize,
) -> Result<TournamentReport, RankError> {
    let k = stories.len();
    let mut scores = vec![0.0; k];
    let mut matches = Vec::new();
    let mut played = Vec::new();
    let mut byes = Vec::new();
    if k >= 2 {
        for round in 0..rounds {
            let p = swiss_schedule(k, round, &scores, &played, &byes);
            if let Some(b) = p.bye {
                scores[b] += 0.5;
                byes.push(b);
            }
            for &(a, b) in &p.pairs {
                let mut m = judge(j, &stories[a], &stories[b], round)?;
                m.pass_a = a;
                m.pass_b = b;
                scores[a] += m.weight_a;
                scores[b] += 1.0 - m.weight_a;
                played.push((a, b));
                matches.push(m);
            }
        }
    }
    let fit = fit_bradley_terry(k, &matches);
    let ranking = ranking(&fit, &scores);
    Ok(TournamentReport { matches, scores, byes, fit, ranking })
}

/// Ranking of all passes of one molecule. Passes with identical rule
/// multisets form one entrant; members of a group share its rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeRanking {
    pub molecule: String,
    /// Pass indices, best first; group members are adjacent in pass order.
    pub order: Vec<usize>,
    /// Shared rank (0 = best) per pass.
    pub rank: Vec<usize>,
    /// Representative pass per entrant, in tournament player order.
    pub entrants: Vec<usize>,
    pub report: Option<TournamentReport>,
}

impl MoleculeRanking {
    pub fn discrepant(&self) -> bool {
        self.entrants.len() > 1
    }
}

/// Canonical rule multiset of one pass, used to detect identical passes.
pub fn rule_signature(rules: &[ProductionRule]) -> Vec<String> {
    let mut keys: Vec<String> = rules.iter().map(|r| r.key.clone()).collect();
    keys.sort();
    keys
}

pub fn rank_molecule<J: Judge + ?Sized>(
    molecule: &str,
    stories: &[DesignStory],
    signatures: &[Vec<String>],
    j: &J,
    rounds: usize,
) -> Result<MoleculeRanking, RankError> {
    let mut entrants: Vec<usize> = Vec::new();
    let mut group = vec![0usize; signatures.len()];
    for (p, sig) in signatures.iter().enumerate() {
        match entrants.iter().position(|&e| signatures[e] == *sig) {
            Some(g) => group[p] = g,
            None => {
                group[p] = entrants.len();
                entrants.push(p);
            }
        }
    }
    let (report, group_order) = if entrants.len() > 1 {
        let players: Vec<DesignStory> = entrants.iter().map(|&e| stories[e].clone()).collect();
        let r = tournament(&players, j, rounds)?;
        let order = r.ranking.clone();
        (Some(r), order)
    } else {
        (None, (0..entrants.len()).collect())
    };
    let mut rank = vec![0usize; signatures.len()];
    let mut order = Vec::with_capacity(signatures.len());
    for (r, &g) in group_order.iter().enumerate() {
        for p in (0..signatures.len()).filter(|&p| group[p] == g) {
            rank[p] = r;
            order.push(p);
        }
    }
    Ok(MoleculeRanking { molecule: molecule.into(), order, rank, entrants, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyMode {
    /// The `k` best-ranked passes.
    #[serde(rename = "topk")]
    TopK,
    /// Passes `0..k` regardless of rank.
    FirstK,
}

/// Passes selected for a molecule under `mode`.
pub fn select_passes(ranked: &[usize], k: usize, mode: AssemblyMode) -> Result<Vec<usize>, RankError> {
    if k == 0 || k > ranked.len() {
        return Err(RankError::BadK { k, passes: ranked.len() });
    }
    Ok(match mode {
        AssemblyMode::TopK => ranked[..k].to_vec(),
        AssemblyMode::FirstK => (0..k).collect(),
    })
}

/// Pools the selected passes of one molecule.
pub fn assemble_topk(
    ranked: &[usize],
    msgs: &[Vec<ProductionRule>],
    k: usize,
    mode: AssemblyMode,
) -> Result<Grammar, RankError> {
    let chosen = select_passes(ranked, k, mode)?;
    Ok(pool(chosen.iter().map(|&p| msgs[p].as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn story(pass: usize, len: usize) -> DesignStory {
        DesignStory {
            molecule: "m".into(),
            pass,
            steps: (0..len).map(|i| StoryStep { step: i, phase: Phase::Root, text: "x".into() }).collect(),
        }
    }

    fn m(a: usize, b: usize, w: f64) -> MatchRecord {
        MatchRecord { pass_a: a, pass_b: b, weight_a: w, round: 0 }
    }

    #[test]
    fn first_round_seed_order() {
        let p = swiss_schedule(4, 0, &[0.0; 4], &[], &[]);
        assert_eq!(p.pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(p.bye, None);
    }

    #[test]
    fn two_players_rematch() {
        let p = swiss_schedule(2, 3, &[1.0, 2.0], &[(0, 1), (0, 1), (0, 1)], &[]);
        assert_eq!(p.pairs, vec![(1, 0)]);
    }

    #[test]
    fn odd_field_gets_bye() {
        let p = swiss_schedule(5, 0, &[0.0; 5], &[], &[]);
        assert_eq!(p.bye, Some(4));
        let p = swiss_schedule(5, 1, &[1.0, 0.0, 1.0, 0.0, 0.5], &[(0, 1), (2, 3)], &[4]);
        assert!(p.bye.is_some() && p.bye != Some(4));
    }

    #[test]
    fn length_judge_and_symmetry() {
        let r = judge(&LengthJudge, &story(0, 5), &story(1, 3), 0).unwrap();
        assert_eq!(r.weight_a, 1.0);
        let r = judge(&LengthJudge, &story(0, 3), &story(1, 3), 0).unwrap();
        assert_eq!(r.weight_a, 0.5);
    }

    struct Fixed(f64, f64);
    impl Judge for Fixed {
        fn p_first(&self, _: &str, first: &DesignStory, _: &DesignStory) -> Result<f64, RankError> {
            Ok(if first.pass == 0 { self.0 } else { self.1 })
        }
    }

    #[test]
    fn debias_arithmetic() {
        let r = judge(&Fixed(0.8, 0.6), &story(0, 1), &story(1, 1), 0).unwrap();
        assert!((r.weight_a - 0.6).abs() < 1e-12);
    }

    #[test]
    fn two_player_closed_form() {
        let fit = fit_bradley_terry(2, &[m(0, 1, 0.75); 4]);
        let p = fit.abilities[0] / (fit.abilities[0] + fit.abilities[1]);
        assert!((p - 0.75).abs() < 1e-6, "{p}");
        let even = fit_bradley_terry(2, &[m(0, 1, 0.5); 4]);
        assert!((even.abilities[0] - even.abilities[1]).abs() < 1e-9);
    }

    #[test]
    fn degenerate_is_flagged() {
        let fit = fit_bradley_terry(2, &[m(0, 1, 1.0), m(0, 1, 1.0)]);
        assert!(fit.degenerate);
        assert!(fit.abilities.iter().all(|&a| a > 0.0));
        assert!(!fit_bradley_terry(2, &[m(0, 1, 0.7)]).degenerate);
    }

    #[test]
    fn story_puts_root_first() {
        use crate::decompose::decompose;
        use crate::molecule::parse_smiles;
        use crate::oracle::HeuristicOracle;
        let g = parse_smiles("CCCCC(C)CO").unwrap();
        let d = decompose(&g, &HeuristicOracle::default(), 0).unwrap();
        let s = build_story("x", 0, &d.log).unwrap();
        assert_eq!(s.steps.len(), d.log.entries.len());
        assert_eq!(s.steps[0].phase, Phase::Root);
        assert!(build_story("x", 0, &DecompositionLog::default()).is_err());
    }

    #[test]
    fn identical_passes_share_rank() {
        let stories: Vec<_> = (0..3).map(|p| story(p, p + 1)).collect();
        let sigs = vec![vec!["a".into()], vec!["b".into()], vec!["a".into()]];
        let r = rank_molecule("m", &stories, &sigs, &LengthJudge, 4).unwrap();
        assert_eq!(r.entrants, vec![0, 1]);
        assert_eq!(r.rank[0], r.rank[2]);
        assert_eq!(r.order, vec![1, 0, 2]);
    }

    #[test]
    fn k_equal_passes_same_grammar() {
        let ranked = vec![2, 0, 1];
        assert_eq!(select_passes(&ranked, 1, AssemblyMode::TopK).unwrap(), vec![2]);
        let mut a = select_passes(&ranked, 3, AssemblyMode::TopK).unwrap();
        a.sort();
        assert_eq!(a, select_passes(&ranked, 3, AssemblyMode::FirstK).unwrap());
        assert!(select_passes(&ranked, 0, AssemblyMode::TopK).is_err());
    }
}
