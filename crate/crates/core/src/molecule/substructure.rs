use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::MolecularGraph;

/// True iff `pattern` embeds injectively into `g` preserving elements and
/// bond orders (non-induced: extra bonds in `g` are allowed).
pub fn contains_substructure(g: &MolecularGraph, pattern: &MolecularGraph) -> bool {
    let mut found = false;
    search(g, pattern, &mut |_| {
        found = true;
        false
    });
    found
}

/// All embeddings as pattern-atom -> target-atom maps. Automorphic images of
/// the same occurrence are reported separately.
pub fn substructure_matches(g: &MolecularGraph, pattern: &MolecularGraph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    search(g, pattern, &mut |m| {
        out.push(m.to_vec());
        true
    });
    out
}

/// Pattern atoms in BFS order per component so each atom after a component's
/// first has an already-placed neighbor.
fn match_order(pattern: &MolecularGraph) -> Vec<(usize, Option<usize>)> {
    let n = pattern.atom_count();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        order.push((s, None));
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &(w, _) in pattern.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    order.push((w, Some(v)));
                    q.push_back(w);
                }
            }
        }
    }
    order
}

fn search(g: &MolecularGraph, pattern: &MolecularGraph, visit: &mut dyn FnMut(&[usize]) -> bool) {
    if pattern.atom_count() == 0 || pattern.atom_count() > g.atom_count() || pattern.bond_count() > g.bond_count() {
        return;
    }
    let order = match_order(pattern);
    let mut map = vec![usize::MAX; pattern.atom_count()];
    let mut used = vec![false; g.atom_count()];
    extend(g, pattern, &order, 0, &mut map, &mut used, visit);
}

fn extend(
    g: &MolecularGraph,
    pattern: &MolecularGraph,
    order: &[(usize, Option<usize>)],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if depth == order.len() {
        return visit(map);
    }
    let (p, anchor) = order[depth];
    let candidates: Vec<usize> = match anchor {
        Some(a) => g.neighbors(map[a]).iter().map(|&(w, _)| w).collect(),
        None => (0..g.atom_count()).collect(),
    };
    for t in candidates {
        if used[t] || !compatible(g, pattern, p, t, map) {
            continue;
        }
        map[p] = t;
        used[t] = true;
        let keep_going = extend(g, pattern, order, depth + 1, map, used, visit);
        used[t] = false;
        map[p] = usize::MAX;
        if !keep_going {
            return false;
        }
    }
    true
}

fn compatible(g: &MolecularGraph, pattern: &MolecularGraph, p: usize, t: usize, map: &[usize]) -> bool {
    if pattern.atom(p).element != g.atom(t).element || pattern.degree(p) > g.degree(t) {
        return false;
    }
    pattern.neighbors(p).iter().all(|&(q, pb)| {
        let mq = map[q];
        mq == usize::MAX
            || g.bond_between(t, mq).is_some_and(|tb| g.bond(tb).order == pattern.bond(pb).order)
    })
}
