//! Fill-reducing orderings.
//!
//! Nested dissection with level-structure separators: each connected piece
//! is split by the middle level of a breadth-first search started from a
//! pseudo-peripheral vertex, the two halves are ordered recursively and the
//! separator goes last. Purely combinatorial and deterministic.

use alloc::vec;
use alloc::vec::Vec;

const LEAF: usize = 64;

struct Scratch {
    stamp: Vec<usize>,
    level: Vec<usize>,
    next_stamp: usize,
}

impl Scratch {
    fn fresh(&mut self) -> usize {
        self.next_stamp += 1;
        self.next_stamp
    }
}

/// Breadth-first levels from `root` inside the vertex set tagged `set`.
/// Returns the visit order and the start offset of each level.
fn bfs(adj: &[Vec<usize>], root: usize, set: usize, sc: &mut Scratch) -> (Vec<usize>, Vec<usize>) {
    let seen = sc.fresh();
    let mut order = vec![root];
    let mut starts = vec![0];
    sc.level[root] = seen;
    let mut head = 0;
    while head < order.len() {
        let end = order.len();
        starts.push(end);
        for k in head..end {
            let v = order[k];
            for &w in &adj[v] {
                if sc.stamp[w] == set && sc.level[w] != seen {
                    sc.level[w] = seen;
                    order.push(w);
                }
            }
        }
        head = end;
    }
    starts.pop();
    if *starts.last().unwrap() == order.len() {
        starts.pop();
    }
    (order, starts)
}

fn dissect(adj: &[Vec<usize>], nodes: Vec<usize>, sc: &mut Scratch, out: &mut Vec<usize>) {
    if nodes.len() <= LEAF {
        out.extend_from_slice(&nodes);
        return;
    }
    let set = sc.fresh();
    for &v in &nodes {
        sc.stamp[v] = set;
    }
    // split into connected components first
    let (first, starts) = bfs(adj, nodes[0], set, sc);
    if first.len() < nodes.len() {
        let comp_seen = sc.fresh();
        let mut components = Vec::new();
        for &v in &first {
            sc.level[v] = comp_seen;
        }
        components.push(first);
        for &v in &nodes {
            if sc.level[v] != comp_seen && sc.stamp[v] == set {
                let (comp, _) = bfs(adj, v, set, sc);
                for &w in &comp {
                    sc.stamp[w] = 0;
                }
                components.push(comp);
            }
        }
        for comp in components {
            dissect(adj, comp, sc, out);
        }
        return;
    }
    // pseudo-peripheral root: restart from the far end until the depth stops growing
    let (mut order, mut starts) = (first, starts);
    for _ in 0..4 {
        let last_level = *starts.last().unwrap();
        let cand = order[last_level..]
            .iter()
            .copied()
            .min_by_key(|&v| adj[v].iter().filter(|&&w| sc.stamp[w] == set).count())
            .unwrap();
        let (o2, s2) = bfs(adj, cand, set, sc);
        if s2.len() <= starts.len() {
            break;
        }
        order = o2;
        starts = s2;
    }
    if starts.len() < 3 {
        out.extend_from_slice(&nodes);
        return;
    }
    let half = order.len() / 2;
    let mut mid = 1;
    while mid + 2 < starts.len() && starts[mid + 1] <= half {
        mid += 1;
    }
    let mid_end = if mid + 1 < starts.len() { starts[mid + 1] } else { order.len() };
    let below = &order[..starts[mid]];
    let level = &order[starts[mid]..mid_end];
    let above = &order[mid_end..];

    // separator: members of the middle level that touch the level above
    let above_tag = sc.fresh();
    for &v in above {
        sc.level[v] = above_tag;
    }
    let mut part_a: Vec<usize> = below.to_vec();
    let mut sep = Vec::new();
    for &v in level {
        if adj[v].iter().any(|&w| sc.level[w] == above_tag) {
            sep.push(v);
        } else {
            part_a.push(v);
        }
    }
    let part_b = above.to_vec();
    if part_b.is_empty() || part_a.is_empty() {
        out.extend_from_slice(&nodes);
        return;
    }
    dissect(adj, part_a, sc, out);
    dissect(adj, part_b, sc, out);
    sep.sort_unstable();
    out.extend_from_slice(&sep);
}

/// Returns `perm` with `perm[k]` the original index eliminated `k`-th.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut sc = Scratch { stamp: vec![0; n], level: vec![0; n], next_stamp: 0 };
    let mut out = Vec::with_capacity(n);
    dissect(adj, (0..n).collect(), &mut sc, &mut out);
    debug_assert_eq!(out.len(), n);
    out
}

pub fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}
