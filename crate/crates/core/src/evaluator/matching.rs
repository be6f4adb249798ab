use std::collections::BTreeMap;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::diff::{EditKind, LineEdit};

pub const DEFAULT_TAU: f64 = 0.2;

/// Integer resolution of distances inside the assignment solver.
const SCALE: i64 = 1 << 20;

/// Levenshtein distance over chars divided by the longer length; 0 for two
/// empty strings.
pub fn normalized_distance(a: &str, b: &str) -> f64 {
    let len = a.chars().count().max(b.chars().count());
    if len == 0 {
        return 0.0;
    }
    strsim::levenshtein(a, b) as f64 / len as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditPair {
    pub predicted: LineEdit,
    pub truth: LineEdit,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditMatching {
    /// In predicted (file, anchor) order.
    pub pairs: Vec<EditPair>,
    pub unmatched_predicted: Vec<LineEdit>,
    pub unmatched_truth: Vec<LineEdit>,
}

impl EditMatching {
    pub fn predicted_count(&self) -> usize {
        self.pairs.len() + self.unmatched_predicted.len()
    }

    pub fn truth_count(&self) -> usize {
        self.pairs.len() + self.unmatched_truth.len()
    }
}

/// Predicted and truth indices of one (file, op) group.
type Group = (Vec<usize>, Vec<usize>);

fn order_key(e: &LineEdit) -> (&str, u32, EditKind, &str) {
    (&e.file, e.anchor, e.op, &e.content)
}

/// Maximum-cardinality matching in the bipartite graph `allowed`, with minimum
/// total cost among those. Returns (left, right) index pairs.
fn solve(n_left: usize, n_right: usize, cost: &dyn Fn(usize, usize) -> Option<i64>) -> Vec<(usize, usize)> {
    if n_left == 0 || n_right == 0 {
        return Vec::new();
    }
    // A pair is worth BIG minus its cost, so one more pair always beats any
    // saving in distance.
    let big = (n_left.max(n_right) as i64 + 2) * SCALE;
    let weight = |l: usize, r: usize| cost(l, r).map_or(0, |c| big - c);
    if n_left <= n_right {
        let m = Matrix::from_fn(n_left, n_right, |(l, r)| weight(l, r));
        let (_, assign) = kuhn_munkres(&m);
        assign
            .into_iter()
            .enumerate()
            .filter(|&(l, r)| cost(l, r).is_some())
            .collect()
    } else {
        let m = Matrix::from_fn(n_right, n_left, |(r, l)| weight(l, r));
        let (_, assign) = kuhn_munkres(&m);
        let mut pairs: Vec<(usize, usize)> = assign
            .into_iter()
            .enumerate()
            .map(|(r, l)| (l, r))
            .filter(|&(l, r)| cost(l, r).is_some())
            .collect();
        pairs.sort_unstable();
        pairs
    }
}

/// Splits a bipartite graph into connected components: returns, per
/// component, its left and right indices.
fn components(n_left: usize, n_right: usize, edges: &[(usize, usize)]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut parent: Vec<usize> = (0..n_left + n_right).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(l, r) in edges {
        let (a, b) = (find(&mut parent, l), find(&mut parent, n_left + r));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for &(l, _) in edges {
        let root = find(&mut parent, l);
        groups.entry(root).or_default();
    }
    for l in 0..n_left {
        let root = find(&mut parent, l);
        if let Some(g) = groups.get_mut(&root) {
            g.0.push(l);
        }
    }
    for r in 0..n_right {
        let root = find(&mut parent, n_left + r);
        if let Some(g) = groups.get_mut(&root) {
            g.1.push(r);
        }
    }
    groups.into_values().collect()
}

/// Pairs predicted with truth edits: same file, same op, normalized
/// distance at most `tau`. Maximum cardinality first, then minimum total
/// distance; inputs are processed in (file, anchor) order so equal inputs
/// always yield the same pairing.
pub fn match_edits(predicted: &[LineEdit], truth: &[LineEdit], tau: f64) -> EditMatching {
    let mut pred: Vec<&LineEdit> = predicted.iter().collect();
    let mut tru: Vec<&LineEdit> = truth.iter().collect();
    pred.sort_by(|a, b| order_key(a).cmp(&order_key(b)));
    tru.sort_by(|a, b| order_key(a).cmp(&order_key(b)));

    // Group by (file, op); edges never cross groups.
    let mut groups: BTreeMap<(&str, EditKind), Group> = BTreeMap::new();
    for (i, p) in pred.iter().enumerate() {
        groups.entry((&p.file, p.op)).or_default().0.push(i);
    }
    for (j, t) in tru.iter().enumerate() {
        groups.entry((&t.file, t.op)).or_default().1.push(j);
    }

    let mut matched: Vec<(usize, usize, f64)> = Vec::new();
    for (left, right) in groups.values() {
        if left.is_empty() || right.is_empty() {
            continue;
        }
        let mut dist: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (li, &i) in left.iter().enumerate() {
            for (ri, &j) in right.iter().enumerate() {
                let d = normalized_distance(&pred[i].content, &tru[j].content);
                if d <= tau {
                    dist.insert((li, ri), d);
                }
            }
        }
        let edges: Vec<(usize, usize)> = dist.keys().copied().collect();
        for (cl, cr) in components(left.len(), right.len(), &edges) {
            let cost = |a: usize, b: usize| dist.get(&(cl[a], cr[b])).map(|d| (d * SCALE as f64).round() as i64);
            for (a, b) in solve(cl.len(), cr.len(), &cost) {
                let (li, ri) = (cl[a], cr[b]);
                matched.push((left[li], right[ri], dist[&(li, ri)]));
            }
        }
    }
    matched.sort_by_key(|&(i, _, _)| i);

    let mut pred_used = vec![false; pred.len()];
    let mut truth_used = vec![false; tru.len()];
    let pairs = matched
        .into_iter()
        .map(|(i, j, d)| {
            pred_used[i] = true;
            truth_used[j] = true;
            EditPair { predicted: pred[i].clone(), truth: tru[j].clone(), distance: d }
        })
        .collect();
    EditMatching {
        pairs,
        unmatched_predicted: pred.iter().zip(&pred_used).filter(|(_, u)| !**u).map(|(e, _)| (*e).clone()).collect(),
        unmatched_truth: tru.iter().zip(&truth_used).filter(|(_, u)| !**u).map(|(e, _)| (*e).clone()).collect(),
    }
}
