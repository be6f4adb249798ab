//! Slow, obviously-correct reference implementations.

#![allow(dead_code)]

use migbench_core::diff::{EditKind, LineEdit};

/// Longest common subsequence length by the textbook table.
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

/// Levenshtein over chars, full table.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in t[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
        }
    }
    t[a.len()][b.len()]
}

pub fn distance(a: &str, b: &str) -> f64 {
    let n = a.chars().count().max(b.chars().count());
    if n == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / n as f64
    }
}

pub fn allowed(p: &LineEdit, t: &LineEdit, tau: f64) -> bool {
    p.file == t.file && p.op == t.op && distance(&p.content, &t.content) <= tau
}

/// Exhaustive assignment over all subsets of truth edits: the largest pair
/// count, and the smallest total distance reaching it.
pub fn best_assignment(pred: &[LineEdit], truth: &[LineEdit], tau: f64) -> (usize, f64) {
    assert!(truth.len() <= 16);
    let full = 1usize << truth.len();
    // best[mask] after processing a prefix of `pred`.
    let mut best: Vec<Option<(usize, f64)>> = vec![None; full];
    best[0] = Some((0, 0.0));
    let better = |a: (usize, f64), b: Option<(usize, f64)>| match b {
        None => true,
        Some(b) => a.0 > b.0 || (a.0 == b.0 && a.1 < b.1),
    };
    for p in pred {
        let mut next = best.clone();
        for mask in 0..full {
            let Some((n, d)) = best[mask] else { continue };
            for (j, t) in truth.iter().enumerate() {
                if mask & (1 << j) == 0 && allowed(p, t, tau) {
                    let cand = (n + 1, d + distance(&p.content, &t.content));
                    if better(cand, next[mask | (1 << j)]) {
                        next[mask | (1 << j)] = Some(cand);
                    }
                }
            }
        }
        best = next;
    }
    best.into_iter().flatten().fold((0, 0.0), |acc, c| if better(c, Some(acc)) { c } else { acc })
}

/// Size of the multiset intersection on (file, op, content).
pub fn exact_intersection(pred: &[LineEdit], truth: &[LineEdit]) -> usize {
    let key = |e: &LineEdit| (e.file.clone(), e.op == EditKind::Add, e.content.clone());
    let mut pool: Vec<_> = truth.iter().map(key).collect();
    let mut n = 0;
    for p in pred {
        if let Some(i) = pool.iter().position(|t| *t == key(p)) {
            pool.swap_remove(i);
            n += 1;
        }
    }
    n
}
