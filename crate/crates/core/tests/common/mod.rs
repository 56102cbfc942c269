//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use recedit::backbone::EmbeddingTable;
use recedit::data::Pair;

/// Dense `(n_users + n_items)²` normalised adjacency over the given edges.
pub fn dense_adjacency(n_users: usize, n_items: usize, edges: &[Pair]) -> Vec<Vec<f64>> {
    let n = n_users + n_items;
    let uniq: BTreeSet<Pair> = edges.iter().copied().collect();
    let mut deg = vec![0.0f64; n];
    for p in &uniq {
        deg[p.user] += 1.0;
        deg[n_users + p.item] += 1.0;
    }
    let mut a = vec![vec![0.0; n]; n];
    for p in &uniq {
        let (u, i) = (p.user, n_users + p.item);
        let w = 1.0 / (deg[u] * deg[i]).sqrt();
        a[u][i] = w;
        a[i][u] = w;
    }
    a
}

/// Mean of `A^l X` for `l = 0..=layers`, by dense matrix products.
pub fn dense_layer_mean(a: &[Vec<f64>], x: &[f64], dim: usize, layers: usize) -> Vec<f64> {
    let n = a.len();
    let mut cur = x.to_vec();
    let mut acc = x.to_vec();
    for _ in 0..layers {
        let mut next = vec![0.0; n * dim];
        for r in 0..n {
            for c in 0..n {
                if a[r][c] != 0.0 {
                    for k in 0..dim {
                        next[r * dim + k] += a[r][c] * cur[c * dim + k];
                    }
                }
            }
        }
        for (s, v) in acc.iter_mut().zip(&next) {
            *s += v;
        }
        cur = next;
    }
    acc.iter().map(|v| v / (layers + 1) as f64).collect()
}

/// Central differences of `f` at `x`.
pub fn numeric_grad(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn random_table<R: Rng>(rng: &mut R, n_users: usize, n_items: usize, dim: usize, scale: f64) -> EmbeddingTable {
    let data = (0..(n_users + n_items) * dim)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    EmbeddingTable::from_data(n_users, n_items, dim, data).unwrap()
}

/// Small-integer embeddings, so equal scores are common.
pub fn integer_table<R: Rng>(rng: &mut R, n_users: usize, n_items: usize, dim: usize) -> EmbeddingTable {
    let data = (0..(n_users + n_items) * dim)
        .map(|_| rng.random_range(-2i32..=2) as f64)
        .collect();
    EmbeddingTable::from_data(n_users, n_items, dim, data).unwrap()
}

/// Brute-force ranking over a full score matrix.
pub struct Ranking {
    pub scores: Vec<Vec<f64>>,
    pub masked: Vec<BTreeSet<usize>>,
}

impl Ranking {
    pub fn new(table: &EmbeddingTable, masked: &[Vec<usize>]) -> Self {
        let scores = (0..table.n_users())
            .map(|u| {
                (0..table.n_items())
                    .map(|i| (0..table.dim()).map(|k| table.user(u)[k] * table.item(i)[k]).sum())
                    .collect()
            })
            .collect();
        Self {
            scores,
            masked: masked.iter().map(|m| m.iter().copied().collect()).collect(),
        }
    }

    /// 1 + number of unmasked items strictly ahead of `item`.
    pub fn rank(&self, u: usize, item: usize) -> usize {
        let s = &self.scores[u];
        1 + (0..s.len())
            .filter(|j| !self.masked[u].contains(j))
            .filter(|&j| s[j] > s[item] || (s[j] == s[item] && j < item))
            .count()
    }

    pub fn top_set(&self, u: usize, k: usize) -> BTreeSet<usize> {
        (0..self.scores[u].len())
            .filter(|i| !self.masked[u].contains(i) && self.rank(u, *i) <= k)
            .collect()
    }

    /// Items in rank order, cut at `k`.
    pub fn top_list(&self, u: usize, k: usize) -> Vec<usize> {
        let mut items: Vec<usize> = self.top_set(u, k).into_iter().collect();
        items.sort_by_key(|&i| self.rank(u, i));
        items
    }
}

pub fn oracle_ea(post: &Ranking, explicit: &[Pair], k: usize) -> f64 {
    let hit = explicit.iter().filter(|p| post.rank(p.user, p.item) > k).count();
    hit as f64 / explicit.len() as f64
}

/// `None` when no implicit pair is rankable.
pub fn oracle_ec(pre: &Ranking, post: &Ranking, implicit: &[Pair], k: usize) -> Option<f64> {
    let live: Vec<&Pair> = implicit
        .iter()
        .filter(|p| !pre.masked[p.user].contains(&p.item))
        .collect();
    if live.is_empty() {
        return None;
    }
    let left: usize = live
        .iter()
        .filter(|p| pre.rank(p.user, p.item) <= k && post.rank(p.user, p.item) > k)
        .count();
    let sank: usize = live
        .iter()
        .filter(|p| pre.rank(p.user, p.item) > k && post.rank(p.user, p.item) > pre.rank(p.user, p.item))
        .count();
    Some((left + sank) as f64 / live.len() as f64)
}

/// `None` when every pre/post set is empty.
pub fn oracle_ep(pre: &Ranking, post: &Ranking, edit_pairs: &[Pair], k: usize) -> Option<f64> {
    let (mut inter, mut union) = (0usize, 0usize);
    for u in 0..pre.scores.len() {
        let edited: BTreeSet<usize> = edit_pairs.iter().filter(|p| p.user == u).map(|p| p.item).collect();
        let a: BTreeSet<usize> = pre.top_set(u, k).difference(&edited).copied().collect();
        let b: BTreeSet<usize> = post.top_set(u, k).difference(&edited).copied().collect();
        inter += a.intersection(&b).count();
        union += a.union(&b).count();
    }
    (union > 0).then(|| inter as f64 / union as f64)
}

pub fn oracle_recall(post: &Ranking, test: &[Vec<usize>], k: usize) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0;
    for (u, t) in test.iter().enumerate() {
        if t.is_empty() {
            continue;
        }
        let top = post.top_set(u, k);
        total += t.iter().filter(|i| top.contains(i)).count() as f64 / t.len() as f64;
        n += 1;
    }
    (n > 0).then(|| total / n as f64)
}

pub fn oracle_ndcg(post: &Ranking, test: &[Vec<usize>], k: usize) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0;
    for (u, t) in test.iter().enumerate() {
        if t.is_empty() {
            continue;
        }
        let list = post.top_list(u, k);
        let mut dcg = 0.0;
        for (pos, item) in list.iter().enumerate() {
            if t.contains(item) {
                dcg += 1.0 / ((pos + 2) as f64).log2();
            }
        }
        let mut idcg = 0.0;
        for pos in 0..k.min(t.len()) {
            idcg += 1.0 / ((pos + 2) as f64).log2();
        }
        total += dcg / idcg;
        n += 1;
    }
    (n > 0).then(|| total / n as f64)
}
