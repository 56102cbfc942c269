use crate::data::Pair;

use super::EmbeddingTable;

/// Symmetric-normalised user–item adjacency, edge weight `1 / sqrt(deg_u * deg_i)`.
///
/// Stored as two CSR views: user → items and item → users.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteAdjacency {
    n_users: usize,
    n_items: usize,
    user_ptr: Vec<usize>,
    user_items: Vec<usize>,
    user_weights: Vec<f64>,
    item_ptr: Vec<usize>,
    item_users: Vec<usize>,
    item_weights: Vec<f64>,
}

fn csr(n_rows: usize, edges: &[(usize, usize, f64)]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut ptr = vec![0usize; n_rows + 1];
    for &(r, _, _) in edges {
        ptr[r + 1] += 1;
    }
    for r in 0..n_rows {
        ptr[r + 1] += ptr[r];
    }
    let mut fill = ptr.clone();
    let mut cols = vec![0usize; edges.len()];
    let mut weights = vec![0.0; edges.len()];
    for &(r, c, w) in edges {
        cols[fill[r]] = c;
        weights[fill[r]] = w;
        fill[r] += 1;
    }
    (ptr, cols, weights)
}

impl BipartiteAdjacency {
    /// Builds the normalised adjacency from (deduplicated) training positives.
    pub fn from_pairs(n_users: usize, n_items: usize, pairs: &[Pair]) -> Self {
        let mut sorted: Vec<Pair> = pairs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut deg_u = vec![0usize; n_users];
        let mut deg_i = vec![0usize; n_items];
        for p in &sorted {
            deg_u[p.user] += 1;
            deg_i[p.item] += 1;
        }
        let weight = |p: &Pair| 1.0 / ((deg_u[p.user] * deg_i[p.item]) as f64).sqrt();
        let by_user: Vec<_> = sorted.iter().map(|p| (p.user, p.item, weight(p))).collect();
        let mut by_item: Vec<_> = sorted.iter().map(|p| (p.item, p.user, weight(p))).collect();
        by_item.sort_unstable_by_key(|e| (e.0, e.1));
        let (user_ptr, user_items, user_weights) = csr(n_users, &by_user);
        let (item_ptr, item_users, item_weights) = csr(n_items, &by_item);
        Self {
            n_users,
            n_items,
            user_ptr,
            user_items,
            user_weights,
            item_ptr,
            item_users,
            item_weights,
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_edges(&self) -> usize {
        self.user_items.len()
    }

    /// Normalised edges `(user, item, weight)` in user-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_users).flat_map(move |u| {
            (self.user_ptr[u]..self.user_ptr[u + 1]).map(move |e| (u, self.user_items[e], self.user_weights[e]))
        })
    }

    /// `dst = A · src`, gathering along each node's neighbour list.
    fn apply(&self, src: &EmbeddingTable, dst: &mut EmbeddingTable) {
        let dim = src.dim();
        dst.fill_zero();
        for u in 0..self.n_users {
            let row = dst.user_mut(u);
            for e in self.user_ptr[u]..self.user_ptr[u + 1] {
                let (i, w) = (self.user_items[e], self.user_weights[e]);
                let q = src.item(i);
                for k in 0..dim {
                    row[k] += w * q[k];
                }
            }
        }
        for i in 0..self.n_items {
            let row = dst.item_mut(i);
            for e in self.item_ptr[i]..self.item_ptr[i + 1] {
                let (u, w) = (self.item_users[e], self.item_weights[e]);
                let p = src.user(u);
                for k in 0..dim {
                    row[k] += w * p[k];
                }
            }
        }
    }

    /// `dst = Aᵀ · src`, scattering each edge's contribution to both endpoints.
    fn apply_transpose(&self, src: &EmbeddingTable, dst: &mut EmbeddingTable) {
        let dim = src.dim();
        dst.fill_zero();
        for (u, i, w) in self.edges() {
            for k in 0..dim {
                let from_item = src.item(i)[k];
                let from_user = src.user(u)[k];
                dst.user_mut(u)[k] += w * from_item;
                dst.item_mut(i)[k] += w * from_user;
            }
        }
    }
}

fn layer_mean(
    input: &EmbeddingTable,
    n_layers: usize,
    mut step: impl FnMut(&EmbeddingTable, &mut EmbeddingTable),
) -> EmbeddingTable {
    let mut acc = input.clone();
    let mut current = input.clone();
    let mut next = EmbeddingTable::zeros(input.n_users(), input.n_items(), input.dim());
    for _ in 0..n_layers {
        step(&current, &mut next);
        acc.axpy(1.0, &next);
        std::mem::swap(&mut current, &mut next);
    }
    let scale = 1.0 / (n_layers + 1) as f64;
    acc.data_mut().iter_mut().for_each(|x| *x *= scale);
    acc
}

/// Output embeddings `(1 / (L + 1)) · Σ_{l=0..L} Aˡ · base`.
pub fn lightgcn_propagate(base: &EmbeddingTable, adj: &BipartiteAdjacency, n_layers: usize) -> EmbeddingTable {
    assert_eq!((base.n_users(), base.n_items()), (adj.n_users, adj.n_items));
    layer_mean(base, n_layers, |src, dst| adj.apply(src, dst))
}

/// Adjoint of [`lightgcn_propagate`]: maps output-space gradients to base-space gradients.
pub fn lightgcn_propagate_adjoint(
    grad_output: &EmbeddingTable,
    adj: &BipartiteAdjacency,
    n_layers: usize,
) -> EmbeddingTable {
    assert_eq!((grad_output.n_users(), grad_output.n_items()), (adj.n_users, adj.n_items));
    layer_mean(grad_output, n_layers, |src, dst| adj.apply_transpose(src, dst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_layers_is_identity() {
        let base = crate::backbone::init_embeddings(3, 2, 4, 5);
        let adj = BipartiteAdjacency::from_pairs(3, 2, &[Pair::new(0, 0), Pair::new(1, 1)]);
        assert_eq!(lightgcn_propagate(&base, &adj, 0), base);
    }

    #[test]
    fn single_edge_two_layers() {
        let base = EmbeddingTable::from_data(1, 1, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let adj = BipartiteAdjacency::from_pairs(1, 1, &[Pair::new(0, 0)]);
        let out = lightgcn_propagate(&base, &adj, 2);
        let third = 1.0 / 3.0;
        assert!((out.user(0)[0] - 2.0 * third).abs() < 1e-15);
        assert!((out.user(0)[1] - third).abs() < 1e-15);
        assert!((out.item(0)[0] - third).abs() < 1e-15);
        assert!((out.item(0)[1] - 2.0 * third).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_is_scaled() {
        let base = EmbeddingTable::from_data(2, 1, 1, vec![1.0, 3.0, 1.0]).unwrap();
        let adj = BipartiteAdjacency::from_pairs(2, 1, &[Pair::new(0, 0)]);
        let out = lightgcn_propagate(&base, &adj, 2);
        assert!((out.user(1)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_are_symmetric_normalised() {
        let pairs = [Pair::new(0, 0), Pair::new(0, 1), Pair::new(1, 1)];
        let adj = BipartiteAdjacency::from_pairs(2, 2, &pairs);
        let edges: Vec<_> = adj.edges().collect();
        let w = |u, i| edges.iter().find(|e| e.0 == u && e.1 == i).unwrap().2;
        assert!((w(0, 0) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((w(0, 1) - 0.5).abs() < 1e-15);
        assert!((w(1, 1) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(adj.n_edges(), 3);
    }
}
