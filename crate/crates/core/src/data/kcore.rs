use super::{DataError, Dataset, IdMap, Pair, Result};

/// Iteratively drops users and items with fewer than `k` positive interactions.
///
/// Survivors are re-densified in their original relative order, and negatives
/// that reference a removed user or item are dropped.
pub fn apply_k_core(d: &Dataset, k: usize) -> Result<Dataset> {
    if k == 0 {
        return Err(DataError::InvalidArgument("k-core requires k >= 1".into()));
    }
    let mut user_alive = vec![true; d.n_users()];
    let mut item_alive = vec![true; d.n_items()];

    loop {
        let mut user_deg = vec![0usize; d.n_users()];
        let mut item_deg = vec![0usize; d.n_items()];
        for p in d.positives() {
            if user_alive[p.user] && item_alive[p.item] {
                user_deg[p.user] += 1;
                item_deg[p.item] += 1;
            }
        }
        let mut changed = false;
        for (alive, deg) in user_alive.iter_mut().zip(&user_deg) {
            if *alive && *deg < k {
                *alive = false;
                changed = true;
            }
        }
        for (alive, deg) in item_alive.iter_mut().zip(&item_deg) {
            if *alive && *deg < k {
                *alive = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let user_map = remap(&user_alive);
    let item_map = remap(&item_alive);
    let n_users = user_alive.iter().filter(|a| **a).count();
    let n_items = item_alive.iter().filter(|a| **a).count();
    if n_users == 0 || n_items == 0 {
        return Err(DataError::EmptyAfterFiltering { k });
    }

    let keep = |pairs: &[Pair]| -> Vec<Pair> {
        pairs
            .iter()
            .filter_map(|p| Some(Pair::new(user_map[p.user]?, item_map[p.item]?)))
            .collect()
    };
    let positives = keep(d.positives());
    let negatives = keep(d.negatives());
    if positives.is_empty() {
        return Err(DataError::EmptyAfterFiltering { k });
    }

    let ids = IdMap {
        users: surviving(&d.ids().users, &user_alive),
        items: surviving(&d.ids().items, &item_alive),
    };
    Dataset::from_pairs(n_users, n_items, positives, negatives, ids)
}

fn remap(alive: &[bool]) -> Vec<Option<usize>> {
    let mut next = 0;
    alive
        .iter()
        .map(|&a| {
            a.then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn surviving(tokens: &[String], alive: &[bool]) -> Vec<String> {
    tokens
        .iter()
        .zip(alive)
        .filter(|(_, a)| **a)
        .map(|(t, _)| t.clone())
        .collect()
}
