use serde::{Deserialize, Serialize};

use crate::{DphError, Result};

/// Implicit feedback: positives indexed both by user and by item.
///
/// Negatives are the complement of each user's positives and are never
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSet {
    n_users: usize,
    n_items: usize,
    user_items: Vec<Vec<usize>>,
    item_users: Vec<Vec<usize>>,
    z: Vec<f64>,
}

impl InteractionSet {
    /// Builds the set from `(user, item)` pairs. Duplicates are collapsed.
    pub fn from_pairs<I>(n_users: usize, n_items: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut user_items = vec![Vec::new(); n_users];
        for (u, i) in pairs {
            if u >= n_users || i >= n_items {
                return Err(DphError::InvalidArgument(format!(
                    "pair ({u}, {i}) out of range for {n_users} users x {n_items} items"
                )));
            }
            user_items[u].push(i);
        }
        let mut item_users = vec![Vec::new(); n_items];
        for (u, items) in user_items.iter_mut().enumerate() {
            items.sort_unstable();
            items.dedup();
            for &i in items.iter() {
                item_users[i].push(u);
            }
        }
        let z = user_items
            .iter()
            .map(|items| {
                let pos = items.len();
                let neg = n_items - pos;
                if pos == 0 || neg == 0 {
                    0.0
                } else {
                    1.0 / (n_users as f64 * pos as f64 * neg as f64)
                }
            })
            .collect();
        Ok(Self {
            n_users,
            n_items,
            user_items,
            item_users,
            z,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Sorted positive items of `user`.
    pub fn user_positives(&self, user: usize) -> &[usize] {
        &self.user_items[user]
    }

    /// Sorted users who interacted with `item`.
    pub fn item_positives(&self, item: usize) -> &[usize] {
        &self.item_users[item]
    }

    pub fn n_negatives(&self, user: usize) -> usize {
        self.n_items - self.user_items[user].len()
    }

    /// `z_u = 1 / (|U| |I_u^+| |I_u^-|)`, or zero for users without both
    /// positives and negatives.
    pub fn z(&self, user: usize) -> f64 {
        self.z[user]
    }

    pub fn z_weights(&self) -> &[f64] {
        &self.z
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.user_items[user].binary_search(&item).is_ok()
    }

    pub fn n_positives(&self) -> usize {
        self.user_items.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_positives() == 0
    }

    /// Users that have at least one positive and one negative.
    pub fn eligible_users(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_users).filter(move |&u| self.z[u] > 0.0)
    }

    /// All pairs in user-major, item-ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.user_items
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
    }
}

impl Serialize for InteractionSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            n_users: usize,
            n_items: usize,
            pairs: Vec<(usize, usize)>,
        }
        Repr {
            n_users: self.n_users,
            n_items: self.n_items,
            pairs: self.pairs().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for InteractionSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            n_users: usize,
            n_items: usize,
            pairs: Vec<(usize, usize)>,
        }
        let repr = Repr::deserialize(deserializer)?;
        InteractionSet::from_pairs(repr.n_users, repr.n_items, repr.pairs)
            .map_err(serde::de::Error::custom)
    }
}
