//! n-histories and their bit encoding.
//!
//! A history `(a_{-n}, ..., a_{-1})` is stored as an integer index in
//! `[0, 2^n)`. Action `a_{-k}` (the action `k` rounds ago) occupies bit
//! `k - 1`, so the most recent action is the least-significant bit and
//! `C` is a set bit. For `n = 2`: `CC -> 3`, `CD -> 2`, `DC -> 1`, `DD -> 0`.
//!
//! Probability vectors are *listed* starting from the all-`C` history, the
//! way they are usually written by hand (`(p_CC, p_CD, p_DC, p_DD)`), which
//! is descending index order: listing position `k` holds history index
//! `2^n - 1 - k`. [`listing_position`] converts between the two.

use std::fmt;

use crate::game::Action;

/// Upper bound on the memory length of any history handled by the crate.
pub const MAX_HISTORY_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct History {
    n: usize,
    index: usize,
}

impl History {
    /// `actions` is ordered oldest first, `(a_{-n}, ..., a_{-1})`.
    pub fn from_actions(actions: &[Action]) -> Self {
        assert!(!actions.is_empty() && actions.len() <= MAX_HISTORY_LEN);
        let index = actions.iter().fold(0usize, |acc, a| (acc << 1) | a.bit());
        History { n: actions.len(), index }
    }

    pub fn from_index(n: usize, index: usize) -> Self {
        assert!((1..=MAX_HISTORY_LEN).contains(&n));
        assert!(index < (1 << n), "history index {index} out of range for n={n}");
        History { n, index }
    }

    /// Parses a string of `C`/`D` characters, oldest action first.
    pub fn parse(text: &str) -> Option<Self> {
        let actions = text
            .chars()
            .map(|ch| match ch {
                'C' => Some(Action::C),
                'D' => Some(Action::D),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        (!actions.is_empty() && actions.len() <= MAX_HISTORY_LEN).then(|| History::from_actions(&actions))
    }

    /// The history consisting of `n` cooperations.
    pub fn all_c(n: usize) -> Self {
        History::from_index(n, (1 << n) - 1)
    }

    pub fn all_d(n: usize) -> Self {
        History::from_index(n, 0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// The action played `k` rounds ago, `1 <= k <= n`.
    pub fn ago(&self, k: usize) -> Action {
        assert!(k >= 1 && k <= self.n);
        Action::from_bit(self.index >> (k - 1))
    }

    pub fn actions(&self) -> Vec<Action> {
        (1..=self.n).rev().map(|k| self.ago(k)).collect()
    }

    pub fn cooperations(&self) -> usize {
        self.index.count_ones() as usize
    }

    /// Drops the oldest action and appends `next` as the most recent one.
    pub fn push(&self, next: Action) -> Self {
        History { n: self.n, index: shift(self.index, next, self.n) }
    }

    /// All `2^n` histories in ascending index order.
    pub fn all(n: usize) -> impl Iterator<Item = History> {
        (0..1usize << n).map(move |i| History::from_index(n, i))
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.actions() {
            write!(f, "{}", a.as_char())?;
        }
        Ok(())
    }
}

pub fn history_index(h: &History) -> usize {
    h.index()
}

pub fn history_from_index(n: usize, index: usize) -> History {
    History::from_index(n, index)
}

/// Index-level version of [`History::push`].
#[inline]
pub fn shift(index: usize, next: Action, n: usize) -> usize {
    ((index << 1) | next.bit()) & ((1 << n) - 1)
}

/// Listing position of history `index` among `2^n` entries, and vice versa.
#[inline]
pub fn listing_position(index: usize, n: usize) -> usize {
    (1 << n) - 1 - index
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::{C, D};

    #[test]
    fn index_examples() {
        assert_eq!(history_index(&History::from_actions(&[C, C])), 3);
        assert_eq!(history_index(&History::from_actions(&[D, D])), 0);
        assert_eq!(history_index(&History::from_actions(&[C, D])), 2);
        assert_eq!(History::from_actions(&[C, D]).ago(1), D);
        assert_eq!(History::from_actions(&[C, D]).ago(2), C);
    }

    #[test]
    fn round_trip_all_histories() {
        for n in 1..=4 {
            for i in 0..(1usize << n) {
                let h = history_from_index(n, i);
                assert_eq!(h.len(), n);
                assert_eq!(History::from_actions(&h.actions()), h);
                assert_eq!(history_index(&h), i);
            }
        }
    }

    #[test]
    fn push_drops_oldest() {
        let h = History::from_actions(&[C, D, D]);
        assert_eq!(h.push(C), History::from_actions(&[D, D, C]));
        assert_eq!(h.push(C).to_string(), "DDC");
        assert_eq!(History::parse("CDD"), Some(h));
        assert_eq!(History::parse("CXD"), None);
        assert_eq!(History::parse(""), None);
    }

    #[test]
    fn listing_order_starts_with_all_c() {
        assert_eq!(listing_position(History::all_c(2).index(), 2), 0);
        assert_eq!(listing_position(History::from_actions(&[C, D]).index(), 2), 1);
        assert_eq!(listing_position(History::from_actions(&[D, C]).index(), 2), 2);
        assert_eq!(listing_position(History::all_d(2).index(), 2), 3);
    }
}
