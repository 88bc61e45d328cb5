//! Stage game of the repeated prisoner's dilemma.

use crate::error::{Error, Result};

/// A single-round action. Encoded as a bit with `C -> 1` and `D -> 0`
/// everywhere in the crate, so `D < C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    D,
    C,
}

impl Action {
    #[inline]
    pub fn bit(self) -> usize {
        match self {
            Action::C => 1,
            Action::D => 0,
        }
    }

    #[inline]
    pub fn from_bit(bit: usize) -> Action {
        if bit & 1 == 1 {
            Action::C
        } else {
            Action::D
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Action::C => 'C',
            Action::D => 'D',
        }
    }
}

/// Per-round payoffs: reward `r`, sucker `s`, temptation `t`, punishment `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub p: f64,
}

impl GameParams {
    /// Builds a game and checks the prisoner's dilemma inequalities.
    pub fn new(r: f64, s: f64, t: f64, p: f64) -> Result<Self> {
        let g = GameParams { r, s, t, p };
        if !validate_pd(&g) {
            return Err(Error::Domain(format!(
                "payoffs (R={r}, S={s}, T={t}, P={p}) violate T > R > P > S or 2R > T + S"
            )));
        }
        Ok(g)
    }

    /// Axelrod's tournament values (R, S, T, P) = (3, 0, 5, 1).
    pub fn axelrod() -> Self {
        GameParams { r: 3.0, s: 0.0, t: 5.0, p: 1.0 }
    }

    /// Player 1's payoff when playing `own` against `other`.
    #[inline]
    pub fn payoff(&self, own: Action, other: Action) -> f64 {
        match (own, other) {
            (Action::C, Action::C) => self.r,
            (Action::C, Action::D) => self.s,
            (Action::D, Action::C) => self.t,
            (Action::D, Action::D) => self.p,
        }
    }

    /// Expected payoff of playing `own` when the co-player cooperates with probability `q`.
    #[inline]
    pub fn expected_payoff(&self, own: Action, q: f64) -> f64 {
        match own {
            Action::C => q * self.r + (1.0 - q) * self.s,
            Action::D => q * self.t + (1.0 - q) * self.p,
        }
    }

    /// Recovers `(b, c)` when these payoffs form a donation game.
    pub fn as_donation(&self, tol: f64) -> Option<(f64, f64)> {
        let b = self.t;
        let c = -self.s;
        let is_donation = self.p.abs() <= tol && (self.r - (b - c)).abs() <= tol && b > c && c > 0.0;
        is_donation.then_some((b, c))
    }
}

/// Donation game: cooperating costs `c` and gives the co-player `b`.
pub fn donation_game(b: f64, c: f64) -> Result<GameParams> {
    if !(c > 0.0 && b > c) || !b.is_finite() {
        return Err(Error::Domain(format!("donation game needs b > c > 0, got b={b}, c={c}")));
    }
    Ok(GameParams { r: b - c, s: -c, t: b, p: 0.0 })
}

/// Payoffs of both players for the action pair `(a1, a2)`.
pub fn stage_payoff(g: &GameParams, a1: Action, a2: Action) -> (f64, f64) {
    (g.payoff(a1, a2), g.payoff(a2, a1))
}

/// `T > R > P > S` and `2R > T + S`, both strict.
pub fn validate_pd(g: &GameParams) -> bool {
    g.t > g.r && g.r > g.p && g.p > g.s && 2.0 * g.r > g.t + g.s
}
