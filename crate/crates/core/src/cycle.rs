//! Exact payoffs of deterministic sequence players against reactive strategies.
//!
//! A deterministic self-reactive player ignores the co-player, so its own
//! history follows a deterministic automaton that ends up in a cycle. The
//! reactive co-player only looks at that history, so the long-run payoff is
//! the average over the cycle of the expected one-round payoffs. No Markov
//! chain and no ergodicity assumption is involved.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{Action, GameParams};
use crate::history::{shift, History};
use crate::strategy::{ReactiveN, SelfReactiveN, MAX_ENUMERATION_MEMORY};

/// Recurrent behaviour of a deterministic own-history automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePayoff {
    pub period: usize,
    pub per_round_payoff: f64,
    /// Own histories visited along the cycle, in order.
    pub visited_states: Vec<History>,
}

impl CyclePayoff {
    /// Actions played along the cycle.
    pub fn sequence(&self) -> Vec<Action> {
        self.visited_states.iter().enumerate().map(|(i, _)| self.visited_states[(i + 1) % self.period].ago(1)).collect()
    }
}

/// Expected payoffs against `p` for each own history and action, indexed `[history][action bit]`.
fn payoff_table(p: &ReactiveN, g: &GameParams) -> Vec<[f64; 2]> {
    (0..1usize << p.n())
        .map(|h| {
            let q = p.prob(h);
            [g.expected_payoff(Action::D, q), g.expected_payoff(Action::C, q)]
        })
        .collect()
}

/// Follows the automaton `h -> shift(h, action(h))` from `start` and returns
/// the cycle it falls into as (entry index into `path`, path).
fn find_cycle(n: usize, start: usize, action: impl Fn(usize) -> Action) -> (usize, Vec<usize>) {
    let mut seen = vec![usize::MAX; 1 << n];
    let mut path = Vec::with_capacity(1 << n);
    let mut h = start;
    while seen[h] == usize::MAX {
        seen[h] = path.len();
        path.push(h);
        h = shift(h, action(h), n);
    }
    (seen[h], path)
}

/// Long-run payoff of deterministic self-reactive `s`, started from own history `h0`, against `p`.
pub fn cycle_payoff_vs_reactive(s: &SelfReactiveN, h0: &History, p: &ReactiveN, g: &GameParams) -> Result<CyclePayoff> {
    if s.n() != p.n() || h0.len() != p.n() {
        return Err(Error::MemoryMismatch { left: s.n().max(h0.len()), right: p.n() });
    }
    if !s.is_deterministic() {
        return Err(Error::Domain("cycle payoffs need a deterministic self-reactive strategy".into()));
    }
    let n = p.n();
    let table = payoff_table(p, g);
    let (entry, path) = find_cycle(n, h0.index(), |h| s.action(h));
    let cycle = &path[entry..];
    let total: f64 = cycle.iter().map(|&h| table[h][s.action(h).bit()]).sum();
    Ok(CyclePayoff {
        period: cycle.len(),
        per_round_payoff: total / cycle.len() as f64,
        visited_states: cycle.iter().map(|&h| History::from_index(n, h)).collect(),
    })
}

/// Per-round payoff of endlessly repeating `sequence` against `p`.
///
/// The sequence is treated as cyclic, so rotations give the same value.
pub fn sequence_payoff_vs_reactive(sequence: &[Action], p: &ReactiveN, g: &GameParams) -> f64 {
    assert!(!sequence.is_empty());
    let n = p.n();
    let len = sequence.len();
    let total: f64 = (0..len)
        .map(|t| {
            // Own history before round t: the n actions preceding it, cyclically.
            let h = (1..=n).rev().fold(0usize, |acc, k| {
                let a = sequence[(t + len * n - k) % len];
                (acc << 1) | a.bit()
            });
            g.expected_payoff(sequence[t], p.prob(h))
        })
        .sum();
    total / len as f64
}

/// Most profitable deviation against a reactive strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub payoff: f64,
    pub witness: SelfReactiveN,
    pub initial: History,
    pub cycle: CyclePayoff,
}

/// Best (code-level) result for one deterministic strategy: (payoff, first maximising start).
fn best_start(code: u64, n: usize, table: &[[f64; 2]]) -> (f64, usize) {
    let action = |h: usize| Action::from_bit((code >> h) as usize);
    let side = 1usize << n;
    let mut cycle_value = vec![f64::NAN; side];
    let mut best = (f64::NEG_INFINITY, 0);
    for start in 0..side {
        let (entry, path) = find_cycle(n, start, action);
        let head = path[entry];
        if cycle_value[head].is_nan() {
            let cycle = &path[entry..];
            let value = cycle.iter().map(|&h| table[h][action(h).bit()]).sum::<f64>() / cycle.len() as f64;
            for &h in cycle {
                cycle_value[h] = value;
            }
        }
        if cycle_value[head] > best.0 {
            best = (cycle_value[head], start);
        }
    }
    best
}

/// Maximum long-run payoff any strategy can earn against `p`.
///
/// Searches all `2^(2^n)` deterministic self-reactive-n strategies and all
/// `2^n` initial own histories. Ties go to the first maximiser in
/// (strategy code, initial history) order.
pub fn best_response_payoff(p: &ReactiveN, g: &GameParams) -> Result<BestResponse> {
    let n = p.n();
    if n > MAX_ENUMERATION_MEMORY {
        return Err(Error::Unsupported(format!(
            "best response enumeration needs n <= {MAX_ENUMERATION_MEMORY}, got {n}"
        )));
    }
    let table = payoff_table(p, g);
    let count = 1u64 << (1u64 << n);
    let per_code: Vec<(f64, usize)> = if n >= 4 {
        (0..count).into_par_iter().map(|code| best_start(code, n, &table)).collect()
    } else {
        (0..count).map(|code| best_start(code, n, &table)).collect()
    };
    let mut best_code = 0u64;
    for (code, &(value, _)) in per_code.iter().enumerate() {
        if value > per_code[best_code as usize].0 {
            best_code = code as u64;
        }
    }
    let (payoff, start) = per_code[best_code as usize];
    let witness = SelfReactiveN::from_code(n, best_code);
    let initial = History::from_index(n, start);
    let cycle = cycle_payoff_vs_reactive(&witness, &initial, p, g)?;
    Ok(BestResponse { payoff, witness, initial, cycle })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::donation_game;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use Action::{C, D};

    fn reactive(n: usize, p: &[f64]) -> ReactiveN {
        ReactiveN::new(n, p.to_vec()).unwrap()
    }

    /// Plays the deterministic automaton for many rounds and averages the tail.
    fn rollout(s: &SelfReactiveN, h0: usize, p: &ReactiveN, g: &GameParams) -> f64 {
        let n = p.n();
        let mut h = h0;
        let burn = 64;
        let rounds = 840; // lcm(1..=8): every cycle period for n <= 3
        let mut total = 0.0;
        for t in 0..burn + rounds {
            let a = s.action(h);
            if t >= burn {
                total += g.expected_payoff(a, p.prob(h));
            }
            h = shift(h, a, n);
        }
        total / rounds as f64
    }

    #[test]
    fn alternator_against_reactive_two() {
        let g = donation_game(2.0, 1.0).unwrap();
        let (pcd, pdc) = (0.6, 0.8);
        let p = reactive(2, &[1.0, pcd, pdc, 0.2]);
        // Play the opposite of the last own action.
        let alternator = SelfReactiveN::new(2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(alternator.code(), Some(5));
        for h0 in History::all(2) {
            let cyc = cycle_payoff_vs_reactive(&alternator, &h0, &p, &g).unwrap();
            assert_eq!(cyc.period, 2);
            let expected = ((pcd + pdc) * 2.0 - 1.0) / 2.0;
            assert!((cyc.per_round_payoff - expected).abs() < 1e-15);
            assert!((rollout(&alternator, h0.index(), &p, &g) - expected).abs() < 1e-12);
        }
        assert!((sequence_payoff_vs_reactive(&[D, C], &p, &g) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn all_defect_and_all_cooperate_sequences() {
        let g = donation_game(2.0, 1.0).unwrap();
        let p = reactive(2, &[1.0, 0.6, 0.8, 0.2]);
        let alld = SelfReactiveN::from_code(2, 0);
        let cyc = cycle_payoff_vs_reactive(&alld, &History::all_c(2), &p, &g).unwrap();
        assert_eq!(cyc.period, 1);
        assert!((cyc.per_round_payoff - 0.2 * 2.0).abs() < 1e-15);
        assert_eq!(cyc.visited_states, vec![History::all_d(2)]);

        let allc = SelfReactiveN::from_code(2, 0b1111);
        let cyc = cycle_payoff_vs_reactive(&allc, &History::all_d(2), &p, &g).unwrap();
        assert_eq!(cyc.per_round_payoff, 1.0);
        assert_eq!(cyc.sequence(), vec![C]);
    }

    #[test]
    fn cycle_rejects_bad_inputs() {
        let g = donation_game(2.0, 1.0).unwrap();
        let p = reactive(2, &[1.0, 0.6, 0.8, 0.2]);
        let mixed = SelfReactiveN::new(2, vec![0.5; 4]).unwrap();
        assert!(cycle_payoff_vs_reactive(&mixed, &History::all_c(2), &p, &g).is_err());
        let short = SelfReactiveN::from_code(1, 1);
        assert!(cycle_payoff_vs_reactive(&short, &History::all_c(1), &p, &g).is_err());
    }

    #[test]
    fn best_response_examples() {
        let g = donation_game(2.0, 1.0).unwrap();
        let br = best_response_payoff(&ReactiveN::alld(2), &g).unwrap();
        assert_eq!(br.payoff, 0.0);
        assert_eq!(br.witness.code(), Some(0));

        let br = best_response_payoff(&ReactiveN::constant(2, 1.0).unwrap(), &g).unwrap();
        assert_eq!(br.payoff, 2.0);
        assert_eq!(br.witness.code(), Some(0));

        let br = best_response_payoff(&reactive(2, &[1.0, 0.6, 0.8, 0.2]), &g).unwrap();
        assert!((br.payoff - 1.0).abs() < 1e-12);
        assert_eq!(br.cycle.sequence(), vec![C]);
    }

    #[test]
    fn best_response_matches_brute_force_cycle_enumeration() {
        // Independent oracle: maximise rollout values over every (strategy, start) pair.
        let g = GameParams::axelrod();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            for _ in 0..20 {
                let p = ReactiveN::new(n, (0..1 << n).map(|_| rng.gen()).collect()).unwrap();
                let oracle = enumerate_max(&p, &g);
                let br = best_response_payoff(&p, &g).unwrap();
                assert!((br.payoff - oracle).abs() < 1e-12, "n={n}: {} vs {oracle}", br.payoff);
                let recomputed = cycle_payoff_vs_reactive(&br.witness, &br.initial, &p, &g).unwrap();
                assert!((recomputed.per_round_payoff - br.payoff).abs() < 1e-14);
            }
        }
    }

    fn enumerate_max(p: &ReactiveN, g: &GameParams) -> f64 {
        let n = p.n();
        let mut best = f64::NEG_INFINITY;
        for s in crate::strategy::enumerate_deterministic_self_reactive(n).unwrap() {
            for h0 in 0..1 << n {
                best = best.max(rollout(&s, h0, p, g));
            }
        }
        best
    }

    #[test]
    fn best_response_at_memory_four() {
        let g = donation_game(2.0, 1.0).unwrap();
        let tft4 = ReactiveN::new(4, (0..16).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()).unwrap();
        let br = best_response_payoff(&tft4, &g).unwrap();
        // Any defection costs n rounds of co-player defection, so full cooperation is optimal.
        assert_eq!(br.payoff, 1.0);
        assert_eq!(br.cycle.sequence(), vec![C]);
        assert!(best_response_payoff(&ReactiveN::alld(5), &g).is_err());
    }

    #[test]
    fn sequence_rotation_invariance() {
        let g = donation_game(3.0, 1.0).unwrap();
        let p = reactive(3, &[1.0, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.1]);
        let a = sequence_payoff_vs_reactive(&[C, C, D], &p, &g);
        let b = sequence_payoff_vs_reactive(&[D, C, C], &p, &g);
        let c = sequence_payoff_vs_reactive(&[C, D, C], &p, &g);
        assert!((a - b).abs() < 1e-15 && (a - c).abs() < 1e-15);
    }
}
