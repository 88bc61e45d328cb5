//! Partner (cooperative Nash) checks for reactive-n and counting-n strategies.
//!
//! Two independent routes are provided. [`is_partner_algorithmic`] searches
//! every deterministic self-reactive deviation and works for any prisoner's
//! dilemma. The closed forms ([`is_partner_closed_form`],
//! [`is_partner_counting`]) evaluate the explicit donation-game inequality
//! systems. [`brute_force_memory_best_response`] is a third, much slower
//! route over all deterministic memory-n strategies, used to validate the
//! reduction to self-reactive deviations.

use std::fmt;

use rayon::prelude::*;

use crate::cycle::{best_response_payoff, sequence_payoff_vs_reactive};
use crate::error::{Error, Result};
use crate::game::{donation_game, Action, GameParams};
use crate::history::History;
use crate::payoff::{play_memory, PayoffOptions};
use crate::strategy::{embed, is_nice, CountingN, MemoryN, ReactiveN, SelfReactiveN, Strategy};

/// Absolute tolerance used for verdicts unless the caller passes another one.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A profitable deviation found by the algorithmic check.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub strategy: SelfReactiveN,
    pub initial: History,
    /// Actions repeated forever once the deviation settles into its cycle.
    pub sequence: Vec<Action>,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartnerVerdict {
    pub is_partner: bool,
    pub failed_condition: Option<String>,
    pub witness_deviation: Option<Deviation>,
}

impl PartnerVerdict {
    fn partner() -> Self {
        PartnerVerdict { is_partner: true, failed_condition: None, witness_deviation: None }
    }

    fn failed(condition: impl Into<String>) -> Self {
        PartnerVerdict { is_partner: false, failed_condition: Some(condition.into()), witness_deviation: None }
    }

    fn exploited(deviation: Deviation) -> Self {
        PartnerVerdict { is_partner: false, failed_condition: None, witness_deviation: Some(deviation) }
    }
}

impl fmt::Display for PartnerVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_partner {
            return f.write_str("partner");
        }
        f.write_str("not partner")?;
        if let Some(cond) = &self.failed_condition {
            write!(f, ": violates {cond}")?;
        }
        if let Some(dev) = &self.witness_deviation {
            let seq: String = dev.sequence.iter().map(|a| a.as_char()).collect();
            write!(f, ": deviation repeating ({seq}) from own history {} earns {}", dev.initial, dev.payoff)?;
        }
        Ok(())
    }
}

fn sequence_string(seq: &[Action]) -> String {
    seq.iter().map(|a| a.as_char()).collect()
}

/// Partner check by exhaustive search over deterministic self-reactive deviations.
pub fn is_partner_algorithmic(p: &ReactiveN, g: &GameParams, tol: f64) -> Result<PartnerVerdict> {
    if !is_nice(p, tol) {
        let label = "C".repeat(p.n());
        return Ok(PartnerVerdict::failed(format!("p_{label} = 1 (got {})", p.prob_all_c())));
    }
    let br = best_response_payoff(p, g)?;
    if br.payoff > g.r + tol {
        return Ok(PartnerVerdict::exploited(Deviation {
            sequence: br.cycle.sequence(),
            strategy: br.witness,
            initial: br.initial,
            payoff: br.payoff,
        }));
    }
    Ok(PartnerVerdict::partner())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    /// `value = bound`
    Equal,
    /// `value <= bound`
    AtMost,
}

/// One line of an explicit partner inequality system.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub value: f64,
    pub bound: f64,
    pub kind: ConditionKind,
}

impl Condition {
    fn at_most(label: String, value: f64, bound: f64) -> Self {
        Condition { label, value, bound, kind: ConditionKind::AtMost }
    }

    /// Distance to the boundary; negative when violated.
    pub fn slack(&self) -> f64 {
        match self.kind {
            ConditionKind::Equal => -(self.value - self.bound).abs(),
            ConditionKind::AtMost => self.bound - self.value,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        match self.kind {
            ConditionKind::Equal => (self.value - self.bound).abs() <= tol,
            ConditionKind::AtMost => self.value <= self.bound + tol,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (value {}, bound {})", self.label, self.value, self.bound)
    }
}

fn niceness_condition(n: usize, value: f64) -> Condition {
    Condition { label: format!("p_{} = 1", "C".repeat(n)), value, bound: 1.0, kind: ConditionKind::Equal }
}

/// Mean of `p` over the named histories, checked against `1 - weight * c / b`.
fn averaged(p: &ReactiveN, histories: &[&str], weight: (usize, usize), ratio: f64) -> Condition {
    let sum: f64 = histories.iter().map(|h| p.prob_after(&History::parse(h).expect("valid history literal"))).sum();
    let terms: Vec<String> = histories.iter().map(|h| format!("p_{h}")).collect();
    let lhs =
        if histories.len() == 1 { terms[0].clone() } else { format!("({})/{}", terms.join(" + "), histories.len()) };
    let rhs = match weight {
        (1, 1) => "1 - c/b".to_string(),
        (num, den) => format!("1 - {num}/{den} * c/b"),
    };
    let bound = 1.0 - weight.0 as f64 / weight.1 as f64 * ratio;
    Condition::at_most(format!("{lhs} <= {rhs}"), sum / histories.len() as f64, bound)
}

/// The explicit donation-game partner conditions for reactive-n, `n <= 3`, in published order.
pub fn reactive_conditions(p: &ReactiveN, b: f64, c: f64) -> Result<Vec<Condition>> {
    donation_game(b, c)?;
    let ratio = c / b;
    let nice = niceness_condition(p.n(), p.prob_all_c());
    let rest = match p.n() {
        1 => vec![averaged(p, &["D"], (1, 1), ratio)],
        2 => vec![averaged(p, &["CD", "DC"], (1, 2), ratio), averaged(p, &["DD"], (1, 1), ratio)],
        3 => vec![
            averaged(p, &["CDC", "DCD"], (1, 2), ratio),
            averaged(p, &["CCD", "CDC", "DCC"], (1, 3), ratio),
            averaged(p, &["CDD", "DCD", "DDC"], (2, 3), ratio),
            averaged(p, &["CCD", "CDD", "DCC", "DDC"], (1, 2), ratio),
            averaged(p, &["DDD"], (1, 1), ratio),
        ],
        n => {
            return Err(Error::Unsupported(format!(
                "no closed-form partner conditions for reactive-{n}; use the algorithmic check"
            )))
        }
    };
    Ok(std::iter::once(nice).chain(rest).collect())
}

/// `r_n = 1` and `r_{n-k} <= 1 - (k/n) c/b` for `k = 1..=n`.
pub fn counting_conditions(r: &CountingN, b: f64, c: f64) -> Result<Vec<Condition>> {
    donation_game(b, c)?;
    let n = r.n();
    let ratio = c / b;
    let mut out =
        vec![Condition { label: format!("r_{n} = 1"), value: r.r(n), bound: 1.0, kind: ConditionKind::Equal }];
    for k in 1..=n {
        out.push(Condition::at_most(
            format!("r_{} <= 1 - {k}/{n} * c/b", n - k),
            r.r(n - k),
            1.0 - k as f64 / n as f64 * ratio,
        ));
    }
    Ok(out)
}

fn verdict_from(conditions: &[Condition], tol: f64) -> PartnerVerdict {
    match conditions.iter().find(|cond| !cond.holds(tol)) {
        Some(cond) => PartnerVerdict::failed(cond.to_string()),
        None => PartnerVerdict::partner(),
    }
}

/// Explicit donation-game partner conditions for reactive-1, -2 and -3 strategies.
pub fn is_partner_closed_form(p: &ReactiveN, b: f64, c: f64, tol: f64) -> Result<PartnerVerdict> {
    Ok(verdict_from(&reactive_conditions(p, b, c)?, tol))
}

/// Explicit donation-game partner conditions for counting strategies of any memory.
pub fn is_partner_counting(r: &CountingN, b: f64, c: f64, tol: f64) -> Result<PartnerVerdict> {
    Ok(verdict_from(&counting_conditions(r, b, c)?, tol))
}

/// Smallest absolute slack over a condition system (distance to the nearest boundary).
pub fn boundary_distance(conditions: &[Condition]) -> f64 {
    conditions
        .iter()
        .map(|c| match c.kind {
            ConditionKind::Equal => f64::INFINITY,
            ConditionKind::AtMost => c.slack().abs(),
        })
        .fold(f64::INFINITY, f64::min)
}

/// Sequence deviations that suffice to decide partnership of nice
/// reactive-n strategies in the donation game, for `n <= 3`.
///
/// `n = 2`: the alternator `(CD)` and `(D)`. `n = 3` adds `(CCD)`, `(CDD)`
/// and `(CCDD)`, one per line of the explicit condition system.
pub fn canonical_deviations(n: usize) -> Option<Vec<Vec<Action>>> {
    use Action::{C, D};
    match n {
        1 => Some(vec![vec![D]]),
        2 => Some(vec![vec![C, D], vec![D]]),
        3 => Some(vec![vec![C, D], vec![C, C, D], vec![C, D, D], vec![C, C, D, D], vec![D]]),
        _ => None,
    }
}

/// Largest payoff among the [`canonical_deviations`] together with the sequence attaining it.
pub fn best_canonical_deviation(p: &ReactiveN, g: &GameParams) -> Option<(f64, Vec<Action>)> {
    let mut best: Option<(f64, Vec<Action>)> = None;
    for seq in canonical_deviations(p.n())? {
        let value = sequence_payoff_vs_reactive(&seq, p, g);
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, seq));
        }
    }
    best
}

/// Describes a deviation sequence as `(CCD)`.
pub fn describe_sequence(seq: &[Action]) -> String {
    format!("({})", sequence_string(seq))
}

/// Best payoff over every deterministic memory-n strategy against `p`, for `n <= 2`.
///
/// Each candidate is scored by the Markov-chain engine with tremble `eps`
/// applied to both players. This is a validation oracle for
/// [`best_response_payoff`]; it never uses the self-reactive reduction.
pub fn brute_force_memory_best_response(p: &ReactiveN, g: &GameParams, eps: f64) -> Result<f64> {
    let n = p.n();
    if n > 2 {
        return Err(Error::Unsupported(format!(
            "brute force over deterministic memory-{n} strategies is infeasible (2^{} candidates)",
            1u64 << (2 * n)
        )));
    }
    let opponent = embed(&Strategy::Reactive(p.clone()))?;
    let opts = PayoffOptions::with_eps(eps);
    let count = 1u64 << (1u64 << (2 * n));
    (0..count)
        .into_par_iter()
        .map(|code| play_memory(&MemoryN::from_code(n, code), &opponent, g, &opts).map(|o| o.payoffs.0))
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::counting_to_reactive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use Action::{C, D};

    fn reactive(n: usize, p: &[f64]) -> ReactiveN {
        ReactiveN::new(n, p.to_vec()).unwrap()
    }

    fn donation(b: f64, c: f64) -> GameParams {
        donation_game(b, c).unwrap()
    }

    #[test]
    fn algorithmic_examples() {
        let g = donation(2.0, 1.0);
        let tft = reactive(1, &[1.0, 0.0]);
        assert!(is_partner_algorithmic(&tft, &g, DEFAULT_TOL).unwrap().is_partner);

        let tf2t = reactive(2, &[1.0, 1.0, 1.0, 0.0]);
        for (b, c) in [(2.0, 1.0), (10.0, 0.1), (1.0, 0.9)] {
            let v = is_partner_algorithmic(&tf2t, &donation(b, c), DEFAULT_TOL).unwrap();
            assert!(!v.is_partner);
            let dev = v.witness_deviation.expect("witness");
            assert!(v.failed_condition.is_none());
            assert_eq!(dev.sequence.len(), 2, "alternator expected, got {:?}", dev.sequence);
            assert!((dev.payoff - (2.0 * b - c) / 2.0).abs() < 1e-12);
        }

        let v = is_partner_algorithmic(&ReactiveN::alld(2), &g, DEFAULT_TOL).unwrap();
        assert!(!v.is_partner && v.failed_condition.is_some() && v.witness_deviation.is_none());
    }

    #[test]
    fn algorithmic_check_handles_general_dilemma() {
        let g = GameParams::axelrod();
        assert!(is_partner_algorithmic(&reactive(1, &[1.0, 0.0]), &g, DEFAULT_TOL).unwrap().is_partner);
        assert!(!is_partner_algorithmic(&reactive(1, &[1.0, 1.0]), &g, DEFAULT_TOL).unwrap().is_partner);
    }

    #[test]
    fn closed_form_examples() {
        let v = is_partner_closed_form(&reactive(2, &[1.0, 0.6, 0.8, 0.2]), 2.0, 1.0, DEFAULT_TOL).unwrap();
        assert!(v.is_partner);

        let v = is_partner_closed_form(&reactive(2, &[1.0, 0.9, 0.7, 0.2]), 2.0, 1.0, DEFAULT_TOL).unwrap();
        assert!(!v.is_partner);
        assert!(v.failed_condition.unwrap().starts_with("(p_CD + p_DC)/2"));

        let p3 = reactive(3, &[1.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.6]);
        let v = is_partner_closed_form(&p3, 2.0, 1.0, DEFAULT_TOL).unwrap();
        assert!(!v.is_partner);
        assert!(v.failed_condition.unwrap().starts_with("p_DDD <= 1 - c/b"));

        let v = is_partner_closed_form(&reactive(1, &[1.0, 0.5]), 2.0, 1.0, DEFAULT_TOL).unwrap();
        assert!(v.is_partner);
        let v = is_partner_closed_form(&reactive(1, &[1.0, 0.51]), 2.0, 1.0, DEFAULT_TOL).unwrap();
        assert!(!v.is_partner);

        assert!(matches!(
            is_partner_closed_form(&ReactiveN::alld(4), 2.0, 1.0, DEFAULT_TOL),
            Err(Error::Unsupported(_))
        ));
        assert!(is_partner_closed_form(&ReactiveN::alld(2), 1.0, 2.0, DEFAULT_TOL).is_err());
    }

    #[test]
    fn reactive_three_conditions_use_listing_order() {
        // p_CCD is listing position 1 and p_DDC listing position 6.
        let mut probs = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        probs[1] = 0.9;
        let conds = reactive_conditions(&reactive(3, &probs), 2.0, 1.0).unwrap();
        assert!((conds[2].value - 0.3).abs() < 1e-15);
        assert!((conds[4].value - 0.225).abs() < 1e-15);
        assert_eq!(conds[3].value, 0.0);
    }

    #[test]
    fn counting_examples() {
        let r = CountingN::new(3, vec![1.0, 5.0 / 6.0, 2.0 / 3.0, 0.5]).unwrap();
        assert!(is_partner_counting(&r, 2.0, 1.0, DEFAULT_TOL).unwrap().is_partner);
        let r = CountingN::new(1, vec![1.0, 1.0 - 0.25]).unwrap();
        assert!(is_partner_counting(&r, 4.0, 1.0, DEFAULT_TOL).unwrap().is_partner);
        let r = CountingN::new(2, vec![1.0, 1.0, 0.0]).unwrap();
        let v = is_partner_counting(&r, 2.0, 1.0, DEFAULT_TOL).unwrap();
        assert!(!v.is_partner);
        assert!(v.failed_condition.unwrap().starts_with("r_1"));
    }

    #[test]
    fn closed_forms_agree_with_enumeration_on_small_sample() {
        let g = donation(2.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=3 {
            for _ in 0..300 {
                let mut probs: Vec<f64> = (0..1 << n).map(|_| rng.gen()).collect();
                probs[0] = 1.0;
                let p = reactive(n, &probs);
                let closed = is_partner_closed_form(&p, 2.0, 1.0, DEFAULT_TOL).unwrap();
                let algo = is_partner_algorithmic(&p, &g, DEFAULT_TOL).unwrap();
                assert_eq!(closed.is_partner, algo.is_partner, "{probs:?}");
            }
        }
    }

    #[test]
    fn canonical_deviations_decide_partnership() {
        let g = donation(3.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=3 {
            for _ in 0..300 {
                let mut probs: Vec<f64> = (0..1 << n).map(|_| rng.gen()).collect();
                probs[0] = 1.0;
                let p = reactive(n, &probs);
                let (best, _) = best_canonical_deviation(&p, &g).unwrap();
                let br = best_response_payoff(&p, &g).unwrap();
                assert_eq!(best <= g.r + DEFAULT_TOL, br.payoff <= g.r + DEFAULT_TOL);
            }
        }
        assert_eq!(describe_sequence(&[C, C, D]), "(CCD)");
    }

    #[test]
    fn counting_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let n = rng.gen_range(1..=5);
            let mut probs: Vec<f64> = (0..=n).map(|_| rng.gen()).collect();
            probs[0] = 1.0;
            let r = CountingN::new(n, probs.clone()).unwrap();
            if !is_partner_counting(&r, 2.0, 1.0, DEFAULT_TOL).unwrap().is_partner {
                continue;
            }
            let lower: Vec<f64> =
                probs.iter().enumerate().map(|(i, &x)| if i == 0 { 1.0 } else { x * rng.gen::<f64>() }).collect();
            let r2 = CountingN::new(n, lower).unwrap();
            assert!(is_partner_counting(&r2, 2.0, 1.0, DEFAULT_TOL).unwrap().is_partner);
        }
    }

    #[test]
    fn counting_matches_algorithmic_route() {
        let g = donation(2.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=3 {
            for _ in 0..200 {
                let mut probs: Vec<f64> = (0..=n).map(|_| rng.gen()).collect();
                probs[0] = 1.0;
                let r = CountingN::new(n, probs).unwrap();
                let closed = is_partner_counting(&r, 2.0, 1.0, DEFAULT_TOL).unwrap();
                let algo = is_partner_algorithmic(&counting_to_reactive(&r).unwrap(), &g, DEFAULT_TOL).unwrap();
                assert_eq!(closed.is_partner, algo.is_partner);
            }
        }
    }

    #[test]
    fn brute_force_examples() {
        let g = donation(2.0, 1.0);
        let v = brute_force_memory_best_response(&ReactiveN::alld(1), &g, 1e-8).unwrap();
        assert!(v.abs() < 1e-6);
        let p = reactive(1, &[0.9, 0.2]);
        let v = brute_force_memory_best_response(&p, &g, 1e-8).unwrap();
        let br = best_response_payoff(&p, &g).unwrap();
        assert!((v - br.payoff).abs() < 1e-6, "{v} vs {}", br.payoff);
        assert!(brute_force_memory_best_response(&ReactiveN::alld(3), &g, 1e-8).is_err());
    }

    #[test]
    fn verdict_invariant_holds() {
        let g = donation(2.0, 1.0);
        for p in [reactive(1, &[0.5, 0.0]), reactive(2, &[1.0, 1.0, 1.0, 1.0]), reactive(2, &[1.0, 0.0, 0.0, 0.0])] {
            let v = is_partner_algorithmic(&p, &g, DEFAULT_TOL).unwrap();
            if !v.is_partner {
                assert!(v.failed_condition.is_some() ^ v.witness_deviation.is_some());
            }
            let _ = v.to_string();
        }
    }
}
