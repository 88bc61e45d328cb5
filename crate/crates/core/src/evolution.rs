//! Rare-mutation evolutionary dynamics with pairwise-comparison fixation.
//!
//! The population is always monomorphic. Each step introduces one random
//! mutant, which takes over with its fixation probability; otherwise it is
//! lost. Payoffs in a population with `k` mutants come from the four
//! pairwise payoffs between mutant and resident.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{counting_conditions, reactive_conditions, Condition, ConditionKind};
use crate::error::{Error, Result};
use crate::game::{donation_game, GameParams};
use crate::payoff::{play, PairOutcome, PayoffOptions, DEFAULT_FALLBACK_EPS};
use crate::strategy::{random_strategy, Space, Strategy};

/// Minimum response to full cooperation for a resident to count as a partner.
pub const RESIDENT_NICENESS: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    /// Population size `N`.
    pub population: usize,
    /// Selection strength `beta`.
    pub beta: f64,
    /// Number of mutant introductions `T`.
    pub steps: u64,
    pub memory: usize,
    pub space: Space,
    pub b: f64,
    pub c: f64,
    pub seed: u64,
    /// Tremble used when a pairing's chain is not ergodic.
    pub eps: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            population: 100,
            beta: 1.0,
            steps: 100_000,
            memory: 1,
            space: Space::Reactive,
            b: 1.0,
            c: 0.5,
            seed: 0,
            eps: DEFAULT_FALLBACK_EPS,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config(format!("population size must be >= 2, got {}", self.population)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("selection strength must be >= 0, got {}", self.beta)));
        }
        if self.steps < 1 {
            return Err(Error::Config("need at least one step".into()));
        }
        if self.memory < 1 {
            return Err(Error::Config("memory length must be >= 1".into()));
        }
        if self.space == Space::Reactive && self.memory > 3 {
            return Err(Error::Config(format!(
                "reactive runs support n <= 3 (partner classification), got {}",
                self.memory
            )));
        }
        if self.space == Space::Counting && self.memory > crate::strategy::MAX_MEMORY {
            return Err(Error::Config(format!("counting runs support n <= {}", crate::strategy::MAX_MEMORY)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::Config(format!("tremble must lie in (0, 0.5), got {}", self.eps)));
        }
        donation_game(self.b, self.c).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn game(&self) -> Result<GameParams> {
        donation_game(self.b, self.c)
    }

    pub fn payoff_options(&self) -> PayoffOptions {
        PayoffOptions { eps: 0.0, fallback_eps: Some(self.eps), ..Default::default() }
    }
}

/// One resident epoch: `strategy` held the population during
/// `[step, step + steps_as_resident)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidentRecord {
    pub step: u64,
    pub strategy: Strategy,
    pub self_coop_rate: f64,
    pub is_partner: bool,
    pub steps_as_resident: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub avg_coop_rate: f64,
    pub partner_abundance: f64,
    pub most_abundant_strategy: Strategy,
    pub most_abundant_steps: u64,
}

/// The four pairwise payoffs a mutant/resident pairing needs; `mr` is the
/// mutant's payoff against a resident, `rm` the resident's against a mutant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPayoffs {
    pub mm: f64,
    pub mr: f64,
    pub rm: f64,
    pub rr: f64,
}

/// Average payoffs `(pi_M, pi_R)` with `k` mutants among `population`, excluding self-play.
pub fn mixed_payoffs(pairs: &PairPayoffs, k: usize, population: usize) -> Result<(f64, f64)> {
    if population < 2 || k < 1 || k >= population {
        return Err(Error::Domain(format!("mutant count {k} outside 1..{population}")));
    }
    let others = (population - 1) as f64;
    let (k, n) = (k as f64, population as f64);
    let mutant = ((k - 1.0) * pairs.mm + (n - k) * pairs.mr) / others;
    let resident = (k * pairs.rm + (n - k - 1.0) * pairs.rr) / others;
    Ok((mutant, resident))
}

/// `(pi_M,k, pi_R,k)` for `k = 1..N-1`.
pub fn mixed_payoff_table(pairs: &PairPayoffs, population: usize) -> Result<Vec<(f64, f64)>> {
    (1..population).map(|k| mixed_payoffs(pairs, k, population)).collect()
}

/// Probability that a single mutant takes over a population of `population` residents.
///
/// `table[j - 1] = (pi_M,j, pi_R,j)`. Implements
/// `1 / (1 + sum_i prod_{j<=i} exp(-beta (pi_M,j - pi_R,j)))` with matched
/// indices, switching to log-sum-exp when the terms would overflow.
pub fn fixation_probability(table: &[(f64, f64)], beta: f64, population: usize) -> Result<f64> {
    if table.len() + 1 != population {
        return Err(Error::Domain(format!("payoff table has {} rows, expected {}", table.len(), population - 1)));
    }
    if !(beta >= 0.0) {
        return Err(Error::Domain(format!("selection strength must be >= 0, got {beta}")));
    }
    let mut exponent = 0.0;
    let exponents: Vec<f64> = table
        .iter()
        .map(|&(pm, pr)| {
            exponent -= beta * (pm - pr);
            exponent
        })
        .collect();
    let peak = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let phi = if peak < 700.0 {
        1.0 / (1.0 + exponents.iter().map(|e| e.exp()).sum::<f64>())
    } else {
        let log_sum = peak + exponents.iter().map(|e| (e - peak).exp()).sum::<f64>().ln();
        // 1 / (1 + e^x) for large x.
        (-log_sum - (-log_sum).exp().ln_1p()).exp()
    };
    Ok(phi.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
}

/// Relaxed partner classification used for residents: every inequality of
/// the explicit partner system, with niceness weakened to a cooperation
/// probability of at least 95% after full cooperation.
pub fn classify_partner_resident(s: &Strategy, b: f64, c: f64) -> Result<bool> {
    let conditions: Vec<Condition> = match s {
        Strategy::Reactive(p) => reactive_conditions(p, b, c)?,
        Strategy::Counting(r) => counting_conditions(r, b, c)?,
        other => return Err(Error::Unsupported(format!("cannot classify {} strategies", other.tag()))),
    };
    Ok(conditions.iter().all(|cond| match cond.kind {
        ConditionKind::Equal => cond.value >= RESIDENT_NICENESS,
        ConditionKind::AtMost => cond.value <= cond.bound,
    }))
}

pub fn summarize(trace: &[ResidentRecord]) -> Result<RunSummary> {
    let first = trace.first().ok_or_else(|| Error::Domain("cannot summarise an empty trace".into()))?;
    let total: u64 = trace.iter().map(|r| r.steps_as_resident).sum();
    if total == 0 {
        return Err(Error::Domain("trace covers zero steps".into()));
    }
    let mut coop = 0.0;
    let mut partner_steps = 0u64;
    let mut best = first;
    for record in trace {
        coop += record.self_coop_rate * record.steps_as_resident as f64;
        if record.is_partner {
            partner_steps += record.steps_as_resident;
        }
        if record.steps_as_resident > best.steps_as_resident {
            best = record;
        }
    }
    Ok(RunSummary {
        avg_coop_rate: coop / total as f64,
        partner_abundance: partner_steps as f64 / total as f64,
        most_abundant_strategy: best.strategy.clone(),
        most_abundant_steps: best.steps_as_resident,
    })
}

/// Source of pairwise outcomes for [`evolve_with`].
pub trait PairEngine {
    fn play(&mut self, s1: &Strategy, s2: &Strategy) -> Result<PairOutcome>;
}

/// The Markov-chain payoff engine.
#[derive(Debug, Clone)]
pub struct ChainEngine {
    pub game: GameParams,
    pub opts: PayoffOptions,
}

impl PairEngine for ChainEngine {
    fn play(&mut self, s1: &Strategy, s2: &Strategy) -> Result<PairOutcome> {
        play(s1, s2, &self.game, &self.opts)
    }
}

struct Resident {
    strategy: Strategy,
    self_play: PairOutcome,
    is_partner: bool,
    since: u64,
}

impl Resident {
    fn new<E: PairEngine>(strategy: Strategy, since: u64, cfg: &EvolutionConfig, engine: &mut E) -> Result<Self> {
        let self_play = engine.play(&strategy, &strategy)?;
        let is_partner = classify_partner_resident(&strategy, cfg.b, cfg.c)?;
        Ok(Resident { strategy, self_play, is_partner, since })
    }

    fn close(self, until: u64) -> ResidentRecord {
        ResidentRecord {
            step: self.since,
            self_coop_rate: self.self_play.cooperation.0,
            is_partner: self.is_partner,
            steps_as_resident: until - self.since,
            strategy: self.strategy,
        }
    }
}

/// Runs the process with the Markov-chain engine.
pub fn evolve(cfg: &EvolutionConfig) -> Result<(Vec<ResidentRecord>, RunSummary)> {
    cfg.validate()?;
    let mut engine = ChainEngine { game: cfg.game()?, opts: cfg.payoff_options() };
    evolve_with(cfg, &mut engine)
}

/// Runs the process with a caller-supplied engine.
///
/// Per mutant the engine is asked for the mutant's self-play and for the
/// mutant-resident pairing; the resident's self-play is computed once per
/// resident.
pub fn evolve_with<E: PairEngine>(cfg: &EvolutionConfig, engine: &mut E) -> Result<(Vec<ResidentRecord>, RunSummary)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::new();
    let mut resident = Resident::new(cfg.space.alld(cfg.memory), 0, cfg, engine)?;

    for step in 0..cfg.steps {
        let mutant = random_strategy(cfg.space, cfg.memory, &mut rng);
        let mm = engine.play(&mutant, &mutant)?.payoffs.0;
        let (mr, rm) = engine.play(&mutant, &resident.strategy)?.payoffs;
        let pairs = PairPayoffs { mm, mr, rm, rr: resident.self_play.payoffs.0 };
        let phi = fixation_probability(&mixed_payoff_table(&pairs, cfg.population)?, cfg.beta, cfg.population)?;
        if rng.gen::<f64>() < phi && step + 1 < cfg.steps {
            let next = Resident::new(mutant, step + 1, cfg, engine)?;
            trace.push(std::mem::replace(&mut resident, next).close(step + 1));
        }
    }
    trace.push(resident.close(cfg.steps));
    let summary = summarize(&trace)?;
    Ok((trace, summary))
}

/// Seed for run `run` of sweep cell `cell`, derived from a master seed.
pub fn derive_seed(master: u64, cell: u64, run: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(master) ^ cell) ^ run)
}
