//! Strategy spaces: reactive-n, self-reactive-n, counting-n and memory-n.
//!
//! Every probability vector is stored in listing order (all-`C` history
//! first); see [`crate::history`] for the index convention.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::Action;
use crate::history::{listing_position, History};

/// Largest memory for which joint-history chains (`4^n` states) are built.
pub const MAX_MEMORY: usize = 6;
/// Largest memory for exhaustive enumeration of deterministic self-reactive strategies.
pub const MAX_ENUMERATION_MEMORY: usize = 4;

fn check_probs(probs: &[f64]) -> Result<()> {
    for (i, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("entry {i} = {p} is not a probability")));
        }
    }
    Ok(())
}

fn check_len(what: &str, n: usize, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Domain(format!("{what} with n={n} needs {want} entries, got {got}")));
    }
    Ok(())
}

fn check_memory(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::Domain(format!("memory length {n} outside 1..={max}")));
    }
    Ok(())
}

/// Cooperation probabilities conditioned on the co-player's last `n` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveN {
    n: usize,
    probs: Vec<f64>,
}

impl ReactiveN {
    /// `probs` in listing order, e.g. `(p_CC, p_CD, p_DC, p_DD)` for `n = 2`.
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        check_memory(n, MAX_MEMORY)?;
        check_len("reactive strategy", n, probs.len(), 1 << n)?;
        check_probs(&probs)?;
        Ok(ReactiveN { n, probs })
    }

    pub fn constant(n: usize, q: f64) -> Result<Self> {
        ReactiveN::new(n, vec![q; 1 << n])
    }

    pub fn alld(n: usize) -> Self {
        ReactiveN { n, probs: vec![0.0; 1 << n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Cooperation probability after co-player history `index`.
    #[inline]
    pub fn prob(&self, index: usize) -> f64 {
        self.probs[listing_position(index, self.n)]
    }

    pub fn prob_after(&self, h: &History) -> f64 {
        self.prob(h.index())
    }

    /// Response to a fully cooperative co-player history.
    pub fn prob_all_c(&self) -> f64 {
        self.probs[0]
    }

    pub fn is_nice(&self, tol: f64) -> bool {
        is_nice(self, tol)
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// A reactive strategy is nice when it cooperates for sure after `n` co-player cooperations.
pub fn is_nice(p: &ReactiveN, tol: f64) -> bool {
    p.prob_all_c() >= 1.0 - tol
}

/// Cooperation probabilities conditioned on the player's own last `n` actions.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfReactiveN {
    n: usize,
    probs: Vec<f64>,
}

impl SelfReactiveN {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        check_memory(n, MAX_MEMORY)?;
        check_len("self-reactive strategy", n, probs.len(), 1 << n)?;
        check_probs(&probs)?;
        Ok(SelfReactiveN { n, probs })
    }

    /// Deterministic strategy whose action after own history `h` is bit `h` of `code`.
    pub fn from_code(n: usize, code: u64) -> Self {
        assert!((1..=MAX_ENUMERATION_MEMORY).contains(&n));
        let size = 1usize << n;
        let mut probs = vec![0.0; size];
        for index in 0..size {
            probs[listing_position(index, n)] = ((code >> index) & 1) as f64;
        }
        SelfReactiveN { n, probs }
    }

    /// Inverse of [`SelfReactiveN::from_code`] for deterministic strategies.
    pub fn code(&self) -> Option<u64> {
        if !self.is_deterministic() || self.n > MAX_ENUMERATION_MEMORY {
            return None;
        }
        Some((0..1usize << self.n).map(|h| (self.prob(h) as u64) << h).sum())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, index: usize) -> f64 {
        self.probs[listing_position(index, self.n)]
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Action of a deterministic strategy after own history `index`.
    pub fn action(&self, index: usize) -> Action {
        if self.prob(index) >= 0.5 {
            Action::C
        } else {
            Action::D
        }
    }
}

/// Cooperation probabilities `(r_n, ..., r_0)`; `r_i` applies when the
/// co-player cooperated `i` times in the last `n` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingN {
    n: usize,
    probs: Vec<f64>,
}

impl CountingN {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("memory length must be at least 1".into()));
        }
        check_len("counting strategy", n, probs.len(), n + 1)?;
        check_probs(&probs)?;
        Ok(CountingN { n, probs })
    }

    pub fn alld(n: usize) -> Self {
        CountingN { n, probs: vec![0.0; n + 1] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `r_i`, the response to `i` co-player cooperations.
    #[inline]
    pub fn r(&self, cooperations: usize) -> f64 {
        self.probs[self.n - cooperations]
    }

    pub fn to_reactive(&self) -> Result<ReactiveN> {
        counting_to_reactive(self)
    }
}

/// Expands a counting strategy into the reactive-n strategy with `p_h = r_{#C(h)}`.
pub fn counting_to_reactive(r: &CountingN) -> Result<ReactiveN> {
    check_memory(r.n, MAX_MEMORY)?;
    let n = r.n;
    let mut probs = vec![0.0; 1 << n];
    for h in History::all(n) {
        probs[listing_position(h.index(), n)] = r.r(h.cooperations());
    }
    Ok(ReactiveN { n, probs })
}

/// Cooperation probabilities over joint histories `(own, co-player)`, own history major.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryN {
    n: usize,
    probs: Vec<f64>,
}

impl MemoryN {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        check_memory(n, MAX_MEMORY)?;
        check_len("memory strategy", n, probs.len(), 1 << (2 * n))?;
        check_probs(&probs)?;
        Ok(MemoryN { n, probs })
    }

    /// Deterministic memory-n strategy; bit `own << n | opp` of `code` is the
    /// action after that joint history. Only for `n <= 3`.
    pub fn from_code(n: usize, code: u64) -> Self {
        assert!(n >= 1 && 2 * n <= 6);
        let size = 1usize << (2 * n);
        let mut probs = vec![0.0; size];
        for joint in 0..size {
            probs[size - 1 - joint] = ((code >> joint) & 1) as f64;
        }
        MemoryN { n, probs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Cooperation probability after own history `own` and co-player history `opp`.
    #[inline]
    pub fn prob(&self, own: usize, opp: usize) -> f64 {
        self.probs[self.probs.len() - 1 - ((own << self.n) | opp)]
    }

    /// Response to mutual cooperation in each of the last `n` rounds.
    pub fn prob_all_c(&self) -> f64 {
        self.probs[0]
    }

    /// Maps every entry `p` to `(1 - 2 eps) p + eps`.
    pub fn tremble(&self, eps: f64) -> MemoryN {
        MemoryN { n: self.n, probs: self.probs.iter().map(|p| (1.0 - 2.0 * eps) * p + eps).collect() }
    }
}

/// Which family a randomly drawn mutant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Reactive,
    Counting,
}

impl Space {
    pub fn tag(self) -> &'static str {
        match self {
            Space::Reactive => "reactive",
            Space::Counting => "counting",
        }
    }

    /// Unconditional defection in this space.
    pub fn alld(self, n: usize) -> Strategy {
        match self {
            Space::Reactive => Strategy::Reactive(ReactiveN::alld(n)),
            Space::Counting => Strategy::Counting(CountingN::alld(n)),
        }
    }
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reactive" => Ok(Space::Reactive),
            "counting" => Ok(Space::Counting),
            other => Err(Error::Config(format!("unknown strategy space '{other}'"))),
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Reactive(ReactiveN),
    Counting(CountingN),
    SelfReactive(SelfReactiveN),
    Memory(MemoryN),
}

impl Strategy {
    pub fn n(&self) -> usize {
        match self {
            Strategy::Reactive(s) => s.n,
            Strategy::Counting(s) => s.n,
            Strategy::SelfReactive(s) => s.n,
            Strategy::Memory(s) => s.n,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::Reactive(_) => "reactive",
            Strategy::Counting(_) => "counting",
            Strategy::SelfReactive(_) => "self-reactive",
            Strategy::Memory(_) => "memory",
        }
    }

    pub fn probs(&self) -> &[f64] {
        match self {
            Strategy::Reactive(s) => &s.probs,
            Strategy::Counting(s) => &s.probs,
            Strategy::SelfReactive(s) => &s.probs,
            Strategy::Memory(s) => &s.probs,
        }
    }

    /// Reactive view of reactive and counting strategies.
    pub fn as_reactive(&self) -> Option<ReactiveN> {
        match self {
            Strategy::Reactive(p) => Some(p.clone()),
            Strategy::Counting(r) => counting_to_reactive(r).ok(),
            _ => None,
        }
    }

    pub fn to_memory(&self) -> Result<MemoryN> {
        embed(self)
    }
}

impl From<ReactiveN> for Strategy {
    fn from(p: ReactiveN) -> Self {
        Strategy::Reactive(p)
    }
}

impl From<CountingN> for Strategy {
    fn from(r: CountingN) -> Self {
        Strategy::Counting(r)
    }
}

impl From<SelfReactiveN> for Strategy {
    fn from(s: SelfReactiveN) -> Self {
        Strategy::SelfReactive(s)
    }
}

impl From<MemoryN> for Strategy {
    fn from(m: MemoryN) -> Self {
        Strategy::Memory(m)
    }
}

/// Lifts any strategy into the memory-n space it shares with every other strategy of memory `n`.
pub fn embed(s: &Strategy) -> Result<MemoryN> {
    let n = s.n();
    check_memory(n, MAX_MEMORY)?;
    let states = 1usize << n;
    let mut probs = vec![0.0; states * states];
    let size = probs.len();
    let reactive;
    let lookup: Box<dyn Fn(usize, usize) -> f64 + '_> = match s {
        Strategy::Memory(m) => return Ok(m.clone()),
        Strategy::Reactive(p) => Box::new(move |_own, opp| p.prob(opp)),
        Strategy::Counting(r) => {
            reactive = counting_to_reactive(r)?;
            Box::new(|_own, opp| reactive.prob(opp))
        }
        Strategy::SelfReactive(q) => Box::new(move |own, _opp| q.prob(own)),
    };
    for own in 0..states {
        for opp in 0..states {
            probs[size - 1 - ((own << n) | opp)] = lookup(own, opp);
        }
    }
    Ok(MemoryN { n, probs })
}

/// All `2^(2^n)` deterministic self-reactive-n strategies, ordered by [`SelfReactiveN::code`].
pub fn enumerate_deterministic_self_reactive(n: usize) -> Result<Vec<SelfReactiveN>> {
    check_memory(n, MAX_ENUMERATION_MEMORY)?;
    let count = 1u64 << (1u64 << n);
    Ok((0..count).map(|code| SelfReactiveN::from_code(n, code)).collect())
}

/// Uniform draw from `[0,1]^(2^n)` (reactive) or `[0,1]^(n+1)` (counting).
pub fn random_strategy<R: Rng + ?Sized>(space: Space, n: usize, rng: &mut R) -> Strategy {
    match space {
        Space::Reactive => {
            let probs = (0..1usize << n).map(|_| rng.gen::<f64>()).collect();
            Strategy::Reactive(ReactiveN { n, probs })
        }
        Space::Counting => {
            let probs = (0..=n).map(|_| rng.gen::<f64>()).collect();
            Strategy::Counting(CountingN { n, probs })
        }
    }
}

impl fmt::Display for Strategy {
    /// `tag:n:p1,p2,...` with entries in listing order and shortest round-trip decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:", self.tag(), self.n())?;
        for (i, p) in self.probs().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_strategy(s)
    }
}

pub fn parse_strategy(text: &str) -> Result<Strategy> {
    let err = |pos: usize, msg: String| Error::Parse { pos, msg };
    let mut parts = text.splitn(3, ':');
    let tag = parts.next().unwrap_or_default();
    let n_text = parts.next().ok_or_else(|| err(tag.len(), "expected ':' after strategy tag".into()))?;
    let n_pos = tag.len() + 1;
    let body = parts.next().ok_or_else(|| err(n_pos + n_text.len(), "expected ':' after memory length".into()))?;
    let body_pos = n_pos + n_text.len() + 1;

    let n: usize = n_text.trim().parse().map_err(|_| err(n_pos, format!("invalid memory length '{n_text}'")))?;

    let mut probs = Vec::new();
    let mut pos = body_pos;
    for token in body.split(',') {
        let value: f64 = token.trim().parse().map_err(|_| err(pos, format!("invalid probability '{token}'")))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(err(pos, format!("probability {value} outside [0, 1]")));
        }
        probs.push(value);
        pos += token.len() + 1;
    }

    let built = match tag {
        "reactive" => ReactiveN::new(n, probs).map(Strategy::Reactive),
        "counting" => CountingN::new(n, probs).map(Strategy::Counting),
        "self-reactive" => SelfReactiveN::new(n, probs).map(Strategy::SelfReactive),
        "memory" => MemoryN::new(n, probs).map(Strategy::Memory),
        other => return Err(err(0, format!("unknown strategy tag '{other}'"))),
    };
    built.map_err(|e| match e {
        Error::Domain(msg) => err(body_pos, msg),
        other => other,
    })
}
