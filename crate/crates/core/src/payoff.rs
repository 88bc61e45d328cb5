//! Long-run payoffs of two memory-n players via the joint-history Markov chain.
//!
//! States are pairs `(h1, h2)` of the two players' n-histories with index
//! `h1 << n | h2`. Player 1 cooperates with probability `s1(h1, h2)` and
//! player 2 with `s2(h2, h1)`, independently; both histories then shift in
//! the new actions.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::game::{Action, GameParams};
use crate::history::shift;
use crate::strategy::{embed, MemoryN, Strategy};

/// Default tremble used when a chain without trembles has several closed classes.
pub const DEFAULT_FALLBACK_EPS: f64 = 1e-8;
/// Tolerance used to decide that both players are nice.
pub const DEFAULT_NICE_TOL: f64 = 1e-9;
/// Maximum stationarity residual accepted from the solver.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

const POWER_ITERATIONS: usize = 100_000;

/// Row-stochastic transition matrix over joint histories.
pub fn transition_matrix(s1: &MemoryN, s2: &MemoryN) -> Result<DMatrix<f64>> {
    if s1.n() != s2.n() {
        return Err(Error::MemoryMismatch { left: s1.n(), right: s2.n() });
    }
    let n = s1.n();
    let side = 1usize << n;
    let states = side * side;
    let mut m = DMatrix::zeros(states, states);
    for h1 in 0..side {
        for h2 in 0..side {
            let from = (h1 << n) | h2;
            let x = s1.prob(h1, h2);
            let y = s2.prob(h2, h1);
            for (a1, pa1) in [(Action::C, x), (Action::D, 1.0 - x)] {
                for (a2, pa2) in [(Action::C, y), (Action::D, 1.0 - y)] {
                    let to = (shift(h1, a1, n) << n) | shift(h2, a2, n);
                    m[(from, to)] += pa1 * pa2;
                }
            }
        }
    }
    Ok(m)
}

/// Stationary distribution over joint histories.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDist {
    n: usize,
    v: Vec<f64>,
}

impl StationaryDist {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }

    /// Mass on the joint state with player histories `h1` and `h2`.
    pub fn prob(&self, h1: usize, h2: usize) -> f64 {
        self.v[(h1 << self.n) | h2]
    }

    /// `max_j |(v^T M)_j - v_j|`.
    pub fn residual(&self, m: &DMatrix<f64>) -> f64 {
        stationarity_residual(m, &self.v)
    }
}

fn stationarity_residual(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let states = v.len();
    (0..states)
        .map(|j| {
            let flow: f64 = (0..states).map(|i| v[i] * m[(i, j)]).sum();
            (flow - v[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Number of closed communicating classes among positive-probability transitions.
pub fn closed_classes(m: &DMatrix<f64>) -> usize {
    let states = m.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(states, 4 * states);
    let nodes: Vec<_> = (0..states).map(|_| graph.add_node(())).collect();
    for i in 0..states {
        for j in 0..states {
            if m[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut component = vec![0usize; states];
    let sccs = tarjan_scc(&graph);
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            component[node.index()] = c;
        }
    }
    let mut leaks = vec![false; sccs.len()];
    for i in 0..states {
        for j in 0..states {
            if m[(i, j)] > 0.0 && component[i] != component[j] {
                leaks[component[i]] = true;
            }
        }
    }
    leaks.iter().filter(|&&l| !l).count()
}

/// Solves `v^T M = v^T`, `sum(v) = 1`.
///
/// Uses a dense LU solve of the fixed-point system with one equation replaced
/// by the normalisation, falling back to power iteration when the solve fails
/// or its residual exceeds `tol`. Chains with more than one closed class are
/// rejected with [`Error::NonErgodic`].
pub fn stationary_distribution(m: &DMatrix<f64>, tol: f64) -> Result<StationaryDist> {
    let states = m.nrows();
    if states == 0 || m.ncols() != states || !states.is_power_of_two() || !states.trailing_zeros().is_multiple_of(2) {
        return Err(Error::Domain(format!("expected a 4^n x 4^n matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let n = (states.trailing_zeros() / 2) as usize;
    let classes = closed_classes(m);
    if classes != 1 {
        return Err(Error::NonErgodic { classes });
    }

    let mut a = m.transpose();
    for i in 0..states {
        a[(i, i)] -= 1.0;
    }
    for j in 0..states {
        a[(states - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(states);
    rhs[states - 1] = 1.0;

    let mut v: Vec<f64> = match a.lu().solve(&rhs) {
        Some(sol) => sol.iter().copied().collect(),
        None => vec![1.0 / states as f64; states],
    };
    normalise(&mut v);

    if !(stationarity_residual(m, &v) <= tol) {
        power_iterate(m, &mut v, tol);
        if !(stationarity_residual(m, &v) <= tol) {
            return Err(Error::Solver(format!(
                "stationary residual {:e} above tolerance {tol:e}",
                stationarity_residual(m, &v)
            )));
        }
    }
    Ok(StationaryDist { n, v })
}

fn normalise(v: &mut [f64]) {
    for x in v.iter_mut() {
        if !x.is_finite() || *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        let uniform = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = uniform);
    }
}

fn power_iterate(m: &DMatrix<f64>, v: &mut Vec<f64>, tol: f64) {
    let states = v.len();
    let mut next = vec![0.0; states];
    for _ in 0..POWER_ITERATIONS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..states {
            if v[i] == 0.0 {
                continue;
            }
            for j in 0..states {
                next[j] += v[i] * m[(i, j)];
            }
        }
        // Lazy step: averaging with the previous iterate removes periodicity.
        for j in 0..states {
            next[j] = 0.5 * (next[j] + v[j]);
        }
        std::mem::swap(v, &mut next);
        normalise(v);
        if stationarity_residual(m, v) <= tol {
            return;
        }
    }
}

/// Knobs for [`play`] and the convenience wrappers around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffOptions {
    /// Tremble applied to both strategies before solving (`p -> (1 - 2 eps) p + eps`).
    pub eps: f64,
    /// Tremble to retry with when the untrembled chain is not ergodic; `None` propagates the error.
    pub fallback_eps: Option<f64>,
    /// Two strategies cooperating with at least `1 - nice_tol` after mutual
    /// cooperation are treated as playing mutual cooperation forever.
    pub nice_tol: f64,
    pub solver_tol: f64,
}

impl Default for PayoffOptions {
    fn default() -> Self {
        PayoffOptions {
            eps: 0.0,
            fallback_eps: Some(DEFAULT_FALLBACK_EPS),
            nice_tol: DEFAULT_NICE_TOL,
            solver_tol: DEFAULT_SOLVER_TOL,
        }
    }
}

impl PayoffOptions {
    pub fn with_eps(eps: f64) -> Self {
        PayoffOptions { eps, ..Default::default() }
    }

    pub fn strict() -> Self {
        PayoffOptions { fallback_eps: None, ..Default::default() }
    }
}

/// Everything the engine knows about one pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub payoffs: (f64, f64),
    pub cooperation: (f64, f64),
    /// Tremble actually applied, if any.
    pub tremble: Option<f64>,
    /// Both players nice; mutual cooperation returned without solving.
    pub nice_pair: bool,
}

impl PairOutcome {
    /// The fallback tremble was needed because the untrembled chain was not ergodic.
    pub fn used_fallback(&self, opts: &PayoffOptions) -> bool {
        opts.eps == 0.0 && self.tremble.is_some()
    }
}

/// Plays two strategies of equal memory against each other.
pub fn play(s1: &Strategy, s2: &Strategy, g: &GameParams, opts: &PayoffOptions) -> Result<PairOutcome> {
    if s1.n() != s2.n() {
        return Err(Error::MemoryMismatch { left: s1.n(), right: s2.n() });
    }
    play_memory(&embed(s1)?, &embed(s2)?, g, opts)
}

/// [`play`] for strategies already lifted into memory-n form.
pub fn play_memory(m1: &MemoryN, m2: &MemoryN, g: &GameParams, opts: &PayoffOptions) -> Result<PairOutcome> {
    if m1.n() != m2.n() {
        return Err(Error::MemoryMismatch { left: m1.n(), right: m2.n() });
    }
    let nice = |m: &MemoryN| m.prob_all_c() >= 1.0 - opts.nice_tol;
    if nice(m1) && nice(m2) {
        return Ok(PairOutcome { payoffs: (g.r, g.r), cooperation: (1.0, 1.0), tremble: None, nice_pair: true });
    }

    if opts.eps > 0.0 {
        return solve_pair(&m1.tremble(opts.eps), &m2.tremble(opts.eps), g, opts.solver_tol)
            .map(|o| PairOutcome { tremble: Some(opts.eps), ..o });
    }
    match solve_pair(m1, m2, g, opts.solver_tol) {
        Err(Error::NonErgodic { .. }) if opts.fallback_eps.is_some() => {
            let eps = opts.fallback_eps.unwrap_or(DEFAULT_FALLBACK_EPS);
            solve_pair(&m1.tremble(eps), &m2.tremble(eps), g, opts.solver_tol)
                .map(|o| PairOutcome { tremble: Some(eps), ..o })
        }
        other => other,
    }
}

fn solve_pair(m1: &MemoryN, m2: &MemoryN, g: &GameParams, tol: f64) -> Result<PairOutcome> {
    let n = m1.n();
    let side = 1usize << n;
    let chain = transition_matrix(m1, m2)?;
    let dist = stationary_distribution(&chain, tol)?;
    let (mut pi1, mut pi2, mut coop1, mut coop2) = (0.0, 0.0, 0.0, 0.0);
    for h1 in 0..side {
        for h2 in 0..side {
            let w = dist.prob(h1, h2);
            if w == 0.0 {
                continue;
            }
            let x = m1.prob(h1, h2);
            let y = m2.prob(h2, h1);
            let cc = x * y;
            let cd = x * (1.0 - y);
            let dc = (1.0 - x) * y;
            let dd = (1.0 - x) * (1.0 - y);
            pi1 += w * (cc * g.r + cd * g.s + dc * g.t + dd * g.p);
            pi2 += w * (cc * g.r + cd * g.t + dc * g.s + dd * g.p);
            coop1 += w * x;
            coop2 += w * y;
        }
    }
    Ok(PairOutcome { payoffs: (pi1, pi2), cooperation: (coop1, coop2), tremble: None, nice_pair: false })
}

/// Long-run average payoffs `(pi1, pi2)`.
pub fn average_payoffs(s1: &Strategy, s2: &Strategy, g: &GameParams, opts: &PayoffOptions) -> Result<(f64, f64)> {
    play(s1, s2, g, opts).map(|o| o.payoffs)
}

/// Long-run frequency with which player 1 cooperates.
pub fn cooperation_rate(s1: &Strategy, s2: &Strategy, opts: &PayoffOptions) -> Result<f64> {
    // Any valid game works: the cooperation frequencies do not depend on payoffs.
    play(s1, s2, &GameParams::axelrod(), opts).map(|o| o.cooperation.0)
}
