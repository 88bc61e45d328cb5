//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 when
//! `partner-check --method both` finds the two methods disagreeing.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::cycle::best_response_payoff;
use crate::equilibrium::{
    describe_sequence, is_partner_algorithmic, is_partner_closed_form, is_partner_counting, PartnerVerdict, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::evolution::{derive_seed, evolve, EvolutionConfig};
use crate::game::{donation_game, GameParams};
use crate::output::{fmt_sig, write_summary, write_sweep, write_trace, SweepRow};
use crate::payoff::{play, PayoffOptions};
use crate::strategy::{parse_strategy, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DISAGREE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ipd-reactive", version, about = "Payoffs, partner checks and evolution of reactive-n strategies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Long-run payoffs and cooperation rates of two strategies: `pi1,pi2,coop1,coop2`.
    Payoff {
        strategy1: String,
        strategy2: String,
        #[command(flatten)]
        game: GameArgs,
        /// Tremble applied to both strategies before solving.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Decides whether a reactive or counting strategy is a partner.
    PartnerCheck {
        strategy: String,
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Best deterministic self-reactive deviation against a reactive strategy.
    BestResponse {
        strategy: String,
        #[command(flatten)]
        game: GameArgs,
    },
    /// Runs one rare-mutation simulation and writes trace.csv and summary.csv.
    Evolve(EvolveArgs),
    /// Runs a parameter sweep described by a key=value spec file.
    Sweep {
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Closed,
    Algorithmic,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct GameArgs {
    /// Donation game benefit.
    #[arg(long)]
    pub b: Option<f64>,
    /// Donation game cost.
    #[arg(long)]
    pub c: Option<f64>,
    /// General prisoner's dilemma payoffs `R,S,T,P`.
    #[arg(long, conflicts_with_all = ["b", "c"])]
    pub game: Option<String>,
}

impl GameArgs {
    /// The requested game; a donation game with b = 2, c = 1 unless told otherwise.
    pub fn resolve(&self) -> Result<GameParams> {
        if let Some(text) = &self.game {
            let values: Vec<f64> = text
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("--game expects R,S,T,P, got '{text}'")))?;
            if values.len() != 4 {
                return Err(Error::Config(format!("--game expects four payoffs, got {}", values.len())));
            }
            return GameParams::new(values[0], values[1], values[2], values[3]);
        }
        donation_game(self.b.unwrap_or(2.0), self.c.unwrap_or(1.0))
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct EvolveArgs {
    /// Optional key=value config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub memory: Option<usize>,
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Directory receiving trace.csv and summary.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

/// Applies config-file keys to `cfg`; returns whether a seed was present. Unknown keys are errors
/// unless listed in `extra`.
fn apply_config_keys(cfg: &mut EvolutionConfig, map: &BTreeMap<String, String>, extra: &[&str]) -> Result<bool> {
    let mut seeded = false;
    for (key, value) in map {
        match key.as_str() {
            "population" | "N" => cfg.population = parse_value(key, value)?,
            "beta" => cfg.beta = parse_value(key, value)?,
            "steps" | "T" => cfg.steps = parse_value(key, value)?,
            "memory" | "n" => cfg.memory = parse_value(key, value)?,
            "space" => cfg.space = value.parse()?,
            "b" => cfg.b = parse_value(key, value)?,
            "c" => cfg.c = parse_value(key, value)?,
            "eps" => cfg.eps = parse_value(key, value)?,
            "seed" => {
                cfg.seed = parse_value(key, value)?;
                seeded = true;
            }
            other if extra.contains(&other) => {}
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
    }
    Ok(seeded)
}

impl EvolveArgs {
    pub fn to_config(&self) -> Result<EvolutionConfig> {
        let mut cfg = EvolutionConfig::default();
        let mut seeded = false;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            seeded = apply_config_keys(&mut cfg, &parse_key_values(&text)?, &[])?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            seeded = true;
        }
        if !seeded {
            return Err(Error::Config("--seed is required".into()));
        }
        if let Some(v) = self.population {
            cfg.population = v;
        }
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.memory {
            cfg.memory = v;
        }
        if let Some(v) = &self.space {
            cfg.space = v.parse()?;
        }
        if let Some(v) = self.b {
            cfg.b = v;
        }
        if let Some(v) = self.c {
            cfg.c = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    CostBenefitRatio,
    Beta,
    MemoryN,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cost_benefit_ratio" => Ok(SweepAxis::CostBenefitRatio),
            "beta" => Ok(SweepAxis::Beta),
            "memory_n" => Ok(SweepAxis::MemoryN),
            other => Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        }
    }
}

/// A sweep over one parameter; every (cell, run) is an independent simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Base configuration; its seed is the master seed.
    pub base: EvolutionConfig,
    pub runs_per_cell: usize,
}

impl SweepSpec {
    /// Reads `axis`, `values` (comma separated), `runs_per_cell` and any evolve key.
    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        let mut base = EvolutionConfig::default();
        let seeded = apply_config_keys(&mut base, &map, &["axis", "values", "runs_per_cell"])?;
        if !seeded {
            return Err(Error::Config("sweep spec needs a master seed".into()));
        }
        let axis = map.get("axis").ok_or_else(|| Error::Config("sweep spec needs an axis".into()))?.parse()?;
        let values = map
            .get("values")
            .ok_or_else(|| Error::Config("sweep spec needs values".into()))?
            .split(',')
            .map(|v| parse_value::<f64>("values", v.trim()))
            .collect::<Result<Vec<_>>>()?;
        let runs_per_cell = match map.get("runs_per_cell") {
            Some(v) => parse_value("runs_per_cell", v)?,
            None => 1,
        };
        let spec = SweepSpec { axis, values, base, runs_per_cell };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs_per_cell must be positive".into()));
        }
        for &v in &self.values {
            self.cell_config(v, 0, 0)?.validate()?;
        }
        Ok(())
    }

    /// Configuration for run `run` of cell `cell` at axis value `value`.
    pub fn cell_config(&self, value: f64, cell: usize, run: usize) -> Result<EvolutionConfig> {
        let mut cfg = self.base.clone();
        match self.axis {
            SweepAxis::CostBenefitRatio => cfg.c = value * cfg.b,
            SweepAxis::Beta => cfg.beta = value,
            SweepAxis::MemoryN => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Config(format!("memory_n values must be positive integers, got {value}")));
                }
                cfg.memory = value as usize;
            }
        }
        cfg.seed = derive_seed(self.base.seed, cell as u64, run as u64);
        Ok(cfg)
    }
}

/// Runs every (cell, run) of a sweep on `jobs` threads; rows come back in cell order.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let tasks: Vec<(usize, f64, usize)> = spec
        .values
        .iter()
        .enumerate()
        .flat_map(|(cell, &v)| (0..spec.runs_per_cell).map(move |run| (cell, v, run)))
        .collect();
    let work = || {
        tasks
            .par_iter()
            .map(|&(cell, value, run)| {
                let (_, summary) = evolve(&spec.cell_config(value, cell, run)?)?;
                Ok(SweepRow {
                    axis_value: value,
                    run_index: run,
                    avg_coop_rate: summary.avg_coop_rate,
                    partner_abundance: summary.partner_abundance,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    match jobs {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// `pi1,pi2,coop1,coop2` for a pairing, plus whether a fallback tremble was applied.
pub fn payoff_line(s1: &Strategy, s2: &Strategy, g: &GameParams, eps: f64) -> Result<(String, bool)> {
    let opts = PayoffOptions::with_eps(eps);
    let o = play(s1, s2, g, &opts)?;
    let line = [o.payoffs.0, o.payoffs.1, o.cooperation.0, o.cooperation.1].map(fmt_sig).join(",");
    Ok((line, o.used_fallback(&opts)))
}

/// Report lines and exit code of a partner check.
pub fn partner_report(s: &Strategy, g: &GameParams, method: Option<Method>, tol: f64) -> Result<(Vec<String>, i32)> {
    let donation = g.as_donation(1e-12);
    let reactive = s.as_reactive().ok_or_else(|| {
        Error::Unsupported(format!("partner checks need a reactive or counting strategy, got {}", s.tag()))
    })?;
    let closed_available = donation.is_some()
        && match s {
            Strategy::Counting(_) => true,
            _ => reactive.n() <= 3,
        };
    let method = method.unwrap_or(if closed_available { Method::Both } else { Method::Algorithmic });

    let closed = |label: &mut Vec<String>| -> Result<PartnerVerdict> {
        let (b, c) =
            donation.ok_or_else(|| Error::Unsupported("closed-form conditions need a donation game".into()))?;
        let verdict = match s {
            Strategy::Counting(r) => is_partner_counting(r, b, c, tol)?,
            _ => is_partner_closed_form(&reactive, b, c, tol)?,
        };
        label.push(format!("closed-form: {}", describe(&verdict)));
        Ok(verdict)
    };
    let algorithmic = |label: &mut Vec<String>| -> Result<PartnerVerdict> {
        let verdict = is_partner_algorithmic(&reactive, g, tol)?;
        label.push(format!("algorithmic: {}", describe(&verdict)));
        Ok(verdict)
    };

    let mut lines = Vec::new();
    match method {
        Method::Closed => {
            closed(&mut lines)?;
            Ok((lines, EXIT_OK))
        }
        Method::Algorithmic => {
            algorithmic(&mut lines)?;
            Ok((lines, EXIT_OK))
        }
        Method::Both => {
            let a = closed(&mut lines)?;
            let b = algorithmic(&mut lines)?;
            if a.is_partner == b.is_partner {
                lines.push("methods agree".into());
                Ok((lines, EXIT_OK))
            } else {
                lines.push("methods DISAGREE".into());
                Ok((lines, EXIT_DISAGREE))
            }
        }
    }
}

fn describe(v: &PartnerVerdict) -> String {
    if v.is_partner {
        return "partner".into();
    }
    if let Some(cond) = &v.failed_condition {
        return format!("not partner; violated condition: {cond}");
    }
    match &v.witness_deviation {
        Some(dev) => format!(
            "not partner; deviation {} from own history {} earns {} ({})",
            describe_sequence(&dev.sequence),
            dev.initial,
            fmt_sig(dev.payoff),
            Strategy::SelfReactive(dev.strategy.clone())
        ),
        None => "not partner".into(),
    }
}

/// `payoff,witness,initial_history,cycle` for the best deviation against a reactive strategy.
pub fn best_response_line(s: &Strategy, g: &GameParams) -> Result<String> {
    let p = s.as_reactive().ok_or_else(|| {
        Error::Unsupported(format!("best response needs a reactive or counting strategy, got {}", s.tag()))
    })?;
    let br = best_response_payoff(&p, g)?;
    Ok(format!(
        "{},{},{},{}",
        fmt_sig(br.payoff),
        Strategy::SelfReactive(br.witness),
        br.initial,
        describe_sequence(&br.cycle.sequence())
    ))
}

/// Runs one simulation and writes `trace.csv` and `summary.csv` into `dir`.
pub fn write_evolution(cfg: &EvolutionConfig, dir: &Path) -> Result<()> {
    let (trace, summary) = evolve(cfg)?;
    fs::create_dir_all(dir)?;
    write_trace(fs::File::create(dir.join("trace.csv"))?, &trace)?;
    write_summary(fs::File::create(dir.join("summary.csv"))?, &summary)?;
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Payoff { strategy1, strategy2, game, eps } => {
            let s1 = parse_strategy(&strategy1)?;
            let s2 = parse_strategy(&strategy2)?;
            let (line, fallback) = payoff_line(&s1, &s2, &game.resolve()?, eps)?;
            if fallback {
                writeln!(stderr, "note: chain not ergodic, tremble fallback applied")?;
            }
            writeln!(stdout, "{line}")?;
            Ok(EXIT_OK)
        }
        Command::PartnerCheck { strategy, game, method, tol } => {
            let s = parse_strategy(&strategy)?;
            let (lines, code) = partner_report(&s, &game.resolve()?, method, tol)?;
            for line in lines {
                writeln!(stdout, "{line}")?;
            }
            Ok(code)
        }
        Command::BestResponse { strategy, game } => {
            let s = parse_strategy(&strategy)?;
            writeln!(stdout, "{}", best_response_line(&s, &game.resolve()?)?)?;
            Ok(EXIT_OK)
        }
        Command::Evolve(args) => {
            let cfg = args.to_config()?;
            write_evolution(&cfg, &args.out)?;
            Ok(EXIT_OK)
        }
        Command::Sweep { spec, out, jobs } => {
            let text = fs::read_to_string(&spec).map_err(|e| Error::Config(format!("{}: {e}", spec.display())))?;
            let spec = SweepSpec::parse(&text)?;
            let rows = run_sweep(&spec, jobs)?;
            write_sweep(fs::File::create(&out)?, &rows)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("ipd-reactive").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn key_value_parsing() {
        let map = parse_key_values("# comment\nbeta = 2\n\nspace=counting # trailing\n").unwrap();
        assert_eq!(map["beta"], "2");
        assert_eq!(map["space"], "counting");
        assert!(parse_key_values("oops").is_err());
    }

    #[test]
    fn payoff_command() {
        assert_eq!(run_capture(&["payoff", "reactive:1:0,0", "reactive:1:0,0", "--b", "2", "--c", "1"]).1, "0,0,0,0\n");
        assert_eq!(run_capture(&["payoff", "reactive:1:1,0", "reactive:1:1,0", "--b", "2", "--c", "1"]).1, "1,1,1,1\n");
        let (code, _, err) = run_capture(&["payoff", "reactive:1:1,x", "reactive:1:1,0"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("position 13"), "{err}");
        let (code, _, err) = run_capture(&["payoff", "reactive:1:1,0", "reactive:2:1,0,0,0"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("mismatch"));
    }

    #[test]
    fn partner_check_command() {
        let (code, out, _) =
            run_capture(&["partner-check", "reactive:2:1,0.6,0.8,0.2", "--b", "2", "--c", "1", "--method", "both"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("closed-form: partner") && out.contains("algorithmic: partner") && out.contains("agree"));

        let (code, out, _) = run_capture(&["partner-check", "counting:3:1,0.83,0.66,0.5", "--b", "2", "--c", "1"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("closed-form: partner"));

        let (code, out, _) = run_capture(&["partner-check", "reactive:2:1,1,1,0", "--method", "algorithmic"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("not partner; deviation (CD)") || out.contains("not partner; deviation (DC)"), "{out}");

        let (code, _, err) =
            run_capture(&["partner-check", "reactive:4:1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0", "--method", "closed"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("unsupported"));
        let (code, _, _) = run_capture(&["partner-check", "reactive:1:1,0", "--game", "3,0,5,1", "--method", "closed"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, out, _) = run_capture(&["partner-check", "reactive:1:1,0", "--game", "3,0,5,1"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out, "algorithmic: partner\n");
    }

    #[test]
    fn best_response_command() {
        let (code, out, _) = run_capture(&["best-response", "reactive:2:1,0.6,0.8,0.2"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("1,self-reactive:2:"), "{out}");
        assert!(out.trim_end().ends_with(",(C)"));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_capture(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["evolve", "--steps", "10"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn sweep_spec_parsing() {
        let spec = SweepSpec::parse("axis=memory_n\nvalues=1,2,3\nruns_per_cell=2\nseed=5\nsteps=10\n").unwrap();
        assert_eq!(spec.axis, SweepAxis::MemoryN);
        assert_eq!(spec.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(spec.cell_config(2.0, 1, 0).unwrap().memory, 2);
        assert_ne!(spec.cell_config(2.0, 1, 0).unwrap().seed, spec.cell_config(2.0, 1, 1).unwrap().seed);

        let spec = SweepSpec::parse("axis=cost_benefit_ratio\nvalues=0.1,0.5\nseed=1\nb=2\n").unwrap();
        assert_eq!(spec.cell_config(0.5, 1, 0).unwrap().c, 1.0);

        assert!(SweepSpec::parse("axis=beta\nvalues=2,1\nseed=1\n").is_err());
        assert!(SweepSpec::parse("axis=memory_n\nvalues=1,4\nseed=1\n").is_err());
        assert!(SweepSpec::parse("axis=memory_n\nvalues=1,2\n").is_err());
        assert!(SweepSpec::parse("axis=beta\nvalues=\nseed=1\n").is_err());
        assert!(SweepSpec::parse("axis=nope\nvalues=1\nseed=1\n").is_err());
        assert!(SweepSpec::parse("axis=beta\nvalues=1\nseed=1\nbogus=3\n").is_err());
    }
}
