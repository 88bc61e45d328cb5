use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use ipd_reactive_ffi::*;

fn parse(text: &str) -> *mut IpdStrategy {
    let text = CString::new(text).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { ipd_strategy_parse(text.as_ptr(), &mut handle) }, IpdStatus::Ok);
    assert!(!handle.is_null());
    handle
}

fn donation(b: f64, c: f64) -> IpdGame {
    let mut g = IpdGame { r: 0.0, s: 0.0, t: 0.0, p: 0.0 };
    assert_eq!(unsafe { ipd_donation_game(b, c, &mut g) }, IpdStatus::Ok);
    g
}

fn last_error() -> String {
    let msg = ipd_last_error();
    assert!(!msg.is_null());
    unsafe { CStr::from_ptr(msg) }.to_str().unwrap().to_string()
}

#[test]
fn payoffs_through_handles() {
    let g = donation(2.0, 1.0);
    assert_eq!(g, IpdGame { r: 1.0, s: -1.0, t: 2.0, p: 0.0 });
    let tft = parse("reactive:1:1,0");
    let alld = parse("reactive:1:0,0");
    let mut res = IpdPairResult::default();
    assert_eq!(unsafe { ipd_payoffs(tft, tft, &g, 0.0, &mut res) }, IpdStatus::Ok);
    assert_eq!((res.payoff1, res.payoff2, res.coop1, res.coop2), (1.0, 1.0, 1.0, 1.0));
    assert!(!res.used_fallback);

    assert_eq!(unsafe { ipd_payoffs(alld, alld, &g, 0.0, &mut res) }, IpdStatus::Ok);
    assert_eq!((res.payoff1, res.coop1), (0.0, 0.0));

    assert_eq!(unsafe { ipd_strategy_memory(tft) }, 1);
    let s = unsafe { ipd_strategy_to_string(tft) };
    assert_eq!(unsafe { CStr::from_ptr(s) }.to_str().unwrap(), "reactive:1:1,0");
    unsafe {
        ipd_string_free(s);
        ipd_strategy_free(tft);
        ipd_strategy_free(alld);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut handle = ptr::null_mut();
    let bad = CString::new("reactive:1:1,x").unwrap();
    assert_eq!(unsafe { ipd_strategy_parse(bad.as_ptr(), &mut handle) }, IpdStatus::Parse);
    assert!(handle.is_null());
    assert!(last_error().contains("position 13"));

    assert_eq!(unsafe { ipd_strategy_parse(ptr::null(), &mut handle) }, IpdStatus::NullPointer);

    let one = parse("reactive:1:1,0");
    let two = parse("reactive:2:1,0,0,0");
    let g = donation(2.0, 1.0);
    let mut res = IpdPairResult::default();
    assert_eq!(unsafe { ipd_payoffs(one, two, &g, 0.0, &mut res) }, IpdStatus::MemoryMismatch);

    let mut g2 = g;
    assert_eq!(unsafe { ipd_donation_game(1.0, 2.0, &mut g2) }, IpdStatus::Domain);

    let bad_game = IpdGame { r: 1.0, s: 2.0, t: 3.0, p: 4.0 };
    assert_eq!(unsafe { ipd_payoffs(one, one, &bad_game, 0.0, &mut res) }, IpdStatus::Domain);
    assert_eq!(unsafe { ipd_payoffs(one, one, &g, 0.0, &mut res) }, IpdStatus::Ok);
    assert!(ipd_last_error().is_null());
    unsafe {
        ipd_strategy_free(one);
        ipd_strategy_free(two);
        ipd_strategy_free(ptr::null_mut());
    }
}

#[test]
fn partner_checks_and_best_response() {
    let g = donation(2.0, 1.0);
    let mut verdict = false;
    for (text, expected) in
        [("reactive:2:1,0.6,0.8,0.2", true), ("reactive:2:1,1,1,0", false), ("counting:3:1,0.83,0.66,0.5", true)]
    {
        let s = parse(text);
        for method in [IpdMethod::Closed, IpdMethod::Algorithmic] {
            assert_eq!(unsafe { ipd_partner_check(s, &g, method, 1e-9, &mut verdict) }, IpdStatus::Ok);
            assert_eq!(verdict, expected, "{text} {method:?}");
        }
        unsafe { ipd_strategy_free(s) };
    }

    let tf2t = parse("reactive:2:1,1,1,0");
    let mut payoff = 0.0;
    assert_eq!(unsafe { ipd_best_response(tf2t, &g, &mut payoff) }, IpdStatus::Ok);
    assert!((payoff - 1.5).abs() < 1e-12);

    let axelrod = IpdGame { r: 3.0, s: 0.0, t: 5.0, p: 1.0 };
    assert_eq!(
        unsafe { ipd_partner_check(tf2t, &axelrod, IpdMethod::Closed, 1e-9, &mut verdict) },
        IpdStatus::Unsupported
    );
    unsafe { ipd_strategy_free(tf2t) };

    let memory = parse("memory:1:1,0,0,1");
    assert_eq!(unsafe { ipd_best_response(memory, &g, &mut payoff) }, IpdStatus::Unsupported);
    unsafe { ipd_strategy_free(memory) };
}

#[test]
fn fixation_and_evolution() {
    let m = [0.3, -1.0, 2.0];
    let r = [1.0, 0.5, 0.0];
    let mut phi = 0.0;
    assert_eq!(unsafe { ipd_fixation_probability(m.as_ptr(), r.as_ptr(), 4, 0.0, &mut phi) }, IpdStatus::Ok);
    assert_eq!(phi, 0.25);
    assert_eq!(unsafe { ipd_fixation_probability(ptr::null(), r.as_ptr(), 4, 0.0, &mut phi) }, IpdStatus::NullPointer);

    let cfg = IpdEvolveConfig {
        population: 100,
        beta: 1.0,
        steps: 2_000,
        memory: 1,
        space: IpdSpace::Reactive,
        b: 1.0,
        c: 0.5,
        seed: 7,
        eps: 1e-8,
    };
    let mut a = IpdRunSummary::default();
    let mut b = IpdRunSummary::default();
    let mut best = ptr::null_mut();
    assert_eq!(unsafe { ipd_evolve(&cfg, &mut a, &mut best) }, IpdStatus::Ok);
    assert_eq!(unsafe { ipd_evolve(&cfg, &mut b, ptr::null_mut()) }, IpdStatus::Ok);
    assert_eq!(a, b);
    assert!((0.0..=1.0).contains(&a.avg_coop_rate) && (0.0..=1.0).contains(&a.partner_abundance));
    assert!(a.most_abundant_steps >= 1);
    assert_eq!(unsafe { ipd_strategy_memory(best) }, 1);
    unsafe { ipd_strategy_free(best) };

    let invalid = IpdEvolveConfig { population: 1, ..cfg };
    assert_eq!(unsafe { ipd_evolve(&invalid, &mut a, ptr::null_mut()) }, IpdStatus::Config);
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/ipd_reactive.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "ipd_strategy_parse",
        "ipd_payoffs",
        "ipd_partner_check",
        "ipd_best_response",
        "ipd_fixation_probability",
        "ipd_evolve",
        "ipd_last_error",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("check.c");
    std::fs::write(
        &source,
        "#include \"ipd_reactive.h\"\nint main(void) { IpdGame g; return ipd_donation_game(2.0, 1.0, &g); }\n",
    )
    .unwrap();
    match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&source)
        .status()
    {
        Ok(status) => assert!(status.success()),
        Err(_) => eprintln!("no C compiler found; skipping syntax check"),
    }
}
