use wcg_core::engine::{run_from, EpisodeOptions, SystemState};
use wcg_core::fixtures;
use wcg_core::ompi::{write_nu_trace_csv, OmpiConfig, OmpiState};

fn drive(h: usize, seed: u64, steps: usize, config: OmpiConfig) -> (OmpiState, bool) {
    let inst = fixtures::two_state().with_scale(h);
    let mut st = SystemState::new(&inst, seed);
    let mut p = OmpiState::new(&inst, config, seed).unwrap();
    let traj = run_from(&inst, &mut st, &mut p, steps, EpisodeOptions { strict: true }).unwrap();
    (p, traj.feasible)
}

#[test]
fn learning_stays_within_budget_and_primes() {
    let (p, feasible) = drive(10, 3, 400, OmpiConfig::default());
    assert!(feasible);
    assert!(p.primed);
    assert!(p.nu_hat.iter().flatten().flatten().all(|v| v.is_finite()));
}

#[test]
fn same_seed_same_indices() {
    let (a, _) = drive(5, 7, 300, OmpiConfig::default());
    let (b, _) = drive(5, 7, 300, OmpiConfig::default());
    assert_eq!(a.nu_hat, b.nu_hat);
    assert_eq!(a.stop_time, b.stop_time);
}

#[test]
fn stopped_indices_stay_frozen() {
    let inst = fixtures::two_state().with_scale(100);
    let mut st = SystemState::new(&inst, 0);
    let mut p = OmpiState::new(&inst, OmpiConfig::default(), 0).unwrap();
    let mut steps = 0;
    while !p.stopped && steps < 20_000 {
        run_from(&inst, &mut st, &mut p, 50, EpisodeOptions::default()).unwrap();
        steps += 50;
    }
    assert!(p.stopped, "no stop within {steps} steps");
    let frozen = p.nu_hat.clone();
    run_from(&inst, &mut st, &mut p, 100, EpisodeOptions::default()).unwrap();
    assert_eq!(p.nu_hat, frozen);
}

#[test]
fn trace_is_written_as_csv() {
    let config = OmpiConfig {
        record_trace: true,
        ..OmpiConfig::default()
    };
    let (p, _) = drive(10, 1, 50, config);
    assert!(!p.trace.is_empty());
    let mut out = Vec::new();
    write_nu_trace_csv(&mut out, &p.trace).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), p.trace.len() + 1);
}
