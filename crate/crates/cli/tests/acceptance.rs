//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! The safety criteria run the default scenario plus 100 randomized
//! configurations (seeds 0-99). The liveness criterion checks the default
//! run's completion ticks against a closed-form phase-arithmetic oracle
//! that never consults the simulator.

use std::rc::Rc;
use std::sync::{Arc, Barrier, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use siloplc_core::check::{compare_traces, verify_trace, Comparison};
use siloplc_core::components::resource::{CommonResource, MonitorResource, ResourceVariant};
use siloplc_core::components::silo::{silo_statechart, SiloCtx};
use siloplc_core::plant::{Route, S1, S3, S4};
use siloplc_core::scenario::{
    build_runtime, recipes_done, run_scenario, Mode, RunOutcome, ScenarioConfig, Strategy,
};
use siloplc_core::statechart::{Dispatch, Event, Machine, StatechartDef};
use siloplc_core::trace::{RecordKind, Trace};

fn random_config(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = ScenarioConfig::default();
    cfg.plant.fill_rate = rng.gen_range(5.0..=20.0);
    cfg.plant.pipe_rate = rng.gen_range(5.0..=20.0);
    cfg.plant.drain_rate = rng.gen_range(5.0..=20.0);
    cfg.plant.heat_rate = rng.gen_range(1.0..=5.0);
    cfg.plant.e_threshold = rng.gen_range(1.0..=10.0);
    cfg.plant.f_threshold = rng.gen_range(60.0..=95.0);
    cfg.recipe_a.process_ticks = rng.gen_range(50..=500);
    cfg.recipe_a.mix_ticks = rng.gen_range(50..=500);
    cfg.recipe_b.mix_ticks = rng.gen_range(50..=500);
    cfg.max_ticks = 6000;
    cfg.validate().expect("randomized config is valid");
    cfg
}

#[derive(Clone, Debug)]
struct SafetyStats {
    label: String,
    conflict_ticks: u64,
    mixer_overlap_ticks: u64,
    pipe_faults: usize,
    power_faults: usize,
}

/// Runs a scenario scan by scan, inspecting the plant each tick.
fn run_inspected(label: &str, cfg: &ScenarioConfig) -> (SafetyStats, Trace) {
    let mut rt = build_runtime(cfg).expect("buildable scenario");
    let mut stats = SafetyStats {
        label: label.to_string(),
        conflict_ticks: 0,
        mixer_overlap_ticks: 0,
        pipe_faults: 0,
        power_faults: 0,
    };
    while !recipes_done(&rt, cfg) && rt.scan_count() < cfg.max_ticks {
        rt.run_scan().expect("scan succeeds");
        if rt.plant().active_route() == Route::Conflict {
            stats.conflict_ticks += 1;
        }
        if rt.plant().silo(S3).mixer_on && rt.plant().silo(S4).mixer_on {
            stats.mixer_overlap_ticks += 1;
        }
    }
    for r in rt.trace().filtered(&[RecordKind::Fault]) {
        if r.detail.starts_with("PipeConflict") {
            stats.pipe_faults += 1;
        }
        if r.detail.starts_with("PowerViolation") {
            stats.power_faults += 1;
        }
    }
    (stats, rt.into_trace())
}

/// Default plus 100 randomized local-mode runs, computed once.
fn local_runs() -> &'static Vec<SafetyStats> {
    static RUNS: OnceLock<Vec<SafetyStats>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut out = Vec::new();
        out.push(run_inspected("default", &ScenarioConfig::default()).0);
        for seed in 0..100 {
            out.push(run_inspected(&format!("seed {seed}"), &random_config(seed)).0);
        }
        out
    })
}

/// The same 101 configurations in distributed mode with latency 5.
fn distributed_runs() -> &'static Vec<(SafetyStats, Trace)> {
    static RUNS: OnceLock<Vec<(SafetyStats, Trace)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let remote = |mut cfg: ScenarioConfig| {
            cfg.mode = Mode::Distributed;
            cfg.latency = 5;
            cfg
        };
        let mut out = Vec::new();
        out.push(run_inspected("default L5", &remote(ScenarioConfig::default())));
        for seed in 0..100 {
            out.push(run_inspected(
                &format!("seed {seed} L5"),
                &remote(random_config(seed)),
            ));
        }
        out
    })
}

#[test]
fn c1_pipe_safety_across_randomized_configs() {
    let started = Instant::now();
    for stats in local_runs() {
        assert_eq!(stats.conflict_ticks, 0, "{}: route conflict", stats.label);
        assert_eq!(stats.pipe_faults, 0, "{}: PipeConflict fault", stats.label);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 1 (pipe safety, 101 runs in {:.2}s): PASS",
        elapsed.as_secs_f64()
    );
}

#[test]
fn c2_power_safety_across_randomized_configs() {
    for stats in local_runs() {
        assert_eq!(
            stats.mixer_overlap_ticks, 0,
            "{}: both mixers ran together",
            stats.label
        );
        assert_eq!(stats.power_faults, 0, "{}: PowerViolation fault", stats.label);
    }
    println!("criterion 2 (power safety, 101 runs): PASS");
}

// --- criterion 3: liveness against the closed-form oracle ---------------

/// Completion ticks for both recipes, from phase arithmetic alone.
///
/// Conventions mirrored from the scan cycle: a request sent by a process is
/// visible to its silo within the same scan (processes run first); silo
/// completions reach the process one scan later; a level crossing during
/// scan t's plant step is seen on the snapshot of scan t+1; a timer of N
/// started at scan s expires during scan s+N; the process watches its own
/// temperature target (no extra hop). Resource contention: the earlier
/// requester wins (ties go to recipe A, which polls first); a loser sees a
/// release by A the same scan and a release by B the next scan.
fn closed_form_completion(cfg: &ScenarioConfig) -> (u64, u64) {
    let p = &cfg.plant;
    let steps = |delta: f64, rate: f64| -> u64 {
        if delta <= 0.0 {
            return 0;
        }
        ((delta / (rate * p.dt)) - 1e-9).ceil().max(1.0) as u64
    };

    // Filling from empty: request at scan 0, edge on the snapshot after the
    // crossing step, received one scan later.
    let fill_steps = steps(p.f_threshold, p.fill_rate);
    let src_full = fill_steps as f64 * p.fill_rate * p.dt;
    let a_fill_recv = fill_steps + 1;
    let b_fill_recv = fill_steps + 1;

    // Pre-transfer work, ending at each recipe's pipe request scan.
    let heat = |target: f64| steps(target - p.ambient_temp, p.heat_rate);
    let a_pipe_req = a_fill_recv + cfg.recipe_a.process_ticks;
    let b_pipe_req = b_fill_recv + heat(cfg.recipe_b.heat_target);

    // Transfer: valves open at the grant scan, the source's low-level edge
    // is seen the snapshot after the draining step by the signed silo, and
    // the process hears about it one scan later.
    let transfer_steps = steps(src_full - p.e_threshold, p.pipe_rate);
    let dst_level = f64::min(transfer_steps as f64 * p.pipe_rate * p.dt, src_full);

    // Pipe arbitration. Recipe A polls earlier within a scan.
    let (a_pipe_grant, b_pipe_grant);
    if a_pipe_req <= b_pipe_req {
        a_pipe_grant = a_pipe_req;
        let a_release = a_pipe_grant + transfer_steps + 1;
        b_pipe_grant = b_pipe_req.max(a_release);
    } else {
        b_pipe_grant = b_pipe_req;
        let b_release = b_pipe_grant + transfer_steps + 1;
        a_pipe_grant = a_pipe_req.max(b_release + 1);
    }
    let a_transfer_recv = a_pipe_grant + transfer_steps + 1;
    let b_transfer_recv = b_pipe_grant + transfer_steps + 1;

    // Post-transfer work, ending at each recipe's power request scan.
    let a_power_req = a_transfer_recv + heat(cfg.recipe_a.heat_target);
    let b_power_req = b_transfer_recv;

    // Power arbitration, releases at the mix timers' expiry.
    let (a_power_grant, b_power_grant);
    if a_power_req <= b_power_req {
        a_power_grant = a_power_req;
        let a_release = a_power_grant + cfg.recipe_a.mix_ticks;
        b_power_grant = b_power_req.max(a_release);
    } else {
        b_power_grant = b_power_req;
        let b_release = b_power_grant + cfg.recipe_b.mix_ticks;
        a_power_grant = a_power_req.max(b_release + 1);
    }

    // Drain after mixing; done one scan after the emptied edge arrives.
    let drain_steps = steps(dst_level - p.e_threshold, p.drain_rate);
    let a_done = a_power_grant + cfg.recipe_a.mix_ticks + drain_steps + 1;
    let b_done = b_power_grant + cfg.recipe_b.mix_ticks + drain_steps + 1;
    (a_done, b_done)
}

fn done_tick(trace: &Trace, source: &str) -> Option<u64> {
    trace
        .records
        .iter()
        .find(|r| r.kind == RecordKind::State && r.source == source && r.detail.ends_with("->Done"))
        .map(|r| r.tick)
}

#[test]
fn c3_liveness_matches_phase_arithmetic_oracle() {
    let cfg = ScenarioConfig::default();
    let (oracle_a, oracle_b) = closed_form_completion(&cfg);
    // The oracle's own arithmetic, pinned: fill 95+1, process 150, transfer
    // 93+1, heat 150, wait for power until B releases at 734, mix 200,
    // drain 91+1 — and the equivalent chain for B.
    assert_eq!((oracle_a, oracle_b), (1027, 826));

    let run = run_scenario(&cfg).unwrap();
    assert_eq!(run.outcome, RunOutcome::Completed);
    assert!(run.ticks <= 2000);
    let sim_a = done_tick(&run.trace, "GenLiqueurA").expect("recipe A finished");
    let sim_b = done_tick(&run.trace, "GenLiqueurB").expect("recipe B finished");
    assert!(
        sim_a.abs_diff(oracle_a) <= 2,
        "recipe A done at {sim_a}, oracle {oracle_a}"
    );
    assert!(
        sim_b.abs_diff(oracle_b) <= 2,
        "recipe B done at {sim_b}, oracle {oracle_b}"
    );
    println!(
        "criterion 3 (liveness: A {sim_a} vs oracle {oracle_a}, B {sim_b} vs oracle {oracle_b}): PASS"
    );
}

// --- criterion 4: determinism --------------------------------------------

#[test]
fn c4_runs_are_byte_identical() {
    // Library level.
    let cfg = ScenarioConfig::default();
    let one = run_scenario(&cfg).unwrap().trace.to_file_string();
    let two = run_scenario(&cfg).unwrap().trace.to_file_string();
    assert_eq!(one, two);

    // Through the binary, scenario file and all.
    let scenario = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/default.scn");
    let dir = std::env::temp_dir();
    let out_a = dir.join("siloplc-accept-det-a.trace");
    let out_b = dir.join("siloplc-accept-det-b.trace");
    for out in [&out_a, &out_b] {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_siloplc"))
            .args(["run", "--scenario", scenario, "--out"])
            .arg(out)
            .status()
            .expect("binary runs");
        assert!(status.success());
    }
    let bytes_a = std::fs::read(&out_a).unwrap();
    let bytes_b = std::fs::read(&out_b).unwrap();
    assert_eq!(bytes_a, bytes_b);
    assert!(!bytes_a.is_empty());
    println!("criterion 4 (determinism, library and binary): PASS");
}

// --- criterion 5: strategy equivalence -----------------------------------

#[test]
fn c5_ofb_strategy_matches_controller_strategy_on_act_records() {
    let cp = run_scenario(&ScenarioConfig::default()).unwrap();
    let ofb_cfg = ScenarioConfig {
        strategy: Strategy::Ofb,
        ..Default::default()
    };
    let ofb = run_scenario(&ofb_cfg).unwrap();
    assert_eq!(ofb.outcome, RunOutcome::Completed);
    match compare_traces(&cp.trace, &ofb.trace, &[RecordKind::Act]) {
        Comparison::Identical { compared } => {
            assert!(compared > 20, "suspiciously few ACT records: {compared}");
            println!("criterion 5 (strategy equivalence, {compared} ACT records): PASS");
        }
        Comparison::Divergence { index, left, right } => {
            panic!("ACT divergence at {index}: {left:?} vs {right:?}");
        }
    }
}

// --- criterion 6: resource variant equivalence + monitor stress ----------

#[test]
fn c6_resource_variants_agree_and_monitor_is_atomic() {
    let check = run_scenario(&ScenarioConfig::default()).unwrap();
    let monitor_cfg = ScenarioConfig {
        resource_variant: ResourceVariant::Monitor,
        ..Default::default()
    };
    let monitor = run_scenario(&monitor_cfg).unwrap();
    match compare_traces(&check.trace, &monitor.trace, &[RecordKind::Res]) {
        Comparison::Identical { compared } => {
            assert!(compared > 0);
        }
        Comparison::Divergence { index, left, right } => {
            panic!("RES divergence at {index}: {left:?} vs {right:?}");
        }
    }

    // Concurrent stress: two workers race 1000 times on the monitor
    // variant; every race grants exactly once.
    let resource = Arc::new(MonitorResource::new("pipe"));
    let rounds = 1000u32;
    let barrier = Arc::new(Barrier::new(2));
    let mut handles = Vec::new();
    for worker in ["w1", "w2"] {
        let resource = resource.clone();
        let barrier = barrier.clone();
        handles.push(std::thread::spawn(move || {
            let mut grants = 0u32;
            for _ in 0..rounds {
                barrier.wait();
                let won = resource.try_acquire(worker).granted();
                if won {
                    grants += 1;
                }
                barrier.wait();
                if won {
                    resource.release(worker).unwrap();
                }
                barrier.wait();
            }
            grants
        }));
    }
    let total: u32 = handles.into_iter().map(|h| h.join().unwrap()).sum();
    assert_eq!(total, rounds);
    println!("criterion 6 (resource variants agree; 1000 races, 1000 grants): PASS");
}

// --- criterion 7: distribution transparency and delay safety -------------

#[test]
fn c7_distribution_transparency_and_delay_safety() {
    // Latency 0 distributed equals local on everything but MSG records.
    let local = run_scenario(&ScenarioConfig::default()).unwrap();
    let l0 = ScenarioConfig {
        mode: Mode::Distributed,
        ..Default::default()
    };
    let dist0 = run_scenario(&l0).unwrap();
    let kinds = [
        RecordKind::Act,
        RecordKind::State,
        RecordKind::Res,
        RecordKind::Fault,
    ];
    match compare_traces(&local.trace, &dist0.trace, &kinds) {
        Comparison::Identical { compared } => assert!(compared > 100),
        Comparison::Divergence { index, left, right } => {
            panic!("divergence at {index}: {left:?} vs {right:?}")
        }
    }
    assert!(
        !dist0.trace.filtered(&[RecordKind::Msg]).is_empty(),
        "distributed trace should carry MSG records"
    );

    // Default scenario stays fault-free for latencies 0, 1 and 5.
    for latency in [0u64, 1, 5] {
        let cfg = ScenarioConfig {
            mode: Mode::Distributed,
            latency,
            ..Default::default()
        };
        let run = run_scenario(&cfg).unwrap();
        assert_eq!(run.outcome, RunOutcome::Completed, "latency {latency}");
        assert!(!run.trace.has_fault(), "latency {latency}");
    }

    // Latency 5: the randomized safety suite still holds, and every MSG
    // delivery tick is its send tick plus 5.
    let mut msg_count = 0usize;
    for (stats, trace) in distributed_runs() {
        assert_eq!(stats.conflict_ticks, 0, "{}", stats.label);
        assert_eq!(stats.mixer_overlap_ticks, 0, "{}", stats.label);
        assert_eq!(stats.pipe_faults, 0, "{}", stats.label);
        assert_eq!(stats.power_faults, 0, "{}", stats.label);
        for r in trace.filtered(&[RecordKind::Msg]) {
            let delivery: u64 = r
                .detail
                .rsplit_once('@')
                .expect("MSG detail carries delivery tick")
                .1
                .parse()
                .unwrap();
            assert_eq!(delivery, r.tick + 5, "{}", r.detail);
            msg_count += 1;
        }
    }
    assert!(msg_count > 1000);
    println!("criterion 7 (transparency at L0; safety and delivery arithmetic at L5): PASS");
}

// --- criterion 8: conservation during transfers --------------------------

#[test]
fn c8_transfers_conserve_liquid_through_the_default_run() {
    let cfg = ScenarioConfig::default();
    let mut rt = build_runtime(&cfg).unwrap();
    let mut prev_levels = [0.0f64; 4];
    for (i, s) in rt.plant().silos().iter().enumerate() {
        prev_levels[i] = s.level;
    }
    let mut prev_route = Route::None;
    let mut segment_constant = 0.0f64;
    let mut transfer_ticks = 0u64;

    while !recipes_done(&rt, &cfg) && rt.scan_count() < cfg.max_ticks {
        rt.run_scan().unwrap();
        let route = rt.plant().active_route();
        if let Route::Transfer(src, dst) = route {
            // The valve image seen after the scan is the one this scan's
            // plant step ran with.
            if prev_route != route {
                segment_constant = prev_levels[src.index()] + prev_levels[dst.index()];
            }
            let sum = rt.plant().silo(src).level + rt.plant().silo(dst).level;
            assert!(
                (sum - segment_constant).abs() <= 1e-9,
                "tick {}: {sum} vs {segment_constant}",
                rt.scan_count()
            );
            transfer_ticks += 1;
        }
        prev_route = route;
        for (i, s) in rt.plant().silos().iter().enumerate() {
            prev_levels[i] = s.level;
        }
    }
    assert!(recipes_done(&rt, &cfg));
    assert_eq!(transfer_ticks, 93 * 2, "two 93-step transfers");
    println!("criterion 8 (conservation over {transfer_ticks} transfer ticks): PASS");
}

// --- criterion 9: statechart engine suite ---------------------------------

#[test]
fn c9_statechart_engine_suite() {
    // Ignored events are no-ops.
    let def = Rc::new(silo_statechart());
    let mut ctx = SiloCtx::unwired(S1, false, false);
    let (mut machine, _) = Machine::init(def.clone(), &mut ctx).unwrap();
    assert_eq!(machine.current(), "Empty");
    let d = machine.dispatch(&Event::new("empty"), &mut ctx).unwrap();
    assert_eq!(d, Dispatch::Ignored);
    assert_eq!(machine.current(), "Empty");
    assert!(ctx.driver.take_commands().is_empty());

    // Run-to-completion stability: quiescent after every dispatch of a full
    // fill/empty walk.
    for (event, expected) in [
        ("fill", "Filling"),
        ("mark_full", "Full"),
        ("empty", "Emptying"),
        ("mark_empty", "Empty"),
    ] {
        machine.dispatch(&Event::new(event), &mut ctx).unwrap();
        assert_eq!(machine.current(), expected);
        assert!(!machine.eventless_enabled(&ctx));
    }

    // Livelock bound: an eventless cycle is cut off and reported.
    struct Unit;
    let spin: StatechartDef<Unit> = StatechartDef::builder("spin")
        .states(&["A", "B", "C"])
        .initial_else("A")
        .transition("A", "go", "B")
        .done()
        .auto("B", "C")
        .done()
        .auto("C", "B")
        .done()
        .build()
        .unwrap();
    let mut unit = Unit;
    let (mut spinner, _) = Machine::init(Rc::new(spin), &mut unit).unwrap();
    let err = spinner.dispatch(&Event::new("go"), &mut unit).unwrap_err();
    assert_eq!(err.machine, "spin");

    // Initial-dispatch table over all four sensor configurations. The
    // fourth (E false, F true) is physically impossible but must still
    // resolve deterministically.
    let table = [
        ((false, false), "Empty"),
        ((true, false), "Full"),
        ((false, true), "Empty"),
        ((true, true), "Full"),
    ];
    for ((e, f), expected) in table {
        let mut ctx = SiloCtx::unwired(S4, e, f);
        let (mut m, _) = Machine::init(def.clone(), &mut ctx).unwrap();
        assert_eq!(m.current(), expected, "init with E={e} F={f}");

        let fill = m.dispatch(&Event::new("fill"), &mut ctx).unwrap();
        let empty_ok = match expected {
            "Empty" => {
                assert!(matches!(fill, Dispatch::Fired { .. }));
                assert_eq!(m.current(), "Filling");
                false
            }
            _ => {
                assert_eq!(fill, Dispatch::Ignored);
                true
            }
        };
        let mut ctx2 = SiloCtx::unwired(S4, e, f);
        let (mut m2, _) = Machine::init(def.clone(), &mut ctx2).unwrap();
        let empty = m2.dispatch(&Event::new("empty"), &mut ctx2).unwrap();
        if empty_ok {
            assert!(matches!(empty, Dispatch::Fired { .. }));
            assert_eq!(m2.current(), "Emptying");
        } else {
            assert_eq!(empty, Dispatch::Ignored);
        }
    }
    println!("criterion 9 (statechart engine suite): PASS");
}

// --- the produced traces also satisfy the independent verifier -----------

#[test]
fn default_trace_passes_the_independent_verifier() {
    let run = run_scenario(&ScenarioConfig::default()).unwrap();
    let report = verify_trace(&run.trace).unwrap();
    assert!(report.all_passed(), "{:?}", report.checks);
}
