use rdv_core::config::ScenarioConfig;
use rdv_core::mission::{persistent_safety_audit, Phase};
use rdv_core::risk::Decision;
use rdv_core::sim::run_scenario;
use rdv_core::trace::{RunTrace, TraceFormat};

fn scenario(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(text).unwrap()
}

const EXACT: &str = r#"
name = "exact"
[learner]
fixed_weights = [0.0, 1.0]
noise_std = 1.0
[driver]
gain = 1.0
sigma = 0.0
sigma_pos = 0.0
"#;

const LOW: &str = r#"
name = "low"
[driver]
gain = 1.1
sigma = 3.0
"#;

#[test]
fn exact_model_captures_within_half_a_metre() {
    let trace = run_scenario(&scenario(EXACT)).unwrap();
    let s = &trace.summary;
    assert_eq!(s.phase, Phase::CompletedSuccess);
    assert!(s.capture_error.unwrap() <= 0.5, "{:?}", s.capture_error);
    assert!(s.persistently_safe);
}

#[test]
fn open_loop_execution_spends_the_planned_energy() {
    let mut cfg = scenario(EXACT);
    cfg.mission.reaim = false;
    let trace = run_scenario(&cfg).unwrap();
    assert_eq!(trace.summary.phase, Phase::CompletedSuccess);
    let commit = trace.rows.iter().find(|r| r.decision.is_some()).unwrap();
    let planned = commit.e1.unwrap() + commit.e2.unwrap() + commit.e3.unwrap();
    let spent = commit.energy - trace.summary.final_energy;
    assert!((spent - planned).abs() <= 0.01, "spent {spent} planned {planned}");
}

#[test]
fn infinite_epsilon_commits_on_first_feasible_tick() {
    let mut cfg = scenario(LOW);
    cfg.mission.epsilon = f64::INFINITY;
    let trace = run_scenario(&cfg).unwrap();
    let first_plan = trace.rows.iter().position(|r| r.t1.is_some()).unwrap();
    let decided = trace.rows.iter().position(|r| r.decision.is_some()).unwrap();
    assert_eq!(first_plan, decided);
    assert!(trace.summary.phase.is_terminal());
}

#[test]
fn phases_never_go_back() {
    let trace = run_scenario(&scenario(LOW)).unwrap();
    let order = |p: Phase| Phase::ALL.iter().position(|&q| q == p).unwrap();
    for w in trace.rows.windows(2) {
        let (a, b) = (w[0].phase, w[1].phase);
        assert!(a == b || (a == Phase::Gathering && b != Phase::Gathering) || order(a) < order(b), "{a} -> {b}");
    }
    assert_eq!(trace.rows.iter().filter(|r| r.decision.is_some()).count(), 1);
}

#[test]
fn decision_window_closes_once_the_deadline_binds() {
    // ample energy so the deadline, not the battery, is the active limit
    let mut cfg = scenario(EXACT);
    cfg.vehicle.initial_energy = 30_000.0;
    let trace = run_scenario(&cfg).unwrap();
    let gathering: Vec<_> = trace
        .rows
        .iter()
        .filter(|r| r.phase == Phase::Gathering && r.t1.is_some())
        .collect();
    let active = gathering
        .iter()
        .position(|r| r.t1.unwrap() + r.t2.unwrap() + r.t3.unwrap() >= r.time_left - 1e-2)
        .expect("deadline becomes active");
    for w in gathering[active..].windows(2) {
        assert!(w[1].t1.unwrap() <= w[0].t1.unwrap() + 1e-3, "t1 rose at t = {}", w[1].time);
    }
}

#[test]
fn same_seed_same_trace_bytes() {
    let cfg = scenario(LOW);
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(a.encode(TraceFormat::Csv), b.encode(TraceFormat::Csv));
    let mut other = cfg.clone();
    other.run.seed += 1;
    assert_ne!(a.rows, run_scenario(&other).unwrap().rows);
}

#[test]
fn csv_and_jsonl_decode_to_the_same_records() {
    let trace = run_scenario(&scenario(LOW)).unwrap();
    let csv = RunTrace::decode(&trace.encode(TraceFormat::Csv)).unwrap();
    let jsonl = RunTrace::decode(&trace.encode(TraceFormat::Jsonl)).unwrap();
    assert_eq!(csv, jsonl);
    assert_eq!(csv, trace);
    assert_eq!(csv.header.scenario().unwrap(), scenario(LOW));
}

#[test]
fn audit_flags_a_hand_built_violation() {
    let mut rows = run_scenario(&scenario(LOW)).unwrap().rows;
    assert!(persistent_safety_audit(&rows).safe);
    let k = rows.iter().position(|r| r.phase == Phase::Gathering && r.e4.is_some() && r.time > 3.0).unwrap();
    rows[k].e4 = Some(rows[k].energy + 10.0);
    let audit = persistent_safety_audit(&rows);
    assert!(!audit.safe);
    assert_eq!(audit.first_violation, Some(k));
}

#[test]
fn starved_vehicle_fails_on_energy() {
    let mut cfg = scenario(LOW);
    cfg.vehicle.start = [0.0, 400.0];
    cfg.vehicle.initial_energy = 60.0;
    let trace = run_scenario(&cfg).unwrap();
    assert_eq!(trace.summary.phase, Phase::FailedEnergy);
    assert!(trace.rows.iter().all(|r| r.t1.is_none()));
}

#[test]
fn high_risk_driver_aborts_and_lands() {
    let cfg = scenario("[driver]\ngain = 1.3\nsigma = 6.0\n");
    let trace = run_scenario(&cfg).unwrap();
    assert_eq!(trace.summary.decision, Some(Decision::Abort));
    assert_eq!(trace.summary.phase, Phase::CompletedAborted);
    assert!(trace.summary.final_energy >= 0.0);
}

#[test]
fn adversarial_switch_still_lands_safely() {
    let cfg = scenario(
        "[driver]\ngain = 1.1\nsigma = 3.0\nschedule = [{ from = 30.0, gain = 1.6 }]\n",
    );
    for seed in 1..=5 {
        let mut c = cfg.clone();
        c.run.seed = seed;
        let s = run_scenario(&c).unwrap().summary;
        assert!(matches!(s.phase, Phase::CompletedSuccess | Phase::CompletedMiss | Phase::CompletedAborted), "{}", s.phase);
        assert!(s.persistently_safe);
    }
}
