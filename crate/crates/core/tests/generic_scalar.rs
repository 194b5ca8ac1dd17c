use std::path::PathBuf;

use mdp_abr::*;

fn fair() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/fair.cfg")
}

#[test]
fn f32_solver_tracks_f64() {
    let s64: Scenario<f64> = load_scenario(&fair()).unwrap();
    let s32: Scenario<f32> = load_scenario(&fair()).unwrap();
    let t64 = backward_induction(&s64.model, 50).unwrap();
    let t32 = backward_induction(&s32.model, 50).unwrap();
    let mut worst = 0.0f64;
    for s in 0..t64.space().size() {
        let (a, b) = (t64.value(0, s), t32.value(0, s) as f64);
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    assert!(worst < 1e-4, "relative gap {worst}");
}

#[test]
fn f32_sessions_run_end_to_end() {
    let mut s: Scenario<f32> = load_scenario(&fair()).unwrap();
    s.session.horizon = 40;
    let table = backward_induction(&s.model, 40).unwrap();
    for arm in Arm::ALL {
        let trace = run_arm(&s, arm, Some(&table), false, 0).unwrap();
        let summary = summarize(&trace, &s).unwrap();
        assert_eq!(trace.records.len(), 40);
        assert!(summary.profit.is_finite());
        for u in &summary.users {
            assert!((0.0..=1.0).contains(&u.buffering_ratio));
        }
    }
}
