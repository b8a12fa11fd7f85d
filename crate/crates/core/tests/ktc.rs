use cobot_lfd::ktc::*;
use cobot_lfd::metrics::{compare_demonstrations, Winner};
use cobot_lfd::synthetic::reference_waypoints;
use cobot_lfd::Trajectory;

fn max_force(t: &Trajectory) -> f64 {
    t.samples().iter().filter_map(|s| s.wrench.map(|w| w.force.norm())).fold(0.0, f64::max)
}

#[test]
fn proposed_beats_native_in_paired_runs() {
    let sc = TeachingScenario::default();
    let path = reference_waypoints();
    let mut wins = [0usize; 3];
    for seed in 0..20 {
        let p = sc.run_proposed(&path, seed).unwrap();
        let n = sc.run_native(&path, seed).unwrap();
        for (i, c) in compare_demonstrations(&p, &n).unwrap().iter().enumerate() {
            if c.winner == Winner::A {
                wins[i] += 1;
            }
        }
    }
    assert!(wins.iter().all(|&w| w >= 19), "wins {wins:?}");
}

#[test]
fn force_scale() {
    let sc = TeachingScenario::default();
    let path = reference_waypoints();
    // slip needs |F| strictly above the breakaway level
    assert!(sc.native.breakaway_force >= 40.0);
    for seed in 0..5 {
        assert!(max_force(&sc.run_proposed(&path, seed).unwrap()) <= 12.0 + 1e-12);
        assert!(max_force(&sc.run_native(&path, seed).unwrap()) > 40.0);
    }
}

#[test]
fn teach_mode_json_is_tagged() {
    let m = TeachMode::Native(NativeBackdrive::default());
    let s = serde_json::to_string(&m).unwrap();
    assert!(s.starts_with("{\"kind\":\"native\""), "{s}");
    assert_eq!(serde_json::from_str::<TeachMode>(&s).unwrap(), m);
}
