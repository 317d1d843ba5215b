use std::path::{Path, PathBuf};

use wcg_core::harness::{quantile, ScenarioPlan};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn every_shipped_scenario_loads() {
    for name in ["convergence", "alp_gap", "ompi", "oalp"] {
        let plan = ScenarioPlan::load(&scenarios().join(format!("{name}.json")));
        assert!(plan.is_ok(), "{name}: {:?}", plan.err());
    }
}

#[test]
fn deviation_quantiles_fall_with_scale() {
    let frame = ScenarioPlan::load(&scenarios().join("convergence.json")).unwrap().run().unwrap();
    for q in [0.5, 0.9] {
        let qs: Vec<f64> = [1, 5, 25]
            .iter()
            .map(|&h| {
                let mut v = frame.values(h, 20, "deviation");
                v.sort_by(f64::total_cmp);
                quantile(&v, q)
            })
            .collect();
        assert!(qs.windows(2).all(|w| w[1] < w[0]), "q{q}: {qs:?}");
    }
}

#[test]
fn reruns_give_identical_csv() {
    let plan = ScenarioPlan::load(&scenarios().join("alp_gap.json")).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    plan.run().unwrap().write_csv(&mut a).unwrap();
    plan.run().unwrap().write_csv(&mut b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn scenario_errors_map_to_exit_codes() {
    let bad = [
        r#"{"name": "x"}"#,
        r#"{"name": "x", "instance": {"path": "two_state.json"}, "policy": {"kind": "whittle"},
            "grid": {"h": [], "horizon": [5], "seeds": {"start": 0, "count": 1}}, "metrics": ["reward"]}"#,
    ];
    for text in bad {
        let err = ScenarioPlan::parse(text, "inline", &scenarios()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }
    let missing = r#"{"name": "x", "instance": {"path": "missing.json"}, "policy": {"kind": "alp"},
        "grid": {"h": [1], "horizon": [5], "seeds": {"start": 0, "count": 1}}, "metrics": ["reward"]}"#;
    assert_eq!(ScenarioPlan::parse(missing, "inline", &scenarios()).unwrap_err().exit_code(), 1);
}
