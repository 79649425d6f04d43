use std::path::PathBuf;

use chromashift::adaptation::Trajectory;
use chromashift::colorimetry::{ClipPolicy, JND};
use chromashift::optimizer::{
    pareto_sweep, select_trajectory, sensitivity_heatmap, write_heatmap_csv, write_pareto_csv,
    OptimizationConfig, HEATMAP_HEADER, PARETO_HEADER,
};
use chromashift::power::{build_histogram, DisplayPowerParams, PowerModel};

fn model() -> PowerModel {
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/natural_corpus");
    let h = build_histogram(&corpus, 64).unwrap();
    PowerModel::new(&h, DisplayPowerParams::default(), ClipPolicy::Clamp).unwrap()
}

fn jnds() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.5 * JND).collect()
}

#[test]
fn savings_grow_with_allowance() {
    let m = model();
    let curves = pareto_sweep(&OptimizationConfig::default(), &jnds(), &m).unwrap();
    for c in &curves {
        eprintln!("{}:", c.candidate.trajectory.label());
        for p in &c.points {
            eprintln!(
                "  {:.1} JND  v = {:.4e}  d = {:.5}  saving = {:.4} {:?}",
                p.delta_t_jnd, p.v, p.terminal_distance, p.saving, p.truncated
            );
        }
        assert_eq!(c.points[0].saving, 0.0);
        for w in c.points.windows(2) {
            assert!(w[1].saving >= w[0].saving, "{:?}", c.candidate);
        }
    }
}

#[test]
fn five_jnd_saving_is_in_band() {
    let m = model();
    let s = select_trajectory(&OptimizationConfig::default(), &m).unwrap();
    let linear = s.all[1];
    eprintln!("1.47 rad at 5 JND saves {:.2}%", 100.0 * linear.saving);
    assert!((0.15..=0.45).contains(&linear.saving));
}

#[test]
fn diminishing_returns_in_time_limit() {
    let m = model();
    let c = OptimizationConfig::default().candidates[1];
    let tms: Vec<f64> = (0..=16).map(|i| 120.0 + 30.0 * i as f64).collect();
    let h = sensitivity_heatmap(&c, &[3.0 * JND, 5.0 * JND], &tms, &m).unwrap();
    for i in 0..2 {
        for j in 1..tms.len() - 1 {
            let d2 = h.saving(i, j + 1) - 2.0 * h.saving(i, j) + h.saving(i, j - 1);
            assert!(d2 <= 0.0, "row {i} col {j}: {d2}");
        }
        let s = |t: f64| h.saving(i, tms.iter().position(|&x| x == t).unwrap());
        assert!(s(600.0) - s(300.0) < s(300.0) - s(120.0));
    }
}

#[test]
fn csv_outputs() {
    let m = model();
    let dir = tempfile::tempdir().unwrap();
    let curves = pareto_sweep(&OptimizationConfig::default(), &jnds(), &m).unwrap();
    let p = dir.path().join("pareto.csv");
    write_pareto_csv(&p, &curves).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next().unwrap(), PARETO_HEADER);
    assert_eq!(text.lines().count(), 1 + 4 * jnds().len());
    assert!(text.contains("daylight"));

    let c = OptimizationConfig::default().candidates[1];
    let h = sensitivity_heatmap(&c, &[JND, 2.0 * JND], &[60.0, 120.0, 240.0], &m).unwrap();
    let p = dir.path().join("heatmap.csv");
    write_heatmap_csv(&p, &h).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEATMAP_HEADER);
    assert_eq!(text.lines().count(), 1 + 6);
    assert_eq!(c.trajectory, Trajectory::Linear { phi: 1.47 });
}
