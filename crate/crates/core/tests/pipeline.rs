mod common;

use common::*;
use offscreen_load::evaluation::{fit_roster, run_experiment, ModelLabel};
use offscreen_load::features::Level;
use offscreen_load::models::FittedModel;
use offscreen_load::tracking::CameraWindow;
use offscreen_load::{Metric, RunConfig};

fn mean_scaling_residual(cfg: &RunConfig, metric: Metric) -> (f64, f64) {
    let corpus = build_corpus(cfg);
    let features = build_features(cfg, &corpus);
    let model = FittedModel::scaling(metric, &features.game.columns);
    let pred = model.predict(&features.game).unwrap();
    let resid: Vec<f64> = features
        .game
        .rows
        .iter()
        .zip(pred)
        .filter_map(|(r, p)| Some(r.target(metric)? - p))
        .collect();
    mean_and_se(&resid)
}

#[test]
fn unbiased_camera_leaves_scaling_unbiased() {
    let mut cfg = small_config(11, 6, 600.0);
    cfg.synth.camera_bias = 0.0;
    let (m, se) = mean_scaling_residual(&cfg, Metric::TotalDistance);
    assert!(m.abs() <= 3.0 * se, "mean {m}, SE {se}");
}

#[test]
fn biased_camera_makes_scaling_overestimate() {
    let mut cfg = small_config(11, 6, 600.0);
    cfg.synth.camera_bias = 0.3;
    let (m, se) = mean_scaling_residual(&cfg, Metric::TotalDistance);
    assert!(m < -2.0 * se, "mean {m}, SE {se}");
}

#[test]
fn test_games_do_not_reach_training() {
    let mut cfg = small_config(5, 4, 180.0);
    cfg.split.train = 3;
    cfg.split.test = 1;
    cfg.models.metrics = vec![Metric::TotalDistance, Metric::AccelerationDensity];
    let corpus = build_corpus(&cfg);
    let features = build_features(&cfg, &corpus);
    let plan = cfg.split_plan(features.games()).unwrap();
    let roster = cfg.roster();
    let before = fit_roster(&features, &plan, &roster, cfg.seed);

    let mut altered = features.clone();
    let test = plan.test_games().to_vec();
    for table in [&mut altered.subtrack, &mut altered.game] {
        for row in table.rows.iter_mut().filter(|r| test.contains(&r.game_id)) {
            for t in row.targets.iter_mut().flatten() {
                *t *= 7.0;
            }
            for v in row.values.iter_mut() {
                *v += 1.0;
            }
        }
    }
    let after = fit_roster(&altered, &plan, &roster, cfg.seed);
    assert_eq!(before.len(), after.len());
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.key, b.key);
        let a = a.model.as_ref().unwrap().to_json().unwrap();
        let b = b.model.as_ref().unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn wider_window_censors_less() {
    let mut medians = Vec::new();
    for side in [20.0, 40.0, 60.0] {
        let mut cfg = small_config(2, 3, 300.0);
        cfg.window = CameraWindow {
            width: side,
            height: side,
        };
        let corpus = build_corpus(&cfg);
        let features = build_features(&cfg, &corpus);
        let mut frac: Vec<f64> = features.game.rows.iter().map(|r| r.censored_fraction).collect();
        frac.sort_by(f64::total_cmp);
        medians.push(frac[frac.len() / 2]);
    }
    assert!(medians[0] >= medians[1] && medians[1] >= medians[2], "{medians:?}");
    assert!(medians[0] > medians[2], "{medians:?}");
}

#[test]
fn report_covers_every_cell() {
    let mut cfg = small_config(8, 4, 180.0);
    cfg.split.train = 3;
    cfg.split.test = 1;
    cfg.models.metrics = vec![Metric::TotalDistance];
    let corpus = build_corpus(&cfg);
    let features = build_features(&cfg, &corpus);
    let plan = cfg.split_plan(features.games()).unwrap();
    let (report, cells) = run_experiment(&features, &plan, &cfg.roster(), &cfg.bands, cfg.seed).unwrap();
    assert!(cells.iter().all(|c| c.model.is_ok()));
    for level in [Level::Game, Level::Subtrack] {
        for model in [ModelLabel::Base, ModelLabel::Linear, ModelLabel::Tree] {
            let cell = report.cell(Metric::TotalDistance, model, level).unwrap();
            let r = cell.rmspe.unwrap();
            assert!(r.is_finite() && r >= 0.0);
        }
    }
    let scaling = report
        .cell(Metric::TotalDistance, ModelLabel::Scaling, Level::Game)
        .unwrap();
    assert!(scaling.rmspe.unwrap() > 0.0);
}
