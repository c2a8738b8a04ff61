mod common;

use common::{close, oracle_metrics, OracleScope};
use offscreen_load::dataset::HalfRecord;
use offscreen_load::features::{fit_scaler, Column};
use offscreen_load::kinematics::{derive_kinematics, nw_smooth};
use offscreen_load::metrics::{BandEdges, BandSet, LoadMetrics, SampleMask, Scope, PEAK_WINDOWS};
use offscreen_load::tracking::{
    build_camera_path, censor, mask_from_subtracks, segment_subtracks, CameraWindow, Event, Frame,
    PlayerTrack, Position,
};
use proptest::prelude::*;

fn track_from(points: &[(f64, f64)]) -> PlayerTrack {
    PlayerTrack {
        game_id: "g01".into(),
        player_id: "p".into(),
        half: 1,
        position: Position::Midfielder,
        frames: points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Frame::new(i as f64 * 0.1, x, y))
            .collect(),
    }
}

/// Random walk positions with bounded per-frame steps.
fn walk(max_len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.9f64..0.9, -0.9f64..0.9), 2..max_len).prop_map(|steps| {
        let mut p = (50.0, 30.0);
        steps
            .into_iter()
            .map(|(dx, dy)| {
                p = (p.0 + dx, p.1 + dy);
                p
            })
            .collect()
    })
}

fn walk_and_mask(max_len: usize) -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<bool>)> {
    walk(max_len).prop_flat_map(|pts| {
        let n = pts.len();
        (Just(pts), prop::collection::vec(prop::bool::weighted(0.8), n))
    })
}

fn events(points: &[(f64, f64, f64)]) -> Vec<Event> {
    points
        .iter()
        .map(|&(t, x, y)| Event {
            game_id: "g01".into(),
            half: 1,
            t,
            x,
            y,
            kind: "pass".into(),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn subtracks_partition_and_alternate((pts, mask) in walk_and_mask(300)) {
        let track = track_from(&pts);
        let subs = segment_subtracks(&track, &mask).unwrap();
        prop_assert_eq!(subs.first().unwrap().range.start, 0);
        prop_assert_eq!(subs.last().unwrap().range.end, pts.len());
        for w in subs.windows(2) {
            prop_assert_eq!(w[0].range.end, w[1].range.start);
            prop_assert_ne!(w[0].observed, w[1].observed);
        }
        prop_assert!(subs.iter().all(|s| !s.is_empty()));
        prop_assert_eq!(mask_from_subtracks(&subs), mask.clone());
        // re-segmenting the reconstructed mask changes nothing
        let again = segment_subtracks(&track, &mask_from_subtracks(&subs)).unwrap();
        prop_assert_eq!(again, subs);
    }

    #[test]
    fn censored_subtracks_carry_boundary_points((pts, mask) in walk_and_mask(200)) {
        let track = track_from(&pts);
        for s in segment_subtracks(&track, &mask).unwrap() {
            if s.observed {
                prop_assert!(s.exit_point.is_none() && s.entry_point.is_none());
                continue;
            }
            prop_assert_eq!(s.exit_point.is_some(), s.range.start > 0);
            prop_assert_eq!(s.entry_point.is_some(), s.range.end < pts.len());
            prop_assert_eq!(s.gap_distance.is_some(), s.exit_point.is_some() && s.entry_point.is_some());
        }
    }

    #[test]
    fn larger_window_sees_more(
        pts in walk(200),
        knots in prop::collection::vec((0.0f64..20.0, 0.0f64..105.0, 0.0f64..68.0), 1..8),
        w in 5.0f64..60.0,
        h in 5.0f64..60.0,
        grow in 0.0f64..30.0,
    ) {
        let track = track_from(&pts);
        let mut knots = knots;
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        knots.dedup_by(|a, b| a.0 == b.0);
        let path = build_camera_path(&events(&knots)).unwrap();
        let small = censor(&track, &path, &CameraWindow::new(w, h).unwrap());
        let large = censor(&track, &path, &CameraWindow::new(w + grow, h + grow).unwrap());
        prop_assert!(small.iter().zip(&large).all(|(s, l)| !s || *l));
    }

    #[test]
    fn camera_path_hits_event_locations(
        knots in prop::collection::vec((0.0f64..100.0, -50.0f64..150.0, -50.0f64..100.0), 1..10),
    ) {
        let mut knots = knots;
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        knots.dedup_by(|a, b| a.0 == b.0);
        let path = build_camera_path(&events(&knots)).unwrap();
        for &(t, x, y) in &knots {
            let (cx, cy) = path.position_at(t);
            prop_assert!((cx - x).abs() < 1e-9 && (cy - y).abs() < 1e-9);
        }
        let first = knots[0];
        prop_assert_eq!(path.position_at(first.0 - 5.0), (first.1, first.2));
    }

    #[test]
    fn smoothing_stays_within_input_range(
        values in prop::collection::vec(-50.0f64..50.0, 1..200),
        h in 0.05f64..2.0,
    ) {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64 * 0.1).collect();
        let out = nw_smooth(&values, &times, h).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.iter().all(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9));
    }

    #[test]
    fn kinematics_invariant_under_rigid_motion(
        pts in walk(200),
        angle in 0.0f64..std::f64::consts::TAU,
        dx in -100.0f64..100.0,
        dy in -100.0f64..100.0,
    ) {
        let (s, c) = angle.sin_cos();
        let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (c * x - s * y + dx, s * x + c * y + dy)).collect();
        let a = derive_kinematics(&track_from(&pts), 0.3).unwrap();
        let b = derive_kinematics(&track_from(&moved), 0.3).unwrap();
        for (u, v) in a.speed.iter().zip(&b.speed) {
            prop_assert!((u - v).abs() < 1e-8);
        }
        for (u, v) in a.accel.iter().zip(&b.accel) {
            prop_assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn subtrack_metrics_add_up((pts, mask) in walk_and_mask(400)) {
        let rec = HalfRecord::new(track_from(&pts), &mask, 0.3).unwrap();
        let bands = BandSet::default();
        let summed = (0..rec.subtracks.len())
            .map(|i| rec.subtrack_metrics(i, &bands))
            .fold(LoadMetrics::empty(), |acc, m| acc.merge(&m));
        let full = rec.metrics(Scope::Full, &bands);
        let obs = rec.metrics(Scope::Observed, &bands);
        let cen = rec.metrics(Scope::Censored, &bands);
        let parts = obs.merge(&cen);
        for m in [&summed, &parts] {
            prop_assert!(close(m.total_distance, full.total_distance, 1e-9));
            prop_assert!(close(m.high_speed_distance, full.high_speed_distance, 1e-9));
            prop_assert!(close(m.total_acceleration, full.total_acceleration, 1e-9));
            for b in 0..3 {
                prop_assert!(close(m.time_v_band[b], full.time_v_band[b], 1e-9));
                prop_assert!(close(m.time_a_band[b], full.time_a_band[b], 1e-9));
            }
            prop_assert_eq!(m.speed_samples, full.speed_samples);
            prop_assert_eq!(m.accel_samples, full.accel_samples);
        }
        // no window crosses a scope boundary, so parts never beat the whole
        for w in 0..PEAK_WINDOWS.len() {
            if let (Some(p), Some(f)) = (parts.peak_velocity[w], full.peak_velocity[w]) {
                prop_assert!(p <= f + 1e-12);
            }
        }
    }

    #[test]
    fn metrics_match_oracle((pts, mask) in walk_and_mask(250)) {
        let track = track_from(&pts);
        let rec = HalfRecord::new(track.clone(), &mask, 0.3).unwrap();
        let edges = BandEdges::default();
        let bands = BandSet::from_edges(&edges).unwrap();
        for (scope, oscope) in [
            (Scope::Full, OracleScope::Full),
            (Scope::Observed, OracleScope::Observed),
            (Scope::Censored, OracleScope::Censored),
        ] {
            let m = rec.metrics(scope, &bands);
            let o = oracle_metrics(&track, &mask, oscope, &edges, 0.3);
            prop_assert!(close(m.total_distance, o.total_distance, 1e-9));
            prop_assert!(close(m.very_high_speed_distance, o.band_distance[2], 1e-9));
            prop_assert!(close(m.total_acceleration, o.total_acceleration, 1e-9));
            prop_assert_eq!(m.time_v_band, o.time_v_band);
            prop_assert_eq!(m.time_a_band, o.time_a_band);
            prop_assert_eq!(m.speed_samples, o.speed_samples);
            prop_assert_eq!(m.accel_samples, o.accel_samples);
        }
    }

    #[test]
    fn peaks_respect_dividing_windows(speeds in prop::collection::vec(0.0f64..10.0, 2..400)) {
        let mut x = 0.0;
        let mut pts = vec![(0.0, 0.0)];
        for v in &speeds {
            x += v * 0.1;
            pts.push((x, 0.0));
        }
        let kin = derive_kinematics(&track_from(&pts), 0.3).unwrap();
        let all = SampleMask::all(&kin);
        let p = LoadMetrics::compute(&kin, &all, &BandSet::default()).peak_velocity;
        let ge = |i: usize, j: usize| match (p[i], p[j]) {
            (Some(a), Some(b)) => a >= b - 1e-9,
            (None, Some(_)) => false,
            _ => true,
        };
        prop_assert!(ge(0, 1) && ge(0, 2) && ge(0, 3) && ge(2, 3));
    }

    #[test]
    fn scaler_round_trips(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..60),
    ) {
        let columns: Vec<Column> = ["a", "b", "c", "d"].iter().map(|n| Column::from_name(n)).collect();
        let scaler = fit_scaler(&columns, &rows).unwrap();
        let scaled = scaler.apply(&columns, &rows).unwrap();
        for (raw, s) in rows.iter().zip(&scaled) {
            let back = scaler.unscale(s);
            for (k, v) in scaler.kept.iter().zip(back) {
                prop_assert!((raw[k.source] - v).abs() <= 1e-9 * raw[k.source].abs().max(1.0));
            }
        }
        // kept columns have zero mean and unit sample variance on the training rows
        let n = rows.len() as f64;
        for j in 0..scaler.kept.len() {
            let m = scaled.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = scaled.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn stationary_player_has_zero_load() {
    let track = track_from(&vec![(10.0, 10.0); 120]);
    let mask: Vec<bool> = (0..120).map(|i| (i / 30) % 2 == 0).collect();
    let rec = HalfRecord::new(track, &mask, 0.3).unwrap();
    let m = rec.metrics(Scope::Full, &BandSet::default());
    assert_eq!(m.total_distance, 0.0);
    assert_eq!(m.total_acceleration, 0.0);
    assert_eq!(m.time_v_band[0], m.elapsed());
    assert_eq!(m.time_a_band, [0.0; 3]);
}

#[test]
fn sinusoid_against_closed_form() {
    // x = A sin(wt) with a 20 s period: 4A of path per period, speed
    // |A w cos wt|, and |d speed / dt| averaging 2 A w^2 / pi
    let (amp, omega) = (3.0, std::f64::consts::PI / 10.0);
    let pts: Vec<(f64, f64)> = (0..=2000).map(|i| (amp * (omega * i as f64 * 0.1).sin(), 0.0)).collect();
    let kin = derive_kinematics(&track_from(&pts), 0.3).unwrap();
    let all = SampleMask::all(&kin);
    let m = LoadMetrics::compute(&kin, &all, &BandSet::default());

    let arc = 10.0 * 4.0 * amp;
    assert!(m.total_distance <= arc + 1e-9 && m.total_distance > arc * (1.0 - 1e-4), "{}", m.total_distance);
    assert_eq!(m.time_v_band[0], m.elapsed());

    let top = amp * omega;
    let peak1 = m.peak_velocity[0].unwrap();
    // mean of |cos| over a 1 s window centred on the crest
    let expect1 = top * (omega * 0.5).sin() / (omega * 0.5);
    assert!((peak1 - expect1).abs() < 2e-3 * top, "{peak1} vs {expect1}");
    // a 10 s window spans exactly half a period of x, one period of speed
    let peak10 = m.peak_velocity[3].unwrap();
    assert!((peak10 - 2.0 * top / std::f64::consts::PI).abs() < 1e-3 * top, "{peak10}");

    // smoothing rounds the kinks where speed touches zero, so the density
    // sits slightly below the closed form
    let mean_abs_a = 2.0 * amp * omega * omega / std::f64::consts::PI;
    let raw = kin.accel_raw.iter().map(|a| a.abs()).sum::<f64>() / kin.accel_raw.len() as f64;
    assert!((raw - mean_abs_a).abs() < 0.03 * mean_abs_a, "{raw} vs {mean_abs_a}");
    let density = m.acceleration_density.unwrap();
    assert!(density < mean_abs_a && density > 0.9 * mean_abs_a, "{density} vs {mean_abs_a}");
}
