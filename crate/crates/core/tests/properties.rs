use proptest::prelude::*;

use sumie_core::editor::StyleHint;
use sumie_core::fixtures;
use sumie_core::geom::Vec2;
use sumie_core::mapping::{map_stroke, CalibrationModel, WorkspaceFrame};
use sumie_core::optimize::{assign_thickness, resample_even, BSplineCurve, OptimizedStroke};
use sumie_core::par::{map_slice, Execution};
use sumie_core::styles::{kasure_degree, noutan_degree, StyleParams};
use sumie_core::trajectory::{ArmModel, JointPose, TrapezoidProfile};
use sumie_core::vectorize::{detect_corners_from, local_curvature, CornerParams, RasterPolyline};

fn model() -> CalibrationModel {
    CalibrationModel::fit(&fixtures::table_i(), 0.0).unwrap()
}

fn points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec2>> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), n).prop_map(|v| v.into_iter().map(|(x, y)| Vec2::new(x, y)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thickness_is_symmetric_and_bounded(count in 2usize..400, t_min in 0.1..10.0f64, extra in 0.0..30.0f64, gamma in 0.1..3.0f64) {
        let t_max = t_min + extra;
        let t = assign_thickness(count, t_min, t_max, gamma).unwrap();
        let n = count - 1;
        prop_assert_eq!(t[0], t_min);
        prop_assert_eq!(t[n], t_min);
        for i in 0..=n {
            prop_assert_eq!(t[i], t[n - i]);
            prop_assert!(t[i] >= t_min - 1e-12 && t[i] <= t_max + 1e-12);
        }
        if n % 2 == 0 {
            prop_assert!((t[n / 2] - t_max).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_is_a_partition_of_unity(m in 4usize..30, t in 0.0..=1.0f64) {
        let c = BSplineCurve::new(vec![Vec2::zeros(); m]);
        let b = c.basis(t);
        let sum: f64 = b.n[0].iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(b.n[0].iter().all(|&v| v >= -1e-15));
        let d: f64 = b.n[1].iter().sum();
        prop_assert!(d.abs() < 1e-9);
    }

    #[test]
    fn even_resampling_spaces_points_equally(cps in points(4..12), n in 3usize..60) {
        let curve = BSplineCurve::new(cps);
        let len = curve.arc_length();
        prop_assume!(len > 1.0);
        let s = resample_even(&curve, n);
        prop_assert_eq!(s.len(), n);
        prop_assert!((s[0] - curve.eval(0.0)).norm() < 1e-9);
        prop_assert!((s[n - 1] - curve.eval(1.0)).norm() < 1e-9);
        // chords never exceed the arc spacing, up to one step of the
        // 256-per-span arc-length table
        let step = len / (n - 1) as f64;
        let table = 2.0 * len / (256 * curve.spans()) as f64;
        for w in s.windows(2) {
            prop_assert!((w[1] - w[0]).norm() <= step + table);
        }
    }

    #[test]
    fn mapping_scales_distances_by_w_s(samples in points(2..30), s in 0.05..0.5f64) {
        let frame = WorkspaceFrame::default();
        let m = model();
        let n = samples.len();
        let stroke = OptimizedStroke {
            stroke_id: 1,
            curve: BSplineCurve::new(vec![Vec2::zeros(); 4]),
            samples: samples.clone(),
            thickness: vec![5.0; n],
            style_hint: StyleHint::Plain,
            objective: Vec::new(),
            max_distance: 0.0,
        };
        let mapped = map_stroke(&stroke, Vec2::zeros(), s, &frame, &m).unwrap();
        let out = mapped.positions();
        for i in 0..n {
            for j in 0..i {
                let a = (samples[i] - samples[j]).norm() * m.w * s;
                let b = (out[i] - out[j]).norm();
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
            }
        }
    }

    #[test]
    fn descent_and_thickness_invert(t in 0.7..30.0f64) {
        let m = model();
        let d = m.thickness_to_descent(t);
        prop_assert!(!d.clamped);
        prop_assert!((m.descent_to_thickness(d.h) - t).abs() < 1e-9);
    }

    #[test]
    fn profiles_cover_length_within_bounds(len in 0.001..500.0f64, v in 1.0..200.0f64, a in 1.0..2000.0f64, f in 0.0..=1.0f64) {
        let p = TrapezoidProfile::plan(len, v, a).unwrap();
        let d = p.duration();
        prop_assert!((p.distance_at(d) - len).abs() <= 1e-9 * (1.0 + len));
        prop_assert!(p.speed_at(f * d) <= v * (1.0 + 1e-12));
        prop_assert!(p.distance_at(f * d) <= len + 1e-9);
    }

    #[test]
    fn inverse_kinematics_round_trips(a in prop::array::uniform4(0.0..=1.0f64)) {
        let arm = ArmModel::default();
        let mut q = [0.0; 4];
        for k in 0..4 {
            q[k] = arm.limits[k][0] + a[k] * (arm.limits[k][1] - arm.limits[k][0]);
        }
        let p = arm.forward(&JointPose::from_array(q));
        let j = arm.inverse(p, None).unwrap();
        prop_assert!((arm.forward(&j) - p).norm() < 1e-6);
        prop_assert!(arm.within_limits(&j).is_ok());
    }

    #[test]
    fn noutan_stays_below_lambda(lambda in 0.01..=1.0f64, t in 0.0..50.0f64, c1 in 0.1..5.0f64) {
        let d = noutan_degree(&StyleParams { lambda, t_dip: t, c1, ..StyleParams::default() });
        prop_assert!(d >= 0.0 && d <= lambda);
    }

    #[test]
    fn kasure_is_homogeneous_in_thickness(samples in points(2..20), k in 0.1..10.0f64) {
        let p = StyleParams::default();
        let t: Vec<f64> = (0..samples.len()).map(|i| 1.0 + i as f64 * 0.1).collect();
        let scaled: Vec<f64> = t.iter().map(|v| v * k).collect();
        let a = kasure_degree(&samples, &t, &p).value;
        let b = kasure_degree(&samples, &scaled, &p).value;
        prop_assert!((b - k * a).abs() <= 1e-9 * (1.0 + b.abs()));
    }

    #[test]
    fn corner_count_never_grows_with_mu(wobble in prop::collection::vec(-3.0..3.0f64, 8), mus in prop::collection::vec(10.0..500.0f64, 2..6)) {
        let pts: Vec<Vec2> = (0..400)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 400.0;
                let r = 60.0 + wobble.iter().enumerate().map(|(k, a)| a * ((k + 2) as f64 * t).sin()).sum::<f64>();
                Vec2::new((r * t.cos()).round(), (r * t.sin()).round())
            })
            .collect();
        let poly = RasterPolyline { points: pts, closed: true };
        let k = local_curvature(&poly, &CornerParams::default());
        let mut mus = mus;
        mus.sort_by(f64::total_cmp);
        let counts: Vec<usize> = mus.iter().map(|&mu| detect_corners_from(&k, true, mu).len()).collect();
        prop_assert!(counts.windows(2).all(|c| c[1] <= c[0]), "{:?}", counts);
    }

    #[test]
    fn execution_modes_agree(v in prop::collection::vec(-1e6..1e6f64, 0..200)) {
        let f = |x: &f64| x.sin() * x.abs().sqrt();
        prop_assert_eq!(map_slice(Execution::Sequential, &v, f), map_slice(Execution::Parallel, &v, f));
    }
}
