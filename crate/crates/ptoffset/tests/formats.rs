use proptest::prelude::*;
use ptoffset::config::{RunConfig, TrainSection};
use ptoffset::core::{PointCloud, Vec3};
use ptoffset::formats::{parse_obj, parse_ply, write_obj, write_ply};

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3f64..1e3, -1.0f64..1.0, Just(0.0), Just(-0.0)]
}

fn cloud(with_normals: bool) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((prop::array::uniform3(coord()), prop::array::uniform3(-1.0f64..1.0)), 1..40).prop_map(
        move |rows| {
            let points = rows.iter().map(|(p, _)| Vec3::from_array(*p)).collect();
            let normals = with_normals.then(|| {
                rows.iter().map(|(_, n)| Vec3::from_array(*n).normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0))).collect()
            });
            PointCloud::new(points, normals, "").unwrap()
        },
    )
}

proptest! {
    #[test]
    fn obj_round_trip_is_a_fixed_point(c in cloud(true)) {
        let once = parse_obj(write_obj(&c).as_bytes()).unwrap();
        prop_assert_eq!(once.points(), c.points());
        let twice = parse_obj(write_obj(&once).as_bytes()).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(write_obj(&once), write_obj(&twice));
    }

    #[test]
    fn obj_without_normals_round_trips(c in cloud(false)) {
        prop_assert_eq!(parse_obj(write_obj(&c).as_bytes()).unwrap(), c);
    }

    #[test]
    fn ply_round_trip_keeps_scores(c in cloud(true), seed in any::<u64>()) {
        let scores: Vec<f64> = (0..c.len()).map(|i| ((seed.wrapping_add(i as u64) % 1000) as f64) / 7.0).collect();
        let p = parse_ply(write_ply(&c, Some(&scores)).unwrap().as_bytes()).unwrap();
        prop_assert_eq!(p.cloud.points(), c.points());
        prop_assert_eq!(p.scores.unwrap(), scores);
        let again = parse_ply(write_ply(&p.cloud, None).unwrap().as_bytes()).unwrap();
        prop_assert_eq!(again.cloud, p.cloud);
    }

    #[test]
    fn config_round_trip(seed in any::<u64>(), epochs in 1usize..5000, lr in 1e-6f64..1.0, beta in 0.0f64..0.5,
                         variant in 0usize..4, sigmas in prop::collection::vec(0.0f64..0.1, 0..6)) {
        let mut c = RunConfig { seed, ..RunConfig::default() };
        c.train = TrainSection { epochs, lr, beta_min: beta, beta_max: beta * 2.0, variant: ptoffset::core::Variant::ALL[variant], ..c.train };
        c.eval.sigmas = sigmas;
        c.bench.test_seed = Some(seed ^ 1);
        c.bench.radius = Some(lr + 0.5);
        prop_assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}

#[test]
fn obj_count_mismatch_matches_exhaustive_rule() {
    for v in 1..5 {
        for vn in 0..6 {
            let mut text = String::new();
            for i in 0..v {
                text.push_str(&format!("v {i} 0 0\n"));
            }
            for _ in 0..vn {
                text.push_str("vn 0 3 4\n");
            }
            let c = parse_obj(text.as_bytes()).unwrap();
            assert_eq!(c.len(), v);
            assert_eq!(c.normals().is_some(), v == vn, "v={v} vn={vn}");
            if let Some(ns) = c.normals() {
                assert!(ns.iter().all(|n| (*n - Vec3::new(0.0, 0.6, 0.8)).max_abs() < 1e-15));
            }
        }
    }
}
