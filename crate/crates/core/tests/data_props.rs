use logit_kalman::data::*;
use logit_kalman::linalg::{min_eigenvalue, norm};
use logit_kalman::loss::Label;

#[test]
fn sphere_second_moment_is_well_conditioned() {
    for (d, radius) in [(2usize, 1.0), (3, 1.0), (5, 2.0), (8, 0.5)] {
        let spec = StreamSpec {
            feature_law: FeatureLaw::UniformSphere { radius },
            ..StreamSpec::wellspecified(100_000, vec![0.0; d], d as u64)
        };
        let s = generate(&spec).unwrap();
        let mut m = vec![0.0; d * d];
        for o in &s.observations {
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] += o.x[i] * o.x[j];
                }
            }
        }
        m.iter_mut().for_each(|v| *v /= s.len() as f64);
        let lmin = min_eigenvalue(d, &m);
        assert!(lmin >= 0.5 * radius * radius / d as f64, "d {d}: {lmin}");
        assert!(s.observations.iter().all(|o| norm(&o.x) <= radius + 1e-12));
        assert!(s.d_x <= radius + 1e-12);
    }
}

#[test]
fn generated_streams_are_bounded_and_labelled() {
    let laws = [FeatureLaw::UniformSphere { radius: 1.5 }, FeatureLaw::UniformCube { half_width: 0.7 }];
    for law in laws {
        let spec = StreamSpec { feature_law: law.clone(), ..StreamSpec::wellspecified(5000, vec![1.0, -2.0, 0.5], 4) };
        let s = generate(&spec).unwrap();
        let bound = law.radius_bound(3);
        assert!(s.observations.iter().all(|o| norm(&o.x) <= bound + 1e-12));
        assert!(s.observations.iter().all(|o| matches!(o.y, Label::Pos | Label::Neg)));
    }
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stream.csv");
    let s = generate(&StreamSpec::wellspecified(50, vec![0.3, 0.3], 1)).unwrap();
    write_csv(&s, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.len(), 50);
    for (a, b) in s.observations.iter().zip(&back.observations) {
        assert_eq!(a.y, b.y);
        assert!(a.x.iter().zip(&b.x).all(|(u, v)| (u - v).abs() <= 1e-12));
    }

    let spec = StreamSpec {
        n: 20,
        d: 2,
        scheme: Scheme::Csv { path: path.clone() },
        theta_true: None,
        feature_law: FeatureLaw::default(),
        seed: 0,
    };
    assert_eq!(generate(&spec).unwrap().len(), 20);
    assert!(load_csv(dir.path().join("missing.csv")).is_err());
}
