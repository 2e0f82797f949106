use latcount::bench;
use latcount::estimator::{estimate, ratio_stats, RunConfig};
use latcount::oracle;
use latcount::rng::{Domain, Rng};
use latcount::sampler;
use latcount::{Halfspace, Polytope};
use num_bigint::BigUint;
use num_traits::ToPrimitive;

fn triangle() -> Polytope {
    Polytope::new(
        2,
        vec![
            Halfspace::new(vec![-1.0, 0.0], 0.0),
            Halfspace::new(vec![0.0, -1.0], 0.0),
            Halfspace::new(vec![1.0, 1.0], 2.0),
        ],
    )
    .unwrap()
}

fn exact(p: &Polytope) -> f64 {
    oracle::exact_count(p, &BigUint::from(1u64 << 60), false)
        .unwrap()
        .count
        .to_f64()
        .unwrap()
}

fn runs_within(p: &Polytope, cfg: &RunConfig, runs: u64, lo: f64, hi: f64) -> usize {
    (0..runs)
        .filter(|&k| {
            let est = estimate(
                p,
                &RunConfig {
                    seed: 1000 + k,
                    ..cfg.clone()
                },
            )
            .unwrap();
            assert!(est.v <= cfg.delta * cfg.epsilon.powi(2) * est.r * est.r * (1.0 + 1e-9));
            (lo..=hi).contains(&est.estimate)
        })
        .count()
}

#[test]
fn box_estimates() {
    let p = Polytope::from_box(&[0.0; 3], &[9.0; 3]).unwrap();
    assert_eq!(
        runs_within(&p, &RunConfig::default(), 10, 800.0, 1200.0),
        10
    );
}

#[test]
fn triangle_estimates() {
    assert_eq!(exact(&triangle()), 6.0);
    let ok = runs_within(&triangle(), &RunConfig::default(), 10, 4.8, 7.2);
    assert!(ok >= 9, "{ok}/10");
}

#[test]
fn random_instance_estimates() {
    let mut rng = Rng::derive(1, Domain::Generator, 0, 0);
    let p = bench::gen_random(10, 5, 8, &mut rng).unwrap();
    let c = exact(&p);
    assert!(c >= 1.0);
    let ok = runs_within(&p, &RunConfig::default(), 10, 0.8 * c, 1.2 * c);
    assert!(ok >= 9, "{ok}/10 within 20% of {c}");
}

#[test]
fn rotated_thin_rectangle_estimates() {
    let mut rng = Rng::derive(3, Domain::Generator, 1, 0);
    let p = bench::gen_thin_rect(3, 2.0, &mut rng, true).unwrap();
    let c = exact(&p);
    let ok = runs_within(&p, &RunConfig::default(), 10, 0.8 * c, 1.2 * c);
    assert!(ok >= 9, "{ok}/10 within 20% of {c}");
}

#[test]
fn more_groups_do_not_raise_variance() {
    // [0,9]² split in half by x1 ≤ 4; groups of 50
    let body = Polytope::from_box(&[0.0; 2], &[9.0; 2]).unwrap();
    let next = Polytope::new(2, vec![Halfspace::new(vec![1.0, 0.0], 4.0)]).unwrap();
    let sp = sampler::shift_facets(&body).unwrap();
    let mut v10 = Vec::new();
    let mut v20 = Vec::new();
    for seed in 0..100 {
        let mut rng = Rng::new(seed, 0);
        let s = sampler::sample_lattice(&sp, 1000, 2, &mut rng, &[0.0, 0.0]).unwrap();
        v10.push(ratio_stats(&s.points[..500], &next, 10).unwrap().v);
        v20.push(ratio_stats(&s.points, &next, 20).unwrap().v);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let se = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
            / (v.len() as f64).sqrt()
    };
    assert!(
        mean(&v20) <= mean(&v10) + 3.0 * se(&v10),
        "{} vs {}",
        mean(&v20),
        mean(&v10)
    );
}
