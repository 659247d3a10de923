use detmmot_core::linalg::{self, det};
use detmmot_core::optcheck::{check_gradient_system_3d, check_subgradient, check_tightness, marginal_stat_test, Tolerances};
use detmmot_core::radial::solve_radial;
use detmmot_core::{CouplingSampler, Point, RadialMeasure, RngState};

fn mixed_laws() -> Vec<RadialMeasure> {
    vec![
        RadialMeasure::uniform_ball(3),
        RadialMeasure::uniform_radius(2.0).unwrap(),
        RadialMeasure::from_quantile_fn(|u| 0.5 + u.sqrt(), 1024).unwrap(),
    ]
}

#[test]
fn monte_carlo_mean_matches_the_closed_form_for_mixed_laws() {
    let sol = solve_radial(&mixed_laws()).unwrap();
    let sampler = CouplingSampler::new(sol.clone());
    let n = 200_000;
    let tuples = sampler.sample(n, &mut RngState::from_seed(11));
    let dets: Vec<f64> = tuples.iter().map(|t| det(t).unwrap()).collect();
    let mean = dets.iter().sum::<f64>() / n as f64;
    let var = dets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - sol.value()).abs() <= 4.0 * se, "{mean} vs {}", sol.value());
    assert!((sol.value() - sol.dual_value()).abs() <= 1e-6 * sol.value());
}

#[test]
fn mixed_laws_keep_every_marginal_and_certify() {
    let laws = mixed_laws();
    let sol = solve_radial(&laws).unwrap();
    let tuples = CouplingSampler::new(sol.clone()).sample(50_000, &mut RngState::from_seed(12));
    for (i, law) in laws.iter().enumerate() {
        let xs: Vec<Point> = tuples.iter().map(|t| t[i].clone()).collect();
        let rep = marginal_stat_test(&xs, law, true).unwrap();
        assert!(rep.passed, "marginal {i}: {rep:?}");
    }
    let tol = Tolerances::default();
    let pots = sol.potentials();
    assert!(check_tightness(&tuples, pots, &tol).unwrap().passed);
    assert!(check_subgradient(&tuples, pots, &tol).unwrap().passed);
    assert!(check_gradient_system_3d(&tuples, pots, &tol).unwrap().passed);
}

#[test]
fn sampled_tuples_form_positive_orthogonal_frames() {
    for d in [2usize, 4, 5] {
        let sol = solve_radial(&vec![RadialMeasure::uniform_ball(d); d]).unwrap();
        let tuples = CouplingSampler::new(sol).sample(2_000, &mut RngState::from_seed(d as u64));
        for t in &tuples {
            for i in 0..d {
                for j in i + 1..d {
                    assert!(linalg::dot(&t[i], &t[j]).abs() <= 1e-10);
                }
            }
            let prod: f64 = t.iter().map(|x| x.norm()).product();
            assert!((det(t).unwrap() - prod).abs() <= 1e-10 * (1.0 + prod));
        }
    }
}
