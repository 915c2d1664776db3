//! Worked examples driven through the public API only.

use std::f64::consts::PI;

use cms_core::coding::{code_word, energy_u, BackwardWord};
use cms_core::estimators::{
    empirical_measure, ergodic_average, estimate_entropy_integral, markov_measure_cylinder, stationarity_check,
    EmpiricalMeasure,
};
use cms_core::martingale::{likelihood_path, variance_bound_check};
use cms_core::simulate::{apply_u, cylinder_prob, run};
use cms_core::sysdsl::{parse_expr, parse_system};
use cms_core::analysis::estimate_contraction_rate;
use cms_core::system::EXAMPLE_R2_SOURCE;
use cms_core::{validate, MarkovSystem, Point};

fn r1() -> MarkovSystem {
    MarkovSystem::builtin("example_r1", &[]).unwrap()
}

fn gm() -> MarkovSystem {
    MarkovSystem::builtin("gmarkov", &[0.7, 0.3, 0.4, 0.6]).unwrap()
}

fn pt(v: &[f64]) -> Point {
    Point::from(v.to_vec())
}

#[test]
fn bundled_file_describes_the_planar_example() {
    let spec = parse_system(EXAMPLE_R2_SOURCE).unwrap();
    assert_eq!((spec.vertex_count, spec.edges.len(), spec.dim), (2, 4, 2));
    let p = parse_expr("(1/6)*sin(x)^2 + 17/24", 1).unwrap();
    assert!((p.eval(&[0.0]).unwrap() - 17.0 / 24.0).abs() < 1e-15);
}

#[test]
fn user_system_round_trip() {
    let text = "\
system tent
dim 1
metric l1
vertices 1
representative 1 = (0.5)
edge lo : 1 -> 1 map (x/3) prob 1/2 + x/10
edge hi : 1 -> 1 map (x/3 + 2/3) prob 1/2 - x/10
delta 2/5
rate 1/3
";
    let sys = MarkovSystem::from_source(text).unwrap().with_sample_radius(1.0);
    assert!(validate(&sys, 2000, 1).unwrap().pass);
    let rep = estimate_contraction_rate(&sys, 20_000, 1).unwrap();
    // Every pair contracts by exactly 1/3; rounding on close pairs stays far below 1e-9.
    assert!((rep.max_ratio - 1.0 / 3.0).abs() <= 1e-9, "{}", rep.max_ratio);
    assert_eq!(rep.exceeding, 0);
    let t = run(&sys, &pt(&[0.5]), 100, 9, 0).unwrap();
    assert!(t.points.iter().all(|p| (0.0..=1.0).contains(&p.coords().unwrap()[0])));
}

#[test]
fn operator_and_cylinders_on_the_line() {
    let s = r1();
    let id = |p: &Point| p.coords().unwrap()[0];
    // p₀(π) = 17/24 and p₁(π) = 7/24, so Uf(π) = π(17/48 + 14/24).
    let u = apply_u(&s, &id, &pt(&[PI])).unwrap();
    assert!((u - PI * 45.0 / 48.0).abs() < 1e-12);
    let p = cylinder_prob(&s, &pt(&[0.0]), &[0, 0]).unwrap();
    assert!((p - (17.0f64 / 24.0).powi(2)).abs() < 1e-15);
}

#[test]
fn pinned_chain_gives_exact_entropy_and_invariance() {
    let s = r1();
    let zero = pt(&[0.0]);
    let h = -(17.0f64 / 24.0 * (17.0f64 / 24.0).ln() + 7.0 / 24.0 * (7.0f64 / 24.0).ln());
    let est = estimate_entropy_integral(&s, &zero, 1000, 2, 3).unwrap();
    assert!((est.value - h).abs() < 1e-12);

    let cloud = EmpiricalMeasure::from_points(vec![zero; 50]);
    let words = vec![vec![0], vec![1], vec![0, 1], vec![1, 1, 0]];
    for row in stationarity_check(&s, &cloud, &words).unwrap() {
        assert!(row.discrepancy <= 1e-12, "{row:?}");
    }
}

#[test]
fn stationary_chain_frequencies() {
    let s = gm();
    let x = s.representative(1).clone();
    let g = s.graph();
    let to_one = |e: usize, _: &Point| if g.target(e) == 1 { 1.0 } else { 0.0 };
    let avg = ergodic_average(&s, &x, &to_one, 100_000, 4, 0).unwrap();
    assert!((avg.value - 4.0 / 7.0).abs() < 0.01);

    let mu = empirical_measure(&s, &x, 100_000, 1000, 4, 1).unwrap();
    let loop11 = g.edge_index("1-1").unwrap();
    let m = markov_measure_cylinder(&s, &mu, &[loop11]).unwrap();
    assert!((m.value - 0.4).abs() < 0.01);
}

#[test]
fn coding_on_the_line_halves_towards_zero() {
    let s = r1();
    let m = 12;
    let w = BackwardWord::new(s.graph(), vec![0; m]).unwrap();
    let p = code_word(&s, &w, None).unwrap();
    assert_eq!(p.coords().unwrap()[0], 0.5f64.powi(m as i32));
    let u = energy_u(&s, &w, 0).unwrap();
    assert!((u - (17.0f64 / 24.0).ln()).abs() < 1e-6);
    assert!(u >= s.delta().ln());
}

#[test]
fn likelihood_ratio_and_variance_bound() {
    let s = r1();
    // p₀(0) = 17/24, p₀(π/2) = 1/6 + 17/24 = 7/8.
    let path = likelihood_path(&s, &pt(&[0.0]), &pt(&[PI / 2.0]), &[0]).unwrap();
    assert!((path.x[0] - 21.0 / 17.0).abs() < 1e-12);

    let rep = variance_bound_check(&s, &pt(&[0.0]), &pt(&[0.1]), 50, 20_000, 8).unwrap();
    assert!(rep.pass, "{rep:?}");
    let same = variance_bound_check(&gm(), gm().representative(1), gm().representative(1), 10, 100, 8).unwrap();
    assert_eq!(same.estimate, 0.0);
}
