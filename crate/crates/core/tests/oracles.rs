//! Library results checked against independent implementations: naive double loops,
//! direct factorial arithmetic and closed-form integrals.

use approx::assert_relative_eq;
use bernergy::cmfun::{eval_by_representation, eval_by_representation_branch, Branch};
use bernergy::energy::{
    energy_equals_centered_mmd, even_power_identity, inner_product_bernstein, inner_product_ell,
    inner_product_hyperbolic, moment_report, CONSTRAINT_TOL,
};
use bernergy::sampling::{random_measure, random_points, stream_rng, MomentConstraint};
use bernergy::spaces::{arccosh_series, gram, lorentz_product};
use bernergy::verify::{check_cpd, check_psd, check_schoenberg, check_triangle, SPECTRAL_TOL};
use bernergy::{CenteredKernel, CndKernel, DiscreteSignedMeasure, GramMatrix, Point, PsiFunction, Space};

/// Plain nested loop over coordinates, independent of the library's kernels.
fn naive_energy(atoms: &[Vec<f64>], w: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    for (i, a) in atoms.iter().enumerate() {
        for (j, b) in atoms.iter().enumerate() {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            total += w[i] * w[j] * f(d2);
        }
    }
    total
}

fn coords(mu: &DiscreteSignedMeasure) -> Vec<Vec<f64>> {
    mu.atoms().iter().map(|p| p.coords().to_vec()).collect()
}

#[test]
fn bernstein_pairing_matches_naive_double_loop() {
    let k = CndKernel::euclidean_squared();
    for seed in 0..20 {
        let mut rng = stream_rng(seed, 0);
        let pts = random_points(&mut rng, Space::Euclidean, 2, 6).unwrap();
        let mut w: Vec<f64> = (0..6).map(|i| ((i * 7 + seed as usize) % 5) as f64 - 2.0).collect();
        let mean = w.iter().sum::<f64>() / 6.0;
        w.iter_mut().for_each(|v| *v -= mean);
        let eta = DiscreteSignedMeasure::new(pts, w.clone()).unwrap();
        for psi in [PsiFunction::sqrt(), PsiFunction::log1p(), PsiFunction::pow(0.7).unwrap()] {
            let got = inner_product_bernstein(&eta, &eta, &k, &psi).unwrap();
            let naive = -naive_energy(&coords(&eta), &w, |d2| psi.eval(d2).unwrap());
            assert_relative_eq!(got, naive, max_relative = 1e-12, epsilon = 1e-14);
        }
    }
}

#[test]
fn level_two_pairing_matches_naive_double_loop() {
    let k = CndKernel::euclidean_squared();
    let p3 = PsiFunction::pow(3.0).unwrap();
    for seed in 0..20 {
        let mut rng = stream_rng(seed, 1);
        let eta = random_measure(&mut rng, Space::Euclidean, 2, MomentConstraint::Moments(1)).unwrap();
        let got = inner_product_ell(&eta, &eta, &k, &p3, CONSTRAINT_TOL).unwrap();
        let naive = naive_energy(&coords(&eta), eta.weights(), |d2| d2.powf(1.5));
        assert_relative_eq!(got, naive, max_relative = 1e-10);
        assert!(got > 0.0);
    }
}

#[test]
fn centered_form_matches_two_summation_paths() {
    for seed in 0..20 {
        let mut rng = stream_rng(seed, 2);
        let eta = random_measure(&mut rng, Space::Euclidean, 3, MomentConstraint::Mass).unwrap();
        let eta = DiscreteSignedMeasure::new(eta.atoms()[..].to_vec(), eta.weights().to_vec()).unwrap();
        let xi = Point::euclidean(vec![0.2, -0.4, 1.0]).unwrap();
        let c = CenteredKernel::constant(CndKernel::euclidean_squared(), xi.clone()).unwrap();
        let (lhs, rhs) = energy_equals_centered_mmd(&eta, &c).unwrap();
        // independent path: K = 2 <x - xi, y - xi>, so the right side is 2 |sum w (x - xi)|^2
        let mut v = [0.0; 3];
        for (p, w) in eta.atoms().iter().zip(eta.weights()) {
            for k in 0..3 {
                v[k] += w * (p.coords()[k] - xi.coords()[k]);
            }
        }
        let oracle = 2.0 * v.iter().map(|c| c * c).sum::<f64>();
        let scale = eta.total_variation().powi(2) * eta.max_norm().powi(2).max(1.0);
        assert!((lhs - oracle).abs() <= 1e-12 * scale);
        assert!((rhs - oracle).abs() <= 1e-12 * scale);
    }
}

#[test]
fn even_power_identity_matches_expansion_oracle() {
    // mu = delta_1 + delta_{-1} - 2 delta_0; (x - y)^4 summed by hand is 24 and the
    // right side is 4 sum (xy)^2 w w + 2 (sum w x^2)^2 = 4 * 4 + 2 * 4 = 24
    let mu = DiscreteSignedMeasure::new(
        [1.0, -1.0, 0.0].iter().map(|&v| Point::euclidean(vec![v]).unwrap()).collect(),
        vec![1.0, 1.0, -2.0],
    )
    .unwrap();
    let id = even_power_identity(&mu, 2).unwrap();
    assert_eq!(id.lhs, 24.0);
    assert_relative_eq!(id.rhs, 24.0, epsilon = 1e-12);

    // coefficient list from factorials
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    for n in 1..6u32 {
        let coeffs = bernergy::energy::even_power_coefficients(n);
        for (l, c) in coeffs.iter().enumerate() {
            let l = l as u32;
            let direct = fact(n) / (fact(n - 2 * l) * fact(l) * fact(l)) * 2f64.powi((n - 2 * l) as i32);
            assert_relative_eq!(*c, direct, max_relative = 1e-14);
        }
    }
}

#[test]
fn hyperbolic_series_terms_match_naive_sums() {
    let k_terms = 6;
    for seed in 0..10 {
        let mut rng = stream_rng(seed, 3);
        let mut eta;
        loop {
            eta = random_measure(&mut rng, Space::Hyperboloid, 2, MomentConstraint::Mass).unwrap();
            if eta.len() == 5 {
                break;
            }
        }
        let r = inner_product_hyperbolic(&eta, &eta, k_terms).unwrap();
        assert!(r.value > 0.0);
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        let mut partial = 0.0;
        for k in 1..=k_terms {
            let c = fact(2 * k) / (4f64.powi(k as i32) * fact(k).powi(2) * (2 * k) as f64);
            let mut term = 0.0;
            for (x, wx) in eta.atoms().iter().zip(eta.weights()) {
                for (y, wy) in eta.atoms().iter().zip(eta.weights()) {
                    term += wx * wy * lorentz_product(x, y).unwrap().powi(-2 * k as i32);
                }
            }
            assert!(term > -1e-14, "term {k} = {term}");
            partial += c * term;
            assert!(partial > 0.0);
        }
        assert_relative_eq!(r.series_lower_bound, partial, max_relative = 1e-9);
    }
}

#[test]
fn arccosh_series_against_library_acosh() {
    for t in [1.05, 1.5, 2.0, 10.0, 1e4] {
        let s = arccosh_series(t, 12).unwrap();
        let direct = f64::acosh(t);
        assert!((s.value - direct).abs() <= s.error_bound, "t = {t}");
    }
}

#[test]
fn representation_constants_and_values() {
    let sqrt = PsiFunction::sqrt();
    assert_relative_eq!(
        sqrt.density().unwrap().coeff,
        1.0 / (2.0 * std::f64::consts::PI.sqrt()),
        max_relative = 1e-15
    );
    // t^{a/2} for 2 < a < 4: constant a (a - 2) / (4 Gamma(2 - a/2)); Gamma(1/2) = sqrt(pi)
    let p3 = PsiFunction::pow(3.0).unwrap();
    assert_relative_eq!(
        p3.density().unwrap().coeff,
        3.0 / (4.0 * std::f64::consts::PI.sqrt()),
        max_relative = 1e-14
    );
    let v = eval_by_representation(&sqrt, 4.0, 1e-8).unwrap();
    assert!((v - 2.0).abs() <= 1e-6);
    let v = eval_by_representation(&p3, 1.0, 1e-10).unwrap();
    assert!((v - 1.0).abs() <= 1e-8);
    // log(1 + t) = int (1 - e^{-rt}) e^{-r} / r dr, at t = e - 1
    let v = eval_by_representation_branch(&PsiFunction::log1p(), std::f64::consts::E - 1.0, 1e-10, Branch::Full)
        .unwrap();
    assert!((v.value - 1.0).abs() <= 1e-10);
}

fn gaussian_gram(points: &[Point], r: f64) -> GramMatrix {
    gram(&CndKernel::euclidean_squared(), points).unwrap().map("gauss", |v| (-r * v).exp())
}

#[test]
fn gaussian_gram_is_psd() {
    let mut rng = stream_rng(0, 4);
    let pts = random_points(&mut rng, Space::Euclidean, 3, 50).unwrap();
    assert!(check_psd(&gaussian_gram(&pts, 1.0), SPECTRAL_TOL).unwrap().pass);
}

#[test]
fn schoenberg_examples_pass() {
    let grid = [0.1, 1.0, 10.0];
    for (kernel, space) in [
        (CndKernel::euclidean_squared(), Space::Euclidean),
        (CndKernel::Hyperbolic, Space::Hyperboloid),
        (CndKernel::SphereGeodesic, Space::Sphere),
    ] {
        let mut rng = stream_rng(1, 5);
        let pts = random_points(&mut rng, space, 3, 30).unwrap();
        let r = check_schoenberg(&kernel, &pts, &grid, SPECTRAL_TOL).unwrap();
        assert!(r.pass, "{}: {r:?}", kernel.name());
    }
}

#[test]
fn cpd_examples() {
    let mut rng = stream_rng(2, 6);
    let pts = random_points(&mut rng, Space::Euclidean, 2, 15).unwrap();
    let g = gram(&CndKernel::euclidean_squared(), &pts).unwrap();
    let ones = vec![vec![1.0; pts.len()]];
    assert!(check_cpd(&g.map("-d2", |v| -v), &ones, SPECTRAL_TOL).unwrap().pass);
    assert!(!check_cpd(&g.map("-d4", |v| -v * v), &ones, SPECTRAL_TOL).unwrap().pass);
    let mut affine = ones;
    for c in 0..2 {
        affine.push(pts.iter().map(|p| p.coords()[c]).collect());
    }
    assert!(check_cpd(&g.map("d4", |v| v * v), &affine, SPECTRAL_TOL).unwrap().pass);
}

#[test]
fn centered_gram_and_projected_gram_agree() {
    // constant centering of a CND kernel is PSD, and -gamma projected onto mass-zero
    // vectors is PSD; on mass-zero weights both quadratic forms coincide
    for (kernel, space) in [
        (CndKernel::euclidean_squared(), Space::Euclidean),
        (CndKernel::Hyperbolic, Space::Hyperboloid),
    ] {
        for seed in 0..5 {
            let mut rng = stream_rng(seed, 7);
            let pts = random_points(&mut rng, space, 2, 20).unwrap();
            let c = CenteredKernel::at_base_point(kernel, 2).unwrap();
            let k = c.gram(&pts).unwrap();
            assert!(check_psd(&k, SPECTRAL_TOL).unwrap().pass);
            let g = gram(&kernel, &pts).unwrap().map("-gamma", |v| -v);
            assert!(check_cpd(&g, &[vec![1.0; 20]], SPECTRAL_TOL).unwrap().pass);
            let w: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + i as f64 / 7.0)).collect();
            let mean = w.iter().sum::<f64>() / 20.0;
            let w: Vec<f64> = w.iter().map(|v| v - mean).collect();
            let (a, b) = (k.bilinear(&w, &w), g.bilinear(&w, &w));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
    // the affine basis reproduces affine functions exactly
    let c = CenteredKernel::affine(
        CndKernel::euclidean_squared(),
        vec![Point::euclidean(vec![0.0]).unwrap(), Point::euclidean(vec![1.0]).unwrap()],
    )
    .unwrap();
    let x = Point::euclidean(vec![0.3]).unwrap();
    let vals = c.basis_values(&x);
    assert_relative_eq!(vals[0], 0.7, max_relative = 1e-14);
    assert_relative_eq!(vals[1], 0.3, max_relative = 1e-14);
}

#[test]
fn squared_distance_fails_triangle_on_collinear_points() {
    let pts: Vec<Point> = (0..3).map(|i| Point::euclidean(vec![f64::from(i)]).unwrap()).collect();
    let r = check_triangle(|x, y| CndKernel::euclidean_squared().eval(x, y), &pts, 1000, 0, 1e-12).unwrap();
    assert!(!r.pass);
}

#[test]
fn moment_report_of_augmented_measure() {
    let mu = DiscreteSignedMeasure::new(
        vec![Point::euclidean(vec![0.5, 2.0]).unwrap(), Point::euclidean(vec![-1.0, 0.25]).unwrap()],
        vec![1.5, 0.7],
    )
    .unwrap();
    let eta = bernergy::energy::mean_cancel_augment(&mu, 0.8).unwrap();
    let center = CenteredKernel::at_base_point(CndKernel::euclidean_squared(), 2).unwrap();
    let r = moment_report(&eta, 2, &center).unwrap();
    // direct summation
    let mass: f64 = eta.weights().iter().sum();
    let mean: Vec<f64> = (0..2)
        .map(|k| eta.atoms().iter().zip(eta.weights()).map(|(p, w)| w * p.coords()[k]).sum())
        .collect();
    assert_eq!(r.mass, mass);
    assert!(mass.abs() < 1e-15);
    assert!(mean.iter().all(|m| m.abs() < 1e-15));
}
