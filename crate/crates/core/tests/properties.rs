//! Randomized invariants.

use bernergy::cmfun::{eval_by_representation, PsiFunction};
use bernergy::energy::{
    difference, energy_equals_centered_mmd, even_power_identity, inner_product_ell, mean_cancel_augment, pairing,
    CONSTRAINT_TOL,
};
use bernergy::sampling::{random_measure, random_points, stream_rng, MomentConstraint};
use bernergy::spaces::{arccosh_series, gram, lorentz_product};
use bernergy::stats::{energy_statistic, SampleSet};
use bernergy::verify::{check_cpd, check_psd, check_schoenberg, SPECTRAL_TOL};
use bernergy::{CenteredKernel, CndKernel, DiscreteSignedMeasure, Point, Space};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -5.0..5.0f64
}

fn euclid_points(dim: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::collection::vec(coord(), dim), n)
        .prop_map(|rows| rows.into_iter().map(|r| Point::euclidean(r).unwrap()).collect())
}

fn kernels() -> impl Strategy<Value = (CndKernel, Space)> {
    prop_oneof![
        (0.0..3.0f64).prop_map(|s| (CndKernel::EuclideanSquared { shift: s }, Space::Euclidean)),
        Just((CndKernel::Euclidean, Space::Euclidean)),
        Just((CndKernel::Hyperbolic, Space::Hyperboloid)),
        Just((CndKernel::SphereGeodesic, Space::Sphere)),
    ]
}

fn point_in(space: Space, coords: Vec<f64>) -> Point {
    match space {
        Space::Euclidean => Point::euclidean(coords).unwrap(),
        Space::Hyperboloid => Point::hyperboloid_lift(coords).unwrap(),
        Space::Sphere => {
            let mut c = coords;
            c[0] += 11.0; // keep away from the zero vector
            Point::sphere(c).unwrap()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_symmetric_nonnegative_with_constant_diagonal(
        (kernel, space) in kernels(),
        a in prop::collection::vec(coord(), 3),
        b in prop::collection::vec(coord(), 3),
    ) {
        let x = point_in(space, a);
        let y = point_in(space, b);
        let xy = kernel.eval(&x, &y).unwrap();
        prop_assert_eq!(xy, kernel.eval(&y, &x).unwrap());
        prop_assert!(xy >= 0.0);
        prop_assert_eq!(kernel.eval(&x, &x).unwrap(), kernel.diagonal());
    }

    #[test]
    fn lorentz_product_is_at_least_one(
        a in prop::collection::vec(coord(), 2),
        b in prop::collection::vec(coord(), 2),
    ) {
        let x = Point::hyperboloid_lift(a).unwrap();
        let y = Point::hyperboloid_lift(b).unwrap();
        prop_assert!(lorentz_product(&x, &y).unwrap() >= 1.0 - 1e-12 * lorentz_product(&x, &y).unwrap());
        let d = CndKernel::Hyperbolic.eval(&x, &y).unwrap();
        prop_assert!((d.cosh() - lorentz_product(&x, &y).unwrap()).abs() <= 1e-10 * d.cosh());
    }

    #[test]
    fn arccosh_series_is_an_upper_bound_decreasing_in_terms(t in 1.01..1e6f64) {
        let mut prev = f64::INFINITY;
        for k in 0..14 {
            let s = arccosh_series(t, k).unwrap();
            prop_assert!(s.value <= prev + 1e-15 * prev.abs().min(1e300));
            prop_assert!(s.value >= t.acosh() - 4.0 * f64::EPSILON * s.value);
            prop_assert!(s.value - t.acosh() <= s.error_bound);
            prev = s.value;
        }
    }

    #[test]
    fn psd_check_is_permutation_invariant(pts in euclid_points(2, 3..12), seed in 0u64..1000) {
        let g = gram(&CndKernel::euclidean_squared(), &pts).unwrap().map("gauss", |v| (-v).exp());
        let n = pts.len();
        let order = bernergy::stats::seeded_permutation(n, seed, 0);
        let a = check_psd(&g, SPECTRAL_TOL).unwrap();
        let b = check_psd(&g.permuted(&order), SPECTRAL_TOL).unwrap();
        prop_assert_eq!(a.pass, b.pass);
        prop_assert!((a.worst_margin - b.worst_margin).abs() <= 1e-12);
    }

    #[test]
    fn negative_squared_distance_is_cpd(pts in euclid_points(3, 2..20)) {
        let g = gram(&CndKernel::euclidean_squared(), &pts).unwrap().map("-d2", |v| -v);
        let report = check_cpd(&g, &[vec![1.0; pts.len()]], SPECTRAL_TOL).unwrap();
        prop_assert!(report.pass, "{:?}", report);
    }

    #[test]
    fn schoenberg_bridge_holds_jointly(pts in euclid_points(2, 2..15)) {
        let k = CndKernel::euclidean_squared();
        let g = gram(&k, &pts).unwrap().map("-d2", |v| -v);
        let cpd = check_cpd(&g, &[vec![1.0; pts.len()]], SPECTRAL_TOL).unwrap().pass;
        let psd = check_schoenberg(&k, &pts, &[0.1, 1.0, 10.0], SPECTRAL_TOL).unwrap().pass;
        prop_assert!(cpd && psd);
    }

    #[test]
    fn representation_agrees_with_closed_form(e in -3.0..3.0f64, pick in 0usize..5) {
        let names = ["sqrt", "pow:0.5", "pow:1.5", "pow:3", "log1p"];
        let psi = PsiFunction::parse(names[pick]).unwrap();
        let t = 10f64.powf(e);
        let closed = psi.eval(t).unwrap();
        let tol = (1e-7 * closed.abs()).max(1e-9);
        let rep = eval_by_representation(&psi, t, tol).unwrap();
        prop_assert!((rep - closed).abs() <= (1e-6 * closed.abs()).max(1e-8));
    }

    #[test]
    fn mean_cancel_gives_balanced_mean_zero(
        pts in euclid_points(2, 1..6),
        w in prop::collection::vec(-3.0..3.0f64, 6),
        t in 0.01..10.0f64,
    ) {
        let n = pts.len();
        let mu = DiscreteSignedMeasure::new(pts, w[..n].to_vec()).unwrap();
        let eta = mean_cancel_augment(&mu, t).unwrap();
        let scale = t * mu.total_variation() * (1.0 + mu.max_norm());
        prop_assert!(eta.mass().abs() <= 1e-13 * scale);
        for m in eta.vector_mean().unwrap() {
            prop_assert!(m.abs() <= 1e-13 * scale * (1.0 + t * mu.max_norm()));
        }
    }

    #[test]
    fn statistic_is_relabeling_and_rigid_motion_invariant(
        xs in euclid_points(2, 2..8),
        ys in euclid_points(2, 2..8),
        angle in 0.0..6.3f64,
        shift in prop::collection::vec(coord(), 2),
        seed in 0u64..100,
    ) {
        let k = CndKernel::euclidean_squared();
        let sqrt = PsiFunction::sqrt();
        let base = energy_statistic(&SampleSet::new(xs.clone(), "x").unwrap(), &SampleSet::new(ys.clone(), "y").unwrap(), &k, &sqrt).unwrap();

        let order = bernergy::stats::seeded_permutation(xs.len(), seed, 1);
        let shuffled: Vec<Point> = order.iter().map(|&i| xs[i].clone()).collect();
        let relabeled = energy_statistic(&SampleSet::new(shuffled, "x").unwrap(), &SampleSet::new(ys.clone(), "y").unwrap(), &k, &sqrt).unwrap();
        prop_assert!((base - relabeled).abs() <= 1e-12 * (1.0 + base.abs()));

        let (c, s) = (angle.cos(), angle.sin());
        let motion = |p: &Point| {
            let v = p.coords();
            Point::euclidean(vec![c * v[0] - s * v[1] + shift[0], s * v[0] + c * v[1] + shift[1]]).unwrap()
        };
        let moved = energy_statistic(
            &SampleSet::new(xs.iter().map(motion).collect(), "x").unwrap(),
            &SampleSet::new(ys.iter().map(motion).collect(), "y").unwrap(),
            &k,
            &sqrt,
        ).unwrap();
        prop_assert!((base - moved).abs() <= 1e-10 * (1.0 + base.abs()));
    }
}

fn bilinear_check(kernel: &CndKernel, space: Space, psi: &PsiFunction, constraint: MomentConstraint, seed: u64) {
    let mut rng = stream_rng(seed, 0);
    let dim = 2;
    // measures on a shared atom set so that linear combinations stay in the constraint set
    let base = random_measure(&mut rng, space, dim, constraint).unwrap();
    let atoms = base.atoms().to_vec();
    let rows = bernergy::sampling::constraint_rows(&atoms, constraint).unwrap();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let raw: Vec<f64> = (0..atoms.len()).map(|_| bernergy::sampling::standard_normal(rng)).collect();
        DiscreteSignedMeasure::new(atoms.clone(), bernergy::sampling::project_onto_null_space(&rows, &raw)).unwrap()
    };
    let (mu, mu2, nu) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
    let (a, b) = (0.7, -1.9);
    let combo = DiscreteSignedMeasure::new(
        atoms.clone(),
        mu.weights().iter().zip(mu2.weights()).map(|(x, y)| a * x + b * y).collect(),
    )
    .unwrap();
    let i = |m: &DiscreteSignedMeasure, n: &DiscreteSignedMeasure| inner_product_ell(m, n, kernel, psi, CONSTRAINT_TOL).unwrap();
    let lhs = i(&combo, &nu);
    let rhs = a * i(&mu, &nu) + b * i(&mu2, &nu);
    let scale = i(&mu, &mu).abs().max(i(&nu, &nu).abs()) + lhs.abs();
    assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300) * 10.0, "{lhs} vs {rhs}");
    assert!((i(&mu, &nu) - i(&nu, &mu)).abs() <= 1e-12 * scale);
}

#[test]
fn inner_products_are_bilinear_and_symmetric() {
    for seed in 0..20 {
        bilinear_check(&CndKernel::euclidean_squared(), Space::Euclidean, &PsiFunction::sqrt(), MomentConstraint::Mass, seed);
        bilinear_check(&CndKernel::Hyperbolic, Space::Hyperboloid, &PsiFunction::log1p(), MomentConstraint::Mass, seed);
        bilinear_check(
            &CndKernel::euclidean_squared(),
            Space::Euclidean,
            &PsiFunction::pow(3.0).unwrap(),
            MomentConstraint::Moments(1),
            seed,
        );
    }
}

#[test]
fn level_one_positivity_on_random_balanced_measures() {
    let k = CndKernel::euclidean_squared();
    let fns = [PsiFunction::sqrt(), PsiFunction::pow(0.7).unwrap(), PsiFunction::log1p()];
    for trial in 0..1000u64 {
        let mut rng = stream_rng(42, trial);
        let dim = 1 + (trial % 5) as usize;
        let eta = random_measure(&mut rng, Space::Euclidean, dim, MomentConstraint::Mass).unwrap();
        for psi in &fns {
            let v = inner_product_ell(&eta, &eta, &k, psi, CONSTRAINT_TOL).unwrap();
            assert!(v > 0.0, "trial {trial} {}: {v}", psi.name());
        }
    }
}

#[test]
fn level_two_positivity_on_random_mean_zero_measures() {
    let k = CndKernel::euclidean_squared();
    let p3 = PsiFunction::pow(3.0).unwrap();
    for trial in 0..1000u64 {
        let mut rng = stream_rng(43, trial);
        let dim = 1 + (trial % 5) as usize;
        let eta = random_measure(&mut rng, Space::Euclidean, dim, MomentConstraint::Moments(1)).unwrap();
        assert!(inner_product_ell(&eta, &eta, &k, &p3, CONSTRAINT_TOL).unwrap() > 0.0, "trial {trial}");
    }
}

#[test]
fn linear_psi_vanishes_on_mean_zero_measures() {
    let k = CndKernel::euclidean_squared();
    let lin = PsiFunction::linear();
    for trial in 0..100u64 {
        let mut rng = stream_rng(44, trial);
        let eta = random_measure(&mut rng, Space::Euclidean, 3, MomentConstraint::Moments(1)).unwrap();
        let v = pairing(&eta, &eta, &k, &lin).unwrap();
        let scale = eta.total_variation().powi(2) * (2.0 * eta.max_norm()).powi(2);
        assert!(v.abs() <= 1e-10 * scale);
    }
}

#[test]
fn shifted_kernels_keep_positivity() {
    let fns = [PsiFunction::sqrt(), PsiFunction::log1p(), PsiFunction::pow(0.7).unwrap()];
    for shift in [0.0, 0.5, 1.0, 2.0] {
        let k = CndKernel::EuclideanSquared { shift };
        for trial in 0..200u64 {
            let mut rng = stream_rng(45, trial);
            let eta = random_measure(&mut rng, Space::Euclidean, 2, MomentConstraint::Mass).unwrap();
            for psi in &fns {
                assert!(pairing(&eta, &eta, &k, psi).unwrap() > 0.0, "shift {shift} trial {trial}");
            }
        }
    }
}

#[test]
fn centered_identity_on_random_balanced_measures() {
    for trial in 0..100u64 {
        let mut rng = stream_rng(46, trial);
        let (kernel, space) = match trial % 3 {
            0 => (CndKernel::EuclideanSquared { shift: 1.5 }, Space::Euclidean),
            1 => (CndKernel::Hyperbolic, Space::Hyperboloid),
            _ => (CndKernel::SphereGeodesic, Space::Sphere),
        };
        let eta = random_measure(&mut rng, space, 3, MomentConstraint::Mass).unwrap();
        let c = CenteredKernel::at_base_point(kernel, 3).unwrap();
        let (lhs, rhs) = energy_equals_centered_mmd(&eta, &c).unwrap();
        let g = gram(&kernel, eta.atoms()).unwrap();
        let scale = eta.total_variation().powi(2) * g.max_abs().max(1.0);
        assert!((lhs - rhs).abs() <= 1e-12 * scale * 10.0, "{lhs} {rhs}");
    }
}

#[test]
fn even_power_identity_on_random_measures() {
    for trial in 0..100u64 {
        let mut rng = stream_rng(47, trial);
        let dim = 1 + (trial % 4) as usize;
        let eta = random_measure(&mut rng, Space::Euclidean, dim, MomentConstraint::Moments(1)).unwrap();
        let id = even_power_identity(&eta, 2).unwrap();
        assert!((id.lhs - id.rhs).abs() <= 1e-10 * id.scale);
        assert!(id.lhs >= -1e-10 * id.scale);
        for v in &id.lower_powers {
            assert!(v.abs() <= 1e-10 * id.scale);
        }
    }
}

#[test]
fn difference_of_equal_measures_has_zero_energy() {
    let mut rng = stream_rng(48, 0);
    let pts = random_points(&mut rng, Space::Euclidean, 2, 5).unwrap();
    let p = DiscreteSignedMeasure::empirical(pts).unwrap();
    let eta = difference(&p, &p).unwrap();
    assert!(eta.mass().abs() < 1e-15);
    let v = inner_product_ell(&eta, &eta, &CndKernel::euclidean_squared(), &PsiFunction::sqrt(), CONSTRAINT_TOL).unwrap();
    assert!(v.abs() < 1e-14);
}
