mod common;

use common::{random_generator, random_observable, random_prob, random_reversible, rng};
use markov_uq::bound::{prepare_bound, BoundInputs, Method};
use markov_uq::chain::{center_observable, invariant_measure, GeneratorMatrix, TransitionKernel};
use markov_uq::divergence::relative_entropy;
use markov_uq::entropy::{ctmc_relent_rate, ctmc_relent_rate_generators, dtmc_relent_rate, em_relent_onestep_mc};
use markov_uq::simulate::perturb_generator;
use markov_uq::spectral::poincare_constant;
use markov_uq::{Generator32, Kernel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng as _;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn permute(q: &GeneratorMatrix<f64>, perm: &[usize]) -> GeneratorMatrix<f64> {
    let n = q.dim();
    let m = DMatrix::from_fn(n, n, |i, j| q.matrix()[(perm[i], perm[j])]);
    GeneratorMatrix::new(labels(n), m).unwrap()
}

fn random_kernel(r: &mut markov_uq::rng::Rng, n: usize) -> Kernel {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_prob(r, n)).collect();
    TransitionKernel::from_rows(&rows).unwrap()
}

/// Exit rates and jump kernel of a generator.
fn jump_parts(q: &GeneratorMatrix<f64>) -> (Vec<f64>, Kernel) {
    let n = q.dim();
    let lam: Vec<f64> = (0..n).map(|i| q.exit_rate(i)).collect();
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { q.matrix()[(i, j)] / lam[i] });
    (lam, TransitionKernel::new(labels(n), m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ctmc_rate_nonnegative(seed in any::<u64>(), n in 2usize..7, eps in 0.0f64..0.9) {
        let q = random_generator(&mut rng(seed), n);
        let qt = perturb_generator(&q, eps, seed ^ 1).unwrap();
        let mu_t = invariant_measure(&qt).unwrap();
        let e = ctmc_relent_rate_generators(&qt, &q, &mu_t).unwrap();
        prop_assert!(e.rate >= 0.0);
        prop_assert!(e.rate.is_finite());
    }

    #[test]
    fn jump_and_generator_forms_agree(seed in any::<u64>(), n in 2usize..7) {
        let q = random_generator(&mut rng(seed), n);
        let qt = perturb_generator(&q, 0.5, seed ^ 7).unwrap();
        let mu_t = invariant_measure(&qt).unwrap();
        let (lam_t, a_t) = jump_parts(&qt);
        let (lam, a) = jump_parts(&q);
        let jump = ctmc_relent_rate(&lam_t, &a_t, &lam, &a, &mu_t).unwrap().rate;
        let gen = ctmc_relent_rate_generators(&qt, &q, &mu_t).unwrap().rate;
        prop_assert!((jump - gen).abs() <= 1e-12 * (1.0 + gen), "{} vs {}", jump, gen);
    }

    #[test]
    fn ctmc_rate_is_permutation_invariant(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let q = random_generator(&mut r, n);
        let qt = perturb_generator(&q, 0.3, seed ^ 3).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let mu_t = invariant_measure(&qt).unwrap();
        let base = ctmc_relent_rate_generators(&qt, &q, &mu_t).unwrap().rate;
        let (pq, pqt) = (permute(&q, &perm), permute(&qt, &perm));
        let pmu = invariant_measure(&pqt).unwrap();
        let moved = ctmc_relent_rate_generators(&pqt, &pq, &pmu).unwrap().rate;
        prop_assert!((base - moved).abs() <= 1e-11 * (1.0 + base));
    }

    #[test]
    fn auto_never_looser_than_poincare(seed in any::<u64>(), n in 2usize..7, eta in 0.0f64..2.0) {
        let mut r = rng(seed);
        let (q, mu) = random_reversible(&mut r, n);
        let values = random_observable(&mut r, n);
        let f = center_observable(&values, &mu).unwrap();
        let inputs = BoundInputs { generator: &q, measure: &mu, observable: &f, constants: None, liapunov: None };
        let (ap, am) = prepare_bound(&inputs, Method::Auto).unwrap().xi(eta).unwrap();
        let (pp, pm) = prepare_bound(&inputs, Method::Poincare).unwrap().xi(eta).unwrap();
        prop_assert!(ap.value <= pp.value * (1.0 + 1e-12) + 1e-14);
        prop_assert!(am.value <= pm.value * (1.0 + 1e-12) + 1e-14);
    }
}

/// Relative entropy of path laws over `steps` steps, enumerated directly.
fn path_relent(pt: &Kernel, p: &Kernel, init_t: &[f64], init: &[f64], steps: usize) -> f64 {
    let n = pt.dim();
    let total = n.pow(steps as u32 + 1);
    let mut acc = 0.0;
    for code in 0..total {
        let mut c = code;
        let path: Vec<usize> = (0..=steps).map(|_| { let s = c % n; c /= n; s }).collect();
        let mut lt = init_t[path[0]].ln();
        let mut l = init[path[0]].ln();
        for w in path.windows(2) {
            lt += pt.matrix()[(w[0], w[1])].ln();
            l += p.matrix()[(w[0], w[1])].ln();
        }
        acc += lt.exp() * (lt - l);
    }
    acc
}

#[test]
fn dtmc_rate_matches_path_enumeration() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let p = random_kernel(&mut r, 3);
        let pt = random_kernel(&mut r, 3);
        let mu = invariant_measure(&p).unwrap();
        let mu_t = invariant_measure(&pt).unwrap();
        let e = dtmc_relent_rate(&pt, &p, &mu_t, Some(&mu)).unwrap();
        let steps = 4;
        let direct = path_relent(&pt, &p, mu_t.weights(), mu.weights(), steps);
        let formula = e.initial_term + steps as f64 * e.rate;
        assert!((direct - formula).abs() < 1e-12, "seed {seed}: {direct} vs {formula}");
        assert!((e.initial_term - relative_entropy(mu_t.weights(), mu.weights())).abs() < 1e-15);
    }
}

#[test]
fn mc_standard_error_scales_as_inverse_root_n() {
    let drift = |x: &[f64]| vec![-x[0] - x[0].powi(3)];
    let y = [0.7];
    let small = em_relent_onestep_mc(&drift, &y, 0.05, 4000, 1).unwrap();
    let large = em_relent_onestep_mc(&drift, &y, 0.05, 64_000, 1).unwrap();
    let ratio = small.std_error / large.std_error;
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    assert!((small.mean - large.mean).abs() < 4.0 * small.std_error);
}

#[test]
fn single_precision_pipeline() {
    let q = Generator32::from_rows(&[vec![-1.0f32, 1.0], vec![2.0, -2.0]]).unwrap();
    let mu = invariant_measure(&q).unwrap();
    assert!((mu.weights()[0] - 2.0 / 3.0).abs() < 1e-6);
    let c = poincare_constant(&q, &mu).unwrap();
    assert!((c.alpha - 1.0 / 3.0).abs() < 1e-5);
    let f = center_observable(&[0.0f32, 1.0], &mu).unwrap();
    let inputs = BoundInputs { generator: &q, measure: &mu, observable: &f, constants: None, liapunov: None };
    let (plus, _) = prepare_bound(&inputs, Method::Auto).unwrap().xi(0.01).unwrap();
    assert!(plus.value > 0.0 && plus.value.is_finite());
}
