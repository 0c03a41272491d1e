#![allow(dead_code)]

use markov_uq::chain::{invariant_measure, GeneratorMatrix, StationaryMeasure};
use markov_uq::rng::{self, Rng};
use nalgebra::DMatrix;
use rand::Rng as _;

pub fn rng(seed: u64) -> Rng {
    rng::stream(seed, 0)
}

pub fn random_prob(r: &mut Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Connected reversible generator: a random spanning path plus extra edges,
/// symmetric conductances `c_ij` and rates `q_ij = c_ij / μ_i`.
pub fn random_reversible(r: &mut Rng, n: usize) -> (GeneratorMatrix<f64>, StationaryMeasure<f64>) {
    let mu = random_prob(r, n);
    let mut q = DMatrix::zeros(n, n);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, r.random_range(0..=i));
    }
    let mut add = |i: usize, j: usize, c: f64| {
        q[(i, j)] = c / mu[i];
        q[(j, i)] = c / mu[j];
    };
    for w in perm.windows(2) {
        add(w[0], w[1], r.random_range(0.05..1.0));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random_bool(0.3) {
                add(i, j, r.random_range(0.05..1.0));
            }
        }
    }
    let states = (0..n).map(|i| i.to_string()).collect();
    let g = GeneratorMatrix::from_off_diagonal(states, q).unwrap();
    let m = invariant_measure(&g).unwrap();
    (g, m)
}

/// Arbitrary irreducible generator with all off-diagonal rates positive.
pub fn random_generator(r: &mut Rng, n: usize) -> GeneratorMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q[(i, j)] = r.random_range(0.1..2.0);
            }
        }
    }
    let states = (0..n).map(|i| i.to_string()).collect();
    GeneratorMatrix::from_off_diagonal(states, q).unwrap()
}

pub fn random_observable(r: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-2.0..2.0)).collect()
}
