//! Finite-state models, stationary measures and the `L²(μ*)` geometry.
//!
//! Generators and kernels are stored densely. Stationary measures keep their
//! weights in log form as the source of truth so that chains whose
//! stationary law spans hundreds of orders of magnitude (long birth-death
//! truncations) still have well-defined weight ratios.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Result, UqError};
use crate::scalar::{log_sum_exp, Scalar};

/// Row-sum tolerance for generators (relative to the row's total rate).
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Residual tolerance for `μ*Q = 0` / `μ*P = μ*`.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Self-adjointness tolerance used when checking reversibility.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

fn fnv1a(tag: u8, n: usize, entries: impl Iterator<Item = f64>) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    };
    eat(tag);
    for b in (n as u64).to_le_bytes() {
        eat(b);
    }
    for x in entries {
        for b in x.to_bits().to_le_bytes() {
            eat(b);
        }
    }
    h
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn check_square<T: Scalar>(states: &[String], m: &DMatrix<T>) -> Result<usize> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(UqError::InvalidModel(format!(
            "matrix is {}x{}, expected square",
            n,
            m.ncols()
        )));
    }
    if n < 2 {
        return Err(UqError::InvalidModel("at least two states required".into()));
    }
    if states.len() != n {
        return Err(UqError::DimensionMismatch {
            expected: n,
            got: states.len(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(UqError::InvalidModel("non-finite matrix entry".into()));
    }
    Ok(n)
}

/// Common view of generators and kernels: off-diagonal transition weights.
pub trait ChainModel<T: Scalar> {
    fn dim(&self) -> usize;
    /// Off-diagonal weight `i -> j` (rate for generators, probability for kernels).
    fn off_diagonal(&self, i: usize, j: usize) -> T;
    fn fingerprint(&self) -> u64;
    /// `‖μQ‖∞` for generators, `‖μP − μ‖∞` for kernels.
    fn stationarity_residual(&self, weights: &[T]) -> T;
    /// Scale used to make the stationarity residual check relative.
    fn rate_scale(&self) -> T;
}

/// Continuous-time generator `Q`: nonnegative off-diagonal rates, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix<T: Scalar> {
    states: Vec<String>,
    q: DMatrix<T>,
    fingerprint: u64,
}

impl<T: Scalar> GeneratorMatrix<T> {
    pub fn new(states: Vec<String>, q: DMatrix<T>) -> Result<Self> {
        let n = check_square(&states, &q)?;
        let tol = T::tol(ROW_SUM_TOL);
        for i in 0..n {
            let mut sum = T::zero();
            let mut scale = T::zero();
            for j in 0..n {
                let x = q[(i, j)];
                if i != j && x < T::zero() {
                    return Err(UqError::InvalidModel(format!(
                        "negative off-diagonal rate at ({i}, {j})"
                    )));
                }
                sum += x;
                scale += x.abs();
            }
            if sum.abs() > tol * scale.max(T::one()) {
                return Err(UqError::InvalidModel(format!(
                    "row {i} sums to {sum}, expected 0"
                )));
            }
        }
        let fingerprint = fnv1a(b'Q', n, q.iter().map(|x| x.as_f64()));
        Ok(Self {
            states,
            q,
            fingerprint,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(UqError::InvalidModel("ragged matrix".into()));
        }
        let q = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(default_labels(n), q)
    }

    /// Builds a generator from off-diagonal rates, filling the diagonal.
    pub fn from_off_diagonal(states: Vec<String>, mut q: DMatrix<T>) -> Result<Self> {
        let n = q.nrows();
        for i in 0..n.min(q.ncols()) {
            q[(i, i)] = T::zero();
            let s = q.row(i).iter().fold(T::zero(), |a, &b| a + b);
            q[(i, i)] = -s;
        }
        Self::new(states, q)
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Total jump rate out of `i`.
    pub fn exit_rate(&self, i: usize) -> T {
        -self.q[(i, i)]
    }

    /// `Q·g`.
    pub fn apply(&self, g: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).fold(T::zero(), |a, j| a + self.q[(i, j)] * g[j]))
            .collect()
    }

    /// Largest detailed-balance defect `|μ_i Q_ij − μ_j Q_ji|`, measured as
    /// `|Q_ij − (μ_j/μ_i) Q_ji|` so it stays meaningful for tiny weights.
    pub fn reversibility_residual(&self, mu: &StationaryMeasure<T>) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                let a = self.q[(i, j)];
                let b = self.q[(j, i)];
                if a == T::zero() && b == T::zero() {
                    continue;
                }
                let d = (a - mu.ratio(j, i) * b).abs() / a.max(b).max(T::one());
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn is_reversible(&self, mu: &StationaryMeasure<T>) -> bool {
        self.reversibility_residual(mu) <= T::tol(REVERSIBILITY_TOL)
    }
}

impl<T: Scalar> ChainModel<T> for GeneratorMatrix<T> {
    fn dim(&self) -> usize {
        self.q.nrows()
    }
    fn off_diagonal(&self, i: usize, j: usize) -> T {
        self.q[(i, j)]
    }
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    fn stationarity_residual(&self, w: &[T]) -> T {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).fold(T::zero(), |a, i| a + w[i] * self.q[(i, j)]).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
    fn rate_scale(&self) -> T {
        (0..self.dim())
            .map(|i| self.exit_rate(i))
            .fold(T::one(), |a, b| a.max(b))
    }
}

/// Discrete-time row-stochastic kernel `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel<T: Scalar> {
    states: Vec<String>,
    p: DMatrix<T>,
    fingerprint: u64,
}

impl<T: Scalar> TransitionKernel<T> {
    pub fn new(states: Vec<String>, p: DMatrix<T>) -> Result<Self> {
        let n = check_square(&states, &p)?;
        let tol = T::tol(ROW_SUM_TOL);
        for i in 0..n {
            let mut sum = T::zero();
            for j in 0..n {
                let x = p[(i, j)];
                if x < T::zero() || x > T::one() {
                    return Err(UqError::InvalidModel(format!(
                        "entry ({i}, {j}) = {x} is not a probability"
                    )));
                }
                sum += x;
            }
            if (sum - T::one()).abs() > tol {
                return Err(UqError::InvalidModel(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        let fingerprint = fnv1a(b'P', n, p.iter().map(|x| x.as_f64()));
        Ok(Self {
            states,
            p,
            fingerprint,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(UqError::InvalidModel("ragged matrix".into()));
        }
        let p = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(default_labels(n), p)
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.p
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.p.row(i).iter().copied().collect()
    }
}

impl<T: Scalar> ChainModel<T> for TransitionKernel<T> {
    fn dim(&self) -> usize {
        self.p.nrows()
    }
    fn off_diagonal(&self, i: usize, j: usize) -> T {
        self.p[(i, j)]
    }
    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    fn stationarity_residual(&self, w: &[T]) -> T {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let s = (0..n).fold(T::zero(), |a, i| a + w[i] * self.p[(i, j)]);
                (s - w[j]).abs()
            })
            .fold(T::zero(), |a, b| a.max(b))
    }
    fn rate_scale(&self) -> T {
        T::one()
    }
}

/// Strictly positive probability vector tied to the model it stabilizes.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMeasure<T: Scalar> {
    log_weights: Vec<T>,
    weights: Vec<T>,
    fingerprint: u64,
}

impl<T: Scalar> StationaryMeasure<T> {
    /// Normalizes unnormalized log-weights. Every entry must be finite.
    pub fn from_log_weights(log_w: Vec<T>, fingerprint: u64) -> Result<Self> {
        if let Some(i) = log_w.iter().position(|x| !x.is_finite()) {
            return Err(UqError::NonPositive { state: i });
        }
        let z = log_sum_exp(log_w.iter().copied());
        let log_weights: Vec<T> = log_w.into_iter().map(|x| x - z).collect();
        let weights = log_weights.iter().map(|x| x.exp()).collect();
        Ok(Self {
            log_weights,
            weights,
            fingerprint,
        })
    }

    /// From a probability vector. Entries must be strictly positive.
    pub fn from_weights(w: &[T], fingerprint: u64) -> Result<Self> {
        if let Some(i) = w.iter().position(|&x| !(x > T::zero())) {
            return Err(UqError::NonPositive { state: i });
        }
        Self::from_log_weights(w.iter().map(|x| x.ln()).collect(), fingerprint)
    }

    /// Re-attaches this measure to `model` after checking it is stationary there.
    pub fn rebind<M: ChainModel<T>>(&self, model: &M) -> Result<Self> {
        if model.dim() != self.len() {
            return Err(UqError::DimensionMismatch {
                expected: model.dim(),
                got: self.len(),
            });
        }
        let r = model.stationarity_residual(&self.weights);
        if r > T::tol(STATIONARY_TOL) * model.rate_scale() {
            return Err(UqError::NotInvariant(r.as_f64()));
        }
        Ok(Self {
            fingerprint: model.fingerprint(),
            ..self.clone()
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[T] {
        &self.log_weights
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `μ_i / μ_j`, exact even when both weights underflow.
    #[inline]
    pub fn ratio(&self, i: usize, j: usize) -> T {
        (self.log_weights[i] - self.log_weights[j]).exp()
    }

    pub fn check_matches<M: ChainModel<T>>(&self, model: &M) -> Result<()> {
        if self.fingerprint != model.fingerprint() {
            return Err(UqError::MeasureMismatch);
        }
        Ok(())
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(UqError::DimensionMismatch {
                expected: self.len(),
                got: n,
            });
        }
        Ok(())
    }

    /// `μ[f]`.
    pub fn mean(&self, f: &[T]) -> T {
        self.weights
            .iter()
            .zip(f)
            .fold(T::zero(), |a, (&w, &x)| a + w * x)
    }

    /// `Var_μ[f]`.
    pub fn variance(&self, f: &[T]) -> T {
        let m = self.mean(f);
        self.weights
            .iter()
            .zip(f)
            .fold(T::zero(), |a, (&w, &x)| a + w * (x - m) * (x - m))
    }
}

/// Stationary measure of an irreducible chain.
///
/// Uses the Grassmann–Taksar–Heyman state reduction, which only adds and
/// multiplies nonnegative numbers, followed by a log-domain back
/// substitution. Every weight therefore carries full relative accuracy.
pub fn invariant_measure<T: Scalar, M: ChainModel<T>>(model: &M) -> Result<StationaryMeasure<T>> {
    let n = model.dim();
    let closed = closed_classes(model);
    if closed.len() > 1 {
        return Err(UqError::Reducible {
            closed_classes: closed.len(),
        });
    }
    if let Some(c) = closed.first() {
        if c.len() < n {
            let state = (0..n).find(|i| c.binary_search(i).is_err()).unwrap_or(0);
            return Err(UqError::NonPositive { state });
        }
    }

    let mut a = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[i * n + j] = model.off_diagonal(i, j);
            }
        }
    }
    let mut nz: Vec<usize> = Vec::with_capacity(n);
    for k in (1..n).rev() {
        nz.clear();
        let mut s = T::zero();
        for j in 0..k {
            let x = a[k * n + j];
            if x > T::zero() {
                s += x;
                nz.push(j);
            }
        }
        if s == T::zero() {
            // unreachable for irreducible chains
            return Err(UqError::Reducible { closed_classes: 0 });
        }
        for i in 0..k {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            let aik = aik / s;
            a[i * n + k] = aik;
            for &j in &nz {
                if j != i {
                    let akj = a[k * n + j];
                    a[i * n + j] += aik * akj;
                }
            }
        }
    }
    let mut log_x = vec![T::NEG_INFINITY; n];
    log_x[0] = T::zero();
    for k in 1..n {
        let terms: Vec<T> = (0..k)
            .filter(|&i| a[i * n + k] > T::zero() && log_x[i].is_finite())
            .map(|i| log_x[i] + a[i * n + k].ln())
            .collect();
        log_x[k] = log_sum_exp(terms.iter().copied());
    }
    if let Some(state) = log_x.iter().position(|x| !x.is_finite()) {
        return Err(UqError::NonPositive { state });
    }
    let mu = StationaryMeasure::from_log_weights(log_x, model.fingerprint())?;
    let r = model.stationarity_residual(mu.weights());
    if r > T::tol(STATIONARY_TOL) * model.rate_scale() {
        return Err(UqError::NotInvariant(r.as_f64()));
    }
    Ok(mu)
}

/// Closed communicating classes of the transition graph (Kosaraju).
pub fn closed_classes<T: Scalar, M: ChainModel<T>>(model: &M) -> Vec<Vec<usize>> {
    let n = model.dim();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && model.off_diagonal(i, j) > T::zero())
                .collect()
        })
        .collect();
    let mut radj = vec![Vec::new(); n];
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            radj[j].push(i);
        }
    }
    // first pass: finishing order
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        if visited[s] {
            continue;
        }
        visited[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some(&mut (v, ref mut idx)) = stack.last_mut() {
            if *idx < adj[v].len() {
                let w = adj[v][*idx];
                *idx += 1;
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    // second pass on the reversed graph
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0;
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = ncomp;
        while let Some(v) = stack.pop() {
            for &w in &radj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = ncomp;
                    stack.push(w);
                }
            }
        }
        ncomp += 1;
    }
    let mut leaves = vec![true; ncomp];
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            if comp[i] != comp[j] {
                leaves[comp[i]] = false;
            }
        }
    }
    (0..ncomp)
        .filter(|&c| leaves[c])
        .map(|c| (0..n).filter(|&i| comp[i] == c).collect())
        .collect()
}

/// Additive symmetrization `(A + A*)/2` in `L²(μ*)`, with
/// `A*_{ij} = μ_j A_{ji} / μ_i`.
pub fn symmetrize<T: Scalar>(
    a: &GeneratorMatrix<T>,
    mu: &StationaryMeasure<T>,
) -> Result<GeneratorMatrix<T>> {
    mu.check_matches(a)?;
    let n = a.dim();
    let q = a.matrix();
    let half = T::lit(0.5);
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = if i == j {
                q[(i, i)]
            } else {
                half * (q[(i, j)] + mu.ratio(j, i) * q[(j, i)])
            };
        }
    }
    // the diagonal of A* equals that of A; re-close rows against rounding
    GeneratorMatrix::from_off_diagonal(a.states().to_vec(), s)
}

/// `D^{1/2} (A_s + diag V) D^{-1/2}` with `D = diag μ*`: a plainly symmetric
/// matrix with the same spectrum as the self-adjoint part of `A + V`.
pub fn symmetric_form<T: Scalar>(
    a: &GeneratorMatrix<T>,
    mu: &StationaryMeasure<T>,
    potential: Option<&[T]>,
) -> Result<DMatrix<T>> {
    mu.check_matches(a)?;
    let n = a.dim();
    if let Some(v) = potential {
        if v.len() != n {
            return Err(UqError::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let q = a.matrix();
    let half = T::lit(0.5);
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = q[(i, i)] + potential.map_or(T::zero(), |v| v[i]);
        for j in (i + 1)..n {
            let (qij, qji) = (q[(i, j)], q[(j, i)]);
            if qij == T::zero() && qji == T::zero() {
                continue;
            }
            let r = mu.ratio(i, j).sqrt();
            let x = half * (qij * r + qji / r);
            s[(i, j)] = x;
            s[(j, i)] = x;
        }
    }
    Ok(s)
}

/// Observable with its centered form under a stationary measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable<T: Scalar> {
    values: Vec<T>,
    centered: Vec<T>,
    mean: T,
    pos_sup: T,
    neg_sup: T,
}

impl<T: Scalar> Observable<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }
    /// `f − μ*[f]`.
    pub fn centered(&self) -> &[T] {
        &self.centered
    }
    pub fn mean(&self) -> T {
        self.mean
    }
    /// `‖(f − μ*[f])⁺‖∞`.
    pub fn pos_sup(&self) -> T {
        self.pos_sup
    }
    /// `‖(f − μ*[f])⁻‖∞`.
    pub fn neg_sup(&self) -> T {
        self.neg_sup
    }
    /// Sup-norm of the positive (`+1`) or negative (`-1`) part.
    pub fn sup_part(&self, sign: Sign) -> T {
        match sign {
            Sign::Plus => self.pos_sup,
            Sign::Minus => self.neg_sup,
        }
    }
    pub fn is_constant(&self) -> bool {
        self.pos_sup == T::zero() && self.neg_sup == T::zero()
    }
}

/// Direction of a one-sided bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor<T: Scalar>(self) -> T {
        match self {
            Sign::Plus => T::one(),
            Sign::Minus => -T::one(),
        }
    }
}

pub fn center_observable<T: Scalar>(f: &[T], mu: &StationaryMeasure<T>) -> Result<Observable<T>> {
    mu.check_len(f.len())?;
    if f.iter().any(|x| !x.is_finite()) {
        return Err(UqError::InvalidModel("observable has non-finite values".into()));
    }
    let mean = mu.mean(f);
    let centered: Vec<T> = f.iter().map(|&x| x - mean).collect();
    let pos_sup = centered.iter().fold(T::zero(), |a, &b| a.max(b));
    let neg_sup = centered.iter().fold(T::zero(), |a, &b| a.max(-b));
    Ok(Observable {
        values: f.to_vec(),
        centered,
        mean,
        pos_sup,
        neg_sup,
    })
}

/// `⟨g, h⟩_{L²(μ)} = Σ μ_i g_i h_i`.
pub fn weighted_inner<T: Scalar>(g: &[T], h: &[T], mu: &StationaryMeasure<T>) -> Result<T> {
    mu.check_len(g.len())?;
    mu.check_len(h.len())?;
    Ok(mu
        .weights()
        .iter()
        .zip(g.iter().zip(h))
        .fold(T::zero(), |a, (&w, (&x, &y))| a + w * x * y))
}

/// A finite-state model as read from JSON or the zoo.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T: Scalar> {
    Ctmc(GeneratorMatrix<T>),
    Dtmc(TransitionKernel<T>),
}

impl<T: Scalar> Model<T> {
    pub fn dim(&self) -> usize {
        match self {
            Model::Ctmc(q) => q.dim(),
            Model::Dtmc(p) => p.dim(),
        }
    }

    pub fn states(&self) -> &[String] {
        match self {
            Model::Ctmc(q) => q.states(),
            Model::Dtmc(p) => p.states(),
        }
    }

    /// Continuous-time generator: `Q` itself, or `P − I` for kernels.
    pub fn generator(&self) -> GeneratorMatrix<T> {
        match self {
            Model::Ctmc(q) => q.clone(),
            Model::Dtmc(p) => crate::simulate::uniformize(p, T::one()),
        }
    }

    /// Generator together with its stationary measure bound to it.
    pub fn generator_and_measure(&self) -> Result<(GeneratorMatrix<T>, StationaryMeasure<T>)> {
        let q = self.generator();
        let mu = self.invariant_measure()?.rebind(&q)?;
        Ok((q, mu))
    }

    pub fn invariant_measure(&self) -> Result<StationaryMeasure<T>> {
        match self {
            Model::Ctmc(q) => invariant_measure(q),
            Model::Dtmc(p) => invariant_measure(p),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Ctmc(_) => "ctmc",
            Model::Dtmc(_) => "dtmc",
        }
    }

    /// JSON document in the model schema.
    pub fn to_json(&self) -> serde_json::Value {
        let m = match self {
            Model::Ctmc(q) => q.matrix(),
            Model::Dtmc(p) => p.matrix(),
        };
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect())
            .collect();
        serde_json::json!({"kind": self.kind(), "states": self.states(), "matrix": rows})
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    kind: String,
    states: Vec<serde_json::Value>,
    matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableDoc {
    values: Vec<f64>,
}

fn label(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses `{"kind": "ctmc"|"dtmc", "states": [...], "matrix": [[...]]}`.
pub fn parse_model<T: Scalar>(text: &str) -> Result<Model<T>> {
    let doc: ModelDoc = serde_json::from_str(text)
        .map_err(|e| UqError::InvalidModel(format!("malformed model JSON: {e}")))?;
    let n = doc.matrix.len();
    if doc.matrix.iter().any(|r| r.len() != n) {
        return Err(UqError::InvalidModel("matrix rows must have equal length".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| T::lit(doc.matrix[i][j]));
    let states = doc.states.iter().map(label).collect();
    match doc.kind.as_str() {
        "ctmc" => Ok(Model::Ctmc(GeneratorMatrix::new(states, m)?)),
        "dtmc" => Ok(Model::Dtmc(TransitionKernel::new(states, m)?)),
        k => Err(UqError::InvalidModel(format!(
            "unknown kind \"{k}\", expected \"ctmc\" or \"dtmc\""
        ))),
    }
}

/// Parses `{"values": [...]}`.
pub fn parse_observable<T: Scalar>(text: &str) -> Result<Vec<T>> {
    let doc: ObservableDoc = serde_json::from_str(text)
        .map_err(|e| UqError::InvalidModel(format!("malformed observable JSON: {e}")))?;
    Ok(doc.values.into_iter().map(T::lit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> GeneratorMatrix<f64> {
        GeneratorMatrix::from_rows(&[vec![-a, a], vec![b, -b]]).unwrap()
    }

    #[test]
    fn symmetric_two_state_is_uniform() {
        let q = two_state(1.0, 1.0);
        let mu = invariant_measure(&q).unwrap();
        assert!((mu.weights()[0] - 0.5).abs() < 1e-15);
        assert!((mu.weights()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_two_state() {
        // oracle: direct 2x2 solve of μQ = 0 with Σμ = 1 gives (b, a)/(a+b)
        let q = two_state(2.0, 1.0);
        let mu = invariant_measure(&q).unwrap();
        assert!((mu.weights()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((mu.weights()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -0.5]]).is_err());
        assert!(GeneratorMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, -1.0]]).is_err());
        assert!(GeneratorMatrix::from_rows(&[vec![0.0]]).is_err());
        assert!(TransitionKernel::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn reducible_chain_is_reported() {
        let q = GeneratorMatrix::from_rows(&[
            vec![-1.0, 1.0, 0.0, 0.0],
            vec![1.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, -2.0, 2.0],
            vec![0.0, 0.0, 3.0, -3.0],
        ])
        .unwrap();
        assert_eq!(
            invariant_measure(&q),
            Err(UqError::Reducible { closed_classes: 2 })
        );
    }

    #[test]
    fn transient_state_is_non_positive() {
        let q = GeneratorMatrix::from_rows(&[
            vec![-1.0, 1.0, 0.0],
            vec![0.0, -1.0, 1.0],
            vec![0.0, 1.0, -1.0],
        ])
        .unwrap();
        assert_eq!(invariant_measure(&q), Err(UqError::NonPositive { state: 0 }));
    }

    #[test]
    fn kernel_measure() {
        let p = TransitionKernel::from_rows(&[vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let mu = invariant_measure(&p).unwrap();
        assert!((mu.weights()[0] - 5.0f64 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_symmetric_part() {
        // cyclic rates 1 (i -> i+1), uniform measure: A* is the reverse rotation
        let q = GeneratorMatrix::from_rows(&[
            vec![-1.0, 1.0, 0.0],
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
        ])
        .unwrap();
        let mu = invariant_measure(&q).unwrap();
        let s = symmetrize(&q, &mu).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want: f64 = if i == j { -1.0 } else { 0.5 };
                assert!((s.matrix()[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetrize_rejects_foreign_measure() {
        let q = two_state(1.0, 1.0);
        let other = two_state(2.0, 1.0);
        let mu = invariant_measure(&other).unwrap();
        assert_eq!(symmetrize(&q, &mu), Err(UqError::MeasureMismatch));
    }

    #[test]
    fn centering() {
        let q = two_state(2.0, 1.0);
        let mu = invariant_measure(&q).unwrap();
        let f = center_observable(&[0.0, 1.0], &mu).unwrap();
        assert!((f.centered()[0] + 2.0 / 3.0).abs() < 1e-15);
        assert!((f.centered()[1] - 1.0 / 3.0).abs() < 1e-15);
        let c = center_observable(&[3.0, 3.0], &mu).unwrap();
        assert!(c.is_constant());
        assert!(center_observable(&[1.0], &mu).is_err());
    }

    #[test]
    fn inner_products() {
        let q = two_state(1.0, 1.0);
        let mu = invariant_measure(&q).unwrap();
        let g = [-0.5, 0.5];
        assert!((weighted_inner(&g, &g, &mu).unwrap() - 0.25).abs() < 1e-15);
        assert!((weighted_inner(&[1.0, 1.0], &[1.0, 1.0], &mu).unwrap() - 1.0).abs() < 1e-15);
        assert!(weighted_inner(&g, &[1.0], &mu).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"kind":"ctmc","states":["a","b"],"matrix":[[-1,1],[2,-2]]}"#;
        let m: Model<f64> = parse_model(text).unwrap();
        let back: Model<f64> = parse_model(&m.to_json().to_string()).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.states(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn malformed_json_mentions_line() {
        let err = parse_model::<f64>("{\"kind\": \"ctmc\",\n \"states\": [1,2],\n \"matrix\": [[-1, 1] [1, -1]]}")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }
}
