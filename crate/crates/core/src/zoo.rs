//! Worked examples with known constants: the M/M/∞ queue, the lazy
//! hypercube walk, exclusion chains on graphs and Langevin diffusions.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::chain::{invariant_measure, GeneratorMatrix, Model, StationaryMeasure, TransitionKernel};
use crate::error::{Result, UqError};
use crate::rng::Rng;
use crate::scalar::{log_sum_exp, Scalar};
use crate::spectral::{hessian_constants, FunctionalConstants, HessianConvention, LiapunovData, Provenance};

/// Default truncation tail-mass tolerance for the M/M/∞ queue.
pub const MASS_TOL: f64 = 1e-12;
/// Largest hypercube dimension stored densely.
pub const HYPERCUBE_MAX_DIM: usize = 12;
/// Largest exclusion state space stored densely.
pub const EXCLUSION_MAX_STATES: usize = 5000;

/// Analytic constants of the M/M/∞ queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmInftyPack<T> {
    pub lam: T,
    pub rho: T,
    /// Poincaré constant `1/ρ`.
    pub alpha: T,
    /// Asymptotic variance `λ/ρ²` of the occupancy `f(n) = n`.
    pub sigma2_n: T,
}

impl<T: Scalar> MmInftyPack<T> {
    /// `Λ(c) = λc²/(ρ²(1 − c/ρ))` for `0 ≤ c < ρ`, `+∞` beyond.
    pub fn lambda_exact(&self, c: T) -> T {
        if c >= self.rho {
            return T::INFINITY;
        }
        self.lam * c * c / (self.rho * self.rho * (T::one() - c / self.rho))
    }
}

#[derive(Debug, Clone)]
pub struct MmInfty<T: Scalar> {
    pub generator: GeneratorMatrix<T>,
    pub measure: StationaryMeasure<T>,
    pub pack: MmInftyPack<T>,
}

impl<T: Scalar> MmInfty<T> {
    /// Occupancy observable `f(n) = n`.
    pub fn occupancy(&self) -> Vec<T> {
        (0..self.generator.dim()).map(T::from_usize_lossy).collect()
    }
}

/// Birth-death generator of the M/M/∞ queue on `{0, …, N}`, arrivals at
/// rate `λ`, each customer served at rate `ρ`; the birth rate at `N` is
/// zeroed so the truncation stays reversible with truncated-Poisson law.
pub fn mminfty_generator<T: Scalar>(lam: T, rho: T, n: usize, mass_tol: T) -> Result<MmInfty<T>> {
    if !(lam > T::zero()) || !(rho > T::zero()) {
        return Err(UqError::InvalidModel("arrival and service rates must be positive".into()));
    }
    if n < 1 {
        return Err(UqError::InvalidModel("truncation level must be at least 1".into()));
    }
    let ratio = lam / rho;
    let tail = poisson_log_tail(ratio, n).exp();
    if !(tail < mass_tol) {
        return Err(UqError::TruncationTooSmall {
            n,
            tail: tail.as_f64(),
            tol: mass_tol.as_f64(),
        });
    }
    let size = n + 1;
    let mut q = DMatrix::zeros(size, size);
    for k in 0..size {
        if k < n {
            q[(k, k + 1)] = lam;
        }
        if k > 0 {
            q[(k, k - 1)] = rho * T::from_usize_lossy(k);
        }
    }
    let states = (0..size).map(|k| k.to_string()).collect();
    let generator = GeneratorMatrix::from_off_diagonal(states, q)?;
    let measure = invariant_measure(&generator)?;
    Ok(MmInfty {
        generator,
        measure,
        pack: MmInftyPack {
            lam,
            rho,
            alpha: T::one() / rho,
            sigma2_n: lam / (rho * rho),
        },
    })
}

/// `log P(X > n)` for `X ~ Poisson(r)`.
fn poisson_log_tail<T: Scalar>(r: T, n: usize) -> T {
    let lr = r.ln();
    let mut log_fact = T::zero();
    for k in 1..=n {
        log_fact += T::from_usize_lossy(k).ln();
    }
    let mut terms = Vec::new();
    let mut k = n;
    loop {
        k += 1;
        log_fact += T::from_usize_lossy(k).ln();
        let t = T::from_usize_lossy(k) * lr - r - log_fact;
        terms.push(t);
        if k > n + 20 && T::from_usize_lossy(k) > r && t < terms[0] - T::lit(60.0) {
            break;
        }
        if k > n + 100_000 {
            break;
        }
    }
    log_sum_exp(terms.iter().copied())
}

/// Liapunov function `U(n) = κ̄ⁿ` for the truncated queue with
/// `φ(n) = ρn(1 − 1/κ̄) + δ` and `b = λ(κ̄ − 1) + δ`.
pub fn mminfty_liapunov<T: Scalar>(pack: &MmInftyPack<T>, n: usize, kbar: T, delta: T) -> Result<LiapunovData<T>> {
    if !(kbar > T::one()) || !(delta > T::zero()) {
        return Err(UqError::OutOfRange("need kbar > 1 and delta > 0".into()));
    }
    let lk = kbar.ln();
    let u = (0..=n).map(|k| (T::from_usize_lossy(k) * lk).exp()).collect();
    let phi = (0..=n)
        .map(|k| pack.rho * T::from_usize_lossy(k) * (T::one() - T::one() / kbar) + delta)
        .collect();
    LiapunovData::new(u, phi, pack.lam * (kbar - T::one()) + delta)
}

#[derive(Debug, Clone)]
pub struct Hypercube<T: Scalar> {
    pub kernel: TransitionKernel<T>,
    pub measure: StationaryMeasure<T>,
    /// Poincaré constant `d` of `P − I`.
    pub alpha: T,
}

/// Lazy walk on `{−1, 1}^d`: pick a coordinate, then set it to a uniform sign.
pub fn hypercube_kernel<T: Scalar>(d: usize) -> Result<Hypercube<T>> {
    if d == 0 {
        return Err(UqError::InvalidModel("hypercube dimension must be at least 1".into()));
    }
    if d > HYPERCUBE_MAX_DIM {
        return Err(UqError::DimensionTooLarge(d));
    }
    let n = 1usize << d;
    let flip = T::one() / (T::lit(2.0) * T::from_usize_lossy(d));
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        p[(x, x)] = T::lit(0.5);
        for i in 0..d {
            p[(x, x ^ (1 << i))] = flip;
        }
    }
    let states = (0..n)
        .map(|x| (0..d).map(|i| if x >> i & 1 == 1 { '+' } else { '-' }).collect())
        .collect();
    let kernel = TransitionKernel::new(states, p)?;
    let w = vec![T::one() / T::from_usize_lossy(n); n];
    let measure = StationaryMeasure::from_weights(&w, 0)?.rebind(&kernel)?;
    Ok(Hypercube {
        kernel,
        measure,
        alpha: T::from_usize_lossy(d),
    })
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(UqError::InvalidModel(format!("bad edge ({a}, {b})")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self { adj })
    }

    /// `{"n": 4, "edges": [[0, 1], [1, 2], …]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)
            .map_err(|e| UqError::InvalidModel(format!("malformed graph JSON: {e}")))?;
        Self::from_edges(doc.n, &doc.edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges)
    }

    pub fn star(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edges(n, &edges)
    }

    /// Builtin graphs: `cycle-N`, `path-N`, `complete-N`, `star-N`.
    pub fn builtin(name: &str) -> Option<Result<Self>> {
        let (kind, n) = name.split_once('-')?;
        let n: usize = n.parse().ok()?;
        Some(match kind {
            "cycle" => Self::cycle(n),
            "path" => Self::path(n),
            "complete" => Self::complete(n),
            "star" => Self::star(n),
            _ => return None,
        })
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adj[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adj[x].len()
    }

    /// BFS parents from `src`, scanning neighbours in increasing order.
    fn bfs_parents(&self, src: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.len()];
        let mut seen = vec![false; self.len()];
        seen[src] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        parent
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let p = self.bfs_parents(0);
        (1..self.len()).all(|v| p[v].is_some())
    }
}

/// Exclusion process data: graph, particle count and path constants.
#[derive(Debug, Clone)]
pub struct ExclusionSpec {
    graph: Graph,
    r: usize,
    states: Vec<Vec<usize>>,
    /// Maximum degree.
    pub d0: usize,
    /// Mean of the `r` largest degrees.
    pub d_r: f64,
    /// Maximum over edges of the total length of canonical paths using it.
    pub delta0: usize,
}

impl ExclusionSpec {
    pub fn new(graph: Graph, r: usize) -> Result<Self> {
        let n = graph.len();
        if n < 2 || !graph.is_connected() {
            return Err(UqError::Disconnected);
        }
        if r == 0 || r >= n {
            return Err(UqError::InvalidModel(format!(
                "need 1 <= r < n, got r = {r}, n = {n}"
            )));
        }
        let count = binomial(n, r);
        if count > EXCLUSION_MAX_STATES {
            return Err(UqError::StateSpaceTooLarge(count));
        }
        let mut degrees: Vec<usize> = (0..n).map(|x| graph.degree(x)).collect();
        let d0 = *degrees.iter().max().unwrap_or(&0);
        degrees.sort_unstable_by(|a, b| b.cmp(a));
        let d_r = degrees[..r].iter().sum::<usize>() as f64 / r as f64;

        let mut load: HashMap<(usize, usize), usize> = HashMap::new();
        for x in 0..n {
            let parent = graph.bfs_parents(x);
            for y in 0..n {
                if y == x {
                    continue;
                }
                let mut edges = Vec::new();
                let mut v = y;
                while let Some(p) = parent[v] {
                    edges.push((p.min(v), p.max(v)));
                    v = p;
                }
                let len = edges.len();
                for e in edges {
                    *load.entry(e).or_default() += len;
                }
            }
        }
        let delta0 = load.values().copied().max().unwrap_or(0);
        let states = combinations(n, r);
        Ok(Self {
            graph,
            r,
            states,
            d0,
            d_r,
            delta0,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `r`-subsets in lexicographic order; the state index is the position.
    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    /// `α = r d_r Δ₀ / n`.
    pub fn alpha(&self) -> f64 {
        self.r as f64 * self.d_r * self.delta0 as f64 / self.graph.len() as f64
    }

    /// `β = 3 r d_r Δ₀ log(n) / n`.
    pub fn beta(&self) -> f64 {
        3.0 * self.alpha() * (self.graph.len() as f64).ln()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..r).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..r).rev().find(|&i| cur[i] < n - r + i) else {
            return out;
        };
        cur[i] += 1;
        for j in (i + 1)..r {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Exclusion<T: Scalar> {
    pub kernel: TransitionKernel<T>,
    pub measure: StationaryMeasure<T>,
    pub constants: FunctionalConstants<T>,
}

/// Exclusion chain: pick a particle with probability proportional to its
/// degree, a uniform neighbour of it, and move there if the site is empty.
pub fn exclusion_chain<T: Scalar>(spec: &ExclusionSpec) -> Result<Exclusion<T>> {
    let states = spec.states();
    let m = states.len();
    let index: HashMap<&[usize], usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let g = spec.graph();
    let mut p = DMatrix::zeros(m, m);
    for (ia, a) in states.iter().enumerate() {
        let total: usize = a.iter().map(|&x| g.degree(x)).sum();
        let w = T::one() / T::from_usize_lossy(total);
        let mut moved = T::zero();
        for &x in a {
            for &y in g.neighbors(x) {
                if a.binary_search(&y).is_ok() {
                    continue;
                }
                let mut b: Vec<usize> = a.iter().copied().filter(|&z| z != x).collect();
                let pos = b.partition_point(|&z| z < y);
                b.insert(pos, y);
                p[(ia, index[b.as_slice()])] += w;
                moved += w;
            }
        }
        p[(ia, ia)] = (T::one() - moved).max(T::zero());
    }
    let labels = states
        .iter()
        .map(|s| {
            let parts: Vec<String> = s.iter().map(|x| x.to_string()).collect();
            format!("{{{}}}", parts.join(","))
        })
        .collect();
    let kernel = TransitionKernel::new(labels, p)?;
    let measure = invariant_measure(&kernel)?;
    let constants = FunctionalConstants::new(
        T::lit(spec.alpha()),
        Some(T::lit(spec.beta())),
        true,
        Provenance::Analytic,
    )?;
    Ok(Exclusion {
        kernel,
        measure,
        constants,
    })
}

pub type Field<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type JacobianField<T> = Arc<dyn Fn(&[T]) -> DMatrix<T> + Send + Sync>;
pub type Potential<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type Sampler<T> = Arc<dyn Fn(&mut Rng) -> Vec<T> + Send + Sync>;

/// `dX = b(X) dt + dW` on `ℝⁿ` with identity noise.
#[derive(Clone)]
pub struct SdeModel<T: Scalar> {
    pub dim: usize,
    pub drift: Field<T>,
    pub jacobian: Option<JacobianField<T>>,
    pub potential: Option<Potential<T>>,
    /// `m` in `D²V ≥ m I`.
    pub hessian_lower_bound: Option<T>,
    /// Sampler for the stationary law, when one is known in closed form.
    pub stationary: Option<Sampler<T>>,
    /// Per-coordinate mean and variance when the stationary law is an
    /// isotropic Gaussian.
    pub gaussian: Option<(T, T)>,
    pub name: String,
}

impl<T: Scalar> std::fmt::Debug for SdeModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("hessian_lower_bound", &self.hessian_lower_bound)
            .finish()
    }
}

impl<T: Scalar> SdeModel<T> {
    pub fn new(dim: usize, drift: Field<T>) -> Self {
        Self {
            dim,
            drift,
            jacobian: None,
            potential: None,
            hessian_lower_bound: None,
            stationary: None,
            gaussian: None,
            name: "sde".into(),
        }
    }

    pub fn drift_at(&self, x: &[T]) -> Vec<T> {
        (self.drift)(x)
    }

    /// Constants implied by the Hessian bound.
    pub fn constants(&self, convention: HessianConvention) -> Result<FunctionalConstants<T>> {
        let m = self
            .hessian_lower_bound
            .ok_or_else(|| UqError::NoCertifiedMethod("no Hessian lower bound supplied".into()))?;
        hessian_constants(m, convention)
    }
}

/// Langevin diffusion `dX = −∇V(X) dt + dW`; its stationary law is
/// proportional to `e^{−2V}`.
pub fn langevin_model<T: Scalar>(
    dim: usize,
    v: Potential<T>,
    grad_v: Field<T>,
    hessian_lb: Option<T>,
) -> Result<SdeModel<T>> {
    if let Some(m) = hessian_lb {
        if !(m > T::zero()) {
            return Err(UqError::OutOfRange(format!("Hessian lower bound {m} must be positive")));
        }
    }
    let drift: Field<T> = Arc::new(move |x: &[T]| grad_v(x).into_iter().map(|g| -g).collect());
    Ok(SdeModel {
        dim,
        drift,
        jacobian: None,
        potential: Some(v),
        hessian_lower_bound: hessian_lb,
        stationary: None,
        gaussian: None,
        name: "langevin".into(),
    })
}

/// `V(x) = m‖x‖²/2`: the Ornstein–Uhlenbeck process `dX = −mX dt + dW`,
/// stationary law `N(0, I/(2m))`.
pub fn langevin_quadratic<T: Scalar>(dim: usize, m: T) -> Result<SdeModel<T>> {
    langevin_quadratic_centered(dim, m, T::zero())
}

/// `V(x) = m‖x − a𝟙‖²/2`, stationary law `N(a𝟙, I/(2m))`.
pub fn langevin_quadratic_centered<T: Scalar>(dim: usize, m: T, center: T) -> Result<SdeModel<T>> {
    if dim == 0 {
        return Err(UqError::InvalidModel("dimension must be at least 1".into()));
    }
    let v: Potential<T> = Arc::new(move |x: &[T]| {
        x.iter().fold(T::zero(), |a, &y| a + (y - center) * (y - center)) * m * T::lit(0.5)
    });
    let grad: Field<T> = Arc::new(move |x: &[T]| x.iter().map(|&y| m * (y - center)).collect());
    let mut model = langevin_model(dim, v, grad, Some(m))?;
    model.jacobian = Some(Arc::new(move |_x: &[T]| DMatrix::identity(dim, dim) * (-m)));
    let sd = (T::one() / (T::lit(2.0) * m)).sqrt();
    model.stationary = Some(Arc::new(move |r: &mut Rng| {
        (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(r);
                center + sd * T::lit(z)
            })
            .collect()
    }));
    model.gaussian = Some((center, sd * sd));
    model.name = "langevin-quadratic".into();
    Ok(model)
}

/// A zoo entry resolved from its command-line name.
#[derive(Debug, Clone)]
pub enum ZooModel {
    Chain {
        model: Model<f64>,
        measure: StationaryMeasure<f64>,
        constants: Option<FunctionalConstants<f64>>,
        /// Default observable for the model.
        observable: Vec<f64>,
        liapunov: Option<LiapunovData<f64>>,
    },
    Sde(SdeModel<f64>),
}

/// Names and parameter summaries accepted by [`parse_zoo`].
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "mminfty",
            "M/M/inf queue truncated at N, Liapunov U = kbar^n: mminfty:lam=1,rho=1,N=400,kbar=2,delta=1",
        ),
        ("hypercube", "lazy walk on {-1,1}^d (d <= 12): hypercube:d=3"),
        (
            "exclusion",
            "r-exclusion on a graph (builtin cycle-N, path-N, complete-N, star-N or a JSON file): exclusion:graph=cycle-6,r=2",
        ),
        (
            "langevin",
            "Langevin diffusion dX = -grad V dt + dW, V = m|x - center|^2/2: langevin:V=quadratic,m=1,n=1,center=0",
        ),
    ]
}

fn params(rest: &str) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for part in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| UqError::InvalidModel(format!("expected key=value, got \"{part}\"")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn num<V: std::str::FromStr>(p: &HashMap<String, String>, key: &str, default: Option<V>) -> Result<V> {
    match p.get(key) {
        Some(s) => s
            .parse()
            .map_err(|_| UqError::InvalidModel(format!("cannot parse {key}={s}"))),
        None => default.ok_or_else(|| UqError::InvalidModel(format!("missing parameter {key}"))),
    }
}

/// Resolves `name:key=value,…`. `load` reads graph files for exclusion chains.
pub fn parse_zoo(spec: &str, load: &dyn Fn(&str) -> Result<String>) -> Result<ZooModel> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let p = params(rest)?;
    match name {
        "mminfty" => {
            let lam: f64 = num(&p, "lam", Some(1.0))?;
            let rho: f64 = num(&p, "rho", Some(1.0))?;
            let n: usize = num(&p, "N", Some(400))?;
            let tol: f64 = num(&p, "mass_tol", Some(MASS_TOL))?;
            let kbar: f64 = num(&p, "kbar", Some(2.0))?;
            let delta: f64 = num(&p, "delta", Some(1.0))?;
            let m = mminfty_generator(lam, rho, n, tol)?;
            let constants = FunctionalConstants::new(m.pack.alpha, None, true, Provenance::Analytic)?;
            let observable = m.occupancy();
            let liapunov = Some(mminfty_liapunov(&m.pack, n, kbar, delta)?);
            Ok(ZooModel::Chain {
                model: Model::Ctmc(m.generator),
                measure: m.measure,
                constants: Some(constants),
                observable,
                liapunov,
            })
        }
        "hypercube" => {
            let d: usize = num(&p, "d", Some(3))?;
            let h = hypercube_kernel::<f64>(d)?;
            let constants = FunctionalConstants::new(h.alpha, None, true, Provenance::Analytic)?;
            // number of + coordinates
            let observable = h
                .kernel
                .states()
                .iter()
                .map(|s| s.chars().filter(|&c| c == '+').count() as f64)
                .collect();
            Ok(ZooModel::Chain {
                model: Model::Dtmc(h.kernel),
                measure: h.measure,
                constants: Some(constants),
                observable,
                liapunov: None,
            })
        }
        "exclusion" => {
            let gref = p
                .get("graph")
                .ok_or_else(|| UqError::InvalidModel("missing parameter graph".into()))?;
            let graph = match Graph::builtin(gref) {
                Some(g) => g?,
                None => Graph::from_json(&load(gref)?)?,
            };
            let r: usize = num(&p, "r", Some(1))?;
            let spec = ExclusionSpec::new(graph, r)?;
            let e = exclusion_chain::<f64>(&spec)?;
            // particles on vertex 0
            let observable = spec
                .states()
                .iter()
                .map(|s| if s.first() == Some(&0) { 1.0 } else { 0.0 })
                .collect();
            Ok(ZooModel::Chain {
                model: Model::Dtmc(e.kernel),
                measure: e.measure,
                constants: Some(e.constants),
                observable,
                liapunov: None,
            })
        }
        "langevin" => {
            let v = p.get("V").map(String::as_str).unwrap_or("quadratic");
            if v != "quadratic" {
                return Err(UqError::InvalidModel(format!("unknown potential \"{v}\"")));
            }
            let m: f64 = num(&p, "m", Some(1.0))?;
            let n: usize = num(&p, "n", Some(1))?;
            let center: f64 = num(&p, "center", Some(0.0))?;
            Ok(ZooModel::Sde(langevin_quadratic_centered(n, m, center)?))
        }
        other => Err(UqError::InvalidModel(format!("unknown zoo model \"{other}\""))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::poincare_constant;

    #[test]
    fn mminfty_is_truncated_poisson() {
        let m = mminfty_generator(1.0, 1.0, 50, MASS_TOL).unwrap();
        let e1 = (-1.0f64).exp();
        let mut pk = e1;
        for k in 0..=20 {
            if k > 0 {
                pk /= k as f64;
            }
            assert!((m.measure.weights()[k] - pk).abs() < 1e-12);
        }
        assert!((m.pack.lambda_exact(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mminfty_truncation_check() {
        assert!(matches!(
            mminfty_generator(5.0, 1.0, 10, MASS_TOL),
            Err(UqError::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn hypercube_small() {
        let h = hypercube_kernel::<f64>(1).unwrap();
        assert_eq!(h.kernel.matrix()[(0, 1)], 0.5);
        assert!(matches!(hypercube_kernel::<f64>(13), Err(UqError::DimensionTooLarge(13))));
        let h = hypercube_kernel::<f64>(3).unwrap();
        assert!(h.measure.weights().iter().all(|&w| (w - 0.125).abs() < 1e-15));
    }

    #[test]
    fn combinations_enumerate() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(4, 2)[0], vec![0, 1]);
        assert_eq!(combinations(4, 2)[5], vec![2, 3]);
        assert_eq!(combinations(3, 1), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(binomial(10, 3), 120);
    }

    #[test]
    fn cycle_constants() {
        // hand enumeration on the 4-cycle: edge {0,1} carries the paths
        // 0-1, 1-0 (length 1), 0-1-2, 2-1-0, 1-0-3, 3-0-1 (length 2)
        let spec = ExclusionSpec::new(Graph::cycle(4).unwrap(), 1).unwrap();
        assert_eq!(spec.delta0, 10);
        assert_eq!(spec.d_r, 2.0);
        assert_eq!(spec.alpha(), 5.0);
        assert!((spec.beta() / spec.alpha() - 3.0 * 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn complete_graph_formula_dominates_spectrum() {
        let spec = ExclusionSpec::new(Graph::complete(4).unwrap(), 2).unwrap();
        let e = exclusion_chain::<f64>(&spec).unwrap();
        assert_eq!(e.kernel.dim(), 6);
        let q = crate::simulate::uniformize(&e.kernel, 1.0);
        let mu = e.measure.rebind(&q).unwrap();
        let a = poincare_constant(&q, &mu).unwrap().alpha;
        assert!(a <= e.constants.alpha + 1e-9, "{a} vs {}", e.constants.alpha);
    }

    #[test]
    fn exclusion_errors() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(ExclusionSpec::new(g, 1), Err(UqError::Disconnected)));
        let big = Graph::cycle(30).unwrap();
        assert!(matches!(ExclusionSpec::new(big, 10), Err(UqError::StateSpaceTooLarge(_))));
    }

    #[test]
    fn zoo_parsing() {
        let none = |_: &str| -> Result<String> { Err(UqError::InvalidModel("no files".into())) };
        assert!(matches!(parse_zoo("hypercube:d=2", &none), Ok(ZooModel::Chain { .. })));
        assert!(matches!(parse_zoo("langevin:V=quadratic", &none), Ok(ZooModel::Sde(_))));
        assert!(parse_zoo("exclusion:graph=cycle-5,r=2", &none).is_ok());
        assert!(parse_zoo("exclusion:graph=missing.json,r=2", &none).is_err());
        assert!(parse_zoo("nope", &none).is_err());
    }
}
