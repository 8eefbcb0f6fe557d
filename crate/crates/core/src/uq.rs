//! Random inputs, the cached QoI oracle and the three moment estimators.
//!
//! All estimators evaluate the model through a [`QoiOracle`], which solves
//! every distinct input at most once and counts the solves. Evaluations are
//! issued as unordered parallel batches; sums are always formed in index
//! order, so results do not depend on the thread count.
//!
//! ```
//! use etuq::uq::{mc_estimate, sg_estimate, FnQoi, QoiOracle, RandomVector};
//! use etuq::sparse_grid::Growth;
//!
//! let rv = RandomVector::uniform(3, 0.122, 0.218).unwrap();
//! let model = FnQoi::new(3, |y: &[f64]| Ok(300.0 + 100.0 * y.iter().sum::<f64>()));
//! let oracle = QoiOracle::new(&model, rv.clone()).unwrap();
//! let sg = sg_estimate(&oracle, &rv, 1, Growth::Smolyak).unwrap();
//! assert!((sg.mean - 351.0).abs() < 1e-10);
//! let mc = mc_estimate(&oracle, &rv, 2000, 7).unwrap();
//! assert!((mc.mean - 351.0).abs() < 1.0);
//! ```

use crate::cache::EvalCache;
use crate::error::{Error, Result};
use crate::fit::{EtModel, ELONGATION_SUPPORT};
use crate::quadrature::{gauss_legendre, map_rule};
use crate::sparse_grid::{build_sparse_grid, sparse_quadrature, Growth};
use crate::tensor_train::{
    greedy_tt_cross_with, rank_one_weights, tt_dot, tt_hadamard, FunctionOracle, GreedyDiagnostics, GreedyOptions,
    TtTensor,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Independent uniform inputs, one per wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomVector {
    supports: Vec<(f64, f64)>,
}

impl RandomVector {
    pub fn new(supports: Vec<(f64, f64)>) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::Domain("random vector needs at least one component".into()));
        }
        for &(a, b) in &supports {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Domain(format!("invalid support [{a}, {b}]")));
            }
        }
        Ok(RandomVector { supports })
    }

    pub fn uniform(dim: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b); dim])
    }

    /// Elongations of `dim` wires on the desk support.
    pub fn elongations(dim: usize) -> Result<Self> {
        Self::uniform(dim, ELONGATION_SUPPORT.0, ELONGATION_SUPPORT.1)
    }

    pub fn dim(&self) -> usize {
        self.supports.len()
    }

    pub fn supports(&self) -> &[(f64, f64)] {
        &self.supports
    }

    /// Joint density, constant on the support box.
    pub fn density(&self, y: &[f64]) -> f64 {
        let inside = y.len() == self.dim() && y.iter().zip(&self.supports).all(|(&v, &(a, b))| (a..=b).contains(&v));
        if inside {
            self.supports.iter().map(|(a, b)| 1.0 / (b - a)).product()
        } else {
            0.0
        }
    }

    /// Maps `u ∈ [0, 1)^N` onto the support.
    fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.supports).map(|(&u, &(a, b))| a + (b - a) * u).collect()
    }
}

/// A scalar quantity of interest of `dim` inputs.
pub trait QoiModel: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64]) -> Result<f64>;
}

impl QoiModel for EtModel {
    fn dim(&self) -> usize {
        self.num_wires()
    }

    /// Peak wire temperature for elongations `y`.
    fn eval(&self, y: &[f64]) -> Result<f64> {
        Ok(self.run_transient(y)?.t_max)
    }
}

/// Closure-backed QoI, used for analytic surrogates.
pub struct FnQoi<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Result<f64> + Sync> FnQoi<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnQoi { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Result<f64> + Sync> QoiModel for FnQoi<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, y: &[f64]) -> Result<f64> {
        (self.f)(y)
    }
}

/// Exact cache key of a quadrature node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum NodeKey {
    /// Sparse-grid point: canonical integer reference coordinates.
    Sparse(Growth, Vec<i64>),
    /// Tensor Gauss-Legendre point with `n` nodes per axis.
    Tensor(usize, Vec<usize>),
}

/// Cached, counting front end of a [`QoiModel`] for one random vector.
pub struct QoiOracle<'m> {
    model: &'m dyn QoiModel,
    rv: RandomVector,
    samples: EvalCache<Vec<u64>>,
    nodes: EvalCache<NodeKey>,
}

impl fmt::Debug for QoiOracle<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QoiOracle")
            .field("dim", &self.rv.dim())
            .field("calls", &self.calls())
            .finish()
    }
}

impl<'m> QoiOracle<'m> {
    pub fn new(model: &'m dyn QoiModel, rv: RandomVector) -> Result<Self> {
        if model.dim() != rv.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} inputs, random vector {}",
                model.dim(),
                rv.dim()
            )));
        }
        Ok(QoiOracle { model, rv, samples: EvalCache::new(), nodes: EvalCache::new() })
    }

    pub fn rv(&self) -> &RandomVector {
        &self.rv
    }

    /// Distinct model solves so far.
    pub fn calls(&self) -> usize {
        self.samples.evaluations() + self.nodes.evaluations()
    }

    fn checked(&self, y: &[f64]) -> Result<f64> {
        let v = self.model.eval(y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!("QoI is not finite at {y:?}")))
        }
    }

    /// QoI at an arbitrary input, keyed by its exact bit pattern.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.rv.dim() {
            return Err(Error::DimensionMismatch(format!("{} inputs for dimension {}", y.len(), self.rv.dim())));
        }
        let key: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
        self.samples.get_or_eval(&key, || self.checked(y))
    }

    fn eval_node(&self, key: NodeKey, y: &[f64]) -> Result<f64> {
        self.nodes.get_or_eval(&key, || self.checked(y))
    }

    fn check_rv(&self, rv: &RandomVector) -> Result<()> {
        if *rv != self.rv {
            return Err(Error::Domain("random vector differs from the one the oracle was built for".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Sg,
    Tt,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Sg => "sg",
            Method::Tt => "tt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Method::Mc),
            "sg" => Ok(Method::Sg),
            "tt" => Ok(Method::Tt),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

/// Mean and standard deviation of the QoI from one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub method: Method,
    /// Quadrature level (SG, TT) or `None` for MC.
    pub level: Option<u32>,
    /// Sweep budget (TT only).
    pub sweeps: Option<usize>,
    pub mean: f64,
    pub std: f64,
    pub second_moment: f64,
    pub solver_calls: usize,
    /// The variance came out negative and was set to zero.
    pub variance_clamped: bool,
}

impl MomentEstimate {
    fn from_moments(method: Method, mean: f64, variance: f64, solver_calls: usize) -> Self {
        let clamped = variance < 0.0;
        let variance = variance.max(0.0);
        MomentEstimate {
            method,
            level: None,
            sweeps: None,
            mean,
            std: variance.sqrt(),
            second_moment: mean * mean + variance,
            solver_calls,
            variance_clamped: clamped,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Monte Carlo with `n_samples` i.i.d. draws from a ChaCha8 stream seeded by `seed`.
///
/// Each coordinate takes the top 53 bits of one 64-bit output as a uniform
/// number in `[0, 1)`; draws fill sample after sample, coordinate after
/// coordinate. `std` is the unbiased sample deviation.
pub fn mc_estimate(oracle: &QoiOracle, rv: &RandomVector, n_samples: usize, seed: u64) -> Result<MomentEstimate> {
    oracle.check_rv(rv)?;
    if n_samples < 2 {
        return Err(Error::Domain(format!("Monte Carlo needs at least 2 samples, got {n_samples}")));
    }
    let inputs = mc_inputs(rv, n_samples, seed);
    let values: Vec<f64> = inputs.par_iter().map(|y| oracle.eval(y)).collect::<Result<_>>()?;
    let n = n_samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MomentEstimate::from_moments(Method::Mc, mean, var, n_samples))
}

/// The sample inputs [`mc_estimate`] draws for `seed`.
pub fn mc_inputs(rv: &RandomVector, n_samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (1u64 << 53) as f64;
    (0..n_samples)
        .map(|_| {
            let u: Vec<f64> = (0..rv.dim()).map(|_| (rng.next_u64() >> 11) as f64 * scale).collect();
            rv.from_unit(&u)
        })
        .collect()
}

/// Stochastic collocation on the Smolyak grid of `level`.
pub fn sg_estimate(oracle: &QoiOracle, rv: &RandomVector, level: u32, growth: Growth) -> Result<MomentEstimate> {
    oracle.check_rv(rv)?;
    let grid = build_sparse_grid(rv.dim(), level, growth, rv.supports())?;
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| oracle.eval_node(NodeKey::Sparse(growth, grid.keys[i].clone()), &grid.points[i]))
        .collect::<Result<_>>()?;
    // moments of Q − c for a sample value c: exact for constant QoIs and free
    // of the cancellation in E[Q²] − E[Q]² (the weights sum to one)
    let shift = values.first().copied().unwrap_or(0.0);
    let shifted: Vec<f64> = values.iter().map(|v| v - shift).collect();
    let (m1, m2) = sparse_quadrature(&grid, &shifted)?;
    let (mean, var) = (shift + m1, m2 - m1 * m1);
    let mut est = MomentEstimate::from_moments(Method::Sg, mean, var, grid.len());
    est.level = Some(level);
    Ok(est)
}

/// TT estimates after each sweep of one greedy run.
#[derive(Debug, Clone)]
pub struct TtRun {
    /// One estimate per completed sweep (sweep `s` at position `s − 1`).
    pub per_sweep: Vec<MomentEstimate>,
    pub diagnostics: GreedyDiagnostics,
    pub tt: TtTensor,
}

impl TtRun {
    /// Estimate for a sweep budget; budgets past convergence repeat the final sweep.
    pub fn at_budget(&self, sweeps: usize) -> Option<MomentEstimate> {
        if sweeps == 0 {
            return None;
        }
        let mut est = self.per_sweep.get(sweeps - 1).or_else(|| self.per_sweep.last())?.clone();
        est.sweeps = Some(sweeps);
        Some(est)
    }
}

/// Greedy TT-cross of the QoI on the tensor grid of `level + 1`
/// Gauss-Legendre nodes per axis, with moments from TT contractions.
///
/// `E[Q]` is the contraction with the rank-one weight tensor and `E[Q²]`
/// the contraction of the Hadamard square. `opts.sweeps` is the budget.
pub fn tt_estimate_sweeps(oracle: &QoiOracle, rv: &RandomVector, level: u32, opts: &GreedyOptions) -> Result<TtRun> {
    oracle.check_rv(rv)?;
    if level < 1 {
        return Err(Error::Domain("TT quadrature needs level >= 1 (two nodes per axis)".into()));
    }
    let n = level as usize + 1;
    let rule = gauss_legendre(n)?;
    let mapped = rv.supports().iter().map(|&(a, b)| map_rule(&rule, a, b)).collect::<Result<Vec<_>>>()?;
    let weights = rank_one_weights(&mapped.iter().map(|r| r.weights().to_vec()).collect::<Vec<_>>())?;
    let tensor = FunctionOracle::try_new(vec![n; rv.dim()], |idx: &[usize]| {
        let y: Vec<f64> = idx.iter().zip(&mapped).map(|(&i, r)| r.nodes[i]).collect();
        oracle.eval_node(NodeKey::Tensor(n, idx.to_vec()), &y)
    });
    let mut per_sweep = Vec::new();
    let mut failure = None;
    let (tt, diagnostics) = greedy_tt_cross_with(&tensor, opts, |report, tt| {
        if failure.is_some() {
            return;
        }
        match tt_moments(tt, &weights) {
            Ok((mean, second)) => {
                let mut est = MomentEstimate::from_moments(Method::Tt, mean, second - mean * mean, report.calls);
                est.level = Some(level);
                est.sweeps = Some(report.sweep);
                per_sweep.push(est);
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if tt.max_rank() >= opts.rank_cap {
        let last = diagnostics.sweeps.last().map_or(0.0, |s| s.max_error);
        if last > opts.tol * diagnostics.scale {
            return Err(Error::Capacity(format!(
                "TT rank reached the cap {} with interpolation error {last:e} still above tolerance",
                opts.rank_cap
            )));
        }
    }
    Ok(TtRun { per_sweep, diagnostics, tt })
}

/// [`tt_estimate_sweeps`] reduced to the estimate at `sweep_budget`.
pub fn tt_estimate(oracle: &QoiOracle, rv: &RandomVector, level: u32, sweep_budget: usize) -> Result<MomentEstimate> {
    let opts = GreedyOptions { sweeps: sweep_budget, ..GreedyOptions::default() };
    let run = tt_estimate_sweeps(oracle, rv, level, &opts)?;
    run.at_budget(sweep_budget)
        .ok_or_else(|| Error::Domain("sweep budget must be at least 1".into()))
}

fn tt_moments(q: &TtTensor, w: &TtTensor) -> Result<(f64, f64)> {
    let mean = tt_dot(q, w)?;
    let second = tt_dot(&tt_hadamard(q, q)?, w)?;
    Ok((mean, second))
}

/// Relative errors `(ε_μ, ε_σ)` in percent against a reference estimate.
pub fn relative_errors(est: &MomentEstimate, reference: &MomentEstimate) -> Result<(f64, f64)> {
    if reference.mean == 0.0 || reference.std == 0.0 {
        return Err(Error::Domain(format!(
            "reference mean {} and std {} must be non-zero",
            reference.mean, reference.std
        )));
    }
    Ok((
        ((est.mean - reference.mean) / reference.mean).abs() * 100.0,
        ((est.std - reference.std) / reference.std).abs() * 100.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_train::DenseTensor;
    use proptest::prelude::*;

    fn estimate(mean: f64, std: f64) -> MomentEstimate {
        MomentEstimate::from_moments(Method::Mc, mean, std * std, 2)
    }

    #[test]
    fn random_vector_density_and_validation() {
        let rv = RandomVector::elongations(2).unwrap();
        let d = 1.0 / (0.096 * 0.096);
        assert!((rv.density(&[0.15, 0.2]) - d).abs() < 1e-9 * d);
        assert_eq!(rv.density(&[0.1, 0.2]), 0.0);
        assert!(RandomVector::uniform(2, 0.3, 0.3).is_err());
        assert!(RandomVector::new(vec![]).is_err());
    }

    #[test]
    fn oracle_caches_and_counts() {
        let rv = RandomVector::uniform(2, 0.0, 1.0).unwrap();
        let model = FnQoi::new(2, |y: &[f64]| Ok(y[0] * 3.0 + y[1]));
        let oracle = QoiOracle::new(&model, rv.clone()).unwrap();
        assert_eq!(oracle.eval(&[0.5, 0.25]).unwrap(), 1.75);
        assert_eq!(oracle.eval(&[0.5, 0.25]).unwrap(), 1.75);
        assert_eq!(oracle.calls(), 1);
        sg_estimate(&oracle, &rv, 2, Growth::Smolyak).unwrap();
        let after = oracle.calls();
        sg_estimate(&oracle, &rv, 2, Growth::Smolyak).unwrap();
        sg_estimate(&oracle, &rv, 1, Growth::Smolyak).unwrap();
        assert_eq!(oracle.calls(), after);
        let wrong = FnQoi::new(3, |_: &[f64]| Ok(0.0));
        assert!(QoiOracle::new(&wrong, rv.clone()).is_err());
        let other = RandomVector::uniform(2, 0.0, 2.0).unwrap();
        assert!(mc_estimate(&oracle, &other, 10, 0).is_err());
    }

    #[test]
    fn non_finite_qoi_is_an_error() {
        let rv = RandomVector::uniform(1, 0.0, 1.0).unwrap();
        let model = FnQoi::new(1, |_: &[f64]| Ok(f64::NAN));
        let oracle = QoiOracle::new(&model, rv).unwrap();
        assert!(matches!(oracle.eval(&[0.5]), Err(Error::Numerical(_))));
        assert_eq!(oracle.calls(), 0);
    }

    #[test]
    fn mc_constant_and_validation() {
        let rv = RandomVector::elongations(3).unwrap();
        let model = FnQoi::new(3, |_: &[f64]| Ok(412.5));
        let oracle = QoiOracle::new(&model, rv.clone()).unwrap();
        let est = mc_estimate(&oracle, &rv, 100, 1).unwrap();
        assert_eq!((est.mean, est.std, est.solver_calls), (412.5, 0.0, 100));
        assert!(mc_estimate(&oracle, &rv, 1, 1).is_err());
    }

    #[test]
    fn mc_matches_uniform_moments() {
        let rv = RandomVector::elongations(2).unwrap();
        let model = FnQoi::new(2, |y: &[f64]| Ok(y[0]));
        let oracle = QoiOracle::new(&model, rv.clone()).unwrap();
        let n = 100_000;
        let est = mc_estimate(&oracle, &rv, n, 2024).unwrap();
        let sd = 0.096 / 12f64.sqrt();
        assert!((sd - 0.0277128).abs() < 1e-7);
        assert!((est.mean - 0.170).abs() < 3.0 * sd / (n as f64).sqrt());
        assert!((est.std - sd).abs() < 0.01 * sd);
        assert!((est.second_moment - est.mean * est.mean - est.std * est.std).abs() < 1e-15);
    }

    #[test]
    fn mc_is_bit_reproducible() {
        let rv = RandomVector::elongations(4).unwrap();
        let model = FnQoi::new(4, |y: &[f64]| Ok(y.iter().map(|v| v.sin()).product::<f64>()));
        let a = mc_estimate(&QoiOracle::new(&model, rv.clone()).unwrap(), &rv, 500, 9).unwrap();
        let b = mc_estimate(&QoiOracle::new(&model, rv.clone()).unwrap(), &rv, 500, 9).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = mc_estimate(&QoiOracle::new(&model, rv.clone()).unwrap(), &rv, 500, 10).unwrap();
        assert_ne!(a.mean, c.mean);
        let u = mc_inputs(&rv, 3, 9);
        assert!(u.iter().flatten().all(|&v| (0.122..0.218).contains(&v)));
    }

    #[test]
    fn sg_examples() {
        let rv = RandomVector::elongations(12).unwrap();
        let c: Vec<f64> = (0..12).map(|n| 1.0 + n as f64).collect();
        let cc = c.clone();
        let model = FnQoi::new(12, move |y: &[f64]| Ok(y.iter().zip(&cc).map(|(a, b)| a * b).sum()));
        let oracle = QoiOracle::new(&model, rv.clone()).unwrap();
        let est = sg_estimate(&oracle, &rv, 1, Growth::Smolyak).unwrap();
        assert_eq!(est.solver_calls, 25);
        assert_eq!(oracle.calls(), 25);
        let exact: f64 = c.iter().map(|v| v * 0.17).sum();
        assert!((est.mean - exact).abs() < 1e-10);
        let flat = FnQoi::new(12, |_: &[f64]| Ok(500.0));
        let est = sg_estimate(&QoiOracle::new(&flat, rv.clone()).unwrap(), &rv, 2, Growth::Smolyak).unwrap();
        assert_eq!(est.std, 0.0);
        assert_eq!(est.level, Some(2));
    }

    #[test]
    fn sg_clamps_negative_variance() {
        // negative combination weights can produce a negative variance for rough data
        let rv = RandomVector::uniform(4, -1.0, 1.0).unwrap();
        let model = FnQoi::new(4, |y: &[f64]| Ok(if y.iter().all(|&v| v == 0.0) { 1.0 } else { 0.0 }));
        let est = sg_estimate(&QoiOracle::new(&model, rv.clone()).unwrap(), &rv, 1, Growth::Smolyak).unwrap();
        assert!(est.variance_clamped);
        assert_eq!(est.std, 0.0);
    }

    fn separable_sum(y: &[f64]) -> f64 {
        let a: f64 = y.iter().map(|v| 1.0 + 2.0 * v).product();
        let b: f64 = y.iter().enumerate().map(|(n, v)| (v * (n as f64 + 1.0)).cos()).product();
        let c: f64 = y.iter().map(|v| (-v).exp()).product();
        a + 0.5 * b + 0.25 * c
    }

    fn dense_moments(rv: &RandomVector, n: usize, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let rule = gauss_legendre(n).unwrap();
        let mapped: Vec<_> = rv.supports().iter().map(|&(a, b)| map_rule(&rule, a, b).unwrap()).collect();
        let t = DenseTensor::from_fn(&vec![n; rv.dim()], |idx| {
            let y: Vec<f64> = idx.iter().zip(&mapped).map(|(&i, r)| r.nodes[i]).collect();
            f(&y)
        })
        .unwrap();
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        let mut idx = vec![0; rv.dim()];
        for k in 0..t.data.len() {
            let mut rem = k;
            for d in (0..rv.dim()).rev() {
                idx[d] = rem % n;
                rem /= n;
            }
            let w: f64 = idx.iter().zip(&mapped).map(|(&i, r)| r.weights()[i]).product();
            let v = t.get(&idx).unwrap();
            m1 += w * v;
            m2 += w * v * v;
        }
        (m1, (m2 - m1 * m1).sqrt())
    }

    #[test]
    fn tt_matches_dense_contraction() {
        let rv = RandomVector::elongations(12).unwrap();
        let model = FnQoi::new(12, |y: &[f64]| Ok(separable_sum(y)));
        let oracle = QoiOracle::new(&model, rv.clone()).unwrap();
        let run = tt_estimate_sweeps(&oracle, &rv, 1, &GreedyOptions::default()).unwrap();
        let (mean, std) = dense_moments(&rv, 2, separable_sum);
        let best = run.per_sweep.last().unwrap();
        assert!((best.mean - mean).abs() < 1e-8, "{} vs {mean}", best.mean);
        assert!((best.std - std).abs() < 1e-8, "{} vs {std}", best.std);
        assert!(best.solver_calls < 4096);
        for (s, est) in run.per_sweep.iter().enumerate() {
            assert!(run.diagnostics.sweeps[s].max_rank <= s + 2);
            assert!(est.solver_calls < 4096);
        }
    }

    #[test]
    fn tt_separable_mean_is_product_of_axis_means() {
        let rv = RandomVector::elongations(12).unwrap();
        let f = |y: &[f64]| y.iter().map(|v| 1.0 + v * v).product::<f64>();
        let model = FnQoi::new(12, move |y: &[f64]| Ok(f(y)));
        let oracle = QoiOracle::new(&model, rv.clone()).unwrap();
        let est = tt_estimate(&oracle, &rv, 1, 2).unwrap();
        let rule = map_rule(&gauss_legendre(2).unwrap(), 0.122, 0.218).unwrap();
        let axis = rule.integrate(|v| 1.0 + v * v);
        assert!((est.mean - axis.powi(12)).abs() < 1e-10);
        assert!((est.mean - dense_moments(&rv, 2, f).0).abs() < 1e-10);
        assert_eq!(est.sweeps, Some(2));
    }

    #[test]
    fn tt_full_rank_equals_tensor_quadrature() {
        let rv = RandomVector::elongations(4).unwrap();
        let f = |y: &[f64]| 1.0 / (1.0 + y.iter().enumerate().map(|(n, v)| (n as f64 + 1.0) * v).sum::<f64>());
        let model = FnQoi::new(4, move |y: &[f64]| Ok(f(y)));
        let oracle = QoiOracle::new(&model, rv.clone()).unwrap();
        let opts = GreedyOptions { sweeps: 12, tol: 0.0, ..GreedyOptions::default() };
        let run = tt_estimate_sweeps(&oracle, &rv, 2, &opts).unwrap();
        let (mean, std) = dense_moments(&rv, 3, f);
        let last = run.per_sweep.last().unwrap();
        assert!((last.mean - mean).abs() < 1e-9);
        assert!((last.std - std).abs() < 1e-9);
        assert!(tt_estimate(&oracle, &rv, 0, 1).is_err());
    }

    #[test]
    fn relative_error_examples() {
        let r = estimate(1.0, 4.07);
        assert_eq!(relative_errors(&r, &r).unwrap(), (0.0, 0.0));
        let (em, _) = relative_errors(&estimate(1.01, 4.07), &r).unwrap();
        assert!((em - 1.0).abs() < 1e-12);
        let (_, es) = relative_errors(&estimate(1.0, 4.20), &r).unwrap();
        assert!((es - 3.194).abs() < 1e-3);
        assert!(relative_errors(&r, &estimate(0.0, 1.0)).is_err());
        assert!(relative_errors(&r, &estimate(1.0, 0.0)).is_err());
    }

    #[test]
    fn estimate_json_round_trip() {
        let mut e = estimate(480.25, 3.5);
        e.method = Method::Tt;
        e.level = Some(1);
        e.sweeps = Some(6);
        let back: MomentEstimate = serde_json::from_str(&e.to_json().unwrap()).unwrap();
        assert_eq!(back, e);
        assert_eq!("tt".parse::<Method>().unwrap(), Method::Tt);
        assert!("qmc".parse::<Method>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn variance_identity_holds(mean in -1e3f64..1e3, var in -1.0f64..1e2) {
            let e = MomentEstimate::from_moments(Method::Sg, mean, var, 1);
            prop_assert!(e.std >= 0.0);
            prop_assert_eq!(e.variance_clamped, var < 0.0);
            prop_assert!((e.std * e.std - (e.second_moment - mean * mean).max(0.0)).abs() <= 1e-9 * (1.0 + mean * mean));
        }
    }
}
