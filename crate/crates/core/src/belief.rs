//! Multivariate Gaussian belief over the sensory field.
//!
//! The belief is the conjugate posterior of a Gaussian prior under noisy
//! point observations `y = phi(v) + eps`, `eps ~ N(0, sigma^2)`. In
//! information form the posterior precision is the prior precision plus
//! `n_v / sigma^2` on the diagonal and the posterior mean solves
//! `Lambda mu = Lambda_0 mu_0 + s / sigma^2`, where `n_v` and `s_v` are the
//! sample count and sample sum at each vertex.
//!
//! Numerically the state is kept in covariance form. Single samples are
//! absorbed with a rank-one (Kalman) update; [`GaussianBelief::update_batch`]
//! recomputes the posterior from the counts and sums directly, which is the
//! canonical path and is bit-reproducible for equal counts. Squared-exponential
//! Gram matrices on fine grids have condition numbers near `1e11`, so the
//! precision matrix is exposed but never used to compute the covariance.
//!
//! Because the posterior covariance depends only on where samples are taken,
//! greedy sampling plans ([`GaussianBelief::plan_to_threshold`]) are computed
//! before any measurement is made.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VertexId, WeightedGraph};
use crate::partition::PartitionState;

/// Relative diagonal jitter added to kernel Gram matrices.
pub const PRIOR_JITTER: f64 = 1e-10;

/// Default plan cap, in samples per vertex.
pub const DEFAULT_PLAN_CAP_FACTOR: usize = 10;

/// Default bound on `|V|^n` for exhaustive information-gain enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// Squared-exponential kernel `variance * exp(-d^2 / (2 length_scale^2))` over Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub variance: f64,
    pub length_scale: f64,
}

impl KernelSpec {
    pub fn new(variance: f64, length_scale: f64) -> Result<Self> {
        let k = KernelSpec {
            variance,
            length_scale,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidKernel(format!("variance must be positive, got {}", self.variance)));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "length scale must be positive, got {}",
                self.length_scale
            )));
        }
        Ok(())
    }

    pub fn eval(&self, euclidean_distance: f64) -> f64 {
        let l = self.length_scale;
        self.variance * (-euclidean_distance * euclidean_distance / (2.0 * l * l)).exp()
    }
}

#[derive(Debug)]
struct Prior {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
}

/// Posterior over the field vector. Cheap to clone apart from the covariance matrix.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    prior: Arc<Prior>,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    counts: Vec<u32>,
    sums: Vec<f64>,
    noise_variance: f64,
    prior_variance_bound: f64,
}

/// Ordered sampling sequence; a vertex may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SamplePlan {
    pub vertices: Vec<VertexId>,
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Splits the plan by the part that owns each vertex, preserving order.
    pub fn per_agent(&self, partition: &PartitionState) -> Vec<Vec<VertexId>> {
        let mut out = vec![Vec::new(); partition.num_parts()];
        for &v in &self.vertices {
            out[partition.owner_of(v)].push(v);
        }
        out
    }
}

/// Greedy argmax with ties to the lowest index.
fn argmax_diagonal(cov: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, cov[(0, 0)]);
    for i in 1..cov.nrows() {
        if cov[(i, i)] > best.1 {
            best = (i, cov[(i, i)]);
        }
    }
    best
}

fn max_diagonal(cov: &DMatrix<f64>) -> f64 {
    cov.diagonal().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Rank-one covariance reduction for a noisy sample at `v`; returns the prior variance at `v`.
fn absorb_sample(cov: &mut DMatrix<f64>, v: usize, noise_variance: f64) -> f64 {
    let n = cov.nrows();
    let var = cov[(v, v)];
    let s = var + noise_variance;
    let col: Vec<f64> = cov.column(v).iter().copied().collect();
    for j in 0..n {
        let cj = col[j] / s;
        if cj == 0.0 {
            continue;
        }
        for i in j..n {
            let delta = col[i] * cj;
            cov[(i, j)] -= delta;
            if i != j {
                cov[(j, i)] -= delta;
            }
        }
    }
    var
}

/// Posterior (mean, covariance) computed from scratch from sample counts and sums.
fn posterior_from_counts(
    prior: &Prior,
    counts: &[u32],
    sums: Option<&[f64]>,
    noise_variance: f64,
) -> Result<(Option<DVector<f64>>, DMatrix<f64>)> {
    let sampled: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
    if sampled.is_empty() {
        return Ok((sums.map(|_| prior.mean.clone()), prior.covariance.clone()));
    }
    let n = counts.len();
    let m = sampled.len();
    let gain_basis = DMatrix::from_fn(n, m, |i, k| prior.covariance[(i, sampled[k])]);
    let innovation = DMatrix::from_fn(m, m, |a, b| {
        let c = prior.covariance[(sampled[a], sampled[b])];
        if a == b {
            c + noise_variance / f64::from(counts[sampled[a]])
        } else {
            c
        }
    });
    let chol = innovation
        .cholesky()
        .ok_or_else(|| Error::SingularPrior("innovation covariance is not positive definite".into()))?;
    let solved = chol.solve(&gain_basis.transpose());
    let mut cov = &prior.covariance - &gain_basis * solved;
    for j in 0..n {
        for i in (j + 1)..n {
            let a = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = a;
            cov[(j, i)] = a;
        }
    }
    let mean = sums.map(|sums| {
        let residual = DVector::from_fn(m, |k, _| {
            let i = sampled[k];
            sums[i] / f64::from(counts[i]) - prior.mean[i]
        });
        &prior.mean + &gain_basis * chol.solve(&residual)
    });
    Ok((mean, cov))
}

impl GaussianBelief {
    /// Belief with an explicit prior mean and covariance.
    ///
    /// The prior precision is the Cholesky inverse of `covariance`; a matrix that
    /// is not numerically positive definite is rejected.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, noise_variance: f64) -> Result<Self> {
        let n = mean.len();
        if n == 0 || covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "prior mean has length {n} but covariance is {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("prior contains non-finite entries".into()));
        }
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (covariance[(i, j)] - covariance[(j, i)]).abs())
            .fold(0.0, f64::max);
        if asym > 1e-12 * max_diagonal(&covariance).abs().max(1.0) {
            return Err(Error::InvalidArgument(format!("prior covariance is not symmetric ({asym:e})")));
        }
        let chol = covariance.clone().cholesky().ok_or_else(|| {
            Error::SingularPrior(format!(
                "{n}x{n} covariance failed Cholesky factorisation; increase the jitter or the kernel length scale"
            ))
        })?;
        let precision = chol.inverse();
        let prior_variance_bound = max_diagonal(&covariance);
        let prior = Arc::new(Prior {
            mean: mean.clone(),
            covariance: covariance.clone(),
            precision,
        });
        Ok(GaussianBelief {
            prior,
            mean,
            covariance,
            counts: vec![0; n],
            sums: vec![0.0; n],
            noise_variance,
            prior_variance_bound,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn prior_mean(&self) -> &DVector<f64> {
        &self.prior.mean
    }

    pub fn prior_covariance(&self) -> &DMatrix<f64> {
        &self.prior.covariance
    }

    pub fn prior_precision(&self) -> &DMatrix<f64> {
        &self.prior.precision
    }

    /// Posterior precision: prior precision plus `n_i / sigma^2` on the diagonal.
    pub fn precision(&self) -> DMatrix<f64> {
        let mut p = self.prior.precision.clone();
        for (i, &c) in self.counts.iter().enumerate() {
            p[(i, i)] += f64::from(c) / self.noise_variance;
        }
        p
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Upper bound on the marginal prior variances (their maximum).
    pub fn prior_variance_bound(&self) -> f64 {
        self.prior_variance_bound
    }

    pub fn variance(&self, v: VertexId) -> f64 {
        self.covariance[(v.0, v.0)]
    }

    pub fn variances(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().copied().collect()
    }

    pub fn max_variance(&self) -> f64 {
        max_diagonal(&self.covariance)
    }

    /// Largest entry of `|Sigma * Lambda - I|`.
    pub fn inverse_residual(&self) -> f64 {
        let prod = &self.covariance * self.precision();
        let n = self.num_vertices();
        (prod - DMatrix::<f64>::identity(n, n)).abs().max()
    }

    fn check_sample(&self, v: VertexId, y: f64) -> Result<()> {
        if v.0 >= self.num_vertices() {
            return Err(Error::VertexOutOfRange(v.0));
        }
        if !y.is_finite() {
            return Err(Error::NonFiniteSample { vertex: v.0, value: y });
        }
        Ok(())
    }

    /// Absorbs one noisy measurement `y` taken at `v`.
    pub fn posterior_update(&mut self, v: VertexId, y: f64) -> Result<()> {
        self.check_sample(v, y)?;
        let i = v.0;
        let s = self.covariance[(i, i)] + self.noise_variance;
        let innovation = y - self.mean[i];
        let gain: Vec<f64> = self.covariance.column(i).iter().map(|c| c / s).collect();
        for (m, g) in self.mean.iter_mut().zip(&gain) {
            *m += g * innovation;
        }
        absorb_sample(&mut self.covariance, i, self.noise_variance);
        self.counts[i] += 1;
        self.sums[i] += y;
        Ok(())
    }

    /// Absorbs a batch of measurements and recomputes the posterior from counts and sums.
    pub fn update_batch(&mut self, samples: &[(VertexId, f64)]) -> Result<()> {
        for &(v, y) in samples {
            self.check_sample(v, y)?;
        }
        for &(v, y) in samples {
            self.counts[v.0] += 1;
            self.sums[v.0] += y;
        }
        self.refresh()
    }

    /// Recomputes mean and covariance from the prior and the accumulated counts and sums.
    pub fn refresh(&mut self) -> Result<()> {
        let (mean, cov) =
            posterior_from_counts(&self.prior, &self.counts, Some(&self.sums), self.noise_variance)?;
        self.mean = mean.expect("sums were supplied");
        self.covariance = cov;
        Ok(())
    }

    /// Vertex with the largest marginal variance; ties go to the lowest index.
    pub fn greedy_next_vertex(&self) -> VertexId {
        VertexId(argmax_diagonal(&self.covariance).0)
    }

    /// Greedy plan driving every marginal variance to at most `threshold`,
    /// capped at `DEFAULT_PLAN_CAP_FACTOR * |V|` samples.
    pub fn plan_to_threshold(&self, threshold: f64) -> Result<SamplePlan> {
        self.plan_to_threshold_capped(threshold, DEFAULT_PLAN_CAP_FACTOR * self.num_vertices())
    }

    /// Greedy plan with an explicit sample cap.
    ///
    /// The plan is simulated with rank-one variance updates and then checked
    /// against the canonical posterior for the resulting counts, so that a
    /// batch update with exactly these samples meets `threshold` without
    /// rounding slack.
    pub fn plan_to_threshold_capped(&self, threshold: f64, cap: usize) -> Result<SamplePlan> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
        }
        let mut cov = self.covariance.clone();
        let mut counts = self.counts.clone();
        let mut plan = Vec::new();
        loop {
            let (i, var) = argmax_diagonal(&cov);
            if var <= threshold {
                if plan.is_empty() {
                    break;
                }
                let (_, exact) = posterior_from_counts(&self.prior, &counts, None, self.noise_variance)?;
                if max_diagonal(&exact) <= threshold {
                    break;
                }
                cov = exact;
                continue;
            }
            if plan.len() >= cap {
                return Err(Error::PlanCapExceeded {
                    cap,
                    reached: var,
                    threshold,
                    noise_variance: self.noise_variance,
                });
            }
            absorb_sample(&mut cov, i, self.noise_variance);
            counts[i] += 1;
            plan.push(VertexId(i));
        }
        Ok(SamplePlan { vertices: plan })
    }

    /// Mutual information between the plan's observations and the field,
    /// `1/2 * sum_k log(1 + var_k / sigma^2)` with `var_k` the variance at the
    /// k-th sampled vertex just before it is sampled, starting from this belief.
    pub fn mutual_information(&self, plan: &[VertexId]) -> f64 {
        let mut cov = self.covariance.clone();
        plan.iter()
            .map(|v| {
                let var = absorb_sample(&mut cov, v.0, self.noise_variance);
                0.5 * (1.0 + var / self.noise_variance).ln()
            })
            .sum()
    }

    /// Largest information gain over all `n`-sample designs, by exhaustive search
    /// over multisets (information is order-invariant). Fails when `|V|^n > cap`.
    pub fn gamma_bruteforce(&self, n: usize, cap: u64) -> Result<f64> {
        Ok(self.gamma_bruteforce_design(n, cap)?.0)
    }

    /// Like [`Self::gamma_bruteforce`] but also returns a maximising design.
    pub fn gamma_bruteforce_design(&self, n: usize, cap: u64) -> Result<(f64, Vec<VertexId>)> {
        let size = self.num_vertices();
        let too_big = u32::try_from(n)
            .ok()
            .and_then(|e| (size as u64).checked_pow(e))
            .is_none_or(|count| count > cap);
        if too_big {
            return Err(Error::EnumerationCap { vertices: size, n, cap });
        }
        let mut best = (0.0, Vec::new());
        let mut design = Vec::with_capacity(n);
        self.enumerate_multisets(n, 0, &mut design, &mut best);
        Ok(best)
    }

    fn enumerate_multisets(&self, n: usize, start: usize, design: &mut Vec<VertexId>, best: &mut (f64, Vec<VertexId>)) {
        if design.len() == n {
            let mi = self.mutual_information(design);
            if mi > best.0 || best.1.len() != n {
                *best = (mi, design.clone());
            }
            return;
        }
        for v in start..self.num_vertices() {
            design.push(VertexId(v));
            self.enumerate_multisets(n, v, design, best);
            design.pop();
        }
    }

    /// Upper bound on the maximum posterior variance after `n` greedy samples:
    /// `2 s0 / log(1 + s0 / sigma^2) * gamma_n / n`, with `s0` the prior variance bound.
    pub fn lemma1_bound(&self, n: usize, gamma_n: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidArgument("bound needs at least one sample".into()));
        }
        let s0 = self.prior_variance_bound;
        Ok(2.0 * s0 / (1.0 + s0 / self.noise_variance).ln() * gamma_n / n as f64)
    }

    /// Writes `vertex,mu,var` rows.
    pub fn write_snapshot_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["vertex", "mu", "var"])?;
        for i in 0..self.num_vertices() {
            w.write_record(&[
                i.to_string(),
                format!("{:.15e}", self.mean[i]),
                format!("{:.15e}", self.covariance[(i, i)]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Squared-exponential prior over the graph's vertex positions with constant mean.
pub fn prior_from_kernel(
    g: &WeightedGraph,
    kernel: &KernelSpec,
    prior_mean: f64,
    noise_variance: f64,
) -> Result<GaussianBelief> {
    kernel.validate()?;
    if !prior_mean.is_finite() {
        return Err(Error::InvalidArgument(format!("prior mean must be finite, got {prior_mean}")));
    }
    let n = g.num_vertices();
    let mut cov = DMatrix::from_fn(n, n, |i, j| kernel.eval(g.euclidean(VertexId(i), VertexId(j))));
    for i in 0..n {
        cov[(i, i)] += PRIOR_JITTER * kernel.variance;
    }
    GaussianBelief::new(DVector::from_element(n, prior_mean), cov, noise_variance)
}
