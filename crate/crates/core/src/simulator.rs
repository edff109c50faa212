//! Monte Carlo for the spherical 2-spin model on an exactly diagonalized
//! disorder sample.
//!
//! With `M = (G + Gᵀ)/2` and `M = V diag(λ) Vᵀ`, the Hamiltonian
//! `H(σ) = σᵀMσ / √(2N)` becomes `Σ_k μ_k s_k²` in the rotated coordinates
//! `s = Vᵀσ`, with `μ_k = λ_k/√(2N)`. The field term is `h Σ_i σ_i = h wᵀs`
//! with `w = Vᵀ1`. Chains move on the sphere `|s|² = N` by random plane
//! rotations, so overlaps `σ¹·σ²/N = s¹·s²/N` are read off directly.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Minimum effective sample size accepted by the estimators.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 100.0;

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Raw couplings `G` with i.i.d. standard Gaussian entries.
pub fn sample_couplings(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Direct evaluation `σᵀGσ / √(2N)`.
pub fn hamiltonian_direct(couplings: &DMatrix<f64>, sigma: &[f64]) -> f64 {
    let n = sigma.len();
    let s = nalgebra::DVector::from_column_slice(sigma);
    (s.transpose() * couplings * &s)[(0, 0)] / (2.0 * n as f64).sqrt()
}

/// One diagonalized disorder realization.
#[derive(Debug, Clone)]
pub struct DisorderSample {
    pub n: usize,
    pub seed: u64,
    /// Spectrum of `(G + Gᵀ)/2`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, paired with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// `w = Vᵀ1`: the all-ones field direction in rotated coordinates.
    pub field_weights: Vec<f64>,
}

pub fn sample_disorder(n: usize, seed: u64) -> Result<DisorderSample> {
    if n < 2 {
        return Err(Error::invalid(format!("N must be at least 2, got {n}")));
    }
    let g = sample_couplings(n, seed);
    let m = (&g + g.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let field_weights = (0..n).map(|c| eigenvectors.column(c).sum()).collect();
    Ok(DisorderSample {
        n,
        seed,
        eigenvalues,
        eigenvectors,
        field_weights,
    })
}

impl DisorderSample {
    /// `μ_k = λ_k / √(2N)`.
    pub fn mode_weights(&self) -> Vec<f64> {
        let scale = 1.0 / (2.0 * self.n as f64).sqrt();
        self.eigenvalues.iter().map(|l| l * scale).collect()
    }

    /// `H` in rotated coordinates.
    pub fn hamiltonian(&self, s: &[f64]) -> f64 {
        self.mode_weights().iter().zip(s).map(|(m, x)| m * x * x).sum()
    }

    /// `σ = V s`.
    pub fn to_original(&self, s: &[f64]) -> Vec<f64> {
        (&self.eigenvectors * nalgebra::DVector::from_column_slice(s))
            .iter()
            .copied()
            .collect()
    }

    /// `s = Vᵀσ`.
    pub fn to_rotated(&self, sigma: &[f64]) -> Vec<f64> {
        (self.eigenvectors.transpose() * nalgebra::DVector::from_column_slice(sigma))
            .iter()
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// System size N.
    pub n: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    /// Record every `thin` sweeps after burn-in.
    pub thin: usize,
    pub disorder_samples: usize,
    pub seed: u64,
    /// Overlap histogram bin width.
    pub epsilon: f64,
    /// Keep the raw overlap trace.
    pub record_trace: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n: 400,
            sweeps: 20_000,
            burn_in: 5_000,
            thin: 10,
            disorder_samples: 8,
            seed: 0,
            epsilon: 0.02,
            record_trace: false,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(Error::invalid(format!("N must be at least 16, got {}", self.n)));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::invalid("sweeps must exceed burn-in"));
        }
        if self.thin == 0 || self.disorder_samples == 0 {
            return Err(Error::invalid("thin and disorder_samples must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid("epsilon must lie in (0, 1]"));
        }
        Ok(())
    }

    fn recorded_sweeps(&self) -> impl Iterator<Item = usize> + '_ {
        (self.burn_in + 1..=self.sweeps).filter(move |s| (s - self.burn_in).is_multiple_of(self.thin))
    }
}

/// Metropolis chain for `exp(βH + h wᵀs)` on the sphere `|s|² = N`.
#[derive(Debug, Clone)]
pub struct SphereChain {
    beta: f64,
    h: f64,
    mu: Vec<f64>,
    w: Vec<f64>,
    s: Vec<f64>,
    rng: ChaCha8Rng,
    pub proposed: u64,
    pub accepted: u64,
}

impl SphereChain {
    /// Starts from a uniform point on the sphere.
    pub fn new(disorder: &DisorderSample, model: &ModelSpec, seed: u64) -> Result<Self> {
        model.require_p(2, "the spectral sampler")?;
        let n = disorder.n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&mut s);
        Ok(Self {
            beta: model.beta(),
            h: model.h(),
            mu: disorder.mode_weights(),
            w: disorder.field_weights.clone(),
            s,
            rng,
            proposed: 0,
            accepted: 0,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.s
    }

    /// Log target density up to a constant.
    pub fn log_weight(&self, s: &[f64]) -> f64 {
        s.iter()
            .zip(&self.mu)
            .zip(&self.w)
            .map(|((x, m), w)| self.beta * m * x * x + self.h * w * x)
            .sum()
    }

    /// N plane-rotation proposals, then a renormalization against drift.
    pub fn sweep(&mut self) {
        let n = self.s.len();
        for _ in 0..n {
            let i = self.rng.random_range(0..n);
            let mut j = self.rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            // Uniform on (−π, π].
            let theta = std::f64::consts::PI * (1.0 - 2.0 * self.rng.random::<f64>());
            let (sn, c) = theta.sin_cos();
            let (si, sj) = (self.s[i], self.s[j]);
            let ni = c * si - sn * sj;
            let nj = sn * si + c * sj;
            let delta = self.beta * (self.mu[i] * (ni * ni - si * si) + self.mu[j] * (nj * nj - sj * sj))
                + self.h * (self.w[i] * (ni - si) + self.w[j] * (nj - sj));
            self.proposed += 1;
            if delta >= 0.0 || self.rng.random::<f64>() < delta.exp() {
                self.s[i] = ni;
                self.s[j] = nj;
                self.accepted += 1;
            }
        }
        normalize(&mut self.s);
    }
}

fn normalize(s: &mut [f64]) {
    let n = s.len() as f64;
    let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = n.sqrt() / norm;
    s.iter_mut().for_each(|x| *x *= scale);
}

/// `a·b / N`.
pub fn overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Runs one chain and returns its thinned post-burn-in states.
pub fn mcmc_chain(disorder: &DisorderSample, model: &ModelSpec, config: &McConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let mut chain = SphereChain::new(disorder, model, derive_seed(config.seed, disorder.seed))?;
    let mut out = Vec::new();
    for sweep in 1..=config.sweeps {
        chain.sweep();
        if sweep > config.burn_in && (sweep - config.burn_in).is_multiple_of(config.thin) {
            out.push(chain.s.clone());
        }
    }
    Ok(out)
}

/// Mean and effective sample size of a correlated series by batch means.
pub fn batch_means(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n < 2 {
        return (x.first().copied().unwrap_or(f64::NAN), n as f64);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let batch = ((n as f64).sqrt().floor() as usize).max(1);
    let batches = n / batch;
    if var == 0.0 || batches < 2 {
        return (mean, n as f64);
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| x[b * batch..(b + 1) * batch].iter().sum::<f64>() / batch as f64)
        .collect();
    let bvar = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    // Integrated autocorrelation time estimate, never below 1.
    let tau = (batch as f64 * bvar / var).max(1.0);
    (mean, n as f64 / tau)
}

/// Overlap counts on bins of width ε covering [−1, 1], normalized to mass 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub width: f64,
    /// Bin `i` covers `[−1 + iε, −1 + (i+1)ε)`.
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn from_samples(samples: &[f64], width: f64) -> Self {
        let bins = (2.0 / width).ceil() as usize;
        let mut mass = vec![0.0; bins];
        for &r in samples {
            let i = (((r + 1.0) / width).floor().max(0.0) as usize).min(bins - 1);
            mass[i] += 1.0;
        }
        let total = samples.len().max(1) as f64;
        mass.iter_mut().for_each(|m| *m /= total);
        Self { width, mass }
    }

    pub fn center(&self, i: usize) -> f64 {
        -1.0 + (i as f64 + 0.5) * self.width
    }

    /// Center of the heaviest bin (lowest index on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = i;
            }
        }
        self.center(best)
    }

    /// Mass of bins whose centers lie within `half_width` of any target.
    pub fn mass_near(&self, targets: &[f64], half_width: f64) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .filter(|(i, _)| targets.iter().any(|t| (self.center(*i) - t).abs() <= half_width))
            .map(|(_, m)| m)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sweep: usize,
    pub replica_pair: String,
    pub overlap: f64,
}

/// Quenched estimate over disorder samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Disorder average of the per-sample Gibbs average.
    pub mean: f64,
    /// Standard error across disorder samples.
    pub std_error: f64,
    /// Sum of per-chain effective sample sizes.
    pub n_eff: f64,
    /// Per-disorder-sample Gibbs averages.
    pub per_sample: Vec<f64>,
    pub histogram: Histogram,
    pub acceptance_rate: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRow>,
}

/// Observable extracted from the cross overlap R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Moment {
    /// E⟨R⟩.
    First,
    /// E⟨R²⟩.
    Second,
    /// E⟨R^k⟩ for even k.
    Power(u32),
}

impl Moment {
    fn apply(&self, r: f64) -> f64 {
        match self {
            Moment::First => r,
            Moment::Second => r * r,
            Moment::Power(k) => r.powi(*k as i32),
        }
    }
}

/// Overlap series of several chains run in lockstep on one disorder sample.
struct SampleRun {
    /// `pairs[p]` is the overlap series of pair `p`.
    series: Vec<Vec<f64>>,
    sweeps: Vec<usize>,
    proposed: u64,
    accepted: u64,
}

fn run_sample(
    index: usize,
    models: &[ModelSpec],
    pairs: &[(usize, usize)],
    config: &McConfig,
) -> Result<SampleRun> {
    let disorder = sample_disorder(config.n, derive_seed(config.seed, index as u64))?;
    let mut chains = models
        .iter()
        .enumerate()
        .map(|(c, m)| SphereChain::new(&disorder, m, derive_seed(disorder.seed, 1 + c as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut series = vec![Vec::new(); pairs.len()];
    let mut sweeps = Vec::new();
    let recorded: std::collections::BTreeSet<usize> = config.recorded_sweeps().collect();
    for sweep in 1..=config.sweeps {
        chains.iter_mut().for_each(SphereChain::sweep);
        if recorded.contains(&sweep) {
            sweeps.push(sweep);
            for (p, &(a, b)) in pairs.iter().enumerate() {
                series[p].push(overlap(&chains[a].s, &chains[b].s));
            }
        }
    }
    Ok(SampleRun {
        series,
        sweeps,
        proposed: chains.iter().map(|c| c.proposed).sum(),
        accepted: chains.iter().map(|c| c.accepted).sum(),
    })
}

fn run_all(models: &[ModelSpec], pairs: &[(usize, usize)], config: &McConfig) -> Result<Vec<SampleRun>> {
    config.validate()?;
    for m in models {
        m.require_p(2, "Monte Carlo")?;
    }
    (0..config.disorder_samples)
        .into_par_iter()
        .map(|i| run_sample(i, models, pairs, config))
        .collect()
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn estimate_from(runs: &[SampleRun], pair: usize, moment: Moment, config: &McConfig, label: &str) -> Result<McEstimate> {
    let mut per_sample = Vec::new();
    let mut n_eff = 0.0;
    let mut pooled = Vec::new();
    let mut trace = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let obs: Vec<f64> = run.series[pair].iter().map(|&r| moment.apply(r)).collect();
        let (mean, eff) = batch_means(&obs);
        per_sample.push(mean);
        n_eff += eff;
        pooled.extend_from_slice(&run.series[pair]);
        if config.record_trace {
            for (sweep, &r) in run.sweeps.iter().zip(&run.series[pair]) {
                trace.push(TraceRow {
                    sweep: *sweep,
                    replica_pair: format!("d{i}:{label}"),
                    overlap: r,
                });
            }
        }
    }
    if n_eff < MIN_EFFECTIVE_SAMPLES {
        return Err(Error::ChainTooShort {
            n_eff,
            required: MIN_EFFECTIVE_SAMPLES,
        });
    }
    let (mean, std_error) = mean_and_error(&per_sample);
    let proposed: u64 = runs.iter().map(|r| r.proposed).sum();
    let accepted: u64 = runs.iter().map(|r| r.accepted).sum();
    Ok(McEstimate {
        mean,
        std_error,
        n_eff,
        per_sample,
        histogram: Histogram::from_samples(&pooled, config.epsilon),
        acceptance_rate: accepted as f64 / proposed.max(1) as f64,
        trace,
    })
}

/// Cross-overlap moment between a chain of `model1` and one of `model2` on a
/// shared disorder sample (two replicas of one system when the models agree).
pub fn estimate_overlap_moments(
    model1: &ModelSpec,
    model2: &ModelSpec,
    moment: Moment,
    config: &McConfig,
) -> Result<McEstimate> {
    let runs = run_all(&[*model1, *model2], &[(0, 1)], config)?;
    estimate_from(&runs, 0, moment, config, "1-2")
}

/// Both sides of the Cauchy–Schwarz overlap inequality
/// `E⟨R^k⟩₁₂ ≤ √(E⟨R^k⟩₁ E⟨R^k⟩₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Result {
    pub k: u32,
    pub lhs: McEstimate,
    pub rhs: f64,
    pub rhs_std_error: f64,
    pub combined_std_error: f64,
    /// `lhs ≤ rhs + 3·combined_std_error`.
    pub holds: bool,
}

/// Runs two replicas of each system on shared disorder samples.
pub fn lemma2_check(model1: &ModelSpec, model2: &ModelSpec, config: &McConfig, k: u32) -> Result<Lemma2Result> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(Error::invalid(format!("k must be even and >= 2, got {k}")));
    }
    let pairs = [(0, 2), (0, 1), (2, 3)];
    let runs = run_all(&[*model1, *model1, *model2, *model2], &pairs, config)?;
    let moment = Moment::Power(k);
    let lhs = estimate_from(&runs, 0, moment, config, "1a-2a")?;
    let one = estimate_from(&runs, 1, moment, config, "1a-1b")?;
    let two = estimate_from(&runs, 2, moment, config, "2a-2b")?;
    let rhs = (one.mean * two.mean).sqrt();
    let rel = |e: &McEstimate| if e.mean > 0.0 { e.std_error / e.mean } else { 0.0 };
    let rhs_std_error = 0.5 * rhs * (rel(&one).powi(2) + rel(&two).powi(2)).sqrt();
    let combined_std_error = (lhs.std_error.powi(2) + rhs_std_error.powi(2)).sqrt();
    let holds = lhs.mean <= rhs + 3.0 * combined_std_error;
    Ok(Lemma2Result {
        k,
        lhs,
        rhs,
        rhs_std_error,
        combined_std_error,
        holds,
    })
}

/// Writes trace rows as CSV with columns `sweep,replica_pair,overlap`.
pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "sweep,replica_pair,overlap")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.sweep, r.replica_pair, r.overlap)?;
    }
    Ok(())
}
