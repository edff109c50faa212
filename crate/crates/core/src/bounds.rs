//! Upper bounds on the free energy of coupled replicas with constrained
//! overlaps, and the exclusion verdicts they imply.
//!
//! Every bound here is the ε → 0, N → ∞ limit: remainder terms are dropped.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, sym_eigen};
use crate::model::{ModelSpec, OverlapMatrix};
use crate::parisi::{self, PspinCritical};
use crate::tol;

/// Step used for every finite-difference derivative in this module.
pub const FD_STEP: f64 = 1e-5;

/// Parameters of the interpolation bound for `n` coupled replicas.
///
/// `sequence` holds `Q¹ … Q^k` (`Q⁰ = 0` is implicit, `Q^{k+1}` is the
/// constraint) and `a` is `A = A_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInput {
    pub q: OverlapMatrix,
    pub betas: Vec<f64>,
    pub fields: Vec<f64>,
    pub p: u32,
    pub m: Vec<f64>,
    pub sequence: Vec<DMatrix<f64>>,
    pub a: DMatrix<f64>,
}

impl BoundInput {
    /// Uses `A_k` as the free parameter and sets `A = A_k + Δ_k`.
    pub fn with_a_k(
        q: OverlapMatrix,
        betas: Vec<f64>,
        fields: Vec<f64>,
        p: u32,
        m: Vec<f64>,
        sequence: Vec<DMatrix<f64>>,
        a_k: DMatrix<f64>,
    ) -> Result<Self> {
        let mut input = Self {
            q,
            betas,
            fields,
            p,
            m,
            sequence,
            a: a_k.clone(),
        };
        input.validate_shapes()?;
        let hats = input.hats();
        let k = input.m.len();
        input.a = a_k + (&hats[k + 1] - &hats[k]);
        Ok(input)
    }

    fn n(&self) -> usize {
        self.q.n()
    }

    fn validate_shapes(&self) -> Result<()> {
        let n = self.n();
        if self.betas.len() != n || self.fields.len() != n {
            return Err(Error::invalid("need one temperature and one field per replica"));
        }
        if self.betas.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
            return Err(Error::invalid("temperatures must be positive"));
        }
        if self.p < 2 || !self.p.is_multiple_of(2) {
            return Err(Error::invalid(format!("p must be even and >= 2, got {}", self.p)));
        }
        let k = self.m.len();
        if k == 0 || self.sequence.len() != k {
            return Err(Error::invalid("need k >= 1 weights and k matrices Q^1..Q^k"));
        }
        if self.m.iter().any(|&x| !(x > 0.0 && x <= 1.0))
            || self.m.windows(2).any(|w| w[0] >= w[1])
            || self.m[k - 1] != 1.0
        {
            return Err(Error::invalid("weights must increase strictly in (0, 1] and end at 1"));
        }
        for mat in self.sequence.iter().chain(std::iter::once(&self.a)) {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::invalid("matrix dimensions do not match the constraint"));
            }
            let asym = linalg::max_asymmetry(mat);
            if asym > tol::SYM {
                return Err(Error::NonSymmetric(asym));
            }
        }
        Ok(())
    }

    /// `Q⁰ … Q^{k+1}`.
    fn full_sequence(&self) -> Vec<DMatrix<f64>> {
        let n = self.n();
        let mut out = vec![DMatrix::zeros(n, n)];
        out.extend(self.sequence.iter().cloned());
        out.push(self.q.as_matrix().clone());
        out
    }

    /// `Q̂^l = (β_j β_j' ξ'(q^l_jj'))` for `l = 0..=k+1`.
    fn hats(&self) -> Vec<DMatrix<f64>> {
        let model = ModelSpec::new(self.p, 1.0, 0.0).expect("validated p");
        self.full_sequence()
            .iter()
            .map(|ql| linalg::scale_entries(&ql.map(|x| model.xi_prime(x)), &self.betas))
            .collect()
    }
}

/// Half the right side of the interpolation bound, i.e. a bound on F.
pub fn guerra_bound(input: &BoundInput) -> Result<f64> {
    input.validate_shapes()?;
    let n = input.n();
    let k = input.m.len();
    let model = ModelSpec::new(input.p, 1.0, 0.0)?;
    let seq = input.full_sequence();
    let hats = input.hats();
    let deltas: Vec<DMatrix<f64>> = (0..=k).map(|l| &hats[l + 1] - &hats[l]).collect();
    for (l, d) in deltas.iter().enumerate() {
        if !linalg::psd_check(d, tol::PSD)? {
            return Err(Error::domain(format!("Delta_{l} is not nonnegative definite")));
        }
    }

    // A_{k+1} = A, A_l = A_{l+1} − m_l Δ_l; index l ↦ a_seq[l].
    let mut a_seq = vec![DMatrix::zeros(n, n); k + 2];
    a_seq[k + 1] = input.a.clone();
    for l in (1..=k).rev() {
        a_seq[l] = &a_seq[l + 1] - &deltas[l] * input.m[l - 1];
    }
    let mut logdets = vec![0.0; k + 2];
    let mut a1_inv = DMatrix::zeros(n, n);
    for l in 1..=k + 1 {
        let (inv, logdet) = linalg::spd_inverse_logdet(&a_seq[l])
            .map_err(|_| Error::domain(format!("A_{l} is not positive definite")))?;
        logdets[l] = logdet;
        if l == 1 {
            a1_inv = inv;
        }
    }

    let h = nalgebra::DVector::from_column_slice(&input.fields);
    let mut total = linalg::trace_of_product(&input.a, input.q.as_matrix()) - n as f64
        + (h.transpose() * &a1_inv * &h)[(0, 0)]
        + linalg::trace_of_product(&a1_inv, &deltas[0])
        - logdets[k + 1];
    for l in 1..=k {
        let ml = input.m[l - 1];
        total += (logdets[l + 1] - logdets[l]) / ml;
        let mut theta_sum = 0.0;
        for j in 0..n {
            for jp in 0..n {
                theta_sum += input.betas[j]
                    * input.betas[jp]
                    * (model.theta(seq[l + 1][(j, jp)]) - model.theta(seq[l][(j, jp)]));
            }
        }
        total -= ml * theta_sum;
    }
    Ok(0.5 * total)
}

/// Why a constraint was (or was not) excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    /// All rescaled eigenvalues are at least 1: the bound is the trivial sum.
    Admissible,
    /// Some rescaled eigenvalue is below 1.
    SmallEigenvalue,
    /// The configuration is not a valid overlap matrix at all.
    NotPositiveDefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionVerdict {
    /// The evaluated bound; `None` when it is `−∞` or undefined.
    pub bound: Option<f64>,
    pub trivial_sum: f64,
    pub excluded: bool,
    pub margin_used: f64,
    /// Eigenvalues of the rescaled constraint, ascending.
    pub eigenvalues: Vec<f64>,
    pub reason: VerdictReason,
}

/// `log r + r²/2` below 1, `2r − 3/2` above.
pub fn f_theorem1(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("f needs r > 0, got {r}")));
    }
    Ok(if r <= 1.0 { r.ln() + 0.5 * r * r } else { 2.0 * r - 1.5 })
}

/// Rescaled constraint `(√(β_j β_j') q_jj')`.
pub fn rescaled_constraint(q: &OverlapMatrix, betas: &[f64]) -> DMatrix<f64> {
    let roots: Vec<f64> = betas.iter().map(|b| b.sqrt()).collect();
    linalg::scale_entries(q.as_matrix(), &roots)
}

fn check_sk_temperatures(q: &OverlapMatrix, betas: &[f64]) -> Result<()> {
    if betas.len() != q.n() {
        return Err(Error::invalid("need one temperature per replica"));
    }
    if betas.iter().any(|&b| !(b > 1.0 && b.is_finite())) {
        return Err(Error::invalid("the eigenvalue bound needs every beta > 1"));
    }
    Ok(())
}

fn sk_trivial_sum(betas: &[f64]) -> Result<f64> {
    betas
        .iter()
        .map(|&b| parisi::free_energy(&ModelSpec::sk(b, 0.0)?))
        .sum()
}

/// Eigenvalue bound for 2-spin replicas without field.
///
/// A constraint is excluded when the smallest rescaled eigenvalue is below
/// `1 − margin`. The bound's own gap to the trivial sum is cubic in the
/// distance to 1, so comparing bound values would blur the threshold.
pub fn bound_theorem1(q: &OverlapMatrix, betas: &[f64]) -> Result<ExclusionVerdict> {
    check_sk_temperatures(q, betas)?;
    let eig = sym_eigen(&rescaled_constraint(q, betas))?;
    let trivial_sum = sk_trivial_sum(betas)?;
    let margin = tol::EXCLUSION_MARGIN;
    let min_r = eig.min();
    let bound = if min_r > 0.0 {
        let mut acc = 0.0;
        for (r, b) in eig.eigenvalues.iter().zip(betas) {
            acc += f_theorem1(*r)? - b.ln();
        }
        Some(0.5 * acc)
    } else {
        None
    };
    let excluded = min_r < 1.0 - margin;
    Ok(ExclusionVerdict {
        bound,
        trivial_sum,
        excluded,
        margin_used: margin,
        eigenvalues: eig.eigenvalues,
        reason: if excluded {
            VerdictReason::SmallEigenvalue
        } else {
            VerdictReason::Admissible
        },
    })
}

/// Verdict on the non-ultrametric triple `[[1,q,q],[q,1,−q],[q,−q,1]]` with
/// `q = 1 − 1/β` for three replicas at the same temperature.
pub fn ultrametricity_verdict(beta: f64) -> Result<ExclusionVerdict> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("needs beta > 1, got {beta}")));
    }
    let q = 1.0 - 1.0 / beta;
    // Smallest eigenvalue of the unscaled matrix is 1 − 2q.
    if 1.0 - 2.0 * q <= tol::PSD {
        let r = [beta * (1.0 - 2.0 * q), beta * (1.0 + q), beta * (1.0 + q)];
        return Ok(ExclusionVerdict {
            bound: None,
            trivial_sum: sk_trivial_sum(&[beta; 3])?,
            excluded: true,
            margin_used: tol::EXCLUSION_MARGIN,
            eigenvalues: r.to_vec(),
            reason: VerdictReason::NotPositiveDefinite,
        });
    }
    bound_theorem1(&OverlapMatrix::non_ultrametric(q)?, &[beta; 3])
}

/// Parameters of the diagonalized construction that attains the eigenvalue
/// bound: one-step sequence from the eigenvalues `r¹ = max(r − 1, 0)` and
/// `A` from `b = 2` (r ≥ 1) or `b = r + 1/r` (r < 1).
pub fn theorem1_construction(q: &OverlapMatrix, betas: &[f64]) -> Result<BoundInput> {
    check_sk_temperatures(q, betas)?;
    let eig = sym_eigen(&rescaled_constraint(q, betas))?;
    if eig.min() <= 0.0 {
        return Err(Error::domain("construction needs a nonsingular constraint"));
    }
    let r1 = |r: f64| if r >= 1.0 { r - 1.0 } else { 0.0 };
    let b = |r: f64| if r >= 1.0 { 2.0 } else { r + 1.0 / r };
    let map_by_index = |f: &dyn Fn(f64) -> f64| {
        let n = eig.eigenvalues.len();
        let mut out = DMatrix::zeros(n, n);
        for (c, &r) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(c);
            out += v * v.transpose() * f(r);
        }
        linalg::symmetrize(&out)
    };
    let inv_roots: Vec<f64> = betas.iter().map(|b| 1.0 / b.sqrt()).collect();
    let roots: Vec<f64> = betas.iter().map(|b| b.sqrt()).collect();
    let q1 = linalg::scale_entries(&map_by_index(&r1), &inv_roots);
    let a = linalg::scale_entries(&map_by_index(&b), &roots);
    Ok(BoundInput {
        q: q.clone(),
        betas: betas.to_vec(),
        fields: vec![0.0; betas.len()],
        p: 2,
        m: vec![1.0],
        sequence: vec![q1],
        a,
    })
}

/// Parameters `Q¹ = Q − β⁻¹I`, `A = 2βI`, `m = (1)` for equal temperatures.
pub fn shifted_parameters(q: &OverlapMatrix, beta: f64) -> Result<BoundInput> {
    let n = q.n();
    let q1 = q.as_matrix() - DMatrix::identity(n, n) / beta;
    Ok(BoundInput {
        q: q.clone(),
        betas: vec![beta; n],
        fields: vec![0.0; n],
        p: 2,
        m: vec![1.0],
        sequence: vec![q1],
        a: DMatrix::identity(n, n) * (2.0 * beta),
    })
}

fn require_sk(model: &ModelSpec) -> Result<()> {
    model.require_p(2, "the chaos analysis")
}

/// Predicted cross overlap of two 2-spin systems at different parameters.
pub fn chaos_u0(model1: &ModelSpec, model2: &ModelSpec) -> Result<f64> {
    require_sk(model1)?;
    require_sk(model2)?;
    let (h1, h2) = (model1.h(), model2.h());
    if h1 == 0.0 && h2 == 0.0 {
        return Err(Error::BothFieldsZero);
    }
    let q1 = parisi::solve_q_2spin(model1)?;
    let q2 = parisi::solve_q_2spin(model2)?;
    if h1 == 0.0 || h2 == 0.0 {
        return Ok(0.0);
    }
    let g = (1.0 - q1) * (1.0 - q2);
    Ok(h1 * h2 * g / (1.0 - model1.beta() * model2.beta() * g))
}

/// `u₀` together with the window `|u| ≤ √(q₁q₂)` the bound analysis covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosPrediction {
    pub u0: f64,
    pub q1: f64,
    pub q2: f64,
    pub window: f64,
    /// Whether `|u₀| < √(q₁q₂)`; reported, not assumed.
    pub inside_window: bool,
}

pub fn chaos_prediction(model1: &ModelSpec, model2: &ModelSpec) -> Result<ChaosPrediction> {
    let u0 = chaos_u0(model1, model2)?;
    let q1 = parisi::solve_q_2spin(model1)?;
    let q2 = parisi::solve_q_2spin(model2)?;
    let window = (q1 * q2).sqrt();
    Ok(ChaosPrediction {
        u0,
        q1,
        q2,
        window,
        inside_window: u0.abs() < window,
    })
}

/// One-step coupled bound for two 2-spin systems with cross overlap `u`,
/// diagonal `a₁, a₂` and off-diagonal `λ` of `A₁` (twice the bound on F).
pub fn coupled_field_bound_u(
    model1: &ModelSpec,
    model2: &ModelSpec,
    u: f64,
    a1: f64,
    a2: f64,
    lambda: f64,
) -> Result<f64> {
    require_sk(model1)?;
    require_sk(model2)?;
    let det = a1 * a2 - lambda * lambda;
    if !(det > 0.0 && a1 > 0.0) {
        return Err(Error::domain(format!("a1 a2 - lambda^2 = {det} is not positive")));
    }
    let q1 = parisi::solve_q_2spin(model1)?;
    let q2 = parisi::solve_q_2spin(model2)?;
    let (b1, b2) = (model1.beta(), model2.beta());
    let (h1, h2) = (model1.h(), model2.h());
    Ok(0.5 * b1 * b1 * (1.0 - q1).powi(2) + 0.5 * b2 * b2 * (1.0 - q2).powi(2) + a1 + a2 - 2.0
        + 2.0 * lambda * u
        - det.ln()
        + (a2 * (b1 * b1 * q1 + h1 * h1) + a1 * (b2 * b2 * q2 + h2 * h2)
            - 2.0 * (b1 * b2 * u + h1 * h2) * lambda)
            / det)
}

/// `∂U/∂λ` by central differences.
pub fn coupled_field_dlambda(
    model1: &ModelSpec,
    model2: &ModelSpec,
    u: f64,
    a1: f64,
    a2: f64,
    lambda: f64,
) -> Result<f64> {
    let at = |l: f64| coupled_field_bound_u(model1, model2, u, a1, a2, l);
    Ok((at(lambda + FD_STEP)? - at(lambda - FD_STEP)?) / (2.0 * FD_STEP))
}

/// Closed form of `∂U/∂λ` at `λ = 0`.
pub fn coupled_field_dlambda_at_zero(model1: &ModelSpec, model2: &ModelSpec, u: f64, a1: f64, a2: f64) -> f64 {
    2.0 * (u - (model1.beta() * model2.beta() * u + model1.h() * model2.h()) / (a1 * a2))
}

/// Natural diagonal `a_j = 1/(1 − q_j)`.
pub fn natural_diagonal(model: &ModelSpec) -> Result<f64> {
    Ok(1.0 / (1.0 - parisi::solve_q_2spin(model)?))
}

/// Two pure p-spin systems without field, both in the nontrivial phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPspin {
    pub model1: ModelSpec,
    pub model2: ModelSpec,
    pub crit1: PspinCritical,
    pub crit2: PspinCritical,
}

impl CoupledPspin {
    pub fn new(model1: ModelSpec, model2: ModelSpec) -> Result<Self> {
        if model1.p() != model2.p() {
            return Err(Error::invalid("both systems must share p"));
        }
        let crit1 = parisi::pspin_critical(&model1)?;
        let crit2 = parisi::pspin_critical(&model2)?;
        Ok(Self {
            model1,
            model2,
            crit1,
            crit2,
        })
    }

    /// `m₀` with `1/m₀ = 1/m₁ + 1/m₂`.
    pub fn m0(&self) -> f64 {
        1.0 / (1.0 / self.crit1.m + 1.0 / self.crit2.m)
    }

    /// `2P(β₁) + 2P(β₂)`.
    pub fn trivial_value(&self) -> f64 {
        2.0 * (parisi::pspin_functional(&self.model1, self.crit1.q, self.crit1.m)
            + parisi::pspin_functional(&self.model2, self.crit2.q, self.crit2.m))
    }

    fn common(&self) -> f64 {
        let mut acc = 0.0;
        for (model, crit) in [(&self.model1, &self.crit1), (&self.model2, &self.crit2)] {
            let b2 = model.beta().powi(2);
            let q = crit.q;
            let b = 1.0 / (1.0 - q);
            acc += -b2 * (model.theta(1.0) - model.theta(q)) + b2 * (model.xi_prime(1.0) - model.xi_prime(q))
                + b
                - 1.0
                - b.ln();
        }
        acc
    }

    /// `U(m, c)` evaluated term by term, `u = c√(q₁q₂)`.
    pub fn u(&self, m: f64, c: f64) -> Result<f64> {
        check_unit(c)?;
        let p = self.model1.p() as i32;
        let (cp, cp1) = (c.powi(p), c.powi(p - 1));
        let parts = [(&self.model1, &self.crit1), (&self.model2, &self.crit2)];
        let mut first = 0.0;
        let mut theta_all = 0.0;
        let mut second = 0.0;
        let mut s = 0.0;
        for (model, crit) in parts {
            let b2 = model.beta().powi(2);
            let (q, mj) = (crit.q, crit.m);
            let b = 1.0 / (1.0 - q);
            first += mj * b2 * model.theta(q);
            theta_all += b2 * model.theta(q);
            let arg = 1.0 - mj * b2 * model.xi_prime(q) * (1.0 - cp1) / b;
            second -= log_positive(arg)? / mj;
            s += b2 * model.xi_prime(q) * cp1 / (b - mj * b2 * model.xi_prime(q) * (1.0 - cp1));
        }
        let cross = 2.0
            * self.model1.beta()
            * self.model2.beta()
            * self.model1.theta((self.crit1.q * self.crit2.q).sqrt());
        let term_i = -first * (1.0 - cp) - m * (theta_all + cross) * cp;
        let term_ii = second - log_positive(1.0 - m * s)? / m;
        Ok(self.common() + term_i + term_ii)
    }

    /// `U(m, c)` after substituting the critical-point identities.
    pub fn u_reduced(&self, m: f64, c: f64) -> Result<f64> {
        check_unit(c)?;
        let p = self.model1.p() as i32;
        let (cp, cp1) = (c.powi(p), c.powi(p - 1));
        let inv_m0 = 1.0 / self.m0();
        let (gamma, delta) = (self.crit1.gamma, self.crit1.delta);
        let term_i = -inv_m0 * gamma * (1.0 - cp) - m * inv_m0 * inv_m0 * gamma * cp;
        let base = 1.0 - delta * (1.0 - cp1);
        let term_ii = -inv_m0 * log_positive(base)?
            - log_positive(1.0 - m * inv_m0 * delta * cp1 / base)? / m;
        Ok(self.common() + term_i + term_ii)
    }

    /// Closed form of `∂U/∂m` at `m₀`.
    pub fn d(&self, c: f64) -> f64 {
        let p = self.model1.p() as i32;
        let x = self.crit1.x;
        let inv_m0 = 1.0 / self.m0();
        inv_m0 * inv_m0 * (-self.crit1.gamma * c.powi(p) - (x * c.powi(p - 1)).ln_1p() + x * c.powi(p - 1))
    }

    /// `∂U/∂m` at `m₀` by central differences.
    pub fn d_numeric(&self, c: f64) -> Result<f64> {
        let m0 = self.m0();
        Ok((self.u(m0 + FD_STEP, c)? - self.u(m0 - FD_STEP, c)?) / (2.0 * FD_STEP))
    }

    /// The four-level interpolation parameters whose bound is `U(m, c)/2`.
    pub fn bound_input(&self, m: f64, c: f64) -> Result<BoundInput> {
        let (q1, q2) = (self.crit1.q, self.crit2.q);
        let u = c * (q1 * q2).sqrt();
        let mat = |a: f64, b: f64| DMatrix::from_row_slice(2, 2, &[a, u, u, b]);
        let diag = |a: f64, b: f64| DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b]);
        BoundInput::with_a_k(
            OverlapMatrix::pair(u)?,
            vec![self.model1.beta(), self.model2.beta()],
            vec![0.0, 0.0],
            self.model1.p(),
            vec![m, self.crit1.m, self.crit2.m, 1.0],
            vec![DMatrix::zeros(2, 2), mat(c * q1, c * q2), mat(q1, c * q2), mat(q1, q2)],
            diag(1.0 / (1.0 - q1), 1.0 / (1.0 - q2)),
        )
    }
}

fn check_unit(c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::invalid(format!("c must lie in [0, 1], got {c}")));
    }
    Ok(())
}

fn log_positive(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("logarithm of nonpositive argument {x}")));
    }
    Ok(x.ln())
}

/// One pure p-spin system without field, for overlaps above `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PspinTail {
    pub model: ModelSpec,
    pub crit: PspinCritical,
}

impl PspinTail {
    pub fn new(model: ModelSpec) -> Result<Self> {
        let crit = parisi::pspin_critical(&model)?;
        Ok(Self { model, crit })
    }

    fn dxi(&self, u: f64) -> f64 {
        self.model.xi_prime(u) - self.model.xi_prime(self.crit.q)
    }

    /// `a₀ = 1/(1 − q) + β²(ξ'(u) − ξ'(q))`.
    pub fn a0(&self, u: f64) -> f64 {
        1.0 / (1.0 - self.crit.q) + self.model.beta().powi(2) * self.dxi(u)
    }

    /// Three-level bound `U(n, a)` for two replicas at overlap `u > q`
    /// (twice the bound on F).
    pub fn u(&self, n: f64, a: f64, u: f64) -> Result<f64> {
        let model = &self.model;
        let (q, m) = (self.crit.q, self.crit.m);
        if !(u > q && u <= 1.0) {
            return Err(Error::invalid(format!("u must lie in (q, 1] = ({q}, 1], got {u}")));
        }
        if !(n > 0.0 && a > 0.0) {
            return Err(Error::invalid("n and a must be positive"));
        }
        let b2 = model.beta().powi(2);
        let top = a - n * b2 * self.dxi(u);
        let bottom = top - m * b2 * model.xi_prime(q);
        Ok(-b2 * (model.theta(1.0) - model.theta(u)) - n * b2 * (model.theta(u) - model.theta(q))
            - m * b2 * model.theta(q)
            + b2 * (model.xi_prime(1.0) - model.xi_prime(u))
            + a
            - 1.0
            - a.ln()
            - log_positive(top / a)? / n
            - log_positive(bottom / top)? / m)
    }

    /// Closed form of `∂U(n, a₀)/∂n` at `n = 1`.
    pub fn d(&self, u: f64) -> f64 {
        let model = &self.model;
        let (q, m) = (self.crit.q, self.crit.m);
        let b2 = model.beta().powi(2);
        let g = b2 * self.dxi(u) * (1.0 - q);
        -b2 * (model.theta(u) - model.theta(q)) + (1.0 - 1.0 / m) * g
            + g / (m * (1.0 - m * b2 * model.xi_prime(q) * (1.0 - q)))
            - g.ln_1p()
    }

    /// `∂U(n, a₀)/∂n` at `n = 1` by central differences.
    pub fn d_numeric(&self, u: f64) -> Result<f64> {
        let a0 = self.a0(u);
        Ok((self.u(1.0 + FD_STEP, a0, u)? - self.u(1.0 - FD_STEP, a0, u)?) / (2.0 * FD_STEP))
    }

    /// `2P(β)`.
    pub fn trivial_value(&self) -> f64 {
        2.0 * parisi::pspin_functional(&self.model, self.crit.q, self.crit.m)
    }
}

/// Minimizer and value of `½(Tr(AQ) + Tr(A⁻¹Δ₀) − n − log|A|)` over
/// positive definite `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma4Solution {
    pub value: f64,
    pub a: DMatrix<f64>,
    /// Max-entry norm of `Q − A⁻¹ − A⁻¹Δ₀A⁻¹`.
    pub stationarity: f64,
}

/// The objective at a given `A`.
pub fn lemma4_objective(q: &DMatrix<f64>, delta0: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let n = q.nrows();
    let (inv, logdet) = linalg::spd_inverse_logdet(a)?;
    Ok(0.5 * (linalg::trace_of_product(a, q) + linalg::trace_of_product(&inv, delta0) - n as f64 - logdet))
}

/// Closed-form minimizer.
///
/// With `C = Q^{1/2}` and `K = CΔ₀C`, stationarity `Q = X + XΔ₀X` for
/// `X = A⁻¹` is solved by `X = C W C`, `W = 2(I + (I + 4K)^{1/2})⁻¹`. The
/// objective is convex in `A`, so this stationary point is the minimum.
pub fn lemma4_value(q: &DMatrix<f64>, delta0: &DMatrix<f64>) -> Result<Lemma4Solution> {
    let n = q.nrows();
    if delta0.nrows() != n || delta0.ncols() != n || q.ncols() != n {
        return Err(Error::invalid("Q and Delta0 must be square of equal size"));
    }
    let eq = sym_eigen(q)?;
    if eq.min() <= tol::PSD {
        return Err(Error::domain("Q must be positive definite"));
    }
    let ed = sym_eigen(delta0)?;
    if ed.min() < -tol::PSD {
        return Err(Error::domain("Delta0 must be nonnegative definite"));
    }
    let c = eq.map(f64::sqrt);
    let c_inv = eq.map(|l| 1.0 / l.sqrt());
    let k_mat = linalg::symmetrize(&(&c * delta0 * &c));
    let ek = sym_eigen(&k_mat)?;
    let g = |kappa: f64| 2.0 / (1.0 + (1.0 + 4.0 * kappa.max(0.0)).sqrt());
    let w = ek.map(g);
    let w_inv = ek.map(|kappa| 1.0 / g(kappa));
    let a = linalg::symmetrize(&(&c_inv * &w_inv * &c_inv));
    let x = linalg::symmetrize(&(&c * &w * &c));

    let log_det_q: f64 = eq.eigenvalues.iter().map(|l| l.ln()).sum();
    let log_det_w: f64 = ek.eigenvalues.iter().map(|&kappa| g(kappa).ln()).sum();
    let value = 0.5
        * (w_inv.trace() + linalg::trace_of_product(&w, &k_mat) - n as f64 + log_det_q + log_det_w);
    let residual = q - &x - &x * delta0 * &x;
    let stationarity = residual.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if stationarity > tol::GRAD {
        return Err(Error::NoConvergence {
            what: "Gaussian reference minimizer",
            iterations: 1,
        });
    }
    Ok(Lemma4Solution {
        value,
        a,
        stationarity,
    })
}

/// Interpolation endpoint for `n` equal-temperature replicas with
/// `Δ₀ = β²(Q − β⁻¹I)`, `Δ₁ = βI`: `nβ/2` plus the Gaussian reference value.
pub fn theorem2_phi0(q: &OverlapMatrix, beta: f64) -> Result<(f64, Lemma4Solution)> {
    if !(beta > 1.0) {
        return Err(Error::invalid("needs beta > 1"));
    }
    let n = q.n();
    let q1 = q.as_matrix() - DMatrix::identity(n, n) / beta;
    if !linalg::psd_check(&q1, tol::PSD)? {
        return Err(Error::domain("Q - I/beta must be nonnegative definite"));
    }
    let sol = lemma4_value(q.as_matrix(), &(q1 * (beta * beta)))?;
    Ok((0.5 * n as f64 * beta + sol.value, sol))
}

/// `(n/2)(3β − 2 − log β − t(β − ½))`.
pub fn psi_t(beta: f64, n: usize, t: f64) -> Result<f64> {
    if !(beta > 1.0) {
        return Err(Error::invalid("needs beta > 1"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("t must lie in [0, 1]"));
    }
    Ok(0.5 * n as f64 * (3.0 * beta - 2.0 - beta.ln() - t * (beta - 0.5)))
}

/// Large-deviation rate `½(a − 1 − log a)`.
pub fn tau(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::domain(format!("tau needs a > 0, got {a}")));
    }
    Ok(0.5 * (a - 1.0 - a.ln()))
}

/// Smallest `|u|` on `[lo, hi]` at which the two-replica constraint `[[1,u],[u,1]]`
/// flips to excluded, by bisection on the verdict.
pub fn pair_exclusion_threshold(beta1: f64, beta2: f64, lo: f64, hi: f64) -> Result<f64> {
    let excluded = |u: f64| -> Result<bool> {
        Ok(bound_theorem1(&OverlapMatrix::pair(u)?, &[beta1, beta2])?.excluded)
    };
    if excluded(lo)? || !excluded(hi)? {
        return Err(Error::NoRoot("verdict does not flip on the interval".into()));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-12 {
        let mid = 0.5 * (a + b);
        if excluded(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed(beta: f64) -> f64 {
        0.5 * (2.0 * beta - 1.5 - beta.ln())
    }

    #[test]
    fn f_values() {
        assert!((f_theorem1(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((f_theorem1(0.5).unwrap() - (0.5f64.ln() + 0.125)).abs() < 1e-15);
        assert!(f_theorem1(0.5).unwrap() < -0.5);
        assert!((f_theorem1(2.0).unwrap() - 2.5).abs() < 1e-15);
        assert!(f_theorem1(0.0).is_err());
        // Both branch derivatives equal 2 at r = 1.
        let left = (f_theorem1(1.0).unwrap() - f_theorem1(1.0 - 1e-7).unwrap()) / 1e-7;
        assert!((left - 2.0).abs() < 1e-6);
    }

    #[test]
    fn example_one_pairs() {
        let v = bound_theorem1(&OverlapMatrix::pair(0.5).unwrap(), &[2.0, 2.0]).unwrap();
        assert!((v.eigenvalues[0] - 1.0).abs() < 1e-14 && (v.eigenvalues[1] - 3.0).abs() < 1e-14);
        assert!(!v.excluded);
        assert!((v.bound.unwrap() - 2.0 * closed(2.0)).abs() < 1e-12);

        let v = bound_theorem1(&OverlapMatrix::pair(0.8).unwrap(), &[2.0, 2.0]).unwrap();
        assert!((v.eigenvalues[0] - 0.4).abs() < 1e-14);
        assert!(v.excluded);
        assert!(v.bound.unwrap() < v.trivial_sum);
    }

    #[test]
    fn ultrametric_examples() {
        let v = ultrametricity_verdict(1.5).unwrap();
        assert!(v.excluded);
        assert!((v.eigenvalues[0] - 0.5).abs() < 1e-14);
        let v = ultrametricity_verdict(1.01).unwrap();
        assert!(v.excluded && (v.eigenvalues[0] - 0.99).abs() < 1e-12);
        let v = ultrametricity_verdict(2.5).unwrap();
        assert!(v.excluded && v.reason == VerdictReason::NotPositiveDefinite);
        assert!(ultrametricity_verdict(1.0).is_err());
    }

    #[test]
    fn shifted_parameters_give_trivial_sum() {
        let q = OverlapMatrix::pair(0.2).unwrap();
        let v = guerra_bound(&shifted_parameters(&q, 2.0).unwrap()).unwrap();
        assert!((v - 2.0 * closed(2.0)).abs() < 1e-12);
    }

    #[test]
    fn single_replica_reduces_to_parisi_form() {
        let beta: f64 = 2.0;
        let q = OverlapMatrix::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let input = BoundInput {
            q,
            betas: vec![beta],
            fields: vec![0.0],
            p: 2,
            m: vec![1.0],
            sequence: vec![DMatrix::from_element(1, 1, 0.5)],
            a: DMatrix::from_element(1, 1, 4.0),
        };
        let g = guerra_bound(&input).unwrap();
        let model = ModelSpec::sk(beta, 0.0).unwrap();
        let s = parisi::RsbScheme::replica_symmetric(0.5, Some(4.0)).unwrap();
        assert!((g - parisi::eval_parisi(&model, &s).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn negative_delta_rejected() {
        let q = OverlapMatrix::pair(0.2).unwrap();
        let mut input = shifted_parameters(&q, 2.0).unwrap();
        input.sequence[0] = DMatrix::from_row_slice(2, 2, &[1.2, 0.2, 0.2, 0.5]);
        assert!(matches!(guerra_bound(&input), Err(Error::Domain(_))));
    }

    #[test]
    fn construction_matches_eigenvalue_bound() {
        for (u, betas) in [(0.3, [2.0, 1.5]), (0.9, [2.0, 2.0]), (-0.6, [1.2, 3.0])] {
            let q = OverlapMatrix::pair(u).unwrap();
            let v = bound_theorem1(&q, &betas).unwrap();
            let g = guerra_bound(&theorem1_construction(&q, &betas).unwrap()).unwrap();
            assert!((g - v.bound.unwrap()).abs() < 1e-10, "{u}: {g} vs {:?}", v.bound);
        }
    }

    #[test]
    fn chaos_examples() {
        let m1 = ModelSpec::sk(2.0, 0.0).unwrap();
        let m2 = ModelSpec::sk(1.0, 0.5).unwrap();
        assert_eq!(chaos_u0(&m1, &m2).unwrap(), 0.0);
        assert!(matches!(chaos_u0(&m1, &m1), Err(Error::BothFieldsZero)));
        let m = ModelSpec::sk(1.5, 0.4).unwrap();
        let q = parisi::solve_q_2spin(&m).unwrap();
        let want = 0.16 * (1.0 - q).powi(2) / (1.0 - 2.25 * (1.0 - q).powi(2));
        assert!((chaos_u0(&m, &m).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn coupled_field_bound_trivial_point() {
        let m1 = ModelSpec::sk(2.0, 0.0).unwrap();
        let m2 = ModelSpec::sk(1.5, 0.4).unwrap();
        let (a1, a2) = (natural_diagonal(&m1).unwrap(), natural_diagonal(&m2).unwrap());
        let u = coupled_field_bound_u(&m1, &m2, 0.1, a1, a2, 0.0).unwrap();
        let sum = parisi::free_energy(&m1).unwrap() + parisi::free_energy(&m2).unwrap();
        assert!((0.5 * u - sum).abs() < 1e-12);
        let fd = coupled_field_dlambda(&m1, &m2, 0.1, a1, a2, 0.0).unwrap();
        assert!((fd - coupled_field_dlambda_at_zero(&m1, &m2, 0.1, a1, a2)).abs() < 1e-8);
        assert!(coupled_field_bound_u(&m1, &m2, 0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn coupled_pspin_identities() {
        let cp = CoupledPspin::new(
            ModelSpec::new(4, 3.5, 0.0).unwrap(),
            ModelSpec::new(4, 3.0, 0.0).unwrap(),
        )
        .unwrap();
        let m0 = cp.m0();
        for i in 0..=10 {
            let c = i as f64 / 10.0;
            let u = cp.u(m0, c).unwrap();
            assert!((u - cp.trivial_value()).abs() < 1e-10, "c={c}");
            assert!((u - cp.u_reduced(m0, c).unwrap()).abs() < 1e-10);
            let mm = 0.7 * m0;
            let via_bound = 2.0 * guerra_bound(&cp.bound_input(mm, c).unwrap()).unwrap();
            assert!((cp.u(mm, c).unwrap() - via_bound).abs() < 1e-10, "c={c}");
        }
        assert!(cp.d(0.0).abs() < 1e-12 && cp.d(1.0).abs() < 1e-9);
        assert!(cp.d(0.5) < -1e-6);
        assert!((cp.d(0.5) - cp.d_numeric(0.5).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn pspin_tail_identities() {
        let t = PspinTail::new(ModelSpec::new(4, 3.0, 0.0).unwrap()).unwrap();
        let q = t.crit.q;
        for u in [q + 0.02, 0.9, 1.0] {
            let v = t.u(1.0, t.a0(u), u).unwrap();
            assert!((v - t.trivial_value()).abs() < 1e-12);
            assert!((t.d(u) - t.d_numeric(u).unwrap()).abs() < 1e-7);
            assert!(t.d(u) < 0.0);
        }
        assert!(t.d(q).abs() < 1e-12);
    }

    #[test]
    fn lemma4_cases() {
        let id = DMatrix::<f64>::identity(2, 2);
        let s = lemma4_value(&id, &DMatrix::zeros(2, 2)).unwrap();
        assert!(s.value.abs() < 1e-14);
        assert!(linalg::max_abs_diff(&s.a, &id) < 1e-14);

        let q = OverlapMatrix::pair(0.3).unwrap();
        let (phi0, sol) = theorem2_phi0(&q, 2.0).unwrap();
        assert!(linalg::max_abs_diff(&sol.a, &(id * 2.0)) < 1e-12);
        assert!((phi0 - (6.0 - 2.0 - 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn lemma4_beats_perturbations() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let d0 = DMatrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, 0.3]);
        let s = lemma4_value(&q, &d0).unwrap();
        assert!((lemma4_objective(&q, &d0, &s.a).unwrap() - s.value).abs() < 1e-13);
        for e in [(0, 0), (0, 1), (1, 1)] {
            for sgn in [-1.0, 1.0] {
                let mut a = s.a.clone();
                a[e] += sgn * 1e-3;
                a[(e.1, e.0)] = a[e];
                assert!(lemma4_objective(&q, &d0, &a).unwrap() >= s.value);
            }
        }
    }

    #[test]
    fn psi_and_tau() {
        assert!((psi_t(2.0, 2, 0.0).unwrap() - (4.0 - 2f64.ln())).abs() < 1e-15);
        assert!((psi_t(2.0, 3, 1.0).unwrap() - 3.0 * closed(2.0)).abs() < 1e-14);
        assert_eq!(tau(1.0).unwrap(), 0.0);
        assert!((tau(2.0).unwrap() - 0.5 * (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!(tau(0.0).is_err());
    }
}
