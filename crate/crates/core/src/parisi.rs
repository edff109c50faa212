//! Single-system free-energy functionals and their fixed-point equations.
//!
//! Both variational forms take β explicitly: every occurrence of ξ is
//! replaced by β²ξ, the external field enters as h².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::optim;
use crate::tol;

/// A k-level replica-symmetry-breaking parameter set.
///
/// `m` has `k + 1` entries `0 = m₀ ≤ … ≤ m_k = 1`, `q` has `k + 2` entries
/// `q₀ ≤ … ≤ q_{k+1} = 1`. `b` is only used by the Parisi form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsbScheme {
    pub k: usize,
    pub m: Vec<f64>,
    pub q: Vec<f64>,
    pub b: Option<f64>,
}

impl RsbScheme {
    pub fn new(m: Vec<f64>, q: Vec<f64>, b: Option<f64>) -> Result<Self> {
        let k = m.len().saturating_sub(1);
        if k == 0 || q.len() != k + 2 {
            return Err(Error::invalid(format!(
                "scheme needs k+1 weights and k+2 overlaps with k >= 1, got {} and {}",
                m.len(),
                q.len()
            )));
        }
        if m[0] != 0.0 || m[k] != 1.0 || m.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("weights must satisfy 0 = m0 <= ... <= mk = 1"));
        }
        if q[k + 1] != 1.0 || q.windows(2).any(|w| w[0] > w[1]) || q.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid("overlaps must be nondecreasing in [0, 1] ending at 1"));
        }
        if let Some(b) = b {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::invalid(format!("b must be positive, got {b}")));
            }
        }
        Ok(Self { k, m, q, b })
    }

    /// Replica-symmetric scheme `m = (0, 1)`, `q = (0, q₁, 1)`.
    pub fn replica_symmetric(q1: f64, b: Option<f64>) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![0.0, q1, 1.0], b)
    }
}

/// Which variational representation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Form {
    /// Parisi form with the auxiliary parameter b.
    Parisi,
    /// Crisanti–Sommers form.
    CrisantiSommers,
}

/// `(1/m) log(1 + m y)`, continuous at `m = 0`.
fn scaled_log1p(m: f64, y: f64) -> f64 {
    if m == 0.0 {
        y
    } else {
        (m * y).ln_1p() / m
    }
}

/// `d_l = Σ_{p ≥ l} m_p β²(ξ'(q_{p+1}) − ξ'(q_p))` for `l = 1..=k`, indexed
/// from 1 (entry 0 unused).
fn parisi_d(model: &ModelSpec, s: &RsbScheme) -> Vec<f64> {
    let b2 = model.beta().powi(2);
    let mut d = vec![0.0; s.k + 2];
    for l in (1..=s.k).rev() {
        d[l] = d[l + 1] + s.m[l] * b2 * (model.xi_prime(s.q[l + 1]) - model.xi_prime(s.q[l]));
    }
    d
}

/// Parisi-form value of a scheme (half the bracket, so its infimum is P(β,h)).
pub fn eval_parisi(model: &ModelSpec, s: &RsbScheme) -> Result<f64> {
    let b = s
        .b
        .ok_or_else(|| Error::invalid("the Parisi form needs the parameter b"))?;
    let b2 = model.beta().powi(2);
    let d = parisi_d(model, s);
    // D_{k+1} = b.
    let big_d = |l: usize| b - d[l];
    for l in 1..=s.k {
        if !(big_d(l) > 0.0) {
            return Err(Error::domain(format!("D_{l} = {} is not positive", big_d(l))));
        }
    }
    let mut acc = b - 1.0 - b.ln() + (model.h().powi(2) + b2 * model.xi_prime(s.q[1])) / big_d(1);
    for l in 1..=s.k {
        // log(D_{l+1}/D_l) with D_l = D_{l+1} − m_l Δ_l.
        let step = b2 * (model.xi_prime(s.q[l + 1]) - model.xi_prime(s.q[l]));
        acc -= scaled_log1p(s.m[l], -step / big_d(l + 1));
        acc -= s.m[l] * b2 * (model.theta(s.q[l + 1]) - model.theta(s.q[l]));
    }
    Ok(0.5 * acc)
}

/// Crisanti–Sommers value of a scheme.
pub fn eval_crisanti_sommers(model: &ModelSpec, s: &RsbScheme) -> Result<f64> {
    let b2 = model.beta().powi(2);
    let k = s.k;
    let mut delta = vec![0.0; k + 2];
    for l in (1..=k).rev() {
        delta[l] = delta[l + 1] + s.m[l] * (s.q[l + 1] - s.q[l]);
    }
    for l in 1..=k {
        if !(delta[l] > 0.0) {
            return Err(Error::domain(format!("delta_{l} = {} is not positive", delta[l])));
        }
    }
    let mut acc = model.h().powi(2) * delta[1] + s.q[1] / delta[1] + delta[k].ln();
    for l in 1..k {
        acc += scaled_log1p(s.m[l], (s.q[l + 1] - s.q[l]) / delta[l + 1]);
    }
    for l in 1..=k {
        acc += s.m[l] * b2 * (model.xi(s.q[l + 1]) - model.xi(s.q[l]));
    }
    Ok(0.5 * acc)
}

pub fn eval(model: &ModelSpec, s: &RsbScheme, form: Form) -> Result<f64> {
    match form {
        Form::Parisi => eval_parisi(model, s),
        Form::CrisantiSommers => eval_crisanti_sommers(model, s),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParisiMinimum {
    pub scheme: RsbScheme,
    pub value: f64,
    /// Projected finite-difference gradient norm at the returned scheme.
    pub grad_norm: f64,
}

/// Free coordinates of a k ≤ 2 scheme: `(q₁, [q₂, m₁], [b])`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    k: usize,
    form: Form,
}

impl Layout {
    fn dim(&self) -> usize {
        let base = if self.k == 1 { 1 } else { 3 };
        base + usize::from(self.form == Form::Parisi)
    }

    /// Natural coordinates → scheme. `b` is given through `D₁ = b − d₁`.
    fn scheme(&self, model: &ModelSpec, z: &[f64]) -> Result<RsbScheme> {
        let (m, q) = if self.k == 1 {
            (vec![0.0, 1.0], vec![0.0, z[0], 1.0])
        } else {
            (vec![0.0, z[2], 1.0], vec![0.0, z[0], z[1], 1.0])
        };
        let mut s = RsbScheme::new(m, q, None)?;
        if self.form == Form::Parisi {
            let d1 = parisi_d(model, &s)[1];
            let dd1 = z[self.dim() - 1];
            if !(dd1 > 0.0) {
                return Err(Error::domain("D_1 must be positive"));
            }
            s.b = Some(d1 + dd1);
        }
        Ok(s)
    }

    /// Unconstrained search coordinates → natural coordinates.
    fn natural(&self, u: &[f64]) -> Vec<f64> {
        let sq = |x: f64| x.sin().powi(2);
        let mut z = Vec::with_capacity(self.dim());
        let q1 = sq(u[0]);
        z.push(q1);
        if self.k == 2 {
            z.push(q1 + (1.0 - q1) * sq(u[1]));
            z.push(sq(u[2]));
        }
        if self.form == Form::Parisi {
            z.push(u[self.dim() - 1].exp());
        }
        z
    }

    /// Box bounds of each natural coordinate given the others.
    fn bounds(&self, z: &[f64], i: usize) -> (f64, f64) {
        match (self.k, i) {
            (1, 0) => (0.0, 1.0),
            (2, 0) => (0.0, z[1]),
            (2, 1) => (z[0], 1.0),
            (2, 2) => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }

    fn starts(&self) -> Vec<Vec<f64>> {
        let asin = |x: f64| x.sqrt().asin();
        let mut out = Vec::new();
        let t0 = [0.0f64];
        if self.k == 1 {
            for q in [0.05, 0.3, 0.6, 0.9] {
                for t in t0 {
                    let mut u = vec![asin(q)];
                    if self.form == Form::Parisi {
                        u.push(t);
                    }
                    out.push(u);
                }
            }
        } else {
            for q1 in [0.01, 0.3] {
                for s2 in [0.3, 0.7, 0.95] {
                    for m in [0.2, 0.5, 0.9] {
                        let mut u = vec![asin(q1), asin(s2), asin(m)];
                        if self.form == Form::Parisi {
                            u.push(0.0);
                        }
                        out.push(u);
                    }
                }
            }
        }
        out
    }
}

fn projected_gradient(layout: Layout, f: &dyn Fn(&[f64]) -> f64, z: &[f64]) -> f64 {
    let h = 1e-6;
    let mut norm2 = 0.0;
    for i in 0..z.len() {
        let (lo, hi) = layout.bounds(z, i);
        let at = |x: f64| {
            let mut w = z.to_vec();
            w[i] = x;
            f(&w)
        };
        let g = if z[i] - lo < h {
            (at(z[i] + h) - at(z[i])) / h
        } else if hi - z[i] < h {
            (at(z[i]) - at(z[i] - h)) / h
        } else {
            optim::central_difference(at, z[i], h)
        };
        // Components pushing against an active bound do not count.
        let blocked = z[i] - lo < 1e-7 && g > 0.0 || hi - z[i] < 1e-7 && g < 0.0;
        let g = if !g.is_finite() || blocked { 0.0 } else { g };
        norm2 += g * g;
    }
    norm2.sqrt()
}

/// Minimizes the chosen form over schemes with `k ∈ {1, 2}`.
///
/// Multi-start Nelder–Mead on a sin²/exp reparameterization that enforces the
/// ordering constraints, followed by a golden-section coordinate polish.
pub fn minimize_parisi(model: &ModelSpec, k: usize, form: Form) -> Result<ParisiMinimum> {
    if !(1..=2).contains(&k) {
        return Err(Error::invalid(format!("k must be 1 or 2, got {k}")));
    }
    let layout = Layout { k, form };
    let natural_value = |z: &[f64]| -> f64 {
        layout
            .scheme(model, z)
            .and_then(|s| eval(model, &s, form))
            .unwrap_or(f64::INFINITY)
    };
    let objective = |u: &[f64]| natural_value(&layout.natural(u));

    let mut best: Option<optim::Minimum> = None;
    for start in layout.starts() {
        let Ok(found) = optim::nelder_mead(objective, &start, 0.3, 1e-15) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| found.value < b.value) {
            best = Some(found);
        }
    }
    let mut best = best.ok_or(Error::NoConvergence {
        what: "variational minimizer",
        iterations: tol::MAX_ITER,
    })?;
    // A restart escapes simplex collapse; then polish coordinate-wise.
    if let Ok(again) = optim::nelder_mead(objective, &best.x, 0.05, 1e-16) {
        if again.value <= best.value {
            best = again;
        }
    }
    let mut u = best.x.clone();
    for _ in 0..4 {
        for i in 0..u.len() {
            let line = |x: f64| {
                let mut w = u.clone();
                w[i] = x;
                objective(&w)
            };
            let (x, fx) = optim::golden_section(line, u[i] - 0.05, u[i] + 0.05, 1e-12);
            if fx <= objective(&u) {
                u[i] = x;
            }
        }
    }

    let z = layout.natural(&u);
    let scheme = layout.scheme(model, &z)?;
    let value = eval(model, &scheme, form)?;
    let grad_norm = projected_gradient(layout, &natural_value, &z);
    if grad_norm > tol::GRAD {
        return Err(Error::NoConvergence {
            what: "variational minimizer (gradient check)",
            iterations: tol::MAX_ITER,
        });
    }
    Ok(ParisiMinimum {
        scheme,
        value,
        grad_norm,
    })
}

/// Replica-symmetric 2-spin functional with field, minimized over q.
pub fn rs_functional(model: &ModelSpec, q: f64) -> f64 {
    let b2 = model.beta().powi(2);
    0.5 * (model.h().powi(2) * (1.0 - q) + q / (1.0 - q) + (1.0 - q).ln() + b2 * model.xi(1.0)
        - b2 * model.xi(q))
}

/// Overlap of the 2-spin model: `1 − 1/β` without field, otherwise the root
/// of `h² + β²q = q/(1−q)²` in (0,1).
pub fn solve_q_2spin(model: &ModelSpec) -> Result<f64> {
    model.require_p(2, "solve_q_2spin")?;
    let (beta, h) = (model.beta(), model.h());
    if h == 0.0 {
        if beta <= 1.0 {
            return Err(Error::TrivialPhase);
        }
        return Ok(1.0 - 1.0 / beta);
    }
    let g = |q: f64| q / (1.0 - q).powi(2) - beta * beta * q - h * h;
    let upper = 1.0 - 1e-12;
    let brackets = optim::sign_changes(g, 0.0, upper, 10_001);
    match brackets.len() {
        0 => Err(Error::NoRoot("no root of the 2-spin overlap equation in (0,1)".into())),
        1 => {
            let (lo, hi) = brackets[0];
            let q = optim::bisect(g, lo, hi)?;
            let scale = q / (1.0 - q).powi(2) + beta * beta * q + h * h;
            if g(q).abs() > tol::ROOT * scale.max(1.0) {
                return Err(Error::NoConvergence {
                    what: "2-spin overlap root",
                    iterations: tol::MAX_ITER,
                });
            }
            Ok(q)
        }
        n => Err(Error::MultipleRoots(n)),
    }
}

/// `[(1+x)log(1+x) − x]/x²`, evaluated by series near 0.
fn x_equation_rhs(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // Σ_{n≥2} (−x)^{n−2}/(n(n−1)).
        (2..12)
            .rev()
            .fold(0.0, |acc, n| acc * -x + 1.0 / (n * (n - 1)) as f64)
    } else {
        ((1.0 + x) * x.ln_1p() - x) / (x * x)
    }
}

/// Positive root of `1/p = [(1+x)log(1+x) − x]/x²`. Returns 0 for p = 2.
pub fn solve_x(p: u32) -> Result<f64> {
    if p < 2 || !p.is_multiple_of(2) {
        return Err(Error::invalid(format!("p must be even and >= 2, got {p}")));
    }
    if p == 2 {
        return Ok(0.0);
    }
    let target = 1.0 / p as f64;
    let f = |x: f64| x_equation_rhs(x) - target;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    let x = optim::bisect(f, 1e-6, hi)?;
    if f(x).abs() > tol::ROOT {
        return Err(Error::NoConvergence {
            what: "x equation",
            iterations: tol::MAX_ITER,
        });
    }
    Ok(x)
}

/// Residual of the x equation at `x`.
pub fn x_residual(p: u32, x: f64) -> f64 {
    x_equation_rhs(x) - 1.0 / p as f64
}

/// Two-level p-spin functional at `(q, m)` (with `q₁ = 0`), halved.
pub fn pspin_functional(model: &ModelSpec, q: f64, m: f64) -> f64 {
    let b2 = model.beta().powi(2);
    // (1 − 1/m)log(1−q) + (1/m)log(1−q+qm) = log(1−q) + (1/m)log(1 + mq/(1−q)).
    0.5 * (b2 * model.xi(1.0) + (m - 1.0) * b2 * model.xi(q)
        + (1.0 - q).ln()
        + scaled_log1p(m, q / (1.0 - q)))
}

/// Critical point of the p-spin functional and the constants `x, δ, γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PspinCritical {
    pub x: f64,
    pub delta: f64,
    pub gamma: f64,
    pub q: f64,
    pub m: f64,
}

impl PspinCritical {
    /// Residuals of `qm = x(1−q)`, `mβ²ξ'(q)(1−q) = δ`, `m²β²θ(q) = γ`.
    pub fn identity_residuals(&self, model: &ModelSpec) -> [f64; 3] {
        let b2 = model.beta().powi(2);
        let (q, m) = (self.q, self.m);
        [
            q * m - self.x * (1.0 - q),
            m * b2 * model.xi_prime(q) * (1.0 - q) - self.delta,
            m * m * b2 * model.theta(q) - self.gamma,
        ]
    }

    /// Residuals of the two stationarity equations in `(q, m)`.
    pub fn stationarity_residuals(&self, model: &ModelSpec) -> [f64; 2] {
        let b2 = model.beta().powi(2);
        let (q, m) = (self.q, self.m);
        let a = 1.0 - q;
        let ab = a + q * m;
        [
            b2 * model.xi_prime(q) - (1.0 / a - 1.0 / ab) / m,
            b2 * model.xi(q) - ((ab / a).ln() / (m * m) - q / (m * ab)),
        ]
    }

    /// Free energy assembled from the critical point at `b = 1/(1−q)`.
    pub fn free_energy(&self, model: &ModelSpec) -> f64 {
        let b2 = model.beta().powi(2);
        let q = self.q;
        let b = 1.0 / (1.0 - q);
        0.5 * (b2 * model.xi_prime(1.0) - b2 * model.xi_prime(q) + b - 1.0 - b.ln()
            - (1.0 - self.delta).ln() / self.m
            - self.gamma / self.m
            - b2 * (model.theta(1.0) - model.theta(q)))
    }

    /// The Parisi-form scheme `m = (0, m, 1)`, `q = (0, 0, q, 1)` with its b.
    pub fn scheme(&self, model: &ModelSpec) -> Result<RsbScheme> {
        let q = self.q;
        let b = 1.0 / (1.0 - q) + model.beta().powi(2) * (model.xi_prime(1.0) - model.xi_prime(q));
        RsbScheme::new(vec![0.0, self.m, 1.0], vec![0.0, 0.0, q, 1.0], Some(b))
    }
}

fn trivial_objective(model: &ModelSpec, s: f64) -> f64 {
    model.beta().powi(2) * model.xi(s) + (-s).ln_1p() + s
}

/// Supremum over `s ∈ [0,1)` of `β²ξ(s) + log(1−s) + s`, with its location.
pub fn trivial_phase_sup(model: &ModelSpec) -> (f64, f64) {
    let n = 10_000;
    let mut best = (0.0, 0.0);
    for i in 1..n {
        let s = i as f64 / n as f64;
        let v = trivial_objective(model, s);
        if v > best.1 {
            best = (s, v);
        }
    }
    if best.0 > 0.0 {
        let lo = (best.0 - 1.0 / n as f64).max(0.0);
        let hi = (best.0 + 1.0 / n as f64).min(1.0 - 1e-15);
        let (s, neg) = optim::golden_section(|s| -trivial_objective(model, s), lo, hi, 1e-14);
        if -neg > best.1 {
            best = (s, -neg);
        }
    }
    best
}

/// True when the minimizing overlap of the p-spin functional (h = 0) is 0.
pub fn check_trivial_phase(model: &ModelSpec) -> Result<bool> {
    if model.h() != 0.0 {
        return Err(Error::invalid("the trivial-phase test assumes h = 0"));
    }
    Ok(trivial_phase_sup(model).1 <= tol::ZERO)
}

/// Solves the critical-point system of the p-spin functional (p ≥ 4, h = 0).
///
/// The identities reduce it to `β²q^{p−2}(1−q)²(1+x) = 1`, which has up to
/// two roots straddling `(p−2)/p`. Roots with `m = x(1−q)/q ∉ (0,1]` are
/// discarded and the functional picks among the rest.
pub fn pspin_critical(model: &ModelSpec) -> Result<PspinCritical> {
    let p = model.p();
    if p < 4 {
        return Err(Error::invalid("the p-spin critical point needs p >= 4"));
    }
    if model.h() != 0.0 {
        return Err(Error::invalid("the p-spin critical point assumes h = 0"));
    }
    if check_trivial_phase(model)? {
        return Err(Error::TrivialPhase);
    }
    let x = solve_x(p)?;
    let delta = x / (1.0 + x);
    let gamma = (p as f64 - 1.0) / p as f64 * x * x / (1.0 + x);
    let target = 1.0 / (model.beta().powi(2) * (1.0 + x));
    let g = |q: f64| q.powi(p as i32 - 2) * (1.0 - q).powi(2) - target;
    let peak = (p as f64 - 2.0) / p as f64;
    if g(peak) < 0.0 {
        return Err(Error::NoRoot("reduced critical equation has no root".into()));
    }
    let mut candidates = Vec::new();
    for (lo, hi) in [(0.0, peak), (peak, 1.0)] {
        if let Ok(q) = optim::bisect(g, lo, hi) {
            let m = x * (1.0 - q) / q;
            if q > 0.0 && q < 1.0 && m > 0.0 && m <= 1.0 {
                candidates.push(PspinCritical { x, delta, gamma, q, m });
            }
        }
    }
    candidates
        .into_iter()
        .map(|c| (pspin_functional(model, c.q, c.m), c))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .map(|(_, c)| c)
        .ok_or_else(|| Error::NoRoot("no critical root with m in (0, 1]".into()))
}

/// Limiting free energy P(β, h).
///
/// Closed forms where available (2-spin, and p-spin without field); the
/// two-level Crisanti–Sommers minimizer otherwise.
pub fn free_energy(model: &ModelSpec) -> Result<f64> {
    let beta = model.beta();
    if model.p() == 2 {
        return match solve_q_2spin(model) {
            Ok(_) if model.h() == 0.0 => Ok(0.5 * (2.0 * beta - 1.5 - beta.ln())),
            Ok(q) => Ok(rs_functional(model, q)),
            Err(Error::TrivialPhase) => Ok(beta * beta / 4.0),
            Err(e) => Err(e),
        };
    }
    if model.h() == 0.0 {
        return match pspin_critical(model) {
            Ok(c) => Ok(pspin_functional(model, c.q, c.m)),
            Err(Error::TrivialPhase) => Ok(0.5 * beta * beta * model.xi(1.0)),
            Err(e) => Err(e),
        };
    }
    Ok(minimize_parisi(model, 2, Form::CrisantiSommers)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sk(beta: f64, h: f64) -> ModelSpec {
        ModelSpec::sk(beta, h).unwrap()
    }

    fn closed_form(beta: f64) -> f64 {
        0.5 * (2.0 * beta - 1.5 - beta.ln())
    }

    #[test]
    fn parisi_form_at_rs_optimum() {
        let m = sk(2.0, 0.0);
        let s = RsbScheme::replica_symmetric(0.5, Some(4.0)).unwrap();
        let v = eval_parisi(&m, &s).unwrap();
        assert!((v - closed_form(2.0)).abs() < 1e-14, "{v}");
        assert!((v - 0.903426).abs() < 1e-6);
    }

    #[test]
    fn parisi_form_trivial_phase() {
        let m = sk(0.5, 0.0);
        let s = RsbScheme::replica_symmetric(0.0, Some(1.25)).unwrap();
        assert!((eval_parisi(&m, &s).unwrap() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn parisi_form_domain_error() {
        let m = sk(2.0, 0.0);
        let s = RsbScheme::replica_symmetric(0.0, Some(2.0)).unwrap();
        assert!(matches!(eval_parisi(&m, &s), Err(Error::Domain(_))));
    }

    #[test]
    fn crisanti_sommers_rs_values() {
        let m = sk(2.0, 0.0);
        let s = RsbScheme::replica_symmetric(0.5, None).unwrap();
        assert!((eval_crisanti_sommers(&m, &s).unwrap() - closed_form(2.0)).abs() < 1e-14);

        let mh = sk(2.0, 0.3);
        let q = solve_q_2spin(&mh).unwrap();
        let s = RsbScheme::replica_symmetric(q, None).unwrap();
        let v = eval_crisanti_sommers(&mh, &s).unwrap();
        assert!((v - rs_functional(&mh, q)).abs() < 1e-14);

        let s = RsbScheme::replica_symmetric(1.0, None).unwrap();
        assert!(matches!(eval_crisanti_sommers(&m, &s), Err(Error::Domain(_))));
    }

    #[test]
    fn two_level_crisanti_sommers_reduces_to_pspin_functional() {
        let m = ModelSpec::new(4, 3.0, 0.0).unwrap();
        let (q, w) = (0.8, 0.6);
        let s = RsbScheme::new(vec![0.0, w, 1.0], vec![0.0, 0.0, q, 1.0], None).unwrap();
        let a = eval_crisanti_sommers(&m, &s).unwrap();
        assert!((a - pspin_functional(&m, q, w)).abs() < 1e-14);
    }

    #[test]
    fn minimizer_matches_closed_form() {
        for beta in [1.5, 2.0, 3.0] {
            for form in [Form::Parisi, Form::CrisantiSommers] {
                let r = minimize_parisi(&sk(beta, 0.0), 1, form).unwrap();
                assert!((r.value - closed_form(beta)).abs() < 1e-8, "{beta} {form:?}");
                assert!((r.scheme.q[1] - (1.0 - 1.0 / beta)).abs() < 1e-5);
            }
        }
        let r = minimize_parisi(&sk(0.8, 0.0), 1, Form::CrisantiSommers).unwrap();
        assert!((r.value - 0.16).abs() < 1e-10);
        assert!(r.scheme.q[1] < 1e-6);
    }

    #[test]
    fn two_spin_overlap() {
        assert_eq!(solve_q_2spin(&sk(2.0, 0.0)).unwrap(), 0.5);
        assert!(matches!(solve_q_2spin(&sk(0.5, 0.0)), Err(Error::TrivialPhase)));
        let q = solve_q_2spin(&sk(1.0, 0.5)).unwrap();
        let oracle = optim::bisect(|q| 0.25 + q - q / (1.0 - q).powi(2), 1e-9, 0.999).unwrap();
        assert!((q - oracle).abs() < 1e-13);
        assert!(solve_q_2spin(&ModelSpec::new(4, 2.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn x_equation_roots() {
        // High-precision reference values.
        let x4 = 4.115_660_866_489_398;
        let x6 = 9.676_683_976_681_227;
        assert!((solve_x(4).unwrap() - x4).abs() < 1e-10);
        assert!((solve_x(6).unwrap() - x6).abs() < 1e-9);
        assert_eq!(solve_x(2).unwrap(), 0.0);
        assert!((x_equation_rhs(1e-9) - 0.5).abs() < 1e-9);
        // Series and closed form agree across the switch.
        let x = 1.001e-3f64;
        let closed = ((1.0 + x) * x.ln_1p() - x) / (x * x);
        assert!((x_equation_rhs(0.999e-3) - closed).abs() < 1e-6);
    }

    #[test]
    fn trivial_phase() {
        let tiny = ModelSpec::new(4, 1e-3, 0.0).unwrap();
        assert!(check_trivial_phase(&tiny).unwrap());
        assert!(matches!(pspin_critical(&tiny), Err(Error::TrivialPhase)));
        assert!(!check_trivial_phase(&ModelSpec::new(4, 3.0, 0.0).unwrap()).unwrap());
        assert!(check_trivial_phase(&ModelSpec::new(4, 2.0, 0.0).unwrap()).unwrap());
    }

    #[test]
    fn pspin_critical_identities() {
        for beta in [3.0, 3.5] {
            let m = ModelSpec::new(4, beta, 0.0).unwrap();
            let c = pspin_critical(&m).unwrap();
            for r in c.identity_residuals(&m) {
                assert!(r.abs() < 1e-10);
            }
            for r in c.stationarity_residuals(&m) {
                assert!(r.abs() < 1e-10, "{r}");
            }
            let f16 = pspin_functional(&m, c.q, c.m);
            assert!((f16 - c.free_energy(&m)).abs() < 1e-12);
            let s = c.scheme(&m).unwrap();
            assert!((eval_parisi(&m, &s).unwrap() - f16).abs() < 1e-12);
        }
        let c = pspin_critical(&ModelSpec::new(4, 3.0, 0.0).unwrap()).unwrap();
        assert!((c.q - 0.820_349_222).abs() < 1e-8);
        assert!((c.m - 0.901_301_123).abs() < 1e-8);
    }

    #[test]
    fn two_spin_free_energy_derivative() {
        let h = 1e-5;
        for beta in [1.5, 2.0, 3.0] {
            let d = optim::central_difference(|b| free_energy(&sk(b, 0.0)).unwrap(), beta, h);
            assert!((d - (1.0 - 0.5 / beta)).abs() < 1e-6);
        }
    }
}
