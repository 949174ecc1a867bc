//! The combinatorial half of the analytic engine: success counts after
//! removing `K` nodes of which `R` are CHs, averaged over `R`
//! (hypergeometric), `K` (uniform on `1..=N` unless another removal law is
//! chosen) and the CH count (binomial).
//!
//! Everything here takes the per-node probabilities as inputs, so the chain
//! can be checked against brute-force enumeration independently of the
//! position integrals.

use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};

/// Mean NCH failure and CH success probabilities feeding the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessProbabilities {
    pub p_fnch: f64,
    pub p_sch: f64,
}

/// How the NCH failure probability reacts to removed CHs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FnchCoupling {
    /// Keep the failure probability of the full CH population.
    #[default]
    Frozen,
    /// Re-evaluate it at the surviving CH count `N_CH − R`.
    Rescaled,
}

/// Law of the removed-node count `K`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RemovalLaw {
    /// Uniform on `1..=N`.
    #[default]
    UniformCount,
    /// Every node fails independently with probability `q`, so `K ~ Binomial(N, q)`.
    Bernoulli(f64),
}

impl RemovalLaw {
    /// `P(K = k)` for `k = 0..=n`.
    pub fn weights(&self, n: usize) -> Result<Vec<f64>> {
        match *self {
            RemovalLaw::UniformCount => {
                let mut w = vec![1.0 / n as f64; n + 1];
                w[0] = 0.0;
                Ok(w)
            }
            RemovalLaw::Bernoulli(q) => {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::invalid("failure_q", format!("must lie in [0, 1], got {q}")));
                }
                Ok((0..=n).map(|k| binom_pmf_unchecked(k, n, q)).collect())
            }
        }
    }
}

/// Feasible removed-CH counts `(R_min, R_max)` when `k` of `n` nodes are removed
/// and `n_ch` of them are CHs.
pub fn r_range(k: usize, n_ch: usize, n: usize) -> Result<(usize, usize)> {
    if k == 0 || k > n {
        return Err(Error::invalid("k", format!("removed count must lie in 1..={n}, got {k}")));
    }
    check_heads(n_ch, n)?;
    Ok(r_bounds(k, n_ch, n))
}

fn r_bounds(k: usize, n_ch: usize, n: usize) -> (usize, usize) {
    ((k + n_ch).saturating_sub(n), k.min(n_ch))
}

fn check_heads(n_ch: usize, n: usize) -> Result<()> {
    if n_ch > n {
        return Err(Error::invalid("n_ch", format!("CH count {n_ch} exceeds node count {n}")));
    }
    Ok(())
}

/// Expected successful nodes once `k` nodes including `r` CHs are gone.
/// `k = 0` (with `r = 0`) gives the undisrupted count.
pub fn l0(k: usize, r: usize, n_ch: usize, probs: &SuccessProbabilities, n: usize) -> Result<f64> {
    check_heads(n_ch, n)?;
    if k > n {
        return Err(Error::invalid("k", format!("removed count {k} exceeds node count {n}")));
    }
    let (lo, hi) = r_bounds(k, n_ch, n);
    if r < lo || r > hi {
        return Err(Error::invalid("r", format!("removed CH count {r} outside feasible range {lo}..={hi}")));
    }
    Ok(l0_unchecked(k, r, n_ch, probs.p_fnch, probs.p_sch, n))
}

fn l0_unchecked(k: usize, r: usize, n_ch: usize, p_fnch: f64, p_sch: f64, n: usize) -> f64 {
    let members_left = ((n - n_ch) - (k - r)) as f64;
    let heads_left = (n_ch - r) as f64;
    members_left * (1.0 - p_fnch) + heads_left * p_sch
}

/// Hypergeometric probability that `r` of the `k` removed nodes are CHs.
pub fn p_fch(r: usize, k: usize, n_ch: usize, n: usize) -> Result<f64> {
    let (lo, hi) = r_range(k, n_ch, n)?;
    if r < lo || r > hi {
        return Err(Error::invalid("r", format!("removed CH count {r} outside feasible range {lo}..={hi}")));
    }
    let (n, k, r, n_ch) = (n as u64, k as u64, r as u64, n_ch as u64);
    let ln = ln_binomial(n_ch, r) + ln_binomial(n - n_ch, k - r) - ln_binomial(n, k);
    Ok(ln.exp().min(1.0))
}

/// Expected successes over the removed-CH count for fixed `k`.
pub fn l1(k: usize, n_ch: usize, probs: &SuccessProbabilities, n: usize) -> Result<f64> {
    r_range(k, n_ch, n)?;
    let table = LnFactorials::up_to(n);
    Ok(l1_frozen(&table, k, n_ch, probs, n))
}

fn l1_frozen(lf: &LnFactorials, k: usize, n_ch: usize, probs: &SuccessProbabilities, n: usize) -> f64 {
    let (lo, hi) = r_bounds(k, n_ch, n);
    (lo..=hi)
        .map(|r| l0_unchecked(k, r, n_ch, probs.p_fnch, probs.p_sch, n) * lf.hypergeometric(r, k, n_ch, n))
        .sum()
}

/// Expected successes averaged over a uniform removal count `K ∈ 1..=n`.
pub fn l2(n_ch: usize, probs: &SuccessProbabilities, n: usize) -> Result<f64> {
    check_heads(n_ch, n)?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let lf = LnFactorials::up_to(n);
    let total: f64 = (1..=n).map(|k| l1_frozen(&lf, k, n_ch, probs, n)).sum();
    Ok(total / n as f64)
}

/// Binomial probability of `n_ch` CHs among `n` nodes, computed in log space.
pub fn binom_pmf(n_ch: usize, n: usize, p: f64) -> Result<f64> {
    check_heads(n_ch, n)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    Ok(binom_pmf_unchecked(n_ch, n, p))
}

fn binom_pmf_unchecked(n_ch: usize, n: usize, p: f64) -> f64 {
    loader_binomial(n_ch as f64, n as f64, p, 1.0 - p)
}

/// Loader's saddle-point binomial density: the binomial coefficient never
/// appears explicitly, so there is no cancellation between large log-gamma
/// terms and the relative error stays near machine precision for large `n`.
fn loader_binomial(x: f64, n: f64, p: f64, q: f64) -> f64 {
    use std::f64::consts::PI;
    if p == 0.0 {
        return (x == 0.0) as u8 as f64;
    }
    if q == 0.0 {
        return (x == n) as u8 as f64;
    }
    if x == 0.0 {
        if n == 0.0 {
            return 1.0;
        }
        let lc = if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
        return lc.exp();
    }
    if x == n {
        let lc = if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
        return lc.exp();
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / n).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `ln n! − (n + ½)ln n + n − ½ln 2π` for integer `n ≥ 1`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        return ln_factorial(n as u64) - (n + 0.5) * n.ln() + n - half_ln_2pi;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/m) + m − x`, evaluated by series when `x ≈ m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let v2 = v * v;
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln k!` for `k ≤ n`, cached for the inner loops.
#[derive(Debug, Clone)]
struct LnFactorials(Vec<f64>);

impl LnFactorials {
    fn up_to(n: usize) -> Self {
        LnFactorials((0..=n as u64).map(ln_factorial).collect())
    }

    fn ln_choose(&self, n: usize, k: usize) -> f64 {
        self.0[n] - self.0[k] - self.0[n - k]
    }

    fn hypergeometric(&self, r: usize, k: usize, n_ch: usize, n: usize) -> f64 {
        (self.ln_choose(n_ch, r) + self.ln_choose(n - n_ch, k - r) - self.ln_choose(n, k)).exp()
    }
}

/// The full chain for one network size, with the NCH failure probability
/// given per CH count.
#[derive(Debug, Clone)]
pub struct Chain<'a> {
    n: usize,
    p_sch: f64,
    /// NCH failure probability indexed by CH count, `0..=n`.
    p_fnch_by_heads: &'a [f64],
    coupling: FnchCoupling,
    /// `P(K = k)`, `k = 0..=n`.
    removal: Vec<f64>,
    lf: LnFactorials,
}

impl<'a> Chain<'a> {
    pub fn new(n: usize, p_sch: f64, p_fnch_by_heads: &'a [f64], coupling: FnchCoupling) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if p_fnch_by_heads.len() != n + 1 {
            return Err(Error::invalid(
                "p_fnch_by_heads",
                format!("needs one entry per CH count 0..={n}, got {}", p_fnch_by_heads.len()),
            ));
        }
        Ok(Chain {
            n,
            p_sch,
            p_fnch_by_heads,
            coupling,
            removal: RemovalLaw::UniformCount.weights(n)?,
            lf: LnFactorials::up_to(n),
        })
    }

    pub fn with_removal(mut self, law: RemovalLaw) -> Result<Self> {
        self.removal = law.weights(self.n)?;
        Ok(self)
    }

    /// `L2(n_ch)`, the average of `L1` over the removal law. When `grad` is given, adds `∂L2/∂p_fnch[m]` into `grad[m]`
    /// (the chain is linear in the failure probabilities).
    pub fn l2(&self, n_ch: usize, mut grad: Option<&mut [f64]>) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for (k, &wk) in self.removal.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let (lo, hi) = r_bounds(k, n_ch, n);
            for r in lo..=hi {
                let w = wk * self.lf.hypergeometric(r, k, n_ch, n);
                let heads_at = match self.coupling {
                    FnchCoupling::Frozen => n_ch,
                    FnchCoupling::Rescaled => n_ch - r,
                };
                let p_fnch = self.p_fnch_by_heads[heads_at];
                total += w * l0_unchecked(k, r, n_ch, p_fnch, self.p_sch, n);
                if let Some(g) = grad.as_deref_mut() {
                    let members_left = ((n - n_ch) - (k - r)) as f64;
                    g[heads_at] -= w * members_left;
                }
            }
        }
        total
    }

    /// `L3` by summing `L2` over the binomial CH count; `O(N³)`.
    pub fn l3(&self, p: f64, mut grad: Option<&mut [f64]>) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
        }
        let mut total = 0.0;
        let mut scratch = grad.as_ref().map(|g| vec![0.0; g.len()]);
        for n_ch in 0..=self.n {
            let w = binom_pmf_unchecked(n_ch, self.n, p);
            if let (Some(s), Some(g)) = (scratch.as_mut(), grad.as_deref_mut()) {
                s.iter_mut().for_each(|v| *v = 0.0);
                total += w * self.l2(n_ch, Some(s));
                g.iter_mut().zip(s.iter()).for_each(|(g, s)| *g += w * s);
            } else {
                total += w * self.l2(n_ch, None);
            }
        }
        Ok(total)
    }
}
