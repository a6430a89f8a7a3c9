//! The dyad-level probability model.
//!
//! A dyad is either closed (probability `1 - p`, never any contacts) or open,
//! in which case contacts arrive with exponential intercontact times at a
//! gamma-distributed rate with mean `mu` and common variance `v`. Integrating
//! the rate out gives a closed-form marginal likelihood per dyad that depends
//! only on the contact count `y*` and the window length `T`:
//!
//! ```text
//! f(y | p, r, a) = (1 - p) I[y* = 0]
//!                + p * G(r + y*)/G(r) * (a/(a+T))^r * (1/(a+T))^y*
//! ```
//!
//! with `r = mu^2/v`, `a = mu/v`. Homophily enters through the link
//! functions: `logit p = b1p - b2p d^b3p` and `log mu = b1mu - b2mu d^b3mu`
//! in the latent distance `d`, both nonincreasing in `d`.
//!
//! Because individuals cluster on `k` distinct coordinates, empty dyads take
//! at most `C(k,2) + 1` distinct likelihood values (one per unordered site
//! pair plus one for the shared zero distance), which
//! [`aggregated_loglik`] exploits: it evaluates each occupied distance class
//! once and multiplies by the class's empty-dyad count, instead of touching
//! all `C(N,2)` dyads.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{build_dyad_table, DyadTable, InteractionRecord, ObservationWindow};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp2, logistic};
use crate::space::ClusterTable;

/// Which pieces of the dyad parameterization respond to latent distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// One `(p, mu, v)` for every dyad; the latent space is ignored.
    Baseline,
    /// Homogeneous mean contact rate: only `p` depends on distance.
    Hmcr,
    /// Both `p` and `mu` depend on distance.
    Full,
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelVariant::Baseline => "baseline",
            ModelVariant::Hmcr => "hmcr",
            ModelVariant::Full => "full",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(ModelVariant::Baseline),
            "hmcr" => Ok(ModelVariant::Hmcr),
            "full" => Ok(ModelVariant::Full),
            other => Err(Error::InvalidParameter(format!(
                "unknown model variant {other:?} (expected baseline, hmcr or full)"
            ))),
        }
    }
}

/// Link-function coefficients. The distance coefficients (`beta2*`, `beta3*`)
/// must be nonnegative so both links are nonincreasing in distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCoefficients {
    pub beta1p: f64,
    pub beta2p: f64,
    pub beta3p: f64,
    pub beta1mu: f64,
    pub beta2mu: f64,
    pub beta3mu: f64,
}

impl LinkCoefficients {
    pub fn new(
        beta1p: f64,
        beta2p: f64,
        beta3p: f64,
        beta1mu: f64,
        beta2mu: f64,
        beta3mu: f64,
    ) -> Result<Self> {
        for (name, value) in [
            ("beta2p", beta2p),
            ("beta3p", beta3p),
            ("beta2mu", beta2mu),
            ("beta3mu", beta3mu),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {value}"
                )));
            }
        }
        if !(beta1p.is_finite() && beta1mu.is_finite()) {
            return Err(Error::InvalidParameter("intercepts must be finite".into()));
        }
        Ok(Self { beta1p, beta2p, beta3p, beta1mu, beta2mu, beta3mu })
    }
}

/// Population-level parameters: link coefficients, gamma variance `v`, and
/// the variant that decides which links are active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationParams {
    pub coefficients: LinkCoefficients,
    pub v: f64,
    pub variant: ModelVariant,
}

impl PopulationParams {
    pub fn new(coefficients: LinkCoefficients, v: f64, variant: ModelVariant) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("v must be positive, got {v}")));
        }
        if variant == ModelVariant::Baseline
            && (coefficients.beta2p != 0.0 || coefficients.beta2mu != 0.0)
        {
            return Err(Error::InvalidParameter(
                "baseline variant requires beta2p = beta2mu = 0".into(),
            ));
        }
        Ok(Self { coefficients, v, variant })
    }
}

/// Per-dyad parameters implied by a latent distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadParams {
    /// Probability the dyad is open.
    pub p: f64,
    /// Mean contact rate (contacts per week) of an open dyad.
    pub mu: f64,
    /// Gamma shape `mu^2 / v`.
    pub r: f64,
    /// Gamma rate `mu / v`.
    pub a: f64,
}

#[inline]
fn distance_term(beta2: f64, beta3: f64, d: f64) -> f64 {
    // beta2 == 0 short-circuits so 0 * inf can never produce NaN.
    if beta2 == 0.0 {
        0.0
    } else {
        beta2 * d.powf(beta3)
    }
}

/// Open probability at latent distance `d`: `logistic(b1p - b2p d^b3p)`.
pub fn link_p(d: f64, coefficients: &LinkCoefficients) -> Result<f64> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::InvalidParameter(format!("distance must be >= 0, got {d}")));
    }
    Ok(link_p_raw(d, coefficients))
}

#[inline]
pub(crate) fn link_p_raw(d: f64, c: &LinkCoefficients) -> f64 {
    logistic(c.beta1p - distance_term(c.beta2p, c.beta3p, d))
}

/// Mean contact rate at latent distance `d`: `exp(b1mu - b2mu d^b3mu)`.
pub fn link_mu(d: f64, coefficients: &LinkCoefficients) -> Result<f64> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::InvalidParameter(format!("distance must be >= 0, got {d}")));
    }
    Ok(link_mu_raw(d, coefficients))
}

#[inline]
pub(crate) fn link_mu_raw(d: f64, c: &LinkCoefficients) -> f64 {
    (c.beta1mu - distance_term(c.beta2mu, c.beta3mu, d)).exp()
}

/// Dyad parameters at latent distance `d` under the given variant.
pub fn dyad_params(d: f64, params: &PopulationParams) -> Result<DyadParams> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::InvalidParameter(format!("distance must be >= 0, got {d}")));
    }
    Ok(dyad_params_raw(d, params))
}

#[inline]
pub(crate) fn dyad_params_raw(d: f64, params: &PopulationParams) -> DyadParams {
    let c = &params.coefficients;
    let (p, mu) = match params.variant {
        ModelVariant::Baseline => (logistic(c.beta1p), c.beta1mu.exp()),
        ModelVariant::Hmcr => (link_p_raw(d, c), c.beta1mu.exp()),
        ModelVariant::Full => (link_p_raw(d, c), link_mu_raw(d, c)),
    };
    DyadParams { p, mu, r: mu * mu / params.v, a: mu / params.v }
}

/// Log marginal likelihood of observing `y_star` contacts in a window of
/// length `t`, with the contact rate integrated out.
pub fn marginal_loglik(y_star: u32, t: f64, p: f64, mu: f64, v: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameter(format!("window length must be positive, got {t}")));
    }
    if !((0.0..=1.0).contains(&p) && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must lie in [0, 1], got {p}")));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter(format!("v must be positive, got {v}")));
    }
    Ok(marginal_loglik_raw(y_star, t, p, mu, v))
}

#[inline]
pub(crate) fn marginal_loglik_raw(y_star: u32, t: f64, p: f64, mu: f64, v: f64) -> f64 {
    let r = mu * mu / v;
    let a = mu / v;
    // ln(a / (a + t)), stable when a >> t.
    let log_ratio = -(t / a).ln_1p();
    if y_star == 0 {
        let closed = (-p).ln_1p();
        let open = p.ln() + r * log_ratio;
        log_sum_exp2(closed, open)
    } else {
        let y = y_star as f64;
        p.ln() + ln_gamma(r + y) - ln_gamma(r) + r * log_ratio - y * (a + t).ln()
    }
}

#[inline]
pub(crate) fn empty_loglik_raw(t: f64, dp: &DyadParams) -> f64 {
    let log_ratio = -(t / dp.a).ln_1p();
    log_sum_exp2((-dp.p).ln_1p(), dp.p.ln() + dp.r * log_ratio)
}

#[inline]
pub(crate) fn nonempty_loglik_raw(y_star: u32, t: f64, dp: &DyadParams) -> f64 {
    let y = y_star as f64;
    let log_ratio = -(t / dp.a).ln_1p();
    dp.p.ln() + ln_gamma(dp.r + y) - ln_gamma(dp.r) + dp.r * log_ratio - y * (dp.a + t).ln()
}

/// Result of one full-table likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatedLoglik {
    pub loglik: f64,
    /// Evaluations actually performed: occupied empty-dyad distance classes
    /// plus one per nonempty dyad. Never exceeds `C(k,2) + 1 + |nonempty|`.
    pub eval_count: u64,
    pub empty_class_evals: u64,
    pub nonempty_evals: u64,
}

impl AggregatedLoglik {
    pub(crate) fn zero() -> Self {
        Self { loglik: 0.0, eval_count: 0, empty_class_evals: 0, nonempty_evals: 0 }
    }
}

/// Total log-likelihood of a table under a latent configuration, grouping
/// empty dyads by unordered site pair. Same-site pairs share the zero
/// distance, so they are pooled into a single class. The result equals the
/// brute-force per-dyad sum exactly; only the work differs.
pub fn aggregated_loglik(
    table: &DyadTable,
    clusters: &ClusterTable,
    params: &PopulationParams,
) -> Result<AggregatedLoglik> {
    if table.n() != clusters.n() {
        return Err(Error::Data(format!(
            "table covers {} individuals but configuration covers {}",
            table.n(),
            clusters.n()
        )));
    }
    let t = table.window().duration() as f64;
    let k = clusters.k();

    // Nonempty dyads are evaluated individually; along the way, count how
    // many of each class's dyads they use up.
    let mut nonempty_in_class: HashMap<(u32, u32), u64> = HashMap::new();
    let mut dp_cache: HashMap<(u32, u32), DyadParams> = HashMap::new();
    let mut loglik = 0.0;
    let mut nonempty_evals = 0u64;
    for (key, y) in table.nonempty() {
        let sa = clusters.site_of(key.i())? as u32;
        let sb = clusters.site_of(key.j())? as u32;
        let class = (sa.min(sb), sa.max(sb));
        *nonempty_in_class.entry(class).or_insert(0) += 1;
        let dp = *dp_cache.entry(class).or_insert_with(|| {
            let d = clusters.site(class.0 as usize).coord.distance_raw(&clusters.site(class.1 as usize).coord);
            dyad_params_raw(d, params)
        });
        loglik += nonempty_loglik_raw(y, t, &dp);
        nonempty_evals += 1;
    }

    let mut empty_class_evals = 0u64;

    // All same-site dyads share distance zero: one pooled class.
    let diag_total: u64 = clusters
        .sites()
        .iter()
        .map(|s| {
            let occ = s.occupancy as u64;
            occ * (occ - 1) / 2
        })
        .sum();
    let diag_nonempty: u64 = (0..k as u32)
        .filter_map(|s| nonempty_in_class.get(&(s, s)))
        .sum();
    let diag_empty = diag_total - diag_nonempty;
    if diag_empty > 0 {
        let dp = dyad_params_raw(0.0, params);
        loglik += diag_empty as f64 * empty_loglik_raw(t, &dp);
        empty_class_evals += 1;
    }

    // Off-diagonal classes in fixed (a, b) order so float accumulation is
    // reproducible.
    for a in 0..k {
        let occ_a = clusters.site(a).occupancy as u64;
        for b in (a + 1)..k {
            let occ_b = clusters.site(b).occupancy as u64;
            let class_total = occ_a * occ_b;
            let class_nonempty =
                nonempty_in_class.get(&(a as u32, b as u32)).copied().unwrap_or(0);
            let class_empty = class_total - class_nonempty;
            if class_empty > 0 {
                let d = clusters.site(a).coord.distance_raw(&clusters.site(b).coord);
                let dp = dyad_params_raw(d, params);
                loglik += class_empty as f64 * empty_loglik_raw(t, &dp);
                empty_class_evals += 1;
            }
        }
    }

    Ok(AggregatedLoglik {
        loglik,
        eval_count: empty_class_evals + nonempty_evals,
        empty_class_evals,
        nonempty_evals,
    })
}

/// Simulate a network from the generative process: per dyad, open with
/// probability `p`; if open, draw a rate from `gamma(r, a)` and a Poisson
/// contact count over the window.
pub fn simulate_network<R: Rng + ?Sized>(
    clusters: &ClusterTable,
    params: &PopulationParams,
    window: ObservationWindow,
    rng: &mut R,
) -> Result<DyadTable> {
    let contacts = simulate_contact_pairs(clusters, params, window, rng)?;
    let records: Vec<InteractionRecord> = contacts
        .into_iter()
        .map(|(a, b)| InteractionRecord { a, b, week: window.start_week() })
        .collect();
    build_dyad_table(&records, clusters.n(), window)
}

/// Like [`simulate_network`] but emits one record per contact, with weeks
/// drawn uniformly over the window.
pub fn simulate_records<R: Rng + ?Sized>(
    clusters: &ClusterTable,
    params: &PopulationParams,
    window: ObservationWindow,
    rng: &mut R,
) -> Result<Vec<InteractionRecord>> {
    let contacts = simulate_contact_pairs(clusters, params, window, rng)?;
    // Weeks are drawn after all counts so count-only and record-level
    // simulation share the same per-dyad random draws.
    let records = contacts
        .into_iter()
        .map(|(a, b)| InteractionRecord {
            a,
            b,
            week: rng.random_range(window.start_week()..window.end_week()),
        })
        .collect();
    Ok(records)
}

fn simulate_contact_pairs<R: Rng + ?Sized>(
    clusters: &ClusterTable,
    params: &PopulationParams,
    window: ObservationWindow,
    rng: &mut R,
) -> Result<Vec<(u32, u32)>> {
    let n = clusters.n();
    let t = window.duration() as f64;
    let mut dp_cache: HashMap<(u32, u32), DyadParams> = HashMap::new();
    let mut contacts = Vec::new();
    for i in 0..n {
        let si = clusters.site_of(i)? as u32;
        for j in (i + 1)..n {
            let sj = clusters.site_of(j)? as u32;
            let class = (si.min(sj), si.max(sj));
            let dp = *dp_cache.entry(class).or_insert_with(|| {
                let d = clusters
                    .site(class.0 as usize)
                    .coord
                    .distance_raw(&clusters.site(class.1 as usize).coord);
                dyad_params_raw(d, params)
            });
            if rng.random::<f64>() >= dp.p {
                continue;
            }
            let gamma = Gamma::new(dp.r, 1.0 / dp.a)
                .map_err(|e| Error::Numerical(format!("rate gamma: {e}")))?;
            let lambda: f64 = gamma.sample(rng);
            let mean_count = lambda * t;
            if mean_count <= 0.0 {
                continue;
            }
            let poisson = Poisson::new(mean_count)
                .map_err(|e| Error::Numerical(format!("poisson({mean_count}): {e}")))?;
            let y = poisson.sample(rng) as u64;
            for _ in 0..y {
                contacts.push((i, j));
            }
        }
    }
    Ok(contacts)
}

/// Probability that a calibration-empty dyad produces at least one contact in
/// a future window of length `t_h`.
///
/// By Bayes's theorem, the posterior open probability after observing zero
/// contacts over `t` weeks is `p s / (1 - p + p s)` with `s = (a/(a+t))^r`;
/// conditional on open, zero contacts update the rate prior from
/// `gamma(r, a)` to `gamma(r, a + t)` (shape unchanged, exponential-gamma
/// conjugacy), so a future window of length `t_h` stays empty with
/// probability `((a+t)/(a+t+t_h))^r`.
pub fn prob_nonempty_future(t: f64, t_h: f64, dp: &DyadParams) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameter(format!("calibration length must be positive, got {t}")));
    }
    if !(t_h.is_finite() && t_h >= 0.0) {
        return Err(Error::InvalidParameter(format!("holdout length must be >= 0, got {t_h}")));
    }
    if !((0.0..=1.0).contains(&dp.p) && dp.r > 0.0 && dp.a > 0.0) {
        return Err(Error::InvalidParameter("invalid dyad parameters".into()));
    }
    if dp.p == 0.0 {
        return Ok(0.0);
    }
    let survive = (dp.r * -(t / dp.a).ln_1p()).exp();
    let posterior_open = dp.p * survive / ((1.0 - dp.p) + dp.p * survive);
    let future_nonempty = -(dp.r * -(t_h / (dp.a + t)).ln_1p()).exp_m1();
    Ok(posterior_open * future_nonempty)
}
