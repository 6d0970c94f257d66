//! Closed-form populations for an atom starting in `|e⟩`, the beat
//! frequency of the symmetric configuration, and a beat estimator for
//! sampled trajectories.
//!
//! The symmetric solution is evaluated through divided differences of
//! `z ↦ e^{zt}`, which stay finite when exponents coincide (`f = 0`,
//! `Γ² + f² = 0`) and continue smoothly to imaginary `f`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{derive_rates, is_symmetric, CavityParams, CouplingSet, LevelScheme};
use crate::series::{Level, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("time must be finite and non-negative, got {0}")]
    BadTime(f64),
    #[error("rate `{0}` must be finite and non-negative")]
    BadRate(&'static str),
    #[error("parameter `{0}` must be finite")]
    NonFinite(&'static str),
    #[error("configuration is not symmetric (equal couplings, equal kappa, modes tuned to the doublet centre)")]
    NotSymmetric,
    #[error("formula is singular here: {0}")]
    Singular(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Populations {
    pub rho_ee: f64,
    pub rho_11: f64,
    pub rho_22: f64,
    pub rho_gg: f64,
}

impl Populations {
    pub fn as_array(&self) -> [f64; 4] {
        [self.rho_ee, self.rho_11, self.rho_22, self.rho_gg]
    }

    pub fn sum(&self) -> f64 {
        self.as_array().iter().sum()
    }

    pub fn get(&self, level: Level) -> f64 {
        self.as_array()[level.index()]
    }
}

fn check_time(t: f64) -> Result<(), AnalyticError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(AnalyticError::BadTime(t))
    }
}

// Divided differences of z ↦ e^{zt}.

const SERIES_X: f64 = 1e-3;
const CLUSTER_X: f64 = 0.5;
const TAYLOR_TERMS: usize = 40;

/// `(e^x − 1)/x`, accurate near 0.
fn exprel(x: Complex64) -> Complex64 {
    if x.norm() < SERIES_X {
        1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        (x.exp() - 1.0) / x
    }
}

/// `(e^{at} − e^{bt})/(a − b)`.
fn dd2(a: Complex64, b: Complex64, t: f64) -> Complex64 {
    // factor out the slower exponential so nothing overflows
    let (a, b) = if a.re > b.re { (b, a) } else { (a, b) };
    (b * t).exp() * t * exprel((a - b) * t)
}

/// Second divided difference of `e^{zt}` at three nodes.
fn dd3(nodes: [Complex64; 3], t: f64) -> Complex64 {
    let [x, y, z] = nodes;
    let pairs = [(x, y, z), (x, z, y), (y, z, x)];
    let (p, q, m) = pairs
        .into_iter()
        .max_by(|a, b| (a.0 - a.1).norm().total_cmp(&(b.0 - b.1).norm()))
        .expect("three pairs");
    if (p - q).norm() * t >= CLUSTER_X {
        return (dd2(p, m, t) - dd2(m, q, t)) / (p - q);
    }
    // e^{ct} Σ_{k≥2} t^k/k! h_{k−2}(y), h the complete homogeneous polynomials
    let c = (x + y + z) / 3.0;
    let ys = [x - c, y - c, z - c];
    let mut h = vec![Complex64::new(0.0, 0.0); TAYLOR_TERMS];
    h[0] = Complex64::new(1.0, 0.0);
    for yi in ys {
        for k in 1..TAYLOR_TERMS {
            h[k] = h[k] + yi * h[k - 1];
        }
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut coeff = t * t / 2.0;
    for (k, hk) in h.iter().enumerate() {
        sum += coeff * hk;
        coeff *= t / (k + 3) as f64;
    }
    (c * t).exp() * sum
}

/// Rates of the secular (η = 0 or fast-averaged) equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecularParams {
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub gamma_1p: f64,
    pub gamma_2p: f64,
}

impl SecularParams {
    pub fn new(gamma_1: f64, gamma_2: f64, gamma_1p: f64, gamma_2p: f64) -> Result<Self, AnalyticError> {
        for (v, name) in [
            (gamma_1, "gamma_1"),
            (gamma_2, "gamma_2"),
            (gamma_1p, "gamma_1p"),
            (gamma_2p, "gamma_2p"),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(AnalyticError::BadRate(name));
            }
        }
        Ok(Self {
            gamma_1,
            gamma_2,
            gamma_1p,
            gamma_2p,
        })
    }

    pub fn from_rates(rates: &crate::model::RateSet) -> Result<Self, AnalyticError> {
        Self::new(rates.gamma_1, rates.gamma_2, rates.gamma_1p, rates.gamma_2p)
    }
}

/// Populations of the secular equations; the two intermediate levels are
/// fed from `|e⟩` at rate `2(Γ₁+Γ₂)`.
pub fn secular_solution(t: f64, p: &SecularParams) -> Result<Populations, AnalyticError> {
    check_time(t)?;
    let feed = Complex64::new(-2.0 * (p.gamma_1 + p.gamma_2), 0.0);
    let rho_ee = (-2.0 * (p.gamma_1 + p.gamma_2) * t).exp();
    let rho_11 = 2.0 * p.gamma_1 * dd2(Complex64::new(-2.0 * p.gamma_1p, 0.0), feed, t).re;
    let rho_22 = 2.0 * p.gamma_2 * dd2(Complex64::new(-2.0 * p.gamma_2p, 0.0), feed, t).re;
    Ok(Populations {
        rho_ee,
        rho_11,
        rho_22,
        rho_gg: 1.0 - rho_ee - rho_11 - rho_22,
    })
}

/// Variant whose second exponential decays at `2(Γ′₁+Γ′₂)` instead of the
/// feeding rate. Not a solution of the secular equations in general; kept
/// for comparison. Errors where its denominator `Γ₁+Γ₂−Γ′ᵢ` vanishes.
pub fn secular_solution_as_printed(t: f64, p: &SecularParams) -> Result<Populations, AnalyticError> {
    check_time(t)?;
    let ge = p.gamma_1 + p.gamma_2;
    let tail = (-2.0 * (p.gamma_1p + p.gamma_2p) * t).exp();
    let branch = |g: f64, gp: f64| {
        let denom = ge - gp;
        if denom == 0.0 {
            Err(AnalyticError::Singular("gamma_1 + gamma_2 = gamma_ip"))
        } else {
            Ok(g / denom * ((-2.0 * gp * t).exp() - tail))
        }
    };
    let rho_ee = (-2.0 * ge * t).exp();
    let rho_11 = branch(p.gamma_1, p.gamma_1p)?;
    let rho_22 = branch(p.gamma_2, p.gamma_2p)?;
    Ok(Populations {
        rho_ee,
        rho_11,
        rho_22,
        rho_gg: 1.0 - rho_ee - rho_11 - rho_22,
    })
}

/// Parameters of the symmetric configuration: equal couplings `G`, equal
/// cavity rates `κ`, both modes tuned to the centre of the doublet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetricParams {
    pub gamma: f64,
    pub g: f64,
    pub kappa: f64,
    pub omega: f64,
    pub alpha: Complex64,
    /// Shift `δ′ = δ′₁ = −δ′₂`.
    pub delta_p: f64,
    /// `f² = (δ′+Ω)² − |α|²`; negative when `f` is imaginary.
    pub f_squared: f64,
}

impl SymmetricParams {
    /// `g` is the common coupling magnitude.
    pub fn new(g: f64, kappa: f64, omega: f64) -> Result<Self, AnalyticError> {
        for (v, name) in [(g, "G"), (kappa, "kappa"), (omega, "Omega")] {
            if !v.is_finite() {
                return Err(AnalyticError::NonFinite(name));
            }
        }
        if kappa <= 0.0 {
            return Err(AnalyticError::BadRate("kappa"));
        }
        let g2 = g * g;
        let denom = kappa * kappa + omega * omega;
        let gamma = g2 * kappa / denom;
        let delta_p = g2 * omega / denom;
        let alpha = g2 / Complex64::new(kappa, omega);
        let nu = delta_p + omega;
        Ok(Self {
            gamma,
            g: g.abs(),
            kappa,
            omega,
            alpha,
            delta_p,
            f_squared: nu * nu - alpha.norm_sqr(),
        })
    }

    /// Extracts the parameters from a full configuration, checking symmetry.
    pub fn from_components(
        levels: &LevelScheme,
        cavity: &CavityParams,
        couplings: &CouplingSet,
    ) -> Result<Self, AnalyticError> {
        if !is_symmetric(couplings, levels, cavity) {
            return Err(AnalyticError::NotSymmetric);
        }
        let rates = derive_rates(couplings, levels, cavity);
        let alpha = rates.alpha.ok_or(AnalyticError::NotSymmetric)?;
        let nu = rates.delta_1p + rates.omega;
        Ok(Self {
            gamma: rates.gamma_1,
            g: couplings.g_1e.norm(),
            kappa: cavity.kappa_a(),
            omega: rates.omega,
            alpha,
            delta_p: rates.delta_1p,
            f_squared: nu * nu - alpha.norm_sqr(),
        })
    }

    fn f(&self) -> Complex64 {
        Complex64::new(self.f_squared, 0.0).sqrt()
    }
}

/// Closed-form populations of the symmetric configuration with η = 1.
///
/// `ρ_ii = −(1 + 2|α|²/D) e^{−4Γt} + (1 + |α|²/f²) e^{−2Γt}
///        − (|α|²/D) e^{−2Γt} [(Γ²/f² − 1) cos 2ft + (2Γ/f) sin 2ft]`,
/// `D = Γ² + f²`, evaluated without division by `f` or `D`.
pub fn symmetric_solution(t: f64, p: &SymmetricParams) -> Result<Populations, AnalyticError> {
    check_time(t)?;
    let gamma = p.gamma;
    let a2 = p.alpha.norm_sqr();
    let nu = p.delta_p + p.omega;
    let f = p.f();
    let c = |x: f64| Complex64::new(x, 0.0);
    let two_if = 2.0 * Complex64::i() * f;
    let mu_p = c(-2.0 * gamma) + two_if;
    let mu_m = c(-2.0 * gamma) - two_if;
    let d = gamma * gamma + p.f_squared;

    let rho_ii = 4.0 * nu * nu * dd3([mu_p, c(-2.0 * gamma), mu_m], t) + 2.0 * gamma * dd2(mu_p, mu_m, t)
        - 4.0 * (d + 2.0 * a2) * dd3([mu_p, mu_m, c(-4.0 * gamma)], t);
    let rho_ii = rho_ii.re;
    let rho_ee = (-4.0 * gamma * t).exp();
    Ok(Populations {
        rho_ee,
        rho_11: rho_ii,
        rho_22: rho_ii,
        rho_gg: 1.0 - rho_ee - 2.0 * rho_ii,
    })
}

/// The same expression with `2|α|²/D` multiplying the oscillatory bracket.
/// It does not vanish at `t = 0` and does not solve the reduced equation;
/// kept for comparison. Imaginary `f` uses hyperbolic functions; `f = 0`
/// and `D = 0` are errors.
pub fn symmetric_solution_as_printed(t: f64, p: &SymmetricParams) -> Result<Populations, AnalyticError> {
    check_time(t)?;
    let gamma = p.gamma;
    let a2 = p.alpha.norm_sqr();
    let f2 = p.f_squared;
    let d = gamma * gamma + f2;
    if f2 == 0.0 {
        return Err(AnalyticError::Singular("f = 0"));
    }
    if d == 0.0 {
        return Err(AnalyticError::Singular("Gamma^2 + f^2 = 0"));
    }
    let (cos_term, sin_over_f) = if f2 > 0.0 {
        let f = f2.sqrt();
        ((2.0 * f * t).cos(), (2.0 * f * t).sin() / f)
    } else {
        let s = (-f2).sqrt();
        ((2.0 * s * t).cosh(), (2.0 * s * t).sinh() / s)
    };
    let e2 = (-2.0 * gamma * t).exp();
    let e4 = (-4.0 * gamma * t).exp();
    let rho_ii = -(1.0 + 2.0 * a2 / d) * e4 + (1.0 + a2 / f2) * e2
        - 2.0 * a2 / d * e2 * ((gamma * gamma / f2 - 1.0) * cos_term + 2.0 * gamma * sin_over_f);
    Ok(Populations {
        rho_ee: e4,
        rho_11: rho_ii,
        rho_22: rho_ii,
        rho_gg: 1.0 - e4 - 2.0 * rho_ii,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BeatFrequency {
    /// `2f`; purely imaginary when the beat condition fails.
    pub two_f: Complex64,
    pub beats: bool,
}

/// `2f = 2[(δ′+Ω)² − |α|²]^{1/2}`; beats occur when `(δ′+Ω)² > |α|²`.
pub fn beat_frequency(p: &SymmetricParams) -> BeatFrequency {
    BeatFrequency {
        two_f: 2.0 * p.f(),
        beats: p.f_squared > 0.0,
    }
}

/// Decay rates removed before locating beat oscillations: the envelope rate
/// of the oscillation and the rate at which the upper level feeds it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BeatDecay {
    pub envelope: f64,
    pub feed: f64,
}

impl BeatDecay {
    pub fn from_rates(rates: &crate::model::RateSet) -> Self {
        Self {
            envelope: rates.gamma_1p + rates.gamma_2p,
            feed: 2.0 * (rates.gamma_1 + rates.gamma_2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeatMeasurement {
    pub two_f: Option<f64>,
    pub crossings: usize,
    pub diagnostic: Option<String>,
}

impl BeatMeasurement {
    fn absent(crossings: usize, why: impl Into<String>) -> Self {
        Self {
            two_f: None,
            crossings,
            diagnostic: Some(why.into()),
        }
    }
}

const MIN_CROSSINGS: usize = 3;
const NOISE_FLOOR: f64 = 1e-6;
/// Filtered signals smaller than this fraction of the input are roundoff.
const SIGNAL_FLOOR: f64 = 1e-9;

/// Estimates the beat frequency of one population.
///
/// The population is multiplied by `e^{envelope·t}`, then the two
/// non-oscillating components (constant and `e^{−(feed−envelope)t}`) are
/// removed with an exact three-point filter. `2f` follows from the spacing
/// of zero crossings of what remains. Needs a uniform grid.
pub fn measure_beats(series: &TimeSeries, level: Level, decay: BeatDecay) -> BeatMeasurement {
    measure_beats_samples(&series.times, &series.population(level), decay)
}

pub fn measure_beats_samples(times: &[f64], values: &[f64], decay: BeatDecay) -> BeatMeasurement {
    let n = times.len().min(values.len());
    if n < 4 {
        return BeatMeasurement::absent(0, "too few samples");
    }
    let h = (times[n - 1] - times[0]) / (n - 1) as f64;
    let uniform = times[..n]
        .iter()
        .enumerate()
        .all(|(i, &t)| (t - (times[0] + i as f64 * h)).abs() <= 1e-9 * h.max(t.abs()));
    if !h.is_finite() || h <= 0.0 || !uniform {
        return BeatMeasurement::absent(0, "time grid is not uniform");
    }

    let scaled: Vec<f64> = times[..n]
        .iter()
        .zip(values)
        .map(|(&t, &v)| v * (decay.envelope * t).exp())
        .collect();
    let r = (-(decay.feed - decay.envelope) * h).exp();
    let filtered: Vec<(f64, f64)> = scaled
        .windows(3)
        .zip(times)
        .map(|(w, &t)| (t, w[2] - (1.0 + r) * w[1] + r * w[0]))
        .collect();
    let peak = filtered.iter().map(|(_, q)| q.abs()).fold(0.0, f64::max);
    let scale = scaled.iter().map(|p| p.abs()).fold(0.0, f64::max);
    if !peak.is_finite() || peak <= SIGNAL_FLOOR * scale {
        return BeatMeasurement::absent(0, "no oscillating component");
    }

    let floor = NOISE_FLOOR * peak;
    let significant: Vec<(f64, f64)> = filtered.into_iter().filter(|(_, q)| q.abs() >= floor).collect();
    let crossings: Vec<f64> = significant
        .windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| {
            let ((t0, q0), (t1, q1)) = (w[0], w[1]);
            t0 + (t1 - t0) * q0 / (q0 - q1)
        })
        .collect();
    let count = crossings.len();
    if count < MIN_CROSSINGS {
        return BeatMeasurement::absent(count, format!("only {count} zero crossings"));
    }
    let span = crossings[count - 1] - crossings[0];
    BeatMeasurement {
        two_f: Some(std::f64::consts::PI * (count - 1) as f64 / span),
        crossings: count,
        diagnostic: None,
    }
}

/// Window and sample count that cover at least three beat periods (and at
/// least `min_t_end`) with 40 samples per period.
pub fn beat_probe_grid(two_f: f64, min_t_end: f64, min_samples: usize) -> (f64, usize) {
    if !two_f.is_finite() || two_f <= 0.0 {
        return (min_t_end, min_samples);
    }
    let period = 2.0 * std::f64::consts::PI / two_f;
    let t_end = min_t_end.max(3.0 * period);
    let samples = ((40.0 * t_end / period).ceil() as usize + 1).max(min_samples);
    (t_end, samples)
}
