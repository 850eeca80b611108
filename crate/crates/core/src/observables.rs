//! Cavity absorption spectrum and secular population dynamics.
//!
//! The spectrum is a pair of Lorentzians sitting at the Lamb-shifted
//! polariton energies with half-widths Re R_{±G}, normalized so the total
//! area is π·A₀ with A₀ = 1. The dynamics aggregate the N−1 degenerate dark
//! states into one pool, reducing the populations to a 4-level Pauli master
//! equation that is propagated by exact matrix exponentials; tracked
//! coherences decay independently at their secular rates. The non-Markovian
//! survival factor of the dark coherences is exposed separately since it
//! only needs the displacement propagator.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::correlations::PropagatorGrid;
use crate::error::{Error, Result};
use crate::rates::{CoherenceRate, Level, RateSet, RateValue, Theory};

/// One Lorentzian line of the absorption spectrum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralPeak {
    /// Line center: the Lamb-shifted polariton energy (eV).
    pub center: f64,
    /// Half width at half maximum, Re R_{±G} (eV).
    pub half_width: f64,
    /// True when the width vanishes and the line degenerates to a δ spike.
    pub delta_line: bool,
}

/// Sampled absorption spectrum with peak metadata.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub theory: Theory,
    /// Sample frequencies (eV), ascending.
    pub omega: Vec<f64>,
    /// A(ω) in units of A₀ = 1.
    pub intensity: Vec<f64>,
    /// Upper and lower polariton lines, in that order.
    pub peaks: [SpectralPeak; 2],
    /// Total spectral weight: trapezoid area of the samples, plus the
    /// analytic Lorentzian tails beyond the grid edges, plus π/2 for each
    /// δ line. Equals π·A₀ up to sampling error however the grid is cut.
    pub area: f64,
}

/// Builds the absorption spectrum from the polariton–ground coherence rates.
///
/// A(ω) = (1/2)·Σ_{p∈{+,−}} w_p / (w_p² + (c_p − ω)²), with w the decay and
/// c the shifted line position of R_{pG}. A vanishing decay is reported as a
/// δ line and skipped in the samples; a Markovian-divergent decay has no
/// line shape at all and is rejected.
pub fn absorption_spectrum(
    theory: Theory,
    coh: &[CoherenceRate],
    omega: &[f64],
) -> Result<SpectrumResult> {
    if omega.len() < 2 || omega.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "omega",
            "the frequency grid must be ascending with at least two samples",
        ));
    }
    let mut peaks = Vec::with_capacity(2);
    for level in [Level::Plus, Level::Minus] {
        let r = coh
            .iter()
            .find(|r| (r.mu, r.nu) == (level, Level::Ground))
            .ok_or_else(|| {
                Error::invalid("coh", "missing a polariton–ground coherence rate")
            })?;
        let width = match r.decay {
            RateValue::Finite(w) if w >= 0.0 => w,
            RateValue::Finite(_) => {
                return Err(Error::invalid("coh", "negative coherence decay"));
            }
            RateValue::MarkovianDivergent => {
                return Err(Error::invalid(
                    "coh",
                    "the polariton line has no Markovian width; the static rate diverges",
                ));
            }
        };
        peaks.push(SpectralPeak {
            center: r.shift,
            half_width: width,
            delta_line: width == 0.0,
        });
    }
    let peaks = [peaks[0], peaks[1]];

    let intensity: Vec<f64> = omega
        .iter()
        .map(|&om| {
            peaks
                .iter()
                .filter(|p| !p.delta_line)
                .map(|p| {
                    let d = p.center - om;
                    0.5 * p.half_width / (p.half_width * p.half_width + d * d)
                })
                .sum()
        })
        .collect();
    let mut area = 0.0;
    for k in 1..omega.len() {
        area += 0.5 * (intensity[k] + intensity[k - 1]) * (omega[k] - omega[k - 1]);
    }
    let half_pi = 0.5 * std::f64::consts::PI;
    for p in &peaks {
        if p.delta_line {
            area += half_pi;
        } else {
            let lo = (p.center - omega[0]) / p.half_width;
            let hi = (omega[omega.len() - 1] - p.center) / p.half_width;
            area += 0.5 * (half_pi - lo.atan()) + 0.5 * (half_pi - hi.atan());
        }
    }
    Ok(SpectrumResult {
        theory,
        omega: omega.to_vec(),
        intensity,
        peaks,
        area,
    })
}

/// Initial condition of the aggregated 4-level dynamics.
#[derive(Debug, Clone, Serialize)]
pub struct InitialState {
    pub plus: f64,
    pub minus: f64,
    /// Total population of the dark manifold, not per state.
    pub dark_total: f64,
    pub ground: f64,
    /// Coherence pairs to track, with initial magnitudes.
    pub coherences: Vec<(Level, Level, f64)>,
}

impl InitialState {
    /// Everything in the upper polariton.
    pub fn pure_plus() -> Self {
        InitialState {
            plus: 1.0,
            minus: 0.0,
            dark_total: 0.0,
            ground: 0.0,
            coherences: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let pops = [self.plus, self.minus, self.dark_total, self.ground];
        if pops.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid("initial", "populations must lie in [0, 1]"));
        }
        let sum: f64 = pops.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "initial",
                format!("populations sum to {sum}, expected 1"),
            ));
        }
        Ok(())
    }
}

/// One tracked coherence: |ρ_{μν}(t)| = |ρ_{μν}(0)|·e^{−Re R_{μν} t}.
#[derive(Debug, Clone, Serialize)]
pub struct CoherenceTrace {
    pub mu: Level,
    pub nu: Level,
    /// Secular decay rate Re R_{μν}; a Markovian-divergent rate kills the
    /// magnitude for every t > 0.
    pub decay: RateValue,
    pub magnitude: Vec<f64>,
}

/// Populations and tracked coherence magnitudes on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct PopulationTrajectory {
    /// Time grid (eV⁻¹).
    pub t: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// Aggregate dark population, (N−1)× the per-state value.
    pub dark_total: Vec<f64>,
    pub ground: Vec<f64>,
    pub coherences: Vec<CoherenceTrace>,
}

/// Generator of the aggregated populations, columns ordered (+, −, D, G).
///
/// The diagonal is the negative column sum of the transfer rates, so the
/// trace is conserved exactly and the stationary state follows from detailed
/// balance alone. Dark-to-dark shuffling cancels inside the aggregate and
/// never enters.
fn population_generator(rates: &RateSet) -> Result<DMatrix<f64>> {
    let nm1 = rates.n - 1.0;
    let k_pm = rates.k_plus_to_minus.total();
    let k_mp = rates.k_minus_to_plus.total();
    let k_pd = nm1 * rates.k_plus_to_dark.total();
    let k_md = nm1 * rates.k_minus_to_dark.total();
    let k_dp = rates.k_dark_to_plus.total();
    let k_dm = rates.k_dark_to_minus.total();
    for k in [k_pm, k_mp, k_pd, k_md, k_dp, k_dm] {
        if k < 0.0 || !k.is_finite() {
            return Err(Error::invalid("rates", "transfer rates must be finite and ≥ 0"));
        }
    }
    let mut m = DMatrix::<f64>::zeros(4, 4);
    m[(1, 0)] = k_pm;
    m[(2, 0)] = k_pd;
    m[(0, 0)] = -(k_pm + k_pd);
    m[(0, 1)] = k_mp;
    m[(2, 1)] = k_md;
    m[(1, 1)] = -(k_mp + k_md);
    m[(0, 2)] = k_dp;
    m[(1, 2)] = k_dm;
    m[(2, 2)] = -(k_dp + k_dm);
    Ok(m)
}

/// Boltzmann distribution over the excited manifold {ω₊, ω_d×(N−1), ω₋},
/// returned as (plus, minus, dark aggregate) normalized to 1.
///
/// This is the stationary state of the population generator whenever the
/// transfer rates obey detailed balance.
pub fn boltzmann_stationary(rates: &RateSet) -> [f64; 3] {
    // Weights relative to the dark level to keep the exponents moderate.
    let wp = (-rates.beta * (rates.omega_plus - rates.omega_dark)).exp();
    let wm = (-rates.beta * (rates.omega_minus - rates.omega_dark)).exp();
    let wd = rates.n - 1.0;
    let z = wp + wm + wd;
    [wp / z, wm / z, wd / z]
}

/// Propagates the aggregated populations and the tracked coherences.
///
/// The 4-level generator is exponentiated exactly at every requested time,
/// so there is no step-size control and no stiffness limit; the cost is one
/// 4×4 exponential per sample.
pub fn secular_dynamics(
    rates: &RateSet,
    initial: &InitialState,
    t: &[f64],
) -> Result<PopulationTrajectory> {
    initial.validate()?;
    if t.iter().any(|&tk| tk < 0.0 || !tk.is_finite()) {
        return Err(Error::invalid("t", "time samples must be finite and ≥ 0"));
    }
    let m = population_generator(rates)?;
    let p0 = nalgebra::DVector::from_column_slice(&[
        initial.plus,
        initial.minus,
        initial.dark_total,
        initial.ground,
    ]);

    let n = t.len();
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    let mut dark_total = Vec::with_capacity(n);
    let mut ground = Vec::with_capacity(n);
    for &tk in t {
        let p = (m.clone() * tk).exp() * &p0;
        // The exponential of a generator is a stochastic map; only rounding
        // can push a population below zero.
        let clip = |v: f64| if (-1e-12..0.0).contains(&v) { 0.0 } else { v };
        plus.push(clip(p[0]));
        minus.push(clip(p[1]));
        dark_total.push(clip(p[2]));
        ground.push(clip(p[3]));
    }

    let mut coherences = Vec::with_capacity(initial.coherences.len());
    for &(mu, nu, m0) in &initial.coherences {
        let decay = decay_rate(rates, mu, nu)?;
        let magnitude: Vec<f64> = t
            .iter()
            .map(|&tk| match decay {
                RateValue::Finite(r) => m0 * (-r * tk).exp(),
                RateValue::MarkovianDivergent => {
                    if tk == 0.0 {
                        m0
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        coherences.push(CoherenceTrace {
            mu,
            nu,
            decay,
            magnitude,
        });
    }

    Ok(PopulationTrajectory {
        t: t.to_vec(),
        plus,
        minus,
        dark_total,
        ground,
        coherences,
    })
}

/// Secular decay rate Re R_{μν} = ½(K↓_μ + K↓_ν) + K^φ_{μν} of one
/// coherence, assembled from the rate set.
fn decay_rate(rates: &RateSet, mu: Level, nu: Level) -> Result<RateValue> {
    if mu == nu {
        let loss = rates.loss(mu);
        return Ok(loss);
    }
    let half_losses = match (rates.loss(mu), rates.loss(nu)) {
        (RateValue::Finite(a), RateValue::Finite(b)) => 0.5 * (a + b),
        _ => return Ok(RateValue::MarkovianDivergent),
    };
    Ok(match rates.dephasing(mu, nu) {
        RateValue::Finite(kphi) => RateValue::Finite(half_losses + kphi),
        RateValue::MarkovianDivergent => RateValue::MarkovianDivergent,
    })
}

/// Non-Markovian survival factor of a dark–ground coherence,
/// D_{a,N}(t) = exp(−Γ_d(t)/(a·N)) with Γ_d(t) = Re[φ_D(0) − φ_D(t)].
///
/// The displacement propagator carries the whole time dependence; the
/// 1/(a·N) scaling is why single-molecule coherences die while collective
/// ones survive, D_{a,N}(∞) → 1 as N grows.
pub fn dark_survival(grid: &PropagatorGrid, a: f64, n: f64, t: f64) -> f64 {
    let gamma_d = grid.re_phi_d_at(0.0) - grid.re_phi_d_at(t);
    (-gamma_d / (a * n)).exp()
}
