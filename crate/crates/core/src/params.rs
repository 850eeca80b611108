//! Physical parameters, unit conventions, thermal functions, and regime
//! classification.
//!
//! Units: ħ = 1, energies in eV, times in eV⁻¹, temperatures in K.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant in eV/K.
pub const K_B: f64 = 8.617_333_262e-5;

/// How the cavity energy relates to the molecular transition energy.
///
/// The detuning entering the polariton eigensystem is Δ = ω_m − λᵛ − ω_c,
/// where λᵛ is the variational frame shift of the molecular energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResonanceConvention {
    /// Cavity tuned to the observed (shifted) molecular line: ω_c = ω_m + S₁(0),
    /// with S₁(0) = −∫dω J(ω)/ω. Gives Δ = λ_reorg − λᵛ ≥ 0.
    Measured,
    /// Cavity tuned to the bare molecular energy: ω_c = ω_m, so Δ = −λᵛ ≤ 0.
    Bare,
    /// Both energies taken exactly as supplied.
    Explicit,
}

/// Validated model parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Bare light–matter coupling of a single molecule (eV).
    pub g: f64,
    /// Number of molecules. Integral-valued, stored as f64 so that counts
    /// beyond 10¹² stay exact in formulas.
    pub n: f64,
    /// Cavity photon energy (eV). For the `Measured` and `Bare` conventions
    /// this input is overridden by the convention.
    pub omega_c: f64,
    /// Bare molecular transition energy (eV).
    pub omega_m: f64,
    /// Temperature (K).
    pub t: f64,
    /// Dimensionless vibrational coupling strength.
    pub a: f64,
    /// Ohmicity exponent of the spectral density.
    pub p: f64,
    /// Spectral density cutoff (eV).
    pub omega_0: f64,
    /// Cavity tuning convention.
    pub resonance: ResonanceConvention,
}

impl PhysicalParams {
    /// Validates invariants and returns the parameter set.
    pub fn new(
        g: f64,
        n: f64,
        omega_c: f64,
        omega_m: f64,
        t: f64,
        a: f64,
        p: f64,
        omega_0: f64,
        resonance: ResonanceConvention,
    ) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid("g", format!("must be positive, got {g}")));
        }
        if !(n >= 2.0) || n.fract() != 0.0 || !n.is_finite() {
            return Err(Error::invalid(
                "N",
                format!("must be an integer ≥ 2, got {n}"),
            ));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid("T", format!("must be positive, got {t}")));
        }
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::invalid(
                "A",
                format!("must be non-negative, got {a}"),
            ));
        }
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::invalid("p", format!("must be positive, got {p}")));
        }
        if !(omega_0 > 0.0) || !omega_0.is_finite() {
            return Err(Error::invalid(
                "omega_0",
                format!("must be positive, got {omega_0}"),
            ));
        }
        if !omega_m.is_finite() || !omega_c.is_finite() {
            return Err(Error::invalid("omega_m", "energies must be finite"));
        }
        Ok(Self {
            g,
            n,
            omega_c,
            omega_m,
            t,
            a,
            p,
            omega_0,
            resonance,
        })
    }

    /// Inverse temperature β = 1/(k_B T) in eV⁻¹.
    pub fn beta(&self) -> f64 {
        1.0 / (K_B * self.t)
    }

    /// Bare collective coupling Ω = g√N (eV).
    pub fn omega_collective(&self) -> f64 {
        self.g * self.n.sqrt()
    }

    /// Thermal crossover scale Ω_β = 10/β (eV).
    pub fn omega_beta(&self) -> f64 {
        10.0 / self.beta()
    }
}

/// Scales derived from the parameters and a converged frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DerivedScales {
    /// Inverse temperature (eV⁻¹).
    pub beta: f64,
    /// Bare collective coupling g√N (eV).
    pub omega: f64,
    /// Renormalized collective coupling g𝔅√N (eV).
    pub omega_r: f64,
    /// Thermal crossover scale 10/β (eV).
    pub omega_beta: f64,
    /// Polariton splitting √(Δ² + 4Ω_r²) (eV).
    pub theta: f64,
}

impl DerivedScales {
    /// Builds the scales from the parameters, the coherent renormalization
    /// factor 𝔅 ∈ (0, 1], and the frame detuning Δ.
    pub fn new(params: &PhysicalParams, frak_b: f64, delta: f64) -> Self {
        let beta = params.beta();
        let omega = params.omega_collective();
        let omega_r = omega * frak_b;
        DerivedScales {
            beta,
            omega,
            omega_r,
            omega_beta: 10.0 / beta,
            theta: (delta * delta + 4.0 * omega_r * omega_r).sqrt(),
        }
    }
}

/// Parameter regime label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    /// High temperature, weak collective coupling: Ω_r ≲ Ω_β and ω₀ ≲ Ω_β.
    HighTWeakLm,
    /// High temperature, strong collective coupling: Ω_r ≳ Ω_β.
    HighTStrongLm,
    /// Low temperature: ω₀ ≳ Ω_β.
    LowT,
    /// Crossover band around Ω_r = Ω_β.
    Transitory,
}

/// Classified regime, with the resonance flag.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Regime {
    /// Which coupling/temperature regime the parameters sit in.
    pub tag: RegimeTag,
    /// Whether the polariton doublet is effectively resonant (2Ω_r ≫ |Δ|).
    pub resonant: bool,
}

/// Tunable classification thresholds.
#[derive(Debug, Clone, Copy)]
pub struct RegimeThresholds {
    /// The resonance test 2Ω_r > resonance_factor·|Δ|.
    pub resonance_factor: f64,
    /// Lower edge of the transitory band in Ω_r/Ω_β.
    pub transitory_low: f64,
    /// Upper edge of the transitory band in Ω_r/Ω_β.
    pub transitory_high: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            resonance_factor: 10.0,
            transitory_low: 0.3,
            transitory_high: 3.0,
        }
    }
}

/// Classifies the regime from converged scales. Pure and deterministic.
pub fn classify_regime(
    params: &PhysicalParams,
    scales: &DerivedScales,
    delta: f64,
    thresholds: &RegimeThresholds,
) -> Regime {
    let resonant = 2.0 * scales.omega_r > thresholds.resonance_factor * delta.abs();
    let ratio = scales.omega_r / scales.omega_beta;
    let tag = if params.omega_0 >= scales.omega_beta {
        RegimeTag::LowT
    } else if ratio >= thresholds.transitory_high {
        RegimeTag::HighTStrongLm
    } else if ratio > thresholds.transitory_low {
        RegimeTag::Transitory
    } else {
        RegimeTag::HighTWeakLm
    };
    Regime { tag, resonant }
}

/// Bose–Einstein occupation pair (n_B, ñ_B) at energy ν.
///
/// n_B = 1/(e^{βν} − 1) and ñ_B = 1 + n_B; they satisfy ñ_B = e^{βν} n_B.
/// ν = 0 is singular and rejected; callers needing ν → 0 must use the
/// limiting forms of the combined integrand.
pub fn bose_occupation(nu: f64, beta: f64) -> Result<(f64, f64)> {
    if nu == 0.0 {
        return Err(Error::invalid(
            "nu",
            "Bose occupation is singular at ν = 0; use the limiting form",
        ));
    }
    let x = beta * nu;
    let n = 1.0 / x.exp_m1();
    let n_tilde = -1.0 / (-x).exp_m1();
    Ok((n, n_tilde))
}

/// Parses a flat key=value parameter map into validated parameters.
///
/// Recognized keys: g_eV, N, omega_c_eV, omega_m_eV, T_K, A, p, omega0_eV,
/// resonance. omega_c_eV is required only by the `explicit` convention.
pub fn build_params(raw: &BTreeMap<String, String>) -> Result<PhysicalParams> {
    fn get_f64(raw: &BTreeMap<String, String>, key: &'static str) -> Result<f64> {
        let s = raw
            .get(key)
            .ok_or_else(|| Error::invalid("config", format!("missing key `{key}`")))?;
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::invalid("config", format!("key `{key}`: {e}")))
    }

    let resonance = match raw
        .get("resonance")
        .map(|s| s.trim().to_ascii_lowercase())
        .as_deref()
    {
        Some("measured") => ResonanceConvention::Measured,
        Some("bare") => ResonanceConvention::Bare,
        Some("explicit") => ResonanceConvention::Explicit,
        Some(other) => {
            return Err(Error::invalid(
                "resonance",
                format!("unknown convention `{other}` (expected measured, bare, or explicit)"),
            ))
        }
        None => {
            return Err(Error::invalid("config", "missing key `resonance`"));
        }
    };

    let omega_m = get_f64(raw, "omega_m_eV")?;
    let omega_c = if resonance == ResonanceConvention::Explicit {
        get_f64(raw, "omega_c_eV")?
    } else if raw.contains_key("omega_c_eV") {
        get_f64(raw, "omega_c_eV")?
    } else {
        omega_m
    };

    PhysicalParams::new(
        get_f64(raw, "g_eV")?,
        get_f64(raw, "N")?,
        omega_c,
        omega_m,
        get_f64(raw, "T_K")?,
        get_f64(raw, "A")?,
        get_f64(raw, "p")?,
        get_f64(raw, "omega0_eV")?,
        resonance,
    )
}
