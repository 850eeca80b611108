//! Transition rates, pure-dephasing rates, and Lamb shifts for the
//! polaritonic master equations.
//!
//! Two theories share one assembly. The weak-coupling set treats the bath to
//! second order with the bare spectral density. The variational set works in
//! the displaced frame of a converged [`VariationalSolution`], dressing
//! single-phonon channels with the frame profile and adding multi-phonon
//! blocks built from powers of the propagator φ(τ). The detuned entry point
//! generalizes both polariton branches through the mixing parameter
//! ε = Δ/θ; the resonant functions run the same code at ε = 0, so the
//! Δ → 0 limit is exact by construction.
//!
//! Static (ν = 0) channels follow the tri-state policy of [`StaticRate`]:
//! a super-linear density contributes nothing, a linear one a finite rate,
//! and a sub-linear one is reported as divergent instead of being silently
//! truncated.

use serde::Serialize;

use crate::correlations::{
    bare_slope, displacement_slope, gamma1_static, gamma_multi_block, gamma_phi_multi, s1v,
    Parity, PropagatorGrid, StaticRate,
};
use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::quad::QuadratureConfig;
use crate::spectral::{derived_densities, DerivedDensities, SpectralDensity};
use crate::variational::VariationalSolution;
use crate::eigensystem::NonResonantEigensystem;

/// Which master-equation family produced a rate or shift set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theory {
    /// Second-order weak-coupling treatment with the bare spectral density.
    Wcme,
    /// Variational-frame treatment with dressed single-phonon channels and
    /// multi-phonon blocks.
    Vpme,
}

/// Weight placement for the detuned assembly.
///
/// The detuned rates mix three ingredients at each transition frequency: the
/// single-phonon channel, the even multi-phonon block, and the odd
/// multi-phonon block. The conventions below differ in how the mixing
/// weights multiply the blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum WeightConvention {
    /// Inter-polariton weights {1−ε², 4ε², 4}. Reduces exactly to the
    /// resonant set at Δ = 0 and obeys detailed balance at the detuned
    /// gaps. This is the default.
    #[default]
    Canonical,
    /// Inter-polariton weights {1−ε², 2ε², 2} with a linear (1±ε) virtual
    /// self-shift and the bare static shift on the dark-dark Lamb term.
    /// Does not reproduce the resonant inter-polariton multi-phonon rate in
    /// the Δ → 0 limit (it is smaller by exactly a factor 2); retained as a
    /// flagged alternative for comparison.
    HalvedPolaritonBlocks,
    /// Resonant-frequency rates with only the leading detuning factors
    /// applied multiplicatively: (1±ε) on polariton→dark transfer and
    /// (1−ε²) on the multi-phonon dephasing. Lamb shifts keep their
    /// resonant values while the level energies are detuned, so detailed
    /// balance holds only approximately and [`RateSet::validate`] skips
    /// that check.
    ScaledResonant,
}

/// Aggregated level label of the single-excitation manifold.
///
/// `Dark` stands for any one of the N−1 degenerate dark states; per-pair
/// rates are quoted for a single partner, with the (N−1)-fold multiplicity
/// applied by the `*_total` accessors and the population loss fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    Plus,
    Minus,
    Dark,
    Ground,
}

/// A rate whose static (ν = 0) component may diverge in the Markovian
/// limit, in which case no finite number is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RateValue {
    Finite(f64),
    MarkovianDivergent,
}

impl RateValue {
    /// Combines a finite part with `weight` times a static channel.
    ///
    /// A divergent static channel with zero weight leaves the finite part
    /// untouched; with any nonzero weight it makes the whole rate
    /// divergent.
    pub fn assemble(finite: f64, weight: f64, g0: StaticRate) -> RateValue {
        match g0 {
            StaticRate::Zero => RateValue::Finite(finite),
            StaticRate::Finite(v) => RateValue::Finite(finite + weight * v),
            StaticRate::Divergent if weight == 0.0 => RateValue::Finite(finite),
            StaticRate::Divergent => RateValue::MarkovianDivergent,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            RateValue::Finite(v) => Some(*v),
            RateValue::MarkovianDivergent => None,
        }
    }

    /// Numeric value, failing on the divergent branch.
    pub fn value(&self) -> Result<f64> {
        self.finite().ok_or_else(|| {
            Error::DivergentRate("rate diverges in the Markovian limit".into())
        })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, RateValue::MarkovianDivergent)
    }
}

/// A transition rate split into its single-phonon and multi-phonon parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSplit {
    pub single: f64,
    pub multi: f64,
}

impl RateSplit {
    pub fn total(&self) -> f64 {
        self.single + self.multi
    }

    fn scaled(&self, s: f64) -> RateSplit {
        RateSplit {
            single: s * self.single,
            multi: s * self.multi,
        }
    }
}

/// Secular transition and pure-dephasing rates between the aggregated
/// levels |+⟩, |−⟩, the dark manifold, and the ground state.
///
/// All rates are per-pair: `k_plus_to_dark` is the rate into one specific
/// dark state, and `k_dark_to_dark` the transfer rate to one other dark
/// state. Energies are in eV and rates in eV (ħ = 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSet {
    pub theory: Theory,
    pub convention: WeightConvention,
    /// Number of molecules.
    pub n: f64,
    /// Inverse temperature (eV⁻¹).
    pub beta: f64,
    /// Detuning Δ between the cavity line and the dressed molecular line.
    pub delta: f64,
    /// Mixing parameter ε = Δ/θ (zero for the resonant sets).
    pub epsilon: f64,
    /// Polariton gap θ = √(Δ² + 4Ω_r²); equals 2Ω_r on resonance.
    pub theta: f64,
    /// Collective coupling: 𝔅·g√N in the variational frame, the bare g√N
    /// for the weak-coupling set.
    pub omega_r: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_dark: f64,
    pub k_plus_to_minus: RateSplit,
    pub k_minus_to_plus: RateSplit,
    pub k_plus_to_dark: RateSplit,
    pub k_minus_to_dark: RateSplit,
    pub k_dark_to_plus: RateSplit,
    pub k_dark_to_minus: RateSplit,
    pub k_dark_to_dark: RateValue,
    /// Total population loss K↓ of each level.
    pub loss_plus: f64,
    pub loss_minus: f64,
    pub loss_dark: RateValue,
    pub kphi_plus_minus: RateValue,
    pub kphi_plus_ground: RateValue,
    pub kphi_minus_ground: RateValue,
    pub kphi_plus_dark: RateValue,
    pub kphi_minus_dark: RateValue,
    pub kphi_dark_ground: RateValue,
    /// Dephasing between two distinct dark states; identically zero.
    pub kphi_dark_dark: f64,
    /// Static single-phonon rate γ₁(0) entering the dark channels.
    pub gamma1_static: StaticRate,
    /// Multi-phonon pure-dephasing rate γ^φ_{>1}(0) at its resonant value,
    /// before any (1−ε²) suppression.
    pub gamma_phi_multi: f64,
}

impl RateSet {
    /// Rate from |+⟩ into the whole dark manifold.
    pub fn k_plus_to_dark_total(&self) -> f64 {
        (self.n - 1.0) * self.k_plus_to_dark.total()
    }

    /// Rate from |−⟩ into the whole dark manifold.
    pub fn k_minus_to_dark_total(&self) -> f64 {
        (self.n - 1.0) * self.k_minus_to_dark.total()
    }

    /// Total population loss of a level.
    pub fn loss(&self, level: Level) -> RateValue {
        match level {
            Level::Plus => RateValue::Finite(self.loss_plus),
            Level::Minus => RateValue::Finite(self.loss_minus),
            Level::Dark => self.loss_dark,
            Level::Ground => RateValue::Finite(0.0),
        }
    }

    /// Pure-dephasing rate of the coherence between two levels; symmetric
    /// in its arguments, zero for equal labels.
    pub fn dephasing(&self, mu: Level, nu: Level) -> RateValue {
        use Level::*;
        match (mu, nu) {
            (Plus, Minus) | (Minus, Plus) => self.kphi_plus_minus,
            (Plus, Ground) | (Ground, Plus) => self.kphi_plus_ground,
            (Minus, Ground) | (Ground, Minus) => self.kphi_minus_ground,
            (Plus, Dark) | (Dark, Plus) => self.kphi_plus_dark,
            (Minus, Dark) | (Dark, Minus) => self.kphi_minus_dark,
            (Dark, Ground) | (Ground, Dark) => self.kphi_dark_ground,
            (Dark, Dark) => RateValue::Finite(self.kphi_dark_dark),
            _ => RateValue::Finite(0.0),
        }
    }

    /// Checks positivity, the loss sums, and detailed balance at the level
    /// gaps (the balance check is skipped for `ScaledResonant`, which
    /// breaks it by construction).
    pub fn validate(&self, tol: f64) -> Result<()> {
        let splits = [
            ("k_plus_to_minus", &self.k_plus_to_minus),
            ("k_minus_to_plus", &self.k_minus_to_plus),
            ("k_plus_to_dark", &self.k_plus_to_dark),
            ("k_minus_to_dark", &self.k_minus_to_dark),
            ("k_dark_to_plus", &self.k_dark_to_plus),
            ("k_dark_to_minus", &self.k_dark_to_minus),
        ];
        for (name, s) in splits {
            if !(s.single >= 0.0) || !(s.multi >= 0.0) {
                return Err(Error::invalid(name, format!("negative rate: {s:?}")));
            }
        }
        for (name, v) in [
            ("k_dark_to_dark", &self.k_dark_to_dark),
            ("loss_dark", &self.loss_dark),
            ("kphi_plus_minus", &self.kphi_plus_minus),
            ("kphi_plus_ground", &self.kphi_plus_ground),
            ("kphi_minus_ground", &self.kphi_minus_ground),
            ("kphi_plus_dark", &self.kphi_plus_dark),
            ("kphi_minus_dark", &self.kphi_minus_dark),
            ("kphi_dark_ground", &self.kphi_dark_ground),
        ] {
            if let Some(x) = v.finite() {
                if !(x >= 0.0) {
                    return Err(Error::invalid(name, format!("negative rate: {x:e}")));
                }
            }
        }

        let lp = self.k_plus_to_minus.total() + (self.n - 1.0) * self.k_plus_to_dark.total();
        let lm = self.k_minus_to_plus.total() + (self.n - 1.0) * self.k_minus_to_dark.total();
        for (name, got, want) in [
            ("loss_plus", self.loss_plus, lp),
            ("loss_minus", self.loss_minus, lm),
        ] {
            if (got - want).abs() > tol * want.abs().max(1e-300) {
                return Err(Error::invalid(name, "loss does not match the rate sum"));
            }
        }

        if self.convention != WeightConvention::ScaledResonant {
            let pairs = [
                (
                    "k_plus_to_minus / k_minus_to_plus",
                    self.k_plus_to_minus.total(),
                    self.k_minus_to_plus.total(),
                    self.omega_plus - self.omega_minus,
                ),
                (
                    "k_plus_to_dark / k_dark_to_plus",
                    self.k_plus_to_dark.total(),
                    self.k_dark_to_plus.total(),
                    self.omega_plus - self.omega_dark,
                ),
                (
                    "k_dark_to_minus / k_minus_to_dark",
                    self.k_dark_to_minus.total(),
                    self.k_minus_to_dark.total(),
                    self.omega_dark - self.omega_minus,
                ),
            ];
            for (name, down, up, gap) in pairs {
                if down <= 1e-290 || up <= 1e-290 {
                    continue;
                }
                let ratio = down / up * (-self.beta * gap).exp();
                if (ratio - 1.0).abs() > tol {
                    return Err(Error::invalid(
                        name,
                        format!("detailed balance violated: ratio·e^{{-βΔE}} = {ratio:.3e}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A Lamb shift split into its transition part (energy exchanged with the
/// other levels) and the virtual self-interaction part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambShift {
    pub transition: f64,
    pub virtual_self: f64,
}

impl LambShift {
    pub fn total(&self) -> f64 {
        self.transition + self.virtual_self
    }
}

const ZERO_SHIFT: LambShift = LambShift {
    transition: 0.0,
    virtual_self: 0.0,
};

/// Lamb shifts of the aggregated levels together with their unshifted
/// energies (eV).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambShiftSet {
    pub theory: Theory,
    pub delta: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_dark: f64,
    pub plus: LambShift,
    pub minus: LambShift,
    pub dark: LambShift,
    pub ground: LambShift,
}

impl LambShiftSet {
    pub fn shift(&self, level: Level) -> LambShift {
        match level {
            Level::Plus => self.plus,
            Level::Minus => self.minus,
            Level::Dark => self.dark,
            Level::Ground => self.ground,
        }
    }

    /// Level energy including its Lamb shift.
    pub fn shifted(&self, level: Level) -> f64 {
        let bare = match level {
            Level::Plus => self.omega_plus,
            Level::Minus => self.omega_minus,
            Level::Dark => self.omega_dark,
            Level::Ground => 0.0,
        };
        bare + self.shift(level).total()
    }

    /// Shifted energy gap ω_μ − ω_ν including both Lamb shifts.
    pub fn delta_munu(&self, mu: Level, nu: Level) -> f64 {
        self.shifted(mu) - self.shifted(nu)
    }

    /// Shifted polariton splitting (ω₊ + Λ₊) − (ω₋ + Λ₋).
    pub fn shifted_splitting(&self) -> f64 {
        self.delta_munu(Level::Plus, Level::Minus)
    }
}

/// Secular decay rate and oscillation frequency of one coherence ρ_{μν}.
///
/// `decay` is Re R_{μν} = (K↓_μ + K↓_ν)/2 + K^φ_{μν}; `shift` is the full
/// rotating frequency ω_μ − ω_ν including Lamb shifts, which places the
/// spectroscopic line of the μν coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceRate {
    pub mu: Level,
    pub nu: Level,
    pub decay: RateValue,
    pub shift: f64,
}

/// Builds the ten coherence rates (six off-diagonal pairs and the four
/// diagonals, for which the decay reduces to the population loss).
pub fn coherence_rates(rates: &RateSet, lamb: &LambShiftSet) -> Result<Vec<CoherenceRate>> {
    if rates.theory != lamb.theory {
        return Err(Error::invalid(
            "theory",
            "rate and shift sets come from different assemblies",
        ));
    }
    if (rates.delta - lamb.delta).abs() > 1e-12 * rates.delta.abs().max(1e-30) {
        return Err(Error::invalid(
            "delta",
            "rate and shift sets were assembled at different detunings",
        ));
    }
    use Level::*;
    let pairs = [
        (Plus, Ground),
        (Minus, Ground),
        (Dark, Ground),
        (Plus, Minus),
        (Plus, Dark),
        (Minus, Dark),
        (Plus, Plus),
        (Minus, Minus),
        (Dark, Dark),
        (Ground, Ground),
    ];
    let mut out = Vec::with_capacity(pairs.len());
    for (mu, nu) in pairs {
        let half = match (rates.loss(mu).finite(), rates.loss(nu).finite()) {
            (Some(a), Some(b)) => Some(0.5 * (a + b)),
            _ => None,
        };
        let kphi = if mu == nu {
            RateValue::Finite(0.0)
        } else {
            rates.dephasing(mu, nu)
        };
        let decay = match (half, kphi.finite()) {
            (Some(h), Some(k)) => RateValue::Finite(h + k),
            _ => RateValue::MarkovianDivergent,
        };
        out.push(CoherenceRate {
            mu,
            nu,
            decay,
            shift: lamb.delta_munu(mu, nu),
        });
    }
    Ok(out)
}

/// Precomputed correlation data for the variational-frame assemblies: the
/// derived densities of the frame and the propagator grid that feeds the
/// multi-phonon transforms.
#[derive(Debug, Clone)]
pub struct CorrelationContext {
    pub densities: DerivedDensities,
    pub grid: PropagatorGrid,
    pub beta: f64,
    /// Highest multi-phonon order kept in the truncated series.
    pub max_order: usize,
    pub cfg: QuadratureConfig,
}

impl CorrelationContext {
    /// Builds the context for a converged frame. The solution must come
    /// from the same parameters (and the density from the same bath) or
    /// the assembled rates are meaningless.
    pub fn build(
        sd: &SpectralDensity,
        params: &PhysicalParams,
        sol: &VariationalSolution,
        max_order: usize,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        let beta = params.beta();
        let profile = sol.profile(beta);
        let mut cfg = cfg.clone();
        if cfg.fourier_grid.tau_max.is_none() {
            cfg.fourier_grid.tau_max = Some(crate::quad::default_tau_max(sd.omega_0, beta));
        }
        // Rates never touch the displacement propagator (that one backs the
        // dark-survival observable and is infrared-divergent for p ≤ 2), so
        // the context tabulates only the coupling propagator φ.
        let densities = derived_densities(sd, profile.clone(), beta, &cfg)?;
        let grid = PropagatorGrid::uniform_coupling(sd, &profile, beta, &cfg)?;
        Ok(CorrelationContext {
            densities,
            grid,
            beta,
            max_order,
            cfg,
        })
    }
}

/// Single-phonon rate γ₁(ν) at ν ≠ 0: 2π·J(ν)(1+n_B) on the emission side,
/// 2π·J(|ν|)n_B on the absorption side. The transition channels evaluate it
/// with the bare density: on shell the dressed channels recombine as
/// J_D + 2νJ_V + ν²J_P = J.
fn gamma1_pointwise(sd: &SpectralDensity, beta: f64, nu: f64) -> f64 {
    let w = nu.abs();
    let j = sd.evaluate(w);
    if j == 0.0 {
        return 0.0;
    }
    let n = 1.0 / (beta * w).exp_m1();
    let occ = if nu >= 0.0 { 1.0 + n } else { n };
    2.0 * std::f64::consts::PI * j * occ
}

/// One detuned transition channel at frequency ν with block weights
/// `w = [single, even, odd]`. Returns the rate split (without the 1/4N or
/// 1/2N prefactor) and the matching shift integrand.
fn transition_at(
    ctx: &CorrelationContext,
    omega_r: f64,
    nu: f64,
    w: [f64; 3],
) -> Result<(RateSplit, f64)> {
    let single = w[0] * gamma1_pointwise(ctx.densities.bare(), ctx.beta, nu);
    let mut shift = w[0] * s1v(&ctx.densities, ctx.beta, nu, &ctx.cfg)?;
    let mut multi = 0.0;
    if w[1] != 0.0 {
        let b = gamma_multi_block(&ctx.grid, omega_r, nu, Parity::Even, ctx.max_order, &ctx.cfg)?;
        multi += w[1] * b.rate();
        shift += w[1] * b.shift();
    }
    if w[2] != 0.0 {
        let b = gamma_multi_block(&ctx.grid, omega_r, nu, Parity::Odd, ctx.max_order, &ctx.cfg)?;
        multi += w[2] * b.rate();
        shift += w[2] * b.shift();
    }
    // The block rates are positive semi-definite; clip transform noise.
    Ok((
        RateSplit {
            single,
            multi: multi.max(0.0),
        },
        shift,
    ))
}

/// Pure-dephasing rates for mixing parameter ε. `suppressed` is
/// (1−ε²)·γ^φ_{>1}(0); returned in the order (+−, +G, −G, +d, −d, dG).
fn dephasing_block(eps: f64, n: f64, suppressed: f64, g1s: StaticRate) -> [RateValue; 6] {
    let e2 = eps * eps;
    [
        RateValue::assemble(2.0 * suppressed, e2 / (2.0 * n), g1s),
        RateValue::assemble(0.5 * suppressed, (1.0 + eps) * (1.0 + eps) / (8.0 * n), g1s),
        RateValue::assemble(0.5 * suppressed, (1.0 - eps) * (1.0 - eps) / (8.0 * n), g1s),
        RateValue::assemble(0.5 * suppressed, (1.0 - eps) * (1.0 - eps) / (8.0 * n), g1s),
        RateValue::assemble(0.5 * suppressed, (1.0 + eps) * (1.0 + eps) / (8.0 * n), g1s),
        RateValue::assemble(0.0, 1.0 / (2.0 * n), g1s),
    ]
}

/// Core of the variational assembly at mixing ε and gap θ, with level
/// energies `[ω₊, ω₋, ω_d]`.
fn assemble_detuned(
    params: &PhysicalParams,
    sol: &VariationalSolution,
    ctx: &CorrelationContext,
    epsilon: f64,
    theta: f64,
    delta: f64,
    energies: [f64; 3],
    convention: WeightConvention,
) -> Result<(RateSet, LambShiftSet)> {
    let n = params.n;
    let beta = ctx.beta;
    let omega_r = sol.omega_r;
    let eps = epsilon;
    let e2 = eps * eps;

    let (b_pp, c_pp) = match convention {
        WeightConvention::Canonical => (4.0 * e2, 4.0),
        WeightConvention::HalvedPolaritonBlocks => (2.0 * e2, 2.0),
        WeightConvention::ScaledResonant => {
            return Err(Error::invalid(
                "convention",
                "the scaled-resonant set is assembled by nonres_rates only",
            ))
        }
    };
    let w_pp = [1.0 - e2, b_pp, c_pp];
    let w_pd = [1.0 + eps, 1.0 - eps, 1.0 - eps];
    let w_md = [1.0 - eps, 1.0 + eps, 1.0 + eps];

    // Level gaps: ω₊ − ω_d = (θ−Δ)/2 and ω_d − ω₋ = (θ+Δ)/2.
    let nu_pd = 0.5 * (theta - delta);
    let nu_md = 0.5 * (theta + delta);

    let (r_pm, s_pm) = transition_at(ctx, omega_r, theta, w_pp)?;
    let (r_mp, s_mp) = transition_at(ctx, omega_r, -theta, w_pp)?;
    let (r_pd, s_pd) = transition_at(ctx, omega_r, nu_pd, w_pd)?;
    let (r_dp, s_dp) = transition_at(ctx, omega_r, -nu_pd, w_pd)?;
    let (r_dm, s_dm) = transition_at(ctx, omega_r, nu_md, w_md)?;
    let (r_md, s_md) = transition_at(ctx, omega_r, -nu_md, w_md)?;

    let pref_pp = 1.0 / (4.0 * n);
    let pref_pd = 1.0 / (2.0 * n);

    let k_plus_to_minus = r_pm.scaled(pref_pp);
    let k_minus_to_plus = r_mp.scaled(pref_pp);
    let k_plus_to_dark = r_pd.scaled(pref_pd);
    let k_dark_to_plus = r_dp.scaled(pref_pd);
    let k_dark_to_minus = r_dm.scaled(pref_pd);
    let k_minus_to_dark = r_md.scaled(pref_pd);

    let g1s = gamma1_static(displacement_slope(&ctx.densities), beta);
    let k_dark_to_dark = RateValue::assemble(0.0, 1.0 / n, g1s);

    let phi_hf = gamma_phi_multi(&ctx.grid, params.g, sol.frak_b, &ctx.cfg)?;
    let gamma_phi = phi_hf.rate().max(0.0);
    let s_phi = phi_hf.shift();
    let suppressed = (1.0 - e2) * gamma_phi;
    let [pm, pg, mg, pd, md, dg] = dephasing_block(eps, n, suppressed, g1s);

    let loss_plus = k_plus_to_minus.total() + (n - 1.0) * k_plus_to_dark.total();
    let loss_minus = k_minus_to_plus.total() + (n - 1.0) * k_minus_to_dark.total();
    let loss_dark = RateValue::assemble(
        k_dark_to_plus.total() + k_dark_to_minus.total(),
        (n - 2.0) / n,
        g1s,
    );

    let s10 = s1v(&ctx.densities, beta, 0.0, &ctx.cfg)?;
    let dark_pair_shift = match convention {
        WeightConvention::Canonical => s10,
        WeightConvention::HalvedPolaritonBlocks => {
            -ctx.densities.bare().reorganization_energy(&ctx.cfg)?
        }
        WeightConvention::ScaledResonant => unreachable!(),
    };

    let (vp, vm) = match convention {
        WeightConvention::Canonical => (
            (1.0 + eps) * (1.0 + eps) * s10 / (4.0 * n) + (1.0 - e2) * s_phi,
            (1.0 - eps) * (1.0 - eps) * s10 / (4.0 * n) + (1.0 - e2) * s_phi,
        ),
        WeightConvention::HalvedPolaritonBlocks => (
            ((1.0 + eps) * s10 + (1.0 - e2) * s_phi) / (4.0 * n),
            ((1.0 - eps) * s10 + (1.0 - e2) * s_phi) / (4.0 * n),
        ),
        WeightConvention::ScaledResonant => unreachable!(),
    };

    let lamb = LambShiftSet {
        theory: Theory::Vpme,
        delta,
        omega_plus: energies[0],
        omega_minus: energies[1],
        omega_dark: energies[2],
        plus: LambShift {
            transition: pref_pp * s_pm + (n - 1.0) * pref_pd * s_pd,
            virtual_self: vp,
        },
        minus: LambShift {
            transition: pref_pp * s_mp + (n - 1.0) * pref_pd * s_md,
            virtual_self: vm,
        },
        dark: LambShift {
            transition: pref_pd * (s_dp + s_dm) + (n - 2.0) / n * dark_pair_shift,
            virtual_self: s10 / n,
        },
        ground: ZERO_SHIFT,
    };

    let rates = RateSet {
        theory: Theory::Vpme,
        convention,
        n,
        beta,
        delta,
        epsilon: eps,
        theta,
        omega_r,
        omega_plus: energies[0],
        omega_minus: energies[1],
        omega_dark: energies[2],
        k_plus_to_minus,
        k_minus_to_plus,
        k_plus_to_dark,
        k_minus_to_dark,
        k_dark_to_plus,
        k_dark_to_minus,
        k_dark_to_dark,
        loss_plus,
        loss_minus,
        loss_dark,
        kphi_plus_minus: pm,
        kphi_plus_ground: pg,
        kphi_minus_ground: mg,
        kphi_plus_dark: pd,
        kphi_minus_dark: md,
        kphi_dark_ground: dg,
        kphi_dark_dark: 0.0,
        gamma1_static: g1s,
        gamma_phi_multi: gamma_phi,
    };
    Ok((rates, lamb))
}

/// Weak-coupling rates and Lamb shifts at resonance (ω_c = ω_m).
///
/// All channels are single-phonon with the bare density: transfer rates
/// γ₁(±2Ω)/4N and γ₁(±Ω)/2N, static dephasing weights γ₁(0)·{1/8N, 1/2N},
/// and shifts built from S₁(ν).
pub fn wcme_rates(
    sd: &SpectralDensity,
    params: &PhysicalParams,
    cfg: &QuadratureConfig,
) -> Result<(RateSet, LambShiftSet)> {
    let scale = params.omega_c.abs().max(params.omega_m.abs()).max(1e-30);
    if (params.omega_c - params.omega_m).abs() > 1e-9 * scale {
        return Err(Error::invalid(
            "omega_m",
            "the weak-coupling set is resonant; set ω_m = ω_c or use the detuned assembly",
        ));
    }
    let n = params.n;
    let beta = params.beta();
    let omega = params.omega_collective();
    let cfg = cfg.clone();

    let d = derived_densities(sd, crate::spectral::DisplacementProfile::Zero, beta, &cfg)?;
    let g1s = gamma1_static(bare_slope(sd), beta);

    let gam = |nu: f64| gamma1_pointwise(sd, beta, nu);
    let shift = |nu: f64| s1v(&d, beta, nu, &cfg);

    let split = |v: f64| RateSplit {
        single: v,
        multi: 0.0,
    };
    let k_plus_to_minus = split(gam(2.0 * omega) / (4.0 * n));
    let k_minus_to_plus = split(gam(-2.0 * omega) / (4.0 * n));
    let k_plus_to_dark = split(gam(omega) / (2.0 * n));
    let k_dark_to_minus = split(gam(omega) / (2.0 * n));
    let k_dark_to_plus = split(gam(-omega) / (2.0 * n));
    let k_minus_to_dark = split(gam(-omega) / (2.0 * n));
    let k_dark_to_dark = RateValue::assemble(0.0, 1.0 / n, g1s);

    let [pm, pg, mg, pd, md, dg] = dephasing_block(0.0, n, 0.0, g1s);

    let loss_plus = k_plus_to_minus.total() + (n - 1.0) * k_plus_to_dark.total();
    let loss_minus = k_minus_to_plus.total() + (n - 1.0) * k_minus_to_dark.total();
    let loss_dark = RateValue::assemble(
        k_dark_to_plus.total() + k_dark_to_minus.total(),
        (n - 2.0) / n,
        g1s,
    );

    let s_p2 = shift(2.0 * omega)?;
    let s_m2 = shift(-2.0 * omega)?;
    let s_p1 = shift(omega)?;
    let s_m1 = shift(-omega)?;
    let s_0 = shift(0.0)?;

    let pref_pp = 1.0 / (4.0 * n);
    let pref_pd = 1.0 / (2.0 * n);
    let lamb = LambShiftSet {
        theory: Theory::Wcme,
        delta: 0.0,
        omega_plus: params.omega_c + omega,
        omega_minus: params.omega_c - omega,
        omega_dark: params.omega_c,
        plus: LambShift {
            transition: pref_pp * s_p2 + (n - 1.0) * pref_pd * s_p1,
            virtual_self: pref_pp * s_0,
        },
        minus: LambShift {
            transition: pref_pp * s_m2 + (n - 1.0) * pref_pd * s_m1,
            virtual_self: pref_pp * s_0,
        },
        dark: LambShift {
            transition: pref_pd * (s_p1 + s_m1) + (n - 2.0) / n * s_0,
            virtual_self: s_0 / n,
        },
        ground: ZERO_SHIFT,
    };

    let rates = RateSet {
        theory: Theory::Wcme,
        convention: WeightConvention::Canonical,
        n,
        beta,
        delta: 0.0,
        epsilon: 0.0,
        theta: 2.0 * omega,
        omega_r: omega,
        omega_plus: params.omega_c + omega,
        omega_minus: params.omega_c - omega,
        omega_dark: params.omega_c,
        k_plus_to_minus,
        k_minus_to_plus,
        k_plus_to_dark,
        k_minus_to_dark,
        k_dark_to_plus,
        k_dark_to_minus,
        k_dark_to_dark,
        loss_plus,
        loss_minus,
        loss_dark,
        kphi_plus_minus: pm,
        kphi_plus_ground: pg,
        kphi_minus_ground: mg,
        kphi_plus_dark: pd,
        kphi_minus_dark: md,
        kphi_dark_ground: dg,
        kphi_dark_dark: 0.0,
        gamma1_static: g1s,
        gamma_phi_multi: 0.0,
    };
    Ok((rates, lamb))
}

/// Variational-frame rates and Lamb shifts on resonance.
///
/// Runs the detuned assembly at ε = 0 with gap θ = 2Ω_r and level energies
/// ω_c ± Ω_r, ω_c; any residual detuning carried by the solution is
/// ignored here (use [`nonres_rates`] to keep it).
pub fn vpme_rates(
    params: &PhysicalParams,
    sol: &VariationalSolution,
    ctx: &CorrelationContext,
) -> Result<(RateSet, LambShiftSet)> {
    let wc = params.omega_c;
    let omega_r = sol.omega_r;
    assemble_detuned(
        params,
        sol,
        ctx,
        0.0,
        2.0 * omega_r,
        0.0,
        [wc + omega_r, wc - omega_r, wc],
        WeightConvention::Canonical,
    )
}

/// Resonant variational transition and dephasing rates (the full
/// [`RateSet`] of [`vpme_rates`]).
pub fn vpme_transitions(
    params: &PhysicalParams,
    sol: &VariationalSolution,
    ctx: &CorrelationContext,
) -> Result<RateSet> {
    vpme_rates(params, sol, ctx).map(|(r, _)| r)
}

/// Resonant variational dephasing rates; alias of [`vpme_transitions`],
/// which already carries the K^φ fields.
pub fn vpme_dephasing(
    params: &PhysicalParams,
    sol: &VariationalSolution,
    ctx: &CorrelationContext,
) -> Result<RateSet> {
    vpme_transitions(params, sol, ctx)
}

/// Resonant variational Lamb shifts.
pub fn vpme_lamb(
    params: &PhysicalParams,
    sol: &VariationalSolution,
    ctx: &CorrelationContext,
) -> Result<LambShiftSet> {
    vpme_rates(params, sol, ctx).map(|(_, l)| l)
}

/// Detuned variational rates and Lamb shifts for the eigensystem `eig`
/// under the chosen weight convention.
pub fn nonres_rates(
    params: &PhysicalParams,
    sol: &VariationalSolution,
    ctx: &CorrelationContext,
    eig: &NonResonantEigensystem,
    convention: WeightConvention,
) -> Result<(RateSet, LambShiftSet)> {
    let delta = eig.epsilon * eig.theta;
    match convention {
        WeightConvention::Canonical | WeightConvention::HalvedPolaritonBlocks => assemble_detuned(
            params,
            sol,
            ctx,
            eig.epsilon,
            eig.theta,
            delta,
            [eig.omega_plus, eig.omega_minus, eig.omega_dark],
            convention,
        ),
        WeightConvention::ScaledResonant => {
            let (mut r, mut l) = vpme_rates(params, sol, ctx)?;
            let eps = eig.epsilon;
            let e2 = eps * eps;
            let n = r.n;

            r.convention = WeightConvention::ScaledResonant;
            r.epsilon = eps;
            r.theta = eig.theta;
            r.delta = delta;
            r.k_plus_to_dark = r.k_plus_to_dark.scaled(1.0 + eps);
            r.k_minus_to_dark = r.k_minus_to_dark.scaled(1.0 - eps);
            let suppressed = (1.0 - e2) * r.gamma_phi_multi;
            let [pm, pg, mg, pd, md, dg] = dephasing_block(0.0, n, suppressed, r.gamma1_static);
            r.kphi_plus_minus = pm;
            r.kphi_plus_ground = pg;
            r.kphi_minus_ground = mg;
            r.kphi_plus_dark = pd;
            r.kphi_minus_dark = md;
            r.kphi_dark_ground = dg;
            r.loss_plus = r.k_plus_to_minus.total() + (n - 1.0) * r.k_plus_to_dark.total();
            r.loss_minus = r.k_minus_to_plus.total() + (n - 1.0) * r.k_minus_to_dark.total();
            r.omega_plus = eig.omega_plus;
            r.omega_minus = eig.omega_minus;
            r.omega_dark = eig.omega_dark;

            l.delta = delta;
            l.omega_plus = eig.omega_plus;
            l.omega_minus = eig.omega_minus;
            l.omega_dark = eig.omega_dark;
            Ok((r, l))
        }
    }
}

/// Weak-collective-coupling asymptote of the polariton Lamb shift
/// magnitude, Ω_r·B₂/2 (Ω_r well below the thermal scale Ω_β).
pub fn lamb_weak_asymptote(omega_r: f64, b2: f64) -> f64 {
    0.5 * omega_r * b2
}

/// Strong-collective-coupling asymptote of the polariton Lamb shift
/// magnitude, B₀/(2Ω_r) (Ω_r well above Ω_β).
pub fn lamb_strong_asymptote(omega_r: f64, b0: f64) -> f64 {
    0.5 * b0 / omega_r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ResonanceConvention;
    use crate::variational::solve_self_consistent;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::OnceLock;

    fn params(n: f64, a: f64, p: f64) -> PhysicalParams {
        PhysicalParams::new(
            1e-7,
            n,
            2.0,
            2.0,
            300.0,
            a,
            p,
            0.006,
            ResonanceConvention::Measured,
        )
        .unwrap()
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    struct Vpme {
        params: PhysicalParams,
        sol: VariationalSolution,
        ctx: CorrelationContext,
    }

    fn typical_vpme() -> &'static Vpme {
        static CELL: OnceLock<Vpme> = OnceLock::new();
        CELL.get_or_init(|| {
            let params = params(1e8, 0.083, 3.0);
            let sd = SpectralDensity::from_params(&params);
            let cfg = cfg();
            let sol = solve_self_consistent(&sd, &params, &cfg).unwrap();
            let ctx = CorrelationContext::build(&sd, &params, &sol, 8, &cfg).unwrap();
            Vpme { params, sol, ctx }
        })
    }

    #[test]
    fn weak_coupling_static_dephasing_linear_density() {
        let params = params(100.0, 0.083, 1.0);
        let sd = SpectralDensity::from_params(&params);
        let (r, _) = wcme_rates(&sd, &params, &cfg()).unwrap();
        let beta = params.beta();

        // γ₁(0) = 2πA/β for a linear density, so N·k^φ_{±G} = πA/(4β).
        let expect = std::f64::consts::PI * 0.083 / (4.0 * beta);
        let got = params.n * r.kphi_plus_ground.value().unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-12);
        assert_relative_eq!(got, 1.6853e-3, max_relative = 1e-3);
        assert_eq!(r.kphi_plus_ground, r.kphi_plus_dark);
        assert_eq!(r.kphi_plus_minus, RateValue::Finite(0.0));
        assert_eq!(r.kphi_dark_dark, 0.0);
        let kdd = params.n * r.k_dark_to_dark.value().unwrap();
        assert_relative_eq!(kdd, 8.0 * expect, max_relative = 1e-12);
        r.validate(1e-9).unwrap();
    }

    #[test]
    fn weak_coupling_tri_state_policy() {
        let sup = params(100.0, 0.083, 3.0);
        let sd3 = SpectralDensity::from_params(&sup);
        let (r3, _) = wcme_rates(&sd3, &sup, &cfg()).unwrap();
        assert_eq!(r3.gamma1_static, StaticRate::Zero);
        assert_eq!(r3.kphi_plus_ground, RateValue::Finite(0.0));

        let sub = params(100.0, 0.083, 0.5);
        let sd05 = SpectralDensity::from_params(&sub);
        let (r05, _) = wcme_rates(&sd05, &sub, &cfg()).unwrap();
        assert!(r05.gamma1_static.is_divergent());
        assert!(r05.kphi_plus_ground.is_divergent());
        assert!(r05.loss_dark.is_divergent());
        // Zero-weight channels stay finite even with a divergent γ₁(0).
        assert_eq!(r05.kphi_plus_minus, RateValue::Finite(0.0));
        assert!(r05.k_plus_to_minus.total() > 0.0);
    }

    #[test]
    fn weak_coupling_dark_lamb_approaches_negative_reorganization() {
        let params = params(1e9, 0.083, 3.0);
        let sd = SpectralDensity::from_params(&params);
        let (_, l) = wcme_rates(&sd, &params, &cfg()).unwrap();
        let reorg = sd.reorganization_energy(&cfg()).unwrap();
        assert_relative_eq!(l.dark.total(), -reorg, max_relative = 1e-6);
        assert_relative_eq!(reorg, 0.2207e-3, max_relative = 1e-3);
    }

    #[test]
    fn weak_coupling_detailed_balance_is_exact() {
        let params = params(1000.0, 0.083, 3.0);
        let sd = SpectralDensity::from_params(&params);
        let (r, _) = wcme_rates(&sd, &params, &cfg()).unwrap();
        let beta = params.beta();
        let omega = params.omega_collective();
        let ratio = r.k_plus_to_dark.total() / r.k_dark_to_plus.total();
        assert_relative_eq!(ratio, (beta * omega).exp(), max_relative = 1e-12);
        let ratio2 = r.k_plus_to_minus.total() / r.k_minus_to_plus.total();
        assert_relative_eq!(ratio2, (2.0 * beta * omega).exp(), max_relative = 1e-12);
        r.validate(1e-9).unwrap();
    }

    #[test]
    fn weak_coupling_rejects_detuned_input() {
        let p = PhysicalParams::new(
            1e-7,
            100.0,
            2.0,
            2.1,
            300.0,
            0.083,
            3.0,
            0.006,
            ResonanceConvention::Explicit,
        )
        .unwrap();
        let sd = SpectralDensity::from_params(&p);
        assert!(wcme_rates(&sd, &p, &cfg()).is_err());
    }

    #[test]
    fn variational_resonant_set_is_consistent() {
        let v = typical_vpme();
        let (r, l) = vpme_rates(&v.params, &v.sol, &v.ctx).unwrap();
        r.validate(1e-6).unwrap();

        // Super-linear bath: every static channel drops out and the
        // dephasing hierarchy is carried by γ^φ_{>1}(0) alone.
        assert_eq!(r.gamma1_static, StaticRate::Zero);
        let pm = r.kphi_plus_minus.value().unwrap();
        let pg = r.kphi_plus_ground.value().unwrap();
        assert!(pm > 0.0);
        assert_relative_eq!(pm, 4.0 * pg, max_relative = 1e-12);
        assert_eq!(r.kphi_plus_ground, r.kphi_plus_dark);
        assert_relative_eq!(pm, 2.0 * r.gamma_phi_multi, max_relative = 1e-12);

        // Multi-phonon transfer is present and detailed balance holds on
        // the assembled totals.
        assert!(r.k_plus_to_dark.multi > 0.0);
        let beta = v.params.beta();
        let gap = r.omega_plus - r.omega_dark;
        let ratio = r.k_plus_to_dark.total() / r.k_dark_to_plus.total();
        assert_relative_eq!(ratio, (beta * gap).exp(), max_relative = 1e-6);

        // Coherence rates reproduce the loss/dephasing combination.
        let coh = coherence_rates(&r, &l).unwrap();
        let pg_coh = coh
            .iter()
            .find(|c| c.mu == Level::Plus && c.nu == Level::Ground)
            .unwrap();
        let expect = 0.5 * r.loss_plus + r.kphi_plus_ground.value().unwrap();
        assert_relative_eq!(pg_coh.decay.value().unwrap(), expect, max_relative = 1e-12);
        assert_relative_eq!(pg_coh.shift, l.shifted(Level::Plus), max_relative = 1e-12);
        let gg = coh
            .iter()
            .find(|c| c.mu == Level::Ground && c.nu == Level::Ground)
            .unwrap();
        assert_eq!(gg.decay, RateValue::Finite(0.0));
        let dd = coh
            .iter()
            .find(|c| c.mu == Level::Dark && c.nu == Level::Dark)
            .unwrap();
        assert_eq!(dd.decay.value().unwrap(), r.loss_dark.value().unwrap());
    }

    #[test]
    fn variational_reduces_to_weak_coupling_for_faint_bath() {
        let base = params(1e8, 1e-4, 3.0);
        let p = PhysicalParams::new(
            base.g,
            base.n,
            2.0,
            2.0,
            base.t,
            base.a,
            base.p,
            base.omega_0,
            ResonanceConvention::Explicit,
        )
        .unwrap();
        let sd = SpectralDensity::from_params(&p);
        let cfg = cfg();
        let sol = solve_self_consistent(&sd, &p, &cfg).unwrap();
        let ctx = CorrelationContext::build(&sd, &p, &sol, 8, &cfg).unwrap();
        let eig = crate::eigensystem::nonres_eigensystem(&p, &sol);
        let (rv, lv) = nonres_rates(&p, &sol, &ctx, &eig, WeightConvention::Canonical).unwrap();
        let (rw, lw) = wcme_rates(&sd, &p, &cfg).unwrap();

        for (a, b) in [
            (rv.k_plus_to_dark.total(), rw.k_plus_to_dark.total()),
            (rv.k_dark_to_plus.total(), rw.k_dark_to_plus.total()),
            (rv.k_plus_to_minus.total(), rw.k_plus_to_minus.total()),
            (rv.k_minus_to_plus.total(), rw.k_minus_to_plus.total()),
        ] {
            assert_relative_eq!(a, b, max_relative = 1e-2);
        }
        // The frame moves reorganization energy from the Lamb shift into
        // the level energy; the observable dressed line agrees to O(λ/N).
        assert_abs_diff_eq!(
            lv.shifted(Level::Dark),
            lw.shifted(Level::Dark),
            epsilon = 1e-12
        );
    }

    #[test]
    fn detuned_assembly_reduces_and_scales() {
        let v = typical_vpme();
        let (r0, l0) = vpme_rates(&v.params, &v.sol, &v.ctx).unwrap();

        // Forced-resonant solution: the detuned path at Δ = 0 must agree
        // with the resonant one to rounding.
        let mut sol_res = v.sol.clone();
        sol_res.delta = 0.0;
        sol_res.theta = 2.0 * sol_res.omega_r;
        let eig0 = crate::eigensystem::nonres_eigensystem(&v.params, &sol_res);
        let (re, le) =
            nonres_rates(&v.params, &sol_res, &v.ctx, &eig0, WeightConvention::Canonical).unwrap();
        assert_relative_eq!(
            re.k_plus_to_minus.total(),
            r0.k_plus_to_minus.total(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            re.k_plus_to_dark.total(),
            r0.k_plus_to_dark.total(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            re.kphi_plus_minus.value().unwrap(),
            r0.kphi_plus_minus.value().unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            le.plus.total(),
            l0.plus.total(),
            max_relative = 1e-9,
            epsilon = 1e-18
        );

        // Detuned: multi-phonon dephasing suppressed by exactly (1−ε²).
        let mut sol_det = v.sol.clone();
        sol_det.delta = sol_det.omega_r;
        sol_det.theta = (sol_det.delta.powi(2) + 4.0 * sol_det.omega_r.powi(2)).sqrt();
        let eig = crate::eigensystem::nonres_eigensystem(&v.params, &sol_det);
        let eps = eig.epsilon;
        assert!(eps > 0.1);

        let (rc, _) =
            nonres_rates(&v.params, &sol_det, &v.ctx, &eig, WeightConvention::Canonical).unwrap();
        rc.validate(1e-6).unwrap();
        let supp = rc.kphi_plus_minus.value().unwrap() / r0.kphi_plus_minus.value().unwrap();
        assert_relative_eq!(supp, 1.0 - eps * eps, max_relative = 1e-12);

        // The halved convention differs by exactly a factor 2 on the
        // inter-polariton multi-phonon block.
        let (rh, _) = nonres_rates(
            &v.params,
            &sol_det,
            &v.ctx,
            &eig,
            WeightConvention::HalvedPolaritonBlocks,
        )
        .unwrap();
        assert_relative_eq!(
            rh.k_plus_to_minus.multi,
            0.5 * rc.k_plus_to_minus.multi,
            max_relative = 1e-12
        );
        assert_eq!(rh.k_plus_to_dark, rc.k_plus_to_dark);

        // The scaled-resonant convention multiplies the resonant transfer
        // by (1±ε) and keeps resonant Lamb values at detuned energies.
        let (rs, ls) = nonres_rates(
            &v.params,
            &sol_det,
            &v.ctx,
            &eig,
            WeightConvention::ScaledResonant,
        )
        .unwrap();
        assert_relative_eq!(
            rs.k_plus_to_dark.total(),
            (1.0 + eps) * r0.k_plus_to_dark.total(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            rs.k_minus_to_dark.total(),
            (1.0 - eps) * r0.k_minus_to_dark.total(),
            max_relative = 1e-12
        );
        assert_eq!(rs.k_dark_to_plus, r0.k_dark_to_plus);
        assert_eq!(ls.plus, l0.plus);
        assert_eq!(ls.omega_plus, eig.omega_plus);
        rs.validate(1e-6).unwrap();
    }
}
