//! Bath correlation functions of the polaron frame.
//!
//! Provides phonon propagators φ(τ) and φ_D(τ) on a uniform time grid, the
//! single-phonon transform Γ₁(ν) = γ₁(ν)/2 + iS₁(ν) with its M± generalization,
//! the frame-dressed shift S₁ᵛ(ν), half-line transforms Φ_m(ν) of propagator
//! powers with their truncated multi-phonon sums, the static multi-phonon
//! dephasing integral, and non-Markovian dephasing kernels.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{
    cosine_sine_transform, half_line_fourier, integrate, integrate_semi_infinite,
    principal_value, HalfFourier, QuadratureConfig,
};
use crate::spectral::{derived_densities, DerivedDensities, DisplacementProfile, SpectralDensity};

/// Default truncation order for multi-phonon series.
pub const DEFAULT_MULTIPHONON_ORDER: usize = 6;
/// A truncated series is accepted when its last term is below this fraction
/// of the partial sum.
const TRUNCATION_GUARD: f64 = 0.01;

/// Classification of lim_{ω→0} F(ω)/ω for a density-like function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroFreqLimit {
    /// The ratio vanishes (super-linear density).
    Zero,
    /// The ratio tends to the enclosed finite value (linear density).
    Finite(f64),
    /// The ratio diverges (sub-linear density).
    Divergent,
}

/// A static (ν = 0) rate that may be zero, finite, or divergent in the
/// Markovian limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StaticRate {
    Zero,
    Finite(f64),
    Divergent,
}

impl StaticRate {
    /// Numeric value, treating `Zero` as 0 and failing on `Divergent`.
    pub fn value(&self) -> Result<f64> {
        match self {
            StaticRate::Zero => Ok(0.0),
            StaticRate::Finite(v) => Ok(*v),
            StaticRate::Divergent => Err(Error::DivergentRate(
                "static rate diverges in the Markovian limit".into(),
            )),
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, StaticRate::Divergent)
    }
}

/// lim J(ω)/ω of the bare density.
pub fn bare_slope(sd: &SpectralDensity) -> ZeroFreqLimit {
    if sd.is_tabulated() {
        return probe_slope(|om| sd.evaluate(om), sd.omega_0);
    }
    if sd.a == 0.0 || sd.p > 1.0 {
        ZeroFreqLimit::Zero
    } else if sd.p == 1.0 {
        ZeroFreqLimit::Finite(sd.a)
    } else {
        ZeroFreqLimit::Divergent
    }
}

/// lim J_D(ω)/ω of the displacement-weighted density J(1−G)².
pub fn displacement_slope(d: &DerivedDensities) -> ZeroFreqLimit {
    match d.profile() {
        // G(0) = 1 kills the weight entirely at the origin but the density
        // is identically zero only in the exact full-frame limit.
        DisplacementProfile::Full => ZeroFreqLimit::Zero,
        // For Ḡ > 0 the weight tends to one at the origin.
        DisplacementProfile::Variational { gbar, .. } if *gbar > 0.0 => bare_slope(d.bare()),
        DisplacementProfile::Variational { .. } => ZeroFreqLimit::Zero,
        DisplacementProfile::Zero => bare_slope(d.bare()),
    }
}

/// lim ω²J_P(ω)/ω = lim J(ω)G(ω)²/ω.
pub fn coupling_omega2_slope(d: &DerivedDensities) -> ZeroFreqLimit {
    match d.profile() {
        DisplacementProfile::Full => bare_slope(d.bare()),
        DisplacementProfile::Variational { gbar, .. } if *gbar > 0.0 => ZeroFreqLimit::Zero,
        DisplacementProfile::Variational { .. } => bare_slope(d.bare()),
        DisplacementProfile::Zero => ZeroFreqLimit::Zero,
    }
}

/// lim J_V(ω)/ω; vanishes for every admissible frame because the weight
/// (1−G)G/ω adds at least one power of ω to a convergent density.
pub fn interference_slope(_d: &DerivedDensities) -> ZeroFreqLimit {
    ZeroFreqLimit::Zero
}

/// Numeric slope probe for tabulated densities: Richardson-style comparison
/// of F(x)/x at three scales near the lower edge of the support.
fn probe_slope<F: Fn(f64) -> f64>(f: F, scale: f64) -> ZeroFreqLimit {
    let xs = [1e-4 * scale, 1e-3 * scale, 1e-2 * scale];
    let r: Vec<f64> = xs.iter().map(|&x| f(x) / x).collect();
    if r[0].abs() < 1e-3 * r[2].abs().max(f64::MIN_POSITIVE) {
        ZeroFreqLimit::Zero
    } else if r[0].abs() > 1e3 * r[2].abs().max(f64::MIN_POSITIVE) {
        ZeroFreqLimit::Divergent
    } else {
        ZeroFreqLimit::Finite(r[0])
    }
}

/// Static single-phonon rate γ₁(0) = (2π/β)·lim J_eff(ω)/ω.
pub fn gamma1_static(slope: ZeroFreqLimit, beta: f64) -> StaticRate {
    match slope {
        ZeroFreqLimit::Zero => StaticRate::Zero,
        ZeroFreqLimit::Finite(l) => StaticRate::Finite(2.0 * std::f64::consts::PI * l / beta),
        ZeroFreqLimit::Divergent => StaticRate::Divergent,
    }
}

/// Bose factors (n_B, ñ_B) at ω > 0.
fn occupations(beta: f64, omega: f64) -> (f64, f64) {
    let n = 1.0 / (beta * omega).exp_m1();
    (n, 1.0 + n)
}

/// Which sign the emission branch of an M± functional carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Generalized single-phonon functional M±[F](ν).
///
/// Re M± = π·(±F(ν)ñ_B(ν)) for ν ≥ 0 and π·F(−ν)n_B(−ν) for ν < 0; at ν = 0
/// the emission branch limit (π/β)·lim F/ω applies, so a linear F gives a
/// finite value, a super-linear F gives zero, and a sub-linear F is rejected
/// as divergent. Im M± = P∫dω F(ω)[±ñ_B(ω)/(ν−ω) + n_B(ω)/(ν+ω)].
pub fn m_functional<F: Fn(f64) -> f64>(
    f: F,
    slope: ZeroFreqLimit,
    breakpoints: &[f64],
    beta: f64,
    nu: f64,
    sign: Sign,
    cfg: &QuadratureConfig,
) -> Result<HalfFourier> {
    let s = sign.factor();
    let re = if nu > 0.0 {
        let (_, nt) = occupations(beta, nu);
        s * std::f64::consts::PI * f(nu) * nt
    } else if nu < 0.0 {
        let (n, _) = occupations(beta, -nu);
        std::f64::consts::PI * f(-nu) * n
    } else {
        match gamma1_static(slope, beta) {
            StaticRate::Zero => 0.0,
            StaticRate::Finite(g0) => s * 0.5 * g0,
            StaticRate::Divergent => {
                return Err(Error::DivergentRate(
                    "single-phonon rate at ν = 0 diverges for a sub-linear density".into(),
                ))
            }
        }
    };

    let mut pts: Vec<f64> = breakpoints.to_vec();
    pts.extend_from_slice(&[1.0 / beta, 2.0 * nu.abs()]);
    let im = if nu == 0.0 {
        // Both denominators collapse to ∓ω: Im = ∫ (F/ω)(n − (±)ñ).
        integrate_semi_infinite(
            |om| {
                let fv = f(om);
                if fv == 0.0 {
                    return 0.0;
                }
                let (n, nt) = occupations(beta, om);
                fv * (n - s * nt) / om
            },
            &pts,
            cfg,
        )?
    } else if nu > 0.0 {
        let pv = principal_value(
            |om| {
                let fv = f(om);
                if fv == 0.0 {
                    return 0.0;
                }
                s * fv * occupations(beta, om).1
            },
            nu,
            &pts,
            cfg,
        )?;
        let reg = integrate_semi_infinite(
            |om| {
                let fv = f(om);
                if fv == 0.0 {
                    return 0.0;
                }
                fv * occupations(beta, om).0 / (nu + om)
            },
            &pts,
            cfg,
        )?;
        pv + reg
    } else {
        let reg = integrate_semi_infinite(
            |om| {
                let fv = f(om);
                if fv == 0.0 {
                    return 0.0;
                }
                -s * fv * occupations(beta, om).1 / (om - nu)
            },
            &pts,
            cfg,
        )?;
        let pv = principal_value(
            |om| {
                let fv = f(om);
                if fv == 0.0 {
                    return 0.0;
                }
                -fv * occupations(beta, om).0
            },
            -nu,
            &pts,
            cfg,
        )?;
        reg + pv
    };

    Ok(HalfFourier {
        nu,
        value: Complex64::new(re, im),
        delta_spike: Complex64::new(0.0, 0.0),
    })
}

/// Single-phonon transform Γ₁(ν) = γ₁(ν)/2 + iS₁(ν) = M₊[F](ν).
pub fn gamma1_s1<F: Fn(f64) -> f64>(
    f: F,
    slope: ZeroFreqLimit,
    breakpoints: &[f64],
    beta: f64,
    nu: f64,
    cfg: &QuadratureConfig,
) -> Result<HalfFourier> {
    m_functional(f, slope, breakpoints, beta, nu, Sign::Plus, cfg)
}

/// Frame-dressed single-phonon shift
/// S₁ᵛ(ν) = P∫dω J(ω)[ñ_B 𝒢(ν,ω)/(ν−ω) + n_B 𝒢(−ν,ω)/(ν+ω)]
/// with 𝒢(ν,ω) = (1 + [ν/ω − 1]G(ω))².
pub fn s1v(d: &DerivedDensities, beta: f64, nu: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let prof = d.profile();
    let weight = |nu_arg: f64, om: f64| -> f64 {
        let g = prof.eval(om);
        let w = 1.0 + (nu_arg / om - 1.0) * g;
        w * w
    };
    let mut pts = d.breakpoints();
    pts.extend_from_slice(&[1.0 / beta, 2.0 * nu.abs()]);

    if nu == 0.0 {
        // 𝒢(0,ω) = (1−G)² in both terms; n − ñ = −1.
        return integrate_semi_infinite(
            |om| {
                let j = d.bare().evaluate(om);
                if j == 0.0 {
                    return 0.0;
                }
                let g = prof.eval(om);
                let r = 1.0 - g;
                -j * r * r / om
            },
            &pts,
            cfg,
        );
    }

    let (emission, absorption) = if nu > 0.0 {
        let pv = principal_value(
            |om| {
                let j = d.bare().evaluate(om);
                if j == 0.0 {
                    return 0.0;
                }
                j * occupations(beta, om).1 * weight(nu, om)
            },
            nu,
            &pts,
            cfg,
        )?;
        let reg = integrate_semi_infinite(
            |om| {
                let j = d.bare().evaluate(om);
                if j == 0.0 {
                    return 0.0;
                }
                j * occupations(beta, om).0 * weight(-nu, om) / (nu + om)
            },
            &pts,
            cfg,
        )?;
        (pv, reg)
    } else {
        let reg = integrate_semi_infinite(
            |om| {
                let j = d.bare().evaluate(om);
                if j == 0.0 {
                    return 0.0;
                }
                -j * occupations(beta, om).1 * weight(nu, om) / (om - nu)
            },
            &pts,
            cfg,
        )?;
        let pv = principal_value(
            |om| {
                let j = d.bare().evaluate(om);
                if j == 0.0 {
                    return 0.0;
                }
                -j * occupations(beta, om).0 * weight(-nu, om)
            },
            -nu,
            &pts,
            cfg,
        )?;
        (reg, pv)
    };
    Ok(emission + absorption)
}

/// Phonon propagators sampled on a uniform τ grid.
///
/// φ uses the coupling weight J_P = J·G²/ω², φ_D the displacement weight
/// J_D/ω² = J(1−G)²/ω²; both read
/// φ(τ) = ∫dω W(ω)[n_B e^{iωτ} + ñ_B e^{−iωτ}].
#[derive(Debug, Clone)]
pub struct PropagatorGrid {
    pub tau: Vec<f64>,
    pub phi: Vec<Complex64>,
    pub phi_d: Vec<Complex64>,
    /// Asymptotic constant of φ estimated from the end of the window.
    pub phi_infinity: Complex64,
}

impl PropagatorGrid {
    /// Builds both propagators on the given uniform grid starting at τ = 0.
    ///
    /// φ_D is infrared-divergent whenever J_D/ω²·coth(βω/2) is not
    /// integrable at the origin (p ≤ 2 in any partially displaced frame);
    /// use [`PropagatorGrid::coupling_only`] there, since no rate needs φ_D.
    pub fn build(
        sd: &SpectralDensity,
        profile: &DisplacementProfile,
        beta: f64,
        tau: Vec<f64>,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        Self::build_inner(sd, profile, beta, tau, cfg, true)
    }

    /// Builds only the coupling propagator φ; `phi_d` is left empty and
    /// [`PropagatorGrid::re_phi_d_at`] must not be called on the result.
    pub fn coupling_only(
        sd: &SpectralDensity,
        profile: &DisplacementProfile,
        beta: f64,
        tau: Vec<f64>,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        Self::build_inner(sd, profile, beta, tau, cfg, false)
    }

    fn build_inner(
        sd: &SpectralDensity,
        profile: &DisplacementProfile,
        beta: f64,
        tau: Vec<f64>,
        cfg: &QuadratureConfig,
        with_displacement: bool,
    ) -> Result<Self> {
        if tau.len() < 2 || tau[0] != 0.0 {
            return Err(Error::invalid("tau_grid", "need a grid starting at τ = 0"));
        }
        let h = tau[1] - tau[0];
        if !(h > 0.0)
            || tau
                .windows(2)
                .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
        {
            return Err(Error::invalid("tau_grid", "grid must be uniform and increasing"));
        }

        let d = derived_densities(sd, profile.clone(), beta, cfg)?;
        let mut pts = d.breakpoints();
        pts.push(1.0 / beta);

        let phi = propagator_samples(|om| d.j_p(om), &pts, beta, &tau, cfg)?;
        let phi_d = if with_displacement {
            propagator_samples(
                |om| {
                    let jd = d.j_d(om);
                    if jd == 0.0 {
                        0.0
                    } else {
                        jd / (om * om)
                    }
                },
                &pts,
                beta,
                &tau,
                cfg,
            )?
        } else {
            Vec::new()
        };

        let tail = tau.len() / 20;
        let phi_infinity = if tail > 0 {
            phi[tau.len() - tail..].iter().sum::<Complex64>() / tail as f64
        } else {
            Complex64::new(0.0, 0.0)
        };

        Ok(PropagatorGrid {
            tau,
            phi,
            phi_d,
            phi_infinity,
        })
    }

    /// Builds on the uniform grid described by `cfg.fourier_grid`.
    pub fn uniform(
        sd: &SpectralDensity,
        profile: &DisplacementProfile,
        beta: f64,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        Self::build(sd, profile, beta, Self::uniform_tau(sd, beta, cfg), cfg)
    }

    /// Coupling-propagator variant of [`PropagatorGrid::uniform`].
    pub fn uniform_coupling(
        sd: &SpectralDensity,
        profile: &DisplacementProfile,
        beta: f64,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        Self::coupling_only(sd, profile, beta, Self::uniform_tau(sd, beta, cfg), cfg)
    }

    fn uniform_tau(sd: &SpectralDensity, beta: f64, cfg: &QuadratureConfig) -> Vec<f64> {
        let tau_max = cfg
            .fourier_grid
            .tau_max
            .unwrap_or_else(|| crate::quad::default_tau_max(sd.omega_0, beta));
        let n = cfg.fourier_grid.samples;
        let h = tau_max / (n - 1) as f64;
        (0..n).map(|k| k as f64 * h).collect()
    }

    pub fn spacing(&self) -> f64 {
        self.tau[1] - self.tau[0]
    }

    /// φ(0), real by construction.
    pub fn phi_zero(&self) -> f64 {
        self.phi[0].re
    }

    /// Re φ_D at time t, linearly interpolated; the last sample extends
    /// beyond the window. Panics on a grid built coupling-only.
    pub fn re_phi_d_at(&self, t: f64) -> f64 {
        assert!(
            !self.phi_d.is_empty(),
            "displacement propagator was not tabulated; build the grid without coupling_only"
        );
        let h = self.spacing();
        let x = t / h;
        let k = x.floor() as usize;
        if k + 1 >= self.tau.len() {
            return self.phi_d[self.tau.len() - 1].re;
        }
        let w = x - k as f64;
        (1.0 - w) * self.phi_d[k].re + w * self.phi_d[k + 1].re
    }
}

/// Builds a [`PropagatorGrid`]; named accessor for the coupling propagator φ.
pub fn phi(
    sd: &SpectralDensity,
    profile: &DisplacementProfile,
    beta: f64,
    tau: Vec<f64>,
    cfg: &QuadratureConfig,
) -> Result<PropagatorGrid> {
    PropagatorGrid::build(sd, profile, beta, tau, cfg)
}

/// Builds a [`PropagatorGrid`]; named accessor for the displacement
/// propagator φ_D.
pub fn phi_displacement(
    sd: &SpectralDensity,
    profile: &DisplacementProfile,
    beta: f64,
    tau: Vec<f64>,
    cfg: &QuadratureConfig,
) -> Result<PropagatorGrid> {
    PropagatorGrid::build(sd, profile, beta, tau, cfg)
}

/// Samples a propagator on the τ grid with the shared panel transform: the
/// weight rides with coth(βω/2) on the cosine part and alone on the sine
/// part. The panel rule integrates the oscillation analytically, so late-τ
/// samples that cancel to a sliver of φ(0) still come out clean.
fn propagator_samples<W: Fn(f64) -> f64>(
    weight: W,
    breakpoints: &[f64],
    beta: f64,
    tau: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<Complex64>> {
    cosine_sine_transform(
        |om| {
            let w = weight(om);
            if w == 0.0 {
                0.0
            } else {
                w / (0.5 * beta * om).tanh()
            }
        },
        &weight,
        breakpoints,
        tau,
        cfg,
    )
}

/// Transforms Φ_m(ν) = ∫₀^∞ e^{iντ} φ(τ)^m dτ for each requested power.
pub fn phi_power_fourier(
    grid: &PropagatorGrid,
    m_list: &[usize],
    nu_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<Vec<HalfFourier>>> {
    let n = cfg.fourier_grid.samples;
    if grid.tau.len() != n {
        return Err(Error::Quadrature(format!(
            "propagator grid has {} samples but the transform expects {n}",
            grid.tau.len()
        )));
    }
    let h = grid.spacing();
    let mut out = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let f = |t: f64| -> Complex64 {
            let k = (t / h).round() as usize;
            grid.phi[k].powi(m as i32)
        };
        out.push(half_line_fourier(f, nu_grid, cfg)?);
    }
    Ok(out)
}

/// Frequency groups of the multi-phonon rate function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransitionClass {
    /// ν = ±Ω_r transitions: all phonon orders m ≥ 2 contribute.
    PolaritonDark,
    /// ν = ±2Ω_r transitions: only odd orders m ≥ 3 contribute.
    PolaritonPolariton,
}

/// Parity blocks of the generalized multi-phonon rate function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Parity {
    Even,
    Odd,
}

fn truncated_sum(
    grid: &PropagatorGrid,
    orders: &[usize],
    nu: f64,
    cfg: &QuadratureConfig,
) -> Result<(Complex64, Complex64)> {
    let per_m = phi_power_fourier(grid, orders, &[nu], cfg)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut spike = Complex64::new(0.0, 0.0);
    let mut last = Complex64::new(0.0, 0.0);
    for (&m, res) in orders.iter().zip(&per_m) {
        let mut fact = 1.0;
        for k in 2..=m {
            fact *= k as f64;
        }
        last = res[0].value / fact;
        sum += last;
        spike += res[0].delta_spike / fact;
    }
    if last.norm() > TRUNCATION_GUARD * sum.norm() && last.norm() > 0.0 {
        let order = *orders.last().unwrap();
        return Err(Error::TruncationNotConverged {
            order,
            last_term_ratio: last.norm() / sum.norm(),
        });
    }
    Ok((sum, spike))
}

/// Multi-phonon rate function Γ_{>1}(ν) = ν² Σ_{m∈{m(ν)}} Φ_m(ν)/m!, with the
/// order set chosen by the transition class.
pub fn gamma_multi(
    grid: &PropagatorGrid,
    nu: f64,
    class: TransitionClass,
    max_order: usize,
    cfg: &QuadratureConfig,
) -> Result<HalfFourier> {
    let orders: Vec<usize> = match class {
        TransitionClass::PolaritonDark => (2..=max_order).collect(),
        TransitionClass::PolaritonPolariton => (3..=max_order).step_by(2).collect(),
    };
    if orders.is_empty() {
        return Err(Error::invalid("max_order", format!("no orders ≤ {max_order}")));
    }
    let (sum, spike) = truncated_sum(grid, &orders, nu, cfg)?;
    Ok(HalfFourier {
        nu,
        value: nu * nu * sum,
        delta_spike: nu * nu * spike,
    })
}

/// Parity block Γ^{even/odd}_{>1}(ν) = Ω_r² Σ_{m∈parity} Φ_m(ν)/m!, the
/// normalization used by the generalized rate assembly.
pub fn gamma_multi_block(
    grid: &PropagatorGrid,
    omega_r: f64,
    nu: f64,
    parity: Parity,
    max_order: usize,
    cfg: &QuadratureConfig,
) -> Result<HalfFourier> {
    let orders: Vec<usize> = match parity {
        Parity::Even => (2..=max_order).step_by(2).collect(),
        Parity::Odd => (3..=max_order).step_by(2).collect(),
    };
    if orders.is_empty() {
        return Err(Error::invalid("max_order", format!("no orders ≤ {max_order}")));
    }
    let (sum, spike) = truncated_sum(grid, &orders, nu, cfg)?;
    let w = omega_r * omega_r;
    Ok(HalfFourier {
        nu,
        value: w * sum,
        delta_spike: w * spike,
    })
}

/// Static multi-phonon dephasing transform
/// Γ^φ_{>1}(0) = g²𝔅² ∫₀^∞ dτ (cosh φ(τ) − 1).
pub fn gamma_phi_multi(
    grid: &PropagatorGrid,
    g: f64,
    frak_b: f64,
    cfg: &QuadratureConfig,
) -> Result<HalfFourier> {
    let n = cfg.fourier_grid.samples;
    if grid.tau.len() != n {
        return Err(Error::Quadrature(format!(
            "propagator grid has {} samples but the transform expects {n}",
            grid.tau.len()
        )));
    }
    let h = grid.spacing();
    let f = |t: f64| -> Complex64 {
        let k = (t / h).round() as usize;
        grid.phi[k].cosh() - 1.0
    };
    let res = half_line_fourier(f, &[0.0], cfg)?;
    let w = g * g * frak_b * frak_b;
    Ok(HalfFourier {
        nu: 0.0,
        value: w * res[0].value,
        delta_spike: w * res[0].delta_spike,
    })
}

/// Leading (two-phonon) term of the static multi-phonon dephasing rate,
/// γ^φ_{>1}(0) ≈ 2π g²𝔅² ∫dω J_P(ω)² n_B(ω) ñ_B(ω).
pub fn gamma_phi_multi_leading(
    d: &DerivedDensities,
    g: f64,
    frak_b: f64,
    beta: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let mut pts = d.breakpoints();
    pts.push(1.0 / beta);
    let int = integrate_semi_infinite(
        |om| {
            let jp = d.j_p(om);
            if jp == 0.0 {
                return 0.0;
            }
            let (n, nt) = occupations(beta, om);
            jp * jp * n * nt
        },
        &pts,
        cfg,
    )?;
    Ok(2.0 * std::f64::consts::PI * g * g * frak_b * frak_b * int)
}

/// Direct convolution oracle for the two-phonon spectral weight:
/// Re Φ₂(ν)/π as a sum of the emission–emission, emission–absorption, and
/// absorption-assisted integrals over J_P.
pub fn two_phonon_direct(
    d: &DerivedDensities,
    beta: f64,
    nu: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::invalid("nu", format!("need ν > 0, got {nu}")));
    }
    let mut pts = d.breakpoints();
    pts.push(1.0 / beta);

    // Two phonons emitted sharing ν.
    let i1 = integrate(
        |om| {
            let j1 = d.j_p(om);
            if j1 == 0.0 {
                return 0.0;
            }
            let j2 = d.j_p(nu - om);
            if j2 == 0.0 {
                return 0.0;
            }
            j1 * j2 * occupations(beta, om).1 * occupations(beta, nu - om).1
        },
        0.0,
        nu,
        cfg,
    )?;
    // Emission of ω with re-absorption at ω − ν.
    let i2 = integrate_semi_infinite(
        |t| {
            let om = t + nu;
            let j1 = d.j_p(om);
            if j1 == 0.0 {
                return 0.0;
            }
            let j2 = d.j_p(t);
            if j2 == 0.0 {
                return 0.0;
            }
            j1 * j2 * occupations(beta, om).1 * occupations(beta, t).0
        },
        &pts,
        cfg,
    )?;
    // Thermal absorption of ω assisting emission at ν + ω.
    let i3 = integrate_semi_infinite(
        |om| {
            let j1 = d.j_p(om);
            if j1 == 0.0 {
                return 0.0;
            }
            let j2 = d.j_p(nu + om);
            if j2 == 0.0 {
                return 0.0;
            }
            j1 * j2 * occupations(beta, om).0 * occupations(beta, nu + om).1
        },
        &pts,
        cfg,
    )?;
    Ok(i1 + i2 + i3)
}

/// Time-resolved static dephasing rate
/// γ₁(0,τ) = 2∫dω J(ω)(1−G(ω))² coth(βω/2) sin(ωτ)/ω.
pub fn gamma1_nonmarkov(
    d: &DerivedDensities,
    beta: f64,
    tau: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if tau == 0.0 {
        return Ok(0.0);
    }
    let mut pts = d.breakpoints();
    pts.push(1.0 / beta);
    let v = integrate_semi_infinite(
        |om| {
            let jd = d.j_d(om);
            if jd == 0.0 {
                return 0.0;
            }
            jd / (0.5 * beta * om).tanh() * (om * tau).sin() / om
        },
        &pts,
        cfg,
    )?;
    Ok(2.0 * v)
}

/// Coherence suppression factor D_{a,N}(t) = exp(−Γ_d(t)/(aN)) with the
/// decoherence function Γ_d(t) = Re[φ_D(0) − φ_D(t)] ≥ 0. The companion
/// identity ∫₀^t dτ γ₁(0,τ) = 2Γ_d(t) connects it to the time-resolved rate.
pub fn decoherence_factor(a: f64, n: f64, t: f64, grid: &PropagatorGrid) -> f64 {
    let gamma_d = (grid.phi_d[0].re - grid.re_phi_d_at(t)).max(0.0);
    (-gamma_d / (a * n)).exp().min(1.0)
}
