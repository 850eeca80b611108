//! Self-consistent optimization of the variational polaron frame.
//!
//! The frame is parametrized by a single scalar Ḡ through
//! G(ω) = ω/(ω + Ḡ·coth(βω/2)). Solving the stationarity condition of the
//! free-energy upper bound gives Ḡ and with it the coupling renormalization
//! 𝔅, the frame shift λᵛ, and the detuning Δ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{PhysicalParams, ResonanceConvention};
use crate::quad::{integrate_semi_infinite, QuadratureConfig};
use crate::spectral::{DisplacementProfile, SpectralDensity};

/// Relative fixed-point residual required for convergence.
const RESIDUAL_TOL: f64 = 1e-8;
/// Floor used in the relative-residual denominator (eV).
const GBAR_FLOOR: f64 = 1e-30;
/// Points in the log-spaced root-enumeration scan.
const SCAN_POINTS: usize = 64;
/// Iteration budget per bracket.
const MAX_ITERATIONS: usize = 200;

/// Converged output of the variational optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationalSolution {
    /// Frame parameter Ḡ (eV).
    pub gbar: f64,
    /// Coherent coupling renormalization 𝔅 ∈ (0, 1].
    pub frak_b: f64,
    /// Detuning Δ = ω_m − λᵛ − ω_c under the active convention (eV).
    pub delta: f64,
    /// Frame shift λᵛ = ∫dω (J/ω)G(2−G) of the molecular energy (eV).
    pub lambda_v: f64,
    /// Renormalized collective coupling Ω_r = g𝔅√N (eV).
    pub omega_r: f64,
    /// Polariton splitting θ = √(Δ² + 4Ω_r²) (eV).
    pub theta: f64,
    /// Total update evaluations spent across scan and refinement.
    pub iterations: usize,
    /// Final relative fixed-point residual.
    pub residual: f64,
    /// Free-energy bound at the solution, shifted by Ḡ-independent
    /// constants (eV).
    pub f_fbp: f64,
}

impl VariationalSolution {
    /// The displacement profile of this frame.
    pub fn profile(&self, beta: f64) -> DisplacementProfile {
        DisplacementProfile::Variational {
            gbar: self.gbar,
            beta,
        }
    }
}

/// G(ω) = ω/(ω + Ḡ·coth(βω/2)).
pub fn g_of_omega(gbar: f64, beta: f64, omega: f64) -> f64 {
    DisplacementProfile::Variational { gbar, beta }.eval(omega)
}

fn frame_breakpoints(sd: &SpectralDensity, gbar: f64, beta: f64) -> Vec<f64> {
    let mut pts = sd.support_breakpoints();
    if let Some(ws) = (DisplacementProfile::Variational { gbar, beta }).crossover_scale() {
        pts.extend_from_slice(&[0.3 * ws, ws, 3.0 * ws]);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Coupling renormalization 𝔅 = exp[−½ ∫dω (J/ω²)G² coth(βω/2)].
pub fn frak_b(
    sd: &SpectralDensity,
    gbar: f64,
    beta: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if sd.a == 0.0 {
        return Ok(1.0);
    }
    let g = DisplacementProfile::Variational { gbar, beta };
    let exponent = integrate_semi_infinite(
        |om| {
            let gv = g.eval(om);
            sd.evaluate(om) * (gv / om) * (gv / om) * (0.5 * beta * om).tanh().recip()
        },
        &frame_breakpoints(sd, gbar, beta),
        cfg,
    )
    .map_err(|e| {
        Error::Quadrature(format!(
            "coupling renormalization exponent did not converge (infrared divergence?): {e}"
        ))
    })?;
    Ok((-0.5 * exponent).exp())
}

/// Frame shift λᵛ = ∫dω (J/ω)·G(2−G).
pub fn lambda_v(
    sd: &SpectralDensity,
    gbar: f64,
    beta: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if sd.a == 0.0 {
        return Ok(0.0);
    }
    let g = DisplacementProfile::Variational { gbar, beta };
    integrate_semi_infinite(
        |om| {
            let gv = g.eval(om);
            sd.evaluate(om) / om * gv * (2.0 - gv)
        },
        &frame_breakpoints(sd, gbar, beta),
        cfg,
    )
}

/// Residual-displacement integral ∫dω (J/ω)(1−G)², the detuning of the
/// measured-resonance convention.
pub fn residual_shift(
    sd: &SpectralDensity,
    gbar: f64,
    beta: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if sd.a == 0.0 {
        return Ok(0.0);
    }
    let g = DisplacementProfile::Variational { gbar, beta };
    integrate_semi_infinite(
        |om| {
            let r = 1.0 - g.eval(om);
            sd.evaluate(om) / om * r * r
        },
        &frame_breakpoints(sd, gbar, beta),
        cfg,
    )
}

/// Detuning Δ = ω_m − λᵛ − ω_c under the given convention.
///
/// `Measured` tunes the cavity to the observed molecular line, which makes
/// Δ equal the residual-displacement integral ∫(J/ω)(1−G)² ≥ 0; `Bare`
/// gives Δ = −λᵛ; `Explicit` uses the supplied energies directly.
pub fn detuning(
    sd: &SpectralDensity,
    gbar: f64,
    beta: f64,
    convention: ResonanceConvention,
    omega_m: f64,
    omega_c: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    match convention {
        ResonanceConvention::Measured => residual_shift(sd, gbar, beta, cfg),
        ResonanceConvention::Bare => Ok(-lambda_v(sd, gbar, beta, cfg)?),
        ResonanceConvention::Explicit => {
            Ok(omega_m - lambda_v(sd, gbar, beta, cfg)? - omega_c)
        }
    }
}

/// One evaluation of the stationarity map: all frame quantities derived
/// from `gbar_in`.
#[derive(Debug, Clone, Copy)]
struct UpdateEval {
    gbar_out: f64,
    frak_b: f64,
    lambda_v: f64,
    delta: f64,
    omega_r: f64,
    theta: f64,
}

fn evaluate_update(
    sd: &SpectralDensity,
    params: &PhysicalParams,
    gbar_in: f64,
    cfg: &QuadratureConfig,
) -> Result<UpdateEval> {
    let beta = params.beta();
    let b = frak_b(sd, gbar_in, beta, cfg)?;
    let lam = lambda_v(sd, gbar_in, beta, cfg)?;
    let delta = match params.resonance {
        ResonanceConvention::Measured => residual_shift(sd, gbar_in, beta, cfg)?,
        ResonanceConvention::Bare => -lam,
        ResonanceConvention::Explicit => params.omega_m - lam - params.omega_c,
    };
    let omega_r = params.omega_collective() * b;
    let theta = (delta * delta + 4.0 * omega_r * omega_r).sqrt();

    // Closed-form stationarity value, rewritten with an overall e^{−βθ/2}
    // so that every exponential is bounded by one:
    //   num = (Ω_r²/θ)(1 − e^{−βθ})
    //   den = (N−1)e^{−β(Δ+θ)/2} + (1+e^{−βθ})/2 − (Δ/θ)(1−e^{−βθ})/2
    let gbar_out = if omega_r == 0.0 || theta == 0.0 {
        0.0
    } else {
        let bt = beta * theta;
        let one_m_emt = -(-bt).exp_m1();
        let num = omega_r * omega_r / theta * one_m_emt;
        let den = (params.n - 1.0) * (-0.5 * beta * (delta + theta)).exp()
            + 0.5 * (1.0 + (-bt).exp())
            - 0.5 * (delta / theta) * one_m_emt;
        num / den
    };
    Ok(UpdateEval {
        gbar_out,
        frak_b: b,
        lambda_v: lam,
        delta,
        omega_r,
        theta,
    })
}

/// Evaluates the closed-form stationarity map Ḡ → Ḡ' at `gbar_in`.
pub fn gbar_update(
    sd: &SpectralDensity,
    params: &PhysicalParams,
    gbar_in: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    Ok(evaluate_update(sd, params, gbar_in, cfg)?.gbar_out)
}

/// Shifted free-energy bound −β⁻¹ ln X with
/// X = 2cosh(βθ/2)e^{−βΔ/2} + (n−1)e^{−βΔ}, evaluated in the log domain.
///
/// The additive photon-energy offset and the bath partition constant are
/// dropped; they do not depend on the frame. For n = 1 the dark-state term
/// vanishes.
pub fn free_energy_core(beta: f64, n: f64, delta: f64, theta: f64) -> f64 {
    let x = 0.5 * beta * theta;
    // ln[2cosh(x)·e^{−βΔ/2}] = x + ln(1+e^{−2x}) − βΔ/2
    let t1 = x + (-2.0 * x).exp().ln_1p() - 0.5 * beta * delta;
    let ln_x = if n > 1.0 {
        let t2 = (n - 1.0).ln() - beta * delta;
        let m = t1.max(t2);
        m + ((t1 - m).exp() + (t2 - m).exp()).ln()
    } else {
        t1
    };
    -ln_x / beta
}

/// Shifted free-energy bound at frame parameter `gbar`.
pub fn free_energy_fbp(
    sd: &SpectralDensity,
    params: &PhysicalParams,
    gbar: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let ev = evaluate_update(sd, params, gbar, cfg)?;
    Ok(free_energy_core(params.beta(), params.n, ev.delta, ev.theta))
}

/// Refines one bracketed root of r(Ḡ) = update(Ḡ) − Ḡ with damped fixed-point
/// iteration, Aitken acceleration, and a bisection fallback that keeps the
/// iterate inside the bracket.
fn refine_root(
    sd: &SpectralDensity,
    params: &PhysicalParams,
    mut lo: f64,
    mut hi: f64,
    cfg: &QuadratureConfig,
    evals: &mut usize,
) -> Result<(f64, UpdateEval, f64)> {
    let mut x = (lo * hi).sqrt();
    let mut history: Vec<f64> = Vec::with_capacity(3);

    for _ in 0..MAX_ITERATIONS {
        let ev = evaluate_update(sd, params, x, cfg)?;
        *evals += 1;
        let r = ev.gbar_out - x;
        let residual = r.abs() / x.max(GBAR_FLOOR);
        if residual < RESIDUAL_TOL {
            return Ok((x, ev, residual));
        }
        if r > 0.0 {
            lo = x;
        } else {
            hi = x;
        }

        let mut next = x + 0.5 * r;
        history.push(next);
        if history.len() == 3 {
            let (x0, x1, x2) = (history[0], history[1], history[2]);
            let denom = (x2 - x1) - (x1 - x0);
            if denom != 0.0 {
                let accel = x0 - (x1 - x0) * (x1 - x0) / denom;
                if accel.is_finite() && accel > lo && accel < hi {
                    next = accel;
                }
            }
            history.clear();
        }
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo * hi).sqrt();
        }
        x = next;
    }

    let ev = evaluate_update(sd, params, x, cfg)?;
    let residual = (ev.gbar_out - x).abs() / x.max(GBAR_FLOOR);
    Err(Error::SolverNotConverged {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Solves the stationarity condition self-consistently.
///
/// Roots are enumerated by a residual sign scan on a log grid spanning
/// [10⁻³⁰ eV, 10³·Ω]; every bracketed root is refined and the one with the
/// lowest free-energy bound is returned.
pub fn solve_self_consistent(
    sd: &SpectralDensity,
    params: &PhysicalParams,
    cfg: &QuadratureConfig,
) -> Result<VariationalSolution> {
    let beta = params.beta();
    let lo = GBAR_FLOOR;
    let hi = 1e3 * params.omega_collective();
    let ratio = (hi / lo).ln();

    let mut evals = 0usize;
    let mut grid: Vec<(f64, f64)> = Vec::with_capacity(SCAN_POINTS);
    let mut skipped = 0usize;
    for i in 0..SCAN_POINTS {
        let x = lo * (ratio * i as f64 / (SCAN_POINTS - 1) as f64).exp();
        match evaluate_update(sd, params, x, cfg) {
            Ok(ev) => {
                evals += 1;
                grid.push((x, ev.gbar_out - x));
            }
            // Frames whose exponent integral diverges (deep infrared) are
            // not admissible candidates; skip them and bracket among the
            // valid points.
            Err(_) => skipped += 1,
        }
    }

    let mut candidates: Vec<(f64, UpdateEval, f64)> = Vec::new();
    let mut last_error: Option<Error> = None;
    for w in grid.windows(2) {
        let ((a, ra), (b, rb)) = (w[0], w[1]);
        if ra > 0.0 && rb <= 0.0 {
            match refine_root(sd, params, a, b, cfg, &mut evals) {
                Ok(root) => candidates.push(root),
                Err(e) => last_error = Some(e),
            }
        }
    }

    if candidates.is_empty() {
        if let Some(e) = last_error {
            return Err(e);
        }
        let signs: Vec<i8> = grid.iter().map(|&(_, r)| if r > 0.0 { 1 } else { -1 }).collect();
        return Err(Error::SolverNotConverged {
            iterations: evals,
            residual: f64::NAN,
        })
        .map_err(|_| {
            Error::Quadrature(format!(
                "no stationary frame bracketed on [{lo:.1e}, {hi:.1e}] eV: {} scan points valid ({} skipped as infrared-divergent), residual signs {:?}",
                grid.len(),
                skipped,
                signs
            ))
        });
    }

    let mut best: Option<(f64, f64, UpdateEval, f64)> = None;
    for (x, ev, residual) in candidates {
        let f = free_energy_core(beta, params.n, ev.delta, ev.theta);
        let better = match &best {
            None => true,
            Some((bf, bx, _, _)) => f < *bf || (f == *bf && x < *bx),
        };
        if better {
            best = Some((f, x, ev, residual));
        }
    }
    let (f, x, ev, residual) = best.unwrap();

    Ok(VariationalSolution {
        gbar: x,
        frak_b: ev.frak_b,
        delta: ev.delta,
        lambda_v: ev.lambda_v,
        omega_r: ev.omega_r,
        theta: ev.theta,
        iterations: evals,
        residual,
        f_fbp: f,
    })
}
