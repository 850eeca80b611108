//! Bath spectral density family, the displacement profile of the variational
//! frame, and the three derived densities it induces, plus thermal moments
//! used in shift asymptotics.

use crate::error::{Error, Result};
use crate::quad::{integrate_semi_infinite, QuadratureConfig};

/// Monotone piecewise-cubic interpolant (PCHIP slopes) with hard-zero
/// extrapolation outside the knot range.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant from strictly increasing knots.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Table("need at least two (ω, J) pairs".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("ω column must be strictly increasing".into()));
        }
        if y.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Table("J values must be finite and non-negative".into()));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

        let mut m = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        m[0] = edge_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], *delta.get(1).unwrap_or(&delta[0]));
        m[n - 1] = edge_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n >= 3 { delta[n - 3] } else { delta[n - 2] },
        );
        Ok(MonotoneCubic { x, y, m })
    }

    /// Parses a two-column CSV (omega_eV, J_eV); a header row is skipped if
    /// its first field is not numeric.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (fields.next(), fields.next()) else {
                return Err(Error::Table(format!("line {}: need two columns", lineno + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ if lineno == 0 => continue,
                _ => {
                    return Err(Error::Table(format!(
                        "line {}: could not parse `{line}`",
                        lineno + 1
                    )))
                }
            }
        }
        MonotoneCubic::new(xs, ys)
    }

    /// Evaluates the interpolant; zero outside the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x < self.x[0] || x > self.x[n - 1] {
            return 0.0;
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (self.y[i] * h00 + self.y[i + 1] * h01 + h * (self.m[i] * h10 + self.m[i + 1] * h11))
            .max(0.0)
    }

    fn range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }
}

/// Non-centered three-point edge slope with the standard monotone clips.
fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Bath spectral density J(ω) = A·Θ(ω)·ω^p·ω₀^{1−p}·e^{−ω²/ω₀²}, optionally
/// replaced by a tabulated density.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    /// Dimensionless coupling strength.
    pub a: f64,
    /// Ohmicity exponent.
    pub p: f64,
    /// Gaussian cutoff (eV).
    pub omega_0: f64,
    table: Option<MonotoneCubic>,
}

impl SpectralDensity {
    /// Built-in family with validated parameters.
    pub fn new(a: f64, p: f64, omega_0: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::invalid("A", format!("must be non-negative, got {a}")));
        }
        if !(p > 0.0) {
            return Err(Error::invalid("p", format!("must be positive, got {p}")));
        }
        if !(omega_0 > 0.0) {
            return Err(Error::invalid(
                "omega_0",
                format!("must be positive, got {omega_0}"),
            ));
        }
        Ok(SpectralDensity {
            a,
            p,
            omega_0,
            table: None,
        })
    }

    /// Builds from the model parameter set.
    pub fn from_params(params: &crate::params::PhysicalParams) -> Self {
        SpectralDensity {
            a: params.a,
            p: params.p,
            omega_0: params.omega_0,
            table: None,
        }
    }

    /// Replaces evaluation with a tabulated density (two-column CSV text).
    /// The family parameters are kept as scale metadata.
    pub fn with_table_csv(mut self, csv: &str) -> Result<Self> {
        self.table = Some(MonotoneCubic::from_csv(csv)?);
        Ok(self)
    }

    /// J(ω); zero for ω ≤ 0.
    pub fn evaluate(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        if let Some(t) = &self.table {
            return t.eval(omega);
        }
        let r = omega / self.omega_0;
        self.a * self.omega_0 * r.powf(self.p) * (-r * r).exp()
    }

    /// Whether the density comes from a tabulated profile.
    pub fn is_tabulated(&self) -> bool {
        self.table.is_some()
    }

    /// Interior breakpoints marking where the density has structure; used to
    /// seed adaptive integration.
    pub fn support_breakpoints(&self) -> Vec<f64> {
        if let Some(t) = &self.table {
            let (lo, hi) = t.range();
            let mid = 0.5 * (lo + hi);
            return vec![lo.max(0.0), mid, hi];
        }
        // The two outer points keep the Gaussian tail resolvable even when a
        // caller appends breakpoints many orders of magnitude further out.
        [0.25, 1.0, 2.5, 5.0, 8.0]
            .iter()
            .map(|s| s * self.omega_0)
            .collect()
    }

    /// Reorganization energy ∫₀^∞ J(ω)/ω dω, by adaptive quadrature.
    /// For the built-in family this equals (A·ω₀/2)·Γ(p/2).
    pub fn reorganization_energy(&self, cfg: &QuadratureConfig) -> Result<f64> {
        integrate_semi_infinite(
            |om| self.evaluate(om) / om,
            &self.support_breakpoints(),
            cfg,
        )
    }
}

/// Fraction G(ω) of each bath mode's displacement transferred into the
/// polaron frame.
#[derive(Debug, Clone, Copy)]
pub enum DisplacementProfile {
    /// Variationally optimal profile G(ω) = ω/(ω + Ḡ·coth(βω/2)).
    Variational {
        /// Frame parameter Ḡ (eV).
        gbar: f64,
        /// Inverse temperature (eV⁻¹).
        beta: f64,
    },
    /// Full polaron transformation, G ≡ 1.
    Full,
    /// Untransformed frame, G ≡ 0.
    Zero,
}

impl DisplacementProfile {
    /// G(ω) ∈ [0, 1].
    pub fn eval(&self, omega: f64) -> f64 {
        match *self {
            DisplacementProfile::Variational { gbar, beta } => {
                if omega <= 0.0 {
                    return 0.0;
                }
                if gbar == 0.0 {
                    return 1.0;
                }
                let coth = (0.5 * beta * omega).tanh().recip();
                omega / (omega + gbar * coth)
            }
            DisplacementProfile::Full => 1.0,
            DisplacementProfile::Zero => 0.0,
        }
    }

    /// Scale ω* = √(2Ḡ/β) where the variational profile crosses over from
    /// G ≈ 0 to G ≈ 1; None for the constant profiles.
    pub fn crossover_scale(&self) -> Option<f64> {
        match *self {
            DisplacementProfile::Variational { gbar, beta } if gbar > 0.0 => {
                Some((2.0 * gbar / beta).sqrt())
            }
            _ => None,
        }
    }
}

/// The three densities induced by the frame: displacement-type
/// J_D = J(1−G)², polaron-type J_P = J·G²/ω², and variational-type
/// J_V = J(1−G)G/ω.
#[derive(Debug, Clone)]
pub struct DerivedDensities {
    sd: SpectralDensity,
    g: DisplacementProfile,
}

impl DerivedDensities {
    /// J_D(ω) = J(ω)(1−G(ω))².
    pub fn j_d(&self, omega: f64) -> f64 {
        let r = 1.0 - self.g.eval(omega);
        self.sd.evaluate(omega) * r * r
    }

    /// J_P(ω) = J(ω)G(ω)²/ω².
    pub fn j_p(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        let g = self.g.eval(omega);
        self.sd.evaluate(omega) * (g / omega) * (g / omega)
    }

    /// J_V(ω) = J(ω)(1−G(ω))G(ω)/ω = √(J_D·J_P).
    pub fn j_v(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        let g = self.g.eval(omega);
        self.sd.evaluate(omega) * (1.0 - g) * g / omega
    }

    /// The underlying bare density.
    pub fn bare(&self) -> &SpectralDensity {
        &self.sd
    }

    /// Builds without the infrared probe; for callers that already know the
    /// frame is convergent or that probe separately.
    pub fn unchecked(sd: SpectralDensity, g: DisplacementProfile) -> Self {
        DerivedDensities { sd, g }
    }

    /// The frame profile.
    pub fn profile(&self) -> &DisplacementProfile {
        &self.g
    }

    /// Breakpoints covering both the density support and the profile
    /// crossover layer.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = self.sd.support_breakpoints();
        if let Some(ws) = self.g.crossover_scale() {
            pts.extend_from_slice(&[0.3 * ws, ws, 3.0 * ws]);
        }
        pts.sort_by(f64::total_cmp);
        pts
    }
}

/// Builds the derived densities after probing that the polaron-type thermal
/// moment ∫J_P·coth(βω/2) dω is infrared-convergent in this frame.
pub fn derived_densities(
    sd: &SpectralDensity,
    g: DisplacementProfile,
    beta: f64,
    cfg: &QuadratureConfig,
) -> Result<DerivedDensities> {
    let d = DerivedDensities {
        sd: sd.clone(),
        g,
    };
    let probe = |cut: f64| -> Result<f64> {
        let f = |om: f64| d.j_p(om) * (0.5 * beta * om).tanh().recip();
        let pts: Vec<f64> = d.breakpoints().into_iter().filter(|&x| x > cut).collect();
        let shifted = |u: f64| f(u + cut);
        let spts: Vec<f64> = pts.iter().map(|x| x - cut).collect();
        integrate_semi_infinite(shifted, &spts, cfg)
    };
    let scale_ref = sd.omega_0;
    let coarse = probe(1e-6 * scale_ref)?;
    let fine = probe(1e-7 * scale_ref)?;
    let denom = fine.abs().max(1e-300);
    if (fine - coarse).abs() / denom > 0.01 {
        return Err(Error::Quadrature(format!(
            "infrared divergence in the polaron-type moment: cutoff 10⁻⁶ω₀ → {coarse:.6e}, 10⁻⁷ω₀ → {fine:.6e}"
        )));
    }
    Ok(d)
}

/// Thermal moment B_j(β) = ∫ (J(ω)·w(ω)/ω^j)·coth(βω/2) dω with an optional
/// multiplicative frame weight w.
///
/// Declared infrared-divergent (error) if moving the lower cutoff from
/// 10⁻⁶ω₀ to 10⁻⁷ω₀ changes the value by more than 1%.
pub fn moment_bj<W: Fn(f64) -> f64>(
    sd: &SpectralDensity,
    weight: W,
    j: u32,
    beta: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let f = |om: f64| {
        sd.evaluate(om) * weight(om) / om.powi(j as i32) * (0.5 * beta * om).tanh().recip()
    };
    let probe = |cut: f64| -> Result<f64> {
        let pts: Vec<f64> = sd
            .support_breakpoints()
            .into_iter()
            .filter(|&x| x > cut)
            .collect();
        let shifted = |u: f64| f(u + cut);
        let spts: Vec<f64> = pts.iter().map(|x| x - cut).collect();
        integrate_semi_infinite(shifted, &spts, cfg)
    };
    let coarse = probe(1e-6 * sd.omega_0)?;
    let fine = probe(1e-7 * sd.omega_0)?;
    let denom = fine.abs().max(1e-300);
    if (fine - coarse).abs() / denom > 0.01 {
        return Err(Error::Quadrature(format!(
            "infrared-divergent moment B_{j}: cutoff 10⁻⁶ω₀ → {coarse:.6e}, 10⁻⁷ω₀ → {fine:.6e}"
        )));
    }
    Ok(fine)
}
