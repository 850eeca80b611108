//! Single-excitation eigenbasis and its coefficient tensors.
//!
//! N molecules sharing one cavity photon split into two polaritons |±⟩ and
//! N−1 dark states. The polariton amplitudes are uniform over molecules,
//! ±1/√(2N) on resonance and U_± = ±√((1±ε)/2N) with ε = Δ/θ off resonance,
//! while the dark columns u_{id} only need to be orthonormal, orthogonal to
//! the bright combination, and confined to the molecular sector. This module
//! fixes the discrete-Fourier choice u_{id} = e^{2πi·i·d/N}/√N; everything
//! physical depends only on the invariant coefficient sums below, which a
//! re-basis test checks directly.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::correlations::{
    coupling_omega2_slope, displacement_slope, gamma1_static, gamma_multi_block, gamma_phi_multi,
    interference_slope, m_functional, Parity, Sign, ZeroFreqLimit,
};
use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::quad::QuadratureConfig;
use crate::rates::{
    CorrelationContext, LambShift, LambShiftSet, RateSet, RateSplit, RateValue, Theory,
    WeightConvention,
};
use crate::spectral::SpectralDensity;
use crate::variational::VariationalSolution;

/// Label of a single-excitation eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLabel {
    /// Upper polariton.
    Plus,
    /// Lower polariton.
    Minus,
    /// Dark state, indexed 0..N−2.
    Dark(usize),
}

/// Conjugation variant of the pair coefficients c^{P(±)}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// c^{P(+)}_{αβ} = Σ_i u_{iα} u*_{iβ}.
    WithConjugate,
    /// c^{P(−)}_{αβ} = Σ_i u_{iα} u_{iβ}.
    WithoutConjugate,
}

/// Conjugation variant of the triple coefficients c^V.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleKind {
    /// c^{V,1}_{αβγ} = Σ_i u_{iα} u*_{iβ} u_{iγ}.
    One,
    /// c^{V,2}_{αβγ} = Σ_i u_{iα} u*_{iβ} u*_{iγ}.
    Two,
}

/// Molecular amplitudes of the eigenbasis: dark columns u_{id} plus the
/// uniform polariton amplitudes.
#[derive(Debug, Clone)]
pub struct DarkBasis {
    /// Number of molecules.
    pub n: usize,
    /// N × (N−1) dark coefficient matrix.
    pub u: DMatrix<Complex64>,
    /// Per-molecule amplitude of the upper polariton.
    pub u_plus: f64,
    /// Per-molecule amplitude of the lower polariton.
    pub u_minus: f64,
}

impl DarkBasis {
    /// Resonant basis: u_{i±} = ±1/√(2N).
    pub fn resonant(n: usize) -> Result<Self> {
        let amp = 1.0 / (2.0 * n as f64).sqrt();
        Self::with_polaritons(n, amp, -amp)
    }

    /// Basis with explicit polariton amplitudes, for the detuned eigensystem.
    pub fn with_polaritons(n: usize, u_plus: f64, u_minus: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(
                "n",
                format!("dark states need at least 2 molecules, got {n}"),
            ));
        }
        let norm = 1.0 / (n as f64).sqrt();
        let u = DMatrix::from_fn(n, n - 1, |i, d| {
            let arg = 2.0 * std::f64::consts::PI * (i as f64) * ((d + 1) as f64) / n as f64;
            Complex64::from_polar(norm, arg)
        });
        Ok(DarkBasis {
            n,
            u,
            u_plus,
            u_minus,
        })
    }

    /// Replaces the dark columns by u·V for a unitary V, giving another
    /// valid basis. Physical aggregates must not notice.
    pub fn rotate_dark(&self, v: &DMatrix<Complex64>) -> Result<Self> {
        let m = self.n - 1;
        if v.nrows() != m || v.ncols() != m {
            return Err(Error::invalid(
                "v",
                format!("expected a {m}×{m} matrix, got {}×{}", v.nrows(), v.ncols()),
            ));
        }
        let vhv = v.adjoint() * v;
        let off = (0..m)
            .flat_map(|r| (0..m).map(move |c| (r, c)))
            .map(|(r, c)| {
                let expect = if r == c { 1.0 } else { 0.0 };
                (vhv[(r, c)] - Complex64::new(expect, 0.0)).norm()
            })
            .fold(0.0, f64::max);
        if off > 1e-10 {
            return Err(Error::invalid(
                "v",
                format!("matrix is not unitary: max |V†V − 1| = {off:.3e}"),
            ));
        }
        Ok(DarkBasis {
            n: self.n,
            u: &self.u * v,
            u_plus: self.u_plus,
            u_minus: self.u_minus,
        })
    }

    fn check(&self, label: StateLabel) -> Result<()> {
        match label {
            StateLabel::Dark(d) if d >= self.n - 1 => Err(Error::invalid(
                "label",
                format!("dark index {d} out of range for N = {}", self.n),
            )),
            _ => Ok(()),
        }
    }

    /// Molecular amplitude u_{i,label}; the label must have been checked.
    fn amp(&self, i: usize, label: StateLabel) -> Complex64 {
        match label {
            StateLabel::Plus => Complex64::new(self.u_plus, 0.0),
            StateLabel::Minus => Complex64::new(self.u_minus, 0.0),
            StateLabel::Dark(d) => self.u[(i, d)],
        }
    }
}

/// Resonant eigenbasis for N molecules.
pub fn dark_basis(n: usize) -> Result<DarkBasis> {
    DarkBasis::resonant(n)
}

/// Quartic coefficient c_{αβγδ} = Σ_i u_{iα} u*_{iβ} u_{iγ} u*_{iδ}.
pub fn coefficient_c(
    basis: &DarkBasis,
    a: StateLabel,
    b: StateLabel,
    c: StateLabel,
    d: StateLabel,
) -> Result<Complex64> {
    for label in [a, b, c, d] {
        basis.check(label)?;
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..basis.n {
        sum += basis.amp(i, a) * basis.amp(i, b).conj() * basis.amp(i, c)
            * basis.amp(i, d).conj();
    }
    Ok(sum)
}

/// Pair coefficient c^{P(±)}_{αβ}; see [`PairKind`] for the two variants.
pub fn coefficient_p(
    basis: &DarkBasis,
    a: StateLabel,
    b: StateLabel,
    kind: PairKind,
) -> Result<Complex64> {
    basis.check(a)?;
    basis.check(b)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..basis.n {
        let second = match kind {
            PairKind::WithConjugate => basis.amp(i, b).conj(),
            PairKind::WithoutConjugate => basis.amp(i, b),
        };
        sum += basis.amp(i, a) * second;
    }
    Ok(sum)
}

/// Triple coefficient c^{V,kind}_{αβγ}; see [`TripleKind`] for the variants.
pub fn coefficient_v(
    basis: &DarkBasis,
    a: StateLabel,
    b: StateLabel,
    c: StateLabel,
    kind: TripleKind,
) -> Result<Complex64> {
    basis.check(a)?;
    basis.check(b)?;
    basis.check(c)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..basis.n {
        let third = match kind {
            TripleKind::One => basis.amp(i, c),
            TripleKind::Two => basis.amp(i, c).conj(),
        };
        sum += basis.amp(i, a) * basis.amp(i, b).conj() * third;
    }
    Ok(sum)
}

/// Detuned single-excitation eigensystem.
#[derive(Debug, Clone, Copy)]
pub struct NonResonantEigensystem {
    /// Per-molecule amplitude of the upper polariton, √((1+ε)/2N).
    pub u_plus: f64,
    /// Per-molecule amplitude of the lower polariton, −√((1−ε)/2N).
    pub u_minus: f64,
    /// Detuning fraction ε = Δ/θ.
    pub epsilon: f64,
    /// Polariton splitting θ = √(Δ² + 4Ω_r²).
    pub theta: f64,
    /// Upper polariton energy ω_c + (Δ+θ)/2.
    pub omega_plus: f64,
    /// Lower polariton energy ω_c + (Δ−θ)/2.
    pub omega_minus: f64,
    /// Dark manifold energy ω_c + Δ.
    pub omega_dark: f64,
}

impl NonResonantEigensystem {
    /// Photon amplitude of the upper polariton, √((1−ε)/2).
    pub fn w_plus(&self) -> f64 {
        (0.5 * (1.0 - self.epsilon)).max(0.0).sqrt()
    }

    /// Photon amplitude of the lower polariton, √((1+ε)/2).
    pub fn w_minus(&self) -> f64 {
        (0.5 * (1.0 + self.epsilon)).max(0.0).sqrt()
    }

    /// Eigenbasis with these polariton amplitudes on the dark-state columns
    /// of the discrete-Fourier construction.
    pub fn basis(&self, n: usize) -> Result<DarkBasis> {
        DarkBasis::with_polaritons(n, self.u_plus, self.u_minus)
    }
}

/// Builds the detuned eigensystem from a converged frame.
///
/// The upper polariton leans onto the molecules as ε grows; at ε → 1 the
/// lower polariton localizes onto the photon and U_− → 0. The asymmetric
/// gaps are ω_+ − ω_d = (θ−Δ)/2 and ω_d − ω_− = (θ+Δ)/2.
pub fn nonres_eigensystem(
    params: &PhysicalParams,
    sol: &VariationalSolution,
) -> NonResonantEigensystem {
    let delta = sol.delta;
    let theta = sol.theta;
    let epsilon = if theta > 0.0 { delta / theta } else { 0.0 };
    let two_n = 2.0 * params.n;
    let u_plus = ((1.0 + epsilon).max(0.0) / two_n).sqrt();
    let u_minus = -((1.0 - epsilon).max(0.0) / two_n).sqrt();
    NonResonantEigensystem {
        u_plus,
        u_minus,
        epsilon,
        theta,
        omega_plus: params.omega_c + 0.5 * (delta + theta),
        omega_minus: params.omega_c + 0.5 * (delta - theta),
        omega_dark: params.omega_c + delta,
    }
}

/// Memoized Γ evaluators shared by every term of the explicit summation.
///
/// The secular generator only ever samples the channel functions at the
/// handful of eigenfrequency gaps, so each channel keeps a small map keyed
/// by the bit pattern of ν.
struct GammaTable<'a> {
    ctx: &'a CorrelationContext,
    omega_r: f64,
    n: f64,
    d_slope: ZeroFreqLimit,
    p_slope: ZeroFreqLimit,
    v_slope: ZeroFreqLimit,
    breakpoints: Vec<f64>,
    d: BTreeMap<u64, Complex64>,
    v: BTreeMap<u64, Complex64>,
    p_plus: BTreeMap<u64, Complex64>,
    p_minus: BTreeMap<u64, Complex64>,
}

impl GammaTable<'_> {
    /// Displacement channel Γ^D(ν) = M₊[J_D](ν).
    fn gamma_d(&mut self, nu: f64) -> Result<Complex64> {
        if let Some(&hit) = self.d.get(&nu.to_bits()) {
            return Ok(hit);
        }
        let dens = &self.ctx.densities;
        let hf = m_functional(
            |om| dens.j_d(om),
            self.d_slope,
            &self.breakpoints,
            self.ctx.beta,
            nu,
            Sign::Plus,
            &self.ctx.cfg,
        )?;
        self.d.insert(nu.to_bits(), hf.value);
        Ok(hf.value)
    }

    /// Interference channel Γ^V(ν) = (Ω_r/√(2N))·M₋[J_V](ν).
    fn gamma_v(&mut self, nu: f64) -> Result<Complex64> {
        if let Some(&hit) = self.v.get(&nu.to_bits()) {
            return Ok(hit);
        }
        let dens = &self.ctx.densities;
        let hf = m_functional(
            |om| dens.j_v(om),
            self.v_slope,
            &self.breakpoints,
            self.ctx.beta,
            nu,
            Sign::Minus,
            &self.ctx.cfg,
        )?;
        let value = self.omega_r / (2.0 * self.n).sqrt() * hf.value;
        self.v.insert(nu.to_bits(), value);
        Ok(value)
    }

    /// Polaron channel Γ^{P(±)}(ν) =
    /// (1/2N)[±Ω_r²·M₊[J_P](ν) + Γ^{even}_{>1}(ν) ± Γ^{odd}_{>1}(ν)].
    fn gamma_p(&mut self, plus: bool, nu: f64) -> Result<Complex64> {
        let cache = if plus { &self.p_plus } else { &self.p_minus };
        if let Some(&hit) = cache.get(&nu.to_bits()) {
            return Ok(hit);
        }
        let dens = &self.ctx.densities;
        let single = m_functional(
            |om| dens.j_p(om),
            self.p_slope,
            &self.breakpoints,
            self.ctx.beta,
            nu,
            Sign::Plus,
            &self.ctx.cfg,
        )?
        .value;
        let even = gamma_multi_block(
            &self.ctx.grid,
            self.omega_r,
            nu,
            Parity::Even,
            self.ctx.max_order,
            &self.ctx.cfg,
        )?
        .value;
        let odd = gamma_multi_block(
            &self.ctx.grid,
            self.omega_r,
            nu,
            Parity::Odd,
            self.ctx.max_order,
            &self.ctx.cfg,
        )?
        .value;
        let s = if plus { 1.0 } else { -1.0 };
        let value = (s * self.omega_r * self.omega_r * single + even + s * odd) / (2.0 * self.n);
        let cache = if plus {
            &mut self.p_plus
        } else {
            &mut self.p_minus
        };
        cache.insert(nu.to_bits(), value);
        Ok(value)
    }
}

/// Accumulates coef·Π_{xy} ρ Π_{zw} into the superoperator matrix, where a
/// missing side means the identity. Row/column packing is (a,b) → a·dim+b
/// for ⟨a|L(|m⟩⟨n|)|b⟩.
fn add_term(
    s: &mut DMatrix<Complex64>,
    dim: usize,
    coef: Complex64,
    left: Option<(usize, usize)>,
    right: Option<(usize, usize)>,
) {
    if coef.norm_sqr() == 0.0 {
        return;
    }
    match (left, right) {
        (Some((x, y)), Some((z, w))) => s[(x * dim + w, y * dim + z)] += coef,
        (Some((x, y)), None) => {
            for b in 0..dim {
                s[(x * dim + b, y * dim + b)] += coef;
            }
        }
        (None, Some((z, w))) => {
            for a in 0..dim {
                s[(a * dim + w, a * dim + z)] += coef;
            }
        }
        (None, None) => {}
    }
}

/// Adds a term together with its Hermitian conjugate
/// (coef·Π_{xy} ρ Π_{zw})† = coef*·Π_{wz} ρ Π_{yx}.
fn add_with_hc(
    s: &mut DMatrix<Complex64>,
    dim: usize,
    coef: Complex64,
    left: Option<(usize, usize)>,
    right: Option<(usize, usize)>,
) {
    add_term(s, dim, coef, left, right);
    add_term(
        s,
        dim,
        coef.conj(),
        right.map(|(z, w)| (w, z)),
        left.map(|(x, y)| (y, x)),
    );
}

/// Checks that a set of degenerate extractions agree and returns the first.
fn collapse(values: &[f64], what: &str, tol: f64) -> Result<f64> {
    let first = values[0];
    for &v in values {
        if (v - first).abs() > tol {
            return Err(Error::invalid(
                "bruteforce_secular",
                format!("{what} spread {:.3e} exceeds {tol:.3e}", (v - first).abs()),
            ));
        }
    }
    Ok(first)
}

/// Assembles the secular rates by explicit summation over the full
/// eigenbasis, as an independent cross-check of the closed-form sets.
///
/// Every Liouvillian term of the displacement, interference, and polaron
/// channels is expanded against the coefficient tensors and the same Γ
/// functions the closed forms use, accumulated into the superoperator on the
/// (N+2)-dimensional single-excitation space, and read back as population
/// transfer rates, pure-dephasing rates, and frequency shifts. Internal
/// consistency (trace preservation, reality of population rates, degeneracy
/// of the dark extractions) is enforced, so a successful return means the
/// generator itself was well formed.
///
/// The converged frame is taken as given; only the collective coupling is
/// rescaled to the reduced molecule count, Ω_r = g𝔅√n_small. Totals are
/// reported in the `single` slot of each [`RateSplit`] and in the
/// `transition` slot of each [`LambShift`]; the explicit summation has no
/// natural single/multi or transition/virtual decomposition.
pub fn bruteforce_secular(
    params: &PhysicalParams,
    sol: &VariationalSolution,
    n_small: usize,
    max_order: usize,
    cfg: &QuadratureConfig,
) -> Result<(RateSet, LambShiftSet)> {
    if !(2..=8).contains(&n_small) {
        return Err(Error::invalid(
            "n_small",
            format!("explicit summation supports 2..=8 molecules, got {n_small}"),
        ));
    }
    let params = PhysicalParams {
        n: n_small as f64,
        ..params.clone()
    };
    let omega_r = params.omega_collective() * sol.frak_b;
    let sol = VariationalSolution {
        omega_r,
        theta: sol.delta.hypot(2.0 * omega_r),
        ..sol.clone()
    };
    let sd = SpectralDensity::from_params(&params);
    let ctx = CorrelationContext::build(&sd, &params, &sol, max_order, cfg)?;
    let eig = nonres_eigensystem(&params, &sol);
    let basis = eig.basis(n_small)?;

    let dim = n_small + 2;
    let lab = |k: usize| match k {
        1 => StateLabel::Plus,
        2 => StateLabel::Minus,
        _ => StateLabel::Dark(k - 3),
    };
    let mut omega = vec![0.0; dim];
    omega[1] = eig.omega_plus;
    omega[2] = eig.omega_minus;
    for slot in omega.iter_mut().skip(3) {
        *slot = eig.omega_dark;
    }
    let photon = |p: usize| if p == 1 { eig.w_plus() } else { eig.w_minus() };

    let mut table = GammaTable {
        ctx: &ctx,
        omega_r,
        n: params.n,
        d_slope: displacement_slope(&ctx.densities),
        p_slope: coupling_omega2_slope(&ctx.densities),
        v_slope: interference_slope(&ctx.densities),
        breakpoints: ctx.densities.breakpoints(),
        d: BTreeMap::new(),
        v: BTreeMap::new(),
        p_plus: BTreeMap::new(),
        p_minus: BTreeMap::new(),
    };

    let mut s = DMatrix::<Complex64>::zeros(dim * dim, dim * dim);
    // Coefficient sums that vanish analytically come back as rounding dust;
    // skipping them avoids pointless Γ evaluations.
    let skip = 1e-14;

    // Displacement channel: Σ c_{αβγδ} Γ^D(ω_{δγ}) [Π_{γδ}ρ, Π_{αβ}] + H.c.
    for al in 1..dim {
        for be in 1..dim {
            for ga in 1..dim {
                for de in 1..dim {
                    let c = coefficient_c(&basis, lab(al), lab(be), lab(ga), lab(de))?;
                    if c.norm() < skip {
                        continue;
                    }
                    let k = c * table.gamma_d(omega[de] - omega[ga])?;
                    add_with_hc(&mut s, dim, k, Some((ga, de)), Some((al, be)));
                    if be == ga {
                        add_with_hc(&mut s, dim, -k, Some((al, de)), None);
                    }
                }
            }
        }
    }

    // Polaron channel, four pieces with photon-amplitude weights 2w_p w_q:
    //   −c^{P(−)}_{αβ} Γ^{P(−)}(ω_{qβ}) [Π_{αp}, Π_{βq}ρ]
    //   −c^{P(−)*}_{αβ} Γ^{P(−)}(ω_{βq}) [Π_{pα}, Π_{qβ}ρ]
    //   −c^{P(+)}_{αβ} Γ^{P(+)}(ω_{βq}) [Π_{αp}, Π_{qβ}ρ]
    //   −c^{P(+)*}_{αβ} Γ^{P(+)}(ω_{qβ}) [Π_{pα}, Π_{βq}ρ]   (+ H.c.)
    for al in 1..dim {
        for be in 1..dim {
            let cm = coefficient_p(&basis, lab(al), lab(be), PairKind::WithoutConjugate)?;
            let cp = coefficient_p(&basis, lab(al), lab(be), PairKind::WithConjugate)?;
            for p in 1..=2 {
                for q in 1..=2 {
                    let f = 2.0 * photon(p) * photon(q);
                    if cm.norm() >= skip {
                        let k1 = f * cm * table.gamma_p(false, omega[q] - omega[be])?;
                        if p == be {
                            add_with_hc(&mut s, dim, -k1, Some((al, q)), None);
                        }
                        add_with_hc(&mut s, dim, k1, Some((be, q)), Some((al, p)));
                        let k2 = f * cm.conj() * table.gamma_p(false, omega[be] - omega[q])?;
                        if al == q {
                            add_with_hc(&mut s, dim, -k2, Some((p, be)), None);
                        }
                        add_with_hc(&mut s, dim, k2, Some((q, be)), Some((p, al)));
                    }
                    if cp.norm() >= skip {
                        let k3 = f * cp * table.gamma_p(true, omega[be] - omega[q])?;
                        if p == q {
                            add_with_hc(&mut s, dim, -k3, Some((al, be)), None);
                        }
                        add_with_hc(&mut s, dim, k3, Some((q, be)), Some((al, p)));
                        let k4 = f * cp.conj() * table.gamma_p(true, omega[q] - omega[be])?;
                        if al == be {
                            add_with_hc(&mut s, dim, -k4, Some((p, q)), None);
                        }
                        add_with_hc(&mut s, dim, k4, Some((be, q)), Some((p, al)));
                    }
                }
            }
        }
    }

    // Interference channel, four pieces with photon-amplitude weights √2·w_p.
    // The coefficient with the conjugated third slot pairs with the
    // polariton-on-the-left projectors:
    //   −c^{V,conj}_{αβγ} Γ^V(ω_{γp}) [Π_{αβ}, Π_{pγ}ρ]
    //   −c^{V,plain}_{αβγ} Γ^V(ω_{βα}) [Π_{γp}, Π_{αβ}ρ]
    //   −c^{V,conj}_{αβγ} Γ^V(ω_{βα}) [Π_{αβ}ρ, Π_{pγ}]
    //   −c^{V,plain}_{αβγ} Γ^V(ω_{pγ}) [Π_{γp}ρ, Π_{αβ}]   (+ H.c.)
    for al in 1..dim {
        for be in 1..dim {
            for ga in 1..dim {
                let c1 = coefficient_v(&basis, lab(al), lab(be), lab(ga), TripleKind::Two)?;
                let c2 = coefficient_v(&basis, lab(al), lab(be), lab(ga), TripleKind::One)?;
                for p in 1..=2 {
                    let f = std::f64::consts::SQRT_2 * photon(p);
                    if c1.norm() >= skip {
                        let k1 = f * c1 * table.gamma_v(omega[ga] - omega[p])?;
                        if be == p {
                            add_with_hc(&mut s, dim, -k1, Some((al, ga)), None);
                        }
                        add_with_hc(&mut s, dim, k1, Some((p, ga)), Some((al, be)));
                        let k3 = f * c1 * table.gamma_v(omega[be] - omega[al])?;
                        add_with_hc(&mut s, dim, -k3, Some((al, be)), Some((p, ga)));
                        if ga == al {
                            add_with_hc(&mut s, dim, k3, Some((p, be)), None);
                        }
                    }
                    if c2.norm() >= skip {
                        let k2 = f * c2 * table.gamma_v(omega[be] - omega[al])?;
                        if p == al {
                            add_with_hc(&mut s, dim, -k2, Some((ga, be)), None);
                        }
                        add_with_hc(&mut s, dim, k2, Some((al, be)), Some((ga, p)));
                        let k4 = f * c2 * table.gamma_v(omega[p] - omega[ga])?;
                        add_with_hc(&mut s, dim, -k4, Some((ga, p)), Some((al, be)));
                        if be == ga {
                            add_with_hc(&mut s, dim, k4, Some((al, p)), None);
                        }
                    }
                }
            }
        }
    }

    // Read-out. Everything below only inspects the assembled generator.
    let idx = |a: usize, b: usize| a * dim + b;
    let scale = (0..dim)
        .map(|m| s[(idx(m, m), idx(m, m))].norm())
        .fold(0.0f64, f64::max);
    let tol = 1e-9 * scale + 1e-30;

    for m in 0..dim {
        for n2 in 0..dim {
            let mut tr = Complex64::new(0.0, 0.0);
            for a in 0..dim {
                tr += s[(idx(a, a), idx(m, n2))];
            }
            if tr.norm() > tol {
                return Err(Error::invalid(
                    "bruteforce_secular",
                    format!("trace leak {:.3e} in column ({m},{n2})", tr.norm()),
                ));
            }
        }
    }

    let transfer = |to: usize, from: usize| -> Result<f64> {
        let e = s[(idx(to, to), idx(from, from))];
        if e.im.abs() > tol {
            return Err(Error::invalid(
                "bruteforce_secular",
                format!("complex population rate {:.3e} for {from}→{to}", e.im),
            ));
        }
        Ok(e.re)
    };

    for m in 1..dim {
        if transfer(0, m)?.abs() > tol {
            return Err(Error::invalid(
                "bruteforce_secular",
                format!("unexpected decay channel {m}→ground"),
            ));
        }
    }

    let darks: Vec<usize> = (3..dim).collect();
    let gather = |f: &dyn Fn(usize) -> Result<f64>| -> Result<Vec<f64>> {
        darks.iter().map(|&k| f(k)).collect()
    };

    let k_pm = transfer(2, 1)?;
    let k_mp = transfer(1, 2)?;
    let k_pd = collapse(&gather(&|k| transfer(k, 1))?, "K(+→d)", tol)?;
    let k_md = collapse(&gather(&|k| transfer(k, 2))?, "K(−→d)", tol)?;
    let k_dp = collapse(&gather(&|k| transfer(1, k))?, "K(d→+)", tol)?;
    let k_dm = collapse(&gather(&|k| transfer(2, k))?, "K(d→−)", tol)?;
    let k_dd = if n_small >= 3 {
        let mut pairs = Vec::new();
        for &d in &darks {
            for &e in &darks {
                if d != e {
                    pairs.push(transfer(e, d)?);
                }
            }
        }
        collapse(&pairs, "K(d→d')", tol)?
    } else {
        0.0
    };

    let population = |m: usize| -s[(idx(m, m), idx(m, m))].re;
    let loss_plus = population(1);
    let loss_minus = population(2);
    let loss_dark = collapse(&gather(&|k| Ok(population(k)))?, "dark loss", tol)?;
    if population(0).abs() > tol {
        return Err(Error::invalid(
            "bruteforce_secular",
            "ground state is not stationary",
        ));
    }

    let coherence = |mu: usize, nu: usize| -s[(idx(mu, nu), idx(mu, nu))];
    let lamb_plus = coherence(1, 0).im;
    let lamb_minus = coherence(2, 0).im;
    let lamb_dark = collapse(&gather(&|k| Ok(coherence(k, 0).im))?, "dark shift", tol)?;
    let triangle = coherence(1, 2).im - (lamb_plus - lamb_minus);
    if triangle.abs() > tol {
        return Err(Error::invalid(
            "bruteforce_secular",
            format!("shift mismatch {triangle:.3e} between coherence sectors"),
        ));
    }

    let loss_of = |m: usize| match m {
        0 => 0.0,
        1 => loss_plus,
        2 => loss_minus,
        _ => loss_dark,
    };
    let kphi = |mu: usize, nu: usize| coherence(mu, nu).re - 0.5 * (loss_of(mu) + loss_of(nu));
    let kphi_pd = collapse(&gather(&|k| Ok(kphi(1, k)))?, "Kφ(+d)", tol)?;
    let kphi_md = collapse(&gather(&|k| Ok(kphi(2, k)))?, "Kφ(−d)", tol)?;
    let kphi_dg = collapse(&gather(&|k| Ok(kphi(k, 0)))?, "Kφ(dG)", tol)?;
    let kphi_dd = if n_small >= 3 {
        let mut pairs = Vec::new();
        for &d in &darks {
            for &e in &darks {
                if d != e {
                    pairs.push(kphi(d, e));
                }
            }
        }
        collapse(&pairs, "Kφ(dd')", tol)?
    } else {
        0.0
    };

    let split = |value: f64| RateSplit {
        single: value,
        multi: 0.0,
    };
    let shift = |value: f64| LambShift {
        transition: value,
        virtual_self: 0.0,
    };
    let rates = RateSet {
        theory: Theory::Vpme,
        convention: WeightConvention::Canonical,
        n: params.n,
        beta: ctx.beta,
        delta: sol.delta,
        epsilon: eig.epsilon,
        theta: eig.theta,
        omega_r,
        omega_plus: eig.omega_plus,
        omega_minus: eig.omega_minus,
        omega_dark: eig.omega_dark,
        k_plus_to_minus: split(k_pm),
        k_minus_to_plus: split(k_mp),
        k_plus_to_dark: split(k_pd),
        k_minus_to_dark: split(k_md),
        k_dark_to_plus: split(k_dp),
        k_dark_to_minus: split(k_dm),
        k_dark_to_dark: RateValue::Finite(k_dd),
        loss_plus,
        loss_minus,
        loss_dark: RateValue::Finite(loss_dark),
        kphi_plus_minus: RateValue::Finite(kphi(1, 2)),
        kphi_plus_ground: RateValue::Finite(kphi(1, 0)),
        kphi_minus_ground: RateValue::Finite(kphi(2, 0)),
        kphi_plus_dark: RateValue::Finite(kphi_pd),
        kphi_minus_dark: RateValue::Finite(kphi_md),
        kphi_dark_ground: RateValue::Finite(kphi_dg),
        kphi_dark_dark: kphi_dd,
        gamma1_static: gamma1_static(displacement_slope(&ctx.densities), ctx.beta),
        gamma_phi_multi: gamma_phi_multi(&ctx.grid, params.g, sol.frak_b, &ctx.cfg)?
            .rate()
            .max(0.0),
    };
    let lamb = LambShiftSet {
        theory: Theory::Vpme,
        delta: sol.delta,
        omega_plus: eig.omega_plus,
        omega_minus: eig.omega_minus,
        omega_dark: eig.omega_dark,
        plus: shift(lamb_plus),
        minus: shift(lamb_minus),
        dark: shift(lamb_dark),
        ground: shift(0.0),
    };
    Ok((rates, lamb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(x: f64, y: f64) -> f64 {
        x.abs().max(y)
    }

    #[test]
    fn dark_basis_identity_families() {
        for n in [2usize, 3, 4, 5, 8, 16, 33, 64] {
            let b = dark_basis(n).unwrap();
            let nf = n as f64;

            // Column zero-sum.
            let mut worst = 0.0f64;
            for d in 0..n - 1 {
                let s: Complex64 = (0..n).map(|i| b.u[(i, d)]).sum();
                worst = max_abs(s.norm(), worst);
            }
            assert!(worst < 1e-13, "zero-sum violated at N = {n}: {worst:.3e}");

            // Orthonormal columns.
            let mut worst = 0.0f64;
            for d in 0..n - 1 {
                for e in 0..n - 1 {
                    let s: Complex64 = (0..n).map(|i| b.u[(i, d)] * b.u[(i, e)].conj()).sum();
                    let expect = if d == e { 1.0 } else { 0.0 };
                    worst = max_abs((s - expect).norm(), worst);
                }
            }
            assert!(worst < 1e-13, "orthonormality violated at N = {n}");

            // Pair identity Σ_d u_{id} u*_{jd} = δ_{ij} − 1/N.
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let s: Complex64 = (0..n - 1).map(|d| b.u[(i, d)] * b.u[(j, d)].conj()).sum();
                    let expect = if i == j { 1.0 - 1.0 / nf } else { -1.0 / nf };
                    worst = max_abs((s - expect).norm(), worst);
                }
            }
            assert!(worst < 1e-13, "pair identity violated at N = {n}");
        }
    }

    #[test]
    fn two_molecule_dark_state_is_the_odd_combination() {
        let b = dark_basis(2).unwrap();
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(b.u[(0, 0)].re, r, epsilon = 1e-15);
        assert_abs_diff_eq!((b.u[(0, 0)] + b.u[(1, 0)]).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn five_molecule_dark_weight_per_site() {
        let b = dark_basis(5).unwrap();
        for i in 0..5 {
            let s: f64 = (0..4).map(|d| b.u[(i, d)].norm_sqr()).sum();
            assert_relative_eq!(s, 4.0 / 5.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn quartic_closed_forms() {
        use StateLabel::{Dark, Minus, Plus};
        for n in [2usize, 3, 5, 8] {
            let b = dark_basis(n).unwrap();
            let nf = n as f64;
            let c4 = |a, bb, c, d| coefficient_c(&b, a, bb, c, d).unwrap();

            assert_relative_eq!(c4(Plus, Plus, Plus, Plus).re, 1.0 / (4.0 * nf), max_relative = 1e-13);
            assert_relative_eq!(c4(Plus, Minus, Minus, Plus).re, 1.0 / (4.0 * nf), max_relative = 1e-13);

            let mut dark_sum = Complex64::new(0.0, 0.0);
            for d in 0..n - 1 {
                let c = c4(Plus, Dark(d), Dark(d), Plus);
                assert_relative_eq!(c.re, 1.0 / (2.0 * nf), max_relative = 1e-13);
                dark_sum += c;
            }
            assert_relative_eq!(dark_sum.re, (nf - 1.0) / (2.0 * nf), max_relative = 1e-13);

            for d in 0..n - 1 {
                assert_relative_eq!(
                    c4(Dark(d), Dark(d), Dark(d), Dark(d)).re,
                    1.0 / nf,
                    max_relative = 1e-13
                );
            }
        }
        // Explicit two-molecule value from the spec of the closed forms.
        let b2 = dark_basis(2).unwrap();
        assert_relative_eq!(
            coefficient_c(&b2, StateLabel::Plus, StateLabel::Minus, StateLabel::Minus, StateLabel::Plus)
                .unwrap()
                .re,
            0.125,
            max_relative = 1e-15
        );
    }

    #[test]
    fn pair_and_triple_closed_forms() {
        use StateLabel::{Dark, Minus, Plus};
        let n = 6usize;
        let b = dark_basis(n).unwrap();

        let pp = coefficient_p(&b, Plus, Plus, PairKind::WithConjugate).unwrap();
        assert_relative_eq!(pp.re, 0.5, max_relative = 1e-14);
        let pm = coefficient_p(&b, Plus, Minus, PairKind::WithoutConjugate).unwrap();
        assert_relative_eq!(pm.re, -0.5, max_relative = 1e-14);
        for d in 0..n - 1 {
            for e in 0..n - 1 {
                let de = coefficient_p(&b, Dark(d), Dark(e), PairKind::WithConjugate).unwrap();
                let expect = if d == e { 1.0 } else { 0.0 };
                assert_abs_diff_eq!((de - expect).norm(), 0.0, epsilon = 1e-13);
            }
        }

        // Any triple with one dark slot against two uniform polariton slots
        // collapses through the column zero-sum.
        for d in 0..n - 1 {
            for kind in [TripleKind::One, TripleKind::Two] {
                let v = coefficient_v(&b, Plus, Minus, Dark(d), kind).unwrap();
                assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-14);
                let v = coefficient_v(&b, Dark(d), Plus, Minus, kind).unwrap();
                assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn detuned_pair_coefficients() {
        use StateLabel::{Minus, Plus};
        let n = 4usize;
        let eps: f64 = 0.6;
        let u_plus = ((1.0 + eps) / (2.0 * n as f64)).sqrt();
        let u_minus = -((1.0 - eps) / (2.0 * n as f64)).sqrt();
        let b = DarkBasis::with_polaritons(n, u_plus, u_minus).unwrap();

        let pp = coefficient_p(&b, Plus, Plus, PairKind::WithConjugate).unwrap();
        assert_relative_eq!(pp.re, 0.5 * (1.0 + eps), max_relative = 1e-14);
        let mm = coefficient_p(&b, Minus, Minus, PairKind::WithConjugate).unwrap();
        assert_relative_eq!(mm.re, 0.5 * (1.0 - eps), max_relative = 1e-14);
        let pm = coefficient_p(&b, Plus, Minus, PairKind::WithoutConjugate).unwrap();
        assert_relative_eq!(pm.re, -0.5 * (1.0 - eps * eps).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn rebasis_preserves_aggregates() {
        use StateLabel::{Dark, Plus};
        let n = 7usize;
        let b = dark_basis(n).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = DMatrix::from_fn(n - 1, n - 1, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let q = m.qr().q();
        let rotated = b.rotate_dark(&q).unwrap();

        // Pair identity survives.
        for i in 0..n {
            for j in 0..n {
                let s: Complex64 = (0..n - 1)
                    .map(|d| rotated.u[(i, d)] * rotated.u[(j, d)].conj())
                    .sum();
                let expect = if i == j { 1.0 - 1.0 / n as f64 } else { -1.0 / n as f64 };
                assert_abs_diff_eq!((s - expect).norm(), 0.0, epsilon = 1e-12);
            }
        }

        // Aggregate quartic sums over the dark manifold are basis independent.
        let agg = |basis: &DarkBasis| {
            let mut s1 = Complex64::new(0.0, 0.0);
            let mut s2 = Complex64::new(0.0, 0.0);
            for d in 0..n - 1 {
                s1 += coefficient_c(basis, Plus, Dark(d), Dark(d), Plus).unwrap();
                for e in 0..n - 1 {
                    s2 += coefficient_c(basis, Dark(d), Dark(e), Dark(e), Dark(d)).unwrap();
                }
            }
            (s1, s2)
        };
        let (a1, a2) = agg(&b);
        let (r1, r2) = agg(&rotated);
        assert_abs_diff_eq!((a1 - r1).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((a2 - r2).norm(), 0.0, epsilon = 1e-12);

        // A non-unitary matrix is rejected.
        let bad = DMatrix::from_element(n - 1, n - 1, Complex64::new(0.5, 0.0));
        assert!(b.rotate_dark(&bad).is_err());
    }

    #[test]
    fn invalid_labels_and_sizes_are_rejected() {
        assert!(dark_basis(1).is_err());
        let b = dark_basis(3).unwrap();
        assert!(coefficient_c(&b, StateLabel::Dark(2), StateLabel::Plus, StateLabel::Plus, StateLabel::Plus).is_err());
        assert!(coefficient_p(&b, StateLabel::Dark(5), StateLabel::Plus, PairKind::WithConjugate).is_err());
        assert!(coefficient_v(&b, StateLabel::Plus, StateLabel::Plus, StateLabel::Dark(9), TripleKind::One).is_err());
    }

    #[test]
    fn detuned_eigensystem_limits() {
        use crate::params::{PhysicalParams, ResonanceConvention};
        use crate::quad::QuadratureConfig;
        use crate::spectral::SpectralDensity;
        use crate::variational::solve_self_consistent;

        // Explicit cavity tuning far below the molecular line, so that the
        // splitting is detuning dominated.
        let params = PhysicalParams::new(
            1e-7,
            1e8,
            2.0,
            2.05,
            300.0,
            0.083,
            3.0,
            0.006,
            ResonanceConvention::Explicit,
        )
        .unwrap();
        let sd = SpectralDensity::from_params(&params);
        let cfg = QuadratureConfig::default();
        let sol = solve_self_consistent(&sd, &params, &cfg).unwrap();
        let eig = nonres_eigensystem(&params, &sol);

        // θ² − Δ² = 4Ω_r².
        assert_relative_eq!(
            eig.theta * eig.theta - sol.delta * sol.delta,
            4.0 * sol.omega_r * sol.omega_r,
            max_relative = 1e-10
        );
        // Normalization 2N(U₊² + U₋²) = 2 and the photon weights.
        let two_n = 2.0 * params.n;
        assert_relative_eq!(
            two_n * (eig.u_plus * eig.u_plus + eig.u_minus * eig.u_minus),
            2.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            eig.w_plus().powi(2) + eig.w_minus().powi(2),
            1.0,
            max_relative = 1e-12
        );
        // Asymmetric gaps.
        assert_relative_eq!(
            eig.omega_plus - eig.omega_dark,
            0.5 * (eig.theta - sol.delta),
            max_relative = 1e-10
        );
        assert_relative_eq!(
            eig.omega_dark - eig.omega_minus,
            0.5 * (eig.theta + sol.delta),
            max_relative = 1e-10
        );

        // The measured detuning dwarfs Ω_r here, so the lower polariton
        // photon-localizes: ε → 1 and U_− → 0.
        assert!(eig.epsilon > 0.999);
        assert!(eig.u_minus.abs() < 0.03 * eig.u_plus);

        // Forcing Δ = 0 recovers the resonant amplitudes.
        let mut resonant = sol.clone();
        resonant.delta = 0.0;
        resonant.theta = 2.0 * sol.omega_r;
        let eig0 = nonres_eigensystem(&params, &resonant);
        let amp = 1.0 / two_n.sqrt();
        assert_relative_eq!(eig0.u_plus, amp, max_relative = 1e-14);
        assert_relative_eq!(eig0.u_minus, -amp, max_relative = 1e-14);
        assert_abs_diff_eq!(eig0.epsilon, 0.0, epsilon = 1e-15);
    }

    use crate::params::ResonanceConvention;
    use crate::rates::nonres_rates;
    use crate::variational::solve_self_consistent;
    use std::sync::OnceLock;

    const ORACLE_ORDER: usize = 12;

    struct OracleFixture {
        params: PhysicalParams,
        sol: VariationalSolution,
        ctx: CorrelationContext,
    }

    /// Four molecules with a coupling strong enough that the multi-phonon
    /// blocks carry real weight next to the single-phonon channel.
    fn oracle_fixture() -> &'static OracleFixture {
        static CELL: OnceLock<OracleFixture> = OnceLock::new();
        CELL.get_or_init(|| {
            let params = PhysicalParams::new(
                1e-4,
                4.0,
                2.0,
                2.0,
                300.0,
                0.083,
                3.0,
                0.006,
                ResonanceConvention::Measured,
            )
            .unwrap();
            let cfg = QuadratureConfig::default();
            let sd = SpectralDensity::from_params(&params);
            let sol = solve_self_consistent(&sd, &params, &cfg).unwrap();
            let ctx = CorrelationContext::build(&sd, &params, &sol, ORACLE_ORDER, &cfg).unwrap();
            OracleFixture { params, sol, ctx }
        })
    }

    fn check(what: &str, got: f64, want: f64, rel: f64, floor: f64) {
        let err = (got - want).abs();
        let tol = rel * got.abs().max(want.abs()) + floor;
        assert!(err <= tol, "{what}: {got:.12e} vs {want:.12e} (err {err:.3e})");
    }

    fn compare_sets(
        oracle: &RateSet,
        oracle_lamb: &LambShiftSet,
        closed: &RateSet,
        closed_lamb: &LambShiftSet,
    ) {
        // Absolute floors sit far below the population-rate scale but far
        // above the accumulation noise of the explicit summation.
        let floor = 1e-12 * closed.loss_plus.max(closed.loss_minus);
        let rel = 1e-8;
        check(
            "K(+→−)",
            oracle.k_plus_to_minus.total(),
            closed.k_plus_to_minus.total(),
            rel,
            floor,
        );
        check(
            "K(−→+)",
            oracle.k_minus_to_plus.total(),
            closed.k_minus_to_plus.total(),
            rel,
            floor,
        );
        check(
            "K(+→d)",
            oracle.k_plus_to_dark.total(),
            closed.k_plus_to_dark.total(),
            rel,
            floor,
        );
        check(
            "K(−→d)",
            oracle.k_minus_to_dark.total(),
            closed.k_minus_to_dark.total(),
            rel,
            floor,
        );
        check(
            "K(d→+)",
            oracle.k_dark_to_plus.total(),
            closed.k_dark_to_plus.total(),
            rel,
            floor,
        );
        check(
            "K(d→−)",
            oracle.k_dark_to_minus.total(),
            closed.k_dark_to_minus.total(),
            rel,
            floor,
        );
        check(
            "K(d→d')",
            oracle.k_dark_to_dark.value().unwrap(),
            closed.k_dark_to_dark.value().unwrap(),
            rel,
            floor,
        );
        check("loss(+)", oracle.loss_plus, closed.loss_plus, rel, floor);
        check("loss(−)", oracle.loss_minus, closed.loss_minus, rel, floor);
        check(
            "loss(d)",
            oracle.loss_dark.value().unwrap(),
            closed.loss_dark.value().unwrap(),
            rel,
            floor,
        );
        for (what, a, b) in [
            ("Kφ(+−)", &oracle.kphi_plus_minus, &closed.kphi_plus_minus),
            ("Kφ(+G)", &oracle.kphi_plus_ground, &closed.kphi_plus_ground),
            ("Kφ(−G)", &oracle.kphi_minus_ground, &closed.kphi_minus_ground),
            ("Kφ(+d)", &oracle.kphi_plus_dark, &closed.kphi_plus_dark),
            ("Kφ(−d)", &oracle.kphi_minus_dark, &closed.kphi_minus_dark),
            ("Kφ(dG)", &oracle.kphi_dark_ground, &closed.kphi_dark_ground),
        ] {
            check(what, a.value().unwrap(), b.value().unwrap(), rel, floor);
        }
        check(
            "Kφ(dd')",
            oracle.kphi_dark_dark,
            closed.kphi_dark_dark,
            rel,
            floor,
        );
        // Shifts assemble several principal-value integrals, each bounded by
        // the adaptive tolerance, so the comparison is slightly looser.
        let srel = 5e-8;
        let sfloor = 1e-10
            * closed_lamb
                .plus
                .total()
                .abs()
                .max(closed_lamb.minus.total().abs());
        check(
            "Λ(+)",
            oracle_lamb.plus.total(),
            closed_lamb.plus.total(),
            srel,
            sfloor,
        );
        check(
            "Λ(−)",
            oracle_lamb.minus.total(),
            closed_lamb.minus.total(),
            srel,
            sfloor,
        );
        check(
            "Λ(d)",
            oracle_lamb.dark.total(),
            closed_lamb.dark.total(),
            srel,
            sfloor,
        );
        assert_eq!(oracle_lamb.ground.total(), 0.0);
    }

    #[test]
    fn bruteforce_matches_closed_forms_near_resonance() {
        let fx = oracle_fixture();
        let eig = nonres_eigensystem(&fx.params, &fx.sol);
        let (closed, closed_lamb) = nonres_rates(
            &fx.params,
            &fx.sol,
            &fx.ctx,
            &eig,
            WeightConvention::Canonical,
        )
        .unwrap();
        let (oracle, oracle_lamb) =
            bruteforce_secular(&fx.params, &fx.sol, 4, ORACLE_ORDER, &QuadratureConfig::default())
                .unwrap();
        assert_relative_eq!(oracle.epsilon, closed.epsilon, max_relative = 1e-12);
        assert_relative_eq!(oracle.theta, closed.theta, max_relative = 1e-12);
        compare_sets(&oracle, &oracle_lamb, &closed, &closed_lamb);
        oracle.validate(1e-8).unwrap();
    }

    #[test]
    fn bruteforce_matches_canonical_weights_when_detuned() {
        let fx = oracle_fixture();
        let delta = 1.5 * fx.sol.omega_r;
        let sol = VariationalSolution {
            delta,
            theta: delta.hypot(2.0 * fx.sol.omega_r),
            ..fx.sol.clone()
        };
        let eig = nonres_eigensystem(&fx.params, &sol);
        assert!(eig.epsilon > 0.5);
        let (canonical, canonical_lamb) = nonres_rates(
            &fx.params,
            &sol,
            &fx.ctx,
            &eig,
            WeightConvention::Canonical,
        )
        .unwrap();
        let (halved, _) = nonres_rates(
            &fx.params,
            &sol,
            &fx.ctx,
            &eig,
            WeightConvention::HalvedPolaritonBlocks,
        )
        .unwrap();
        let (oracle, oracle_lamb) =
            bruteforce_secular(&fx.params, &sol, 4, ORACLE_ORDER, &QuadratureConfig::default())
                .unwrap();
        compare_sets(&oracle, &oracle_lamb, &canonical, &canonical_lamb);

        // The multi-phonon blocks carry enough weight here that the
        // explicit summation cleanly rejects the halved variant.
        let gap = (canonical.k_plus_to_minus.total() - halved.k_plus_to_minus.total()).abs();
        assert!(gap > 1e-4 * canonical.k_plus_to_minus.total());
        check(
            "K(+→−) halved mismatch",
            halved.k_plus_to_minus.multi,
            0.5 * canonical.k_plus_to_minus.multi,
            1e-12,
            0.0,
        );
    }

    #[test]
    fn bruteforce_is_silent_without_a_bath() {
        let params = PhysicalParams::new(
            1e-4,
            3.0,
            2.0,
            2.0,
            300.0,
            0.0,
            3.0,
            0.006,
            ResonanceConvention::Measured,
        )
        .unwrap();
        let omega_r = params.omega_collective();
        let sol = VariationalSolution {
            gbar: 0.0,
            frak_b: 1.0,
            delta: 0.0,
            lambda_v: 0.0,
            omega_r,
            theta: 2.0 * omega_r,
            iterations: 0,
            residual: 0.0,
            f_fbp: 0.0,
        };
        let (r, l) = bruteforce_secular(&params, &sol, 3, 8, &QuadratureConfig::default()).unwrap();
        for v in [
            r.k_plus_to_minus.total(),
            r.k_minus_to_plus.total(),
            r.k_plus_to_dark.total(),
            r.k_dark_to_plus.total(),
            r.loss_plus,
            r.loss_minus,
            r.kphi_plus_minus.value().unwrap(),
            r.kphi_dark_ground.value().unwrap(),
            l.plus.total(),
            l.minus.total(),
            l.dark.total(),
        ] {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-25);
        }
    }

    #[test]
    fn bruteforce_rejects_oversized_systems() {
        let fx = oracle_fixture();
        let err = bruteforce_secular(&fx.params, &fx.sol, 9, 8, &QuadratureConfig::default());
        assert!(err.is_err());
    }
}
