//! Numerical engine for the vibrational dynamics of N molecules collectively
//! coupled to a single cavity mode.
//!
//! The crate builds a variationally optimized polaron frame for the coupled
//! molecule–cavity system, evaluates the bath correlation functions of that
//! frame, and assembles polariton transition rates, dephasing rates, Lamb
//! shifts, absorption spectra, and population dynamics, in both the
//! weak-coupling and variational-frame theories.

pub mod correlations;
pub mod eigensystem;
pub mod error;
pub mod observables;
pub mod params;
pub mod quad;
pub mod rates;
pub mod spectral;
pub mod variational;

pub use correlations::{
    bare_slope, coupling_omega2_slope, decoherence_factor, displacement_slope, gamma1_nonmarkov,
    gamma1_s1, gamma1_static, gamma_multi, gamma_multi_block, gamma_phi_multi,
    gamma_phi_multi_leading, interference_slope, m_functional, phi, phi_displacement,
    phi_power_fourier, s1v, two_phonon_direct, Parity, PropagatorGrid, Sign, StaticRate,
    TransitionClass, ZeroFreqLimit, DEFAULT_MULTIPHONON_ORDER,
};
pub use eigensystem::{
    bruteforce_secular, coefficient_c, coefficient_p, coefficient_v, dark_basis,
    nonres_eigensystem, DarkBasis, NonResonantEigensystem, PairKind, StateLabel, TripleKind,
};
pub use error::{Error, Result};
pub use observables::{
    absorption_spectrum, boltzmann_stationary, dark_survival, secular_dynamics, CoherenceTrace,
    InitialState, PopulationTrajectory, SpectralPeak, SpectrumResult,
};
pub use params::{
    bose_occupation, build_params, classify_regime, DerivedScales, PhysicalParams, Regime,
    RegimeTag, RegimeThresholds, ResonanceConvention, K_B,
};
pub use quad::{
    cosine_sine_transform, default_tau_max, half_line_fourier, integrate,
    integrate_semi_infinite, principal_value, FourierGridConfig, HalfFourier, QuadratureConfig,
};
pub use rates::{
    coherence_rates, lamb_strong_asymptote, lamb_weak_asymptote, nonres_rates, vpme_dephasing,
    vpme_lamb, vpme_rates, vpme_transitions, wcme_rates, CoherenceRate, CorrelationContext,
    LambShift, LambShiftSet, Level, RateSet, RateSplit, RateValue, Theory, WeightConvention,
};
pub use spectral::{
    derived_densities, moment_bj, DerivedDensities, DisplacementProfile, MonotoneCubic,
    SpectralDensity,
};
pub use variational::{
    detuning, frak_b, free_energy_core, free_energy_fbp, g_of_omega, gbar_update, lambda_v,
    residual_shift, solve_self_consistent, VariationalSolution,
};
