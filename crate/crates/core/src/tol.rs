//! Centralized numeric tolerances and pinned check constants.
//!
//! Every acceptance-grade comparison in the crate routes through a constant
//! defined here, with a short justification for its magnitude. Tests never
//! invent ad hoc tolerances.

/// Identities evaluated on identical floating-point inputs (frame
/// orthogonality after projection, discrete Parseval, conjugate symmetry at
/// mirrored probe points). Error budget is a handful of rounding operations
/// on O(1) quantities, so 1e-10 leaves three orders of margin over f64 eps.
pub const EXACT_F64: f64 = 1e-10;

/// Orthonormality residual for constructed direction frames: unit lengths,
/// pairwise dot products, and the transversality relation. Each entry is a
/// few fused multiply-adds on normalized O(1) vectors.
pub const FRAME_ORTHONORMALITY: f64 = 1e-12;

/// Sums over literally identical quadrature nodes (plateau-exact probe
/// transforms). The two sides are the same finite sum reassociated, so only
/// accumulation order noise remains.
pub const SAME_NODES: f64 = 1e-12;

/// Mollifier unit-mass check: kernel normalization constant from a 4096-panel
/// Simpson radial quadrature versus an independent 8192-panel trapezoid
/// evaluation. Both rules are far converged on this analytic integrand.
pub const MOLLIFIER_MASS: f64 = 1e-6;

/// Log-log slope cap for the mollified gradient sup-norm across the ladder.
/// Theory for a bounded (jump) potential gives exponent 1/4; 0.3 allows
/// finite-ladder fit noise without admitting a wrong power.
pub const MOLLIFY_GRAD_SLOPE_MAX: f64 = 0.3;

/// Log-log slope cap for the phase-corrector gradient sup-norm in ρ.
/// Theory gives 1/4; the margin absorbs finite-difference and ladder-fit
/// noise at the default grid.
pub const PHASE_GRAD_SLOPE_MAX: f64 = 0.25 + 0.05;

/// Log-log decay slope of |Φ| along in-plane rays far from the support.
/// The transform decays like 1/|x''| (slope -1); -0.9 tolerates the
/// subleading terms still visible at radii 2R₁..4R₁.
pub const PHASE_DECAY_SLOPE_MAX: f64 = -0.9;

/// Minimum convergence order of the ∂̄ residual under h-halving. The
/// residual is pure centered-difference truncation, nominally order 2;
/// requiring ≥ 1 keeps the check meaningful without betting on constants.
pub const DBAR_ORDER_MIN: f64 = 1.0;

/// Allowed drift factor for fitted stability constants across a ρ ladder
/// (∂̄ residual bound, Carleman constants, partial-data chain constant).
/// The estimates assert a ρ-uniform constant; ×2 over a ×4 parameter span
/// distinguishes "bounded" from any residual power of ρ.
pub const FIT_DRIFT_MAX: f64 = 2.0;

/// Relative linear-system residual required of the remainder solver.
pub const SOLVER_REL_RESIDUAL: f64 = 1e-8;

/// Damping factor for the least-squares remainder solve, multiplied by the
/// weight scale `ρ`. The penalty suppresses the exponentially ill-conditioned
/// boundary-concentrated directions of the conjugated operator while leaving
/// directions at the remainder's own scale `σ ≳ ρ` essentially untouched;
/// the induced residual floor sits far below the stencil consistency error.
pub const SOLVER_DAMPING_FACTOR: f64 = 0.15;

/// Nodes per phase wavelength required before a CGO solve is attempted.
pub const NODES_PER_WAVELENGTH: f64 = 6.0;

/// Constant in the interior PDE-residual truncation bound
/// `C · h² · ρ² · ‖u‖₂ₕ`, where ‖u‖₂ₕ is the discrete second-difference
/// energy norm. A centered second difference carries truncation
/// h²·|∂⁴u|/12, and |∂⁴u| ≈ (phase rate)²·|∂²u| for the CGO ansatz, so the
/// natural constant is below 1/6 per axis; 1.0 covers cross terms and the
/// cutoff's axial derivatives with real margin.
pub const PDE_RESIDUAL_C: f64 = 1.0;

/// Required decrease factor of the interior PDE residual under h-halving
/// (order ≥ 1; pure truncation would give 0.25).
pub const PDE_REFINE_RATIO_MAX: f64 = 0.5;

/// Log₂-slope cap for the remainder decay quantity
/// ρ⁻¹‖w‖_{H¹ρ} + ‖w‖_{L²} across the ρ ladder. Theory gives ρ^{-1/8}
/// (slope -1/8 per doubling); -1/16 asserts genuine decay at half rate.
pub const REMAINDER_DECAY_SLOPE_MAX: f64 = -1.0 / 16.0;

/// Relative agreement required between the two routes of the Fourier
/// identity at the default grid (quadrature of the phase-weighted integral
/// versus the direct lattice transform).
pub const FOURIER_IDENTITY_REL: f64 = 1e-2;

/// Factor by which the Fourier-identity discrepancy must shrink when the
/// grid spacing is halved (order ≥ 1 in h).
pub const FOURIER_REFINE_FACTOR: f64 = 2.0;

/// Relative RMS error allowed between ladder-extrapolated curl samples and
/// the direct transform oracle over the probe set.
pub const RECOVERY_SIGNAL_REL: f64 = 0.05;

/// Null-separation: RMS curl samples for a pure-gauge perturbation must be
/// below this fraction of the equal-norm signal RMS.
pub const RECOVERY_NULL_REL: f64 = 1e-3;

/// Sup-norm gate on the centered-difference curl below which a potential is
/// accepted as a lattice gradient field.
pub const GAUGE_CURL_GATE: f64 = 1e-6;

/// Required decrease factor of the gauge-reconstruction sup error under
/// h-halving (O(h²) would give 0.25; 0.35 absorbs the line-quadrature term).
pub const GAUGE_REFINE_RATIO_MAX: f64 = 0.35;

/// Spread factor allowed for the phase-corrector sup-norm across the ρ
/// ladder ("uniformly bounded in ρ": the mollified potentials converge, so
/// the sup stabilizes; 1.5 rejects any systematic growth).
pub const PHASE_SUP_SPREAD_MAX: f64 = 1.5;

/// Factor allowed between Carleman constants fitted with and without a
/// bounded electric perturbation (‖q‖_∞ ≤ 1).
pub const CARLEMAN_Q_FACTOR: f64 = 2.0;

/// Hard iteration cap for the damped least-squares solver. Preconditioned
/// solves converge in hundreds of iterations; the cap only guards hangs.
pub const SOLVER_MAX_ITERS: usize = 50_000;

/// Conjugate-symmetry check for transforms of real fields at mirrored
/// probes (identical nodes, reassociated sum).
pub const CONJUGATE_SYMMETRY: f64 = 1e-10;

/// Discrete Parseval for the weighted Sobolev norms at order zero.
pub const PARSEVAL_REL: f64 = 1e-10;
