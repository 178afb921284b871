//! Unit constants. Everything inside the crate is SI (Pa, m, kg/s, s).

/// One pound-force per square inch in pascal.
pub const PSI: f64 = 6_894.757_293_168_361;
/// One statute mile in metres.
pub const MILE: f64 = 1_609.344;
pub const INCH: f64 = 0.0254;
pub const FOOT: f64 = 0.3048;
pub const KILOMETRE: f64 = 1_000.0;
pub const BAR: f64 = 1.0e5;

/// Default isothermal sound speed, m/s.
pub const DEFAULT_SOUND_SPEED: f64 = 370.0;
/// Default Darcy-type friction factor.
pub const DEFAULT_FRICTION: f64 = 0.01;

/// Reference pressure used to normalise the diffusion coefficient (800 psi).
pub const DEFAULT_P0: f64 = 800.0 * PSI;
/// Reference time used to normalise the diffusion coefficient (15 min).
pub const DEFAULT_T0: f64 = 900.0;

/// Default noise correlation time for nodes that do not set one.
pub const DEFAULT_NOISE_TAU: f64 = DEFAULT_T0;
/// Default noise amplitude as a fraction of the node's stationary |q|.
pub const DEFAULT_SIGMA_FRACTION: f64 = 1.0 / 3.0;

/// Default compressor exponent (gamma - 1) / gamma for gamma = 1.4.
pub const DEFAULT_COMPRESSOR_EXPONENT: f64 = 2.0 / 7.0;
pub const DEFAULT_ALPHA_MIN: f64 = 1.0;
pub const DEFAULT_ALPHA_MAX: f64 = 1.5;

/// Samples per pipe for profiles, bound checks and jitter output.
pub const DEFAULT_SAMPLES: usize = 101;
