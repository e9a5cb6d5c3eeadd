//! Run configuration: a flat INI dialect with `[section]` headers,
//! `key = value` lines, and `#` comments. Sections and keys are closed
//! sets; anything unknown is a parse error naming the offending line, so a
//! typo never silently falls back to a default.

use std::collections::BTreeSet;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::params::PhysParams;
use crate::stepper::Mode;

/// Initial data families selectable in `[init]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// The rest state a = u = B = 0; fixed point of the dynamics.
    Equilibrium,
    /// Seeded band-limited random perturbation of all fields.
    RandomSmall,
    /// A single magnetic mode varying along x2, damped by the horizontal
    /// diffusion.
    MagneticHorizontal,
    /// A single magnetic mode varying along x3, untouched by the horizontal
    /// diffusion.
    MagneticVertical,
    /// A single compressive mode coupling a and u1 along x1.
    AcousticMode,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Equilibrium => "equilibrium",
            Preset::RandomSmall => "random_small",
            Preset::MagneticHorizontal => "magnetic_horizontal",
            Preset::MagneticVertical => "magnetic_vertical",
            Preset::AcousticMode => "acoustic_mode",
        }
    }
}

/// Parameters of an inequality ensemble sweep, `[sweep]` section.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Number of seeds per resolution.
    pub seeds: usize,
    /// Cubic grid sizes to sweep.
    pub resolutions: Vec<usize>,
    /// Band limit of the random fields.
    pub kmax: usize,
    /// Spectral decay exponent of the random fields.
    pub decay: f64,
    /// Derivative axes for the mixed-derivative bound, zero-based.
    pub axes: [usize; 3],
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { seeds: 100, resolutions: vec![16, 32], kmax: 4, decay: 2.0, axes: [0, 2, 1] }
    }
}

/// Everything a run needs, with every field defaulted so an empty file is a
/// valid configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub n: [usize; 3],
    pub l: [f64; 3],
    pub params: PhysParams,
    pub preset: Preset,
    /// Total H3 amplitude of the initial data.
    pub epsilon: f64,
    pub seed: u64,
    /// Band limit of random initial data.
    pub kmax: usize,
    /// Spectral decay of random initial data.
    pub decay: f64,
    /// Fixed step size; None derives one from the advective CFL limit.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub mode: Mode,
    pub out_dir: PathBuf,
    /// Ledger sampling cadence in steps.
    pub ledger_every: usize,
    /// Checkpoint cadence in steps; 0 means final checkpoint only.
    pub checkpoint_every: usize,
    /// Weight of the H3 part of the Lyapunov functional.
    pub lyapunov_a: f64,
    pub sweep: SweepConfig,
    /// Which `section.key` pairs were given explicitly.
    pub set_keys: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tau = std::f64::consts::TAU;
        RunConfig {
            n: [32, 32, 32],
            l: [tau, tau, tau],
            params: PhysParams::default(),
            preset: Preset::RandomSmall,
            epsilon: 1e-2,
            seed: 0,
            kmax: 4,
            decay: 2.0,
            dt: None,
            t_end: 1.0,
            mode: Mode::Full,
            out_dir: PathBuf::from("out"),
            ledger_every: 10,
            checkpoint_every: 0,
            lyapunov_a: 16.0,
            sweep: SweepConfig::default(),
            set_keys: BTreeSet::new(),
        }
    }
}

impl RunConfig {
    /// True when `section.key` appeared in the parsed file.
    pub fn was_set(&self, section: &str, key: &str) -> bool {
        self.set_keys.contains(&format!("{section}.{key}"))
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| err(line, format!("{key}: expected a number, got '{v}'")))
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| err(line, format!("{key}: expected a nonnegative integer, got '{v}'")))
}

fn parse_u64(line: usize, key: &str, v: &str) -> Result<u64> {
    v.parse::<u64>()
        .map_err(|_| err(line, format!("{key}: expected a nonnegative integer, got '{v}'")))
}

/// Parse a configuration file. Unknown sections or keys, malformed values,
/// and physically inadmissible parameters are all reported with their line
/// number.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    // lines to blame for cross-key admissibility failures found at the end
    let mut mu_line = 0;
    let mut lambda_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => raw[..p].trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, format!("unterminated section header '{raw}'")))?
                .trim();
            match name {
                "grid" | "physics" | "init" | "time" | "output" | "sweep" => {
                    section = name.to_string();
                }
                other => return Err(err(line_no, format!("unknown section [{other}]"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if section.is_empty() {
            return Err(err(line_no, format!("key '{key}' appears before any [section]")));
        }
        if value.is_empty() {
            return Err(err(line_no, format!("{key}: empty value")));
        }
        cfg.set_keys.insert(format!("{section}.{key}"));
        match (section.as_str(), key) {
            ("grid", "n") => {
                let n = parse_usize(line_no, key, value)?;
                cfg.n = [n, n, n];
            }
            ("grid", "n1") => cfg.n[0] = parse_usize(line_no, key, value)?,
            ("grid", "n2") => cfg.n[1] = parse_usize(line_no, key, value)?,
            ("grid", "n3") => cfg.n[2] = parse_usize(line_no, key, value)?,
            ("grid", "l") => {
                let l = parse_f64(line_no, key, value)?;
                cfg.l = [l, l, l];
            }
            ("grid", "l1") => cfg.l[0] = parse_f64(line_no, key, value)?,
            ("grid", "l2") => cfg.l[1] = parse_f64(line_no, key, value)?,
            ("grid", "l3") => cfg.l[2] = parse_f64(line_no, key, value)?,
            ("physics", "mu") => {
                cfg.params.mu = parse_f64(line_no, key, value)?;
                mu_line = line_no;
            }
            ("physics", "lambda") => {
                cfg.params.lambda = parse_f64(line_no, key, value)?;
                lambda_line = line_no;
            }
            ("physics", "sigma") => {
                cfg.params.sigma = parse_f64(line_no, key, value)?;
                if !(cfg.params.sigma > 0.0) {
                    return Err(err(line_no, format!("sigma must be positive, got {value}")));
                }
            }
            ("physics", "gamma") => {
                cfg.params.gamma = parse_f64(line_no, key, value)?;
                if !(cfg.params.gamma >= 1.0) {
                    return Err(err(line_no, format!("gamma must be at least 1, got {value}")));
                }
            }
            ("physics", "vacuum_floor") => {
                cfg.params.vacuum_floor = parse_f64(line_no, key, value)?;
                if !(cfg.params.vacuum_floor > 0.0 && cfg.params.vacuum_floor < 1.0) {
                    return Err(err(line_no, format!("vacuum_floor must be in (0, 1), got {value}")));
                }
            }
            ("init", "preset") => {
                cfg.preset = match value {
                    "equilibrium" => Preset::Equilibrium,
                    "random_small" => Preset::RandomSmall,
                    "magnetic_horizontal" => Preset::MagneticHorizontal,
                    "magnetic_vertical" => Preset::MagneticVertical,
                    "acoustic_mode" => Preset::AcousticMode,
                    other => {
                        return Err(err(
                            line_no,
                            format!(
                                "unknown preset '{other}' (expected equilibrium, random_small, \
                                 magnetic_horizontal, magnetic_vertical or acoustic_mode)"
                            ),
                        ))
                    }
                };
            }
            ("init", "epsilon") => {
                cfg.epsilon = parse_f64(line_no, key, value)?;
                if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
                    return Err(err(line_no, format!("epsilon must be positive, got {value}")));
                }
            }
            ("init", "seed") => cfg.seed = parse_u64(line_no, key, value)?,
            ("init", "kmax") => cfg.kmax = parse_usize(line_no, key, value)?,
            ("init", "decay") => cfg.decay = parse_f64(line_no, key, value)?,
            ("time", "dt") => {
                let dt = parse_f64(line_no, key, value)?;
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(err(line_no, format!("dt must be positive, got {value}")));
                }
                cfg.dt = Some(dt);
            }
            ("time", "t_end") => {
                cfg.t_end = parse_f64(line_no, key, value)?;
                if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
                    return Err(err(line_no, format!("t_end must be positive, got {value}")));
                }
            }
            ("time", "mode") => {
                cfg.mode = match value {
                    "full" => Mode::Full,
                    "linear" => Mode::Linear,
                    other => {
                        return Err(err(
                            line_no,
                            format!("unknown mode '{other}' (expected full or linear)"),
                        ))
                    }
                };
            }
            ("output", "dir") => cfg.out_dir = PathBuf::from(value),
            ("output", "ledger_every") => {
                cfg.ledger_every = parse_usize(line_no, key, value)?;
                if cfg.ledger_every == 0 {
                    return Err(err(line_no, "ledger_every must be at least 1".to_string()));
                }
            }
            ("output", "checkpoint_every") => {
                cfg.checkpoint_every = parse_usize(line_no, key, value)?;
            }
            ("output", "lyapunov_a") => {
                cfg.lyapunov_a = parse_f64(line_no, key, value)?;
                if !(cfg.lyapunov_a > 1.0) {
                    return Err(err(
                        line_no,
                        format!("lyapunov_a must exceed 1 to dominate the cross term, got {value}"),
                    ));
                }
            }
            ("sweep", "seeds") => {
                cfg.sweep.seeds = parse_usize(line_no, key, value)?;
                if cfg.sweep.seeds == 0 {
                    return Err(err(line_no, "seeds must be at least 1".to_string()));
                }
            }
            ("sweep", "resolutions") => {
                cfg.sweep.resolutions = value
                    .split(',')
                    .map(|p| parse_usize(line_no, key, p.trim()))
                    .collect::<Result<Vec<usize>>>()?;
                if cfg.sweep.resolutions.is_empty() {
                    return Err(err(line_no, "resolutions must not be empty".to_string()));
                }
            }
            ("sweep", "kmax") => cfg.sweep.kmax = parse_usize(line_no, key, value)?,
            ("sweep", "decay") => cfg.sweep.decay = parse_f64(line_no, key, value)?,
            ("sweep", "axes") => {
                let digits: Vec<usize> = value
                    .chars()
                    .map(|c| {
                        c.to_digit(10)
                            .map(|d| d as usize)
                            .ok_or_else(|| err(line_no, format!("axes: bad digit '{c}'")))
                    })
                    .collect::<Result<Vec<usize>>>()?;
                let mut sorted = digits.clone();
                sorted.sort_unstable();
                if sorted != vec![1, 2, 3] {
                    return Err(err(
                        line_no,
                        format!("axes must be a permutation of 123, got '{value}'"),
                    ));
                }
                cfg.sweep.axes = [digits[0] - 1, digits[1] - 1, digits[2] - 1];
            }
            (_, key) => {
                return Err(err(line_no, format!("unknown key '{key}' in section [{section}]")))
            }
        }
    }

    // cross-key physical admissibility, attributed to the lines that set it
    if !(cfg.params.mu > 0.0) {
        return Err(err(
            mu_line,
            format!("viscosity must satisfy mu > 0, got mu = {}", cfg.params.mu),
        ));
    }
    if !(cfg.params.nu() > 0.0) {
        return Err(err(
            lambda_line.max(mu_line),
            format!(
                "bulk viscosity must satisfy nu = lambda + 2 mu > 0, got nu = {}",
                cfg.params.nu()
            ),
        ));
    }
    cfg.params.validate()?;
    Ok(cfg)
}
