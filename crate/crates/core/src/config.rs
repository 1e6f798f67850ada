//! Solver configuration: a flat `key = value` text format whose keys are the
//! parameter names used on the command line.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::GridParams;
use crate::multigrid::{CycleOptions, CycleType, NormType};
use crate::problem::{AlphaProfile, BetaProfile, ProblemCase, SolutionKind, ZONI_DELTA_R};
use crate::stencil::{CachePolicy, InnerBoundary, StencilMode};

/// Domain shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Circular,
    Shafranov,
    Czarny,
}

/// Right-hand side family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// manufactured polar oscillation
    Polar,
    /// `f = 1`, homogeneous boundary data, no exact solution
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaKind {
    Poisson,
    Zoni,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaKind {
    Zero,
    InverseAlpha,
}

/// Every run parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub verbose: bool,
    pub paraview: bool,
    /// worker threads; 0 uses every available core
    pub max_threads: usize,
    pub stencil_mode: StencilMode,
    pub cache_profile: bool,
    pub cache_geometry: bool,
    /// Dirichlet data on the innermost ring instead of the across-the-origin closure
    pub dirichlet_interior: bool,
    /// `None` picks `1e-5 Rmax` (across the origin) or `1e-2 Rmax` (Dirichlet)
    pub r0: Option<f64>,
    pub rmax: f64,
    pub nr_exp: u32,
    pub ntheta_exp: u32,
    /// explicit base sizes, overriding the exponents
    pub nr: Option<usize>,
    pub ntheta: Option<usize>,
    pub anisotropic_factor: usize,
    pub divide_by_2: usize,
    pub fmg: bool,
    pub fmg_iterations: usize,
    pub fmg_cycle: CycleType,
    pub extrapolation: bool,
    /// `None` builds every level the grid allows
    pub max_levels: Option<usize>,
    pub pre_smoothing: usize,
    pub post_smoothing: usize,
    pub cycle: CycleType,
    pub norm: NormType,
    pub max_iterations: usize,
    pub absolute_tolerance: Option<f64>,
    pub relative_tolerance: Option<f64>,
    pub geometry: GeometryKind,
    /// relative radius of the density drop
    pub alpha_jump: f64,
    /// `None` uses the geometry's default (0.3 for both mappings)
    pub kappa_eps: Option<f64>,
    /// `None` uses the geometry's default (0.2 Shafranov, 1.4 Czarny)
    pub delta_e: Option<f64>,
    pub problem: ProblemKind,
    pub alpha_coeff: AlphaKind,
    pub beta_coeff: BetaKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            verbose: false,
            paraview: false,
            max_threads: 0,
            stencil_mode: StencilMode::Give,
            cache_profile: true,
            cache_geometry: false,
            dirichlet_interior: false,
            r0: None,
            rmax: 1.3,
            nr_exp: 6,
            ntheta_exp: 6,
            nr: None,
            ntheta: None,
            anisotropic_factor: 0,
            divide_by_2: 0,
            fmg: false,
            fmg_iterations: 2,
            fmg_cycle: CycleType::F,
            extrapolation: false,
            max_levels: None,
            pre_smoothing: 1,
            post_smoothing: 1,
            cycle: CycleType::V,
            norm: NormType::WeightedL2,
            max_iterations: 150,
            absolute_tolerance: None,
            relative_tolerance: Some(1e-8),
            geometry: GeometryKind::Czarny,
            alpha_jump: 0.7,
            kappa_eps: None,
            delta_e: None,
            problem: ProblemKind::Polar,
            alpha_coeff: AlphaKind::Zoni,
            beta_coeff: BetaKind::InverseAlpha,
        }
    }
}

/// Every recognised key, in file order.
pub const KEYS: &[&str] = &[
    "verbose",
    "paraview",
    "maxOpenMPThreads",
    "stencilDistributionMethod",
    "cacheProfileCoefficients",
    "cacheDomainGeometry",
    "DirBC_Interior",
    "R0",
    "Rmax",
    "nr_exp",
    "ntheta_exp",
    "nr",
    "ntheta",
    "anisotropic_factor",
    "divideBy2",
    "FMG",
    "FMG_iterations",
    "FMG_cycle",
    "extrapolation",
    "maxLevels",
    "preSmoothingSteps",
    "postSmoothingSteps",
    "multigridCycle",
    "residualNormType",
    "maxIterations",
    "absoluteTolerance",
    "relativeTolerance",
    "geometry",
    "alpha_jump",
    "kappa_eps",
    "delta_e",
    "problem",
    "alpha_coeff",
    "beta_coeff",
];

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, format!("expected a boolean, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(key, format!("cannot parse `{v}`")))
}

fn parse_positive(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse_num(key, v)?;
    if !(x.is_finite() && x > 0.0) {
        return Err(bad(key, format!("must be positive, got `{v}`")));
    }
    Ok(x)
}

/// `auto`, `none` or a negative number mean "unset".
fn is_unset(v: &str) -> bool {
    matches!(v.to_ascii_lowercase().as_str(), "auto" | "none") || v.starts_with('-')
}

fn parse_cycle(key: &str, v: &str) -> Result<CycleType> {
    match v.to_ascii_uppercase().as_str() {
        "V" | "0" => Ok(CycleType::V),
        "W" | "1" => Ok(CycleType::W),
        "F" | "2" => Ok(CycleType::F),
        _ => Err(bad(key, format!("expected V, W or F, got `{v}`"))),
    }
}

fn opt_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

impl SolverConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "verbose" => self.verbose = parse_bool(key, v)?,
            "paraview" => self.paraview = parse_bool(key, v)?,
            "maxOpenMPThreads" => {
                self.max_threads = if is_unset(v) { 0 } else { parse_num(key, v)? }
            }
            "stencilDistributionMethod" => {
                self.stencil_mode = match v.to_ascii_lowercase().as_str() {
                    "take" | "0" => StencilMode::Take,
                    "give" | "1" => StencilMode::Give,
                    _ => return Err(bad(key, format!("expected take or give, got `{v}`"))),
                }
            }
            "cacheProfileCoefficients" => self.cache_profile = parse_bool(key, v)?,
            "cacheDomainGeometry" => self.cache_geometry = parse_bool(key, v)?,
            "DirBC_Interior" => self.dirichlet_interior = parse_bool(key, v)?,
            "R0" => {
                self.r0 = if is_unset(v) {
                    None
                } else {
                    Some(parse_positive(key, v)?)
                }
            }
            "Rmax" => self.rmax = parse_positive(key, v)?,
            "nr_exp" => self.nr_exp = parse_num(key, v)?,
            "ntheta_exp" => self.ntheta_exp = parse_num(key, v)?,
            "nr" => {
                self.nr = if is_unset(v) {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "ntheta" => {
                self.ntheta = if is_unset(v) {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "anisotropic_factor" => self.anisotropic_factor = parse_num(key, v)?,
            "divideBy2" => self.divide_by_2 = parse_num(key, v)?,
            "FMG" => self.fmg = parse_bool(key, v)?,
            "FMG_iterations" => self.fmg_iterations = parse_num(key, v)?,
            "FMG_cycle" => self.fmg_cycle = parse_cycle(key, v)?,
            "extrapolation" => {
                self.extrapolation = match v.to_ascii_lowercase().as_str() {
                    "none" | "false" | "0" | "off" => false,
                    "implicit" | "true" | "1" | "on" => true,
                    _ => return Err(bad(key, format!("expected none or implicit, got `{v}`"))),
                }
            }
            "maxLevels" => {
                self.max_levels = if is_unset(v) {
                    None
                } else {
                    let l: usize = parse_num(key, v)?;
                    if l == 0 {
                        return Err(bad(key, "at least one level is required"));
                    }
                    Some(l)
                }
            }
            "preSmoothingSteps" => self.pre_smoothing = parse_num(key, v)?,
            "postSmoothingSteps" => self.post_smoothing = parse_num(key, v)?,
            "multigridCycle" => self.cycle = parse_cycle(key, v)?,
            "residualNormType" => {
                self.norm = match v.to_ascii_lowercase().as_str() {
                    "euclidean" | "l2" | "0" => NormType::Euclidean,
                    "weighted-l2" | "weighted_l2" | "1" => NormType::WeightedL2,
                    "infinity" | "inf" | "2" => NormType::Infinity,
                    _ => return Err(bad(key, format!("unknown norm `{v}`"))),
                }
            }
            "maxIterations" => self.max_iterations = parse_num(key, v)?,
            "absoluteTolerance" => {
                self.absolute_tolerance = if is_unset(v) {
                    None
                } else {
                    Some(parse_positive(key, v)?)
                }
            }
            "relativeTolerance" => {
                self.relative_tolerance = if is_unset(v) {
                    None
                } else {
                    Some(parse_positive(key, v)?)
                }
            }
            "geometry" => {
                self.geometry = match v.to_ascii_lowercase().as_str() {
                    "circular" | "circle" | "circlepolar" | "0" => GeometryKind::Circular,
                    "shafranov" | "1" => GeometryKind::Shafranov,
                    "czarny" | "2" => GeometryKind::Czarny,
                    _ => return Err(bad(key, format!("unknown geometry `{v}`"))),
                }
            }
            "alpha_jump" => self.alpha_jump = parse_positive(key, v)?,
            "kappa_eps" => {
                self.kappa_eps = if v.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "delta_e" => {
                self.delta_e = if v.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "problem" => {
                self.problem = match v.to_ascii_lowercase().as_str() {
                    "polar" | "0" => ProblemKind::Polar,
                    "constant" | "1" => ProblemKind::Constant,
                    _ => return Err(bad(key, format!("unknown problem `{v}`"))),
                }
            }
            "alpha_coeff" => {
                self.alpha_coeff = match v.to_ascii_lowercase().as_str() {
                    "poisson" | "0" => AlphaKind::Poisson,
                    "zoni" | "1" => AlphaKind::Zoni,
                    _ => return Err(bad(key, format!("unknown profile `{v}`"))),
                }
            }
            "beta_coeff" => {
                self.beta_coeff = match v.to_ascii_lowercase().as_str() {
                    "zero" | "0" => BetaKind::Zero,
                    "inverse-alpha" | "inverse_alpha" | "1" => BetaKind::InverseAlpha,
                    _ => return Err(bad(key, format!("unknown profile `{v}`"))),
                }
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Textual value of one key, in the form accepted by [`Self::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "verbose" => self.verbose.to_string(),
            "paraview" => self.paraview.to_string(),
            "maxOpenMPThreads" => self.max_threads.to_string(),
            "stencilDistributionMethod" => match self.stencil_mode {
                StencilMode::Take => "take".into(),
                StencilMode::Give => "give".into(),
            },
            "cacheProfileCoefficients" => self.cache_profile.to_string(),
            "cacheDomainGeometry" => self.cache_geometry.to_string(),
            "DirBC_Interior" => self.dirichlet_interior.to_string(),
            "R0" => opt_string(&self.r0),
            "Rmax" => self.rmax.to_string(),
            "nr_exp" => self.nr_exp.to_string(),
            "ntheta_exp" => self.ntheta_exp.to_string(),
            "nr" => opt_string(&self.nr),
            "ntheta" => opt_string(&self.ntheta),
            "anisotropic_factor" => self.anisotropic_factor.to_string(),
            "divideBy2" => self.divide_by_2.to_string(),
            "FMG" => self.fmg.to_string(),
            "FMG_iterations" => self.fmg_iterations.to_string(),
            "FMG_cycle" => self.fmg_cycle.name().into(),
            "extrapolation" => if self.extrapolation {
                "implicit"
            } else {
                "none"
            }
            .into(),
            "maxLevels" => opt_string(&self.max_levels),
            "preSmoothingSteps" => self.pre_smoothing.to_string(),
            "postSmoothingSteps" => self.post_smoothing.to_string(),
            "multigridCycle" => self.cycle.name().into(),
            "residualNormType" => self.norm.name().into(),
            "maxIterations" => self.max_iterations.to_string(),
            "absoluteTolerance" => opt_string(&self.absolute_tolerance),
            "relativeTolerance" => opt_string(&self.relative_tolerance),
            "geometry" => format!("{:?}", self.geometry).to_lowercase(),
            "alpha_jump" => self.alpha_jump.to_string(),
            "kappa_eps" => opt_string(&self.kappa_eps),
            "delta_e" => opt_string(&self.delta_e),
            "problem" => format!("{:?}", self.problem).to_lowercase(),
            "alpha_coeff" => format!("{:?}", self.alpha_coeff).to_lowercase(),
            "beta_coeff" => match self.beta_coeff {
                BetaKind::Zero => "zero".into(),
                BetaKind::InverseAlpha => "inverse-alpha".into(),
            },
            _ => return None,
        };
        Some(s)
    }

    /// Parses `key = value` lines; `#` starts a comment. Later lines win.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                bad(
                    line.split_whitespace().next().unwrap_or(line),
                    format!("line {} is not of the form `key = value`", lineno + 1),
                )
            })?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every key with its value, one per line, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).unwrap());
        }
        s
    }

    /// Checks cross-key consistency.
    pub fn validate(&self) -> Result<()> {
        let r0 = self.r0_value();
        if r0 >= self.rmax {
            return Err(bad("R0", format!("must be below Rmax = {}", self.rmax)));
        }
        if self.pre_smoothing + self.post_smoothing == 0 {
            return Err(bad(
                "preSmoothingSteps",
                "pre- plus post-smoothing steps must be at least 1",
            ));
        }
        if self.fmg && self.fmg_iterations == 0 {
            return Err(bad(
                "FMG_iterations",
                "must be at least 1 when FMG is enabled",
            ));
        }
        if let Some(nr) = self.nr {
            if nr < 3 || nr % 2 == 0 {
                return Err(bad("nr", format!("must be odd and at least 3, got {nr}")));
            }
        }
        if let Some(nt) = self.ntheta {
            if nt < 4 || nt % 2 == 1 {
                return Err(bad(
                    "ntheta",
                    format!("must be even and at least 4, got {nt}"),
                ));
            }
        }
        if self.nr_exp > 24 || self.ntheta_exp > 24 {
            return Err(bad("nr_exp", "exponents above 24 are not supported"));
        }
        if self.ntheta.is_none() && self.ntheta_exp < 2 {
            return Err(bad("ntheta_exp", "must be at least 2"));
        }
        if self.nr.is_none() && self.nr_exp < 1 {
            return Err(bad("nr_exp", "must be at least 1"));
        }
        if self.alpha_jump >= 1.0 {
            return Err(bad("alpha_jump", "must lie strictly between 0 and 1"));
        }
        let (ke, _) = self.shape_parameters();
        match self.geometry {
            GeometryKind::Shafranov if ke <= -1.0 || ke >= 1.0 => {
                Err(bad("kappa_eps", "elongation must lie in (-1, 1)"))
            }
            GeometryKind::Czarny if ke <= 0.0 || 1.0 + ke * (ke - 2.0 * self.rmax) <= 0.0 => Err(
                bad("kappa_eps", "inverse aspect ratio too large for this Rmax"),
            ),
            _ => Ok(()),
        }
    }

    /// Innermost radius, resolving `auto`.
    pub fn r0_value(&self) -> f64 {
        self.r0.unwrap_or(if self.dirichlet_interior {
            1e-2 * self.rmax
        } else {
            1e-5 * self.rmax
        })
    }

    pub fn grid_params(&self) -> GridParams {
        let mut p =
            GridParams::from_exponents(self.r0_value(), self.rmax, self.nr_exp, self.ntheta_exp);
        if let Some(nr) = self.nr {
            p.nr = nr;
        }
        if let Some(nt) = self.ntheta {
            p.ntheta = nt;
        }
        p.anisotropic_factor = self.anisotropic_factor;
        p.divide_by_2 = self.divide_by_2;
        p
    }

    /// `(kappa_eps, delta_e)` with geometry defaults filled in.
    pub fn shape_parameters(&self) -> (f64, f64) {
        let (k, d) = match self.geometry {
            GeometryKind::Czarny => (0.3, 1.4),
            _ => (0.3, 0.2),
        };
        (self.kappa_eps.unwrap_or(k), self.delta_e.unwrap_or(d))
    }

    pub fn geometry(&self) -> Geometry {
        let (ke, de) = self.shape_parameters();
        match self.geometry {
            GeometryKind::Circular => Geometry::CirclePolar,
            GeometryKind::Shafranov => Geometry::shafranov(ke, de),
            GeometryKind::Czarny => Geometry::czarny(ke, de),
        }
    }

    pub fn problem_case(&self) -> ProblemCase {
        let alpha = match self.alpha_coeff {
            AlphaKind::Poisson => AlphaProfile::Poisson,
            AlphaKind::Zoni => AlphaProfile::Zoni {
                r_p: self.alpha_jump,
                delta_r: ZONI_DELTA_R,
            },
        };
        let beta = match self.beta_coeff {
            BetaKind::Zero => BetaProfile::Zero,
            BetaKind::InverseAlpha => BetaProfile::InverseAlpha,
        };
        let kind = match self.problem {
            ProblemKind::Polar => SolutionKind::PolarOscillation,
            ProblemKind::Constant => SolutionKind::ConstantSource,
        };
        ProblemCase::new(alpha, beta, self.rmax, kind)
    }

    pub fn inner_boundary(&self) -> InnerBoundary {
        if self.dirichlet_interior {
            InnerBoundary::Dirichlet
        } else {
            InnerBoundary::AcrossOrigin
        }
    }

    /// Take mode always keeps the geometry arrays.
    pub fn cache_policy(&self) -> CachePolicy {
        CachePolicy {
            profile: self.cache_profile,
            geometry: self.cache_geometry || self.stencil_mode == StencilMode::Take,
        }
    }

    pub fn cycle_options(&self) -> CycleOptions {
        CycleOptions {
            cycle: self.cycle,
            pre_smoothing: self.pre_smoothing,
            post_smoothing: self.post_smoothing,
            mode: self.stencil_mode,
            extrapolation: self.extrapolation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = SolverConfig::default();
        assert_eq!(SolverConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn every_key_is_readable_and_writable() {
        let c = SolverConfig::default();
        for k in KEYS {
            let mut d = SolverConfig::default();
            d.set(k, &c.get(k).unwrap()).unwrap();
            assert_eq!(d, c, "{k}");
        }
    }

    #[test]
    fn non_default_round_trip() {
        let text = "geometry = shafranov\nR0 = 0.013\nnr = 49\nntheta = 64\nmaxLevels = 3\n\
                    stencilDistributionMethod = take\nextrapolation = implicit\n\
                    absoluteTolerance = 1e-12\nrelativeTolerance = none\nmultigridCycle = W\n";
        let c = SolverConfig::parse(text).unwrap();
        assert_eq!(c.geometry, GeometryKind::Shafranov);
        assert_eq!(c.nr, Some(49));
        assert_eq!(c.max_levels, Some(3));
        assert_eq!(c.relative_tolerance, None);
        assert_eq!(SolverConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_key() {
        let e = SolverConfig::parse("geometry = torus").unwrap_err();
        assert!(
            matches!(&e, Error::Config { key, .. } if key == "geometry"),
            "{e}"
        );
        assert!(e.to_string().contains("geometry"));
        let e = SolverConfig::parse("colour = red").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "colour"));
        let e = SolverConfig::parse("Rmax = -1").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "Rmax"));
        let e = SolverConfig::parse("nr = 48").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "nr"));
    }

    #[test]
    fn auto_r0_depends_on_the_inner_boundary() {
        let mut c = SolverConfig::default();
        assert!((c.r0_value() - 1.3e-5).abs() < 1e-18);
        c.dirichlet_interior = true;
        assert!((c.r0_value() - 1.3e-2).abs() < 1e-15);
    }

    #[test]
    fn take_forces_the_geometry_cache() {
        let mut c = SolverConfig::default();
        c.stencil_mode = StencilMode::Take;
        assert!(c.cache_policy().geometry);
    }
}
