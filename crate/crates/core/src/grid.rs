//! Tensor-product polar grids and the smoother-aligned node numbering.
//!
//! Radii are indexed by `i` (`0..nr`), angles by `j` (`0..ntheta`, periodic).
//! Every node vector in this crate is stored in the smoother-aligned order
//! produced by [`Numbering`]: circle-smoothed rings first (ring by ring,
//! angle-major inside a ring), then radial spokes (spoke by spoke, radius-major
//! inside a spoke).

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::smoother::split_smoother_regions;

/// Relative tolerance applied to spacing comparisons for the pairing constraint.
const PAIRING_RTOL: f64 = 1e-10;

/// Lower edge of the anisotropic refinement window, as a fraction of `Rmax`.
pub const REFINEMENT_WINDOW_LO: f64 = 0.6;
/// Upper edge of the anisotropic refinement window, as a fraction of `Rmax`.
pub const REFINEMENT_WINDOW_HI: f64 = 0.8;

/// Parameters of a tensor-product polar grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub r0: f64,
    pub rmax: f64,
    /// Number of radii of the uniform base grid (odd).
    pub nr: usize,
    /// Number of angles of the uniform base grid (even).
    pub ntheta: usize,
    /// Number of pair-halving passes inside the refinement window.
    pub anisotropic_factor: usize,
    /// Number of global uniform refinements applied last.
    pub divide_by_2: usize,
}

impl GridParams {
    pub fn uniform(r0: f64, rmax: f64, nr: usize, ntheta: usize) -> Self {
        Self {
            r0,
            rmax,
            nr,
            ntheta,
            anisotropic_factor: 0,
            divide_by_2: 0,
        }
    }

    /// Base sizes `nr = 2^nr_exp + 1`, `ntheta = 2^ntheta_exp`.
    pub fn from_exponents(r0: f64, rmax: f64, nr_exp: u32, ntheta_exp: u32) -> Self {
        Self::uniform(r0, rmax, (1usize << nr_exp) + 1, 1usize << ntheta_exp)
    }
}

/// Bijection between node coordinates `(i, j)` and flat storage indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Numbering {
    nr: usize,
    ntheta: usize,
    split: usize,
}

impl Numbering {
    /// `split` is the first ring handled by the radial smoother (`0..=nr`).
    pub fn new(nr: usize, ntheta: usize, split: usize) -> Self {
        assert!(split <= nr, "split index {split} exceeds ring count {nr}");
        Self { nr, ntheta, split }
    }

    #[inline]
    pub fn nr(&self) -> usize {
        self.nr
    }

    #[inline]
    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    #[inline]
    pub fn split(&self) -> usize {
        self.split
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nr * self.ntheta
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of one radial line.
    #[inline]
    pub fn spoke_len(&self) -> usize {
        self.nr - self.split
    }

    /// Number of nodes stored in the circle block.
    #[inline]
    pub fn circle_block_len(&self) -> usize {
        self.split * self.ntheta
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nr && j < self.ntheta);
        if i < self.split {
            i * self.ntheta + j
        } else {
            self.split * self.ntheta + j * (self.nr - self.split) + (i - self.split)
        }
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        debug_assert!(index < self.len());
        let circle = self.split * self.ntheta;
        if index < circle {
            (index / self.ntheta, index % self.ntheta)
        } else {
            let rest = index - circle;
            let len = self.nr - self.split;
            (self.split + rest % len, rest / len)
        }
    }
}

/// Nonuniform tensor-product polar mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    radii: Vec<f64>,
    angles: Vec<f64>,
    radial_spacings: Vec<f64>,
    angular_spacings: Vec<f64>,
    numbering: Numbering,
}

impl PolarGrid {
    /// Builds the grid described by `params`: uniform base grid, anisotropic
    /// pair halving inside `[0.6, 0.8]·Rmax`, then `divide_by_2` global refinements.
    pub fn build(params: &GridParams) -> Result<Self> {
        if !(params.r0 > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "R0 must be positive for an invertible mapping, got {}",
                params.r0
            )));
        }
        if !(params.rmax > params.r0) {
            return Err(Error::InvalidGrid(format!(
                "Rmax ({}) must exceed R0 ({})",
                params.rmax, params.r0
            )));
        }
        if params.nr < 3 || params.nr.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "radial node count must be odd and at least 3, got {}",
                params.nr
            )));
        }
        if params.ntheta < 4 || params.ntheta % 2 == 1 {
            return Err(Error::InvalidGrid(format!(
                "angular node count must be even and at least 4, got {}",
                params.ntheta
            )));
        }
        let span = params.rmax - params.r0;
        let last = params.nr - 1;
        let mut radii: Vec<f64> = (0..params.nr)
            .map(|i| {
                if i == last {
                    params.rmax
                } else {
                    params.r0 + span * i as f64 / last as f64
                }
            })
            .collect();
        let mut angles: Vec<f64> = (0..params.ntheta)
            .map(|j| 2.0 * PI * j as f64 / params.ntheta as f64)
            .collect();

        let lo = REFINEMENT_WINDOW_LO * params.rmax;
        let hi = REFINEMENT_WINDOW_HI * params.rmax;
        for _ in 0..params.anisotropic_factor {
            radii = halve_pairs_in_window(&radii, lo, hi);
        }
        for _ in 0..params.divide_by_2 {
            radii = halve_all(&radii);
            angles = halve_all_periodic(&angles);
        }
        Self::from_coordinates(radii, angles)
    }

    /// Builds a grid from explicit coordinates, checking every invariant.
    pub fn from_coordinates(radii: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        let grid = Self::assemble(radii, angles)?;
        grid.check_pairing()?;
        Ok(grid)
    }

    /// Like [`PolarGrid::from_coordinates`] but without the parity and pairing
    /// checks; used for coarse levels and demonstration grids.
    pub fn from_coordinates_unpaired(radii: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        Self::assemble(radii, angles)
    }

    fn assemble(radii: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 || angles.len() < 4 || angles.len() % 2 == 1 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 radii and an even number (>= 4) of angles, got {}x{}",
                radii.len(),
                angles.len()
            )));
        }
        if !(radii[0] > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "innermost radius must be positive, got {}",
                radii[0]
            )));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid(
                "radii must be strictly increasing".into(),
            ));
        }
        if angles[0] != 0.0 {
            return Err(Error::InvalidGrid("first angle must be 0".into()));
        }
        if angles.windows(2).any(|w| !(w[1] > w[0])) || *angles.last().unwrap() >= 2.0 * PI {
            return Err(Error::InvalidGrid(
                "angles must be strictly increasing in [0, 2pi)".into(),
            ));
        }
        let radial_spacings: Vec<f64> = radii.windows(2).map(|w| w[1] - w[0]).collect();
        let ntheta = angles.len();
        let angular_spacings: Vec<f64> = (0..ntheta)
            .map(|j| {
                if j + 1 < ntheta {
                    angles[j + 1] - angles[j]
                } else {
                    2.0 * PI - angles[j]
                }
            })
            .collect();
        let split = split_smoother_regions(&radii, &angular_spacings)?;
        let numbering = Numbering::new(radii.len(), ntheta, split);
        Ok(Self {
            radii,
            angles,
            radial_spacings,
            angular_spacings,
            numbering,
        })
    }

    fn check_pairing(&self) -> Result<()> {
        let nr = self.nr();
        if nr.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_r must be odd, got {nr}")));
        }
        let scale = self.rmax();
        for pair in self.radial_spacings.chunks(2) {
            if (pair[0] - pair[1]).abs() > PAIRING_RTOL * scale {
                return Err(Error::InvalidGrid(format!(
                    "radial spacing pair ({}, {}) violates the pairing constraint",
                    pair[0], pair[1]
                )));
            }
        }
        for pair in self.angular_spacings.chunks(2) {
            if (pair[0] - pair[1]).abs() > PAIRING_RTOL * 2.0 * PI {
                return Err(Error::InvalidGrid(format!(
                    "angular spacing pair ({}, {}) violates the pairing constraint",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }

    /// Returns true if the grid satisfies the parity and spacing-pair constraint.
    pub fn is_paired(&self) -> bool {
        self.check_pairing().is_ok()
    }

    #[inline]
    pub fn nr(&self) -> usize {
        self.radii.len()
    }

    #[inline]
    pub fn ntheta(&self) -> usize {
        self.angles.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nr() * self.ntheta()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    #[inline]
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    #[inline]
    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    #[inline]
    pub fn angle(&self, j: usize) -> f64 {
        self.angles[j]
    }

    #[inline]
    pub fn r0(&self) -> f64 {
        self.radii[0]
    }

    #[inline]
    pub fn rmax(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// `h_i = r_{i+1} - r_i`.
    #[inline]
    pub fn h(&self, i: usize) -> f64 {
        self.radial_spacings[i]
    }

    /// `k_j = theta_{j+1} - theta_j`, with wraparound for the last angle.
    #[inline]
    pub fn k(&self, j: usize) -> f64 {
        self.angular_spacings[j]
    }

    pub fn radial_spacings(&self) -> &[f64] {
        &self.radial_spacings
    }

    pub fn angular_spacings(&self) -> &[f64] {
        &self.angular_spacings
    }

    #[inline]
    pub fn numbering(&self) -> &Numbering {
        &self.numbering
    }

    /// First ring treated by the radial smoother.
    #[inline]
    pub fn smoother_split_index(&self) -> usize {
        self.numbering.split
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        self.numbering.index(i, j)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        self.numbering.coords(index)
    }

    #[inline]
    pub fn next_angle(&self, j: usize) -> usize {
        if j + 1 == self.ntheta() {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub fn prev_angle(&self, j: usize) -> usize {
        if j == 0 {
            self.ntheta() - 1
        } else {
            j - 1
        }
    }

    /// Angle index diametrically opposite to `j`.
    #[inline]
    pub fn antipode(&self, j: usize) -> usize {
        let half = self.ntheta() / 2;
        if j < half {
            j + half
        } else {
            j - half
        }
    }

    /// Checks whether this grid can be coarsened once more.
    pub fn can_coarsen(&self) -> std::result::Result<(), &'static str> {
        let nr = self.nr();
        let nt = self.ntheta();
        if nr.is_multiple_of(2) {
            return Err("n_r is even");
        }
        if nt % 2 == 1 {
            return Err("n_theta is odd");
        }
        let nrc = nr.div_ceil(2);
        let ntc = nt / 2;
        if ntc % 2 == 1 {
            return Err("coarse n_theta would be odd");
        }
        if nrc < 5 {
            return Err("coarse n_r would drop below 5");
        }
        if ntc < 4 {
            return Err("coarse n_theta would drop below 4");
        }
        Ok(())
    }

    /// Standard coarsening: keeps every second radius (both endpoints) and
    /// every second angle starting at 0.
    pub fn coarsen(&self) -> Result<PolarGrid> {
        self.can_coarsen().map_err(|reason| Error::CannotCoarsen {
            nr: self.nr(),
            ntheta: self.ntheta(),
            reason,
        })?;
        let radii = self.radii.iter().step_by(2).copied().collect();
        let angles = self.angles.iter().step_by(2).copied().collect();
        PolarGrid::from_coordinates_unpaired(radii, angles)
    }

    /// Repeatedly coarsens until the stop rule triggers or `max_levels` grids exist.
    pub fn level_chain(&self, max_levels: Option<usize>) -> Vec<PolarGrid> {
        let cap = max_levels.unwrap_or(usize::MAX).max(1);
        let mut chain = vec![self.clone()];
        while chain.len() < cap {
            match chain.last().unwrap().coarsen() {
                Ok(coarse) => chain.push(coarse),
                Err(_) => break,
            }
        }
        chain
    }

    /// Plain-text dump with two columns: radii and angles.
    pub fn dump_columns(&self) -> String {
        let mut out = String::from("# radius angle\n");
        let rows = self.nr().max(self.ntheta());
        for row in 0..rows {
            let r = self.radii.get(row).map(|v| format!("{v:.17e}"));
            let t = self.angles.get(row).map(|v| format!("{v:.17e}"));
            let _ = writeln!(
                out,
                "{} {}",
                r.unwrap_or_else(|| "-".into()),
                t.unwrap_or_else(|| "-".into())
            );
        }
        out
    }
}

fn halve_all(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * values.len() - 1);
    for w in values.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*values.last().unwrap());
    out
}

fn halve_all_periodic(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * angles.len());
    for (j, &t) in angles.iter().enumerate() {
        let next = angles.get(j + 1).copied().unwrap_or(2.0 * PI);
        out.push(t);
        out.push(0.5 * (t + next));
    }
    out
}

/// Halves both intervals of every spacing pair `(r_{2m}, r_{2m+2})` that lies
/// entirely inside `[lo, hi]`; node parity and pairing are preserved.
fn halve_pairs_in_window(radii: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(radii.len() * 2);
    let pairs = (radii.len() - 1) / 2;
    for m in 0..pairs {
        let (a, b, c) = (radii[2 * m], radii[2 * m + 1], radii[2 * m + 2]);
        out.push(a);
        if a >= lo && c <= hi {
            out.push(0.5 * (a + b));
            out.push(b);
            out.push(0.5 * (b + c));
        } else {
            out.push(b);
        }
    }
    out.push(*radii.last().unwrap());
    out
}
