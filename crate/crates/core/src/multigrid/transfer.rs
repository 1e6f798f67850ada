//! Bilinear prolongation between a fine grid and its standard coarsening,
//! its exact transpose, and injection.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::grid::PolarGrid;

/// Interpolation stencil of one fine coordinate: `(coarse lo, w lo, coarse hi, w hi)`.
/// Coincident fine coordinates use `lo == hi` with weights `(1, 0)`.
type Weights1d = (usize, f64, usize, f64);

/// Intergrid transfer for one conforming level pair.
#[derive(Debug, Clone)]
pub struct Transfer {
    fine: PolarGrid,
    coarse: PolarGrid,
    radial: Vec<Weights1d>,
    angular: Vec<Weights1d>,
}

impl Transfer {
    /// `coarse` must be the standard coarsening of `fine`.
    pub fn new(fine: &PolarGrid, coarse: &PolarGrid) -> Result<Self> {
        let conforming = coarse.nr() == fine.nr().div_ceil(2)
            && fine.nr() % 2 == 1
            && coarse.ntheta() * 2 == fine.ntheta()
            && coarse
                .radii()
                .iter()
                .zip(fine.radii().iter().step_by(2))
                .all(|(a, b)| a == b)
            && coarse
                .angles()
                .iter()
                .zip(fine.angles().iter().step_by(2))
                .all(|(a, b)| a == b);
        if !conforming {
            return Err(Error::Dimension(format!(
                "{}x{} grid is not the coarsening of {}x{}",
                coarse.nr(),
                coarse.ntheta(),
                fine.nr(),
                fine.ntheta()
            )));
        }
        let radial = (0..fine.nr())
            .map(|i| {
                if i % 2 == 0 {
                    (i / 2, 1.0, i / 2, 0.0)
                } else {
                    let (hl, hh) = (fine.h(i - 1), fine.h(i));
                    (i / 2, hh / (hl + hh), i / 2 + 1, hl / (hl + hh))
                }
            })
            .collect();
        let ntc = coarse.ntheta();
        let angular = (0..fine.ntheta())
            .map(|j| {
                if j % 2 == 0 {
                    (j / 2, 1.0, j / 2, 0.0)
                } else {
                    let (kl, kh) = (fine.k(j - 1), fine.k(j));
                    (j / 2, kh / (kl + kh), (j / 2 + 1) % ntc, kl / (kl + kh))
                }
            })
            .collect();
        Ok(Self {
            fine: fine.clone(),
            coarse: coarse.clone(),
            radial,
            angular,
        })
    }

    pub fn fine(&self) -> &PolarGrid {
        &self.fine
    }

    pub fn coarse(&self) -> &PolarGrid {
        &self.coarse
    }

    /// `fine = P coarse`.
    pub fn prolongate(&self, coarse: &[f64], fine: &mut [f64]) -> Result<()> {
        check_len("coarse vector", coarse.len(), self.coarse.len())?;
        check_len("fine vector", fine.len(), self.fine.len())?;
        let (fg, cg) = (&self.fine, &self.coarse);
        fine.par_iter_mut().enumerate().for_each(|(p, out)| {
            let (i, j) = fg.coords(p);
            let (rl, wrl, rh, wrh) = self.radial[i];
            let (tl, wtl, th, wth) = self.angular[j];
            let mut v = wrl * wtl * coarse[cg.index(rl, tl)];
            if wth != 0.0 {
                v += wrl * wth * coarse[cg.index(rl, th)];
            }
            if wrh != 0.0 {
                v += wrh * wtl * coarse[cg.index(rh, tl)];
                if wth != 0.0 {
                    v += wrh * wth * coarse[cg.index(rh, th)];
                }
            }
            *out = v;
        });
        Ok(())
    }

    /// `fine += P coarse`.
    pub fn prolongate_add(&self, coarse: &[f64], fine: &mut [f64], tmp: &mut [f64]) -> Result<()> {
        self.prolongate(coarse, tmp)?;
        fine.par_iter_mut()
            .zip(tmp.par_iter())
            .for_each(|(f, t)| *f += t);
        Ok(())
    }

    /// `coarse = P^T fine`, evaluated as a gather over each coarse node's
    /// fine neighbourhood.
    pub fn restrict(&self, fine: &[f64], coarse: &mut [f64]) -> Result<()> {
        check_len("fine vector", fine.len(), self.fine.len())?;
        check_len("coarse vector", coarse.len(), self.coarse.len())?;
        let (fg, cg) = (&self.fine, &self.coarse);
        let (nr, nt) = (fg.nr(), fg.ntheta());
        coarse.par_iter_mut().enumerate().for_each(|(q, out)| {
            let (ic, jc) = cg.coords(q);
            let mut rs = [(2 * ic, 1.0); 3];
            let mut nrs = 1;
            if ic > 0 {
                rs[nrs] = (2 * ic - 1, self.radial[2 * ic - 1].3);
                nrs += 1;
            }
            if 2 * ic + 1 < nr {
                rs[nrs] = (2 * ic + 1, self.radial[2 * ic + 1].1);
                nrs += 1;
            }
            let jm = if jc == 0 { nt - 1 } else { 2 * jc - 1 };
            let ts = [
                (2 * jc, 1.0),
                (jm, self.angular[jm].3),
                (2 * jc + 1, self.angular[2 * jc + 1].1),
            ];
            let mut v = 0.0;
            for &(i, wr) in &rs[..nrs] {
                for &(j, wt) in &ts {
                    v += wr * wt * fine[fg.index(i, j)];
                }
            }
            *out = v;
        });
        Ok(())
    }

    /// Samples `fine` at the coarse nodes.
    pub fn inject(&self, fine: &[f64], coarse: &mut [f64]) -> Result<()> {
        check_len("fine vector", fine.len(), self.fine.len())?;
        check_len("coarse vector", coarse.len(), self.coarse.len())?;
        let (fg, cg) = (&self.fine, &self.coarse);
        coarse.par_iter_mut().enumerate().for_each(|(q, out)| {
            let (ic, jc) = cg.coords(q);
            *out = fine[fg.index(2 * ic, 2 * jc)];
        });
        Ok(())
    }

    /// Entries held by the 1D weight tables.
    pub fn stored_entries(&self) -> usize {
        2 * (self.radial.len() + self.angular.len())
    }
}
