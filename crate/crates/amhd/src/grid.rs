//! Periodic box discretization.
//!
//! The box [0,l1) x [0,l2) x [0,l3) is sampled on n1 x n2 x n3 uniform
//! points. Along axis i the resolved integer frequencies are
//! -ni/2+1 ..= ni/2, stored in standard FFT order (0, 1, ..., ni/2,
//! -ni/2+1, ..., -1); physical wavenumbers are 2*pi/li times the integer.
//! Axis 3 is the distinguished "vertical" direction: the horizontal
//! Laplacian acts on axes 1 and 2 only.
//!
//! Dealiasing keeps the modes with |mi| <= floor(ni/3) on every axis. A
//! product of two retained modes reaches 2*floor(ni/3); on an ni-point axis
//! its aliased image lands at |m| >= ni - 2*floor(ni/3), which stays outside
//! the retained band unless ni is divisible by 3, where it can land exactly
//! on the band edge. Grids with such an axis therefore carry a slightly
//! enlarged companion grid on which pointwise products are evaluated, making
//! retained-mode products exact on every grid size.

use crate::error::{Error, Result};
use crate::fft::Fft3;
use rustfft::num_complex::Complex64;
use std::sync::Arc;

pub struct Grid {
    n: [usize; 3],
    l: [f64; 3],
    volume: f64,
    /// Physical wavenumber tables, Nyquist at +ni/2.
    k: [Vec<f64>; 3],
    /// Wavenumber tables for odd-order multipliers; the Nyquist entry is
    /// zero so first derivatives of real fields stay real. (The discarded
    /// Nyquist sine component samples to zero on the grid anyway.)
    k_deriv: [Vec<f64>; 3],
    /// Integer frequency tables.
    kint: [Vec<i64>; 3],
    /// Dealiasing band edge floor(ni/3) per axis.
    kmax: [i64; 3],
    mask: Vec<bool>,
    fft: Fft3,
    /// Companion grid products are evaluated on when some axis is divisible
    /// by 3. A full grid, so callers can batch several operations there and
    /// restrict once at the end.
    pad: Option<Arc<Grid>>,
}

fn freq_tables(n: usize, l: f64) -> (Vec<i64>, Vec<f64>, Vec<f64>) {
    let base = 2.0 * std::f64::consts::PI / l;
    let mut ints = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut kd = Vec::with_capacity(n);
    for j in 0..n {
        let m = if j <= n / 2 { j as i64 } else { j as i64 - n as i64 };
        ints.push(m);
        k.push(m as f64 * base);
        kd.push(if j == n / 2 { 0.0 } else { m as f64 * base });
    }
    (ints, k, kd)
}

impl Grid {
    pub fn new(n: [usize; 3], l: [f64; 3]) -> Result<Grid> {
        for (i, &ni) in n.iter().enumerate() {
            if ni < 4 || ni % 2 != 0 {
                return Err(Error::Grid(format!(
                    "n{} = {ni}: axis sizes must be even and at least 4",
                    i + 1
                )));
            }
        }
        for (i, &li) in l.iter().enumerate() {
            if !(li > 0.0) || !li.is_finite() {
                return Err(Error::Grid(format!(
                    "l{} = {li}: box lengths must be positive and finite",
                    i + 1
                )));
            }
        }

        let (i1, k1, d1) = freq_tables(n[0], l[0]);
        let (i2, k2, d2) = freq_tables(n[1], l[1]);
        let (i3, k3, d3) = freq_tables(n[2], l[2]);
        let kint = [i1, i2, i3];
        let kmax = [
            (n[0] / 3) as i64,
            (n[1] / 3) as i64,
            (n[2] / 3) as i64,
        ];

        let mut mask = vec![false; n[0] * n[1] * n[2]];
        let mut idx = 0;
        for m1 in kint[0].iter() {
            for m2 in kint[1].iter() {
                for m3 in kint[2].iter() {
                    mask[idx] =
                        m1.abs() <= kmax[0] && m2.abs() <= kmax[1] && m3.abs() <= kmax[2];
                    idx += 1;
                }
            }
        }

        // Enlarge only axes whose band-edge products alias onto the band.
        let np: Vec<usize> = n
            .iter()
            .map(|&ni| if ni % 3 == 0 { ni + 4 } else { ni })
            .collect();
        // A padded axis has np = ni + 4 = 1 mod 3, so the companion never
        // needs a companion of its own.
        let pad = if np != n {
            Some(Arc::new(Grid::new([np[0], np[1], np[2]], l)?))
        } else {
            None
        };

        Ok(Grid {
            n,
            l,
            volume: l[0] * l[1] * l[2],
            k: [k1, k2, k3],
            k_deriv: [d1, d2, d3],
            kint,
            kmax,
            mask,
            fft: Fft3::new(n[0], n[1], n[2]),
            pad,
        })
    }

    /// Cube of side 2*pi, the natural torus for unit wavenumbers.
    pub fn cubic(n: usize) -> Result<Grid> {
        let two_pi = 2.0 * std::f64::consts::PI;
        Grid::new([n, n, n], [two_pi, two_pi, two_pi])
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn l(&self) -> [f64; 3] {
        self.l
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn min_dx(&self) -> f64 {
        (0..3).map(|i| self.l[i] / self.n[i] as f64).fold(f64::INFINITY, f64::min)
    }

    /// Flat index of the sample (i1, i2, i3); x3 varies fastest.
    #[inline]
    pub fn idx(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n[1] + i2) * self.n[2] + i3
    }

    /// Physical wavenumber along `axis` at FFT position `j`.
    pub fn wavenumber(&self, axis: usize, j: usize) -> f64 {
        self.k[axis][j]
    }

    pub fn k_table(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    pub fn k_deriv_table(&self, axis: usize) -> &[f64] {
        &self.k_deriv[axis]
    }

    pub fn int_freq_table(&self, axis: usize) -> &[i64] {
        &self.kint[axis]
    }

    /// Dealiasing band edge floor(ni/3), as an integer frequency.
    pub fn dealias_kmax(&self, axis: usize) -> i64 {
        self.kmax[axis]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    /// Grid sample coordinates along `axis` at position `j`.
    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        self.l[axis] * j as f64 / self.n[axis] as f64
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.n == other.n && self.l == other.l
    }

    /// Zero every mode outside the dealiasing band.
    pub fn apply_mask(&self, spec: &mut [Complex64]) {
        debug_assert_eq!(spec.len(), self.len());
        for (v, &keep) in spec.iter_mut().zip(self.mask.iter()) {
            if !keep {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// The enlarged grid quadratic work runs on, if this grid needs one.
    pub fn companion(&self) -> Option<&Arc<Grid>> {
        self.pad.as_ref()
    }

    /// Pointwise product of two spectra's band-limited parts, exact on the
    /// retained band. Inputs are masked copies; the multiplication runs on
    /// the companion grid when one is needed.
    pub fn banded_product(&self, f: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
        match &self.pad {
            None => {
                let fs = self.masked_samples(f);
                let gs = self.masked_samples(g);
                let prod: Vec<f64> = fs.iter().zip(gs.iter()).map(|(a, b)| a * b).collect();
                let mut spec = self.fft.forward(&prod);
                self.apply_mask(&mut spec);
                spec
            }
            Some(pad) => {
                let fs = pad.fft.inverse(&self.embed(pad, f));
                let gs = pad.fft.inverse(&self.embed(pad, g));
                let prod: Vec<f64> = fs.iter().zip(gs.iter()).map(|(a, b)| a * b).collect();
                self.restrict(pad, &pad.fft.forward(&prod))
            }
        }
    }

    fn masked_samples(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut s = spec.to_vec();
        self.apply_mask(&mut s);
        self.fft.inverse(&s)
    }

    /// Copy the retained band into the companion grid's spectrum layout.
    pub(crate) fn embed(&self, pad: &Grid, spec: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); pad.n[0] * pad.n[1] * pad.n[2]];
        let [n1, n2, n3] = self.n;
        let [p1, p2, p3] = pad.n;
        for j1 in 0..n1 {
            let m1 = self.kint[0][j1];
            if m1.abs() > self.kmax[0] {
                continue;
            }
            let q1 = if m1 >= 0 { m1 as usize } else { (p1 as i64 + m1) as usize };
            for j2 in 0..n2 {
                let m2 = self.kint[1][j2];
                if m2.abs() > self.kmax[1] {
                    continue;
                }
                let q2 = if m2 >= 0 { m2 as usize } else { (p2 as i64 + m2) as usize };
                let src = (j1 * n2 + j2) * n3;
                let dst = (q1 * p2 + q2) * p3;
                for j3 in 0..n3 {
                    let m3 = self.kint[2][j3];
                    if m3.abs() > self.kmax[2] {
                        continue;
                    }
                    let q3 = if m3 >= 0 { m3 as usize } else { (p3 as i64 + m3) as usize };
                    out[dst + q3] = spec[src + j3];
                }
            }
        }
        out
    }

    /// Pull the retained band back out of a companion-grid spectrum.
    pub(crate) fn restrict(&self, pad: &Grid, spec: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.len()];
        let [n1, n2, n3] = self.n;
        let [p1, p2, p3] = pad.n;
        for j1 in 0..n1 {
            let m1 = self.kint[0][j1];
            if m1.abs() > self.kmax[0] {
                continue;
            }
            let q1 = if m1 >= 0 { m1 as usize } else { (p1 as i64 + m1) as usize };
            for j2 in 0..n2 {
                let m2 = self.kint[1][j2];
                if m2.abs() > self.kmax[1] {
                    continue;
                }
                let q2 = if m2 >= 0 { m2 as usize } else { (p2 as i64 + m2) as usize };
                let dst = (j1 * n2 + j2) * n3;
                let src = (q1 * p2 + q2) * p3;
                for j3 in 0..n3 {
                    let m3 = self.kint[2][j3];
                    if m3.abs() > self.kmax[2] {
                        continue;
                    }
                    let q3 = if m3 >= 0 { m3 as usize } else { (p3 as i64 + m3) as usize };
                    out[dst + j3] = spec[src + q3];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_axes() {
        assert!(Grid::new([3, 8, 8], [1.0, 1.0, 1.0]).is_err());
        assert!(Grid::new([8, 7, 8], [1.0, 1.0, 1.0]).is_err());
        assert!(Grid::new([8, 8, 2], [1.0, 1.0, 1.0]).is_err());
        assert!(Grid::new([8, 8, 8], [1.0, 0.0, 1.0]).is_err());
        assert!(Grid::new([8, 8, 8], [1.0, 1.0, -2.0]).is_err());
    }

    #[test]
    fn wavenumber_layout() {
        let g = Grid::cubic(8).unwrap();
        let ints: Vec<i64> = (0..8).map(|j| g.int_freq_table(2)[j]).collect();
        assert_eq!(ints, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert!((g.wavenumber(2, 1) - 1.0).abs() < 1e-15);
        assert!((g.wavenumber(2, 7) + 1.0).abs() < 1e-15);
        // Nyquist carries +n/2 in the main table and 0 in the odd-multiplier
        // table.
        assert!((g.wavenumber(2, 4) - 4.0).abs() < 1e-15);
        assert_eq!(g.k_deriv_table(2)[4], 0.0);

        let g2 = Grid::new([8, 8, 8], [4.0 * std::f64::consts::PI, 1.0, 1.0]).unwrap();
        assert!((g2.wavenumber(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mask_counts() {
        // floor(8/3) = 2: five retained frequencies per axis.
        let g = Grid::cubic(8).unwrap();
        let kept = g.mask().iter().filter(|&&b| b).count();
        assert_eq!(kept, 5 * 5 * 5);

        // floor(12/3) = 4: nine per axis, and the grid carries a companion.
        let g = Grid::cubic(12).unwrap();
        let kept = g.mask().iter().filter(|&&b| b).count();
        assert_eq!(kept, 9 * 9 * 9);
        assert!(g.pad.is_some());
        assert!(Grid::cubic(16).unwrap().pad.is_none());
    }

    #[test]
    fn volume_and_coords() {
        let g = Grid::cubic(8).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        assert!((g.volume() - two_pi.powi(3)).abs() < 1e-12);
        assert!((g.coord(0, 4) - two_pi / 2.0).abs() < 1e-15);
    }
}
