//! Scalar and vector fields on a [`Grid`].
//!
//! A field owns one sample (or coefficient) array per component: one for a
//! scalar, three for a vector. Samples are stored flat in x3-fastest order.

use crate::error::{Error, Result};
use crate::grid::Grid;
use rustfft::num_complex::Complex64;
use std::sync::Arc;

#[derive(Clone)]
pub struct Field {
    grid: Arc<Grid>,
    data: Vec<Vec<f64>>,
}

#[derive(Clone)]
pub struct SpectralField {
    grid: Arc<Grid>,
    data: Vec<Vec<Complex64>>,
}

fn check_rank(components: usize) -> Result<()> {
    if components == 1 || components == 3 {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "fields are scalar (1 component) or vector (3), got {components}"
        )))
    }
}

impl Field {
    pub fn new(grid: Arc<Grid>, data: Vec<Vec<f64>>) -> Result<Field> {
        check_rank(data.len())?;
        for c in &data {
            if c.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "component holds {} samples, grid has {}",
                    c.len(),
                    grid.len()
                )));
            }
        }
        Ok(Field { grid, data })
    }

    pub fn scalar(grid: Arc<Grid>, samples: Vec<f64>) -> Result<Field> {
        Field::new(grid, vec![samples])
    }

    pub fn vector(grid: Arc<Grid>, c: [Vec<f64>; 3]) -> Result<Field> {
        let [a, b, d] = c;
        Field::new(grid, vec![a, b, d])
    }

    pub fn zeros(grid: Arc<Grid>, rank: usize) -> Field {
        check_rank(rank).expect("rank is 1 or 3");
        let n = grid.len();
        Field { grid, data: (0..rank).map(|_| vec![0.0; n]).collect() }
    }

    /// Scalar field from a pointwise closure of the coordinates.
    pub fn scalar_from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64, f64) -> f64) -> Field {
        let [n1, n2, n3] = grid.n();
        let mut samples = Vec::with_capacity(grid.len());
        for i1 in 0..n1 {
            let x1 = grid.coord(0, i1);
            for i2 in 0..n2 {
                let x2 = grid.coord(1, i2);
                for i3 in 0..n3 {
                    samples.push(f(x1, x2, grid.coord(2, i3)));
                }
            }
        }
        Field { grid, data: vec![samples] }
    }

    /// Vector field from a pointwise closure of the coordinates.
    pub fn vector_from_fn(
        grid: Arc<Grid>,
        f: impl Fn(f64, f64, f64) -> [f64; 3],
    ) -> Field {
        let [n1, n2, n3] = grid.n();
        let mut c = [
            Vec::with_capacity(grid.len()),
            Vec::with_capacity(grid.len()),
            Vec::with_capacity(grid.len()),
        ];
        for i1 in 0..n1 {
            let x1 = grid.coord(0, i1);
            for i2 in 0..n2 {
                let x2 = grid.coord(1, i2);
                for i3 in 0..n3 {
                    let v = f(x1, x2, grid.coord(2, i3));
                    for (dst, val) in c.iter_mut().zip(v) {
                        dst.push(val);
                    }
                }
            }
        }
        let [a, b, d] = c;
        Field { grid, data: vec![a, b, d] }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.rank() == 1
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.data[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.data
    }

    /// Largest absolute sample over all components.
    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn min_sample(&self) -> f64 {
        self.data
            .iter()
            .flat_map(|c| c.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Pointwise map, preserving rank.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .map(|c| c.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    pub fn to_spectral(&self) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            data: self.data.iter().map(|c| self.grid.fft().forward(c)).collect(),
        }
    }
}

impl SpectralField {
    pub fn new(grid: Arc<Grid>, data: Vec<Vec<Complex64>>) -> Result<SpectralField> {
        check_rank(data.len())?;
        for c in &data {
            if c.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "component holds {} coefficients, grid has {}",
                    c.len(),
                    grid.len()
                )));
            }
        }
        Ok(SpectralField { grid, data })
    }

    pub fn zeros(grid: Arc<Grid>, rank: usize) -> SpectralField {
        check_rank(rank).expect("rank is 1 or 3");
        let n = grid.len();
        SpectralField {
            grid,
            data: (0..rank).map(|_| vec![Complex64::default(); n]).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.data.len()
    }

    pub fn component(&self, i: usize) -> &[Complex64] {
        &self.data[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i]
    }

    pub fn components(&self) -> &[Vec<Complex64>] {
        &self.data
    }

    pub fn into_components(self) -> Vec<Vec<Complex64>> {
        self.data
    }

    pub fn to_physical(&self) -> Field {
        Field {
            grid: self.grid.clone(),
            data: self.data.iter().map(|c| self.grid.fft().inverse(c)).collect(),
        }
    }

    /// Zero every coefficient outside the dealiasing band.
    pub fn mask(&mut self) {
        for c in self.data.iter_mut() {
            self.grid.apply_mask(c);
        }
    }

    /// Worst asymmetry |F(k) - conj(F(-k))| relative to the largest
    /// coefficient; a real-valued field gives rounding-level values.
    pub fn hermitian_defect(&self) -> f64 {
        let [n1, n2, n3] = self.grid.n();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for c in &self.data {
            for j1 in 0..n1 {
                let r1 = (n1 - j1) % n1;
                for j2 in 0..n2 {
                    let r2 = (n2 - j2) % n2;
                    for j3 in 0..n3 {
                        let r3 = (n3 - j3) % n3;
                        let a = c[(j1 * n2 + j2) * n3 + j3];
                        let b = c[(r1 * n2 + r2) * n3 + r3];
                        worst = worst.max((a - b.conj()).norm());
                        scale = scale.max(a.norm());
                    }
                }
            }
        }
        if scale > 0.0 { worst / scale } else { 0.0 }
    }
}

pub(crate) fn same_grid(a: &Grid, b: &Grid, what: &str) -> Result<()> {
    if a.same_layout(b) {
        Ok(())
    } else {
        Err(Error::Shape(format!("{what}: operands live on different grids")))
    }
}
