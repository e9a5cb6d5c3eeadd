//! Spectral operators: derivatives, integrals, norms, and dealiased
//! products.
//!
//! Everything here works through the coefficient representation. Odd-order
//! derivatives use the zeroed-Nyquist wavenumber table so real fields map to
//! real fields; Laplacians use the full table. Quadratic quantities
//! (products, inner products) are evaluated with both operands truncated to
//! the dealiasing band, which makes them exact for band-limited inputs.

use crate::error::{Error, Result};
use crate::field::{same_grid, Field};
use crate::grid::Grid;
use rustfft::num_complex::Complex64;

// Raw spectrum kernels shared with the dynamics code.

pub(crate) fn d_spec(g: &Grid, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
    let [n1, n2, n3] = g.n();
    let (k1, k2, k3) = (g.k_deriv_table(0), g.k_deriv_table(1), g.k_deriv_table(2));
    let mut out = vec![Complex64::default(); spec.len()];
    let mut idx = 0;
    for j1 in 0..n1 {
        for j2 in 0..n2 {
            for j3 in 0..n3 {
                let k = match axis {
                    0 => k1[j1],
                    1 => k2[j2],
                    _ => k3[j3],
                };
                let c = spec[idx];
                out[idx] = Complex64::new(-k * c.im, k * c.re);
                idx += 1;
            }
        }
    }
    out
}

/// Multiply by -|k|^2 (full Laplacian) or -(k1^2 + k2^2) (horizontal part).
pub(crate) fn laplace_spec(g: &Grid, spec: &[Complex64], horizontal: bool) -> Vec<Complex64> {
    let [n1, n2, n3] = g.n();
    let (k1, k2, k3) = (g.k_table(0), g.k_table(1), g.k_table(2));
    let mut out = vec![Complex64::default(); spec.len()];
    let mut idx = 0;
    for j1 in 0..n1 {
        let a = k1[j1] * k1[j1];
        for j2 in 0..n2 {
            let ab = a + k2[j2] * k2[j2];
            for j3 in 0..n3 {
                let k2sum = if horizontal { ab } else { ab + k3[j3] * k3[j3] };
                out[idx] = -k2sum * spec[idx];
                idx += 1;
            }
        }
    }
    out
}

pub(crate) fn grad_spec(g: &Grid, spec: &[Complex64]) -> [Vec<Complex64>; 3] {
    [d_spec(g, spec, 0), d_spec(g, spec, 1), d_spec(g, spec, 2)]
}

pub(crate) fn div_spec(g: &Grid, u: [&[Complex64]; 3]) -> Vec<Complex64> {
    let mut out = d_spec(g, u[0], 0);
    for (axis, comp) in u.iter().enumerate().skip(1) {
        for (o, v) in out.iter_mut().zip(d_spec(g, comp, axis)) {
            *o += v;
        }
    }
    out
}

pub(crate) fn curl_spec(g: &Grid, u: [&[Complex64]; 3]) -> [Vec<Complex64>; 3] {
    let mut c1 = d_spec(g, u[2], 1);
    for (o, v) in c1.iter_mut().zip(d_spec(g, u[1], 2)) {
        *o -= v;
    }
    let mut c2 = d_spec(g, u[0], 2);
    for (o, v) in c2.iter_mut().zip(d_spec(g, u[2], 0)) {
        *o -= v;
    }
    let mut c3 = d_spec(g, u[1], 0);
    for (o, v) in c3.iter_mut().zip(d_spec(g, u[0], 1)) {
        *o -= v;
    }
    [c1, c2, c3]
}

/// Remove the gradient part per mode: u - k (k.u)/|k|^2.
pub(crate) fn project_spec(g: &Grid, u: &mut [Vec<Complex64>; 3]) {
    let [n1, n2, n3] = g.n();
    let (k1, k2, k3) = (g.k_deriv_table(0), g.k_deriv_table(1), g.k_deriv_table(2));
    let mut idx = 0;
    for j1 in 0..n1 {
        let a = k1[j1];
        for j2 in 0..n2 {
            let b = k2[j2];
            for j3 in 0..n3 {
                let c = k3[j3];
                let ksq = a * a + b * b + c * c;
                if ksq > 0.0 {
                    let kdotu = a * u[0][idx] + b * u[1][idx] + c * u[2][idx];
                    let s = kdotu / ksq;
                    u[0][idx] -= a * s;
                    u[1][idx] -= b * s;
                    u[2][idx] -= c * s;
                }
                idx += 1;
            }
        }
    }
}

/// V * sum of w(k1, k2, k3) |c_k|^2 over the spectrum.
pub(crate) fn weighted_sum_sq(
    g: &Grid,
    spec: &[Complex64],
    w: impl Fn(f64, f64, f64) -> f64,
) -> f64 {
    let [n1, n2, n3] = g.n();
    let (k1, k2, k3) = (g.k_table(0), g.k_table(1), g.k_table(2));
    let mut total = 0.0;
    let mut idx = 0;
    for j1 in 0..n1 {
        let a = k1[j1];
        for j2 in 0..n2 {
            let b = k2[j2];
            for j3 in 0..n3 {
                total += w(a, b, k3[j3]) * spec[idx].norm_sqr();
                idx += 1;
            }
        }
    }
    g.volume() * total
}

pub(crate) fn sobolev_weight(s: f64) -> impl Fn(f64) -> f64 {
    let int_s = if s.fract() == 0.0 && s.abs() <= 16.0 { Some(s as i32) } else { None };
    move |ksq: f64| match int_s {
        Some(p) => (1.0 + ksq).powi(p),
        None => (1.0 + ksq).powf(s),
    }
}

// Public operator surface.

/// Spectral derivative along `axis` (0, 1 or 2).
pub fn derivative(f: &Field, axis: usize) -> Result<Field> {
    if axis > 2 {
        return Err(Error::Domain(format!("axis {axis} out of range")));
    }
    let g = f.grid();
    let spec = f.to_spectral();
    let data = spec
        .components()
        .iter()
        .map(|c| g.fft().inverse(&d_spec(g, c, axis)))
        .collect();
    Field::new(g.clone(), data)
}

pub fn laplacian(f: &Field) -> Field {
    let g = f.grid();
    let spec = f.to_spectral();
    let data = spec
        .components()
        .iter()
        .map(|c| g.fft().inverse(&laplace_spec(g, c, false)))
        .collect();
    Field::new(g.clone(), data).expect("rank preserved")
}

/// Horizontal Laplacian d11 + d22; the x3 direction is untouched.
pub fn laplacian_h(f: &Field) -> Field {
    let g = f.grid();
    let spec = f.to_spectral();
    let data = spec
        .components()
        .iter()
        .map(|c| g.fft().inverse(&laplace_spec(g, c, true)))
        .collect();
    Field::new(g.clone(), data).expect("rank preserved")
}

pub fn gradient(f: &Field) -> Result<Field> {
    if !f.is_scalar() {
        return Err(Error::Shape("gradient takes a scalar field".into()));
    }
    let g = f.grid();
    let spec = f.to_spectral();
    let parts = grad_spec(g, spec.component(0));
    let data = parts.iter().map(|c| g.fft().inverse(c)).collect();
    Field::new(g.clone(), data)
}

pub fn divergence(f: &Field) -> Result<Field> {
    if f.rank() != 3 {
        return Err(Error::Shape("divergence takes a vector field".into()));
    }
    let g = f.grid();
    let spec = f.to_spectral();
    let d = div_spec(g, [spec.component(0), spec.component(1), spec.component(2)]);
    Field::scalar(g.clone(), g.fft().inverse(&d))
}

pub fn curl(f: &Field) -> Result<Field> {
    if f.rank() != 3 {
        return Err(Error::Shape("curl takes a vector field".into()));
    }
    let g = f.grid();
    let spec = f.to_spectral();
    let parts = curl_spec(g, [spec.component(0), spec.component(1), spec.component(2)]);
    let data = parts.iter().map(|c| g.fft().inverse(c)).collect();
    Field::new(g.clone(), data)
}

/// Pointwise product with both operands and the result truncated to the
/// dealiasing band. Matching ranks multiply componentwise (vectors contract
/// to their dot product); a scalar operand broadcasts across a vector.
pub fn dealiased_product(f: &Field, g: &Field) -> Result<Field> {
    same_grid(f.grid(), g.grid(), "dealiased_product")?;
    let grid = f.grid();
    let fs = f.to_spectral();
    let gs = g.to_spectral();
    match (f.rank(), g.rank()) {
        (1, 1) => {
            let p = grid.banded_product(fs.component(0), gs.component(0));
            Field::scalar(grid.clone(), grid.fft().inverse(&p))
        }
        (1, 3) | (3, 1) => {
            let (scalar, vector) = if f.rank() == 1 { (&fs, &gs) } else { (&gs, &fs) };
            let data = (0..3)
                .map(|i| {
                    let p = grid.banded_product(scalar.component(0), vector.component(i));
                    grid.fft().inverse(&p)
                })
                .collect();
            Field::new(grid.clone(), data)
        }
        (3, 3) => {
            let mut acc = grid.banded_product(fs.component(0), gs.component(0));
            for i in 1..3 {
                let p = grid.banded_product(fs.component(i), gs.component(i));
                for (a, b) in acc.iter_mut().zip(p) {
                    *a += b;
                }
            }
            Field::scalar(grid.clone(), grid.fft().inverse(&acc))
        }
        _ => unreachable!(),
    }
}

/// Box integral: volume times the sample mean.
pub fn integrate(f: &Field) -> Result<f64> {
    if !f.is_scalar() {
        return Err(Error::Shape("integrate takes a scalar field".into()));
    }
    let s = f.component(0);
    let mean: f64 = s.iter().sum::<f64>() / s.len() as f64;
    Ok(f.grid().volume() * mean)
}

/// L2 pairing via the dealiased product; exact for band-limited operands.
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    if f.rank() != g.rank() {
        return Err(Error::Shape("inner product needs matching ranks".into()));
    }
    integrate(&dealiased_product(f, g)?)
}

/// Sobolev norm of order `s >= 0` through the multiplier
/// (V sum (1+|k|^2)^s |c_k|^2)^(1/2); vector components are summed.
pub fn sobolev_norm(f: &Field, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("sobolev order s = {s} must be >= 0")));
    }
    let g = f.grid();
    let spec = f.to_spectral();
    let w = sobolev_weight(s);
    let total: f64 = spec
        .components()
        .iter()
        .map(|c| weighted_sum_sq(g, c, |a, b, k3| w(a * a + b * b + k3 * k3)))
        .sum();
    Ok(total.sqrt())
}

/// Leray projection onto divergence-free fields; the mean (k = 0) part is
/// untouched.
pub fn project_divfree(f: &Field) -> Result<Field> {
    if f.rank() != 3 {
        return Err(Error::Shape("projection takes a vector field".into()));
    }
    let g = f.grid();
    let spec = f.to_spectral();
    let mut u = [
        spec.component(0).to_vec(),
        spec.component(1).to_vec(),
        spec.component(2).to_vec(),
    ];
    project_spec(g, &mut u);
    let data = u.iter().map(|c| g.fft().inverse(c)).collect();
    Field::new(g.clone(), data)
}
