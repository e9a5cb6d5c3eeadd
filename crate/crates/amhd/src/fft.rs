//! Three-dimensional transforms between real grid samples and Fourier
//! coefficients.
//!
//! Storage is a flat vector indexed `(i1*n2 + i2)*n3 + i3`, so the x3 axis is
//! fastest. Coefficients follow the convention `f(x) = sum_k fhat(k) e^{ik.x}`:
//! the forward transform divides by `n1*n2*n3`, the inverse is the plain
//! unnormalized synthesis sum.
//!
//! The public entry points take real samples and return the full complex
//! spectrum (and back). Internally they exploit conjugate symmetry: the x3
//! pass packs two real lines into one complex FFT and only the non-redundant
//! m3 <= n3/2 half is carried through the two strided passes, which costs
//! about half of three plain complex passes. The redundant half of the
//! returned spectrum is filled by reflection, so callers see an ordinary
//! full-size spectrum.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft3 {
    n: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    /// Plans transforms for an n1 x n2 x n3 grid. Axis lengths must be even
    /// (the line-pairing step relies on it).
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        assert!(n1 % 2 == 0 && n2 % 2 == 0 && n3 % 2 == 0);
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(n1),
            planner.plan_fft_forward(n2),
            planner.plan_fft_forward(n3),
        ];
        let inv = [
            planner.plan_fft_inverse(n1),
            planner.plan_fft_inverse(n2),
            planner.plan_fft_inverse(n3),
        ];
        Fft3 { n: [n1, n2, n3], fwd, inv }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn half(&self) -> usize {
        self.n[2] / 2 + 1
    }

    /// Real samples to the full normalized spectrum.
    pub fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.len());
        let [n1, n2, n3] = self.n;
        let h = self.half();
        let rows = n1 * n2;

        // Pass 3: two real lines per complex FFT, keep m3 <= n3/2.
        let plan = &self.fwd[2];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); n3];
        let mut halfspec = vec![Complex64::default(); rows * h];
        for r in (0..rows).step_by(2) {
            let (fa, fb) = (&samples[r * n3..], &samples[(r + 1) * n3..]);
            for i in 0..n3 {
                line[i] = Complex64::new(fa[i], fb[i]);
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            let (oa, ob) = (r * h, (r + 1) * h);
            for m in 0..h {
                let zm = line[m];
                let zc = line[(n3 - m) % n3].conj();
                halfspec[oa + m] = 0.5 * (zm + zc);
                halfspec[ob + m] = Complex64::new(0.0, -0.5) * (zm - zc);
            }
        }

        // Passes 2 and 1 on the (n1, n2, h) block.
        self.strided_pass(&mut halfspec, n1, n2, h, 1, true);
        self.strided_pass(&mut halfspec, n1, n2, h, 0, true);

        // Reflect into the redundant half and normalize.
        let scale = 1.0 / self.len() as f64;
        let mut full = vec![Complex64::default(); self.len()];
        for m1 in 0..n1 {
            for m2 in 0..n2 {
                let src = (m1 * n2 + m2) * h;
                let dst = (m1 * n2 + m2) * n3;
                for m3 in 0..h {
                    full[dst + m3] = scale * halfspec[src + m3];
                }
            }
        }
        for m1 in 0..n1 {
            let r1 = (n1 - m1) % n1;
            for m2 in 0..n2 {
                let r2 = (n2 - m2) % n2;
                let dst = (m1 * n2 + m2) * n3;
                let src = (r1 * n2 + r2) * n3;
                for m3 in h..n3 {
                    full[dst + m3] = full[src + n3 - m3].conj();
                }
            }
        }
        full
    }

    /// Full spectrum back to real samples. The input is assumed Hermitian
    /// (the redundant half is ignored).
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len());
        let [n1, n2, n3] = self.n;
        let h = self.half();
        let rows = n1 * n2;

        let mut halfspec = vec![Complex64::default(); rows * h];
        for m1 in 0..n1 {
            for m2 in 0..n2 {
                let src = (m1 * n2 + m2) * n3;
                let dst = (m1 * n2 + m2) * h;
                for m3 in 0..h {
                    halfspec[dst + m3] = coeffs[src + m3];
                }
            }
        }

        self.strided_pass(&mut halfspec, n1, n2, h, 0, false);
        self.strided_pass(&mut halfspec, n1, n2, h, 1, false);

        // Pass 3: rebuild full lines by per-line conjugate reflection (valid
        // once the two horizontal passes are undone) and synthesize two real
        // lines per complex FFT.
        let plan = &self.inv[2];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); n3];
        let mut out = vec![0.0f64; self.len()];
        for r in (0..rows).step_by(2) {
            let (sa, sb) = (r * h, (r + 1) * h);
            for m in 0..h {
                line[m] = halfspec[sa + m] + Complex64::i() * halfspec[sb + m];
            }
            for m in h..n3 {
                line[m] = halfspec[sa + n3 - m].conj()
                    + Complex64::i() * halfspec[sb + n3 - m].conj();
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            let (oa, ob) = (r * n3, (r + 1) * n3);
            for i in 0..n3 {
                out[oa + i] = line[i].re;
                out[ob + i] = line[i].im;
            }
        }
        out
    }

    /// Complex pass along axis 0 or 1 of an (n1, n2, w) block.
    fn strided_pass(
        &self,
        buf: &mut [Complex64],
        n1: usize,
        n2: usize,
        w: usize,
        axis: usize,
        forward: bool,
    ) {
        let plan = if forward { &self.fwd[axis] } else { &self.inv[axis] };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        match axis {
            1 => {
                // Lines of length n2, stride w, n1*w of them.
                let mut plane = vec![Complex64::default(); n2 * w];
                for i1 in 0..n1 {
                    let base = i1 * n2 * w;
                    for i2 in 0..n2 {
                        for i3 in 0..w {
                            plane[i3 * n2 + i2] = buf[base + i2 * w + i3];
                        }
                    }
                    plan.process_with_scratch(&mut plane, &mut scratch);
                    for i2 in 0..n2 {
                        for i3 in 0..w {
                            buf[base + i2 * w + i3] = plane[i3 * n2 + i2];
                        }
                    }
                }
            }
            0 => {
                // Lines of length n1, stride n2*w, n2*w of them.
                let stride = n2 * w;
                let mut slab = vec![Complex64::default(); n1 * w];
                for i2 in 0..n2 {
                    let base = i2 * w;
                    for i1 in 0..n1 {
                        let src = base + i1 * stride;
                        for i3 in 0..w {
                            slab[i3 * n1 + i1] = buf[src + i3];
                        }
                    }
                    plan.process_with_scratch(&mut slab, &mut scratch);
                    for i1 in 0..n1 {
                        let dst = base + i1 * stride;
                        for i3 in 0..w {
                            buf[dst + i3] = slab[i3 * n1 + i1];
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_samples(n: usize, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut out = Vec::with_capacity(n * n * n);
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    out.push(f(i1 as f64 * h, i2 as f64 * h, i3 as f64 * h));
                }
            }
        }
        out
    }

    /// Plain three-pass complex reference, for pinning the packed path.
    fn reference_forward(n: [usize; 3], samples: &[f64]) -> Vec<Complex64> {
        let [n1, n2, n3] = n;
        let mut planner = FftPlanner::new();
        let mut buf: Vec<Complex64> =
            samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut tmp = Vec::new();
        for (axis, len, stride, blocks) in [
            (2usize, n3, 1usize, n1 * n2),
            (1, n2, n3, n1 * n3),
            (0, n1, n2 * n3, n2 * n3),
        ] {
            let plan = planner.plan_fft_forward(len);
            tmp.resize(len, Complex64::default());
            for b in 0..blocks {
                let start = match axis {
                    2 => b * n3,
                    1 => (b / n3) * n2 * n3 + b % n3,
                    _ => b,
                };
                for j in 0..len {
                    tmp[j] = buf[start + j * stride];
                }
                plan.process(&mut tmp);
                for j in 0..len {
                    buf[start + j * stride] = tmp[j];
                }
            }
        }
        let scale = 1.0 / (n1 * n2 * n3) as f64;
        buf.iter().map(|c| c * scale).collect()
    }

    #[test]
    fn packed_forward_matches_reference() {
        let n = [8, 12, 6];
        let fft = Fft3::new(n[0], n[1], n[2]);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rngf = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let samples: Vec<f64> = (0..fft.len()).map(|_| rngf()).collect();
        let a = fft.forward(&samples);
        let b = reference_forward(n, &samples);
        let scale: f64 = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() <= 1e-13 * scale.max(1.0));
        }
    }

    #[test]
    fn sine_hits_single_mode_pair() {
        let n = 16;
        let fft = Fft3::new(n, n, n);
        let coeffs = fft.forward(&grid_samples(n, |_, _, x3| x3.sin()));
        // sin(x3) = -i/2 e^{i x3} + i/2 e^{-i x3}
        let plus = coeffs[1];
        let minus = coeffs[n - 1];
        assert!((plus - Complex64::new(0.0, -0.5)).norm() < 1e-13);
        assert!((minus - Complex64::new(0.0, 0.5)).norm() < 1e-13);
        let energy: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        assert!((energy - 0.5).abs() < 1e-13, "leakage beyond the pair");
    }

    #[test]
    fn round_trip_recovers_samples() {
        let n = 12;
        let fft = Fft3::new(n, n, n);
        let samples = grid_samples(n, |a, b, c| {
            (a.sin() + 0.3) * (2.0 * b).cos() + (a + c).sin().powi(2)
        });
        let back = fft.inverse(&fft.forward(&samples));
        let scale: f64 = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in samples.iter().zip(back.iter()) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn anisotropic_dims_round_trip() {
        let (n1, n2, n3) = (8, 12, 6);
        let fft = Fft3::new(n1, n2, n3);
        let mut samples = Vec::new();
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                for i3 in 0..n3 {
                    samples.push(((i1 * 31 + i2 * 17 + i3 * 7) % 13) as f64 - 6.0);
                }
            }
        }
        let back = fft.inverse(&fft.forward(&samples));
        for (x, y) in samples.iter().zip(back.iter()) {
            assert!((x - y).abs() <= 1e-11);
        }
    }

    #[test]
    fn throughput_32_cubed() {
        let n = 32;
        let fft = Fft3::new(n, n, n);
        let samples = grid_samples(n, |a, b, c| a.sin() * b.cos() + c.sin());
        let reps = 200;
        let t0 = std::time::Instant::now();
        let mut sink = 0.0;
        for _ in 0..reps {
            let c = fft.forward(&samples);
            let s = fft.inverse(&c);
            sink += s[1];
        }
        let per = t0.elapsed().as_secs_f64() / (2 * reps) as f64;
        println!("32^3 transform: {:.3} ms each (sink {sink:.3})", per * 1e3);
    }
}
