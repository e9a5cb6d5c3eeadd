//! Measure the damped acoustic oscillation of a single compressive mode and
//! compare with the dispersion relation z^2 + nu k^2 z + k^2 = 0: for
//! nu = 0.5 and |k| = 1 the pair is -1/4 +- i sqrt(15)/4.
//!
//!     cargo run --release --example acoustic_wave

use std::sync::Arc;

use amhd::config::Preset;
use amhd::grid::Grid;
use amhd::params::PhysParams;
use amhd::presets::preset_initial_data;
use amhd::stepper::{Mode, Stepper};
use amhd::Complex64;

fn main() -> amhd::Result<()> {
    let g = Arc::new(Grid::cubic(8)?);
    let params = PhysParams::new(0.25, 0.0, 1.0, 2.0)?;
    let state = preset_initial_data(&g, Preset::AcousticMode, 1e-2, 0, 2, 2.0)?;
    let dt = 0.1;
    let mut stepper = Stepper::new(&state, params, dt, Mode::Linear, 0.0)?;

    // track the density coefficient of the k = (1, 0, 0) mode
    let mode = g.idx(1, 0, 0);
    let coeff = |st: &Stepper| st.state().a.to_spectral().component(0)[mode];
    let mut xs = vec![coeff(&stepper)];
    for _ in 0..4 {
        stepper.step()?;
        xs.push(coeff(&stepper));
    }

    // a two-mode signal obeys x_{m+2} = p x_{m+1} + q x_m; recover p and q
    // from four consecutive samples and unfold the multipliers into rates
    let (x0, x1, x2, x3) = (xs[0], xs[1], xs[2], xs[3]);
    let det = x1 * x1 - x0 * x2;
    let p = (x2 * x1 - x3 * x0) / det;
    let q = (x1 * x3 - x2 * x2) / det;
    let disc = (p * p + 4.0 * q).sqrt();
    let mut rates = [((p + disc) / 2.0).ln() / dt, ((p - disc) / 2.0).ln() / dt];
    rates.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());

    let omega = 0.9375f64.sqrt();
    let want = [Complex64::new(-0.25, -omega), Complex64::new(-0.25, omega)];
    println!("{:>10} {:>28} {:>28}", "", "measured", "dispersion relation");
    for (r, w) in rates.iter().zip(&want) {
        println!(
            "{:>10} {:>14.9} {:+.9}i {:>14.9} {:+.9}i",
            "rate", r.re, r.im, w.re, w.im
        );
    }
    let err = (rates[0] - want[0]).norm().max((rates[1] - want[1]).norm());
    println!();
    println!("largest defect: {err:.2e}");
    Ok(())
}
