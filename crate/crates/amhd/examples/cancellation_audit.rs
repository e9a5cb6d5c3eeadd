//! The energy estimates rest on four integral cancellations (the two
//! magnetic advection pairings, the magnetic pressure triple, and the
//! third-derivative transport pairing). Evaluate their residuals on random
//! divergence-free states, then inject a gradient part into B and watch
//! residual (i) — the only one that needs div B = 0 — respond linearly.
//!
//!     cargo run --release --example cancellation_audit

use std::sync::Arc;

use amhd::field::Field;
use amhd::grid::Grid;
use amhd::ineq::{check_cancellations, random_bandlimited};
use amhd::ops;
use amhd::state::State;

fn random_state(g: &Arc<Grid>, seed: u64) -> amhd::Result<State> {
    let draw = |c: u64| random_bandlimited(g, seed * 8 + c, 3, 2.0);
    let vec_draw = |c0: u64| -> amhd::Result<Field> {
        Field::vector(
            g.clone(),
            [
                draw(c0)?.into_components().remove(0),
                draw(c0 + 1)?.into_components().remove(0),
                draw(c0 + 2)?.into_components().remove(0),
            ],
        )
    };
    let a_raw = draw(0)?;
    let u_raw = vec_draw(1)?;
    let b_raw = vec_draw(4)?;
    State::new(
        a_raw.scale(0.2 / a_raw.max_abs()),
        u_raw.scale(0.4 / u_raw.max_abs()),
        ops::project_divfree(&b_raw.scale(0.4 / b_raw.max_abs()))?,
    )
}

fn main() -> amhd::Result<()> {
    let g = Arc::new(Grid::cubic(24)?);

    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "seed", "(i)", "(ii)", "(iii)", "(iv)");
    for seed in 0..5 {
        let s = random_state(&g, 300 + seed)?;
        let r = check_cancellations(&s);
        println!(
            "{seed:>6} {:>12.2e} {:>12.2e} {:>12.2e} {:>12.2e}",
            r[0], r[1], r[2], r[3]
        );
    }

    // now break div B = 0 on purpose
    let base = random_state(&g, 300)?;
    let phi = random_bandlimited(&g, 999, 3, 2.0)?;
    let grad_raw = ops::gradient(&phi)?;
    let grad_phi = grad_raw.scale(1.0 / grad_raw.max_abs());
    println!();
    println!("{:>10} {:>12} {:>12}", "injection", "(i)", "(ii)");
    for c in [1e-4, 2e-4, 4e-4, 8e-4] {
        let mk = |i: usize| {
            base.b
                .component(i)
                .iter()
                .zip(grad_phi.component(i))
                .map(|(b, gp)| b + c * gp)
                .collect::<Vec<f64>>()
        };
        let bent = State::new(
            base.a.clone(),
            base.u.clone(),
            Field::vector(g.clone(), [mk(0), mk(1), mk(2)])?,
        )?;
        let r = check_cancellations(&bent);
        println!("{c:>10.0e} {:>12.4e} {:>12.2e}", r[0], r[1]);
    }
    println!();
    println!("residual (i) doubles with the injection; (ii) holds for any B");
    Ok(())
}
