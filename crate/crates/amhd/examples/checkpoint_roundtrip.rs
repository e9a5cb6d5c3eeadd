//! Interrupt a run halfway, resume from the binary checkpoint, and compare
//! the stitched ledger against an uninterrupted reference column by column.
//!
//!     cargo run --release --example checkpoint_roundtrip

use amhd::config::parse_config;
use amhd::experiment::{resume_experiment, run_experiment};

fn main() -> amhd::Result<()> {
    let base = "
        [grid]
        n = 16
        [init]
        preset = random_small
        epsilon = 1e-2
        seed = 11
        [time]
        dt = 1e-3
        [output]
        ledger_every = 50
    ";

    let mut full = parse_config(base)?;
    full.t_end = 0.4;
    full.out_dir = "target/example-out/roundtrip_full".into();
    let reference = run_experiment(&full, true)?;

    let mut head = full.clone();
    head.t_end = 0.2;
    head.out_dir = "target/example-out/roundtrip_head".into();
    let first = run_experiment(&head, true)?;

    let mut tail = full.clone();
    tail.out_dir = "target/example-out/roundtrip_tail".into();
    let resumed = resume_experiment(&first.final_checkpoint, &tail, true)?;

    println!("reference rows: {}", reference.rows.len());
    println!("resumed rows  : {} (head {} + continuation)", resumed.rows.len(), first.rows.len());

    let mut worst = 0.0f64;
    for (ru, rr) in reference.rows.iter().zip(resumed.rows.iter()) {
        for (cu, cr) in ru.columns().iter().zip(rr.columns().iter()) {
            worst = worst.max((cu - cr).abs() / cu.abs().max(cr.abs()).max(1.0));
        }
    }
    println!("worst column discrepancy: {worst:.2e}");
    println!("checkpoint: {}", first.final_checkpoint.display());
    Ok(())
}
