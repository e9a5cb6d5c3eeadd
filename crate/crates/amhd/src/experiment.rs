//! Batch experiment drivers: run a configured simulation to completion (or
//! guarded termination), resume one from a checkpoint, and sweep the
//! trilinear inequality ensemble. Every driver leaves three artifacts in the
//! output directory: a ledger CSV, a manifest (flat key=value text), and for
//! time integrations a final checkpoint. The manifest is written on every
//! termination path and names exactly one cause.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ineq::{check_ineq1, check_ineq2, random_bandlimited, IneqSample};
use crate::ledger::{self, LedgerRow};
use crate::params::PhysParams;
use crate::presets::preset_initial_data;
use crate::state::State;
use crate::stepper::{Stepper, CFL_SAFETY};

/// Why a run stopped. Exactly one cause is recorded in the manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TEndReached,
    Vacuum,
    BlowUp,
    DensityGuard,
    Cfl,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::TEndReached => "t_end_reached",
            Termination::Vacuum => "vacuum",
            Termination::BlowUp => "blow_up",
            Termination::DensityGuard => "density_guard",
            Termination::Cfl => "cfl",
        }
    }

    pub fn is_normal(&self) -> bool {
        matches!(self, Termination::TEndReached)
    }
}

/// Split dynamics guards (which end the run gracefully, with artifacts) from
/// genuine errors (which propagate).
fn classify(e: Error) -> std::result::Result<Termination, Error> {
    match e {
        Error::Vacuum { .. } => Ok(Termination::Vacuum),
        Error::BlowUp { .. } => Ok(Termination::BlowUp),
        Error::DensityGuard { .. } => Ok(Termination::DensityGuard),
        Error::Cfl { .. } => Ok(Termination::Cfl),
        other => Err(other),
    }
}

/// Everything a finished (or terminated) run leaves behind.
pub struct RunArtifacts {
    pub rows: Vec<LedgerRow>,
    pub termination: Termination,
    pub t_final: f64,
    pub steps_taken: u64,
    pub dt: f64,
    pub wall_seconds: f64,
    pub ledger_path: PathBuf,
    pub manifest_path: PathBuf,
    pub final_checkpoint: PathBuf,
    pub final_state: State,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Usage(format!("cannot create output directory {}: {e}", dir.display()))
    })
}

/// Resolve step count and step size over `span`.
///
/// An explicit dt must tile the span (and the sampling cadence must tile the
/// step count). A derived dt starts from the advective limit of the initial
/// state with 10% headroom and is then shrunk so that samples land uniformly
/// and the final one exactly at the end time.
fn resolve_steps(cfg: &RunConfig, span: f64, state: &State) -> Result<(u64, f64)> {
    let le = cfg.ledger_every as u64;
    match cfg.dt {
        Some(dt) => {
            let steps = (span / dt).round();
            if steps < 1.0 || (steps * dt - span).abs() > 1e-6 * dt {
                return Err(Error::Usage(format!(
                    "dt = {dt} must divide the remaining time span {span} to within 1e-6 dt"
                )));
            }
            let steps = steps as u64;
            if steps % le != 0 {
                return Err(Error::Usage(format!(
                    "ledger_every = {le} must divide the step count {steps}"
                )));
            }
            Ok((steps, dt))
        }
        None => {
            let speed = 1.0 + state.u.max_abs() + state.b.max_abs();
            let dt0 = 0.9 * CFL_SAFETY * state.grid().min_dx() / speed;
            let steps = ((span / dt0).ceil() as u64).max(1);
            let steps = steps.div_ceil(le) * le;
            Ok((steps, span / steps as f64))
        }
    }
}

struct Drive<'a> {
    cfg: &'a RunConfig,
    params: PhysParams,
    state: State,
    t0: f64,
    prior_rows: Vec<LedgerRow>,
    kind: &'static str,
    /// extra manifest entries (e.g. the source checkpoint on resume)
    extra: Vec<(String, String)>,
    /// include the time-integrated energy budget (needs in-memory rows)
    with_budget: bool,
}

fn drive(d: Drive, quiet: bool, start: Instant) -> Result<RunArtifacts> {
    let cfg = d.cfg;
    let span = cfg.t_end - d.t0;
    if !(span > 0.0) {
        return Err(Error::Usage(format!(
            "t_end = {} must exceed the start time {}",
            cfg.t_end, d.t0
        )));
    }
    let (steps, dt) = resolve_steps(cfg, span, &d.state)?;
    if d.prior_rows.len() >= 2 {
        // keep the combined sample train uniform
        let h_prior = d.prior_rows[1].t - d.prior_rows[0].t;
        let h_new = cfg.ledger_every as f64 * dt;
        if (h_new - h_prior).abs() > 1e-9 * h_prior {
            return Err(Error::Usage(format!(
                "resume must keep the ledger cadence: prior sample spacing {h_prior}, \
                 resumed spacing {h_new}"
            )));
        }
    }
    ensure_dir(&cfg.out_dir)?;
    let ledger_path = cfg.out_dir.join("ledger.csv");
    let manifest_path = cfg.out_dir.join("manifest.txt");
    let final_checkpoint = cfg.out_dir.join("checkpoint_final.bin");

    let mut rows = d.prior_rows;
    let mut termination = Termination::TEndReached;
    let le = cfg.ledger_every as u64;

    let stepper = Stepper::new(&d.state, d.params, dt, cfg.mode, d.t0);
    let mut stepper = match stepper {
        Ok(s) => Some(s),
        Err(e) => {
            termination = classify(e)?;
            None
        }
    };
    // weighted dissipation after every solver step, for the integral-form
    // balance audit; index 0 is the state the loop starts from
    let mut diss: Vec<f64> = Vec::new();
    if let Some(st) = &stepper {
        if rows.is_empty() {
            rows.push(ledger::sample_row(&st.state(), &d.params, cfg.lyapunov_a, st.t())?);
        }
        diss.push(st.basic_dissipation().total());
        if !quiet {
            println!(
                "{}: {} steps of dt = {:.6e} to t = {}",
                d.kind, steps, dt, cfg.t_end
            );
        }
    }
    let first = rows.len().saturating_sub(1);

    // last published snapshot and the step it belongs to; checkpoints written
    // at that step store these exact bits, so resuming reproduces the
    // continuing trajectory bit for bit
    let mut committed: Option<(u64, State)> = None;

    if let Some(st) = stepper.as_mut() {
        for step in 1..=steps {
            if let Err(e) = st.step() {
                termination = classify(e)?;
                break;
            }
            if step % le == 0 {
                let snap = st.commit_state();
                if let Err(e) = snap.check_admissible(&d.params, st.t()) {
                    committed = Some((st.steps(), snap));
                    termination = classify(e)?;
                    break;
                }
                let row = ledger::sample_row(&snap, &d.params, cfg.lyapunov_a, st.t())?;
                if !quiet {
                    println!(
                        "  t = {:>10.6}  basic_energy = {:.9e}  h3_energy = {:.9e}",
                        row.t, row.basic_energy, row.h3_energy
                    );
                }
                rows.push(row);
                committed = Some((st.steps(), snap));
            }
            // after any commit, so a resumed trace starts from the same bits
            diss.push(st.basic_dissipation().total());
            if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every as u64 == 0 {
                let p = cfg.out_dir.join(format!("checkpoint_{step:06}.bin"));
                match &committed {
                    Some((n, snap)) if *n == st.steps() => {
                        write_checkpoint(&p, snap, &d.params, st.t())?
                    }
                    _ => write_checkpoint(&p, &st.state(), &d.params, st.t())?,
                }
            }
        }
    }

    // the balance audit needs at least one completed sampling interval;
    // shorter (terminated) ledgers keep the zero placeholder
    if rows.len() >= first + 2 {
        ledger::fill_residuals(&mut rows, first, &diss, dt, cfg.ledger_every)?;
    }
    ledger::write_csv(&ledger_path, &rows)?;

    let (final_state, t_final, steps_taken) = match stepper.as_mut() {
        Some(st) => {
            let snap = match committed.take() {
                Some((n, s)) if n == st.steps() => s,
                _ => st.commit_state(),
            };
            (snap, st.t(), st.steps())
        }
        None => (d.state.clone(), d.t0, 0),
    };
    write_checkpoint(&final_checkpoint, &final_state, &d.params, t_final)?;

    let wall_seconds = start.elapsed().as_secs_f64();
    let mut m: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| m.push((k.to_string(), v));
    put("kind", d.kind.to_string());
    put("status", if termination.is_normal() { "ok" } else { "terminated" }.to_string());
    put("termination", termination.name().to_string());
    for (k, v) in &d.extra {
        put(k, v.clone());
    }
    put("t_start", format!("{}", d.t0));
    put("t_end_requested", format!("{}", cfg.t_end));
    put("t_final", format!("{t_final}"));
    put("steps_planned", format!("{steps}"));
    put("steps_taken", format!("{steps_taken}"));
    put("dt", format!("{dt}"));
    for (i, (n, l)) in cfg.n.iter().zip(cfg.l.iter()).enumerate() {
        put(&format!("n{}", i + 1), format!("{n}"));
        put(&format!("l{}", i + 1), format!("{l}"));
    }
    put("mu", format!("{}", d.params.mu));
    put("lambda", format!("{}", d.params.lambda));
    put("sigma", format!("{}", d.params.sigma));
    put("gamma", format!("{}", d.params.gamma));
    put("vacuum_floor", format!("{}", d.params.vacuum_floor));
    put("preset", cfg.preset.name().to_string());
    put("epsilon", format!("{}", cfg.epsilon));
    put("seed", format!("{}", cfg.seed));
    put("kmax", format!("{}", cfg.kmax));
    put("decay", format!("{}", cfg.decay));
    put("mode", match cfg.mode {
        crate::stepper::Mode::Full => "full".to_string(),
        crate::stepper::Mode::Linear => "linear".to_string(),
    });
    put("ledger_every", format!("{}", cfg.ledger_every));
    put("checkpoint_every", format!("{}", cfg.checkpoint_every));
    put("lyapunov_a", format!("{}", cfg.lyapunov_a));
    put("wall_seconds", format!("{wall_seconds:.3}"));
    put("ledger_rows", format!("{}", rows.len()));
    if !rows.is_empty() {
        let fmax = |f: fn(&LedgerRow) -> f64| {
            rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
        };
        put("max_residual_l2_identity", format!("{}", fmax(|r| r.residual_l2_identity)));
        put("max_canc_res_1", format!("{}", fmax(|r| r.canc_res[0])));
        put("max_canc_res_2", format!("{}", fmax(|r| r.canc_res[1])));
        put("max_canc_res_3", format!("{}", fmax(|r| r.canc_res[2])));
        put("max_canc_res_4", format!("{}", fmax(|r| r.canc_res[3])));
        put("max_div_b", format!("{}", fmax(|r| r.div_b_norm)));
        put(
            "min_rho",
            format!("{}", rows.iter().map(|r| r.min_rho).fold(f64::INFINITY, f64::min)),
        );
        let h3_0 = rows[0].h3_energy;
        if h3_0 > 0.0 {
            put("k_h3", format!("{}", fmax(|r| r.h3_energy) / h3_0));
        }
        if d.with_budget {
            let (e, e1, e2) = ledger::total_energy(&rows, t_final)?;
            put("e1", format!("{e1}"));
            put("e2", format!("{e2}"));
            put("e_total", format!("{e}"));
            if h3_0 > 0.0 {
                put("k_total", format!("{}", e / (2.0 * h3_0)));
            }
        }
    }
    write_manifest(&manifest_path, &m)?;
    if !quiet {
        println!(
            "{}: {} at t = {t_final} after {steps_taken} steps ({wall_seconds:.1}s), \
             artifacts in {}",
            d.kind,
            termination.name(),
            cfg.out_dir.display()
        );
    }

    Ok(RunArtifacts {
        rows,
        termination,
        t_final,
        steps_taken,
        dt,
        wall_seconds,
        ledger_path,
        manifest_path,
        final_checkpoint,
        final_state,
    })
}

fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        let _ = writeln!(text, "{k} = {v}");
    }
    fs::write(path, text)
        .map_err(|e| Error::Usage(format!("cannot write manifest {}: {e}", path.display())))
}

/// Run one configured experiment from its preset initial data.
pub fn run_experiment(cfg: &RunConfig, quiet: bool) -> Result<RunArtifacts> {
    let start = Instant::now();
    let grid = Arc::new(Grid::new(cfg.n, cfg.l)?);
    let state = preset_initial_data(&grid, cfg.preset, cfg.epsilon, cfg.seed, cfg.kmax, cfg.decay)?;
    drive(
        Drive {
            cfg,
            params: cfg.params,
            state,
            t0: 0.0,
            prior_rows: Vec::new(),
            kind: "run",
            extra: Vec::new(),
            with_budget: true,
        },
        quiet,
        start,
    )
}

/// Continue a checkpointed run to the configured end time.
///
/// The checkpoint is authoritative for the grid and the physical
/// coefficients; config keys that explicitly contradict it are refused
/// rather than silently overridden (the vacuum floor is not persisted and
/// stays config-controlled). A `ledger.csv` next to the checkpoint is
/// carried forward so the final CSV covers the whole trajectory; rows past
/// the checkpoint time (possible when resuming from a periodic checkpoint)
/// are dropped.
///
/// A checkpoint written at a ledger sample holds exactly the snapshot the
/// original run re-ingested and carried forward, so resuming from it
/// reproduces the uninterrupted trajectory bit for bit.
pub fn resume_experiment(ckpt: &Path, cfg: &RunConfig, quiet: bool) -> Result<RunArtifacts> {
    let start = Instant::now();
    let (state, ck_params, t0) = read_checkpoint(ckpt)?;
    check_resume_conflicts(cfg, &state, &ck_params)?;
    let mut params = ck_params;
    params.vacuum_floor = cfg.params.vacuum_floor;

    let sibling = ckpt.parent().unwrap_or_else(|| Path::new(".")).join("ledger.csv");
    let prior_rows = if sibling.exists() {
        let mut rows = ledger::read_csv(&sibling)?;
        let keep = t0 * (1.0 + 1e-12) + 1e-12;
        rows.retain(|r| r.t <= keep);
        match rows.last() {
            None => {
                return Err(Error::Usage(format!(
                    "{} has no samples at or before the checkpoint time {t0}",
                    sibling.display()
                )))
            }
            Some(last) if (last.t - t0).abs() > 1e-9 * t0.abs().max(1.0) => {
                return Err(Error::Usage(format!(
                    "checkpoint time {t0} does not coincide with a ledger sample \
                     (last prior sample at t = {})",
                    last.t
                )))
            }
            Some(_) => {}
        }
        rows
    } else {
        Vec::new()
    };

    let mut cfg = cfg.clone();
    cfg.n = state.grid().n();
    cfg.l = state.grid().l();
    cfg.params = params;
    drive(
        Drive {
            cfg: &cfg,
            params,
            state,
            t0,
            prior_rows,
            kind: "resume",
            extra: vec![("checkpoint".to_string(), ckpt.display().to_string())],
            // time-integrated budget needs per-row integrands, which CSV
            // rows do not carry
            with_budget: false,
        },
        quiet,
        start,
    )
}

fn float_conflict(a: f64, b: f64) -> bool {
    (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn check_resume_conflicts(cfg: &RunConfig, state: &State, ck: &PhysParams) -> Result<()> {
    let n = state.grid().n();
    let l = state.grid().l();
    let complain = |what: String| -> Result<()> {
        Err(Error::Usage(format!(
            "config contradicts the checkpoint: {what}; drop the key or match the checkpoint"
        )))
    };
    for (i, key) in ["n1", "n2", "n3"].iter().enumerate() {
        if (cfg.was_set("grid", key) || cfg.was_set("grid", "n")) && cfg.n[i] != n[i] {
            return complain(format!("checkpoint has {key} = {}, config sets {}", n[i], cfg.n[i]));
        }
    }
    for (i, key) in ["l1", "l2", "l3"].iter().enumerate() {
        if (cfg.was_set("grid", key) || cfg.was_set("grid", "l")) && float_conflict(cfg.l[i], l[i])
        {
            return complain(format!("checkpoint has {key} = {}, config sets {}", l[i], cfg.l[i]));
        }
    }
    let pairs = [
        ("mu", cfg.params.mu, ck.mu),
        ("lambda", cfg.params.lambda, ck.lambda),
        ("sigma", cfg.params.sigma, ck.sigma),
        ("gamma", cfg.params.gamma, ck.gamma),
    ];
    for (key, from_cfg, from_ck) in pairs {
        if cfg.was_set("physics", key) && float_conflict(from_cfg, from_ck) {
            return complain(format!("checkpoint has {key} = {from_ck}, config sets {from_cfg}"));
        }
    }
    Ok(())
}

/// Artifacts of an inequality ensemble sweep.
pub struct SweepArtifacts {
    pub samples: Vec<IneqSample>,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    /// (lemma, resolution) -> max observed ratio
    pub c_emp: Vec<((u8, usize), f64)>,
    pub wall_seconds: f64,
}

/// Sweep both trilinear inequalities over an ensemble of random band-limited
/// triples: `seeds` samples per cubic resolution, lemma 1 and lemma 2 on each
/// triple. Samples are generated in seed order, so the report is
/// deterministic.
pub fn ineq_sweep(cfg: &RunConfig, quiet: bool) -> Result<SweepArtifacts> {
    let start = Instant::now();
    let sw = &cfg.sweep;
    ensure_dir(&cfg.out_dir)?;

    let mut samples = Vec::with_capacity(2 * sw.seeds * sw.resolutions.len());
    for &r in &sw.resolutions {
        let grid = Arc::new(Grid::new([r, r, r], cfg.l)?);
        for i in 0..sw.seeds {
            let s = cfg.seed.wrapping_add(i as u64);
            let base = s.wrapping_mul(3);
            let f = random_bandlimited(&grid, base, sw.kmax, sw.decay)?;
            let g = random_bandlimited(&grid, base.wrapping_add(1), sw.kmax, sw.decay)?;
            let h = random_bandlimited(&grid, base.wrapping_add(2), sw.kmax, sw.decay)?;
            let mut s1 = check_ineq1(&f, &g, &h)?;
            s1.seed = s;
            let mut s2 = check_ineq2(&f, &g, &h, sw.axes)?;
            s2.seed = s;
            samples.push(s1);
            samples.push(s2);
        }
        if !quiet {
            println!("ineq-sweep: finished {} seeds at {r}^3", sw.seeds);
        }
    }

    let mut c_emp: Vec<((u8, usize), f64)> = Vec::new();
    for &r in &sw.resolutions {
        for lemma in [1u8, 2u8] {
            let max = samples
                .iter()
                .filter(|s| s.lemma == lemma && s.resolution[0] == r)
                .map(|s| s.ratio)
                .fold(f64::NEG_INFINITY, f64::max);
            c_emp.push(((lemma, r), max));
        }
    }

    let axes_digits = |axes: [usize; 3]| -> String {
        axes.iter().map(|a| char::from(b'1' + *a as u8)).collect()
    };
    let mut text = String::from("seed,resolution,lemma,axes,lhs,rhs_no_c,ratio\n");
    for s in &samples {
        let _ = writeln!(
            text,
            "{},{},{},{},{:.16e},{:.16e},{:.16e}",
            s.seed,
            s.resolution[0],
            s.lemma,
            axes_digits(s.axes),
            s.lhs,
            s.rhs_no_c,
            s.ratio
        );
    }
    for ((lemma, r), c) in &c_emp {
        let _ = writeln!(text, "# c_emp lemma={lemma} n={r} : {c}");
    }
    let mut stability = Vec::new();
    for lemma in [1u8, 2u8] {
        let of = |cs: &[((u8, usize), f64)], l: u8| -> Vec<f64> {
            cs.iter().filter(|((lm, _), _)| *lm == l).map(|(_, c)| *c).collect()
        };
        let cs = of(&c_emp, lemma);
        if cs.len() > 1 && cs.iter().all(|c| c.is_finite() && *c > 0.0) {
            let ratio = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                / cs.iter().cloned().fold(f64::INFINITY, f64::min);
            let _ = writeln!(text, "# stability lemma={lemma} : max/min c_emp = {ratio}");
            stability.push((lemma, ratio));
        }
    }
    let max_quad = samples.iter().map(|s| s.quad_est).fold(f64::NEG_INFINITY, f64::max);
    let _ = writeln!(text, "# max_quad_est = {max_quad}");

    let csv_path = cfg.out_dir.join("sweep.csv");
    fs::write(&csv_path, text)
        .map_err(|e| Error::Usage(format!("cannot write {}: {e}", csv_path.display())))?;

    let wall_seconds = start.elapsed().as_secs_f64();
    let mut m: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| m.push((k.to_string(), v));
    put("kind", "ineq_sweep".to_string());
    put("status", "ok".to_string());
    put("termination", "t_end_reached".to_string());
    put("seeds", format!("{}", sw.seeds));
    put("seed_base", format!("{}", cfg.seed));
    put(
        "resolutions",
        sw.resolutions.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
    );
    put("kmax", format!("{}", sw.kmax));
    put("decay", format!("{}", sw.decay));
    put("axes", axes_digits(sw.axes));
    put("samples", format!("{}", samples.len()));
    for ((lemma, r), c) in &c_emp {
        put(&format!("c_emp_lemma{lemma}_n{r}"), format!("{c}"));
    }
    for (lemma, ratio) in &stability {
        put(&format!("stability_lemma{lemma}"), format!("{ratio}"));
    }
    put("max_quad_est", format!("{max_quad}"));
    put("wall_seconds", format!("{wall_seconds:.3}"));
    let manifest_path = cfg.out_dir.join("manifest.txt");
    write_manifest(&manifest_path, &m)?;
    if !quiet {
        for ((lemma, r), c) in &c_emp {
            println!("c_emp lemma {lemma} at {r}^3: {c:.6}");
        }
    }

    Ok(SweepArtifacts { samples, csv_path, manifest_path, c_emp, wall_seconds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Preset};
    use crate::stepper::Mode;

    fn base_cfg(dir: &Path) -> RunConfig {
        let mut cfg = parse_config("").unwrap();
        cfg.n = [8, 8, 8];
        cfg.kmax = 2;
        cfg.out_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn equilibrium_run_is_identically_zero() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base_cfg(tmp.path());
        cfg.preset = Preset::Equilibrium;
        cfg.dt = Some(0.05);
        cfg.t_end = 0.5;
        cfg.ledger_every = 2;
        let art = run_experiment(&cfg, true).unwrap();
        assert_eq!(art.termination, Termination::TEndReached);
        assert_eq!(art.steps_taken, 10);
        assert_eq!(art.rows.len(), 6);
        for r in &art.rows {
            assert_eq!(r.basic_energy, 0.0);
            assert_eq!(r.h3_energy, 0.0);
            assert_eq!(r.lyapunov, 0.0);
            assert_eq!(r.residual_l2_identity, 0.0);
            assert_eq!(r.min_rho, 1.0);
        }
        assert!(art.ledger_path.exists());
        assert!(art.final_checkpoint.exists());
        let manifest = fs::read_to_string(&art.manifest_path).unwrap();
        assert!(manifest.contains("termination = t_end_reached"));
        assert!(manifest.contains("status = ok"));
        assert!(!manifest.contains("k_h3"), "no amplitude ratio for a zero start");
    }

    #[test]
    fn identical_configs_write_identical_ledgers() {
        let t1 = tempfile::tempdir().unwrap();
        let t2 = tempfile::tempdir().unwrap();
        let mut c1 = base_cfg(t1.path());
        c1.dt = Some(0.02);
        c1.t_end = 0.2;
        c1.ledger_every = 5;
        c1.seed = 11;
        let mut c2 = c1.clone();
        c2.out_dir = t2.path().to_path_buf();
        let a1 = run_experiment(&c1, true).unwrap();
        let a2 = run_experiment(&c2, true).unwrap();
        let b1 = fs::read(&a1.ledger_path).unwrap();
        let b2 = fs::read(&a2.ledger_path).unwrap();
        assert_eq!(b1, b2, "same seed must give byte-identical ledgers");
    }

    #[test]
    fn vertical_probe_conserves_magnetic_energy_in_linear_mode() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base_cfg(tmp.path());
        cfg.preset = Preset::MagneticVertical;
        cfg.mode = Mode::Linear;
        cfg.dt = Some(0.05);
        cfg.t_end = 1.0;
        cfg.ledger_every = 4;
        let art = run_experiment(&cfg, true).unwrap();
        let e0 = art.rows[0].l2_energy;
        assert!(e0 > 0.0);
        for r in &art.rows {
            assert!((r.l2_energy - e0).abs() <= 1e-12 * e0, "t = {}", r.t);
            assert_eq!(r.diss_mag, 0.0);
        }
    }

    #[test]
    fn cfl_violation_terminates_with_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base_cfg(tmp.path());
        cfg.seed = 3;
        cfg.dt = Some(0.5); // advective limit on 8^3 is about 0.39
        cfg.t_end = 1.0;
        cfg.ledger_every = 1;
        let art = run_experiment(&cfg, true).unwrap();
        assert_eq!(art.termination, Termination::Cfl);
        assert_eq!(art.steps_taken, 0);
        assert_eq!(art.rows.len(), 1, "only the initial sample");
        let manifest = fs::read_to_string(&art.manifest_path).unwrap();
        assert!(manifest.contains("status = terminated"));
        assert!(manifest.contains("termination = cfl"));
        assert!(art.final_checkpoint.exists());
    }

    #[test]
    fn cadence_and_divisibility_are_enforced() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base_cfg(tmp.path());
        cfg.dt = Some(0.03);
        cfg.t_end = 0.2; // not a multiple of dt
        let e = run_experiment(&cfg, true).err().expect("dt must not tile the span");
        match e {
            Error::Usage(msg) => assert!(msg.contains("divide"), "{msg}"),
            other => panic!("expected usage error, got {other}"),
        }
        cfg.dt = Some(0.02);
        cfg.ledger_every = 3; // 10 steps, not a multiple of 3
        let e = run_experiment(&cfg, true).err().expect("cadence must not tile the steps");
        match e {
            Error::Usage(msg) => assert!(msg.contains("ledger_every"), "{msg}"),
            other => panic!("expected usage error, got {other}"),
        }
    }

    #[test]
    fn derived_dt_lands_samples_on_the_end_time() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base_cfg(tmp.path());
        cfg.dt = None;
        cfg.t_end = 0.3;
        cfg.ledger_every = 7;
        let art = run_experiment(&cfg, true).unwrap();
        assert_eq!(art.steps_taken % 7, 0);
        assert!((art.dt * art.steps_taken as f64 - 0.3).abs() <= 1e-12);
        assert!((art.rows.last().unwrap().t - 0.3).abs() <= 1e-9);
    }

    #[test]
    fn resume_continues_the_trajectory() {
        let t_full = tempfile::tempdir().unwrap();
        let t_first = tempfile::tempdir().unwrap();
        let t_res = tempfile::tempdir().unwrap();

        let mut full = base_cfg(t_full.path());
        full.seed = 5;
        full.dt = Some(0.02);
        full.t_end = 0.4;
        full.ledger_every = 5;
        let af = run_experiment(&full, true).unwrap();

        let mut first = full.clone();
        first.out_dir = t_first.path().to_path_buf();
        first.t_end = 0.2;
        let a1 = run_experiment(&first, true).unwrap();

        let mut tail = full.clone();
        tail.out_dir = t_res.path().to_path_buf();
        let ar = resume_experiment(&a1.final_checkpoint, &tail, true).unwrap();

        assert_eq!(ar.rows.len(), af.rows.len());
        for (ru, rr) in af.rows.iter().zip(ar.rows.iter()) {
            for (cu, cr) in ru.columns().iter().zip(rr.columns().iter()) {
                let tol = 1e-12 * cu.abs().max(cr.abs()).max(1.0);
                assert!(
                    (cu - cr).abs() <= tol,
                    "column mismatch at t = {}: {cu} vs {cr}",
                    ru.t
                );
            }
        }
        let manifest = fs::read_to_string(&ar.manifest_path).unwrap();
        assert!(manifest.contains("kind = resume"));
        assert!(!manifest.contains("e_total"), "budget needs in-memory integrands");
        assert!(manifest.contains("k_h3"));
    }

    #[test]
    fn resume_rejects_contradictory_grid_or_physics() {
        let t1 = tempfile::tempdir().unwrap();
        let mut cfg = base_cfg(t1.path());
        cfg.dt = Some(0.02);
        cfg.t_end = 0.1;
        cfg.ledger_every = 5;
        let art = run_experiment(&cfg, true).unwrap();

        let mut bad = cfg.clone();
        bad.t_end = 0.2;
        bad.n = [12, 12, 12];
        bad.set_keys.insert("grid.n".to_string());
        let e = resume_experiment(&art.final_checkpoint, &bad, true)
            .err()
            .expect("grid conflict must be rejected");
        match e {
            Error::Usage(msg) => assert!(msg.contains("contradicts"), "{msg}"),
            other => panic!("expected conflict, got {other}"),
        }

        let mut bad = cfg.clone();
        bad.t_end = 0.2;
        bad.params.mu = 2.0;
        bad.set_keys.insert("physics.mu".to_string());
        let e = resume_experiment(&art.final_checkpoint, &bad, true)
            .err()
            .expect("physics conflict must be rejected");
        match e {
            Error::Usage(msg) => assert!(msg.contains("mu"), "{msg}"),
            other => panic!("expected conflict, got {other}"),
        }

        // same values spelled out explicitly are not a conflict
        let mut fine = cfg.clone();
        fine.t_end = 0.2;
        fine.set_keys.insert("grid.n".to_string());
        fine.set_keys.insert("physics.mu".to_string());
        resume_experiment(&art.final_checkpoint, &fine, true).unwrap();
    }

    #[test]
    fn sweep_reports_every_sample_and_the_running_max() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base_cfg(tmp.path());
        cfg.sweep.seeds = 2;
        cfg.sweep.resolutions = vec![12];
        cfg.sweep.kmax = 2;
        let art = ineq_sweep(&cfg, true).unwrap();
        assert_eq!(art.samples.len(), 4);
        assert!(art.samples.iter().all(|s| s.ratio.is_finite() && s.ratio > 0.0));
        let (key, c) = art.c_emp[0];
        assert_eq!(key, (1, 12));
        let max1 = art
            .samples
            .iter()
            .filter(|s| s.lemma == 1)
            .map(|s| s.ratio)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(c, max1);

        let text = fs::read_to_string(&art.csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "seed,resolution,lemma,axes,lhs,rhs_no_c,ratio");
        assert_eq!(text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).count(), 5);
        assert!(text.contains("# c_emp lemma=1 n=12"));
        assert!(text.lines().any(|l| l.starts_with("0,12,2,132,")));
        let manifest = fs::read_to_string(&art.manifest_path).unwrap();
        assert!(manifest.contains("c_emp_lemma2_n12 = "));
    }
}
