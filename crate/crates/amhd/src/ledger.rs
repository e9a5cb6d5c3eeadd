//! Energy bookkeeping: the pointwise energy functionals, the dissipation
//! functionals they decay into, the cross term coupling velocity to the
//! density gradient, and the per-sample ledger rows a run emits as CSV.
//!
//! The central identity tracked here is the basic energy balance
//!
//! ```text
//! d/dt int ( g(rho) + rho |u|^2 / 2 + |B|^2 / 2 )
//!     = - mu ||grad u||^2 - (lambda + mu) ||div u||^2 - sigma ||grad_h B||^2
//! ```
//!
//! which the discrete system satisfies to time-discretization error only.
//! Ledger rows record both sides; `fill_residuals` audits the integral form
//! of the balance over each sampling interval, with the dissipation
//! integrated by Simpson over every solver step, so the residual carries no
//! sampling-stencil floor and shrinks 16x when dt halves.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ineq;
use crate::ops::weighted_sum_sq;
use crate::params::PhysParams;
use crate::rhs::{Lift, SpecState};
use crate::state::State;

/// Time scale weighting the energy part of the residual denominator
/// `max(dissipation, energy / T_SCALE)`.
pub const T_SCALE: f64 = 1.0;

/// Potential energy density `g(rho) = rho * int_1^rho (P(s) - P(1)) / s^2 ds`
/// for the pressure law `P(rho) = rho^gamma / gamma`. Zero at `rho = 1`,
/// strictly convex, comparable to `(rho - 1)^2` on compact density ranges.
///
/// For `gamma = 2` this collapses to `(rho - 1)^2 / 2` and is evaluated in
/// closed form; any other exponent goes through adaptive quadrature at
/// tolerance 1e-12 so the pressure law stays the single source of truth.
pub fn potential_energy_density(params: &PhysParams, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("potential energy needs rho > 0, got {rho}")));
    }
    if params.gamma_is_two() {
        let d = rho - 1.0;
        return Ok(0.5 * d * d);
    }
    let p_ref = params.pressure(1.0);
    let integrand = |s: f64| (params.pressure(s) - p_ref) / (s * s);
    Ok(rho * adaptive_simpson(&integrand, 1.0, rho, 1e-12))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// The three weighted dissipation integrals on the right side of the basic
/// energy balance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BasicDissipation {
    /// `mu ||grad u||^2`
    pub visc: f64,
    /// `(lambda + mu) ||div u||^2`
    pub div: f64,
    /// `sigma ||grad_h B||^2`
    pub mag: f64,
}

impl BasicDissipation {
    pub fn total(&self) -> f64 {
        self.visc + self.div + self.mag
    }
}

/// Unweighted H3-scale energies and dissipation functionals: the quantities
/// whose weighted time integral bounds the full trajectory norm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct H3Energies {
    /// `(||a||_H3^2 + ||u||_H3^2 + ||B||_H3^2) / 2`
    pub h3_energy: f64,
    /// `||grad a||_H2^2`
    pub diss_a: f64,
    /// `||grad u||_H3^2`
    pub diss_visc_h3: f64,
    /// `||div u||_H3^2`
    pub diss_div_h3: f64,
    /// `||grad_h B||_H3^2`
    pub diss_mag_h3: f64,
}

/// `int ( g(rho) + rho |u|^2 / 2 + |B|^2 / 2 )`, evaluated pointwise on the
/// work grid so the cubic velocity term is integrated alias-free.
pub fn basic_energy(s: &State, params: &PhysParams) -> Result<f64> {
    let sp = SpecState::from_state(s);
    basic_energy_spec(s.grid(), &sp, params)
}

fn basic_energy_spec(g: &Grid, sp: &SpecState, params: &PhysParams) -> Result<f64> {
    let lift = Lift::new(g);
    let a = lift.inv(&lift.up(&sp.a));
    let u: [Vec<f64>; 3] = std::array::from_fn(|c| lift.inv(&lift.up(&sp.u[c])));
    let b: [Vec<f64>; 3] = std::array::from_fn(|c| lift.inv(&lift.up(&sp.b[c])));
    let mut sum = 0.0;
    for i in 0..a.len() {
        let rho = 1.0 + a[i];
        let usq = u[0][i] * u[0][i] + u[1][i] * u[1][i] + u[2][i] * u[2][i];
        let bsq = b[0][i] * b[0][i] + b[1][i] * b[1][i] + b[2][i] * b[2][i];
        sum += potential_energy_density(params, rho)? + 0.5 * (rho * usq + bsq);
    }
    Ok(g.volume() * sum / a.len() as f64)
}

/// Weighted dissipation triple of the basic energy balance, as exact
/// spectral sums.
pub fn basic_dissipation(s: &State, params: &PhysParams) -> BasicDissipation {
    basic_dissipation_spec(s.grid(), &SpecState::from_state(s), params)
}

pub(crate) fn basic_dissipation_spec(
    g: &Grid,
    sp: &SpecState,
    params: &PhysParams,
) -> BasicDissipation {
    let grad_sq: f64 =
        sp.u.iter().map(|c| weighted_sum_sq(g, c, |k1, k2, k3| k1 * k1 + k2 * k2 + k3 * k3)).sum();
    let mag_sq: f64 =
        sp.b.iter().map(|c| weighted_sum_sq(g, c, |k1, k2, _| k1 * k1 + k2 * k2)).sum();
    BasicDissipation {
        visc: params.mu * grad_sq,
        div: (params.lambda + params.mu) * div_sq_weighted(g, &sp.u, |_| 1.0),
        mag: params.sigma * mag_sq,
    }
}

/// `V * sum w(|k|^2) |k . u_k|^2`: the squared divergence norm under a
/// radial spectral weight.
fn div_sq_weighted(g: &Grid, u: &[Vec<Complex64>; 3], w: impl Fn(f64) -> f64) -> f64 {
    let (k1, k2, k3) = (g.k_deriv_table(0), g.k_deriv_table(1), g.k_deriv_table(2));
    let [n1, n2, n3] = g.n();
    let mut total = 0.0;
    let mut idx = 0;
    for j1 in 0..n1 {
        for j2 in 0..n2 {
            for j3 in 0..n3 {
                let (ka, kb, kc) = (k1[j1], k2[j2], k3[j3]);
                let z = ka * u[0][idx] + kb * u[1][idx] + kc * u[2][idx];
                total += w(ka * ka + kb * kb + kc * kc) * z.norm_sqr();
                idx += 1;
            }
        }
    }
    g.volume() * total
}

/// `(||a||^2 + ||u||^2 + ||B||^2) / 2` in L2.
pub fn l2_energy(s: &State) -> f64 {
    let sp = SpecState::from_state(s);
    let one = |_: f64, _: f64, _: f64| 1.0;
    0.5 * sp.components().iter().map(|c| weighted_sum_sq(s.grid(), c, one)).sum::<f64>()
}

/// All H3-scale energies and dissipations in one spectral pass per field.
pub fn h3_energies(s: &State) -> H3Energies {
    h3_energies_spec(s.grid(), &SpecState::from_state(s))
}

fn h3_energies_spec(g: &Grid, sp: &SpecState) -> H3Energies {
    let h3 = |ksq: f64| {
        let w = 1.0 + ksq;
        w * w * w
    };
    let mut e = H3Energies::default();
    for c in sp.components() {
        e.h3_energy += 0.5 * weighted_sum_sq(g, c, |k1, k2, k3| h3(k1 * k1 + k2 * k2 + k3 * k3));
    }
    e.diss_a = weighted_sum_sq(g, &sp.a, |k1, k2, k3| {
        let ksq = k1 * k1 + k2 * k2 + k3 * k3;
        let w = 1.0 + ksq;
        ksq * w * w
    });
    for c in &sp.u {
        e.diss_visc_h3 += weighted_sum_sq(g, c, |k1, k2, k3| {
            let ksq = k1 * k1 + k2 * k2 + k3 * k3;
            ksq * h3(ksq)
        });
    }
    e.diss_div_h3 = div_sq_weighted(g, &sp.u, h3);
    for c in &sp.b {
        e.diss_mag_h3 += weighted_sum_sq(g, c, |k1, k2, k3| {
            (k1 * k1 + k2 * k2) * h3(k1 * k1 + k2 * k2 + k3 * k3)
        });
    }
    e
}

/// `sum_{m=0..2} int grad^m u . grad^m grad a`: the coupling functional
/// whose decay converts velocity dissipation into density-gradient
/// dissipation. As a spectral sum this is
/// `V sum_k (1 + |k|^2 + |k|^4) Re( conj(u_k) . i k a_k )`.
pub fn cross_term(s: &State) -> f64 {
    cross_term_spec(s.grid(), &SpecState::from_state(s))
}

fn cross_term_spec(g: &Grid, sp: &SpecState) -> f64 {
    let (k1, k2, k3) = (g.k_deriv_table(0), g.k_deriv_table(1), g.k_deriv_table(2));
    let [n1, n2, n3] = g.n();
    let mut total = 0.0;
    let mut idx = 0;
    for j1 in 0..n1 {
        for j2 in 0..n2 {
            for j3 in 0..n3 {
                let (ka, kb, kc) = (k1[j1], k2[j2], k3[j3]);
                let ksq = ka * ka + kb * kb + kc * kc;
                let w = 1.0 + ksq + ksq * ksq;
                let uk = ka * sp.u[0][idx] + kb * sp.u[1][idx] + kc * sp.u[2][idx];
                // Re( conj(u_k) . i k a_k ) = -Im( (k . u_k)* a_k )
                total -= w * (uk.conj() * sp.a[idx]).im;
                idx += 1;
            }
        }
    }
    g.volume() * total
}

/// `a_weight * ||(a, u, B)||_H3^2 + 2 * cross_term`: nonnegative and
/// decaying along small solutions once `a_weight` dominates the cross term,
/// hence the lower bound on the weight.
pub fn lyapunov(s: &State, a_weight: f64) -> Result<f64> {
    if !(a_weight > 1.0) {
        return Err(Error::Domain(format!(
            "lyapunov weight must exceed 1 to dominate the cross term, got {a_weight}"
        )));
    }
    let sp = SpecState::from_state(s);
    let h3 = h3_energies_spec(s.grid(), &sp);
    Ok(a_weight * 2.0 * h3.h3_energy + 2.0 * cross_term_spec(s.grid(), &sp))
}

/// One sampled instant of a run: every CSV column plus a few in-memory
/// companions that are recomputable from the state but not serialized.
#[derive(Clone, Debug)]
pub struct LedgerRow {
    pub t: f64,
    pub basic_energy: f64,
    pub l2_energy: f64,
    pub h3_energy: f64,
    pub diss_visc: f64,
    pub diss_div: f64,
    pub diss_mag: f64,
    pub diss_a: f64,
    pub cross_term: f64,
    pub lyapunov: f64,
    /// Defect of the integral energy balance over the trailing sampling
    /// interval; 0 on the first row and until `fill_residuals` runs.
    pub residual_l2_identity: f64,
    pub canc_res: [f64; 4],
    pub min_rho: f64,
    pub max_abs_a: f64,
    pub div_b_norm: f64,
    /// Integrand of the cumulative dissipation budget
    /// `diss_a + mu diss_visc_h3 + (lambda+mu) diss_div_h3 + sigma diss_mag_h3`.
    /// NaN on rows parsed back from CSV.
    pub e2_integrand: f64,
    /// H3 norms of the individual fields; NaN on rows parsed from CSV.
    pub a_h3: f64,
    pub u_h3: f64,
    pub b_h3: f64,
}

/// Column order of the ledger CSV; every writer emits it, every reader
/// verifies it.
pub const CSV_HEADER: &str = "t,basic_energy,l2_energy,h3_energy,diss_visc,diss_div,diss_mag,\
                              diss_a,cross_term,lyapunov,residual_l2_identity,canc_res_1,\
                              canc_res_2,canc_res_3,canc_res_4,min_rho,max_abs_a,div_b_norm";

impl LedgerRow {
    /// The CSV columns in header order; handy for whole-row comparisons.
    pub fn columns(&self) -> [f64; 18] {
        [
            self.t,
            self.basic_energy,
            self.l2_energy,
            self.h3_energy,
            self.diss_visc,
            self.diss_div,
            self.diss_mag,
            self.diss_a,
            self.cross_term,
            self.lyapunov,
            self.residual_l2_identity,
            self.canc_res[0],
            self.canc_res[1],
            self.canc_res[2],
            self.canc_res[3],
            self.min_rho,
            self.max_abs_a,
            self.div_b_norm,
        ]
    }

    /// One CSV line, 17 significant digits per value so every f64 survives
    /// a write/read round trip bit-exactly.
    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let mut line = String::with_capacity(18 * 26);
        for (i, v) in cols.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        line
    }

    pub fn from_csv(line_no: usize, line: &str) -> Result<LedgerRow> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 18 {
            return Err(Error::Ledger(format!(
                "line {line_no}: expected 18 columns, found {}",
                parts.len()
            )));
        }
        let mut v = [0.0f64; 18];
        for (i, p) in parts.iter().enumerate() {
            v[i] = p.trim().parse::<f64>().map_err(|e| {
                Error::Ledger(format!("line {line_no}, column {}: {e}", i + 1))
            })?;
        }
        Ok(LedgerRow {
            t: v[0],
            basic_energy: v[1],
            l2_energy: v[2],
            h3_energy: v[3],
            diss_visc: v[4],
            diss_div: v[5],
            diss_mag: v[6],
            diss_a: v[7],
            cross_term: v[8],
            lyapunov: v[9],
            residual_l2_identity: v[10],
            canc_res: [v[11], v[12], v[13], v[14]],
            min_rho: v[15],
            max_abs_a: v[16],
            div_b_norm: v[17],
            e2_integrand: f64::NAN,
            a_h3: f64::NAN,
            u_h3: f64::NAN,
            b_h3: f64::NAN,
        })
    }
}

/// Evaluate every ledger functional on one state.
pub fn sample_row(s: &State, params: &PhysParams, a_weight: f64, t: f64) -> Result<LedgerRow> {
    if !(a_weight > 1.0) {
        return Err(Error::Domain(format!(
            "lyapunov weight must exceed 1 to dominate the cross term, got {a_weight}"
        )));
    }
    let g = s.grid();
    let sp = SpecState::from_state(s);
    let h3 = h3_energies_spec(g, &sp);
    let diss = basic_dissipation_spec(g, &sp, params);
    let cross = cross_term_spec(g, &sp);
    let one = |_: f64, _: f64, _: f64| 1.0;
    let l2: f64 = 0.5 * sp.components().iter().map(|c| weighted_sum_sq(g, c, one)).sum::<f64>();
    let h3w = |k1: f64, k2: f64, k3: f64| {
        let w = 1.0 + k1 * k1 + k2 * k2 + k3 * k3;
        w * w * w
    };
    let a_h3 = weighted_sum_sq(g, &sp.a, h3w).sqrt();
    let u_h3 = sp.u.iter().map(|c| weighted_sum_sq(g, c, h3w)).sum::<f64>().sqrt();
    let b_h3 = sp.b.iter().map(|c| weighted_sum_sq(g, c, h3w)).sum::<f64>().sqrt();
    Ok(LedgerRow {
        t,
        basic_energy: basic_energy_spec(g, &sp, params)?,
        l2_energy: l2,
        h3_energy: h3.h3_energy,
        diss_visc: diss.visc,
        diss_div: diss.div,
        diss_mag: diss.mag,
        diss_a: h3.diss_a,
        cross_term: cross,
        lyapunov: a_weight * 2.0 * h3.h3_energy + 2.0 * cross,
        residual_l2_identity: 0.0,
        canc_res: ineq::check_cancellations(s),
        min_rho: s.min_density(),
        max_abs_a: s.sup_a(),
        div_b_norm: s.div_b_norm(),
        e2_integrand: h3.diss_a
            + params.mu * h3.diss_visc_h3
            + (params.lambda + params.mu) * h3.diss_div_h3
            + params.sigma * h3.diss_mag_h3,
        a_h3,
        u_h3,
        b_h3,
    })
}

fn uniform_spacing(rows: &[LedgerRow]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::Usage(format!(
            "energy identity residual needs at least 2 ledger samples, got {}",
            rows.len()
        )));
    }
    let h = rows[1].t - rows[0].t;
    if !(h > 0.0) {
        return Err(Error::Usage(format!("ledger samples must advance in time, spacing {h}")));
    }
    for w in rows.windows(2) {
        let d = w[1].t - w[0].t;
        if (d - h).abs() > 1e-9 * h {
            return Err(Error::Usage(format!(
                "energy identity residual needs uniform spacing: {d} vs {h}"
            )));
        }
    }
    Ok(h)
}

/// Composite Simpson integral of uniformly spaced samples with spacing
/// `dt`: paired intervals take the 1-4-1 rule, a leftover group of three
/// takes the 3/8 rule, and a single interval falls back to the trapezoid.
fn composite_simpson(d: &[f64], dt: f64) -> f64 {
    let n = d.len() - 1;
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return 0.5 * dt * (d[0] + d[1]);
    }
    let paired = if n % 2 == 0 { n } else { n - 3 };
    let mut sum = 0.0;
    let mut i = 0;
    while i < paired {
        sum += dt / 3.0 * (d[i] + 4.0 * d[i + 1] + d[i + 2]);
        i += 2;
    }
    if i < n {
        sum += 3.0 * dt / 8.0 * (d[i] + 3.0 * d[i + 1] + 3.0 * d[i + 2] + d[i + 3]);
    }
    sum
}

/// Fill `residual_l2_identity` on rows after `first`: row `j` gets the
/// defect of the integral energy balance over its trailing sampling
/// interval,
///
///     | E(t_j) - E(t_{j-1}) + int D dt | / (h max(D_mean, E / T_SCALE)),
///
/// with the dissipation integrated by composite Simpson over the `every`
/// solver steps of each interval; `diss[k]` is the weighted dissipation
/// after `k` steps past row `first`. The balance is exact along exact
/// dynamics, so the only defect sources are the time integrator and the
/// substep quadrature, both fourth order: halving dt shrinks the residual
/// about sixteenfold. Rows up to `first` keep their values (0 for a fresh
/// start, the prior ledger's values after a resume).
pub fn fill_residuals(
    rows: &mut [LedgerRow],
    first: usize,
    diss: &[f64],
    dt: f64,
    every: usize,
) -> Result<()> {
    if rows.len() < first + 2 {
        return Ok(());
    }
    let h_rows = uniform_spacing(&rows[first..])?;
    let h = every as f64 * dt;
    if (h_rows - h).abs() > 1e-9 * h {
        return Err(Error::Ledger(format!(
            "ledger spacing {h_rows} does not match {every} steps of dt = {dt}"
        )));
    }
    let need = (rows.len() - 1 - first) * every;
    if diss.len() <= need {
        return Err(Error::Ledger(format!(
            "dissipation trace has {} samples, the ledger needs {}",
            diss.len(),
            need + 1
        )));
    }
    for j in first + 1..rows.len() {
        let m = j - first;
        let integral = composite_simpson(&diss[(m - 1) * every..=m * every], dt);
        let de = rows[j].basic_energy - rows[j - 1].basic_energy;
        let energy = rows[j].basic_energy.max(rows[j - 1].basic_energy);
        let denom = (integral / h).max(energy / T_SCALE);
        rows[j].residual_l2_identity =
            if denom > 0.0 { (de + integral).abs() / (h * denom) } else { 0.0 };
    }
    Ok(())
}

/// Trajectory-level energy budget at time `t`:
/// `E1` the running maximum of `||(a,u,B)||_H3^2`, `E2` the trapezoid
/// integral of the weighted H3 dissipations, and their sum. Requires rows
/// sampled in this process (parsed rows lack the integrand).
pub fn total_energy(rows: &[LedgerRow], t: f64) -> Result<(f64, f64, f64)> {
    let in_range: Vec<&LedgerRow> = rows.iter().filter(|r| r.t <= t * (1.0 + 1e-12) + 1e-12).collect();
    if in_range.is_empty() {
        return Err(Error::Usage(format!("no ledger samples at or before t = {t}")));
    }
    let mut e1 = 0.0f64;
    let mut e2 = 0.0f64;
    for (i, r) in in_range.iter().enumerate() {
        if !r.e2_integrand.is_finite() {
            return Err(Error::Ledger(
                "cumulative dissipation unavailable: rows were parsed from CSV".into(),
            ));
        }
        e1 = e1.max(2.0 * r.h3_energy);
        if i > 0 {
            let prev = in_range[i - 1];
            e2 += 0.5 * (r.t - prev.t) * (r.e2_integrand + prev.e2_integrand);
        }
    }
    Ok((e1 + e2, e1, e2))
}

/// Write rows as CSV with the mandatory header.
pub fn write_csv(path: &Path, rows: &[LedgerRow]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 480 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a ledger CSV back; the header must match `CSV_HEADER` exactly.
pub fn read_csv(path: &Path) -> Result<Vec<LedgerRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Ledger(format!("unexpected header: {header}")));
        }
        None => return Err(Error::Ledger("empty ledger file".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(LedgerRow::from_csv(i + 1, line)?);
    }
    Ok(rows)
}
