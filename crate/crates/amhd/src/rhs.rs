//! Right-hand side assembly.
//!
//! The evolved system, with rho = 1 + a and P(rho) = rho^gamma / gamma:
//!
//!   da/dt = -div u                                + f1
//!   du/dt = mu Lap u + (lambda + mu) grad div u - grad a + f2
//!   db/dt = sigma Lap_h b                          + f3
//!
//!   f1 = -u . grad a - a div u = -div(a u)
//!   f2 = -u . grad u + b . grad b - grad(|b|^2/2)
//!        - J(a) grad a
//!        - I(a) [mu Lap u + (lambda + mu) grad div u]
//!        - I(a) [b . grad b - grad(|b|^2/2)]
//!   f3 = -u . grad b + b . grad u - b div u = curl(u x b) - u div b
//!
//! Three evaluators share one scaffold and differ only in how terms are
//! grouped:
//!
//! * [`nonlinear_spec`]: the production path. Rotational form for
//!   advection (u x curl u - grad |u|^2/2), current form for the magnetic
//!   force ((curl b) x b), curl form for the induction terms.
//! * [`nonlinear_spec_literal`]: the f-terms exactly as written above,
//!   through direct tensor contractions. Band-limited inputs make the two
//!   assemblies equal to rounding, which a test pins.
//! * [`primitive_spec`]: the full tendency in primitive variables
//!   (-div(rho u), 1/rho coefficients, chain-rule pressure gradient),
//!   bypassing the I/J reformulation entirely. Agreement with linear +
//!   nonlinear is the end-to-end check that the reformulation is the same
//!   system.
//!
//! All pointwise work happens on the grid's companion when it has one, so
//! every route sees identical collocation aliasing of the rational
//! coefficients I, J, 1/rho and the comparisons above stay meaningful on
//! any grid size.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::ops::{curl_spec, d_spec, div_spec, grad_spec, laplace_spec};
use crate::params::PhysParams;
use crate::state::State;
use rustfft::num_complex::Complex64;
use std::sync::Arc;

/// Spectral snapshot of (a, u, b): masked coefficients on the native grid.
/// Also reused for tendencies, which live in the same space.
#[derive(Clone)]
pub(crate) struct SpecState {
    pub a: Vec<Complex64>,
    pub u: [Vec<Complex64>; 3],
    pub b: [Vec<Complex64>; 3],
}

impl SpecState {
    pub fn zeros(len: usize) -> SpecState {
        let z = vec![Complex64::default(); len];
        SpecState { a: z.clone(), u: [z.clone(), z.clone(), z.clone()], b: [z.clone(), z.clone(), z] }
    }

    pub fn from_state(s: &State) -> SpecState {
        let g = s.grid();
        let take = |f: &Field, i: usize| {
            let mut spec = g.fft().forward(f.component(i));
            g.apply_mask(&mut spec);
            spec
        };
        SpecState {
            a: take(&s.a, 0),
            u: [take(&s.u, 0), take(&s.u, 1), take(&s.u, 2)],
            b: [take(&s.b, 0), take(&s.b, 1), take(&s.b, 2)],
        }
    }

    pub fn to_state(&self, grid: &Arc<Grid>) -> State {
        let inv = |c: &[Complex64]| grid.fft().inverse(c);
        State {
            a: Field::scalar(grid.clone(), inv(&self.a)).expect("layout"),
            u: Field::vector(grid.clone(), [inv(&self.u[0]), inv(&self.u[1]), inv(&self.u[2])])
                .expect("layout"),
            b: Field::vector(grid.clone(), [inv(&self.b[0]), inv(&self.b[1]), inv(&self.b[2])])
                .expect("layout"),
        }
    }

    pub fn components(&self) -> [&Vec<Complex64>; 7] {
        [&self.a, &self.u[0], &self.u[1], &self.u[2], &self.b[0], &self.b[1], &self.b[2]]
    }

    pub fn components_mut(&mut self) -> [&mut Vec<Complex64>; 7] {
        let SpecState { a, u, b } = self;
        let [u0, u1, u2] = u;
        let [b0, b1, b2] = b;
        [a, u0, u1, u2, b0, b1, b2]
    }

    /// self += c * other, componentwise.
    pub fn scaled_add(&mut self, c: f64, other: &SpecState) {
        for (dst, src) in self.components_mut().into_iter().zip(other.components()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += c * s;
            }
        }
    }
}

/// Time derivative of a state, sample values on the state's grid.
#[derive(Clone)]
pub struct Tendency {
    pub da: Field,
    pub du: Field,
    pub db: Field,
}

/// Pointwise extremes observed while assembling the nonlinear terms; the
/// stepper's guards read these instead of paying extra transforms.
#[derive(Clone, Copy, Debug)]
pub(crate) struct StageObs {
    pub min_rho: f64,
    pub sup_a: f64,
    pub max_u: f64,
    pub max_b: f64,
}

// Work-grid scaffold, shared with the diagnostic integrals: trilinear
// quantities of band-limited fields are exact when sampled on the
// companion grid (or natively when no companion is needed).

pub(crate) struct Lift<'g> {
    pub native: &'g Grid,
    pub work: &'g Grid,
    padded: bool,
}

impl<'g> Lift<'g> {
    pub fn new(native: &'g Grid) -> Lift<'g> {
        match native.companion() {
            Some(c) => Lift { native, work: c, padded: true },
            None => Lift { native, work: native, padded: false },
        }
    }

    /// Native masked spectrum -> work-grid spectrum.
    pub fn up(&self, spec: &[Complex64]) -> Vec<Complex64> {
        if self.padded {
            self.native.embed(self.work, spec)
        } else {
            let mut v = spec.to_vec();
            self.native.apply_mask(&mut v);
            v
        }
    }

    /// Work-grid spectrum -> native masked spectrum.
    pub fn down(&self, spec: &[Complex64]) -> Vec<Complex64> {
        if self.padded {
            self.native.restrict(self.work, spec)
        } else {
            let mut v = spec.to_vec();
            self.native.apply_mask(&mut v);
            v
        }
    }

    pub fn inv(&self, spec: &[Complex64]) -> Vec<f64> {
        self.work.fft().inverse(spec)
    }

    pub fn fwd(&self, phys: &[f64]) -> Vec<Complex64> {
        self.work.fft().forward(phys)
    }
}

fn cross(a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
    let n = a[0].len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        out[0][i] = a[1][i] * b[2][i] - a[2][i] * b[1][i];
        out[1][i] = a[2][i] * b[0][i] - a[0][i] * b[2][i];
        out[2][i] = a[0][i] * b[1][i] - a[1][i] * b[0][i];
    }
    out
}

/// Density samples and the vacuum guard: fails if 1 + a dips to the floor.
fn density_checked(a_phys: &[f64], params: &PhysParams, t: f64) -> Result<Vec<f64>> {
    let mut min_rho = f64::INFINITY;
    let rho: Vec<f64> = a_phys
        .iter()
        .map(|&a| {
            let r = 1.0 + a;
            if r < min_rho {
                min_rho = r;
            }
            r
        })
        .collect();
    if !(min_rho >= params.vacuum_floor) {
        return Err(Error::Vacuum { t, min_rho, floor: params.vacuum_floor });
    }
    Ok(rho)
}

struct WorkState {
    a: Vec<f64>,
    u: [Vec<f64>; 3],
    b: [Vec<f64>; 3],
    ua: [Vec<Complex64>; 3],
    ba: [Vec<Complex64>; 3],
    aa: Vec<Complex64>,
}

/// Lift the state and bring (a, u, b) to physical samples on the work grid.
fn work_state(lift: &Lift, s: &SpecState) -> WorkState {
    let aa = lift.up(&s.a);
    let ua = [lift.up(&s.u[0]), lift.up(&s.u[1]), lift.up(&s.u[2])];
    let ba = [lift.up(&s.b[0]), lift.up(&s.b[1]), lift.up(&s.b[2])];
    WorkState {
        a: lift.inv(&aa),
        u: [lift.inv(&ua[0]), lift.inv(&ua[1]), lift.inv(&ua[2])],
        b: [lift.inv(&ba[0]), lift.inv(&ba[1]), lift.inv(&ba[2])],
        ua,
        ba,
        aa,
    }
}

/// Viscous operator mu Lap u + (lambda + mu) grad div u on the work grid,
/// returned as physical samples.
fn viscous_phys(lift: &Lift, params: &PhysParams, ua: &[Vec<Complex64>; 3]) -> [Vec<f64>; 3] {
    let wg = lift.work;
    let divu = div_spec(wg, [&ua[0], &ua[1], &ua[2]]);
    let gd = grad_spec(wg, &divu);
    let lm = params.lambda + params.mu;
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..3 {
        let mut l = laplace_spec(wg, &ua[i], false);
        for (v, g) in l.iter_mut().zip(gd[i].iter()) {
            *v = params.mu * *v + lm * g;
        }
        out[i] = lift.inv(&l);
    }
    out
}

/// Production nonlinear terms (f1, f2, f3) of a masked spectral state.
///
/// `include_u_divb` adds the -u div b part of f3; the stepper keeps b
/// solenoidal by projection and skips it, diagnostics on arbitrary states
/// keep it.
pub(crate) fn nonlinear_spec(
    grid: &Grid,
    params: &PhysParams,
    s: &SpecState,
    t: f64,
    include_u_divb: bool,
) -> Result<(SpecState, StageObs)> {
    let lift = Lift::new(grid);
    let wg = lift.work;
    let ws = work_state(&lift, s);
    let n = ws.a.len();

    let rho = density_checked(&ws.a, params, t)?;

    // Rotational advection and current-form magnetic force.
    let om_spec = curl_spec(wg, [&ws.ua[0], &ws.ua[1], &ws.ua[2]]);
    let om = [lift.inv(&om_spec[0]), lift.inv(&om_spec[1]), lift.inv(&om_spec[2])];
    let j_spec = curl_spec(wg, [&ws.ba[0], &ws.ba[1], &ws.ba[2]]);
    let j = [lift.inv(&j_spec[0]), lift.inv(&j_spec[1]), lift.inv(&j_spec[2])];
    let lu = viscous_phys(&lift, params, &ws.ua);

    let uxom = cross(&ws.u, &om);
    let jxb = cross(&j, &ws.b);

    let grad_a = if params.gamma_is_two() {
        None
    } else {
        let ga = grad_spec(wg, &ws.aa);
        Some([lift.inv(&ga[0]), lift.inv(&ga[1]), lift.inv(&ga[2])])
    };

    let mut f2_phys = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut au = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut q = vec![0.0; n];
    let mut obs = StageObs { min_rho: f64::INFINITY, sup_a: 0.0, max_u: 0.0, max_b: 0.0 };
    for i in 0..n {
        let inv_rho = 1.0 / rho[i];
        let i_a = ws.a[i] * inv_rho;
        for c in 0..3 {
            // u x omega + (1 - I) (j x b) - I L u  [- J grad a].
            let mut v = uxom[c][i] + inv_rho * jxb[c][i] - i_a * lu[c][i];
            if let Some(ga) = &grad_a {
                v -= params.coeff_j(ws.a[i]) * ga[c][i];
            }
            f2_phys[c][i] = v;
            au[c][i] = ws.a[i] * ws.u[c][i];
        }
        q[i] = 0.5 * (ws.u[0][i] * ws.u[0][i] + ws.u[1][i] * ws.u[1][i] + ws.u[2][i] * ws.u[2][i]);
        let b2 = ws.b[0][i] * ws.b[0][i] + ws.b[1][i] * ws.b[1][i] + ws.b[2][i] * ws.b[2][i];
        obs.min_rho = obs.min_rho.min(rho[i]);
        obs.sup_a = obs.sup_a.max(ws.a[i].abs());
        obs.max_u = obs.max_u.max(2.0 * q[i]);
        obs.max_b = obs.max_b.max(b2);
    }
    obs.max_u = obs.max_u.sqrt();
    obs.max_b = obs.max_b.sqrt();
    let uxb = cross(&ws.u, &ws.b);

    // f1 = -div(a u).
    let au_spec = [lift.fwd(&au[0]), lift.fwd(&au[1]), lift.fwd(&au[2])];
    let mut f1 = div_spec(wg, [&au_spec[0], &au_spec[1], &au_spec[2]]);
    for v in f1.iter_mut() {
        *v = -*v;
    }

    // f2 -= grad(|u|^2/2), taken spectrally.
    let q_spec = lift.fwd(&q);
    let mut f2 = [lift.fwd(&f2_phys[0]), lift.fwd(&f2_phys[1]), lift.fwd(&f2_phys[2])];
    for (c, f) in f2.iter_mut().enumerate() {
        for (v, dq) in f.iter_mut().zip(d_spec(wg, &q_spec, c)) {
            *v -= dq;
        }
    }

    // f3 = curl(u x b) [- u div b].
    let uxb_spec = [lift.fwd(&uxb[0]), lift.fwd(&uxb[1]), lift.fwd(&uxb[2])];
    let mut f3 = curl_spec(wg, [&uxb_spec[0], &uxb_spec[1], &uxb_spec[2]]);
    if include_u_divb {
        let divb = lift.inv(&div_spec(wg, [&ws.ba[0], &ws.ba[1], &ws.ba[2]]));
        for c in 0..3 {
            let term: Vec<f64> = (0..n).map(|i| ws.u[c][i] * divb[i]).collect();
            for (v, w) in f3[c].iter_mut().zip(lift.fwd(&term)) {
                *v -= w;
            }
        }
    }

    let out = SpecState {
        a: lift.down(&f1),
        u: [lift.down(&f2[0]), lift.down(&f2[1]), lift.down(&f2[2])],
        b: [lift.down(&f3[0]), lift.down(&f3[1]), lift.down(&f3[2])],
    };
    Ok((out, obs))
}

/// The f-terms assembled exactly as written, by direct contraction. Test
/// and diagnostic reference for [`nonlinear_spec`].
#[cfg(test)]
pub(crate) fn nonlinear_spec_literal(
    grid: &Grid,
    params: &PhysParams,
    s: &SpecState,
    t: f64,
) -> Result<SpecState> {
    let lift = Lift::new(grid);
    let wg = lift.work;
    let ws = work_state(&lift, s);
    let n = ws.a.len();

    density_checked(&ws.a, params, t)?;

    // Every first derivative of a, u, b as physical samples.
    let ga: [Vec<f64>; 3] = {
        let g = grad_spec(wg, &ws.aa);
        [lift.inv(&g[0]), lift.inv(&g[1]), lift.inv(&g[2])]
    };
    let du: [[Vec<f64>; 3]; 3] = std::array::from_fn(|c| {
        let g = grad_spec(wg, &ws.ua[c]);
        [lift.inv(&g[0]), lift.inv(&g[1]), lift.inv(&g[2])]
    });
    let db: [[Vec<f64>; 3]; 3] = std::array::from_fn(|c| {
        let g = grad_spec(wg, &ws.ba[c]);
        [lift.inv(&g[0]), lift.inv(&g[1]), lift.inv(&g[2])]
    });
    let lu = viscous_phys(&lift, params, &ws.ua);

    let mut f1 = vec![0.0; n];
    let mut f2 = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut f3 = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let divu = du[0][0][i] + du[1][1][i] + du[2][2][i];
        f1[i] = -(ws.u[0][i] * ga[0][i] + ws.u[1][i] * ga[1][i] + ws.u[2][i] * ga[2][i])
            - ws.a[i] * divu;
        let i_a = params.coeff_i(ws.a[i]);
        let j_a = params.coeff_j(ws.a[i]);
        for c in 0..3 {
            let u_grad_u =
                ws.u[0][i] * du[c][0][i] + ws.u[1][i] * du[c][1][i] + ws.u[2][i] * du[c][2][i];
            let b_grad_b =
                ws.b[0][i] * db[c][0][i] + ws.b[1][i] * db[c][1][i] + ws.b[2][i] * db[c][2][i];
            // grad(|b|^2/2)_c = sum_m b_m d_c b_m.
            let grad_b2 =
                ws.b[0][i] * db[0][c][i] + ws.b[1][i] * db[1][c][i] + ws.b[2][i] * db[2][c][i];
            let lorentz = b_grad_b - grad_b2;
            f2[c][i] =
                -u_grad_u + lorentz - j_a * ga[c][i] - i_a * lu[c][i] - i_a * lorentz;
            let u_grad_b =
                ws.u[0][i] * db[c][0][i] + ws.u[1][i] * db[c][1][i] + ws.u[2][i] * db[c][2][i];
            let b_grad_u =
                ws.b[0][i] * du[c][0][i] + ws.b[1][i] * du[c][1][i] + ws.b[2][i] * du[c][2][i];
            f3[c][i] = -u_grad_b + b_grad_u - ws.b[c][i] * divu;
        }
    }

    Ok(SpecState {
        a: lift.down(&lift.fwd(&f1)),
        u: [lift.down(&lift.fwd(&f2[0])), lift.down(&lift.fwd(&f2[1])), lift.down(&lift.fwd(&f2[2]))],
        b: [lift.down(&lift.fwd(&f3[0])), lift.down(&lift.fwd(&f3[1])), lift.down(&lift.fwd(&f3[2]))],
    })
}

/// Linear part of the tendency, assembled mode by mode.
pub(crate) fn linear_spec(grid: &Grid, params: &PhysParams, s: &SpecState) -> SpecState {
    let mut da = div_spec(grid, [&s.u[0], &s.u[1], &s.u[2]]);
    for v in da.iter_mut() {
        *v = -*v;
    }
    let ga = grad_spec(grid, &s.a);
    let divu = div_spec(grid, [&s.u[0], &s.u[1], &s.u[2]]);
    let gd = grad_spec(grid, &divu);
    let lm = params.lambda + params.mu;
    let du: [Vec<Complex64>; 3] = std::array::from_fn(|c| {
        let mut l = laplace_spec(grid, &s.u[c], false);
        for i in 0..l.len() {
            l[i] = params.mu * l[i] + lm * gd[c][i] - ga[c][i];
        }
        l
    });
    let db: [Vec<Complex64>; 3] = std::array::from_fn(|c| {
        let mut l = laplace_spec(grid, &s.b[c], true);
        for v in l.iter_mut() {
            *v *= params.sigma;
        }
        l
    });
    SpecState { a: da, u: du, b: db }
}

/// Full tendency straight from the primitive-variable system:
///
///   d rho / dt = -div(rho u)
///   du/dt = -u . grad u - P'(rho)/rho grad rho
///           + (1/rho) [mu Lap u + (lambda + mu) grad div u]
///           + (1/rho) [b . grad b - grad(|b|^2/2)]
///   db/dt = sigma Lap_h b + curl(u x b) - u div b
///
/// No I/J coefficients and no linear/nonlinear split anywhere; independent
/// cross-check for linear + [`nonlinear_spec`].
pub(crate) fn primitive_spec(
    grid: &Grid,
    params: &PhysParams,
    s: &SpecState,
    t: f64,
) -> Result<SpecState> {
    let lift = Lift::new(grid);
    let wg = lift.work;
    let ws = work_state(&lift, s);
    let n = ws.a.len();

    let rho = density_checked(&ws.a, params, t)?;

    let ga: [Vec<f64>; 3] = {
        let g = grad_spec(wg, &ws.aa);
        [lift.inv(&g[0]), lift.inv(&g[1]), lift.inv(&g[2])]
    };
    let du: [[Vec<f64>; 3]; 3] = std::array::from_fn(|c| {
        let g = grad_spec(wg, &ws.ua[c]);
        [lift.inv(&g[0]), lift.inv(&g[1]), lift.inv(&g[2])]
    });
    let db: [[Vec<f64>; 3]; 3] = std::array::from_fn(|c| {
        let g = grad_spec(wg, &ws.ba[c]);
        [lift.inv(&g[0]), lift.inv(&g[1]), lift.inv(&g[2])]
    });
    let lu = viscous_phys(&lift, params, &ws.ua);

    // Mass: -div(rho u) through the single product rho u.
    let rho_u: [Vec<f64>; 3] =
        std::array::from_fn(|c| (0..n).map(|i| rho[i] * ws.u[c][i]).collect());
    let rho_u_spec = [lift.fwd(&rho_u[0]), lift.fwd(&rho_u[1]), lift.fwd(&rho_u[2])];
    let mut da = div_spec(wg, [&rho_u_spec[0], &rho_u_spec[1], &rho_u_spec[2]]);
    for v in da.iter_mut() {
        *v = -*v;
    }

    // Momentum, fully pointwise.
    let mut du_t = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let inv_rho = 1.0 / rho[i];
        let p_prime = params.pressure_prime(rho[i]);
        for c in 0..3 {
            let u_grad_u =
                ws.u[0][i] * du[c][0][i] + ws.u[1][i] * du[c][1][i] + ws.u[2][i] * du[c][2][i];
            let b_grad_b =
                ws.b[0][i] * db[c][0][i] + ws.b[1][i] * db[c][1][i] + ws.b[2][i] * db[c][2][i];
            let grad_b2 =
                ws.b[0][i] * db[0][c][i] + ws.b[1][i] * db[1][c][i] + ws.b[2][i] * db[2][c][i];
            du_t[c][i] = -u_grad_u - p_prime * inv_rho * ga[c][i]
                + inv_rho * lu[c][i]
                + inv_rho * (b_grad_b - grad_b2);
        }
    }

    // Induction: sigma Lap_h b + curl(u x b) - u div b.
    let uxb = cross(&ws.u, &ws.b);
    let uxb_spec = [lift.fwd(&uxb[0]), lift.fwd(&uxb[1]), lift.fwd(&uxb[2])];
    let mut db_t = curl_spec(wg, [&uxb_spec[0], &uxb_spec[1], &uxb_spec[2]]);
    let divb = lift.inv(&div_spec(wg, [&ws.ba[0], &ws.ba[1], &ws.ba[2]]));
    for c in 0..3 {
        let term: Vec<f64> = (0..n).map(|i| ws.u[c][i] * divb[i]).collect();
        for (v, w) in db_t[c].iter_mut().zip(lift.fwd(&term)) {
            *v -= w;
        }
        let lh = laplace_spec(wg, &ws.ba[c], true);
        for (v, l) in db_t[c].iter_mut().zip(lh) {
            *v += params.sigma * l;
        }
    }

    Ok(SpecState {
        a: lift.down(&da),
        u: [lift.down(&lift.fwd(&du_t[0])), lift.down(&lift.fwd(&du_t[1])), lift.down(&lift.fwd(&du_t[2]))],
        b: [lift.down(&db_t[0]), lift.down(&db_t[1]), lift.down(&db_t[2])],
    })
}

fn tendency_from_spec(grid: &Arc<Grid>, spec: &SpecState) -> Tendency {
    let st = spec.to_state(grid);
    Tendency { da: st.a, du: st.u, db: st.b }
}

/// Nonlinear terms (f1, f2, f3) of a state as physical fields.
pub fn nonlinear_terms(params: &PhysParams, state: &State) -> Result<Tendency> {
    params.validate()?;
    let g = state.grid();
    let s = SpecState::from_state(state);
    let (f, _) = nonlinear_spec(g, params, &s, 0.0, true)?;
    Ok(tendency_from_spec(g, &f))
}

/// Full tendency in the reformulated variables: linear part plus the
/// f-terms.
pub fn rhs_reformulated(params: &PhysParams, state: &State) -> Result<Tendency> {
    params.validate()?;
    let g = state.grid();
    let s = SpecState::from_state(state);
    let (mut f, _) = nonlinear_spec(g, params, &s, 0.0, true)?;
    let lin = linear_spec(g, params, &s);
    f.scaled_add(1.0, &lin);
    Ok(tendency_from_spec(g, &f))
}

/// Full tendency from the primitive-variable system; see
/// [`rhs_reformulated`] for the quantity it must match.
pub fn rhs_primitive(params: &PhysParams, state: &State) -> Result<Tendency> {
    params.validate()?;
    let g = state.grid();
    let s = SpecState::from_state(state);
    let f = primitive_spec(g, params, &s, 0.0)?;
    Ok(tendency_from_spec(g, &f))
}
