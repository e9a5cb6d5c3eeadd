//! Integrating-factor RK4 time stepping.
//!
//! The linear part of the system is solved exactly, mode by mode. Writing
//! theta = (div u)^ = i k . u, each mode carries
//!
//!   d/dt (a, theta) = [[0, -1], [k^2, -nu k^2]] (a, theta),   nu = lambda + 2 mu,
//!
//! for the acoustic pair, a plain factor exp(-mu k^2 tau) for the
//! transverse velocity and exp(-sigma kh^2 tau) for the magnetic field
//! (kh^2 = k1^2 + k2^2: purely vertical modes do not decay). The 2 x 2
//! block exponentiates in closed form through its trace/deviator split; all
//! four entries are real, so conjugate-symmetric spectra stay
//! conjugate-symmetric and real fields stay real.
//!
//! The nonlinear terms enter through the classical IFRK4 stage pattern. One
//! step of size h with E(tau) the propagator above:
//!
//!   k1 = N(s),            s1 = E(h/2) (s + h/2 k1)... in integrating-factor
//! variables the stages below follow Cox--Matthews; each stage evaluates N
//! once, and the step costs four nonlinear evaluations.
//!
//! Guards: the density sup-norm must stay below 1/2 (the regime the
//! reformulation is built for), the density itself above the vacuum floor,
//! every sample finite, and the fixed step size within a CFL bound
//! h <= cfl_safety * min dx / (max|u| + 1 + max|b|) read off the freshest
//! nonlinear stage. The magnetic field is reprojected onto divergence-free
//! fields after every step, so the -u div b induction term is skipped.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ledger::BasicDissipation;
use crate::ops::project_spec;
use crate::params::PhysParams;
use crate::rhs::{nonlinear_spec, SpecState, StageObs};
use crate::state::State;
use rustfft::num_complex::Complex64;
use std::sync::Arc;

/// Which right-hand side the stepper integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// The complete system.
    Full,
    /// Linear part only; used by dispersion and decay probes.
    Linear,
}

/// Safety factor in the advective CFL guard.
pub const CFL_SAFETY: f64 = 0.5;

/// Density sup-norm ceiling; beyond it the run stops rather than leave the
/// regime the formulation assumes.
pub const SUP_A_LIMIT: f64 = 0.5;

/// Exact solver of the linear part over a fixed interval tau.
pub(crate) struct Propagator {
    /// exp(-mu k^2 tau) for the transverse velocity.
    visc: Vec<f64>,
    /// exp(-sigma kh^2 tau) for the magnetic field.
    mag: Vec<f64>,
    /// Acoustic 2 x 2 block on (a, theta), row-major.
    p11: Vec<f64>,
    p12: Vec<f64>,
    p21: Vec<f64>,
    p22: Vec<f64>,
}

/// cosh(beta tau) and sinh(beta tau)/beta scaled by exp(alpha tau), computed
/// without overflow: both exp(alpha +- beta) have non-positive exponents
/// here because beta^2 = alpha^2 - k^2 < alpha^2 and alpha < 0.
fn scaled_cosh_sinhc(alpha: f64, beta_sq: f64, tau: f64) -> (f64, f64) {
    let x = beta_sq * tau * tau;
    if x.abs() < 1e-4 {
        let e = (alpha * tau).exp();
        let c = 1.0 + x / 2.0 + x * x / 24.0 + x * x * x / 720.0;
        let s = tau * (1.0 + x / 6.0 + x * x / 120.0 + x * x * x / 5040.0);
        (e * c, e * s)
    } else if beta_sq > 0.0 {
        let beta = beta_sq.sqrt();
        let ep = ((alpha + beta) * tau).exp();
        let em = ((alpha - beta) * tau).exp();
        ((ep + em) / 2.0, (ep - em) / (2.0 * beta))
    } else {
        let omega = (-beta_sq).sqrt();
        let e = (alpha * tau).exp();
        (e * (omega * tau).cos(), e * (omega * tau).sin() / omega)
    }
}

impl Propagator {
    pub fn new(grid: &Grid, params: &PhysParams, tau: f64) -> Propagator {
        let [n1, n2, n3] = grid.n();
        let len = grid.len();
        let nu = params.nu();
        let mut p = Propagator {
            visc: vec![0.0; len],
            mag: vec![0.0; len],
            p11: vec![0.0; len],
            p12: vec![0.0; len],
            p21: vec![0.0; len],
            p22: vec![0.0; len],
        };
        let (k1, k2, k3) =
            (grid.k_deriv_table(0), grid.k_deriv_table(1), grid.k_deriv_table(2));
        let mut idx = 0;
        for j1 in 0..n1 {
            for j2 in 0..n2 {
                let kh_sq = k1[j1] * k1[j1] + k2[j2] * k2[j2];
                for j3 in 0..n3 {
                    let ksq = kh_sq + k3[j3] * k3[j3];
                    p.visc[idx] = (-params.mu * ksq * tau).exp();
                    p.mag[idx] = (-params.sigma * kh_sq * tau).exp();
                    if ksq > 0.0 {
                        let alpha = -0.5 * nu * ksq;
                        let beta_sq = alpha * alpha - ksq;
                        let (ec, es) = scaled_cosh_sinhc(alpha, beta_sq, tau);
                        // exp(tau A) = e^(alpha tau) (C I + S N),
                        // N = [[nu k^2/2, -1], [k^2, -nu k^2/2]].
                        p.p11[idx] = ec + es * 0.5 * nu * ksq;
                        p.p12[idx] = -es;
                        p.p21[idx] = es * ksq;
                        p.p22[idx] = ec - es * 0.5 * nu * ksq;
                    } else {
                        p.p11[idx] = 1.0;
                        p.p22[idx] = 1.0;
                    }
                    idx += 1;
                }
            }
        }
        p
    }

    pub fn apply(&self, grid: &Grid, s: &SpecState) -> SpecState {
        let [n1, n2, n3] = grid.n();
        let (k1, k2, k3) =
            (grid.k_deriv_table(0), grid.k_deriv_table(1), grid.k_deriv_table(2));
        let mut out = SpecState::zeros(grid.len());
        let mut idx = 0;
        for j1 in 0..n1 {
            let a1 = k1[j1];
            for j2 in 0..n2 {
                let a2 = k2[j2];
                for j3 in 0..n3 {
                    let a3 = k3[j3];
                    let ksq = a1 * a1 + a2 * a2 + a3 * a3;
                    let ah = s.a[idx];
                    let u = [s.u[0][idx], s.u[1][idx], s.u[2][idx]];
                    if ksq > 0.0 {
                        let kdotu = a1 * u[0] + a2 * u[1] + a3 * u[2];
                        let theta = Complex64::i() * kdotu;
                        let a_new = self.p11[idx] * ah + self.p12[idx] * theta;
                        let theta_new = self.p21[idx] * ah + self.p22[idx] * theta;
                        out.a[idx] = a_new;
                        // u' = visc u - i k (theta' - visc theta) / k^2.
                        let v = self.visc[idx];
                        let corr = Complex64::i() * ((theta_new - v * theta) / ksq);
                        out.u[0][idx] = v * u[0] - a1 * corr;
                        out.u[1][idx] = v * u[1] - a2 * corr;
                        out.u[2][idx] = v * u[2] - a3 * corr;
                    } else {
                        out.a[idx] = ah;
                        out.u[0][idx] = u[0];
                        out.u[1][idx] = u[1];
                        out.u[2][idx] = u[2];
                    }
                    let m = self.mag[idx];
                    out.b[0][idx] = m * s.b[0][idx];
                    out.b[1][idx] = m * s.b[1][idx];
                    out.b[2][idx] = m * s.b[2][idx];
                    idx += 1;
                }
            }
        }
        out
    }
}

pub struct Stepper {
    grid: Arc<Grid>,
    params: PhysParams,
    dt: f64,
    mode: Mode,
    e_half: Propagator,
    e_full: Propagator,
    s: SpecState,
    t: f64,
    steps: u64,
}

impl Stepper {
    /// Starts from `state` at time `t0`. The state is band-limited on entry
    /// (everything downstream assumes masked spectra) and the magnetic part
    /// is projected divergence-free.
    pub fn new(state: &State, params: PhysParams, dt: f64, mode: Mode, t0: f64) -> Result<Stepper> {
        params.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("dt = {dt} must be positive and finite")));
        }
        state.check_admissible(&params, t0)?;
        let grid = state.grid().clone();
        let mut s = SpecState::from_state(state);
        project_spec(&grid, &mut s.b);
        Ok(Stepper {
            e_half: Propagator::new(&grid, &params, dt / 2.0),
            e_full: Propagator::new(&grid, &params, dt),
            grid,
            params,
            dt,
            mode,
            s,
            t: t0,
            steps: 0,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Physical snapshot of the current state.
    pub fn state(&self) -> State {
        self.s.to_state(&self.grid)
    }

    /// Physical snapshot that the stepper also re-ingests as its new
    /// internal spectrum, through the same transform, band limit and
    /// solenoidal projection a fresh stepper applies. A run resumed from a
    /// checkpoint of the returned snapshot therefore continues with exactly
    /// the coefficients this stepper carries forward, bit for bit. The
    /// driver calls this at every ledger sample so published rows,
    /// checkpoints and the live trajectory agree.
    pub fn commit_state(&mut self) -> State {
        let snap = self.s.to_state(&self.grid);
        let mut s = SpecState::from_state(&snap);
        project_spec(&self.grid, &mut s.b);
        self.s = s;
        snap
    }

    #[cfg(test)]
    pub(crate) fn spec(&self) -> &SpecState {
        &self.s
    }

    /// Weighted dissipation of the current state, read off the internal
    /// spectral coefficients without any transforms. Cheap enough to call
    /// every step, which is what the energy balance audit does.
    pub fn basic_dissipation(&self) -> BasicDissipation {
        crate::ledger::basic_dissipation_spec(&self.grid, &self.s, &self.params)
    }

    fn guards(&self, obs: &StageObs) -> Result<()> {
        if obs.sup_a > SUP_A_LIMIT {
            return Err(Error::DensityGuard { t: self.t, sup_a: obs.sup_a });
        }
        let limit = CFL_SAFETY * self.grid.min_dx() / (obs.max_u + 1.0 + obs.max_b);
        if self.dt > limit {
            return Err(Error::Cfl { t: self.t, dt: self.dt, limit });
        }
        Ok(())
    }

    fn nonlinear(&self, s: &SpecState, t: f64) -> Result<(SpecState, StageObs)> {
        nonlinear_spec(&self.grid, &self.params, s, t, false)
    }

    /// One IFRK4 step. On an error the state is left at the step start.
    pub fn step(&mut self) -> Result<()> {
        let h = self.dt;
        match self.mode {
            Mode::Linear => {
                self.s = self.e_full.apply(&self.grid, &self.s);
            }
            Mode::Full => {
                let (k1, obs) = self.nonlinear(&self.s, self.t)?;
                self.guards(&obs)?;

                // s1 = E2 s, stage states s2 = s1 + h/2 E2 k1, s3 = s1 + h/2 k2,
                // s4 = E2 (s1 + h k3).
                let s1 = self.e_half.apply(&self.grid, &self.s);
                let ek1 = self.e_half.apply(&self.grid, &k1);
                let mut s2 = s1.clone();
                s2.scaled_add(h / 2.0, &ek1);
                let (k2, _) = self.nonlinear(&s2, self.t + h / 2.0)?;
                let mut s3 = s1.clone();
                s3.scaled_add(h / 2.0, &k2);
                let (k3, _) = self.nonlinear(&s3, self.t + h / 2.0)?;
                let mut pre4 = s1.clone();
                pre4.scaled_add(h, &k3);
                let s4 = self.e_half.apply(&self.grid, &pre4);
                let (k4, _) = self.nonlinear(&s4, self.t + h)?;

                // s' = E s + h/6 [E k1 + 2 E2 k2 + 2 E2 k3 + k4].
                let mut acc = self.s.clone();
                acc.scaled_add(h / 6.0, &k1);
                let mut next = self.e_full.apply(&self.grid, &acc);
                let mut mid = k2;
                mid.scaled_add(1.0, &k3);
                let emid = self.e_half.apply(&self.grid, &mid);
                next.scaled_add(h / 3.0, &emid);
                next.scaled_add(h / 6.0, &k4);

                project_spec(&self.grid, &mut next.b);
                self.s = next;
            }
        }
        self.t += h;
        self.steps += 1;
        Ok(())
    }

    /// Steps until `n` steps have been taken in total.
    pub fn advance(&mut self, n: u64) -> Result<()> {
        while self.steps < n {
            self.step()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn cubic(n: usize) -> Arc<Grid> {
        Arc::new(Grid::cubic(n).unwrap())
    }

    fn random_state(g: &Arc<Grid>, seed: u64, amp: f64) -> State {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut mk = |rank: usize| {
            let data: Vec<Vec<f64>> = (0..rank)
                .map(|_| (0..g.len()).map(|_| rng.gen_range(-amp..amp)).collect())
                .collect();
            let f = Field::new(g.clone(), data).unwrap();
            let mut s = f.to_spectral();
            s.mask();
            s.to_physical()
        };
        State::new(mk(1), mk(3), mk(3)).unwrap()
    }

    fn random_spec(g: &Arc<Grid>, seed: u64) -> SpecState {
        SpecState::from_state(&random_state(g, seed, 0.3))
    }

    fn max_spec_diff(a: &SpecState, b: &SpecState) -> f64 {
        let mut worst = 0.0f64;
        for (x, y) in a.components().into_iter().zip(b.components()) {
            for (p, q) in x.iter().zip(y.iter()) {
                worst = worst.max((p - q).norm());
            }
        }
        worst
    }

    /// Dense matrix exponential of the per-mode linear operator by scaled
    /// Taylor series, as an independent oracle for the closed form.
    fn taylor_block(nu: f64, ksq: f64, tau: f64) -> [[f64; 2]; 2] {
        let a = [[0.0, -1.0], [ksq, -nu * ksq]];
        let mut scaled = a;
        let mut halvings = 0;
        let mut norm = ksq.max(nu * ksq).max(1.0) * tau;
        while norm > 0.5 {
            norm /= 2.0;
            halvings += 1;
        }
        let h = tau / f64::powi(2.0, halvings);
        for row in scaled.iter_mut() {
            for v in row.iter_mut() {
                *v *= h;
            }
        }
        // exp(scaled) by Taylor.
        let mut result = [[1.0, 0.0], [0.0, 1.0]];
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        for m in 1..30 {
            let mut next = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        next[i][j] += term[i][l] * scaled[l][j] / m as f64;
                    }
                }
            }
            term = next;
            for i in 0..2 {
                for j in 0..2 {
                    result[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..halvings {
            let mut sq = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        sq[i][j] += result[i][l] * result[l][j];
                    }
                }
            }
            result = sq;
        }
        result
    }

    #[test]
    fn acoustic_block_matches_taylor_exponential() {
        // Oscillatory (k^2 = 1, nu = 0.5), overdamped (k^2 = 100, nu = 3)
        // and near-critical (nu = 2, k^2 = 1 gives beta = 0) regimes.
        for (nu, ksq, tau) in [
            (0.5, 1.0, 0.3),
            (3.0, 100.0, 0.05),
            (2.0, 1.0, 0.4),
            (2.0 + 1e-9, 1.0, 0.4),
            (1.0, 17.0, 0.8),
        ] {
            let alpha = -0.5 * nu * ksq;
            let beta_sq = alpha * alpha - ksq;
            let (ec, es) = scaled_cosh_sinhc(alpha, beta_sq, tau);
            let p = [
                [ec + es * 0.5 * nu * ksq, -es],
                [es * ksq, ec - es * 0.5 * nu * ksq],
            ];
            let want = taylor_block(nu, ksq, tau);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (p[i][j] - want[i][j]).abs() <= 1e-12 * want[i][j].abs().max(1.0),
                        "nu {nu} ksq {ksq}: entry ({i},{j}) {} vs {}",
                        p[i][j],
                        want[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn propagator_semigroup() {
        let g = cubic(12);
        let p = PhysParams::new(0.8, -0.3, 1.3, 2.0).unwrap();
        let e1 = Propagator::new(&g, &p, 0.05);
        let e2 = Propagator::new(&g, &p, 0.1);
        let s = random_spec(&g, 5);
        let twice = e1.apply(&g, &e1.apply(&g, &s));
        let once = e2.apply(&g, &s);
        assert!(max_spec_diff(&twice, &once) <= 1e-12);
    }

    #[test]
    fn propagator_keeps_fields_real() {
        let g = cubic(12);
        let p = PhysParams::default();
        let e = Propagator::new(&g, &p, 0.07);
        let s = random_spec(&g, 9);
        let out = e.apply(&g, &s);
        let sf = crate::field::SpectralField::new(
            g.clone(),
            vec![out.a.clone(), out.u[0].clone(), out.b[2].clone()],
        )
        .unwrap();
        assert!(sf.hermitian_defect() <= 1e-13);
    }

    #[test]
    fn horizontal_magnetic_mode_decays_vertical_does_not() {
        let g = cubic(16);
        let p = PhysParams { sigma: 0.7, ..PhysParams::default() };
        let mut st = State::zero(g.clone());
        st.b = Field::vector_from_fn(g.clone(), |_, x2, x3| [x2.sin() + x3.sin(), 0.0, 0.0]);
        let t_end: f64 = 0.5;
        let mut stepper = Stepper::new(&st, p, 0.01, Mode::Linear, 0.0).unwrap();
        stepper.advance(50).unwrap();
        let out = stepper.state();
        // sin(x2) decays by e^(-sigma t); sin(x3) is untouched.
        let decay = (-0.7 * t_end).exp();
        let want = Field::vector_from_fn(g.clone(), |_, x2, x3| {
            [decay * x2.sin() + x3.sin(), 0.0, 0.0]
        });
        for c in 0..3 {
            for (a, b) in out.b.component(c).iter().zip(want.component(c)) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
        assert!(out.a.max_abs() <= 1e-14);
        assert!(out.u.max_abs() <= 1e-14);
    }

    #[test]
    fn linear_stepping_is_the_exact_propagator() {
        // With no nonlinear terms the stage structure collapses and n steps
        // must equal one application over n h; acoustic modes included.
        let g = cubic(12);
        let p = PhysParams::new(0.25, 0.0, 1.0, 2.0).unwrap();
        let st = random_state(&g, 31, 0.1);
        let mut stepper = Stepper::new(&st, p, 0.02, Mode::Linear, 0.0).unwrap();
        stepper.advance(25).unwrap();
        let big = Propagator::new(&g, &p, 0.5);
        let mut s0 = SpecState::from_state(&st);
        project_spec(&g, &mut s0.b);
        let want = big.apply(&g, &s0);
        assert!(max_spec_diff(stepper.spec(), &want) <= 1e-11);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let g = cubic(8);
        let st = State::zero(g.clone());
        let mut stepper =
            Stepper::new(&st, PhysParams::default(), 0.05, Mode::Full, 0.0).unwrap();
        stepper.advance(3).unwrap();
        let out = stepper.state();
        assert!(out.a.max_abs() == 0.0 && out.u.max_abs() == 0.0 && out.b.max_abs() == 0.0);
    }

    #[test]
    fn fourth_order_convergence() {
        let g = cubic(12);
        let p = PhysParams::default();
        let st = random_state(&g, 55, 0.05);
        let t_end = 0.08;
        let run = |dt: f64| {
            let mut s = Stepper::new(&st, p, dt, Mode::Full, 0.0).unwrap();
            s.advance((t_end / dt).round() as u64).unwrap();
            s.state()
        };
        let reference = run(t_end / 64.0);
        let err = |trial: &State| {
            let mut worst = 0.0f64;
            for (x, y) in
                [(&trial.a, &reference.a), (&trial.u, &reference.u), (&trial.b, &reference.b)]
            {
                for c in 0..x.rank() {
                    for (a, b) in x.component(c).iter().zip(y.component(c)) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
            worst
        };
        let e1 = err(&run(t_end / 4.0));
        let e2 = err(&run(t_end / 8.0));
        let ratio = e1 / e2;
        assert!(
            ratio > 12.0 && ratio < 24.0,
            "expected ~16x error drop per halving, got {ratio} ({e1} -> {e2})"
        );
    }

    #[test]
    fn magnetic_field_stays_solenoidal() {
        let g = cubic(12);
        let st = random_state(&g, 70, 0.05);
        let mut stepper =
            Stepper::new(&st, PhysParams::default(), 0.01, Mode::Full, 0.0).unwrap();
        // Initial projection handles the random (non-solenoidal) b.
        assert!(stepper.state().div_b_norm() <= 1e-12);
        stepper.advance(10).unwrap();
        assert!(stepper.state().div_b_norm() <= 1e-12);
    }

    #[test]
    fn density_guard_stops_the_run() {
        let g = cubic(8);
        let mut st = State::zero(g.clone());
        st.a = Field::scalar_from_fn(g.clone(), |x1, _, _| 0.6 * x1.cos());
        let mut stepper =
            Stepper::new(&st, PhysParams::default(), 1e-3, Mode::Full, 0.0).unwrap();
        assert!(matches!(stepper.step(), Err(Error::DensityGuard { sup_a, .. }) if sup_a > 0.5));
    }

    #[test]
    fn cfl_guard_stops_the_run() {
        let g = cubic(8);
        let mut st = State::zero(g.clone());
        st.u = Field::vector_from_fn(g.clone(), |x1, _, _| [4.0 * x1.sin(), 0.0, 0.0]);
        let mut stepper =
            Stepper::new(&st, PhysParams::default(), 0.5, Mode::Full, 0.0).unwrap();
        match stepper.step() {
            Err(Error::Cfl { dt, limit, .. }) => assert!(dt > limit),
            other => panic!("expected the step-size guard, got {other:?}"),
        }
    }

    #[test]
    fn step_throughput_32_cubed() {
        let g = cubic(32);
        let st = random_state(&g, 99, 0.01);
        let mut stepper =
            Stepper::new(&st, PhysParams::default(), 1e-3, Mode::Full, 0.0).unwrap();
        stepper.step().unwrap();
        let t0 = std::time::Instant::now();
        let reps = 5;
        stepper.advance(1 + reps).unwrap();
        let per_step = t0.elapsed().as_secs_f64() / reps as f64;
        println!("full step at 32^3: {:.1} ms", per_step * 1e3);
        assert!(per_step < 0.5, "step too slow: {per_step} s");
    }
}
