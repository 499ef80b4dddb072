//! Radial steady states `-Δφ - Vφ + φ⁵ = 0`.
//!
//! States are located by shooting in the central amplitude `a = φ(0)` and then
//! refined by Newton's method on the grid. In `w = r·φ` the equation reads
//! `w'' = -V w + w⁵/r⁴` with `w(0) = 0`; decaying solutions tend to a constant
//! (`φ ~ c/r`), every other shot blows up in finite radius because of the
//! defocusing sign, and the direction of the blow-up flips across each state.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{count_sign_changes, l6_norm, lp_norm, FOUR_PI};
use crate::grid::{Grid, RadialField};
use crate::ode::{Dopri, State, Stop, Tolerances};
use crate::potentials::{composite_potential, scaled_family, w_profile, w_rescaled, Potential};
use crate::tridiag::{self, SymTridiag};

/// Max-norm bound on the discrete `w`-equation for an accepted state.
pub const TOL_STEADY: f64 = 1e-8;
/// `|w|` beyond which a shot counts as blown up.
pub const BLOWUP_CAP: f64 = 1e6;
/// Width, in `a`, to which outcome brackets are bisected.
pub const BRACKET_WIDTH: f64 = 1e-12;
/// Two states closer than this in `L⁶` are the same state.
pub const DEDUP_L6: f64 = 1e-6;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_HALVINGS: usize = 8;
const DECAY_SLOPE_TOL: f64 = 1e-10;
const SIGN_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    #[serde(skip)]
    pub phi: RadialField,
    pub sign_changes: usize,
    #[serde(rename = "J")]
    pub energy_j: f64,
    pub residual: f64,
    pub decay_const: f64,
    #[serde(rename = "a")]
    pub shoot_param: f64,
}

impl SteadyState {
    pub fn zero(grid: Grid) -> Self {
        Self {
            phi: RadialField::zeros(grid),
            sign_changes: 0,
            energy_j: 0.0,
            residual: 0.0,
            decay_const: 0.0,
            shoot_param: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.phi.max_abs() == 0.0
    }

    /// Builds the record for a field, evaluating its residual and energy.
    pub fn from_field(phi: RadialField, v: &Potential) -> Result<Self> {
        v.grid().check_same(phi.grid())?;
        let w = phi.to_w();
        let residual = max_abs(&steady_residual(v, &w));
        let energy_j = energy_j(&phi, v)?;
        let g = *phi.grid();
        let decay_const = (0..g.len()).map(|i| (1.0 + g.r(i)) * phi.values()[i].abs()).fold(0.0, f64::max);
        Ok(Self {
            sign_changes: phi.sign_changes(SIGN_FLOOR),
            shoot_param: phi.values()[0],
            phi,
            energy_j,
            residual,
            decay_const,
        })
    }

    pub fn negated(&self) -> Self {
        Self { phi: self.phi.scaled(-1.0), shoot_param: -self.shoot_param, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    fn of(x: f64) -> Self {
        if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShotOutcome {
    DecaysPositive,
    DecaysNegative,
    BlowsUp(Sign),
    Indeterminate,
}

impl ShotOutcome {
    /// `+1`/`-1` for blow-up direction, `0` for decay, `NaN` if undecided.
    pub fn direction(&self) -> f64 {
        match self {
            ShotOutcome::BlowsUp(Sign::Positive) => 1.0,
            ShotOutcome::BlowsUp(Sign::Negative) => -1.0,
            ShotOutcome::DecaysPositive | ShotOutcome::DecaysNegative => 0.0,
            ShotOutcome::Indeterminate => f64::NAN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Shot {
    pub a: f64,
    /// `φ` on the grid; past a blow-up radius `w` is held at its last value.
    pub trajectory: RadialField,
    pub outcome: ShotOutcome,
    pub sign_changes: usize,
    /// Radius where `|w|` crossed the cap, if it did inside the grid.
    pub blowup_radius: Option<f64>,
    /// Nodes integrated before blow-up or failure.
    pub valid_nodes: usize,
    pub diagnostic: Option<String>,
}

/// Integrates the steady-state ODE from the origin with `φ(0) = a`.
///
/// Shots that reach `r_max` are classified by the far-field slope
/// `B = w' + w⁵/(3r³)`: the decaying branch has `B → 0`, otherwise `w` grows
/// linearly with the sign of `B` and blows up in that direction.
pub fn shoot(v: &Potential, a: f64) -> Shot {
    let grid = *v.grid();
    let n = grid.n();
    if a == 0.0 {
        return Shot {
            a,
            trajectory: RadialField::zeros(grid),
            outcome: ShotOutcome::DecaysPositive,
            sign_changes: 0,
            blowup_radius: None,
            valid_nodes: n + 1,
            diagnostic: None,
        };
    }
    let r0 = grid.dr() / 10.0;
    let c3 = (a.powi(5) - v.eval(0.0) * a) / 6.0;
    let y0: State = [a * r0 + c3 * r0.powi(3), a + 3.0 * c3 * r0 * r0];
    let rhs = |r: f64, y: &State| -> State {
        let r4 = r * r * r * r;
        [y[1], -v.eval(r) * y[0] + y[0].powi(5) / r4]
    };
    let mut ode = Dopri::new(rhs, r0, y0, r0, Tolerances::default());
    let mut w = vec![0.0; n + 1];
    let mut outcome = None;
    let mut blowup_radius = None;
    let mut diagnostic = None;
    let mut valid = n + 1;
    for i in 1..=n {
        match ode.advance_to(grid.r(i), |_, y| y[0].abs() > BLOWUP_CAP) {
            Stop::Reached => w[i] = ode.y[0],
            Stop::Event => {
                blowup_radius = Some(ode.r);
                outcome = Some(ShotOutcome::BlowsUp(Sign::of(ode.y[0])));
                valid = i;
                break;
            }
            other => {
                diagnostic = Some(format!("integration stopped with {other:?} at r = {}", ode.r));
                outcome = Some(ShotOutcome::Indeterminate);
                valid = i;
                break;
            }
        }
    }
    for i in valid..=n {
        w[i] = w[valid - 1];
    }
    let outcome = outcome.unwrap_or_else(|| {
        let rm = grid.r_max();
        let (wm, dwm) = (ode.y[0], ode.y[1]);
        let slope = dwm + wm.powi(5) / (3.0 * rm.powi(3));
        let scale = w.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if slope.abs() * rm <= DECAY_SLOPE_TOL * scale && wm.abs() <= 10.0 * a.abs() {
            if wm < 0.0 {
                ShotOutcome::DecaysNegative
            } else {
                ShotOutcome::DecaysPositive
            }
        } else {
            ShotOutcome::BlowsUp(Sign::of(slope))
        }
    });
    let mut trajectory = RadialField::from_w(grid, &w);
    trajectory.values_mut()[0] = a;
    let floor = SIGN_FLOOR * w[..valid].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Shot {
        a,
        sign_changes: count_sign_changes(&w[1..valid], floor),
        trajectory,
        outcome,
        blowup_radius,
        valid_nodes: valid,
        diagnostic,
    }
}

/// Discrete steady-state residual in the `w` variables, rows `1..=n`.
///
/// Interior rows use the three-point stencil; the outer row imposes the
/// far-field condition `w' = −w⁵/(3r³)` of the decaying tail
/// `w = c + c⁵/(6r²)` through a ghost node.
pub fn steady_residual(v: &Potential, w: &[f64]) -> Vec<f64> {
    let g = *v.grid();
    let n = g.n();
    let h2 = g.dr() * g.dr();
    let vv = v.values().values();
    let mut res = vec![0.0; n];
    for i in 1..=n {
        let r = g.r(i);
        let lap = if i < n { w[i + 1] - 2.0 * w[i] + w[i - 1] } else { 2.0 * (w[n - 1] - w[n]) };
        res[i - 1] = -lap / h2 - vv[i] * w[i] + w[i].powi(5) / (r * r * r * r);
    }
    res[n - 1] += 2.0 * w[n].powi(5) / (3.0 * g.dr() * g.r_max().powi(3));
    res
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Jacobian of [`steady_residual`]: `(sub, diag, sup)` over unknowns `w_1..w_n`.
fn steady_jacobian(v: &Potential, w: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let g = *v.grid();
    let n = g.n();
    let h2 = g.dr() * g.dr();
    let vv = v.values().values();
    let mut sub = vec![-1.0 / h2; n - 1];
    sub[n - 2] = -2.0 / h2;
    let sup = vec![-1.0 / h2; n - 1];
    let mut diag: Vec<f64> = (1..=n)
        .map(|i| {
            let r = g.r(i);
            2.0 / h2 - vv[i] + 5.0 * w[i].powi(4) / (r * r * r * r)
        })
        .collect();
    diag[n - 1] += 10.0 * w[n].powi(4) / (3.0 * g.dr() * g.r_max().powi(3));
    (sub, diag, sup)
}

/// Damped Newton iteration on the grid equation, starting from `guess`.
pub fn refine(v: &Potential, guess: &RadialField) -> Result<SteadyState> {
    v.grid().check_same(guess.grid())?;
    let g = *v.grid();
    let mut w = guess.to_w();
    w[0] = 0.0;
    let mut res = steady_residual(v, &w);
    let mut norm = max_abs(&res);
    for _ in 0..NEWTON_MAX_ITER {
        if norm <= TOL_STEADY {
            break;
        }
        let (sub, diag, sup) = steady_jacobian(v, &w);
        let step = tridiag::solve(&sub, &diag, &sup, &res)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=NEWTON_HALVINGS {
            let mut trial = w.clone();
            for (j, s) in step.iter().enumerate() {
                trial[j + 1] -= t * s;
            }
            let trial_res = steady_residual(v, &trial);
            let trial_norm = max_abs(&trial_res);
            if trial_norm.is_finite() && trial_norm < norm {
                w = trial;
                res = trial_res;
                norm = trial_norm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm > TOL_STEADY {
        return Err(Error::NewtonDiverged { iterations: NEWTON_MAX_ITER, residual: norm });
    }
    SteadyState::from_field(RadialField::from_w(g, &w), v)
}

/// `J(φ) = ∫ |∇φ|²/2 − Vφ²/2 + φ⁶/6`.
///
/// The gradient term uses forward differences of `w` together with the
/// identity `∫₀^R u_r² r² dr = ∫₀^R w_r² dr − w(R)²/R`; the other two terms use
/// the trapezoid rule. This is the quadrature the leapfrog scheme conserves,
/// so `E((φ, 0)) = J(φ)` holds exactly.
pub fn energy_j(phi: &RadialField, v: &Potential) -> Result<f64> {
    v.grid().check_same(phi.grid())?;
    Ok(static_energy_w(v, &phi.to_w()))
}

pub(crate) fn static_energy_w(v: &Potential, w: &[f64]) -> f64 {
    let g = *v.grid();
    let n = g.n();
    let h = g.dr();
    let vv = v.values().values();
    let mut grad = 0.0;
    for i in 0..n {
        let d = w[i + 1] - w[i];
        grad += d * d;
    }
    grad = grad / (2.0 * h) - w[n] * w[n] / (2.0 * g.r_max());
    let mut bulk = 0.0;
    for i in 1..=n {
        let r = g.r(i);
        let wt = if i == n { 0.5 } else { 1.0 };
        bulk += wt * (-0.5 * vv[i] * w[i] * w[i] + w[i].powi(6) / (6.0 * r * r * r * r));
    }
    FOUR_PI * (grad + h * bulk)
}

/// All steady states whose central value lies in `[a_min, a_max]` (plus the
/// zero state), sorted by `J`.
pub fn find_steady_states(v: &Potential, a_min: f64, a_max: f64, n_scan: usize) -> Result<Vec<SteadyState>> {
    if !(a_min < a_max) || n_scan < 2 {
        return Err(Error::Domain(format!("invalid scan [{a_min}, {a_max}] with {n_scan} points")));
    }
    let grid = *v.grid();
    let amps: Vec<f64> = (0..n_scan)
        .map(|k| a_min + (a_max - a_min) * k as f64 / (n_scan - 1) as f64)
        .collect();
    let dirs: Vec<f64> = amps.par_iter().map(|&a| shoot(v, a).outcome.direction()).collect();

    let mut brackets = Vec::new();
    for k in 0..n_scan {
        if dirs[k] == 0.0 {
            brackets.push((amps[k], amps[k]));
        } else if k + 1 < n_scan && dirs[k] * dirs[k + 1] < 0.0 {
            brackets.push((amps[k], amps[k + 1]));
        }
    }

    let candidates: Vec<Option<SteadyState>> = brackets
        .par_iter()
        .map(|&(lo, hi)| {
            let guess = bracket_guess(v, lo, hi);
            match refine(v, &guess) {
                Ok(s) => Some(s),
                Err(e) => {
                    log::warn!("dropping candidate in [{lo}, {hi}]: {e}");
                    None
                }
            }
        })
        .collect();

    let mut states = vec![SteadyState::zero(grid)];
    for s in candidates.into_iter().flatten() {
        if states.iter().all(|t| l6_distance(&t.phi, &s.phi) >= DEDUP_L6) {
            states.push(s);
        }
    }
    states.sort_by(|a, b| a.energy_j.total_cmp(&b.energy_j).then(b.shoot_param.total_cmp(&a.shoot_param)));
    Ok(states)
}

fn l6_distance(a: &RadialField, b: &RadialField) -> f64 {
    a.sub(b).map(|d| l6_norm(&d)).unwrap_or(f64::INFINITY)
}

/// The shooting trajectory through a bracket `[lo, hi]` of central values
/// whose shots leave in opposite directions, bisected to [`BRACKET_WIDTH`].
pub fn shooting_solution(v: &Potential, lo: f64, hi: f64) -> Result<RadialField> {
    let (lo, hi) = (lo.min(hi), lo.max(hi));
    let (d_lo, d_hi) = (shoot(v, lo).outcome.direction(), shoot(v, hi).outcome.direction());
    if !(d_lo * d_hi < 0.0) {
        return Err(Error::NoDichotomy(format!("shots at {lo} and {hi} leave in directions {d_lo} and {d_hi}")));
    }
    Ok(bracket_guess(v, lo, hi))
}

/// Bisects the blow-up direction across `[lo, hi]` and returns an initial
/// guess for Newton built from the bracketing shots.
fn bracket_guess(v: &Potential, mut lo: f64, mut hi: f64) -> RadialField {
    let mut shot_lo = shoot(v, lo);
    if lo == hi {
        return shot_lo.trajectory;
    }
    let mut shot_hi = shoot(v, hi);
    let d_lo = shot_lo.outcome.direction();
    while hi - lo > BRACKET_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = shoot(v, mid);
        let d = s.outcome.direction();
        if d == 0.0 {
            return s.trajectory;
        }
        if d.is_nan() {
            break;
        }
        if d == d_lo {
            lo = mid;
            shot_lo = s;
        } else {
            hi = mid;
            shot_hi = s;
        }
    }
    splice_guess(v.grid(), &shot_lo, &shot_hi)
}

/// Follows the two bracketing trajectories while they agree and continues
/// with the harmonic tail `w = const` once they separate.
fn splice_guess(grid: &Grid, lo: &Shot, hi: &Shot) -> RadialField {
    let wl = lo.trajectory.to_w();
    let wh = hi.trajectory.to_w();
    let scale = wl.iter().chain(&wh).fold(0.0_f64, |m, x| m.max(x.abs())).min(BLOWUP_CAP);
    let limit = lo.valid_nodes.min(hi.valid_nodes);
    let mut w: Vec<f64> = wl.iter().zip(&wh).map(|(a, b)| 0.5 * (a + b)).collect();
    let split = (1..limit).find(|&i| (wl[i] - wh[i]).abs() > 1e-3 * scale.max(1e-300)).unwrap_or(limit);
    let hold = w[split.saturating_sub(1).max(1)];
    for x in w.iter_mut().skip(split.max(2)) {
        *x = hold;
    }
    w[0] = 0.0;
    RadialField::from_w(*grid, &w)
}

/// Returns `sup (1+r)|φ|` over the outer half of the grid and whether
/// `(1+r)|φ(r)|` is non-increasing, within 5%, over `[r_max/10, r_max]`.
pub fn decay_check(state: &SteadyState) -> (f64, bool) {
    let g = *state.phi.grid();
    let vals = state.phi.values();
    let weighted = |i: usize| (1.0 + g.r(i)) * vals[i].abs();
    let outer = (g.n() / 2..=g.n()).map(weighted).fold(0.0, f64::max);
    let start = g.index_below(g.r_max() / 10.0);
    let mut running_min = f64::INFINITY;
    let mut pass = true;
    for i in start..=g.n() {
        let x = weighted(i);
        if x > 1.05 * running_min {
            pass = false;
            break;
        }
        running_min = running_min.min(x);
    }
    (outer, pass)
}

/// Result of the fixed-point construction `φ = W − W_λ + η`.
#[derive(Debug, Clone, Serialize)]
pub struct ExcitedConstruction {
    pub lambda: f64,
    #[serde(flatten)]
    pub state: SteadyState,
    pub eta_l6: f64,
    pub w_l6: f64,
    /// `‖f_λ‖_{L^{6/5}}` of the source term.
    pub source_l65: f64,
    pub iterations: usize,
    pub solver: ExcitedSolver,
    /// Why the plain fixed-point iteration was abandoned, if it was.
    pub fixed_point_failure: Option<String>,
    /// Negative eigenvalues of `L_λ` at `W − W_λ`.
    pub linear_negative: usize,
    pub under_resolved: bool,
}

/// The source term `f_λ = −(W−W_λ)⁵ + W⁵ − W_λ⁵ − V₁W_λ + W V_{1λ}` with
/// `V₁ = 2W⁴`, `V_{1λ} = 2W_λ⁴`.
pub fn excited_source(grid: Grid, lambda: f64) -> RadialField {
    RadialField::from_fn(grid, |r| {
        let w = w_profile(r);
        let wl = w_rescaled(r, lambda);
        -(w - wl).powi(5) + w.powi(5) - wl.powi(5) - 2.0 * w.powi(4) * wl + 2.0 * w * wl.powi(4)
    })
}

/// Coefficient of the linear operator `L_λ = −Δ + P_λ`.
pub fn excited_linear_coefficient(r: f64, lambda: f64) -> f64 {
    let w = w_profile(r);
    let wl = w_rescaled(r, lambda);
    3.0 * w.powi(4) + 3.0 * wl.powi(4) - 20.0 * w * wl.powi(3) - 20.0 * wl * w.powi(3)
        + 30.0 * w * w * wl * wl
}

const PICARD_MAX_ITER: usize = 500;

/// Solves `η = L_λ⁻¹ (f − N(η))` by fixed-point iteration and returns the
/// sign-changing state `W − W_λ + η` of the two-bubble potential.
///
/// The source is the discrete residual of `W − W_λ`, which equals `f_λ` up to
/// the truncation error of the stencil; with it the fixed point is an exact
/// grid steady state. A final Newton polish brings the residual below
/// [`TOL_STEADY`].
///
/// When `L_λ` has a negative eigenvalue close to zero the map stops
/// contracting even though its fixed point exists; the same equation is then
/// solved by Newton's method from `η = 0` and the result says so.
pub fn construct_stable_excited(grid: Grid, lambda: f64, tol: f64) -> Result<ExcitedConstruction> {
    let v = composite_potential(grid, lambda)?;
    let n = grid.n();
    let h2 = grid.dr() * grid.dr();
    let d = RadialField::from_fn(grid, |r| w_profile(r) - w_rescaled(r, lambda));
    let wd = d.to_w();
    let p: Vec<f64> = (0..=n).map(|i| excited_linear_coefficient(grid.r(i), lambda)).collect();

    // L_λ with the same boundary rows as the Newton system.
    let diag: Vec<f64> = (1..=n).map(|i| 2.0 / h2 + p[i]).collect();
    let mut sub = vec![-1.0 / h2; n - 1];
    sub[n - 2] = -2.0 / h2;
    let sup = vec![-1.0 / h2; n - 1];
    let mut sym_diag = diag.clone();
    sym_diag[n - 1] *= 0.5;
    let linear_negative = SymTridiag::new(sym_diag, vec![-1.0 / h2; n - 1]).sturm_count(0.0);

    let source: Vec<f64> = steady_residual(&v, &wd).iter().map(|x| -x).collect();
    let op = FixedPointOperator { grid, sub, diag, sup, source };
    let (eta, iterations, solver, fixed_point_failure) = match op.iterate(&d, tol) {
        Ok((eta, it)) => (eta, it, ExcitedSolver::FixedPoint, None),
        Err((it, reason)) => {
            log::warn!("fixed-point map at lambda = {lambda}: {reason}; solving the same equation by Newton");
            (RadialField::zeros(grid), it, ExcitedSolver::Newton, Some(reason))
        }
    };
    let fail = |reason: String| match &fixed_point_failure {
        Some(fp) => Error::NoContraction { lambda, reason: format!("{fp}; {reason}") },
        None => Error::NoContraction { lambda, reason },
    };
    let state = refine(&v, &d.add(&eta)?).map_err(|e| fail(format!("newton: {e}")))?;
    let w_l6 = l6_norm(&RadialField::from_fn(grid, w_profile));
    if l6_norm(&state.phi) < 1e-6 * w_l6 {
        return Err(fail("iteration collapsed to the zero state".into()));
    }
    if state.sign_changes == 0 {
        return Err(fail("fixed point does not change sign".into()));
    }
    let eta_final = state.phi.sub(&d)?;
    Ok(ExcitedConstruction {
        lambda,
        eta_l6: l6_norm(&eta_final),
        w_l6,
        source_l65: lp_norm(&excited_source(grid, lambda), 6.0 / 5.0),
        iterations,
        solver,
        fixed_point_failure,
        linear_negative,
        under_resolved: v.under_resolved(),
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitedSolver {
    /// The map `η ↦ L_λ⁻¹(f_λ − N(η))` contracted.
    FixedPoint,
    /// The map did not contract; its fixed point was found by Newton's method
    /// started from `η = 0`.
    Newton,
}

struct FixedPointOperator {
    grid: Grid,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    source: Vec<f64>,
}

impl FixedPointOperator {
    /// Iterates until successive iterates differ by less than `tol` in `L⁶`.
    /// On failure returns the iteration count and the reason.
    fn iterate(&self, d: &RadialField, tol: f64) -> std::result::Result<(RadialField, usize), (usize, String)> {
        let grid = self.grid;
        let n = grid.n();
        let dv = d.values();
        let mut eta = RadialField::zeros(grid);
        let mut prev_norm = 0.0;
        for iterations in 1..=PICARD_MAX_ITER {
            let ev = eta.values();
            let mut rhs: Vec<f64> = (1..=n)
                .map(|i| {
                    let (dd, e) = (dv[i], ev[i]);
                    let nl = 10.0 * dd.powi(3) * e * e + 10.0 * dd * dd * e.powi(3) + 5.0 * dd * e.powi(4) + e.powi(5);
                    self.source[i - 1] - grid.r(i) * nl
                })
                .collect();
            // far-field boundary term, nonlinear in the outer value
            let rm = grid.r_max();
            let outer = |u: f64| 2.0 * (rm * u).powi(5) / (3.0 * grid.dr() * rm.powi(3));
            rhs[n - 1] -= outer(dv[n] + ev[n]) - outer(dv[n]);
            let sol = tridiag::solve(&self.sub, &self.diag, &self.sup, &rhs)
                .map_err(|e| (iterations, format!("linear operator not invertible: {e}")))?;
            let mut w_eta = vec![0.0; n + 1];
            w_eta[1..].copy_from_slice(&sol);
            let next = RadialField::from_w(grid, &w_eta);
            let change = l6_norm(&next.sub(&eta).expect("same grid"));
            let norm = l6_norm(&next);
            log::debug!("fixed point {iterations}: change {change:e}, norm {norm:e}");
            if !norm.is_finite() || (prev_norm > 0.0 && norm > 2.0 * prev_norm) {
                return Err((iterations, "fixed-point iterates diverge".into()));
            }
            eta = next;
            prev_norm = norm;
            if change < tol {
                return Ok((eta, iterations));
            }
        }
        Err((PICARD_MAX_ITER, format!("no convergence in {PICARD_MAX_ITER} iterations")))
    }
}

/// Coupling `α` in `[lo, hi]` at which `−Δ − αV` acquires its `n_bound`-th
/// radial bound state, bisected to `tol`.
pub fn bifurcation_coupling(v: &Potential, n_bound: usize, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let zero = RadialField::zeros(*v.grid());
    let count = |a: f64| -> Result<usize> { crate::spectrum::count_negative(&scaled_family(v, a)?, &zero) };
    if n_bound == 0 || count(lo)? >= n_bound || count(hi)? < n_bound {
        return Err(Error::NoDichotomy(format!("bound state {n_bound} does not appear for couplings in [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if count(mid)? >= n_bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A small sign-changing state of `αV` just past a bifurcation from zero.
#[derive(Debug, Clone, Serialize)]
pub struct BifurcatedState {
    pub alpha_c: f64,
    pub alpha: f64,
    pub state: SteadyState,
}

/// The one-node state that bifurcates from `φ = 0` when the second bound
/// state of `−Δ − αV` appears at `α₂`, taken at `α = α₂(1 + offset)`.
///
/// Central values are scanned over `(0, a_max]`; the state of smallest
/// amplitude with exactly one sign change is returned.
pub fn first_excited_branch(v: &Potential, alpha_hi: f64, offset: f64, a_max: f64, n_scan: usize) -> Result<BifurcatedState> {
    let alpha_c = bifurcation_coupling(v, 2, 0.0, alpha_hi, 1e-10 * alpha_hi)?;
    let alpha = alpha_c * (1.0 + offset);
    let va = scaled_family(v, alpha)?;
    let states = find_steady_states(&va, a_max / n_scan as f64, a_max, n_scan)?;
    let state = states
        .into_iter()
        .filter(|s| s.sign_changes == 1)
        .min_by(|a, b| a.shoot_param.abs().total_cmp(&b.shoot_param.abs()))
        .ok_or_else(|| Error::NoDichotomy(format!("no one-node state with 0 < phi(0) <= {a_max} at alpha = {alpha}")))?;
    Ok(BifurcatedState { alpha_c, alpha, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::aubin_talenti;

    #[test]
    fn zero_shot_is_degenerate_decay() {
        let g = Grid::new(256, 20.0).unwrap();
        let v = Potential::gaussian(g, 8.0, 1.0).unwrap();
        let s = shoot(&v, 0.0);
        assert_eq!(s.outcome, ShotOutcome::DecaysPositive);
        assert_eq!(s.sign_changes, 0);
        assert_eq!(s.trajectory.max_abs(), 0.0);
    }

    #[test]
    fn free_defocusing_shots_blow_up_with_their_sign() {
        let g = Grid::new(512, 20.0).unwrap();
        let v = Potential::zero(g);
        for a in [0.1, 0.5, 1.0, 2.0] {
            assert_eq!(shoot(&v, a).outcome, ShotOutcome::BlowsUp(Sign::Positive));
            assert_eq!(shoot(&v, -a).outcome, ShotOutcome::BlowsUp(Sign::Negative));
        }
    }

    #[test]
    fn no_potential_gives_only_zero_state() {
        let g = Grid::new(512, 20.0).unwrap();
        let v = Potential::zero(g);
        let states = find_steady_states(&v, -3.0, 3.0, 61).unwrap();
        assert_eq!(states.len(), 1);
        assert!(states[0].is_zero());
    }

    #[test]
    fn energy_j_is_even_and_vanishes_at_zero() {
        let g = Grid::new(400, 20.0).unwrap();
        let v = Potential::gaussian(g, 5.0, 1.0).unwrap();
        assert_eq!(energy_j(&RadialField::zeros(g), &v).unwrap(), 0.0);
        let f = RadialField::from_fn(g, |r| 0.7 * (-r * r / 4.0).exp());
        let j1 = energy_j(&f, &v).unwrap();
        let j2 = energy_j(&f.scaled(-1.0), &v).unwrap();
        assert_eq!(j1, j2);
    }

    #[test]
    fn energy_j_of_w_matches_closed_form() {
        let g = Grid::new(20000, 2000.0).unwrap();
        let v = Potential::from_spec(g, &crate::potentials::PotentialSpec::Composite { lambda: 1.0 }).unwrap();
        let v = crate::potentials::scaled_family(&v, 0.5).unwrap(); // 2W⁴
        let w = aubin_talenti(g);
        let j = energy_j(&w, &v).unwrap();
        // J(W) = ∫ |∇W|²/2 − W⁶ + W⁶/6 = (1/2 − 5/6)∫W⁶ since ∫|∇W|² = ∫W⁶.
        // ∫_{ℝ³} W⁶ = 4π ∫ r²(1+r²/3)^{-3} dr = 4π · (3√3 π/16).
        let int_w6 = 4.0 * std::f64::consts::PI * 3.0 * 3f64.sqrt() * std::f64::consts::PI / 16.0;
        // Truncation at r_max drops ∫_{r>R}|∇W|²/2 ≈ 6π/R of gradient energy.
        let expected = (0.5 - 5.0 / 6.0) * int_w6 - 6.0 * std::f64::consts::PI / g.r_max();
        assert!((j - expected).abs() < 1e-3 * expected.abs(), "{j} vs {expected}");
    }

    #[test]
    fn decay_check_on_zero_and_w() {
        let g = Grid::new(4000, 400.0).unwrap();
        let z = SteadyState::zero(g);
        assert_eq!(decay_check(&z), (0.0, true));
        let v = Potential::zero(g);
        let w = SteadyState::from_field(aubin_talenti(g), &v).unwrap();
        let (c, pass) = decay_check(&w);
        assert!(pass);
        assert!((c - 3f64.sqrt()).abs() < 0.01 * 3f64.sqrt(), "{c}");
    }

    #[test]
    fn source_term_matches_discrete_residual() {
        // f_λ from the closed form vs the discrete residual of W − W_λ.
        for n in [4096usize, 8192] {
            let g = Grid::new(n, 40.0).unwrap();
            let lambda = 4.0;
            let v = composite_potential(g, lambda).unwrap();
            let d = RadialField::from_fn(g, |r| w_profile(r) - w_rescaled(r, lambda));
            let res = steady_residual(&v, &d.to_w());
            let f = excited_source(g, lambda);
            let err = (1..n / 2).map(|i| (-res[i - 1] / g.r(i) - f.values()[i]).abs()).fold(0.0, f64::max);
            assert!(err < 5e-2 * (4096.0 / n as f64).powi(2), "n = {n}: {err}");
        }
    }

    #[test]
    fn small_lambda_is_rejected() {
        let g = Grid::new(2048, 40.0).unwrap();
        assert!(matches!(construct_stable_excited(g, 1.0, 1e-10), Err(Error::NoContraction { .. })));
    }
}
