//! Leapfrog time integration of `u_tt = Δu + Vu − u⁵` in the `w = r·u`
//! representation, with energy bookkeeping and the measurements recorded along
//! a run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{annulus_energy, l6_norm, lp_norm, radiative_annulus_energy, Grid, RadialField, RadialPair, FOUR_PI};
use crate::potentials::Potential;
use crate::spectrum::SpectralData;
use crate::steady::{static_energy_w, SteadyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// First-order Sommerfeld condition `w_t = −w_r` at `r_max`.
    Outgoing,
    /// `w(r_max)` held fixed; measurements after first contact are not trusted.
    ReflectingGuard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    /// Time step; `None` means `cfl·dr`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub cfl: f64,
    pub boundary: Boundary,
    /// Steps between stored snapshots, 0 for none.
    pub snapshot_stride: usize,
    /// Time between recorded samples.
    pub sample_interval: f64,
    /// `false` drops the quintic term (linear test mode).
    pub nonlinear: bool,
    /// Exterior energies are measured outside `r = R + t` for each `R` here.
    pub exterior_offsets: Vec<f64>,
    /// Radius `A` of the ball used for local distances.
    pub local_radius: f64,
    pub drift_tol: f64,
    /// Change of `w` near `r_max` that counts as boundary contact.
    pub contact_tol: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: 10.0,
            cfl: 0.9,
            boundary: Boundary::Outgoing,
            snapshot_stride: 0,
            sample_interval: 0.25,
            nonlinear: true,
            exterior_offsets: Vec::new(),
            local_radius: 10.0,
            drift_tol: 1e-6,
            contact_tol: 1e-9,
        }
    }
}

impl EvolveConfig {
    /// The step actually used: the requested one shrunk so that a whole number
    /// of steps lands on `t_end`.
    pub fn resolve_dt(&self, grid: &Grid) -> Result<(f64, usize)> {
        let dt = self.dt.unwrap_or(self.cfl * grid.dr());
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        if dt > grid.dr() * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("CFL violated: dt = {dt} > dr = {}", grid.dr())));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Domain(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::Domain("sample_interval must be positive".into()));
        }
        if self.t_end == 0.0 {
            return Ok((dt, 0));
        }
        let steps = (self.t_end / dt - 1e-9).ceil().max(1.0) as usize;
        Ok((self.t_end / steps as f64, steps))
    }
}

/// One state of the run together with its time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: RadialPair,
}

/// Reference state and spectrum for mode-coefficient tracking.
#[derive(Debug, Clone, Copy)]
pub struct ModeReference<'a> {
    pub phi: &'a RadialField,
    pub spec: &'a SpectralData,
}

/// Time series recorded by [`evolve`]. Multi-series fields are indexed
/// `[series][sample]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionTrace {
    pub dt: f64,
    pub local_radius: f64,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub exterior_offsets: Vec<f64>,
    /// Radiative energy outside `r = max(R + t, 0)`; NaN once the cone leaves
    /// the grid.
    pub exterior_energy: Vec<Vec<f64>>,
    /// `λ_i(t) = ⟨u − φ, ρ_i⟩`.
    pub mode_coeffs: Vec<Vec<f64>>,
    /// Growing-mode coefficients `a_i⁺(t)`.
    pub growing_coeffs: Vec<Vec<f64>>,
    /// `d_j(t)`, the `Ḣ¹×L²` distance to reference `j` over `r ≤ A`.
    pub local_dists: Vec<Vec<f64>>,
    /// `‖u − φ_j‖_{L⁶}`.
    pub l6_dists: Vec<Vec<f64>>,
    /// Energy contained in `r ≤ A`.
    pub local_energy: Vec<f64>,
    /// Running `∫₀ᵗ ‖u − φ₀‖⁵_{L¹⁰} ds` against the first reference (or 0).
    pub strichartz: Vec<f64>,
    pub reference_energies: Vec<f64>,
    pub boundary_contact_time: Option<f64>,
    /// Largest relative drift of the scheme's modified energy before
    /// boundary contact.
    pub max_drift: f64,
    /// The same for the unmodified energy; contains an `O(dt²)` offset.
    pub max_raw_drift: f64,
    pub drift_ok: bool,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
    #[serde(skip)]
    pub final_state: RadialPair,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Working state of the scheme on `w`, `w_t`.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    grid: Grid,
    v: &'a [f64],
    inv_r4: Vec<f64>,
    pub w: Vec<f64>,
    pub wt: Vec<f64>,
    force: Vec<f64>,
    pub t: f64,
    boundary: Boundary,
    nonlinear: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(data: &RadialPair, v: &'a Potential, boundary: Boundary, nonlinear: bool) -> Result<Self> {
        v.grid().check_same(data.grid())?;
        if !data.u.is_finite() || !data.ut.is_finite() {
            return Err(Error::Domain("initial data is not finite".into()));
        }
        let grid = *v.grid();
        let inv_r4 = (0..grid.len()).map(|i| if i == 0 { 0.0 } else { grid.r(i).powi(-4) }).collect();
        let mut s = Self {
            grid,
            v: v.values().values(),
            inv_r4,
            w: data.u.to_w(),
            wt: data.ut.to_w(),
            force: vec![0.0; grid.len()],
            t: 0.0,
            boundary,
            nonlinear,
        };
        if boundary == Boundary::ReflectingGuard {
            let n = grid.n();
            s.wt[n] = 0.0;
        }
        s.compute_force();
        Ok(s)
    }

    fn compute_force(&mut self) {
        let n = self.grid.n();
        let h2 = self.grid.dr() * self.grid.dr();
        let w = &self.w;
        for i in 1..n {
            let mut f = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / h2 + self.v[i] * w[i];
            if self.nonlinear {
                f -= w[i].powi(5) * self.inv_r4[i];
            }
            self.force[i] = f;
        }
    }

    /// One kick-drift-kick step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let n = self.grid.n();
        let half = 0.5 * dt;
        for i in 1..n {
            self.wt[i] += half * self.force[i];
        }
        let w_edge = self.w[n];
        let w_inner = self.w[n - 1];
        for i in 1..n {
            self.w[i] += dt * self.wt[i];
        }
        if self.boundary == Boundary::Outgoing {
            let new_edge = w_edge - dt / self.grid.dr() * (w_edge - w_inner);
            self.wt[n] = (new_edge - w_edge) / dt;
            self.w[n] = new_edge;
        }
        self.compute_force();
        let mut finite = true;
        for i in 1..n {
            self.wt[i] += half * self.force[i];
            finite &= self.wt[i].is_finite();
        }
        self.t += dt;
        if !finite || !self.w[n].is_finite() {
            return Err(Error::Integration { time: self.t, reason: "non-finite value in the scheme".into() });
        }
        Ok(())
    }

    pub fn energy(&self, v: &Potential) -> f64 {
        let h = self.grid.dr();
        let n = self.grid.n();
        let kinetic: f64 = self.wt[1..n].iter().map(|x| x * x).sum::<f64>() + 0.5 * self.wt[n] * self.wt[n];
        let static_part = if self.nonlinear {
            static_energy_w(v, &self.w)
        } else {
            linear_static_energy_w(v, &self.w)
        };
        static_part + FOUR_PI * 0.5 * h * kinetic
    }

    /// The `O(dt⁴)` modified energy of the scheme at integer steps,
    /// `E + dt²/12·⟨w_t, U''w_t⟩ − dt²/24·|∇U|²` in the mass-weighted form.
    pub fn shadow_energy(&self, v: &Potential, dt: f64) -> f64 {
        let n = self.grid.n();
        let h = self.grid.dr();
        let h2 = h * h;
        let p = &self.wt;
        let mut curvature = 0.0;
        let mut gradient = 0.0;
        for i in 1..n {
            let mut jp = (p[i + 1] - 2.0 * p[i] + p[i - 1]) / h2 + self.v[i] * p[i];
            if self.nonlinear {
                jp -= 5.0 * self.w[i].powi(4) * self.inv_r4[i] * p[i];
            }
            curvature -= p[i] * jp;
            gradient += self.force[i] * self.force[i];
        }
        self.energy(v) + FOUR_PI * h * dt * dt * (curvature / 12.0 - gradient / 24.0)
    }

    pub fn pair(&self) -> RadialPair {
        RadialPair { u: RadialField::from_w(self.grid, &self.w), ut: RadialField::from_w(self.grid, &self.wt) }
    }
}

fn linear_static_energy_w(v: &Potential, w: &[f64]) -> f64 {
    let g = *v.grid();
    let n = g.n();
    let h = g.dr();
    let vv = v.values().values();
    let mut grad: f64 = (0..n).map(|i| (w[i + 1] - w[i]).powi(2)).sum();
    grad = grad / (2.0 * h) - w[n] * w[n] / (2.0 * g.r_max());
    let mut bulk = 0.0;
    for i in 1..=n {
        let wt = if i == n { 0.5 } else { 1.0 };
        bulk -= wt * 0.5 * vv[i] * w[i] * w[i];
    }
    FOUR_PI * (grad + h * bulk)
}

/// A single leapfrog step of the nonlinear equation.
pub fn step(state: &RadialPair, v: &Potential, dt: f64, boundary: Boundary) -> Result<RadialPair> {
    if dt > v.grid().dr() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("CFL violated: dt = {dt} > dr = {}", v.grid().dr())));
    }
    let mut s = Stepper::new(state, v, boundary, true)?;
    s.step(dt)?;
    Ok(s.pair())
}

/// `E(u, u_t) = ∫ |∇u|²/2 + u_t²/2 − Vu²/2 + u⁶/6`, in the quadrature
/// conserved by the scheme.
pub fn energy(state: &RadialPair, v: &Potential) -> Result<f64> {
    let s = Stepper::new(state, v, Boundary::ReflectingGuard, true)?;
    let h = v.grid().dr();
    let n = v.grid().n();
    let wt = state.ut.to_w();
    let kinetic: f64 = wt[1..n].iter().map(|x| x * x).sum::<f64>() + 0.5 * wt[n] * wt[n];
    Ok(static_energy_w(v, &s.w) + FOUR_PI * 0.5 * h * kinetic)
}

/// Energy in `r ≤ A`, using the same conventions as [`energy`].
fn local_energy(s: &Stepper, a: f64) -> f64 {
    let g = s.grid;
    let h = g.dr();
    let m = g.index_below(a).min(g.n());
    let mut grad = 0.0;
    for i in 0..m {
        grad += (s.w[i + 1] - s.w[i]).powi(2);
    }
    let rm = g.r(m);
    grad = grad / (2.0 * h) - if m > 0 { s.w[m] * s.w[m] / (2.0 * rm) } else { 0.0 };
    let mut bulk = 0.0;
    for i in 1..=m {
        let wgt = if i == m { 0.5 } else { 1.0 };
        let mut e = 0.5 * s.wt[i] * s.wt[i] - 0.5 * s.v[i] * s.w[i] * s.w[i];
        if s.nonlinear {
            e += s.w[i].powi(6) * s.inv_r4[i] / 6.0;
        }
        bulk += wgt * e;
    }
    FOUR_PI * (grad + h * bulk)
}

/// Runs the scheme to `t_end`, sampling every `sample_interval`.
pub fn evolve(
    data: &RadialPair,
    v: &Potential,
    cfg: &EvolveConfig,
    references: &[SteadyState],
    modes: Option<ModeReference>,
) -> Result<EvolutionTrace> {
    let g = *v.grid();
    let (dt, steps) = cfg.resolve_dt(&g)?;
    for r in references {
        g.check_same(r.phi.grid())?;
    }
    if let Some(m) = &modes {
        g.check_same(m.phi.grid())?;
    }
    let mut s = Stepper::new(data, v, cfg.boundary, cfg.nonlinear)?;
    let sample_stride = ((cfg.sample_interval / dt).round() as usize).max(1);
    let n_modes = modes.map_or(0, |m| m.spec.eigs.len());
    let mut tr = EvolutionTrace {
        dt,
        local_radius: cfg.local_radius,
        times: Vec::new(),
        energy: Vec::new(),
        exterior_offsets: cfg.exterior_offsets.clone(),
        exterior_energy: vec![Vec::new(); cfg.exterior_offsets.len()],
        mode_coeffs: vec![Vec::new(); n_modes],
        growing_coeffs: vec![Vec::new(); n_modes],
        local_dists: vec![Vec::new(); references.len()],
        l6_dists: vec![Vec::new(); references.len()],
        local_energy: Vec::new(),
        strichartz: Vec::new(),
        reference_energies: references.iter().map(|r| r.energy_j).collect(),
        boundary_contact_time: None,
        max_drift: 0.0,
        max_raw_drift: 0.0,
        drift_ok: true,
        snapshots: Vec::new(),
        final_state: data.clone(),
    };
    let n = g.n();
    let probe = n - 1;
    let (w_probe0, wt_probe0, w_edge0) = (s.w[probe], s.wt[probe], s.w[n]);
    let e0 = [s.energy(v), s.shadow_energy(v, dt)];
    let strichartz_ref = references.first().map(|r| &r.phi);
    let mut strichartz_acc = 0.0;
    let mut last_l10 = strichartz_term(&s, strichartz_ref);
    let mut last_t = 0.0;

    record(&mut tr, &s, v, cfg, references, modes, e0, strichartz_acc)?;
    if cfg.snapshot_stride > 0 {
        tr.snapshots.push(Snapshot { t: 0.0, state: s.pair() });
    }
    for k in 1..=steps {
        s.step(dt)?;
        let contact = (s.w[probe] - w_probe0).abs() > cfg.contact_tol
            || (s.wt[probe] - wt_probe0).abs() > cfg.contact_tol
            || (s.w[n] - w_edge0).abs() > cfg.contact_tol;
        if contact && tr.boundary_contact_time.is_none() {
            tr.boundary_contact_time = Some(s.t);
        }
        if cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0 {
            tr.snapshots.push(Snapshot { t: s.t, state: s.pair() });
        }
        if k % sample_stride == 0 || k == steps {
            let l10 = strichartz_term(&s, strichartz_ref);
            strichartz_acc += 0.5 * (s.t - last_t) * (l10 + last_l10);
            last_l10 = l10;
            last_t = s.t;
            record(&mut tr, &s, v, cfg, references, modes, e0, strichartz_acc)?;
        }
    }
    tr.final_state = s.pair();
    Ok(tr)
}

fn strichartz_term(s: &Stepper, reference: Option<&RadialField>) -> f64 {
    let u = RadialField::from_w(s.grid, &s.w);
    let diff = match reference {
        Some(phi) => u.sub(phi).expect("grids checked"),
        None => u,
    };
    lp_norm(&diff, 10.0).powi(5)
}

#[allow(clippy::too_many_arguments)]
fn record(
    tr: &mut EvolutionTrace,
    s: &Stepper,
    v: &Potential,
    cfg: &EvolveConfig,
    references: &[SteadyState],
    modes: Option<ModeReference>,
    e0: [f64; 2],
    strichartz_acc: f64,
) -> Result<()> {
    let g = s.grid;
    let t = s.t;
    let pair = s.pair();
    let e = s.energy(v);
    tr.times.push(t);
    tr.energy.push(e);
    if tr.boundary_contact_time.is_none() {
        let scale = e0[0].abs().max(1.0);
        tr.max_raw_drift = tr.max_raw_drift.max((e - e0[0]).abs() / scale);
        tr.max_drift = tr.max_drift.max((s.shadow_energy(v, tr.dt) - e0[1]).abs() / scale);
        tr.drift_ok = tr.max_drift <= cfg.drift_tol;
    }
    for (k, &off) in cfg.exterior_offsets.iter().enumerate() {
        let rho = (off + t).max(0.0);
        let val = if rho <= g.r_max() { radiative_annulus_energy(&pair, rho, g.r_max())? } else { f64::NAN };
        tr.exterior_energy[k].push(val);
    }
    let a = cfg.local_radius.min(g.r_max());
    for (j, r) in references.iter().enumerate() {
        let diff = RadialPair { u: pair.u.sub(&r.phi)?, ut: pair.ut.clone() };
        tr.local_dists[j].push(annulus_energy(&diff, 0.0, a)?.max(0.0).sqrt());
        tr.l6_dists[j].push(l6_norm(&diff.u));
    }
    if let Some(m) = modes {
        for i in 0..m.spec.eigs.len() {
            let du = pair.u.sub(m.phi)?;
            let rho = &m.spec.eigs[i].rho;
            let lam = crate::grid::inner_product(&du, rho)?;
            let lam_t = crate::grid::inner_product(&pair.ut, rho)?;
            let k = m.spec.eigs[i].k;
            tr.mode_coeffs[i].push(lam);
            tr.growing_coeffs[i].push((k * lam + lam_t) / (2.0 * k));
        }
    }
    tr.local_energy.push(local_energy(s, a));
    tr.strichartz.push(strichartz_acc);
    Ok(())
}
