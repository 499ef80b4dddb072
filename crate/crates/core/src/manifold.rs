//! Threshold experiments around unstable steady states: bisection along data
//! families, residence times, trajectories along the unstable manifold, the
//! extra-radiation comparison and a two-mode coefficient search.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{detect_resolution, ResolutionReport, EPS_SCATTER, TAU};
use crate::error::{Error, Result};
use crate::evolution::{evolve, energy, EvolutionTrace, EvolveConfig, ModeReference};
use crate::grid::{h1_seminorm_sq, inner_product, radiative_annulus_energy, RadialPair};
use crate::potentials::Potential;
use crate::spectrum::{growing_mode, SpectralData};
use crate::steady::SteadyState;

pub const GRAM_TOL: f64 = 1e-12;
pub const MAX_PROBES: usize = 50;
/// Largest factor by which `t_end` is stretched for an ambiguous probe.
pub const MAX_EXTENSION: f64 = 8.0;

/// Affine family `base + Σ s_i·direction_i` over a box of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFamily {
    pub base: RadialPair,
    pub directions: Vec<RadialPair>,
    pub params: Vec<[f64; 2]>,
}

fn energy_inner(a: &RadialPair, b: &RadialPair) -> Result<f64> {
    // ⟨∇a, ∇b⟩ by polarization
    let sum = a.u.add(&b.u)?;
    let diff = a.u.sub(&b.u)?;
    let grad = 0.25 * (h1_seminorm_sq(&sum) - h1_seminorm_sq(&diff));
    Ok(grad + inner_product(&a.ut, &b.ut)?)
}

impl DataFamily {
    pub fn new(base: RadialPair, directions: Vec<RadialPair>, params: Vec<[f64; 2]>) -> Result<Self> {
        if directions.is_empty() || directions.len() != params.len() {
            return Err(Error::Contract(format!("{} directions with {} parameter ranges", directions.len(), params.len())));
        }
        for d in &directions {
            base.grid().check_same(d.grid())?;
        }
        for p in &params {
            if !(p[0] < p[1]) {
                return Err(Error::Domain(format!("empty parameter range [{}, {}]", p[0], p[1])));
            }
        }
        let d = directions.len();
        let mut gram = vec![vec![0.0; d]; d];
        let norms: Vec<f64> = directions.iter().map(|x| energy_inner(x, x).map(f64::sqrt)).collect::<Result<_>>()?;
        if norms.contains(&0.0) {
            return Err(Error::Domain("zero direction in data family".into()));
        }
        for i in 0..d {
            for j in 0..d {
                gram[i][j] = energy_inner(&directions[i], &directions[j])? / (norms[i] * norms[j]);
            }
        }
        let det = determinant(gram);
        if det <= GRAM_TOL {
            return Err(Error::Domain(format!("directions are not linearly independent (Gram determinant {det:e})")));
        }
        Ok(Self { base, directions, params })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn point(&self, s: &[f64]) -> Result<RadialPair> {
        if s.len() != self.dim() {
            return Err(Error::Contract(format!("expected {} parameters, got {}", self.dim(), s.len())));
        }
        let mut p = self.base.clone();
        for (si, d) in s.iter().zip(&self.directions) {
            p = p.axpy(*si, d)?;
        }
        Ok(p)
    }
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    pub evolve: EvolveConfig,
    /// Absolute bracket width at which bisection stops.
    pub tol_s: f64,
    pub max_probes: usize,
    pub eps_scatter: f64,
    pub tau: f64,
    /// Index of the unstable state in the catalog, for residence times.
    pub phi_index: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            evolve: EvolveConfig { t_end: 100.0, ..EvolveConfig::default() },
            tol_s: 1e-10,
            max_probes: MAX_PROBES,
            eps_scatter: EPS_SCATTER,
            tau: TAU,
            phi_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub s: f64,
    pub label: Option<usize>,
    /// Label assigned by proximity after the run stayed ambiguous.
    pub flagged: bool,
    pub t_end: f64,
    /// Time spent by the local distance to the unstable state below
    /// `eps_scatter` between first entry and exit.
    pub residence_time: f64,
    pub trailing_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub bracket: [f64; 2],
    pub labels: [usize; 2],
    pub width: f64,
    /// Residence time of the probe closest to the final bracket.
    pub residence_time: f64,
    pub probes: Vec<Probe>,
}

impl ThresholdResult {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.bracket[0] + self.bracket[1])
    }

    /// Least-squares slope of residence time against `ln(1/|s − s_mid|)` over
    /// probes with `|s − s_mid|` in `[lo, hi]`.
    pub fn residence_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let mid = self.midpoint();
        let pts: Vec<(f64, f64)> = self
            .probes
            .iter()
            .filter(|p| !p.flagged)
            .filter_map(|p| {
                let d = (p.s - mid).abs();
                (d >= lo && d <= hi).then(|| (-(d.ln()), p.residence_time))
            })
            .collect();
        least_squares_slope(&pts)
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Time from the first entry of `d_φ` below `eps` to the next exit above it
/// (to the end of the run if there is no exit, 0 if it never enters).
fn residence_time(trace: &EvolutionTrace, phi_index: usize, eps: f64) -> f64 {
    let d = &trace.local_dists[phi_index];
    let Some(entry) = d.iter().position(|&x| x < eps) else {
        return 0.0;
    };
    let exit = d[entry..].iter().position(|&x| x > eps).map_or(trace.final_time(), |k| trace.times[entry + k]);
    exit - trace.times[entry]
}

fn run_probe(family: &DataFamily, s: f64, v: &Potential, cfg: &ThresholdConfig, catalog: &[SteadyState]) -> Result<(Probe, ResolutionReport)> {
    let data = family.point(&[s])?;
    let mut ecfg = cfg.evolve.clone();
    let base_t = ecfg.t_end;
    loop {
        let tr = evolve(&data, v, &ecfg, catalog, None)?;
        let rep = detect_resolution(&tr, cfg.eps_scatter, cfg.tau);
        let residence = residence_time(&tr, cfg.phi_index, cfg.eps_scatter);
        if rep.winner.is_some() || ecfg.t_end >= MAX_EXTENSION * base_t {
            let mut probe = Probe {
                s,
                label: rep.winner,
                flagged: false,
                t_end: ecfg.t_end,
                residence_time: residence,
                trailing_dist: rep.trailing_dist,
            };
            if rep.winner.is_none() {
                log::warn!("probe at s = {s} did not resolve by t = {}", ecfg.t_end);
                probe.flagged = true;
            }
            return Ok((probe, rep));
        }
        log::debug!("probe at s = {s} ambiguous, extending to t = {}", 2.0 * ecfg.t_end);
        ecfg.t_end *= 2.0;
    }
}

/// Bisection on a one-parameter family until the bracket is narrower than
/// `tol_s` or the probe budget is spent.
pub fn bisect_threshold(family: &DataFamily, v: &Potential, cfg: &ThresholdConfig, catalog: &[SteadyState]) -> Result<ThresholdResult> {
    if family.dim() != 1 {
        return Err(Error::Contract(format!("threshold bisection needs a 1-parameter family, got {}", family.dim())));
    }
    if cfg.phi_index >= catalog.len() {
        return Err(Error::Contract(format!("phi_index {} outside catalog of {}", cfg.phi_index, catalog.len())));
    }
    let [mut lo, mut hi] = family.params[0];
    let (p_lo, p_hi) = rayon::join(
        || run_probe(family, lo, v, cfg, catalog),
        || run_probe(family, hi, v, cfg, catalog),
    );
    let (p_lo, _) = p_lo?;
    let (p_hi, _) = p_hi?;
    let (label_lo, label_hi) = match (p_lo.label, p_hi.label) {
        (Some(a), Some(b)) if a != b => (a, b),
        (a, b) => return Err(Error::NoDichotomy(format!("{a:?} at s = {lo}, {b:?} at s = {hi}"))),
    };
    let mut probes = vec![p_lo, p_hi];
    while hi - lo > cfg.tol_s && probes.len() < cfg.max_probes {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (mut p, rep) = run_probe(family, mid, v, cfg, catalog)?;
        let label = match p.label {
            Some(l) if l == label_lo || l == label_hi => l,
            _ => {
                // unresolved or a third state: count toward the closer bracket label
                let near = if rep.trailing_dists[label_lo] <= rep.trailing_dists[label_hi] { label_lo } else { label_hi };
                p.flagged = true;
                near
            }
        };
        if label == label_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        probes.push(p);
    }
    let mid = 0.5 * (lo + hi);
    let residence = probes
        .iter()
        .min_by(|a, b| (a.s - mid).abs().total_cmp(&(b.s - mid).abs()))
        .map_or(0.0, |p| p.residence_time);
    Ok(ThresholdResult { bracket: [lo, hi], labels: [label_lo, label_hi], width: hi - lo, residence_time: residence, probes })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldTrajectory {
    pub s_small: f64,
    /// First time the local distance to `φ_u` exceeds `eps_scatter`.
    pub exit_time: Option<f64>,
    pub resolution: ResolutionReport,
    pub energy_phi: f64,
    /// `max_t |E(t) − J(φ_u)|`.
    pub max_energy_deviation: f64,
    pub trace: EvolutionTrace,
}

/// Evolves `(φ_u, 0) + s_small·(ρ₁, k₁ρ₁)`. `catalog[phi_index]` must be `φ_u`.
#[allow(clippy::too_many_arguments)]
pub fn unstable_manifold_trajectory(
    catalog: &[SteadyState],
    phi_index: usize,
    spec: &SpectralData,
    s_small: f64,
    v: &Potential,
    cfg: &EvolveConfig,
    eps_scatter: f64,
    tau: f64,
) -> Result<ManifoldTrajectory> {
    let phi = catalog
        .get(phi_index)
        .ok_or_else(|| Error::Contract(format!("phi_index {phi_index} outside catalog of {}", catalog.len())))?;
    let dir = growing_mode(spec, 0)?;
    let data = RadialPair::stationary(&phi.phi).axpy(s_small, &dir)?;
    let trace = evolve(&data, v, cfg, catalog, Some(ModeReference { phi: &phi.phi, spec }))?;
    let resolution = detect_resolution(&trace, eps_scatter, tau);
    let exit_time = trace.times.iter().zip(&trace.local_dists[phi_index]).find(|(_, &d)| d > eps_scatter).map(|(t, _)| *t);
    let max_energy_deviation = trace.energy.iter().map(|e| (e - phi.energy_j).abs()).fold(0.0, f64::max);
    Ok(ManifoldTrajectory { s_small, exit_time, resolution, energy_phi: phi.energy_j, max_energy_deviation, trace })
}

/// Least-squares growth rate of `ln|λ₁(t)|` over samples where
/// `|λ₁| ≤ linear_cap` (and after `t_min`).
pub fn fit_growth_rate(trace: &EvolutionTrace, mode: usize, t_min: f64, linear_cap: f64) -> Option<f64> {
    let lam = trace.mode_coeffs.get(mode)?;
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(lam)
        .filter(|(t, l)| **t >= t_min && l.abs() > 0.0 && l.abs() <= linear_cap)
        .map(|(t, l)| (*t, l.abs().ln()))
        .collect();
    least_squares_slope(&pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtraRadiationConfig {
    pub evolve: EvolveConfig,
    /// Measurement time for the on-manifold proxy (before it leaves `φ`).
    pub t_on: f64,
    /// Measurement time for the off-manifold data.
    pub t_off: f64,
    /// Exterior energy is taken outside `r = t − L`.
    pub l_offset: f64,
    pub eps_scatter: f64,
    pub tau: f64,
}

impl Default for ExtraRadiationConfig {
    fn default() -> Self {
        Self {
            evolve: EvolveConfig { t_end: 100.0, ..EvolveConfig::default() },
            t_on: 40.0,
            t_off: 100.0,
            l_offset: 90.0,
            eps_scatter: EPS_SCATTER,
            tau: TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtraRadiation {
    /// `½·4π∫_{r ≥ t−L}(w_r² + w_t²)` at `t_on` for the proxy.
    pub e_ext_on: f64,
    pub e_ext_off: f64,
    /// `E(U) − J(φ)`.
    pub expected_on: f64,
    /// `e_ext_off − (E(U) − J(φ))`, absent when the off run did not resolve.
    pub delta_obs: Option<f64>,
    pub winner_off: Option<usize>,
    pub winner_energy_off: Option<f64>,
}

fn exterior_at(trace_state: &RadialPair, t: f64, l: f64) -> Result<f64> {
    let g = *trace_state.grid();
    Ok(0.5 * radiative_annulus_energy(trace_state, (t - l).max(0.0), g.r_max())?)
}

/// Compares the energy radiated by near-threshold data `U` (measured while it
/// still shadows `φ = catalog[phi_index]`) with that of nearby data across
/// the threshold.
pub fn extra_radiation_experiment(
    u_data: &RadialPair,
    off_data: &RadialPair,
    v: &Potential,
    cfg: &ExtraRadiationConfig,
    catalog: &[SteadyState],
    phi_index: usize,
) -> Result<ExtraRadiation> {
    let phi = catalog
        .get(phi_index)
        .ok_or_else(|| Error::Contract(format!("phi_index {phi_index} outside catalog of {}", catalog.len())))?;
    if cfg.t_on > cfg.evolve.t_end || cfg.t_off > cfg.evolve.t_end {
        return Err(Error::Domain("measurement times must not exceed t_end".into()));
    }
    let on_cfg = EvolveConfig { t_end: cfg.t_on, ..cfg.evolve.clone() };
    let off_cfg = cfg.evolve.clone();
    let (on, off) = rayon::join(
        || evolve(u_data, v, &on_cfg, &[], None),
        || -> Result<(EvolutionTrace, RadialPair)> {
            let full = evolve(off_data, v, &off_cfg, catalog, None)?;
            let state = if cfg.t_off == off_cfg.t_end {
                full.final_state.clone()
            } else {
                evolve(off_data, v, &EvolveConfig { t_end: cfg.t_off, ..off_cfg.clone() }, &[], None)?.final_state
            };
            Ok((full, state))
        },
    );
    let on = on?;
    let (off_trace, off_state) = off?;
    let e_ext_on = exterior_at(&on.final_state, cfg.t_on, cfg.l_offset)?;
    let e_ext_off = exterior_at(&off_state, cfg.t_off, cfg.l_offset)?;
    let expected_on = energy(u_data, v)? - phi.energy_j;
    let rep = detect_resolution(&off_trace, cfg.eps_scatter, cfg.tau);
    let delta_obs = rep.winner.map(|_| e_ext_off - expected_on);
    Ok(ExtraRadiation {
        e_ext_on,
        e_ext_off,
        expected_on,
        delta_obs,
        winner_off: rep.winner,
        winner_energy_off: rep.winner.map(|j| catalog[j].energy_j),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoModeConfig {
    pub evolve: EvolveConfig,
    /// Time at which the growing coefficients are read off.
    pub t_probe: f64,
    pub sweeps: usize,
    pub tol_s: f64,
    pub max_bisections: usize,
}

impl Default for TwoModeConfig {
    fn default() -> Self {
        Self {
            evolve: EvolveConfig { t_end: 2.0, ..EvolveConfig::default() },
            t_probe: 2.0,
            sweeps: 6,
            tol_s: 1e-10,
            max_bisections: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoModeResult {
    pub params: [f64; 2],
    /// `(a₁⁺, a₂⁺)` at `t_probe` for `params`.
    pub coeffs: [f64; 2],
    pub sweeps: usize,
    pub evaluations: usize,
}

/// Alternating coordinate bisection on a 2-parameter family, zeroing `a₁⁺`
/// along the first coordinate and `a₂⁺` along the second.
pub fn two_mode_search(family: &DataFamily, v: &Potential, phi: &SteadyState, spec: &SpectralData, cfg: &TwoModeConfig) -> Result<TwoModeResult> {
    if family.dim() != 2 || spec.eigs.len() < 2 {
        return Err(Error::Contract("two-mode search needs a 2-parameter family and two unstable modes".into()));
    }
    let ecfg = EvolveConfig { t_end: cfg.t_probe, ..cfg.evolve.clone() };
    let mut evaluations = 0;
    let mut coeffs_at = |s: [f64; 2]| -> Result<[f64; 2]> {
        evaluations += 1;
        let data = family.point(&s)?;
        let tr = evolve(&data, v, &ecfg, &[], Some(ModeReference { phi: &phi.phi, spec }))?;
        Ok([*tr.growing_coeffs[0].last().unwrap(), *tr.growing_coeffs[1].last().unwrap()])
    };
    let mut s = [0.5 * (family.params[0][0] + family.params[0][1]), 0.5 * (family.params[1][0] + family.params[1][1])];
    let mut sweeps = 0;
    for _ in 0..cfg.sweeps {
        sweeps += 1;
        let before = s;
        for axis in 0..2 {
            let [mut lo, mut hi] = family.params[axis];
            let mut p = s;
            p[axis] = lo;
            let f_lo = coeffs_at(p)?[axis];
            p[axis] = hi;
            let f_hi = coeffs_at(p)?[axis];
            if f_lo.signum() == f_hi.signum() {
                return Err(Error::NoDichotomy(format!("coefficient {} keeps sign {} along axis {axis}", axis + 1, f_lo.signum())));
            }
            for _ in 0..cfg.max_bisections {
                if hi - lo <= cfg.tol_s {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                p[axis] = mid;
                let f = coeffs_at(p)?[axis];
                if f.signum() == f_lo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            s[axis] = 0.5 * (lo + hi);
        }
        if (s[0] - before[0]).abs() <= cfg.tol_s && (s[1] - before[1]).abs() <= cfg.tol_s {
            break;
        }
    }
    let coeffs = coeffs_at(s)?;
    Ok(TwoModeResult { params: s, coeffs, sweeps, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, RadialField};

    #[test]
    fn dependent_directions_are_rejected() {
        let g = Grid::new(200, 20.0).unwrap();
        let f = RadialField::from_fn(g, |r| (-r * r).exp());
        let d = RadialPair::stationary(&f);
        let res = DataFamily::new(RadialPair::zeros(g), vec![d.clone(), d.axpy(1.0, &d).unwrap()], vec![[0.0, 1.0]; 2]);
        assert!(matches!(res, Err(Error::Domain(_))));
        let e = RadialPair::new(RadialField::zeros(g), f.clone()).unwrap();
        assert!(DataFamily::new(RadialPair::zeros(g), vec![d, e], vec![[0.0, 1.0]; 2]).is_ok());
    }

    #[test]
    fn slope_of_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 2.0 * k as f64 + 1.0)).collect();
        assert!((least_squares_slope(&pts).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(least_squares_slope(&pts[..1]), None);
    }

    #[test]
    fn determinant_of_small_matrices() {
        assert!((determinant(vec![vec![2.0, 1.0], vec![1.0, 3.0]]) - 5.0).abs() < 1e-14);
        assert_eq!(determinant(vec![vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
    }
}
