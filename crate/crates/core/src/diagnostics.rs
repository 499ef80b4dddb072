//! Measurement functionals on evolutions: channel-of-energy scans, distance to
//! the steady-state catalog, final-state detection and `L⁶` decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, Boundary, EvolutionTrace, EvolveConfig};
use crate::grid::{energy_norm, RadialPair};
use crate::potentials::Potential;
use crate::steady::SteadyState;

pub const EPS_SCATTER: f64 = 1e-2;
pub const TAU: f64 = 20.0;
pub const LOCAL_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelReport {
    #[serde(rename = "R")]
    pub r_base: f64,
    pub direction: Direction,
    /// Infimum over sampled `|t|` of the radiative energy outside `R + |t|`.
    pub min_ext_energy: f64,
    pub argmin_time: f64,
    pub times_sampled: Vec<f64>,
    pub ext_energy: Vec<f64>,
}

/// Channel scan settings; the evolution runs with a reflecting guard on a
/// domain big enough that the cone `R + t_end` stays inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub t_end: f64,
    pub cfl: f64,
    pub sample_interval: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { t_end: 100.0, cfl: 0.9, sample_interval: 0.25 }
    }
}

fn channel_direction(data: &RadialPair, v: &Potential, r_base: f64, cfg: &ChannelConfig, dir: Direction) -> Result<ChannelReport> {
    let ecfg = EvolveConfig {
        t_end: cfg.t_end,
        cfl: cfg.cfl,
        boundary: Boundary::ReflectingGuard,
        sample_interval: cfg.sample_interval,
        exterior_offsets: vec![r_base],
        ..EvolveConfig::default()
    };
    let start = match dir {
        Direction::Forward => data.clone(),
        Direction::Backward => data.time_reversed(),
    };
    let tr = evolve(&start, v, &ecfg, &[], None)?;
    let ext = tr.exterior_energy[0].clone();
    let (k, &m) = ext
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Domain("no exterior samples inside the domain".into()))?;
    Ok(ChannelReport {
        r_base,
        direction: dir,
        min_ext_energy: m.max(0.0),
        argmin_time: tr.times[k],
        times_sampled: tr.times,
        ext_energy: ext,
    })
}

/// Exterior energy outside `r = R + |t|` in both time directions; the
/// backward run evolves `(u₀, −u₁)` forward.
pub fn channel_scan(data: &RadialPair, v: &Potential, r_base: f64, cfg: &ChannelConfig) -> Result<(ChannelReport, ChannelReport)> {
    let g = *v.grid();
    if r_base < 0.0 {
        return Err(Error::Domain(format!("channel radius must be nonnegative, got {r_base}")));
    }
    if g.r_max() < r_base + cfg.t_end {
        return Err(Error::Domain(format!(
            "domain too small for exact cone measurement: r_max = {} < R + t_end = {}",
            g.r_max(),
            r_base + cfg.t_end
        )));
    }
    let (f, b) = rayon::join(
        || channel_direction(data, v, r_base, cfg, Direction::Forward),
        || channel_direction(data, v, r_base, cfg, Direction::Backward),
    );
    Ok((f?, b?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantitativeChannel {
    pub c_obs: f64,
    /// Distance in `Ḣ¹×L²` to the nearest catalog state.
    pub delta: f64,
    pub nearest: usize,
    pub forward: ChannelReport,
    pub backward: ChannelReport,
}

/// `max` over directions of the exterior energy infimum outside `r = |t|`,
/// together with the distance of the data to the catalog.
pub fn quantitative_channel(data: &RadialPair, v: &Potential, cfg: &ChannelConfig, catalog: &[SteadyState]) -> Result<QuantitativeChannel> {
    let (forward, backward) = channel_scan(data, v, 0.0, cfg)?;
    let (nearest, delta) = distance_to_sigma(data, catalog)?;
    Ok(QuantitativeChannel { c_obs: forward.min_ext_energy.max(backward.min_ext_energy), delta, nearest, forward, backward })
}

/// `min_j ‖(u₀, u₁) − (φ_j, 0)‖_{Ḣ¹×L²}` and the minimizing index.
pub fn distance_to_sigma(data: &RadialPair, catalog: &[SteadyState]) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (j, s) in catalog.iter().enumerate() {
        let diff = RadialPair { u: data.u.sub(&s.phi)?, ut: data.ut.clone() };
        let d = energy_norm(&diff);
        if d < best.1 {
            best = (j, d);
        }
    }
    if catalog.is_empty() {
        return Err(Error::Contract("empty steady-state catalog".into()));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionReport {
    pub winner: Option<usize>,
    /// Largest local distance to the winner over the window, or the smallest
    /// such value among all references when there is no winner.
    pub trailing_dist: f64,
    /// Per-reference maximum of `d_j` over the window.
    pub trailing_dists: Vec<f64>,
    /// `E(0) − E_local(T)`.
    pub radiated_energy: f64,
    pub window: [f64; 2],
    /// More than one reference qualified.
    pub ambiguous: bool,
}

/// The unique reference whose local distance stays below `eps_scatter` over
/// the trailing window `[T − τ, T]`.
pub fn detect_resolution(trace: &EvolutionTrace, eps_scatter: f64, tau: f64) -> ResolutionReport {
    let t_final = trace.final_time();
    let t0 = (t_final - tau).max(0.0);
    let start = trace.times.iter().position(|&t| t >= t0 - 1e-12).unwrap_or(trace.times.len());
    let trailing: Vec<f64> = trace
        .local_dists
        .iter()
        .map(|d| d[start..].iter().copied().fold(0.0, f64::max))
        .collect();
    let qualifying: Vec<usize> = (0..trailing.len()).filter(|&j| trailing[j] < eps_scatter).collect();
    let winner = if qualifying.len() == 1 { Some(qualifying[0]) } else { None };
    let trailing_dist = match winner {
        Some(j) => trailing[j],
        None => trailing.iter().copied().fold(f64::INFINITY, f64::min),
    };
    let radiated_energy = match (trace.energy.first(), trace.local_energy.last()) {
        (Some(e0), Some(el)) => e0 - el,
        _ => 0.0,
    };
    ResolutionReport {
        winner,
        trailing_dist,
        trailing_dists: trailing,
        radiated_energy,
        window: [t0, t_final],
        ambiguous: qualifying.len() > 1,
    }
}

/// Whether `‖u − φ_j‖_{L⁶}` has fallen below `eps` at the end of the run.
pub fn l6_decay(trace: &EvolutionTrace, reference: usize, eps: f64) -> bool {
    trace.l6_dists.get(reference).and_then(|d| d.last()).is_some_and(|&x| x < eps)
}

/// Fits `‖u(t)‖_{L⁶} ≈ C/t` over samples with `t ≥ t_min`, returning `C` and
/// the largest relative deviation from the fit.
pub fn l6_inverse_time_fit(trace: &EvolutionTrace, reference: usize, t_min: f64) -> Option<(f64, f64)> {
    let d = trace.l6_dists.get(reference)?;
    let pts: Vec<(f64, f64)> = trace.times.iter().zip(d).filter(|(t, _)| **t >= t_min).map(|(t, x)| (*t, *x)).collect();
    if pts.len() < 2 {
        return None;
    }
    let c = pts.iter().map(|(t, x)| t * x).sum::<f64>() / pts.len() as f64;
    let dev = pts.iter().map(|(t, x)| ((t * x) - c).abs() / c.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    Some((c, dev))
}
