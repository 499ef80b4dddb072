//! One function per subcommand: validate parameters, compute, and hand back
//! the artifacts to write.

use serde::Serialize;
use serde_json::{json, Value};

use critwave::diagnostics::{channel_scan, detect_resolution, distance_to_sigma, l6_decay, ChannelConfig};
use critwave::evolution::{evolve, EvolutionTrace, ModeReference};
use critwave::manifold::{bisect_threshold, DataFamily, ThresholdConfig};
use critwave::perturb::{beta, perturb_velocity};
use critwave::potentials::{composite_potential, w_profile, w_rescaled};
use critwave::spectrum::{classify, growing_mode, spectrum, Classification};
use critwave::steady::{construct_stable_excited, decay_check, find_steady_states, SteadyState};
use critwave::{Error, Grid, Potential, PotentialSpec, RadialField, RadialPair};

use crate::config::*;
use crate::output::{fmt_f64, Artifacts, Csv};

#[derive(Debug)]
pub enum Failure {
    /// Bad configuration; exit 2, nothing written.
    Validation(String),
    /// The computation itself failed; exit 3 with a diagnostic report.
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Contract(_) => Failure::Validation(e.to_string()),
            other => Failure::Numerical(other),
        }
    }
}

type Outcome = Result<Artifacts, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub grid: Grid,
    /// Overrides the `lambda` parameter of `excited-construct`.
    pub lambda: Option<f64>,
}

#[derive(Serialize)]
struct StateSummary {
    index: usize,
    a: f64,
    sign_changes: usize,
    #[serde(rename = "J")]
    energy_j: f64,
    residual: f64,
    decay_const: f64,
}

fn summarize(catalog: &[SteadyState]) -> Vec<StateSummary> {
    catalog
        .iter()
        .enumerate()
        .map(|(index, s)| StateSummary {
            index,
            a: s.shoot_param,
            sign_changes: s.sign_changes,
            energy_j: s.energy_j,
            residual: s.residual,
            decay_const: s.decay_const,
        })
        .collect()
}

fn profile_csv(column: &str, field: &RadialField) -> Csv {
    let g = field.grid();
    let mut c = Csv::new(["r", column]);
    for (i, &u) in field.values().iter().enumerate() {
        c.row_f64(&[g.r(i), u]);
    }
    c
}

fn pair_csv(pair: &RadialPair) -> Csv {
    let g = *pair.grid();
    let mut c = Csv::new(["r", "u", "ut"]);
    for i in 0..g.len() {
        c.row_f64(&[g.r(i), pair.u.values()[i], pair.ut.values()[i]]);
    }
    c
}

/// `t, E, E_ext@R..., d_1..d_m, lambda_1..lambda_n`.
fn trace_csv(trace: &EvolutionTrace) -> Csv {
    let mut header = vec!["t".to_string(), "E".to_string()];
    header.extend(trace.exterior_offsets.iter().map(|r| format!("E_ext@{}", fmt_f64(*r))));
    header.extend((1..=trace.local_dists.len()).map(|j| format!("d_{j}")));
    header.extend((1..=trace.mode_coeffs.len()).map(|j| format!("lambda_{j}")));
    let mut c = Csv::new(header);
    for (k, &t) in trace.times.iter().enumerate() {
        let mut row = vec![t, trace.energy[k]];
        row.extend(trace.exterior_energy.iter().map(|e| e[k]));
        row.extend(trace.local_dists.iter().map(|d| d[k]));
        row.extend(trace.mode_coeffs.iter().map(|l| l[k]));
        c.row_f64(&row);
    }
    c
}

fn bump_field(grid: Grid, amplitude: f64, center: f64, half_width: f64) -> RadialField {
    RadialField::from_fn(grid, |r| amplitude * (beta((r - center) / half_width) + beta((r + center) / half_width)))
}

impl Run<'_> {
    fn potential(&self) -> Result<Potential, Failure> {
        let spec = self.cfg.potential.as_ref().ok_or_else(|| invalid("this experiment needs a `potential`"))?;
        Potential::from_spec(self.grid, spec).map_err(|e| invalid(format!("potential: {e}")))
    }

    fn catalog(&self, v: &Potential, scan: &ScanParams) -> Result<Vec<SteadyState>, Failure> {
        scan.validate().map_err(invalid)?;
        log::info!("scanning central values in [{}, {}] with {} shots", scan.a_min, scan.a_max, scan.n_scan);
        Ok(find_steady_states(v, scan.a_min, scan.a_max, scan.n_scan)?)
    }

    fn state(catalog: &[SteadyState], index: usize) -> Result<&SteadyState, Failure> {
        catalog.get(index).ok_or_else(|| invalid(format!("state index {index} outside a catalog of {} states", catalog.len())))
    }

    /// Initial data from a spec; as a direction, `growing_mode` is the bare
    /// `s(ρ, kρ)` and `steady` the bare `(φ, 0)`.
    fn initial(&self, spec: &InitialSpec, v: &Potential, catalog: &[SteadyState], as_direction: bool) -> Result<RadialPair, Failure> {
        spec.validate().map_err(invalid)?;
        let g = self.grid;
        let pair = match spec.kind {
            InitialKind::Zero => RadialPair::zeros(g),
            InitialKind::Steady => RadialPair::stationary(&Self::state(catalog, spec.index.unwrap_or(0))?.phi),
            InitialKind::Bump => {
                let f = bump_field(g, spec.amplitude.unwrap_or(0.0), spec.center.unwrap_or(0.0), spec.half_width.unwrap_or(1.0));
                if spec.velocity {
                    RadialPair::new(RadialField::zeros(g), f)?
                } else {
                    RadialPair::stationary(&f)
                }
            }
            InitialKind::GrowingMode => {
                let phi = Self::state(catalog, spec.index.unwrap_or(0))?;
                let sp = spectrum(v, &phi.phi)?;
                let dir = growing_mode(&sp, spec.mode.unwrap_or(0))?;
                let base = if as_direction { RadialPair::zeros(g) } else { RadialPair::stationary(&phi.phi) };
                base.axpy(spec.s.unwrap_or(1.0), &dir)?
            }
        };
        if spec.velocity_noise > 0.0 {
            if as_direction {
                return Err(invalid("velocity_noise is not allowed on a family direction"));
            }
            return Ok(perturb_velocity(&pair, self.cfg.seed, spec.velocity_noise)?);
        }
        Ok(pair)
    }

    pub fn steady(&self) -> Outcome {
        let p: SteadyParams = parse_params(&self.cfg.params).map_err(invalid)?;
        let v = self.potential()?;
        let catalog = self.catalog(&v, &p.catalog)?;
        let mut states = Vec::new();
        let mut out = Artifacts::default();
        for (k, s) in catalog.iter().enumerate() {
            let (_, decay_pass) = decay_check(s);
            let st = classify(&v, &s.phi)?;
            states.push(json!({
                "index": k,
                "a": s.shoot_param,
                "sign_changes": s.sign_changes,
                "J": s.energy_j,
                "residual": s.residual,
                "decay_const": s.decay_const,
                "decay_pass": decay_pass,
                "stability": st,
            }));
            if p.profiles {
                out.csv(&format!("steady_state_{k}.csv"), profile_csv("phi", &s.phi));
            }
        }
        out.json("steady.json", &json!({ "config": self.cfg, "params": p, "states": states }));
        Ok(out)
    }

    pub fn spectrum(&self) -> Outcome {
        let p: SpectrumParams = parse_params(&self.cfg.params).map_err(invalid)?;
        let v = self.potential()?;
        let (phi, state) = match p.state {
            None => (RadialField::zeros(self.grid), Value::Null),
            Some(k) => {
                let catalog = self.catalog(&v, &p.catalog)?;
                let s = Self::state(&catalog, k)?;
                (s.phi.clone(), json!({ "index": k, "a": s.shoot_param, "J": s.energy_j }))
            }
        };
        let sp = spectrum(&v, &phi)?;
        let st = classify(&v, &phi)?;
        let mut out = Artifacts::default();
        if p.profiles {
            for (i, e) in sp.eigs.iter().enumerate() {
                out.csv(&format!("spectrum_mode_{}.csv", i + 1), profile_csv("rho", &e.rho));
            }
        }
        out.json(
            "spectrum.json",
            &json!({
                "config": self.cfg,
                "params": p,
                "state": state,
                "n_neg": sp.n_neg,
                "eigenvalues": sp.eigenvalues(),
                "rates": sp.eigs.iter().map(|e| e.k).collect::<Vec<_>>(),
                "residuals": sp.eigs.iter().map(|e| e.residual).collect::<Vec<_>>(),
                "tail_masses": sp.eigs.iter().map(|e| e.tail_mass).collect::<Vec<_>>(),
                "gap": sp.gap,
                "flags": sp.flags,
                "stability": st,
            }),
        );
        Ok(out)
    }

    pub fn evolve(&self) -> Outcome {
        let p: EvolveParams = parse_params(&self.cfg.params).map_err(invalid)?;
        let v = self.potential()?;
        p.evolve.resolve_dt(&self.grid)?;
        let catalog = self.catalog(&v, &p.catalog)?;
        let data = self.initial(&p.initial, &v, &catalog, false)?;
        let reference = match p.mode_reference {
            Some(k) => {
                let s = Self::state(&catalog, k)?;
                Some((s, spectrum(&v, &s.phi)?))
            }
            None => None,
        };
        let modes = reference.as_ref().map(|(s, sp)| ModeReference { phi: &s.phi, spec: sp });
        let trace = evolve(&data, &v, &p.evolve, &catalog, modes)?;
        let mut out = Artifacts::default();
        let mut snapshot_times = Vec::new();
        for (k, snap) in trace.snapshots.iter().enumerate() {
            out.csv(&format!("snapshot_{k:05}.csv"), pair_csv(&snap.state));
            snapshot_times.push(snap.t);
        }
        out.csv("evolve.csv", trace_csv(&trace));
        out.json(
            "evolve.json",
            &json!({
                "config": self.cfg,
                "params": p,
                "catalog": summarize(&catalog),
                "dt": trace.dt,
                "samples": trace.len(),
                "final_time": trace.final_time(),
                "max_drift": trace.max_drift,
                "max_raw_drift": trace.max_raw_drift,
                "drift_ok": trace.drift_ok,
                "boundary_contact_time": trace.boundary_contact_time,
                "strichartz_surrogate": trace.strichartz.last(),
                "snapshot_times": snapshot_times,
            }),
        );
        Ok(out)
    }

    pub fn channel(&self) -> Outcome {
        let p: ChannelParams = parse_params(&self.cfg.params).map_err(invalid)?;
        let v = self.potential()?;
        if self.grid.r_max() < p.r_base + p.t_end {
            return Err(invalid(format!(
                "r_max = {} is smaller than r_base + t_end = {}",
                self.grid.r_max(),
                p.r_base + p.t_end
            )));
        }
        let catalog = self.catalog(&v, &p.catalog)?;
        let data = self.initial(&p.initial, &v, &catalog, false)?;
        let cc = ChannelConfig { t_end: p.t_end, cfl: p.cfl, sample_interval: p.sample_interval };
        let (forward, backward) = channel_scan(&data, &v, p.r_base, &cc)?;
        let (nearest, delta) = distance_to_sigma(&data, &catalog)?;
        let mut c = Csv::new(["t", "E_ext_forward", "E_ext_backward"]);
        for (k, &t) in forward.times_sampled.iter().enumerate() {
            c.row_f64(&[t, forward.ext_energy[k], backward.ext_energy.get(k).copied().unwrap_or(f64::NAN)]);
        }
        let mut out = Artifacts::default();
        out.csv("channel.csv", c);
        out.json(
            "channel.json",
            &json!({
                "config": self.cfg,
                "params": p,
                "c_obs": forward.min_ext_energy.max(backward.min_ext_energy),
                "forward": { "min_ext_energy": forward.min_ext_energy, "argmin_time": forward.argmin_time },
                "backward": { "min_ext_energy": backward.min_ext_energy, "argmin_time": backward.argmin_time },
                "nearest_state": nearest,
                "delta": delta,
                "catalog": summarize(&catalog),
            }),
        );
        Ok(out)
    }

    pub fn resolve(&self) -> Outcome {
        let p: ResolveParams = parse_params(&self.cfg.params).map_err(invalid)?;
        let v = self.potential()?;
        p.evolve.resolve_dt(&self.grid)?;
        let catalog = self.catalog(&v, &p.catalog)?;
        let data = self.initial(&p.initial, &v, &catalog, false)?;
        let trace = evolve(&data, &v, &p.evolve, &catalog, None)?;
        let report = detect_resolution(&trace, p.eps_scatter, p.tau);
        let winner = report.winner.map(|j| {
            json!({
                "index": j,
                "a": catalog[j].shoot_param,
                "J": catalog[j].energy_j,
                "sign_changes": catalog[j].sign_changes,
                "l6_decay": l6_decay(&trace, j, p.eps_scatter),
            })
        });
        let mut out = Artifacts::default();
        out.csv("resolve.csv", trace_csv(&trace));
        out.json(
            "resolve.json",
            &json!({
                "config": self.cfg,
                "params": p,
                "catalog": summarize(&catalog),
                "report": report,
                "winner": winner,
                "max_drift": trace.max_drift,
                "max_raw_drift": trace.max_raw_drift,
                "boundary_contact_time": trace.boundary_contact_time,
            }),
        );
        Ok(out)
    }

    pub fn threshold(&self) -> Outcome {
        let p: ThresholdParams = parse_params(&self.cfg.params).map_err(invalid)?;
        let v = self.potential()?;
        let [lo, hi] = p.s_range;
        if !(lo < hi) || !(p.tol_s > 0.0) {
            return Err(invalid(format!("threshold needs s_range lo < hi and tol_s > 0, got {:?} and {}", p.s_range, p.tol_s)));
        }
        p.evolve.resolve_dt(&self.grid)?;
        let catalog = self.catalog(&v, &p.catalog)?;
        let base = self.initial(&p.base, &v, &catalog, false)?;
        let dir = self.initial(&p.direction, &v, &catalog, true)?;
        let family = DataFamily::new(base, vec![dir], vec![p.s_range])?;
        let phi_index = match p.phi_index {
            Some(k) => k,
            None => catalog.iter().position(|s| s.is_zero()).unwrap_or(0),
        };
        let tc = ThresholdConfig {
            evolve: p.evolve.clone(),
            tol_s: p.tol_s,
            max_probes: p.max_probes,
            eps_scatter: p.eps_scatter,
            tau: p.tau,
            phi_index,
        };
        let result = bisect_threshold(&family, &v, &tc, &catalog)?;
        let mut c = Csv::new(["s", "label", "flagged", "t_end", "residence_time", "trailing_dist"]);
        for pr in &result.probes {
            c.row([
                fmt_f64(pr.s),
                pr.label.map_or(String::new(), |l| l.to_string()),
                pr.flagged.to_string(),
                fmt_f64(pr.t_end),
                fmt_f64(pr.residence_time),
                fmt_f64(pr.trailing_dist),
            ]);
        }
        let phi_energy = catalog[phi_index].energy_j;
        let winners: Vec<Value> = result
            .labels
            .iter()
            .map(|&j| json!({ "index": j, "a": catalog[j].shoot_param, "J": catalog[j].energy_j, "below_phi": catalog[j].energy_j < phi_energy }))
            .collect();
        let mut out = Artifacts::default();
        out.csv("threshold_probes.csv", c);
        out.json(
            "threshold.json",
            &json!({
                "config": self.cfg,
                "params": p,
                "phi_index": phi_index,
                "catalog": summarize(&catalog),
                "bracket": result.bracket,
                "width": result.width,
                "labels": result.labels,
                "winners": winners,
                "residence_time": result.residence_time,
                "probes": result.probes.len(),
            }),
        );
        Ok(out)
    }

    pub fn excited(&self) -> Outcome {
        let mut p: ExcitedParams = parse_params(&self.cfg.params).map_err(invalid)?;
        if let Some(l) = self.lambda {
            p.lambda = l;
        } else if let (Some(PotentialSpec::Composite { lambda }), true) = (&self.cfg.potential, self.cfg.params.get("lambda").is_none()) {
            p.lambda = *lambda;
        }
        if !(p.lambda >= 1.0 && p.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be at least 1, got {}", p.lambda)));
        }
        match &self.cfg.potential {
            None => {}
            Some(PotentialSpec::Composite { lambda }) if *lambda == p.lambda => {}
            Some(other) => return Err(invalid(format!("excited-construct uses the composite potential with lambda = {}, config has {other:?}", p.lambda))),
        }
        let v = composite_potential(self.grid, p.lambda)?;
        let c = construct_stable_excited(self.grid, p.lambda, p.tol)?;
        let st = classify(&v, &c.state.phi)?;
        let (decay_const, decay_pass) = decay_check(&c.state);
        let mut out = Artifacts::default();
        if p.profiles {
            let seed = RadialField::from_fn(self.grid, |r| w_profile(r) - w_rescaled(r, p.lambda));
            let mut csv = Csv::new(["r", "phi", "w_minus_w_lambda"]);
            for i in 0..self.grid.len() {
                csv.row_f64(&[self.grid.r(i), c.state.phi.values()[i], seed.values()[i]]);
            }
            out.csv("excited_profile.csv", csv);
        }
        out.json(
            "excited.json",
            &json!({
                "config": self.cfg,
                "params": p,
                "construction": c,
                "stable": st.classification == Classification::Stable,
                "stability": st,
                "decay": { "decay_const": decay_const, "pass": decay_pass },
            }),
        );
        Ok(out)
    }
}
