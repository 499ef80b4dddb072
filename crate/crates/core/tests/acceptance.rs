//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Optional numeric arguments select criteria.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use critwave::diagnostics::{detect_resolution, quantitative_channel, ChannelConfig};
use critwave::evolution::{evolve, Boundary, EvolveConfig};
use critwave::grid::{l6_norm, laplacian_w, radiative_annulus_energy};
use critwave::manifold::{bisect_threshold, fit_growth_rate, unstable_manifold_trajectory, DataFamily, ThresholdConfig};
use critwave::perturb::{beta, perturb_velocity, random_field};
use critwave::potentials::{aubin_talenti, composite_potential};
use critwave::spectrum::{classify, count_negative, spectrum, Classification};
use critwave::steady::{
    bifurcation_coupling, construct_stable_excited, decay_check, find_steady_states, first_excited_branch,
    shooting_solution, SteadyState,
};
use critwave::{Grid, Potential, RadialField, RadialPair, Result};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn deep_well(g: Grid) -> Result<Potential> {
    Potential::gaussian(g, 8.0, 1.0)
}

fn positive_ground_states(states: &[SteadyState]) -> Vec<usize> {
    (0..states.len())
        .filter(|&j| !states[j].is_zero() && states[j].sign_changes == 0 && states[j].shoot_param > 0.0)
        .collect()
}

fn zero_index(states: &[SteadyState]) -> Option<usize> {
    states.iter().position(|s| s.is_zero())
}

fn w_residual(n: usize) -> Result<f64> {
    let g = Grid::new(n, 40.0)?;
    let w = aubin_talenti(g);
    let lap = laplacian_w(&w);
    Ok((1..g.n()).map(|i| (lap.values()[i] + w.values()[i].powi(5)).abs()).fold(0.0, f64::max))
}

fn c1() -> Result<Outcome> {
    let coarse = w_residual(4096)?;
    let fine = w_residual(8192)?;
    let ratio = coarse / fine;
    outcome(
        coarse <= 5e-4 && (3.6..=4.4).contains(&ratio),
        format!("residual {coarse:.3e} at n=4096, {fine:.3e} at n=8192, ratio {ratio:.3}"),
    )
}

/// Bound-state energy `−κ²` of the well of depth `c` and radius `a`, from
/// `q cot(qa) = −κ`, `q² = c − κ²`, bisected in `κ`.
fn square_well_oracle(c: f64, a: f64) -> f64 {
    let f = |k: f64| {
        let q = (c - k * k).sqrt();
        q * (q * a).cos() + k * (q * a).sin()
    };
    let (mut lo, mut hi) = (0.0, c.sqrt() * (1.0 - 1e-9));
    assert!(f(lo) < 0.0 && f(hi) > 0.0, "oracle bracket");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    -k * k
}

fn c2() -> Result<Outcome> {
    let wide = Grid::new(16000, 200.0)?;
    let c_star = bifurcation_coupling(&Potential::square_well(wide, 1.0, 1.0)?, 1, 0.0, 10.0, 1e-9)?;
    let exact = std::f64::consts::PI.powi(2) / 4.0;
    let rel = (c_star / exact - 1.0).abs();

    let g = Grid::new(16000, 20.0)?;
    let v = Potential::square_well(g, 4.0, 1.0)?;
    let sp = spectrum(&v, &RadialField::zeros(g))?;
    let oracle = square_well_oracle(4.0, 1.0);
    let e = sp.eigs.first().map_or(f64::NAN, |p| p.eigenvalue);
    let err = (e - oracle).abs();
    outcome(
        rel <= 0.01 && sp.n_neg == 1 && err <= 1e-6,
        format!("c* = {c_star:.6} (rel {rel:.2e}); E = {e:.10} vs oracle {oracle:.10}, |diff| {err:.2e}"),
    )
}

fn c3() -> Result<Outcome> {
    let g = Grid::new(2000, 100.0)?;
    let v = deep_well(g)?;
    let states = find_steady_states(&v, -5.0, 5.0, 100)?;
    let pos = positive_ground_states(&states);
    if pos.len() != 1 {
        return outcome(false, format!("{} positive states in a 100-point scan", pos.len()));
    }
    let q = &states[pos[0]];
    let n_neg = count_negative(&v, &q.phi)?;
    let (_, decays) = decay_check(q);
    outcome(
        q.energy_j < 0.0 && n_neg == 0 && decays,
        format!("Q(0) = {:.6}, J(Q) = {:.6}, n_neg = {n_neg}, decay {decays}, catalog size {}", q.shoot_param, q.energy_j, states.len()),
    )
}

/// Richardson combination of second-order solutions on `n` and `2n`, on the
/// coarse nodes.
fn richardson(coarse: &RadialField, fine: &RadialField) -> Result<RadialField> {
    let vals = (0..coarse.values().len()).map(|i| (4.0 * fine.values()[2 * i] - coarse.values()[i]) / 3.0).collect();
    RadialField::from_values(*coarse.grid(), vals)
}

struct ExcitedCheck {
    line: String,
    ok: bool,
}

fn check_excited(coarse: Grid, lambda: f64) -> Result<ExcitedCheck> {
    let c = construct_stable_excited(coarse, lambda, 1e-10)?;
    let f = construct_stable_excited(coarse.refined(), lambda, 1e-10)?;
    let v = composite_potential(coarse, lambda)?;
    let a = c.state.shoot_param;
    let shot = [1e-3, 1e-2]
        .iter()
        .find_map(|w| shooting_solution(&v, a * (1.0 - w), a * (1.0 + w)).ok())
        .ok_or_else(|| critwave::Error::NoDichotomy(format!("no shooting bracket near a = {a}")))?;
    let extrapolated = richardson(&c.state.phi, &f.state.phi)?;
    let agree = l6_norm(&extrapolated.sub(&shot)?);
    let stab = classify(&v, &c.state.phi)?;
    Ok(ExcitedCheck {
        line: format!(
            "λ={lambda}: {:?}, sign changes {}, L6 agreement {agree:.2e}, {:?}",
            c.solver, c.state.sign_changes, stab.classification
        ),
        ok: c.state.sign_changes >= 1 && agree <= 1e-6 && stab.classification == Classification::Stable,
    })
}

fn c4() -> Result<Outcome> {
    let coarse = Grid::new(16000, 40.0)?;
    let mut lines = Vec::new();
    let mut lambda_star = None;
    for lambda in [4.0, 8.0, 16.0, 32.0] {
        match check_excited(coarse, lambda) {
            Ok(c) => {
                if c.ok && lambda_star.is_none() {
                    lambda_star = Some(lambda);
                }
                lines.push(c.line);
            }
            Err(e) => lines.push(format!("λ={lambda}: {e}")),
        }
    }
    let head = match lambda_star {
        Some(l) => format!("λ* = {l}"),
        None => "no stable λ".into(),
    };
    outcome(lambda_star.is_some(), format!("{head}; {}", lines.join("; ")))
}

fn c5() -> Result<Outcome> {
    let g = Grid::new(4000, 40.0)?;
    let v = Potential::gaussian(g, 1.0, 1.0)?;
    let mut lines = Vec::new();
    let mut pass = true;
    let mut energies = Vec::new();
    for offset in [0.002, 0.01] {
        let b = first_excited_branch(&v, 60.0, offset, 2.0, 400)?;
        let va = critwave::potentials::scaled_family(&v, b.alpha)?;
        let stab = classify(&va, &b.state.phi)?;
        let unstable = matches!(stab.classification, Classification::Unstable(n) if n >= 1);
        pass &= unstable;
        energies.push(b.state.energy_j.abs());
        lines.push(format!(
            "α₂(1+{offset}) = {:.5}: a = {:.4}, J = {:.4e}, {:?}",
            b.alpha, b.state.shoot_param, b.state.energy_j, stab.classification
        ));
    }
    pass &= energies[0] < energies[1];
    outcome(pass, lines.join("; "))
}

fn c6() -> Result<Outcome> {
    let g = Grid::new(16384, 40.0)?;
    let v = deep_well(g)?;
    let u0 = RadialField::from_fn(g, |r| 0.5 * beta(r).powi(2));
    let data = RadialPair::new(u0.clone(), u0.scaled(0.3))?;
    let dt = 0.9 * g.dr();
    let cfg = EvolveConfig {
        dt: Some(dt),
        t_end: 1e4 * dt,
        boundary: Boundary::ReflectingGuard,
        ..EvolveConfig::default()
    };
    let tr = evolve(&data, &v, &cfg, &[], None)?;
    let t = tr.final_time();
    let leak = radiative_annulus_energy(&tr.final_state, 1.0 + t, g.r_max())?;
    let pointwise = (0..=g.n())
        .filter(|&i| g.r(i) > 1.0 + t)
        .map(|i| tr.final_state.u.values()[i].abs().max(tr.final_state.ut.values()[i].abs()))
        .fold(0.0, f64::max);
    let steps = (tr.final_time() / tr.dt).round();
    outcome(
        tr.max_drift <= 1e-6 && tr.boundary_contact_time.is_none() && leak <= 1e-10 && pointwise <= 1e-10,
        format!(
            "{steps} steps, modified-energy drift {:.2e} (raw {:.2e}), contact {:?}, exterior energy outside 1+t {leak:.2e} (pointwise max {pointwise:.2e})",
            tr.max_drift, tr.max_raw_drift, tr.boundary_contact_time
        ),
    )
}

fn c7() -> Result<Outcome> {
    let g = Grid::new(4000, 100.0)?;
    let v = deep_well(g)?;
    let states = find_steady_states(&v, -5.0, 5.0, 100)?;
    let pos = positive_ground_states(&states);
    let Some(&iq) = pos.first() else {
        return outcome(false, "no ground state".into());
    };
    let ground: Vec<usize> = (0..states.len()).filter(|&j| states[j].sign_changes == 0 && !states[j].is_zero()).collect();
    let cfg = EvolveConfig { t_end: 80.0, ..EvolveConfig::default() };
    let base = RadialPair::stationary(&states[iq].phi);
    let results: Vec<Result<(Option<usize>, f64)>> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let data = perturb_velocity(&base, seed, 0.1)?;
            let tr = evolve(&data, &v, &cfg, &states, None)?;
            let rep = detect_resolution(&tr, 1e-2, 20.0);
            Ok((rep.winner, rep.trailing_dist))
        })
        .collect();
    let mut good = 0;
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (seed, r) in results.into_iter().enumerate() {
        let (winner, d) = r?;
        worst = worst.max(d);
        if winner.is_some_and(|w| ground.contains(&w)) && d < 1e-2 {
            good += 1;
        } else {
            bad.push(format!("seed {seed}: {winner:?} at {d:.2e}"));
        }
    }
    outcome(good == 20, format!("{good}/20 resolved to ±Q, worst trailing distance {worst:.2e} {}", bad.join(", ")))
}

fn c8() -> Result<Outcome> {
    let g = Grid::new(4400, 110.0)?;
    let v = deep_well(g)?;
    let states = find_steady_states(&v, -5.0, 5.0, 100)?;
    let Some(&iq) = positive_ground_states(&states).first() else {
        return outcome(false, "no ground state".into());
    };
    let cfg = ChannelConfig { t_end: 100.0, ..ChannelConfig::default() };
    let q = &states[iq].phi;
    let generic: Vec<Result<f64>> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let u = q.add(&random_field(g, seed, 0.05)?)?;
            let ut = random_field(g, seed + 1000, 0.05)?;
            Ok(quantitative_channel(&RadialPair::new(u, ut)?, &v, &cfg, &states)?.c_obs)
        })
        .collect();
    let generic = generic.into_iter().collect::<Result<Vec<_>>>()?;
    let on_sigma = states
        .par_iter()
        .map(|s| Ok(quantitative_channel(&RadialPair::stationary(&s.phi), &v, &cfg, &states)?.c_obs))
        .collect::<Result<Vec<_>>>()?;
    let min_generic = generic.iter().copied().fold(f64::INFINITY, f64::min);
    let max_sigma = on_sigma.iter().copied().fold(0.0, f64::max);
    outcome(
        min_generic > 1e-8 && max_sigma <= 1e-8,
        format!("min over 10 generic data {min_generic:.3e}; max over {} states {max_sigma:.3e}", on_sigma.len()),
    )
}

/// Even extension of a bump centred at `c` with half-width `h`.
fn even_bump(r: f64, c: f64, h: f64) -> f64 {
    beta((r - c) / h) + beta((r + c) / h)
}

fn c9() -> Result<Outcome> {
    let g = Grid::new(2000, 100.0)?;
    let v = deep_well(g)?;
    let states = find_steady_states(&v, -5.0, 5.0, 100)?;
    let Some(iz) = zero_index(&states) else {
        return outcome(false, "zero state missing from catalog".into());
    };
    let sp = spectrum(&v, &states[iz].phi)?;
    if sp.n_neg != 1 {
        return outcome(false, format!("well has {} bound states, expected 1", sp.n_neg));
    }
    let (rho, k) = (&sp.eigs[0].rho, sp.eigs[0].k);
    let gf = RadialField::from_fn(g, |r| even_bump(r, 2.0, 1.5));
    let hf = RadialField::from_fn(g, |r| even_bump(r, 0.0, 1.0));
    let eps = 1e-4;
    let ratio = critwave::grid::inner_product(&gf, rho)? / critwave::grid::inner_product(&hf, rho)?;
    let s_big = 3.0 * eps * ratio;
    let family = DataFamily::new(
        RadialPair::stationary(&gf.scaled(-eps)),
        vec![RadialPair::stationary(&hf)],
        vec![[0.0, s_big]],
    )?;
    let cfg = ThresholdConfig { tol_s: 1e-10 * s_big, phi_index: iz, ..ThresholdConfig::default() };
    let res = bisect_threshold(&family, &v, &cfg, &states)?;
    let [la, lb] = res.labels;
    let (ja, jb) = (states[la].energy_j, states[lb].energy_j);
    let slope = res.residence_slope(1e-6 * s_big, 0.5 * s_big);
    let rel = slope.map_or(f64::INFINITY, |s| (s * k - 1.0).abs());
    outcome(
        res.width <= 1e-10 * s_big && res.probes.len() <= 50 && la != lb && ja < 0.0 && jb < 0.0 && rel <= 0.2,
        format!(
            "width {:.2e}·s_big in {} probes; labels {la} (J {ja:.4}) / {lb} (J {jb:.4}); residence slope {} vs 1/k = {:.4} (rel {rel:.3})",
            res.width / s_big,
            res.probes.len(),
            slope.map_or("none".into(), |s| format!("{s:.4}")),
            1.0 / k
        ),
    )
}

fn c10() -> Result<Outcome> {
    let g = Grid::new(2000, 100.0)?;
    let v = deep_well(g)?;
    let states = find_steady_states(&v, -5.0, 5.0, 100)?;
    let Some(iz) = zero_index(&states) else {
        return outcome(false, "zero state missing from catalog".into());
    };
    let sp = spectrum(&v, &states[iz].phi)?;
    let k = sp.eigs.first().map_or(f64::NAN, |e| e.k);
    let cfg = EvolveConfig { t_end: 12.0, sample_interval: 0.1, ..EvolveConfig::default() };
    let tr = unstable_manifold_trajectory(&states, iz, &sp, 1e-4, &v, &cfg, 1e-2, 20.0)?;
    let fitted = fit_growth_rate(&tr.trace, 0, 0.0, 1e-2);
    let rel = fitted.map_or(f64::INFINITY, |f| (f / k - 1.0).abs());
    outcome(
        rel <= 0.02,
        format!("fitted {} vs k₁ = {k:.5} (rel {rel:.2e})", fitted.map_or("none".into(), |f| format!("{f:.5}"))),
    )
}

type Criterion = (usize, &'static str, Duration, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "W identity", Duration::from_secs(1), c1),
        (2, "square-well spectrum", Duration::from_secs(1), c2),
        (3, "ground state", Duration::from_secs(30), c3),
        (4, "stable excited state", Duration::from_secs(120), c4),
        (5, "small excited state instability", Duration::from_secs(120), c5),
        (6, "energy conservation and finite speed", Duration::from_secs(10), c6),
        (7, "generic resolution", Duration::from_secs(600), c7),
        (8, "channel of energy", Duration::from_secs(600), c8),
        (9, "threshold dichotomy", Duration::from_secs(900), c9),
        (10, "mode growth", Duration::from_secs(60), c10),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= budget;
        let pass = pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {name}: {} [{:.2}s of {}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
