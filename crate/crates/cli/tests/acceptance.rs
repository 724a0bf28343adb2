//! Acceptance criteria on the reference problem `V(x) = 1 + e^{-x²}`, cubic
//! `f`, `h = 0.1`. Prints one PASS/FAIL line per criterion. Exits non-zero if
//! a criterion outside `EXPECTED_FAILURES` fails, or if an expected failure
//! starts passing.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semiclassical::functionals::pohozaev_p;
use semiclassical::limit::{build_s0, energy_curve, ground_state, GroundStateSet, SetOptions};
use semiclassical::localization::{barycenter_directional, barycenter_of, manifold_distance, manifold_element};
use semiclassical::minmax::{degree_loop, solve_at, Solution};
use semiclassical::nonlinearity::Nonlinearity;
use semiclassical::problem::{he_norm, Problem, ProblemSpec};
use semiclassical::verify::{
    decay_recursion_check, directional_derivative_test, gradient_floor_experiment, log_log_slope, tail_profile,
    tail_profile_about, EnsembleSpec, DEFAULT_WINDOW,
};
use semiclassical::{Error, Field, Grid};

const SWEEP: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
const SEED: u64 = 7;

/// Criterion 9: the annulus-regime floor at `ε = 0.4` is dominated by the
/// cutoff residual of the set elements themselves (plateau `δ₀/(2ε) < 1`),
/// which no choice of ensemble removes. Its FAIL line is still printed.
const EXPECTED_FAILURES: &[usize] = &[9];

/// `E_m = (4/3) m^{3/2}` for the one-dimensional cubic problem.
fn e_closed(m: f64) -> f64 {
    4.0 / 3.0 * m.powf(1.5)
}

fn soliton(m: f64, x: f64) -> f64 {
    (2.0 * m).sqrt() / (m.sqrt() * x).cosh()
}

struct Fixture {
    spec: ProblemSpec,
    set: GroundStateSet,
    sweep: Vec<Solution>,
}

impl Fixture {
    fn new() -> Result<Fixture, Error> {
        let spec = ProblemSpec::reference();
        let opts = SetOptions { dim: 1, v0: 2.0, delta0: spec.params.delta0, t0: spec.params.t0 };
        let set = build_s0(opts, &spec.nonlinearity)?;
        let sweep = SWEEP.iter().map(|&e| solve_at(&spec, e, &set)).collect::<Result<_, _>>()?;
        Ok(Fixture { spec, set, sweep })
    }

    fn problem(&self, eps: f64) -> Result<Problem, Error> {
        self.spec.clone().with_localization(self.set.constants).at_eps(eps)
    }

    fn solution(&self, eps: f64) -> &Solution {
        self.sweep.iter().find(|s| s.record.eps == eps).expect("eps in sweep")
    }
}

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn(&Fixture) -> Outcome);

fn e2s(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_limit_oracle(_: &Fixture) -> Outcome {
    let f = Nonlinearity::cubic();
    let mut worst: (f64, f64) = (0.0, 0.0);
    for m in [1.0, 1.5, 2.0] {
        let g = ground_state(m, 1, &f, 2.5).map_err(e2s)?;
        worst.0 = worst.0.max(rel(g.level, e_closed(m)));
        worst.1 = worst.1.max(rel(g.amplitude, (2.0 * m).sqrt()));
    }
    Ok((worst.0 <= 1e-3 && worst.1 <= 1e-3, format!("max rel error: energy {:.2e}, amplitude {:.2e}", worst.0, worst.1)))
}

fn c2_pohozaev(fx: &Fixture) -> Outcome {
    let f = Nonlinearity::cubic();
    let grid = Grid::new(1, 30.0, 6001).map_err(e2s)?;
    let mut ms: Vec<f64> = (1..=10).map(|k| k as f64 / 5.0).collect();
    ms.extend([1.5]);
    ms.extend(fx.set.states.iter().map(|s| s.m));
    let mut worst: f64 = 0.0;
    for m in ms {
        let g = ground_state(m, 1, &f, 2.5).map_err(e2s)?;
        let u = g.field(&grid, &[0.0]);
        let p = pohozaev_p(&u, m, 1, &f).map_err(e2s)?;
        worst = worst.max(g.pohozaev_residual).max(p.abs() / u.gradient_energy());
    }
    let theta: f64 = 0.3;
    let dilated = Field::from_fn(grid, |x| soliton(1.0, (-theta).exp() * x[0]));
    let p = pohozaev_p(&dilated, 1.0, 1, &f).map_err(e2s)?;
    let expected = 2.0 / 3.0 * (theta.exp() - (-theta).exp());
    let ok = worst <= 1e-3 && rel(p, expected) <= 1e-2;
    Ok((ok, format!("max residual {worst:.2e}; P(dilated) = {p:.5} vs {expected:.5}")))
}

fn c3_monotone(_: &Fixture) -> Outcome {
    let f = Nonlinearity::cubic();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let uniform: Vec<f64> = (1..=10).map(|k| k as f64 / 5.0).collect();
    let mut random: Vec<f64> = (0..10).map(|_| rng.gen_range(0.05..=2.0)).collect();
    random.sort_by(f64::total_cmp);
    random.dedup();
    let mut checked = 0;
    for ms in [uniform, random] {
        let table = energy_curve(&ms, 1, &f, 2.5).map_err(e2s)?;
        if !table.windows(2).all(|w| w[1].1 > w[0].1) {
            return Ok((false, format!("not increasing on {ms:?}")));
        }
        checked += table.len();
    }
    Ok((true, format!("{checked} levels strictly increasing on two grids")))
}

fn c4_barycenter(fx: &Fixture) -> Outcome {
    let p = fx.problem(0.1).map_err(e2s)?;
    let g = *p.grid();
    let h = g.h();
    let r0 = fx.set.constants.r0;
    // Grid-shift equivariance.
    let u = manifold_element(&fx.set, 1, &[0.7], &p).map_err(e2s)?;
    let k = 23;
    let mut shifted = vec![0.0; u.values().len()];
    shifted[k..].copy_from_slice(&u.values()[..u.values().len() - k]);
    let v = Field::from_values(g, shifted).map_err(e2s)?;
    let a = barycenter_of(&u, &p).map_err(e2s)?.require().map_err(e2s)?[0];
    let b = barycenter_of(&v, &p).map_err(e2s)?.require().map_err(e2s)?[0];
    let shift_err = (b - a - k as f64 * h).abs();

    // Near-manifold ensemble.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let rho0 = fx.set.constants.rho0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..50 {
        let member = rng.gen_range(0..fx.set.len());
        let y = rng.gen_range(-3.0..3.0);
        let c = y + rng.gen_range(-5.0..5.0);
        let w = rng.gen_range(0.5..3.0);
        let bump = Field::from_fn(g, |x| (-((x[0] - c) / w).powi(2)).exp());
        let size = rho0 * rng.gen_range(0.0..1.0) / he_norm(&bump, &p).map_err(e2s)?;
        let u = manifold_element(&fx.set, member, &[y], &p).map_err(e2s)?.add_scaled(size, &bump).map_err(e2s)?;
        let best = manifold_distance(&u, &fx.set, &p).map_err(e2s)?.shift[0];
        let ups = barycenter_of(&u, &p).map_err(e2s)?.require().map_err(e2s)?[0];
        worst_gap = worst_gap.max((ups - best).abs());
    }

    // Locality of the derivative.
    let u = manifold_element(&fx.set, 2, &[0.0], &p).map_err(e2s)?;
    let ups = barycenter_of(&u, &p).map_err(e2s)?.require().map_err(e2s)?[0];
    let c = ups + 4.0 * r0 + 3.0;
    let v = Field::from_fn(g, |x| {
        let t = (x[0] - c) / 2.0;
        if t.abs() < 1.0 {
            0.5 * (1.0 - t * t).powi(2)
        } else {
            0.0
        }
    });
    let t = 1e-3;
    let plus = barycenter_of(&u.add_scaled(t, &v).map_err(e2s)?, &p).map_err(e2s)?.require().map_err(e2s)?[0];
    let minus = barycenter_of(&u.add_scaled(-t, &v).map_err(e2s)?, &p).map_err(e2s)?.require().map_err(e2s)?[0];
    let fd = ((plus - minus) / (2.0 * t)).abs();
    let cut = p.cutoffs().map_err(e2s)?;
    let analytic = barycenter_directional(&u, &v, &cut, r0).map_err(e2s)?[0].abs();
    let ok = shift_err < 1e-9 && worst_gap <= 2.0 * r0 && fd <= 1e-6 && analytic <= 1e-6;
    Ok((
        ok,
        format!(
            "shift error {shift_err:.1e}; max |Y - best shift| {worst_gap:.3} (2R0 = {:.3}); far derivative fd {fd:.1e}, analytic {analytic:.1e}",
            2.0 * r0
        ),
    ))
}

fn c5_penalty(fx: &Fixture) -> Outcome {
    let vals: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&e| fx.solution(e).record.energy.penalty).collect();
    Ok((vals.iter().all(|&v| v == 0.0), format!("penalty at 0.2, 0.1, 0.05: {vals:?}")))
}

fn c6_decay(fx: &Fixture) -> Outcome {
    let grid = Grid::new(1, 30.0, 601).map_err(e2s)?;
    let control = Field::from_fn(grid, |x| soliton(1.0, x[0]));
    let rate = tail_profile_about(&control, &[0.0], DEFAULT_WINDOW)
        .map_err(e2s)?
        .fit
        .map(|f| f.rate)
        .ok_or("no control fit")?;
    let mut ok = (1.9..=2.1).contains(&rate);
    let mut parts = vec![format!("control c = {rate:.4}")];
    for sol in &fx.sweep {
        let eps = sol.record.eps;
        let p = fx.problem(eps).map_err(e2s)?;
        // The window must fit inside the box.
        if p.grid().half_width() < DEFAULT_WINDOW.1 {
            parts.push(format!("eps {eps}: box reach {:.0} < window", p.grid().half_width()));
            continue;
        }
        let fit = tail_profile(&sol.field, &p, DEFAULT_WINDOW).map_err(e2s)?.fit.ok_or("no fit")?;
        ok &= -fit.rate < 0.0 && fit.r_squared >= 0.99;
        parts.push(format!("eps {eps}: slope {:.3}, R2 {:.4}", -fit.rate, fit.r_squared));
    }
    Ok((ok, parts.join("; ")))
}

/// `q[k] ≤ q[k-1]/θ + b` by construction.
fn satisfying(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64, f64, usize) {
    let theta = 1.0 + rng.gen_range(0.01..3.0);
    let b = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..5.0) };
    let n = rng.gen_range(2..60);
    let mut q = vec![rng.gen_range(0.0..1e3)];
    for _ in 1..n {
        let bound = q.last().unwrap() / theta + b;
        q.push(if rng.gen_bool(0.3) { bound } else { bound * rng.gen_range(0.0..1.0) });
    }
    (q, theta, b, rng.gen_range(0..n))
}

fn c7_recursion(_: &Fixture) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut accepted = 0;
    for _ in 0..100 {
        let (q, theta, b, r1) = satisfying(&mut rng);
        if let Ok(true) = decay_recursion_check(&q, 3.0, theta, b, 3.0 + r1 as f64) {
            accepted += 1;
        }
    }
    let mut rejected = 0;
    for _ in 0..100 {
        let (mut q, theta, b, r1) = satisfying(&mut rng);
        let k = rng.gen_range(1..q.len());
        q[k] = (q[k - 1] / theta + b) * (1.0 + rng.gen_range(1e-3..1.0)) + 1e-9;
        if let Err(Error::RecursionHypothesis { .. }) = decay_recursion_check(&q, 3.0, theta, b, 3.0 + r1 as f64) {
            rejected += 1;
        }
    }
    Ok((accepted == 100 && rejected == 100, format!("accepted {accepted}/100, rejected {rejected}/100")))
}

fn c8_directional(fx: &Fixture) -> Outcome {
    let z = 0.5f64;
    let m = 1.0 + (-z * z).exp();
    let dv = -2.0 * z * (-z * z).exp();
    let mut measured = Vec::new();
    let mut ratio01 = f64::NAN;
    for eps in SWEEP {
        let rec = directional_derivative_test(&[z], &fx.problem(eps).map_err(e2s)?).map_err(e2s)?;
        // Translating U_m: -(ε/2) V'(z) ∫U_m², ∫U_m² = 4√m.
        let predicted = -0.5 * eps * dv * 4.0 * m.sqrt();
        if eps == 0.1 {
            ratio01 = rec.measured / predicted;
        }
        measured.push(rec.measured);
    }
    let slope = log_log_slope(&SWEEP, &measured).ok_or("no slope")?;
    let ok = (0.75..=1.25).contains(&ratio01) && (slope - 1.0).abs() <= 0.15;
    Ok((ok, format!("ratio at eps 0.1: {ratio01:.4}; log-log slope {slope:.4}")))
}

fn c9_floor(fx: &Fixture) -> Outcome {
    let t = gradient_floor_experiment(&fx.spec, &fx.set, &SWEEP, &EnsembleSpec { members: 50, seed: SEED })
        .map_err(e2s)?;
    let slope = t.displaced_slope.ok_or("no displaced slope")?;
    let spread = t.annulus_spread.ok_or("no annulus spread")?;
    let a = (slope - 1.0).abs() <= 0.2;
    let b = spread <= 2.0;
    Ok((
        a && b,
        format!(
            "displaced slope {slope:.4} ({}); annulus spread {spread:.3} ({})",
            if a { "ok" } else { "out of range" },
            if b { "ok" } else { "above 2" }
        ),
    ))
}

fn c10_degree(fx: &Fixture) -> Outcome {
    let rep = degree_loop(&fx.problem(0.1).map_err(e2s)?, &fx.set, 256, 0).map_err(e2s)?;
    Ok((rep.degree.abs() == 1, format!("degree {} with {} samples, max jump {:.3}", rep.degree, rep.samples, rep.max_jump)))
}

fn c11_concentration(fx: &Fixture) -> Outcome {
    let d: Vec<f64> = fx.sweep.iter().map(|s| s.record.dist_to_max).collect();
    let gamma = fx.solution(0.05).record.gamma;
    let e = e_closed(2.0);
    let ok = d.windows(2).all(|w| w[1] < w[0]) && d[3] <= 0.5 && (gamma - e).abs() <= 0.1;
    let d: Vec<String> = d.iter().map(|v| format!("{v:.2e}")).collect();
    Ok((ok, format!("dist [{}]; Gamma(0.05) = {gamma:.5} vs {e:.4}", d.join(", "))))
}

fn c12_level(fx: &Fixture) -> Outcome {
    let e = e_closed(2.0);
    let gaps: Vec<f64> = fx.sweep.iter().map(|s| (s.record.level - e).abs()).collect();
    let margins: Vec<f64> = fx.sweep.iter().map(|s| s.record.margin).collect();
    let ok = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-2) && margins.iter().all(|&m| m > 0.0);
    Ok((ok, format!("|c - E| {gaps:.4?}; margins {margins:.3?}")))
}

fn c13_flow(fx: &Fixture) -> Outcome {
    let mut ok = true;
    let mut steps = 0;
    for s in &fx.sweep {
        let t = &s.trace;
        ok &= t.energies_non_increasing() && t.drift_bound().is_some() && t.drift_violations().is_empty();
        steps += t.records.len();
    }
    Ok((ok, format!("{} traces, {steps} records", fx.sweep.len())))
}

fn data_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c14_determinism(_: &Fixture) -> Outcome {
    let exe = env!("CARGO_BIN_EXE_semiclassical");
    let mut runs = Vec::new();
    for jobs in ["1", "4"] {
        let dir = tempfile::tempdir().map_err(e2s)?;
        for sub in ["limit", "sweep"] {
            let st = Command::new(exe)
                .args([sub, "--seed", "7", "--jobs", jobs, "--out"])
                .arg(dir.path())
                .output()
                .map_err(e2s)?;
            if !st.status.success() {
                return Ok((false, format!("{sub} exited with {:?}", st.status.code())));
            }
        }
        let files = data_files(&dir.path().join("sweep"));
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("sweep/manifest.json")).map_err(e2s)?).map_err(e2s)?;
        let listed: Vec<&str> = manifest["files"].as_array().ok_or("no inventory")?.iter().filter_map(|f| f["path"].as_str()).collect();
        if listed != files.keys().map(String::as_str).collect::<Vec<_>>() {
            return Ok((false, "manifest inventory differs from directory contents".into()));
        }
        runs.push(files);
    }
    let same = runs[0] == runs[1];
    Ok((same, format!("{} data files, identical across runs: {same}", runs[0].len())))
}

fn main() {
    let fx = match Fixture::new() {
        Ok(f) => f,
        Err(e) => {
            println!("FAIL fixture: {e}");
            std::process::exit(1);
        }
    };
    let criteria: [Criterion; 14] = [
        ("limit-solver oracle", c1_limit_oracle),
        ("Pohozaev residual", c2_pohozaev),
        ("E_m monotonicity", c3_monotone),
        ("barycenter properties", c4_barycenter),
        ("penalty extinction", c5_penalty),
        ("decay", c6_decay),
        ("scalar recursion", c7_recursion),
        ("directional derivative", c8_directional),
        ("gradient floor, two regimes", c9_floor),
        ("degree", c10_degree),
        ("concentration trend", c11_concentration),
        ("min-max level", c12_level),
        ("flow contract", c13_flow),
        ("determinism", c14_determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = check(&fx).unwrap_or_else(|e| (false, format!("error: {e}")));
        let note = if !pass && EXPECTED_FAILURES.contains(&(k + 1)) { " [expected failure]" } else { "" };
        println!("{} {:>2} {name}: {detail}{note}", if pass { "PASS" } else { "FAIL" }, k + 1);
        if !pass {
            failed.push(k + 1);
        }
    }
    println!("failed criteria: {failed:?}; expected failures: {EXPECTED_FAILURES:?}");
    if failed != EXPECTED_FAILURES {
        std::process::exit(1);
    }
}
