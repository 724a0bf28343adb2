use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::rundir::{ManifestHead, RunDir, MANIFEST};
use semiclassical::config::Config;
use semiclassical::cutoff::CutoffSpec;
use semiclassical::limit::{build_s0, energy_curve, ground_state, GroundStateSet, SetOptions};
use semiclassical::minmax::{box_adequacy_threshold, degree_loop, solve_at, Solution};
use semiclassical::problem::ProblemSpec;
use semiclassical::verify::{
    decay_recursion_check, directional_derivative_test, gradient_floor_experiment, log_log_slope, tail_profile,
    tail_profile_about, DecayFit, DirectionalRecord, EnsembleSpec,
};
use semiclassical::{Error, Grid};

/// Half-width of the grid the ground-state snapshots are sampled on.
const SNAPSHOT_HALF_WIDTH: f64 = 20.0;
const RECURSION_INSTANCES: usize = 100;

pub struct Context {
    pub config: Config,
    pub spec: ProblemSpec,
    pub config_sha256: String,
    pub out: PathBuf,
    pub eps: Vec<f64>,
    pub seed: u64,
    pub jobs: usize,
    pub pool: rayon::ThreadPool,
}

fn float(x: f64) -> String {
    format!("{x:.17e}")
}

impl Context {
    fn head(&self, command: &str, eps: Vec<f64>, set: Option<&GroundStateSet>) -> ManifestHead {
        ManifestHead {
            command: command.to_string(),
            config_sha256: self.config_sha256.clone(),
            config: self.config.clone(),
            seed: self.seed,
            eps,
            jobs: self.jobs,
            cutoff: set.map(|s| CutoffSpec::new(s.constants.rho1, self.spec.params.delta0)),
        }
    }

    fn single_eps(&self, command: &str) -> Result<f64, CliError> {
        match self.eps.as_slice() {
            [e] => Ok(*e),
            many => Err(CliError::Usage(format!("{command} takes a single eps, got {many:?}; pass --eps"))),
        }
    }

    fn set_options(&self) -> SetOptions {
        SetOptions {
            dim: self.spec.dim,
            v0: self.spec.potential.max_value(),
            delta0: self.spec.params.delta0,
            t0: self.spec.params.t0,
        }
    }

    fn set_dir(&self) -> PathBuf {
        self.out.join("limit").join("set")
    }

    fn load_set(&self) -> Result<GroundStateSet, CliError> {
        let dir = self.set_dir();
        if !dir.join(MANIFEST).is_file() {
            return Err(CliError::Usage(format!(
                "no ground-state set at {}; run the `limit` subcommand first",
                dir.display()
            )));
        }
        let set = GroundStateSet::load(&dir)?;
        if set.options != self.set_options() {
            return Err(CliError::Usage(format!(
                "ground-state set at {} was built for a different problem; rerun `limit`",
                dir.display()
            )));
        }
        Ok(set)
    }

    fn check_box(&self, eps: f64, set: &GroundStateSet) -> Result<(), CliError> {
        let limit = box_adequacy_threshold(&self.spec, set);
        if eps > limit {
            return Err(CliError::Usage(format!("eps = {eps} exceeds the box-adequacy threshold {limit:.4}")));
        }
        Ok(())
    }
}

pub fn limit(ctx: &Context) -> Result<(), CliError> {
    let spec = &ctx.spec;
    let masses = &ctx.config.run.masses;
    let (table, set) = ctx.pool.install(|| -> Result<_, Error> {
        let table = energy_curve(masses, spec.dim, &spec.nonlinearity, spec.params.t0)?;
        let set = build_s0(ctx.set_options(), &spec.nonlinearity)?;
        Ok((table, set))
    })?;
    let mut run = RunDir::create(&ctx.out.join("limit"))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["m", "energy"])?;
    for (m, e) in &table {
        w.write_record([float(*m), float(*e)])?;
    }
    run.write("energy_table.csv", &w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)?;
    let n = (2.0 * SNAPSHOT_HALF_WIDTH / spec.h).round() as usize + 1;
    let grid = Grid::new(spec.dim, SNAPSHOT_HALF_WIDTH, n)?;
    for path in set.save(&run.path().join("set"), &grid)? {
        run.adopt(&path)?;
    }
    for (m, e) in &table {
        println!("E({m}) = {e:.6}");
    }
    let manifest = run.finish(ctx.head("limit", Vec::new(), Some(&set)))?;
    println!("{}", manifest.display());
    Ok(())
}

fn write_solution(run: &mut RunDir, prefix: &str, sol: &Solution, stride: usize) -> Result<(), CliError> {
    run.write_json(&format!("{prefix}solve.json"), &sol.record)?;
    run.write_json(&format!("{prefix}energy.json"), &sol.record.energy)?;
    let mut trace = sol.trace.clone();
    let last = trace.records.len().saturating_sub(1);
    trace.records = trace
        .records
        .into_iter()
        .enumerate()
        .filter(|(k, _)| k % stride == 0 || *k == last)
        .map(|(_, r)| r)
        .collect();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf, sol.field.grid().dim())?;
    run.write(&format!("{prefix}trace.csv"), &buf)?;
    let v = sol.original_coordinates()?;
    run.write(&format!("{prefix}field.snls"), &semiclassical::snapshot::encode(&v))?;
    Ok(())
}

pub fn solve(ctx: &Context) -> Result<(), CliError> {
    let eps = ctx.single_eps("solve")?;
    let set = ctx.load_set()?;
    ctx.check_box(eps, &set)?;
    let sol = ctx.pool.install(|| solve_at(&ctx.spec, eps, &set))?;
    let mut run = RunDir::create(&ctx.out.join(format!("solve-eps{eps}")))?;
    write_solution(&mut run, "", &sol, ctx.config.run.trace_stride)?;
    let r = &sol.record;
    println!(
        "eps = {eps}: gamma = {:.6}, level = {:.6}, dist = {:.3e}, penalty = {:e}, iterations = {}",
        r.gamma, r.level, r.dist_to_max, r.energy.penalty, r.iterations
    );
    let manifest = run.finish(ctx.head("solve", vec![eps], Some(&set)))?;
    println!("{}", manifest.display());
    Ok(())
}

fn strictly_decreasing(eps: &[f64]) -> Result<(), CliError> {
    if eps.is_empty() {
        return Err(CliError::Usage("empty eps list".into()));
    }
    if let Some(k) = eps.windows(2).position(|w| w[1] >= w[0] || w[1].is_nan()) {
        return Err(CliError::Usage(format!(
            "eps list must be strictly decreasing: eps[{}] = {} then eps[{}] = {}",
            k,
            eps[k],
            k + 1,
            eps[k + 1]
        )));
    }
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    strictly_decreasing(&ctx.eps)?;
    let set = ctx.load_set()?;
    let results: Vec<Result<Solution, CliError>> = ctx.pool.install(|| {
        ctx.eps
            .par_iter()
            .map(|&eps| {
                ctx.check_box(eps, &set)?;
                Ok(solve_at(&ctx.spec, eps, &set)?)
            })
            .collect()
    });
    let mut run = RunDir::create(&ctx.out.join("sweep"))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps", "dist", "gamma", "c_eps", "decay_c", "status"])?;
    let mut failed = Vec::new();
    for (&eps, res) in ctx.eps.iter().zip(&results) {
        match res {
            Ok(sol) => {
                write_solution(&mut run, &format!("eps-{eps}/"), sol, ctx.config.run.trace_stride)?;
                let r = &sol.record;
                let decay = r.decay.map(|f| float(f.rate)).unwrap_or_default();
                w.write_record([float(eps), float(r.dist_to_max), float(r.gamma), float(r.level), decay, "ok".into()])?;
                println!("eps = {eps}: dist = {:.3e}, gamma = {:.6}, c = {:.6}", r.dist_to_max, r.gamma, r.level);
            }
            Err(e) => {
                let status = format!("failed: {e}");
                w.write_record([float(eps), String::new(), String::new(), String::new(), String::new(), status])?;
                eprintln!("eps = {eps}: {e}");
                failed.push(eps);
            }
        }
    }
    run.write("sweep.csv", &w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)?;
    let manifest = run.finish(ctx.head("sweep", ctx.eps.clone(), Some(&set)))?;
    println!("{}", manifest.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("sweep rows failed at eps = {failed:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    Decay,
    Recursion,
    Directional,
    Floor,
    All,
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: Option<f64>,
    requirement: String,
    pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: Option<f64>, requirement: &str, pass: bool) -> Check {
        Check { name: name.into(), value, requirement: requirement.into(), pass }
    }
}

#[derive(Serialize)]
struct DecayRun {
    eps: f64,
    fit: Option<DecayFit>,
    note: Option<String>,
}

#[derive(Serialize)]
struct DecayOutput {
    window: [f64; 2],
    control: Option<DecayFit>,
    runs: Vec<DecayRun>,
}

fn verify_decay(ctx: &Context, set: &GroundStateSet, run: &mut RunDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let window = (ctx.config.run.fit_window[0], ctx.config.run.fit_window[1]);
    // U_1 in one dimension: density tail e^{-2r}.
    let reach = 2.0 * window.1;
    let n = (2.0 * reach / ctx.spec.h).round() as usize + 1;
    let grid = Grid::new(1, reach, n)?;
    let soliton = ground_state(1.0, 1, &ctx.spec.nonlinearity, ctx.spec.params.t0)?.field(&grid, &[0.0]);
    let control = tail_profile_about(&soliton, &[0.0], window)?.fit;
    let rate = control.map(|f| f.rate);
    checks.push(Check::new("decay/control-rate", rate, "in [1.9, 2.1]", rate.is_some_and(|r| (1.9..=2.1).contains(&r))));

    let spec = ctx.spec.clone().with_localization(set.constants);
    let sols: Vec<Result<Solution, CliError>> = ctx.pool.install(|| {
        ctx.eps
            .par_iter()
            .map(|&eps| {
                ctx.check_box(eps, set)?;
                Ok(solve_at(&ctx.spec, eps, set)?)
            })
            .collect()
    });
    let mut runs = Vec::new();
    for (&eps, sol) in ctx.eps.iter().zip(sols) {
        let sol = sol?;
        let problem = spec.at_eps(eps)?;
        match tail_profile(&sol.field, &problem, window) {
            Ok(rep) => {
                let pass = rep.fit.is_some_and(|f| f.rate > 0.0 && f.r_squared >= 0.99);
                let name = format!("decay/eps-{eps}");
                checks.push(Check::new(name, rep.fit.map(|f| f.r_squared), "rate > 0, r_squared >= 0.99", pass));
                runs.push(DecayRun { eps, fit: rep.fit, note: None });
            }
            // The window does not fit in the box at this eps.
            Err(Error::OutOfRange(msg)) => runs.push(DecayRun { eps, fit: None, note: Some(msg) }),
            Err(e) => return Err(e.into()),
        }
    }
    run.write_json("decay.json", &DecayOutput { window: [window.0, window.1], control, runs })?;
    Ok(())
}

#[derive(Serialize)]
struct RecursionOutput {
    seed: u64,
    satisfying: usize,
    accepted: usize,
    violating: usize,
    rejected: usize,
}

/// `Q(r) ≤ Q(r-1)/θ + b` with random slack; returns `(q, θ, b, R₁)`.
fn recursion_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64, f64, f64) {
    let theta = rng.gen_range(1.05..4.0);
    let b = rng.gen_range(0.0..2.0);
    let len = rng.gen_range(2..40);
    let mut q = vec![rng.gen_range(0.0..100.0)];
    for _ in 1..len {
        let prev = *q.last().unwrap();
        q.push((prev / theta + b) * rng.gen_range(0.0..=1.0));
    }
    let r1 = rng.gen_range(0..len) as f64;
    (q, theta, b, r1)
}

fn verify_recursion(ctx: &Context, run: &mut RunDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut accepted = 0;
    for _ in 0..RECURSION_INSTANCES {
        let (q, theta, b, r1) = recursion_instance(&mut rng);
        if decay_recursion_check(&q, 0.0, theta, b, r1)? {
            accepted += 1;
        }
    }
    let mut rejected = 0;
    for _ in 0..RECURSION_INSTANCES {
        let (mut q, theta, b, r1) = recursion_instance(&mut rng);
        let k = rng.gen_range(1..q.len());
        q[k] = (q[k - 1] / theta + b) * rng.gen_range(1.01..2.0) + 1e-6;
        if let Err(Error::RecursionHypothesis { .. }) = decay_recursion_check(&q, 0.0, theta, b, r1) {
            rejected += 1;
        }
    }
    let n = RECURSION_INSTANCES;
    checks.push(Check::new("recursion/accepted", Some(accepted as f64), "all satisfying instances", accepted == n));
    checks.push(Check::new("recursion/rejected", Some(rejected as f64), "all violating instances", rejected == n));
    run.write_json(
        "recursion.json",
        &RecursionOutput { seed: ctx.seed, satisfying: n, accepted, violating: n, rejected },
    )?;
    Ok(())
}

fn verify_directional(
    ctx: &Context,
    set: &GroundStateSet,
    run: &mut RunDir,
    checks: &mut Vec<Check>,
) -> Result<(), CliError> {
    let spec = ctx.spec.clone().with_localization(set.constants);
    let z = &ctx.config.run.direction_point;
    let records: Vec<DirectionalRecord> = ctx.pool.install(|| {
        ctx.eps.par_iter().map(|&eps| directional_derivative_test(z, &spec.at_eps(eps)?)).collect::<Result<_, Error>>()
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps", "m", "measured", "predicted", "ratio", "dual_bound", "auxiliary_distance"])?;
    for r in &records {
        w.write_record([r.eps, r.m, r.measured, r.predicted, r.ratio, r.dual_bound, r.auxiliary_distance].map(float))?;
        if r.eps <= 0.1 {
            let pass = (0.75..=1.25).contains(&r.ratio);
            checks.push(Check::new(format!("directional/ratio-eps-{}", r.eps), Some(r.ratio), "in [0.75, 1.25]", pass));
        }
    }
    run.write("directional.csv", &w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)?;
    if records.len() >= 2 {
        let xs: Vec<f64> = records.iter().map(|r| r.eps).collect();
        let ys: Vec<f64> = records.iter().map(|r| r.measured).collect();
        let slope = log_log_slope(&xs, &ys);
        let pass = slope.is_some_and(|s| (s - 1.0).abs() <= 0.15);
        checks.push(Check::new("directional/slope", slope, "within 0.15 of 1", pass));
    }
    Ok(())
}

fn verify_floor(ctx: &Context, set: &GroundStateSet, run: &mut RunDir, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let ensemble = EnsembleSpec { members: ctx.config.run.ensemble_members, seed: ctx.seed };
    let table = ctx.pool.install(|| gradient_floor_experiment(&ctx.spec, set, &ctx.eps, &ensemble))?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    run.write("verify.csv", &buf)?;
    run.write_json("floor.json", &table)?;
    let slope = table.displaced_slope;
    checks.push(Check::new(
        "floor/displaced-slope",
        slope,
        "within 0.2 of 1",
        slope.is_some_and(|s| (s - 1.0).abs() <= 0.2),
    ));
    let spread = table.annulus_spread;
    checks.push(Check::new("floor/annulus-spread", spread, "at most 2", spread.is_some_and(|s| s <= 2.0)));
    let excess = table.rows.iter().map(|r| r.duality_excess).fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new("floor/duality-excess", Some(excess), "at most 1e-6", excess <= 1e-6));
    Ok(())
}

pub fn verify(ctx: &Context, which: Experiment) -> Result<(), CliError> {
    use Experiment::*;
    let wants = |e: Experiment| which == All || which == e;
    let set = if which == Recursion { None } else { Some(ctx.load_set()?) };
    let name = format!("{which:?}").to_lowercase();
    let mut run = RunDir::create(&ctx.out.join(format!("verify-{name}")))?;
    let mut checks = Vec::new();
    if wants(Decay) {
        verify_decay(ctx, set.as_ref().unwrap(), &mut run, &mut checks)?;
    }
    if wants(Recursion) {
        verify_recursion(ctx, &mut run, &mut checks)?;
    }
    if wants(Directional) {
        verify_directional(ctx, set.as_ref().unwrap(), &mut run, &mut checks)?;
    }
    if wants(Floor) {
        verify_floor(ctx, set.as_ref().unwrap(), &mut run, &mut checks)?;
    }
    run.write_json("checks.json", &checks)?;
    for c in &checks {
        let v = c.value.map(|v| format!("{v:.6}")).unwrap_or_else(|| "none".into());
        println!("{} {} = {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, v, c.requirement);
    }
    let manifest = run.finish(ctx.head("verify", ctx.eps.clone(), set.as_ref()))?;
    println!("{}", manifest.display());
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

pub fn degree(ctx: &Context) -> Result<(), CliError> {
    let eps = ctx.single_eps("degree")?;
    let set = ctx.load_set()?;
    ctx.check_box(eps, &set)?;
    let problem = ctx.spec.clone().with_localization(set.constants).at_eps(eps)?;
    let rc = &ctx.config.run;
    let report = ctx.pool.install(|| degree_loop(&problem, &set, rc.degree_samples, rc.flow_budget))?;
    let mut run = RunDir::create(&ctx.out.join(format!("degree-eps{eps}")))?;
    run.write_json("degree.json", &report)?;
    run.finish(ctx.head("degree", vec![eps], Some(&set)))?;
    println!("{}", report.degree);
    Ok(())
}

pub fn resolve_out(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("SNLS_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}
