use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use saqc_core::dimacs;
use saqc_core::dynamics::{
    default_initial_state, propagate_detailed, PropagationConfig, RestartRecord, RestartSettings,
};
use saqc_core::error::Error as CoreError;
use saqc_core::experiments::{
    cumulative_success, generate_instances, median_by_group, probability_curves, read_rows_csv, run_restart_trials,
    run_sweep, tau_sweep, write_curves_csv, write_group_stats_csv, write_rows_csv, write_rows_jsonl, GuessSelection,
    InstanceSelection, RestartTrials, SweepConfig, SweepOptions,
};
use saqc_core::hamiltonian::{HatFunction, Mode, ScheduleSpec};
use saqc_core::sat::{guess_metrics, Assignment, CnfInstance};
use saqc_core::spectral::{epsilon_bound_for, runtime_estimate, scan_profile, ScanOptions};

use crate::manifest::{sidecar_path, ManifestBuilder};
use crate::{GapArgs, GenArgs, PropagateArgs, RestartArgs, ScheduleArgs, StatsArgs, SweepArgs, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read_instance(path: &Path) -> Result<CnfInstance> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    dimacs::read(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// The instance's unique solution, from its comment line or by enumeration.
fn solution_of(inst: &CnfInstance) -> Result<Assignment> {
    if let Some(s) = inst.unique_solution() {
        return Ok(s);
    }
    if inst.n() > saqc_core::sat::DEFAULT_ENUMERATION_CAP {
        bail!(CoreError::Capacity {
            what: "variable count for enumeration",
            value: inst.n(),
            limit: saqc_core::sat::DEFAULT_ENUMERATION_CAP,
        });
    }
    let mut found = (0..1u64 << inst.n()).filter(|&z| inst.violations(z) == 0);
    match (found.next(), found.next()) {
        (Some(z), None) => Ok(Assignment::new(z, inst.n())?),
        (None, _) => bail!(CoreError::Input("instance is unsatisfiable".into())),
        _ => bail!(CoreError::Input("instance has more than one satisfying assignment".into())),
    }
}

fn build_schedule(args: &ScheduleArgs, inst: &CnfInstance) -> Result<ScheduleSpec> {
    let guess = match (args.mode, args.guess) {
        (Mode::Caqc, Some(_)) => {
            eprintln!("warning: --guess is ignored in caqc mode");
            None
        }
        (Mode::Saqc, None) => return Err(usage("saqc mode needs --guess")),
        (_, g) => g,
    };
    Ok(ScheduleSpec::for_instance(inst, args.mode, guess, args.delta)?)
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Runs `write` against `out` or stdout; returns whether a file was written.
fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<bool> {
    match out {
        Some(path) => {
            let mut w = create_writer(path)?;
            write(&mut w)?;
            w.flush()?;
            Ok(true)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
            Ok(false)
        }
    }
}

pub fn gen(args: GenArgs) -> Result<()> {
    let count = if args.cover {
        if args.n >= 63 {
            return Err(usage(format!("--cover needs 2^n instances, n = {} is too large", args.n)));
        }
        1usize << args.n
    } else {
        args.count.unwrap_or(0)
    };
    let cfg = SweepConfig {
        m: args.m,
        master_seed: args.seed,
        instances: if args.cover { InstanceSelection::Cover } else { InstanceSelection::Independent },
        ..SweepConfig::new(args.n, count)
    };
    cfg.validate()?;
    let instances = generate_instances(&cfg)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let config = json!({ "n": cfg.n, "m": cfg.clause_count(), "count": count, "cover": args.cover, "seed": args.seed });
    let mut manifest = ManifestBuilder::new("gen", config, Some(args.seed));
    for (i, inst) in instances.iter().enumerate() {
        let path = args.out.join(format!("instance_{i:04}.cnf"));
        fs::write(&path, dimacs::to_string(inst)).with_context(|| format!("writing {}", path.display()))?;
        manifest.output(&path);
    }
    manifest.write(&args.out.join("manifest.json"))?;
    eprintln!("wrote {} instances to {}", instances.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct GapSummary {
    instance: String,
    n: usize,
    m: usize,
    mode: Mode,
    delta: f64,
    guess: Option<String>,
    solution: String,
    bf: Option<u32>,
    uc: Option<u32>,
    g_min: f64,
    s_star: f64,
    interior: bool,
    e_measured: Option<f64>,
    e_bound: f64,
    runtime_estimate: Option<f64>,
}

pub fn gap(args: GapArgs) -> Result<()> {
    let inst = read_instance(&args.schedule.instance)?;
    let solution = solution_of(&inst)?;
    let sched = build_schedule(&args.schedule, &inst)?;
    let (scan, eps) = scan_profile(&sched, &ScanOptions::with_grid(args.grid), !args.no_epsilon)?;
    let metrics = sched.guess().map(|g| guess_metrics(&inst, &g)).transpose()?;
    let e_measured = eps.map(|e| e.value);
    let summary = GapSummary {
        instance: args.schedule.instance.display().to_string(),
        n: inst.n(),
        m: inst.m(),
        mode: sched.mode(),
        delta: args.schedule.delta,
        guess: sched.guess().map(|g| g.to_string()),
        solution: solution.to_string(),
        bf: metrics.map(|m| m.bf),
        uc: metrics.map(|m| m.uc),
        g_min: scan.g_min,
        s_star: scan.s_star,
        interior: scan.interior(),
        e_measured,
        e_bound: epsilon_bound_for(sched.mode(), inst.n(), inst.alpha(), args.schedule.delta),
        runtime_estimate: e_measured.map(|e| runtime_estimate(e, scan.g_min)).transpose()?,
    };
    println!("{}", serde_json::to_string(&summary)?);

    if let Some(out) = &args.out {
        emit(Some(out), |w| Ok(scan.write_curve_csv(w)?))?;
        let config = json!({
            "mode": sched.mode(), "guess": summary.guess, "delta": args.schedule.delta,
            "grid": args.grid, "epsilon": !args.no_epsilon,
        });
        let mut manifest = ManifestBuilder::new("gap", config, None);
        manifest.input(&args.schedule.instance);
        manifest.output(out);
        manifest.write(&sidecar_path(out))?;
    }
    Ok(())
}

fn resolve_sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    let mut cfg = if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str::<SweepConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
    } else if let Some(name) = &args.preset {
        SweepConfig::preset(name).ok_or_else(|| usage(format!("unknown preset '{name}' (desk6, desk7, full6, full7)")))?
    } else {
        let n = args.n.ok_or_else(|| usage("sweep needs --config, --preset or --n"))?;
        let count = if n < 63 { 1usize << n } else { 0 };
        SweepConfig::new(n, count)
    };
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if args.m.is_some() {
        cfg.m = args.m;
    }
    if let Some(k) = args.instances {
        cfg.instance_count = k;
    }
    if args.independent {
        cfg.instances = InstanceSelection::Independent;
    }
    if let Some(g) = &args.guesses {
        cfg.guesses = match g.as_str() {
            "all" => GuessSelection::All,
            k => GuessSelection::Random {
                count: k.parse().map_err(|_| usage(format!("--guesses expects 'all' or a count, got '{k}'")))?,
            },
        };
    }
    if let Some(d) = &args.deltas {
        cfg.delta_grid = d.clone();
    }
    if let Some(g) = args.grid {
        cfg.grid_points = g;
    }
    if let Some(m) = &args.modes {
        cfg.modes = m.clone();
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = resolve_sweep_config(&args)?;
    let (saqc, caqc) = cfg.scan_counts();
    eprintln!("sweep: {} instances, {saqc} SAQC and {caqc} CAQC scans", cfg.instance_count);
    let outcome = run_sweep(&cfg, &SweepOptions { jobs: args.jobs, checkpoint: args.checkpoint.clone() })?;
    if outcome.resumed > 0 {
        eprintln!("reused {} rows from the checkpoint", outcome.resumed);
    }

    fs::create_dir_all(args.out.join("instances")).with_context(|| format!("creating {}", args.out.display()))?;
    let mut manifest = ManifestBuilder::new("sweep", serde_json::to_value(&cfg)?, Some(cfg.master_seed));
    if let Some(path) = &args.config {
        manifest.input(path);
    }
    for (i, inst) in outcome.instances.iter().enumerate() {
        let path = args.out.join("instances").join(format!("instance_{i:04}.cnf"));
        fs::write(&path, dimacs::to_string(inst)).with_context(|| format!("writing {}", path.display()))?;
        manifest.output(&path);
    }
    let csv_path = args.out.join("rows.csv");
    emit(Some(&csv_path), |w| Ok(write_rows_csv(&outcome.rows, w)?))?;
    manifest.output(&csv_path);
    let jsonl_path = args.out.join("rows.jsonl");
    emit(Some(&jsonl_path), |w| Ok(write_rows_jsonl(&outcome.rows, w)?))?;
    manifest.output(&jsonl_path);
    manifest.write(&args.out.join("manifest.json"))?;

    let failed: Vec<_> = outcome.failed_rows().collect();
    if let Some(first) = failed.first() {
        bail!(CoreError::Accuracy(format!(
            "{} of {} scans failed; first: {}",
            failed.len(),
            outcome.rows.len(),
            first.error.as_deref().unwrap_or("unknown error")
        )));
    }
    eprintln!("wrote {} rows to {}", outcome.rows.len(), csv_path.display());
    Ok(())
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let file = File::open(&args.rows).with_context(|| format!("opening {}", args.rows.display()))?;
    let rows = read_rows_csv(BufReader::new(file)).with_context(|| format!("reading {}", args.rows.display()))?;
    let written = if let Some(key) = args.group {
        let stats = median_by_group(&rows, key)?;
        emit(args.out.as_deref(), |w| Ok(write_group_stats_csv(&stats, w)?))?
    } else {
        let curves = probability_curves(&rows)?;
        emit(args.out.as_deref(), |w| Ok(write_curves_csv(&curves, w)?))?
    };
    if written {
        let out = args.out.as_ref().expect("written implies a path");
        let config = json!({ "group": args.group.map(|g| g.as_str()), "curves": args.curves });
        let mut manifest = ManifestBuilder::new("stats", config, None);
        manifest.input(&args.rows);
        manifest.output(out);
        manifest.write(&sidecar_path(out))?;
    }
    Ok(())
}

pub fn propagate(args: PropagateArgs) -> Result<()> {
    if args.trajectory.is_some() && args.tau.len() != 1 {
        return Err(usage("--trajectory needs exactly one --tau"));
    }
    let inst = read_instance(&args.schedule.instance)?;
    let solution = solution_of(&inst)?;
    let sched = build_schedule(&args.schedule, &inst)?;
    let psi0 = default_initial_state(&sched)?;
    let template = PropagationConfig {
        tolerance: args.tolerance,
        fixed_steps: args.steps,
        ..PropagationConfig::new(args.tau[0])
    };

    let mut outputs: Vec<PathBuf> = Vec::new();
    let points = if let Some(traj) = &args.trajectory {
        let cfg = PropagationConfig { record_overlaps: true, ..template };
        let run = propagate_detailed(&sched, &cfg, &psi0, Some(solution))?;
        emit(Some(traj), |w| Ok(run.write_trajectory_csv(w)?))?;
        outputs.push(traj.clone());
        vec![json!({
            "tau": cfg.tau,
            "success_probability": run.state.probability(solution.bits()),
            "max_norm_drift": run.max_norm_drift,
            "accepted_steps": run.accepted_steps,
        })]
    } else {
        tau_sweep(&sched, &template, &psi0, solution, &args.tau, args.jobs)?
            .iter()
            .map(serde_json::to_value)
            .collect::<Result<_, _>>()?
    };
    if emit(args.out.as_deref(), |w| {
        for p in &points {
            writeln!(w, "{}", serde_json::to_string(p)?)?;
        }
        Ok(())
    })? {
        outputs.extend(args.out.clone());
    }

    if let Some(first) = outputs.first() {
        let config = json!({
            "mode": sched.mode(), "guess": sched.guess().map(|g| g.to_string()), "delta": args.schedule.delta,
            "tau": args.tau, "steps": args.steps, "tolerance": args.tolerance,
        });
        let mut manifest = ManifestBuilder::new("propagate", config, None);
        manifest.input(&args.schedule.instance);
        for p in &outputs {
            manifest.output(p);
        }
        manifest.write(&sidecar_path(args.out.as_ref().unwrap_or(first)))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrialLine<'a> {
    trial: usize,
    #[serde(flatten)]
    record: &'a RestartRecord,
}

pub fn restart(args: RestartArgs) -> Result<()> {
    if args.rounds == 0 || args.trials == 0 {
        return Err(usage("--rounds and --trials must be positive"));
    }
    let inst = read_instance(&args.instance)?;
    solution_of(&inst)?;
    let trials = RestartTrials {
        settings: RestartSettings {
            delta: args.delta,
            hat: HatFunction::default(),
            propagation: PropagationConfig::new(args.tau),
            max_rounds: args.rounds,
            policy: args.mode,
        },
        trials: args.trials,
        master_seed: args.seed,
        initial_guess: args.guess,
    };
    let records = run_restart_trials(&inst, &trials, args.jobs)?;
    let written = emit(args.out.as_deref(), |w| {
        for (trial, record) in records.iter().enumerate() {
            writeln!(w, "{}", serde_json::to_string(&TrialLine { trial, record })?)?;
        }
        Ok(())
    })?;
    let cumulative = cumulative_success(&records, args.rounds);
    let summary: Vec<String> = cumulative.iter().enumerate().map(|(k, p)| format!("{}: {p:.3}", k + 1)).collect();
    eprintln!("cumulative success by round: {}", summary.join(", "));

    if written {
        let out = args.out.as_ref().expect("written implies a path");
        let config = json!({
            "mode": args.mode, "rounds": args.rounds, "tau": args.tau, "delta": args.delta,
            "trials": args.trials, "guess": args.guess.map(|g| g.to_string()),
        });
        let mut manifest = ManifestBuilder::new("restart", config, Some(args.seed));
        manifest.input(&args.instance);
        manifest.output(out);
        manifest.write(&sidecar_path(out))?;
    }
    Ok(())
}
