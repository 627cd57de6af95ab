//! Sweeps over instances, guesses and driver strengths, and the statistics
//! computed from their rows: grouped medians, probability curves and the
//! restart trial driver.
//!
//! Work items are keyed by `(instance_id, δ, mode, guess)`. Results are
//! sorted by key before anything is written or aggregated, so the output does
//! not depend on the number of worker threads.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    propagate_detailed, run_restart_with_penalty, PropagationConfig, RestartRecord, RestartSettings, WaveState,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{final_hamiltonian, DiagonalOperator, HatFunction, Mode, ScheduleSpec};
use crate::sat::{
    default_clause_count, generate_distinct_solution_set, generate_solution_cover_set_with, generate_usa_instance,
    guess_metrics, Assignment, CnfInstance, GenerationLimits,
};
use crate::seed::{SeedStreams, GENERATION, GUESS_SELECTION, MEASUREMENT};
use crate::spectral::{epsilon_bound_for, scan_profile, ScanOptions, DEFAULT_GRID_POINTS};

pub const ROWS_CSV_HEADER: [&str; 13] =
    ["instance_id", "n", "m", "solution", "guess", "bf", "uc", "delta", "mode", "g_min", "s_star", "e_measured", "e_bound"];

/// δ ∈ {0.5, 1.0, …, 10.0}.
pub fn full_delta_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.5).collect()
}

/// δ ∈ {0.5, 1.0, …, 3.0}.
pub fn desk_delta_grid() -> Vec<f64> {
    (1..=6).map(|k| k as f64 * 0.5).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceSelection {
    /// Instances with pairwise distinct solutions. With `2^n` instances the
    /// set covers every assignment and instance `i` has solution `i`.
    Cover,
    /// Independent draws; solutions may repeat.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum GuessSelection {
    All,
    Random { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    /// Clause count; `round(4.26 n)` when absent.
    #[serde(default)]
    pub m: Option<usize>,
    pub instance_count: usize,
    #[serde(default = "default_instances")]
    pub instances: InstanceSelection,
    #[serde(default = "default_guesses")]
    pub guesses: GuessSelection,
    #[serde(default = "full_delta_grid")]
    pub delta_grid: Vec<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub hat: HatFunction,
}

fn default_instances() -> InstanceSelection {
    InstanceSelection::Cover
}

fn default_guesses() -> GuessSelection {
    GuessSelection::All
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Caqc, Mode::Saqc]
}

impl SweepConfig {
    pub fn new(n: usize, instance_count: usize) -> Self {
        SweepConfig {
            n,
            m: None,
            instance_count,
            instances: default_instances(),
            guesses: default_guesses(),
            delta_grid: full_delta_grid(),
            grid_points: DEFAULT_GRID_POINTS,
            master_seed: 0,
            modes: default_modes(),
            hat: HatFunction::default(),
        }
    }

    /// 6 variables, 16 instances with distinct solutions, all 64 guesses,
    /// δ ∈ {0.5, …, 3.0}.
    pub fn desk6() -> Self {
        SweepConfig { delta_grid: desk_delta_grid(), ..Self::new(6, 16) }
    }

    /// 7 variables, 16 instances, all 128 guesses, δ ∈ {0.5, …, 3.0}.
    pub fn desk7() -> Self {
        SweepConfig { delta_grid: desk_delta_grid(), ..Self::new(7, 16) }
    }

    /// Full cover: `2^n` instances × `2^n` guesses × 20 values of δ.
    pub fn full(n: usize) -> Self {
        Self::new(n, 1 << n)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk6" => Some(Self::desk6()),
            "desk7" => Some(Self::desk7()),
            "full6" => Some(Self::full(6)),
            "full7" => Some(Self::full(7)),
            _ => None,
        }
    }

    pub fn clause_count(&self) -> usize {
        self.m.unwrap_or_else(|| default_clause_count(self.n))
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(3..=crate::hamiltonian::MAX_QUBITS).contains(&self.n) {
            problems.push(format!("n = {} must lie in 3..={}", self.n, crate::hamiltonian::MAX_QUBITS));
        }
        if self.m == Some(0) {
            problems.push("m must be positive".to_string());
        }
        if self.instance_count == 0 {
            problems.push("instance_count must be positive".to_string());
        }
        if self.instances == InstanceSelection::Cover && self.n < 64 && self.instance_count > 1 << self.n.min(63) {
            problems.push(format!("instance_count = {} exceeds the 2^{} possible distinct solutions", self.instance_count, self.n));
        }
        if let GuessSelection::Random { count } = self.guesses {
            if count == 0 {
                problems.push("guesses.count must be positive".to_string());
            } else if self.n < 64 && count > 1 << self.n.min(63) {
                problems.push(format!("guesses.count = {count} exceeds the 2^{} possible guesses", self.n));
            }
        }
        if self.delta_grid.is_empty() {
            problems.push("delta_grid is empty".to_string());
        }
        for d in &self.delta_grid {
            if !(d.is_finite() && *d > 0.0) {
                problems.push(format!("delta_grid value {d} must be finite and positive"));
            }
        }
        let distinct: HashSet<u64> = self.delta_grid.iter().map(|d| d.to_bits()).collect();
        if distinct.len() != self.delta_grid.len() {
            problems.push("delta_grid contains repeated values".to_string());
        }
        if self.grid_points < 3 {
            problems.push(format!("grid_points = {} must be at least 3", self.grid_points));
        }
        if self.modes.is_empty() {
            problems.push("modes is empty".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Input(format!("invalid sweep config: {}", problems.join("; "))))
        }
    }

    fn has_mode(&self, mode: Mode) -> bool {
        self.modes.contains(&mode)
    }

    /// Number of SAQC and CAQC scans the sweep performs.
    pub fn scan_counts(&self) -> (usize, usize) {
        let guesses = match self.guesses {
            GuessSelection::All => 1usize << self.n,
            GuessSelection::Random { count } => count,
        };
        let per_delta = self.instance_count * self.delta_grid.len();
        let saqc = if self.has_mode(Mode::Saqc) { per_delta * guesses } else { 0 };
        let caqc = if self.has_mode(Mode::Caqc) { per_delta } else { 0 };
        (saqc, caqc)
    }
}

/// Instances for a sweep, drawn from the generation substream.
pub fn generate_instances(cfg: &SweepConfig) -> Result<Vec<CnfInstance>> {
    let streams = SeedStreams::new(cfg.master_seed);
    let (n, m) = (cfg.n, cfg.clause_count());
    match cfg.instances {
        InstanceSelection::Cover => {
            let mut rng = streams.stream(GENERATION, 0);
            let limits = GenerationLimits::default();
            if cfg.instance_count == 1 << n {
                generate_solution_cover_set_with(n, m, &mut rng, &limits)
            } else {
                generate_distinct_solution_set(n, m, cfg.instance_count, &mut rng, &limits)
            }
        }
        InstanceSelection::Independent => (0..cfg.instance_count)
            .map(|i| generate_usa_instance(n, m, &mut streams.stream(GENERATION, i as u64)))
            .collect(),
    }
}

/// Guesses used for one instance, in increasing order.
pub fn guesses_for(cfg: &SweepConfig, instance_id: usize) -> Result<Vec<Assignment>> {
    let total = 1usize << cfg.n;
    let bits: Vec<u64> = match cfg.guesses {
        GuessSelection::All => (0..total as u64).collect(),
        GuessSelection::Random { count } => {
            let mut rng = SeedStreams::new(cfg.master_seed).stream(GUESS_SELECTION, instance_id as u64);
            let mut v: Vec<u64> = index::sample(&mut rng, total, count).into_iter().map(|z| z as u64).collect();
            v.sort_unstable();
            v
        }
    };
    bits.into_iter().map(|z| Assignment::new(z, cfg.n)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorkKey {
    pub instance_id: usize,
    pub delta_index: usize,
    pub mode: Mode,
    pub guess: Option<u64>,
}

/// One gap scan. CAQC rows leave `guess`, `bf` and `uc` empty. A failed scan
/// keeps its key and carries the message in `error` with no numeric results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub instance_id: usize,
    pub n: usize,
    pub m: usize,
    pub solution: String,
    pub guess: Option<String>,
    pub bf: Option<u32>,
    pub uc: Option<u32>,
    pub delta: f64,
    pub mode: Mode,
    pub g_min: Option<f64>,
    pub s_star: Option<f64>,
    pub e_measured: Option<f64>,
    pub e_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRow {
    fn guess_bits(&self) -> Result<Option<u64>> {
        self.guess.as_deref().map(|g| g.parse::<Assignment>().map(|a| a.bits())).transpose()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; rayon's default when `None`.
    pub jobs: Option<usize>,
    /// Append-only JSON-lines file of finished rows. Existing rows are reused.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub instances: Vec<CnfInstance>,
    /// All rows, sorted by work key.
    pub rows: Vec<SweepRow>,
    /// Rows taken from the checkpoint instead of being recomputed.
    pub resumed: usize,
}

impl SweepOutcome {
    pub fn failed_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

struct InstanceContext {
    inst: CnfInstance,
    solution: Assignment,
    hf: Arc<DiagonalOperator>,
}

pub(crate) fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::input("job count must be positive")),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::State(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn compute_row(ctx: &InstanceContext, key: &WorkKey, cfg: &SweepConfig) -> Result<SweepRow> {
    let delta = cfg.delta_grid[key.delta_index];
    let (n, m) = (ctx.inst.n(), ctx.inst.m());
    let mut row = SweepRow {
        instance_id: key.instance_id,
        n,
        m,
        solution: ctx.solution.to_string(),
        guess: None,
        bf: None,
        uc: None,
        delta,
        mode: key.mode,
        g_min: None,
        s_star: None,
        e_measured: None,
        e_bound: epsilon_bound_for(key.mode, n, ctx.inst.alpha(), delta),
        error: None,
    };
    let schedule = match (key.mode, key.guess) {
        (Mode::Caqc, _) => ScheduleSpec::caqc(ctx.hf.clone(), delta)?,
        (Mode::Saqc, Some(z)) => {
            let guess = Assignment::new(z, n)?;
            let metrics = guess_metrics(&ctx.inst, &guess)?;
            row.guess = Some(guess.to_string());
            row.bf = Some(metrics.bf);
            row.uc = Some(metrics.uc);
            ScheduleSpec::saqc(ctx.hf.clone(), guess, delta, cfg.hat.clone())?
        }
        (Mode::Saqc, None) => return Err(Error::State("SAQC work item without a guess".into())),
    };
    let opts = ScanOptions::with_grid(cfg.grid_points);
    match scan_profile(&schedule, &opts, true) {
        Ok((scan, eps)) => {
            row.g_min = Some(scan.g_min);
            row.s_star = Some(scan.s_star);
            row.e_measured = eps.map(|e| e.value);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    Ok(row)
}

fn work_keys(cfg: &SweepConfig) -> Result<Vec<WorkKey>> {
    let mut keys = Vec::new();
    for instance_id in 0..cfg.instance_count {
        let guesses = guesses_for(cfg, instance_id)?;
        for delta_index in 0..cfg.delta_grid.len() {
            if cfg.has_mode(Mode::Caqc) {
                keys.push(WorkKey { instance_id, delta_index, mode: Mode::Caqc, guess: None });
            }
            if cfg.has_mode(Mode::Saqc) {
                for g in &guesses {
                    keys.push(WorkKey { instance_id, delta_index, mode: Mode::Saqc, guess: Some(g.bits()) });
                }
            }
        }
    }
    Ok(keys)
}

fn row_key(row: &SweepRow, cfg: &SweepConfig) -> Result<WorkKey> {
    let delta_index = cfg
        .delta_grid
        .iter()
        .position(|d| *d == row.delta)
        .ok_or_else(|| Error::State(format!("checkpoint row has δ = {} outside the configured grid", row.delta)))?;
    Ok(WorkKey { instance_id: row.instance_id, delta_index, mode: row.mode, guess: row.guess_bits()? })
}

/// Reads checkpoint rows. A torn final line (from an interrupted write) is
/// dropped; a malformed line elsewhere is an error.
fn read_checkpoint(path: &Path) -> Result<Vec<SweepRow>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<std::io::Result<_>>()?;
    let mut rows = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SweepRow>(line) {
            Ok(r) => rows.push(r),
            Err(_) if i + 1 == lines.len() => {}
            Err(e) => return Err(Error::Parse { line: i + 1, message: format!("checkpoint: {e}") }),
        }
    }
    Ok(rows)
}

/// Opens the checkpoint for appending, first cutting off a torn final line
/// so that new rows start on a fresh line.
fn open_checkpoint(path: &Path) -> Result<File> {
    if let Ok(mut f) = File::open(path) {
        let mut text = String::new();
        f.read_to_string(&mut text)?;
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            let f = OpenOptions::new().write(true).open(path)?;
            f.set_len(keep as u64)?;
        }
    }
    Ok(OpenOptions::new().create(true).append(true).open(path)?)
}

/// Runs every configured scan. Deterministic for a fixed master seed.
pub fn run_sweep(cfg: &SweepConfig, opts: &SweepOptions) -> Result<SweepOutcome> {
    cfg.validate()?;
    let instances = generate_instances(cfg)?;
    let contexts: Vec<InstanceContext> = instances
        .iter()
        .map(|inst| {
            let solution = inst.unique_solution().ok_or_else(|| Error::State("generated instance lacks a solution".into()))?;
            Ok(InstanceContext { inst: inst.clone(), solution, hf: Arc::new(final_hamiltonian(inst)?) })
        })
        .collect::<Result<_>>()?;

    let keys = work_keys(cfg)?;
    let wanted: HashSet<WorkKey> = keys.iter().copied().collect();
    let mut done: BTreeMap<WorkKey, SweepRow> = BTreeMap::new();
    if let Some(path) = &opts.checkpoint {
        for row in read_checkpoint(path)? {
            let key = row_key(&row, cfg)?;
            let matches = wanted.contains(&key)
                && row.n == cfg.n
                && row.m == cfg.clause_count()
                && contexts[key.instance_id].solution.to_string() == row.solution;
            if !matches {
                return Err(Error::State(format!(
                    "checkpoint row for instance {} at δ = {} does not belong to this sweep configuration",
                    row.instance_id, row.delta
                )));
            }
            done.entry(key).or_insert(row);
        }
    }
    let resumed = done.len();
    let pending: Vec<WorkKey> = keys.into_iter().filter(|k| !done.contains_key(k)).collect();

    let sink = match &opts.checkpoint {
        Some(path) => Some(Mutex::new(open_checkpoint(path)?)),
        None => None,
    };
    let computed: Vec<(WorkKey, SweepRow)> = with_pool(opts.jobs, || {
        pending
            .par_iter()
            .map(|key| {
                let row = compute_row(&contexts[key.instance_id], key, cfg)?;
                if let Some(sink) = &sink {
                    let mut line = serde_json::to_string(&row)?;
                    line.push('\n');
                    let mut f = sink.lock().map_err(|_| Error::State("checkpoint lock poisoned".into()))?;
                    f.write_all(line.as_bytes())?;
                }
                Ok((*key, row))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    if let Some(sink) = sink {
        let f = sink.into_inner().map_err(|_| Error::State("checkpoint lock poisoned".into()))?;
        f.sync_all()?;
    }
    done.extend(computed);
    Ok(SweepOutcome { instances, rows: done.into_values().collect(), resumed })
}

fn opt_to_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// Rows as CSV with the fixed header. Failed rows keep their key columns and
/// leave the numeric results empty.
pub fn write_rows_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(ROWS_CSV_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.instance_id.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.solution.clone(),
            r.guess.clone().unwrap_or_default(),
            opt_to_string(&r.bf),
            opt_to_string(&r.uc),
            r.delta.to_string(),
            r.mode.to_string(),
            opt_to_string(&r.g_min),
            opt_to_string(&r.s_star),
            opt_to_string(&r.e_measured),
            r.e_bound.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_rows_jsonl<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(ROWS_CSV_HEADER.iter().copied()) {
        return Err(Error::Parse { line: 1, message: format!("unexpected header, expected {}", ROWS_CSV_HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<SweepRow>().enumerate() {
        let row = rec.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Median with the midpoint average for even counts. `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    /// Bit flips between guess and solution.
    Bf,
    /// Clauses the guess leaves unsatisfied.
    Uc,
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Bf => "bf",
            GroupKey::Uc => "uc",
        }
    }

    fn of(self, row: &SweepRow) -> Option<u32> {
        match self {
            GroupKey::Bf => row.bf,
            GroupKey::Uc => row.uc,
        }
    }
}

impl std::str::FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bf" => Ok(GroupKey::Bf),
            "uc" => Ok(GroupKey::Uc),
            other => Err(Error::input(format!("unknown group key '{other}' (expected bf or uc)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub key: GroupKey,
    pub group: u32,
    pub delta: f64,
    pub median_g_min: f64,
    pub count: usize,
}

fn saqc_results(rows: &[SweepRow]) -> impl Iterator<Item = (&SweepRow, f64)> {
    rows.iter().filter(|r| r.mode == Mode::Saqc).filter_map(|r| r.g_min.map(|g| (r, g)))
}

/// Median SAQC `g_min` per `(group, δ)`, sorted by group then δ. Groups
/// without rows are omitted.
pub fn median_by_group(rows: &[SweepRow], key: GroupKey) -> Result<Vec<GroupStats>> {
    if rows.is_empty() {
        return Err(Error::input("no rows to group"));
    }
    let mut items: Vec<(u32, f64, f64)> = saqc_results(rows).filter_map(|(r, g)| key.of(r).map(|k| (k, r.delta, g))).collect();
    items.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    Ok(items
        .chunk_by(|a, b| a.0 == b.0 && a.1 == b.1)
        .map(|chunk| {
            let values: Vec<f64> = chunk.iter().map(|c| c.2).collect();
            GroupStats {
                key,
                group: chunk[0].0,
                delta: chunk[0].1,
                median_g_min: median(&values).unwrap_or(f64::NAN),
                count: values.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledStats {
    pub mode: Mode,
    pub delta: f64,
    pub median_g_min: f64,
    pub count: usize,
}

/// Median `g_min` over all rows of one mode at each δ.
pub fn pooled_medians(rows: &[SweepRow], mode: Mode) -> Vec<PooledStats> {
    let mut by_delta: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.mode == mode) {
        if let Some(g) = r.g_min {
            by_delta.entry(ordered_bits(r.delta)).or_insert_with(|| (r.delta, Vec::new())).1.push(g);
        }
    }
    by_delta
        .into_values()
        .map(|(delta, v)| PooledStats { mode, delta, median_g_min: median(&v).unwrap_or(f64::NAN), count: v.len() })
        .collect()
}

/// Order-preserving integer key for non-negative finite floats.
fn ordered_bits(x: f64) -> u64 {
    x.to_bits()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// `g_saqc ≥ g_caqc`
    AtLeast,
    /// `g_saqc ≥ √2 · g_caqc`: at least twice as fast under `τ ∝ 1/g²`.
    Sqrt2,
}

impl Threshold {
    pub fn factor(self) -> f64 {
        match self {
            Threshold::AtLeast => 1.0,
            Threshold::Sqrt2 => std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    All,
    /// Guesses three or four bit flips from the solution.
    BitFlips34,
    UnsatisfiedClauses(u32),
}

impl Condition {
    fn admits(self, row: &SweepRow) -> bool {
        match self {
            Condition::All => true,
            Condition::BitFlips34 => matches!(row.bf, Some(3 | 4)),
            Condition::UnsatisfiedClauses(i) => row.uc == Some(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Criterion {
    pub threshold: Threshold,
    pub condition: Condition,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = match self.threshold {
            Threshold::AtLeast => "ge",
            Threshold::Sqrt2 => "ge_sqrt2",
        };
        match self.condition {
            Condition::All => write!(f, "{t}"),
            Condition::BitFlips34 => write!(f, "{t}|bf=3,4"),
            Condition::UnsatisfiedClauses(i) => write!(f, "{t}|uc={i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta: f64,
    /// `None` when no row satisfies the condition at this δ.
    pub probability: Option<f64>,
    pub successes: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityCurve {
    pub criterion: Criterion,
    pub points: Vec<CurvePoint>,
}

impl ProbabilityCurve {
    pub fn at(&self, delta: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.delta == delta)
    }
}

/// Fraction of guesses whose SAQC gap beats the CAQC gap of the same
/// instance and δ, for each threshold and condition. Conditions on UC are
/// produced for every UC value present in the rows.
pub fn probability_curves(rows: &[SweepRow]) -> Result<Vec<ProbabilityCurve>> {
    let mut baseline: HashMap<(usize, u64), f64> = HashMap::new();
    for r in rows.iter().filter(|r| r.mode == Mode::Caqc) {
        if let Some(g) = r.g_min {
            baseline.insert((r.instance_id, ordered_bits(r.delta)), g);
        }
    }
    let mut compared: Vec<(&SweepRow, f64, f64)> = Vec::new();
    for (r, g) in saqc_results(rows) {
        let base = baseline.get(&(r.instance_id, ordered_bits(r.delta))).ok_or_else(|| {
            Error::State(format!("no CAQC baseline for instance {} at δ = {}", r.instance_id, r.delta))
        })?;
        compared.push((r, g, *base));
    }
    let deltas: BTreeSet<u64> = compared.iter().map(|c| ordered_bits(c.0.delta)).collect();
    let ucs: BTreeSet<u32> = compared.iter().filter_map(|c| c.0.uc).collect();
    let mut conditions = vec![Condition::All, Condition::BitFlips34];
    conditions.extend(ucs.into_iter().map(Condition::UnsatisfiedClauses));

    let mut curves = Vec::new();
    for condition in conditions {
        for threshold in [Threshold::AtLeast, Threshold::Sqrt2] {
            let points = deltas
                .iter()
                .map(|&db| {
                    let delta = f64::from_bits(db);
                    let (mut successes, mut count) = (0, 0);
                    for (_, g, base) in compared.iter().filter(|c| c.0.delta == delta && condition.admits(c.0)) {
                        count += 1;
                        if *g >= threshold.factor() * base {
                            successes += 1;
                        }
                    }
                    let probability = (count > 0).then(|| successes as f64 / count as f64);
                    CurvePoint { delta, probability, successes, count }
                })
                .collect();
            curves.push(ProbabilityCurve { criterion: Criterion { threshold, condition }, points });
        }
    }
    Ok(curves)
}

/// Chance that at least one of two independent attempts succeeds, each with
/// probability `p1` (expected in `[0, 1]`).
pub fn two_trial_success(p1: f64) -> f64 {
    1.0 - (1.0 - p1) * (1.0 - p1)
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` for fewer
/// than two points or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn write_group_stats_csv<W: Write>(stats: &[GroupStats], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["group", "value", "delta", "median_g_min", "count"])?;
    for s in stats {
        wtr.write_record([
            s.key.as_str().to_string(),
            s.group.to_string(),
            s.delta.to_string(),
            s.median_g_min.to_string(),
            s.count.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_curves_csv<W: Write>(curves: &[ProbabilityCurve], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["criterion", "delta", "probability", "successes", "count"])?;
    for c in curves {
        for p in &c.points {
            wtr.write_record([
                c.criterion.to_string(),
                p.delta.to_string(),
                opt_to_string(&p.probability),
                p.successes.to_string(),
                p.count.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Independent restart trajectories on one instance.
#[derive(Debug, Clone)]
pub struct RestartTrials {
    pub settings: RestartSettings,
    pub trials: usize,
    pub master_seed: u64,
    /// Starting guess for every trial; drawn per trial when `None`.
    pub initial_guess: Option<Assignment>,
}

/// Runs the trials in parallel. Trial `k` measures with substream
/// `(measurement, k)` and, without a fixed guess, draws its first guess from
/// `(guess-selection, k)`.
pub fn run_restart_trials(inst: &CnfInstance, cfg: &RestartTrials, jobs: Option<usize>) -> Result<Vec<RestartRecord>> {
    if cfg.settings.max_rounds == 0 {
        return Err(Error::input("restart protocol needs at least one round"));
    }
    if let Some(g) = cfg.initial_guess {
        if g.len() != inst.n() {
            return Err(Error::input("guess length differs from instance variable count"));
        }
    }
    let hf = Arc::new(final_hamiltonian(inst)?);
    let streams = SeedStreams::new(cfg.master_seed);
    let n = inst.n();
    with_pool(jobs, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|k| {
                let guess = match cfg.initial_guess {
                    Some(g) => g,
                    None => Assignment::new(streams.stream(GUESS_SELECTION, k as u64).gen_range(0..1u64 << n), n)?,
                };
                let mut rng = streams.stream(MEASUREMENT, k as u64);
                run_restart_with_penalty(inst, hf.clone(), guess, &cfg.settings, &mut rng)
                    .map_err(|e| match e {
                        Error::Accuracy(msg) => Error::Accuracy(format!("trial {k}: {msg}")),
                        other => other,
                    })
            })
            .collect()
    })?
}

/// Fraction of records that succeeded within `k` rounds, for `k = 1..=max_rounds`.
pub fn cumulative_success(records: &[RestartRecord], max_rounds: usize) -> Vec<f64> {
    let total = records.len().max(1) as f64;
    (1..=max_rounds)
        .map(|k| records.iter().filter(|r| r.success_round().is_some_and(|s| s <= k)).count() as f64 / total)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub tau: f64,
    pub success_probability: f64,
    pub max_norm_drift: f64,
    pub accepted_steps: usize,
}

/// Success probability after propagating `psi0` for each `τ`, in parallel.
pub fn tau_sweep(
    schedule: &ScheduleSpec,
    template: &PropagationConfig,
    psi0: &WaveState,
    solution: Assignment,
    taus: &[f64],
    jobs: Option<usize>,
) -> Result<Vec<TauPoint>> {
    with_pool(jobs, || {
        taus.par_iter()
            .map(|&tau| {
                let cfg = PropagationConfig { tau, ..*template };
                let out = propagate_detailed(schedule, &cfg, psi0, Some(solution))?;
                Ok(TauPoint {
                    tau,
                    success_probability: out.state.probability(solution.bits()),
                    max_norm_drift: out.max_norm_drift,
                    accepted_steps: out.accepted_steps,
                })
            })
            .collect()
    })?
}
