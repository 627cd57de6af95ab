//! 3-SAT instances: representation, evaluation, exhaustive counting and
//! random generation of instances with a unique satisfying assignment (USA).
//!
//! Assignments are packed into a `u64`; variable `x_j` lives in bit `j - 1`,
//! so `x_1` is the least significant bit. The same convention indexes the
//! computational basis in [`crate::hamiltonian`].

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on `n` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;
/// Default number of candidate instances tried before generation gives up.
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 1_000_000;
/// Default ceiling on `n` for solution-cover generation.
pub const DEFAULT_COVER_CAP: usize = 8;
/// Clause-to-variable ratio of the hard region.
pub const HARD_RATIO: f64 = 4.26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub variable: u32,
    pub negated: bool,
}

impl Literal {
    pub fn positive(variable: u32) -> Self {
        Literal { variable, negated: false }
    }

    pub fn negative(variable: u32) -> Self {
        Literal { variable, negated: true }
    }

    /// DIMACS-style signed integer.
    pub fn to_signed(self) -> i64 {
        if self.negated {
            -(self.variable as i64)
        } else {
            self.variable as i64
        }
    }

    pub fn from_signed(v: i64) -> Result<Self> {
        if v == 0 || v.unsigned_abs() > u32::MAX as u64 {
            return Err(Error::input(format!("literal {v} is not a valid variable reference")));
        }
        Ok(Literal { variable: v.unsigned_abs() as u32, negated: v < 0 })
    }

    fn bit(self) -> u64 {
        1u64 << (self.variable - 1)
    }

    pub fn is_satisfied_by(self, value: bool) -> bool {
        value != self.negated
    }
}

/// Disjunction of three literals over distinct variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: [Literal; 3],
}

impl Clause {
    pub fn new(literals: [Literal; 3]) -> Result<Self> {
        for lit in &literals {
            if lit.variable == 0 {
                return Err(Error::input("variable indices start at 1"));
            }
            if lit.variable > 64 {
                return Err(Error::input(format!("variable x{} exceeds the 64-bit assignment width", lit.variable)));
            }
        }
        let [a, b, c] = literals;
        if a.variable == b.variable || a.variable == c.variable || b.variable == c.variable {
            return Err(Error::input(format!(
                "clause repeats a variable: ({}, {}, {})",
                a.to_signed(),
                b.to_signed(),
                c.to_signed()
            )));
        }
        Ok(Clause { literals })
    }

    pub fn from_signed(a: i64, b: i64, c: i64) -> Result<Self> {
        Clause::new([Literal::from_signed(a)?, Literal::from_signed(b)?, Literal::from_signed(c)?])
    }

    pub fn literals(&self) -> &[Literal; 3] {
        &self.literals
    }

    pub fn max_variable(&self) -> u32 {
        self.literals.iter().map(|l| l.variable).max().unwrap_or(0)
    }

    /// Mask of the clause's variables and the unique bit pattern on that mask
    /// that falsifies it. The clause is violated by `z` iff `z & mask == pattern`.
    pub fn falsifier(&self) -> (u64, u64) {
        let mut mask = 0;
        let mut pattern = 0;
        for lit in &self.literals {
            mask |= lit.bit();
            if lit.negated {
                pattern |= lit.bit();
            }
        }
        (mask, pattern)
    }

    /// Order-insensitive identity of the clause, used for duplicate detection.
    pub fn key(&self) -> (u64, u64) {
        self.falsifier()
    }

    #[inline]
    pub(crate) fn violated_by_bits(&self, z: u64) -> bool {
        let (mask, pattern) = self.falsifier();
        z & mask == pattern
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .literals
            .iter()
            .map(|l| if l.negated { format!("¬x{}", l.variable) } else { format!("x{}", l.variable) })
            .collect();
        write!(f, "({})", parts.join(" ∨ "))
    }
}

/// Truth assignment of `n` variables packed into an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    bits: u64,
    n: usize,
}

impl Assignment {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n > 64 {
            return Err(Error::input(format!("assignment width {n} exceeds 64")));
        }
        if n < 64 && bits >> n != 0 {
            return Err(Error::input(format!("bits {bits:#b} do not fit in {n} variables")));
        }
        Ok(Assignment { bits, n })
    }

    /// Builds an assignment from `(x_1, …, x_n)`.
    pub fn from_values(values: &[bool]) -> Result<Self> {
        let bits = values.iter().enumerate().fold(0u64, |acc, (j, &v)| acc | ((v as u64) << j));
        Assignment::new(bits, values.len())
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Value of variable `x_j` (1-based).
    pub fn value(&self, variable: u32) -> Option<bool> {
        if variable == 0 || variable as usize > self.n {
            return None;
        }
        Some(self.bits >> (variable - 1) & 1 == 1)
    }

    pub fn complement(&self) -> Self {
        let mask = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        Assignment { bits: !self.bits & mask, n: self.n }
    }

    pub fn hamming(&self, other: &Assignment) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }
}

/// Renders `x_n … x_1`, most significant variable first.
impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n == 0 {
            return Ok(());
        }
        write!(f, "{:0width$b}", self.bits, width = self.n)
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.len() > 64 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::input(format!("'{s}' is not a bitstring of 1..=64 binary digits")));
        }
        let bits = u64::from_str_radix(s, 2).map_err(|e| Error::input(e.to_string()))?;
        Assignment::new(bits, s.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnfInstance {
    n: usize,
    clauses: Vec<Clause>,
    unique_solution: Option<Assignment>,
}

impl CnfInstance {
    /// Duplicate clauses are accepted here (hand-written formulas may repeat
    /// clauses); generated instances never contain them.
    pub fn new(n: usize, clauses: Vec<Clause>) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::input(format!("variable count {n} outside 1..=64")));
        }
        if let Some(c) = clauses.iter().find(|c| c.max_variable() as usize > n) {
            return Err(Error::input(format!("clause {c} references a variable beyond n = {n}")));
        }
        Ok(CnfInstance { n, clauses, unique_solution: None })
    }

    /// Attaches a claimed unique solution after verifying it by enumeration.
    pub fn with_verified_solution(mut self, solution: Assignment, cap: usize) -> Result<Self> {
        if solution.len() != self.n {
            return Err(Error::input("solution length differs from n"));
        }
        if unsatisfied_count(&self, &solution)? != 0 {
            return Err(Error::State(format!("{solution} does not satisfy the instance")));
        }
        let count = count_satisfying_with_cap(&self, cap)?;
        if count != 1 {
            return Err(Error::State(format!("instance has {count} satisfying assignments, not 1")));
        }
        self.unique_solution = Some(solution);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn alpha(&self) -> f64 {
        self.clauses.len() as f64 / self.n as f64
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn unique_solution(&self) -> Option<Assignment> {
        self.unique_solution
    }

    pub fn has_duplicate_clauses(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.clauses.len());
        !self.clauses.iter().all(|c| seen.insert(c.key()))
    }

    /// Number of violated clauses for the packed basis state `z`.
    #[inline]
    pub fn violations(&self, z: u64) -> u32 {
        self.clauses.iter().filter(|c| c.violated_by_bits(z)).count() as u32
    }

    fn satisfied_by_bits(&self, z: u64) -> bool {
        !self.clauses.iter().any(|c| c.violated_by_bits(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessMetrics {
    /// Hamming distance from the guess to the unique solution.
    pub bf: u32,
    /// Clauses left unsatisfied by the guess.
    pub uc: u32,
}

pub fn evaluate_clause(clause: &Clause, a: &Assignment) -> Result<bool> {
    let mut satisfied = false;
    for lit in clause.literals() {
        let value = a.value(lit.variable).ok_or_else(|| {
            Error::input(format!("variable x{} out of range for assignment of length {}", lit.variable, a.len()))
        })?;
        satisfied |= lit.is_satisfied_by(value);
    }
    Ok(satisfied)
}

pub fn unsatisfied_count(inst: &CnfInstance, a: &Assignment) -> Result<u32> {
    if a.len() != inst.n {
        return Err(Error::input(format!("assignment has {} variables, instance has {}", a.len(), inst.n)));
    }
    Ok(inst.violations(a.bits()))
}

pub fn count_satisfying(inst: &CnfInstance) -> Result<u64> {
    count_satisfying_with_cap(inst, DEFAULT_ENUMERATION_CAP)
}

pub fn count_satisfying_with_cap(inst: &CnfInstance, cap: usize) -> Result<u64> {
    if inst.n > cap {
        return Err(Error::Capacity { what: "variable count for enumeration", value: inst.n, limit: cap });
    }
    Ok((0..1u64 << inst.n).filter(|&z| inst.satisfied_by_bits(z)).count() as u64)
}

/// Returns the single satisfying assignment if there is exactly one.
fn unique_satisfier(n: usize, clauses: &[Clause]) -> Option<u64> {
    let mut found = None;
    for z in 0..1u64 << n {
        if clauses.iter().all(|c| !c.violated_by_bits(z)) {
            if found.is_some() {
                return None;
            }
            found = Some(z);
        }
    }
    found
}

pub fn guess_metrics(inst: &CnfInstance, guess: &Assignment) -> Result<GuessMetrics> {
    let solution = inst
        .unique_solution
        .ok_or_else(|| Error::State("instance carries no unique solution".into()))?;
    let uc = unsatisfied_count(inst, guess)?;
    Ok(GuessMetrics { bf: solution.hamming(guess), uc })
}

/// `round(α·n)` for the hard ratio.
pub fn default_clause_count(n: usize) -> usize {
    (HARD_RATIO * n as f64).round() as usize
}

#[derive(Debug, Clone, Copy)]
pub struct GenerationLimits {
    pub attempt_budget: u64,
    pub enumeration_cap: usize,
    pub cover_cap: usize,
}

impl Default for GenerationLimits {
    fn default() -> Self {
        GenerationLimits {
            attempt_budget: DEFAULT_ATTEMPT_BUDGET,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            cover_cap: DEFAULT_COVER_CAP,
        }
    }
}

fn check_generation_params(n: usize, m: usize, limits: &GenerationLimits) -> Result<()> {
    if n < 3 {
        return Err(Error::input(format!("n = {n}: three distinct variables per clause need n ≥ 3")));
    }
    if m < 1 {
        return Err(Error::input("m must be at least 1"));
    }
    if n > limits.enumeration_cap {
        return Err(Error::Capacity { what: "variable count for enumeration", value: n, limit: limits.enumeration_cap });
    }
    let distinct = 8 * n * (n - 1) * (n - 2) / 6;
    if m > distinct {
        return Err(Error::input(format!("m = {m} exceeds the {distinct} distinct 3-clauses over {n} variables")));
    }
    Ok(())
}

/// Draws `m` distinct random 3-clauses: variables uniformly without
/// replacement, polarities by fair coin.
fn sample_clauses<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<Clause> {
    let mut seen = HashSet::with_capacity(m);
    let mut clauses = Vec::with_capacity(m);
    while clauses.len() < m {
        let mut vars: Vec<usize> = index::sample(rng, n, 3).into_vec();
        vars.sort_unstable();
        let lits = [0, 1, 2].map(|k| Literal { variable: vars[k] as u32 + 1, negated: rng.gen::<bool>() });
        let clause = Clause { literals: lits };
        if seen.insert(clause.key()) {
            clauses.push(clause);
        }
    }
    clauses
}

/// One candidate draw; `Some` iff it has a unique satisfying assignment.
fn draw_usa_candidate<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Option<CnfInstance> {
    let clauses = sample_clauses(n, m, rng);
    let z = unique_satisfier(n, &clauses)?;
    Some(CnfInstance {
        n,
        clauses,
        unique_solution: Some(Assignment { bits: z, n }),
    })
}

pub fn generate_usa_instance<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<CnfInstance> {
    generate_usa_instance_with(n, m, rng, &GenerationLimits::default())
}

pub fn generate_usa_instance_with<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
    limits: &GenerationLimits,
) -> Result<CnfInstance> {
    check_generation_params(n, m, limits)?;
    for _ in 0..limits.attempt_budget {
        if let Some(inst) = draw_usa_candidate(n, m, rng) {
            return Ok(inst);
        }
    }
    Err(Error::GenerationFailure { attempts: limits.attempt_budget })
}

/// USA instances with pairwise distinct solutions, in discovery order.
pub fn generate_distinct_solution_set<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    count: usize,
    rng: &mut R,
    limits: &GenerationLimits,
) -> Result<Vec<CnfInstance>> {
    check_generation_params(n, m, limits)?;
    if n > limits.cover_cap {
        return Err(Error::Capacity { what: "variable count for solution covers", value: n, limit: limits.cover_cap });
    }
    let total = 1usize << n;
    if count > total {
        return Err(Error::input(format!("{count} distinct solutions requested but only {total} exist")));
    }
    let mut taken = vec![false; total];
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == limits.attempt_budget {
            let missing = (0..total as u64).filter(|&z| !taken[z as usize]).collect();
            return Err(Error::PartialCover { missing, total });
        }
        attempts += 1;
        if let Some(inst) = draw_usa_candidate(n, m, rng) {
            let z = inst.unique_solution.map(|s| s.bits).unwrap_or_default() as usize;
            if !taken[z] {
                taken[z] = true;
                out.push(inst);
            }
        }
    }
    Ok(out)
}

/// `2^n` USA instances whose solutions jointly cover every assignment,
/// ordered so that instance `i` has solution `i`.
pub fn generate_solution_cover_set<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<CnfInstance>> {
    generate_solution_cover_set_with(n, m, rng, &GenerationLimits::default())
}

pub fn generate_solution_cover_set_with<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
    limits: &GenerationLimits,
) -> Result<Vec<CnfInstance>> {
    if n < 3 {
        return Err(Error::input(format!("n = {n}: solution covers need n ≥ 3")));
    }
    let mut set = generate_distinct_solution_set(n, m, 1 << n, rng, limits)?;
    set.sort_by_key(|inst| inst.unique_solution.map(|s| s.bits));
    Ok(set)
}
