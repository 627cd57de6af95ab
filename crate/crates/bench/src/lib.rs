//! Shared setup for the criterion benchmarks.

use std::sync::Arc;

use saqc_core::hamiltonian::{final_hamiltonian, HatFunction, ScheduleSpec};
use saqc_core::sat::{default_clause_count, generate_usa_instance, Assignment};
use saqc_core::seed::SeedStreams;

/// A seeded SAQC schedule on `n` variables at the hard clause ratio, with the
/// all-zeros guess.
pub fn saqc_schedule(n: usize, delta: f64) -> ScheduleSpec {
    let mut rng = SeedStreams::new(2024).stream("bench", 0);
    let inst = generate_usa_instance(n, default_clause_count(n), &mut rng).expect("generation");
    let hf = Arc::new(final_hamiltonian(&inst).expect("penalty"));
    let guess = Assignment::new(0, n).expect("guess");
    ScheduleSpec::saqc(hf, guess, delta, HatFunction::default()).expect("schedule")
}
