//! DIMACS CNF reading and writing.
//!
//! A verified unique solution is persisted as the comment line
//! `c usa-solution <x_n…x_1>`; on read it is checked again by enumeration.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sat::{Assignment, Clause, CnfInstance, Literal, DEFAULT_ENUMERATION_CAP};

const SOLUTION_TAG: &str = "usa-solution";

pub fn to_string(inst: &CnfInstance) -> String {
    let mut out = String::new();
    if let Some(sol) = inst.unique_solution() {
        let _ = writeln!(out, "c {SOLUTION_TAG} {sol}");
    }
    let _ = writeln!(out, "p cnf {} {}", inst.n(), inst.m());
    for clause in inst.clauses() {
        for lit in clause.literals() {
            let _ = write!(out, "{} ", lit.to_signed());
        }
        out.push_str("0\n");
    }
    out
}

pub fn write<W: Write>(inst: &CnfInstance, mut w: W) -> Result<()> {
    w.write_all(to_string(inst).as_bytes())?;
    Ok(())
}

pub fn parse_str(text: &str) -> Result<CnfInstance> {
    read(text.as_bytes())
}

pub fn read<R: BufRead>(r: R) -> Result<CnfInstance> {
    let mut header: Option<(usize, usize)> = None;
    let mut solution: Option<(Assignment, usize)> = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<(i64, usize)> = Vec::new();

    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('c') {
            let mut words = comment.split_whitespace();
            if words.next() == Some(SOLUTION_TAG) {
                let bits = words.next().ok_or_else(|| parse_err(line_no, "usa-solution comment has no bitstring"))?;
                let a: Assignment = bits.parse().map_err(|e: Error| parse_err(line_no, e.to_string()))?;
                solution = Some((a, line_no));
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('p') {
            if header.is_some() {
                return Err(parse_err(line_no, "duplicate problem line"));
            }
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.len() != 3 || words[0] != "cnf" {
                return Err(parse_err(line_no, "expected 'p cnf <variables> <clauses>'"));
            }
            let n = words[1].parse().map_err(|_| parse_err(line_no, "variable count is not an integer"))?;
            let m = words[2].parse().map_err(|_| parse_err(line_no, "clause count is not an integer"))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| parse_err(line_no, "clause before problem line"))?;
        for word in trimmed.split_whitespace() {
            let v: i64 = word.parse().map_err(|_| parse_err(line_no, format!("'{word}' is not an integer literal")))?;
            if v == 0 {
                clauses.push(finish_clause(&pending, n)?);
                pending.clear();
            } else {
                pending.push((v, line_no));
            }
        }
    }

    let (n, m) = header.ok_or_else(|| parse_err(1, "missing problem line"))?;
    if let Some(&(_, line_no)) = pending.first() {
        return Err(parse_err(line_no, "last clause is not terminated by 0"));
    }
    if clauses.len() != m {
        return Err(parse_err(0, format!("header declares {m} clauses, found {}", clauses.len())));
    }
    let inst = CnfInstance::new(n, clauses)?;
    match solution {
        Some((a, line_no)) => {
            if a.len() != n {
                return Err(parse_err(line_no, format!("solution has {} bits, instance has {n} variables", a.len())));
            }
            inst.with_verified_solution(a, DEFAULT_ENUMERATION_CAP)
        }
        None => Ok(inst),
    }
}

fn finish_clause(pending: &[(i64, usize)], n: usize) -> Result<Clause> {
    let line_no = pending.first().map(|p| p.1).unwrap_or(0);
    if pending.len() != 3 {
        return Err(parse_err(line_no, format!("clause has {} literals, expected 3", pending.len())));
    }
    let mut lits = [Literal::positive(1); 3];
    for (slot, &(v, line)) in lits.iter_mut().zip(pending) {
        if v.unsigned_abs() as usize > n {
            return Err(parse_err(line, format!("literal {v} exceeds declared variable count {n}")));
        }
        *slot = Literal::from_signed(v).map_err(|e| parse_err(line, e.to_string()))?;
    }
    Clause::new(lits).map_err(|e| parse_err(line_no, e.to_string()))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::{fixtures::worked_example, generate_usa_instance};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn writes_solution_comment_and_header() {
        let inst = generate_usa_instance(6, 26, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let text = to_string(&inst);
        let first: Vec<&str> = text.lines().take(2).collect();
        assert_eq!(first[0], format!("c usa-solution {}", inst.unique_solution().unwrap()));
        assert_eq!(first[1], "p cnf 6 26");
        assert_eq!(text.lines().count(), 28);
    }

    #[test]
    fn reads_multi_line_clauses_and_duplicates() {
        let text = "c example\np cnf 4 2\n1 -2\n 3 0 -1 2 4 0\n";
        let inst = parse_str(text).unwrap();
        assert_eq!(inst.m(), 2);
        assert_eq!(inst.clauses()[0].literals()[1], Literal::negative(2));

        let p = worked_example();
        assert_eq!(parse_str(&to_string(&p)).unwrap().clauses(), p.clauses());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("p cnf 3 1\n1 2 x 0\n", 2),
            ("1 2 3 0\n", 1),
            ("p cnf 3 1\n1 2 0\n", 2),
            ("p cnf 3 1\n1 2 4 0\n", 2),
            ("p cnf 3 1\n1 1 2 0\n", 2),
            ("c usa-solution 10\np cnf 3 1\n1 2 3 0\n", 1),
            ("p cnf 3\n", 1),
        ];
        for (text, line) in cases {
            match parse_str(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_false_solution_claim() {
        let text = "c usa-solution 000\np cnf 3 1\n1 2 3 0\n";
        assert!(matches!(parse_str(text), Err(Error::State(_))));
    }

    proptest! {
        #[test]
        fn roundtrip_preserves_instance(seed in 0u64..64) {
            let inst = generate_usa_instance(5, 21, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let back = parse_str(&to_string(&inst)).unwrap();
            prop_assert_eq!(back, inst);
        }
    }
}
