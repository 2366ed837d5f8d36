//! Plain-text reports.

use std::fmt::Write;

use opspace::corpus::CorpusReport;
use opspace::criteria::{Aux, CheckReport, CriterionId};
use opspace::formulas::FormulaReport;

/// The relation a criterion tests, in display form.
fn relation(c: CriterionId) -> &'static str {
    match c {
        CriterionId::UnitaryFourRotation => "max_k ‖u_n + i^k x‖ ≥ √(1 + ‖x‖)",
        CriterionId::UnitaryTGadget => "‖[[u_n, x], [0, u_n]]‖ ≥ √(1 + ‖x‖)",
        CriterionId::Coisometry => "‖[u_n  x]‖ = √2 for ‖x‖ = 1",
        CriterionId::Isometry => "‖[u_n ; x]‖ = √2 for ‖x‖ = 1",
        CriterionId::OperatorSystem => "‖[[u_n, x], [−x*, u_n]]‖ = √(1 + ‖x‖²)",
        CriterionId::Positive => "‖1 − z x‖ ≤ 1 for |1 − z| ≤ 1",
        CriterionId::Adjoint => "‖[[t, x], [−z, t]]‖ ≤ √(1 + t²) for real t",
        CriterionId::MultClosed
        | CriterionId::MultiplierLeft
        | CriterionId::MultiplierRight
        | CriterionId::MultiplierQuasi => "‖[0 y 1 0 ; 2 x z b]‖ = ‖[2 x z b]‖ with z = −x y*",
        CriterionId::LeftMultiplierMap => "‖[T(a) ; b]‖ ≤ ‖[a ; b]‖",
        CriterionId::AlgebraProduct => "u coisometry, m(x, ·) left multiplier, m(x, u) = x",
        CriterionId::CstarAmongSystems => "‖[M± ⊗ I_m, w]‖ = √2 for ‖w‖ = 1",
    }
}

fn complex(z: [f64; 2]) -> String {
    if z[1] == 0.0 {
        format!("{:.6}", z[0])
    } else {
        format!("{:.6}{:+.6}i", z[0], z[1])
    }
}

fn aux_line(key: &str, v: &Aux, out: &mut String) {
    match v {
        Aux::Real(x) => writeln!(out, "    {key} = {x:.9}"),
        Aux::Int(i) => writeln!(out, "    {key} = {i}"),
        Aux::Complex(z) => writeln!(out, "    {key} = {}", complex(*z)),
        Aux::Text(s) => writeln!(out, "    {key} = {s}"),
        Aux::Vector(v) => {
            let parts: Vec<String> = v.iter().map(|z| complex(*z)).collect();
            writeln!(out, "    {key} = ({})", parts.join(", "))
        }
        Aux::Matrix { rows, cols, entries } => {
            let _ = writeln!(out, "    {key} = {rows}x{cols}");
            for r in 0..*rows {
                let row: Vec<String> = (0..*cols).map(|c| complex(entries[r * cols + c])).collect();
                let _ = writeln!(out, "      [{}]", row.join(", "));
            }
            Ok(())
        }
    }
    .expect("writing to a String");
}

pub fn check(r: &CheckReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "criterion  {}", r.criterion);
    let _ = writeln!(s, "tests      {}", relation(r.criterion));
    let _ = writeln!(s, "verdict    {}", r.verdict);
    let _ = writeln!(s, "margin     {:.6e}", r.margin);
    let _ = writeln!(s, "samples    {}", r.samples);
    let _ = writeln!(s, "levels     {:?}", r.levels_checked);
    let _ = writeln!(s, "tolerance  {:e}  seed {}", r.config.tolerance, r.config.seed);
    if let Some(q) = &r.qualifier {
        let _ = writeln!(s, "qualifier  {q}");
    }
    for sc in &r.sub_checks {
        let _ = writeln!(s, "  sub-check {:<16} {:<20} margin {:.6e}", sc.name, sc.verdict.as_str(), sc.margin);
    }
    if let Some(w) = &r.witness {
        let _ = writeln!(s, "witness    level {}", w.level);
        for (i, row) in w.coeffs.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let parts: Vec<String> = cell.iter().map(|z| complex(*z)).collect();
                let _ = writeln!(s, "    x[{i}][{j}] = ({})", parts.join(", "));
            }
        }
        for (k, v) in &w.aux {
            aux_line(k, v, &mut s);
        }
        let _ = writeln!(s, "evaluated  relation fails by {:.6e} at the witness", -r.margin);
    }
    for n in &r.notes {
        let _ = writeln!(s, "note       {n}");
    }
    s.trim_end().to_string()
}

pub fn formulas(r: &FormulaReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<32} {:>7} {:>14} {:>10}  result", "suite", "trials", "max deviation", "tolerance");
    for su in &r.suites {
        let _ = writeln!(
            s,
            "{:<32} {:>7} {:>14.3e} {:>10.0e}  {}",
            su.name,
            su.trials,
            su.max_deviation,
            su.tolerance,
            if su.passed { "pass" } else { "FAIL" }
        );
    }
    let _ = write!(s, "seed {}: {}", r.seed, if r.passed { "all suites pass" } else { "FAILED" });
    s
}

pub fn corpus(r: &CorpusReport) -> String {
    let mut s = String::new();
    let _ =
        writeln!(s, "{:<32} {:<24} {:<20} {:<20} {:>13}  ok", "entry", "criterion", "expected", "verdict", "margin");
    for e in &r.entries {
        if let Some(err) = &e.error {
            let _ = writeln!(s, "{:<32} error: {err}", e.name);
        }
        for o in &e.outcomes {
            let _ = writeln!(
                s,
                "{:<32} {:<24} {:<20} {:<20} {:>13.6e}  {}",
                e.name,
                o.criterion.as_str(),
                o.expected.as_str(),
                o.verdict.as_str(),
                o.margin,
                if o.matches { "yes" } else { "NO" }
            );
        }
        for p in &e.pinned {
            let _ = writeln!(
                s,
                "{:<32} {:<24} pinned {}: violation {:.6e}",
                e.name,
                p.criterion.as_str(),
                p.label,
                p.violation
            );
        }
    }
    let n: usize = r.entries.len();
    let _ = write!(s, "{n} entries, seed {}: {}", r.seed, if r.all_match { "all verdicts match" } else { "MISMATCH" });
    s
}
