//! Plain-text rendering of a [`Report`].

use std::fmt::Write;

use crate::report::{EvaluationJson, GainJson, KernelJson, PartitionJson, Report};

/// `x` to six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else {
        format!("{x:.5e}")
    }
}

fn vector(v: &[f64]) -> String {
    format!("({})", v.iter().map(|&x| sig6(x)).collect::<Vec<_>>().join(", "))
}

fn tuple(v: &[String]) -> String {
    format!("({})", v.join(","))
}

fn set(v: &[String]) -> String {
    format!("{{{}}}", v.join(","))
}

fn gain(g: &GainJson) -> String {
    match g {
        GainJson::Scalar(j) => sig6(*j),
        GainJson::PerState(v) => vector(v),
    }
}

fn evaluation(label: &str, e: &EvaluationJson, out: &mut String) {
    writeln!(out, "  {label}: J = {}, bias = {}", gain(&e.gain), vector(&e.bias)).unwrap();
}

fn partition(p: &PartitionJson) -> String {
    let mut s = format!("max {}", set(&p.max_set));
    if !p.min_set.is_empty() {
        write!(s, ", min {}", set(&p.min_set)).unwrap();
    }
    for m in &p.middle_sets {
        write!(s, ", middle {}", set(m)).unwrap();
    }
    s
}

fn kernel(k: &KernelJson, indent: &str, out: &mut String) {
    for (control, rows) in k {
        let rows: Vec<String> = rows.iter().map(|r| r.iter().map(|&p| sig6(p)).collect::<Vec<_>>().join(" ")).collect();
        writeln!(out, "{indent}{control}: [{}]", rows.join("; ")).unwrap();
    }
}

fn q_table(label: &str, r: &Report, q: &[Vec<Option<f64>>], out: &mut String) {
    writeln!(out, "  {label}:").unwrap();
    for (x, row) in q.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .filter_map(|(u, v)| v.map(|v| format!("{} {}", r.model.controls[u], sig6(v))))
            .collect();
        writeln!(out, "    {}: {}", r.model.states[x], cells.join("  ")).unwrap();
    }
}

pub fn render(r: &Report) -> String {
    let mut out = String::new();
    let o = &mut out;
    writeln!(
        o,
        "model: {} ({} states, {} controls, R = {})",
        r.model.path,
        r.model.states.len(),
        r.model.controls.len(),
        sig6(r.model.radius)
    )
    .unwrap();

    for round in &r.iterations {
        writeln!(
            o,
            "\nround {}: policy {}{}",
            round.round,
            tuple(&round.policy),
            if round.refined { " (refined)" } else { "" }
        )
        .unwrap();
        evaluation("nominal", &round.nominal, o);
        writeln!(o, "  partition: {}", partition(&round.partition)).unwrap();
        writeln!(o, "  worst-case kernel:").unwrap();
        kernel(&round.worst_case, "    ", o);
        evaluation("robust", &round.robust, o);
        if let Some(g) = &round.gain_q_values {
            q_table("Q*·J", r, g, o);
        }
        q_table("f + Q*·bias", r, &round.q_values, o);
        writeln!(o, "  {} step gives {}", round.step, tuple(&round.improved)).unwrap();
    }
    if !r.iterations.is_empty() {
        writeln!(o).unwrap();
    }

    let f = &r.final_;
    if let Some(valid) = f.valid {
        writeln!(o, "{}", if valid { "model is valid" } else { "model is invalid" }).unwrap();
    }
    for issue in &r.diagnostics.issues {
        writeln!(o, "  {issue}").unwrap();
    }
    if let Some(values) = &f.value_functions {
        let n = values.len() - 1;
        for (j, v) in values.iter().enumerate() {
            let greedy = f
                .greedy_policies
                .as_ref()
                .and_then(|g| g.get(j))
                .map(|g| format!(", greedy {}", tuple(g)))
                .unwrap_or_default();
            let tag = if j == n { " (terminal)" } else { "" };
            writeln!(o, "V_{j}{tag} = {}{greedy}", vector(v)).unwrap();
        }
    }
    if let Some(k) = &f.kernel {
        writeln!(o, "worst-case kernel:").unwrap();
        kernel(k, "  ", o);
    }
    if let Some(rows) = &f.sweep {
        for row in rows {
            let mut line = format!("R = {}:", sig6(row.radius));
            if let Some(s) = &row.stop_reason {
                write!(line, " {s}").unwrap();
            }
            if let Some(g) = &row.gain {
                write!(line, ", J = {}", gain(g)).unwrap();
            }
            if let Some(p) = &row.policy {
                write!(line, ", policy {}", tuple(p)).unwrap();
            }
            if let Some(i) = row.irreducible {
                write!(line, ", {}", if i { "irreducible" } else { "reducible" }).unwrap();
            }
            if let Some(e) = &row.error {
                write!(line, " error: {e}").unwrap();
            }
            writeln!(o, "{line}").unwrap();
        }
    }
    if let Some(a) = f.average_cost {
        writeln!(o, "average cost = {}", sig6(a)).unwrap();
    }
    if let Some(rm) = &r.diagnostics.r_max {
        writeln!(o, "r_max = {}", sig6(rm.r_max)).unwrap();
        if let Some(w) = &rm.witness_policy {
            writeln!(o, "witness policy {}", tuple(w)).unwrap();
        }
        if let Some(p) = &rm.witness_partition {
            writeln!(o, "witness partition: {}", partition(p)).unwrap();
        }
        writeln!(o, "reducible at r_max: {}", rm.reducible_at_r_max).unwrap();
        writeln!(o, "breakpoints: {}", vector(&rm.breakpoints)).unwrap();
        writeln!(o, "allocation rule: {}", rm.allocation_rule).unwrap();
    }
    if let Some(classes) = &r.diagnostics.classes {
        for c in classes {
            let mut line = format!("class {} {}", set(&c.states), if c.recurrent { "recurrent" } else { "transient" });
            if let Some(g) = c.gain {
                write!(line, ", gain {}", sig6(g)).unwrap();
            }
            writeln!(o, "{line}").unwrap();
        }
    }
    if let Some(msg) = &r.diagnostics.failure {
        writeln!(o, "{msg}").unwrap();
    }
    if let Some(msg) = &r.diagnostics.advice {
        writeln!(o, "{msg}").unwrap();
    }
    if let Some(s) = &f.stop_reason {
        let rounds = r.iterations.len();
        let mut line = format!("stop: {s} after {rounds} round{}", if rounds == 1 { "" } else { "s" });
        if let Some(res) = &f.residuals {
            write!(line, "; residual {}", sig6(res.bias)).unwrap();
            if let Some(g) = res.gain {
                write!(line, ", gain residual {}", sig6(g)).unwrap();
            }
        }
        writeln!(o, "{line}").unwrap();
    }
    if f.stop_reason.as_deref() == Some("converged")
        && let (Some(p), Some(g)) = (&f.policy, &f.gain)
    {
        writeln!(o, "g* = {}, J* = {}", tuple(p), gain(g)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(17.0 / 24.0), "0.708333");
        assert_eq!(sig6(1.175), "1.175");
        assert_eq!(sig6(2.0), "2");
        assert_eq!(sig6(-1.0 / 3.0), "-0.333333");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(1e-7), "1.00000e-7");
        assert_eq!(sig6(-1e-17), "-1.00000e-17");
    }
}
