//! Evaluation of scenarios into result records, oracle verification, and
//! the table/CSV renderers.

use std::collections::BTreeMap;
use std::io::Write;

use qinstrument::oracle::{enumerate_joint, JointTable};
use qinstrument::sequence::{
    biased_correlation, bidirectional_conditional, condition_on_first, condition_on_intermediate,
    condition_on_last, convergence_order, correlation_ratio, joint_distribution, normalization,
    weak_sweep, ConditionalDistribution, Ratio, WeakSweepRow,
};
use qinstrument::{ConditioningMode, Error, Operator, Stage, Tolerances};
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::{ConditionOn, Conditioning, OutputKind, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub quantity: String,
    pub re: f64,
    pub im: f64,
    pub numerator: Option<f64>,
    pub denominator: Option<f64>,
    pub warnings: Vec<String>,
}

impl ResultRecord {
    fn real(quantity: impl Into<String>, value: f64) -> Self {
        ResultRecord {
            quantity: quantity.into(),
            re: value,
            im: 0.0,
            numerator: None,
            denominator: None,
            warnings: vec![],
        }
    }

    fn ratio(quantity: impl Into<String>, r: &Ratio) -> Self {
        ResultRecord {
            numerator: Some(r.numerator),
            denominator: Some(r.denominator),
            ..ResultRecord::real(quantity, r.value())
        }
    }

    fn warn(mut self, warnings: &[String]) -> Self {
        self.warnings.extend_from_slice(warnings);
        self
    }
}

fn regularization_notes(s: &Scenario) -> Vec<String> {
    s.stages
        .iter()
        .enumerate()
        .filter_map(|(i, st)| {
            st.photodetector.map(|p| {
                format!(
                    "stage {i}: photon-number cutoff D={} stands in for the infinite normalization",
                    p.cutoff()
                )
            })
        })
        .collect()
}

/// Refuses instruments whose outcomes create probability.
fn check_stage_normalization(s: &Scenario, tol: &Tolerances) -> Result<(), CliError> {
    for (i, st) in s.stages.iter().enumerate() {
        if let Stage::Instrument(inst) = &st.stage {
            inst.check_normalization(tol)
                .map_err(|e| CliError::Violation(format!("stages[{i}]: {e}")))?;
        }
    }
    Ok(())
}

fn tuple_name(prefix: &str, ids: &[String]) -> String {
    format!("{prefix}({})", ids.join("|"))
}

/// Evaluates every requested output, in declaration order.
pub fn run(s: &Scenario, tol: &Tolerances) -> Result<Vec<ResultRecord>, CliError> {
    check_stage_normalization(s, tol)?;
    let notes = regularization_notes(s);
    let mut out = Vec::new();
    for kind in &s.outputs {
        match kind {
            OutputKind::Normalization => {
                out.push(ResultRecord::real("normalization", normalization(&s.sequence)?).warn(&notes));
            }
            OutputKind::Joint => {
                for (ids, r) in joint_distribution(&s.sequence, tol)? {
                    out.push(ResultRecord::ratio(tuple_name("p", &ids), &r).warn(&notes));
                }
            }
            OutputKind::Correlation => {
                let r = correlation_ratio(&s.sequence, &s.labels, tol)?;
                out.push(ResultRecord::ratio("correlation", &r).warn(&notes));
            }
            OutputKind::Conditional => {
                let c = s.conditioning.as_ref().expect("validated at parse");
                out.extend(conditional_records(c, s.fallback, tol)?);
            }
            OutputKind::States => {
                let c = s.conditioning.as_ref().expect("validated at parse");
                out.extend(state_records(c, tol)?);
            }
            OutputKind::Biased => {
                let (pre, post) = match &s.boundary {
                    Some((pre, post)) => (pre.clone(), post.clone()),
                    None => (Operator::identity(s.dim), Operator::identity(s.dim)),
                };
                let r = biased_correlation(&s.sequence, &s.labels, &pre, &post, &s.insertions, tol)?;
                out.push(ResultRecord::ratio("biased_correlation", &r));
            }
            OutputKind::Weak => {
                let w = s.weak.as_ref().expect("validated at parse");
                let rows = weak_sweep(&w.pre, &w.observable, &w.post, &w.eps, tol)?;
                out.extend(weak_records(&rows));
            }
        }
    }
    Ok(out)
}

fn weak_records(rows: &[WeakSweepRow]) -> Vec<ResultRecord> {
    let mut out = Vec::new();
    if let Some(first) = rows.first() {
        out.push(ResultRecord::real("weak_value", first.weak_value));
    }
    for r in rows {
        out.push(ResultRecord::real(format!("prepost_average[eps={}]", r.eps), r.prepost_average));
        out.push(ResultRecord::real(format!("difference[eps={}]", r.eps), r.difference));
    }
    if let Some(order) = convergence_order(rows) {
        out.push(ResultRecord::real("convergence_order", order));
    }
    out
}

/// Runs `f` in the declared mode; with `fallback`, an incompleteness refusal
/// of a simplified formula is retried as a full ratio and noted.
fn with_fallback<T>(
    mode: ConditioningMode,
    fallback: bool,
    f: impl Fn(ConditioningMode) -> qinstrument::Result<T>,
) -> Result<(T, Vec<String>), CliError> {
    match f(mode) {
        Err(e @ Error::Incompleteness { .. }) if fallback && mode == ConditioningMode::Simplified => {
            let v = f(ConditioningMode::FullRatio)?;
            Ok((v, vec![format!("{e}; used the full Bayes ratio instead")]))
        }
        r => Ok((r?, vec![])),
    }
}

fn dist_records(name: impl Fn(&[String]) -> String, dist: &ConditionalDistribution, warnings: &[String]) -> Vec<ResultRecord> {
    dist.entries()
        .iter()
        .map(|(k, r)| ResultRecord::ratio(name(k), r).warn(warnings))
        .collect()
}

fn conditional_records(c: &Conditioning, fallback: bool, tol: &Tolerances) -> Result<Vec<ResultRecord>, CliError> {
    let t = &c.triple;
    Ok(match c.on {
        ConditionOn::First => {
            let a = c.a.as_deref().expect("validated");
            let ((_, dist), w) = with_fallback(c.mode, fallback, |m| condition_on_first(t, a, m, tol))?;
            dist_records(|k| format!("p(b={},c={}|a={a})", k[0], k[1]), &dist, &w)
        }
        ConditionOn::Last => {
            let cc = c.c.as_deref().expect("validated");
            let ((_, dist), w) = with_fallback(c.mode, fallback, |m| condition_on_last(t, cc, m, tol))?;
            dist_records(|k| format!("p(a={},b={}|c={cc})", k[0], k[1]), &dist, &w)
        }
        ConditionOn::Intermediate => {
            let b = c.b.as_deref().expect("validated");
            let ((_, dist), w) = with_fallback(c.mode, fallback, |m| condition_on_intermediate(t, b, m, tol))?;
            dist_records(|k| format!("p(a={},c={}|b={b})", k[0], k[1]), &dist, &w)
        }
        ConditionOn::Both => {
            let (a, cc) = (c.a.as_deref().expect("validated"), c.c.as_deref().expect("validated"));
            let (_, dist) = bidirectional_conditional(t, a, cc, tol)?;
            dist_records(|k| format!("p(b={}|a={a},c={cc})", k[0]), &dist, &[])
        }
    })
}

fn matrix_records(name: &str, o: &Operator) -> Vec<ResultRecord> {
    let mut out = Vec::new();
    for i in 0..o.dim() {
        for j in 0..o.dim() {
            let z = o.get(i, j);
            out.push(ResultRecord {
                im: z.im,
                ..ResultRecord::real(format!("{name}[{i},{j}]"), z.re)
            });
        }
    }
    out
}

fn state_records(c: &Conditioning, tol: &Tolerances) -> Result<Vec<ResultRecord>, CliError> {
    use qinstrument::sequence::{InterdictiveState, PredictiveState, RetrodictiveState};
    let t = &c.triple;
    let mut out = Vec::new();
    match c.on {
        ConditionOn::First => {
            let s = PredictiveState::from_outcome(&t.a, c.a.as_deref().expect("validated"), tol)?;
            out.extend(matrix_records("predictive", s.rho()));
        }
        ConditionOn::Last => {
            let s = RetrodictiveState::from_outcome(&t.c, c.c.as_deref().expect("validated"), tol)?;
            out.extend(matrix_records("retrodictive", s.rho()));
        }
        ConditionOn::Intermediate => {
            let s = InterdictiveState::from_outcome(&t.b, c.b.as_deref().expect("validated"), tol)?;
            out.push(ResultRecord::real("interdictive_norm", s.norm()));
            out.extend(matrix_records("interdictive_predictive", s.predictive_state(tol)?.as_operator()));
            out.extend(matrix_records("interdictive_retrodictive", s.retrodictive_state(tol)?.as_operator()));
        }
        ConditionOn::Both => {
            let pre = PredictiveState::from_outcome(&t.a, c.a.as_deref().expect("validated"), tol)?;
            let post = RetrodictiveState::from_outcome(&t.c, c.c.as_deref().expect("validated"), tol)?;
            out.extend(matrix_records("predictive", pre.rho()));
            out.extend(matrix_records("retrodictive", post.rho()));
        }
    }
    Ok(out)
}

/// Weak-value table over the given strengths.
pub fn sweep(s: &Scenario, eps: &[f64], tol: &Tolerances) -> Result<Vec<WeakSweepRow>, CliError> {
    let w = s
        .weak
        .as_ref()
        .ok_or_else(|| CliError::schema("weak", "sweep requires a `weak` block"))?;
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(CliError::Usage(format!("strengths must be positive, got {bad}")));
    }
    Ok(weak_sweep(&w.pre, &w.observable, &w.post, eps, tol)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub tuples: usize,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(|c| c.deviation).fold(0.0, f64::max)
    }
}

/// Cross-checks the scenario against the brute-force oracle.
pub fn verify(s: &Scenario, budget: u128, tol: &Tolerances) -> Result<VerifyReport, CliError> {
    let mut checks = Vec::new();
    for (i, st) in s.stages.iter().enumerate() {
        if let Stage::Instrument(inst) = &st.stage {
            let margin = inst.normalization_margin(tol)?;
            checks.push(Check {
                name: format!("stages[{i}] normalization excess"),
                deviation: (-margin).max(0.0),
                tolerance: tol.pos,
            });
        }
    }
    let table = enumerate_joint(&s.sequence, budget, tol)?;
    let engine_norm = normalization(&s.sequence)?;
    checks.push(Check {
        name: "normalization vs oracle".into(),
        deviation: (engine_norm - table.normalization).abs() / engine_norm.abs().max(1.0),
        tolerance: tol.eq,
    });
    let engine = joint_distribution(&s.sequence, tol)?;
    let joint_dev = engine
        .iter()
        .zip(&table.rows)
        .map(|((k1, r), (k2, p))| {
            debug_assert_eq!(k1, k2);
            (r.value() - p).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "joint probabilities vs oracle".into(),
        deviation: joint_dev,
        tolerance: tol.eq,
    });
    let expanded: f64 = table
        .rows
        .iter()
        .map(|(k, p)| {
            k.iter()
                .zip(&s.labels)
                .map(|(id, f)| f.get(id))
                .product::<qinstrument::Result<f64>>()
                .map(|w| w * p)
        })
        .sum::<qinstrument::Result<f64>>()?;
    let corr = correlation_ratio(&s.sequence, &s.labels, tol)?.value();
    checks.push(Check {
        name: "correlation vs oracle".into(),
        deviation: (corr - expanded).abs(),
        tolerance: tol.eq,
    });
    if let Some(c) = &s.conditioning {
        checks.push(Check {
            name: "conditional (full ratio) vs oracle".into(),
            deviation: conditional_deviation(c, &table, tol)?,
            tolerance: tol.eq,
        });
    }
    Ok(VerifyReport {
        tuples: table.rows.len(),
        checks,
    })
}

/// Joint table keyed by the grouped `(A, B, C)` outcome ids.
fn grouped(table: &JointTable, first: usize, middle: usize) -> BTreeMap<[String; 3], f64> {
    let join = |s: &[String]| if s.is_empty() { "1".to_string() } else { s.join(",") };
    let mut out = BTreeMap::new();
    for (k, p) in &table.rows {
        let key = [join(&k[..first]), join(&k[first..first + middle]), join(&k[first + middle..])];
        *out.entry(key).or_insert(0.0) += p;
    }
    out
}

fn conditional_deviation(c: &Conditioning, table: &JointTable, tol: &Tolerances) -> Result<f64, CliError> {
    let [first, middle] = c.split;
    let t = &c.triple;
    let joint = grouped(table, first, middle);
    let bayes = |fixed: &[(usize, &str)], free: &[(usize, &str)]| {
        let hit = |key: &[String; 3], conds: &[(usize, &str)]| conds.iter().all(|(i, v)| key[*i] == *v);
        let den: f64 = joint.iter().filter(|(key, _)| hit(key, fixed)).map(|(_, p)| p).sum();
        let num: f64 = joint
            .iter()
            .filter(|(key, _)| hit(key, fixed) && hit(key, free))
            .map(|(_, p)| p)
            .sum();
        num / den
    };
    let full = ConditioningMode::FullRatio;
    let dev = |pairs: Vec<(f64, f64)>| pairs.into_iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(match c.on {
        ConditionOn::First => {
            let a = c.a.as_deref().expect("validated");
            let (_, d) = condition_on_first(t, a, full, tol)?;
            dev(d.entries().iter().map(|(k, r)| (r.value(), bayes(&[(0, a)], &[(1, &k[0]), (2, &k[1])]))).collect())
        }
        ConditionOn::Last => {
            let cc = c.c.as_deref().expect("validated");
            let (_, d) = condition_on_last(t, cc, full, tol)?;
            dev(d.entries().iter().map(|(k, r)| (r.value(), bayes(&[(2, cc)], &[(0, &k[0]), (1, &k[1])]))).collect())
        }
        ConditionOn::Intermediate => {
            let b = c.b.as_deref().expect("validated");
            let (_, d) = condition_on_intermediate(t, b, full, tol)?;
            dev(d.entries().iter().map(|(k, r)| (r.value(), bayes(&[(1, b)], &[(0, &k[0]), (2, &k[1])]))).collect())
        }
        ConditionOn::Both => {
            let (a, cc) = (c.a.as_deref().expect("validated"), c.c.as_deref().expect("validated"));
            let (_, d) = bidirectional_conditional(t, a, cc, tol)?;
            dev(d.entries().iter().map(|(k, r)| (r.value(), bayes(&[(0, a), (2, cc)], &[(1, &k[0])]))).collect())
        }
    })
}

fn fmt_value(re: f64, im: f64) -> String {
    if im == 0.0 {
        format!("{re}")
    } else {
        format!("{re}{:+}i", im)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Aligned plain-text table of records.
pub fn render_table(records: &[ResultRecord]) -> String {
    let header = ["quantity", "value", "numerator", "denominator", "warnings"].map(String::from);
    let rows: Vec<[String; 5]> = records
        .iter()
        .map(|r| {
            [
                r.quantity.clone(),
                fmt_value(r.re, r.im),
                fmt_opt(r.numerator),
                fmt_opt(r.denominator),
                r.warnings.join("; "),
            ]
        })
        .collect();
    aligned(&header, &rows)
}

fn aligned<const N: usize>(header: &[String; N], rows: &[[String; N]]) -> String {
    let mut widths = header.each_ref().map(|h| h.len());
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String; N]| {
        let s: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&line(&widths.map(|w| "-".repeat(w))));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

pub fn render_sweep_table(rows: &[WeakSweepRow]) -> String {
    let header = ["eps", "prepost_average", "weak_value", "difference"].map(String::from);
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| [r.eps, r.prepost_average, r.weak_value, r.difference].map(|x| x.to_string()))
        .collect();
    aligned(&header, &body)
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

/// CSV with header `quantity,re,im,numerator,denominator,warnings`.
pub fn write_csv<W: Write>(records: &[ResultRecord], w: W) -> Result<(), CliError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["quantity", "re", "im", "numerator", "denominator", "warnings"])
        .map_err(csv_err)?;
    for r in records {
        wr.write_record([
            r.quantity.clone(),
            r.re.to_string(),
            r.im.to_string(),
            fmt_opt(r.numerator),
            fmt_opt(r.denominator),
            r.warnings.join("; "),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

pub fn write_sweep_csv<W: Write>(rows: &[WeakSweepRow], w: W) -> Result<(), CliError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["eps", "prepost_average", "weak_value", "difference"])
        .map_err(csv_err)?;
    for r in rows {
        wr.write_record([r.eps, r.prepost_average, r.weak_value, r.difference].map(|x| x.to_string()))
            .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}
