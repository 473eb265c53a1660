//! Result rows and their CSV form.

use std::fmt;

use serde_json::Value;

pub const COLUMNS: [&str; 7] = ["experiment", "param_json", "measured", "reference", "provenance", "tolerance", "verdict"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl Verdict {
    pub fn from_check(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Info => "info",
        })
    }
}

/// Where a reference value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Stated in the source result.
    Paper,
    /// Computed from an independent oracle or formula.
    Derived,
    /// Fitted on part of the samples.
    Fitted,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Derived => "derived",
            Self::Fitted => "fitted",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub params: Value,
    pub measured: f64,
    pub reference: f64,
    pub provenance: Provenance,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl Row {
    pub fn new(experiment: &str, params: Value) -> RowBuilder {
        RowBuilder { experiment: experiment.to_string(), params }
    }
}

/// First half of a row: what was run.
pub struct RowBuilder {
    experiment: String,
    params: Value,
}

impl RowBuilder {
    pub fn check(self, measured: f64, reference: f64, provenance: Provenance, tolerance: f64, ok: bool) -> Row {
        self.finish(measured, reference, provenance, tolerance, Verdict::from_check(ok))
    }

    pub fn info(self, measured: f64, reference: f64, provenance: Provenance, tolerance: f64) -> Row {
        self.finish(measured, reference, provenance, tolerance, Verdict::Info)
    }

    fn finish(self, measured: f64, reference: f64, provenance: Provenance, tolerance: f64, verdict: Verdict) -> Row {
        Row { experiment: self.experiment, params: self.params, measured, reference, provenance, tolerance, verdict }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.rows.iter().filter(|r| r.verdict == v).count()
    }

    pub fn any_fail(&self) -> bool {
        self.count(Verdict::Fail) > 0
    }

    /// Pass/fail rows only.
    pub fn checks(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.verdict != Verdict::Info)
    }

    /// CSV body: header plus one line per row, strings quoted.
    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.iter().map(|c| quote(c)).collect::<Vec<_>>().join(",");
        out.push('\n');
        for r in &self.rows {
            let fields = [
                quote(&r.experiment),
                quote(&r.params.to_string()),
                number(r.measured),
                number(r.reference),
                quote(&r.provenance.to_string()),
                number(r.tolerance),
                quote(&r.verdict.to_string()),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// CSV preceded by a `# generated …` comment line.
    pub fn to_csv_with_timestamp(&self, timestamp: &str) -> String {
        format!("# generated {timestamp}\n{}", self.to_csv())
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_shape() {
        let mut t = ResultTable::default();
        t.push(Row::new("sharpness", json!({"p": 2.0, "n": 2})).check(1.01, 1.0, Provenance::Paper, 0.1, true));
        t.push(Row::new("x", json!({})).info(f64::INFINITY, 0.5, Provenance::Fitted, 1.25));
        let s = t.to_csv_with_timestamp("now");
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# generated now");
        assert_eq!(lines[1], "\"experiment\",\"param_json\",\"measured\",\"reference\",\"provenance\",\"tolerance\",\"verdict\"");
        assert_eq!(lines[2], "\"sharpness\",\"{\"\"n\"\":2,\"\"p\"\":2.0}\",1.01,1,\"paper\",0.1,\"pass\"");
        assert_eq!(lines[3], "\"x\",\"{}\",inf,0.5,\"fitted\",1.25,\"info\"");
        assert!(!t.any_fail());
    }
}
