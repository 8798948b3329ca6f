use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::engine::SimState;
use super::{Scenario, ScenarioKind};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace header mismatch at column {index}: expected {expected:?}, found {found:?}")]
    Header {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("row {row}, column {column}: cannot parse {value:?}")]
    Parse { row: usize, column: String, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpVariable {
    H,
    HTilde,
    /// Simultaneous reset of h and h̃ by the attitude-only loop.
    Joint,
}

impl JumpVariable {
    fn as_str(self) -> &'static str {
        match self {
            JumpVariable::H => "h",
            JumpVariable::HTilde => "h_tilde",
            JumpVariable::Joint => "joint",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "h" => Some(JumpVariable::H),
            "h_tilde" => Some(JumpVariable::HTilde),
            "joint" => Some(JumpVariable::Joint),
            _ => None,
        }
    }
}

/// One application of a jump map. `v_before`/`v_after` are the Lyapunov
/// values (V₁, V₂ or V₃ by variable) on the true state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub step: usize,
    pub t: f64,
    pub variable: JumpVariable,
    pub h_before: i8,
    pub h_after: i8,
    pub h_tilde_before: Option<i8>,
    pub h_tilde_after: Option<i8>,
    pub v_before: f64,
    pub v_after: f64,
}

impl JumpEvent {
    pub(crate) fn new(
        step: usize,
        before: &SimState,
        after: &SimState,
        variable: JumpVariable,
        sc: &Scenario,
        lyap: fn(&Scenario, &SimState, JumpVariable) -> f64,
    ) -> Self {
        Self {
            step,
            t: before.t,
            variable,
            h_before: before.h.as_i8(),
            h_after: after.h.as_i8(),
            h_tilde_before: before.h_tilde().map(|h| h.as_i8()),
            h_tilde_after: after.h_tilde().map(|h| h.as_i8()),
            v_before: lyap(sc, before, variable),
            v_after: lyap(sc, after, variable),
        }
    }
}

/// State at one sample time, after jump resolution, plus the torque held
/// over the following step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub q: [f64; 4],
    pub omega: [f64; 3],
    pub q_d: [f64; 4],
    pub omega_d: [f64; 3],
    pub q_e: [f64; 4],
    pub omega_e: [f64; 3],
    pub h: i8,
    pub h_tilde: Option<i8>,
    pub bias: [f64; 3],
    pub b_hat: [f64; 3],
    /// Observer Q_EI*⊗Q or filter Q_ED*⊗Q_e on the true state.
    pub q_tilde: Option<[f64; 4]>,
    pub u_cmd: [f64; 3],
    pub u_applied: [f64; 3],
    pub disturbance: [f64; 3],
    pub v1: f64,
    pub v2: Option<f64>,
    pub v3: Option<f64>,
    /// Number of jump events resolved at this sample.
    pub jumps: u32,
    /// Quaternion norm drift of the step that ended here, before renormalization.
    pub norm_drift: f64,
}

impl TraceRecord {
    pub fn q_e_vec_norm(&self) -> f64 {
        let q = &self.q_e;
        (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
    }

    pub fn omega_e_norm(&self) -> f64 {
        let w = &self.omega_e;
        (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
    }

    /// max(‖q_e‖, ‖ω_e‖).
    pub fn tracking_error(&self) -> f64 {
        self.q_e_vec_norm().max(self.omega_e_norm())
    }

    pub fn bias_error_norm(&self) -> f64 {
        (0..3)
            .map(|i| (self.bias[i] - self.b_hat[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub kind: ScenarioKind,
    pub dt: f64,
    pub records: Vec<TraceRecord>,
    pub jumps: Vec<JumpEvent>,
    pub max_norm_drift: f64,
}

fn vector_columns(prefix: &str, n: usize, start: usize, unit: &str) -> Vec<String> {
    (start..start + n).map(|i| format!("{prefix}{i}[{unit}]")).collect()
}

/// Column names of the trace file, each with its unit.
pub fn trace_header() -> Vec<String> {
    let mut h = vec!["t[s]".to_string()];
    h.extend(vector_columns("q", 4, 0, "-"));
    h.extend(vector_columns("w", 3, 1, "rad/s"));
    h.extend(vector_columns("qd", 4, 0, "-"));
    h.extend(vector_columns("wd", 3, 1, "rad/s"));
    h.extend(vector_columns("qe", 4, 0, "-"));
    h.extend(vector_columns("we", 3, 1, "rad/s"));
    h.push("h[-]".into());
    h.push("ht[-]".into());
    h.extend(vector_columns("b", 3, 1, "rad/s"));
    h.extend(vector_columns("bh", 3, 1, "rad/s"));
    h.extend(vector_columns("qt", 4, 0, "-"));
    h.extend(vector_columns("ucmd", 3, 1, "N*m"));
    h.extend(vector_columns("uapp", 3, 1, "N*m"));
    h.extend(vector_columns("d", 3, 1, "N*m"));
    for v in ["v1", "v2", "v3"] {
        h.push(format!("{v}[-]"));
    }
    h.push("jumps[-]".into());
    h.push("drift[-]".into());
    h
}

const JUMP_HEADER: [&str; 9] = [
    "step[-]",
    "t[s]",
    "variable",
    "h_before[-]",
    "h_after[-]",
    "ht_before[-]",
    "ht_after[-]",
    "v_before[-]",
    "v_after[-]",
];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl TraceRecord {
    fn to_row(&self) -> Vec<String> {
        let mut r = Vec::with_capacity(64);
        let mut push = |xs: &[f64]| r.extend(xs.iter().map(f64::to_string));
        push(&[self.t]);
        push(&self.q);
        push(&self.omega);
        push(&self.q_d);
        push(&self.omega_d);
        push(&self.q_e);
        push(&self.omega_e);
        r.push(self.h.to_string());
        r.push(opt(self.h_tilde));
        let mut push = |xs: &[f64]| r.extend(xs.iter().map(f64::to_string));
        push(&self.bias);
        push(&self.b_hat);
        match self.q_tilde {
            Some(q) => push(&q),
            None => r.extend(std::iter::repeat_n(String::new(), 4)),
        }
        let mut push = |xs: &[f64]| r.extend(xs.iter().map(f64::to_string));
        push(&self.u_cmd);
        push(&self.u_applied);
        push(&self.disturbance);
        push(&[self.v1]);
        r.push(opt(self.v2));
        r.push(opt(self.v3));
        r.push(self.jumps.to_string());
        r.push(self.norm_drift.to_string());
        r
    }
}

struct RowReader<'a> {
    rec: &'a csv::StringRecord,
    header: &'a [String],
    row: usize,
    col: usize,
}

impl RowReader<'_> {
    fn raw(&mut self) -> &str {
        let s = self.rec.get(self.col).unwrap_or("");
        self.col += 1;
        s
    }

    fn err(&self, value: &str) -> TraceError {
        TraceError::Parse {
            row: self.row,
            column: self.header.get(self.col - 1).cloned().unwrap_or_default(),
            value: value.to_string(),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T, TraceError> {
        let s = self.raw().to_string();
        s.parse().map_err(|_| self.err(&s))
    }

    fn parse_opt<T: std::str::FromStr>(&mut self) -> Result<Option<T>, TraceError> {
        let s = self.raw().to_string();
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| self.err(&s))
    }

    fn arr<const N: usize>(&mut self) -> Result<[f64; N], TraceError> {
        let mut a = [0.0; N];
        for x in a.iter_mut() {
            *x = self.parse()?;
        }
        Ok(a)
    }

    fn arr_opt<const N: usize>(&mut self) -> Result<Option<[f64; N]>, TraceError> {
        let mut a = [0.0; N];
        let mut present = 0;
        for x in a.iter_mut() {
            if let Some(v) = self.parse_opt()? {
                *x = v;
                present += 1;
            }
        }
        match present {
            0 => Ok(None),
            n if n == N => Ok(Some(a)),
            _ => Err(self.err("partially empty vector")),
        }
    }
}

fn check_header(found: &csv::StringRecord, expected: &[String]) -> Result<(), TraceError> {
    for (index, exp) in expected.iter().enumerate() {
        let f = found.get(index).unwrap_or("");
        if f != exp {
            return Err(TraceError::Header {
                index,
                expected: exp.clone(),
                found: f.to_string(),
            });
        }
    }
    if found.len() != expected.len() {
        return Err(TraceError::Header {
            index: expected.len(),
            expected: String::new(),
            found: found.get(expected.len()).unwrap_or("").to_string(),
        });
    }
    Ok(())
}

impl SimTrace {
    /// Writes the per-sample records. Floats use shortest round-trip
    /// formatting so reading the file back is bit-exact.
    pub fn write_records_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(trace_header())?;
        for r in &self.records {
            wr.write_record(r.to_row())?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_jumps_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(JUMP_HEADER)?;
        for e in &self.jumps {
            wr.write_record([
                e.step.to_string(),
                e.t.to_string(),
                e.variable.as_str().to_string(),
                e.h_before.to_string(),
                e.h_after.to_string(),
                opt(e.h_tilde_before),
                opt(e.h_tilde_after),
                e.v_before.to_string(),
                e.v_after.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`Self::write_records_csv`] and
    /// [`Self::write_jumps_csv`].
    pub fn read_csv<R1: Read, R2: Read>(kind: ScenarioKind, records: R1, jumps: R2) -> Result<Self, TraceError> {
        let header = trace_header();
        let mut rd = csv::Reader::from_reader(records);
        check_header(rd.headers()?, &header)?;
        let mut out = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let mut p = RowReader {
                rec: &rec,
                header: &header,
                row,
                col: 0,
            };
            out.push(TraceRecord {
                t: p.parse()?,
                q: p.arr()?,
                omega: p.arr()?,
                q_d: p.arr()?,
                omega_d: p.arr()?,
                q_e: p.arr()?,
                omega_e: p.arr()?,
                h: p.parse()?,
                h_tilde: p.parse_opt()?,
                bias: p.arr()?,
                b_hat: p.arr()?,
                q_tilde: p.arr_opt()?,
                u_cmd: p.arr()?,
                u_applied: p.arr()?,
                disturbance: p.arr()?,
                v1: p.parse()?,
                v2: p.parse_opt()?,
                v3: p.parse_opt()?,
                jumps: p.parse()?,
                norm_drift: p.parse()?,
            });
        }

        let jheader: Vec<String> = JUMP_HEADER.iter().map(|s| s.to_string()).collect();
        let mut rd = csv::Reader::from_reader(jumps);
        check_header(rd.headers()?, &jheader)?;
        let mut events = Vec::new();
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let mut p = RowReader {
                rec: &rec,
                header: &jheader,
                row,
                col: 0,
            };
            let step = p.parse()?;
            let t = p.parse()?;
            let name = p.raw().to_string();
            let variable = JumpVariable::parse(&name).ok_or_else(|| p.err(&name))?;
            events.push(JumpEvent {
                step,
                t,
                variable,
                h_before: p.parse()?,
                h_after: p.parse()?,
                h_tilde_before: p.parse_opt()?,
                h_tilde_after: p.parse_opt()?,
                v_before: p.parse()?,
                v_after: p.parse()?,
            });
        }

        let dt = if out.len() >= 2 { out[1].t - out[0].t } else { 0.0 };
        let max_norm_drift = out.iter().map(|r| r.norm_drift).fold(0.0, f64::max);
        Ok(SimTrace {
            kind,
            dt,
            records: out,
            jumps: events,
            max_norm_drift,
        })
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("trace has at least one record")
    }
}
