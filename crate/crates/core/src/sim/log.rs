use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector2;
use thiserror::Error;

use crate::ctrl::ErrorStack;
use crate::model::{ControlInput, PlantState};

/// Column order of the log file.
pub const LOG_HEADER: [&str; 20] = [
    "t", "r1", "r2", "v1", "v2", "theta", "F", "thetadot", "Fdot", "u1", "u2", "rd1", "rd2", "V",
    "Vdot", "e1", "e2", "e3", "e4", "detPsi",
];

#[derive(Error, Debug)]
pub enum LogError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("log header mismatch: expected `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Value {
        row: usize,
        column: &'static str,
        value: String,
    },
}

/// One sample of the closed loop. `u` is the input applied from `t` to
/// `t + dt`; the error norms and `det_psi` are those the controller saw at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub x1: Vector2<f64>,
    pub x2: Vector2<f64>,
    pub x3: Vector2<f64>,
    pub x4: Vector2<f64>,
    pub u: Vector2<f64>,
    pub x_d1: Vector2<f64>,
    pub v: f64,
    pub v_dot: f64,
    pub e_norms: [f64; 4],
    pub det_psi: f64,
}

impl LogRow {
    pub fn new(
        t: f64,
        state: &PlantState,
        u: &ControlInput,
        x_d1: &Vector2<f64>,
        stack: &ErrorStack,
    ) -> Self {
        Self {
            t,
            x1: state.x1,
            x2: state.x2,
            x3: state.x3,
            x4: state.x4,
            u: u.0,
            x_d1: *x_d1,
            v: stack.v,
            v_dot: stack.v_dot,
            e_norms: [
                stack.e1.norm(),
                stack.e2.norm(),
                stack.e3.norm(),
                stack.e4.norm(),
            ],
            det_psi: stack.psi.determinant(),
        }
    }

    pub fn state(&self) -> PlantState {
        PlantState::new(self.x1, self.x2, self.x3, self.x4)
    }

    fn to_record(self) -> [f64; 20] {
        [
            self.t,
            self.x1[0],
            self.x1[1],
            self.x2[0],
            self.x2[1],
            self.x3[0],
            self.x3[1],
            self.x4[0],
            self.x4[1],
            self.u[0],
            self.u[1],
            self.x_d1[0],
            self.x_d1[1],
            self.v,
            self.v_dot,
            self.e_norms[0],
            self.e_norms[1],
            self.e_norms[2],
            self.e_norms[3],
            self.det_psi,
        ]
    }

    fn from_record(c: &[f64; 20]) -> Self {
        let v2 = |i: usize| Vector2::new(c[i], c[i + 1]);
        Self {
            t: c[0],
            x1: v2(1),
            x2: v2(3),
            x3: v2(5),
            x4: v2(7),
            u: v2(9),
            x_d1: v2(11),
            v: c[13],
            v_dot: c[14],
            e_norms: [c[15], c[16], c[17], c[18]],
            det_psi: c[19],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioLog {
    pub rows: Vec<LogRow>,
}

impl ScenarioLog {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            rows: Vec::with_capacity(n),
        }
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Serialises as CSV. Values use Rust's shortest round-trip formatting,
    /// so reading the file back reproduces every bit.
    pub fn write_to<W: Write>(&self, w: W) -> Result<(), LogError> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wtr.write_record(LOG_HEADER)?;
        for row in &self.rows {
            wtr.write_record(row.to_record().iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, LogError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.iter().ne(LOG_HEADER.iter().copied()) {
            return Err(LogError::Schema {
                expected: LOG_HEADER.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut cols = [0.0; 20];
            for (j, col) in cols.iter_mut().enumerate() {
                let raw = rec.get(j).unwrap_or("");
                *col = raw.trim().parse().map_err(|_| LogError::Value {
                    row: i + 1,
                    column: LOG_HEADER[j],
                    value: raw.to_string(),
                })?;
            }
            rows.push(LogRow::from_record(&cols));
        }
        Ok(Self { rows })
    }
}

pub fn write_log(log: &ScenarioLog, path: impl AsRef<Path>) -> Result<(), LogError> {
    let mut w = BufWriter::new(File::create(path)?);
    log.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_log(path: impl AsRef<Path>) -> Result<ScenarioLog, LogError> {
    ScenarioLog::read_from(BufReader::new(File::open(path)?))
}
