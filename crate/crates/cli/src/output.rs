//! CSV and JSON writers. Floats are written with 17 significant digits so a
//! round trip through text is lossless.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde_json::Value;

use rydsim::analysis::unwrap_phase_with_gaps;
use rydsim::EvolutionTrace;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(usize),
    Num(f64),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Int(k) => k.to_string(),
            Cell::Num(x) => format_float(x),
        }
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// `t_us, ground_pop, ground_phase_rad` and one column per tracked population.
/// The phase is unwrapped and zero at the first sample; it is NaN where the
/// ground amplitude is too small to carry one.
pub fn trace_table(trace: &EvolutionTrace) -> Table {
    let mut headers = vec!["t_us".to_string(), "ground_pop".into(), "ground_phase_rad".into()];
    headers.extend(trace.tracked.iter().map(|(name, _)| name.clone()));
    let phase = unwrap_phase_with_gaps(trace).unwrap_or_else(|| vec![f64::NAN; trace.times.len()]);
    let mut table = Table::new(headers);
    for k in 0..trace.times.len() {
        let mut row = vec![Cell::Num(trace.times[k]), Cell::Num(trace.ground_population[k]), Cell::Num(phase[k])];
        row.extend(trace.tracked.iter().map(|(_, values)| Cell::Num(values[k])));
        table.push(row);
    }
    table
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(&table.headers)?;
    for row in &table.rows {
        writer.write_record(row.iter().map(|c| c.render()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn complex(z: C64) -> Value {
    serde_json::json!([z.re, z.im])
}

pub fn complex_matrix(m: &Array2<C64>) -> Value {
    Value::Array(m.rows().into_iter().map(|row| Value::Array(row.iter().map(|z| complex(*z)).collect())).collect())
}

/// Collects written file names relative to the output directory.
#[derive(Debug)]
pub struct OutputDir {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<String, CliError> {
        write_csv(&self.dir.join(name), table)?;
        self.files.push(name.to_string());
        Ok(name.to_string())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }
}
