//! Reading and writing the `y,delta,x1,...,xd` data format.

use std::path::Path;

use copulaqr::survival::ObservedSample;

/// Problem with an input file, reported with its location.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, InputError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn covariate_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> Result<f64, InputError> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(InputError(format!(
            "{}: line {line}: column {column}: cannot parse {cell:?} as a finite number",
            path.display()
        ))),
    }
}

/// Reads a sample with header `y,delta,x1,...,xd`.
pub fn read_sample(path: &Path) -> Result<ObservedSample, InputError> {
    let mut rdr = reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| InputError(format!("{}: line 1: {e}", path.display())))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let d = names.len().saturating_sub(2);
    if names.len() < 3 || names[0] != "y" || names[1] != "delta" || names[2..] != covariate_names(d)[..] {
        return Err(InputError(format!(
            "{}: line 1: header must be y,delta,x1,...,xd, found {}",
            path.display(),
            names.join(",")
        )));
    }
    let (mut y, mut delta, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(row as u64 + 2, |p| p.line());
            InputError(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line());
        y.push(parse_cell(path, line, "y", &record[0])?);
        delta.push(match &record[1] {
            "1" => true,
            "0" => false,
            other => {
                return Err(InputError(format!(
                    "{}: line {line} (row {}): delta must be 0 or 1, found {other:?}",
                    path.display(),
                    row + 1
                )))
            }
        });
        x.push(
            (0..d)
                .map(|j| parse_cell(path, line, names[j + 2], &record[j + 2]))
                .collect::<Result<Vec<f64>, _>>()?,
        );
    }
    if y.is_empty() {
        return Err(InputError(format!("{}: no data rows", path.display())));
    }
    ObservedSample::new(y, delta, x).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

/// Reads covariate points from the `x1..xd` columns of a CSV file; other
/// columns are ignored.
pub fn read_points(path: &Path, d: usize) -> Result<Vec<Vec<f64>>, InputError> {
    let mut rdr = reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| InputError(format!("{}: line 1: {e}", path.display())))?
        .clone();
    let idx = covariate_names(d)
        .iter()
        .map(|name| {
            header.iter().position(|h| h == name).ok_or_else(|| {
                InputError(format!("{}: line 1: missing column {name}", path.display()))
            })
        })
        .collect::<Result<Vec<usize>, _>>()?;
    let mut points = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(row as u64 + 2, |p| p.line());
            InputError(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line());
        points.push(
            idx.iter()
                .map(|&k| parse_cell(path, line, &header[k], &record[k]))
                .collect::<Result<Vec<f64>, _>>()?,
        );
    }
    Ok(points)
}

/// Writes a sample at full precision so that it reads back exactly.
pub fn sample_csv(sample: &ObservedSample) -> String {
    let mut out = String::from("y,delta");
    for name in covariate_names(sample.dim()) {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for i in 0..sample.len() {
        out.push_str(&format!("{},{}", sample.y()[i], u8::from(sample.delta()[i])));
        for v in &sample.rows()[i] {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
