//! Dataset construction: Halton/Franke regression data and the 8×8 digits table.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_f64;

pub const DIGIT_PIXELS: usize = 64;

const BUNDLED_DIGITS: &str = include_str!("../data/digits.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    /// Targets are ±1.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// m×d, one sample per row.
    pub inputs: DMatrix<f64>,
    pub targets: DVector<f64>,
    pub task: Task,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>, task: Task) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::invalid("dataset needs at least one sample"));
        }
        if inputs.ncols() == 0 {
            return Err(Error::invalid("dataset needs at least one input column"));
        }
        if inputs.nrows() != targets.len() {
            return Err(Error::invalid(format!(
                "{} input rows but {} targets",
                inputs.nrows(),
                targets.len()
            )));
        }
        if task == Task::Binary && targets.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid("binary dataset targets must be -1 or +1"));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Self { inputs, targets, task })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    /// Multiplies every input entry by `factor`.
    pub fn scale_inputs(mut self, factor: f64) -> Self {
        self.inputs *= factor;
        self
    }

    /// Writes `x0,..,x{d-1},y` CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_csv_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let d = self.input_dim();
        let header: Vec<String> = (0..d).map(|j| format!("x{j}")).chain(["y".into()]).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = (0..d)
                .map(|j| fmt_f64(self.inputs[(i, j)]))
                .chain([fmt_f64(self.targets[i])])
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the `x0,..,x{d-1},y` CSV written by [`Dataset::write_csv`].
    pub fn read_csv(path: &Path, task: Task) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let parse_err = |row, msg: String| Error::Parse {
            path: path.into(),
            row,
            msg,
        };

        let header = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let d = cols.len().saturating_sub(1);
        let expected: Vec<String> = (0..d).map(|j| format!("x{j}")).chain(["y".into()]).collect();
        if d == 0 || cols != expected {
            return Err(parse_err(0, format!("expected header {}", expected.join(","))));
        }

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != d + 1 {
                return Err(parse_err(
                    row + 1,
                    format!("expected {} fields, found {}", d + 1, fields.len()),
                ));
            }
            for (k, field) in fields.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(row + 1, format!("'{field}' is not a number")))?;
                if k < d {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
        }
        let m = ys.len();
        if m == 0 {
            return Err(parse_err(1, "no data rows".into()));
        }
        Dataset::new(DMatrix::from_row_slice(m, d, &xs), DVector::from_vec(ys), task)
    }
}

/// Radical inverse of `index` in `base` (1-indexed Halton coordinate).
pub fn halton(index: u64, base: u64) -> Result<f64> {
    if index == 0 {
        return Err(Error::invalid("Halton sequence is 1-indexed"));
    }
    if base < 2 {
        return Err(Error::invalid(format!("Halton base must be >= 2, got {base}")));
    }
    let mut i = index;
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    Ok(r)
}

/// Franke's bivariate test function.
pub fn franke(x1: f64, x2: f64) -> f64 {
    let a = 9.0 * x1;
    let b = 9.0 * x2;
    0.75 * (-0.25 * ((a - 2.0).powi(2) + (b - 2.0).powi(2))).exp()
        + 0.75 * (-(a + 1.0).powi(2) / 49.0 - (b + 1.0).powi(2) / 10.0).exp()
        + 0.5 * (-0.25 * ((a - 7.0).powi(2) + (b - 3.0).powi(2))).exp()
        - 0.2 * (-(a - 4.0).powi(2) - (b - 7.0).powi(2)).exp()
}

/// Positive observation noise: `uniform(0,1) / (√(2π)·σ̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_tilde: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_tilde: f64, seed: u64) -> Result<Self> {
        if !(sigma_tilde > 0.0 && sigma_tilde.is_finite()) {
            return Err(Error::invalid(format!("noise sigma must be > 0, got {sigma_tilde}")));
        }
        Ok(Self { sigma_tilde, seed })
    }

    /// Upper bound of a single sample, `1/(√(2π)·σ̃)`.
    pub fn amplitude(&self) -> f64 {
        1.0 / ((2.0 * std::f64::consts::PI).sqrt() * self.sigma_tilde)
    }

    pub fn samples(&self, count: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let amp = self.amplitude();
        (0..count).map(|_| amp * rng.random::<f64>()).collect()
    }
}

fn halton_points(first: u64, count: usize) -> Result<DMatrix<f64>> {
    let mut pts = DMatrix::zeros(count, 2);
    for (r, k) in (first..first + count as u64).enumerate() {
        pts[(r, 0)] = halton(k, 2)?;
        pts[(r, 1)] = halton(k, 3)?;
    }
    Ok(pts)
}

/// Training and test sets on the unit square.
///
/// Training points are Halton indices `1..=n_train` (bases 2 and 3); test
/// points continue at `n_train + 1`. Only the training targets receive noise.
pub fn make_franke_datasets(n_train: usize, n_test: usize, noise: Option<NoiseSpec>) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid(
            "Franke datasets need at least one training and one test point",
        ));
    }
    let train_x = halton_points(1, n_train)?;
    let test_x = halton_points(n_train as u64 + 1, n_test)?;
    let targets = |x: &DMatrix<f64>| DVector::from_fn(x.nrows(), |i, _| franke(x[(i, 0)], x[(i, 1)]));

    let mut train_y = targets(&train_x);
    if let Some(spec) = noise {
        for (y, e) in train_y.iter_mut().zip(spec.samples(n_train)) {
            *y += e;
        }
    }
    let test_y = targets(&test_x);
    Ok((
        Dataset::new(train_x, train_y, Task::Regression)?,
        Dataset::new(test_x, test_y, Task::Regression)?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitRecord {
    pub pixels: [f64; DIGIT_PIXELS],
    pub label: u8,
}

fn digits_header() -> String {
    (0..DIGIT_PIXELS)
        .map(|j| format!("p{j}"))
        .chain(["label".into()])
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses the digits CSV (`p0,..,p63,label`). `path` is only used in messages.
pub fn parse_digits_csv(reader: impl BufRead, path: &Path) -> Result<Vec<DigitRecord>> {
    let parse_err = |row, msg: String| Error::Parse {
        path: path.into(),
        row,
        msg,
    };
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    if header.trim_end() != digits_header() {
        return Err(parse_err(0, "expected header p0,...,p63,label".into()));
    }

    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != DIGIT_PIXELS + 1 {
            return Err(parse_err(
                row,
                format!("expected {} columns, found {}", DIGIT_PIXELS + 1, fields.len()),
            ));
        }
        let mut pixels = [0.0; DIGIT_PIXELS];
        for (j, field) in fields[..DIGIT_PIXELS].iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(row, format!("pixel p{j} '{field}' is not a number")))?;
            if !(0.0..=16.0).contains(&v) {
                return Err(parse_err(row, format!("pixel p{j} = {v} outside [0, 16]")));
            }
            pixels[j] = v;
        }
        let label_field = fields[DIGIT_PIXELS];
        let label: u8 = label_field
            .parse()
            .map_err(|_| parse_err(row, format!("label '{label_field}' is not an integer")))?;
        if label > 9 {
            return Err(parse_err(row, format!("label {label} outside 0..9")));
        }
        records.push(DigitRecord { pixels, label });
    }
    Ok(records)
}

pub fn load_digits_csv(path: &Path) -> Result<Vec<DigitRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_digits_csv(BufReader::new(file), path)
}

/// The 1797-sample table shipped with the crate.
pub fn bundled_digits() -> Vec<DigitRecord> {
    parse_digits_csv(BUNDLED_DIGITS.as_bytes(), Path::new("<bundled digits.csv>"))
        .expect("bundled digits table is well formed")
}

/// Two-digit classification task: `digit_pos → +1`, `digit_neg → −1`, seeded
/// shuffle, then `⌊train_fraction · count⌋` samples for training.
pub fn make_binary_task(
    records: &[DigitRecord],
    digit_pos: u8,
    digit_neg: u8,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if digit_pos == digit_neg {
        return Err(Error::invalid("binary task needs two different digits"));
    }
    if digit_pos > 9 || digit_neg > 9 {
        return Err(Error::invalid("digits must be in 0..9"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut selected: Vec<&DigitRecord> = records
        .iter()
        .filter(|r| r.label == digit_pos || r.label == digit_neg)
        .collect();
    for digit in [digit_pos, digit_neg] {
        if !selected.iter().any(|r| r.label == digit) {
            return Err(Error::invalid(format!("digit {digit} does not occur in the records")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    selected.shuffle(&mut rng);

    // 0.7 · 360 evaluates to 251.999…; nudge before flooring so exact products stay exact.
    let n_train = (train_fraction * selected.len() as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train == selected.len() {
        return Err(Error::invalid("train fraction leaves an empty split"));
    }
    let build = |part: &[&DigitRecord]| {
        let inputs = DMatrix::from_fn(part.len(), DIGIT_PIXELS, |i, j| part[i].pixels[j]);
        let targets = DVector::from_fn(part.len(), |i, _| if part[i].label == digit_pos { 1.0 } else { -1.0 });
        Dataset::new(inputs, targets, Task::Binary)
    };
    Ok((build(&selected[..n_train])?, build(&selected[n_train..])?))
}
