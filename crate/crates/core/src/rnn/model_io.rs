//! Text model format.
//!
//! ```text
//! emg-rnn-model 1
//! arch brnn
//! input_mode same
//! dims <input> <hidden1> <hidden2> <classes>
//! extract.window_len 400
//! extract.step 200
//! extract.levels 2
//! extract.myop_threshold 2e-2
//! extract.wamp_threshold 2e-2
//! extract.ialv_offset 1e-6
//! train.learning_rate 1e-2
//! train.momentum 9e-1
//! train.epochs 200
//! train.batch_size 32
//! train.seed 42
//! train.init_scale 1e0
//! normalizer.mean <input values>
//! normalizer.std <input values>
//! unit 0
//! w_in <rows> <cols>
//! <one line per row>
//! b_in <len>
//! <values>
//! ... w_hidden, b_hidden, w_out, b_out, w_fwd_state, [w_bwd_state]
//! unit 1
//! ...
//! end
//! ```
//!
//! Fields are separated by single spaces. Reals use Rust's shortest
//! round-trip exponent form (`{:e}`), so a save/load cycle is lossless and a
//! given model always serializes to the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Arch, BuParams, InputMode, Matrix, StackModel, TrainConfig, NUM_UNITS};
use crate::error::{Error, Result};
use crate::features::{FeatureParams, Normalizer};
use crate::pipeline::ExtractConfig;

const MAGIC: &str = "emg-rnn-model";
const VERSION: u32 = 1;

fn push_reals(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:e}").unwrap();
    }
    out.push('\n');
}

fn push_matrix(out: &mut String, name: &str, m: &Matrix) {
    writeln!(out, "{name} {} {}", m.rows(), m.cols()).unwrap();
    for r in 0..m.rows() {
        push_reals(out, m.row(r));
    }
}

fn push_vector(out: &mut String, name: &str, v: &[f64]) {
    writeln!(out, "{name} {}", v.len()).unwrap();
    push_reals(out, v);
}

impl StackModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = self.dims();
        let e = &self.extract;
        let t = &self.train;
        writeln!(out, "{MAGIC} {VERSION}").unwrap();
        writeln!(out, "arch {}", self.arch.as_str()).unwrap();
        writeln!(out, "input_mode {}", self.input_mode.as_str()).unwrap();
        writeln!(out, "dims {} {} {} {}", d.input, d.hidden1, d.hidden2, d.classes).unwrap();
        writeln!(out, "extract.window_len {}", e.window_len).unwrap();
        writeln!(out, "extract.step {}", e.step).unwrap();
        writeln!(out, "extract.levels {}", e.levels).unwrap();
        writeln!(out, "extract.myop_threshold {:e}", e.params.myop_threshold).unwrap();
        writeln!(out, "extract.wamp_threshold {:e}", e.params.wamp_threshold).unwrap();
        writeln!(out, "extract.ialv_offset {:e}", e.params.ialv_offset).unwrap();
        writeln!(out, "train.learning_rate {:e}", t.learning_rate).unwrap();
        writeln!(out, "train.momentum {:e}", t.momentum).unwrap();
        writeln!(out, "train.epochs {}", t.epochs).unwrap();
        writeln!(out, "train.batch_size {}", t.batch_size).unwrap();
        writeln!(out, "train.seed {}", t.seed).unwrap();
        writeln!(out, "train.init_scale {:e}", t.init_scale).unwrap();
        out.push_str("normalizer.mean ");
        push_reals(&mut out, &self.normalizer.mean);
        out.push_str("normalizer.std ");
        push_reals(&mut out, &self.normalizer.std);
        for (i, u) in self.units.iter().enumerate() {
            writeln!(out, "unit {i}").unwrap();
            push_matrix(&mut out, "w_in", &u.w_in);
            push_vector(&mut out, "b_in", &u.b_in);
            push_matrix(&mut out, "w_hidden", &u.w_hidden);
            push_vector(&mut out, "b_hidden", &u.b_hidden);
            push_matrix(&mut out, "w_out", &u.w_out);
            push_vector(&mut out, "b_out", &u.b_out);
            push_matrix(&mut out, "w_fwd_state", &u.w_fwd_state);
            if let Some(m) = &u.w_bwd_state {
                push_matrix(&mut out, "w_bwd_state", m);
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);

        let magic = r.fields()?;
        if magic.len() != 2 || magic[0] != MAGIC {
            return Err(r.err("not an emg-rnn model file"));
        }
        if magic[1] != VERSION.to_string() {
            return Err(r.err(format!("unsupported model version {}", magic[1])));
        }
        let arch: Arch = r.keyed("arch")?.parse().map_err(|m: String| r.err(m))?;
        let input_mode: InputMode = r.keyed("input_mode")?.parse().map_err(|m: String| r.err(m))?;
        let dims: Vec<usize> = r.keyed_list("dims")?;
        if dims.len() != 4 {
            return Err(r.err("dims needs 4 values"));
        }
        let extract = ExtractConfig {
            window_len: r.keyed_parse("extract.window_len")?,
            step: r.keyed_parse("extract.step")?,
            levels: r.keyed_parse("extract.levels")?,
            params: FeatureParams {
                myop_threshold: r.keyed_parse("extract.myop_threshold")?,
                wamp_threshold: r.keyed_parse("extract.wamp_threshold")?,
                ialv_offset: r.keyed_parse("extract.ialv_offset")?,
            },
        };
        let train = TrainConfig {
            learning_rate: r.keyed_parse("train.learning_rate")?,
            momentum: r.keyed_parse("train.momentum")?,
            epochs: r.keyed_parse("train.epochs")?,
            batch_size: r.keyed_parse("train.batch_size")?,
            seed: r.keyed_parse("train.seed")?,
            init_scale: r.keyed_parse("train.init_scale")?,
            hidden1: dims[1],
            hidden2: dims[2],
        };
        let normalizer = Normalizer {
            mean: r.keyed_list("normalizer.mean")?,
            std: r.keyed_list("normalizer.std")?,
        };

        let mut units = Vec::with_capacity(NUM_UNITS);
        for i in 0..NUM_UNITS {
            let idx: usize = r.keyed_parse("unit")?;
            if idx != i {
                return Err(r.err(format!("expected unit {i}, found unit {idx}")));
            }
            let w_in = r.matrix("w_in")?;
            let b_in = r.vector("b_in")?;
            let w_hidden = r.matrix("w_hidden")?;
            let b_hidden = r.vector("b_hidden")?;
            let w_out = r.matrix("w_out")?;
            let b_out = r.vector("b_out")?;
            let w_fwd_state = r.matrix("w_fwd_state")?;
            let w_bwd_state = if arch == Arch::Brnn {
                Some(r.matrix("w_bwd_state")?)
            } else {
                None
            };
            units.push(BuParams {
                w_in,
                b_in,
                w_hidden,
                b_hidden,
                w_out,
                b_out,
                w_fwd_state,
                w_bwd_state,
            });
        }
        if r.fields()? != ["end"] {
            return Err(r.err("expected `end`"));
        }
        let model = StackModel::new(units, arch, input_mode, normalizer, extract, train)?;
        let d = model.dims();
        if [d.input, d.hidden1, d.hidden2, d.classes] != dims[..] {
            return Err(Error::ModelFormat(
                "declared dims do not match the stored matrices".into(),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::ModelFormat(format!("line {}: {msg}", self.line))
    }

    fn fields(&mut self) -> Result<Vec<&'a str>> {
        let (i, l) = self.lines.next().ok_or_else(|| self.err("unexpected end of file"))?;
        self.line = i + 1;
        Ok(l.split(' ').filter(|s| !s.is_empty()).collect())
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let f = self.fields()?;
        if f.len() != 2 || f[0] != key {
            return Err(self.err(format!("expected `{key} <value>`")));
        }
        Ok(f[1])
    }

    fn keyed_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| self.err(format!("invalid value {v:?} for {key}")))
    }

    fn keyed_list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let f = self.fields()?;
        if f.first() != Some(&key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        self.parse_all(&f[1..])
    }

    fn parse_all<T: std::str::FromStr>(&self, tokens: &[&str]) -> Result<Vec<T>> {
        tokens
            .iter()
            .map(|t| t.parse().map_err(|_| self.err(format!("invalid number {t:?}"))))
            .collect()
    }

    fn reals(&mut self, expected: usize) -> Result<Vec<f64>> {
        let f = self.fields()?;
        if f.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", f.len())));
        }
        self.parse_all(&f)
    }

    fn matrix(&mut self, name: &str) -> Result<Matrix> {
        let header: Vec<usize> = self.keyed_list(name)?;
        if header.len() != 2 {
            return Err(self.err(format!("{name} header needs rows and cols")));
        }
        let (rows, cols) = (header[0], header[1]);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.reals(cols)?);
        }
        Ok(Matrix::from_vec(rows, cols, data))
    }

    fn vector(&mut self, name: &str) -> Result<Vec<f64>> {
        let header: Vec<usize> = self.keyed_list(name)?;
        if header.len() != 1 {
            return Err(self.err(format!("{name} header needs a length")));
        }
        self.reals(header[0])
    }
}
