//! Versioned plain-text model records. Layout is described in
//! `docs/FORMAT.md`; floats are written in shortest round-trip form so a
//! save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::kernel::KernelRidgeModel;
use super::linear::LinearModel;
use super::mlp::{Layer, MlpModel};
use super::quantile::{QuantileInner, QuantileModel};
use super::Predictor;
use crate::error::{PtcError, Result};
use crate::linalg::Matrix;

pub const MAGIC: &str = "ptc-record";
pub const VERSION: u32 = 1;

/// A tagged node holding named text fields, scalars, arrays and child nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Record {
    pub tag: String,
    pub texts: Vec<(String, String)>,
    pub scalars: Vec<(String, f64)>,
    pub arrays: Vec<(String, Matrix)>,
    pub children: Vec<Record>,
}

fn check_name(name: &str) {
    assert!(
        !name.is_empty() && !name.contains(char::is_whitespace),
        "record names must be single tokens: {name:?}"
    );
}

impl Record {
    pub fn new(tag: &str) -> Self {
        check_name(tag);
        Record {
            tag: tag.to_string(),
            ..Default::default()
        }
    }

    pub fn text(mut self, name: &str, value: &str) -> Self {
        check_name(name);
        check_name(value);
        self.texts.push((name.into(), value.into()));
        self
    }

    pub fn scalar(mut self, name: &str, value: f64) -> Self {
        check_name(name);
        self.scalars.push((name.into(), value));
        self
    }

    pub fn array(mut self, name: &str, value: Matrix) -> Self {
        check_name(name);
        self.arrays.push((name.into(), value));
        self
    }

    pub fn vector(self, name: &str, value: &[f64]) -> Self {
        let m = Matrix::from_vec(1, value.len(), value.to_vec()).expect("row vector");
        self.array(name, m)
    }

    pub fn child(mut self, child: Record) -> Self {
        self.children.push(child);
        self
    }

    pub fn expect_tag(&self, tag: &str) -> Result<()> {
        if self.tag == tag {
            Ok(())
        } else {
            Err(PtcError::Format(format!("expected record '{tag}', found '{}'", self.tag)))
        }
    }

    pub fn get_text(&self, name: &str) -> Result<&str> {
        self.texts
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| PtcError::Format(format!("record '{}' lacks text '{name}'", self.tag)))
    }

    pub fn get_scalar(&self, name: &str) -> Result<f64> {
        self.scalars
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| PtcError::Format(format!("record '{}' lacks scalar '{name}'", self.tag)))
    }

    pub fn get_array(&self, name: &str) -> Result<&Matrix> {
        self.arrays
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v)
            .ok_or_else(|| PtcError::Format(format!("record '{}' lacks array '{name}'", self.tag)))
    }

    pub fn get_vector(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.get_array(name)?.as_slice().to_vec())
    }

    pub fn get_child(&self, tag: &str) -> Result<&Record> {
        self.children
            .iter()
            .find(|c| c.tag == tag)
            .ok_or_else(|| PtcError::Format(format!("record '{}' lacks child '{tag}'", self.tag)))
    }

    fn write_into(&self, out: &mut String) {
        let _ = writeln!(out, "record {}", self.tag);
        for (k, v) in &self.texts {
            let _ = writeln!(out, "text {k} {v}");
        }
        for (k, v) in &self.scalars {
            let _ = writeln!(out, "scalar {k} {v:?}");
        }
        for (k, m) in &self.arrays {
            let _ = writeln!(out, "array {k} {} {}", m.rows(), m.cols());
            for row in m.row_iter().filter(|_| m.cols() > 0) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        for c in &self.children {
            c.write_into(out);
        }
        out.push_str("end\n");
    }

    /// Serialize with the versioned header line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        self.write_into(&mut out);
        out
    }

    pub fn parse(text: &str) -> Result<Record> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| PtcError::Format("empty record".into()))?;
        let mut h = header.split_whitespace();
        if h.next() != Some(MAGIC) {
            return Err(PtcError::Format("missing ptc-record header".into()));
        }
        let version: u32 = h
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| PtcError::Format("bad record version".into()))?;
        if version != VERSION {
            return Err(PtcError::Format(format!("unsupported record version {version}")));
        }
        let mut lines = lines.map(|(i, l)| (i + 1, l));
        let (no, first) = lines.next().ok_or_else(|| PtcError::Format("missing root record".into()))?;
        let tag = parse_open(no, first)?;
        let rec = parse_body(tag, &mut lines)?;
        if let Some((no, _)) = lines.next() {
            return Err(PtcError::Format(format!("line {no}: trailing content after root record")));
        }
        Ok(rec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Record> {
        Record::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_open(no: usize, line: &str) -> Result<String> {
    let mut t = line.split_whitespace();
    match (t.next(), t.next(), t.next()) {
        (Some("record"), Some(tag), None) => Ok(tag.to_string()),
        _ => Err(PtcError::Format(format!("line {no}: expected 'record <tag>'"))),
    }
}

fn parse_f64(no: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| PtcError::Format(format!("line {no}: bad number '{s}'")))
}

fn parse_body<'a>(tag: String, lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<Record> {
    let mut rec = Record {
        tag,
        ..Default::default()
    };
    while let Some((no, line)) = lines.next() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end"] => return Ok(rec),
            ["record", _] => {
                let child = parse_body(toks[1].to_string(), lines)?;
                rec.children.push(child);
            }
            ["text", k, v] => rec.texts.push((k.to_string(), v.to_string())),
            ["scalar", k, v] => rec.scalars.push((k.to_string(), parse_f64(no, v)?)),
            ["array", k, r, c] => {
                let rows: usize = r
                    .parse()
                    .map_err(|_| PtcError::Format(format!("line {no}: bad row count")))?;
                let cols: usize = c
                    .parse()
                    .map_err(|_| PtcError::Format(format!("line {no}: bad column count")))?;
                let mut data = Vec::with_capacity(rows * cols);
                let body_rows = if cols == 0 { 0 } else { rows };
                for _ in 0..body_rows {
                    let (rn, rl) = lines
                        .next()
                        .ok_or_else(|| PtcError::Format(format!("array '{k}' truncated")))?;
                    let before = data.len();
                    for v in rl.split_whitespace() {
                        data.push(parse_f64(rn, v)?);
                    }
                    if data.len() - before != cols {
                        return Err(PtcError::Format(format!("line {rn}: expected {cols} values")));
                    }
                }
                rec.arrays.push((k.to_string(), Matrix::from_vec(rows, cols, data)?));
            }
            _ => return Err(PtcError::Format(format!("line {no}: unrecognized '{line}'"))),
        }
    }
    Err(PtcError::Format(format!("record '{}' not terminated", rec.tag)))
}

/// Conversion to and from a [`Record`] tree.
pub trait Persist: Sized {
    fn to_record(&self) -> Record;
    fn from_record(rec: &Record) -> Result<Self>;

    fn save(&self, path: &Path) -> Result<()> {
        self.to_record().save(path)
    }

    fn load(path: &Path) -> Result<Self> {
        Self::from_record(&Record::load(path)?)
    }
}

fn mlp_record(m: &MlpModel) -> Record {
    let (xm, xs) = m.input_scaling();
    let (ym, ys) = m.output_scaling();
    let mut r = Record::new("mlp")
        .vector("x_mean", xm)
        .vector("x_scale", xs)
        .vector("y_mean", ym)
        .vector("y_scale", ys)
        .vector("losses", m.training_losses());
    for l in m.layers() {
        r = r.child(Record::new("layer").array("weights", l.weights.clone()).vector("bias", &l.bias));
    }
    r
}

fn mlp_from(rec: &Record) -> Result<MlpModel> {
    rec.expect_tag("mlp")?;
    let layers = rec
        .children
        .iter()
        .map(|c| {
            c.expect_tag("layer")?;
            Ok(Layer {
                weights: c.get_array("weights")?.clone(),
                bias: c.get_vector("bias")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MlpModel::from_parts(
        layers,
        rec.get_vector("x_mean")?,
        rec.get_vector("x_scale")?,
        rec.get_vector("y_mean")?,
        rec.get_vector("y_scale")?,
        rec.get_vector("losses")?,
    )
}

impl Persist for Predictor {
    fn to_record(&self) -> Record {
        let r = Record::new("predictor");
        match self {
            Predictor::Linear(m) => r
                .text("kind", "linear")
                .array("weights", m.weights().clone())
                .vector("intercept", m.intercept()),
            Predictor::KernelRidgeRbf(m) => r
                .text("kind", "kernel-ridge-rbf")
                .scalar("bandwidth", m.bandwidth())
                .scalar("lambda", m.lambda())
                .array("train_z", m.train_z().clone())
                .array("coef", m.coef().clone())
                .vector("target_mean", m.target_mean()),
            Predictor::Mlp(m) => r.text("kind", "mlp").child(mlp_record(m)),
        }
    }

    fn from_record(rec: &Record) -> Result<Self> {
        rec.expect_tag("predictor")?;
        match rec.get_text("kind")? {
            "linear" => Ok(Predictor::Linear(LinearModel::new(
                rec.get_array("weights")?.clone(),
                rec.get_vector("intercept")?,
            )?)),
            "kernel-ridge-rbf" => Ok(Predictor::KernelRidgeRbf(KernelRidgeModel::from_parts(
                rec.get_array("train_z")?.clone(),
                rec.get_array("coef")?.clone(),
                rec.get_vector("target_mean")?,
                rec.get_scalar("bandwidth")?,
                rec.get_scalar("lambda")?,
            )?)),
            "mlp" => Ok(Predictor::Mlp(mlp_from(rec.get_child("mlp")?)?)),
            other => Err(PtcError::Format(format!("unknown predictor kind '{other}'"))),
        }
    }
}

impl Persist for QuantileModel {
    fn to_record(&self) -> Record {
        let r = Record::new("quantile")
            .scalar("alpha", self.alpha())
            .scalar("floor", self.floor());
        match &self.inner {
            QuantileInner::Linear(m) => r
                .text("kind", "linear-pinball")
                .array("weights", m.weights().clone())
                .vector("intercept", m.intercept()),
            QuantileInner::Mlp(m) => r.text("kind", "mlp-pinball").child(mlp_record(m)),
            QuantileInner::Constant { input_dim, values } => r
                .text("kind", "constant")
                .scalar("input_dim", *input_dim as f64)
                .vector("values", values),
        }
    }

    fn from_record(rec: &Record) -> Result<Self> {
        rec.expect_tag("quantile")?;
        let alpha = rec.get_scalar("alpha")?;
        let floor = rec.get_scalar("floor")?;
        let inner = match rec.get_text("kind")? {
            "linear-pinball" => QuantileInner::Linear(LinearModel::new(
                rec.get_array("weights")?.clone(),
                rec.get_vector("intercept")?,
            )?),
            "mlp-pinball" => QuantileInner::Mlp(mlp_from(rec.get_child("mlp")?)?),
            "constant" => QuantileInner::Constant {
                input_dim: rec.get_scalar("input_dim")? as usize,
                values: rec.get_vector("values")?,
            },
            other => return Err(PtcError::Format(format!("unknown quantile kind '{other}'"))),
        };
        QuantileModel::from_inner(inner, alpha, floor)
    }
}
