//! Dataset CSV (`z_1..z_d,c_1..c_n`) plus a JSON sidecar with the law
//! parameters, so a saved instance reloads to an identical one.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::knapsack::knapsack_constraints;
use super::shortest_path::shortest_path_constraints;
use super::{CostLaw, KnapsackSet, ProblemInstance, ProblemKind};
use crate::error::{PtcError, Result};
use crate::linalg::Matrix;
use crate::predictors::Dataset;
use crate::robust::Constraints;

const META_FORMAT: &str = "ptc-dataset";
const META_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceMeta {
    pub format: String,
    pub version: u32,
    pub kind: ProblemKind,
    pub seed: u64,
    pub t: usize,
    pub d: usize,
    pub n: usize,
    /// Row-major `n × d`; absent for the toy problem.
    pub theta: Option<Vec<Vec<f64>>>,
    pub constraint_sets: Vec<KnapsackSet>,
    pub clamped_rows: usize,
}

impl InstanceMeta {
    pub fn of(inst: &ProblemInstance) -> Self {
        InstanceMeta {
            format: META_FORMAT.into(),
            version: META_VERSION,
            kind: inst.kind(),
            seed: inst.seed,
            t: inst.dataset.len(),
            d: inst.d(),
            n: inst.n(),
            theta: inst.law.theta().map(|m| m.row_iter().map(<[f64]>::to_vec).collect()),
            constraint_sets: inst.knapsack_sets.clone(),
            clamped_rows: inst.clamped_rows,
        }
    }
}

fn csv_err(e: csv::Error) -> PtcError {
    match e.kind() {
        csv::ErrorKind::Io(_) => PtcError::Io(e.to_string()),
        _ => PtcError::Format(e.to_string()),
    }
}

fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = (1..=data.input_dim())
        .map(|j| format!("z_{j}"))
        .chain((1..=data.output_dim()).map(|j| format!("c_{j}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..data.len() {
        let rec: Vec<String> = data.z.row(i).iter().chain(data.c.row(i)).map(|v| v.to_string()).collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_dataset(path: &Path, d: usize, n: usize) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    let expect: Vec<String> = (1..=d).map(|j| format!("z_{j}")).chain((1..=n).map(|j| format!("c_{j}"))).collect();
    if header.iter().ne(expect.iter().map(String::as_str)) {
        return Err(PtcError::Format(format!("unexpected CSV header in {}", path.display())));
    }
    let (mut z, mut c) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| PtcError::Format(format!("bad number '{field}' in {}", path.display())))?;
            if j < d {
                z.push(v);
            } else {
                c.push(v);
            }
        }
    }
    let t = z.len() / d.max(1);
    Dataset::new(Matrix::from_vec(t, d, z)?, Matrix::from_vec(t, n, c)?)
}

/// Write `<dir>/<kind>.csv` and `<dir>/<kind>.meta.json`.
pub fn save_instance(inst: &ProblemInstance, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", inst.kind()));
    let meta_path = dir.join(format!("{}.meta.json", inst.kind()));
    write_dataset(&inst.dataset, &csv_path)?;
    let json = serde_json::to_string_pretty(&InstanceMeta::of(inst)).map_err(|e| PtcError::Format(e.to_string()))?;
    fs::write(&meta_path, json + "\n")?;
    Ok((csv_path, meta_path))
}

pub fn load_instance(csv_path: &Path, meta_path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(meta_path)?;
    let meta: InstanceMeta = serde_json::from_str(&text).map_err(|e| PtcError::Format(e.to_string()))?;
    if meta.format != META_FORMAT || meta.version != META_VERSION {
        return Err(PtcError::Format(format!("unsupported sidecar {} v{}", meta.format, meta.version)));
    }
    let theta = match &meta.theta {
        Some(rows) => Some(Matrix::from_rows(rows)?),
        None => None,
    };
    let law = match (meta.kind, theta) {
        (ProblemKind::Toy, None) => CostLaw::Toy { d: meta.d },
        (ProblemKind::ShortestPath, Some(theta)) => CostLaw::ShortestPath { theta },
        (ProblemKind::Knapsack, Some(theta)) => CostLaw::Knapsack { theta },
        (k, _) => return Err(PtcError::Format(format!("theta presence does not match kind {k}"))),
    };
    if law.covariate_dim() != meta.d || law.cost_dim() != meta.n {
        return Err(PtcError::Format("sidecar dimensions disagree with theta".into()));
    }
    let constraints = match meta.kind {
        ProblemKind::Toy => vec![Constraints::symmetric_box(1)],
        ProblemKind::ShortestPath => {
            let (a, b) = shortest_path_constraints();
            vec![Constraints::standard(a, b)?]
        }
        ProblemKind::Knapsack => meta.constraint_sets.iter().map(knapsack_constraints).collect::<Result<_>>()?,
    };
    let dataset = read_dataset(csv_path, meta.d, meta.n)?;
    if dataset.len() != meta.t {
        return Err(PtcError::Format(format!("sidecar says T={}, CSV has {} rows", meta.t, dataset.len())));
    }
    Ok(ProblemInstance {
        seed: meta.seed,
        dataset,
        law,
        constraints,
        knapsack_sets: meta.constraint_sets,
        clamped_rows: meta.clamped_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_knapsack, gen_shortest_path, gen_toy};

    #[test]
    fn instances_round_trip() {
        let dir = std::env::temp_dir().join(format!("ptc-io-{}", std::process::id()));
        for inst in [
            gen_toy(7, 2, 1).unwrap(),
            gen_shortest_path(6, 4, 2).unwrap(),
            gen_knapsack(5, 3, 4, 3).unwrap(),
        ] {
            let (c, m) = save_instance(&inst, &dir).unwrap();
            let back = load_instance(&c, &m).unwrap();
            assert_eq!(back.dataset, inst.dataset);
            assert_eq!(back.law, inst.law);
            assert_eq!(back.constraints, inst.constraints);
            assert_eq!(back.knapsack_sets, inst.knapsack_sets);
        }
        fs::remove_dir_all(&dir).ok();
    }
}
