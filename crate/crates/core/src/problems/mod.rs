//! Seeded synthetic problems: toy one-dimensional LP, grid shortest path and
//! fractional knapsack, plus closed-form oracles for the 1-D illustrations.
//!
//! Every random draw comes from a named stream (see [`crate::rng`]). Row `t`
//! of a dataset uses `StreamKey(seed, "<kind>/data").index(t)`, so a dataset
//! of size `T` is a prefix of any larger dataset with the same seed.

mod io;
mod knapsack;
pub mod oracles;
mod shortest_path;
mod toy;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PtcError, Result};
use crate::linalg::Matrix;
use crate::predictors::Dataset;
use crate::rng::{Rng, StreamKey};
use crate::robust::Constraints;

pub use io::{load_instance, save_instance, InstanceMeta};
pub use knapsack::{gen_knapsack, gen_knapsack_constraints, knapsack_constraints, KnapsackSet, KNAPSACK_SETS};
pub use shortest_path::{gen_shortest_path, grid_edges, shortest_path_constraints, GRID_SIDE, SP_EDGES};
pub use toy::gen_toy;

/// Smallest shortest-path edge cost; lower draws are clamped to it.
pub const COST_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Toy,
    ShortestPath,
    Knapsack,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Toy, ProblemKind::ShortestPath, ProblemKind::Knapsack];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Toy => "toy",
            ProblemKind::ShortestPath => "shortest-path",
            ProblemKind::Knapsack => "knapsack",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = PtcError;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PtcError::ConfigInvalid(format!("unknown problem kind '{s}' (toy, shortest-path, knapsack)")))
    }
}

/// Conditional law of `c` given `z`, together with the covariate law.
#[derive(Debug, Clone, PartialEq)]
pub enum CostLaw {
    /// `z ~ U[−0.5,0.5]^d`, `c = (sign z₁ + ε)√|z₁|`, `ε ~ U[−0.5,0.5]`.
    Toy { d: usize },
    /// `z ~ N(0,I)`, `c_i = [((Θz)_i/√d + 3)⁵ + 1]·ε_i`, `ε_i ~ U[3/4,5/4]`.
    ShortestPath { theta: Matrix },
    /// `z ~ U[0,4]^d`, `c_i = (Θz)_i²·ε_i`, `ε_i ~ U[4/5,6/5]`.
    Knapsack { theta: Matrix },
}

impl CostLaw {
    pub fn kind(&self) -> ProblemKind {
        match self {
            CostLaw::Toy { .. } => ProblemKind::Toy,
            CostLaw::ShortestPath { .. } => ProblemKind::ShortestPath,
            CostLaw::Knapsack { .. } => ProblemKind::Knapsack,
        }
    }

    pub fn covariate_dim(&self) -> usize {
        match self {
            CostLaw::Toy { d } => *d,
            CostLaw::ShortestPath { theta } | CostLaw::Knapsack { theta } => theta.cols(),
        }
    }

    pub fn cost_dim(&self) -> usize {
        match self {
            CostLaw::Toy { .. } => 1,
            CostLaw::ShortestPath { theta } | CostLaw::Knapsack { theta } => theta.rows(),
        }
    }

    pub fn theta(&self) -> Option<&Matrix> {
        match self {
            CostLaw::Toy { .. } => None,
            CostLaw::ShortestPath { theta } | CostLaw::Knapsack { theta } => Some(theta),
        }
    }

    pub fn sample_z(&self, rng: &mut Rng) -> Vec<f64> {
        match self {
            CostLaw::Toy { d } => toy::sample_z(*d, rng),
            CostLaw::ShortestPath { theta } => shortest_path::sample_z(theta.cols(), rng),
            CostLaw::Knapsack { theta } => knapsack::sample_z(theta.cols(), rng),
        }
    }

    /// Draw `c | z`; the flag reports whether any shortest-path cost was clamped.
    pub fn sample_c_flagged(&self, z: &[f64], rng: &mut Rng) -> (Vec<f64>, bool) {
        match self {
            CostLaw::Toy { .. } => (toy::sample_c(z, rng), false),
            CostLaw::ShortestPath { theta } => shortest_path::sample_c(theta, z, rng),
            CostLaw::Knapsack { theta } => (knapsack::sample_c(theta, z, rng), false),
        }
    }

    /// Draw `c | z`.
    pub fn sample_c(&self, z: &[f64], rng: &mut Rng) -> Vec<f64> {
        self.sample_c_flagged(z, rng).0
    }

    /// `E[c | z]` (ignoring the shortest-path clamp, which has negligible mass).
    pub fn conditional_mean(&self, z: &[f64]) -> Vec<f64> {
        match self {
            CostLaw::Toy { .. } => vec![oracles::sign0(z[0]) * z[0].abs().sqrt()],
            CostLaw::ShortestPath { theta } => shortest_path::mean_factor(theta, z),
            CostLaw::Knapsack { theta } => theta.matvec(z).into_iter().map(|v| v * v).collect(),
        }
    }

    /// `t` rows drawn from the streams `key.index(0..t)`; also returns the
    /// number of rows with a clamped cost.
    pub fn generate(&self, t: usize, key: StreamKey) -> (Dataset, usize) {
        let (d, n) = (self.covariate_dim(), self.cost_dim());
        let mut z = Matrix::zeros(t, d);
        let mut c = Matrix::zeros(t, n);
        let mut clamped = 0;
        for row in 0..t {
            let mut rng = key.index(row as u64).rng();
            let zr = self.sample_z(&mut rng);
            let (cr, hit) = self.sample_c_flagged(&zr, &mut rng);
            clamped += hit as usize;
            z.row_mut(row).copy_from_slice(&zr);
            c.row_mut(row).copy_from_slice(&cr);
        }
        (Dataset { z, c }, clamped)
    }
}

/// Dataset, feasible regions and generative law of one experiment.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub seed: u64,
    pub dataset: Dataset,
    pub law: CostLaw,
    /// One region for toy and shortest path; ten for knapsack.
    pub constraints: Vec<Constraints>,
    /// Knapsack price/budget pairs (empty otherwise).
    pub knapsack_sets: Vec<KnapsackSet>,
    /// Rows whose cost needed clamping at [`COST_CLAMP`].
    pub clamped_rows: usize,
}

impl ProblemInstance {
    pub fn kind(&self) -> ProblemKind {
        self.law.kind()
    }

    pub fn d(&self) -> usize {
        self.law.covariate_dim()
    }

    pub fn n(&self) -> usize {
        self.law.cost_dim()
    }

    /// Stream used for dataset rows.
    pub fn data_key(kind: ProblemKind, seed: u64) -> StreamKey {
        StreamKey::new(seed, &format!("{}/data", kind.name()))
    }

    /// Fresh dataset of `t` rows from the same law (Θ and constraints unchanged).
    pub fn resample(&self, t: usize, key: StreamKey) -> Dataset {
        self.law.generate(t, key).0
    }
}

/// Bernoulli(½) matrix with the last two columns zeroed.
pub(crate) fn bernoulli_theta(rows: usize, d: usize, key: StreamKey) -> Matrix {
    use rand::Rng as _;
    let mut rng = key.rng();
    let mut theta = Matrix::zeros(rows, d);
    for i in 0..rows {
        for j in 0..d {
            let bit = rng.random_bool(0.5);
            if j + 2 < d && bit {
                theta[(i, j)] = 1.0;
            }
        }
    }
    theta
}

pub(crate) fn check_live_dims(d: usize) -> Result<()> {
    if d < 3 {
        return Err(PtcError::ConfigInvalid(format!("d = {d}: need d >= 3 (two columns of Θ are zero)")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_round_trips_through_text() {
        for k in ProblemKind::ALL {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
        }
        assert!("unknown".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn theta_has_zero_tail_columns() {
        let th = bernoulli_theta(40, 6, StreamKey::new(1, "t"));
        for i in 0..40 {
            assert_eq!(th[(i, 4)], 0.0);
            assert_eq!(th[(i, 5)], 0.0);
        }
        let ones: f64 = th.as_slice().iter().sum();
        assert!(ones > 40.0 && ones < 120.0);
    }

    #[test]
    fn datasets_are_prefix_stable() {
        let law = CostLaw::Toy { d: 2 };
        let key = StreamKey::new(3, "x");
        let (small, _) = law.generate(5, key);
        let (big, _) = law.generate(50, key);
        assert_eq!(small.z.as_slice(), &big.z.as_slice()[..10]);
        assert_eq!(small.c.as_slice(), &big.c.as_slice()[..5]);
    }
}
