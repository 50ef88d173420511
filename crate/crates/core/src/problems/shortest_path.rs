use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{bernoulli_theta, check_live_dims, CostLaw, ProblemInstance, ProblemKind, COST_CLAMP};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::rng::{Rng, StreamKey};
use crate::robust::Constraints;

/// Nodes per grid side.
pub const GRID_SIDE: usize = 5;
/// Right and down edges of the 5×5 grid.
pub const SP_EDGES: usize = 2 * GRID_SIDE * (GRID_SIDE - 1);

/// Directed edges `(tail, head)`; nodes are numbered row-major and each
/// node contributes its right edge, then its down edge.
pub fn grid_edges() -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(SP_EDGES);
    for r in 0..GRID_SIDE {
        for c in 0..GRID_SIDE {
            let v = r * GRID_SIDE + c;
            if c + 1 < GRID_SIDE {
                edges.push((v, v + 1));
            }
            if r + 1 < GRID_SIDE {
                edges.push((v, v + GRID_SIDE));
            }
        }
    }
    edges
}

/// Node-arc incidence system: `+1` at the tail, `−1` at the head; one unit
/// of flow leaves the top-left node and enters the bottom-right one.
pub fn shortest_path_constraints() -> (Matrix, Vec<f64>) {
    let nodes = GRID_SIDE * GRID_SIDE;
    let mut a = Matrix::zeros(nodes, SP_EDGES);
    for (e, (tail, head)) in grid_edges().into_iter().enumerate() {
        a[(tail, e)] = 1.0;
        a[(head, e)] = -1.0;
    }
    let mut b = vec![0.0; nodes];
    b[0] = 1.0;
    b[nodes - 1] = -1.0;
    (a, b)
}

pub(super) fn sample_z(d: usize, rng: &mut Rng) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

pub(super) fn mean_factor(theta: &Matrix, z: &[f64]) -> Vec<f64> {
    let s = (theta.cols() as f64).sqrt();
    theta.matvec(z).into_iter().map(|u| (u / s + 3.0).powi(5) + 1.0).collect()
}

pub(super) fn sample_c(theta: &Matrix, z: &[f64], rng: &mut Rng) -> (Vec<f64>, bool) {
    let mut clamped = false;
    let c = mean_factor(theta, z)
        .into_iter()
        .map(|m| {
            let v = m * rng.random_range(0.75..=1.25);
            if v < COST_CLAMP {
                clamped = true;
                COST_CLAMP
            } else {
                v
            }
        })
        .collect();
    (c, clamped)
}

/// Grid shortest path with `T` samples and `d ≥ 3` Gaussian covariates.
pub fn gen_shortest_path(t: usize, d: usize, seed: u64) -> Result<ProblemInstance> {
    check_live_dims(d)?;
    let theta = bernoulli_theta(SP_EDGES, d, StreamKey::new(seed, "shortest-path/theta"));
    let law = CostLaw::ShortestPath { theta };
    let (dataset, clamped_rows) = law.generate(t, ProblemInstance::data_key(ProblemKind::ShortestPath, seed));
    let (a, b) = shortest_path_constraints();
    Ok(ProblemInstance {
        seed,
        dataset,
        law,
        constraints: vec![Constraints::standard(a, b)?],
        knapsack_sets: Vec::new(),
        clamped_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::solve_lp_simplex;

    #[test]
    fn incidence_structure() {
        let (a, b) = shortest_path_constraints();
        assert_eq!((a.rows(), a.cols()), (25, 40));
        for e in 0..40 {
            let col = a.column(e);
            assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(col.iter().filter(|&&v| v == -1.0).count(), 1);
            assert_eq!(col.iter().sum::<f64>(), 0.0);
        }
        assert_eq!(b.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn unit_costs_give_eight() {
        let (a, b) = shortest_path_constraints();
        let sol = solve_lp_simplex(&crate::simplex::LpProblem::new(vec![1.0; 40], a, b).unwrap()).unwrap();
        assert!((sol.value - 8.0).abs() < 1e-9);
    }

    #[test]
    fn tail_covariates_do_not_matter() {
        let inst = gen_shortest_path(20, 5, 4).unwrap();
        let th = inst.law.theta().unwrap();
        let z = [0.3, -1.0, 0.5, 2.0, -7.0];
        let swapped = [0.3, -1.0, 0.5, -7.0, 9.0];
        assert_eq!(th.matvec(&z), th.matvec(&swapped));
        assert!(inst.dataset.c.as_slice().iter().all(|&c| c >= COST_CLAMP));
        assert!(gen_shortest_path(5, 2, 0).is_err());
    }
}
