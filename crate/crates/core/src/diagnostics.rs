//! Analysis tooling for sampling runs: convergence-radius ratios over the
//! buffered model outputs, PCA projection of trajectories to 2D, RMSE and
//! empirical convergence-order estimation.

use nalgebra::DMatrix;

use crate::error::DiagnosticsError;
use crate::sampler::Trajectory;

/// Per-step fraction of components whose estimated Taylor convergence
/// radius exceeds the step size.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Fraction of components satisfying the radius criterion, one entry
    /// per step that has two buffered outputs available.
    pub per_step_ratio: Vec<f64>,
    /// The step sizes the ratios were checked against.
    pub h_values: Vec<f64>,
}

/// Radius criterion over a trajectory's buffered model outputs.
///
/// `h` holds the per-step log-SNR increments, one per sampling step. At
/// step `i` the zeroth Taylor coefficient is the buffered output `Q_{i-1}`
/// and the first is the backward difference `(Q_{i-1} - Q_{i-2}) / h_{i-1}`,
/// the same difference the order-2 solvers use. A component converges when
/// `|c_0| / |c_1| > h_i`; components with `|c_1|` below the tolerance count
/// as convergent (infinite radius). The first step has no difference and is
/// skipped, so the report has one entry fewer than `h`.
pub fn convergence_ratio(
    traj: &Trajectory,
    h: &[f64],
    tol: f64,
) -> Result<ConvergenceReport, DiagnosticsError> {
    let outputs = &traj.model_outputs;
    if outputs.len() < 2 {
        return Err(DiagnosticsError::TooFew {
            what: "buffered model outputs",
            need: 2,
            got: outputs.len(),
        });
    }
    if h.len() != outputs.len() {
        return Err(DiagnosticsError::ShapeMismatch(format!(
            "expected one h per step ({}), got {}",
            outputs.len(),
            h.len()
        )));
    }
    if !h.iter().all(|&v| v > 0.0 && v.is_finite()) {
        return Err(DiagnosticsError::InvalidInput(
            "step sizes must be positive and finite".into(),
        ));
    }
    let dim = outputs[0].1.len();
    let mut per_step_ratio = Vec::with_capacity(outputs.len() - 1);
    let mut h_values = Vec::with_capacity(outputs.len() - 1);
    for i in 1..outputs.len() {
        let c0 = &outputs[i].1;
        let prev = &outputs[i - 1].1;
        let h_prev = h[i - 1];
        let h_cur = h[i];
        let c0_max = c0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol_eff = tol.max(1e-12 * c0_max);
        let mut convergent = 0usize;
        for d in 0..dim {
            let c1 = (c0[d] - prev[d]) / h_prev;
            if c1.abs() < tol_eff || c0[d].abs() / c1.abs() > h_cur {
                convergent += 1;
            }
        }
        per_step_ratio.push(convergent as f64 / dim as f64);
        h_values.push(h_cur);
    }
    Ok(ConvergenceReport {
        per_step_ratio,
        h_values,
    })
}

/// A trajectory reduced to its top-2 principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryProjection {
    pub points_2d: Vec<(f64, f64)>,
    /// Variance fractions of the two components, descending, each in [0,1].
    pub explained_variance: (f64, f64),
}

/// Orthonormal 2D basis fitted to a set of states.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// Two orthonormal direction vectors, by decreasing singular value,
    /// with the first nonzero loading of each made positive.
    pub directions: [Vec<f64>; 2],
    pub explained_variance: (f64, f64),
}

impl PcaBasis {
    /// Fit to row vectors (one state per row).
    pub fn fit(states: &[Vec<f64>]) -> Result<Self, DiagnosticsError> {
        let n = states.len();
        if n < 3 {
            return Err(DiagnosticsError::TooFew {
                what: "states",
                need: 3,
                got: n,
            });
        }
        let dim = states[0].len();
        if dim < 2 {
            return Err(DiagnosticsError::InvalidInput(
                "PCA projection needs dimension >= 2".into(),
            ));
        }
        if states.iter().any(|s| s.len() != dim) {
            return Err(DiagnosticsError::ShapeMismatch(
                "states have inconsistent dimensions".into(),
            ));
        }
        let mut mean = vec![0.0; dim];
        for s in states {
            for d in 0..dim {
                mean[d] += s[d];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let centered = DMatrix::from_fn(n, dim, |r, c| states[r][c] - mean[c]);
        let total: f64 = centered.iter().map(|v| v * v).sum();
        if total < 1e-300 {
            // all states identical
            return Ok(Self {
                mean,
                directions: [unit(dim, 0), unit(dim, 1)],
                explained_variance: (0.0, 0.0),
            });
        }
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let sv = &svd.singular_values;
        let mut directions: [Vec<f64>; 2] = [unit(dim, 0), unit(dim, 1)];
        for k in 0..2 {
            if k < v_t.nrows() {
                let mut dir: Vec<f64> = (0..dim).map(|d| v_t[(k, d)]).collect();
                if let Some(first) = dir.iter().find(|v| v.abs() > 1e-12) {
                    if *first < 0.0 {
                        for v in &mut dir {
                            *v = -*v;
                        }
                    }
                }
                directions[k] = dir;
            }
        }
        let var = |k: usize| {
            if k < sv.len() {
                sv[k] * sv[k] / total
            } else {
                0.0
            }
        };
        Ok(Self {
            mean,
            directions,
            explained_variance: (var(0), var(1)),
        })
    }

    pub fn project_one(&self, x: &[f64]) -> (f64, f64) {
        let dot = |dir: &[f64]| {
            x.iter()
                .zip(dir)
                .zip(&self.mean)
                .map(|((&xi, &ui), &mi)| (xi - mi) * ui)
                .sum::<f64>()
        };
        (dot(&self.directions[0]), dot(&self.directions[1]))
    }
}

fn unit(dim: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[k] = 1.0;
    v
}

/// Project a trajectory's states onto their own top-2 principal directions.
pub fn pca_project(traj: &Trajectory) -> Result<TrajectoryProjection, DiagnosticsError> {
    let states: Vec<Vec<f64>> = traj.states.iter().map(|(_, x)| x.clone()).collect();
    let basis = PcaBasis::fit(&states)?;
    let degenerate = basis.explained_variance == (0.0, 0.0);
    let points_2d = states
        .iter()
        .map(|x| {
            if degenerate {
                (0.0, 0.0)
            } else {
                basis.project_one(x)
            }
        })
        .collect();
    Ok(TrajectoryProjection {
        points_2d,
        explained_variance: basis.explained_variance,
    })
}

/// Least-squares slope of `log(err)` against `log(1/nfe)`.
pub fn empirical_order(errors: &[(usize, f64)]) -> Result<f64, DiagnosticsError> {
    if errors.len() < 3 {
        return Err(DiagnosticsError::TooFew {
            what: "(nfe, err) pairs",
            need: 3,
            got: errors.len(),
        });
    }
    if errors.iter().any(|&(nfe, err)| nfe == 0 || !(err > 0.0)) {
        return Err(DiagnosticsError::InvalidInput(
            "errors must be positive and nfe nonzero".into(),
        ));
    }
    let n = errors.len() as f64;
    let xs: Vec<f64> = errors.iter().map(|&(nfe, _)| -(nfe as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|&(_, err)| err.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(&x, &y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|&x| (x - xm) * (x - xm)).sum();
    if den == 0.0 {
        return Err(DiagnosticsError::InvalidInput(
            "need at least two distinct nfe values".into(),
        ));
    }
    Ok(num / den)
}

/// Root-mean-square difference between two equal-length vectors.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64, DiagnosticsError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(DiagnosticsError::ShapeMismatch(format!(
            "vector lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// RMSE over all states of two trajectories with identical shapes.
pub fn rmse_trajectories(a: &Trajectory, b: &Trajectory) -> Result<f64, DiagnosticsError> {
    if a.states.len() != b.states.len() {
        return Err(DiagnosticsError::ShapeMismatch(format!(
            "state counts {} and {}",
            a.states.len(),
            b.states.len()
        )));
    }
    let flat_a: Vec<f64> = a.states.iter().flat_map(|(_, x)| x.iter().copied()).collect();
    let flat_b: Vec<f64> = b.states.iter().flat_map(|(_, x)| x.iter().copied()).collect();
    rmse(&flat_a, &flat_b)
}
