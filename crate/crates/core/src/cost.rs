//! Cost matrices and the minimum-expected-cost decision rule.
//!
//! The entry convention is C(i, j) = cost of predicting class `i` when the
//! true class is `j`: predictions index rows, truth indexes columns. The
//! published KDD table is laid out the other way around (rows = actual) and
//! is transposed on construction.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::ClassLabel;
use crate::linalg::Mat;
use crate::scalar::Real;

/// k x k cost matrix with rows indexed by prediction and columns by truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix<R> {
    entries: Mat<R>,
}

impl<R: Real> CostMatrix<R> {
    /// Validates the standard structure: square, finite, zero diagonal,
    /// non-negative off-diagonal entries.
    pub fn new(entries: Mat<R>) -> Result<Self> {
        let cm = Self::new_relaxed(entries)?;
        for i in 0..cm.k() {
            if cm.get(i, i) != R::zero() {
                return Err(Error::InvalidCostMatrix(format!(
                    "diagonal entry ({i},{i}) is {}, expected 0",
                    cm.get(i, i)
                )));
            }
            for j in 0..cm.k() {
                if cm.get(i, j) < R::zero() {
                    return Err(Error::InvalidCostMatrix(format!(
                        "entry ({i},{j}) is negative"
                    )));
                }
            }
        }
        Ok(cm)
    }

    /// Only checks squareness and finiteness; for nonstandard matrices.
    pub fn new_relaxed(entries: Mat<R>) -> Result<Self> {
        if entries.rows() != entries.cols() || entries.rows() == 0 {
            return Err(Error::InvalidCostMatrix(format!(
                "expected a nonempty square matrix, got {}x{}",
                entries.rows(),
                entries.cols()
            )));
        }
        if !entries.iter_all_finite() {
            return Err(Error::InvalidCostMatrix("non-finite entry".to_string()));
        }
        Ok(CostMatrix { entries })
    }

    pub fn k(&self) -> usize {
        self.entries.rows()
    }

    /// C(prediction, truth).
    pub fn get(&self, prediction: usize, truth: usize) -> R {
        self.entries.get(prediction, truth)
    }

    pub fn entries(&self) -> &Mat<R> {
        &self.entries
    }

    /// Swaps the prediction/truth axes.
    pub fn transposed(&self) -> Self {
        CostMatrix {
            entries: self.entries.transposed(),
        }
    }

    /// Scales every entry by `factor`.
    pub fn scaled(&self, factor: R) -> Self {
        let mut entries = self.entries.clone();
        for v in entries.data_mut() {
            *v *= factor;
        }
        CostMatrix { entries }
    }

    /// Writes the matrix as CSV rows preceded by a header line naming the
    /// axis convention.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "# cost-matrix rows=prediction cols=truth")?;
        for r in 0..self.k() {
            let line: Vec<String> = self
                .entries
                .row(r)
                .iter()
                .map(|v| format!("{}", v.as_f64()))
                .collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Loads a matrix saved by [`CostMatrix::save`]. Validates the standard
    /// structure unless `allow_nonstandard` is set.
    pub fn load(path: &Path, allow_nonstandard: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows: Vec<Vec<R>> = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                saw_header = true;
                continue;
            }
            let row: Result<Vec<R>> = line
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map(R::of).map_err(|_| {
                        Error::InvalidCostMatrix(format!("line {}: cannot parse {cell:?}", idx + 1))
                    })
                })
                .collect();
            rows.push(row?);
        }
        if !saw_header {
            return Err(Error::InvalidCostMatrix(
                "missing `# cost-matrix rows=prediction cols=truth` header".to_string(),
            ));
        }
        let k = rows.len();
        let mut data = Vec::with_capacity(k * k);
        for row in &rows {
            if row.len() != k {
                return Err(Error::InvalidCostMatrix(format!(
                    "expected {k} columns per row, found {}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        let entries = Mat::from_rows(k, k, data);
        if allow_nonstandard {
            Self::new_relaxed(entries)
        } else {
            Self::new(entries)
        }
    }
}

/// Length-k posterior P(Y = j | X = x). Components are validated to lie in
/// [0, 1] and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPosterior<R> {
    p: Vec<R>,
}

impl<R: Real> ClassPosterior<R> {
    pub fn new(p: Vec<R>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyInput("posterior"));
        }
        let tol = R::probability_tolerance();
        let mut sum = R::zero();
        for &v in &p {
            if !v.is_finite() || v < -tol || v > R::one() + tol {
                return Err(Error::InvalidParameter {
                    name: "posterior",
                    reason: format!("component {v} outside [0, 1]"),
                });
            }
            sum += v;
        }
        if (sum - R::one()).abs() > tol {
            return Err(Error::InvalidParameter {
                name: "posterior",
                reason: format!("components sum to {sum}, expected 1"),
            });
        }
        Ok(ClassPosterior { p })
    }

    pub fn uniform(k: usize) -> Self {
        ClassPosterior {
            p: vec![R::one() / R::of_usize(k); k],
        }
    }

    /// Point mass on class `i`.
    pub fn point_mass(k: usize, i: usize) -> Self {
        let mut p = vec![R::zero(); k];
        p[i] = R::one();
        ClassPosterior { p }
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn probs(&self) -> &[R] {
        &self.p
    }

    /// Index of the largest component; ties broken by lowest index.
    pub fn arg_max(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.p.iter().enumerate().skip(1) {
            if v > self.p[best] {
                best = i;
            }
        }
        best
    }
}

/// Outcome of the minimum-expected-cost rule, with the per-class losses kept
/// for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision<R> {
    pub chosen: usize,
    pub losses: Vec<R>,
}

/// Expected cost of deciding class `i`: sum over j of p[j] * C(i, j).
pub fn expected_loss<R: Real>(
    posterior: &ClassPosterior<R>,
    cm: &CostMatrix<R>,
    i: usize,
) -> Result<R> {
    if posterior.k() != cm.k() {
        return Err(Error::DimensionMismatch {
            expected: cm.k(),
            found: posterior.k(),
        });
    }
    if i >= cm.k() {
        return Err(Error::InvalidParameter {
            name: "class index",
            reason: format!("{i} out of range 0..{}", cm.k()),
        });
    }
    let mut acc = R::zero();
    for (j, &pj) in posterior.probs().iter().enumerate() {
        acc += pj * cm.get(i, j);
    }
    Ok(acc)
}

/// Picks the class minimizing expected cost; ties broken by lowest index.
pub fn decide<R: Real>(posterior: &ClassPosterior<R>, cm: &CostMatrix<R>) -> Result<Decision<R>> {
    if posterior.k() != cm.k() {
        return Err(Error::DimensionMismatch {
            expected: cm.k(),
            found: posterior.k(),
        });
    }
    let mut losses = Vec::with_capacity(cm.k());
    for i in 0..cm.k() {
        losses.push(expected_loss(posterior, cm, i)?);
    }
    let mut chosen = 0;
    for (i, &l) in losses.iter().enumerate().skip(1) {
        if l < losses[chosen] {
            chosen = i;
        }
    }
    Ok(Decision { chosen, losses })
}

/// The published 5x5 traffic cost table, re-expressed with prediction rows.
pub fn kdd_cost_matrix<R: Real>() -> CostMatrix<R> {
    // As published (rows = actual, columns = predicted):
    //            Normal Probe DoS U2R R2L
    //   Normal     0     1    2   2   2
    //   Probe      1     0    2   2   2
    //   DoS        2     1    0   2   2
    //   U2R        3     2    2   0   2
    //   R2L        4     2    2   2   0
    const PUBLISHED: [[f64; 5]; 5] = [
        [0.0, 1.0, 2.0, 2.0, 2.0],
        [1.0, 0.0, 2.0, 2.0, 2.0],
        [2.0, 1.0, 0.0, 2.0, 2.0],
        [3.0, 2.0, 2.0, 0.0, 2.0],
        [4.0, 2.0, 2.0, 2.0, 0.0],
    ];
    let k = ClassLabel::COUNT;
    let mut entries = Mat::zeros(k, k);
    for (actual, row) in PUBLISHED.iter().enumerate() {
        for (predicted, &cost) in row.iter().enumerate() {
            entries.set(predicted, actual, R::of(cost));
        }
    }
    CostMatrix { entries }
}

/// Parametric 5x5 matrix: predicting Normal on an attack (a false negative)
/// costs `alpha`, flagging a normal record as any attack costs 1, and
/// attack-vs-attack confusions are free.
pub fn alpha_cost_matrix<R: Real>(alpha: R) -> Result<CostMatrix<R>> {
    if !alpha.is_finite() || alpha < R::zero() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be a finite non-negative value, got {alpha}"),
        });
    }
    let k = ClassLabel::COUNT;
    let normal = ClassLabel::Normal.index();
    let mut entries = Mat::zeros(k, k);
    for attack in 0..k {
        if attack == normal {
            continue;
        }
        entries.set(normal, attack, alpha);
        entries.set(attack, normal, R::one());
    }
    Ok(CostMatrix { entries })
}

/// 2x2 matrix (class 0 = normal, class 1 = attack) whose empirical expected
/// cost on a labeled set with priors (`p_normal`, `p_attack`) equals
/// FA - k*DR + k: false alarms cost 1/p_normal, misses cost k/p_attack.
pub fn tradeoff_cost_matrix<R: Real>(k: R, p_normal: R, p_attack: R) -> Result<CostMatrix<R>> {
    if !k.is_finite() || k <= R::zero() {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "trade-off weight must be positive".to_string(),
        });
    }
    if !p_normal.is_finite()
        || !p_attack.is_finite()
        || p_normal <= R::zero()
        || p_attack <= R::zero()
    {
        return Err(Error::InvalidParameter {
            name: "priors",
            reason: "both class priors must be positive".to_string(),
        });
    }
    if ((p_normal + p_attack) - R::one()).abs() > R::probability_tolerance() {
        return Err(Error::InvalidParameter {
            name: "priors",
            reason: format!("priors sum to {}", p_normal + p_attack),
        });
    }
    let mut entries = Mat::zeros(2, 2);
    // Row = prediction, column = truth.
    entries.set(1, 0, R::one() / p_normal); // false alarm
    entries.set(0, 1, k / p_attack); // missed attack
    Ok(CostMatrix { entries })
}

/// The 0/1 matrix of a given size: expected cost equals error probability,
/// so the decision rule reduces to the posterior arg-max.
pub fn zero_one_cost_matrix<R: Real>(k: usize) -> CostMatrix<R> {
    let mut entries = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                entries.set(i, j, R::one());
            }
        }
    }
    CostMatrix { entries }
}
