//! Containers for the linear model `yᵢ = ⟨Xᵢ, truth⟩ + ξᵢ`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Sparse-regression data: rows of `design` are the covariate vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorProblem {
    design: Matrix,
    responses: Vector,
    truth: Option<Vector>,
}

/// Low-rank regression data. Measurement matrices are stored stacked, one
/// row-major flattened `d1×d2` matrix per row of an `n × d1·d2` array.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProblem {
    d1: usize,
    d2: usize,
    design: Matrix,
    responses: Vector,
    truth: Option<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthError {
    pub absolute: f64,
    pub relative: f64,
}

fn all_finite<'a>(it: impl IntoIterator<Item = &'a f64>) -> bool {
    it.into_iter().all(|x| x.is_finite())
}

impl VectorProblem {
    pub fn new(design: Matrix, responses: Vector, truth: Option<Vector>) -> Result<Self> {
        let (n, d) = design.shape();
        if n == 0 || d == 0 {
            return Err(Error::input("design must have at least one row and column"));
        }
        if responses.len() != n {
            return Err(Error::param(format!(
                "{} responses for {n} design rows",
                responses.len()
            )));
        }
        if let Some(t) = &truth {
            if t.len() != d {
                return Err(Error::param(format!("truth has {} entries, expected {d}", t.len())));
            }
        }
        if !all_finite(design.iter()) || !all_finite(responses.iter()) {
            return Err(Error::input("design and responses must be finite"));
        }
        if truth.as_ref().is_some_and(|t| !all_finite(t.iter())) {
            return Err(Error::input("truth must be finite"));
        }
        Ok(Self {
            design,
            responses,
            truth,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn responses(&self) -> &Vector {
        &self.responses
    }

    pub fn truth(&self) -> Option<&Vector> {
        self.truth.as_ref()
    }

    pub fn without_truth(mut self) -> Self {
        self.truth = None;
        self
    }

    /// A copy whose rows are restricted to `rows` (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n()) {
            return Err(Error::param(format!("row {bad} out of range")));
        }
        let design = self.design.select_rows(rows);
        let responses = Vector::from_iterator(rows.len(), rows.iter().map(|&i| self.responses[i]));
        Self::new(design, responses, self.truth.clone())
    }

    fn check_dim(&self, beta: &Vector) -> Result<()> {
        if beta.len() != self.dim() {
            return Err(Error::param(format!(
                "estimate has {} entries, problem dimension is {}",
                beta.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `uᵢ = yᵢ − ⟨β, Xᵢ⟩`.
    pub fn residuals(&self, beta: &Vector) -> Result<Vector> {
        self.check_dim(beta)?;
        Ok(&self.responses - &self.design * beta)
    }

    pub fn error_to_truth(&self, beta: &Vector) -> Result<TruthError> {
        self.check_dim(beta)?;
        let truth = self
            .truth
            .as_ref()
            .ok_or_else(|| Error::State("problem has no ground truth".into()))?;
        let absolute = (beta - truth).norm();
        Ok(TruthError {
            absolute,
            relative: absolute / truth.norm(),
        })
    }
}

pub(crate) fn flatten_row_major(m: &Matrix) -> Vector {
    Vector::from_iterator(m.len(), m.transpose().iter().copied())
}

pub(crate) fn unflatten_row_major(v: &[f64], d1: usize, d2: usize) -> Matrix {
    Matrix::from_row_slice(d1, d2, v)
}

impl MatrixProblem {
    /// Builds a problem from individual measurement matrices.
    pub fn from_measurements(
        measurements: &[Matrix],
        responses: Vector,
        truth: Option<Matrix>,
    ) -> Result<Self> {
        let first = measurements
            .first()
            .ok_or_else(|| Error::input("at least one measurement is required"))?;
        let (d1, d2) = first.shape();
        let mut design = Matrix::zeros(measurements.len(), d1 * d2);
        for (i, x) in measurements.iter().enumerate() {
            if x.shape() != (d1, d2) {
                return Err(Error::param(format!(
                    "measurement {i} is {}x{}, expected {d1}x{d2}",
                    x.nrows(),
                    x.ncols()
                )));
            }
            design.row_mut(i).copy_from(&flatten_row_major(x).transpose());
        }
        Self::from_stacked(d1, d2, design, responses, truth)
    }

    /// Builds a problem from an `n × d1·d2` array of row-major flattened
    /// measurements.
    pub fn from_stacked(
        d1: usize,
        d2: usize,
        design: Matrix,
        responses: Vector,
        truth: Option<Matrix>,
    ) -> Result<Self> {
        let n = design.nrows();
        if n == 0 || d1 == 0 || d2 == 0 {
            return Err(Error::input("need at least one measurement of nonzero size"));
        }
        if design.ncols() != d1 * d2 {
            return Err(Error::param(format!(
                "stacked design has {} columns, expected {}",
                design.ncols(),
                d1 * d2
            )));
        }
        if responses.len() != n {
            return Err(Error::param(format!("{} responses for {n} measurements", responses.len())));
        }
        if let Some(t) = &truth {
            if t.shape() != (d1, d2) {
                return Err(Error::param("truth shape differs from measurement shape"));
            }
            if !all_finite(t.iter()) {
                return Err(Error::input("truth must be finite"));
            }
        }
        if !all_finite(design.iter()) || !all_finite(responses.iter()) {
            return Err(Error::input("measurements and responses must be finite"));
        }
        Ok(Self {
            d1,
            d2,
            design,
            responses,
            truth,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn stacked_design(&self) -> &Matrix {
        &self.design
    }

    pub fn measurement(&self, i: usize) -> Matrix {
        let row: Vec<f64> = self.design.row(i).iter().copied().collect();
        unflatten_row_major(&row, self.d1, self.d2)
    }

    pub fn responses(&self) -> &Vector {
        &self.responses
    }

    pub fn truth(&self) -> Option<&Matrix> {
        self.truth.as_ref()
    }

    pub fn without_truth(mut self) -> Self {
        self.truth = None;
        self
    }

    fn check_shape(&self, m: &Matrix) -> Result<()> {
        if m.shape() != (self.d1, self.d2) {
            return Err(Error::param(format!(
                "estimate is {}x{}, problem is {}x{}",
                m.nrows(),
                m.ncols(),
                self.d1,
                self.d2
            )));
        }
        Ok(())
    }

    /// `uᵢ = yᵢ − ⟨M, Xᵢ⟩`.
    pub fn residuals(&self, m: &Matrix) -> Result<Vector> {
        self.check_shape(m)?;
        Ok(&self.responses - &self.design * flatten_row_major(m))
    }

    /// `Σ wᵢ Xᵢ`.
    pub fn adjoint(&self, weights: &Vector) -> Matrix {
        let flat = self.design.tr_mul(weights);
        unflatten_row_major(flat.as_slice(), self.d1, self.d2)
    }

    pub fn error_to_truth(&self, m: &Matrix) -> Result<TruthError> {
        self.check_shape(m)?;
        let truth = self
            .truth
            .as_ref()
            .ok_or_else(|| Error::State("problem has no ground truth".into()))?;
        let absolute = (m - truth).norm();
        Ok(TruthError {
            absolute,
            relative: absolute / truth.norm(),
        })
    }
}

/// Mean absolute prediction error of `beta` on the `test` rows.
pub fn holdout_mae(train: &VectorProblem, test: &VectorProblem, beta: &Vector) -> Result<f64> {
    if train.dim() != test.dim() {
        return Err(Error::param(format!(
            "train has {} features, test has {}",
            train.dim(),
            test.dim()
        )));
    }
    let r = test.residuals(beta)?;
    Ok(r.iter().map(|u| u.abs()).sum::<f64>() / test.n() as f64)
}
