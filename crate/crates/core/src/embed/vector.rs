use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("non-finite vector component")]
    NonFinite,
}

/// An embedding with its Euclidean norm cached. Stored unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, VectorError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite);
        }
        let norm = values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        Ok(EmbeddingVector { values, norm })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self, VectorError> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dot(&self, other: &EmbeddingVector) -> Result<f64, VectorError> {
        if self.dim() != other.dim() {
            return Err(VectorError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum())
    }

    /// Copy scaled by a positive factor.
    pub fn scaled(&self, factor: f32) -> Result<Self, VectorError> {
        Self::new(self.values.iter().map(|v| v * factor).collect())
    }
}

/// Cosine similarity `x·y / (‖x‖‖y‖)`, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    let dot = a.dot(b)?;
    if a.norm == 0.0 || b.norm == 0.0 {
        return Err(VectorError::ZeroNorm);
    }
    Ok((dot / (a.norm * b.norm)).clamp(-1.0, 1.0))
}
