use crate::error::{Error, Result};

/// Scalar (1 component) or vector (2 components) values at mesh nodes,
/// interleaved per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    components: usize,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || components > 2 {
            return Err(Error::InvalidParameter(format!(
                "field must have 1 or 2 components, got {components}"
            )));
        }
        if !values.len().is_multiple_of(components) {
            return Err(Error::DimensionMismatch {
                expected: values.len() / components * components,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite field value at entry {i}"
            )));
        }
        Ok(Self { components, values })
    }

    pub fn zeros(n_nodes: usize, components: usize) -> Self {
        Self {
            components,
            values: vec![0.0; n_nodes * components],
        }
    }

    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn from_fn_scalar(nodes: &[[f64; 2]], f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            components: 1,
            values: nodes.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn from_fn_vector(nodes: &[[f64; 2]], f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self {
            components: 2,
            values: nodes.iter().flat_map(|&p| f(p)).collect(),
        }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn vector(&self, node: usize) -> [f64; 2] {
        debug_assert_eq!(self.components, 2);
        [self.values[2 * node], self.values[2 * node + 1]]
    }

    pub fn set_vector(&mut self, node: usize, v: [f64; 2]) {
        debug_assert_eq!(self.components, 2);
        self.values[2 * node] = v[0];
        self.values[2 * node + 1] = v[1];
    }

    pub fn axpy(&mut self, a: f64, other: &NodalField) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (y, x) in self.values.iter_mut().zip(&other.values) {
            *y += a * x;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            components: self.components,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest Euclidean norm over nodes.
    pub fn max_norm(&self) -> f64 {
        self.values
            .chunks(self.components)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
