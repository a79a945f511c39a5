use crate::error::{Error, Result};
use crate::measure::FeatureSpace;

/// Default cap on dense tables and exhaustive enumerations (2²⁰ states).
pub const DEFAULT_DENSE_LIMIT: usize = 1 << 20;

/// A real-valued function on the states of a [`FeatureSpace`].
///
/// `value` is only called with states that passed [`FeatureSpace::check_state`].
pub trait Predictor: Sync {
    fn space(&self) -> &FeatureSpace;

    fn value(&self, x: &[usize]) -> f64;

    /// The full value table in mixed-radix order, when the predictor already holds one.
    fn dense_values(&self) -> Option<&[f64]> {
        None
    }
}

/// A predictor given by its full value table.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePredictor {
    space: FeatureSpace,
    values: Vec<f64>,
}

impl DensePredictor {
    pub fn new(space: FeatureSpace, values: Vec<f64>) -> Result<Self> {
        match space.size() {
            Some(len) if len == values.len() => Ok(DensePredictor { space, values }),
            _ => Err(Error::Dimension(format!(
                "table of length {} for a space of {} states",
                values.len(),
                space.total_states()
            ))),
        }
    }

    /// Tabulates `f` over every state.
    pub fn from_fn(space: FeatureSpace, limit: usize, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let len = space.dense_len(limit)?;
        let mut x = vec![0; space.n()];
        let values = (0..len)
            .map(|idx| {
                space.decode_into(idx, &mut x);
                f(&x)
            })
            .collect();
        Ok(DensePredictor { space, values })
    }

    /// Tabulates any predictor, reusing its table when it has one.
    pub fn materialize(p: &dyn Predictor, limit: usize) -> Result<Self> {
        if let Some(v) = p.dense_values() {
            return DensePredictor::new(p.space().clone(), v.to_vec());
        }
        DensePredictor::from_fn(p.space().clone(), limit, |x| p.value(x))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Predictor for DensePredictor {
    fn space(&self) -> &FeatureSpace {
        &self.space
    }

    fn value(&self, x: &[usize]) -> f64 {
        self.values[self.space.index_unchecked(x)]
    }

    fn dense_values(&self) -> Option<&[f64]> {
        Some(&self.values)
    }
}

impl<F> Predictor for (FeatureSpace, F)
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    fn space(&self) -> &FeatureSpace {
        &self.0
    }

    fn value(&self, x: &[usize]) -> f64 {
        (self.1)(x)
    }
}
