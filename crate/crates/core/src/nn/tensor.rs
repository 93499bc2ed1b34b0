use crate::error::{Error, Result};

/// Dense row-major array; the first axis is the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Values per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn item(&self, b: usize) -> &[f64] {
        let m = self.item_len();
        &self.data[b * m..(b + 1) * m]
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Stacks equally shaped items into a batch.
    pub fn stack(items: &[&[f64]], item_shape: &[usize]) -> Result<Self> {
        let m: usize = item_shape.iter().product();
        let mut data = Vec::with_capacity(items.len() * m);
        for it in items {
            if it.len() != m {
                return Err(Error::Dimension(format!(
                    "item of {} values, expected {m}",
                    it.len()
                )));
            }
            data.extend_from_slice(it);
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(item_shape);
        Ok(Tensor { shape, data })
    }
}
