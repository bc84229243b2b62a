use crate::error::{Error, Result};

use super::Real;

/// Dense row-major tensor. The leading dimension is the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn from_f64(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| T::of(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Shape without the batch dimension.
    pub fn sample_shape(&self) -> &[usize] {
        &self.shape[1.min(self.shape.len())..]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenates 2-D tensors along the feature axis.
    pub fn concat_features(parts: &[&Tensor<T>]) -> Result<Self> {
        let batch = parts.first().map_or(0, |p| p.batch());
        for p in parts {
            if p.shape.len() != 2 || p.batch() != batch {
                return Err(Error::Shape(format!(
                    "concat expects [{batch}, n] tensors, got {:?}",
                    p.shape
                )));
            }
        }
        let width: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut data = Vec::with_capacity(batch * width);
        for b in 0..batch {
            for p in parts {
                let w = p.shape[1];
                data.extend_from_slice(&p.data[b * w..(b + 1) * w]);
            }
        }
        Ok(Self {
            shape: vec![batch, width],
            data,
        })
    }

    /// Columns `[start, start + width)` of a 2-D tensor.
    pub fn slice_features(&self, start: usize, width: usize) -> Result<Self> {
        if self.shape.len() != 2 || start + width > self.shape[1] {
            return Err(Error::Shape(format!(
                "cannot take columns {start}..{} of {:?}",
                start + width,
                self.shape
            )));
        }
        let stride = self.shape[1];
        let batch = self.shape[0];
        let mut data = Vec::with_capacity(batch * width);
        for b in 0..batch {
            data.extend_from_slice(&self.data[b * stride + start..b * stride + start + width]);
        }
        Ok(Self {
            shape: vec![batch, width],
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f32>::new(vec![2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.sample_shape(), &[3]);
        assert!(t.clone().reshape(vec![3, 2]).is_ok());
        assert!(t.reshape(vec![4, 2]).is_err());
    }

    #[test]
    fn concat_then_slice_recovers_parts() {
        let a = Tensor::<f64>::from_f64(vec![2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::<f64>::from_f64(vec![2, 1], &[5.0, 6.0]).unwrap();
        let c = Tensor::concat_features(&[&a, &b]).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        assert_eq!(c.slice_features(0, 2).unwrap(), a);
        assert_eq!(c.slice_features(2, 1).unwrap(), b);
        assert!(c.slice_features(2, 2).is_err());
    }
}
