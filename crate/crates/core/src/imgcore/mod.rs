//! Raster types and pixel-level utilities.
//!
//! Pixel `(x, y)` sits at continuous coordinate `(x, y)`; `x` indexes
//! columns and `y` rows. Data is stored row-major.

mod filter;
pub mod io;
mod mask;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use filter::{bilinear_sample, convolve2d_separable, gaussian_kernel, reflect_index};
pub use mask::{erode_mask, foreground_mask, Mask2D};

/// Row-major grayscale raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> Image2D<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "raster of {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pixelwise combination of two equally sized images.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    pub fn min_max(&self) -> (T, T) {
        self.data
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> T {
        let n = T::from_usize_lossy(self.data.len());
        self.data.iter().copied().sum::<T>() / n
    }

    /// Population variance.
    pub fn variance(&self) -> T {
        let m = self.mean();
        let n = T::from_usize_lossy(self.data.len());
        self.data.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / n
    }

    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .sum())
    }

    pub fn l2_distance(&self, other: &Self) -> Result<T> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |m, d| m.max(d)))
    }

    pub fn cast<U: Real>(&self) -> Image2D<U> {
        Image2D {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&v| U::lit(v.to_f64_lossy()))
                .collect(),
        }
    }
}

/// Affine rescale to [0, 1]. A constant image maps to all zeros.
pub fn normalize_minmax<T: Real>(img: &Image2D<T>) -> Image2D<T> {
    let (lo, hi) = img.min_max();
    let range = hi - lo;
    if !(range > T::zero()) {
        return Image2D::zeros(img.width, img.height);
    }
    img.map(|v| (v - lo) / range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        let img = Image2D::new(3, 1, vec![0.2f64, 0.4, 0.6]).unwrap();
        let out = normalize_minmax(&img);
        for (a, b) in out.data().iter().zip([0.0, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }

        let flat = Image2D::new(2, 1, vec![0.7, 0.7]).unwrap();
        assert_eq!(normalize_minmax(&flat).data(), &[0.0, 0.0]);

        let unit = Image2D::new(4, 1, vec![0.0, 0.25, 1.0, 0.5]).unwrap();
        assert_eq!(normalize_minmax(&unit), unit);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(Image2D::<f64>::new(3, 3, vec![0.0; 8]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let img = Image2D::<f32>::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(normalize_minmax(&img).data(), &[0.0, 0.5, 1.0]);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(data in proptest::collection::vec(-5.0f64..5.0, 12)) {
            let img = Image2D::new(4, 3, data).unwrap();
            let once = normalize_minmax(&img);
            let twice = normalize_minmax(&once);
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
