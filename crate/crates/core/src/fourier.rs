//! Power-of-two 2D FFT for the k-space artifact generators.
//!
//! Forward transforms are unnormalized; the inverse carries the
//! `1 / (W H)` factor.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::imgcore::Image2D;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage2D<T> {
    width: usize,
    height: usize,
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Real> ComplexImage2D<T> {
    pub fn new(width: usize, height: usize, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != width * height || im.len() != width * height {
            return Err(Error::invalid(format!(
                "complex raster of {width}x{height} got {} / {} values",
                re.len(),
                im.len()
            )));
        }
        Ok(Self {
            width,
            height,
            re,
            im,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            re: vec![T::zero(); width * height],
            im: vec![T::zero(); width * height],
        }
    }

    pub fn from_real(img: &Image2D<T>) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            re: img.data().to_vec(),
            im: vec![T::zero(); img.len()],
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

    pub fn re(&self) -> &[T] {
        &self.re
    }

    pub fn im(&self) -> &[T] {
        &self.im
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex<T> {
        let i = y * self.width + x;
        Complex::new(self.re[i], self.im[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Complex<T>) {
        let i = y * self.width + x;
        self.re[i] = v.re;
        self.im[i] = v.im;
    }

    pub fn magnitude(&self) -> Image2D<T> {
        let data = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| r.hypot(i))
            .collect();
        Image2D::new(self.width, self.height, data).expect("dims are consistent")
    }

    pub fn real_part(&self) -> Image2D<T> {
        Image2D::new(self.width, self.height, self.re.clone()).expect("dims are consistent")
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> T {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| r * r + i * i)
            .sum()
    }

    pub fn max_magnitude(&self) -> T {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| r.hypot(i))
            .fold(T::zero(), |m, v| m.max(v))
    }

    fn row(&self, y: usize) -> Vec<Complex<T>> {
        (0..self.width).map(|x| self.get(x, y)).collect()
    }

    fn column(&self, x: usize) -> Vec<Complex<T>> {
        (0..self.height).map(|y| self.get(x, y)).collect()
    }
}

fn check_pow2(width: usize, height: usize) -> Result<()> {
    if !width.is_power_of_two() || !height.is_power_of_two() {
        return Err(Error::invalid(format!(
            "FFT needs power-of-two dimensions, got {width}x{height}"
        )));
    }
    Ok(())
}

/// In-place iterative radix-2 decimation-in-time transform.
fn fft1d<T: Real>(buf: &mut [Complex<T>], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { T::one() } else { -T::one() };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        // Twiddles computed directly per index to avoid drift from repeated products.
        let twiddles: Vec<Complex<T>> = (0..half)
            .map(|k| {
                let angle = sign * T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(len);
                Complex::new(angle.cos(), angle.sin())
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn transform<T: Real>(k: &ComplexImage2D<T>, inverse: bool) -> Result<ComplexImage2D<T>> {
    let (w, h) = k.dims();
    check_pow2(w, h)?;
    let mut out = k.clone();
    for y in 0..h {
        let mut row = out.row(y);
        fft1d(&mut row, inverse);
        for (x, v) in row.into_iter().enumerate() {
            out.set(x, y, v);
        }
    }
    for x in 0..w {
        let mut col = out.column(x);
        fft1d(&mut col, inverse);
        for (y, v) in col.into_iter().enumerate() {
            out.set(x, y, v);
        }
    }
    if inverse {
        let scale = T::one() / T::from_usize_lossy(w * h);
        out.re.iter_mut().for_each(|v| *v *= scale);
        out.im.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// Unnormalized forward DFT.
pub fn fft2<T: Real>(k: &ComplexImage2D<T>) -> Result<ComplexImage2D<T>> {
    transform(k, false)
}

pub fn fft2_real<T: Real>(img: &Image2D<T>) -> Result<ComplexImage2D<T>> {
    transform(&ComplexImage2D::from_real(img), false)
}

/// Inverse DFT scaled by `1 / (W H)`.
pub fn ifft2<T: Real>(k: &ComplexImage2D<T>) -> Result<ComplexImage2D<T>> {
    transform(k, true)
}

/// Swap quadrants so that the DC term lands at `(W/2, H/2)`. Self-inverse
/// for even dimensions.
pub fn fftshift<T: Real>(k: &ComplexImage2D<T>) -> Result<ComplexImage2D<T>> {
    let (w, h) = k.dims();
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::invalid(format!(
            "fftshift needs even dimensions, got {w}x{h}"
        )));
    }
    let mut out = ComplexImage2D::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set((x + w / 2) % w, (y + h / 2) % h, k.get(x, y));
        }
    }
    Ok(out)
}
