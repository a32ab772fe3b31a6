use super::Image2D;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mirror an out-of-range index back into `0..n` without repeating the
/// edge sample (`... c b | a b c ... | y z y ...`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Discrete Gaussian truncated at radius `ceil(3 sigma)`, normalized to sum 1.
pub fn gaussian_kernel<T: Real>(sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (T::lit(3.0) * sigma).ceil().to_usize().unwrap_or(0) as isize;
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let mut k: Vec<T> = (-radius..=radius)
        .map(|i| {
            let x = T::lit(i as f64);
            (-(x * x) / two_s2).exp()
        })
        .collect();
    let total: T = k.iter().copied().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Row pass then column pass with reflect padding.
pub fn convolve2d_separable<T: Real>(img: &Image2D<T>, kernel: &[T]) -> Result<Image2D<T>> {
    let (w, h) = img.dims();
    if kernel.is_empty() || kernel.len() % 2 == 0 {
        return Err(Error::invalid("kernel length must be odd"));
    }
    if kernel.len() > 2 * w.min(h) {
        return Err(Error::invalid(format!(
            "kernel of length {} too long for a {w}x{h} image",
            kernel.len()
        )));
    }
    let r = (kernel.len() / 2) as isize;
    let src = img.data();

    let mut rows = vec![T::zero(); w * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &kv) in kernel.iter().enumerate() {
                let xi = reflect_index(x as isize + k as isize - r, w);
                acc += kv * line[xi];
            }
            rows[y * w + x] = acc;
        }
    }

    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let yi = reflect_index(y as isize + k as isize - r, h);
            let src_row = &rows[yi * w..(yi + 1) * w];
            let dst_row = &mut out[y * w..(y + 1) * w];
            for (d, &s) in dst_row.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    Image2D::new(w, h, out)
}

/// Bilinear interpolation; coordinates outside the frame clamp to the edge.
pub fn bilinear_sample<T: Real>(img: &Image2D<T>, x: T, y: T) -> T {
    let (w, h) = img.dims();
    let max_x = T::from_usize_lossy(w - 1);
    let max_y = T::from_usize_lossy(h - 1);
    let x = x.max(T::zero()).min(max_x);
    let y = y.max(T::zero()).min(max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0.to_usize().unwrap_or(0);
    let y0 = y0.to_usize().unwrap_or(0);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let one = T::one();
    let top = img.get(x0, y0) * (one - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (one - fx) + img.get(x1, y1) * fx;
    top * (one - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_image(w: usize, h: usize, seed: u64) -> Image2D<f64> {
        let mut rng = SplitMix64::new(seed);
        Image2D::from_fn(w, h, |_, _| rng.next_f64())
    }

    fn naive_conv(img: &Image2D<f64>, kernel: &[f64]) -> Image2D<f64> {
        let (w, h) = img.dims();
        let r = (kernel.len() / 2) as isize;
        Image2D::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for (j, &ky) in kernel.iter().enumerate() {
                for (i, &kx) in kernel.iter().enumerate() {
                    let xs = x as isize + i as isize - r;
                    let ys = y as isize + j as isize - r;
                    // mirror without edge repeat
                    let fold = |v: isize, n: isize| {
                        let mut v = v;
                        while v < 0 || v >= n {
                            v = if v < 0 { -v } else { 2 * (n - 1) - v };
                        }
                        v as usize
                    };
                    acc += kx * ky * img.get(fold(xs, w as isize), fold(ys, h as isize));
                }
            }
            acc
        })
    }

    #[test]
    fn reflect_index_mirrors() {
        let got: Vec<usize> = (-3..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(-5, 1), 0);
    }

    #[test]
    fn gaussian_small_sigma_has_length_three() {
        let k = gaussian_kernel(0.25f64).unwrap();
        assert_eq!(k.len(), 3);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // exp(-1 / (2 * 0.0625)) = exp(-8)
        let e = (-8.0f64).exp();
        assert!((k[1] - 1.0 / (1.0 + 2.0 * e)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_is_symmetric_and_matches_formula() {
        for sigma in [0.4, 1.0, 1.7, 2.5] {
            let k = gaussian_kernel(sigma).unwrap();
            let n = k.len();
            for i in 0..n / 2 {
                assert_eq!(k[i], k[n - 1 - i]);
            }
        }
        let k = gaussian_kernel(1.0f64).unwrap();
        assert_eq!(k.len(), 7);
        let pdf = |x: f64| (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let z: f64 = (-3..=3).map(|i| pdf(i as f64)).sum();
        assert!((k[3] - 0.3989422804014327 / z).abs() < 1e-12);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        assert!(gaussian_kernel(0.0f64).is_err());
        assert!(gaussian_kernel(-1.0f64).is_err());
    }

    #[test]
    fn identity_kernel_and_constant_image() {
        let img = random_image(8, 6, 1);
        assert_eq!(convolve2d_separable(&img, &[1.0]).unwrap(), img);

        let flat = Image2D::filled(9, 9, 0.37);
        let k = gaussian_kernel(1.3).unwrap();
        let out = convolve2d_separable(&flat, &k).unwrap();
        assert!(out.max_abs_diff(&flat).unwrap() < 1e-15);
    }

    #[test]
    fn matches_naive_dense_convolution() {
        let img = random_image(8, 8, 42);
        let k = [0.25, 0.5, 0.25];
        let fast = convolve2d_separable(&img, &k).unwrap();
        let slow = naive_conv(&img, &k);
        assert!(fast.max_abs_diff(&slow).unwrap() < 1e-14);
        assert!((fast.mean() - slow.mean()).abs() < 1e-9);

        let img = random_image(13, 9, 7);
        let k = gaussian_kernel(1.4).unwrap();
        let fast = convolve2d_separable(&img, &k).unwrap();
        assert!(fast.max_abs_diff(&naive_conv(&img, &k)).unwrap() < 1e-13);
    }

    #[test]
    fn rejects_oversized_kernel() {
        let img = random_image(4, 4, 0);
        assert!(convolve2d_separable(&img, &[0.1; 9]).is_err());
    }

    #[test]
    fn bilinear_examples() {
        let img = random_image(4, 4, 9);
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(bilinear_sample(&img, x as f64, y as f64), img.get(x, y));
            }
        }

        let pair = Image2D::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&pair, 0.5, 0.0), 0.5);

        let (x, y) = (1.3, 2.7);
        let expected = img.get(1, 2) * 0.7 * 0.3
            + img.get(2, 2) * 0.3 * 0.3
            + img.get(1, 3) * 0.7 * 0.7
            + img.get(2, 3) * 0.3 * 0.7;
        assert!((bilinear_sample(&img, x, y) - expected).abs() < 1e-14);

        // clamping
        assert_eq!(bilinear_sample(&img, -3.0, 10.0), img.get(0, 3));
    }

    #[test]
    fn bilinear_stays_within_neighbours() {
        let img = random_image(6, 6, 5);
        let mut rng = SplitMix64::new(77);
        for _ in 0..500 {
            let x = rng.uniform(0.0, 5.0);
            let y = rng.uniform(0.0, 5.0);
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let nb = [
                img.get(x0, y0),
                img.get((x0 + 1).min(5), y0),
                img.get(x0, (y0 + 1).min(5)),
                img.get((x0 + 1).min(5), (y0 + 1).min(5)),
            ];
            let lo = nb.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = nb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let v = bilinear_sample(&img, x, y);
            assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
    }
}
