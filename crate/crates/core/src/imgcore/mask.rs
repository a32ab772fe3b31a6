use super::Image2D;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Boolean per-pixel annotation, row-major like [`Image2D`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask2D {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask2D {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask of {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
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
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// `true` when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask2D) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Row-major indices of the set bits.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Set exactly where the two images differ.
    pub fn changed_pixels<T: Real>(before: &Image2D<T>, after: &Image2D<T>) -> Result<Self> {
        before.check_same_dims(after)?;
        Ok(Self {
            width: before.width(),
            height: before.height(),
            bits: before
                .data()
                .iter()
                .zip(after.data())
                .map(|(a, b)| a != b)
                .collect(),
        })
    }

    pub fn to_image<T: Real>(&self) -> Image2D<T> {
        Image2D::new(
            self.width,
            self.height,
            self.bits
                .iter()
                .map(|&b| if b { T::one() } else { T::zero() })
                .collect(),
        )
        .expect("mask dims are consistent")
    }
}

/// Set exactly where the pixel value is strictly positive.
pub fn foreground_mask<T: Real>(img: &Image2D<T>) -> Mask2D {
    Mask2D {
        width: img.width(),
        height: img.height(),
        bits: img.data().iter().map(|&v| v > T::zero()).collect(),
    }
}

/// Morphological erosion by a Euclidean disk: a bit survives iff every
/// integer offset `(dx, dy)` with `dx² + dy² <= radius²` lands on a set
/// bit inside the frame.
pub fn erode_mask(mask: &Mask2D, radius: f64) -> Result<Mask2D> {
    if !(radius >= 0.0) {
        return Err(Error::invalid(format!(
            "erosion radius must be >= 0, got {radius}"
        )));
    }
    let (w, h) = mask.dims();
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= r2 {
                offsets.push((dx, dy));
            }
        }
    }
    // Check far offsets first; they fail most often.
    offsets.sort_by_key(|&(dx, dy)| std::cmp::Reverse(dx * dx + dy * dy));

    let mut out = Mask2D::empty(w, h);
    for y in 0..h as isize {
        if y < r || y + r >= h as isize {
            continue;
        }
        for x in 0..w as isize {
            if x < r || x + r >= w as isize || !mask.get(x as usize, y as usize) {
                continue;
            }
            let inside = offsets
                .iter()
                .all(|&(dx, dy)| mask.get((x + dx) as usize, (y + dy) as usize));
            if inside {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_erode(mask: &Mask2D, radius: f64) -> Mask2D {
        let (w, h) = mask.dims();
        Mask2D::from_fn(w, h, |x, y| {
            let rr = radius.ceil() as isize + 1;
            for dy in -rr..=rr {
                for dx in -rr..=rr {
                    if ((dx * dx + dy * dy) as f64) > radius * radius {
                        continue;
                    }
                    let (px, py) = (x as isize + dx, y as isize + dy);
                    if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                        return false;
                    }
                    if !mask.get(px as usize, py as usize) {
                        return false;
                    }
                }
            }
            true
        })
    }

    #[test]
    fn foreground_examples() {
        let zeros = Image2D::<f64>::zeros(4, 4);
        assert!(foreground_mask(&zeros).is_empty());

        let mut one = Image2D::<f64>::zeros(4, 4);
        one.set(2, 1, 0.3);
        let m = foreground_mask(&one);
        assert_eq!(m.count(), 1);
        assert!(m.get(2, 1));
    }

    #[test]
    fn erode_radius_zero_is_identity() {
        let m = Mask2D::from_fn(9, 7, |x, y| (x * 3 + y) % 4 != 0);
        assert_eq!(erode_mask(&m, 0.0).unwrap(), m);
    }

    #[test]
    fn erode_large_radius_empties() {
        let m = Mask2D::full(64, 64);
        assert!(erode_mask(&m, 70.0).unwrap().is_empty());
    }

    #[test]
    fn erode_square_matches_brute_force() {
        let m = Mask2D::from_fn(31, 31, |x, y| (5..26).contains(&x) && (5..26).contains(&y));
        for r in [1.0, 2.5, 5.0, 7.3] {
            assert_eq!(
                erode_mask(&m, r).unwrap(),
                brute_force_erode(&m, r),
                "radius {r}"
            );
        }
        // A 21x21 square eroded by 5 leaves the central 11x11 block.
        assert_eq!(erode_mask(&m, 5.0).unwrap().count(), 11 * 11);
    }

    #[test]
    fn erode_is_monotone_in_radius() {
        let m = Mask2D::from_fn(40, 40, |x, y| {
            let (dx, dy) = (x as f64 - 20.0, y as f64 - 18.0);
            dx * dx / 300.0 + dy * dy / 150.0 <= 1.0
        });
        let mut prev = m.clone();
        for r in [1.0, 2.0, 3.5, 5.0, 8.0] {
            let e = erode_mask(&m, r).unwrap();
            assert!(e.is_subset_of(&prev));
            assert_eq!(e, brute_force_erode(&m, r));
            prev = e;
        }
    }

    #[test]
    fn rejects_negative_radius() {
        assert!(erode_mask(&Mask2D::full(3, 3), -1.0).is_err());
    }
}
