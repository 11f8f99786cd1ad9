//! Reflect padding so image sides fit the generator's down-sampling depth.

use semiblind_core::{Error, Image, Result};

/// Original size of a padded image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Crop {
    pub height: usize,
    pub width: usize,
}

impl Crop {
    pub fn apply(&self, image: &Image) -> Result<Image> {
        crop(image, self.height, self.width)
    }
}

fn next_multiple(n: usize, factor: usize) -> usize {
    n.div_ceil(factor) * factor
}

/// Mirror index into `0..n` without repeating the edge sample.
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Pads right and bottom by reflection up to the next multiple of `factor`
/// (`factor = 0` is treated as 1). Returns the padded image and the size to
/// crop results back to.
pub fn pad_to_divisible(image: &Image, factor: usize) -> Result<(Image, Crop)> {
    let factor = factor.max(1);
    let (c, h, w) = image.dims();
    let crop = Crop { height: h, width: w };
    let (ph, pw) = (next_multiple(h, factor), next_multiple(w, factor));
    if (ph, pw) == (h, w) {
        return Ok((image.clone(), crop));
    }
    let mut data = Vec::with_capacity(c * ph * pw);
    for ch in 0..c {
        for i in 0..ph {
            for j in 0..pw {
                data.push(image.get(ch, reflect(i, h), reflect(j, w)));
            }
        }
    }
    Ok((Image::new(c, ph, pw, data)?, crop))
}

/// Top-left `height×width` window of `image`.
pub fn crop(image: &Image, height: usize, width: usize) -> Result<Image> {
    let (c, h, w) = image.dims();
    if (h, w) == (height, width) {
        return Ok(image.clone());
    }
    if height > h || width > w {
        return Err(Error::InvalidArgument(format!("crop {height}×{width} does not fit in {h}×{w}")));
    }
    let mut data = Vec::with_capacity(c * height * width);
    for ch in 0..c {
        for i in 0..height {
            let row = &image.plane(ch)[i * w..i * w + width];
            data.extend_from_slice(row);
        }
    }
    Image::new(c, height, width, data)
}
