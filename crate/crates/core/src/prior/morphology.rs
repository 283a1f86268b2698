use crate::model::BinaryMask;

/// Marks every cell within `r` of an active cell along a 1-D line.
fn dilate_line(src: &[bool], dst: &mut [bool], r: usize) {
    let n = src.len();
    // distance to the nearest active cell on the left, then on the right
    let mut last: Option<usize> = None;
    for i in 0..n {
        if src[i] {
            last = Some(i);
        }
        dst[i] = matches!(last, Some(j) if i - j <= r);
    }
    let mut next: Option<usize> = None;
    for i in (0..n).rev() {
        if src[i] {
            next = Some(i);
        }
        if matches!(next, Some(j) if j - i <= r) {
            dst[i] = true;
        }
    }
}

/// Dilation by a square structuring element of side `2r + 1`: a pixel becomes
/// active when an active pixel lies within Chebyshev distance `r`.
///
/// Runs as two separable 1-D passes, linear in the pixel count for any `r`.
pub fn dilate(mask: &BinaryMask, r: usize) -> BinaryMask {
    if r == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let mut rows = vec![false; w * h];
    for y in 0..h {
        dilate_line(&bits[y * w..(y + 1) * w], &mut rows[y * w..(y + 1) * w], r);
    }
    let mut out = vec![false; w * h];
    let mut col = vec![false; h];
    let mut col_out = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        dilate_line(&col, &mut col_out, r);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    BinaryMask::from_bits(w, h, out).expect("same dimensions")
}
