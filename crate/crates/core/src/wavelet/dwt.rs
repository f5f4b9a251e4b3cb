use super::{Boundary, DetailBands, SubbandPyramid, WaveletError, WaveletSpec};
use crate::linalg::Matrix;

/// Number of coefficients per band for an input of length `n`.
fn band_len(n: usize, filter_len: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Periodic => n.div_ceil(2),
        Boundary::Symmetric => {
            let first = first_start(filter_len);
            ((n as isize - 1 - first) / 2 + 1) as usize
        }
    }
}

/// Start of the first analysis window under the symmetric boundary: the
/// even offset closest to `-(L - 1)` from above.
fn first_start(filter_len: usize) -> isize {
    -2 * ((filter_len as isize - 1) / 2)
}

/// Half-sample symmetric reflection of an index into `0..n`.
#[inline]
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// One level of 1D analysis into `(approx, detail)` buffers of `band_len`.
fn analyze(x: &[f64], lo: &[f64], hi: &[f64], boundary: Boundary, a: &mut [f64], d: &mut [f64]) {
    let n = x.len();
    match boundary {
        Boundary::Periodic => {
            // odd lengths are extended by repeating the last sample
            let np = n + n % 2;
            let at = |i: usize| x[(i % np).min(n - 1)];
            for k in 0..np / 2 {
                let (mut sa, mut sd) = (0.0, 0.0);
                for j in 0..lo.len() {
                    let v = at(2 * k + j);
                    sa += lo[j] * v;
                    sd += hi[j] * v;
                }
                a[k] = sa;
                d[k] = sd;
            }
        }
        Boundary::Symmetric => {
            let first = first_start(lo.len());
            for k in 0..a.len() {
                let start = first + 2 * k as isize;
                let (mut sa, mut sd) = (0.0, 0.0);
                for j in 0..lo.len() {
                    let v = x[reflect(start + j as isize, n)];
                    sa += lo[j] * v;
                    sd += hi[j] * v;
                }
                a[k] = sa;
                d[k] = sd;
            }
        }
    }
}

/// Inverse of [`analyze`] for an output of length `n`.
fn synthesize(a: &[f64], d: &[f64], lo: &[f64], hi: &[f64], boundary: Boundary, out: &mut [f64]) {
    let n = out.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    match boundary {
        Boundary::Periodic => {
            let np = n + n % 2;
            for k in 0..np / 2 {
                for j in 0..lo.len() {
                    let i = (2 * k + j) % np;
                    if i < n {
                        out[i] += lo[j] * a[k] + hi[j] * d[k];
                    }
                }
            }
        }
        Boundary::Symmetric => {
            // every window touching 0..n is present, so the orthonormal
            // expansion is complete on the interior; reflected taps are dropped
            let first = first_start(lo.len());
            for k in 0..a.len() {
                let start = first + 2 * k as isize;
                for j in 0..lo.len() {
                    let i = start + j as isize;
                    if i >= 0 && (i as usize) < n {
                        out[i as usize] += lo[j] * a[k] + hi[j] * d[k];
                    }
                }
            }
        }
    }
}

fn analyze_rows(m: &Matrix, lo: &[f64], hi: &[f64], boundary: Boundary) -> (Matrix, Matrix) {
    let out_cols = band_len(m.cols(), lo.len(), boundary);
    let mut low = Matrix::zeros(m.rows(), out_cols);
    let mut high = Matrix::zeros(m.rows(), out_cols);
    for r in 0..m.rows() {
        analyze(m.row(r), lo, hi, boundary, low.row_mut(r), high.row_mut(r));
    }
    (low, high)
}

fn analyze_cols(m: &Matrix, lo: &[f64], hi: &[f64], boundary: Boundary) -> (Matrix, Matrix) {
    let out_rows = band_len(m.rows(), lo.len(), boundary);
    let mut low = Matrix::zeros(out_rows, m.cols());
    let mut high = Matrix::zeros(out_rows, m.cols());
    let mut col = vec![0.0; m.rows()];
    let mut a = vec![0.0; out_rows];
    let mut d = vec![0.0; out_rows];
    for c in 0..m.cols() {
        for (r, v) in col.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
        analyze(&col, lo, hi, boundary, &mut a, &mut d);
        for r in 0..out_rows {
            low[(r, c)] = a[r];
            high[(r, c)] = d[r];
        }
    }
    (low, high)
}

fn synthesize_cols(
    low: &Matrix,
    high: &Matrix,
    rows: usize,
    lo: &[f64],
    hi: &[f64],
    boundary: Boundary,
) -> Matrix {
    let mut out = Matrix::zeros(rows, low.cols());
    let mut a = vec![0.0; low.rows()];
    let mut d = vec![0.0; low.rows()];
    let mut col = vec![0.0; rows];
    for c in 0..low.cols() {
        for r in 0..low.rows() {
            a[r] = low[(r, c)];
            d[r] = high[(r, c)];
        }
        synthesize(&a, &d, lo, hi, boundary, &mut col);
        for (r, v) in col.iter().enumerate() {
            out[(r, c)] = *v;
        }
    }
    out
}

fn synthesize_rows(
    low: &Matrix,
    high: &Matrix,
    cols: usize,
    lo: &[f64],
    hi: &[f64],
    boundary: Boundary,
) -> Matrix {
    let mut out = Matrix::zeros(low.rows(), cols);
    for r in 0..low.rows() {
        synthesize(low.row(r), high.row(r), lo, hi, boundary, out.row_mut(r));
    }
    out
}

/// Separable multi-level decomposition: rows then columns at every level,
/// recursing on the LL band.
pub fn dwt2(x: &Matrix, spec: WaveletSpec, levels: usize) -> Result<SubbandPyramid, WaveletError> {
    if levels == 0 {
        return Err(WaveletError::ZeroLevels);
    }
    let lo = spec.family.lowpass();
    let hi = spec.family.highpass();
    let mut current = x.clone();
    let mut details = Vec::with_capacity(levels);
    let mut sizes = Vec::with_capacity(levels);
    for level in 1..=levels {
        let (rows, cols) = current.shape();
        if rows < lo.len() || cols < lo.len() {
            return Err(WaveletError::TooManyLevels {
                level,
                rows,
                cols,
                filter_len: lo.len(),
            });
        }
        sizes.push((rows, cols));
        let (row_lo, row_hi) = analyze_rows(&current, lo, hi, spec.boundary);
        let (ll, horizontal) = analyze_cols(&row_lo, lo, hi, spec.boundary);
        let (vertical, diagonal) = analyze_cols(&row_hi, lo, hi, spec.boundary);
        details.push(DetailBands {
            horizontal,
            vertical,
            diagonal,
        });
        current = ll;
    }
    Ok(SubbandPyramid {
        approx: current,
        details,
        sizes,
    })
}

pub fn idwt2(pyr: &SubbandPyramid, spec: WaveletSpec) -> Result<Matrix, WaveletError> {
    if pyr.details.is_empty() || pyr.details.len() != pyr.sizes.len() {
        return Err(WaveletError::ShapeMismatch(format!(
            "{} detail levels, {} recorded sizes",
            pyr.details.len(),
            pyr.sizes.len()
        )));
    }
    let lo = spec.family.lowpass();
    let hi = spec.family.highpass();
    let mut current = pyr.approx.clone();
    for (level, (bands, &(rows, cols))) in pyr.details.iter().zip(&pyr.sizes).enumerate().rev() {
        let expect = (
            band_len(rows, lo.len(), spec.boundary),
            band_len(cols, lo.len(), spec.boundary),
        );
        for (name, m) in [
            ("approx", &current),
            ("horizontal", &bands.horizontal),
            ("vertical", &bands.vertical),
            ("diagonal", &bands.diagonal),
        ] {
            if m.shape() != expect {
                return Err(WaveletError::ShapeMismatch(format!(
                    "level {}: {name} band is {:?}, expected {:?}",
                    level + 1,
                    m.shape(),
                    expect
                )));
            }
        }
        let row_lo = synthesize_cols(&current, &bands.horizontal, rows, lo, hi, spec.boundary);
        let row_hi = synthesize_cols(
            &bands.vertical,
            &bands.diagonal,
            rows,
            lo,
            hi,
            spec.boundary,
        );
        current = synthesize_rows(&row_lo, &row_hi, cols, lo, hi, spec.boundary);
    }
    Ok(current)
}
