use super::{Boundary, DetailBands, SwtPyramid, WaveletError, WaveletSpec};
use crate::linalg::Matrix;

/// Undecimated analysis along one axis with filter taps `step` apart.
fn analyze(x: &[f64], lo: &[f64], hi: &[f64], step: usize, a: &mut [f64], d: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let (mut sa, mut sd) = (0.0, 0.0);
        for j in 0..lo.len() {
            let v = x[(i + j * step) % n];
            sa += lo[j] * v;
            sd += hi[j] * v;
        }
        a[i] = sa;
        d[i] = sd;
    }
}

/// Averages the two decimation phases: `(Lᵀa + Hᵀd) / 2`.
fn synthesize(a: &[f64], d: &[f64], lo: &[f64], hi: &[f64], step: usize, out: &mut [f64]) {
    let n = out.len();
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for j in 0..lo.len() {
            let k = (i + n - (j * step) % n) % n;
            s += lo[j] * a[k] + hi[j] * d[k];
        }
        *o = 0.5 * s;
    }
}

fn rows_pass(m: &Matrix, lo: &[f64], hi: &[f64], step: usize) -> (Matrix, Matrix) {
    let mut low = Matrix::zeros(m.rows(), m.cols());
    let mut high = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        analyze(m.row(r), lo, hi, step, low.row_mut(r), high.row_mut(r));
    }
    (low, high)
}

fn cols_pass(m: &Matrix, lo: &[f64], hi: &[f64], step: usize) -> (Matrix, Matrix) {
    let t = m.transpose();
    let (low, high) = rows_pass(&t, lo, hi, step);
    (low.transpose(), high.transpose())
}

fn rows_inverse(low: &Matrix, high: &Matrix, lo: &[f64], hi: &[f64], step: usize) -> Matrix {
    let mut out = Matrix::zeros(low.rows(), low.cols());
    for r in 0..low.rows() {
        synthesize(low.row(r), high.row(r), lo, hi, step, out.row_mut(r));
    }
    out
}

fn cols_inverse(low: &Matrix, high: &Matrix, lo: &[f64], hi: &[f64], step: usize) -> Matrix {
    rows_inverse(&low.transpose(), &high.transpose(), lo, hi, step).transpose()
}

fn check(rows: usize, cols: usize, spec: WaveletSpec, levels: usize) -> Result<(), WaveletError> {
    if levels == 0 {
        return Err(WaveletError::ZeroLevels);
    }
    if spec.boundary != Boundary::Periodic {
        return Err(WaveletError::UnsupportedBoundary);
    }
    let block = if levels < 32 {
        1usize << levels
    } else {
        usize::MAX
    };
    if rows == 0 || cols == 0 || !rows.is_multiple_of(block) || !cols.is_multiple_of(block) {
        return Err(WaveletError::BadDimensions { rows, cols, levels });
    }
    Ok(())
}

/// Stationary (à trous) decomposition: at level `l` the filters are
/// upsampled by `2^(l-1)` and nothing is decimated.
pub fn swt2(x: &Matrix, spec: WaveletSpec, levels: usize) -> Result<SwtPyramid, WaveletError> {
    check(x.rows(), x.cols(), spec, levels)?;
    let lo = spec.family.lowpass();
    let hi = spec.family.highpass();
    let mut current = x.clone();
    let mut details = Vec::with_capacity(levels);
    for level in 0..levels {
        let step = 1 << level;
        let (row_lo, row_hi) = rows_pass(&current, lo, hi, step);
        let (ll, horizontal) = cols_pass(&row_lo, lo, hi, step);
        let (vertical, diagonal) = cols_pass(&row_hi, lo, hi, step);
        details.push(DetailBands {
            horizontal,
            vertical,
            diagonal,
        });
        current = ll;
    }
    Ok(SwtPyramid {
        approx: current,
        details,
    })
}

pub fn iswt2(pyr: &SwtPyramid, spec: WaveletSpec) -> Result<Matrix, WaveletError> {
    let (rows, cols) = pyr.approx.shape();
    check(rows, cols, spec, pyr.details.len())?;
    for (i, d) in pyr.details.iter().enumerate() {
        for m in [&d.horizontal, &d.vertical, &d.diagonal] {
            if m.shape() != (rows, cols) {
                return Err(WaveletError::ShapeMismatch(format!(
                    "level {} band is {:?}, expected {:?}",
                    i + 1,
                    m.shape(),
                    (rows, cols)
                )));
            }
        }
    }
    let lo = spec.family.lowpass();
    let hi = spec.family.highpass();
    let mut current = pyr.approx.clone();
    for (level, bands) in pyr.details.iter().enumerate().rev() {
        let step = 1 << level;
        let row_lo = cols_inverse(&current, &bands.horizontal, lo, hi, step);
        let row_hi = cols_inverse(&bands.vertical, &bands.diagonal, lo, hi, step);
        current = rows_inverse(&row_lo, &row_hi, lo, hi, step);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::super::Family;
    use super::*;

    fn sample(r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |i, j| ((i * 7 + j * 13 + i * j) % 17) as f64 / 16.0)
    }

    #[test]
    fn round_trip_both_families() {
        for fam in [Family::Haar, Family::Db2] {
            let spec = WaveletSpec::new(fam, Boundary::Periodic);
            for (r, c, l) in [(16, 16, 3), (8, 24, 2), (8, 8, 3)] {
                let x = sample(r, c);
                let p = swt2(&x, spec, l).unwrap();
                assert!(p.details.iter().all(|d| d.diagonal.shape() == (r, c)));
                assert!(iswt2(&p, spec).unwrap().max_abs_diff(&x) < 1e-12);
            }
        }
    }

    #[test]
    fn constant_has_no_detail() {
        let x = Matrix::from_fn(8, 8, |_, _| 0.6);
        let p = swt2(&x, WaveletSpec::default(), 2).unwrap();
        assert!(p
            .approx
            .as_slice()
            .iter()
            .all(|v| (v - 0.6 * 4.0).abs() < 1e-12));
        for d in &p.details {
            assert!(d.horizontal.as_slice().iter().all(|v| v.abs() < 1e-12));
            assert!(d.diagonal.as_slice().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn shift_covariance() {
        let x = sample(16, 16);
        let spec = WaveletSpec::new(Family::Db2, Boundary::Periodic);
        let p = swt2(&x, spec, 2).unwrap();
        let q = swt2(&x.circshift(3, 5), spec, 2).unwrap();
        assert!(q.approx.max_abs_diff(&p.approx.circshift(3, 5)) < 1e-9);
        for (a, b) in p.details.iter().zip(&q.details) {
            assert!(b.vertical.max_abs_diff(&a.vertical.circshift(3, 5)) < 1e-9);
            assert!(b.diagonal.max_abs_diff(&a.diagonal.circshift(3, 5)) < 1e-9);
        }
    }

    #[test]
    fn dimension_errors() {
        let spec = WaveletSpec::default();
        assert!(matches!(
            swt2(&sample(12, 16), spec, 3),
            Err(WaveletError::BadDimensions { .. })
        ));
        assert!(matches!(
            swt2(&sample(15, 15), spec, 1),
            Err(WaveletError::BadDimensions { .. })
        ));
        assert_eq!(swt2(&sample(8, 8), spec, 0), Err(WaveletError::ZeroLevels));
        let sym = WaveletSpec::new(Family::Haar, Boundary::Symmetric);
        assert_eq!(
            swt2(&sample(8, 8), sym, 1),
            Err(WaveletError::UnsupportedBoundary)
        );
    }
}
