use super::DetectorError;

/// 2-Wasserstein distance between two empirical laws on the line.
///
/// Equal sizes use the sorted coupling; otherwise the quantile functions are
/// integrated piecewise over the merged breakpoints `i/n` and `j/m`.
pub fn wasserstein2(a: &[f64], b: &[f64]) -> Result<f64, DetectorError> {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    wasserstein2_in_place(&mut xs, &mut ys)
}

/// Same as [`wasserstein2`] but sorts the inputs in place.
pub fn wasserstein2_in_place(a: &mut [f64], b: &mut [f64]) -> Result<f64, DetectorError> {
    if a.is_empty() || b.is_empty() {
        return Err(DetectorError::EmptySample);
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(DetectorError::NonFinite);
    }
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    if n == m {
        let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((s / n as f64).sqrt());
    }
    // walk the merged grid of cumulative masses with integer arithmetic: the
    // breakpoint i/n equals i*m/(n*m)
    let (nm, mut i, mut j, mut last, mut total) = (n * m, 0usize, 0usize, 0usize, 0.0);
    while i < n && j < m {
        let next_a = (i + 1) * m;
        let next_b = (j + 1) * n;
        let next = next_a.min(next_b);
        let d = a[i] - b[j];
        total += d * d * (next - last) as f64;
        last = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    Ok((total / nm as f64).sqrt())
}
