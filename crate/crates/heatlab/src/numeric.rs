//! Shared numeric kernels: stabilized log-sum-exp and small least-squares fits.

/// log(sum_i exp(v_i)) with the max as shift. Returns the shift actually used
/// alongside the value. `-inf` entries are skipped; an all-`-inf` input gives
/// `(-inf, -inf)`.
pub fn log_sum_exp(values: &[f64]) -> (f64, f64) {
    let mut shift = f64::NEG_INFINITY;
    for &v in values {
        if v > shift {
            shift = v;
        }
    }
    if shift == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, shift);
    }
    let mut acc = 0.0;
    for &v in values {
        if v > f64::NEG_INFINITY {
            acc += (v - shift).exp();
        }
    }
    (shift + acc.ln(), shift)
}

/// Least-squares affine fit v ~ a + b t. Returns (a, b, residual) where the
/// residual is the maximum absolute deviation over the fitted points.
/// Panics if fewer than 2 points are supplied; callers enforce >= 3.
pub fn affine_fit(ts: &[f64], vs: &[f64]) -> (f64, f64, f64) {
    assert!(ts.len() == vs.len() && ts.len() >= 2);
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let mv = vs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxv = 0.0;
    for (&t, &v) in ts.iter().zip(vs) {
        sxx += (t - mt) * (t - mt);
        sxv += (t - mt) * (v - mv);
    }
    let b = sxv / sxx;
    let a = mv - b * mt;
    let mut res: f64 = 0.0;
    for (&t, &v) in ts.iter().zip(vs) {
        res = res.max((v - (a + b * t)).abs());
    }
    (a, b, res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_on_moderate_values() {
        let v = [0.3, -1.2, 2.0, 0.0];
        let naive: f64 = v.iter().map(|&x: &f64| x.exp()).sum::<f64>().ln();
        let (lse, shift) = log_sum_exp(&v);
        assert!((lse - naive).abs() < 1e-14);
        assert_eq!(shift, 2.0);
    }

    #[test]
    fn lse_survives_huge_shifts() {
        let v = [1000.0, 999.0];
        let (lse, _) = log_sum_exp(&v);
        assert!((lse - (1000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-12);
    }

    #[test]
    fn lse_ignores_neg_infinity() {
        let v = [f64::NEG_INFINITY, 0.0];
        let (lse, _) = log_sum_exp(&v);
        assert_eq!(lse, 0.0);
        let empty = [f64::NEG_INFINITY; 3];
        assert_eq!(log_sum_exp(&empty).0, f64::NEG_INFINITY);
    }

    #[test]
    fn affine_fit_recovers_exact_line() {
        let ts = [0.1, 0.2, 0.4];
        let vs: Vec<f64> = ts.iter().map(|t| -0.25 + 3.0 * t).collect();
        let (a, b, res) = affine_fit(&ts, &vs);
        assert!((a + 0.25).abs() < 1e-14);
        assert!((b - 3.0).abs() < 1e-13);
        assert!(res < 1e-14);
    }
}
