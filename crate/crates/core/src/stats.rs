//! Small numeric helpers shared by the rule engines.

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Ordinary least-squares slope of `(t_us, value)` points, in value units
/// per second. `None` with fewer than two distinct time stamps.
pub fn least_squares_slope_per_s(points: &[(u64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    // Centre on the first timestamp to keep the sums well conditioned.
    let t0 = points[0].0 as f64;
    let n = points.len() as f64;
    let xs = points.iter().map(|(t, _)| (*t as f64 - t0) / 1e6);
    let mean_x = xs.clone().sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, v)| v).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, (_, y)) in xs.zip(points) {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}
