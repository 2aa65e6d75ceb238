//! Sample moments over row-major `n x d` data.

/// Per-column mean.
pub fn mean(data: &[f64], d: usize) -> Vec<f64> {
    let n = data.len() / d;
    let mut m = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for k in 0..d {
            m[k] += row[k];
        }
    }
    m.iter().map(|v| v / n.max(1) as f64).collect()
}

/// Per-column sample standard deviation (denominator `n - 1`).
pub fn std(data: &[f64], d: usize) -> Vec<f64> {
    let n = data.len() / d;
    let m = mean(data, d);
    let mut v = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for k in 0..d {
            v[k] += (row[k] - m[k]).powi(2);
        }
    }
    v.iter()
        .map(|s| (s / (n.max(2) - 1) as f64).sqrt())
        .collect()
}

/// Per-column skewness `E[(x - m)^3] / s^3` with population moments.
pub fn skewness(data: &[f64], d: usize) -> Vec<f64> {
    let n = (data.len() / d).max(1) as f64;
    let m = mean(data, d);
    let mut m2 = vec![0.0; d];
    let mut m3 = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for k in 0..d {
            let c = row[k] - m[k];
            m2[k] += c * c;
            m3[k] += c * c * c;
        }
    }
    (0..d)
        .map(|k| {
            let var = m2[k] / n;
            if var > 0.0 {
                (m3[k] / n) / var.powf(1.5)
            } else {
                0.0
            }
        })
        .collect()
}
