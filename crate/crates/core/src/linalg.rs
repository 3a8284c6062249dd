//! Small dense least squares for the three-column log-linear design.

/// Columns: intercept, ln V, ln M.
pub(crate) const P: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LstsqError {
    /// Index of the first column found linearly dependent on earlier ones.
    RankDeficient(usize),
}

/// Solves min Σ wᵢ (yᵢ − xᵢ·b)² by Householder QR of the √w-scaled system.
pub(crate) fn weighted_lstsq(rows: &[[f64; P]], y: &[f64], w: &[f64]) -> Result<[f64; P], LstsqError> {
    let n = rows.len();
    debug_assert!(n >= P && y.len() == n && w.len() == n);

    let mut a: Vec<[f64; P]> = Vec::with_capacity(n);
    let mut b: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let s = w[i].sqrt();
        a.push([rows[i][0] * s, rows[i][1] * s, rows[i][2] * s]);
        b.push(y[i] * s);
    }

    let col_norms: [f64; P] = std::array::from_fn(|j| a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt());
    let scale = col_norms.iter().cloned().fold(0.0, f64::max);

    let mut r = [[0.0; P]; P];
    for k in 0..P {
        let norm = (k..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm <= 1e-12 * col_norms[k].max(f64::MIN_POSITIVE) || norm <= 1e-300 * scale {
            return Err(LstsqError::RankDeficient(k));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..P {
                let dot: f64 = (k..n).map(|i| v[i - k] * a[i][j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..n {
                    a[i][j] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..n).map(|i| v[i - k] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                b[i] -= f * v[i - k];
            }
        }
        for j in k..P {
            r[k][j] = a[k][j];
        }
    }

    let mut x = [0.0; P];
    for k in (0..P).rev() {
        let tail: f64 = ((k + 1)..P).map(|j| r[k][j] * x[j]).sum();
        x[k] = (b[k] - tail) / r[k][k];
    }
    Ok(x)
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let (lower, mid, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    let mid = *mid;
    if n % 2 == 1 {
        mid
    } else {
        let below = lower.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + mid)
    }
}
