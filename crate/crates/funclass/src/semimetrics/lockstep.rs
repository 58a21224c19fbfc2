use crate::error::{Error, Result};
use crate::funcdata::NormalizedCurve;

fn check_grids(x: &NormalizedCurve, y: &NormalizedCurve) -> Result<()> {
    if x.m != y.m || x.d != y.d {
        return Err(Error::invalid(format!(
            "grid mismatch: {}x{} vs {}x{}",
            x.m, x.d, y.m, y.d
        )));
    }
    Ok(())
}

/// L^p distance `(∫ Σ_k |x_k - y_k|^p dt)^(1/p)` over [0,1], trapezoidal
/// rule on the shared equidistant grid.
pub fn lp_distance(x: &NormalizedCurve, y: &NormalizedCurve, p: f64) -> Result<f64> {
    check_grids(x, y)?;
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("L^p needs p >= 1, got {p}")));
    }
    let h = 1.0 / (x.m - 1) as f64;
    let mut integral = 0.0;
    for j in 0..x.m {
        let integrand: f64 = x
            .point(j)
            .iter()
            .zip(y.point(j))
            .map(|(a, b)| (a - b).abs().powf(p))
            .sum();
        let weight = if j == 0 || j == x.m - 1 { 0.5 } else { 1.0 };
        integral += weight * integrand;
    }
    Ok((integral * h).powf(1.0 / p))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Squared sample distance covariance of two point sets, via the algebraic
/// identity V² = mean(a.*b) + mean(a)·mean(b) - 2·mean_j(rowmean_a_j ·
/// rowmean_b_j) over the pairwise Euclidean distance matrices a and b.
fn dcov_sq(ax: &NormalizedCurve, ay: &NormalizedCurve) -> f64 {
    let m = ax.m;
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m * m];
    for j in 0..m {
        for k in (j + 1)..m {
            let da = euclid(ax.point(j), ax.point(k));
            let db = euclid(ay.point(j), ay.point(k));
            a[j * m + k] = da;
            a[k * m + j] = da;
            b[j * m + k] = db;
            b[k * m + j] = db;
        }
    }
    let mf = m as f64;
    let mut s1 = 0.0;
    let mut grand_a = 0.0;
    let mut grand_b = 0.0;
    let mut s3 = 0.0;
    for j in 0..m {
        let row_a: f64 = a[j * m..(j + 1) * m].iter().sum();
        let row_b: f64 = b[j * m..(j + 1) * m].iter().sum();
        s1 += a[j * m..(j + 1) * m]
            .iter()
            .zip(&b[j * m..(j + 1) * m])
            .map(|(u, v)| u * v)
            .sum::<f64>();
        grand_a += row_a;
        grand_b += row_b;
        s3 += (row_a / mf) * (row_b / mf);
    }
    s1 / (mf * mf) + (grand_a / (mf * mf)) * (grand_b / (mf * mf)) - 2.0 * s3 / mf
}

/// Distance-correlation distance `1 - sqrt(R²)`, where `R²` is the empirical
/// squared distance correlation of the two curves' grid points treated as m
/// paired d-dimensional observations. Returns 1 when either curve is
/// constant (zero distance variance).
pub fn dcor_distance(x: &NormalizedCurve, y: &NormalizedCurve) -> Result<f64> {
    check_grids(x, y)?;
    let vxy = dcov_sq(x, y);
    let vx = dcov_sq(x, x);
    let vy = dcov_sq(y, y);
    if !(vx * vy > 0.0) {
        return Ok(1.0);
    }
    let r_sq = (vxy / (vx * vy).sqrt()).clamp(0.0, 1.0);
    Ok(1.0 - r_sq.sqrt())
}
