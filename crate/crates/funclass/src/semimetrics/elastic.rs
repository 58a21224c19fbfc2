use crate::error::{Error, Result};

fn check_sequences(a: &[f64], b: &[f64], d: usize) -> Result<(usize, usize)> {
    if d == 0 || a.len() % d != 0 || b.len() % d != 0 {
        return Err(Error::invalid("point table length is not a multiple of the dimension"));
    }
    let (n, m) = (a.len() / d, b.len() / d);
    if n == 0 || m == 0 {
        return Err(Error::invalid("elastic distances need nonempty sequences"));
    }
    Ok((n, m))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Dynamic time warping distance between two point sequences (row-major
/// tables of d-dimensional points, lengths may differ).
///
/// Classic dynamic program: steps (i-1,j), (i,j-1), (i-1,j-1), Euclidean
/// local cost, sum aggregation, no path normalisation.
pub fn dtw_distance(a: &[f64], b: &[f64], d: usize) -> Result<f64> {
    let (n, m) = check_sequences(a, b, d)?;
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr[0] = f64::INFINITY;
        let pa = &a[(i - 1) * d..i * d];
        for j in 1..=m {
            let cost = euclid(pa, &b[(j - 1) * d..j * d]);
            curr[j] = cost + prev[j].min(curr[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Discrete Fréchet distance: same step lattice as DTW but with max
/// aggregation over the coupling, Euclidean ground distance.
pub fn frechet_distance(a: &[f64], b: &[f64], d: usize) -> Result<f64> {
    let (n, m) = check_sequences(a, b, d)?;
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr[0] = f64::INFINITY;
        let pa = &a[(i - 1) * d..i * d];
        for j in 1..=m {
            let cost = euclid(pa, &b[(j - 1) * d..j * d]);
            curr[j] = cost.max(prev[j].min(curr[j - 1]).min(prev[j - 1]));
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Hausdorff distance between the two point sets (order ignored):
/// `max(h(A,B), h(B,A))` with `h(A,B) = max_a min_b ||a-b||`.
pub fn hausdorff_distance(a: &[f64], b: &[f64], d: usize) -> Result<f64> {
    check_sequences(a, b, d)?;
    let one_sided = |from: &[f64], to: &[f64]| -> f64 {
        from.chunks_exact(d)
            .map(|p| {
                to.chunks_exact(d)
                    .map(|q| euclid(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(one_sided(a, b).max(one_sided(b, a)))
}
