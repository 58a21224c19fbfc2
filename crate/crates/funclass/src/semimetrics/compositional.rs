use crate::error::{Error, Result};
use crate::funcdata::Composition;

/// Aitchison distance between two m-part compositions:
/// `sqrt( 1/(2m) * Σ_j Σ_s ( ln(c_j/c_s) - ln(c*_j/c*_s) )² )`.
pub fn aitchison_distance(c: &Composition, c_star: &Composition) -> Result<f64> {
    let m = c.len();
    if m != c_star.len() {
        return Err(Error::invalid(format!(
            "compositions have {m} vs {} parts",
            c_star.len()
        )));
    }
    if c.0.iter().chain(c_star.0.iter()).any(|&p| !(p > 0.0)) {
        return Err(Error::invalid("composition parts must be strictly positive"));
    }
    let log_c: Vec<f64> = c.0.iter().map(|p| p.ln()).collect();
    let log_s: Vec<f64> = c_star.0.iter().map(|p| p.ln()).collect();
    let mut sum = 0.0;
    for j in 0..m {
        for s in 0..m {
            let diff = (log_c[j] - log_c[s]) - (log_s[j] - log_s[s]);
            sum += diff * diff;
        }
    }
    Ok((sum / (2.0 * m as f64)).sqrt())
}
