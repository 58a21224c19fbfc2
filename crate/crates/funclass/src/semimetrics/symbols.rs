use crate::error::{Error, Result};
use crate::funcdata::SymbolSequence;

/// Levenshtein edit distance: minimum number of substitutions, insertions
/// and deletions, unit costs. Lengths may differ.
pub fn levenshtein_distance(a: &SymbolSequence, b: &SymbolSequence) -> f64 {
    let (s, t) = (&a.0, &b.0);
    let mut prev: Vec<usize> = (0..=t.len()).collect();
    let mut curr = vec![0usize; t.len() + 1];
    for (i, &cs) in s.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &ct) in t.iter().enumerate() {
            let substitution = prev[j] + usize::from(cs != ct);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[t.len()] as f64
}

/// Hamming distance: number of positions with differing symbols; sequences
/// must have equal length.
pub fn hamming_distance(a: &SymbolSequence, b: &SymbolSequence) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "hamming distance needs equal lengths, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count() as f64)
}
