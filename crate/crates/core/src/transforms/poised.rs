use super::TransformError;
use crate::linalg::{rcond, select_cols, Mat};

/// Picks `m.nrows()` columns of `m` by greedy column pivoting: at each step
/// the column with the largest residual norm wins, ties going to the lowest
/// index. The result is sorted.
pub fn poised_columns(m: &Mat, sing: f64) -> Result<Vec<usize>, TransformError> {
    let (rows, cols) = m.shape();
    if cols < rows {
        return Err(TransformError::NoPoisedSet);
    }
    let mut work = m.clone();
    let scale = m.norm().max(1e-300);
    let mut chosen = vec![];
    for _ in 0..rows {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..cols {
            if chosen.contains(&j) {
                continue;
            }
            let nrm = work.column(j).norm();
            if best.is_none_or(|(_, b)| nrm > b * (1.0 + 1e-12)) {
                best = Some((j, nrm));
            }
        }
        let (j, nrm) = best.ok_or(TransformError::NoPoisedSet)?;
        if nrm <= 1e-13 * scale {
            return Err(TransformError::NoPoisedSet);
        }
        let q = work.column(j) / crate::linalg::C::from(nrm);
        for k in 0..cols {
            if k != j && !chosen.contains(&k) {
                let proj = q.dotc(&work.column(k));
                let upd = &q * proj;
                let mut col = work.column_mut(k);
                col -= upd;
            }
        }
        chosen.push(j);
    }
    chosen.sort_unstable();
    if rcond(&select_cols(m, &chosen)) < sing {
        return Err(TransformError::SingularPoisedCandidate);
    }
    Ok(chosen)
}
