use crate::gf2::BitMatrix;

/// Code-aware attention mask `g(H)` as a row-major `(2N-K)^2` additive mask.
///
/// Every position sees itself. A check position `N+i` and each bit `j` in
/// check `i` see each other, and all bits sharing a check see each other.
/// Everything else is `-inf`.
pub fn build_mask(h: &BitMatrix) -> Vec<f64> {
    let n = h.cols;
    let len = n + h.rows;
    let mut connected = vec![false; len * len];
    for i in 0..len {
        connected[i * len + i] = true;
    }
    for i in 0..h.rows {
        let idx = h.row_support(i);
        for &j in &idx {
            connected[(n + i) * len + j] = true;
            connected[j * len + n + i] = true;
            for &l in &idx {
                connected[j * len + l] = true;
                connected[l * len + j] = true;
            }
        }
    }
    connected.into_iter().map(|c| if c { 0.0 } else { f64::NEG_INFINITY }).collect()
}

/// Mask letting each position attend only to itself.
pub fn diagonal_mask(len: usize) -> Vec<f64> {
    (0..len * len)
        .map(|i| if i / len == i % len { 0.0 } else { f64::NEG_INFINITY })
        .collect()
}
