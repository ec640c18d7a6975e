//! Progressive edge growth (PEG) construction of sparse parity-check
//! matrices, used to generate the shipped LDPC codes.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BitMatrix;

/// Builds an `m x n` parity-check matrix with every column of weight
/// `col_weight`, adding edges so as to keep local cycles as long as possible.
/// Ties between equally good checks are broken by degree, then by a seeded
/// RNG. The last edge of a column avoids duplicating an earlier column when
/// it can.
pub fn peg_parity_check(n: usize, m: usize, col_weight: usize, seed: u64) -> BitMatrix {
    assert!(col_weight >= 1 && col_weight <= m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = BitMatrix::zeros(m, n);
    let mut check_deg = vec![0usize; m];
    for j in 0..n {
        for edge in 0..col_weight {
            let mut candidates: Vec<usize> = if edge == 0 {
                (0..m).collect()
            } else {
                far_checks(&h, j)
            };
            if edge + 1 == col_weight {
                // Identical columns would give the code minimum distance 2.
                let support = h.col_support(j);
                let fresh: Vec<usize> = candidates
                    .iter()
                    .copied()
                    .filter(|&c| {
                        let mut s = support.clone();
                        s.push(c);
                        s.sort_unstable();
                        (0..j).all(|k| h.col_support(k) != s)
                    })
                    .collect();
                if !fresh.is_empty() {
                    candidates = fresh;
                }
            }
            let min_deg = candidates.iter().map(|&c| check_deg[c]).min().unwrap();
            let best: Vec<usize> = candidates.into_iter().filter(|&c| check_deg[c] == min_deg).collect();
            let &c = best.choose(&mut rng).unwrap();
            h.set(c, j, 1);
            check_deg[c] += 1;
        }
    }
    h
}

/// Checks not yet adjacent to bit `j` that are farthest from it in the
/// current Tanner graph (unreachable ones first).
fn far_checks(h: &BitMatrix, j: usize) -> Vec<usize> {
    let m = h.rows;
    let mut reached = vec![false; m];
    let mut frontier: Vec<usize> = h.col_support(j);
    for &c in &frontier {
        reached[c] = true;
    }
    let mut seen_bits = vec![false; h.cols];
    seen_bits[j] = true;
    loop {
        let before: Vec<usize> = (0..m).filter(|&c| !reached[c]).collect();
        let mut next = Vec::new();
        for &c in &frontier {
            for b in h.row_support(c) {
                if seen_bits[b] {
                    continue;
                }
                seen_bits[b] = true;
                for c2 in h.col_support(b) {
                    if !reached[c2] {
                        reached[c2] = true;
                        next.push(c2);
                    }
                }
            }
        }
        let after_unreached = (0..m).filter(|&c| !reached[c]).count();
        if next.is_empty() || after_unreached == 0 {
            // Either the tree stopped growing (pick any unreachable check) or
            // it just covered everything (pick among the last layer added).
            return if next.is_empty() { before } else { before.into_iter().filter(|c| next.contains(c)).collect() };
        }
        frontier = next;
    }
}

/// Length of the shortest cycle in the Tanner graph of `h`, or `None` if
/// the graph is a forest.
pub fn girth(h: &BitMatrix) -> Option<usize> {
    // Nodes 0..n are bits, n..n+m checks; BFS from every node.
    let (n, m) = (h.cols, h.rows);
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|j| h.col_support(j).into_iter().map(|c| n + c).collect())
        .chain((0..m).map(|c| h.row_support(c)))
        .collect();
    let mut best: Option<usize> = None;
    for s in 0..n + m {
        let mut dist = vec![usize::MAX; n + m];
        let mut parent = vec![usize::MAX; n + m];
        dist[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if parent[u] != v {
                    let len = dist[u] + dist[v] + 1;
                    best = Some(best.map_or(len, |b| b.min(len)));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_weights_and_girth() {
        let h = peg_parity_check(49, 25, 3, 7);
        assert!((0..49).all(|c| h.col_support(c).len() == 3));
        assert!(girth(&h).unwrap() >= 6);
        // A 4-cycle: two columns sharing two rows.
        let h4 = BitMatrix::from_rows(&[&[1, 1], &[1, 1]]);
        assert_eq!(girth(&h4), Some(4));
        let tree = BitMatrix::from_rows(&[&[1, 1, 0], &[0, 1, 1]]);
        assert_eq!(girth(&tree), None);
    }
}
