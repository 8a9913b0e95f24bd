//! Multi-index helpers: graded enumeration, componentwise order, binomials.

/// |k| = k_1 + ... + k_d.
pub fn abs(k: &[u32]) -> u32 {
    k.iter().sum()
}

/// Componentwise k <= l.
pub fn le(k: &[u32], l: &[u32]) -> bool {
    k.len() == l.len() && k.iter().zip(l).all(|(a, b)| a <= b)
}

pub fn add(k: &[u32], l: &[u32]) -> Vec<u32> {
    k.iter().zip(l).map(|(a, b)| a + b).collect()
}

/// k - l when l <= k componentwise.
pub fn sub(k: &[u32], l: &[u32]) -> Option<Vec<u32>> {
    if !le(l, k) {
        return None;
    }
    Some(k.iter().zip(l).map(|(a, b)| a - b).collect())
}

pub fn zeros(d: usize) -> Vec<u32> {
    vec![0; d]
}

pub fn unit(d: usize, axis: usize) -> Vec<u32> {
    let mut k = vec![0; d];
    k[axis] = 1;
    k
}

/// All multi-indices in d axes with |k| <= order, in graded lexicographic order.
pub fn graded(d: usize, order: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=order {
        emit_of_degree(d, total, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

/// Multi-indices with |k| = total exactly, lexicographic within the grade.
pub fn of_degree(d: usize, total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    emit_of_degree(d, total, &mut Vec::with_capacity(d), &mut out);
    out
}

fn emit_of_degree(d: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if d == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        emit_of_degree(d - 1, total - first, prefix, out);
        prefix.pop();
    }
}

/// All j with j <= k componentwise (the Leibniz index set).
pub fn below(k: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &ki in k {
        let mut next = Vec::with_capacity(out.len() * (ki as usize + 1));
        for stem in &out {
            for j in 0..=ki {
                let mut s = stem.clone();
                s.push(j);
                next.push(s);
            }
        }
        out = next;
    }
    out
}

/// Scalar binomial in u128; orders stay far below overflow here.
pub fn binom_u128(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Multi-binomial C(k, j) = prod_i C(k_i, j_i) as f64.
pub fn binom(k: &[u32], j: &[u32]) -> f64 {
    k.iter()
        .zip(j)
        .map(|(&a, &b)| binom_u128(a, b) as f64)
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_enumeration_counts_match_stars_and_bars() {
        let g = graded(2, 3);
        assert_eq!(g.len(), 1 + 2 + 3 + 4);
        assert_eq!(g[0], vec![0, 0]);
        assert!(g.iter().all(|k| abs(k) <= 3));
    }

    #[test]
    fn below_enumerates_the_leibniz_box() {
        let b = below(&[2, 1]);
        assert_eq!(b.len(), 6);
        assert!(b.contains(&vec![2, 1]));
        assert!(b.contains(&vec![0, 0]));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binom_u128(6, 3), 20);
        assert_eq!(binom(&[3, 2], &[1, 1]), 6.0);
    }
}
