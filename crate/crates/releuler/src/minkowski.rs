//! Minkowski index algebra in signature (-,+,+,+).
//!
//! Indices are raised/lowered by sign flips on the time slot. The fully
//! antisymmetric symbol is normalized by `eps_{0123} = +1`, hence
//! `eps^{0123} = -1` (one sign per raised index, determinant -1 in total).

/// Metric signature factor: `m_{aa}` (no sum), -1 for the time slot.
#[inline]
pub fn sig(alpha: usize) -> f64 {
    if alpha == 0 {
        -1.0
    } else {
        1.0
    }
}

/// The 24 permutations of (0,1,2,3) with their parities, for contracting
/// one Levi-Civita symbol without a 4^4 loop.
pub const EPS_PERMS: [([usize; 4], f64); 24] = [
    ([0, 1, 2, 3], 1.0),
    ([0, 1, 3, 2], -1.0),
    ([0, 2, 1, 3], -1.0),
    ([0, 2, 3, 1], 1.0),
    ([0, 3, 1, 2], 1.0),
    ([0, 3, 2, 1], -1.0),
    ([1, 0, 2, 3], -1.0),
    ([1, 0, 3, 2], 1.0),
    ([1, 2, 0, 3], 1.0),
    ([1, 2, 3, 0], -1.0),
    ([1, 3, 0, 2], -1.0),
    ([1, 3, 2, 0], 1.0),
    ([2, 0, 1, 3], 1.0),
    ([2, 0, 3, 1], -1.0),
    ([2, 1, 0, 3], -1.0),
    ([2, 1, 3, 0], 1.0),
    ([2, 3, 0, 1], 1.0),
    ([2, 3, 1, 0], -1.0),
    ([3, 0, 1, 2], -1.0),
    ([3, 0, 2, 1], 1.0),
    ([3, 1, 0, 2], 1.0),
    ([3, 1, 2, 0], -1.0),
    ([3, 2, 0, 1], -1.0),
    ([3, 2, 1, 0], 1.0),
];

/// `eps_{abcd}` with all indices down, `eps_{0123} = 1`.
pub fn eps_lower(a: usize, b: usize, c: usize, d: usize) -> f64 {
    let idx = [a, b, c, d];
    for (p, s) in EPS_PERMS.iter() {
        if *p == idx {
            return *s;
        }
    }
    0.0
}

/// `eps^{abcd}` with all indices up: `-eps_{abcd}` in this signature.
pub fn eps_upper(a: usize, b: usize, c: usize, d: usize) -> f64 {
    -eps_lower(a, b, c, d)
}

/// Minkowski inner product of two up-index four-vectors.
pub fn dot_up(x: &[f64; 4], y: &[f64; 4]) -> f64 {
    -x[0] * y[0] + x[1] * y[1] + x[2] * y[2] + x[3] * y[3]
}

/// Lower (or raise) a four-vector: flip the sign of the time component.
pub fn flip(x: &[f64; 4]) -> [f64; 4] {
    [-x[0], x[1], x[2], x[3]]
}
