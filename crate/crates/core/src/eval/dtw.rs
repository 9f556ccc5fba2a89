//! Band-limited dynamic time warping over feature sequences.

use ndarray::Array2;

/// DTW distance with a Sakoe-Chiba band of `radius_fraction` of the longer
/// sequence, Euclidean local cost, unit steps. The band follows the scaled
/// diagonal so the end cell is always reachable.
pub fn dtw_distance(a: &Array2<f64>, b: &Array2<f64>, radius_fraction: f64) -> f64 {
    let n = a.nrows();
    let m = b.nrows();
    if n == 0 || m == 0 {
        return f64::INFINITY;
    }
    assert_eq!(a.ncols(), b.ncols(), "feature dims must match");
    let radius = ((radius_fraction * n.max(m) as f64).ceil() as isize).max(1);

    let cost = |i: usize, j: usize| -> f64 {
        let mut acc = 0.0;
        for k in 0..a.ncols() {
            let d = a[[i, k]] - b[[j, k]];
            acc += d * d;
        }
        acc.sqrt()
    };

    let band = |i: usize| -> (usize, usize) {
        let center = if n > 1 {
            i as f64 * (m - 1) as f64 / (n - 1) as f64
        } else {
            0.0
        };
        let lo = (center.floor() as isize - radius).max(0) as usize;
        let hi = ((center.ceil() as isize + radius) as usize).min(m - 1);
        (lo, hi)
    };

    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];
    let (lo0, hi0) = band(0);
    for j in lo0..=hi0 {
        prev[j] = cost(0, j) + if j > 0 { prev[j - 1] } else { 0.0 };
    }
    for i in 1..n {
        curr.iter_mut().for_each(|v| *v = f64::INFINITY);
        let (lo, hi) = band(i);
        for j in lo..=hi {
            let mut best = prev[j]; // vertical
            if j > 0 {
                best = best.min(prev[j - 1]); // diagonal
                best = best.min(curr[j - 1]); // horizontal
            }
            if best.is_finite() {
                curr[j] = cost(i, j) + best;
            }
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m - 1]
}
