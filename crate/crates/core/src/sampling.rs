//! Sample points for residual checks.

use std::collections::BTreeMap;

use rand::Rng;

pub type Point = BTreeMap<String, f64>;

/// Tensor grid: every combination of `values` over `names`.
pub fn grid<S: AsRef<str>>(names: &[S], values: &[f64]) -> Vec<Point> {
    let mut out = vec![Point::new()];
    for name in names {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for p in &out {
            for &v in values {
                let mut q = p.clone();
                q.insert(name.as_ref().to_string(), v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// `count` points with coordinates uniform in `[lo, hi]`.
pub fn random_points<R: Rng + ?Sized, S: AsRef<str>>(rng: &mut R, names: &[S], count: usize, lo: f64, hi: f64) -> Vec<Point> {
    (0..count)
        .map(|_| {
            names
                .iter()
                .map(|n| (n.as_ref().to_string(), rng.gen_range(lo..=hi)))
                .collect()
        })
        .collect()
}

/// Evenly spaced values `lo, …, hi` (`count ≥ 2`).
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Deterministic probe points used where no sample set is supplied.
pub fn probes<S: AsRef<str>>(names: &[S]) -> Vec<Point> {
    const VALUES: [[f64; 5]; 3] = [
        [0.37, -0.81, 1.23, 0.55, -1.4],
        [-0.62, 0.29, -1.07, 1.31, 0.74],
        [1.13, 0.48, 0.21, -0.93, -0.36],
    ];
    VALUES
        .iter()
        .map(|row| {
            names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.as_ref().to_string(), row[i % row.len()] + 0.11 * (i / row.len()) as f64))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_size_and_order() {
        let g = grid(&["x", "y"], &[0.0, 1.0, 2.0]);
        assert_eq!(g.len(), 9);
        assert_eq!(g[1]["y"], 1.0);
        assert_eq!(grid::<&str>(&[], &[1.0]).len(), 1);
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-1.0, 1.0, 5), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
