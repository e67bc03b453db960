use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How farthest-point sampling picks its first point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpsStart {
    /// The point with the lexicographically smallest coordinates.
    Lexicographic,
    /// A uniformly drawn index from a seeded generator.
    Seeded(u64),
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Farthest-point sampling of `m` indices. Each pick after the first
/// maximizes the distance to the already chosen set; ties go to the lowest
/// index.
pub fn fps(points: &[[f64; 3]], m: usize, start: FpsStart) -> Result<Vec<usize>> {
    let n = points.len();
    if m > n {
        return Err(Error::Parameter(format!("cannot sample {m} of {n} points")));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let first = match start {
        FpsStart::Lexicographic => (0..n)
            .min_by(|&i, &j| {
                let (a, b) = (&points[i], &points[j]);
                a[0].total_cmp(&b[0])
                    .then(a[1].total_cmp(&b[1]))
                    .then(a[2].total_cmp(&b[2]))
                    .then(i.cmp(&j))
            })
            .unwrap(),
        FpsStart::Seeded(seed) => ChaCha8Rng::seed_from_u64(seed).gen_range(0..n),
    };
    let mut chosen = vec![false; n];
    let mut out = Vec::with_capacity(m);
    let mut min_d: Vec<f64> = points.iter().map(|p| dist2(p, &points[first])).collect();
    chosen[first] = true;
    out.push(first);
    while out.len() < m {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            if !chosen[i] && min_d[i] > best_d {
                best = i;
                best_d = min_d[i];
            }
        }
        chosen[best] = true;
        out.push(best);
        let q = points[best];
        for (i, d) in min_d.iter_mut().enumerate() {
            let nd = dist2(&points[i], &q);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(out)
}
