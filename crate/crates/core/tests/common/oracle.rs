//! Straightforward reference implementations used to cross-check the
//! library. They favour obviousness over speed and share no code with it.

#![allow(dead_code, clippy::needless_range_loop)]

/// Lloyd's algorithm seeded with the first `k` points, run for exactly
/// `iterations` rounds. Each round materializes the member list of every
/// cluster and averages it in record order.
pub fn lloyd(points: &[Vec<f64>], k: usize, iterations: usize) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = points[..k].to_vec();
    for _ in 0..iterations {
        let labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        let mut next = Vec::with_capacity(k);
        for c in 0..k {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                next.push(centroids[c].clone());
                continue;
            }
            let dim = members[0].len();
            let mut mean = Vec::with_capacity(dim);
            for d in 0..dim {
                let mut total = 0.0;
                for m in &members {
                    total += m[d];
                }
                mean.push(total / members.len() as f64);
            }
            next.push(mean);
        }
        centroids = next;
    }
    centroids
}

/// Index and squared distance of the closest centroid, lowest index on ties.
pub fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let dists: Vec<f64> = centroids
        .iter()
        .map(|c| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let mut best = 0;
    for (i, d) in dists.iter().enumerate() {
        if *d < dists[best] {
            best = i;
        }
    }
    (best, dists[best])
}

pub fn sse(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| nearest(p, centroids).1).sum()
}

/// Nearest-rank percentile for integer `p`: the smallest sorted value whose
/// 1-based rank `r` satisfies `100 * r >= p * n`.
pub fn nearest_rank(values: &[f64], p: u32) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut r = 1;
    while 100 * r < p as usize * n {
        r += 1;
    }
    sorted[r - 1]
}

/// `ceil(n * num / den)` in integer arithmetic.
pub fn prefix_len(n: usize, num: usize, den: usize) -> usize {
    (n * num).div_ceil(den)
}
