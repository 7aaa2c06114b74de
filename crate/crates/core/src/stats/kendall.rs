use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least 2 pairs, got {0}")]
    TooFew(usize),
    #[error("x and y must have the same length ({0} vs {1})")]
    Length(usize, usize),
    #[error("non-finite score at position {0}")]
    NonFinite(usize),
    #[error("tau-b is undefined: every x or every y is tied")]
    Degenerate,
    #[error("need at least one permutation")]
    NoPermutations,
}

/// Paired observations.
#[derive(Debug, Clone, PartialEq)]
pub struct RankPairs {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl RankPairs {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, StatsError> {
        if x.len() != y.len() {
            return Err(StatsError::Length(x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(StatsError::TooFew(x.len()));
        }
        if let Some(i) = x.iter().zip(&y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(StatsError::NonFinite(i));
        }
        // -0.0 and 0.0 are one rank.
        let zero = |v: Vec<f64>| v.into_iter().map(|a| a + 0.0).collect();
        Ok(RankPairs { x: zero(x), y: zero(y) })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Pair counts behind tau-b. `s` is concordant minus discordant; `n1`, `n2`
/// count pairs tied in x and in y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KendallCounts {
    pub n: u64,
    pub s: i64,
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
}

impl KendallCounts {
    pub fn tau_b(&self) -> Option<f64> {
        let denom = (self.n0 - self.n1) as f64 * (self.n0 - self.n2) as f64;
        (denom > 0.0).then(|| self.s as f64 / denom.sqrt())
    }
}

fn pairs2(t: u64) -> u64 {
    t * t.saturating_sub(1) / 2
}

/// Sizes of runs of equal values in a sorted slice.
fn tie_groups<T: PartialEq>(sorted: &[T]) -> Vec<u64> {
    sorted.chunk_by(|a, b| a == b).map(|c| c.len() as u64).collect()
}

/// Number of inversions; sorts `v` as a side effect.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            inv += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Pair counts in O(n log n): sort by (x, y), then count the inversions of y.
pub fn kendall_counts(pairs: &RankPairs) -> KendallCounts {
    let n = pairs.len() as u64;
    let mut xy: Vec<(f64, f64)> = pairs.x.iter().copied().zip(pairs.y.iter().copied()).collect();
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n1: u64 = tie_groups(&xy.iter().map(|p| p.0).collect::<Vec<_>>()).into_iter().map(pairs2).sum();
    let n3: u64 = tie_groups(&xy).into_iter().map(pairs2).sum();
    let mut ys: Vec<f64> = xy.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = count_inversions(&mut ys, &mut buf);
    let n2: u64 = tie_groups(&ys).into_iter().map(pairs2).sum();
    let n0 = pairs2(n);
    let s = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    KendallCounts { n, s, n0, n1, n2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauB {
    pub tau_b: f64,
    /// Two-sided, normal approximation with tie-corrected variance.
    pub p_asymptotic: f64,
    pub z: f64,
    pub counts: KendallCounts,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Tie-corrected variance of S under independence.
fn s_variance(pairs: &RankPairs) -> f64 {
    let n = pairs.len() as f64;
    let tx: Vec<f64> = tie_groups(&sorted(&pairs.x)).into_iter().map(|t| t as f64).collect();
    let ty: Vec<f64> = tie_groups(&sorted(&pairs.y)).into_iter().map(|t| t as f64).collect();
    let sum = |g: &[f64], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t)).sum::<f64>();
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|t| t * (t - 1.0));
    let v2 = sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|t| t * (t - 1.0) * (t - 2.0));
    let mut var = (v0 - vt - vu) / 18.0 + v1 / (2.0 * n * (n - 1.0));
    if n > 2.0 {
        var += v2 / (9.0 * n * (n - 1.0) * (n - 2.0));
    }
    var
}

pub fn kendall_tau_b(pairs: &RankPairs) -> Result<TauB, StatsError> {
    let counts = kendall_counts(pairs);
    let tau_b = counts.tau_b().ok_or(StatsError::Degenerate)?;
    let var = s_variance(pairs);
    let z = if var > 0.0 { counts.s as f64 / var.sqrt() } else { 0.0 };
    let p_asymptotic = erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(TauB { tau_b, p_asymptotic, z, counts })
}

/// Two-sided permutation p-value with add-one smoothing: y is shuffled while
/// x stays fixed. Permutation `i` draws from its own stream of the seeded
/// generator, so the result does not depend on the thread count.
pub fn permutation_test(pairs: &RankPairs, n_perm: u64, seed: u64) -> Result<f64, StatsError> {
    if n_perm == 0 {
        return Err(StatsError::NoPermutations);
    }
    let observed = kendall_counts(pairs);
    observed.tau_b().ok_or(StatsError::Degenerate)?;
    // Shuffling y keeps both tie structures, so the denominator is fixed and
    // |S| orders |tau_b|.
    let target = observed.s.unsigned_abs();
    let hits: u64 = (0..n_perm)
        .into_par_iter()
        .map_init(
            || pairs.clone(),
            |work, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                work.y.copy_from_slice(&pairs.y);
                work.y.shuffle(&mut rng);
                (kendall_counts(work).s.unsigned_abs() >= target) as u64
            },
        )
        .sum();
    Ok((1 + hits) as f64 / (1 + n_perm) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(x: &[f64], y: &[f64]) -> RankPairs {
        RankPairs::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn extremes() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau_b(&pairs(&x, &x)).unwrap().tau_b, 1.0);
        assert_eq!(kendall_tau_b(&pairs(&x, &[4.0, 3.0, 2.0, 1.0])).unwrap().tau_b, -1.0);
        assert_eq!(kendall_tau_b(&pairs(&x, &[2.0; 4])), Err(StatsError::Degenerate));
    }

    #[test]
    fn tied_example() {
        // Pairs over (1,1) (2,3) (2,2) (3,3): concordant 4, discordant 0,
        // one x tie, one y tie.
        let c = kendall_counts(&pairs(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 3.0]));
        assert_eq!((c.s, c.n0, c.n1, c.n2), (4, 6, 1, 1));
        assert!((c.tau_b().unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn single_permutation() {
        let p = permutation_test(&pairs(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]), 1, 7).unwrap();
        assert!(p == 0.5 || p == 1.0);
    }

    #[test]
    fn inversions() {
        let mut v = vec![3.0, 1.0, 2.0, 2.0, 0.0];
        assert_eq!(count_inversions(&mut v, &mut Vec::new()), 7);
        assert_eq!(v, [0.0, 1.0, 2.0, 2.0, 3.0]);
    }
}
