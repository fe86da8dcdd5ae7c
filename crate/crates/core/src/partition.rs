//! Action-space partitions discovered from the absolute advantage Hessian.
//!
//! Each row of the smoothed affinity (diagonal zeroed) is treated as the
//! feature vector of one action dimension and clustered with k-means.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};

/// Disjoint, non-empty blocks covering `0..m`, kept in canonical order:
/// each block ascending, blocks ordered by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    m: usize,
}

impl Partition {
    pub fn new(mut blocks: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        let mut seen = vec![false; m];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &i in block {
                if i >= m {
                    return Err(Error::InvalidPartition(format!("index {i} out of range 0..{m}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("index {i} appears twice")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {missing} not covered")));
        }
        for block in &mut blocks {
            block.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { blocks, m })
    }

    /// Build from one cluster label per dimension (labels need not be dense).
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut order: Vec<usize> = Vec::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match order.iter().position(|&o| o == l) {
                Some(b) => blocks[b].push(i),
                None => {
                    order.push(l);
                    blocks.push(vec![i]);
                }
            }
        }
        Self::new(blocks, labels.len()).expect("labels always form a partition")
    }

    /// The single block `{0..m-1}`.
    pub fn full(m: usize) -> Self {
        Self {
            blocks: vec![(0..m).collect()],
            m,
        }
    }

    pub fn singletons(m: usize) -> Self {
        Self {
            blocks: (0..m).map(|i| vec![i]).collect(),
            m,
        }
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.m];
        for (k, block) in self.blocks.iter().enumerate() {
            for &i in block {
                labels[i] = k;
            }
        }
        labels
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        f.write_str(&parts.join("|"))
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let blocks = s
            .split('|')
            .map(|b| {
                b.split(',')
                    .map(|i| {
                        i.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::InvalidPartition(format!("bad index `{i}`")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let m = blocks.iter().map(Vec::len).sum();
        Self::new(blocks, m)
    }
}

/// Temporally smoothed absolute Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityState {
    smoothed: Array2<f64>,
    alpha: f64,
    initialized: bool,
}

impl AffinityState {
    pub fn new(m: usize, alpha: f64) -> Result<Self> {
        Self::from_matrix(Array2::zeros((m, m)), alpha, false)
    }

    pub fn from_matrix(smoothed: Array2<f64>, alpha: f64, initialized: bool) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("smoothing alpha {alpha} not in [0, 1)")));
        }
        check_len("affinity columns", smoothed.nrows(), smoothed.ncols())?;
        Ok(Self {
            smoothed,
            alpha,
            initialized,
        })
    }

    pub fn m(&self) -> usize {
        self.smoothed.nrows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn smoothed(&self) -> &Array2<f64> {
        &self.smoothed
    }

    /// First call stores `|hess|`; later calls blend
    /// `(1 - α)·|hess| + α·smoothed`.
    pub fn update(&mut self, hess: ArrayView2<f64>) -> Result<()> {
        check_len("hessian rows", self.m(), hess.nrows())?;
        check_len("hessian columns", self.m(), hess.ncols())?;
        let abs = hess.mapv(f64::abs);
        if self.initialized {
            let a = self.alpha;
            self.smoothed.zip_mut_with(&abs, |s, &h| *s = (1.0 - a) * h + a * *s);
        } else {
            self.smoothed = abs;
            self.initialized = true;
        }
        Ok(())
    }
}

/// k-means settings. The seed is fixed so clustering is a pure function of
/// the affinity matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            max_iters: 100,
            seed: 0x5EED_C1A5,
        }
    }
}

/// Cluster the action dimensions into `k` blocks with default settings.
pub fn cluster(state: &AffinityState, k: usize) -> Result<Partition> {
    cluster_with(state, k, &KMeansConfig::default())
}

pub fn cluster_with(state: &AffinityState, k: usize, config: &KMeansConfig) -> Result<Partition> {
    let m = state.m();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters over {m} dimensions")));
    }
    if k == 1 {
        return Ok(Partition::full(m));
    }
    let points = feature_rows(&state.smoothed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(f64, Partition)> = None;
    for _ in 0..config.restarts.max(1) {
        let labels = kmeans_once(points.view(), k, config.max_iters, &mut rng);
        let inertia = inertia(points.view(), &labels, k);
        let candidate = Partition::from_labels(&labels);
        best = Some(match best {
            None => (inertia, candidate),
            Some((bi, bp)) => {
                let tol = 1e-12 * bi.abs().max(1.0);
                if inertia < bi - tol || ((inertia - bi).abs() <= tol && candidate < bp) {
                    (inertia, candidate)
                } else {
                    (bi, bp)
                }
            }
        });
    }
    Ok(best.expect("at least one restart").1)
}

/// Row features for k-means. The self-affinity is discarded and replaced by
/// the row's largest cross affinity so that two members of a block share
/// support on both coordinates; rows are then scaled to unit length so blocks
/// of very different curvature magnitude stay separable.
pub fn feature_rows(affinity: &Array2<f64>) -> Array2<f64> {
    let m = affinity.nrows();
    let mut points = affinity.clone();
    for i in 0..m {
        let cross = (0..m).filter(|&j| j != i).map(|j| points[[i, j]]).fold(0.0, f64::max);
        points[[i, i]] = cross;
        let norm = points.row(i).dot(&points.row(i)).sqrt();
        if norm > 0.0 {
            points.row_mut(i).mapv_inplace(|v| v / norm);
        }
    }
    points
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroids(points: ArrayView2<f64>, labels: &[usize], k: usize) -> (Array2<f64>, Vec<usize>) {
    let mut c = Array2::zeros((k, points.ncols()));
    let mut counts = vec![0usize; k];
    for (row, &l) in points.rows().into_iter().zip(labels) {
        let mut dst = c.row_mut(l);
        dst += &row;
        counts[l] += 1;
    }
    for (mut row, &n) in c.rows_mut().into_iter().zip(&counts) {
        if n > 0 {
            row /= n as f64;
        }
    }
    (c, counts)
}

fn inertia(points: ArrayView2<f64>, labels: &[usize], k: usize) -> f64 {
    let (c, _) = centroids(points, labels, k);
    points
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, c.row(l)))
        .sum()
}

fn kmeans_plus_plus<R: Rng>(points: ArrayView2<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            // All remaining points coincide with a centre.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    chosen
}

fn assign(points: ArrayView2<f64>, centers: &Array2<f64>) -> Vec<usize> {
    points
        .rows()
        .into_iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0);
            for (j, c) in centers.rows().into_iter().enumerate() {
                let d = sq_dist(p, c);
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

/// Move the farthest member of the largest cluster into each empty cluster.
fn repair_empty(points: ArrayView2<f64>, labels: &mut [usize], k: usize) {
    loop {
        let (c, counts) = centroids(points, labels, k);
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        let largest = (0..k).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).expect("k >= 1");
        let far = (0..labels.len())
            .filter(|&i| labels[i] == largest)
            .max_by(|&a, &b| {
                let da = sq_dist(points.row(a), c.row(largest));
                let db = sq_dist(points.row(b), c.row(largest));
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("largest cluster is non-empty");
        labels[far] = empty;
    }
}

fn kmeans_once<R: Rng>(points: ArrayView2<f64>, k: usize, max_iters: usize, rng: &mut R) -> Vec<usize> {
    let seeds = kmeans_plus_plus(points, k, rng);
    let mut centers = Array2::zeros((k, points.ncols()));
    for (j, &s) in seeds.iter().enumerate() {
        centers.row_mut(j).assign(&points.row(s));
    }
    let mut labels = assign(points, &centers);
    repair_empty(points, &mut labels, k);
    for _ in 0..max_iters {
        centers = centroids(points, &labels, k).0;
        let mut next = assign(points, &centers);
        repair_empty(points, &mut next, k);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Adjusted Rand index between two partitions of the same dimensions.
///
/// When both partitions are trivially equal-information (the expected and
/// maximum index coincide) the value is 1 for identical partitions, else 0.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    check_len("partition dimension", a.m(), b.m())?;
    let la = a.labels();
    let lb = b.labels();
    let mut table = vec![vec![0u64; b.k()]; a.k()];
    for (&i, &j) in la.iter().zip(&lb) {
        table[i][j] += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&n| c2(n)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..b.k()).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(a.m() as u64);
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max = 0.5 * (rows + cols);
    if (max - expected).abs() < 1e-300 {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn canonical_form_and_display() {
        let p = Partition::new(vec![vec![3, 1], vec![2, 0]], 4).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 2], vec![1, 3]]);
        assert_eq!(p.to_string(), "0,2|1,3");
        assert_eq!("1,3|2,0".parse::<Partition>().unwrap(), p);
    }

    #[test]
    fn invalid_partitions() {
        assert!(Partition::new(vec![vec![0], vec![]], 1).is_err());
        assert!(Partition::new(vec![vec![0, 0]], 1).is_err());
        assert!(Partition::new(vec![vec![0]], 2).is_err());
        assert!(Partition::new(vec![vec![2]], 1).is_err());
    }

    #[test]
    fn affinity_smoothing() {
        let mut st = AffinityState::new(2, 0.0).unwrap();
        st.update(array![[1.0, -2.0], [-2.0, 4.0]].view()).unwrap();
        assert_eq!(st.smoothed(), &array![[1.0, 2.0], [2.0, 4.0]]);
        st.update(array![[3.0, 0.0], [0.0, -1.0]].view()).unwrap();
        assert_eq!(st.smoothed(), &array![[3.0, 0.0], [0.0, 1.0]]);

        let mut st = AffinityState::from_matrix(Array2::zeros((2, 2)), 0.5, true).unwrap();
        st.update(Array2::eye(2).view()).unwrap();
        assert_eq!(st.smoothed(), &(Array2::eye(2) * 0.5));
        assert!(AffinityState::new(2, 1.0).is_err());
    }

    #[test]
    fn trivial_cluster_counts() {
        let mut st = AffinityState::new(4, 0.5).unwrap();
        st.update(Array2::from_elem((4, 4), 1.0).view()).unwrap();
        assert_eq!(cluster(&st, 1).unwrap(), Partition::full(4));
        assert_eq!(cluster(&st, 4).unwrap(), Partition::singletons(4));
        assert!(cluster(&st, 5).is_err());
        assert!(cluster(&st, 0).is_err());
    }

    #[test]
    fn recovers_permuted_blocks() {
        let a = array![
            [9.0, 0.0, 3.0, 0.0],
            [0.0, 9.0, 0.0, 2.0],
            [3.0, 0.0, 9.0, 0.0],
            [0.0, 2.0, 0.0, 9.0],
        ];
        let st = AffinityState::from_matrix(a, 0.5, true).unwrap();
        assert_eq!(cluster(&st, 2).unwrap().to_string(), "0,2|1,3");
    }

    #[test]
    fn ari_reference_values() {
        let p = Partition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let q = Partition::new(vec![vec![0, 2], vec![1, 3]], 4).unwrap();
        assert_eq!(adjusted_rand_index(&p, &p).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&Partition::full(4), &Partition::singletons(4)).unwrap(), 0.0);
        // index 0, row/col pair sums 2 and 2 over C(4,2) = 6 pairs.
        assert!((adjusted_rand_index(&p, &q).unwrap() + 0.5).abs() < 1e-12);
    }
}
