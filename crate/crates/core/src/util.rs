use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from one run seed.
pub mod stream {
    pub const POLICY_INIT: u64 = 1;
    pub const VALUE_INIT: u64 = 2;
    pub const ADVNET_INIT: u64 = 3;
    pub const ENV: u64 = 4;
    pub const COLLECT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const PROBE: u64 = 7;
}

/// ChaCha8 generator for `stream` of run `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Groups bitwise-identical rows so state-only networks run once per
/// distinct state.
#[derive(Debug, Clone)]
pub(crate) struct StateIndex {
    pub unique: Array2<f64>,
    pub ids: Vec<usize>,
}

impl StateIndex {
    pub fn build(states: ArrayView2<f64>) -> Self {
        let mut lookup: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut rows: Vec<f64> = Vec::new();
        let mut ids = Vec::with_capacity(states.nrows());
        for row in states.rows() {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            let next = lookup.len();
            let id = *lookup.entry(key).or_insert_with(|| {
                rows.extend(row.iter());
                next
            });
            ids.push(id);
        }
        let unique = Array2::from_shape_vec((lookup.len(), states.ncols()), rows)
            .expect("collected rows are rectangular");
        Self { unique, ids }
    }

    pub fn len(&self) -> usize {
        self.unique.nrows()
    }

    /// Sum per-sample rows into per-unique-state rows.
    pub fn reduce(&self, per_sample: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.len(), per_sample.ncols()));
        for (row, &id) in per_sample.rows().into_iter().zip(&self.ids) {
            let mut dst = out.row_mut(id);
            dst += &row;
        }
        out
    }
}

/// Draws minibatch index sets by walking a shuffled permutation and
/// reshuffling once it is exhausted.
#[derive(Debug, Clone)]
pub(crate) struct Minibatcher {
    order: Vec<usize>,
    cursor: usize,
    size: usize,
}

impl Minibatcher {
    pub fn new(len: usize, size: usize) -> Self {
        Self {
            order: (0..len).collect(),
            cursor: len,
            size: size.clamp(1, len.max(1)),
        }
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[usize] {
        if self.cursor + self.size > self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.size;
        &self.order[start..self.cursor]
    }

    /// Splits one fresh permutation into consecutive chunks (the last may be
    /// short), for epoch-style passes.
    pub fn epoch<R: Rng + ?Sized>(len: usize, size: usize, rng: &mut R) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(rng);
        order.chunks(size.max(1)).map(<[usize]>::to_vec).collect()
    }
}

pub(crate) fn select_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(0), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn groups_identical_rows() {
        let s = array![[1.0, 0.0], [0.5, 0.5], [1.0, 0.0]];
        let idx = StateIndex::build(s.view());
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.ids, vec![0, 1, 0]);
        let r = idx.reduce(array![[1.0], [2.0], [3.0]].view());
        assert_eq!(r, array![[4.0], [2.0]]);
    }
}
