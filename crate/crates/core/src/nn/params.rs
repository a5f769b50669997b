//! Named parameter storage shared across tape builds.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use std::collections::HashMap;

/// Handle to one parameter matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// All trainable matrices of a model, addressed by name. Tapes are rebuilt
/// every batch; parameters live here in between.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    trainable: Vec<bool>,
    index: HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a zero-initialized parameter.
    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.insert(name, Array2::zeros((rows, cols)))
    }

    /// Register a parameter with uniform Glorot initialization.
    pub fn glorot(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut ChaCha20Rng,
    ) -> ParamId {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let value = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound));
        self.insert(name, value)
    }

    pub fn insert(&mut self, name: &str, value: Array2<f64>) -> ParamId {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter '{name}'"
        );
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.values.push(value);
        self.trainable.push(true);
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> ParamId {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.values.len()).map(ParamId)
    }

    /// Freeze parameters whose name starts with `prefix`; the optimizer skips
    /// them and their stored values stay bit-identical.
    pub fn freeze_prefix(&mut self, prefix: &str) {
        for (i, name) in self.names.iter().enumerate() {
            if name.starts_with(prefix) {
                self.trainable[i] = false;
            }
        }
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.trainable[id.0]
    }

    /// Iterate (name, value) pairs in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(|s| s.as_str()).zip(self.values.iter())
    }
}

/// Parameter gradients accumulated by one backward pass.
#[derive(Debug)]
pub struct Gradients {
    pub(crate) by_param: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub(crate) fn new(n: usize) -> Self {
        Gradients {
            by_param: (0..n).map(|_| None).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.by_param.get(id.0).and_then(|g| g.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn registration_and_lookup() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut params = ParamSet::new();
        let w = params.glorot("enc/w", 4, 3, &mut rng);
        let b = params.zeros("enc/b", 1, 3);
        assert_eq!(params.id("enc/w"), w);
        assert_eq!(params.get(b).sum(), 0.0);
        assert_eq!(params.len(), 2);
        let bound = (6.0 / 7.0f64).sqrt();
        assert!(params.get(w).iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn glorot_is_deterministic_per_seed() {
        let mut a = ParamSet::new();
        let mut b = ParamSet::new();
        a.glorot("w", 5, 5, &mut ChaCha20Rng::seed_from_u64(9));
        b.glorot("w", 5, 5, &mut ChaCha20Rng::seed_from_u64(9));
        assert_eq!(a.get(a.id("w")), b.get(b.id("w")));
    }

    #[test]
    fn freeze_prefix_marks_parameters() {
        let mut params = ParamSet::new();
        params.zeros("encoder/w", 2, 2);
        params.zeros("decoder/w", 2, 2);
        params.freeze_prefix("encoder/");
        assert!(!params.is_trainable(params.id("encoder/w")));
        assert!(params.is_trainable(params.id("decoder/w")));
    }

    #[test]
    #[should_panic(expected = "duplicate parameter")]
    fn duplicate_names_panic() {
        let mut params = ParamSet::new();
        params.zeros("w", 1, 1);
        params.zeros("w", 1, 1);
    }
}
