use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Handle to one array in a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotId(usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    /// `[rows, cols]` for matrices, `[len]` for vectors.
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub offset: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// All learnable arrays of a model in one flat buffer with stable,
/// registration-ordered addressing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    slots: Vec<Slot>,
    values: Vec<f64>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, shape: Vec<usize>) -> SlotId {
        let slot = Slot {
            name: name.to_string(),
            shape,
            offset: self.values.len(),
        };
        self.values.resize(self.values.len() + slot.len(), 0.0);
        self.slots.push(slot);
        SlotId(self.slots.len() - 1)
    }

    /// Registers a `rows × cols` matrix initialized uniformly in
    /// `±1/sqrt(cols)`.
    pub fn add_matrix<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, rng: &mut R) -> SlotId {
        let id = self.push(name, vec![rows, cols]);
        let bound = 1.0 / (cols as f64).sqrt();
        let range = self.slots[id.0].range();
        for v in &mut self.values[range] {
            *v = rng.random_range(-bound..bound);
        }
        id
    }

    /// Registers a zero-initialized vector.
    pub fn add_vector(&mut self, name: &str, len: usize) -> SlotId {
        self.push(name, vec![len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, id: SlotId) -> &Slot {
        &self.slots[id.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn matrix(&self, id: SlotId) -> ArrayView2<'_, f64> {
        let s = &self.slots[id.0];
        ArrayView2::from_shape((s.shape[0], s.shape[1]), &self.values[s.range()]).unwrap()
    }

    pub fn vector(&self, id: SlotId) -> ArrayView1<'_, f64> {
        let s = &self.slots[id.0];
        ArrayView1::from(&self.values[s.range()])
    }

    pub fn matrix_mut(&mut self, id: SlotId) -> ArrayViewMut2<'_, f64> {
        let s = &self.slots[id.0];
        let shape = (s.shape[0], s.shape[1]);
        let range = s.range();
        ArrayViewMut2::from_shape(shape, &mut self.values[range]).unwrap()
    }

    pub fn vector_mut(&mut self, id: SlotId) -> ArrayViewMut1<'_, f64> {
        let range = self.slots[id.0].range();
        ArrayViewMut1::from(&mut self.values[range])
    }

    pub fn zero_gradient(&self) -> Gradient {
        Gradient {
            slots: self.slots.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    /// Replaces all values, keeping the layout.
    pub fn load_values(&mut self, values: Vec<f64>) -> crate::Result<()> {
        if values.len() != self.values.len() {
            return Err(crate::Error::Dimension {
                context: "parameter values",
                expected: self.values.len(),
                got: values.len(),
            });
        }
        self.values = values;
        Ok(())
    }
}

/// Gradient with the same layout as the store it was created from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    slots: Vec<Slot>,
    values: Vec<f64>,
}

impl Gradient {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matrix_mut(&mut self, id: SlotId) -> ArrayViewMut2<'_, f64> {
        let s = &self.slots[id.0];
        let shape = (s.shape[0], s.shape[1]);
        let range = s.range();
        ArrayViewMut2::from_shape(shape, &mut self.values[range]).unwrap()
    }

    pub fn vector_mut(&mut self, id: SlotId) -> ArrayViewMut1<'_, f64> {
        let range = self.slots[id.0].range();
        ArrayViewMut1::from(&mut self.values[range])
    }

    pub fn matrix(&self, id: SlotId) -> ArrayView2<'_, f64> {
        let s = &self.slots[id.0];
        ArrayView2::from_shape((s.shape[0], s.shape[1]), &self.values[s.range()]).unwrap()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        assert_eq!(self.values.len(), other.values.len(), "gradient layouts differ");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_and_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParameterStore::new();
        let w = store.add_matrix("w", 3, 4, &mut rng);
        let b = store.add_vector("b", 3);
        assert_eq!(store.len(), 15);
        assert_eq!(store.slot(b).offset, 12);
        assert!(store.matrix(w).iter().all(|v| v.abs() <= 0.5));
        assert!(store.vector(b).iter().all(|&v| v == 0.0));
        store.matrix_mut(w)[[2, 3]] = 9.0;
        assert_eq!(store.values()[11], 9.0);
        let mut g = store.zero_gradient();
        g.vector_mut(b)[0] = 1.0;
        assert_eq!(g.values()[12], 1.0);
    }
}
