use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One trainable array with its Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamArray {
    pub name: String,
    pub values: Vec<f64>,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

/// Every trainable array, addressed by name, plus the optimizer step count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    arrays: Vec<ParamArray>,
    step: u64,
}

/// Gradients laid out like a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    arrays: Vec<(String, Vec<f64>)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if self.index(&name).is_some() {
            return Err(Error::Argument(format!("parameter array '{name}' already exists")));
        }
        let n = values.len();
        self.arrays.push(ParamArray {
            name,
            values,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        });
        Ok(())
    }

    /// Restores an array with its moments, as read from a checkpoint.
    pub fn insert_full(&mut self, array: ParamArray) -> Result<()> {
        let n = array.values.len();
        if array.first_moment.len() != n || array.second_moment.len() != n {
            return Err(Error::Shape {
                name: format!("moments of '{}'", array.name),
                expected: n,
                actual: array.first_moment.len().min(array.second_moment.len()),
            });
        }
        if self.index(&array.name).is_some() {
            return Err(Error::Argument(format!("parameter array '{}' already exists", array.name)));
        }
        self.arrays.push(array);
        Ok(())
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.arrays.iter().position(|a| a.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.index(name).map(|i| self.arrays[i].values.as_slice())
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.index(name).map(move |i| &mut self.arrays[i].values)
    }

    /// Like [`get`](Self::get) but a missing array is an error.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.get(name)
            .ok_or_else(|| Error::Argument(format!("no parameter array named '{name}'")))
    }

    pub fn arrays(&self) -> &[ParamArray] {
        &self.arrays
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.iter().map(|a| a.name.as_str())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.arrays.iter().map(|a| a.values.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            arrays: self
                .arrays
                .iter()
                .map(|a| (a.name.clone(), vec![0.0; a.values.len()]))
                .collect(),
        }
    }
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, g)| g.as_slice())
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.arrays.iter_mut().find(|(n, _)| n == name).map(|(_, g)| g.as_mut_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.arrays.iter().map(|(n, g)| (n.as_str(), g.as_slice()))
    }

    pub fn is_finite(&self) -> bool {
        self.arrays.iter().all(|(_, g)| g.iter().all(|v| v.is_finite()))
    }

    /// Adds `other` into `self`; both must share a layout.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.arrays.len() != other.arrays.len() {
            return Err(Error::Shape {
                name: "gradient arrays".into(),
                expected: self.arrays.len(),
                actual: other.arrays.len(),
            });
        }
        for ((na, a), (nb, b)) in self.arrays.iter_mut().zip(&other.arrays) {
            if na != nb || a.len() != b.len() {
                return Err(Error::Shape {
                    name: format!("gradient '{na}'"),
                    expected: a.len(),
                    actual: b.len(),
                });
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        Ok(())
    }
}

/// Learning rate per array, looked up by the longest matching name prefix.
///
/// Array `pose/3` matches the key `pose`; an exact name wins over a prefix.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LrMap(pub BTreeMap<String, f64>);

impl LrMap {
    pub fn new(entries: &[(&str, f64)]) -> Self {
        LrMap(entries.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    pub fn lookup(&self, name: &str) -> Option<f64> {
        self.0
            .iter()
            .filter(|(k, _)| {
                name == k.as_str()
                    || (name.starts_with(k.as_str()) && name[k.len()..].starts_with('/'))
            })
            .max_by_key(|(k, _)| k.len())
            .map(|(_, v)| *v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every array in `store`.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, lr_map: &LrMap) -> Result<()> {
    adam_step_with(store, grads, lr_map, &AdamConfig::default())
}

pub fn adam_step_with(
    store: &mut ParamStore,
    grads: &Gradients,
    lr_map: &LrMap,
    cfg: &AdamConfig,
) -> Result<()> {
    // Validate everything before touching any state.
    let mut plan = Vec::with_capacity(store.arrays.len());
    for a in &store.arrays {
        let g = grads
            .get(&a.name)
            .ok_or_else(|| Error::Argument(format!("missing gradient for '{}'", a.name)))?;
        if g.len() != a.values.len() {
            return Err(Error::Shape {
                name: format!("gradient '{}'", a.name),
                expected: a.values.len(),
                actual: g.len(),
            });
        }
        let lr = lr_map
            .lookup(&a.name)
            .ok_or_else(|| Error::Config(format!("no learning rate for '{}'", a.name)))?;
        plan.push((g, lr));
    }
    let t = store.step + 1;
    let c1 = 1.0 - cfg.beta1.powf(t as f64);
    let c2 = 1.0 - cfg.beta2.powf(t as f64);
    for (a, (g, lr)) in store.arrays.iter_mut().zip(plan) {
        for i in 0..a.values.len() {
            let m = cfg.beta1 * a.first_moment[i] + (1.0 - cfg.beta1) * g[i];
            let v = cfg.beta2 * a.second_moment[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            a.first_moment[i] = m;
            a.second_moment[i] = v;
            if lr != 0.0 {
                a.values[i] -= lr * (m / c1) / ((v / c2).sqrt() + cfg.epsilon);
            }
        }
    }
    store.step = t;
    Ok(())
}
