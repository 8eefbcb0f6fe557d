//! Evaluate-once cache shared by the tensor oracles and the QoI oracle.

use crate::error::Result;
use std::collections::HashMap;
use std::hash::Hash;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

/// Memoizes an expensive scalar function by key.
///
/// Concurrent callers asking for the same missing key block on a per-key
/// slot, so every key is evaluated at most once. Failed evaluations are not
/// cached.
pub struct EvalCache<K> {
    slots: Mutex<HashMap<K, Arc<Mutex<Option<f64>>>>>,
    evaluations: AtomicUsize,
}

impl<K: Hash + Eq + Clone> Default for EvalCache<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Hash + Eq + Clone> EvalCache<K> {
    pub fn new() -> Self {
        EvalCache {
            slots: Mutex::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn get_or_eval<F>(&self, key: &K, f: F) -> Result<f64>
    where
        F: FnOnce() -> Result<f64>,
    {
        let slot = {
            let mut map = self.slots.lock().expect("cache map poisoned");
            map.entry(key.clone()).or_default().clone()
        };
        let mut guard = slot.lock().expect("cache slot poisoned");
        if let Some(v) = *guard {
            return Ok(v);
        }
        let v = f()?;
        *guard = Some(v);
        self.evaluations.fetch_add(1, Ordering::SeqCst);
        Ok(v)
    }

    pub fn get(&self, key: &K) -> Option<f64> {
        let slot = self.slots.lock().expect("cache map poisoned").get(key).cloned()?;
        let v = *slot.lock().expect("cache slot poisoned");
        v
    }

    /// Number of distinct successful evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn evaluates_each_key_once_under_contention() {
        let cache: EvalCache<u32> = EvalCache::new();
        let calls = AtomicUsize::new(0);
        let keys: Vec<u32> = (0..400).map(|i| i % 17).collect();
        let vals: Vec<f64> = keys
            .par_iter()
            .map(|&k| {
                cache
                    .get_or_eval(&k, || {
                        calls.fetch_add(1, Ordering::SeqCst);
                        Ok(k as f64 * 2.0)
                    })
                    .unwrap()
            })
            .collect();
        assert_eq!(calls.load(Ordering::SeqCst), 17);
        assert_eq!(cache.evaluations(), 17);
        assert!(vals.iter().zip(&keys).all(|(v, &k)| *v == k as f64 * 2.0));
    }

    #[test]
    fn failures_are_not_cached() {
        let cache: EvalCache<u8> = EvalCache::new();
        assert!(cache
            .get_or_eval(&1, || Err(crate::Error::Numerical("boom".into())))
            .is_err());
        assert_eq!(cache.get_or_eval(&1, || Ok(4.0)).unwrap(), 4.0);
        assert_eq!(cache.evaluations(), 1);
    }
}
