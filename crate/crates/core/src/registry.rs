//! Name-keyed registries for interchangeable strategies.

use std::collections::BTreeMap;
use std::sync::Arc;

/// Implemented by every strategy trait object that can be looked up by name.
pub trait Named {
    fn name(&self) -> &'static str;
}

/// Strategies of one kind, keyed by their `name()`.
pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, strategy: Arc<T>) -> &mut Self {
        self.entries.insert(strategy.name(), strategy);
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>, crate::Error> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| crate::Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
