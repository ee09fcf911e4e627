//! Name-keyed registry of interchangeable strategy objects.

use std::collections::BTreeMap;
use std::sync::Arc;

/// Anything that can be registered under a stable name.
pub trait Named {
    fn name(&self) -> &'static str;

    /// Alternative spellings accepted on lookup.
    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }
}

/// Strategies of one family, looked up by name or alias at run time.
pub struct Registry<T: ?Sized + Named> {
    entries: BTreeMap<&'static str, Arc<T>>,
    aliases: BTreeMap<&'static str, &'static str>,
}

impl<T: ?Sized + Named> Default for Registry<T> {
    fn default() -> Self {
        Registry { entries: BTreeMap::new(), aliases: BTreeMap::new() }
    }
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a strategy, replacing any previous one with the same name.
    pub fn register(&mut self, item: Arc<T>) {
        let name = item.name();
        for alias in item.aliases() {
            self.aliases.insert(alias, name);
        }
        self.entries.insert(name, item);
    }

    pub fn get(&self, name: &str) -> Option<Arc<T>> {
        let key = self.aliases.get(name).copied().unwrap_or(name);
        self.entries.get(key).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
