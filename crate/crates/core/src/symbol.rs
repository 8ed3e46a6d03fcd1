//! Process-wide string interning for edge and node labels.
//!
//! Kernel evaluation compares labels in its innermost loop, so structures
//! store [`Sym`] handles instead of strings. Handles are only meaningful
//! for equality and table lookups; any ordering that must be reproducible
//! goes through [`Sym::as_str`].

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, LazyLock, RwLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Default)]
struct Interner {
    ids: HashMap<Arc<str>, u32>,
    names: Vec<Arc<str>>,
}

static INTERNER: LazyLock<RwLock<Interner>> = LazyLock::new(Default::default);

/// Interned label.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sym(u32);

impl Sym {
    pub fn new(name: &str) -> Sym {
        if let Some(&id) = INTERNER.read().unwrap().ids.get(name) {
            return Sym(id);
        }
        let mut table = INTERNER.write().unwrap();
        if let Some(&id) = table.ids.get(name) {
            return Sym(id);
        }
        let id = u32::try_from(table.names.len()).expect("symbol table overflow");
        let name: Arc<str> = Arc::from(name);
        table.names.push(name.clone());
        table.ids.insert(name, id);
        Sym(id)
    }

    /// Looks a name up without interning it.
    pub fn lookup(name: &str) -> Option<Sym> {
        INTERNER.read().unwrap().ids.get(name).copied().map(Sym)
    }

    pub fn as_str(&self) -> Arc<str> {
        INTERNER.read().unwrap().names[self.0 as usize].clone()
    }

    pub(crate) fn index(self) -> usize {
        self.0 as usize
    }

    /// Number of symbols interned so far.
    pub(crate) fn table_len() -> usize {
        INTERNER.read().unwrap().names.len()
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.as_str())
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Sym {
        Sym::new(s)
    }
}

impl Serialize for Sym {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_str())
    }
}

impl<'de> Deserialize<'de> for Sym {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Sym, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Sym::new(&s))
    }
}
