use std::collections::BTreeMap;

use crate::embedding::CoisotropicEmbedding;
use crate::poisson::lift;
use crate::{Error, Result, ScalarField};

/// Named scalar fields a model exposes to expressions.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    fields: BTreeMap<String, ScalarField>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, f: ScalarField) -> Result<()> {
        let name = name.into();
        if self.fields.contains_key(&name) {
            return Err(Error::Invalid(format!("observable {name} registered twice")));
        }
        self.fields.insert(name, f);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ScalarField> {
        self.fields.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fields.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// The same observables pulled back to the enlarged chart by `tau`.
    pub fn lifted(&self, e: &CoisotropicEmbedding) -> Registry {
        Registry { fields: self.fields.iter().map(|(k, f)| (k.clone(), lift(f, e))).collect() }
    }
}
