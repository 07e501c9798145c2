use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

pub type Point = Vec<f64>;
pub type DomainFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A named coordinate domain. All fields of a model live on one chart.
#[derive(Clone)]
pub struct Chart {
    names: Vec<String>,
    domain: Option<DomainFn>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("dim", &self.names.len())
            .field("names", &self.names)
            .field("restricted", &self.domain.is_some())
            .finish()
    }
}

impl Chart {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Arc<Chart>> {
        Self::build(names.into_iter().map(Into::into).collect(), None)
    }

    pub fn with_domain<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        domain: DomainFn,
    ) -> Result<Arc<Chart>> {
        Self::build(names.into_iter().map(Into::into).collect(), Some(domain))
    }

    /// Chart with coordinates `x0, x1, ...`.
    pub fn euclidean(dim: usize) -> Arc<Chart> {
        Self::build((0..dim).map(|i| format!("x{i}")).collect(), None).expect("valid names")
    }

    fn build(names: Vec<String>, domain: Option<DomainFn>) -> Result<Arc<Chart>> {
        if names.is_empty() {
            return Err(Error::Invalid("chart dimension must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Invalid(format!("duplicate coordinate name `{n}`")));
            }
        }
        Ok(Arc::new(Chart { names, domain }))
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn domain(&self) -> Option<&DomainFn> {
        self.domain.as_ref()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().all(|v| v.is_finite())
            && self.domain.as_ref().is_none_or(|d| d(x))
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, chart has {}",
                x.len(),
                self.dim()
            )));
        }
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { point: x.to_vec() })
        }
    }

    /// Same coordinate names (domain predicates are not compared).
    pub fn same_as(&self, other: &Chart) -> bool {
        self.names == other.names
    }

    pub fn ensure_same(&self, other: &Chart, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::ChartMismatch(what.to_string()))
        }
    }
}
