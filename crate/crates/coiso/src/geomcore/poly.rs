//! Sparse real polynomials and polynomial-coefficient forms with exact
//! derivatives. Used for random test observables and Jacobi sweeps.

use std::sync::Arc;

use nalgebra::DVector;

use super::alt::{tuples, AltTensor};
use super::chart::Chart;
use super::fields::{KForm, ScalarField};
use crate::sampling::{uniform, SeededRng};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    /// (variable, power) pairs with distinct variables and power >= 1.
    pub powers: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub nvars: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: Vec::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Polynomial { nvars, terms: vec![Monomial { coef: c, powers: vec![] }] }
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Polynomial { nvars, terms: vec![Monomial { coef: 1.0, powers: vec![(i, 1)] }] }
    }

    /// Random polynomial in at most `nv` of the variables, with `nterms`
    /// monomials of total degree at most `max_deg` and coefficients in [-1, 1].
    pub fn random(rng: &mut SeededRng, nvars: usize, nv: usize, nterms: usize, max_deg: u32) -> Self {
        let vars: Vec<usize> = (0..nv.min(nvars)).map(|_| rng.random_range(0..nvars)).collect();
        let mut terms = Vec::with_capacity(nterms);
        for _ in 0..nterms {
            let deg = rng.random_range(1..=max_deg);
            let mut powers: Vec<(usize, u32)> = Vec::new();
            for _ in 0..deg {
                let v = vars[rng.random_range(0..vars.len())];
                match powers.iter_mut().find(|(w, _)| *w == v) {
                    Some(p) => p.1 += 1,
                    None => powers.push((v, 1)),
                }
            }
            powers.sort_unstable();
            terms.push(Monomial { coef: uniform(rng, -1.0, 1.0), powers });
        }
        Polynomial { nvars, terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coef * m.powers.iter().map(|&(v, p)| x[v].powi(p as i32)).product::<f64>())
            .sum()
    }

    pub fn partial(&self, i: usize) -> Polynomial {
        let mut terms = Vec::new();
        for m in &self.terms {
            if let Some(pos) = m.powers.iter().position(|&(v, _)| v == i) {
                let p = m.powers[pos].1;
                let mut powers = m.powers.clone();
                if p == 1 {
                    powers.remove(pos);
                } else {
                    powers[pos].1 = p - 1;
                }
                terms.push(Monomial { coef: m.coef * p as f64, powers });
            }
        }
        Polynomial { nvars: self.nvars, terms }
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.nvars);
        for m in &self.terms {
            for (k, &(v, p)) in m.powers.iter().enumerate() {
                let rest: f64 = m
                    .powers
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, &(w, q))| x[w].powi(q as i32))
                    .product();
                g[v] += m.coef * p as f64 * x[v].powi(p as i32 - 1) * rest;
            }
        }
        g
    }

    pub fn scaled(&self, c: f64) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|m| Monomial { coef: m.coef * c, powers: m.powers.clone() }).collect(),
        }
    }

    pub fn plus(&self, other: &Polynomial) -> Polynomial {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Polynomial { nvars: self.nvars, terms }
    }

    /// Scalar field with exact gradient.
    pub fn to_field(&self, chart: Arc<Chart>) -> ScalarField {
        assert_eq!(chart.dim(), self.nvars);
        let (p1, p2) = (self.clone(), self.clone());
        ScalarField::new(chart, move |x| p1.eval(x)).with_gradient(move |x| p2.gradient(x))
    }
}

/// k-form with polynomial coefficients on increasing index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyForm {
    pub dim: usize,
    pub degree: usize,
    pub coeffs: Vec<Polynomial>,
}

impl PolyForm {
    pub fn random(rng: &mut SeededRng, dim: usize, degree: usize, nterms: usize, max_deg: u32) -> Self {
        let coeffs = tuples(dim, degree)
            .map(|_| Polynomial::random(rng, dim, dim.min(3), nterms, max_deg))
            .collect();
        PolyForm { dim, degree, coeffs }
    }

    pub fn eval(&self, x: &[f64]) -> AltTensor {
        AltTensor::from_comps(self.dim, self.degree, self.coeffs.iter().map(|p| p.eval(x)).collect())
    }

    /// Symbolic exterior derivative.
    pub fn d(&self) -> PolyForm {
        let probe = AltTensor::zeros(self.dim, self.degree);
        let mut coeffs = Vec::new();
        for t in tuples(self.dim, self.degree + 1) {
            let mut acc = Polynomial::zero(self.dim);
            for j in 0..t.len() {
                let rest: Vec<usize> = t.iter().enumerate().filter(|(q, _)| *q != j).map(|(_, &v)| v).collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                acc = acc.plus(&self.coeffs[probe.rank(&rest)].partial(t[j]).scaled(sign));
            }
            coeffs.push(acc);
        }
        PolyForm { dim: self.dim, degree: self.degree + 1, coeffs }
    }

    /// Form with an exact exterior-derivative hook (recursively).
    pub fn to_kform(&self, chart: Arc<Chart>) -> KForm {
        assert_eq!(chart.dim(), self.dim);
        let me = self.clone();
        let f = KForm::new(chart.clone(), self.degree, move |x| me.eval(x));
        if self.degree < self.dim {
            let me = self.clone();
            f.with_exact_d_lazy(move || me.d().to_kform(chart.clone()))
        } else {
            f
        }
    }
}
