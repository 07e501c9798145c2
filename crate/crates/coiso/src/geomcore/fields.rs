use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::alt::AltTensor;
use super::chart::Chart;
use crate::{Error, Result};

pub(crate) type EvalFn<T> = Arc<dyn Fn(&[f64]) -> Result<T> + Send + Sync>;

/// Real-valued function on a chart, optionally with an exact gradient.
#[derive(Clone)]
pub struct ScalarField {
    chart: Arc<Chart>,
    eval: EvalFn<f64>,
    grad: Option<EvalFn<DVector<f64>>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.chart.dim())
            .field("exact_gradient", &self.grad.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(chart: Arc<Chart>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { chart, eval: Arc::new(move |x| Ok(f(x))), grad: None }
    }

    pub fn try_new(
        chart: Arc<Chart>,
        f: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarField { chart, eval: Arc::new(f), grad: None }
    }

    pub fn with_gradient(
        mut self,
        g: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(move |x| Ok(g(x))));
        self
    }

    pub fn with_try_gradient(
        mut self,
        g: impl Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn without_gradient(mut self) -> Self {
        self.grad = None;
        self
    }

    pub fn coordinate(chart: Arc<Chart>, i: usize) -> Self {
        let n = chart.dim();
        ScalarField::new(chart, move |x| x[i]).with_gradient(move |_| {
            let mut g = DVector::zeros(n);
            g[i] = 1.0;
            g
        })
    }

    pub fn constant(chart: Arc<Chart>, c: f64) -> Self {
        let n = chart.dim();
        ScalarField::new(chart, move |_| c).with_gradient(move |_| DVector::zeros(n))
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.chart.check(x)?;
        let v = (self.eval)(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("scalar field at {x:?}")))
        }
    }

    pub fn has_exact_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn exact_gradient(&self, x: &[f64]) -> Option<Result<DVector<f64>>> {
        let g = self.grad.as_ref()?;
        Some(self.chart.check(x).and_then(|_| g(x)))
    }

    /// Pointwise product, with a product-rule gradient when both factors have one.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let out = ScalarField::try_new(self.chart.clone(), move |x| Ok(a.eval(x)? * b.eval(x)?));
        if self.grad.is_some() && other.grad.is_some() {
            out.with_try_gradient(move |x| {
                let ga = a2.exact_gradient(x).expect("checked")?;
                let gb = b2.exact_gradient(x).expect("checked")?;
                Ok(ga * b2.eval(x)? + gb * a2.eval(x)?)
            })
        } else {
            out
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn lin_comb(&self, ca: f64, other: &ScalarField, cb: f64) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let out =
            ScalarField::try_new(self.chart.clone(), move |x| Ok(ca * a.eval(x)? + cb * b.eval(x)?));
        if self.grad.is_some() && other.grad.is_some() {
            out.with_try_gradient(move |x| {
                Ok(a2.exact_gradient(x).expect("checked")? * ca
                    + b2.exact_gradient(x).expect("checked")? * cb)
            })
        } else {
            out
        }
    }
}

/// Vector field on a chart, optionally with an exact Jacobian `d X^i / d x^j`.
#[derive(Clone)]
pub struct VectorField {
    chart: Arc<Chart>,
    eval: EvalFn<DVector<f64>>,
    jac: Option<EvalFn<DMatrix<f64>>>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("dim", &self.chart.dim()).finish()
    }
}

impl VectorField {
    pub fn new(chart: Arc<Chart>, f: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static) -> Self {
        VectorField { chart, eval: Arc::new(move |x| Ok(f(x))), jac: None }
    }

    pub fn try_new(
        chart: Arc<Chart>,
        f: impl Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        VectorField { chart, eval: Arc::new(f), jac: None }
    }

    pub fn constant(chart: Arc<Chart>, v: DVector<f64>) -> Self {
        let n = chart.dim();
        VectorField::new(chart, move |_| v.clone()).with_jacobian(move |_| DMatrix::zeros(n, n))
    }

    pub fn coordinate(chart: Arc<Chart>, i: usize) -> Self {
        let mut v = DVector::zeros(chart.dim());
        v[i] = 1.0;
        Self::constant(chart, v)
    }

    pub fn with_jacobian(
        mut self,
        j: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Arc::new(move |x| Ok(j(x))));
        self
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.chart.check(x)?;
        let v = (self.eval)(x)?;
        if v.len() != self.chart.dim() {
            return Err(Error::Dimension("vector field output length".into()));
        }
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("vector field at {x:?}")))
        }
    }

    pub fn has_exact_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn exact_jacobian(&self, x: &[f64]) -> Option<Result<DMatrix<f64>>> {
        let j = self.jac.as_ref()?;
        Some(self.chart.check(x).and_then(|_| j(x)))
    }
}

pub(crate) type DHook = Arc<dyn Fn() -> KForm + Send + Sync>;

pub(crate) enum FormRepr {
    Leaf { eval: EvalFn<AltTensor>, exact_d: Option<DHook> },
    /// Central-difference exterior derivative of `base`.
    Derivative { base: KForm, h: f64 },
}

/// Differential k-form on a chart.
#[derive(Clone)]
pub struct KForm {
    chart: Arc<Chart>,
    degree: usize,
    repr: Arc<FormRepr>,
}

impl fmt::Debug for KForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KForm")
            .field("dim", &self.chart.dim())
            .field("degree", &self.degree)
            .field("exact_d", &self.has_exact_d())
            .finish()
    }
}

impl KForm {
    pub fn try_new(
        chart: Arc<Chart>,
        degree: usize,
        f: impl Fn(&[f64]) -> Result<AltTensor> + Send + Sync + 'static,
    ) -> Self {
        assert!(degree <= chart.dim(), "form degree exceeds chart dimension");
        KForm { chart, degree, repr: Arc::new(FormRepr::Leaf { eval: Arc::new(f), exact_d: None }) }
    }

    pub fn new(
        chart: Arc<Chart>,
        degree: usize,
        f: impl Fn(&[f64]) -> AltTensor + Send + Sync + 'static,
    ) -> Self {
        Self::try_new(chart, degree, move |x| Ok(f(x)))
    }

    /// 1-form from a covector-valued function.
    pub fn one_form(
        chart: Arc<Chart>,
        f: impl Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self::try_new(chart, 1, move |x| Ok(AltTensor::from_covector(&f(x)?)))
    }

    /// 2-form from an antisymmetric-matrix-valued function.
    pub fn two_form(
        chart: Arc<Chart>,
        f: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self::try_new(chart, 2, move |x| Ok(AltTensor::from_matrix(&f(x)?)))
    }

    pub fn constant(chart: Arc<Chart>, t: AltTensor) -> Self {
        assert_eq!(t.dim(), chart.dim());
        let degree = t.degree();
        let zero_d: Option<DHook> = if degree < chart.dim() {
            let c = chart.clone();
            Some(Arc::new(move || KForm::zero_leaf(c.clone(), degree + 1)))
        } else {
            None
        };
        let mut f = KForm::new(chart, degree, move |_| t.clone());
        f.set_exact_d(zero_d);
        f
    }

    fn zero_leaf(chart: Arc<Chart>, degree: usize) -> Self {
        let n = chart.dim();
        KForm::new(chart, degree, move |_| AltTensor::zeros(n, degree))
    }

    pub fn zero(chart: Arc<Chart>, degree: usize) -> Self {
        Self::constant(chart.clone(), AltTensor::zeros(chart.dim(), degree))
    }

    /// The coordinate differential `dx^i`.
    pub fn dx(chart: Arc<Chart>, i: usize) -> Self {
        let mut v = DVector::zeros(chart.dim());
        v[i] = 1.0;
        Self::constant(chart, AltTensor::from_covector(&v))
    }

    pub(crate) fn derivative(base: KForm, h: f64) -> Self {
        KForm {
            chart: base.chart.clone(),
            degree: base.degree + 1,
            repr: Arc::new(FormRepr::Derivative { base, h }),
        }
    }

    /// Attaches an exact exterior derivative.
    pub fn with_exact_d(mut self, d: KForm) -> Self {
        assert_eq!(d.degree, self.degree + 1, "exact derivative degree");
        self.set_exact_d(Some(Arc::new(move || d.clone())));
        self
    }

    /// Attaches an exact exterior derivative built on demand.
    pub fn with_exact_d_lazy(mut self, d: impl Fn() -> KForm + Send + Sync + 'static) -> Self {
        self.set_exact_d(Some(Arc::new(d)));
        self
    }

    fn set_exact_d(&mut self, d: Option<DHook>) {
        let repr = match &*self.repr {
            FormRepr::Leaf { eval, .. } => FormRepr::Leaf { eval: eval.clone(), exact_d: d },
            FormRepr::Derivative { .. } => panic!("cannot attach a hook to a derived form"),
        };
        self.repr = Arc::new(repr);
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn has_exact_d(&self) -> bool {
        matches!(&*self.repr, FormRepr::Leaf { exact_d: Some(_), .. })
    }

    pub fn exact_d(&self) -> Option<KForm> {
        match &*self.repr {
            FormRepr::Leaf { exact_d: Some(d), .. } => Some(d()),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<AltTensor> {
        self.chart.check(x)?;
        let t = match &*self.repr {
            FormRepr::Leaf { eval, .. } => eval(x)?,
            FormRepr::Derivative { h, .. } => self.eval_partial(x, &[], *h)?,
        };
        if t.dim() != self.chart.dim() || t.degree() != self.degree {
            return Err(Error::Dimension("form evaluator returned wrong shape".into()));
        }
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("{}-form at {x:?}", self.degree)));
        }
        Ok(t)
    }

    pub fn eval_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.eval(x)?.to_matrix())
    }

    pub fn eval_covector(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.eval(x)?.to_vector())
    }

    /// Evaluates on `degree` tangent vectors at `x`.
    pub fn on(&self, x: &[f64], vs: &[&DVector<f64>]) -> Result<f64> {
        Ok(self.eval(x)?.contract(vs))
    }

    /// Mixed partial derivatives of the component tensor along the sorted
    /// multi-index `multi`. Nested central differences are always applied in
    /// the same canonical order, so mixed partials commute bitwise and a
    /// repeated exterior derivative cancels to rounding level.
    pub(crate) fn eval_partial(&self, x: &[f64], multi: &[usize], h: f64) -> Result<AltTensor> {
        match &*self.repr {
            FormRepr::Leaf { eval, .. } => {
                if multi.is_empty() {
                    self.chart.check(x)?;
                    return eval(x);
                }
                let (m0, rest) = (multi[0], &multi[1..]);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[m0] += h;
                xm[m0] -= h;
                let fp = self.eval_partial(&xp, rest, h)?;
                let fm = self.eval_partial(&xm, rest, h)?;
                Ok(fp.sub(&fm).scale(0.5 / h))
            }
            FormRepr::Derivative { base, .. } => {
                let n = self.chart.dim();
                let k = base.degree;
                let parts: Vec<AltTensor> = (0..n)
                    .map(|i| {
                        let mut m = multi.to_vec();
                        m.push(i);
                        m.sort_unstable();
                        base.eval_partial(x, &m, h)
                    })
                    .collect::<Result<_>>()?;
                let mut out = AltTensor::zeros(n, k + 1);
                let ts: Vec<_> = out.tuples().collect();
                for (r, t) in ts.iter().enumerate() {
                    let mut s = 0.0;
                    for j in 0..t.len() {
                        let rest: Vec<usize> =
                            t.iter().enumerate().filter(|(q, _)| *q != j).map(|(_, &v)| v).collect();
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        s += sign * parts[t[j]].get(&rest);
                    }
                    out.comps_mut()[r] = s;
                }
                Ok(out)
            }
        }
    }
}

/// Antisymmetric contravariant 2-tensor field.
#[derive(Clone)]
pub struct Bivector {
    chart: Arc<Chart>,
    eval: EvalFn<DMatrix<f64>>,
}

impl fmt::Debug for Bivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bivector").field("dim", &self.chart.dim()).finish()
    }
}

impl Bivector {
    pub fn new(chart: Arc<Chart>, f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Bivector { chart, eval: Arc::new(move |x| Ok(f(x))) }
    }

    pub fn try_new(
        chart: Arc<Chart>,
        f: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        Bivector { chart, eval: Arc::new(f) }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.chart.check(x)?;
        let m = (self.eval)(x)?;
        if m.iter().all(|c| c.is_finite()) {
            Ok(m)
        } else {
            Err(Error::NonFinite(format!("bivector at {x:?}")))
        }
    }

    /// `L(a, b)` for covectors `a`, `b`.
    pub fn pair(&self, x: &[f64], a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        let m = self.eval(x)?;
        Ok(a.dot(&(m * b)))
    }
}
