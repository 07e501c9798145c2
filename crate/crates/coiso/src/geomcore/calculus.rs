use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::alt::AltTensor;
use super::chart::Chart;
use super::diff::DiffBackend;
use super::fields::{Bivector, EvalFn, KForm, ScalarField, VectorField};
use crate::{Error, Result};

pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm> {
    a.chart().ensure_same(b.chart(), "wedge operands")?;
    let (p, q, n) = (a.degree(), b.degree(), a.chart().dim());
    if p + q > n {
        return Err(Error::DegreeOverflow { p, q, dim: n });
    }
    let (a1, b1) = (a.clone(), b.clone());
    let mut out = KForm::try_new(a.chart().clone(), p + q, move |x| Ok(a1.eval(x)?.wedge(&b1.eval(x)?)));
    if p + q < n && a.has_exact_d() && b.has_exact_d() {
        let (a2, b2) = (a.clone(), b.clone());
        out = out.with_exact_d_lazy(move || {
            let da = a2.exact_d().expect("checked");
            let db = b2.exact_d().expect("checked");
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let t1 = wedge(&da, &b2).expect("degree checked");
            let t2 = wedge(&a2, &db).expect("degree checked");
            lin_comb(&[(1.0, t1), (sign, t2)]).expect("same chart")
        });
    }
    Ok(out)
}

/// Sum of scaled forms of equal degree; exact when every term is.
pub fn lin_comb(terms: &[(f64, KForm)]) -> Result<KForm> {
    let first = terms.first().ok_or_else(|| Error::Invalid("empty linear combination".into()))?;
    let chart = first.1.chart().clone();
    let degree = first.1.degree();
    for (_, f) in terms {
        chart.ensure_same(f.chart(), "linear combination")?;
        if f.degree() != degree {
            return Err(Error::Invalid("linear combination of forms of different degree".into()));
        }
    }
    let ts: Vec<(f64, KForm)> = terms.to_vec();
    let n = chart.dim();
    let mut out = KForm::try_new(chart.clone(), degree, move |x| {
        let mut acc = AltTensor::zeros(n, degree);
        for (c, f) in &ts {
            acc = acc.add(&f.eval(x)?.scale(*c));
        }
        Ok(acc)
    });
    if degree < n && terms.iter().all(|(_, f)| f.has_exact_d()) {
        let ts: Vec<(f64, KForm)> = terms.to_vec();
        out = out.with_exact_d_lazy(move || {
            let ds: Vec<(f64, KForm)> =
                ts.iter().map(|(c, f)| (*c, f.exact_d().expect("checked"))).collect();
            lin_comb(&ds).expect("consistent terms")
        });
    }
    Ok(out)
}

/// `f * a` for a scalar field `f`.
pub fn function_times(f: &ScalarField, a: &KForm) -> Result<KForm> {
    f.chart().ensure_same(a.chart(), "function times form")?;
    let (f1, a1) = (f.clone(), a.clone());
    let n = a.chart().dim();
    let mut out = KForm::try_new(a.chart().clone(), a.degree(), move |x| Ok(a1.eval(x)?.scale(f1.eval(x)?)));
    if a.degree() < n && f.has_exact_gradient() && a.has_exact_d() {
        let (f2, a2) = (f.clone(), a.clone());
        out = out.with_exact_d_lazy(move || {
            let g = f2.clone();
            let df = KForm::one_form(f2.chart().clone(), move |x| g.exact_gradient(x).expect("checked"));
            let t1 = wedge(&df, &a2).expect("degree checked");
            let t2 = function_times(&f2, &a2.exact_d().expect("checked")).expect("same chart");
            lin_comb(&[(1.0, t1), (1.0, t2)]).expect("same chart")
        });
    }
    Ok(out)
}

pub fn exterior_derivative(a: &KForm, backend: &DiffBackend) -> Result<KForm> {
    let n = a.chart().dim();
    if a.degree() >= n {
        return Err(Error::DegreeOverflow { p: a.degree(), q: 1, dim: n });
    }
    if backend.hooks_allowed() {
        if let Some(d) = a.exact_d() {
            return Ok(d);
        }
    }
    if backend.is_exact() {
        return Err(Error::MissingExactDerivative(format!("{}-form", a.degree())));
    }
    Ok(KForm::derivative(a.clone(), backend.h))
}

/// Contraction of `X` into the first slot of `a`.
pub fn interior_product(x: &VectorField, a: &KForm) -> Result<KForm> {
    x.chart().ensure_same(a.chart(), "interior product")?;
    if a.degree() == 0 {
        return Err(Error::InteriorOfFunction);
    }
    let (x1, a1) = (x.clone(), a.clone());
    Ok(KForm::try_new(a.chart().clone(), a.degree() - 1, move |p| Ok(a1.eval(p)?.interior(&x1.eval(p)?))))
}

/// `[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i`.
pub fn lie_bracket(x: &VectorField, y: &VectorField, backend: &DiffBackend) -> Result<VectorField> {
    x.chart().ensure_same(y.chart(), "Lie bracket")?;
    if backend.is_exact() && !(x.has_exact_jacobian() && y.has_exact_jacobian()) {
        return Err(Error::MissingExactDerivative("vector field Jacobian".into()));
    }
    let (x1, y1, b) = (x.clone(), y.clone(), *backend);
    Ok(VectorField::try_new(x.chart().clone(), move |p| {
        let xv = x1.eval(p)?;
        let yv = y1.eval(p)?;
        let hooks = b.hooks_allowed();
        let dy_x = match (hooks, y1.exact_jacobian(p)) {
            (true, Some(j)) => j? * &xv,
            _ => directional_vector(&b, p, &xv, &y1)?,
        };
        let dx_y = match (hooks, x1.exact_jacobian(p)) {
            (true, Some(j)) => j? * &yv,
            _ => directional_vector(&b, p, &yv, &x1)?,
        };
        Ok(dy_x - dx_y)
    }))
}

fn directional_vector(b: &DiffBackend, p: &[f64], dir: &DVector<f64>, f: &VectorField) -> Result<DVector<f64>> {
    let norm = dir.norm();
    if norm == 0.0 {
        return Ok(DVector::zeros(p.len()));
    }
    let u = dir / norm;
    let h = b.h;
    let xp: Vec<f64> = p.iter().zip(u.iter()).map(|(a, c)| a + h * c).collect();
    let xm: Vec<f64> = p.iter().zip(u.iter()).map(|(a, c)| a - h * c).collect();
    Ok((f.eval(&xp)? - f.eval(&xm)?) * (norm / (2.0 * h)))
}

/// `{f,{g,h}} + {g,{h,f}} + {h,{f,g}}` at `p` with `{a,b} = L(da, db)`.
///
/// Inner brackets use the backend gradients; the outer derivative is a
/// central difference of the inner bracket along `L^T df`.
pub fn jacobiator(
    l: &Bivector,
    f: &ScalarField,
    g: &ScalarField,
    h: &ScalarField,
    p: &[f64],
    backend: &DiffBackend,
) -> Result<f64> {
    if backend.is_exact() {
        return Err(Error::MissingExactDerivative("bivector derivative".into()));
    }
    let br = |a: &ScalarField, b: &ScalarField, x: &[f64]| -> Result<f64> {
        let m = l.eval(x)?;
        let ga = backend.gradient(a, x)?;
        let gb = backend.gradient(b, x)?;
        Ok(ga.dot(&(m * gb)))
    };
    let outer = |a: &ScalarField, b: &ScalarField, c: &ScalarField| -> Result<f64> {
        let m = l.eval(p)?;
        let v = m.transpose() * backend.gradient(a, p)?;
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let u = v / norm;
        Ok(norm * backend.directional(p, &u, |x| br(b, c, x))?)
    };
    Ok(outer(f, g, h)? + outer(g, h, f)? + outer(h, f, g)?)
}

/// Smooth map between charts, `source -> target`, with an optional exact
/// Jacobian (`target_dim x source_dim`).
#[derive(Clone)]
pub struct ChartMap {
    source: Arc<Chart>,
    target: Arc<Chart>,
    map: EvalFn<DVector<f64>>,
    jac: Option<EvalFn<DMatrix<f64>>>,
    backend: DiffBackend,
}

impl ChartMap {
    pub fn new(
        source: Arc<Chart>,
        target: Arc<Chart>,
        map: impl Fn(&[f64]) -> Result<DVector<f64>> + Send + Sync + 'static,
    ) -> Self {
        ChartMap { source, target, map: Arc::new(map), jac: None, backend: DiffBackend::default() }
    }

    pub fn with_jacobian(
        mut self,
        j: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Arc::new(j));
        self
    }

    pub fn with_backend(mut self, b: DiffBackend) -> Self {
        self.backend = b;
        self
    }

    pub fn source(&self) -> &Arc<Chart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Chart> {
        &self.target
    }

    pub fn has_exact_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn apply(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.source.check(x)?;
        let y = (self.map)(x)?;
        if y.len() != self.target.dim() {
            return Err(Error::Dimension("chart map output length".into()));
        }
        Ok(y)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.source.check(x)?;
        match &self.jac {
            Some(j) => j(x),
            None => self.backend.fd_jacobian(x, |y| self.apply(y)),
        }
    }
}

pub fn pullback_form(form: &KForm, map: &ChartMap) -> Result<KForm> {
    form.chart().ensure_same(map.target(), "pullback target")?;
    let (f1, m1) = (form.clone(), map.clone());
    let k = form.degree();
    let n = map.source().dim();
    if k > n {
        return Err(Error::DegreeOverflow { p: k, q: 0, dim: n });
    }
    let mut out = KForm::try_new(map.source().clone(), k, move |x| {
        let y = m1.apply(x)?;
        let t = f1.eval(y.as_slice())?;
        if k == 0 {
            return Ok(AltTensor::scalar(n, t.value()));
        }
        let j = m1.jacobian(x)?;
        match k {
            1 => Ok(AltTensor::from_covector(&(j.transpose() * t.to_vector()))),
            2 => Ok(AltTensor::from_matrix(&(j.transpose() * t.to_matrix() * &j))),
            _ => {
                let mut out = AltTensor::zeros(n, k);
                let cols: Vec<DVector<f64>> = (0..n).map(|i| j.column(i).into_owned()).collect();
                let ts: Vec<_> = out.tuples().collect();
                for (r, tu) in ts.iter().enumerate() {
                    let vs: Vec<&DVector<f64>> = tu.iter().map(|&i| &cols[i]).collect();
                    out.comps_mut()[r] = t.contract(&vs);
                }
                Ok(out)
            }
        }
    });
    if k < n && map.has_exact_jacobian() && form.has_exact_d() {
        let (f2, m2) = (form.clone(), map.clone());
        out = out.with_exact_d_lazy(move || {
            pullback_form(&f2.exact_d().expect("checked"), &m2).expect("consistent map")
        });
    }
    Ok(out)
}

pub fn pullback_scalar(f: &ScalarField, map: &ChartMap) -> Result<ScalarField> {
    f.chart().ensure_same(map.target(), "pullback target")?;
    let (f1, m1) = (f.clone(), map.clone());
    let out = ScalarField::try_new(map.source().clone(), move |x| f1.eval(m1.apply(x)?.as_slice()));
    if f.has_exact_gradient() && map.has_exact_jacobian() {
        let (f2, m2) = (f.clone(), map.clone());
        return Ok(out.with_try_gradient(move |x| {
            let y = m2.apply(x)?;
            let g = f2.exact_gradient(y.as_slice()).expect("checked")?;
            Ok(m2.jacobian(x)?.transpose() * g)
        }));
    }
    Ok(out)
}
