use nalgebra::{DMatrix, DVector};

/// Alternating k-tensor at a point, stored on strictly increasing index
/// tuples in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct AltTensor {
    dim: usize,
    degree: usize,
    comps: Vec<f64>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Iterator over increasing k-tuples of 0..n in lexicographic order.
pub struct Tuples {
    n: usize,
    cur: Option<Vec<usize>>,
}

impl Iterator for Tuples {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.cur = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.cur = Some(next);
                break;
            }
        }
        Some(out)
    }
}

pub fn tuples(n: usize, k: usize) -> Tuples {
    Tuples { n, cur: if k <= n { Some((0..k).collect()) } else { None } }
}

/// Sorts `idx` in place, returning the permutation sign, or 0 on a repeat.
fn sort_sign(idx: &mut [usize]) -> f64 {
    let mut sign = 1.0;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        0.0
    } else {
        sign
    }
}

fn det(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.clone().lu().determinant(),
    }
}

impl AltTensor {
    pub fn zeros(dim: usize, degree: usize) -> Self {
        AltTensor { dim, degree, comps: vec![0.0; binomial(dim, degree)] }
    }

    pub fn scalar(dim: usize, v: f64) -> Self {
        AltTensor { dim, degree: 0, comps: vec![v] }
    }

    pub fn from_comps(dim: usize, degree: usize, comps: Vec<f64>) -> Self {
        assert_eq!(comps.len(), binomial(dim, degree), "component count");
        AltTensor { dim, degree, comps }
    }

    pub fn from_covector(v: &DVector<f64>) -> Self {
        AltTensor { dim: v.len(), degree: 1, comps: v.iter().copied().collect() }
    }

    /// Builds a 2-tensor from the strict upper triangle of `m`.
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut comps = Vec::with_capacity(binomial(n, 2));
        for i in 0..n {
            for j in i + 1..n {
                comps.push(m[(i, j)]);
            }
        }
        AltTensor { dim: n, degree: 2, comps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn comps(&self) -> &[f64] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [f64] {
        &mut self.comps
    }

    pub fn tuples(&self) -> Tuples {
        tuples(self.dim, self.degree)
    }

    /// Lexicographic rank of an increasing tuple.
    pub fn rank(&self, idx: &[usize]) -> usize {
        let (n, k) = (self.dim, idx.len());
        let mut r = 0;
        let mut prev = 0;
        for (pos, &i) in idx.iter().enumerate() {
            for v in prev..i {
                r += binomial(n - v - 1, k - pos - 1);
            }
            prev = i + 1;
        }
        r
    }

    /// Component on an arbitrary index list (antisymmetry applied).
    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut s = idx.to_vec();
        let sign = sort_sign(&mut s);
        if sign == 0.0 {
            0.0
        } else {
            sign * self.comps[self.rank(&s)]
        }
    }

    pub fn value(&self) -> f64 {
        assert_eq!(self.degree, 0);
        self.comps[0]
    }

    pub fn to_vector(&self) -> DVector<f64> {
        assert_eq!(self.degree, 1);
        DVector::from_column_slice(&self.comps)
    }

    /// Full antisymmetric matrix of a 2-tensor, `m[(i,j)] = a(e_i, e_j)`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.degree, 2);
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        let mut r = 0;
        for i in 0..n {
            for j in i + 1..n {
                m[(i, j)] = self.comps[r];
                m[(j, i)] = -self.comps[r];
                r += 1;
            }
        }
        m
    }

    /// Evaluates on `degree` vectors: sum over tuples of component times minor.
    pub fn contract(&self, vs: &[&DVector<f64>]) -> f64 {
        assert_eq!(vs.len(), self.degree);
        match self.degree {
            0 => self.comps[0],
            1 => self.comps.iter().zip(vs[0].iter()).map(|(a, b)| a * b).sum(),
            2 => {
                let (x, y) = (vs[0], vs[1]);
                let mut s = 0.0;
                let mut r = 0;
                for i in 0..self.dim {
                    for j in i + 1..self.dim {
                        s += self.comps[r] * (x[i] * y[j] - x[j] * y[i]);
                        r += 1;
                    }
                }
                s
            }
            k => self
                .tuples()
                .zip(self.comps.iter())
                .filter(|(_, c)| **c != 0.0)
                .map(|(t, c)| c * det(&DMatrix::from_fn(k, k, |a, b| vs[b][t[a]])))
                .sum(),
        }
    }

    /// Contraction of `v` into the first slot.
    pub fn interior(&self, v: &DVector<f64>) -> AltTensor {
        assert!(self.degree >= 1);
        if self.degree == 2 {
            let m = self.to_matrix();
            return AltTensor::from_covector(&(m.transpose() * v));
        }
        let mut out = AltTensor::zeros(self.dim, self.degree - 1);
        let ts: Vec<_> = out.tuples().collect();
        for (r, t) in ts.iter().enumerate() {
            let mut s = 0.0;
            for (i, vi) in v.iter().enumerate() {
                if *vi == 0.0 {
                    continue;
                }
                let mut idx = Vec::with_capacity(t.len() + 1);
                idx.push(i);
                idx.extend_from_slice(t);
                s += vi * self.get(&idx);
            }
            out.comps[r] = s;
        }
        out
    }

    /// Wedge product normalized so that `(dx^dy)(e_x, e_y) = 1`.
    pub fn wedge(&self, other: &AltTensor) -> AltTensor {
        assert_eq!(self.dim, other.dim);
        let (p, q) = (self.degree, other.degree);
        let mut out = AltTensor::zeros(self.dim, p + q);
        if p + q > self.dim {
            return out;
        }
        let ts: Vec<_> = out.tuples().collect();
        for (r, t) in ts.iter().enumerate() {
            let mut s = 0.0;
            for pick in tuples(p + q, p) {
                let a: Vec<usize> = pick.iter().map(|&i| t[i]).collect();
                let b: Vec<usize> = (0..p + q).filter(|i| !pick.contains(i)).map(|i| t[i]).collect();
                let mut perm: Vec<usize> = pick.clone();
                perm.extend((0..p + q).filter(|i| !pick.contains(i)));
                let sign = sort_sign(&mut perm);
                s += sign * self.get(&a) * other.get(&b);
            }
            out.comps[r] = s;
        }
        out
    }

    pub fn add(&self, other: &AltTensor) -> AltTensor {
        assert_eq!((self.dim, self.degree), (other.dim, other.degree));
        AltTensor {
            dim: self.dim,
            degree: self.degree,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &AltTensor) -> AltTensor {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> AltTensor {
        AltTensor { dim: self.dim, degree: self.degree, comps: self.comps.iter().map(|a| a * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }

    /// Pads a tensor on the first `dim` coordinates into a larger space.
    pub fn embed(&self, new_dim: usize) -> AltTensor {
        if new_dim == self.dim {
            return self.clone();
        }
        let mut out = AltTensor::zeros(new_dim, self.degree);
        for (t, c) in self.tuples().zip(self.comps.iter()) {
            let r = out.rank(&t);
            out.comps[r] = *c;
        }
        out
    }
}
