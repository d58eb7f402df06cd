//! Sub-Riemannian structures on ℝⁿ given by a generating family of
//! polynomial vector fields, and the Hamiltonian `H = ½ Σ h_k²` with
//! `h_k(q, p) = ⟨p, X_k(q)⟩`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse polynomial in `nvars` real variables.
///
/// Terms are kept sorted by exponent, duplicates merged and zero
/// coefficients dropped, so two equal polynomials compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    pub fn new(nvars: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        for (exps, coeff) in &terms {
            if exps.len() != nvars {
                return Err(Error::InvalidStructure(format!(
                    "multi-index {exps:?} has length {} but the dimension is {nvars}",
                    exps.len()
                )));
            }
            if !coeff.is_finite() {
                return Err(Error::InvalidStructure(format!("non-finite coefficient {coeff}")));
            }
        }
        Ok(Self::canonical(nvars, terms))
    }

    fn canonical(nvars: usize, mut terms: Vec<(Vec<u32>, f64)>) -> Self {
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Vec<u32>, f64)> = Vec::with_capacity(terms.len());
        for (exps, coeff) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == exps => last.1 += coeff,
                _ => merged.push((exps, coeff)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        Self {
            nvars,
            terms: merged,
        }
    }

    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::canonical(nvars, vec![(vec![0; nvars], c)])
    }

    /// `c · x_var`.
    pub fn linear(nvars: usize, var: usize, c: f64) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        Self::canonical(nvars, vec![(e, c)])
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[(Vec<u32>, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(exps, c)| {
                exps.iter()
                    .zip(x)
                    .filter(|(e, _)| **e > 0)
                    .fold(*c, |acc, (e, xi)| acc * xi.powi(*e as i32))
            })
            .sum()
    }

    /// Partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[var] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2[var] -= 1;
                (e2, c * e[var] as f64)
            })
            .collect();
        Self::canonical(self.nvars, terms)
    }
}

/// A polynomial vector field `X = Σ_i X_i(q) ∂_i` on ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVectorField {
    components: Vec<Polynomial>,
}

impl PolyVectorField {
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::InvalidStructure("vector field with no components".into()));
        }
        if let Some(bad) = components.iter().find(|c| c.nvars() != n) {
            return Err(Error::InvalidStructure(format!(
                "component in {} variables for a field on R^{n}",
                bad.nvars()
            )));
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn eval(&self, q: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(q)).collect()
    }
}

/// Cached first and second partials of every field component.
#[derive(Debug, Clone)]
struct Partials {
    /// `first[k][i][j] = ∂_j (X_k)_i`
    first: Vec<Vec<Vec<Polynomial>>>,
    /// `second[k][i][j][l - j] = ∂_j ∂_l (X_k)_i` for `l ≥ j`
    second: Vec<Vec<Vec<Vec<Polynomial>>>>,
}

impl Partials {
    fn new(fields: &[PolyVectorField], n: usize) -> Self {
        let first: Vec<Vec<Vec<Polynomial>>> = fields
            .iter()
            .map(|f| {
                f.components
                    .iter()
                    .map(|c| (0..n).map(|j| c.derivative(j)).collect())
                    .collect()
            })
            .collect();
        let second = first
            .iter()
            .map(|fk| {
                fk.iter()
                    .map(|ci| {
                        (0..n)
                            .map(|j| (j..n).map(|l| ci[j].derivative(l)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { first, second }
    }
}

/// A free sub-Riemannian structure on ℝⁿ: the generating family `X_1 … X_m`.
#[derive(Debug, Clone)]
pub struct Structure {
    name: Option<String>,
    dim: usize,
    fields: Vec<PolyVectorField>,
    partials: Partials,
}

impl PartialEq for Structure {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.dim == other.dim && self.fields == other.fields
    }
}

impl Structure {
    pub fn new(name: Option<String>, fields: Vec<PolyVectorField>) -> Result<Self> {
        let dim = fields
            .first()
            .ok_or_else(|| Error::InvalidStructure("empty generating family".into()))?
            .dim();
        if let Some(bad) = fields.iter().find(|f| f.dim() != dim) {
            return Err(Error::InvalidStructure(format!(
                "fields of mixed dimension ({} and {dim})",
                bad.dim()
            )));
        }
        let partials = Partials::new(&fields, dim);
        Ok(Self {
            name,
            dim,
            fields,
            partials,
        })
    }

    /// The Heisenberg group: `X₁ = ∂x − (y/2)∂τ`, `X₂ = ∂y + (x/2)∂τ` on ℝ³.
    pub fn heisenberg() -> Self {
        let x1 = PolyVectorField::new(vec![
            Polynomial::constant(3, 1.0),
            Polynomial::zero(3),
            Polynomial::linear(3, 1, -0.5),
        ])
        .expect("valid field");
        let x2 = PolyVectorField::new(vec![
            Polynomial::zero(3),
            Polynomial::constant(3, 1.0),
            Polynomial::linear(3, 0, 0.5),
        ])
        .expect("valid field");
        Self::new(Some("heisenberg".into()), vec![x1, x2]).expect("valid structure")
    }

    /// Euclidean ℝⁿ with the coordinate frame `X_k = ∂_k`.
    pub fn euclidean(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidStructure("euclidean dimension must be positive".into()));
        }
        let fields = (0..n)
            .map(|k| {
                let comps = (0..n)
                    .map(|i| {
                        if i == k {
                            Polynomial::constant(n, 1.0)
                        } else {
                            Polynomial::zero(n)
                        }
                    })
                    .collect();
                PolyVectorField::new(comps)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(Some(format!("euclidean:{n}")), fields)
    }

    /// Look up a built-in structure: `heisenberg` or `euclidean:<n>`.
    pub fn from_registry(name: &str) -> Result<Self> {
        match name {
            "heisenberg" => Ok(Self::heisenberg()),
            _ => match name.strip_prefix("euclidean:") {
                Some(n) => {
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::UnknownStructure(name.to_string()))?;
                    Self::euclidean(n)
                }
                None => Err(Error::UnknownStructure(name.to_string())),
            },
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: StructureFile = serde_json::from_str(text)?;
        file.into_structure()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StructureFile::from(self))?)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Manifold dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size `m` of the generating family.
    pub fn family_size(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[PolyVectorField] {
        &self.fields
    }

    /// True when the generating family is exactly the Heisenberg one,
    /// whatever the name.
    pub fn is_heisenberg(&self) -> bool {
        self.fields == Self::heisenberg().fields
    }

    /// Columns are `X_k(q)`.
    pub fn frame_matrix(&self, q: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.fields.len());
        for (k, f) in self.fields.iter().enumerate() {
            for (i, c) in f.components.iter().enumerate() {
                m[(i, k)] = c.eval(q);
            }
        }
        m
    }

    pub(crate) fn check_state(&self, st: &PhaseState) -> Result<()> {
        self.check_len("q", st.q.len())?;
        self.check_len("p", st.p.len())
    }

    pub(crate) fn check_len(&self, what: &'static str, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// `(h_1, …, h_m)` with `h_k = Σ_i p_i (X_k)_i(q)`.
    pub fn momentum_functions(&self, st: &PhaseState) -> Result<DVector<f64>> {
        self.check_state(st)?;
        Ok(self.momenta(st.q.as_slice(), st.p.as_slice()))
    }

    pub(crate) fn momenta(&self, q: &[f64], p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.fields.len(),
            self.fields.iter().map(|f| {
                f.components
                    .iter()
                    .zip(p)
                    .map(|(c, pi)| if *pi == 0.0 { 0.0 } else { pi * c.eval(q) })
                    .sum()
            }),
        )
    }

    pub fn hamiltonian(&self, st: &PhaseState) -> Result<f64> {
        Ok(0.5 * self.momentum_functions(st)?.norm_squared())
    }

    /// The optimal control at `st`; identical to the momentum functions.
    pub fn minimal_control(&self, st: &PhaseState) -> Result<DVector<f64>> {
        self.momentum_functions(st)
    }

    pub fn hamiltonian_jet(&self, st: &PhaseState) -> Result<HamiltonianJet> {
        self.check_state(st)?;
        Ok(self.jet(st.q.as_slice(), st.p.as_slice()))
    }

    /// Value, gradient and Hessian of `H` in `(q, p)` order, by exact
    /// differentiation of the polynomial data.
    pub(crate) fn jet(&self, q: &[f64], p: &[f64]) -> HamiltonianJet {
        let n = self.dim;
        let mut value = 0.0;
        let mut gradient = DVector::zeros(2 * n);
        let mut hessian = DMatrix::zeros(2 * n, 2 * n);
        let mut grad_k = vec![0.0; 2 * n];

        for (k, field) in self.fields.iter().enumerate() {
            let first = &self.partials.first[k];
            let second = &self.partials.second[k];
            // h_k and its gradient
            let mut h = 0.0;
            grad_k.iter_mut().for_each(|g| *g = 0.0);
            for (i, comp) in field.components.iter().enumerate() {
                let xi = comp.eval(q);
                h += p[i] * xi;
                grad_k[n + i] = xi;
                for j in 0..n {
                    if p[i] != 0.0 && !first[i][j].is_zero() {
                        grad_k[j] += p[i] * first[i][j].eval(q);
                    }
                }
            }
            value += 0.5 * h * h;
            for a in 0..2 * n {
                gradient[a] += h * grad_k[a];
            }
            // Σ ∇h ∇hᵀ, upper triangle
            for a in 0..2 * n {
                for b in a..2 * n {
                    hessian[(a, b)] += grad_k[a] * grad_k[b];
                }
            }
            if h != 0.0 {
                // h · Hess h_k: qq block Σ_i p_i ∂_j∂_l X_i, qp block ∂_j X_i
                for j in 0..n {
                    for l in j..n {
                        let mut s = 0.0;
                        for i in 0..n {
                            let d = &second[i][j][l - j];
                            if p[i] != 0.0 && !d.is_zero() {
                                s += p[i] * d.eval(q);
                            }
                        }
                        hessian[(j, l)] += h * s;
                    }
                    for i in 0..n {
                        if !first[i][j].is_zero() {
                            hessian[(j, n + i)] += h * first[i][j].eval(q);
                        }
                    }
                }
            }
        }
        for a in 0..2 * n {
            for b in 0..a {
                hessian[(a, b)] = hessian[(b, a)];
            }
        }
        HamiltonianJet {
            value,
            gradient,
            hessian,
        }
    }

    /// Sub-Riemannian length of a tangent vector `v` at `q`: the norm of the
    /// least-squares control `u` with `Σ u_k X_k(q) ≈ v`, together with the
    /// residual `‖Σ u_k X_k − v‖` (zero for horizontal vectors).
    pub fn horizontal_norm(&self, q: &[f64], v: &DVector<f64>) -> Result<HorizontalNorm> {
        self.check_len("q", q.len())?;
        self.check_len("v", v.len())?;
        let x = self.frame_matrix(q);
        let svd = crate::linalg::sorted_svd(&x);
        let smax = svd.singular_values.first().copied().unwrap_or(0.0);
        let mut u = DVector::zeros(self.fields.len());
        for (r, &s) in svd.singular_values.iter().enumerate() {
            if s > 1e-12 * smax && s > 0.0 {
                let coeff = svd.u.column(r).dot(v) / s;
                u += svd.v.column(r) * coeff;
            }
        }
        let residual = (&x * &u - v).norm();
        Ok(HorizontalNorm {
            norm: u.norm(),
            residual,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalNorm {
    pub norm: f64,
    pub residual: f64,
}

/// A point `(q, p)` of `T*ℝⁿ` in Darboux coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhaseState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                what: "covector",
                expected: q.len(),
                got: p.len(),
            });
        }
        if q.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite phase state".into()));
        }
        Ok(Self { q, p })
    }

    pub fn from_slices(q: &[f64], p: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(q), DVector::from_column_slice(p))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// `H`, `∇H` and `Hess H` at a state; vectors ordered `(q, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianJet {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StructureFile {
    #[serde(default)]
    name: Option<String>,
    dim: usize,
    fields: Vec<FieldFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldFile {
    components: Vec<Vec<(Vec<u32>, f64)>>,
}

impl StructureFile {
    fn into_structure(self) -> Result<Structure> {
        if self.dim == 0 {
            return Err(Error::InvalidStructure("dim must be positive".into()));
        }
        let dim = self.dim;
        let fields = self
            .fields
            .into_iter()
            .map(|f| {
                if f.components.len() != dim {
                    return Err(Error::InvalidStructure(format!(
                        "field has {} components, expected {dim}",
                        f.components.len()
                    )));
                }
                let comps = f
                    .components
                    .into_iter()
                    .map(|terms| {
                        let mut seen = std::collections::BTreeSet::new();
                        for (e, _) in &terms {
                            if !seen.insert(e.clone()) {
                                return Err(Error::InvalidStructure(format!(
                                    "duplicate multi-index {e:?}"
                                )));
                            }
                        }
                        Polynomial::new(dim, terms)
                    })
                    .collect::<Result<Vec<_>>>()?;
                PolyVectorField::new(comps)
            })
            .collect::<Result<Vec<_>>>()?;
        Structure::new(self.name, fields)
    }
}

impl From<&Structure> for StructureFile {
    fn from(s: &Structure) -> Self {
        Self {
            name: s.name.clone(),
            dim: s.dim,
            fields: s
                .fields
                .iter()
                .map(|f| FieldFile {
                    components: f.components.iter().map(|c| c.terms.clone()).collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(q: &[f64], p: &[f64]) -> PhaseState {
        PhaseState::from_slices(q, p).unwrap()
    }

    #[test]
    fn polynomial_is_canonical() {
        let a = Polynomial::new(2, vec![(vec![1, 0], 1.0), (vec![0, 1], 2.0), (vec![1, 0], 3.0)])
            .unwrap();
        let b = Polynomial::new(2, vec![(vec![0, 1], 2.0), (vec![1, 0], 4.0)]).unwrap();
        assert_eq!(a, b);
        let c = Polynomial::new(2, vec![(vec![1, 1], 1.0), (vec![1, 1], -1.0)]).unwrap();
        assert!(c.is_zero());
    }

    #[test]
    fn polynomial_derivative() {
        // 3 x² y + y
        let p = Polynomial::new(2, vec![(vec![2, 1], 3.0), (vec![0, 1], 1.0)]).unwrap();
        assert_eq!(p.eval(&[2.0, 3.0]), 39.0);
        assert_eq!(p.derivative(0).eval(&[2.0, 3.0]), 36.0);
        assert_eq!(p.derivative(1).eval(&[2.0, 3.0]), 13.0);
    }

    #[test]
    fn bad_multi_index_length_rejected() {
        assert!(Polynomial::new(3, vec![(vec![1, 0], 1.0)]).is_err());
    }

    #[test]
    fn heisenberg_momenta() {
        let h = Structure::heisenberg();
        let m = h.momentum_functions(&st(&[0.0; 3], &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0]);
        let m = h.momentum_functions(&st(&[0.0; 3], &[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(m.as_slice(), &[0.0, 0.0]);
        let m = h.momentum_functions(&st(&[1.0, 1.0, 0.0], &[0.0, 0.0, 2.0])).unwrap();
        assert_eq!(m.as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn hamiltonian_examples() {
        let h = Structure::heisenberg();
        assert_eq!(h.hamiltonian(&st(&[0.0; 3], &[1.0, 0.0, 0.0])).unwrap(), 0.5);
        assert_eq!(h.hamiltonian(&st(&[0.3, -2.0, 5.0], &[0.0; 3])).unwrap(), 0.0);
        let u = h.minimal_control(&st(&[0.0; 3], &[3.0, 4.0, 0.0])).unwrap();
        assert_eq!(u.as_slice(), &[3.0, 4.0]);
        assert_eq!(u.norm_squared(), 25.0);
        assert_eq!(h.hamiltonian(&st(&[0.0; 3], &[3.0, 4.0, 0.0])).unwrap(), 12.5);
    }

    #[test]
    fn dimension_mismatch() {
        let h = Structure::heisenberg();
        let err = h.hamiltonian(&st(&[0.0; 2], &[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn registry() {
        assert!(Structure::from_registry("heisenberg").unwrap().is_heisenberg());
        let e = Structure::from_registry("euclidean:4").unwrap();
        assert_eq!((e.dim(), e.family_size()), (4, 4));
        assert!(matches!(
            Structure::from_registry("engel"),
            Err(Error::UnknownStructure(_))
        ));
        assert!(Structure::from_registry("euclidean:x").is_err());
        assert!(Structure::from_registry("euclidean:0").is_err());
    }

    #[test]
    fn jet_at_zero_covector_vanishes() {
        let h = Structure::heisenberg();
        let jet = h.hamiltonian_jet(&st(&[0.4, -1.0, 2.0], &[0.0; 3])).unwrap();
        assert_eq!(jet.value, 0.0);
        assert!(jet.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn jet_gradient_at_origin() {
        let h = Structure::heisenberg();
        let jet = h.hamiltonian_jet(&st(&[0.0; 3], &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(jet.gradient.as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let h = Structure::heisenberg();
        let text = h.to_json_string().unwrap();
        assert_eq!(Structure::from_json_str(&text).unwrap(), h);

        let dup = r#"{"name":"d","dim":1,"fields":[{"components":[[[[1],1.0],[[1],2.0]]]}]}"#;
        assert!(matches!(
            Structure::from_json_str(dup),
            Err(Error::InvalidStructure(_))
        ));
        let neg = r#"{"name":"d","dim":1,"fields":[{"components":[[[[-1],1.0]]]}]}"#;
        assert!(Structure::from_json_str(neg).is_err());
        let short = r#"{"name":"d","dim":2,"fields":[{"components":[[[[0,0],1.0]]]}]}"#;
        assert!(Structure::from_json_str(short).is_err());
    }

    #[test]
    fn horizontal_norm_of_generator() {
        let h = Structure::heisenberg();
        let q = [0.5, -1.0, 0.0];
        let x = h.frame_matrix(&q);
        let v = x.column(0) * 3.0 + x.column(1) * 4.0;
        let hn = h.horizontal_norm(&q, &v).unwrap();
        assert!((hn.norm - 5.0).abs() < 1e-12);
        assert!(hn.residual < 1e-12);
        let vert = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert!(h.horizontal_norm(&[0.0; 3], &vert).unwrap().residual > 0.5);
    }
}
