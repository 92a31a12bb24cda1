//! Sparse multivariate polynomials.
//!
//! [`MultiPoly`] has coefficients in the DVR `R`. A variable set may carry a
//! chart relation `u * v = pi`; polynomials over such a set are kept in the
//! normal form where no monomial contains both `u` and `v` (every `u*v`
//! pair is traded for a factor of `pi` in the coefficient). That form is
//! unique, so exact division by a power of `u` or `v` is decidable term by
//! term.
//!
//! [`ResiduePoly`] has coefficients in the residue field and is what central
//! fibers and exceptional-divisor equations reduce to.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::dvr::{split_top_level, DvrElement, Ring};
use crate::error::{Error, Result};
use crate::field::{Embedding, Fq, GaloisField};

pub type Monomial = Vec<u32>;

/// Variable names plus an optional uniformizer relation `names[u] * names[v] = pi`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Vars {
    names: Vec<String>,
    relation: Option<(usize, usize)>,
}

pub type VarSet = Arc<Vars>;

impl Vars {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> VarSet {
        Arc::new(Vars {
            names: names.into_iter().map(Into::into).collect(),
            relation: None,
        })
    }

    pub fn with_relation<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        u: usize,
        v: usize,
    ) -> VarSet {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        assert!(u != v && u < names.len() && v < names.len());
        Arc::new(Vars {
            names,
            relation: Some((u, v)),
        })
    }

    /// `x1..xn, y`.
    pub fn model(n: usize) -> VarSet {
        let mut names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        names.push("y".into());
        Self::new(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn relation(&self) -> Option<(usize, usize)> {
        self.relation
    }
}

fn format_monomial(vars: &Vars, mono: &[u32]) -> String {
    let mut parts = Vec::new();
    for (i, &e) in mono.iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(vars.names[i].clone()),
            e => parts.push(format!("{}^{e}", vars.names[i])),
        }
    }
    parts.join(" * ")
}

/// Parses a summand into its coefficient text factors and exponent vector.
fn parse_summand<'a>(vars: &Vars, summand: &'a str) -> Result<(Vec<&'a str>, Monomial)> {
    let mut coeffs = Vec::new();
    let mut mono = vec![0u32; vars.len()];
    for factor in split_top_level(summand, '*') {
        let factor = factor.trim();
        if factor.is_empty() {
            return Err(Error::Parse(format!("empty factor in `{summand}`")));
        }
        if let Some(inner) = factor.strip_prefix('(').and_then(|f| f.strip_suffix(')')) {
            coeffs.push(inner);
            continue;
        }
        let (name, exp) = match factor.split_once('^') {
            Some((n, e)) => (
                n.trim(),
                e.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Parse(format!("bad exponent in `{factor}`")))?,
            ),
            None => (factor, 1),
        };
        match vars.index(name) {
            Some(i) => mono[i] += exp,
            None => coeffs.push(factor),
        }
    }
    Ok((coeffs, mono))
}

/// Polynomial over `R` in a fixed variable set, known modulo `pi^prec`
/// coefficient-wise. Absent monomials have coefficient `0 mod pi^prec`.
#[derive(Clone)]
pub struct MultiPoly {
    ring: Ring,
    vars: VarSet,
    prec: usize,
    terms: BTreeMap<Monomial, DvrElement>,
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly[prec {}]({})", self.prec, self.format())
    }
}

impl PartialEq for MultiPoly {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ring, &other.ring)
            && self.vars == other.vars
            && self.prec == other.prec
            && self.terms == other.terms
    }
}

/// Decomposition of a polynomial by total degree in a chosen set of
/// variables (the `x`-variables); other variables ride along in the parts.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedParts {
    pub constant: MultiPoly,
    pub linear: MultiPoly,
    pub quadratic: MultiPoly,
    pub cubic_plus: MultiPoly,
}

impl MultiPoly {
    pub fn zero(ring: &Ring, vars: &VarSet) -> Self {
        Self::zero_with(ring, vars, ring.precision())
    }

    pub fn zero_with(ring: &Ring, vars: &VarSet, prec: usize) -> Self {
        MultiPoly {
            ring: ring.clone(),
            vars: vars.clone(),
            prec,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(ring: &Ring, vars: &VarSet, c: DvrElement) -> Self {
        Self::monomial(ring, vars, c, vec![0; vars.len()])
    }

    pub fn one(ring: &Ring, vars: &VarSet) -> Self {
        Self::constant(ring, vars, ring.one())
    }

    pub fn var(ring: &Ring, vars: &VarSet, i: usize) -> Self {
        let mut e = vec![0; vars.len()];
        e[i] = 1;
        Self::monomial(ring, vars, ring.one(), e)
    }

    pub fn monomial(ring: &Ring, vars: &VarSet, c: DvrElement, exps: Monomial) -> Self {
        let prec = c.precision().min(ring.precision());
        let mut f = Self::zero_with(ring, vars, prec);
        f.add_term(exps, c);
        f
    }

    pub fn from_terms(
        ring: &Ring,
        vars: &VarSet,
        terms: impl IntoIterator<Item = (Monomial, DvrElement)>,
    ) -> Self {
        let mut f = Self::zero(ring, vars);
        for (m, c) in terms {
            f.add_term(m, c);
        }
        f
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &DvrElement)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mono: &[u32]) -> DvrElement {
        self.terms
            .get(mono)
            .cloned()
            .unwrap_or_else(|| self.ring.zero_with(self.prec))
    }

    /// Smallest `ord_pi` over all coefficients (`None` for the zero polynomial).
    pub fn min_ord(&self) -> Option<usize> {
        self.terms.values().filter_map(|c| c.ord()).min()
    }

    /// Adds `c * mono` in place, applying the chart relation and dropping
    /// anything that vanishes at the current precision.
    pub fn add_term(&mut self, mut mono: Monomial, c: DvrElement) {
        debug_assert_eq!(mono.len(), self.vars.len());
        let mut c = c.truncate(self.prec);
        if let Some((u, v)) = self.vars.relation {
            let t = mono[u].min(mono[v]);
            if t > 0 {
                mono[u] -= t;
                mono[v] -= t;
                c = self.ring.shift(&c, t as usize);
            }
        }
        if c.is_zero() {
            return;
        }
        let sum = match self.terms.remove(&mono) {
            Some(old) => self.ring.add(&old, &c),
            None => c,
        };
        if !sum.is_zero() {
            self.terms.insert(mono, sum);
        }
    }

    /// Lowers the precision, dropping coefficients that become zero.
    pub fn truncate(&self, prec: usize) -> Self {
        let prec = prec.min(self.prec);
        let mut f = Self::zero_with(&self.ring, &self.vars, prec);
        for (m, c) in &self.terms {
            f.add_term(m.clone(), c.clone());
        }
        f
    }

    fn check_compatible(&self, other: &Self) {
        assert!(Arc::ptr_eq(&self.ring, &other.ring), "polynomials over different rings");
        assert_eq!(self.vars, other.vars, "polynomials over different variable sets");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let mut f = self.truncate(self.prec.min(other.prec));
        for (m, c) in &other.terms {
            f.add_term(m.clone(), c.clone());
        }
        f
    }

    pub fn neg(&self) -> Self {
        let mut f = Self::zero_with(&self.ring, &self.vars, self.prec);
        for (m, c) in &self.terms {
            f.terms.insert(m.clone(), self.ring.neg(c));
        }
        f
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &DvrElement) -> Self {
        let prec = self.prec.min(c.precision());
        let mut f = Self::zero_with(&self.ring, &self.vars, prec);
        for (m, a) in &self.terms {
            f.add_term(m.clone(), self.ring.mul(a, c));
        }
        f
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let prec = self.prec.min(other.prec);
        let mut f = Self::zero_with(&self.ring, &self.vars, prec);
        for (ma, a) in &self.terms {
            for (mb, b) in &other.terms {
                let m: Monomial = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
                f.add_term(m, self.ring.mul(a, b));
            }
        }
        f
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut acc = Self::one(&self.ring, &self.vars).truncate(self.prec);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Ring homomorphism sending variable `i` to `images[i]`. Coefficients
    /// are carried over unchanged; a chart relation on the target set turns
    /// `pi`-content back into chart variables only through its normal form.
    pub fn substitute(&self, images: &[MultiPoly]) -> Result<MultiPoly> {
        if images.len() != self.nvars() {
            return Err(Error::Precondition(format!(
                "substitution needs {} images, got {}",
                self.nvars(),
                images.len()
            )));
        }
        let Some(first) = images.first() else {
            return Ok(self.clone());
        };
        for img in images {
            first.check_compatible(img);
        }
        let prec = images.iter().map(|g| g.prec).fold(self.prec, usize::min);
        let target_vars = first.vars.clone();
        let mut powers: Vec<Vec<MultiPoly>> = images
            .iter()
            .map(|g| vec![MultiPoly::one(&self.ring, &target_vars).truncate(prec), g.clone()])
            .collect();
        let mut out = MultiPoly::zero_with(&self.ring, &target_vars, prec);
        for (mono, c) in &self.terms {
            let mut term = MultiPoly::constant(&self.ring, &target_vars, c.clone()).truncate(prec);
            for (i, &e) in mono.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap().mul(&images[i]);
                    powers[i].push(next);
                }
                term = term.mul(&powers[i][e as usize]);
            }
            for (m, c) in term.terms {
                out.add_term(m, c);
            }
        }
        Ok(out)
    }

    /// Decomposes by total degree in the variables listed in `x_vars`.
    pub fn grade_in_x(&self, x_vars: &[usize]) -> GradedParts {
        let mut parts: [MultiPoly; 4] =
            std::array::from_fn(|_| Self::zero_with(&self.ring, &self.vars, self.prec));
        for (m, c) in &self.terms {
            let deg: u32 = x_vars.iter().map(|&i| m[i]).sum();
            parts[(deg as usize).min(3)].add_term(m.clone(), c.clone());
        }
        let [constant, linear, quadratic, cubic_plus] = parts;
        GradedParts {
            constant,
            linear,
            quadratic,
            cubic_plus,
        }
    }

    /// Exact coefficient-wise division by `pi^m`.
    pub fn div_pow_pi(&self, m: usize) -> Result<MultiPoly> {
        if m >= self.prec {
            return Err(Error::PrecisionExhausted(format!(
                "dividing a polynomial of precision {} by pi^{m}",
                self.prec
            )));
        }
        let mut f = Self::zero_with(&self.ring, &self.vars, self.prec - m);
        for (mono, c) in &self.terms {
            let q = self.ring.div_pow_pi(c, m).map_err(|_| {
                Error::InexactDivision(format!(
                    "coefficient {} of monomial `{}` has ord {} < {m}",
                    self.ring.format(c),
                    format_monomial(&self.vars, mono),
                    c.ord().unwrap_or(usize::MAX)
                ))
            })?;
            f.add_term(mono.clone(), q);
        }
        Ok(f)
    }

    /// Exact division by `var^e`. With a chart relation `var * w = pi`, a
    /// monomial with too small a power of `var` borrows the missing factor
    /// from its coefficient as `w / pi`.
    pub fn div_var_pow(&self, var: usize, e: u32) -> Result<MultiPoly> {
        let partner = self.vars.relation.and_then(|(u, v)| {
            if u == var {
                Some(v)
            } else if v == var {
                Some(u)
            } else {
                None
            }
        });
        let new_prec = match partner {
            Some(_) => self.prec.checked_sub(e as usize).filter(|&p| p > 0).ok_or_else(|| {
                Error::PrecisionExhausted(format!(
                    "dividing a polynomial of precision {} by {}^{e}",
                    self.prec, self.vars.names[var]
                ))
            })?,
            None => self.prec,
        };
        let mut f = Self::zero_with(&self.ring, &self.vars, new_prec);
        for (mono, c) in &self.terms {
            let mut m = mono.clone();
            if m[var] >= e {
                m[var] -= e;
                f.add_term(m, c.clone());
                continue;
            }
            let missing = e - m[var];
            let Some(w) = partner else {
                return Err(Error::InexactDivision(format!(
                    "monomial `{}` is not divisible by {}^{e}",
                    format_monomial(&self.vars, mono),
                    self.vars.names[var]
                )));
            };
            let q = self.ring.div_pow_pi(c, missing as usize).map_err(|_| {
                Error::InexactDivision(format!(
                    "monomial `{}` with coefficient {} is not divisible by {}^{e}",
                    format_monomial(&self.vars, mono),
                    self.ring.format(c),
                    self.vars.names[var]
                ))
            })?;
            m[var] = 0;
            m[w] += missing;
            f.add_term(m, q);
        }
        Ok(f)
    }

    /// Keeps only the monomials not involving `var` (restriction to `var = 0`).
    pub fn restrict_zero(&self, var: usize) -> MultiPoly {
        let mut f = Self::zero_with(&self.ring, &self.vars, self.prec);
        for (m, c) in &self.terms {
            if m[var] == 0 {
                f.terms.insert(m.clone(), c.clone());
            }
        }
        f
    }

    /// Reduction of every coefficient to the residue field.
    pub fn central_fiber(&self) -> ResiduePoly {
        self.digit_poly(0)
    }

    /// The polynomial formed by the `pi^i` digits of the coefficients.
    pub fn digit_poly(&self, i: usize) -> ResiduePoly {
        let field = self.ring.field().clone();
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let d = c.digit(i);
            if !d.is_zero() {
                terms.insert(m.clone(), d);
            }
        }
        ResiduePoly {
            field,
            vars: self.vars.clone(),
            terms,
        }
    }

    /// Same terms over another variable set of the same size.
    pub fn rename(&self, vars: &VarSet) -> MultiPoly {
        assert_eq!(vars.len(), self.vars.len());
        let mut f = Self::zero_with(&self.ring, vars, self.prec);
        for (m, c) in &self.terms {
            f.add_term(m.clone(), c.clone());
        }
        f
    }

    /// Equality modulo `pi^prec`, coefficient-wise.
    pub fn eq_at(&self, other: &MultiPoly, prec: usize) -> bool {
        self.sub(other).truncate(prec).is_zero()
    }

    pub fn format(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|(m, c)| {
                let coeff = format!("({})", self.ring.format(c));
                if m.iter().all(|&e| e == 0) {
                    coeff
                } else {
                    format!("{coeff} * {}", format_monomial(&self.vars, m))
                }
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Parses `;`-separated summands `(coeff) * x1^a * ... * y^b`.
    pub fn parse(ring: &Ring, vars: &VarSet, s: &str) -> Result<MultiPoly> {
        let mut f = Self::zero(ring, vars);
        let s = s.trim();
        if s == "0" || s.is_empty() {
            return Ok(f);
        }
        for summand in split_top_level(s, ';') {
            let (coeffs, mono) = parse_summand(vars, summand)?;
            let mut c = ring.one();
            for text in coeffs {
                c = ring.mul(&c, &ring.parse(text)?);
            }
            f.add_term(mono, c);
        }
        Ok(f)
    }
}

/// Polynomial over the residue field.
#[derive(Clone)]
pub struct ResiduePoly {
    field: Arc<GaloisField>,
    vars: VarSet,
    terms: BTreeMap<Monomial, Fq>,
}

impl PartialEq for ResiduePoly {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.field, &other.field)
            && self.vars == other.vars
            && self.terms == other.terms
    }
}

impl Eq for ResiduePoly {}

impl fmt::Debug for ResiduePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ResiduePoly({})", self.format())
    }
}

impl ResiduePoly {
    pub fn zero(field: &Arc<GaloisField>, vars: &VarSet) -> Self {
        ResiduePoly {
            field: field.clone(),
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(
        field: &Arc<GaloisField>,
        vars: &VarSet,
        terms: impl IntoIterator<Item = (Monomial, Fq)>,
    ) -> Self {
        let mut f = Self::zero(field, vars);
        for (m, c) in terms {
            f.add_term(m, c);
        }
        f
    }

    pub fn field(&self) -> &Arc<GaloisField> {
        &self.field
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Fq)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, mono: &[u32]) -> Fq {
        self.terms.get(mono).copied().unwrap_or(Fq::ZERO)
    }

    pub fn add_term(&mut self, mono: Monomial, c: Fq) {
        let sum = match self.terms.remove(&mono) {
            Some(old) => self.field.add(old, c),
            None => c,
        };
        if !sum.is_zero() {
            self.terms.insert(mono, sum);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut f = self.clone();
        for (m, &c) in &other.terms {
            f.add_term(m.clone(), c);
        }
        f
    }

    pub fn scale(&self, c: Fq) -> Self {
        Self::from_terms(
            &self.field,
            &self.vars,
            self.terms.iter().map(|(m, &a)| (m.clone(), self.field.mul(a, c))),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(self.field.neg(Fq::ONE)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut f = Self::zero(&self.field, &self.vars);
        for (ma, &a) in &self.terms {
            for (mb, &b) in &other.terms {
                let m = ma.iter().zip(mb).map(|(x, y)| x + y).collect();
                f.add_term(m, self.field.mul(a, b));
            }
        }
        f
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut one = Self::zero(&self.field, &self.vars);
        one.add_term(vec![0; self.nvars()], Fq::ONE);
        (0..e).fold(one, |acc, _| acc.mul(self))
    }

    /// The same polynomial with coefficients pushed into an extension field.
    pub fn embed(&self, big: &Arc<GaloisField>, emb: &Embedding) -> Self {
        Self::from_terms(
            big,
            &self.vars,
            self.terms.iter().map(|(m, &c)| (m.clone(), emb.apply(c))),
        )
    }

    /// Lowest total degree of a nonzero term.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.iter().sum()).min()
    }

    /// Variables that occur in some term.
    pub fn support_vars(&self) -> Vec<usize> {
        (0..self.nvars())
            .filter(|&i| self.terms.keys().any(|m| m[i] > 0))
            .collect()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.iter().sum()).max()
    }

    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m[var]).max().unwrap_or(0)
    }

    pub fn homogeneous_part(&self, d: u32) -> Self {
        Self::from_terms(
            &self.field,
            &self.vars,
            self.terms
                .iter()
                .filter(|(m, _)| m.iter().sum::<u32>() == d)
                .map(|(m, &c)| (m.clone(), c)),
        )
    }

    /// Formal partial derivative.
    pub fn partial(&self, var: usize) -> Self {
        let mut f = Self::zero(&self.field, &self.vars);
        for (m, &c) in &self.terms {
            if m[var] == 0 {
                continue;
            }
            let coeff = self.field.mul(c, self.field.from_int(m[var] as i64));
            let mut m2 = m.clone();
            m2[var] -= 1;
            f.add_term(m2, coeff);
        }
        f
    }

    pub fn jacobian(&self) -> Vec<ResiduePoly> {
        (0..self.nvars()).map(|i| self.partial(i)).collect()
    }

    /// Matrix of second partials of the degree-2 homogeneous part,
    /// restricted to the variables in `vars`. In characteristic 2 the
    /// diagonal vanishes and this is the alternating polar form.
    pub fn hessian(&self, vars: &[usize]) -> Vec<Vec<Fq>> {
        let f = &self.field;
        let n = vars.len();
        let mut h = vec![vec![Fq::ZERO; n]; n];
        for (m, &c) in &self.terms {
            if m.iter().sum::<u32>() != 2 {
                continue;
            }
            let support: Vec<usize> = (0..n).filter(|&a| m[vars[a]] > 0).collect();
            let outside: u32 = m.iter().sum::<u32>()
                - support.iter().map(|&a| m[vars[a]]).sum::<u32>();
            if outside > 0 {
                continue;
            }
            match support.as_slice() {
                [a] => h[*a][*a] = f.add(h[*a][*a], f.mul(c, f.from_int(2))),
                [a, b] => {
                    h[*a][*b] = f.add(h[*a][*b], c);
                    h[*b][*a] = f.add(h[*b][*a], c);
                }
                _ => {}
            }
        }
        h
    }

    /// Keeps only the monomials not involving `var`.
    pub fn restrict_zero(&self, var: usize) -> Self {
        Self::from_terms(
            &self.field,
            &self.vars,
            self.terms
                .iter()
                .filter(|(m, _)| m[var] == 0)
                .map(|(m, &c)| (m.clone(), c)),
        )
    }

    /// Evaluates at a point of an extension field, given the embedding.
    pub fn eval(&self, big: &GaloisField, emb: &Embedding, point: &[Fq]) -> Fq {
        let mut acc = Fq::ZERO;
        for (m, &c) in &self.terms {
            let mut t = emb.apply(c);
            for (i, &e) in m.iter().enumerate() {
                if e > 0 {
                    t = big.mul(t, big.pow(point[i], e as u64));
                }
            }
            acc = big.add(acc, t);
        }
        acc
    }

    pub fn format(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|(m, &c)| {
                let coeff = self.field.format(c);
                if m.iter().all(|&e| e == 0) {
                    coeff
                } else if c == Fq::ONE {
                    format_monomial(&self.vars, m)
                } else {
                    format!("{coeff} * {}", format_monomial(&self.vars, m))
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Parses `+`-separated summands `c * x1^a * ...` (the format of
    /// [`ResiduePoly::format`]).
    pub fn parse(field: &Arc<GaloisField>, vars: &VarSet, s: &str) -> Result<Self> {
        let mut f = Self::zero(field, vars);
        let s = s.trim();
        if s == "0" || s.is_empty() {
            return Ok(f);
        }
        for summand in split_top_level(s, '+') {
            let (coeffs, mono) = parse_summand(vars, summand)?;
            let mut c = Fq::ONE;
            for text in coeffs {
                let text = text.trim();
                let parsed = if text.contains('t') && !text.starts_with('(') {
                    field.parse(&format!("({text})"))?
                } else {
                    field.parse(text)?
                };
                c = field.mul(c, parsed);
            }
            f.add_term(mono, c);
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvr::ring_create;

    fn setup() -> (Ring, VarSet) {
        (ring_create(3, 4, 3, 26, 1).unwrap(), Vars::model(2))
    }

    #[test]
    fn chart_substitution_example() {
        // x1^2 with x1 -> alpha1 * pi^2
        let (r, v) = setup();
        let f = MultiPoly::parse(&r, &v, "x1^2").unwrap();
        let a = Vars::new(["alpha1", "alpha2", "beta"]);
        let img = vec![
            MultiPoly::monomial(&r, &a, r.pi_pow(2), vec![1, 0, 0]),
            MultiPoly::var(&r, &a, 1),
            MultiPoly::var(&r, &a, 2),
        ];
        let g = f.substitute(&img).unwrap();
        assert_eq!(g.format(), "(pi^4) * alpha1^2");
    }

    #[test]
    fn identity_substitution() {
        let (r, v) = setup();
        let f = MultiPoly::parse(&r, &v, "(2 + pi) * x1^2 * y; (1) * x2^3; (pi^5)").unwrap();
        let id: Vec<_> = (0..3).map(|i| MultiPoly::var(&r, &v, i)).collect();
        assert_eq!(f.substitute(&id).unwrap(), f);
    }

    #[test]
    fn shift_y() {
        let (r, v) = setup();
        let y = MultiPoly::var(&r, &v, 2);
        let delta = r.parse("1 + pi").unwrap();
        let img = vec![
            MultiPoly::var(&r, &v, 0),
            MultiPoly::var(&r, &v, 1),
            y.sub(&MultiPoly::constant(&r, &v, delta.clone())),
        ];
        let g = y.substitute(&img).unwrap();
        let expected = y.sub(&MultiPoly::constant(&r, &v, delta));
        assert_eq!(g, expected);
    }

    #[test]
    fn grading_examples() {
        let (r, v) = setup();
        let f = MultiPoly::parse(&r, &v, "(1 + pi); (pi^2) * x1; x1^2; x1^3").unwrap();
        let g = f.grade_in_x(&[0, 1]);
        assert_eq!(g.constant.format(), "(1 + pi)");
        assert_eq!(g.linear.format(), "(pi^2) * x1");
        assert_eq!(g.quadratic.format(), "(1) * x1^2");
        assert_eq!(g.cubic_plus.format(), "(1) * x1^3");
        let z = MultiPoly::zero(&r, &v).grade_in_x(&[0, 1]);
        assert!(z.constant.is_zero() && z.linear.is_zero() && z.quadratic.is_zero());
        let px = MultiPoly::parse(&r, &v, "(pi^4) * x1 * x2").unwrap();
        assert_eq!(px.grade_in_x(&[0, 1]).quadratic, px);
    }

    #[test]
    fn pi_division_examples() {
        let (r, v) = setup();
        let f = MultiPoly::parse(&r, &v, "(pi^2) * x1; (pi^3) * y").unwrap();
        let g = f.div_pow_pi(2).unwrap();
        assert_eq!(g.format(), "(pi) * y; (1) * x1");
        assert_eq!(g.precision(), 24);
        let x1 = MultiPoly::var(&r, &v, 0);
        assert!(matches!(x1.div_pow_pi(1), Err(Error::InexactDivision(_))));
    }

    #[test]
    fn central_fiber_examples() {
        let (r, v) = setup();
        let f = MultiPoly::parse(&r, &v, "(pi) * y^3; x1^2").unwrap();
        assert_eq!(f.central_fiber().format(), "x1^2");
        let g = MultiPoly::parse(&r, &v, "(pi^4) * x1 * x2; (pi^4) * x2^2").unwrap();
        assert!(g.central_fiber().is_zero());
    }

    #[test]
    fn relation_normal_form_and_division() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let v = Vars::with_relation(["alpha1", "y", "gamma"], 1, 2);
        // y * gamma is pi
        let f = MultiPoly::parse(&r, &v, "y * gamma").unwrap();
        assert_eq!(f.format(), "(pi)");
        // pi * y / y^2 = gamma
        let g = MultiPoly::parse(&r, &v, "(pi) * y").unwrap();
        assert_eq!(g.div_var_pow(1, 2).unwrap().format(), "(1) * gamma");
        let h = MultiPoly::parse(&r, &v, "(1) * y").unwrap();
        assert!(h.div_var_pow(1, 2).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let field = GaloisField::new(3, 1).unwrap();
        let v = Vars::new(["beta", "alpha1", "alpha2"]);
        let f = ResiduePoly::parse(&field, &v, "beta^3 + 2 * beta + alpha1^2 + alpha2^2").unwrap();
        assert_eq!(f.partial(0).format(), "2");
        let c = ResiduePoly::parse(&field, &v, "2").unwrap();
        assert!(c.jacobian().iter().all(|d| d.is_zero()));
        let f2 = GaloisField::new(2, 1).unwrap();
        let x = Vars::new(["x1"]);
        assert!(ResiduePoly::parse(&f2, &x, "x1^2").unwrap().partial(0).is_zero());
    }

    #[test]
    fn hessian_examples() {
        let f3 = GaloisField::new(3, 1).unwrap();
        let v = Vars::new(["x1", "x2"]);
        let h = ResiduePoly::parse(&f3, &v, "x1^2 + x2^2").unwrap().hessian(&[0, 1]);
        assert_eq!(h, vec![vec![Fq(2), Fq(0)], vec![Fq(0), Fq(2)]]);
        let f2 = GaloisField::new(2, 1).unwrap();
        let h = ResiduePoly::parse(&f2, &v, "x1 * x2").unwrap().hessian(&[0, 1]);
        assert_eq!(h, vec![vec![Fq(0), Fq(1)], vec![Fq(1), Fq(0)]]);
        let h = ResiduePoly::parse(&f2, &v, "x1^2").unwrap().hessian(&[0, 1]);
        assert!(h.iter().flatten().all(|c| c.is_zero()));
    }

    #[test]
    fn text_round_trip() {
        let r = ring_create(3, 4, 9, 26, 1).unwrap();
        let v = Vars::model(2);
        let s = "(2) * y; ((1+t) + pi^3) * x2^2; (pi) * x1 * y^2";
        let f = MultiPoly::parse(&r, &v, s).unwrap();
        let again = MultiPoly::parse(&r, &v, &f.format()).unwrap();
        assert_eq!(again, f);
        assert_eq!(again.format(), f.format());
    }
}
