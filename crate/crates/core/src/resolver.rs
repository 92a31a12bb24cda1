//! The alternating minus/plus weighted blowup resolution, classification
//! of every chart, regularity certificates and ruledness witnesses.
//!
//! Regularity of a chart along its exceptional divisor `E` is decided with
//! the cotangent criterion: a point `P` of `E` is regular on the strict
//! transform `F = 0` iff `F` is nonzero in `m_P / m_P^2`. Writing the
//! coefficients of `F` in `pi`-adic digits, that class is
//! `d(F_0)(P) + F_1(P) d(pi)`, where `F_0`, `F_1` are the digit-0 and
//! digit-1 polynomials, and `d(pi)` is either an independent direction or
//! `v(P) du` when the chart has `pi = u * v` with `E = (u = 0)`. Only
//! singular points of the exceptional central fiber can fail, and those are
//! enumerated over `F_q` and `F_{q^2}`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::blowup::{
    all_charts, ordinary_blowup_char2, projective_singular_points, ChartKind, ChartRecord,
    ChartResult, Sign,
};
use crate::cover::{identify_template, match_char2, match_template, Family, LocalModel, Template};
use crate::error::{Error, Result};
use crate::field::{Embedding, Fq, GaloisField};
use crate::poly::{MultiPoly, ResiduePoly, Vars};

/// Maximum number of points any single enumeration may visit.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind")]
pub enum SingularityClass {
    Regular,
    Smooth,
    TemplateF { s: u32 },
    TemplateG { s: u32 },
    /// Characteristic-2 model `M(j)`.
    Char2Template { j: u32 },
    CyclicQuotient { order: u32, locus: String },
    Unclassified { report: String },
}

impl fmt::Display for SingularityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularityClass::Regular => write!(f, "Regular"),
            SingularityClass::Smooth => write!(f, "Smooth"),
            SingularityClass::TemplateF { s } => write!(f, "TemplateF({s})"),
            SingularityClass::TemplateG { s } => write!(f, "TemplateG({s})"),
            SingularityClass::Char2Template { j } => write!(f, "M({j})"),
            SingularityClass::CyclicQuotient { order, locus } => {
                write!(f, "CyclicQuotient({order}, {locus})")
            }
            SingularityClass::Unclassified { report } => write!(f, "Unclassified: {report}"),
        }
    }
}

impl SingularityClass {
    pub fn is_unclassified(&self) -> bool {
        matches!(self, SingularityClass::Unclassified { .. })
    }
}

/// `F_{q^m}` together with the embedding of the residue field.
#[derive(Clone, Debug)]
pub struct Extension {
    pub degree: u32,
    pub field: Arc<GaloisField>,
    pub embedding: Embedding,
}

pub fn extension(base: &Arc<GaloisField>, m: u32) -> Result<Extension> {
    let field = GaloisField::new(base.characteristic(), base.degree() * m)?;
    let embedding = base
        .embed_into(&field)
        .ok_or_else(|| Error::Precondition("no embedding into the extension".into()))?;
    Ok(Extension {
        degree: m,
        field,
        embedding,
    })
}

/// A polynomial prepared for repeated evaluation over one field.
struct Compiled {
    terms: Vec<(Fq, Vec<(usize, u64)>)>,
}

impl Compiled {
    fn new(f: &ResiduePoly, emb: &Embedding) -> Self {
        Compiled {
            terms: f
                .terms()
                .map(|(m, &c)| {
                    let vars = m
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e > 0)
                        .map(|(i, &e)| (i, e as u64))
                        .collect();
                    (emb.apply(c), vars)
                })
                .collect(),
        }
    }

    fn eval(&self, field: &GaloisField, pt: &[Fq]) -> Fq {
        let mut acc = Fq::ZERO;
        for (c, vars) in &self.terms {
            let mut t = *c;
            for &(i, e) in vars {
                if t.is_zero() {
                    break;
                }
                t = field.mul(t, field.pow(pt[i], e));
            }
            acc = field.add(acc, t);
        }
        acc
    }
}

fn checked_count(q: u64, dims: usize) -> Option<u64> {
    (0..dims).try_fold(1u64, |acc, _| acc.checked_mul(q))
}

/// Calls `visit` on every point of `F^coords` (other coordinates zero).
fn for_each_point(
    nvars: usize,
    coords: &[usize],
    q: u32,
    base: &[Fq],
    mut visit: impl FnMut(&[Fq]),
) {
    let mut pt = base.to_vec();
    debug_assert_eq!(pt.len(), nvars);
    for &c in coords {
        pt[c] = Fq::ZERO;
    }
    loop {
        visit(&pt);
        let mut i = 0;
        loop {
            if i == coords.len() {
                return;
            }
            let c = coords[i];
            pt[c].0 += 1;
            if pt[c].0 < q {
                break;
            }
            pt[c] = Fq::ZERO;
            i += 1;
        }
    }
}

type LocusCache = Mutex<HashMap<String, Arc<Vec<Vec<Fq>>>>>;

fn locus_cache() -> &'static LocusCache {
    static CACHE: OnceLock<LocusCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Points over `ext` where `f` and its partials in `coords` vanish; the
/// coordinates outside `coords` are set to zero. Results are cached by the
/// polynomial's text.
pub fn singular_locus(f: &ResiduePoly, coords: &[usize], ext: &Extension) -> Result<Arc<Vec<Vec<Fq>>>> {
    let key = format!(
        "{}|{}|{:?}|{}",
        f.vars().names().join(","),
        f.format(),
        coords,
        ext.field.order()
    );
    if let Some(hit) = locus_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let q = ext.field.order();
    let count = checked_count(q as u64, coords.len()).unwrap_or(u64::MAX);
    if count > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "{count} points over F_{q} in {} coordinates",
            coords.len()
        )));
    }
    let nv = f.nvars();
    let big = &ext.field;
    let main = Compiled::new(f, &ext.embedding);
    let partials: Vec<Compiled> = coords
        .iter()
        .map(|&c| Compiled::new(&f.partial(c), &ext.embedding))
        .collect();
    let mut found = Vec::new();
    for_each_point(nv, coords, q, &vec![Fq::ZERO; nv], |pt| {
        if main.eval(big, pt).is_zero() && partials.iter().all(|d| d.eval(big, pt).is_zero()) {
            found.push(pt.to_vec());
        }
    });
    let found = Arc::new(found);
    locus_cache().lock().unwrap().insert(key, found.clone());
    Ok(found)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmoothnessVerdict {
    pub smooth: bool,
    /// Largest extension degree that was enumerated.
    pub extension_degree: u32,
    pub singular_point: Option<Vec<String>>,
}

/// Enumerates `f = 0` over `F_{q^m}` for `m = 1..=max_ext` and reports the
/// first point where every partial derivative vanishes.
pub fn smoothness_oracle(f: &ResiduePoly, max_ext: u32) -> Result<SmoothnessVerdict> {
    let coords = f.support_vars();
    for m in 1..=max_ext {
        let ext = extension(f.field(), m)?;
        let locus = singular_locus(f, &coords, &ext)?;
        if let Some(pt) = locus.first() {
            return Ok(SmoothnessVerdict {
                smooth: false,
                extension_degree: m,
                singular_point: Some(pt.iter().map(|&c| ext.field.format(c)).collect()),
            });
        }
    }
    Ok(SmoothnessVerdict {
        smooth: true,
        extension_degree: max_ext,
        singular_point: None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegularityReport {
    pub extension_degree: u32,
    pub candidates: usize,
    pub non_regular: Vec<Vec<String>>,
    pub only_origin: bool,
}

impl RegularityReport {
    pub fn regular(&self) -> bool {
        self.non_regular.is_empty()
    }
}

/// Certifies regularity of the strict transform along the exceptional
/// divisor of `chart`, checking every singular point of the exceptional
/// central fiber over `F_{q^m}` for the largest `m <= max_ext` that fits the
/// enumeration budget.
pub fn regularity_certificate(chart: &ChartResult, max_ext: u32) -> Result<RegularityReport> {
    let strict = &chart.strict_transform;
    let cf = &chart.exceptional_cf;
    let nv = strict.nvars();
    let base = strict.ring().field().clone();
    let coords = cf.support_vars();
    let free: Vec<usize> = (0..nv)
        .filter(|&v| Some(v) != chart.exceptional_var && !coords.contains(&v))
        .collect();
    let q = base.order() as u64;
    let m = (1..=max_ext)
        .rev()
        .find(|&m| checked_count(q.pow(m), coords.len()).is_some_and(|c| c <= ENUMERATION_BUDGET))
        .ok_or_else(|| {
            Error::BudgetExceeded(format!(
                "exceptional fiber in {} coordinates over F_{q}",
                coords.len()
            ))
        })?;
    let ext = extension(&base, m)?;
    let big = &ext.field;
    let locus = singular_locus(cf, &coords, &ext)?;
    let per_point = checked_count(big.order() as u64, free.len()).unwrap_or(u64::MAX);
    if per_point.saturating_mul(locus.len() as u64) > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "{} singular points times {per_point} free values",
            locus.len()
        )));
    }

    let f0 = strict.digit_poly(0);
    let f1 = Compiled::new(&strict.digit_poly(1), &ext.embedding);
    let grads: Vec<Compiled> = (0..nv)
        .map(|v| Compiled::new(&f0.partial(v), &ext.embedding))
        .collect();
    let partner = strict.vars().relation().and_then(|(u, v)| match chart.exceptional_var {
        Some(e) if e == u => Some((e, v)),
        Some(e) if e == v => Some((e, u)),
        _ => None,
    });
    let mut candidates = 0;
    let mut non_regular = Vec::new();
    for pt0 in locus.iter() {
        for_each_point(nv, &free, big.order(), pt0, |pt| {
            candidates += 1;
            let mut cot: Vec<Fq> = grads.iter().map(|g| g.eval(big, pt)).collect();
            let d_pi = f1.eval(big, pt);
            match partner {
                Some((e, w)) => cot[e] = big.add(cot[e], big.mul(d_pi, pt[w])),
                None => cot.push(d_pi),
            }
            if cot.iter().all(|c| c.is_zero()) {
                non_regular.push(pt.to_vec());
            }
        });
    }
    let only_origin = non_regular.iter().all(|p| p.iter().all(|c| c.is_zero()));
    Ok(RegularityReport {
        extension_degree: m,
        candidates,
        non_regular: non_regular
            .iter()
            .map(|p| p.iter().map(|&c| big.format(c)).collect())
            .collect(),
        only_origin,
    })
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub class: SingularityClass,
    pub regularity: Option<RegularityReport>,
}

fn unclassified(report: impl Into<String>, regularity: Option<RegularityReport>) -> Classification {
    Classification {
        class: SingularityClass::Unclassified {
            report: report.into(),
        },
        regularity,
    }
}

/// Classifies the strict transform of one chart. On the `omega` (and
/// characteristic-2 `pi`) chart the expected template is matched
/// coefficient-wise and the only non-regular point must be the origin; if
/// the template fails, a regular chart is still accepted as `Regular`
/// (`Smooth` when that was expected). The `y` and `x` charts must be regular
/// along the exceptional divisor; an `x` chart then carries its quotient.
pub fn classify(result: &ChartResult, expected: &SingularityClass) -> Classification {
    let reg = match regularity_certificate(result, 2) {
        Ok(r) => r,
        Err(e) => return unclassified(format!("regularity check failed: {e}"), None),
    };
    let non_regular_text = |r: &RegularityReport| {
        r.non_regular
            .iter()
            .take(4)
            .map(|p| format!("({})", p.join(", ")))
            .collect::<Vec<_>>()
            .join(" ")
    };
    match result.map.chart {
        ChartKind::Omega | ChartKind::Pi => {
            let strict = result.strict_as_model();
            let matched = match expected {
                SingularityClass::TemplateF { s } => match_template(&strict, Family::F, *s).map(|_| ()),
                SingularityClass::TemplateG { s } => match_template(&strict, Family::G, *s).map(|_| ()),
                SingularityClass::Char2Template { j } => match_char2(&strict, *j),
                other => Err(Error::NoTemplateMatch(format!("expected {other}"))),
            };
            match matched {
                Ok(()) if reg.only_origin => Classification {
                    class: expected.clone(),
                    regularity: Some(reg),
                },
                Ok(()) => {
                    let text = non_regular_text(&reg);
                    unclassified(format!("non-regular points away from the origin: {text}"), Some(reg))
                }
                Err(err) => {
                    if reg.regular() {
                        let class = if *expected == SingularityClass::Smooth {
                            SingularityClass::Smooth
                        } else {
                            SingularityClass::Regular
                        };
                        return Classification {
                            class,
                            regularity: Some(reg),
                        };
                    }
                    if let Some(t) = identify_template(&strict) {
                        let class = match t.family {
                            Family::F => SingularityClass::TemplateF { s: t.s },
                            Family::G => SingularityClass::TemplateG { s: t.s },
                        };
                        return Classification {
                            class,
                            regularity: Some(reg),
                        };
                    }
                    let text = non_regular_text(&reg);
                    unclassified(format!("{err}; non-regular points: {text}"), Some(reg))
                }
            }
        }
        ChartKind::Y | ChartKind::X(_) => {
            if !reg.regular() {
                let text = non_regular_text(&reg);
                return unclassified(format!("non-regular points on the exceptional divisor: {text}"), Some(reg));
            }
            let class = match &result.quotient {
                Some(q) => SingularityClass::CyclicQuotient {
                    order: q.order,
                    locus: q.locus.clone(),
                },
                None => SingularityClass::Regular,
            };
            Classification {
                class,
                regularity: Some(reg),
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WitnessForm {
    Quadric,
    GraphOfFunction,
    ArtinSchreierQuadric,
}

/// Certificate that an exceptional divisor is rational (hence ruled).
///
/// `Quadric`: a smooth point of the quadric cone. `GraphOfFunction`: the
/// variable in which the equation is linear. `ArtinSchreierQuadric`: a point
/// of multiplicity `p - 1` on the degree-`p` homogenization, from which the
/// projection is birational.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuledWitness {
    pub form: WitnessForm,
    pub variable: Option<String>,
    pub extension_degree: u32,
    pub point: Vec<String>,
    pub multiplicity: Option<u32>,
    pub projection_degree: Option<u32>,
    #[serde(skip)]
    raw_point: Vec<Fq>,
}

fn is_homogeneous_quadric(f: &ResiduePoly) -> bool {
    !f.is_zero() && f.terms().all(|(m, _)| m.iter().sum::<u32>() == 2)
}

/// Decomposes `f = a*z + b*z^p + h` with `h` free of `z`, for some variable `z`.
fn linear_variable(f: &ResiduePoly, p: u32) -> Option<(usize, Fq, Fq, ResiduePoly)> {
    let nv = f.nvars();
    'vars: for z in f.support_vars() {
        let mut a = Fq::ZERO;
        let mut b = Fq::ZERO;
        let mut rest = ResiduePoly::zero(f.field(), f.vars());
        for (m, &c) in f.terms() {
            if m[z] == 0 {
                rest.add_term(m.clone(), c);
                continue;
            }
            let pure = (0..nv).all(|i| i == z || m[i] == 0);
            match (pure, m[z]) {
                (true, 1) => a = c,
                (true, e) if e == p => b = c,
                _ => continue 'vars,
            }
        }
        if !a.is_zero() {
            return Some((z, a, b, rest));
        }
    }
    None
}

/// Finds `v != 0` over `F_{q^m}` (`m` = 1, then 2) in the support variables
/// with `Q(v) = 0` and `grad Q(v) != 0`.
fn smooth_quadric_point(q: &ResiduePoly) -> Result<Option<(Extension, Vec<Fq>)>> {
    let coords = q.support_vars();
    for m in 1..=2 {
        let ext = extension(q.field(), m)?;
        let big = ext.field.clone();
        let count = checked_count(big.order() as u64, coords.len()).unwrap_or(u64::MAX);
        if count > ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded(format!("{count} quadric points")));
        }
        let main = Compiled::new(q, &ext.embedding);
        let grads: Vec<Compiled> = coords
            .iter()
            .map(|&c| Compiled::new(&q.partial(c), &ext.embedding))
            .collect();
        let mut hit = None;
        let nv = q.nvars();
        for_each_point(nv, &coords, big.order(), &vec![Fq::ZERO; nv], |pt| {
            if hit.is_none()
                && pt.iter().any(|c| !c.is_zero())
                && main.eval(&big, pt).is_zero()
                && grads.iter().any(|g| !g.eval(&big, pt).is_zero())
            {
                hit = Some(pt.to_vec());
            }
        });
        if let Some(pt) = hit {
            return Ok(Some((ext, pt)));
        }
    }
    Ok(None)
}

/// Multiplicity of `h` at `pt`, computed in the affine chart where
/// coordinate `fixed` (nonzero at `pt`) is held constant.
pub fn multiplicity_at(h: &ResiduePoly, pt: &[Fq], fixed: usize) -> Option<u32> {
    let field = h.field().clone();
    let vars = h.vars().clone();
    let nv = h.nvars();
    let mut shifted = ResiduePoly::zero(&field, &vars);
    for (m, &c) in h.terms() {
        let mut t = ResiduePoly::from_terms(&field, &vars, [(vec![0; nv], c)]);
        for (i, &e) in m.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let factor = if i == fixed {
                ResiduePoly::from_terms(&field, &vars, [(vec![0; nv], pt[i])])
            } else {
                let mut unit = vec![0; nv];
                unit[i] = 1;
                ResiduePoly::from_terms(&field, &vars, [(vec![0; nv], pt[i]), (unit, Fq::ONE)])
            };
            t = t.mul(&factor.pow(e));
        }
        shifted = shifted.add(&t);
    }
    shifted.min_degree()
}

/// The homogenization `a*z*theta^(p-1) + b*z^p + theta^(p-2) * Q` over the
/// extension, in variables `[z, theta, rest...]`.
fn artin_schreier_homogenization(
    a: Fq,
    b: Fq,
    quad: &ResiduePoly,
    z: usize,
    p: u32,
    ext: &Extension,
) -> (ResiduePoly, Vec<usize>) {
    let nv = quad.nvars();
    let others: Vec<usize> = (0..nv).filter(|&i| i != z).collect();
    let mut names = vec![quad.vars().name(z).to_string(), "theta".into()];
    names.extend(others.iter().map(|&i| quad.vars().name(i).to_string()));
    let vars = Vars::new(names);
    let big = &ext.field;
    let mut h = ResiduePoly::zero(big, &vars);
    let mut e = vec![0; nv + 1];
    e[0] = 1;
    e[1] = p - 1;
    h.add_term(e, ext.embedding.apply(a));
    let mut e = vec![0; nv + 1];
    e[0] = p;
    h.add_term(e, ext.embedding.apply(b));
    for (m, &c) in quad.terms() {
        let mut e = vec![0; nv + 1];
        e[1] = p - 2;
        for (slot, &i) in others.iter().enumerate() {
            e[slot + 2] = m[i];
        }
        h.add_term(e, ext.embedding.apply(c));
    }
    (h, others)
}

/// Rationality witness for an exceptional central fiber: a quadric cone,
/// an equation linear in one variable, or `z + tau z^p + Q`.
pub fn ruledness_witness(cf: &ResiduePoly, p: u32) -> Result<RuledWitness> {
    if is_homogeneous_quadric(cf) {
        let (ext, pt) = smooth_quadric_point(cf)?.ok_or_else(|| {
            Error::NoTemplateMatch(format!("quadric {} has no smooth point over F_q^2", cf.format()))
        })?;
        return Ok(RuledWitness {
            form: WitnessForm::Quadric,
            variable: None,
            extension_degree: ext.degree,
            point: pt.iter().map(|&c| ext.field.format(c)).collect(),
            multiplicity: None,
            projection_degree: None,
            raw_point: pt,
        });
    }
    let (z, a, b, rest) = linear_variable(cf, p).ok_or_else(|| {
        Error::NoTemplateMatch(format!("{} is not of a ruled template form", cf.format()))
    })?;
    let name = cf.vars().name(z).to_string();
    if b.is_zero() {
        return Ok(RuledWitness {
            form: WitnessForm::GraphOfFunction,
            variable: Some(name),
            extension_degree: 1,
            point: Vec::new(),
            multiplicity: None,
            projection_degree: None,
            raw_point: Vec::new(),
        });
    }
    if !is_homogeneous_quadric(&rest) {
        return Err(Error::NoTemplateMatch(format!(
            "{}: the part without {name} is not a quadratic form",
            cf.format()
        )));
    }
    let (ext, a_pt) = smooth_quadric_point(&rest)?.ok_or_else(|| {
        Error::NoTemplateMatch(format!("{} has no isotropic vector over F_q^2", rest.format()))
    })?;
    let (h, others) = artin_schreier_homogenization(a, b, &rest, z, p, &ext);
    let mut pt = vec![Fq::ZERO, Fq::ZERO];
    pt.extend(others.iter().map(|&i| a_pt[i]));
    let fixed = (2..pt.len()).find(|&i| !pt[i].is_zero()).unwrap();
    let mult = multiplicity_at(&h, &pt, fixed).ok_or_else(|| {
        Error::NoTemplateMatch("homogenization vanishes identically".into())
    })?;
    if mult != p - 1 {
        return Err(Error::NoTemplateMatch(format!(
            "witness point has multiplicity {mult}, expected {}",
            p - 1
        )));
    }
    Ok(RuledWitness {
        form: WitnessForm::ArtinSchreierQuadric,
        variable: Some(name),
        extension_degree: ext.degree,
        point: pt.iter().map(|&c| ext.field.format(c)).collect(),
        multiplicity: Some(mult),
        projection_degree: Some(p - mult),
        raw_point: pt,
    })
}

impl RuledWitness {
    /// Re-checks the certificate against the equation it was issued for.
    pub fn verify(&self, cf: &ResiduePoly, p: u32) -> bool {
        let Ok(ext) = extension(cf.field(), self.extension_degree) else {
            return false;
        };
        let big = &ext.field;
        match self.form {
            WitnessForm::Quadric => {
                if !is_homogeneous_quadric(cf) || self.raw_point.iter().all(|c| c.is_zero()) {
                    return false;
                }
                let q = cf.embed(big, &ext.embedding);
                let emb = Embedding::identity(big);
                q.eval(big, &emb, &self.raw_point).is_zero()
                    && (0..q.nvars())
                        .any(|i| !q.partial(i).eval(big, &emb, &self.raw_point).is_zero())
            }
            WitnessForm::GraphOfFunction => match linear_variable(cf, p) {
                Some((z, _, b, _)) => {
                    b.is_zero() && Some(cf.vars().name(z)) == self.variable.as_deref()
                }
                None => false,
            },
            WitnessForm::ArtinSchreierQuadric => {
                let Some((z, a, b, rest)) = linear_variable(cf, p) else {
                    return false;
                };
                if b.is_zero() || Some(cf.vars().name(z)) != self.variable.as_deref() {
                    return false;
                }
                let (h, _) = artin_schreier_homogenization(a, b, &rest, z, p, &ext);
                let pt = &self.raw_point;
                if pt.len() != h.nvars() || !pt[0].is_zero() || !pt[1].is_zero() {
                    return false;
                }
                let emb = Embedding::identity(big);
                let Some(fixed) = (2..pt.len()).find(|&i| !pt[i].is_zero()) else {
                    return false;
                };
                h.eval(big, &emb, pt).is_zero()
                    && multiplicity_at(&h, pt, fixed) == Some(p - 1)
                    && self.projection_degree == Some(1)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChartOutcome {
    pub chart: ChartResult,
    pub expected: SingularityClass,
    pub classification: Classification,
}

/// One exceptional divisor: its equation in every chart, and a witness
/// computed in the chart where the divisor is visibly rational.
#[derive(Clone, Debug)]
pub struct ExceptionalDivisor {
    pub equations: Vec<(String, ResiduePoly)>,
    pub witness_chart: String,
    pub witness: std::result::Result<RuledWitness, String>,
}

impl ExceptionalDivisor {
    pub fn witness_equation(&self) -> &ResiduePoly {
        &self
            .equations
            .iter()
            .find(|(c, _)| *c == self.witness_chart)
            .expect("witness chart is recorded")
            .1
    }

    pub fn verified(&self, p: u32) -> bool {
        match &self.witness {
            Ok(w) => w.verify(self.witness_equation(), p),
            Err(_) => false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Step {
    pub sign: Option<Sign>,
    pub input: Template,
    /// Equation the blowup was applied to.
    pub source: MultiPoly,
    pub charts: Vec<ChartOutcome>,
    pub exceptional: ExceptionalDivisor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    QuotientOnly,
    Char2Smooth,
    Incomplete,
}

#[derive(Clone, Debug)]
pub struct ResolutionTrace {
    pub p: u32,
    pub k: usize,
    pub steps: Vec<Step>,
    pub terminal: Terminal,
}

#[derive(Clone, Copy, Debug)]
#[derive(Default)]
pub struct ResolveOptions {
    pub all_x_charts: bool,
}


fn exceptional_divisor(charts: &[ChartOutcome], witness_chart: &str, p: u32) -> ExceptionalDivisor {
    let equations: Vec<(String, ResiduePoly)> = charts
        .iter()
        .map(|c| (c.chart.map.chart.name(), c.chart.exceptional_cf.clone()))
        .collect();
    let witness = equations
        .iter()
        .find(|(c, _)| c == witness_chart)
        .map(|(_, eq)| ruledness_witness(eq, p).map_err(|e| e.to_string()))
        .unwrap_or_else(|| Err(format!("no {witness_chart} chart")));
    ExceptionalDivisor {
        equations,
        witness_chart: witness_chart.into(),
        witness,
    }
}

fn expected_for(chart: &ChartResult, omega: &SingularityClass) -> SingularityClass {
    match chart.map.chart {
        ChartKind::Omega | ChartKind::Pi => omega.clone(),
        ChartKind::Y => SingularityClass::Regular,
        ChartKind::X(_) => match &chart.quotient {
            Some(q) => SingularityClass::CyclicQuotient {
                order: q.order,
                locus: q.locus.clone(),
            },
            None => SingularityClass::Regular,
        },
    }
}

fn run_step(
    model: &LocalModel,
    sign: Sign,
    omega_expected: SingularityClass,
    opts: &ResolveOptions,
) -> Result<Step> {
    let charts = all_charts(model, sign, opts.all_x_charts)?;
    let outcomes: Vec<ChartOutcome> = charts
        .into_iter()
        .map(|chart| {
            let expected = expected_for(&chart, &omega_expected);
            let classification = classify(&chart, &expected);
            ChartOutcome {
                chart,
                expected,
                classification,
            }
        })
        .collect();
    let exceptional = exceptional_divisor(&outcomes, "y", model.ring().p());
    Ok(Step {
        sign: Some(sign),
        input: model.template,
        source: model.equation.clone(),
        charts: outcomes,
        exceptional,
    })
}

/// Runs the resolution from an `F(0)` model (odd `p`) or an `M(0)` model
/// (`p = 2`). Chart construction errors propagate; a failed classification
/// ends the trace as `Incomplete` with the report kept in the step.
pub fn resolve(model: &LocalModel, opts: &ResolveOptions) -> Result<ResolutionTrace> {
    let ring = model.ring();
    let (p, k) = (ring.p(), ring.k());
    if p == 2 {
        return resolve_char2(model);
    }
    if model.template != Template::F(0) {
        return Err(Error::Precondition(format!(
            "resolution starts from F(0), got {}",
            model.template
        )));
    }
    let step_len = 2 * p as usize - 2;
    if k % step_len != 0 {
        return Err(Error::InvalidRing(format!("2(p-1) = {step_len} does not divide k = {k}")));
    }
    let mut trace = ResolutionTrace {
        p,
        k,
        steps: Vec::new(),
        terminal: Terminal::Incomplete,
    };
    let mut current = model.clone();
    let mut s = 0u32;
    loop {
        let g = SingularityClass::TemplateG { s };
        let step = run_step(&current, Sign::Minus, g.clone(), opts)?;
        let omega = step.charts[0].clone();
        trace.steps.push(step);
        if omega.classification.class != g {
            return Ok(trace);
        }
        current = LocalModel {
            equation: omega.chart.strict_as_model(),
            template: Template::G(s),
            delta: current.delta.clone(),
        };

        let terminal = step_len * (s as usize + 1) == k;
        let expected = if terminal {
            SingularityClass::Regular
        } else {
            SingularityClass::TemplateF { s: s + 1 }
        };
        let step = run_step(&current, Sign::Plus, expected.clone(), opts)?;
        let omega = step.charts[0].clone();
        trace.steps.push(step);
        if omega.classification.class != expected {
            return Ok(trace);
        }
        if terminal {
            trace.terminal = Terminal::QuotientOnly;
            return Ok(trace);
        }
        s += 1;
        current = LocalModel {
            equation: omega.chart.strict_as_model(),
            template: Template::F(s),
            delta: current.delta.clone(),
        };
    }
}

fn resolve_char2(model: &LocalModel) -> Result<ResolutionTrace> {
    let k = model.ring().k();
    if model.template != Template::Char2(0) {
        return Err(Error::Precondition(format!(
            "resolution starts from M(0), got {}",
            model.template
        )));
    }
    let mut trace = ResolutionTrace {
        p: 2,
        k,
        steps: Vec::new(),
        terminal: Terminal::Incomplete,
    };
    let mut current = model.clone();
    loop {
        let Template::Char2(j) = current.template else {
            unreachable!("char-2 loop only produces M(j)")
        };
        let b = ordinary_blowup_char2(&current)?;
        let expected = if b.terminal {
            SingularityClass::Smooth
        } else {
            SingularityClass::Char2Template { j: j + 1 }
        };
        let classification = classify(&b.chart, &expected);
        let ok = classification.class == expected;
        let outcome = ChartOutcome {
            chart: b.chart.clone(),
            expected,
            classification,
        };
        let witness = ruledness_witness(&b.quadric, 2).map_err(|e| e.to_string());
        trace.steps.push(Step {
            sign: None,
            input: current.template,
            source: current.equation.clone(),
            charts: vec![outcome],
            exceptional: ExceptionalDivisor {
                equations: vec![
                    ("quadric".into(), b.quadric.clone()),
                    ("pi".into(), b.chart.exceptional_cf.clone()),
                ],
                witness_chart: "quadric".into(),
                witness,
            },
        });
        if !ok {
            return Ok(trace);
        }
        if b.terminal {
            if projective_singular_points(&b.quadric).is_empty() {
                trace.terminal = Terminal::Char2Smooth;
            }
            return Ok(trace);
        }
        if trace.steps.len() > k {
            return Ok(trace);
        }
        current = b.next.expect("non-terminal blowup has a next model");
    }
}

/// Largest cyclic quotient order recorded anywhere in the trace, or 1.
pub fn uniruling_degree_bound(trace: &ResolutionTrace) -> u32 {
    trace.quotient_orders().into_iter().max().unwrap_or(1)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartsRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<ChartRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<ChartRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub x: Vec<ChartRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<ChartRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassRecord {
    pub chart: String,
    pub class: SingularityClass,
    pub expected: SingularityClass,
    pub regularity: Option<RegularityReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquationRecord {
    pub chart: String,
    pub equation: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExceptionalRecord {
    pub equations: Vec<EquationRecord>,
    pub witness_chart: String,
    pub witness: Option<RuledWitness>,
    pub witness_error: Option<String>,
    pub verified: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub sign: Option<Sign>,
    pub input: String,
    pub charts: ChartsRecord,
    pub classification: Vec<ClassRecord>,
    pub exceptional: Vec<ExceptionalRecord>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub scenario: serde_json::Value,
    pub steps: Vec<StepRecord>,
    pub terminal: Terminal,
    pub uniruling_bound: u32,
}

impl ResolutionTrace {
    pub fn weighted_blowups(&self) -> usize {
        self.steps.iter().filter(|s| s.sign.is_some()).count()
    }

    pub fn ordinary_blowups(&self) -> usize {
        self.steps.iter().filter(|s| s.sign.is_none()).count()
    }

    /// Number of blowups the theory predicts for this `(p, k)`.
    pub fn expected_blowups(&self) -> usize {
        if self.p == 2 {
            self.k
        } else {
            2 * self.k / (2 * self.p as usize - 2)
        }
    }

    pub fn quotient_orders(&self) -> Vec<u32> {
        self.steps
            .iter()
            .flat_map(|s| s.charts.iter())
            .filter_map(|c| c.chart.quotient.as_ref().map(|q| q.order))
            .collect()
    }

    pub fn unclassified(&self) -> Vec<String> {
        self.steps
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                s.charts.iter().filter_map(move |c| match &c.classification.class {
                    SingularityClass::Unclassified { report } => {
                        Some(format!("step {} {} chart: {report}", i + 1, c.chart.map.chart.name()))
                    }
                    _ => None,
                })
            })
            .collect()
    }

    pub fn all_witnessed(&self) -> bool {
        self.steps.iter().all(|s| s.exceptional.verified(self.p))
    }

    /// Terminal verdict reached, blowup count as predicted, every chart
    /// classified and every exceptional divisor witnessed ruled.
    pub fn is_success(&self) -> bool {
        self.terminal != Terminal::Incomplete
            && self.steps.len() == self.expected_blowups()
            && self.unclassified().is_empty()
            && self.all_witnessed()
    }

    pub fn record(&self, scenario: serde_json::Value) -> TraceRecord {
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let mut charts = ChartsRecord {
                    omega: None,
                    y: None,
                    x: Vec::new(),
                    pi: None,
                };
                for c in &s.charts {
                    let r = c.chart.record();
                    match c.chart.map.chart {
                        ChartKind::Omega => charts.omega = Some(r),
                        ChartKind::Y => charts.y = Some(r),
                        ChartKind::X(_) => charts.x.push(r),
                        ChartKind::Pi => charts.pi = Some(r),
                    }
                }
                let classification = s
                    .charts
                    .iter()
                    .map(|c| ClassRecord {
                        chart: c.chart.map.chart.name(),
                        class: c.classification.class.clone(),
                        expected: c.expected.clone(),
                        regularity: c.classification.regularity.clone(),
                    })
                    .collect();
                let e = &s.exceptional;
                let exceptional = vec![ExceptionalRecord {
                    equations: e
                        .equations
                        .iter()
                        .map(|(chart, eq)| EquationRecord {
                            chart: chart.clone(),
                            equation: eq.format(),
                        })
                        .collect(),
                    witness_chart: e.witness_chart.clone(),
                    witness: e.witness.as_ref().ok().cloned(),
                    witness_error: e.witness.as_ref().err().cloned(),
                    verified: e.verified(self.p),
                }];
                StepRecord {
                    sign: s.sign,
                    input: s.input.to_string(),
                    charts,
                    classification,
                    exceptional,
                }
            })
            .collect();
        TraceRecord {
            scenario,
            steps,
            terminal: self.terminal,
            uniruling_bound: uniruling_degree_bound(self),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::{chart_omega, chart_x, chart_y};
    use crate::dvr::ring_create;

    fn rp(q: u64, names: &[&str], s: &str) -> ResiduePoly {
        let field = GaloisField::with_order(q).unwrap();
        ResiduePoly::parse(&field, &Vars::new(names.iter().copied()), s).unwrap()
    }

    #[test]
    fn smoothness_oracle_examples() {
        let f = rp(3, &["beta", "alpha1", "alpha2"], "beta^3 + beta + alpha1^2 + alpha2^2");
        assert!(smoothness_oracle(&f, 2).unwrap().smooth);
        let g = rp(3, &["alpha1", "alpha2"], "alpha1^2 + alpha2^2");
        let v = smoothness_oracle(&g, 2).unwrap();
        assert!(!v.smooth);
        assert_eq!(v.singular_point.unwrap(), vec!["0", "0"]);
        let h = rp(2, &["gamma", "alpha1"], "gamma + gamma^2 + alpha1^2");
        assert!(smoothness_oracle(&h, 2).unwrap().smooth);
    }

    #[test]
    fn budget_is_enforced() {
        let names: Vec<String> = (0..12).map(|i| format!("a{i}")).collect();
        let field = GaloisField::with_order(5).unwrap();
        let terms = (0..12).map(|i| {
            let mut e = vec![0; 12];
            e[i] = 2;
            (e, Fq::ONE)
        });
        let f = ResiduePoly::from_terms(&field, &Vars::new(names), terms);
        assert!(matches!(smoothness_oracle(&f, 1), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn witness_forms() {
        let q = rp(3, &["alpha1", "alpha2", "y", "gamma"], "alpha1^2 + alpha2^2");
        let w = ruledness_witness(&q, 3).unwrap();
        assert_eq!(w.form, WitnessForm::Quadric);
        assert_eq!(w.extension_degree, 2);
        assert!(w.verify(&q, 3));

        let g = rp(3, &["alpha1", "alpha2", "gamma"], "gamma + alpha1^2 + alpha2^2");
        let w = ruledness_witness(&g, 3).unwrap();
        assert_eq!(w.form, WitnessForm::GraphOfFunction);
        assert!(w.verify(&g, 3));

        let a = rp(3, &["alpha1", "alpha2", "gamma"], "gamma + gamma^3 + alpha1^2 + alpha2^2");
        let w = ruledness_witness(&a, 3).unwrap();
        assert_eq!(w.form, WitnessForm::ArtinSchreierQuadric);
        assert_eq!(w.multiplicity, Some(2));
        assert_eq!(w.projection_degree, Some(1));
        assert_eq!(&w.point[..2], &["0", "0"]);
        assert!(w.verify(&a, 3));
        // the certificate does not transfer to another equation
        assert!(!w.verify(&g, 3));

        let bad = rp(3, &["alpha1", "gamma"], "gamma^2 + alpha1^3");
        assert!(matches!(ruledness_witness(&bad, 3), Err(Error::NoTemplateMatch(_))));
    }

    #[test]
    fn multiplicity_by_hand() {
        // gamma*theta^2 + gamma^3 + theta*(a1^2 + a2^2) at [0:0:1:i] over F_9:
        // lowest-degree part after translation is theta * 2i*w2 + ..., degree 2
        let f9 = GaloisField::with_order(9).unwrap();
        let i = f9.elements().find(|&x| f9.mul(x, x) == f9.from_int(-1)).unwrap();
        let vars = Vars::new(["gamma", "theta", "a1", "a2"]);
        let h = ResiduePoly::parse(&f9, &vars, "gamma * theta^2 + gamma^3 + theta * a1^2 + theta * a2^2").unwrap();
        assert_eq!(multiplicity_at(&h, &[Fq(0), Fq(0), Fq(1), i], 2), Some(2));
        // a generic point of the hypersurface is smooth
        assert_eq!(multiplicity_at(&h, &[Fq(0), Fq(1), Fq(1), i], 2), Some(1));
    }

    fn f0(p: u32, k: usize, n: usize) -> LocalModel {
        let r = ring_create(p, k, p as u64, 4 * k + 10, 1).unwrap();
        let v = Vars::model(n);
        let mut f = MultiPoly::var(&r, &v, n).pow(p);
        for i in 0..n {
            f = f.add(&MultiPoly::var(&r, &v, i).pow(2));
        }
        for j in 1..p {
            let binom = (1..=j as u64).fold(1u64, |acc, t| acc * (p as u64 - t + 1) / t);
            let mut e = vec![0; n + 1];
            e[n] = j;
            f.add_term(e, r.from_int(binom as i64));
        }
        LocalModel::new(f, Template::F(0))
    }

    #[test]
    fn classification_examples() {
        let m = f0(3, 4, 2);
        let w = chart_omega(&m, Sign::Minus).unwrap();
        let c = classify(&w, &SingularityClass::TemplateG { s: 0 });
        assert_eq!(c.class, SingularityClass::TemplateG { s: 0 });
        let reg = c.regularity.unwrap();
        assert_eq!(reg.non_regular, vec![vec!["0", "0", "0"]]);
        let y = chart_y(&m, Sign::Minus).unwrap();
        assert_eq!(classify(&y, &SingularityClass::Regular).class, SingularityClass::Regular);
        let m5 = f0(5, 8, 2);
        let x = chart_x(&m5, Sign::Minus, 0).unwrap();
        assert_eq!(
            classify(&x, &SingularityClass::Regular).class,
            SingularityClass::CyclicQuotient {
                order: 2,
                locus: "beta=gamma=zeta=0".into()
            }
        );
    }

    #[test]
    fn resolve_p3_k4() {
        let t = resolve(&f0(3, 4, 2), &ResolveOptions::default()).unwrap();
        assert_eq!(t.terminal, Terminal::QuotientOnly);
        assert_eq!(t.weighted_blowups(), 2);
        assert!(t.unclassified().is_empty(), "{:?}", t.unclassified());
        assert!(t.all_witnessed());
        assert_eq!(uniruling_degree_bound(&t), 2);
        assert!(t.is_success());
        let forms: Vec<WitnessForm> = t
            .steps
            .iter()
            .map(|s| s.exceptional.witness.as_ref().unwrap().form)
            .collect();
        assert_eq!(forms, vec![WitnessForm::Quadric, WitnessForm::ArtinSchreierQuadric]);
    }

    #[test]
    fn resolve_p5_k16() {
        let t = resolve(&f0(5, 16, 2), &ResolveOptions::default()).unwrap();
        assert!(t.is_success(), "{:?}", t.unclassified());
        assert_eq!(t.weighted_blowups(), 4);
        let inputs: Vec<Template> = t.steps.iter().map(|s| s.input).collect();
        assert_eq!(
            inputs,
            vec![Template::F(0), Template::G(0), Template::F(1), Template::G(1)]
        );
        assert_eq!(uniruling_degree_bound(&t), 3);
        assert!(t.quotient_orders().iter().all(|&o| o < 5));
    }

    #[test]
    fn resolve_char2_k2() {
        let r = ring_create(2, 2, 2, 18, 1).unwrap();
        let f = MultiPoly::parse(&r, &Vars::model(2), "y^2; (pi^2) * y; x1 * x2").unwrap();
        let t = resolve(&LocalModel::new(f, Template::Char2(0)), &ResolveOptions::default()).unwrap();
        assert_eq!(t.terminal, Terminal::Char2Smooth);
        assert_eq!(t.ordinary_blowups(), 2);
        assert!(t.is_success(), "{:?}", t.unclassified());
        assert_eq!(uniruling_degree_bound(&t), 1);
    }
}
