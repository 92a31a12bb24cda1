//! Local models of p-cyclic covers `y^p + s = 0` and their reduction to
//! normal form: diagonalize the quadratic part, complete the square to kill
//! the linear term, then translate `y` by a p-th root of the constant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dvr::{DvrElement, Ring};
use crate::error::{Error, Result};
use crate::field::{Fq, GaloisField};
use crate::linalg::{self, FqMatrix};
use crate::poly::{Monomial, MultiPoly, VarSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index")]
pub enum Template {
    Raw,
    Diagonalized,
    NormalForm,
    Shifted,
    F(u32),
    G(u32),
    /// Characteristic-2 model `y^2 + (delta*y + f1)*2/pi^j + q + f3`.
    Char2(u32),
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Template::Raw => write!(f, "Raw"),
            Template::Diagonalized => write!(f, "Diagonalized"),
            Template::NormalForm => write!(f, "NormalForm"),
            Template::Shifted => write!(f, "Shifted"),
            Template::F(s) => write!(f, "F({s})"),
            Template::G(s) => write!(f, "G({s})"),
            Template::Char2(j) => write!(f, "M({j})"),
        }
    }
}

/// A hypersurface germ in `x1..xn, y` over `R`. The last variable plays
/// the role of `y`.
#[derive(Clone, Debug)]
pub struct LocalModel {
    pub equation: MultiPoly,
    pub template: Template,
    pub delta: Option<DvrElement>,
}

impl LocalModel {
    pub fn new(equation: MultiPoly, template: Template) -> Self {
        LocalModel {
            equation,
            template,
            delta: None,
        }
    }

    pub fn ring(&self) -> &Ring {
        self.equation.ring()
    }

    pub fn vars(&self) -> &VarSet {
        self.equation.vars()
    }

    pub fn n(&self) -> usize {
        self.equation.nvars() - 1
    }

    pub fn x_vars(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }

    pub fn y_var(&self) -> usize {
        self.n()
    }
}

/// An invertible substitution. `forward[i]` expresses old variable `i` in
/// the new coordinates; `inverse[i]` expresses new variable `i` in the old.
#[derive(Clone, Debug)]
pub struct CoordinateChange {
    pub name: String,
    pub forward: Vec<MultiPoly>,
    pub inverse: Vec<MultiPoly>,
}

impl CoordinateChange {
    pub fn identity(name: &str, ring: &Ring, vars: &VarSet) -> Self {
        let id: Vec<MultiPoly> = (0..vars.len()).map(|i| MultiPoly::var(ring, vars, i)).collect();
        CoordinateChange {
            name: name.into(),
            forward: id.clone(),
            inverse: id,
        }
    }

    /// Checks `after = before o forward` and `before = after o inverse`.
    pub fn verify(&self, before: &MultiPoly, after: &MultiPoly) -> Result<bool> {
        let prec = before.precision().min(after.precision());
        let there = before.substitute(&self.forward)?;
        let back = after.substitute(&self.inverse)?;
        Ok(there.eq_at(after, prec) && back.eq_at(before, prec))
    }
}

pub fn make_cover(section: &MultiPoly, p: u32) -> Result<LocalModel> {
    let ring = section.ring();
    if ring.p() != p {
        return Err(Error::Precondition(format!(
            "cover degree {p} differs from residue characteristic {}",
            ring.p()
        )));
    }
    let y = section.nvars() - 1;
    if section.terms().any(|(m, _)| m[y] > 0) {
        return Err(Error::Precondition("the section must not involve y".into()));
    }
    let yp = MultiPoly::var(ring, section.vars(), y).pow(p);
    Ok(LocalModel::new(yp.add(section), Template::Raw))
}

fn has_y(f: &MultiPoly, y: usize) -> bool {
    f.terms().any(|(m, _)| m[y] > 0)
}

/// Whether the central-fiber quadratic x-part has a nondegenerate Hessian
/// (the alternating polar form in characteristic 2).
pub fn check_nondegenerate(model: &LocalModel) -> Result<bool> {
    let xs = model.x_vars();
    let parts = model.equation.grade_in_x(&xs);
    if let Some((m, c)) = parts.linear.terms().find(|(_, c)| c.is_unit()) {
        return Err(Error::NotSingularAtOrigin(format!(
            "linear term with unit coefficient {} at exponent {m:?}",
            model.ring().format(c)
        )));
    }
    let field = model.ring().field();
    let h = parts.quadratic.central_fiber().hessian(&xs);
    Ok(linalg::rank(field, &h) == xs.len())
}

fn bilinear(field: &crate::field::GaloisField, a: &FqMatrix, u: &[Fq], v: &[Fq]) -> Fq {
    let mut s = Fq::ZERO;
    for (i, ui) in u.iter().enumerate() {
        if ui.is_zero() {
            continue;
        }
        for (j, vj) in v.iter().enumerate() {
            s = field.add(s, field.mul(*ui, field.mul(a[i][j], *vj)));
        }
    }
    s
}

/// Index of a pending vector `v` with `A(v, v)` a nonzero square, replacing
/// `pending[i]` by `pending[i] + c * pending[j]` when no single vector works.
fn square_pivot(field: &GaloisField, a: &FqMatrix, pending: &mut [Vec<Fq>]) -> Option<usize> {
    let good = |v: &[Fq]| {
        let d = bilinear(field, a, v, v);
        !d.is_zero() && field.sqrt(d).is_some()
    };
    if let Some(i) = pending.iter().position(|v| good(v)) {
        return Some(i);
    }
    for i in 0..pending.len() {
        for j in 0..pending.len() {
            if i == j {
                continue;
            }
            for c in field.elements().skip(1) {
                let w: Vec<Fq> = pending[i]
                    .iter()
                    .zip(&pending[j])
                    .map(|(&x, &y)| field.add(x, field.mul(c, y)))
                    .collect();
                if good(&w) {
                    pending[i] = w;
                    return Some(i);
                }
            }
        }
    }
    None
}

/// Linear change `x -> P x` over `R` making the central-fiber quadratic
/// part exactly `x1^2 + ... + xn^2`. Returns the residue matrix `P`.
pub fn diagonalize(model: &LocalModel) -> Result<(LocalModel, CoordinateChange, FqMatrix)> {
    let ring = model.ring();
    let field = ring.field().clone();
    if ring.p() == 2 {
        return Err(Error::Precondition("diagonalization needs p odd".into()));
    }
    if !check_nondegenerate(model)? {
        return Err(Error::Precondition("quadratic part is degenerate".into()));
    }
    let xs = model.x_vars();
    let n = xs.len();
    let half = field.inv(field.from_int(2)).unwrap();
    let h = model
        .equation
        .grade_in_x(&xs)
        .quadratic
        .central_fiber()
        .hessian(&xs);
    let a: FqMatrix = h
        .iter()
        .map(|row| row.iter().map(|&c| field.mul(c, half)).collect())
        .collect();

    let mut pending: Vec<Vec<Fq>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Fq::ONE } else { Fq::ZERO }).collect())
        .collect();
    let mut columns: Vec<Vec<Fq>> = Vec::with_capacity(n);
    while !pending.is_empty() {
        let idx = square_pivot(&field, &a, &mut pending).ok_or_else(|| {
            if pending.iter().all(|v| pending.iter().all(|w| bilinear(&field, &a, v, w).is_zero())) {
                Error::Precondition("quadratic part is degenerate".into())
            } else {
                Error::ExtendResidueField(format!(
                    "the form does not represent a nonzero square over F_{}",
                    field.order()
                ))
            }
        })?;
        let v = pending.remove(idx);
        let d = bilinear(&field, &a, &v, &v);
        let d_inv = field.inv(d).unwrap();
        for w in pending.iter_mut() {
            let c = field.mul(bilinear(&field, &a, w, &v), d_inv);
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi = field.sub(*wi, field.mul(c, *vi));
            }
        }
        let root = field.sqrt(d).expect("pivot is a square");
        let scale = field.inv(root).unwrap();
        columns.push(v.iter().map(|&c| field.mul(c, scale)).collect());
    }
    // P has the chosen vectors as columns: old x_i = sum_j P[i][j] new x_j.
    let p_mat: FqMatrix = (0..n).map(|i| (0..n).map(|j| columns[j][i]).collect()).collect();
    let lifted: Vec<Vec<DvrElement>> = p_mat
        .iter()
        .map(|row| row.iter().map(|&c| ring.lift(c)).collect())
        .collect();
    let inv = linalg::inverse_over_ring(ring, &lifted)?;

    let vars = model.vars();
    let linear_images = |m: &[Vec<DvrElement>]| -> Vec<MultiPoly> {
        let mut images: Vec<MultiPoly> = m
            .iter()
            .map(|row| {
                let mut f = MultiPoly::zero(ring, vars);
                for (j, c) in row.iter().enumerate() {
                    let mut e = vec![0; n + 1];
                    e[j] = 1;
                    f.add_term(e, c.clone());
                }
                f
            })
            .collect();
        images.push(MultiPoly::var(ring, vars, n));
        images
    };
    let change = CoordinateChange {
        name: "diagonalize".into(),
        forward: linear_images(&lifted),
        inverse: linear_images(&inv),
    };
    let equation = model.equation.substitute(&change.forward)?;
    let out = LocalModel {
        equation,
        template: Template::Diagonalized,
        delta: model.delta.clone(),
    };
    Ok((out, change, p_mat))
}

/// Result of [`kill_linear`].
#[derive(Clone, Debug)]
pub struct LinearElimination {
    pub model: LocalModel,
    pub change: CoordinateChange,
    /// `x_old = x_new + epsilon`.
    pub epsilon: Vec<DvrElement>,
    /// Minimum ord of the linear part before each round (`None` once zero).
    pub ord_history: Vec<Option<usize>>,
}

const MAX_ROUNDS: usize = 256;

/// Repeatedly shifts `x_i -> x_i - a_i/2` where `a_i` is the current linear
/// coefficient, until every linear coefficient has ord at least `target_ord`
/// (capped at the working precision, where it means the linear part is zero).
pub fn kill_linear(model: &LocalModel, target_ord: usize) -> Result<LinearElimination> {
    let ring = model.ring();
    if ring.p() == 2 {
        return Err(Error::Precondition("completing the square needs p odd".into()));
    }
    let xs = model.x_vars();
    let n = xs.len();
    let vars = model.vars().clone();
    let half = ring.inv(&ring.from_int(2))?;
    let mut f = model.equation.clone();
    let mut epsilon = vec![ring.zero(); n];
    let mut history = Vec::new();
    for _ in 0..MAX_ROUNDS {
        let target = target_ord.min(f.precision());
        let lin = f.grade_in_x(&xs).linear;
        if has_y(&lin, n) {
            return Err(Error::Precondition("linear x-part involves y".into()));
        }
        let ord = lin.min_ord();
        if let (Some(Some(prev)), Some(cur)) = (history.last(), ord) {
            if cur <= *prev {
                return Err(Error::PrecisionExhausted(format!(
                    "linear part stuck at ord {cur} before reaching {target}"
                )));
            }
        }
        history.push(ord);
        if ord.is_none_or(|o| o >= target) {
            let images_fwd: Vec<MultiPoly> = (0..=n)
                .map(|i| {
                    let v = MultiPoly::var(ring, &vars, i);
                    if i < n {
                        v.add(&MultiPoly::constant(ring, &vars, epsilon[i].clone()))
                    } else {
                        v
                    }
                })
                .collect();
            let images_inv: Vec<MultiPoly> = (0..=n)
                .map(|i| {
                    let v = MultiPoly::var(ring, &vars, i);
                    if i < n {
                        v.sub(&MultiPoly::constant(ring, &vars, epsilon[i].clone()))
                    } else {
                        v
                    }
                })
                .collect();
            return Ok(LinearElimination {
                model: LocalModel {
                    equation: f,
                    template: Template::NormalForm,
                    delta: model.delta.clone(),
                },
                change: CoordinateChange {
                    name: "kill_linear".into(),
                    forward: images_fwd,
                    inverse: images_inv,
                },
                epsilon,
                ord_history: history,
            });
        }
        let mut images = Vec::with_capacity(n + 1);
        for (i, eps) in epsilon.iter_mut().enumerate() {
            let mut e = vec![0; n + 1];
            e[i] = 1;
            let h = ring.mul(&lin.coefficient(&e), &half);
            *eps = ring.sub(eps, &h);
            images.push(MultiPoly::var(ring, &vars, i).sub(&MultiPoly::constant(ring, &vars, h)));
        }
        images.push(MultiPoly::var(ring, &vars, n));
        f = f.substitute(&images)?;
    }
    Err(Error::PrecisionExhausted(format!(
        "linear part did not vanish within {MAX_ROUNDS} rounds"
    )))
}

/// Translates `y -> y + delta`, which removes the constant term exactly when
/// it equals `-delta^p`.
pub fn shift_root(model: &LocalModel, delta: &DvrElement) -> Result<(LocalModel, CoordinateChange)> {
    let ring = model.ring();
    if !delta.is_unit() {
        return Err(Error::Precondition(format!(
            "delta = {} is not a unit",
            ring.format(delta)
        )));
    }
    let vars = model.vars().clone();
    let n = model.n();
    let mut forward: Vec<MultiPoly> = (0..=n).map(|i| MultiPoly::var(ring, &vars, i)).collect();
    let mut inverse = forward.clone();
    let d = MultiPoly::constant(ring, &vars, delta.clone());
    forward[n] = forward[n].add(&d);
    inverse[n] = inverse[n].sub(&d);
    let equation = model.equation.substitute(&forward)?;
    let constant = equation.coefficient(&vec![0; n + 1]);
    if !constant.is_zero() {
        return Err(Error::NotPthRoot(format!(
            "constant term {} survives (ord {})",
            ring.format(&constant),
            constant.ord().unwrap_or(usize::MAX)
        )));
    }
    let template = if ring.p() == 2 {
        Template::Char2(0)
    } else {
        Template::F(0)
    };
    Ok((
        LocalModel {
            equation,
            template,
            delta: Some(delta.clone()),
        },
        CoordinateChange {
            name: "shift_root".into(),
            forward,
            inverse,
        },
    ))
}

/// Every stage of the reduction from a raw cover to the first template.
#[derive(Clone, Debug)]
pub struct NormalizationTrace {
    pub stages: Vec<(LocalModel, CoordinateChange)>,
    pub model: LocalModel,
}

/// Runs diagonalize, kill_linear and shift_root (only the last in
/// characteristic 2, where the raw model is expected in the form
/// `y^2 + u + 2 f1 + q + f3`).
pub fn to_normal_form(raw: &LocalModel, delta: &DvrElement) -> Result<NormalizationTrace> {
    let mut stages = Vec::new();
    let mut current = raw.clone();
    if raw.ring().p() != 2 {
        let (m, c, _) = diagonalize(&current)?;
        stages.push((m.clone(), c));
        let lin = kill_linear(&m, usize::MAX)?;
        stages.push((lin.model.clone(), lin.change));
        current = lin.model;
    } else if !check_nondegenerate(&current)? {
        return Err(Error::Precondition(
            "quadratic part has a degenerate alternating form".into(),
        ));
    }
    let (m, c) = shift_root(&current, delta)?;
    stages.push((m.clone(), c));
    Ok(NormalizationTrace { stages, model: m })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    F,
    G,
}

/// Successful template match; `unit` is the coefficient standing in for
/// `delta^(p-1)` in the `y`-term.
#[derive(Clone, Debug)]
pub struct TemplateMatch {
    pub family: Family,
    pub s: u32,
    pub unit: DvrElement,
}

impl TemplateMatch {
    pub fn template(&self) -> Template {
        match self.family {
            Family::F => Template::F(self.s),
            Family::G => Template::G(self.s),
        }
    }
}

/// The pair of `pi`-exponents dividing `p` in the `y`-term and in the
/// `y^2 g(y)` block.
pub fn template_exponents(p: u32, family: Family, s: u32) -> (usize, usize) {
    let (p, s) = (p as usize, s as usize);
    match family {
        Family::F => ((2 * p - 2) * s, (2 * p - 4) * s),
        Family::G => ((2 * p - 2) * s + p - 2, (2 * p - 4) * s + p - 3),
    }
}

fn describe(f: &MultiPoly, m: &Monomial) -> String {
    let names = f.vars().names();
    let parts: Vec<String> = m
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, &e)| {
            if e == 1 {
                names[i].clone()
            } else {
                format!("{}^{e}", names[i])
            }
        })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

fn ord_text(c: &DvrElement) -> String {
    c.ord().map_or("inf".into(), |o| o.to_string())
}

/// Checks that `f` (last variable `y`) has the shape of `F_s` or `G_s`:
/// no constant, a `y`-coefficient of exact ord `k - e1`, the leading `y^p`
/// coefficient (`1` or `pi`) up to the `g`-block, other pure `y`-powers
/// divisible by `p/pi^e2`, quadratic part `sum x_i^2` up to multiples of
/// `p`, no linear or `y`-mixed quadratic terms, and an arbitrary cubic tail.
/// On mismatch the error lists every offending monomial.
pub fn match_template(f: &MultiPoly, family: Family, s: u32) -> Result<TemplateMatch> {
    let ring = f.ring();
    let p = ring.p();
    let k = ring.k();
    let (e1, e2) = template_exponents(p, family, s);
    if (2 * p as usize - 2) * s as usize >= k {
        return Err(Error::NoTemplateMatch(format!(
            "{family:?}({s}) needs (2p-2)s < k = {k}"
        )));
    }
    let prec = f.precision();
    let unit_ord = k - e1;
    if unit_ord >= prec {
        return Err(Error::PrecisionExhausted(format!(
            "y-coefficient ord {unit_ord} not visible at precision {prec}"
        )));
    }
    let y = f.nvars() - 1;
    let n = y;
    let lead = match family {
        Family::F => ring.one(),
        Family::G => ring.pi_pow(1),
    };
    let mut problems = Vec::new();
    let mut unit = None;
    let mut seen_lead = false;
    let mut seen_sq = vec![false; n];
    for (m, c) in f.terms() {
        let xdeg: u32 = m[..n].iter().sum();
        let ydeg = m[y];
        let mono = describe(f, m);
        match (xdeg, ydeg) {
            (0, 0) => problems.push(format!("constant term {} should vanish", ring.format(c))),
            (0, 1) => {
                if c.ord() == Some(unit_ord) {
                    let u = ring.div_pow_pi(c, unit_ord)?;
                    let tau_inv = ring.inv(&ring.lift(ring.tau()))?;
                    unit = Some(ring.mul(&u, &tau_inv));
                } else {
                    problems.push(format!(
                        "y: expected ord exactly {unit_ord}, found ord {}",
                        ord_text(c)
                    ));
                }
            }
            (0, d) if d == p => {
                seen_lead = true;
                let diff = ring.sub(c, &lead);
                if diff.ord().is_some_and(|o| o < k - e2) {
                    problems.push(format!(
                        "y^{p}: expected {} + O(pi^{}), found {}",
                        ring.format(&lead),
                        k - e2,
                        ring.format(c)
                    ));
                }
            }
            (0, d) => {
                if c.ord().is_some_and(|o| o < k - e2) {
                    problems.push(format!(
                        "y^{d}: expected ord >= {}, found ord {}",
                        k - e2,
                        ord_text(c)
                    ));
                }
            }
            (1, _) => problems.push(format!(
                "{mono}: linear x-term not allowed (coefficient {})",
                ring.format(c)
            )),
            (2, 0) => {
                if let Some(i) = (0..n).find(|&i| m[i] == 2) {
                    seen_sq[i] = true;
                    let diff = ring.sub(c, &ring.one());
                    if diff.ord().is_some_and(|o| o < k) {
                        problems.push(format!(
                            "{mono}: expected 1 + O(p), found {}",
                            ring.format(c)
                        ));
                    }
                } else if c.ord().is_some_and(|o| o < k) {
                    problems.push(format!(
                        "{mono}: cross term must be divisible by p, found ord {}",
                        ord_text(c)
                    ));
                }
            }
            (2, _) => problems.push(format!(
                "{mono}: quadratic x-term involving y not allowed (coefficient {})",
                ring.format(c)
            )),
            _ => {}
        }
    }
    if !seen_lead && lead.ord().is_some_and(|o| o < k - e2) {
        problems.push(format!("y^{p}: leading coefficient {} missing", ring.format(&lead)));
    }
    for (i, seen) in seen_sq.iter().enumerate() {
        if !seen {
            problems.push(format!("{}^2: missing", f.vars().name(i)));
        }
    }
    if unit.is_none() && !problems.iter().any(|s| s.starts_with("y:")) {
        problems.push(format!("y: missing, expected ord exactly {unit_ord}"));
    }
    if problems.is_empty() {
        Ok(TemplateMatch {
            family,
            s,
            unit: unit.unwrap(),
        })
    } else {
        Err(Error::NoTemplateMatch(format!(
            "{family:?}({s}): {}",
            problems.join("; ")
        )))
    }
}

/// Tries every admissible `F_s` and `G_s` in turn.
pub fn identify_template(f: &MultiPoly) -> Option<TemplateMatch> {
    let ring = f.ring();
    let step = 2 * ring.p() as usize - 2;
    let max_s = (ring.k() - 1) / step.max(1);
    (0..=max_s as u32)
        .flat_map(|s| [Family::F, Family::G].map(|fam| (fam, s)))
        .find_map(|(fam, s)| match_template(f, fam, s).ok())
}

/// Checks the characteristic-2 shape `y^2 + (delta*y + f1)*2/pi^j + q + f3`:
/// no constant, `y^2` with residue 1, `y` with ord exactly `k - j`, linear
/// x-terms of ord at least `k - j`, and no other terms involving `y`.
pub fn match_char2(f: &MultiPoly, j: u32) -> Result<()> {
    let ring = f.ring();
    let k = ring.k();
    let j = j as usize;
    if j >= k {
        return Err(Error::NoTemplateMatch(format!("M({j}) needs j < k = {k}")));
    }
    let y = f.nvars() - 1;
    let mut problems = Vec::new();
    let mut seen_y = false;
    let mut seen_y2 = false;
    for (m, c) in f.terms() {
        let xdeg: u32 = m[..y].iter().sum();
        let mono = describe(f, m);
        match (xdeg, m[y]) {
            (0, 0) => problems.push(format!("constant term {} should vanish", ring.format(c))),
            (0, 1) => {
                seen_y = true;
                if c.ord() != Some(k - j) {
                    problems.push(format!(
                        "y: expected ord exactly {}, found ord {}",
                        k - j,
                        ord_text(c)
                    ));
                }
            }
            (0, 2) => {
                seen_y2 = true;
                if c.residue() != Fq::ONE {
                    problems.push(format!("y^2: expected residue 1, found {}", ring.format(c)));
                }
            }
            (1, 0) => {
                if c.ord().is_some_and(|o| o < k - j) {
                    problems.push(format!(
                        "{mono}: expected ord >= {}, found ord {}",
                        k - j,
                        ord_text(c)
                    ));
                }
            }
            (_, 0) => {}
            _ => problems.push(format!("{mono}: unexpected y-term {}", ring.format(c))),
        }
    }
    if !seen_y {
        problems.push("y: missing".into());
    }
    if !seen_y2 {
        problems.push("y^2: missing".into());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::NoTemplateMatch(format!("M({j}): {}", problems.join("; "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dvr::ring_create;
    use crate::poly::Vars;

    fn parse(r: &Ring, n: usize, s: &str) -> MultiPoly {
        MultiPoly::parse(r, &Vars::model(n), s).unwrap()
    }

    #[test]
    fn make_cover_examples() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let s = parse(&r, 1, "(2); x1^2");
        let m = make_cover(&s, 3).unwrap();
        assert_eq!(m.equation, parse(&r, 1, "(2); x1^2; y^3"));
        assert_eq!(m.template, Template::Raw);
        let z = make_cover(&MultiPoly::zero(&r, &Vars::model(1)), 3).unwrap();
        assert_eq!(z.equation, parse(&r, 1, "y^3"));
        assert!(make_cover(&parse(&r, 1, "y"), 3).is_err());
    }

    #[test]
    fn smooth_cover_is_rejected_by_nondegeneracy_check() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let m = make_cover(&parse(&r, 1, "x1"), 3).unwrap();
        assert!(matches!(check_nondegenerate(&m), Err(Error::NotSingularAtOrigin(_))));
    }

    #[test]
    fn nondegeneracy_examples() {
        let r3 = ring_create(3, 4, 3, 26, 1).unwrap();
        let m = make_cover(&parse(&r3, 2, "(1); x1^2; x2^2"), 3).unwrap();
        assert!(check_nondegenerate(&m).unwrap());
        let m = make_cover(&parse(&r3, 3, "(1); x1 * x2; x3^2"), 3).unwrap();
        assert!(check_nondegenerate(&m).unwrap());
        let m = make_cover(&parse(&r3, 2, "(1); x1^2; (2) * x1 * x2; x2^2"), 3).unwrap();
        assert!(!check_nondegenerate(&m).unwrap());
        let r2 = ring_create(2, 2, 2, 18, 1).unwrap();
        let m = make_cover(&parse(&r2, 2, "(1); x1^2; x2^2"), 2).unwrap();
        assert!(!check_nondegenerate(&m).unwrap());
        let m = make_cover(&parse(&r2, 2, "(1); x1 * x2"), 2).unwrap();
        assert!(check_nondegenerate(&m).unwrap());
    }

    #[test]
    fn diagonalize_needs_square_roots() {
        let r3 = ring_create(3, 4, 3, 26, 1).unwrap();
        let m = make_cover(&parse(&r3, 1, "(1); (2) * x1^2"), 3).unwrap();
        assert!(matches!(diagonalize(&m), Err(Error::ExtendResidueField(_))));
        let r9 = ring_create(3, 4, 9, 26, 1).unwrap();
        let m = make_cover(&parse(&r9, 1, "(1); (2) * x1^2"), 3).unwrap();
        let (d, change, _) = diagonalize(&m).unwrap();
        assert_eq!(d.equation.central_fiber().homogeneous_part(2).format(), "x1^2");
        assert!(change.verify(&m.equation, &d.equation).unwrap());
    }

    #[test]
    fn diagonalize_hyperbolic_plane_mod_5() {
        let r = ring_create(5, 8, 5, 42, 1).unwrap();
        let m = make_cover(&parse(&r, 2, "(1); x1 * x2"), 5).unwrap();
        let (d, change, p) = diagonalize(&m).unwrap();
        let cf = d.equation.central_fiber();
        assert_eq!(cf.homogeneous_part(2).format(), "x2^2 + x1^2");
        assert!(change.verify(&m.equation, &d.equation).unwrap());
        // brute-force congruence: P^T A P = I with A = [[0,3],[3,0]] over F_5
        let f = r.field();
        let a = [[Fq(0), Fq(3)], [Fq(3), Fq(0)]];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = Fq::ZERO;
                for (k, row) in a.iter().enumerate() {
                    for (l, &akl) in row.iter().enumerate() {
                        s = f.add(s, f.mul(p[k][i], f.mul(akl, p[l][j])));
                    }
                }
                assert_eq!(s, if i == j { Fq::ONE } else { Fq::ZERO });
            }
        }
    }

    #[test]
    fn diagonal_input_gets_identity() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let m = make_cover(&parse(&r, 2, "(1); x1^2; x2^2; x1^3"), 3).unwrap();
        let (d, _, p) = diagonalize(&m).unwrap();
        assert_eq!(p, vec![vec![Fq(1), Fq(0)], vec![Fq(0), Fq(1)]]);
        assert_eq!(d.equation, m.equation);
    }

    #[test]
    fn kill_linear_single_round() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let m = LocalModel::new(parse(&r, 1, "(1); x1^2; (pi^4) * x1; y^3"), Template::Diagonalized);
        let out = kill_linear(&m, usize::MAX).unwrap();
        assert_eq!(out.ord_history, vec![Some(4), None]);
        // constant shifts by -p^2/4
        let quarter = r.inv(&r.from_int(4)).unwrap();
        let expected = r.sub(&r.one(), &r.mul(&r.from_int(9), &quarter));
        assert!(r.eq_at(&out.model.equation.coefficient(&[0, 0]), &expected, r.precision()));
        assert!(out.change.verify(&m.equation, &out.model.equation).unwrap());
    }

    #[test]
    fn kill_linear_with_cubic_tail_is_monotone() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let m = LocalModel::new(
            parse(&r, 1, "(1); x1^2; (pi^4) * x1; x1^3; y^3"),
            Template::Diagonalized,
        );
        let out = kill_linear(&m, r.precision() - 2).unwrap();
        let ords: Vec<usize> = out.ord_history.iter().flatten().copied().collect();
        assert!(ords.windows(2).all(|w| w[0] < w[1]), "{ords:?}");
        assert!(out.ord_history.last().unwrap().is_none_or(|o| o >= r.precision() - 2));
        assert!(out.change.verify(&m.equation, &out.model.equation).unwrap());
    }

    #[test]
    fn kill_linear_noop() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let m = LocalModel::new(parse(&r, 1, "(1); x1^2; y^3"), Template::Diagonalized);
        let out = kill_linear(&m, usize::MAX).unwrap();
        assert!(out.epsilon.iter().all(|e| e.is_zero()));
        assert_eq!(out.model.equation, m.equation);
    }

    #[test]
    fn shift_root_binomial_p3() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let d = r.parse("1 + pi").unwrap();
        let u = r.neg(&r.pow(&d, 3));
        let mut eq = parse(&r, 2, "x1^2; x2^2; y^3");
        eq.add_term(vec![0, 0, 0], u);
        let m = LocalModel::new(eq, Template::NormalForm);
        let (s, change) = shift_root(&m, &d).unwrap();
        // (y + d)^3 - d^3 = y^3 + 3 d y^2 + 3 d^2 y
        let three = r.from_int(3);
        assert!(r.eq_at(&s.equation.coefficient(&[0, 0, 2]), &r.mul(&three, &d), 26));
        assert!(r.eq_at(
            &s.equation.coefficient(&[0, 0, 1]),
            &r.mul(&three, &r.mul(&d, &d)),
            26
        ));
        assert_eq!(s.template, Template::F(0));
        assert!(change.verify(&m.equation, &s.equation).unwrap());
        let t = match_template(&s.equation, Family::F, 0).unwrap();
        assert!(r.eq_at(&t.unit, &r.mul(&d, &d), 20));
    }

    #[test]
    fn shift_root_p5_y_coefficient() {
        let r = ring_create(5, 8, 5, 42, 1).unwrap();
        let d = r.from_int(2);
        let mut eq = parse(&r, 1, "x1^2; y^5");
        eq.add_term(vec![0, 0], r.neg(&r.pow(&d, 5)));
        let (s, _) = shift_root(&LocalModel::new(eq, Template::NormalForm), &d).unwrap();
        let expected = r.mul(&r.from_int(5), &r.pow(&d, 4));
        assert!(r.eq_at(&s.equation.coefficient(&[0, 1]), &expected, 42));
        for j in 1..5 {
            assert!(s.equation.coefficient(&[0, j]).ord().is_none_or(|o| o >= 8));
        }
    }

    #[test]
    fn shift_root_rejects_bad_delta() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let m = LocalModel::new(parse(&r, 1, "(1); x1^2; y^3"), Template::NormalForm);
        assert!(matches!(shift_root(&m, &r.zero()), Err(Error::Precondition(_))));
        assert!(matches!(shift_root(&m, &r.one()), Err(Error::NotPthRoot(_))));
    }

    #[test]
    fn template_mismatch_reports_offenders() {
        let r = ring_create(3, 4, 3, 26, 1).unwrap();
        let f = parse(&r, 1, "x1; x1^2; y^3; (pi^4) * y");
        let err = match_template(&f, Family::F, 0).unwrap_err().to_string();
        assert!(err.contains("x1: linear"), "{err}");
        assert!(identify_template(&parse(&r, 1, "x1^2; y^3; (pi^4) * y")).is_some());
    }
}
