//! Weighted blowup charts of a local model.
//!
//! The minus blowup gives `x_i` weight `(p-1)/2` and the plus blowup weight
//! `(p+1)/2`; `y` and `pi` have weight 1. Three chart families are exposed:
//! the `omega` chart (`pi` stays the uniformizer), the `y` chart (`pi = y *
//! gamma`) and the cyclic cover of the `x_i` chart (`pi = gamma * zeta`).
//! Characteristic 2 uses an ordinary blowup instead.

use serde::Serialize;

use crate::cover::{LocalModel, Template};
use crate::dvr::Ring;
use crate::error::{Error, Result};
use crate::field::Fq;
use crate::linalg;
use crate::poly::{MultiPoly, ResiduePoly, VarSet, Vars};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    /// Weight of the `x`-variables.
    pub fn weight(self, p: u32) -> u32 {
        match self {
            Sign::Minus => (p - 1) / 2,
            Sign::Plus => p.div_ceil(2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sign::Minus => "minus",
            Sign::Plus => "plus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChartKind {
    Omega,
    Y,
    /// Cover of the chart where `x_i` (0-based) generates the exceptional ideal.
    X(usize),
    /// The `pi`-chart of an ordinary blowup.
    Pi,
}

impl ChartKind {
    pub fn name(self) -> String {
        match self {
            ChartKind::Omega => "omega".into(),
            ChartKind::Y => "y".into(),
            ChartKind::X(i) => format!("x{}", i + 1),
            ChartKind::Pi => "pi".into(),
        }
    }
}

/// What the pullback is divided by: a power of `pi` or of a chart variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Divisor {
    Pi,
    Var(usize),
}

#[derive(Clone, Debug)]
pub struct ChartMap {
    pub sign: Option<Sign>,
    pub chart: ChartKind,
    pub source: VarSet,
    pub target: VarSet,
    pub images: Vec<MultiPoly>,
    pub divide_by: (Divisor, u32),
}

impl ChartMap {
    pub fn divisor_name(&self) -> String {
        match self.divide_by.0 {
            Divisor::Pi => "pi".into(),
            Divisor::Var(v) => self.target.name(v).into(),
        }
    }

    pub fn relation_text(&self) -> Option<String> {
        self.target
            .relation()
            .map(|(u, v)| format!("pi = {}*{}", self.target.name(u), self.target.name(v)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Quotient {
    pub order: u32,
    pub locus: String,
}

#[derive(Clone, Debug)]
pub struct ChartResult {
    pub map: ChartMap,
    pub pullback: MultiPoly,
    pub strict_transform: MultiPoly,
    /// Central fiber of the exceptional divisor in this chart.
    pub exceptional_cf: ResiduePoly,
    /// The chart variable cutting out the exceptional divisor (`None` for `pi`).
    pub exceptional_var: Option<usize>,
    /// Where the strict transform of the original central fiber lies.
    pub strict_central_fiber: Option<String>,
    pub quotient: Option<Quotient>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubstitutionRecord {
    pub var: String,
    pub image: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DivideByRecord {
    pub var: String,
    pub exponent: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartRecord {
    pub sign: Option<Sign>,
    pub chart: String,
    pub variables: Vec<String>,
    pub relation: Option<String>,
    pub substitution: Vec<SubstitutionRecord>,
    pub divide_by: DivideByRecord,
    pub strict_transform: String,
    pub exceptional_cf: String,
    pub strict_central_fiber: Option<String>,
    pub quotient: Option<Quotient>,
    pub pullback_identity: bool,
}

impl ChartResult {
    /// `pullback = strict_transform * divisor^e` to the strict transform's
    /// precision.
    pub fn check_pullback(&self) -> bool {
        let ring = self.strict_transform.ring();
        let (d, e) = self.map.divide_by;
        let rebuilt = match d {
            Divisor::Pi => self.strict_transform.scale(&ring.pi_pow(e as usize)),
            Divisor::Var(v) => self
                .strict_transform
                .mul(&MultiPoly::var(ring, &self.map.target, v).pow(e)),
        };
        self.pullback
            .eq_at(&rebuilt, self.strict_transform.precision())
    }

    /// The strict transform with the chart variables renamed to `x1..xn, y`
    /// (meaningful for the `omega` chart, whose variables correspond).
    pub fn strict_as_model(&self) -> MultiPoly {
        let n = self.strict_transform.nvars() - 1;
        self.strict_transform.rename(&Vars::model(n))
    }

    pub fn record(&self) -> ChartRecord {
        ChartRecord {
            sign: self.map.sign,
            chart: self.map.chart.name(),
            variables: self.map.target.names().to_vec(),
            relation: self.map.relation_text(),
            substitution: self
                .map
                .source
                .names()
                .iter()
                .zip(&self.map.images)
                .map(|(v, img)| SubstitutionRecord {
                    var: v.clone(),
                    image: img.format(),
                })
                .collect(),
            divide_by: DivideByRecord {
                var: self.map.divisor_name(),
                exponent: self.map.divide_by.1,
            },
            strict_transform: self.strict_transform.format(),
            exceptional_cf: self.exceptional_cf.format(),
            strict_central_fiber: self.strict_central_fiber.clone(),
            quotient: self.quotient.clone(),
            pullback_identity: self.check_pullback(),
        }
    }
}

fn require_sign_template(model: &LocalModel, sign: Sign) -> Result<()> {
    let ok = matches!(
        (sign, model.template),
        (Sign::Minus, Template::F(_)) | (Sign::Plus, Template::G(_))
    );
    if !ok {
        return Err(Error::Precondition(format!(
            "{} blowup applies to {} models, got {}",
            sign.name(),
            if sign == Sign::Minus { "F" } else { "G" },
            model.template
        )));
    }
    if model.ring().p() == 2 {
        return Err(Error::Precondition("weighted blowups need p odd".into()));
    }
    Ok(())
}

fn term(ring: &Ring, vars: &VarSet, pi_exp: usize, exps: Vec<u32>) -> MultiPoly {
    MultiPoly::monomial(ring, vars, ring.pi_pow(pi_exp), exps)
}

fn alpha_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("alpha{i}")).collect()
}

fn finish(
    model: &LocalModel,
    map: ChartMap,
    exceptional_var: Option<usize>,
    strict_central_fiber: Option<String>,
    quotient: Option<Quotient>,
) -> Result<ChartResult> {
    let pullback = model.equation.substitute(&map.images)?;
    let strict = match map.divide_by {
        (Divisor::Pi, e) => pullback.div_pow_pi(e as usize)?,
        (Divisor::Var(v), e) => pullback.div_var_pow(v, e)?,
    };
    let exceptional_cf = match exceptional_var {
        None => strict.central_fiber(),
        Some(v) => strict.restrict_zero(v).central_fiber(),
    };
    Ok(ChartResult {
        map,
        pullback,
        strict_transform: strict,
        exceptional_cf,
        exceptional_var,
        strict_central_fiber,
        quotient,
    })
}

/// `x_i -> alpha_i pi^w`, `y -> beta pi`, divided by `pi^(2w)`.
pub fn chart_omega(model: &LocalModel, sign: Sign) -> Result<ChartResult> {
    require_sign_template(model, sign)?;
    let ring = model.ring();
    let n = model.n();
    let w = sign.weight(ring.p());
    let mut names = alpha_names(n);
    names.push("beta".into());
    let target = Vars::new(names);
    let images = (0..=n)
        .map(|i| {
            let mut e = vec![0; n + 1];
            e[i] = 1;
            term(ring, &target, if i < n { w as usize } else { 1 }, e)
        })
        .collect();
    let map = ChartMap {
        sign: Some(sign),
        chart: ChartKind::Omega,
        source: model.vars().clone(),
        target,
        images,
        divide_by: (Divisor::Pi, 2 * w),
    };
    finish(model, map, None, None, None)
}

/// `x_i -> alpha_i y^w`, `y -> y`, with `pi = y * gamma`, divided by `y^(2w)`.
pub fn chart_y(model: &LocalModel, sign: Sign) -> Result<ChartResult> {
    require_sign_template(model, sign)?;
    let ring = model.ring();
    let n = model.n();
    let w = sign.weight(ring.p());
    let mut names = alpha_names(n);
    names.push("y".into());
    names.push("gamma".into());
    let target = Vars::with_relation(names, n, n + 1);
    let images = (0..=n)
        .map(|i| {
            let mut e = vec![0; n + 2];
            if i < n {
                e[i] = 1;
                e[n] = w;
            } else {
                e[n] = 1;
            }
            term(ring, &target, 0, e)
        })
        .collect();
    let map = ChartMap {
        sign: Some(sign),
        chart: ChartKind::Y,
        source: model.vars().clone(),
        target,
        images,
        divide_by: (Divisor::Var(n), 2 * w),
    };
    finish(model, map, Some(n), Some("gamma=0".into()), None)
}

/// Cover of the `x_i` chart: `x_i -> zeta^w`, `x_j -> alpha_j zeta^w`,
/// `y -> beta zeta`, with `pi = gamma * zeta`, divided by `zeta^(2w)`.
pub fn chart_x(model: &LocalModel, sign: Sign, i: usize) -> Result<ChartResult> {
    require_sign_template(model, sign)?;
    let ring = model.ring();
    let n = model.n();
    if i >= n {
        return Err(Error::Precondition(format!("no variable x{}", i + 1)));
    }
    let w = sign.weight(ring.p());
    let mut names: Vec<String> = (0..n)
        .filter(|&j| j != i)
        .map(|j| format!("alpha{}", j + 1))
        .collect();
    names.extend(["beta".into(), "gamma".into(), "zeta".into()]);
    let (beta, gamma, zeta) = (n - 1, n, n + 1);
    let target = Vars::with_relation(names, gamma, zeta);
    let images = (0..=n)
        .map(|j| {
            let mut e = vec![0; n + 2];
            if j == n {
                e[beta] = 1;
                e[zeta] = 1;
            } else {
                e[zeta] = w;
                if j != i {
                    e[if j < i { j } else { j - 1 }] = 1;
                }
            }
            term(ring, &target, 0, e)
        })
        .collect();
    let map = ChartMap {
        sign: Some(sign),
        chart: ChartKind::X(i),
        source: model.vars().clone(),
        target,
        images,
        divide_by: (Divisor::Var(zeta), 2 * w),
    };
    let quotient = (w > 1).then(|| Quotient {
        order: w,
        locus: "beta=gamma=zeta=0".into(),
    });
    finish(model, map, Some(zeta), Some("gamma=0".into()), quotient)
}

/// The three chart families of one weighted blowup; only `x1` among the
/// `x`-charts unless `all_x` is set.
pub fn all_charts(model: &LocalModel, sign: Sign, all_x: bool) -> Result<Vec<ChartResult>> {
    let mut out = vec![chart_omega(model, sign)?, chart_y(model, sign)?];
    let count = if all_x { model.n() } else { 1.min(model.n()) };
    for i in 0..count {
        out.push(chart_x(model, sign, i)?);
    }
    Ok(out)
}

/// Ordinary blowup of a characteristic-2 model `M(j)` at the origin.
#[derive(Clone, Debug)]
pub struct Char2Blowup {
    pub chart: ChartResult,
    /// Degree-2 initial form in `[pi : x1 : ... : xn : y]`.
    pub quadric: ResiduePoly,
    /// The quadric has a nondegenerate alternating form: nothing singular remains.
    pub terminal: bool,
    /// `M(j+1)` when not terminal.
    pub next: Option<LocalModel>,
}

/// Initial form of degree 2 of `f` in the variables `pi, x1..xn, y`.
pub fn initial_quadric(f: &MultiPoly) -> Result<ResiduePoly> {
    let ring = f.ring();
    let nv = f.nvars();
    let mut names = vec!["pi".to_string()];
    names.extend(f.vars().names().iter().cloned());
    let vars = Vars::new(names);
    let mut q = ResiduePoly::zero(ring.field(), &vars);
    for (m, c) in f.terms() {
        let Some(o) = c.ord() else { continue };
        let deg = o + m.iter().sum::<u32>() as usize;
        if deg < 2 {
            return Err(Error::Precondition(format!(
                "multiplicity below 2 at the origin (term of degree {deg})"
            )));
        }
        if deg == 2 {
            let mut e = vec![0u32; nv + 1];
            e[0] = o as u32;
            e[1..].copy_from_slice(m);
            q.add_term(e, c.digit(o));
        }
    }
    Ok(q)
}

pub fn ordinary_blowup_char2(model: &LocalModel) -> Result<Char2Blowup> {
    let ring = model.ring();
    if ring.p() != 2 {
        return Err(Error::Precondition("ordinary blowup branch is for p = 2".into()));
    }
    let Template::Char2(j) = model.template else {
        return Err(Error::Precondition(format!(
            "expected a characteristic-2 model, got {}",
            model.template
        )));
    };
    let n = model.n();
    let quadric = initial_quadric(&model.equation)?;
    let all: Vec<usize> = (0..=n + 1).collect();
    let h = quadric.hessian(&all);
    let terminal = linalg::rank(ring.field(), &h) == n + 2;

    let mut names = alpha_names(n);
    names.push("beta".into());
    let target = Vars::new(names);
    let images = (0..=n)
        .map(|i| {
            let mut e = vec![0; n + 1];
            e[i] = 1;
            term(ring, &target, 1, e)
        })
        .collect();
    let map = ChartMap {
        sign: None,
        chart: ChartKind::Pi,
        source: model.vars().clone(),
        target,
        images,
        divide_by: (Divisor::Pi, 2),
    };
    let chart = finish(model, map, None, None, None)?;
    let next = (!terminal).then(|| LocalModel {
        equation: chart.strict_as_model(),
        template: Template::Char2(j + 1),
        delta: model.delta.clone(),
    });
    Ok(Char2Blowup {
        chart,
        quadric,
        terminal,
        next,
    })
}

/// Singular points of a projective quadric over its field of definition,
/// by enumerating representatives with first nonzero coordinate 1.
pub fn projective_singular_points(q: &ResiduePoly) -> Vec<Vec<Fq>> {
    let field = q.field().clone();
    let nv = q.nvars();
    let qn = field.order() as usize;
    let grads = q.jacobian();
    let emb = crate::field::Embedding::identity(&field);
    let mut out = Vec::new();
    for lead in 0..nv {
        let free = nv - lead - 1;
        let total = qn.pow(free as u32);
        for idx in 0..total {
            let mut pt = vec![Fq::ZERO; nv];
            pt[lead] = Fq::ONE;
            let mut r = idx;
            for c in pt.iter_mut().skip(lead + 1) {
                *c = Fq((r % qn) as u32);
                r /= qn;
            }
            let on = q.eval(&field, &emb, &pt).is_zero();
            if on && grads.iter().all(|g| g.eval(&field, &emb, &pt).is_zero()) {
                out.push(pt);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{match_template, Family};
    use crate::dvr::ring_create;

    fn f0(p: u32, k: usize, n: usize) -> LocalModel {
        let r = ring_create(p, k, p as u64, 4 * k + 10, 1).unwrap();
        let v = Vars::model(n);
        let mut f = MultiPoly::var(&r, &v, n).pow(p);
        for i in 0..n {
            f = f.add(&MultiPoly::var(&r, &v, i).pow(2));
        }
        // delta = 1: y-coefficient p, y^j coefficients binomial(p, j)
        for j in 1..p {
            let binom = (1..=j as u64).fold(1u64, |acc, t| acc * (p as u64 - t + 1) / t);
            let mut e = vec![0; n + 1];
            e[n] = j;
            f.add_term(e, r.from_int(binom as i64));
        }
        LocalModel::new(f, Template::F(0))
    }

    #[test]
    fn omega_minus_gives_g0() {
        let m = f0(3, 4, 2);
        let c = chart_omega(&m, Sign::Minus).unwrap();
        assert!(c.check_pullback());
        let strict = c.strict_as_model();
        let t = match_template(&strict, Family::G, 0).unwrap();
        assert_eq!(t.s, 0);
        // leading pi*beta^3
        assert_eq!(m.ring().format(&strict.coefficient(&[0, 0, 3])), "pi");
        assert_eq!(c.exceptional_cf.format(), "alpha2^2 + alpha1^2");
    }

    #[test]
    fn y_and_x_chart_minus_p3() {
        let m = f0(3, 4, 2);
        let y = chart_y(&m, Sign::Minus).unwrap();
        assert!(y.check_pullback());
        assert_eq!(y.exceptional_cf.format(), "alpha2^2 + alpha1^2");
        let x = chart_x(&m, Sign::Minus, 0).unwrap();
        assert!(x.check_pullback());
        assert!(x.quotient.is_none());
        assert_eq!(x.exceptional_cf.format(), "1 + alpha2^2");
    }

    #[test]
    fn x_chart_minus_p5_records_quotient() {
        let m = f0(5, 8, 2);
        let x = chart_x(&m, Sign::Minus, 0).unwrap();
        assert!(x.check_pullback());
        assert_eq!(
            x.quotient,
            Some(Quotient {
                order: 2,
                locus: "beta=gamma=zeta=0".into()
            })
        );
        assert_eq!(x.exceptional_cf.format(), "1 + alpha2^2");
        let all = all_charts(&m, Sign::Minus, true).unwrap();
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|c| c.check_pullback()));
    }

    #[test]
    fn terminal_plus_on_g0() {
        let m = f0(3, 4, 2);
        let g = LocalModel::new(
            chart_omega(&m, Sign::Minus).unwrap().strict_as_model(),
            Template::G(0),
        );
        let w = chart_omega(&g, Sign::Plus).unwrap();
        assert!(w.check_pullback());
        // beta^3 + tau' beta + alpha1^2 + alpha2^2 with tau' = tau * delta^2 = 1
        assert_eq!(w.exceptional_cf.format(), "beta + beta^3 + alpha2^2 + alpha1^2");
        let y = chart_y(&g, Sign::Plus).unwrap();
        assert_eq!(y.exceptional_cf.format(), "gamma + gamma^3 + alpha2^2 + alpha1^2");
        let x = chart_x(&g, Sign::Plus, 1).unwrap();
        assert_eq!(x.quotient.as_ref().unwrap().order, 2);
    }

    #[test]
    fn sign_template_guard() {
        let m = f0(3, 4, 1);
        assert!(matches!(chart_omega(&m, Sign::Plus), Err(Error::Precondition(_))));
    }

    fn m0_char2(k: usize) -> LocalModel {
        let r = ring_create(2, k, 2, 4 * k + 10, 1).unwrap();
        let v = Vars::model(2);
        let f = MultiPoly::parse(&r, &v, &format!("y^2; (pi^{k}) * y; x1 * x2; x1^3")).unwrap();
        LocalModel::new(f, Template::Char2(0))
    }

    #[test]
    fn char2_first_blowup_quadric() {
        let m = m0_char2(4);
        let b = ordinary_blowup_char2(&m).unwrap();
        assert!(!b.terminal);
        assert_eq!(b.quadric.format(), "y^2 + x1 * x2");
        assert_eq!(
            projective_singular_points(&b.quadric),
            vec![vec![Fq(1), Fq(0), Fq(0), Fq(0)]]
        );
        assert!(b.chart.check_pullback());
        assert_eq!(b.next.unwrap().template, Template::Char2(1));
    }

    #[test]
    fn char2_exactly_k_blowups() {
        for k in [2usize, 4] {
            let mut m = m0_char2(k);
            let mut count = 0;
            loop {
                let b = ordinary_blowup_char2(&m).unwrap();
                count += 1;
                if b.terminal {
                    assert!(projective_singular_points(&b.quadric).is_empty());
                    break;
                }
                m = b.next.unwrap();
                crate::cover::match_char2(&m.equation, count).unwrap();
            }
            assert_eq!(count as usize, k);
        }
    }
}
