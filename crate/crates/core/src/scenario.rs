//! Seeded generation of local models: template-`F(0)` models (odd `p`),
//! `M(0)` models (`p = 2`) and raw covers for the normal-form pipeline.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cover::{make_cover, to_normal_form, LocalModel, NormalizationTrace, Template};
use crate::dvr::{default_precision, ring_create, DvrElement, Ring};
use crate::error::{Error, Result};
use crate::field::Fq;
use crate::linalg::{self, FqMatrix};
use crate::poly::{MultiPoly, VarSet, Vars};

/// Name and version of the generator behind every seeded scenario.
pub const PRNG: &str = "chacha8-v1";

pub const RANDOM: &str = "random";

fn random_text() -> String {
    RANDOM.into()
}

/// A resolution input. Polynomial fields are either explicit text or
/// `"random"`; [`Scenario::instantiate`] replaces every `"random"` by a value
/// drawn from the seeded generator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub p: u32,
    pub k: usize,
    pub q: u64,
    #[serde(rename = "N")]
    pub precision: usize,
    pub n: usize,
    /// Residue-field code of `tau` in `pi^k = p / tau`; drawn when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<u32>,
    pub seed: u64,
    #[serde(default = "random_text")]
    pub delta: String,
    /// Quadratic x-part: `p * f2` for odd `p`, the form `q` for `p = 2`.
    #[serde(default = "random_text")]
    pub f2_terms: String,
    #[serde(default = "random_text")]
    pub f3_terms: String,
    /// `g(y)` in the `p * y^2 * g(y)` block (odd `p`).
    #[serde(default = "random_text")]
    pub g_terms: String,
    /// Linear x-part `f1` of the characteristic-2 model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_terms: Option<String>,
}

impl Scenario {
    /// Fully random scenario with `q = p` and the default precision.
    pub fn random(p: u32, k: usize, n: usize, seed: u64) -> Self {
        Scenario {
            p,
            k,
            q: p as u64,
            precision: default_precision(k),
            n,
            tau: None,
            seed,
            delta: random_text(),
            f2_terms: random_text(),
            f3_terms: random_text(),
            g_terms: random_text(),
            f1_terms: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scenario serializes")
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Builds the ring and the starting model, returning the scenario with
    /// every random field made explicit.
    pub fn instantiate(&self) -> Result<(Scenario, LocalModel)> {
        let mut rng = self.rng();
        if self.n == 0 {
            return Err(Error::Precondition("n must be at least 1".into()));
        }
        let q_field = crate::field::GaloisField::with_order(self.q)?;
        let tau = match self.tau {
            Some(t) => t,
            None => rng.gen_range(1..q_field.order()),
        };
        let ring = ring_create(self.p, self.k, self.q, self.precision, tau)?;
        let vars = Vars::model(self.n);
        let mut out = self.clone();
        out.tau = Some(tau);

        let delta = if self.delta == RANDOM {
            random_unit(&ring, &mut rng)
        } else {
            ring.parse(&self.delta)?
        };
        if !delta.is_unit() {
            return Err(Error::Precondition(format!("delta = {} is not a unit", self.delta)));
        }
        out.delta = ring.format(&delta);

        let mut field_or = |text: &str, gen: &mut dyn FnMut(&mut ChaCha8Rng) -> MultiPoly| {
            if text == RANDOM {
                Ok(gen(&mut rng))
            } else {
                MultiPoly::parse(&ring, &vars, text)
            }
        };
        let model = if self.p == 2 {
            if !self.n.is_multiple_of(2) {
                return Err(Error::Precondition(
                    "a nondegenerate alternating form needs n even".into(),
                ));
            }
            let q = field_or(&self.f2_terms, &mut |r| random_alternating_quadric(&ring, &vars, r))?;
            let f1_text = self.f1_terms.clone().unwrap_or_else(random_text);
            let f1 = field_or(&f1_text, &mut |r| random_linear(&ring, &vars, r))?;
            let f3 = field_or(&self.f3_terms, &mut |r| random_cubic_tail(&ring, &vars, r, false))?;
            out.f2_terms = q.format();
            out.f1_terms = Some(f1.format());
            out.f3_terms = f3.format();
            out.g_terms = "0".into();
            check_shape(&q, &vars, |xd, yd| xd == 2 && yd == 0, "f2_terms", "quadratic in x")?;
            check_shape(&f1, &vars, |xd, yd| xd == 1 && yd == 0, "f1_terms", "linear in x")?;
            check_shape(&f3, &vars, |xd, yd| xd >= 3 && yd == 0, "f3_terms", "of x-degree at least 3 without y")?;
            char2_model(&ring, &vars, &delta, &f1, &q, &f3)
        } else {
            let f2 = field_or(&self.f2_terms, &mut |r| random_quadratic(&ring, &vars, r))?;
            let f3 = field_or(&self.f3_terms, &mut |r| random_cubic_tail(&ring, &vars, r, true))?;
            let yv = Vars::new(["y"]);
            let g = if self.g_terms == RANDOM {
                random_g(&ring, &yv, self.p, &mut rng)
            } else {
                MultiPoly::parse(&ring, &yv, &self.g_terms)?
            };
            out.f2_terms = f2.format();
            out.f3_terms = f3.format();
            out.g_terms = g.format();
            check_shape(&f2, &vars, |xd, yd| xd == 2 && yd == 0, "f2_terms", "quadratic in x")?;
            check_shape(&f3, &vars, |xd, _| xd >= 3, "f3_terms", "of x-degree at least 3")?;
            if g.terms().any(|(m, _)| m[0] + 2 > self.p - 1) {
                return Err(Error::Precondition(format!(
                    "g_terms must have degree at most {}",
                    self.p as i64 - 3
                )));
            }
            f0_model(&ring, &vars, &delta, &f2, &f3, &g)?
        };
        Ok((out, model))
    }
}

fn check_shape(
    f: &MultiPoly,
    vars: &VarSet,
    ok: impl Fn(u32, u32) -> bool,
    field: &str,
    what: &str,
) -> Result<()> {
    let y = vars.len() - 1;
    for (m, _) in f.terms() {
        let xd: u32 = m[..y].iter().sum();
        if !ok(xd, m[y]) {
            return Err(Error::Precondition(format!("{field} must be {what}")));
        }
    }
    Ok(())
}

/// `y^p + p y^2 g(y) + p delta^(p-1) y + sum x_i^2 + p f2 + f3`.
pub fn f0_model(
    ring: &Ring,
    vars: &VarSet,
    delta: &DvrElement,
    f2: &MultiPoly,
    f3: &MultiPoly,
    g: &MultiPoly,
) -> Result<LocalModel> {
    let n = vars.len() - 1;
    let p = ring.p();
    let pe = ring.p_element();
    let mut f = MultiPoly::var(ring, vars, n).pow(p);
    let mut e = vec![0; n + 1];
    e[n] = 1;
    f.add_term(e, ring.mul(&pe, &ring.pow(delta, p as u64 - 1)));
    for (m, c) in g.terms() {
        let mut e = vec![0; n + 1];
        e[n] = m[0] + 2;
        f.add_term(e, ring.mul(&pe, c));
    }
    for i in 0..n {
        f = f.add(&MultiPoly::var(ring, vars, i).pow(2));
    }
    f = f.add(&f2.scale(&pe)).add(f3);
    Ok(LocalModel {
        equation: f,
        template: Template::F(0),
        delta: Some(delta.clone()),
    })
}

/// `y^2 + 2 (delta y + f1) + q + f3`.
pub fn char2_model(
    ring: &Ring,
    vars: &VarSet,
    delta: &DvrElement,
    f1: &MultiPoly,
    q: &MultiPoly,
    f3: &MultiPoly,
) -> LocalModel {
    let n = vars.len() - 1;
    let two = ring.p_element();
    let y = MultiPoly::var(ring, vars, n);
    let lin = y.scale(delta).add(f1).scale(&two);
    let f = y.pow(2).add(&lin).add(q).add(f3);
    LocalModel {
        equation: f,
        template: Template::Char2(0),
        delta: Some(delta.clone()),
    }
}

pub fn random_residue(ring: &Ring, rng: &mut impl Rng) -> Fq {
    Fq(rng.gen_range(0..ring.field().order()))
}

pub fn random_nonzero_residue(ring: &Ring, rng: &mut impl Rng) -> Fq {
    Fq(rng.gen_range(1..ring.field().order()))
}

/// Uniform element of `R` at full precision.
pub fn random_element(ring: &Ring, rng: &mut impl Rng) -> DvrElement {
    let digits: Vec<Fq> = (0..ring.precision()).map(|_| random_residue(ring, rng)).collect();
    ring.from_digits(&digits)
}

pub fn random_unit(ring: &Ring, rng: &mut impl Rng) -> DvrElement {
    let mut digits: Vec<Fq> = (0..ring.precision()).map(|_| random_residue(ring, rng)).collect();
    digits[0] = random_nonzero_residue(ring, rng);
    ring.from_digits(&digits)
}

/// Uniform element of the unramified subring `Z_q`.
pub fn random_unramified(ring: &Ring, rng: &mut impl Rng) -> DvrElement {
    let k = ring.k();
    let digits: Vec<Fq> = (0..ring.precision())
        .map(|i| if i % k == 0 { random_residue(ring, rng) } else { Fq::ZERO })
        .collect();
    ring.from_digits(&digits)
}

fn x_monomial(n: usize, exps: &[(usize, u32)]) -> Vec<u32> {
    let mut e = vec![0; n + 1];
    for &(i, d) in exps {
        e[i] += d;
    }
    e
}

fn random_quadratic(ring: &Ring, vars: &VarSet, rng: &mut impl Rng) -> MultiPoly {
    let n = vars.len() - 1;
    let mut f = MultiPoly::zero(ring, vars);
    for i in 0..n {
        for j in i..n {
            f.add_term(x_monomial(n, &[(i, 1), (j, 1)]), random_element(ring, rng));
        }
    }
    f
}

fn random_linear(ring: &Ring, vars: &VarSet, rng: &mut impl Rng) -> MultiPoly {
    let n = vars.len() - 1;
    let mut f = MultiPoly::zero(ring, vars);
    for i in 0..n {
        f.add_term(x_monomial(n, &[(i, 1)]), random_element(ring, rng));
    }
    f
}

/// A few terms of x-degree 3 or 4, optionally times `y`.
fn random_cubic_tail(ring: &Ring, vars: &VarSet, rng: &mut impl Rng, with_y: bool) -> MultiPoly {
    let n = vars.len() - 1;
    let mut f = MultiPoly::zero(ring, vars);
    let count = rng.gen_range(1..=3);
    for _ in 0..count {
        let deg = rng.gen_range(3..=4);
        let mut e = vec![0; n + 1];
        for _ in 0..deg {
            e[rng.gen_range(0..n)] += 1;
        }
        if with_y {
            e[n] = rng.gen_range(0..=1);
        }
        f.add_term(e, random_element(ring, rng));
    }
    f
}

fn random_g(ring: &Ring, yv: &VarSet, p: u32, rng: &mut impl Rng) -> MultiPoly {
    let mut g = MultiPoly::zero(ring, yv);
    for d in 0..=(p - 3) {
        g.add_term(vec![d], random_element(ring, rng));
    }
    g
}

fn rank_alternating(ring: &Ring, coeffs: &[Vec<Fq>]) -> usize {
    let n = coeffs.len();
    let m: FqMatrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Less => coeffs[i][j],
                    std::cmp::Ordering::Greater => coeffs[j][i],
                    std::cmp::Ordering::Equal => Fq::ZERO,
                })
                .collect()
        })
        .collect();
    linalg::rank(ring.field(), &m)
}

/// Quadratic form whose residue has a nondegenerate alternating polar form.
fn random_alternating_quadric(ring: &Ring, vars: &VarSet, rng: &mut impl Rng) -> MultiPoly {
    let n = vars.len() - 1;
    loop {
        let cross: Vec<Vec<Fq>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if j > i { random_residue(ring, rng) } else { Fq::ZERO })
                    .collect()
            })
            .collect();
        if rank_alternating(ring, &cross) != n {
            continue;
        }
        let mut f = MultiPoly::zero(ring, vars);
        for i in 0..n {
            for j in i..n {
                let residue = if i == j { random_residue(ring, rng) } else { cross[i][j] };
                let tail = ring.shift(&random_element(ring, rng), 1);
                f.add_term(
                    x_monomial(n, &[(i, 1), (j, 1)]),
                    ring.add(&ring.lift(residue), &tail),
                );
            }
        }
        return f;
    }
}

/// A raw cover `y^p + u + Q(x) + p f1 + p f2 + f3` with `Q` a random
/// nondegenerate form of square discriminant over `Z_q`, and the constant
/// `u` tuned so that the normal form has root `delta`.
#[derive(Clone, Debug)]
pub struct RawInstance {
    pub raw: LocalModel,
    pub delta: DvrElement,
}

pub fn random_raw(ring: &Ring, n: usize, rng: &mut impl Rng) -> Result<RawInstance> {
    if ring.p() == 2 {
        return Err(Error::Precondition("raw generation needs p odd".into()));
    }
    let vars = Vars::model(n);
    let field = ring.field().clone();
    let pe = ring.p_element();
    let m: FqMatrix = loop {
        let m: FqMatrix = (0..n)
            .map(|_| (0..n).map(|_| random_residue(ring, rng)).collect())
            .collect();
        if !linalg::determinant(&field, &m).is_zero() {
            break m;
        }
    };
    // Q = |M x|^2 has discriminant det(M)^2.
    let mut quad = MultiPoly::zero(ring, &vars);
    for row in &m {
        let mut l = MultiPoly::zero(ring, &vars);
        for (j, &c) in row.iter().enumerate() {
            let digits: Vec<Fq> = std::iter::once(c).collect();
            let mut lifted = ring.from_digits(&digits);
            let extra = random_unramified(ring, rng);
            lifted = ring.add(&lifted, &ring.shift(&extra, ring.k()));
            l.add_term(x_monomial(n, &[(j, 1)]), lifted);
        }
        quad = quad.add(&l.pow(2));
    }
    let lin = random_linear(ring, &vars, rng).scale(&pe);
    let f2 = random_quadratic(ring, &vars, rng).scale(&pe);
    let f3 = random_cubic_tail(ring, &vars, rng, false);
    let section = quad.add(&lin.scale(&pe)).add(&f2).add(&f3);
    let delta = random_unit(ring, rng);

    let base = make_cover(&section, ring.p())?;
    let c_final = constant_after_normalization(&base)?;
    let target = ring.neg(&ring.pow(&delta, ring.p() as u64));
    let u = ring.sub(&target, &c_final);
    let mut equation = base.equation.clone();
    equation.add_term(vec![0; n + 1], u);
    Ok(RawInstance {
        raw: LocalModel::new(equation, Template::Raw),
        delta,
    })
}

fn constant_after_normalization(raw: &LocalModel) -> Result<DvrElement> {
    let (d, _, _) = crate::cover::diagonalize(raw)?;
    let lin = crate::cover::kill_linear(&d, usize::MAX)?;
    let n = raw.n();
    Ok(lin.model.equation.coefficient(&vec![0; n + 1]))
}

pub fn normalize_raw(inst: &RawInstance) -> Result<NormalizationTrace> {
    to_normal_form(&inst.raw, &inst.delta)
}
