//! Truncated arithmetic in a totally ramified extension `R` of the
//! unramified ring `Z_q = W(F_q)`.
//!
//! `R = Z_q[pi] / (pi^k - p / tau)`, so that `p = tau * pi^k` holds exactly
//! for a designated residue-field unit `tau`. An element is stored as its
//! `pi`-adic digit expansion `sum c_i pi^i`, where each digit is a residue
//! field element standing for its canonical lift (the polynomial in `t`
//! with coordinates in `0..p`). Addition and multiplication are done on the
//! lifts in `Z[t]/(f)` and renormalised: a coordinate overflow by `p` is a
//! carry of `tau` into position `i + k`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{is_prime, prime_power, Fq, GaloisField};

pub type Ring = Arc<RingDescriptor>;

/// Parameters of the ring `R`, plus the tables needed for carries.
#[derive(Debug)]
pub struct RingDescriptor {
    p: u32,
    k: usize,
    precision: usize,
    tau: Fq,
    field: Arc<GaloisField>,
    modulus: Vec<i64>,
    tau_lift: Vec<i64>,
}

/// Element of `R / pi^prec`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DvrElement {
    digits: Vec<Fq>,
}

impl DvrElement {
    /// Absolute `pi`-adic precision: the element is known modulo `pi^prec`.
    pub fn precision(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[Fq] {
        &self.digits
    }

    pub fn digit(&self, i: usize) -> Fq {
        self.digits.get(i).copied().unwrap_or(Fq::ZERO)
    }

    /// `ord_pi`, with `None` standing for infinity (zero to known precision).
    pub fn ord(&self) -> Option<usize> {
        self.digits.iter().position(|d| !d.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.ord().is_none()
    }

    pub fn is_unit(&self) -> bool {
        self.ord() == Some(0)
    }

    /// Central-fiber reduction: the constant digit.
    pub fn residue(&self) -> Fq {
        self.digit(0)
    }

    pub fn truncate(&self, prec: usize) -> DvrElement {
        let mut digits = self.digits.clone();
        digits.truncate(prec);
        DvrElement { digits }
    }
}

/// Default truncation precision for ramification index `k`.
pub fn default_precision(k: usize) -> usize {
    4 * k + 10
}

/// Validates and builds a ring descriptor. For odd `p` the ramification
/// index must be divisible by `2(p-1)`; use [`ring_create_unchecked`] to
/// bypass that for experiments.
pub fn ring_create(p: u32, k: usize, q: u64, precision: usize, tau: u32) -> Result<Ring> {
    if p != 2 && !k.is_multiple_of(2 * (p as usize - 1)) {
        return Err(Error::InvalidRing(format!(
            "ramification index k={k} is not divisible by 2(p-1)={}",
            2 * (p - 1)
        )));
    }
    ring_create_unchecked(p, k, q, precision, tau)
}

pub fn ring_create_unchecked(p: u32, k: usize, q: u64, precision: usize, tau: u32) -> Result<Ring> {
    if !is_prime(p as u64) {
        return Err(Error::InvalidRing(format!("p={p} is not prime")));
    }
    if k == 0 {
        return Err(Error::InvalidRing("ramification index must be positive".into()));
    }
    match prime_power(q) {
        Some((qp, _)) if qp == p => {}
        _ => {
            return Err(Error::InvalidRing(format!(
                "residue field size q={q} is not a power of p={p}"
            )))
        }
    }
    if precision <= k {
        return Err(Error::InvalidRing(format!(
            "precision N={precision} must exceed k={k}"
        )));
    }
    let field = GaloisField::with_order(q)?;
    let tau = Fq(tau);
    if tau.is_zero() || tau.0 >= field.order() {
        return Err(Error::InvalidRing(format!(
            "tau must be a nonzero residue-field element, got code {}",
            tau.0
        )));
    }
    let modulus = field.modulus().iter().map(|&c| c as i64).collect();
    let tau_lift = field.coords(tau).into_iter().map(|c| c as i64).collect();
    Ok(Arc::new(RingDescriptor {
        p,
        k,
        precision,
        tau,
        field,
        modulus,
        tau_lift,
    }))
}

impl RingDescriptor {
    pub fn p(&self) -> u32 {
        self.p
    }

    /// Ramification index `ord_pi(p)`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> u32 {
        self.field.order()
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn tau(&self) -> Fq {
        self.tau
    }

    pub fn field(&self) -> &Arc<GaloisField> {
        &self.field
    }

    fn m(&self) -> usize {
        self.field.degree() as usize
    }

    pub fn zero(&self) -> DvrElement {
        self.zero_with(self.precision)
    }

    pub fn zero_with(&self, prec: usize) -> DvrElement {
        DvrElement {
            digits: vec![Fq::ZERO; prec],
        }
    }

    pub fn one(&self) -> DvrElement {
        self.lift(Fq::ONE)
    }

    /// Canonical lift of a residue-field element.
    pub fn lift(&self, c: Fq) -> DvrElement {
        let mut e = self.zero();
        e.digits[0] = c;
        e
    }

    pub fn from_digits(&self, digits: &[Fq]) -> DvrElement {
        let mut e = self.zero();
        for (i, &d) in digits.iter().take(self.precision).enumerate() {
            e.digits[i] = d;
        }
        e
    }

    pub fn pi_pow(&self, e: usize) -> DvrElement {
        let mut z = self.zero();
        if e < self.precision {
            z.digits[e] = Fq::ONE;
        }
        z
    }

    pub fn from_int(&self, n: i64) -> DvrElement {
        let m = self.m();
        let mut v = vec![0i64; self.precision * m];
        v[0] = n;
        self.normalize(v, self.precision)
    }

    /// The element `p` itself, i.e. `tau * pi^k`.
    pub fn p_element(&self) -> DvrElement {
        self.from_int(self.p as i64)
    }

    fn lift_coords(&self, c: Fq) -> Vec<i64> {
        self.field.coords(c).into_iter().map(|x| x as i64).collect()
    }

    fn zq_mul_into(&self, a: &[i64], b: &[i64], out: &mut [i64]) {
        let m = self.m();
        if m == 1 {
            out[0] += a[0] * b[0];
            return;
        }
        let mut prod = vec![0i64; 2 * m - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] += x * y;
            }
        }
        for d in (m..2 * m - 1).rev() {
            let h = prod[d];
            if h == 0 {
                continue;
            }
            prod[d] = 0;
            for j in 0..m {
                prod[d - m + j] -= h * self.modulus[j];
            }
        }
        for j in 0..m {
            out[j] += prod[j];
        }
    }

    /// Turns a vector of `Z_q` coordinates (position-major) into digits,
    /// carrying `p = tau * pi^k` forward.
    fn normalize(&self, mut v: Vec<i64>, prec: usize) -> DvrElement {
        let m = self.m();
        let p = self.p as i64;
        let mut digits = Vec::with_capacity(prec);
        let mut carry = vec![0i64; m];
        let mut coords = vec![0u32; m];
        for pos in 0..prec {
            let mut any_carry = false;
            for c in 0..m {
                let x = v[pos * m + c];
                let r = x.rem_euclid(p);
                coords[c] = r as u32;
                carry[c] = (x - r) / p;
                any_carry |= carry[c] != 0;
            }
            digits.push(self.field.from_coords(&coords));
            if any_carry && pos + self.k < prec {
                let at = (pos + self.k) * m;
                let (carry, tau) = (carry.clone(), self.tau_lift.clone());
                self.zq_mul_into(&carry, &tau, &mut v[at..at + m]);
            }
        }
        DvrElement { digits }
    }

    fn coords_vec(&self, a: &DvrElement, prec: usize, sign: i64, out: &mut [i64]) {
        let m = self.m();
        for (i, &d) in a.digits.iter().take(prec).enumerate() {
            if d.is_zero() {
                continue;
            }
            for (c, x) in self.field.coords(d).into_iter().enumerate() {
                out[i * m + c] += sign * x as i64;
            }
        }
    }

    pub fn add(&self, a: &DvrElement, b: &DvrElement) -> DvrElement {
        let prec = a.precision().min(b.precision());
        let mut v = vec![0i64; prec * self.m()];
        self.coords_vec(a, prec, 1, &mut v);
        self.coords_vec(b, prec, 1, &mut v);
        self.normalize(v, prec)
    }

    pub fn sub(&self, a: &DvrElement, b: &DvrElement) -> DvrElement {
        let prec = a.precision().min(b.precision());
        let mut v = vec![0i64; prec * self.m()];
        self.coords_vec(a, prec, 1, &mut v);
        self.coords_vec(b, prec, -1, &mut v);
        self.normalize(v, prec)
    }

    pub fn neg(&self, a: &DvrElement) -> DvrElement {
        let prec = a.precision();
        let mut v = vec![0i64; prec * self.m()];
        self.coords_vec(a, prec, -1, &mut v);
        self.normalize(v, prec)
    }

    pub fn mul(&self, a: &DvrElement, b: &DvrElement) -> DvrElement {
        let prec = a.precision().min(b.precision());
        let m = self.m();
        let mut v = vec![0i64; prec * m];
        let (Some(oa), Some(ob)) = (a.ord(), b.ord()) else {
            return self.zero_with(prec);
        };
        if oa + ob >= prec {
            return self.zero_with(prec);
        }
        let lb: Vec<(usize, Vec<i64>)> = b.digits[..prec - oa]
            .iter()
            .enumerate()
            .filter(|(_, d)| !d.is_zero())
            .map(|(j, &d)| (j, self.lift_coords(d)))
            .collect();
        for (i, &da) in a.digits[..prec - ob].iter().enumerate() {
            if da.is_zero() {
                continue;
            }
            let la = self.lift_coords(da);
            for (j, lbj) in &lb {
                let pos = i + j;
                if pos >= prec {
                    break;
                }
                self.zq_mul_into(&la, lbj, &mut v[pos * m..pos * m + m]);
            }
        }
        self.normalize(v, prec)
    }

    pub fn mul_int(&self, a: &DvrElement, n: i64) -> DvrElement {
        self.mul(a, &self.from_int(n))
    }

    pub fn pow(&self, a: &DvrElement, mut e: u64) -> DvrElement {
        let mut base = a.clone();
        let mut acc = self.one().truncate(a.precision());
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    /// Multiplication by `pi^e` as a digit shift; precision is kept.
    pub fn shift(&self, a: &DvrElement, e: usize) -> DvrElement {
        let prec = a.precision();
        let mut digits = vec![Fq::ZERO; prec];
        if e < prec {
            digits[e..].copy_from_slice(&a.digits[..prec - e]);
        }
        DvrElement { digits }
    }

    /// Exact division by `pi^m`. The result is known to precision
    /// `prec - m`, which must stay positive.
    pub fn div_pow_pi(&self, a: &DvrElement, m: usize) -> Result<DvrElement> {
        let prec = a.precision();
        if m >= prec {
            return Err(Error::PrecisionExhausted(format!(
                "dividing an element of precision {prec} by pi^{m}"
            )));
        }
        if let Some(o) = a.ord() {
            if o < m {
                return Err(Error::InexactDivision(format!(
                    "{} has ord {o} < {m}",
                    self.format(a)
                )));
            }
        }
        Ok(DvrElement {
            digits: a.digits[m..].to_vec(),
        })
    }

    pub fn residue(&self, a: &DvrElement) -> Fq {
        a.residue()
    }

    pub fn ord(&self, a: &DvrElement) -> Option<usize> {
        a.ord()
    }

    /// Inverse of a unit, by Newton iteration from the residue inverse.
    pub fn inv(&self, a: &DvrElement) -> Result<DvrElement> {
        let r = self
            .field
            .inv(a.residue())
            .ok_or_else(|| Error::Precondition(format!("{} is not a unit", self.format(a))))?;
        let prec = a.precision();
        let one = self.one().truncate(prec);
        let two = self.from_int(2).truncate(prec);
        let mut x = self.lift(r).truncate(prec);
        loop {
            let err = self.sub(&one, &self.mul(a, &x));
            if err.is_zero() {
                return Ok(x);
            }
            x = self.mul(&x, &self.sub(&two, &self.mul(a, &x)));
        }
    }

    pub fn eq_at(&self, a: &DvrElement, b: &DvrElement, prec: usize) -> bool {
        let d = self.sub(a, b);
        d.ord().is_none_or(|o| o >= prec)
    }

    pub fn format(&self, a: &DvrElement) -> String {
        let mut parts = Vec::new();
        for (i, &d) in a.digits.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            let c = self.field.format(d);
            parts.push(match (i, d == Fq::ONE) {
                (0, _) => c,
                (1, true) => "pi".to_string(),
                (1, false) => format!("{c}*pi"),
                (i, true) => format!("pi^{i}"),
                (i, false) => format!("{c}*pi^{i}"),
            });
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        }
    }

    /// Parses the format produced by [`RingDescriptor::format`]; the result
    /// carries the ring's full precision.
    pub fn parse(&self, s: &str) -> Result<DvrElement> {
        let mut acc = self.zero();
        for term in split_top_level(s, '+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::Parse(format!("empty term in `{s}`")));
            }
            let (coeff, power) = match term.find("pi") {
                None => (term, 0usize),
                Some(at) => {
                    let coeff = term[..at].trim().trim_end_matches('*').trim();
                    let rest = term[at + 2..].trim();
                    let power = if rest.is_empty() {
                        1
                    } else {
                        rest.strip_prefix('^')
                            .and_then(|e| e.trim().parse().ok())
                            .ok_or_else(|| Error::Parse(format!("bad power of pi in `{term}`")))?
                    };
                    (if coeff.is_empty() { "1" } else { coeff }, power)
                }
            };
            let c = self.field.parse(coeff)?;
            let t = self.shift(&self.lift(c), power);
            acc = self.add(&acc, &t);
        }
        Ok(acc)
    }
}

/// Splits on `sep` outside parentheses.
pub(crate) fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + ch.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r34() -> Ring {
        ring_create(3, 4, 3, 20, 1).unwrap()
    }

    #[test]
    fn creation_examples() {
        let r = r34();
        assert_eq!(r.p_element().ord(), Some(4));
        let r5 = ring_create(5, 8, 5, 40, 2).unwrap();
        assert_eq!(r5.p_element().ord(), Some(8));
        assert!(matches!(
            ring_create(3, 3, 3, 20, 1),
            Err(Error::InvalidRing(_))
        ));
        assert!(ring_create(3, 4, 3, 4, 1).is_err());
        assert!(ring_create(3, 4, 5, 20, 1).is_err());
        assert!(ring_create_unchecked(3, 3, 3, 20, 1).is_ok());
    }

    #[test]
    fn p_is_tau_pi_k() {
        let r = ring_create(5, 8, 5, 40, 2).unwrap();
        let p = r.p_element();
        assert_eq!(p.digits()[8], Fq(2));
        assert_eq!(r.div_pow_pi(&p, 8).unwrap().residue(), Fq(2));
    }

    #[test]
    fn ord_examples() {
        let r = r34();
        assert_eq!(r.pi_pow(2).ord(), Some(2));
        assert_eq!(r.zero().ord(), None);
        assert_eq!(r.from_int(9).ord(), Some(8));
    }

    #[test]
    fn division_examples() {
        let r = r34();
        let q = r.div_pow_pi(&r.pi_pow(5), 2).unwrap();
        assert_eq!(q, r.pi_pow(3).truncate(18));
        assert_eq!(q.precision(), 18);
        assert!(matches!(
            r.div_pow_pi(&r.pi_pow(1), 2),
            Err(Error::InexactDivision(_))
        ));
    }

    #[test]
    fn residue_examples() {
        let r = r34();
        let a = r.add(&r.one(), &r.pi_pow(1));
        assert_eq!(a.residue(), Fq(1));
        assert_eq!(r.p_element().residue(), Fq(0));
        assert_eq!(r.lift(r.tau()).residue(), r.tau());
    }

    #[test]
    fn negation_and_inverse() {
        let r = ring_create(3, 4, 9, 22, 1).unwrap();
        let a = r.parse("(1+t) + 2*pi + pi^5").unwrap();
        assert!(r.add(&a, &r.neg(&a)).is_zero());
        let inv = r.inv(&a).unwrap();
        assert!(r.eq_at(&r.mul(&a, &inv), &r.one(), 22));
        let half = r.inv(&r.from_int(2)).unwrap();
        assert!(r.eq_at(&r.mul_int(&half, 2), &r.one(), 22));
    }

    #[test]
    fn text_round_trip() {
        let r = ring_create(3, 4, 9, 22, 1).unwrap();
        for s in ["0", "1 + pi", "2 + (1+2*t)*pi^3 + pi^7", "(t)*pi"] {
            assert_eq!(r.format(&r.parse(s).unwrap()), s);
        }
    }
}
