//! Finite fields `GF(p^m)`.
//!
//! Elements are stored as the base-`p` encoding of their coordinate vector
//! `a0 + a1*t + ... + a_{m-1}*t^(m-1)` modulo a primitive polynomial, so the
//! class of `t` generates the multiplicative group and multiplication goes
//! through log/exp tables.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of a [`GaloisField`], encoded in base `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fq(pub u32);

impl Fq {
    pub const ZERO: Fq = Fq(0);
    pub const ONE: Fq = Fq(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Returns `(p, m)` with `q = p^m`, or `None` if `q` is not a prime power.
pub fn prime_power(q: u64) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2;
    while !q.is_multiple_of(p) {
        p += 1;
    }
    let mut m = 0;
    let mut r = q;
    while r.is_multiple_of(p) {
        r /= p;
        m += 1;
    }
    (r == 1).then_some((p as u32, m))
}

pub struct GaloisField {
    p: u32,
    m: u32,
    q: u32,
    /// Low coefficients `f0..f_{m-1}` of the monic primitive modulus.
    modulus: Vec<u32>,
    exp: Vec<u32>,
    log: Vec<u32>,
    add_table: Option<Vec<u32>>,
}

impl fmt::Debug for GaloisField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{})", self.p, self.m)
    }
}

const MAX_FIELD_SIZE: u64 = 1 << 22;
const ADD_TABLE_LIMIT: u32 = 256;

type FieldCache = Mutex<HashMap<(u32, u32), Arc<GaloisField>>>;

fn field_cache() -> &'static FieldCache {
    static CACHE: OnceLock<FieldCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl GaloisField {
    /// The field with `p^m` elements. Construction is deterministic (the
    /// modulus is the lexicographically first primitive polynomial) and
    /// results are shared through a process-wide cache.
    pub fn new(p: u32, m: u32) -> Result<Arc<GaloisField>> {
        if !is_prime(p as u64) {
            return Err(Error::InvalidRing(format!("{p} is not prime")));
        }
        if m == 0 {
            return Err(Error::InvalidRing("field degree must be positive".into()));
        }
        let size = (p as u64).checked_pow(m).filter(|&q| q <= MAX_FIELD_SIZE);
        let Some(q) = size else {
            return Err(Error::InvalidRing(format!("GF({p}^{m}) is too large")));
        };
        let mut cache = field_cache().lock().expect("field cache poisoned");
        if let Some(f) = cache.get(&(p, m)) {
            return Ok(f.clone());
        }
        let field = Arc::new(Self::build(p, m, q as u32));
        cache.insert((p, m), field.clone());
        Ok(field)
    }

    pub fn with_order(q: u64) -> Result<Arc<GaloisField>> {
        let (p, m) = prime_power(q)
            .ok_or_else(|| Error::InvalidRing(format!("{q} is not a prime power")))?;
        Self::new(p, m)
    }

    fn build(p: u32, m: u32, q: u32) -> GaloisField {
        let mut candidate = vec![0u32; m as usize];
        loop {
            if let Some((exp, log)) = Self::try_primitive(p, m, q, &candidate) {
                let mut field = GaloisField {
                    p,
                    m,
                    q,
                    modulus: candidate,
                    exp,
                    log,
                    add_table: None,
                };
                if q <= ADD_TABLE_LIMIT {
                    let mut table = vec![0u32; (q * q) as usize];
                    for a in 0..q {
                        for b in 0..q {
                            table[(a * q + b) as usize] = field.add_digits(Fq(a), Fq(b)).0;
                        }
                    }
                    field.add_table = Some(table);
                }
                return field;
            }
            // next candidate in lexicographic order
            for c in candidate.iter_mut() {
                *c += 1;
                if *c < p {
                    break;
                }
                *c = 0;
            }
        }
    }

    fn try_primitive(p: u32, m: u32, q: u32, modulus: &[u32]) -> Option<(Vec<u32>, Vec<u32>)> {
        if m == 1 {
            // modulus t + f0, so t = -f0; need -f0 to generate F_p^*
            let g = (p - modulus[0] % p) % p;
            if g == 0 {
                return None;
            }
            let mut exp = Vec::with_capacity((q - 1) as usize);
            let mut log = vec![u32::MAX; q as usize];
            let mut x = 1u64;
            for i in 0..q - 1 {
                if log[x as usize] != u32::MAX {
                    return None;
                }
                log[x as usize] = i;
                exp.push(x as u32);
                x = x * g as u64 % p as u64;
            }
            return (x == 1).then_some((exp, log));
        }
        if modulus[0] == 0 {
            return None;
        }
        let mut exp = Vec::with_capacity((q - 1) as usize);
        let mut log = vec![u32::MAX; q as usize];
        let mut x: Vec<u32> = vec![0; m as usize];
        x[0] = 1;
        for i in 0..q - 1 {
            let code = encode(&x, p);
            if code == 0 || log[code as usize] != u32::MAX {
                return None;
            }
            log[code as usize] = i;
            exp.push(code);
            // multiply by t
            let top = x[m as usize - 1];
            for j in (1..m as usize).rev() {
                x[j] = x[j - 1];
            }
            x[0] = 0;
            for j in 0..m as usize {
                x[j] = (x[j] + (p - modulus[j]) * top) % p;
            }
        }
        (encode(&x, p) == 1).then_some((exp, log))
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn order(&self) -> u32 {
        self.q
    }

    /// Low coefficients of the monic defining polynomial of `t`.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn elements(&self) -> impl Iterator<Item = Fq> {
        (0..self.q).map(Fq)
    }

    pub fn from_int(&self, n: i64) -> Fq {
        Fq(n.rem_euclid(self.p as i64) as u32)
    }

    pub fn coords(&self, a: Fq) -> Vec<u32> {
        let mut v = Vec::with_capacity(self.m as usize);
        let mut x = a.0;
        for _ in 0..self.m {
            v.push(x % self.p);
            x /= self.p;
        }
        v
    }

    pub fn from_coords(&self, c: &[u32]) -> Fq {
        Fq(encode(c, self.p))
    }

    fn add_digits(&self, a: Fq, b: Fq) -> Fq {
        let (mut x, mut y) = (a.0, b.0);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.m {
            out += ((x % self.p + y % self.p) % self.p) * place;
            x /= self.p;
            y /= self.p;
            place *= self.p;
        }
        Fq(out)
    }

    #[inline]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        match &self.add_table {
            Some(t) => Fq(t[(a.0 * self.q + b.0) as usize]),
            None => self.add_digits(a, b),
        }
    }

    pub fn neg(&self, a: Fq) -> Fq {
        let c: Vec<u32> = self
            .coords(a)
            .into_iter()
            .map(|x| (self.p - x) % self.p)
            .collect();
        self.from_coords(&c)
    }

    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        if a.0 == 0 || b.0 == 0 {
            return Fq::ZERO;
        }
        let s = self.log[a.0 as usize] as u64 + self.log[b.0 as usize] as u64;
        Fq(self.exp[(s % (self.q as u64 - 1)) as usize])
    }

    pub fn inv(&self, a: Fq) -> Option<Fq> {
        if a.is_zero() {
            return None;
        }
        let l = self.log[a.0 as usize];
        Some(Fq(self.exp[((self.q - 1 - l) % (self.q - 1)) as usize]))
    }

    pub fn pow(&self, a: Fq, e: u64) -> Fq {
        if e == 0 {
            return Fq::ONE;
        }
        if a.is_zero() {
            return Fq::ZERO;
        }
        let l = self.log[a.0 as usize] as u64;
        Fq(self.exp[((l * (e % (self.q as u64 - 1))) % (self.q as u64 - 1)) as usize])
    }

    /// A square root of `a`, if one exists in this field.
    pub fn sqrt(&self, a: Fq) -> Option<Fq> {
        if a.is_zero() {
            return Some(Fq::ZERO);
        }
        let l = self.log[a.0 as usize];
        if self.p == 2 {
            // squaring is bijective; q - 1 is odd
            let half = (l as u64 * ((self.q as u64) / 2)) % (self.q as u64 - 1);
            return Some(Fq(self.exp[half as usize]));
        }
        l.is_multiple_of(2).then(|| Fq(self.exp[(l / 2) as usize]))
    }

    /// The unique `p`-th root (Frobenius is bijective on a finite field).
    pub fn pth_root(&self, a: Fq) -> Fq {
        self.pow(a, (self.q / self.p) as u64)
    }

    /// Embedding of `self` into `big`, as an image table indexed by element
    /// code. `None` when `big` does not contain a copy of `self`.
    pub fn embed_into(&self, big: &GaloisField) -> Option<Embedding> {
        if big.p != self.p || !big.m.is_multiple_of(self.m) {
            return None;
        }
        // find a root of the modulus of self in big
        let root = big.elements().find(|&r| {
            let mut acc = big.pow(r, self.m as u64);
            for (j, &c) in self.modulus.iter().enumerate() {
                acc = big.add(acc, big.mul(big.from_int(c as i64), big.pow(r, j as u64)));
            }
            acc.is_zero()
        })?;
        let image = self
            .elements()
            .map(|a| {
                self.coords(a)
                    .iter()
                    .enumerate()
                    .fold(Fq::ZERO, |acc, (j, &c)| {
                        big.add(acc, big.mul(big.from_int(c as i64), big.pow(root, j as u64)))
                    })
            })
            .collect();
        Some(Embedding { image })
    }

    pub fn format(&self, a: Fq) -> String {
        if self.m == 1 || a.0 < self.p {
            return a.0.to_string();
        }
        let mut parts = Vec::new();
        for (j, c) in self.coords(a).into_iter().enumerate() {
            if c == 0 {
                continue;
            }
            parts.push(match (j, c) {
                (0, c) => c.to_string(),
                (1, 1) => "t".to_string(),
                (1, c) => format!("{c}*t"),
                (j, 1) => format!("t^{j}"),
                (j, c) => format!("{c}*t^{j}"),
            });
        }
        format!("({})", parts.join("+"))
    }

    /// Parses either a bare integer (reduced mod p) or a parenthesised
    /// polynomial in `t` as printed by [`GaloisField::format`].
    pub fn parse(&self, s: &str) -> Result<Fq> {
        let s = s.trim();
        if let Ok(n) = s.parse::<i64>() {
            return Ok(self.from_int(n));
        }
        let inner = s
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("bad residue-field element `{s}`")))?;
        let mut coords = vec![0u32; self.m as usize];
        for part in inner.split('+') {
            let part = part.trim();
            let (c, power) = match part.split_once('t') {
                None => (part, 0usize),
                Some((c, rest)) => {
                    let c = c.trim().trim_end_matches('*').trim();
                    let c = if c.is_empty() { "1" } else { c };
                    let e = match rest.trim().strip_prefix('^') {
                        None if rest.trim().is_empty() => 1,
                        Some(e) => e
                            .trim()
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad exponent in `{part}`")))?,
                        None => return Err(Error::Parse(format!("bad term `{part}`"))),
                    };
                    (c, e)
                }
            };
            let c: i64 = c
                .parse()
                .map_err(|_| Error::Parse(format!("bad coefficient in `{part}`")))?;
            if power >= self.m as usize {
                return Err(Error::Parse(format!("power of t too large in `{part}`")));
            }
            coords[power] = ((coords[power] as i64 + c).rem_euclid(self.p as i64)) as u32;
        }
        Ok(self.from_coords(&coords))
    }
}

fn encode(c: &[u32], p: u32) -> u32 {
    c.iter().rev().fold(0, |acc, &x| acc * p + x)
}

/// Image table of a field embedding.
#[derive(Clone, Debug)]
pub struct Embedding {
    image: Vec<Fq>,
}

impl Embedding {
    pub fn identity(field: &GaloisField) -> Self {
        Embedding {
            image: field.elements().collect(),
        }
    }

    #[inline]
    pub fn apply(&self, a: Fq) -> Fq {
        self.image[a.0 as usize]
    }
}
