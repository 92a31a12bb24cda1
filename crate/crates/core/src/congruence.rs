//! Degree arithmetic for rational endomorphisms of very general
//! hypersurfaces: admissible primes, residue constraints on the degree,
//! fibration exclusions, the pullback and iteration bounds, and the
//! specialization degree ledger.

use std::fmt;

use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{Error, Result};

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

pub fn primes_up_to(n: u64) -> Vec<u64> {
    (2..=n).filter(|&p| is_prime(p)).collect()
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// `d >= p * ceil((n + 3) / (p + 1))`.
pub fn degree_condition(p: u64, n: u64, d: u64) -> bool {
    d >= p * ceil_div(n + 3, p + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AdmissiblePrime {
    pub p: u64,
    /// `false` for `p = 2`, where every integer is `0` or `1` mod `p`.
    pub effective: bool,
}

pub fn admissible_primes(n: u64, d: u64) -> Vec<AdmissiblePrime> {
    primes_up_to(d)
        .into_iter()
        .filter(|&p| degree_condition(p, n, d))
        .map(|p| AdmissiblePrime { p, effective: p >= 3 })
        .collect()
}

pub fn effective_primes(n: u64, d: u64) -> Vec<u64> {
    admissible_primes(n, d)
        .into_iter()
        .filter(|a| a.effective)
        .map(|a| a.p)
        .collect()
}

/// Admissible primes with their allowed residue set `{0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CongruenceReport {
    pub n: u64,
    pub d: u64,
    pub admissible: Vec<AdmissiblePrime>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Constraint {
    pub p: u64,
    pub allowed_residues: Vec<u64>,
}

pub fn congruence_report(n: u64, d: u64) -> CongruenceReport {
    let admissible = admissible_primes(n, d);
    let constraints = admissible
        .iter()
        .map(|a| Constraint {
            p: a.p,
            allowed_residues: vec![0, 1],
        })
        .collect();
    CongruenceReport {
        n,
        d,
        admissible,
        constraints,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PrimeVerdict {
    pub p: u64,
    pub residue: u64,
    pub allowed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LambdaVerdict {
    pub lambda: u64,
    pub allowed: bool,
    pub per_prime: Vec<PrimeVerdict>,
}

impl LambdaVerdict {
    /// First effective prime at which the degree is forbidden.
    pub fn witness(&self) -> Option<u64> {
        self.per_prime.iter().find(|v| !v.allowed).map(|v| v.p)
    }
}

pub fn residue_allowed(value: u64, p: u64) -> bool {
    value % p <= 1
}

pub fn lambda_allowed(n: u64, d: u64, lambda: u64) -> LambdaVerdict {
    let per_prime: Vec<PrimeVerdict> = effective_primes(n, d)
        .into_iter()
        .map(|p| PrimeVerdict {
            p,
            residue: lambda % p,
            allowed: residue_allowed(lambda, p),
        })
        .collect();
    LambdaVerdict {
        lambda,
        allowed: per_prime.iter().all(|v| v.allowed),
        per_prime,
    }
}

/// Both sides of the threshold equivalence for `d = p e + f`.
pub fn remark_equivalence(p: u64, n: u64, e: u64, f: u64) -> (bool, bool) {
    let d = p * e + f;
    let lhs = degree_condition(p, n, d);
    let rhs = p * e + e > n + 2;
    (lhs, rhs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Fibration {
    /// Multiplication by `m` on an elliptic curve, degree `m^2`, `m >= 2`.
    Elliptic,
    /// Degree `(m delta + 1)^2`, `m >= 1`.
    Genus1 { delta: u64 },
    /// Multiplication by `m` on a `g`-dimensional abelian variety, degree `m^(2g)`, `m >= 2`.
    Abelian { g: u32 },
}

impl Fibration {
    pub fn min_multiplier(&self) -> u64 {
        match self {
            Fibration::Genus1 { .. } => 1,
            _ => 2,
        }
    }

    /// Degree of the endomorphism for multiplier `m`, reduced mod `p`.
    pub fn degree_mod(&self, m: u64, p: u64) -> u64 {
        let pow_mod = |b: u64, e: u64| -> u64 {
            let mut acc = 1 % p;
            let b = b % p;
            for _ in 0..e {
                acc = acc * b % p;
            }
            acc
        };
        match *self {
            Fibration::Elliptic => pow_mod(m, 2),
            Fibration::Genus1 { delta } => pow_mod((m % p) * (delta % p) + 1, 2),
            Fibration::Abelian { g } => pow_mod(m, 2 * g as u64),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown fibration `{s}`"));
        if s == "elliptic" {
            return Ok(Fibration::Elliptic);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let value: u64 = arg.trim().parse().map_err(|_| bad())?;
        if value == 0 {
            return Err(Error::Precondition(format!("`{s}` needs a positive parameter")));
        }
        match kind {
            "genus1" => Ok(Fibration::Genus1 { delta: value }),
            "abelian" => Ok(Fibration::Abelian {
                g: u32::try_from(value).map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Fibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fibration::Elliptic => write!(f, "elliptic"),
            Fibration::Genus1 { delta } => write!(f, "genus1:{delta}"),
            Fibration::Abelian { g } => write!(f, "abelian:{g}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FibrationWitness {
    pub p: u64,
    pub m: u64,
    pub residue: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FibrationVerdict {
    pub fibration: Fibration,
    pub excluded: bool,
    pub witness: Option<FibrationWitness>,
}

/// Smallest multiplier whose degree is not `0` or `1` mod `p`. Residues of
/// the degree are periodic in `m` with period `p`, so one period suffices.
pub fn forbidden_multiplier(kind: Fibration, p: u64) -> Option<FibrationWitness> {
    let m0 = kind.min_multiplier();
    (m0..m0 + p).find_map(|m| {
        let residue = kind.degree_mod(m, p);
        (residue > 1).then_some(FibrationWitness { p, m, residue })
    })
}

pub fn fibration_excluded(n: u64, d: u64, kind: Fibration) -> FibrationVerdict {
    let witness = effective_primes(n, d)
        .into_iter()
        .find_map(|p| forbidden_multiplier(kind, p));
    FibrationVerdict {
        fibration: kind,
        excluded: witness.is_some(),
        witness,
    }
}

/// `5 * ceil((n + 3) / 6)`.
pub fn elliptic_threshold(n: u64) -> u64 {
    5 * ceil_div(n + 3, 6)
}

/// Lower bound `a >= lambda^(1/n)` on the pullback multiplier, as an exact
/// predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KtBound {
    pub lambda: u64,
    pub n: u32,
}

pub fn kt_pullback_bound(lambda: u64, n: u32) -> KtBound {
    KtBound { lambda, n }
}

impl KtBound {
    /// `a^n >= lambda`.
    pub fn is_at_least(&self, a: u64) -> bool {
        let mut acc: u128 = 1;
        for _ in 0..self.n {
            acc = acc.saturating_mul(a as u128);
            if acc >= self.lambda as u128 {
                return true;
            }
        }
        acc >= self.lambda as u128
    }

    /// Least integer `a` with `a^n >= lambda`.
    pub fn minimal_integer(&self) -> u64 {
        if self.n == 0 {
            return if self.lambda <= 1 { 0 } else { u64::MAX };
        }
        let (mut lo, mut hi) = (0u64, self.lambda.max(1));
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.is_at_least(mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }
}

/// Least `k >= 1` with `lambda^k > (s / c)^n`, i.e. `lambda^k c^n > s^n`.
pub fn iteration_bound(lambda: u64, n: u32, s: u64, c: u64) -> Result<u64> {
    if lambda < 2 || s == 0 || c == 0 {
        return Err(Error::Precondition(format!(
            "iteration bound needs lambda >= 2 and S, c >= 1 (got {lambda}, {s}, {c})"
        )));
    }
    let target = BigUint::from(s).pow(n);
    let cn = BigUint::from(c).pow(n);
    let lam = BigUint::from(lambda);
    let ratio = n as f64 * ((s as f64).ln() - (c as f64).ln()) / (lambda as f64).ln();
    let mut k = (ratio.floor().max(0.0) as u64).max(1);
    let exceeds = |k: u64| lam.pow(k as u32) * &cn > target;
    while k > 1 && exceeds(k - 1) {
        k -= 1;
    }
    while !exceeds(k) {
        k += 1;
    }
    Ok(k)
}

/// Degrees of the components of a specialized graph: one main component
/// and the exceptional ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeLedger {
    pub main_degree: u64,
    pub exceptional_degrees: Vec<u64>,
    pub modulus: u64,
}

impl DegreeLedger {
    pub fn total(&self) -> u64 {
        self.main_degree + self.exceptional_degrees.iter().sum::<u64>()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LedgerStatement {
    pub total: u64,
    pub total_residue: u64,
    pub main_residue: u64,
    /// All exceptional degrees were flagged divisible by the modulus.
    pub all_flagged: bool,
    pub congruent: bool,
}

/// Checks flagged exceptional degrees for divisibility and compares the
/// total with the main degree modulo the ledger's modulus.
pub fn specialize_ledger(ledger: &DegreeLedger, divisible: &[bool]) -> Result<LedgerStatement> {
    let l = ledger.modulus;
    if l < 2 {
        return Err(Error::Precondition(format!("modulus {l} < 2")));
    }
    if divisible.len() != ledger.exceptional_degrees.len() {
        return Err(Error::Precondition(format!(
            "{} flags for {} exceptional degrees",
            divisible.len(),
            ledger.exceptional_degrees.len()
        )));
    }
    for (i, (&deg, &flag)) in ledger.exceptional_degrees.iter().zip(divisible).enumerate() {
        if flag && deg % l != 0 {
            return Err(Error::FlagViolated(format!(
                "exceptional degree #{i} = {deg} is not divisible by {l}"
            )));
        }
    }
    let total = ledger.total();
    let statement = LedgerStatement {
        total,
        total_residue: total % l,
        main_residue: ledger.main_degree % l,
        all_flagged: divisible.iter().all(|&f| f),
        congruent: total % l == ledger.main_degree % l,
    };
    if statement.all_flagged {
        assert!(statement.congruent, "flagged ledger must be congruent");
    }
    Ok(statement)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HypersurfaceType {
    Fano,
    #[serde(rename = "Calabi-Yau")]
    CalabiYau,
    #[serde(rename = "general type")]
    GeneralType,
}

impl HypersurfaceType {
    /// Degree `d` hypersurface in `P^(n+1)`.
    pub fn of(n: u64, d: u64) -> Self {
        match d.cmp(&(n + 2)) {
            std::cmp::Ordering::Less => HypersurfaceType::Fano,
            std::cmp::Ordering::Equal => HypersurfaceType::CalabiYau,
            std::cmp::Ordering::Greater => HypersurfaceType::GeneralType,
        }
    }
}

impl fmt::Display for HypersurfaceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HypersurfaceType::Fano => "Fano",
            HypersurfaceType::CalabiYau => "Calabi-Yau",
            HypersurfaceType::GeneralType => "general type",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub n: u64,
    pub d: u64,
    #[serde(rename = "type")]
    pub kind: HypersurfaceType,
    pub moduli: Vec<u64>,
}

pub const TABLE_CASES: [(u64, u64); 4] = [(3, 5), (4, 6), (5, 6), (5, 7)];

pub fn intro_table() -> Vec<TableRow> {
    TABLE_CASES
        .iter()
        .map(|&(n, d)| TableRow {
            n,
            d,
            kind: HypersurfaceType::of(n, d),
            moduli: effective_primes(n, d),
        })
        .collect()
}

pub fn render_table(rows: &[TableRow]) -> String {
    let mut out = format!("{:<8} {:<12} {}\n", "(n,d)", "type", "lambda = 0 or 1");
    for r in rows {
        let moduli = r
            .moduli
            .iter()
            .map(|p| format!("mod {p}"))
            .collect::<Vec<_>>()
            .join(" and ");
        out.push_str(&format!(
            "{:<8} {:<12} {}\n",
            format!("({},{})", r.n, r.d),
            r.kind.to_string(),
            moduli
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissible_examples() {
        let a = admissible_primes(3, 5);
        assert_eq!(
            a,
            vec![
                AdmissiblePrime { p: 2, effective: false },
                AdmissiblePrime { p: 5, effective: true }
            ]
        );
        assert_eq!(effective_primes(5, 7), vec![3, 7]);
        assert_eq!(effective_primes(4, 6), vec![3]);
        assert!(effective_primes(3, 4).is_empty());
    }

    #[test]
    fn lambda_examples() {
        let v = lambda_allowed(3, 5, 4);
        assert!(!v.allowed);
        assert_eq!(v.witness(), Some(5));
        assert!(lambda_allowed(3, 5, 6).allowed);
        for (n, d) in [(3, 5), (5, 7), (10, 40)] {
            assert!(lambda_allowed(n, d, 1).allowed);
        }
    }

    #[test]
    fn remark_examples() {
        assert_eq!(remark_equivalence(3, 5, 2, 0), (true, true));
        assert_eq!(remark_equivalence(5, 3, 1, 0), (true, true));
        assert_eq!(remark_equivalence(3, 6, 2, 2), (false, false));
    }

    #[test]
    fn fibration_examples() {
        let v = fibration_excluded(3, 5, Fibration::Elliptic);
        assert!(v.excluded);
        assert_eq!(v.witness, Some(FibrationWitness { p: 5, m: 2, residue: 4 }));
        // (4,6): only p = 3, and squares are 0 or 1 mod 3
        assert!(!fibration_excluded(4, 6, Fibration::Elliptic).excluded);
        for p in [3, 5, 7, 11] {
            assert_eq!(forbidden_multiplier(Fibration::Genus1 { delta: p }, p), None);
        }
        assert!(forbidden_multiplier(Fibration::Genus1 { delta: 1 }, 5).is_some());
        assert_eq!(
            forbidden_multiplier(Fibration::Abelian { g: 1 }, 7).map(|w| w.m),
            Some(2)
        );
        // m^6 is 0 or 1 mod 7 for every m
        assert_eq!(forbidden_multiplier(Fibration::Abelian { g: 3 }, 7), None);
    }

    #[test]
    fn fibration_parse() {
        assert_eq!(Fibration::parse("elliptic").unwrap(), Fibration::Elliptic);
        assert_eq!(Fibration::parse("genus1:3").unwrap(), Fibration::Genus1 { delta: 3 });
        assert_eq!(Fibration::parse("abelian:2").unwrap(), Fibration::Abelian { g: 2 });
        assert!(Fibration::parse("abelian:0").is_err());
        assert!(Fibration::parse("k3").is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(elliptic_threshold(3), 5);
        assert_eq!(elliptic_threshold(9), 10);
        assert_eq!(elliptic_threshold(4), 10);
    }

    #[test]
    fn kt_examples() {
        assert_eq!(kt_pullback_bound(8, 3).minimal_integer(), 2);
        let b = kt_pullback_bound(2, 3);
        assert!(!b.is_at_least(1));
        assert_eq!(b.minimal_integer(), 2);
        assert_eq!(kt_pullback_bound(1, 5).minimal_integer(), 1);
        assert!(kt_pullback_bound(u64::MAX, 10).is_at_least(u64::MAX));
    }

    #[test]
    fn iteration_examples() {
        assert_eq!(iteration_bound(2, 1, 10, 1).unwrap(), 4);
        assert_eq!(iteration_bound(2, 3, 10, 1).unwrap(), 10);
        assert_eq!(iteration_bound(3, 4, 5, 5).unwrap(), 1);
        assert_eq!(iteration_bound(2, 2, 3, 7).unwrap(), 1);
        assert!(iteration_bound(1, 2, 3, 1).is_err());
    }

    #[test]
    fn ledger_examples() {
        let l = DegreeLedger {
            main_degree: 7,
            exceptional_degrees: vec![5, 10],
            modulus: 5,
        };
        let s = specialize_ledger(&l, &[true, true]).unwrap();
        assert_eq!((s.total, s.total_residue, s.main_residue), (22, 2, 2));
        let l = DegreeLedger {
            main_degree: 1,
            exceptional_degrees: vec![],
            modulus: 3,
        };
        assert!(specialize_ledger(&l, &[]).unwrap().congruent);
        let l = DegreeLedger {
            main_degree: 4,
            exceptional_degrees: vec![3],
            modulus: 5,
        };
        assert!(matches!(specialize_ledger(&l, &[true]), Err(Error::FlagViolated(_))));
        let s = specialize_ledger(&l, &[false]).unwrap();
        assert!(!s.congruent && !s.all_flagged);
    }

    #[test]
    fn table_rows() {
        let rows = intro_table();
        let got: Vec<(u64, u64, HypersurfaceType, Vec<u64>)> =
            rows.iter().map(|r| (r.n, r.d, r.kind, r.moduli.clone())).collect();
        use HypersurfaceType::*;
        assert_eq!(
            got,
            vec![
                (3, 5, CalabiYau, vec![5]),
                (4, 6, CalabiYau, vec![3]),
                (5, 6, Fano, vec![3]),
                (5, 7, CalabiYau, vec![3, 7]),
            ]
        );
        let text = render_table(&rows);
        assert!(text.contains("(5,7)    Calabi-Yau   mod 3 and mod 7"), "{text}");
    }

    #[test]
    fn monotone_in_degree() {
        for n in 3..=60 {
            for d in 1..120 {
                let a: Vec<u64> = admissible_primes(n, d).iter().map(|a| a.p).collect();
                let b: Vec<u64> = admissible_primes(n, d + 1).iter().map(|a| a.p).collect();
                assert!(a.iter().all(|p| b.contains(p)), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn residues_closed_under_products() {
        for p in primes_up_to(50) {
            for a in [0, 1] {
                for b in [0, 1] {
                    assert!(residue_allowed(a * b, p));
                }
            }
        }
    }

    #[test]
    fn elliptic_dichotomy() {
        for p in primes_up_to(100) {
            let w = (2..=p).find(|m| m * m % p > 1);
            assert_eq!(w.is_some(), p > 3, "p={p}");
            assert_eq!(forbidden_multiplier(Fibration::Elliptic, p).map(|w| w.m), w);
        }
    }
}
