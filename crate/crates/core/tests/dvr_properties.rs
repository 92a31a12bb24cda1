use pcover_core::dvr::{ring_create, DvrElement, Ring};
use pcover_core::field::{Fq, GaloisField};
use proptest::prelude::*;

fn rings() -> Vec<Ring> {
    vec![
        ring_create(3, 4, 3, 26, 1).unwrap(),
        ring_create(3, 4, 9, 20, 2).unwrap(),
        ring_create(5, 8, 5, 42, 3).unwrap(),
        ring_create(2, 2, 4, 18, 1).unwrap(),
        ring_create(2, 3, 2, 16, 1).unwrap(),
    ]
}

fn element(ring: &Ring, raw: &[u32], lead_zeros: usize) -> DvrElement {
    let q = ring.field().order();
    let digits: Vec<Fq> = (0..ring.precision())
        .map(|i| if i < lead_zeros { Fq::ZERO } else { Fq(raw[i % raw.len()] % q) })
        .collect();
    ring.from_digits(&digits)
}

fn triple() -> impl Strategy<Value = (usize, Vec<u32>, Vec<u32>, Vec<u32>, usize, usize)> {
    (
        0..5usize,
        prop::collection::vec(any::<u32>(), 1..30),
        prop::collection::vec(any::<u32>(), 1..30),
        prop::collection::vec(any::<u32>(), 1..30),
        0..6usize,
        0..6usize,
    )
}

proptest! {
    #[test]
    fn ring_axioms((r, a, b, c, za, zb) in triple()) {
        let ring = &rings()[r];
        let (a, b, c) = (element(ring, &a, za), element(ring, &b, zb), element(ring, &c, 0));
        prop_assert_eq!(ring.add(&a, &b), ring.add(&b, &a));
        prop_assert_eq!(ring.mul(&a, &b), ring.mul(&b, &a));
        prop_assert_eq!(ring.add(&ring.add(&a, &b), &c), ring.add(&a, &ring.add(&b, &c)));
        prop_assert_eq!(ring.mul(&ring.mul(&a, &b), &c), ring.mul(&a, &ring.mul(&b, &c)));
        prop_assert_eq!(
            ring.mul(&a, &ring.add(&b, &c)),
            ring.add(&ring.mul(&a, &b), &ring.mul(&a, &c))
        );
        prop_assert!(ring.add(&a, &ring.neg(&a)).is_zero());
        prop_assert_eq!(ring.sub(&ring.add(&a, &b), &b), a.clone());
        prop_assert_eq!(ring.mul(&a, &ring.one()), a);
    }

    #[test]
    fn ord_is_additive((r, a, b, _c, za, zb) in triple()) {
        let ring = &rings()[r];
        let (a, b) = (element(ring, &a, za), element(ring, &b, zb));
        if let (Some(oa), Some(ob)) = (a.ord(), b.ord()) {
            let ab = ring.mul(&a, &b);
            if oa + ob < ring.precision() {
                prop_assert_eq!(ab.ord(), Some(oa + ob));
            } else {
                prop_assert!(ab.is_zero());
            }
        }
    }

    #[test]
    fn p_is_a_unit_times_pi_k((r, a, _b, _c, za, _zb) in triple()) {
        let ring = &rings()[r];
        let pe = ring.p_element();
        prop_assert_eq!(pe.ord(), Some(ring.k()));
        // pi^k = p / tau
        let tau = ring.lift(ring.tau());
        prop_assert_eq!(ring.mul(&tau, &ring.pi_pow(ring.k())), pe.clone());
        // p * a equals a added to itself p times
        let a = element(ring, &a, za);
        let mut sum = ring.zero();
        for _ in 0..ring.p() {
            sum = ring.add(&sum, &a);
        }
        prop_assert_eq!(ring.mul(&pe, &a), sum);
    }

    #[test]
    fn units_invert((r, a, _b, _c, _za, _zb) in triple()) {
        let ring = &rings()[r];
        let mut a = element(ring, &a, 0);
        if !a.is_unit() {
            a = ring.add(&a, &ring.one());
        }
        prop_assume!(a.is_unit());
        let inv = ring.inv(&a).unwrap();
        prop_assert_eq!(ring.mul(&a, &inv), ring.one());
    }

    #[test]
    fn division_by_pi_undoes_shift((r, a, _b, _c, za, _zb) in triple(), m in 0..5usize) {
        let ring = &rings()[r];
        let a = element(ring, &a, za);
        let shifted = ring.shift(&a, m);
        let back = ring.div_pow_pi(&shifted, m).unwrap();
        prop_assert!(ring.eq_at(&back, &a, ring.precision() - m));
    }

    #[test]
    fn text_round_trip((r, a, _b, _c, za, _zb) in triple()) {
        let ring = &rings()[r];
        let a = element(ring, &a, za);
        let text = ring.format(&a);
        prop_assert_eq!(ring.parse(&text).unwrap(), a);
    }

    #[test]
    fn field_inverse_and_sqrt(q in prop::sample::select(vec![2u64, 3, 4, 5, 7, 8, 9, 25, 27]), x in any::<u32>()) {
        let f = GaloisField::with_order(q).unwrap();
        let a = Fq(x % f.order());
        if !a.is_zero() {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), Fq::ONE);
        }
        let sq = f.mul(a, a);
        let r = f.sqrt(sq).unwrap();
        prop_assert_eq!(f.mul(r, r), sq);
        let root = f.pth_root(a);
        prop_assert_eq!(f.pow(root, f.characteristic() as u64), a);
    }
}

#[test]
fn ring_invariants_are_enforced() {
    assert!(ring_create(3, 3, 3, 20, 1).is_err());
    assert!(ring_create(4, 4, 4, 20, 1).is_err());
    assert!(ring_create(3, 4, 5, 20, 1).is_err());
    assert!(ring_create(3, 4, 3, 4, 1).is_err());
    assert!(ring_create(3, 4, 3, 20, 0).is_err());
    assert!(ring_create(2, 5, 2, 20, 1).is_ok());
}
