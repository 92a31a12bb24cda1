use pcover_core::dvr::{ring_create, Ring};
use pcover_core::field::{Embedding, Fq, GaloisField};
use pcover_core::poly::{MultiPoly, ResiduePoly, VarSet, Vars};
use proptest::prelude::*;

type Terms = Vec<(Vec<u32>, Vec<u32>)>;

fn ring() -> Ring {
    ring_create(3, 4, 3, 26, 1).unwrap()
}

fn build(ring: &Ring, vars: &VarSet, terms: &Terms, min_ord: usize) -> MultiPoly {
    let q = ring.field().order();
    let mut f = MultiPoly::zero(ring, vars);
    for (exps, digits) in terms {
        let e: Vec<u32> = (0..vars.len()).map(|i| exps[i % exps.len()] % 4).collect();
        let d: Vec<Fq> = (0..ring.precision())
            .map(|i| if i < min_ord { Fq::ZERO } else { Fq(digits[i % digits.len()] % q) })
            .collect();
        f.add_term(e, ring.from_digits(&d));
    }
    f
}

fn terms() -> impl Strategy<Value = Terms> {
    prop::collection::vec(
        (
            prop::collection::vec(any::<u32>(), 1..4),
            prop::collection::vec(any::<u32>(), 1..8),
        ),
        0..5,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn substitution_is_a_homomorphism(f in terms(), g in terms(), imgs in prop::collection::vec(terms(), 3)) {
        let r = ring();
        let v = Vars::model(2);
        let (f, g) = (build(&r, &v, &f, 0), build(&r, &v, &g, 0));
        let images: Vec<MultiPoly> = imgs.iter().map(|t| build(&r, &v, &t[..t.len().min(2)].to_vec(), 0)).collect();
        let sub = |h: &MultiPoly| h.substitute(&images).unwrap();
        let prec = r.precision();
        prop_assert!(sub(&f.mul(&g)).eq_at(&sub(&f).mul(&sub(&g)), prec));
        prop_assert!(sub(&f.add(&g)).eq_at(&sub(&f).add(&sub(&g)), prec));
        let identity: Vec<MultiPoly> = (0..3).map(|i| MultiPoly::var(&r, &v, i)).collect();
        prop_assert!(f.substitute(&identity).unwrap().eq_at(&f, prec));
    }

    #[test]
    fn grading_sums_back(f in terms()) {
        let r = ring();
        let v = Vars::model(2);
        let f = build(&r, &v, &f, 0);
        let parts = f.grade_in_x(&[0, 1]);
        let sum = parts.constant.add(&parts.linear).add(&parts.quadratic).add(&parts.cubic_plus);
        prop_assert!(sum.eq_at(&f, r.precision()));
        for (m, _) in parts.quadratic.terms() {
            prop_assert_eq!(m[0] + m[1], 2);
        }
        for (m, _) in parts.cubic_plus.terms() {
            prop_assert!(m[0] + m[1] >= 3);
        }
    }

    #[test]
    fn central_fiber_is_multiplicative(f in terms(), g in terms()) {
        let r = ring();
        let v = Vars::model(2);
        let (f, g) = (build(&r, &v, &f, 0), build(&r, &v, &g, 0));
        prop_assert_eq!(f.mul(&g).central_fiber(), f.central_fiber().mul(&g.central_fiber()));
        prop_assert_eq!(f.add(&g).central_fiber(), f.central_fiber().add(&g.central_fiber()));
    }

    #[test]
    fn pi_division_inverts_multiplication(f in terms(), m in 1..4usize) {
        let r = ring();
        let v = Vars::model(2);
        let f = build(&r, &v, &f, 0);
        let scaled = f.scale(&r.pi_pow(m));
        let back = scaled.div_pow_pi(m).unwrap();
        prop_assert!(back.eq_at(&f, r.precision() - m));
        if f.min_ord() == Some(0) {
            prop_assert!(f.div_pow_pi(1).is_err());
        }
    }

    #[test]
    fn relation_division_inverts_multiplication(f in terms(), e in 1..4u32) {
        let r = ring();
        let v = Vars::with_relation(["a", "u", "w"], 1, 2);
        let f = build(&r, &v, &f, 0);
        let mut mono = vec![0; 3];
        mono[1] = e;
        let ue = MultiPoly::monomial(&r, &v, r.one(), mono);
        let back = f.mul(&ue).div_var_pow(1, e).unwrap();
        prop_assert!(back.eq_at(&f, r.precision() - e as usize));
        // normal form: no monomial contains both related variables
        for (m, _) in f.mul(&ue).terms() {
            prop_assert!(m[1] == 0 || m[2] == 0);
        }
    }

    #[test]
    fn relation_products_associate(f in terms(), g in terms(), h in terms()) {
        let r = ring();
        let v = Vars::with_relation(["a", "u", "w"], 1, 2);
        let (f, g, h) = (build(&r, &v, &f, 0), build(&r, &v, &g, 0), build(&r, &v, &h, 0));
        prop_assert!(f.mul(&g).mul(&h).eq_at(&f.mul(&g.mul(&h)), r.precision()));
    }

    #[test]
    fn text_round_trip(f in terms()) {
        let r = ring();
        let v = Vars::model(2);
        let f = build(&r, &v, &f, 0);
        prop_assert_eq!(MultiPoly::parse(&r, &v, &f.format()).unwrap(), f.clone());
        let cf = f.central_fiber();
        prop_assert_eq!(ResiduePoly::parse(r.field(), &v, &cf.format()).unwrap(), cf);
    }

    #[test]
    fn jacobian_matches_dual_numbers(
        coeffs in prop::collection::vec((any::<u32>(), 0..4u32, 0..4u32, 0..4u32), 0..8),
        point in prop::collection::vec(any::<u32>(), 3),
    ) {
        let field = GaloisField::with_order(9).unwrap();
        let v = Vars::model(2);
        let q = field.order();
        let f = ResiduePoly::from_terms(
            &field,
            &v,
            coeffs.iter().map(|&(c, a, b, d)| (vec![a, b, d], Fq(c % q))),
        );
        let pt: Vec<Fq> = point.iter().map(|&c| Fq(c % q)).collect();
        let emb = Embedding::identity(&field);
        let jac = f.jacobian();
        for i in 0..3 {
            prop_assert_eq!(jac[i].eval(&field, &emb, &pt), dual_derivative(&field, &f, &pt, i));
        }
    }
}

/// Coefficient of `eps` in `f(pt + eps e_i)` over `F[eps]/(eps^2)`.
fn dual_derivative(field: &GaloisField, f: &ResiduePoly, pt: &[Fq], i: usize) -> Fq {
    let mul = |(a, b): (Fq, Fq), (c, d): (Fq, Fq)| {
        (field.mul(a, c), field.add(field.mul(a, d), field.mul(b, c)))
    };
    let mut total = (Fq::ZERO, Fq::ZERO);
    for (m, &c) in f.terms() {
        let mut t = (c, Fq::ZERO);
        for (j, &e) in m.iter().enumerate() {
            let x = (pt[j], if j == i { Fq::ONE } else { Fq::ZERO });
            for _ in 0..e {
                t = mul(t, x);
            }
        }
        total = (field.add(total.0, t.0), field.add(total.1, t.1));
    }
    total.1
}
