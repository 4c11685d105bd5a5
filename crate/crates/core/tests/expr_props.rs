use proptest::prelude::*;
use srkilling_core::expr::{parse_expression, Expr};

const VARS: [&str; 3] = ["x", "y", "z"];

/// Expressions that stay finite on [-1, 1]^3.
fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(&VARS[..]).prop_map(str::to_string),
        (-5i32..=5).prop_map(|k| if k < 0 { format!("({k})") } else { k.to_string() }),
        (1i32..=7, 2i32..=5).prop_map(|(p, q)| format!("({p}/{q})")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (2 + ({b})^2))")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            (inner.clone(), 1u32..=3).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("pow(1 + ({a})^2, -1/2)")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

fn parse(s: &str) -> Expr {
    parse_expression(s, &VARS).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_central_difference(s in expr_text(), p in point(), var in 0usize..3) {
        let e = parse(&s);
        let d = e.differentiate(var).evaluate(&p).unwrap();
        let h = 1e-5;
        let mut lo = p.clone();
        lo[var] -= h;
        let mut hi = p.clone();
        hi[var] += h;
        let fd = (e.evaluate(&hi).unwrap() - e.evaluate(&lo).unwrap()) / (2.0 * h);
        let scale = 1.0f64.max(d.abs()).max(e.evaluate(&p).unwrap().abs());
        prop_assert!((d - fd).abs() <= 1e-6 * scale, "{s}: {d} vs {fd}");
    }

    #[test]
    fn differentiation_is_linear(a in expr_text(), b in expr_text(), k in -4i64..=4, p in point()) {
        let (ea, eb) = (parse(&a), parse(&b));
        let combo = &(&Expr::int(k) * &ea) + &eb;
        let lhs = combo.differentiate(0).evaluate(&p).unwrap();
        let rhs = k as f64 * ea.differentiate(0).evaluate(&p).unwrap() + eb.differentiate(0).evaluate(&p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * 1.0f64.max(lhs.abs()));
    }

    #[test]
    fn print_parse_round_trip(s in expr_text(), p in point()) {
        let e = parse(&s);
        let printed = e.display(&VARS).to_string();
        let back = parse(&printed);
        let (u, v) = (e.evaluate(&p).unwrap(), back.evaluate(&p).unwrap());
        prop_assert!((u - v).abs() <= 1e-14 * 1.0f64.max(u.abs()), "{s} -> {printed}");
        // a leading minus may re-associate once; after that printing is stable
        let twice = back.display(&VARS).to_string();
        prop_assert_eq!(parse(&twice).display(&VARS).to_string(), twice);
    }
}
