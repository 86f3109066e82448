//! Printing a parsed expression and parsing it again yields the same tree.

use ergodic_cli::expr::{BinOp, Func};
use ergodic_cli::{parse_expr, Expr};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::X),
        (0u32..1000).prop_map(|n| Expr::Num(n as f64 / 8.0)),
        (1e-6f64..1e6).prop_map(Expr::Num),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        let op = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div), Just(BinOp::Pow)];
        let unary = prop_oneof![Just(Func::Exp), Just(Func::Log), Just(Func::Sqrt)];
        let binary = prop_oneof![Just(Func::Min), Just(Func::Max)];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, l, r)| Expr::Bin(o, Box::new(l), Box::new(r))),
            (unary, inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (binary, inner.clone(), inner).prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parse_print_parse(e in expr()) {
        let printed = e.to_string();
        let back = parse_expr(&printed).map_err(|err| TestCaseError::fail(format!("{printed}: {err}")))?;
        prop_assert_eq!(&back, &e, "printed as {}", printed);
        prop_assert_eq!(back.to_string(), printed);
    }

    #[test]
    fn evaluation_survives_round_trip(e in expr(), x in 0.01f64..5.0) {
        let back = parse_expr(&e.to_string()).unwrap();
        let (a, b) = (e.eval(x), back.eval(x));
        prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
    }

    #[test]
    fn garbage_reports_an_offset_inside_the_input(s in "[x0-9+*/^() .a-z-]{0,24}") {
        if let Err(err) = parse_expr(&s) {
            prop_assert!(err.offset() <= s.len());
        }
    }
}

#[test]
fn precedence_and_associativity() {
    assert_eq!(parse_expr("2^3^2").unwrap().eval(0.0), 512.0);
    assert_eq!(parse_expr("-2^2").unwrap().eval(0.0), -4.0);
    assert_eq!(parse_expr("8/4/2").unwrap().eval(0.0), 1.0);
    assert_eq!(parse_expr("1 - 2 - 3").unwrap().eval(0.0), -4.0);
    assert_eq!(parse_expr("max(x, 2*x) + min(1, x)").unwrap().eval(3.0), 7.0);
    assert_eq!(parse_expr("exp(log(x))").unwrap().to_string(), "exp(log(x))");
}
