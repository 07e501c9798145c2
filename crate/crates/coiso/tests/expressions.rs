use coiso::geomcore::Chart;
use coiso::models::monopole::build_monopole;
use coiso::obs::{compile, parse, Expr, Registry};
use coiso::sampling::rng;
use coiso::{Error, ScalarField};
use proptest::prelude::*;
use rand::Rng;

fn value(src: &str) -> f64 {
    parse(src).unwrap().eval_const().unwrap()
}

#[test]
fn documented_examples() {
    assert_eq!(value("1+2*3"), 7.0);
    assert_eq!(value("sin(0)+cos(0)"), 1.0);
    assert_eq!(value("-2^2"), -4.0);
    assert_eq!(value("2^3^2"), 64.0);
    assert_eq!(value("2^-1"), 0.5);
    assert_eq!(value("8/4/2"), 1.0);
    assert_eq!(value("1-2-3"), -4.0);
    assert_eq!(value("--3"), 3.0);
    assert_eq!(value("sqrt(abs(-16)) + exp(0)"), 5.0);
    assert_eq!(value("1.5e2 - 50"), 100.0);
}

#[test]
fn syntax_errors_carry_byte_offsets() {
    let off = |s: &str| match parse(s) {
        Err(Error::Parse { offset, .. }) => offset,
        other => panic!("{s}: {other:?}"),
    };
    assert_eq!(off("1 + * 2"), 4);
    assert_eq!(off("(1 + 2"), 6);
    assert_eq!(off("1 2"), 2);
    assert_eq!(off("3 $ 4"), 2);
    assert_eq!(off("sin 3"), 0);
    assert_eq!(off(""), 0);
    assert_eq!(off("a(1,0"), 1);
}

#[test]
fn accessor_names_are_single_identifiers() {
    let e = parse("a(1,0,0,0,k=1) * 2 + J1()").unwrap();
    assert_eq!(e.variables(), vec!["a(1,0,0,0,k=1)", "J1"]);
    // Unknown identifiers survive parsing and fail only at compile time.
    assert!(parse("qqq + 1").is_ok());
}

#[test]
fn compile_against_monopole_chart() {
    let b = build_monopole(1.0, false).unwrap();
    let chart = b.structure.chart().clone();
    let casimir = compile(&parse("J1*J1+J2*J2+J3*J3").unwrap(), &chart, &b.observables).unwrap();
    for x in b.model.sample_points(20, 3) {
        let direct: f64 = (0..3).map(|k| b.model.j_value(&x, k).powi(2)).sum();
        assert!((casimir.eval(&x).unwrap() - direct).abs() < 1e-12);
    }
    match compile(&parse("J1 + qqq").unwrap(), &chart, &b.observables) {
        Err(Error::UnknownIdentifier(n)) => assert_eq!(n, "qqq"),
        other => panic!("{other:?}"),
    }
    let s1 = compile(&parse("s1").unwrap(), &chart, &b.observables).unwrap();
    let x = b.model.sample_points(1, 4).remove(0);
    assert_eq!(s1.eval(&x).unwrap(), x[chart.index_of("s1").unwrap()]);
}

#[test]
fn mu_on_enlarged_chart_and_name_clash() {
    let b = build_monopole(1.0, false).unwrap();
    let x0 = b.model.sample_points(1, 5).remove(0);
    let e = coiso::embedding::CoisotropicEmbedding::build(&b.structure, &b.connection, &x0).unwrap();
    let lifted = b.observables.lifted(&e);
    let mu = compile(&parse("mu").unwrap(), &e.enlarged, &lifted).unwrap();
    let z = e.with_mu(&x0, &[0.3]);
    assert_eq!(mu.eval(&z).unwrap(), 0.3);

    let chart = Chart::new(["x", "y"]).unwrap();
    let mut reg = Registry::new();
    reg.insert("x", ScalarField::constant(chart.clone(), 1.0)).unwrap();
    assert!(matches!(compile(&parse("x+y").unwrap(), &chart, &reg), Err(Error::Invalid(_))));
    assert!(compile(&parse("y").unwrap(), &chart, &reg).is_ok());
}

// Independent oracle: shunting-yard to RPN, then stack evaluation.
fn shunting_yard(src: &str) -> f64 {
    #[derive(Clone, Copy, PartialEq, Debug)]
    enum T {
        Num(f64),
        Bin(char),
        Neg,
        Func(u8),
        L,
        R,
    }
    let prec = |t: T| match t {
        T::Bin('+') | T::Bin('-') => 1,
        T::Bin('*') | T::Bin('/') => 2,
        T::Neg => 3,
        T::Bin('^') => 4,
        _ => 0,
    };
    let funcs = ["sin", "cos", "exp", "sqrt", "abs"];
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == ' ' {
            i += 1;
        } else if c.is_ascii_digit() {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            toks.push(T::Num(chars[s..i].iter().collect::<String>().parse().unwrap()));
        } else if c.is_ascii_alphabetic() {
            let s = i;
            while chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            let w: String = chars[s..i].iter().collect();
            toks.push(T::Func(funcs.iter().position(|f| *f == w).unwrap() as u8));
        } else {
            let prev_operand = matches!(toks.last(), Some(T::Num(_)) | Some(T::R));
            toks.push(match c {
                '(' => T::L,
                ')' => T::R,
                '-' if !prev_operand => T::Neg,
                _ => T::Bin(c),
            });
            i += 1;
        }
    }
    let mut out = Vec::new();
    let mut ops: Vec<T> = Vec::new();
    for t in toks {
        match t {
            T::Num(_) => out.push(t),
            T::Func(_) | T::L | T::Neg => ops.push(t),
            T::Bin(_) => {
                while let Some(&top) = ops.last() {
                    let pops = match top {
                        T::Bin(_) | T::Neg => prec(top) >= prec(t),
                        _ => false,
                    };
                    if !pops {
                        break;
                    }
                    out.push(ops.pop().unwrap());
                }
                ops.push(t);
            }
            T::R => {
                while let Some(top) = ops.pop() {
                    if top == T::L {
                        break;
                    }
                    out.push(top);
                }
                if let Some(T::Func(_)) = ops.last() {
                    out.push(ops.pop().unwrap());
                }
            }
        }
    }
    while let Some(t) = ops.pop() {
        out.push(t);
    }
    let mut st: Vec<f64> = Vec::new();
    for t in out {
        match t {
            T::Num(v) => st.push(v),
            T::Neg => {
                let v = st.pop().unwrap();
                st.push(-v)
            }
            T::Func(k) => {
                let v = st.pop().unwrap();
                st.push([v.sin(), v.cos(), v.exp(), v.sqrt(), v.abs()][k as usize]);
            }
            T::Bin(c) => {
                let b = st.pop().unwrap();
                let a = st.pop().unwrap();
                st.push(match c {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                });
            }
            _ => unreachable!(),
        }
    }
    st.pop().unwrap()
}

fn random_expr(g: &mut impl Rng, depth: u32) -> String {
    if depth == 0 || g.random_bool(0.25) {
        return format!("{:.3}", g.random_range(0.1..3.0));
    }
    match g.random_range(0..6) {
        0 => format!("-{}", random_expr(g, depth - 1)),
        1 => format!("({})", random_expr(g, depth - 1)),
        2 => {
            let f = ["sin", "cos", "exp", "sqrt", "abs"][g.random_range(0..5)];
            format!("{f}({})", random_expr(g, depth - 1))
        }
        3 => format!("{:.2}^{:.2}", g.random_range(0.5..2.0), g.random_range(-2.0..2.0f64).abs()),
        _ => {
            let op = ["+", "-", "*", "/", "^"][g.random_range(0..5)];
            let (a, b) = (random_expr(g, depth - 1), random_expr(g, depth - 1));
            // The oracle does not model a unary minus directly after `^`.
            if op == "^" {
                format!("{a} ^ ({b})")
            } else {
                format!("{a} {op} {b}")
            }
        }
    }
}

#[test]
fn agrees_with_shunting_yard_oracle() {
    let mut g = rng(2024);
    let mut checked = 0;
    while checked < 1000 {
        let src = random_expr(&mut g, 5);
        let want = shunting_yard(&src);
        if !want.is_finite() || want.abs() > 1e12 {
            continue;
        }
        let got = value(&src);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{src}: {got} vs {want}");
        checked += 1;
    }
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..1e6).prop_map(Expr::Num),
        prop::sample::select(vec!["x", "mu", "J1", "a(0,1,0,2,k=3)"]).prop_map(|s| Expr::Var(s.to_string())),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (prop::sample::select(coiso::obs::Builtin::ALL.to_vec()), inner.clone())
                .prop_map(|(b, e)| Expr::Call(b, Box::new(e))),
            (
                prop::sample::select(vec![
                    coiso::obs::Op::Add,
                    coiso::obs::Op::Sub,
                    coiso::obs::Op::Mul,
                    coiso::obs::Op::Div,
                    coiso::obs::Op::Pow
                ]),
                inner.clone(),
                inner
            )
                .prop_map(|(o, a, b)| Expr::Bin(o, Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_round_trip(e in arb_expr()) {
        let printed = e.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(parse(&back.to_string()).unwrap(), back);
    }
}
