//! Line-oriented text format for Euclidean Markov systems.
//!
//! ```text
//! system example2            # header
//! dim 2
//! metric l1                  # l1 | l2 | linf
//! vertices 2
//! vertexset 1 = y >= 1
//! vertexset 2 = y <= -1
//! representative 1 = (0, 1)
//! representative 2 = (0, -1)
//! edge e1 : 1 -> 2 map (-x/2 - 1, -3/2*y + 1/2) prob (1/15)*sin(norm1(x,y))^2 + 53/105
//! delta 3/7
//! rate 209/210
//! ```
//!
//! Variables are `x1…xd`, with aliases `x`, `y`, `z` when `d ≤ 3`.
//! A single-vertex system may omit its `vertexset`, meaning the whole space.

mod expr;
mod parser;

use std::fmt;

pub use expr::{BinOp, CmpOp, Expr, Func, Predicate};
pub use parser::{parse_expr, parse_system};

use crate::error::Result;
use crate::space::MetricSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub source: usize,
    pub target: usize,
    pub map: Vec<Expr>,
    pub prob: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub dim: usize,
    pub metric: MetricSpec,
    pub vertex_count: usize,
    /// `None` only for a single vertex covering the whole space.
    pub vertex_sets: Vec<Option<Predicate>>,
    pub representatives: Vec<Vec<f64>>,
    pub edges: Vec<EdgeSpec>,
    pub delta: f64,
    pub rate: Option<f64>,
}

pub fn eval_expr(e: &Expr, p: &[f64]) -> Result<f64> {
    e.eval(p)
}

/// Canonical form: one declaration per line in a fixed order.
impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.name)?;
        writeln!(f, "dim {}", self.dim)?;
        writeln!(f, "metric {}", self.metric)?;
        writeln!(f, "vertices {}", self.vertex_count)?;
        for (k, p) in self.vertex_sets.iter().enumerate() {
            if let Some(p) = p {
                writeln!(f, "vertexset {} = {p}", k + 1)?;
            }
        }
        for (k, r) in self.representatives.iter().enumerate() {
            let coords: Vec<String> = r.iter().map(|v| fmt_const(*v)).collect();
            writeln!(f, "representative {} = ({})", k + 1, coords.join(", "))?;
        }
        for e in &self.edges {
            let map: Vec<String> = e.map.iter().map(ToString::to_string).collect();
            writeln!(
                f,
                "edge {} : {} -> {} map ({}) prob {}",
                e.id,
                e.source,
                e.target,
                map.join(", "),
                e.prob
            )?;
        }
        writeln!(f, "delta {}", fmt_const(self.delta))?;
        if let Some(a) = self.rate {
            writeln!(f, "rate {}", fmt_const(a))?;
        }
        Ok(())
    }
}

fn fmt_const(v: f64) -> String {
    if v < 0.0 {
        format!("-{}", -v)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    const EXAMPLE2: &str = include_str!("../../systems/example2.cms");
    const EXAMPLE_R1: &str = include_str!("../../systems/example_r1.cms");

    #[test]
    fn parses_example2() {
        let spec = parse_system(EXAMPLE2).unwrap();
        assert_eq!(spec.vertex_count, 2);
        assert_eq!(spec.edges.len(), 4);
        assert_eq!(spec.metric, MetricSpec::L1);
        assert_eq!(spec.rate, Some(209.0 / 210.0));
        assert_eq!(spec.delta, 3.0 / 7.0);
    }

    #[test]
    fn missing_delta_is_semantic() {
        let text = EXAMPLE2
            .lines()
            .filter(|l| !l.starts_with("delta"))
            .collect::<Vec<_>>()
            .join("\n");
        assert!(matches!(parse_system(&text), Err(Error::Semantic(m)) if m.contains("delta")));
    }

    #[test]
    fn edge_source_out_of_range() {
        let text = format!("{EXAMPLE2}\nedge e5 : 3 -> 1 map (x, y) prob 1\n");
        assert!(matches!(parse_system(&text), Err(Error::Semantic(_))));
    }

    #[test]
    fn representative_outside_predicate() {
        let text = EXAMPLE2.replace("representative 1 = (0, 1)", "representative 1 = (0, 0)");
        assert!(matches!(parse_system(&text), Err(Error::Semantic(m)) if m.contains("outside")));
    }

    #[test]
    fn non_surjective_source() {
        let text = "system s\ndim 1\nmetric l1\nvertices 2\nvertexset 1 = x >= 0\n\
                    vertexset 2 = x < 0\nrepresentative 1 = (1)\nrepresentative 2 = (-1)\n\
                    edge a : 1 -> 1 map (x/2) prob 1\ndelta 0.5\n";
        assert!(matches!(parse_system(text), Err(Error::Semantic(m)) if m.contains("surjective")));
    }

    #[test]
    fn unknown_variable_and_dimension() {
        let text = EXAMPLE_R1.replace("map (x/2)", "map (y/2)");
        assert!(matches!(parse_system(&text), Err(Error::Semantic(_))));
        let text = EXAMPLE_R1.replace("map (x/2)", "map (w/2)");
        assert!(matches!(parse_system(&text), Err(Error::Semantic(m)) if m.contains("unknown variable")));
        let text = EXAMPLE_R1.replace("map (x/2)", "map (x/2, x)");
        assert!(matches!(parse_system(&text), Err(Error::Semantic(_))));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text = EXAMPLE_R1.replace("map (x/2)", "map (x/)");
        match parse_system(&text) {
            Err(Error::Syntax { line, column, .. }) => {
                let expected_line = EXAMPLE_R1.lines().position(|l| l.contains("map (x/2)")).unwrap() + 1;
                assert_eq!(line, expected_line);
                assert!(column > 1);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(matches!(parse_system("dim 2"), Err(Error::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_system(&EXAMPLE_R1.replace("^2", "^x")),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_system(&EXAMPLE_R1.replace("^2", "^1.5")),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn eval_examples() {
        let e = parse_expr("(1/15)*sin(norm1(x,y))^2 + 53/105", 2).unwrap();
        let s1 = 1f64.sin();
        let v = eval_expr(&e, &[0.0, 1.0]).unwrap();
        assert_eq!(v, (1.0 / 15.0) * (s1 * s1) + 53.0 / 105.0);
        assert!((v - 0.551967).abs() < 1e-6);

        let e = parse_expr("abs(x)", 1).unwrap();
        assert_eq!(eval_expr(&e, &[-2.0]).unwrap(), 2.0);

        let e = parse_expr("(1/6)*sin(x)^2 + 17/24", 1).unwrap();
        assert_eq!(eval_expr(&e, &[0.0]).unwrap(), 17.0 / 24.0);
    }

    #[test]
    fn eval_functions() {
        let e = parse_expr("min(x1, x2, 3) + max(x1, x2) + norm2(x1, x2) + exp(0) - x1^0", 2).unwrap();
        assert_eq!(eval_expr(&e, &[3.0, 4.0]).unwrap(), 3.0 + 4.0 + 5.0 + 1.0 - 1.0);
        let e = parse_expr("-x^2", 1).unwrap();
        assert_eq!(eval_expr(&e, &[3.0]).unwrap(), -9.0);
        let e = parse_expr("2^3^", 1);
        assert!(e.is_err());
    }

    #[test]
    fn log_domain() {
        let e = parse_expr("log(x)", 1).unwrap();
        assert!(matches!(eval_expr(&e, &[0.0]), Err(Error::Domain(_))));
        assert!(matches!(eval_expr(&e, &[-1.0]), Err(Error::Domain(_))));
        assert_eq!(eval_expr(&e, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn rationals_are_one_division() {
        let e = parse_expr("53/105", 1).unwrap();
        assert_eq!(e, Expr::Bin(BinOp::Div, Box::new(Expr::Num(53.0)), Box::new(Expr::Num(105.0))));
        assert_eq!(eval_expr(&e, &[0.0]).unwrap(), 53.0 / 105.0);
    }

    #[test]
    fn canonical_printer_round_trips_bundled_files() {
        for text in [EXAMPLE2, EXAMPLE_R1] {
            let spec = parse_system(text).unwrap();
            let again = parse_system(&spec.to_string()).unwrap();
            assert_eq!(spec, again);
            assert_eq!(spec.to_string(), again.to_string());
        }
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|n| n.to_string()),
            (0u32..1000, 1u32..50).prop_map(|(a, b)| format!("{a}/{b}")),
            (0.0f64..100.0).prop_map(|v| format!("{v}")),
            Just("x".to_string()),
            Just("y".to_string()),
            Just("x2".to_string()),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} + {b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} - {b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}*{b}")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/({b})")),
                inner.clone().prop_map(|a| format!("-({a})")),
                (inner.clone(), 0u32..4).prop_map(|(a, n)| format!("({a})^{n}")),
                inner.clone().prop_map(|a| format!("sin({a})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("max({a}, {b})")),
                (inner.clone(), inner).prop_map(|(a, b)| format!("norm1({a}, {b})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_is_stable(src in arb_expr(), px in -5.0f64..5.0, py in -5.0f64..5.0) {
            let e = parse_expr(&src, 2).unwrap();
            let printed = e.to_string();
            let again = parse_expr(&printed, 2).unwrap();
            prop_assert_eq!(&e, &again);
            // identical inputs, bit-identical outputs
            let a = eval_expr(&e, &[px, py]).unwrap();
            let b = eval_expr(&again, &[px, py]).unwrap();
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
}
