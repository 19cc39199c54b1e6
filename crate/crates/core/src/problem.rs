//! JSON problem documents.
//!
//! ```json
//! { "n": 2,
//!   "coefficients": "zero",
//!   "conditions": [ {"terms": [{"end": 0, "order": 0, "re": 1, "im": 0}]},
//!                   {"terms": [{"end": 1, "order": 0, "re": 1, "im": 0}]} ] }
//! ```
//!
//! `coefficients` is `"zero"`, a list of sample grids `[[x, re, im], ...]`
//! (one per `p_k`), or `{"poly": [[[re, im], ...], ...]}` with monomial
//! coefficients lowest degree first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::complex::Cx;
use crate::error::{Error, Result};
use crate::model::{normalize_conditions, BoundaryConditionSet, Coefficient, DifferentialExpression, RawCondition};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    #[serde(default = "zero_coefficients")]
    pub coefficients: Value,
    pub conditions: Vec<RawCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

fn zero_coefficients() -> Value {
    Value::String("zero".into())
}

/// A parsed, validated problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: Option<String>,
    pub expr: DifferentialExpression,
    pub raw: Vec<RawCondition>,
    pub document: ProblemDocument,
}

impl Problem {
    pub fn conditions(&self) -> Result<BoundaryConditionSet> {
        normalize_conditions(self.expr.order(), &self.raw)
    }
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    let doc: ProblemDocument = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    problem_from_document(doc)
}

pub fn problem_from_document(doc: ProblemDocument) -> Result<Problem> {
    let n = doc.n;
    if n < 2 {
        return Err(Error::invalid("n", format!("order must be at least 2, got {n}")));
    }
    let coefficients = parse_coefficients(n, &doc.coefficients)?;
    let expr = DifferentialExpression::new(n, coefficients)?;
    if doc.conditions.len() != n {
        return Err(Error::invalid(
            "conditions",
            format!("expected {n} conditions, got {}", doc.conditions.len()),
        ));
    }
    for (r, cond) in doc.conditions.iter().enumerate() {
        cond.row(n).map_err(|e| match e {
            Error::Invalid { location, message } => Error::invalid(format!("conditions[{r}].{location}"), message),
            other => other,
        })?;
    }
    Ok(Problem {
        name: doc.name.clone(),
        expr,
        raw: doc.conditions.clone(),
        document: doc,
    })
}

fn parse_coefficients(n: usize, value: &Value) -> Result<Vec<Coefficient>> {
    let count = n - 1;
    match value {
        Value::String(s) if s == "zero" => Ok(vec![Coefficient::Zero; count]),
        Value::Array(grids) => {
            check_count(grids.len(), count)?;
            grids
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let loc = format!("coefficients[{k}]");
                    let samples = g.as_array().ok_or_else(|| Error::invalid(&loc, "grid must be a list of [x, re, im]"))?;
                    let mut xs = Vec::with_capacity(samples.len());
                    let mut vals = Vec::with_capacity(samples.len());
                    for (i, s) in samples.iter().enumerate() {
                        let triple = s
                            .as_array()
                            .filter(|a| a.len() == 3)
                            .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?, a[2].as_f64()?)))
                            .ok_or_else(|| Error::invalid(format!("{loc}[{i}]"), "sample must be [x, re, im]"))?;
                        xs.push(triple.0);
                        vals.push(Complex64::new(triple.1, triple.2));
                    }
                    if xs.is_empty() {
                        return Ok(Coefficient::Zero);
                    }
                    Coefficient::grid(xs, vals).map_err(|_| Error::invalid(&loc, "grid abscissae must be strictly increasing"))
                })
                .collect()
        }
        Value::Object(map) => {
            if map.len() != 1 || !map.contains_key("poly") {
                return Err(Error::invalid("coefficients", "object form must be {\"poly\": [...]}"));
            }
            let polys = map["poly"]
                .as_array()
                .ok_or_else(|| Error::invalid("coefficients.poly", "expected a list of coefficient lists"))?;
            check_count(polys.len(), count)?;
            polys
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let loc = format!("coefficients.poly[{k}]");
                    let cs: Vec<Cx> = serde_json::from_value(p.clone()).map_err(|e| Error::invalid(&loc, e.to_string()))?;
                    Ok(Coefficient::Poly(cs.into_iter().map(|c| c.0).collect()))
                })
                .collect()
        }
        _ => Err(Error::invalid("coefficients", "expected \"zero\", a list of grids, or {\"poly\": ...}")),
    }
}

fn check_count(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::invalid(
            "coefficients",
            format!("expected {want} coefficient functions p_0..p_{}, got {got}", want - 1),
        ));
    }
    Ok(())
}

/// Document for an essential problem with the given conditions.
pub fn essential_document(n: usize, conditions: Vec<RawCondition>) -> ProblemDocument {
    ProblemDocument {
        name: None,
        n,
        coefficients: zero_coefficients(),
        conditions,
        meta: None,
    }
}

/// Document whose coefficients are polynomials.
pub fn polynomial_document(n: usize, polys: &[Vec<Complex64>], conditions: Vec<RawCondition>) -> ProblemDocument {
    let list: Vec<Vec<Cx>> = polys.iter().map(|p| p.iter().map(|&c| Cx(c)).collect()).collect();
    ProblemDocument {
        name: None,
        n,
        coefficients: serde_json::json!({ "poly": list }),
        conditions,
        meta: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIRICHLET: &str = r#"{"n": 2, "coefficients": "zero", "conditions": [
        {"terms": [{"end": 0, "order": 0, "re": 1, "im": 0}]},
        {"terms": [{"end": 1, "order": 0, "re": 1, "im": 0}]}]}"#;

    #[test]
    fn dirichlet_document() {
        let p = parse_problem(DIRICHLET).unwrap();
        assert_eq!(p.expr.order(), 2);
        assert_eq!(p.raw.len(), 2);
        assert_eq!(p.raw[0].terms[0].order, 0);
        assert_eq!(p.raw[1].terms[0].end, 1);
        assert!(p.expr.is_essential());
    }

    #[test]
    fn order_too_large() {
        let text = DIRICHLET.replacen(r#""order": 0"#, r#""order": 2"#, 1);
        let err = parse_problem(&text).unwrap_err().to_string();
        assert!(err.contains("order exceeds n−1"));
        assert!(err.contains("conditions[0].terms[0].order"));
    }

    #[test]
    fn grid_coefficient() {
        let grid: Vec<String> = (0..11).map(|i| format!("[{}, {}, 0]", i as f64 / 10.0, i * i)).collect();
        let text = DIRICHLET.replace(r#""zero""#, &format!("[[{}]]", grid.join(",")));
        let p = parse_problem(&text).unwrap();
        assert!((p.expr.coefficient(0).eval(0.05) - 0.5).norm() < 1e-15);
    }

    #[test]
    fn poly_coefficient() {
        let text = DIRICHLET.replace(r#""zero""#, r#"{"poly": [[[1, 0], [0, 2]]]}"#);
        let p = parse_problem(&text).unwrap();
        assert!((p.expr.coefficient(0).eval(0.5) - Complex64::new(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse_problem("{"), Err(Error::Malformed(_))));
        assert!(matches!(parse_problem(r#"{"n": 2, "n": 3, "conditions": []}"#), Err(Error::Malformed(m)) if m.contains("duplicate field")));
        assert!(parse_problem(r#"{"n": 1, "conditions": []}"#).unwrap_err().to_string().contains("at least 2"));
        let wrong = DIRICHLET.replace(r#""zero""#, "[[], []]");
        assert!(parse_problem(&wrong).unwrap_err().to_string().contains("expected 1 coefficient"));
        assert!(parse_problem(&DIRICHLET.replace("\"n\"", "\"bogus\": 0, \"n\"")).is_err());
    }

    #[test]
    fn document_round_trip() {
        let p = parse_problem(DIRICHLET).unwrap();
        let text = serde_json::to_string(&p.document).unwrap();
        let q = parse_problem(&text).unwrap();
        assert_eq!(q.raw, p.raw);
    }
}
