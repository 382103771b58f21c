//! The model formula mini-language.
//!
//! ```text
//! formula := term ("+" term)*
//! term    := "1" | "A" | ident | ident "@" number
//!          | "A:" ident | "A:" ident "@" number | "X" | "A:X"
//! ```
//!
//! `1` and `A` are mandatory. A covariate term frees its main effect, `A:`
//! frees its interaction, `@c` pins the coefficient to `c`. Anything absent
//! is pinned to zero. `X` and `A:X` expand to every covariate.

use std::fmt;

use super::{CoefConstraint, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum FormulaErrorKind {
    Syntax(String),
    UnknownCovariate(String),
    DuplicateTerm(String),
    MissingIntercept,
    MissingTreatment,
    InvalidCovariateName(String),
}

/// A formula error with a zero-based character column.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct FormulaError {
    pub kind: FormulaErrorKind,
    pub position: usize,
}

impl fmt::Display for FormulaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FormulaErrorKind::Syntax(m) => write!(f, "syntax error at column {}: {m}", self.position),
            FormulaErrorKind::UnknownCovariate(n) => {
                write!(f, "unknown covariate `{n}` at column {}", self.position)
            }
            FormulaErrorKind::DuplicateTerm(t) => write!(f, "duplicate term `{t}` at column {}", self.position),
            FormulaErrorKind::MissingIntercept => f.write_str("formula must contain the intercept term `1`"),
            FormulaErrorKind::MissingTreatment => f.write_str("formula must contain the treatment term `A`"),
            FormulaErrorKind::InvalidCovariateName(n) => write!(f, "`{n}` cannot be used as a covariate name"),
        }
    }
}

fn err<T>(kind: FormulaErrorKind, position: usize) -> Result<T, FormulaError> {
    Err(FormulaError { kind, position })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Main,
    Interaction,
}

struct Cursor {
    chars: Vec<(usize, char)>,
    idx: usize,
}

impl Cursor {
    fn new(src: &str) -> Self {
        Self { chars: src.chars().enumerate().collect(), idx: 0 }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.idx += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).map(|&(_, c)| c)
    }

    fn pos(&self) -> usize {
        self.chars.get(self.idx).map_or(self.chars.len(), |&(i, _)| i)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '.' {
                s.push(c);
                self.idx += 1;
            } else {
                break;
            }
        }
        s
    }

    // [+-]? digits [. digits] [(e|E) [+-]? digits]
    fn number(&mut self) -> Result<f64, FormulaError> {
        let start = self.pos();
        let mut s = String::new();
        if let Some(c @ ('+' | '-')) = self.peek() {
            s.push(c);
            self.idx += 1;
        }
        let mut digits = 0;
        while let Some(c) = self.peek().filter(|c| c.is_ascii_digit() || *c == '.') {
            s.push(c);
            self.idx += 1;
            digits += usize::from(c != '.');
        }
        if digits == 0 {
            return err(FormulaErrorKind::Syntax("expected a number after `@`".into()), start);
        }
        if let Some(e @ ('e' | 'E')) = self.peek() {
            s.push(e);
            self.idx += 1;
            if let Some(c @ ('+' | '-')) = self.peek() {
                s.push(c);
                self.idx += 1;
            }
            while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                s.push(c);
                self.idx += 1;
            }
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => err(FormulaErrorKind::Syntax(format!("invalid number `{s}`")), start),
        }
    }
}

const RESERVED: [&str; 3] = ["1", "A", "X"];

fn validate_names(names: &[String]) -> Result<(), FormulaError> {
    for n in names {
        let ok = !n.is_empty()
            && !RESERVED.contains(&n.as_str())
            && n.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.');
        if !ok {
            return err(FormulaErrorKind::InvalidCovariateName(n.clone()), 0);
        }
    }
    Ok(())
}

/// Parses a formula over the given covariate names. Centering defaults to
/// empirical.
pub fn parse_formula(text: &str, covariate_names: &[String]) -> Result<ModelSpec, FormulaError> {
    validate_names(covariate_names)?;
    let p = covariate_names.len();
    if p == 0 {
        return err(FormulaErrorKind::Syntax("no covariates declared".into()), 0);
    }
    let mut gamma: Vec<Option<CoefConstraint>> = vec![None; p];
    let mut delta: Vec<Option<CoefConstraint>> = vec![None; p];
    let mut intercept = false;
    let mut treatment = false;

    let mut cur = Cursor::new(text);
    loop {
        cur.skip_ws();
        let term_start = cur.pos();
        if cur.peek().is_none() {
            return err(FormulaErrorKind::Syntax("expected a term".into()), term_start);
        }
        let head = cur.ident();
        if head.is_empty() {
            let found = cur.peek().map_or_else(|| "end of input".to_string(), |c| format!("`{c}`"));
            return err(FormulaErrorKind::Syntax(format!("expected a term, found {found}")), term_start);
        }
        cur.skip_ws();
        let (target, name, name_pos) = if head == "A" && cur.eat(':') {
            cur.skip_ws();
            let pos = cur.pos();
            let name = cur.ident();
            if name.is_empty() {
                return err(FormulaErrorKind::Syntax("expected a covariate after `A:`".into()), pos);
            }
            (Some(Target::Interaction), name, pos)
        } else if head == "1" || head == "A" {
            (None, head, term_start)
        } else {
            (Some(Target::Main), head, term_start)
        };
        cur.skip_ws();

        let fixed = if cur.eat('@') {
            cur.skip_ws();
            Some(cur.number()?)
        } else {
            None
        };

        match target {
            None => {
                if fixed.is_some() {
                    return err(
                        FormulaErrorKind::Syntax(format!("`{name}` cannot be fixed; intercept and treatment are always free")),
                        term_start,
                    );
                }
                let seen = if name == "1" { &mut intercept } else { &mut treatment };
                if *seen {
                    return err(FormulaErrorKind::DuplicateTerm(name), term_start);
                }
                *seen = true;
            }
            Some(t) => {
                let slots = match t {
                    Target::Main => &mut gamma,
                    Target::Interaction => &mut delta,
                };
                let term_text = |j: usize| match t {
                    Target::Main => covariate_names[j].clone(),
                    Target::Interaction => format!("A:{}", covariate_names[j]),
                };
                let indices: Vec<usize> = if name == "X" {
                    if fixed.is_some() {
                        return err(
                            FormulaErrorKind::Syntax("the `X` shorthand cannot carry a fixed value".into()),
                            term_start,
                        );
                    }
                    (0..p).collect()
                } else {
                    match covariate_names.iter().position(|c| *c == name) {
                        Some(j) => vec![j],
                        None => return err(FormulaErrorKind::UnknownCovariate(name), name_pos),
                    }
                };
                let value = fixed.map_or(CoefConstraint::Free, CoefConstraint::Fixed);
                for j in indices {
                    if slots[j].is_some() {
                        return err(FormulaErrorKind::DuplicateTerm(term_text(j)), term_start);
                    }
                    slots[j] = Some(value);
                }
            }
        }

        cur.skip_ws();
        if cur.peek().is_none() {
            break;
        }
        let pos = cur.pos();
        if !cur.eat('+') {
            let c = cur.peek().unwrap_or(' ');
            return err(FormulaErrorKind::Syntax(format!("expected `+`, found `{c}`")), pos);
        }
    }

    if !intercept {
        return err(FormulaErrorKind::MissingIntercept, 0);
    }
    if !treatment {
        return err(FormulaErrorKind::MissingTreatment, 0);
    }
    let fill = |v: Vec<Option<CoefConstraint>>| {
        v.into_iter().map(|c| c.unwrap_or(CoefConstraint::Fixed(0.0))).collect::<Vec<_>>()
    };
    ModelSpec::new(covariate_names.to_vec(), fill(gamma), fill(delta))
        .map_err(|e| FormulaError { kind: FormulaErrorKind::Syntax(e.to_string()), position: 0 })
}

pub(super) fn format_spec(spec: &ModelSpec) -> String {
    let mut terms = vec!["1".to_string(), "A".to_string()];
    let mut push = |prefix: &str, cs: &[CoefConstraint]| {
        for (name, c) in spec.covariates().iter().zip(cs) {
            match c {
                CoefConstraint::Free => terms.push(format!("{prefix}{name}")),
                CoefConstraint::Fixed(v) if *v == 0.0 => {}
                CoefConstraint::Fixed(v) => terms.push(format!("{prefix}{name}@{v}")),
            }
        }
    };
    push("", spec.gamma());
    push("A:", spec.delta());
    terms.join(" + ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_names, named_spec, Estimator};
    use proptest::prelude::*;
    use CoefConstraint::{Fixed, Free};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn anova_formula() {
        let s = parse_formula("1 + A", &names(&["X1"])).unwrap();
        assert_eq!(s.gamma(), &[Fixed(0.0)]);
        assert_eq!(s.delta(), &[Fixed(0.0)]);
    }

    #[test]
    fn shorthand_expands_to_anhecova() {
        let s = parse_formula("1 + A + X + A:X", &names(&["X1", "X2"])).unwrap();
        assert_eq!(s.gamma(), &[Free, Free]);
        assert_eq!(s.delta(), &[Free, Free]);
        assert!(s.same_constraints(&named_spec(Estimator::Anhecova, 2).unwrap()));
    }

    #[test]
    fn did_formula() {
        let s = parse_formula("1 + A + X1@1 + X2 + A:X2", &names(&["X1", "X2"])).unwrap();
        assert_eq!(s.gamma(), &[Fixed(1.0), Free]);
        assert_eq!(s.delta(), &[Fixed(0.0), Free]);
        assert!(s.same_constraints(&named_spec(Estimator::Did, 2).unwrap()));
    }

    #[test]
    fn whitespace_and_numbers() {
        let s = parse_formula("1+A+X1 @ -2.5e-1+A:X1@+3", &names(&["X1"])).unwrap();
        assert_eq!(s.gamma(), &[Fixed(-0.25)]);
        assert_eq!(s.delta(), &[Fixed(3.0)]);
        let s = parse_formula("  A +1", &names(&["X1"])).unwrap();
        assert!(s.has_no_interactions());
    }

    #[test]
    fn error_positions() {
        let e = parse_formula("1 + A + Z", &names(&["X1"])).unwrap_err();
        assert_eq!(e.kind, FormulaErrorKind::UnknownCovariate("Z".into()));
        assert_eq!(e.position, 8);

        let e = parse_formula("1 + A + A:Z", &names(&["X1"])).unwrap_err();
        assert_eq!(e.position, 10);

        let e = parse_formula("1 + A X1", &names(&["X1"])).unwrap_err();
        assert!(matches!(e.kind, FormulaErrorKind::Syntax(_)));
        assert_eq!(e.position, 6);

        let e = parse_formula("1 + A + X1@", &names(&["X1"])).unwrap_err();
        assert_eq!(e.position, 11);

        let e = parse_formula("1 + A +", &names(&["X1"])).unwrap_err();
        assert_eq!(e.position, 7);

        let e = parse_formula("1 + A + X1@abc", &names(&["X1"])).unwrap_err();
        assert_eq!(e.position, 11);
    }

    #[test]
    fn structural_errors() {
        let n = names(&["X1", "X2"]);
        assert_eq!(parse_formula("A + X1", &n).unwrap_err().kind, FormulaErrorKind::MissingIntercept);
        assert_eq!(parse_formula("1 + X1", &n).unwrap_err().kind, FormulaErrorKind::MissingTreatment);
        assert_eq!(
            parse_formula("1 + A + X1 + X1@2", &n).unwrap_err().kind,
            FormulaErrorKind::DuplicateTerm("X1".into())
        );
        assert_eq!(
            parse_formula("1 + A + X + X2", &n).unwrap_err().kind,
            FormulaErrorKind::DuplicateTerm("X2".into())
        );
        assert_eq!(
            parse_formula("1 + A + A:X1 + A:X", &n).unwrap_err().kind,
            FormulaErrorKind::DuplicateTerm("A:X1".into())
        );
        assert_eq!(parse_formula("1 + 1 + A", &n).unwrap_err().kind, FormulaErrorKind::DuplicateTerm("1".into()));
        assert!(matches!(parse_formula("1 + A@2", &n).unwrap_err().kind, FormulaErrorKind::Syntax(_)));
        assert!(matches!(parse_formula("1 + A + X@2", &n).unwrap_err().kind, FormulaErrorKind::Syntax(_)));
        assert!(matches!(
            parse_formula("1 + A", &names(&["A"])).unwrap_err().kind,
            FormulaErrorKind::InvalidCovariateName(_)
        ));
    }

    #[test]
    fn format_named_specs() {
        let s = named_spec(Estimator::Did, 2).unwrap();
        assert_eq!(s.formula(), "1 + A + X1@1 + X2 + A:X2");
        assert_eq!(named_spec(Estimator::Anova, 3).unwrap().formula(), "1 + A");
    }

    fn constraint() -> impl Strategy<Value = CoefConstraint> {
        prop_oneof![
            Just(Free),
            Just(Fixed(0.0)),
            (-1000i32..1000).prop_map(|k| Fixed(k as f64 / 8.0)),
            any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Fixed),
        ]
    }

    proptest! {
        #[test]
        fn formula_round_trip(
            cs in (1usize..5).prop_flat_map(|p| (
                proptest::collection::vec(constraint(), p),
                proptest::collection::vec(constraint(), p),
            ))
        ) {
            let (gamma, delta) = cs;
            let spec = ModelSpec::with_default_names(gamma, delta).unwrap();
            let back = parse_formula(&spec.formula(), &default_names(spec.p())).unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
