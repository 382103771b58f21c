//! Sufficient conditions for uniform variance dominance between two members
//! of the estimator class.
//!
//! A `NotGuaranteed` verdict means the pair is not certified by the nesting
//! conditions, not that dominance fails.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{named_spec, parse_formula, CoefConstraint, Estimator, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Dominates,
    NotGuaranteed,
    EqualVariance,
}

/// Which clause certified the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    Theorem1PiHalf,
    Theorem1InteractionSuperset,
    Theorem2,
    Remark1,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenteringMode {
    KnownMean,
    Empirical,
}

/// Which subconditions held for the ordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    /// Γ₁ ⊇ Γ₂ elementwise.
    pub gamma_nested: bool,
    /// Δ₁ ⊇ Δ₂ elementwise.
    pub delta_nested: bool,
    pub pi_half: bool,
    /// 𝒰(Δ₁) ⊇ 𝒰(Γ₁)
    pub interactions_cover_mains: bool,
    /// 𝒰(Γ₁) = 𝒰(Δ₁)
    pub free_sets_equal: bool,
    /// Γ₁ = Γ₂
    pub gamma_equal: bool,
}

impl Explanation {
    fn of(s1: &ModelSpec, s2: &ModelSpec, pi: f64) -> Self {
        let ug = s1.unrestricted_gamma();
        let ud = s1.unrestricted_delta();
        Explanation {
            gamma_nested: contains_all(s1.gamma(), s2.gamma()),
            delta_nested: contains_all(s1.delta(), s2.delta()),
            pi_half: pi == 0.5,
            interactions_cover_mains: ug.iter().all(|j| ud.contains(j)),
            free_sets_equal: ug == ud,
            gamma_equal: s1.gamma() == s2.gamma(),
        }
    }

    pub fn summary(&self) -> String {
        let mark = |b: bool| if b { "holds" } else { "fails" };
        format!(
            "Γ₁ ⊇ Γ₂ {}; Δ₁ ⊇ Δ₂ {}; π = 1/2 {}; 𝒰(Δ₁) ⊇ 𝒰(Γ₁) {}; 𝒰(Γ₁) = 𝒰(Δ₁) {}; Γ₁ = Γ₂ {}",
            mark(self.gamma_nested),
            mark(self.delta_nested),
            mark(self.pi_half),
            mark(self.interactions_cover_mains),
            mark(self.free_sets_equal),
            mark(self.gamma_equal),
        )
    }
}

fn contains_all(a: &[CoefConstraint], b: &[CoefConstraint]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.contains(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub verdict: Verdict,
    pub theorem: Clause,
    pub centering: CenteringMode,
    pub explanation: Explanation,
}

impl DominanceVerdict {
    /// Dominates or EqualVariance.
    pub fn is_certified(&self) -> bool {
        self.verdict != Verdict::NotGuaranteed
    }
}

impl fmt::Display for DominanceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} ({:?}): {}", self.verdict, self.theorem, self.explanation.summary())
    }
}

fn precheck(s1: &ModelSpec, s2: &ModelSpec, pi: f64) -> Result<()> {
    if s1.p() != s2.p() {
        return Err(Error::DimensionMismatch(format!("specs have {} and {} covariates", s1.p(), s2.p())));
    }
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidPi(pi));
    }
    if s1.same_constraints(s2) {
        return Err(Error::IdenticalSpecs);
    }
    Ok(())
}

/// Known-mean centring: Γ₁ ⊇ Γ₂, Δ₁ ⊇ Δ₂, and either π = 1/2 or
/// 𝒰(Δ₁) ⊇ 𝒰(Γ₁).
pub fn check_known_mean(spec1: &ModelSpec, spec2: &ModelSpec, pi: f64) -> Result<DominanceVerdict> {
    precheck(spec1, spec2, pi)?;
    let e = Explanation::of(spec1, spec2, pi);
    let nested = e.gamma_nested && e.delta_nested;
    let theorem = if !nested {
        Clause::None
    } else if e.interactions_cover_mains {
        Clause::Theorem1InteractionSuperset
    } else if e.pi_half {
        Clause::Theorem1PiHalf
    } else {
        Clause::None
    };
    let verdict = if theorem == Clause::None { Verdict::NotGuaranteed } else { Verdict::Dominates };
    Ok(DominanceVerdict { verdict, theorem, centering: CenteringMode::KnownMean, explanation: e })
}

/// Empirical centring: Γ₁ ⊇ Γ₂, Δ₁ ⊇ Δ₂, and 𝒰(Γ₁) = 𝒰(Δ₁). When in
/// addition Γ₁ = Γ₂ and π = 1/2 the variances coincide; this is reported in
/// either order of the pair.
pub fn check_centered(spec1: &ModelSpec, spec2: &ModelSpec, pi: f64) -> Result<DominanceVerdict> {
    precheck(spec1, spec2, pi)?;
    let e = Explanation::of(spec1, spec2, pi);
    let forward = e.gamma_nested && e.delta_nested && e.free_sets_equal;
    let backward = {
        let r = Explanation::of(spec2, spec1, pi);
        r.gamma_nested && r.delta_nested && r.free_sets_equal
    };
    let (verdict, theorem) = if (forward || backward) && e.gamma_equal && e.pi_half {
        (Verdict::EqualVariance, Clause::Remark1)
    } else if forward {
        (Verdict::Dominates, Clause::Theorem2)
    } else {
        (Verdict::NotGuaranteed, Clause::None)
    };
    Ok(DominanceVerdict { verdict, theorem, centering: CenteringMode::Empirical, explanation: e })
}

pub fn check(spec1: &ModelSpec, spec2: &ModelSpec, pi: f64, mode: CenteringMode) -> Result<DominanceVerdict> {
    match mode {
        CenteringMode::KnownMean => check_known_mean(spec1, spec2, pi),
        CenteringMode::Empirical => check_centered(spec1, spec2, pi),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub model1: String,
    pub model2: String,
    pub known_mean: DominanceVerdict,
    pub centered: DominanceVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Report {
    pub p: usize,
    pub pi: f64,
    pub rows: Vec<Table1Row>,
}

const TABLE1_PAIRS: [(&str, &str); 5] = [
    ("1 + A + X + A:X", "1 + A"),
    ("1 + A + X + A:X", "1 + A + X"),
    ("1 + A + X + A:X", "1 + A + A:X"),
    ("1 + A + X", "1 + A"),
    ("1 + A + A:X", "1 + A"),
];

/// Verdicts for the five reference comparisons under both centring modes.
pub fn table1(p: usize, pi: f64) -> Result<Table1Report> {
    if p == 0 {
        return Err(Error::InvalidData("p must be at least 1".into()));
    }
    let names = crate::model::default_names(p);
    let rows = TABLE1_PAIRS
        .iter()
        .map(|(f1, f2)| {
            let s1 = parse_formula(f1, &names)?;
            let s2 = parse_formula(f2, &names)?;
            Ok(Table1Row {
                model1: f1.to_string(),
                model2: f2.to_string(),
                known_mean: check_known_mean(&s1, &s2, pi)?,
                centered: check_centered(&s1, &s2, pi)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1Report { p, pi, rows })
}

fn verdict_cell(v: &DominanceVerdict) -> String {
    match v.theorem {
        Clause::None => format!("{:?}", v.verdict),
        t => format!("{:?} [{}]", v.verdict, serde_json::to_value(t).unwrap().as_str().unwrap()),
    }
}

impl Table1Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_text(&self) -> String {
        let header = ["Model 1", "Model 2", "V1 <= V2 (known mean)", "V~1 <= V~2 (centred)"];
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [format!("~ {}", r.model1), format!("~ {}", r.model2), verdict_cell(&r.known_mean), verdict_cell(&r.centered)]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = format!("p = {}, pi = {}\n", self.p, self.pi);
        out.push_str(&line(&header.map(String::from)));
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 6));
        out.push('\n');
        for row in &body {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorollaryCheck {
    pub claim: String,
    pub model1: String,
    pub model2: String,
    pub verdict: DominanceVerdict,
    /// Whether the implemented conditions certify the claim.
    pub certified: bool,
}

/// Centred-mode verdicts behind the two corollaries: ANHECOVA against ANOVA
/// and ANCOVA, and LDV against DiD (with the baseline outcome as the first
/// of two covariates).
pub fn corollaries(pi: f64) -> Result<Vec<CorollaryCheck>> {
    let pairs = [
        ("ANHECOVA is more efficient than ANOVA", Estimator::Anhecova, Estimator::Anova),
        ("ANHECOVA is more efficient than ANCOVA", Estimator::Anhecova, Estimator::Ancova),
        ("LDV is more efficient than DiD", Estimator::Ldv, Estimator::Did),
    ];
    pairs
        .iter()
        .map(|&(claim, e1, e2)| {
            let (s1, s2) = (named_spec(e1, 2)?, named_spec(e2, 2)?);
            let verdict = check_centered(&s1, &s2, pi)?;
            Ok(CorollaryCheck {
                claim: claim.to_string(),
                model1: format!("{} ({})", e1.name(), s1.formula()),
                model2: format!("{} ({})", e2.name(), s2.formula()),
                certified: verdict.is_certified(),
                verdict,
            })
        })
        .collect()
}
