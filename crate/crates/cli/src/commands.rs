use std::fmt::Write as _;

use regadj::dominance::{self, CenteringMode};
use regadj::estimate::{fit_ols_with, known_pi_variance, FitOptions, HcKind};
use regadj::model::{default_names, Coef};
use regadj::population::{
    asymptotic_variance_centered, asymptotic_variance_known_mean, variance_gap_theorem2, PopulationValue,
};
use regadj::sim::{figure1_models, run_grid, DidLdvConfig, ModelEntry, FIGURE1_PIS};
use regadj::{
    fit_poisson_glm, fit_weighted, named_spec, parse_formula, Centering, Estimator, FitResult, ModelSpec,
    MonteCarloReport, PopulationSpec, Scenario,
};
use serde_json::json;

use crate::args::{CenteringArg, CenteringOpts, CheckArgs, CompareArgs, EstimateArgs, Family, Format, Hc, SimulateArgs, Table1Args};
use crate::input::read_csv;
use crate::CliError;

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialises");
    s.push('\n');
    s
}

fn text_or_json(format: Option<Format>, command: &str) -> Result<bool, CliError> {
    match format.unwrap_or(Format::Text) {
        Format::Text => Ok(false),
        Format::Json => Ok(true),
        Format::Csv => Err(input(format!("--format csv is not available for `{command}`"))),
    }
}

fn parse_model(flag: &str, text: &str, names: &[String]) -> Result<ModelSpec, CliError> {
    parse_formula(text, names).map_err(|e| input(format!("{flag} `{text}`: {e}")))
}

fn apply_centering(spec: ModelSpec, opts: &CenteringOpts) -> Result<ModelSpec, CliError> {
    match opts.centering {
        CenteringArg::Empirical if !opts.mu.is_empty() => Err(input("--mu needs --centering known-mean")),
        CenteringArg::Empirical => Ok(spec),
        CenteringArg::KnownMean if opts.mu.is_empty() => Err(input("--centering known-mean needs --mu")),
        CenteringArg::KnownMean => Ok(spec.with_centering(Centering::KnownMean(opts.mu.clone()))?),
    }
}

fn mode(c: CenteringArg) -> CenteringMode {
    match c {
        CenteringArg::KnownMean => CenteringMode::KnownMean,
        CenteringArg::Empirical => CenteringMode::Empirical,
    }
}

fn centering_name(spec: &ModelSpec) -> &'static str {
    match spec.centering() {
        Centering::KnownMean(_) => "known-mean",
        Centering::Empirical => "empirical",
    }
}

struct CoefRow {
    term: String,
    estimate: f64,
    se: Option<f64>,
}

fn coefficient_rows(fit: &FitResult) -> Vec<CoefRow> {
    let spec = &fit.spec;
    let names = spec.covariates();
    let p = spec.p();
    let t = &fit.theta_hat;
    let all = [Coef::Intercept, Coef::Treatment]
        .into_iter()
        .chain((0..p).map(Coef::Main))
        .chain((0..p).map(Coef::Interaction));
    all.map(|c| {
        let estimate = match c {
            Coef::Intercept => t.alpha,
            Coef::Treatment => t.beta,
            Coef::Main(j) => t.gamma[j],
            Coef::Interaction(j) => t.delta[j],
        };
        let se = fit.columns.iter().position(|k| *k == c).map(|i| fit.vcov[(i, i)].max(0.0).sqrt());
        CoefRow { term: c.label(names), estimate, se }
    })
    .filter(|r| r.se.is_some() || r.estimate != 0.0)
    .collect()
}

pub fn estimate(a: &EstimateArgs, format: Option<Format>) -> Result<String, CliError> {
    let json = text_or_json(format, "estimate")?;
    let table = read_csv(&a.data)?;
    let data = &table.data;
    let spec = apply_centering(parse_model("--model", &a.model, &table.covariates)?, &a.centering)?;
    let weighted = data.weights().is_some();
    if a.hc == Hc::Hc1 && (weighted || a.family == Family::Poisson) {
        return Err(input("--hc hc1 is only available for unweighted least squares"));
    }
    let fit = match (a.family, weighted) {
        (Family::Poisson, _) => fit_poisson_glm(&spec, data)?,
        (Family::Gaussian, true) => fit_weighted(&spec, data)?,
        (Family::Gaussian, false) => {
            let hc = match a.hc {
                Hc::Hc0 => HcKind::HC0,
                Hc::Hc1 => HcKind::HC1,
            };
            fit_ols_with(&spec, data, FitOptions { hc })?
        }
    };

    let (n0, n1) = data.arm_counts();
    let n = data.n();
    let pi = if a.estimate_pi {
        let p = n1 as f64 / n as f64;
        eprintln!("warning: using the sample treated fraction {p:.6} as the assignment probability");
        Some(p)
    } else {
        a.pi
    };
    if pi.is_some() && a.family == Family::Poisson {
        return Err(input("the known-π variance is defined for least-squares fits only"));
    }
    let known = match pi {
        Some(pi) => {
            let v = known_pi_variance(&fit, data, pi)?;
            Some((pi, v, (v / n as f64).sqrt()))
        }
        None => None,
    };
    let rows = coefficient_rows(&fit);
    let method = match (a.family, weighted) {
        (Family::Poisson, _) => "poisson-glm",
        (Family::Gaussian, true) => "weighted-ols",
        (Family::Gaussian, false) => "ols",
    };

    if json {
        let coefficients: Vec<_> = rows
            .iter()
            .map(|r| json!({"term": r.term, "estimate": r.estimate, "se": r.se, "fixed": r.se.is_none()}))
            .collect();
        return Ok(pretty(&json!({
            "model": fit.spec.formula(),
            "method": method,
            "centering": centering_name(&fit.spec),
            "n": n,
            "n_treated": n1,
            "n_control": n0,
            "ate_hat": fit.ate_hat,
            "ate_se": fit.ate_se,
            "converged": fit.converged,
            "coefficients": coefficients,
            "known_pi": known.map(|(pi, v, se)| json!({"pi": pi, "variance": v, "se": se})),
        })));
    }

    let mut out = String::new();
    let _ = writeln!(out, "model      {}", fit.spec.formula());
    let _ = writeln!(out, "method     {method} ({})", if a.hc == Hc::Hc1 { "HC1" } else { "HC0" });
    let _ = writeln!(out, "centering  {}", centering_name(&fit.spec));
    let _ = writeln!(out, "n          {n} (treated {n1}, control {n0})");
    let _ = writeln!(out, "ate_hat    {:.6}", fit.ate_hat);
    let _ = writeln!(out, "ate_se     {:.6}", fit.ate_se);
    if let Some((pi, _, se)) = known {
        let _ = writeln!(out, "known-pi   pi {pi:.6}, se {se:.6}");
    }
    let _ = writeln!(out);
    let width = rows.iter().map(|r| r.term.len()).max().unwrap_or(4).max(4);
    let _ = writeln!(out, "{:<width$}  {:>12}  {:>12}", "term", "estimate", "std.err");
    for r in &rows {
        let se = r.se.map_or_else(|| "fixed".to_string(), |s| format!("{s:.6}"));
        let _ = writeln!(out, "{:<width$}  {:>12.6}  {:>12}", r.term, r.estimate, se);
    }
    Ok(out)
}

pub fn check(a: &CheckArgs, format: Option<Format>) -> Result<String, CliError> {
    let json = text_or_json(format, "check")?;
    let names = if a.covariates.is_empty() { default_names(a.p) } else { a.covariates.clone() };
    if names.is_empty() {
        return Err(input("--p must be at least 1"));
    }
    let s1 = parse_model("--model", &a.model, &names)?;
    let s2 = parse_model("--model2", &a.model2, &names)?;
    let verdict = dominance::check(&s1, &s2, a.pi, mode(a.centering))?;
    Ok(if json { pretty(&verdict) } else { format!("{verdict}\n") })
}

fn value_text(v: &PopulationValue) -> String {
    match v.mc_se {
        Some(se) => format!("{:.9} (mc se {se:.2e})", v.value),
        None => format!("{:.9}", v.value),
    }
}

pub fn compare(a: &CompareArgs, format: Option<Format>) -> Result<String, CliError> {
    let json = text_or_json(format, "compare")?;
    let text = std::fs::read_to_string(&a.population)
        .map_err(|e| input(format!("{}: {e}", a.population.display())))?;
    let pop = PopulationSpec::from_json(&text)?;
    let names = default_names(pop.p());
    let s1 = apply_centering(parse_model("--model", &a.model, &names)?, &a.centering)?;
    let s2 = apply_centering(parse_model("--model2", &a.model2, &names)?, &a.centering)?;
    let m = mode(a.centering.centering);
    let variance = |s: &ModelSpec| match m {
        CenteringMode::KnownMean => asymptotic_variance_known_mean(s, &pop),
        CenteringMode::Empirical => asymptotic_variance_centered(s, &pop),
    };
    let (v1, v2) = (variance(&s1)?, variance(&s2)?);
    let verdict = dominance::check(&s1, &s2, pop.pi, m)?;
    let gap = if m == CenteringMode::Empirical && verdict.is_certified() {
        Some(variance_gap_theorem2(&s1, &s2, &pop)?)
    } else {
        None
    };

    if json {
        return Ok(pretty(&json!({
            "pi": pop.pi,
            "centering": verdict.centering,
            "model1": {"formula": s1.formula(), "variance": v1.value, "mc_se": v1.mc_se},
            "model2": {"formula": s2.formula(), "variance": v2.value, "mc_se": v2.mc_se},
            "difference": v1.value - v2.value,
            "gap_formula": gap.map(|g| g.value),
            "verdict": verdict,
        })));
    }
    let mut out = String::new();
    let _ = writeln!(out, "pi         {}", pop.pi);
    let _ = writeln!(out, "V1         {}  {}", value_text(&v1), s1.formula());
    let _ = writeln!(out, "V2         {}  {}", value_text(&v2), s2.formula());
    let _ = writeln!(out, "V1 - V2    {:.9}", v1.value - v2.value);
    if let Some(g) = gap {
        let _ = writeln!(out, "V2 - V1    {} (closed form)", value_text(&g));
    }
    let _ = writeln!(out, "verdict    {verdict}");
    Ok(out)
}

fn parse_pis(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || input(format!("--pis `{text}`: expected `0.3,0.5` or `start:end:step`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, end, step] => {
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if !(step > 0.0) || end < start {
                return Err(bad());
            }
            let count = ((end - start) / step + 1e-9).floor() as usize;
            Ok((0..=count).map(|k| ((start + k as f64 * step) * 1e10).round() / 1e10).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn parse_models(text: &str, p: usize, names: &[String]) -> Result<Vec<ModelEntry>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let spec = match item.parse::<Estimator>() {
                Ok(e) => named_spec(e, p)?.renamed(names.to_vec())?,
                Err(_) => parse_model("--models", item, names)?,
            };
            Ok(ModelEntry::new(item, spec))
        })
        .collect()
}

fn render_table(report: &MonteCarloReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<24} {:>6} {:>6} {:>7} {:>10} {:>10} {:>10} {:>6}",
        "scenario", "model", "pi", "n", "reps", "bias", "sd", "mc_se", "fail"
    );
    for c in &report.cells {
        let pi = c.pi.map_or_else(|| "-".to_string(), |p| format!("{p}"));
        let _ = writeln!(
            out,
            "{:<10} {:<24} {:>6} {:>6} {:>7} {:>10.5} {:>10.5} {:>10.5} {:>6.3}",
            c.scenario, c.model, pi, c.n, c.reps, c.bias, c.sd, c.mc_se, c.fail_rate
        );
    }
    out
}

pub fn simulate(a: &SimulateArgs, seed: u64, format: Option<Format>) -> Result<String, CliError> {
    let (scenario, names, default_models, default_pis) = if a.scenario == "did-ldv" {
        let cfg = DidLdvConfig { n: a.n, pi: 0.5, baseline_coef: a.baseline_coef };
        let sc = Scenario::custom("did-ldv", cfg.law())?.with_n(a.n);
        (sc, vec!["Y0".to_string(), "X2".to_string()], DidLdvConfig::models()?, vec![0.5])
    } else {
        let id: u8 = a
            .scenario
            .parse()
            .map_err(|_| input(format!("--scenario `{}`: expected 1 to 4 or did-ldv", a.scenario)))?;
        let sc = Scenario::reference(id)?.with_n(a.n);
        let pis = if sc.covariate_dependent() { Vec::new() } else { FIGURE1_PIS.to_vec() };
        (sc, default_names(1), figure1_models(), pis)
    };
    let models = match &a.models {
        Some(text) => parse_models(text, scenario.p(), &names)?,
        None => default_models,
    };
    let pis = match &a.pis {
        Some(text) => parse_pis(text)?,
        None => default_pis,
    };
    if scenario.covariate_dependent() && a.pis.is_some() {
        eprintln!("warning: scenario {} assigns treatment by covariate; --pis is ignored", scenario.name);
    }
    let report = run_grid(&scenario, &models, &pis, a.reps, seed)?;
    Ok(match format.unwrap_or(Format::Csv) {
        Format::Csv => report.to_csv(),
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
        Format::Text => render_table(&report),
    })
}

pub fn table1(a: &Table1Args, format: Option<Format>) -> Result<String, CliError> {
    let json = text_or_json(format, "table1")?;
    let report = dominance::table1(a.p, a.pi)?;
    let cors = if a.corollaries { Some(dominance::corollaries(a.pi)?) } else { None };
    if json {
        return Ok(match cors {
            Some(c) => pretty(&json!({"table1": report, "corollaries": c})),
            None => pretty(&report),
        });
    }
    let mut out = report.to_text();
    if let Some(cors) = cors {
        out.push('\n');
        for c in cors {
            let status = if c.certified { "certified" } else { "not certified" };
            let _ = writeln!(out, "{}: {:?} ({status})", c.claim, c.verdict.verdict);
        }
    }
    Ok(out)
}
