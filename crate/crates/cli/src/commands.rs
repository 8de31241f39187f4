use std::fs;
use std::path::Path;
use std::time::Instant;

use ltrans_core::identities::{verify_all, verify_identity, Identity};
use ltrans_core::modular_eval::eta_value;
use ltrans_core::qseries::{eta_quotient_series, lambert_series, ArithmeticSequence, EisensteinLikeSeries, EtaQuotient, QSeries};
use ltrans_core::quadrature::QuadConfig;
use ltrans_core::transform::{e32_routes, random_specs, transform_check, Route, TransformSpec};
use rayon::prelude::*;
use rug::Float;
use serde_json::{json, Value};

use crate::report::RunReport;
use crate::{Cli, Command, TransformArgs};

pub fn run(cli: &Cli) -> Vec<RunReport> {
    let name = cli.command_name();
    match &cli.command {
        Command::Eta { t, eps } => vec![timed(name, json!({"t": t, "eps": eps, "precision": cli.precision}), || {
            eta(*t, *eps, cli.precision)
        })],
        Command::Qexpand { quotient, order } => vec![timed(name, json!({"quotient": quotient, "order": order}), || {
            qexpand(quotient, *order)
        })],
        Command::Lambert { a, b, k, order } => vec![timed(name, json!({"a": a, "b": b, "k": k, "order": order}), || {
            lambert(a, b, *k, *order)
        })],
        Command::Verify { identity, order } => verify(name, identity, *order),
        Command::Lvalue { preset, route, tol } => {
            let inputs = json!({"preset": preset, "route": route, "tol": tol, "precision": cli.precision});
            vec![timed(name, inputs, || lvalue(preset, route, *tol, cli.precision))]
        }
        Command::TransformCheck(args) => transform(name, args, cli.seed, cli.precision),
    }
}

/// Runs `f`, which yields `(outputs, passed)`, and wraps the result.
fn timed(command: &str, inputs: Value, f: impl FnOnce() -> Result<(Value, bool), String>) -> RunReport {
    let start = Instant::now();
    let result = f();
    let wall = start.elapsed().as_secs_f64();
    match result {
        Ok((outputs, passed)) => RunReport::ok(command, inputs, outputs, passed, wall),
        Err(message) => RunReport::error(command, inputs, message, wall),
    }
}

fn digits(x: &Float) -> String {
    // ≈ precision · log10(2) significant digits
    let n = (x.prec() as f64 * std::f64::consts::LOG10_2).floor() as usize;
    format!("{x:.n$}")
}

fn eta(t: f64, eps: f64, prec: u32) -> Result<(Value, bool), String> {
    let r = eta_value(&Float::with_val(prec, t), eps).map_err(|e| e.to_string())?;
    let passed = r.tail_bound <= eps.max(2f64.powi(4 - prec as i32));
    Ok((
        json!({
            "value": digits(&r.value),
            "tail_bound": r.tail_bound,
            "terms_used": r.terms_used,
            "accuracy": "tail_bound",
        }),
        passed,
    ))
}

fn series_json(s: &QSeries) -> Value {
    json!({
        "lead": s.lead().to_string(),
        "trunc": s.trunc(),
        "coefficients": s.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "accuracy": "exact",
    })
}

fn qexpand(quotient: &str, order: usize) -> Result<(Value, bool), String> {
    let eq = EtaQuotient::parse(quotient).map_err(|e| e.to_string())?;
    let s = eta_quotient_series(&eq, order);
    let mut out = series_json(&s);
    out["weight"] = json!(eq.weight().to_string());
    out["quotient"] = json!(eq.to_string());
    Ok((out, true))
}

fn lambert(a: &str, b: &str, k: i64, order: usize) -> Result<(Value, bool), String> {
    let a = ArithmeticSequence::parse(a).map_err(|e| e.to_string())?;
    let b = ArithmeticSequence::parse(b).map_err(|e| e.to_string())?;
    let g = EisensteinLikeSeries::new(k, a, b);
    let s = lambert_series(&g, order);
    // index j is the power of q, starting from the constant term
    let coefficients: Vec<String> =
        (0..=order as u64).map(|j| s.coeff_at(&j.into()).expect("within order").to_string()).collect();
    Ok((json!({ "order": order, "coefficients": coefficients, "accuracy": "exact" }), true))
}

fn verify(command: &str, identity: &str, order: usize) -> Vec<RunReport> {
    let inputs = |name: &str| json!({"identity": name, "order": order});
    let start = Instant::now();
    if identity == "all" {
        return match verify_all(order) {
            Ok(reports) => {
                let wall = start.elapsed().as_secs_f64() / reports.len() as f64;
                reports
                    .into_iter()
                    .map(|r| {
                        let passed = r.passed();
                        RunReport::ok(command, inputs(&r.name), json!(r), passed, wall)
                    })
                    .collect()
            }
            Err(e) => vec![RunReport::error(command, inputs("all"), e.to_string(), start.elapsed().as_secs_f64())],
        };
    }
    vec![timed(command, inputs(identity), || {
        let id: Identity = identity.parse().map_err(|e: ltrans_core::identities::IdentityError| e.to_string())?;
        let r = verify_identity(id, order).map_err(|e| e.to_string())?;
        let passed = r.passed();
        Ok((json!(r), passed))
    })]
}

fn lvalue(preset: &str, route: &str, tol: f64, prec: u32) -> Result<(Value, bool), String> {
    TransformSpec::preset(preset).map_err(|e| e.to_string())?;
    let routes = Route::parse_list(route).map_err(|e| e.to_string())?;
    let cfg = QuadConfig { tol, prec, ..QuadConfig::default() };
    let report = e32_routes(&routes, &cfg).map_err(|e| e.to_string())?;
    let passed = report.passed();
    Ok((json!(report), passed))
}

fn load_spec(path: &Path) -> Result<TransformSpec, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let spec: TransformSpec = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
    } else {
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn transform(command: &str, args: &TransformArgs, seed: u64, prec: u32) -> Vec<RunReport> {
    let mut specs: Vec<(Value, Result<TransformSpec, String>)> = Vec::new();
    if let Some(path) = &args.spec {
        specs.push((json!({"spec": path.display().to_string()}), load_spec(path)));
    }
    if let Some(name) = &args.preset {
        specs.push((json!({"preset": name}), TransformSpec::preset(name).map_err(|e| e.to_string())));
    }
    if args.spec.is_none() && args.preset.is_none() && args.random == 0 {
        specs.push((json!({"preset": "E32"}), Ok(TransformSpec::e32())));
    }
    for (i, spec) in random_specs(seed, args.random).into_iter().enumerate() {
        specs.push((json!({"random": i, "seed": seed}), Ok(spec)));
    }
    let cfg = QuadConfig { tol: args.tol, prec, ..QuadConfig::default() };
    specs
        .into_par_iter()
        .map(|(mut inputs, spec)| {
            inputs["tol"] = json!(args.tol);
            inputs["threshold"] = json!(args.threshold);
            timed(command, inputs, || {
                let spec = spec?;
                let r = transform_check(&spec, &cfg, args.threshold).map_err(|e| e.to_string())?;
                let passed = r.passed;
                Ok((json!(r), passed))
            })
        })
        .collect()
}
