//! The five subcommands. Each returns a JSON result (and a CSV series for `simulate`);
//! `execute` writes them with the resolved config.

use std::fs;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use nilwalk::exact::{format_rational, parse_rational, to_f64, Rational};
use nilwalk::filtration::{filtration, j_w, lower_central_d, predicted_return_exponent, Regime};
use nilwalk::geometry::{ball_volume, box_count_oracle, power_growth_check, word_ball, CommutatorBasis};
use nilwalk::group::magnus::{hall_basis, witt_number};
use nilwalk::group::{Backend, GroupElement, GroupSpec, UniMatrix};
use nilwalk::lattice::smith_invariants;
use nilwalk::walker::{
    collision_estimate, exact_convolution, fit_exponent, fit_points, CollisionEstimate, FitModel, RadialSpec,
    SimOptions, StableLawSpec, StepSource, Walk, DEFAULT_CUTOFF,
};
use nilwalk::weights::weights_from_alpha;
use nilwalk::Error;

use crate::config::{Command, ElementLit, LawChoice, OracleQuery, RunConfig};
use crate::Failure;

struct Outcome {
    result: Value,
    csv: Option<Vec<u8>>,
    /// Why the run stopped early, if it did.
    truncated: Option<String>,
}

impl Outcome {
    fn done(result: Value) -> Outcome {
        Outcome { result, csv: None, truncated: None }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<u8, Failure> {
    let command = cfg.command.expect("resolved configs carry their command");
    let started = Instant::now();
    let deadline = cfg.budget_seconds.map(|s| started + Duration::from_secs(s));
    let outcome = match command {
        Command::Analyze => analyze(cfg)?,
        Command::Simulate => simulate(cfg, deadline)?,
        Command::Norm => norm(cfg)?,
        Command::Volume => volume(cfg)?,
        Command::Oracle => oracle(cfg)?,
    };
    let doc = json!({
        "command": command.name(),
        "truncated": outcome.truncated.is_some(),
        "truncation_reason": outcome.truncated,
        "config": cfg,
        "result": outcome.result,
    });
    write_outputs(cfg, command, &doc, outcome.csv.as_deref())?;
    println!("{}", serde_json::to_string(&doc).map_err(|e| Failure::other(e.to_string()))?);
    eprintln!("nilwalk {}: finished in {:.2?}", command.name(), started.elapsed());
    Ok(if outcome.truncated.is_some() { 4 } else { 0 })
}

fn write_outputs(cfg: &RunConfig, command: Command, doc: &Value, csv: Option<&[u8]>) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::other(format!("{}: {e}", cfg.out.display()));
    fs::create_dir_all(&cfg.out).map_err(io)?;
    fs::write(cfg.out.join("config.resolved.json"), pretty(cfg)).map_err(io)?;
    if let Some(bytes) = csv {
        fs::write(cfg.out.join(format!("{}.csv", command.name())), bytes).map_err(io)?;
    }
    fs::write(cfg.out.join(format!("{}.json", command.name())), pretty(doc)).map_err(io)?;
    Ok(())
}

fn pretty<T: Serialize>(x: &T) -> String {
    let mut s = serde_json::to_string_pretty(x).expect("config and results serialize");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn analyze(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let spec = cfg.group_spec()?;
    cfg.check_arity(&spec)?;
    let d_g = format_rational(&lower_central_d(&spec)?);
    let result = match &cfg.alpha {
        Some(a) => {
            let aw = weights_from_alpha(a)?;
            let report = filtration(&spec, &aw.power)?;
            let log_report = filtration(&spec, &aw.log_corrected.weights)?;
            let prediction = predicted_return_exponent(&spec, a)?;
            json!({
                "report": report,
                "log_corrected_report": log_report,
                "prediction": prediction,
                "regime": prediction.regime.label(),
                "D_G": d_g,
            })
        }
        None => json!({ "report": filtration(&spec, &cfg.weight_system()?)?, "D_G": d_g }),
    };
    Ok(Outcome::done(result))
}

#[derive(Serialize)]
struct CsvRow {
    n: u64,
    estimate: f64,
    stderr: f64,
    pairs: u64,
    #[serde(rename = "N")]
    samples: u64,
}

fn csv_series(estimates: &[CollisionEstimate]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in estimates {
        w.serialize(CsvRow { n: e.n, estimate: e.estimate, stderr: e.stderr, pairs: e.pairs, samples: e.samples })
            .map_err(|e| Failure::other(e.to_string()))?;
    }
    if estimates.is_empty() {
        w.write_record(["n", "estimate", "stderr", "pairs", "N"]).map_err(|e| Failure::other(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::other(e.to_string()))
}

struct Target {
    walk: Walk,
    prediction: Value,
    exponent: Rational,
    upper_bound_only: bool,
    primary: FitModel,
    both_models: bool,
}

fn simulation_target(cfg: &RunConfig, spec: GroupSpec) -> Result<Target, Failure> {
    let sim = cfg.simulation.as_ref().expect("checked when resolving");
    match &sim.law {
        LawChoice::Stable => {
            cfg.check_arity(&spec)?;
            let a = cfg.alpha.as_ref().expect("checked when resolving");
            let p = predicted_return_exponent(&spec, a)?;
            let walk = Walk::stable(spec, StableLawSpec::with_cutoff(a, sim.cutoff)?)?;
            Ok(Target {
                walk,
                exponent: p.poly_exponent.clone(),
                upper_bound_only: p.upper_bound_only,
                primary: if p.regime == Regime::AllCoreAlphaTwo { FitModel::PowerLog } else { FitModel::Power },
                both_models: a.iter().any(|x| x.is_two()),
                prediction: to_value(&p),
            })
        }
        LawChoice::Radial { gamma } => {
            let g = parse_rational(gamma)?;
            let mut law = RadialSpec::for_group(&spec, to_f64(&g))?;
            if sim.cutoff != DEFAULT_CUTOFF {
                law = RadialSpec::with_cutoff(law.d(), law.gamma(), sim.cutoff)?;
            }
            // A radial law of index γ on Z^d returns like n^{-d/γ}.
            let exponent = Rational::from_integer(law.d().into()) / g;
            let prediction = json!({
                "poly_exponent": format_rational(&exponent),
                "log_exponent": "0",
                "regime": "radial",
                "upper_bound_only": false,
            });
            Ok(Target {
                walk: Walk::new(spec, StepSource::Radial(law))?,
                prediction,
                exponent,
                upper_bound_only: false,
                primary: FitModel::Power,
                both_models: false,
            })
        }
    }
}

fn simulate(cfg: &RunConfig, deadline: Option<Instant>) -> Result<Outcome, Failure> {
    let sim = cfg.simulation.as_ref().expect("checked when resolving");
    let horizons = sim.horizons.values()?;
    let t = simulation_target(cfg, cfg.group_spec()?)?;
    let opts = SimOptions { seed: cfg.seed, workers: cfg.workers, memory_budget: sim.memory_budget, deadline };
    let mut estimates = Vec::with_capacity(horizons.len());
    let mut truncated = None;
    for &n in &horizons {
        match collision_estimate(&t.walk, n, sim.samples, &opts) {
            Ok(e) => estimates.push(e),
            Err(Error::ResourceLimit(m)) => {
                truncated = Some(m);
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let points = fit_points(&estimates);
    let mut models = vec![t.primary];
    if t.both_models {
        models = vec![FitModel::Power, FitModel::PowerLog];
    }
    let mut fits = serde_json::Map::new();
    let mut primary_fit = None;
    for m in models {
        let key = to_value(&m).as_str().unwrap_or_default().to_string();
        match fit_exponent(&points, m) {
            Ok(r) => {
                if m == t.primary {
                    primary_fit = Some(r.clone());
                }
                fits.insert(key, to_value(&r));
            }
            Err(e) => {
                fits.insert(key, json!({ "error": e.to_string() }));
            }
        }
    }
    let predicted_slope = -to_f64(&t.exponent);
    let verdict = primary_fit.map(|r| {
        let deviation = r.slope - predicted_slope;
        let within = if t.upper_bound_only { deviation <= sim.tolerance } else { deviation.abs() <= sim.tolerance };
        json!({
            "model": r.model,
            "slope": r.slope,
            "half_width": r.half_width,
            "deviation": deviation,
            "tolerance": sim.tolerance,
            "upper_bound_only": t.upper_bound_only,
            "within": within,
        })
    });
    let result = json!({
        "axis": "2n",
        "horizons": horizons,
        "estimates": estimates,
        "prediction": t.prediction,
        "predicted_exponent": format_rational(&t.exponent),
        "predicted_slope": predicted_slope,
        "primary_model": t.primary,
        "fits": fits,
        "verdict": verdict,
    });
    Ok(Outcome { result, csv: Some(csv_series(&estimates)?), truncated })
}

fn element(spec: &GroupSpec, lit: &ElementLit) -> Result<GroupElement, Failure> {
    let ints = |v: &[nilwalk::group::IntLit]| v.iter().map(|x| x.to_bigint()).collect::<Result<Vec<BigInt>, _>>();
    let g = match lit {
        ElementLit::Word(w) => {
            let mut acc = spec.identity();
            for (i, e) in w {
                if *i == 0 || *i > spec.num_generators() {
                    return Err(Failure::schema(format!("generator {i} out of range 1..={}", spec.num_generators())));
                }
                acc = acc.mul(&spec.generators()[i - 1].pow(&e.to_bigint()?))?;
            }
            acc
        }
        ElementLit::Vector(v) => GroupElement::Zd(ints(v)?),
        ElementLit::Matrix(rows) => {
            let rows = rows.iter().map(|r| ints(r)).collect::<Result<Vec<_>, _>>()?;
            GroupElement::Unitriangular(UniMatrix::from_rows(&rows)?)
        }
        ElementLit::Hall(v) => match spec.backend() {
            Backend::FreeNilpotent(f) => GroupElement::Hall(f.normal_form(ints(v)?)?),
            _ => return Err(Failure::schema("Hall exponents need a free_nilpotent group")),
        },
    };
    spec.check_element(&g).map_err(|e| Failure::schema(e.to_string()))?;
    Ok(g)
}

fn norm(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let q = cfg.norm.as_ref().expect("checked when resolving");
    let spec = cfg.group_spec()?;
    cfg.check_arity(&spec)?;
    let report = filtration(&spec, &cfg.weight_system()?)?;
    let basis = CommutatorBasis::greedy(&spec, &report)?;
    let g = element(&spec, &q.element)?;
    let value = basis.radius(&spec, &g)?;
    let growth = if q.powers.is_empty() || g.is_identity() {
        Value::Null
    } else {
        to_value(&power_growth_check(&spec, &report, &basis, &g, &q.powers)?)
    };
    Ok(Outcome::done(json!({
        "basis": basis.entries,
        "r": value.r,
        "coordinates": value.coordinates.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "level": j_w(&spec, &report, &g)?,
        "growth": growth,
    })))
}

fn volume(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let q = cfg.volume.as_ref().expect("checked when resolving");
    let spec = cfg.group_spec()?;
    cfg.check_arity(&spec)?;
    let report = filtration(&spec, &cfg.weight_system()?)?;
    let basis = CommutatorBasis::greedy(&spec, &report)?;
    let mut rows = Vec::new();
    let mut truncated = None;
    for &r in &q.radii {
        let predicted = ball_volume(&report, r)?;
        let sides = basis.box_sides(r);
        let count = match box_count_oracle(&spec, &basis, r, q.budget) {
            Ok(c) => c,
            Err(Error::ResourceLimit(m)) => {
                truncated = Some(m);
                break;
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(json!({
            "r": r,
            "predicted": predicted.volume,
            "ln_predicted": predicted.ln_volume,
            "sides": sides,
            "box_count": count,
        }));
    }
    let mut word = Value::Null;
    if let (Some(rho), None) = (q.word_radius, &truncated) {
        match word_ball(&spec, rho, q.budget.min(usize::MAX as u64) as usize) {
            Ok(ball) => {
                let mut sizes = vec![0u64; rho as usize + 1];
                for &len in ball.values() {
                    sizes[len as usize] += 1;
                }
                let cumulative: Vec<u64> = sizes
                    .iter()
                    .scan(0, |acc, s| {
                        *acc += s;
                        Some(*acc)
                    })
                    .collect();
                word = json!({ "radius": rho, "ball_sizes": cumulative });
            }
            Err(Error::ResourceLimit(m)) => truncated = Some(m),
            Err(e) => return Err(e.into()),
        }
    }
    let result = json!({ "D": report.d_components.iter().map(format_rational).collect::<Vec<_>>(), "rows": rows, "word_ball": word });
    Ok(Outcome { result, csv: None, truncated })
}

fn zd_rows(spec: &GroupSpec) -> Result<Vec<Vec<BigInt>>, Failure> {
    spec.generators()
        .iter()
        .map(|g| match g {
            GroupElement::Zd(v) => Ok(v.clone()),
            _ => Err(Failure::from(Error::Unsupported(format!("this oracle needs a zd group, not {}", spec.backend_name())))),
        })
        .collect()
}

/// Largest Hall basis the Witt oracle will list.
const WITT_LIMIT: u64 = 20_000;

fn oracle(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let q = cfg.oracle.as_ref().expect("checked when resolving");
    let result = match q {
        OracleQuery::Convolution { n, truncation, max_entries } => {
            let spec = cfg.group_spec()?;
            cfg.check_arity(&spec)?;
            let gens = zd_rows(&spec)?
                .iter()
                .map(|v| v.iter().map(|x| x.to_i64()).collect::<Option<Vec<i64>>>())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Failure::schema("generator entries must fit in 64 bits"))?;
            let law = StableLawSpec::new(cfg.alpha.as_ref().expect("checked when resolving"))?;
            let t = exact_convolution(&gens, &law, *n, *truncation, *max_entries)?;
            let mut out = json!({
                "provenance": {
                    "method": if t.d() == 1 { "fft" } else { "direct" },
                    "truncation": truncation,
                    "tail_mass_bound": t.tail_mass(),
                },
                "d": t.d(),
                "radius": t.radius(),
                "return_probability": t.return_probability(),
                "collision_sum": t.collision_sum(),
                "total": t.total(),
            });
            if t.d() == 1 && t.entries() <= 1 << 16 {
                let r = t.radius();
                out["support"] = json!([-r, r]);
                out["probabilities"] = json!((-r..=r).map(|x| t.prob(&[x])).collect::<Vec<_>>());
            }
            out
        }
        OracleQuery::Witt { k, class } => {
            if *k == 0 || *class == 0 {
                return Err(Failure::schema("witt needs k >= 1 and class >= 1"));
            }
            let counts: Vec<u64> = (1..=*class as u64).map(|m| witt_number(*k as u64, m)).collect();
            let total = counts.iter().try_fold(0u64, |a, &c| a.checked_add(c)).unwrap_or(u64::MAX);
            if total > WITT_LIMIT {
                return Err(Error::ResourceLimit(format!("Hall basis of {total} commutators exceeds {WITT_LIMIT}")).into());
            }
            let basis = hall_basis(*k, *class);
            let listed: Vec<usize> = (1..=*class).map(|m| basis.iter().filter(|c| c.len() == m).count()).collect();
            json!({
                "provenance": { "method": "mobius", "cross_check": "hall-basis" },
                "counts": counts,
                "hall_basis_counts": listed,
                "basis": basis.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            })
        }
        OracleQuery::BoxCount { radius, budget } => {
            let spec = cfg.group_spec()?;
            cfg.check_arity(&spec)?;
            let report = filtration(&spec, &cfg.weight_system()?)?;
            let basis = CommutatorBasis::greedy(&spec, &report)?;
            let sides = basis.box_sides(*radius);
            let count = box_count_oracle(&spec, &basis, *radius, *budget)?;
            json!({
                "provenance": { "method": "distinct products of the greedy basis box" },
                "radius": radius,
                "sides": sides,
                "box_count": count,
            })
        }
        OracleQuery::Smith { matrix } => {
            let rows = match matrix {
                Some(m) => m
                    .iter()
                    .map(|r| r.iter().map(|x| x.to_bigint()).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?,
                None => zd_rows(&cfg.group_spec()?)?,
            };
            if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
                return Err(Failure::schema("the matrix needs rows of equal length"));
            }
            let inv = smith_invariants(&rows);
            json!({
                "provenance": { "method": "smith normal form" },
                "rank": inv.len(),
                "invariants": inv.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            })
        }
    };
    Ok(Outcome::done(result))
}
