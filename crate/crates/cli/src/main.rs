use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcover_core::congruence::{
    congruence_report, elliptic_threshold, fibration_excluded, intro_table, lambda_allowed,
    render_table, Fibration,
};
use pcover_core::resolver::{resolve, uniruling_degree_bound, ResolutionTrace, ResolveOptions};
use pcover_core::scenario::{Scenario, PRNG};
use pcover_core::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "pcover", version, about = "Resolution traces and degree congruences for p-cyclic cover singularities")]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve a seeded or explicit scenario and print its trace.
    Resolve(ResolveArgs),
    /// Admissible primes and residue constraints for degree-d hypersurfaces in P^(n+1).
    Constraints(ConstraintArgs),
    /// The (n, d) table of effective constraints.
    Table,
    /// Degree above which elliptic fibrations are excluded.
    Threshold {
        #[arg(long)]
        n: u64,
    },
    /// Quick end-to-end checks of the library.
    Selftest,
}

#[derive(Args)]
struct ResolveArgs {
    /// Scenario JSON file; overrides the inline flags.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    p: u32,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Residue field size (default p).
    #[arg(long)]
    q: Option<u64>,
    /// Working precision N (default 4k + 10).
    #[arg(long)]
    precision: Option<usize>,
    /// Residue-field code of tau (default drawn from the seed).
    #[arg(long)]
    tau: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run this many scenarios with consecutive seeds.
    #[arg(long)]
    batch: Option<u64>,
    /// Compute every x chart instead of x1 only.
    #[arg(long)]
    all_x_charts: bool,
    /// Also write the JSON trace to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConstraintArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    d: u64,
    #[arg(long)]
    lambda: Option<u64>,
    /// elliptic, genus1:DELTA or abelian:G
    #[arg(long)]
    fibration: Option<String>,
}

const EXIT_OTHER: u8 = 1;
const EXIT_MISMATCH: u8 = 2;
const EXIT_INVALID: u8 = 3;

fn scenario_exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidRing(_) | Error::Parse(_) | Error::Precondition(_) => EXIT_INVALID,
        _ => EXIT_OTHER,
    }
}

fn resolve_exit_code(e: &Error) -> u8 {
    match e {
        Error::NoTemplateMatch(_) | Error::InexactDivision(_) | Error::NotPthRoot(_) => EXIT_MISMATCH,
        _ => EXIT_OTHER,
    }
}

struct RunOutput {
    code: u8,
    record: Value,
    text: String,
}

fn summary(scenario: &Scenario, trace: &ResolutionTrace) -> String {
    let mut out = format!(
        "scenario p={} k={} n={} q={} N={} tau={} seed={} ({PRNG})\n",
        scenario.p,
        scenario.k,
        scenario.n,
        scenario.q,
        scenario.precision,
        scenario.tau.unwrap_or(0),
        scenario.seed
    );
    for (i, step) in trace.steps.iter().enumerate() {
        let kind = match step.sign {
            Some(s) => format!("WB{}", if s.name() == "minus" { "-" } else { "+" }),
            None => "BL".to_string(),
        };
        let charts: Vec<String> = step
            .charts
            .iter()
            .map(|c| format!("{}: {}", c.chart.map.chart.name(), c.classification.class))
            .collect();
        let witness = match &step.exceptional.witness {
            Ok(w) => format!("{:?} on {} chart", w.form, step.exceptional.witness_chart),
            Err(e) => format!("none ({e})"),
        };
        out.push_str(&format!(
            "step {}  {kind}  {}  {}  | witness: {witness}\n",
            i + 1,
            step.input,
            charts.join("  ")
        ));
    }
    let blowups = if trace.p == 2 {
        format!("{} ordinary blowups", trace.ordinary_blowups())
    } else {
        format!("{} weighted blowups", trace.weighted_blowups())
    };
    let orders = trace.quotient_orders();
    out.push_str(&format!(
        "terminal: {}  {blowups}  quotient orders {:?}  uniruling bound {}\n",
        serde_json::to_value(trace.terminal).unwrap().as_str().unwrap(),
        orders,
        uniruling_degree_bound(trace)
    ));
    for u in trace.unclassified() {
        out.push_str(&format!("unclassified: {u}\n"));
    }
    out
}

fn run_scenario(scenario: &Scenario, opts: &ResolveOptions) -> RunOutput {
    let fail = |code: u8, stage: &str, e: &Error, sc: Value| RunOutput {
        code,
        record: json!({ "prng": PRNG, "seed": scenario.seed, "scenario": sc, "error": { "stage": stage, "message": e.to_string() } }),
        text: format!("{stage} error: {e}\n"),
    };
    let (explicit, model) = match scenario.instantiate() {
        Ok(x) => x,
        Err(e) => return fail(scenario_exit_code(&e), "scenario", &e, scenario.to_json()),
    };
    let trace = match resolve(&model, opts) {
        Ok(t) => t,
        Err(e) => return fail(resolve_exit_code(&e), "resolve", &e, explicit.to_json()),
    };
    let code = if trace.is_success() {
        0
    } else if !trace.unclassified().is_empty() {
        EXIT_MISMATCH
    } else {
        EXIT_OTHER
    };
    let record = trace.record(explicit.to_json());
    let mut value = serde_json::to_value(&record).expect("trace serializes");
    let obj = value.as_object_mut().unwrap();
    obj.insert("prng".into(), json!(PRNG));
    obj.insert("seed".into(), json!(scenario.seed));
    obj.insert("exit_code".into(), json!(code));
    RunOutput {
        code,
        record: value,
        text: summary(&explicit, &trace),
    }
}

fn cmd_resolve(args: &ResolveArgs, as_json: bool) -> u8 {
    let base = match &args.scenario {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", path.display());
                    return EXIT_INVALID;
                }
            };
            match Scenario::from_json(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return EXIT_INVALID;
                }
            }
        }
        None => {
            let mut s = Scenario::random(args.p, args.k, args.n, args.seed);
            if let Some(q) = args.q {
                s.q = q;
            }
            if let Some(prec) = args.precision {
                s.precision = prec;
            }
            s.tau = args.tau;
            s
        }
    };
    let opts = ResolveOptions {
        all_x_charts: args.all_x_charts,
    };
    let scenarios: Vec<Scenario> = match args.batch {
        Some(count) => (0..count)
            .map(|i| Scenario {
                seed: base.seed + i,
                ..base.clone()
            })
            .collect(),
        None => vec![base],
    };
    let results: Vec<RunOutput> = scenarios.par_iter().map(|s| run_scenario(s, &opts)).collect();
    let code = results.iter().map(|r| r.code).max().unwrap_or(0);
    let json_out = if args.batch.is_some() {
        Value::Array(results.iter().map(|r| r.record.clone()).collect())
    } else {
        results[0].record.clone()
    };
    let json_text = serde_json::to_string_pretty(&json_out).unwrap();
    if let Some(path) = &args.out {
        if let Err(e) = fs::write(path, &json_text) {
            eprintln!("cannot write {}: {e}", path.display());
            return EXIT_OTHER;
        }
    }
    if as_json {
        println!("{json_text}");
    } else {
        for r in &results {
            if r.code == 0 {
                print!("{}", r.text);
            } else {
                eprint!("{}", r.text);
            }
        }
    }
    code
}

fn cmd_constraints(args: &ConstraintArgs, as_json: bool) -> u8 {
    if args.n < 3 || args.d < 1 {
        eprintln!("need n >= 3 and d >= 1");
        return EXIT_INVALID;
    }
    let fibration = match args.fibration.as_deref().map(Fibration::parse).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INVALID;
        }
    };
    let report = congruence_report(args.n, args.d);
    let lambda = args.lambda.map(|l| lambda_allowed(args.n, args.d, l));
    let fib = fibration.map(|f| fibration_excluded(args.n, args.d, f));
    if as_json {
        let v = json!({ "report": report, "lambda": lambda, "fibration": fib });
        println!("{}", serde_json::to_string_pretty(&v).unwrap());
        return 0;
    }
    println!("n={} d={}", args.n, args.d);
    let admissible: Vec<String> = report
        .admissible
        .iter()
        .map(|a| {
            if a.effective {
                a.p.to_string()
            } else {
                format!("{} (non-effective)", a.p)
            }
        })
        .collect();
    if admissible.is_empty() {
        println!("admissible primes: none");
    } else {
        println!("admissible primes: {}", admissible.join(", "));
    }
    let effective: Vec<u64> = report.admissible.iter().filter(|a| a.effective).map(|a| a.p).collect();
    if effective.is_empty() {
        println!("no effective primes");
    } else {
        for p in &effective {
            println!("constraint: lambda = 0 or 1 mod {p}");
        }
    }
    if let Some(v) = lambda {
        match v.per_prime.iter().find(|x| !x.allowed) {
            Some(w) => println!(
                "lambda={}: forbidden, witness p={} ({} mod {} = {})",
                v.lambda, w.p, v.lambda, w.p, w.residue
            ),
            None => println!("lambda={}: allowed", v.lambda),
        }
    }
    if let Some(f) = fib {
        match f.witness {
            Some(w) => println!(
                "{} fibration: excluded, witness p={} m={} (degree = {} mod {})",
                f.fibration, w.p, w.m, w.residue, w.p
            ),
            None => println!("{} fibration: not excluded", f.fibration),
        }
    }
    0
}

fn cmd_table(as_json: bool) -> u8 {
    let rows = intro_table();
    if as_json {
        println!("{}", serde_json::to_string_pretty(&rows).unwrap());
    } else {
        print!("{}", render_table(&rows));
    }
    0
}

fn cmd_threshold(n: u64, as_json: bool) -> u8 {
    if n < 3 {
        eprintln!("need n >= 3");
        return EXIT_INVALID;
    }
    let d = elliptic_threshold(n);
    let verdict = fibration_excluded(n, d, Fibration::Elliptic);
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "n": n, "threshold": d, "elliptic": verdict })).unwrap()
        );
    } else {
        println!("n={n}: elliptic fibrations excluded for d >= {d}");
        if let Some(w) = verdict.witness {
            println!("at d={d}: witness p={} m={} (m^2 = {} mod {})", w.p, w.m, w.residue, w.p);
        }
    }
    0
}

fn cmd_selftest(as_json: bool) -> u8 {
    let mut checks: Vec<(String, bool)> = Vec::new();
    let table = intro_table();
    let moduli: Vec<Vec<u64>> = table.iter().map(|r| r.moduli.clone()).collect();
    checks.push(("table".into(), moduli == vec![vec![5], vec![3], vec![3], vec![3, 7]]));
    checks.push(("lambda".into(), !lambda_allowed(3, 5, 4).allowed && lambda_allowed(3, 5, 6).allowed));
    checks.push(("threshold".into(), elliptic_threshold(3) == 5 && elliptic_threshold(4) == 10));
    let opts = ResolveOptions::default();
    for (p, k, n) in [(3, 4, 2), (5, 8, 2), (2, 4, 2)] {
        let ok = run_scenario(&Scenario::random(p, k, n, 0), &opts).code == 0;
        checks.push((format!("resolve p={p} k={k} n={n}"), ok));
    }
    let all = checks.iter().all(|(_, ok)| *ok);
    if as_json {
        let v: Vec<Value> = checks.iter().map(|(name, ok)| json!({ "check": name, "pass": ok })).collect();
        println!("{}", serde_json::to_string_pretty(&v).unwrap());
    } else {
        for (name, ok) in &checks {
            println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
        }
    }
    if all {
        0
    } else {
        EXIT_OTHER
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Resolve(args) => cmd_resolve(args, cli.json),
        Command::Constraints(args) => cmd_constraints(args, cli.json),
        Command::Table => cmd_table(cli.json),
        Command::Threshold { n } => cmd_threshold(*n, cli.json),
        Command::Selftest => cmd_selftest(cli.json),
    };
    ExitCode::from(code)
}
