use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lctdv::blowup::{candidate_divisor, fixture_points, global_lct_upper, lct_pair_traced};
use lctdv::certify::{base_system, CaseResult, Outcome, VerificationReport};
use lctdv::exactlin::{fmt_rational, parse_rational, QVector, Rational};
use lctdv::harness::{
    default_fixtures_dir, load_named_lemma, load_named_surface, parse_ledger, parse_tables,
    replay_named, reproduce_tables, HarnessError,
};
use lctdv::polytope::{bound_var, BoundResult, Sense};
use lctdv::surface::{nonneg_constraints, parse_surface, solve_pullback, validate_config, DivisorClass};

#[derive(Parser)]
#[command(name = "lctdv", about = "Global log canonical thresholds of Du Val del Pezzo surfaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Fixture directory (overrides LCTDV_FIXTURES).
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Tab-separated output.
    #[arg(long)]
    tsv: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pullback coefficients of a curve with the given intersection profile.
    Pullback {
        #[arg(long)]
        surface: String,
        #[arg(long)]
        profile: String,
        #[command(flatten)]
        common: Common,
    },
    /// Maximum of every coefficient over the base system of a surface or script.
    Bound {
        #[arg(long)]
        surface: Option<String>,
        #[arg(long)]
        lemma: Option<String>,
        #[arg(long)]
        dump_system: bool,
        #[command(flatten)]
        common: Common,
    },
    /// lct of a pair; without --divisor, the best declared candidate.
    LctPair {
        #[arg(long)]
        surface: String,
        /// Weights as curve=w,...
        #[arg(long)]
        divisor: Option<String>,
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Replay a lemma script.
    Certify {
        #[arg(long)]
        lemma: String,
        #[arg(long)]
        chain_depth: Option<usize>,
        #[arg(long)]
        dump_system: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Reproduce the expected-value tables.
    Tables {
        #[arg(long)]
        expected: Option<PathBuf>,
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a surface file.
    Validate {
        #[arg(long)]
        surface: String,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Input(String),
    Check,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn dir(c: &Common) -> PathBuf {
    c.fixtures.clone().unwrap_or_else(default_fixtures_dir)
}

fn parse_pairs(s: &str) -> Result<Vec<(String, Rational)>, Failure> {
    s.split(',')
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Failure::Input(format!("expected name=value, got {item:?}")))?;
            let v = parse_rational(v.trim()).map_err(|e| Failure::Input(e.to_string()))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn case_line(c: &CaseResult, sep: &str) -> String {
    let o = match &c.outcome {
        Outcome::Infeasible { cert, verified } => {
            format!("infeasible{sep}{}{sep}{}", cert.conclusion, if *verified { "verified" } else { "UNVERIFIED" })
        }
        Outcome::Gap { witness } => {
            let w: Vec<String> = witness.iter().map(|(k, v)| format!("{k}={}", fmt_rational(v))).collect();
            format!("GAP{sep}{}", w.join(","))
        }
        Outcome::Split { parts } => {
            let p: Vec<String> = parts
                .iter()
                .map(|(c, o)| format!("{c}:{}", if o.discharged() { "infeasible" } else { "GAP" }))
                .collect();
            format!("split{sep}{}", p.join(","))
        }
    };
    format!("case{sep}{}{sep}r={}{sep}d{}{sep}{o}", c.location, fmt_rational(&c.r), c.disjunct)
}

fn print_report(r: &VerificationReport, tsv: bool) {
    let sep = if tsv { "\t" } else { " " };
    for c in &r.cases {
        println!("{}", case_line(c, sep));
    }
    for ch in &r.chains {
        for s in &ch.steps {
            let cases_ok = s.cases.iter().all(|c| c.ok());
            println!(
                "chain{sep}{},{}{sep}k={}{sep}d{}{sep}side={}{sep}cases={}{sep}claims={}{sep}max_m={}",
                ch.center.0,
                ch.center.1,
                s.k,
                s.disjunct,
                if s.side_ok { "ok" } else { "FAIL" },
                if cases_ok { "ok" } else { "FAIL" },
                if s.claims_ok { "ok" } else { "FAIL" },
                s.max_mk.as_ref().map(fmt_rational).unwrap_or_else(|| "-".into()),
            );
            for c in s.cases.iter().filter(|c| !c.ok()) {
                println!("  {}", case_line(c, sep));
            }
        }
        if !ch.monotone {
            println!("chain{sep}{},{}{sep}multiplicities not monotone", ch.center.0, ch.center.1);
        }
        if !ch.closed_ok {
            println!("chain{sep}{},{}{sep}did not close", ch.center.0, ch.center.1);
        }
    }
    for s in &r.side_checks {
        println!("check{sep}{}{sep}{}", s.description, if s.ok { "ok" } else { "FAIL" });
    }
    for b in &r.bounds {
        println!(
            "bound{sep}{}{sep}expected={}{sep}computed={}{sep}{}",
            b.form,
            fmt_rational(&b.expected),
            b.computed.as_ref().map(fmt_rational).unwrap_or_else(|| "-".into()),
            if b.ok() { "ok" } else { "FAIL" }
        );
    }
    for t in &r.terminals {
        let w: Vec<String> = t.weights.iter().map(fmt_rational).collect();
        println!(
            "terminal{sep}{}{sep}weights={}{sep}lct={}{sep}{}",
            t.curves.join(","),
            w.join(","),
            t.lct.as_ref().map(fmt_rational).unwrap_or_else(|| "-".into()),
            if t.ok { "ok" } else { "FAIL" }
        );
    }
    for a in &r.axioms {
        println!("axiom{sep}{}{sep}{}", a.name, a.note);
    }
    println!("{}", r.summary());
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Pullback { surface, profile, common } => {
            let cfg = load_named_surface(&dir(&common), &surface)?;
            let mut p = vec![Rational::from_integer(0.into()); cfg.n_exceptional()];
            for (k, v) in parse_pairs(&profile)? {
                let i = cfg
                    .label_index(&k)
                    .ok_or_else(|| Failure::Input(format!("unknown exceptional curve {k}")))?;
                p[i] = v;
            }
            let c = solve_pullback(&cfg, &QVector::new(p)).map_err(|e| Failure::Input(e.to_string()))?;
            let sep = if common.tsv { "\t" } else { " " };
            let v: Vec<String> = c.iter().map(fmt_rational).collect();
            println!("{}", v.join(sep));
        }
        Cmd::Bound { surface, lemma, dump_system, common } => {
            let d = dir(&common);
            let sys = match (&surface, &lemma) {
                (_, Some(l)) => {
                    let s = load_named_lemma(&d, l)?;
                    let cfg = load_named_surface(&d, &s.surface)?;
                    base_system(&cfg, &s).map_err(|e| Failure::Input(e.to_string()))?
                }
                (Some(s), None) => nonneg_constraints(&load_named_surface(&d, s)?),
                (None, None) => return Err(Failure::Input("bound needs --surface or --lemma".into())),
            };
            if dump_system {
                print!("{}", sys.dump());
            }
            let sep = if common.tsv { "\t" } else { " <= " };
            for v in sys.variables() {
                let b = bound_var(&sys, v, Sense::Max).map_err(|e| Failure::Input(e.to_string()))?;
                let s = match b {
                    BoundResult::Value { value, .. } => fmt_rational(&value),
                    BoundResult::Unbounded => "unbounded".into(),
                    BoundResult::Infeasible => "infeasible".into(),
                };
                println!("{v}{sep}{s}");
            }
        }
        Cmd::LctPair { surface, divisor, trace, common } => {
            let cfg = load_named_surface(&dir(&common), &surface)?;
            let pts = fixture_points(&cfg);
            let (div, label) = match divisor {
                Some(s) => {
                    let w = parse_pairs(&s)?;
                    (DivisorClass::new(&cfg, &w).map_err(|e| Failure::Input(e.to_string()))?, s)
                }
                None => {
                    let u = global_lct_upper(&cfg).map_err(|e| Failure::Input(e.to_string()))?;
                    let d = candidate_divisor(&cfg, &u.candidate).map_err(|e| Failure::Input(e.to_string()))?;
                    (d, u.candidate.to_string())
                }
            };
            let (r, tr) = lct_pair_traced(&cfg, &div, &pts).map_err(|e| Failure::Input(e.to_string()))?;
            if trace {
                for l in tr {
                    println!("{l}");
                }
            }
            let sep = if common.tsv { "\t" } else { " " };
            println!("{label}{sep}lct={}{sep}witness={}", fmt_rational(&r.value), r.witness);
        }
        Cmd::Certify { lemma, chain_depth, dump_system, common } => {
            let d = dir(&common);
            if dump_system {
                let s = load_named_lemma(&d, &lemma)?;
                let cfg = load_named_surface(&d, &s.surface)?;
                print!("{}", base_system(&cfg, &s).map_err(|e| Failure::Input(e.to_string()))?.dump());
            }
            let r = replay_named(&d, &lemma, chain_depth)?;
            print_report(&r, common.tsv);
            if !r.pass() || !r.bounds_match() {
                return Err(Failure::Check);
            }
        }
        Cmd::Tables { expected, ledger, common } => {
            let d = dir(&common);
            let t = expected.unwrap_or_else(|| d.join("tables.tsv"));
            let l = ledger.unwrap_or_else(|| d.join("ledger.tsv"));
            let entries = parse_tables(&t.display().to_string(), &read(&t)?)?;
            let led = parse_ledger(&l.display().to_string(), &read(&l)?)?;
            let rep = reproduce_tables(&d, &entries, &led)?;
            print!("{}", rep.render());
            if rep.exit_code() != 0 {
                return Err(Failure::Check);
            }
        }
        Cmd::Validate { surface, common } => {
            let path = dir(&common).join(format!("{surface}.surface"));
            let text = read(&path)?;
            let cfg = parse_surface(&text).map_err(|e| Failure::Input(e.to_string()))?;
            let v = validate_config(&cfg);
            for x in &v {
                println!("{x}");
            }
            if !v.is_empty() {
                return Err(Failure::Check);
            }
            println!("{surface}: valid");
        }
    }
    Ok(())
}

fn read(p: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
