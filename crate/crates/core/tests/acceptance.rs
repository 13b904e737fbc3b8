//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs without the libtest harness so the lines always print.

use std::process::ExitCode;
use std::time::Instant;

use haarlab::lab::{run_experiment, ExperimentConfig, Report};

const SEED: u64 = 7;

struct Criterion {
    number: usize,
    title: &'static str,
    experiments: &'static [&'static str],
    budget_secs: f64,
}

const CRITERIA: &[Criterion] = &[
    Criterion { number: 1, title: "haar exactness", experiments: &["haar_exactness"], budget_secs: 10.0 },
    Criterion { number: 2, title: "operator identities", experiments: &["decomposition_identity"], budget_secs: 30.0 },
    Criterion { number: 3, title: "shift contraction and blocks", experiments: &["shift_contraction"], budget_secs: 120.0 },
    Criterion { number: 4, title: "weak-type eigenvalue tail", experiments: &["weak_type_tail"], budget_secs: 60.0 },
    Criterion { number: 5, title: "complex median", experiments: &["median_stress"], budget_secs: 120.0 },
    Criterion {
        number: 6,
        title: "paraproduct and commutator equivalence",
        experiments: &["paraproduct_equivalence", "commutator_paraproduct_bound"],
        budget_secs: 180.0,
    },
    Criterion { number: 7, title: "NWO upper and lower", experiments: &["nwo_upper", "nwo_lower"], budget_secs: 180.0 },
    Criterion { number: 8, title: "rank-one commutator", experiments: &["rank_one_commutator"], budget_secs: 60.0 },
    Criterion { number: 9, title: "Janson-Wolff divergence", experiments: &["janson_wolff"], budget_secs: 120.0 },
    Criterion {
        number: 10,
        title: "covering and intersection",
        experiments: &["covering_check", "besov_intersection"],
        budget_secs: 120.0,
    },
    Criterion { number: 11, title: "necessity frame", experiments: &["necessity_lowerbound"], budget_secs: 180.0 },
];

fn run(c: &Criterion) -> (bool, Vec<String>, f64) {
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for name in c.experiments {
        match run_experiment(&ExperimentConfig::named(name).with_seed(SEED)) {
            Ok(Report { verdicts, pass: ok, .. }) => {
                pass &= ok;
                for v in verdicts {
                    notes.push(format!("    {} {name}/{}: {}", if v.pass { "ok  " } else { "FAIL" }, v.name, v.detail));
                }
            }
            Err(e) => {
                pass = false;
                notes.push(format!("    FAIL {name}: error {e}"));
            }
        }
    }
    (pass, notes, start.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for c in CRITERIA {
        if !only.is_empty() && !only.iter().any(|o| c.title.contains(o.as_str()) || c.experiments.contains(&o.as_str())) {
            continue;
        }
        ran += 1;
        let (pass, notes, secs) = run(c);
        let in_budget = secs <= c.budget_secs;
        let ok = pass && in_budget;
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {}: {:.1}s (budget {:.0}s{})",
            if ok { "PASS" } else { "FAIL" },
            c.number,
            c.title,
            secs,
            c.budget_secs,
            if in_budget { "" } else { ", exceeded" }
        );
        for n in notes {
            println!("{n}");
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
