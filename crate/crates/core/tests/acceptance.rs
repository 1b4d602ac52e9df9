//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod support;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::expr::{c, div, formulas, pow, rel_err, v, Env};
use tmformer::bounds::{self, ModelCapacity};
use tmformer::cli::{linear_class_bound, linear_class_table};
use tmformer::compiler::{self, DEFAULT_RANGE, DEFAULT_SWEEP};
use tmformer::machines::BUILTINS;
use tmformer::propagation::{self, ErrorLedger, InterventionPlan};
use tmformer::rounds;
use tmformer::sim::QuantizationConfig;
use tmformer::tm::run;

const STEPS: usize = 100;
const K: usize = 3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unquantized_exactness() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut steps = 0;
    for b in &BUILTINS {
        let spec = b.spec();
        let input = b.input_symbols();
        let program = compiler::compile(&spec, K, QuantizationConfig::unquantized()).unwrap();
        let trace = compiler::simulate(&program, &input, STEPS).unwrap();
        let reference = run(&spec, &input, STEPS);
        steps += trace.steps();
        mismatches += trace
            .records
            .iter()
            .filter(|r| !(r.agreement && r.config_agreement))
            .count();
        if trace.steps() != reference.steps() || trace.final_config() != Some(reference.last()) {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 10.0,
        format!("{mismatches} mismatches over {steps} steps on {} machines in {secs:.3} s", BUILTINS.len()),
    )
}

fn quantization_law() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for b in &BUILTINS {
        let spec = b.spec();
        let program = compiler::compile(&spec, K, QuantizationConfig::unquantized()).unwrap();
        let sweep =
            compiler::quantization_sweep(&program, &b.input_symbols(), STEPS, &DEFAULT_SWEEP, DEFAULT_RANGE).unwrap();
        let s_max: Vec<usize> = sweep
            .iter()
            .map(|p| p.first_disagreement.unwrap_or(STEPS + 1))
            .collect();
        let bound_ok = sweep.iter().all(|p| p.within_bound);
        let monotone = s_max.windows(2).all(|w| w[0] <= w[1]);
        ok &= bound_ok && monotone;
        let headroom = sweep.iter().map(|p| p.min_headroom).fold(f64::INFINITY, f64::min);
        notes.push(format!(
            "{}: S_max={s_max:?} bound={} monotone={} min headroom={headroom:.3e}",
            b.name, bound_ok, monotone
        ));
    }
    outcome(ok, notes.join("; "))
}

fn multi_round_equivalence() -> Outcome {
    let mut ok = true;
    let mut runs = 0;
    let mut notes = Vec::new();
    for b in BUILTINS.iter().filter(|b| b.halts) {
        let spec = b.spec();
        let input = b.input_symbols();
        let reference = run(&spec, &input, STEPS);
        let t = reference.steps();
        assert!(reference.halted && t <= STEPS);
        let program = compiler::compile(&spec, K, QuantizationConfig::unquantized()).unwrap();
        let single = compiler::simulate(&program, &input, t).unwrap();
        let single_final = single.final_config().unwrap().clone();
        for s in [1, 2, 5, 10, t] {
            runs += 1;
            let plan = rounds::plan_rounds(t, s, 1.0).unwrap();
            let trace = rounds::run_rounds(&program, &input, &plan).unwrap();
            let audit = rounds::induction_audit(&trace, &plan);
            let good = trace.final_output().tape_word(&spec) == single_final.tape_word(&spec)
                && single_final.tape_word(&spec) == reference.last().tape_word(&spec)
                && trace.final_output() == reference.last()
                && trace.records[0].distance_coord == 0.0
                && audit.passed
                && audit.increments.iter().all(|inc| *inc == 0.0);
            if !good {
                notes.push(format!("{} s={s}", b.name));
            }
            ok &= good;
        }
    }
    let detail = if notes.is_empty() {
        format!("{runs} plans: final tapes equal, round-0 distance 0, zero increments")
    } else {
        format!("failing plans: {}", notes.join(", "))
    };
    outcome(ok, detail)
}

fn random_capacity(rng: &mut ChaCha8Rng) -> ModelCapacity {
    loop {
        let cap = ModelCapacity {
            b_spec: rng.random_range(0.2..3.0),
            l_phi: rng.random_range(0.5..2.0),
            l_max: rng.random_range(1..=4),
            r_x: rng.random_range(0.1..3.0),
            k: rng.random_range(1..=16),
            loss_lipschitz: rng.random_range(0.1..3.0),
            loss_bound: rng.random_range(0.1..3.0),
        };
        if (cap.l_model() - 1.0).abs() > 1e-3 {
            return cap;
        }
    }
}

fn formula_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0_0D5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let cap = random_capacity(&mut rng);
        let m: u64 = rng.random_range(1..=10_000);
        let delta: f64 = rng.random_range(0.001..0.999);
        let eps: f64 = rng.random_range(0.01..2.0);
        let emp: f64 = rng.random_range(0.0..1.0);
        let t: usize = rng.random_range(1..=30);
        let r: usize = rng.random_range(1..=t);
        let env: Env = [
            ("b_spec", cap.b_spec),
            ("l_phi", cap.l_phi),
            ("l_max", cap.l_max as f64),
            ("r_x", cap.r_x),
            ("k", cap.k as f64),
            ("loss_l", cap.loss_lipschitz),
            ("loss_c", cap.loss_bound),
            ("m", m as f64),
            ("delta", delta),
            ("eps", eps),
            ("emp", emp),
            ("t", t as f64),
            ("r", r as f64),
        ]
        .into_iter()
        .collect();
        let next = bounds::sample_complexity_next_token(&cap, eps, delta).unwrap();
        let pairs = [
            (bounds::rademacher_bound(&cap, m).unwrap(), formulas::rademacher()),
            (bounds::generalization_bound(&cap, emp, m, delta).unwrap(), formulas::generalization()),
            (next.m, formulas::next_token()),
            (next.terms.capacity, div(formulas::capacity_term(), pow(v("eps"), c(2.0)))),
            (next.terms.mixed, div(formulas::mixed_term(), pow(v("eps"), c(2.0)))),
            (next.terms.confidence, div(formulas::confidence_term(), pow(v("eps"), c(2.0)))),
            (bounds::sample_complexity_sequence(&cap, eps, delta, t).unwrap().m, formulas::sequence()),
            (bounds::sample_complexity_multiround(&cap, eps, delta, t, r).unwrap().m, formulas::multiround()),
            (bounds::sequence_prefactor(&cap, t).unwrap(), formulas::sequence_prefactor()),
            (bounds::multiround_prefactor(&cap, t, r).unwrap(), formulas::multiround_prefactor()),
        ];
        for (got, tree) in pairs {
            worst = worst.max(rel_err(got, tree.eval(&env)));
        }
    }
    let unit = bounds::sample_complexity_next_token(&ModelCapacity::unit(), 1.0, (-2f64).exp()).unwrap();
    let two = ModelCapacity {
        b_spec: 2.0,
        ..ModelCapacity::unit()
    };
    let pre = bounds::multiround_prefactor(&two, 20, 20).unwrap();
    let ok = worst <= 1e-12 && rel_err(unit.m, 9.0) <= 1e-12 && pre == 6400.0;
    outcome(
        ok,
        format!("max relative error {worst:.2e} over 1000 draws; unit m = {:.15}; prefactor = {pre}", unit.m),
    )
}

fn rademacher_sandwich() -> Outcome {
    let mut ok = true;
    let mut worst_margin = f64::INFINITY;
    for i in 0..20u64 {
        let n = [10, 100, 1000][(i % 3) as usize];
        let seed = 1000 + i;
        let radius = 0.5 + (i as f64) * 0.1;
        let (table, r_x) = linear_class_table(n, 8, 64, radius, seed).unwrap();
        let est = bounds::empirical_rademacher(&table, 10_000, seed).unwrap();
        let closed = linear_class_bound(radius, r_x, n).unwrap();
        let margin = closed + 3.0 * est.stderr - est.mean;
        worst_margin = worst_margin.min(margin / closed);
        ok &= margin >= 0.0;
    }
    outcome(ok, format!("20 instances; smallest relative margin {worst_margin:.3}"))
}

fn propagation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC1E);
    let (mut worst, mut worst_mu, mut min_dl) = (0.0_f64, 0.0_f64, f64::INFINITY);
    for _ in 0..1000 {
        let r: usize = rng.random_range(1..=12);
        let gamma: f64 = rng.random_range(0.01..1.0);
        let gamma_prime: f64 = gamma * rng.random_range(0.0..=1.0);
        let raw: Vec<f64> = (0..r).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut lambda: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let drift: f64 = 1.0 - lambda.iter().sum::<f64>();
        lambda[0] += drift;
        let empirical = (0..r).map(|_| rng.random_range(0.0..1.0)).collect();
        let slack = (0..r).map(|_| rng.random_range(0.0..0.5)).collect();
        let ledger = ErrorLedger::new(vec![gamma; r - 1], lambda, empirical, slack).unwrap();
        let hints: BTreeSet<usize> = (2..=r).filter(|_| rng.random_bool(0.4)).collect();
        let plan = InterventionPlan {
            hint_rounds: hints,
            gamma_prime,
        };
        let iv = propagation::intervention(&ledger, &plan).unwrap();
        let oracle = propagation::modified_lambda_oracle(&ledger, &plan);
        for (i, want) in oracle.iter().enumerate() {
            worst = worst.max(rel_err(iv.big_lambda[i] * iv.kappa[i], *want));
            worst_mu = worst_mu.max((iv.mu[i].iter().sum::<f64>() - 1.0).abs());
        }
        min_dl = min_dl.min(iv.delta_l);
    }
    outcome(
        worst <= 1e-12 && worst_mu <= 1e-12 && min_dl >= 0.0,
        format!("max rel error {worst:.2e}, max |sum mu - 1| {worst_mu:.2e}, min delta L {min_dl:.3e}"),
    )
}

fn divergence() -> Outcome {
    let f = |r: usize| propagation::uniform_closed_form(0.5, 1.0, 1.0, r).unwrap();
    let ratio = f(10_000) / f(1_000);
    let slope = f(10_000) - f(9_999);
    let mut worst: f64 = 0.0;
    for r in 1..=1000 {
        let direct = propagation::uniform_direct_sum(0.5, 1.0, 1.0, r).unwrap();
        worst = worst.max(rel_err(f(r), direct));
    }
    let ok = (9.9..=10.1).contains(&ratio) && (slope - 2.0).abs() <= 0.02 && worst <= 1e-12;
    outcome(
        ok,
        format!("ratio {ratio:.6}, slope {slope:.6}, closed vs direct max rel error {worst:.2e}"),
    )
}

fn lipschitz_audit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11B5);
    let eps_clip = 0.01;
    let points: Vec<(Vec<f64>, usize)> = (0..100)
        .map(|_| {
            let classes: usize = rng.random_range(2..=10);
            let w: Vec<f64> = (0..classes).map(|_| rng.random_range(0.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            let free = 1.0 - classes as f64 * eps_clip;
            let p = w.iter().map(|x| eps_clip + free * x / total).collect();
            (p, rng.random_range(0..classes))
        })
        .collect();
    let report = bounds::ce_lipschitz_audit(eps_clip, &points).unwrap();
    let max_grad = report.points.iter().map(|p| p.grad_norm).fold(0.0, f64::max);
    let max_loss = report.points.iter().map(|p| p.loss).fold(0.0, f64::max);
    let fd = report.max_fd_relative_error();
    let ok = max_grad <= 100.0 && max_loss <= -(eps_clip.ln()) && fd <= 1e-4 && report.all_within_bounds();
    outcome(
        ok,
        format!("max grad {max_grad:.4}, max loss {max_loss:.4}, max fd rel error {fd:.2e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("unquantized simulation exactness", unquantized_exactness),
        ("quantization error law and S_max monotonicity", quantization_law),
        ("multi-round equivalence", multi_round_equivalence),
        ("bound formula fidelity", formula_fidelity),
        ("Rademacher sandwich", rademacher_sandwich),
        ("propagation oracle equality", propagation_oracle),
        ("closed-form divergence", divergence),
        ("cross-entropy Lipschitz audit", lipschitz_audit),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
