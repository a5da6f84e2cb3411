//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any of them fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gwot::cli::{cmd_table, table_deviation, TABLE_TOL};
use gwot::simulate::{simulate_coupling, simulate_dim_plan, simulate_uncoded, CouplingSpec};
use gwot::{channel, dimension, transport, waterfill, CanonicalProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Slack on non-strict inequalities between independently computed values.
const ORDER_SLACK: f64 = 1e-9;

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn reference() -> CanonicalProblem {
    CanonicalProblem::from_diagonal(&[2.0, 3.0, 1.0], &[3.0, 1.0, 1.0]).unwrap()
}

fn random_problem(rng: &mut ChaCha8Rng, dim: usize) -> CanonicalProblem {
    let draw = |rng: &mut ChaCha8Rng| {
        (0..dim)
            .map(|_| 10f64.powf(rng.random_range(-1.0..1.0)))
            .collect::<Vec<_>>()
    };
    let a = draw(rng);
    let b = draw(rng);
    CanonicalProblem::from_diagonal(&a, &b).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: &[String], summary: String) -> Self {
        if failures.is_empty() {
            Outcome {
                pass: true,
                detail: summary,
            }
        } else {
            let shown = failures
                .iter()
                .take(3)
                .cloned()
                .collect::<Vec<_>>()
                .join("; ");
            Outcome {
                pass: false,
                detail: format!("{} failure(s): {shown}", failures.len()),
            }
        }
    }
}

fn timed(budget: Option<Duration>, check: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut outcome = check();
    let elapsed = start.elapsed();
    if let Some(limit) = budget {
        if elapsed > limit {
            outcome.pass = false;
            outcome.detail = format!("{} (over time budget {:?})", outcome.detail, limit);
        }
    }
    (outcome, elapsed)
}

fn table_regression() -> Outcome {
    let rows = cmd_table(&reference()).unwrap();
    let dev = table_deviation(&rows);
    let failures = if dev <= TABLE_TOL {
        vec![]
    } else {
        vec![format!("max deviation {dev:.3e}")]
    };
    Outcome::new(&failures, format!("18 entries, max deviation {dev:.2e}"))
}

fn curve_endpoints() -> Outcome {
    let p = reference();
    let d_max = transport::d_max(&p);
    let d_min = transport::d_min(&p);
    let uncoded_floor = dimension::one_shot_plan(&p, 1).distortion;
    let mut failures = Vec::new();
    let mut check = |name: &str, value: f64, target: f64, tol: f64| {
        if !((value - target).abs() <= tol) {
            failures.push(format!("{name} = {value} vs {target}"));
        }
    };

    check("dMax", d_max, 11.0, 1e-12);
    check("dMin vs 0.6373", d_min, 0.6373, 1e-3);
    check(
        "CR(0)",
        waterfill::rate_cr(&p, 0.0).unwrap().distortion,
        d_max,
        1e-6,
    );
    check(
        "NoCR(0)",
        waterfill::rate_no_cr(&p, 0.0).unwrap().distortion,
        d_max,
        1e-6,
    );
    check(
        "dim(0)",
        dimension::dim_curve(&p, 0.0).unwrap(),
        d_max,
        1e-6,
    );
    check(
        "envelope(0)",
        channel::d_lower_envelope(&p, 0.0).unwrap(),
        d_max,
        1e-6,
    );
    check(
        "separation(0)",
        channel::d_separation(&p, 0.0).unwrap(),
        d_max,
        1e-6,
    );
    check(
        "hybrid(0)",
        channel::d_hybrid(&p, 0.0).unwrap().total,
        d_max,
        1e-6,
    );
    check(
        "uncoded(0)",
        channel::d_uncoded(&p, 0.0).unwrap(),
        d_max,
        1e-6,
    );

    check(
        "CR(60)",
        waterfill::rate_cr(&p, 60.0).unwrap().distortion,
        d_min,
        1e-3,
    );
    check(
        "NoCR(60)",
        waterfill::rate_no_cr(&p, 60.0).unwrap().distortion,
        d_min,
        1e-3,
    );
    check(
        "dim(3)",
        dimension::dim_curve(&p, 3.0).unwrap(),
        d_min,
        1e-3,
    );
    check(
        "envelope(1e9)",
        channel::d_lower_envelope(&p, 1e9).unwrap(),
        d_min,
        1e-3,
    );
    check(
        "separation(1e9)",
        channel::d_separation(&p, 1e9).unwrap(),
        d_min,
        1e-3,
    );
    check(
        "hybrid(1e9)",
        channel::d_hybrid(&p, 1e9).unwrap().total,
        d_min,
        1e-3,
    );
    check(
        "uncoded(1e12)",
        channel::d_uncoded(&p, 1e12).unwrap(),
        uncoded_floor,
        1e-6,
    );
    check("uncoded floor vs 6.101", uncoded_floor, 6.101, 1e-3);

    let mut outcome = Outcome::new(
        &failures,
        format!("dMax = {d_max}, dMin = {d_min:.10}, uncoded floor = {uncoded_floor:.10}"),
    );
    if !outcome.pass {
        let gap = |d: f64| format!("{:.2e}", d - d_min);
        outcome.detail = format!(
            "{} [gaps to dMin at P=1e12: envelope {}, separation {}, hybrid {}]",
            outcome.detail,
            gap(channel::d_lower_envelope(&p, 1e12).unwrap()),
            gap(channel::d_separation(&p, 1e12).unwrap()),
            gap(channel::d_hybrid(&p, 1e12).unwrap().total),
        );
    }
    outcome
}

fn strict_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut failures = Vec::new();
    let mut checks = 0usize;
    for instance in 0..50 {
        let dim = rng.random_range(1..=6);
        let p = random_problem(&mut rng, dim);
        for _ in 0..10 {
            let r = 10f64.powf(rng.random_range(-2.0..0.7));
            let cr = waterfill::rate_cr(&p, r).unwrap().distortion;
            let ncr = waterfill::rate_no_cr(&p, r).unwrap().distortion;
            let greedy = waterfill::rate_greedy(&p, r).unwrap().distortion;
            if !(cr < ncr) {
                failures.push(format!("#{instance} R={r}: CR {cr} !< NoCR {ncr}"));
            }
            if ncr > greedy + ORDER_SLACK {
                failures.push(format!("#{instance} R={r}: NoCR {ncr} > greedy {greedy}"));
            }

            let power = 10f64.powf(rng.random_range(-2.0..1.5));
            let envelope = channel::d_lower_envelope(&p, power).unwrap();
            let separation = channel::d_separation(&p, power).unwrap();
            let uncoded = channel::d_uncoded(&p, power).unwrap();
            let hybrid = channel::d_hybrid(&p, power).unwrap().total;
            if !(hybrid < separation) {
                failures.push(format!(
                    "#{instance} P={power}: hybrid {hybrid} !< separation {separation}"
                ));
            }
            if envelope > hybrid + ORDER_SLACK || hybrid > uncoded + ORDER_SLACK {
                failures.push(format!(
                    "#{instance} P={power}: {envelope} <= {hybrid} <= {uncoded} violated"
                ));
            }
            checks += 5;
        }
    }
    Outcome::new(
        &failures,
        format!("{checks} inequalities on 50 instances, 0 violations"),
    )
}

fn hybrid_threshold() -> Outcome {
    let p = reference();
    let p_star = channel::hybrid_threshold(&p).unwrap();
    let closed = (3f64.sqrt() - 1.0) / 2.0;
    let mut failures = Vec::new();
    if (p_star - closed).abs() > 1e-15 {
        failures.push(format!("P* = {p_star} vs {closed}"));
    }
    for power in [0.1, 0.3, p_star - 1e-4] {
        let h = channel::d_hybrid(&p, power).unwrap();
        let uncoded = channel::d_uncoded(&p, power).unwrap();
        if h.delta_star != 0.0 || (h.total - uncoded).abs() > 1e-9 {
            failures.push(format!(
                "P={power}: delta* = {}, gap {}",
                h.delta_star,
                h.total - uncoded
            ));
        }
    }
    for power in [p_star + 1e-3, 1.0, 5.0] {
        let h = channel::d_hybrid(&p, power).unwrap();
        let uncoded = channel::d_uncoded(&p, power).unwrap();
        if !(h.delta_star > 0.0 && h.total < uncoded - 1e-9) {
            failures.push(format!(
                "P={power}: delta* = {}, gap {}",
                h.delta_star,
                h.total - uncoded
            ));
        }
    }
    Outcome::new(&failures, format!("P* = {p_star:.15}"))
}

/// Reverse waterfilling level by enumerating active-set sizes.
fn enumerated_level(weights: &[f64], rate: f64) -> f64 {
    let mut log_sum = 0.0;
    let mut level = weights[0];
    for (k, w) in weights.iter().enumerate() {
        log_sum += w.log2();
        let candidate = ((log_sum - 2.0 * rate) / (k + 1) as f64).exp2();
        if candidate < *w {
            level = candidate;
        } else {
            break;
        }
    }
    level
}

/// Hybrid distortion at a fixed power split, written out directly.
fn hybrid_oracle(p: &CanonicalProblem, power: f64, delta: f64) -> f64 {
    let q = p.products();
    let analog_power = (1.0 - delta) * power;
    let analog = -2.0 * (analog_power / (analog_power + 1.0) * q[0]).sqrt();
    let rate = 0.5 * ((power + 1.0) / (analog_power + 1.0)).log2();
    let weights: Vec<f64> = q[1..].iter().map(|x| x.sqrt()).collect();
    let digital = if rate > 0.0 {
        let beta = enumerated_level(&weights, rate);
        -2.0 * weights.iter().map(|w| (w - beta).max(0.0)).sum::<f64>()
    } else {
        0.0
    };
    analog + digital + p.total_variance() + p.mean_offset_sq()
}

fn kkt_and_oracles() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut problems: Vec<CanonicalProblem> = (0..20)
        .map(|_| {
            let dim = rng.random_range(1..=6);
            random_problem(&mut rng, dim)
        })
        .collect();
    problems.push(reference());

    for (i, p) in problems.iter().enumerate() {
        for r in [0.05, 0.3, 1.0, 2.1, 4.1, 8.0] {
            let cr = waterfill::rate_cr(p, r).unwrap();
            let gains = waterfill::cr_marginal_gains(p, &cr.rates);
            let spread = gains
                .iter()
                .fold(0.0f64, |m, g| m.max((g / gains[0] - 1.0).abs()));
            if spread > 1e-6 {
                failures.push(format!("#{i} R={r}: CR marginal spread {spread:.2e}"));
            }
            let ncr = waterfill::rate_no_cr(p, r).unwrap();
            for (g, rate) in p.geometric_means().iter().zip(&ncr.rates) {
                if *rate > 0.0 {
                    let lhs = (-2.0 * rate).exp2() * g;
                    if (lhs / ncr.multiplier - 1.0).abs() > 1e-9 {
                        failures.push(format!(
                            "#{i} R={r}: NoCR level {lhs} vs {}",
                            ncr.multiplier
                        ));
                    }
                }
            }
        }
    }

    let mut two: Vec<CanonicalProblem> = (0..5).map(|_| random_problem(&mut rng, 2)).collect();
    two.push(CanonicalProblem::from_diagonal(&[2.0, 3.0], &[3.0, 1.0]).unwrap());
    let mut worst_grid = f64::NEG_INFINITY;
    for p in &two {
        for r in [0.3, 1.0, 3.0] {
            let cr = waterfill::rate_cr(p, r).unwrap().distortion;
            let ncr = waterfill::rate_no_cr(p, r).unwrap().distortion;
            let steps = (r / 1e-4).round() as usize;
            for k in 0..=steps {
                let r1 = (k as f64 * 1e-4).min(r);
                let split = [r1, (r - r1).max(0.0)];
                let gain_cr = cr - waterfill::cr_distortion(p, &split);
                let gain_ncr = ncr - waterfill::ncr_distortion(p, &split);
                worst_grid = worst_grid.max(gain_cr).max(gain_ncr);
            }
        }
    }
    if worst_grid > 1e-6 {
        failures.push(format!("rate grid beats solver by {worst_grid:.2e}"));
    }

    let mut hybrid_cases: Vec<(usize, f64)> = Vec::new();
    for (i, _) in problems
        .iter()
        .enumerate()
        .filter(|(_, p)| p.dim() >= 2)
        .take(6)
    {
        hybrid_cases.push((i, 10f64.powf(rng.random_range(-1.0..1.5))));
    }
    let last = problems.len() - 1;
    for power in [0.2, 0.5, 1.0, 5.0, 20.0, 50.0] {
        hybrid_cases.push((last, power));
    }
    let mut worst_delta = f64::NEG_INFINITY;
    for (i, power) in hybrid_cases {
        let p = &problems[i];
        let h = channel::d_hybrid(p, power).unwrap();
        let at_star = hybrid_oracle(p, power, h.delta_star);
        if (at_star - h.total).abs() > 1e-12 * h.total.abs().max(1.0) {
            failures.push(format!(
                "#{i} P={power}: oracle {at_star} vs solver {}",
                h.total
            ));
        }
        let grid_best = (0..=100_000)
            .map(|k| hybrid_oracle(p, power, k as f64 * 1e-5))
            .fold(f64::INFINITY, f64::min);
        worst_delta = worst_delta.max(h.total - grid_best);
    }
    if worst_delta > 1e-7 {
        failures.push(format!(
            "delta grid beats golden section by {worst_delta:.2e}"
        ));
    }

    Outcome::new(
        &failures,
        format!("rate grid advantage {worst_grid:.1e}, delta grid advantage {worst_delta:.1e}"),
    )
}

fn monte_carlo() -> Outcome {
    let p = reference();
    let n = 1_000_000;
    let alloc = waterfill::rate_cr(&p, 2.1).unwrap();
    let spec = CouplingSpec::from_allocation(&p, &alloc).unwrap();
    let reports = [
        (
            "coupling R=2.1",
            simulate_coupling(&spec, n, 11).unwrap(),
            alloc.distortion,
        ),
        (
            "uncoded P=1",
            simulate_uncoded(&p, 1.0, n, 12).unwrap(),
            channel::d_uncoded(&p, 1.0).unwrap(),
        ),
        (
            "dim K=1",
            simulate_dim_plan(&p, 1, n, 13).unwrap(),
            dimension::dim_curve(&p, 1.0).unwrap(),
        ),
    ];
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for (name, report, closed) in &reports {
        if (report.theoretical_distortion - closed).abs() > 1e-12 * closed.abs() {
            failures.push(format!(
                "{name}: reported closed form {} vs {closed}",
                report.theoretical_distortion
            ));
        }
        if !report.passed() {
            failures.push(format!(
                "{name}: z = {:.2}, marginal deviation {:.2e}",
                report.z_score(),
                report.max_marginal_deviation
            ));
        }
        summary.push(format!("{name} z={:.2}", report.z_score()));
    }
    Outcome::new(&failures, summary.join(", "))
}

fn greedy_gap() -> Outcome {
    let p = reference();
    let mut failures = Vec::new();
    let greedy = waterfill::rate_greedy(&p, 0.2).unwrap().distortion;
    let ncr = waterfill::rate_no_cr(&p, 0.2).unwrap().distortion;
    if (greedy - 11.0).abs() > 1e-9 {
        failures.push(format!("greedy(0.2) = {greedy}"));
    }
    if !(ncr < 11.0 - 0.1) {
        failures.push(format!("NoCR(0.2) = {ncr}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut worst = 0.0f64;
    for case in 0..10 {
        let p = if case % 2 == 0 {
            random_problem(&mut rng, 1)
        } else {
            let dim = rng.random_range(2..=6);
            let lambda: Vec<f64> = (0..dim)
                .map(|_| 10f64.powf(rng.random_range(-1.0..1.0)))
                .collect();
            CanonicalProblem::from_diagonal(&lambda, &lambda).unwrap()
        };
        for k in 0..20 {
            let r = 0.25 * k as f64;
            let g = waterfill::rate_greedy(&p, r).unwrap().distortion;
            let n = waterfill::rate_no_cr(&p, r).unwrap().distortion;
            worst = worst.max((g - n).abs());
        }
    }
    if worst > 1e-9 {
        failures.push(format!(
            "greedy and NoCR differ by {worst:.2e} on degenerate instances"
        ));
    }
    Outcome::new(
        &failures,
        format!("greedy(0.2) = {greedy}, NoCR(0.2) = {ncr:.6}, degenerate gap {worst:.1e}"),
    )
}

fn convexity() -> Outcome {
    let p = reference();
    let mut failures = Vec::new();
    let mut worst_linear = 0.0f64;
    for k in 0..3 {
        let f = |g: f64| dimension::dim_curve(&p, g).unwrap();
        for (a, b) in [(0.0, 1.0), (0.1, 0.7), (0.25, 0.95), (0.4, 0.6)] {
            let (a, b) = (k as f64 + a, k as f64 + b);
            worst_linear = worst_linear.max((f(0.5 * (a + b)) - 0.5 * (f(a) + f(b))).abs());
        }
    }
    if worst_linear > 1e-12 {
        failures.push(format!(
            "dimension curve not linear between knots: {worst_linear:.2e}"
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut worst_convex = f64::NEG_INFINITY;
    for _ in 0..100 {
        let dim = rng.random_range(1..=6);
        let q = random_problem(&mut rng, dim);
        let a = rng.random_range(0.0..6.0);
        let b = rng.random_range(0.0..6.0);
        for scheme in [waterfill::rate_cr, waterfill::rate_no_cr] {
            let d = |r: f64| scheme(&q, r).unwrap().distortion;
            worst_convex = worst_convex.max(d(0.5 * (a + b)) - 0.5 * (d(a) + d(b)));
        }
    }
    if worst_convex > 1e-9 {
        failures.push(format!("midpoint convexity violated by {worst_convex:.2e}"));
    }
    Outcome::new(
        &failures,
        format!("linearity error {worst_linear:.1e}, worst midpoint excess {worst_convex:.1e}"),
    )
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: Vec<Criterion> = vec![
        (
            "allocation table regression",
            Some(secs(1)),
            table_regression,
        ),
        ("curve endpoints", None, curve_endpoints),
        ("strict ordering", Some(secs(30)), strict_ordering),
        ("hybrid threshold", None, hybrid_threshold),
        ("KKT and oracle equivalence", None, kkt_and_oracles),
        ("Monte Carlo achievability", Some(secs(60)), monte_carlo),
        ("greedy gap", None, greedy_gap),
        ("convexity and shape", None, convexity),
    ];

    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let (outcome, elapsed) = timed(budget, check);
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] AC{} {name} ({:.2}s): {}",
            i + 1,
            elapsed.as_secs_f64(),
            outcome.detail
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
