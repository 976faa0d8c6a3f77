//! Acceptance suite: one PASS/FAIL line per criterion, with runtimes.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always
//! printed; the process exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use lattice_series::identity::{bridge_rep_series, IdentityReport, IdentitySuite};
use lattice_series::numerics::{real, Scalar};
use lattice_series::oracle::{oracle_corr1d, oracle_corr2d, oracle_f, OracleConfig};
use lattice_series::reps::{count_reps, sieve_reps, FormCoeffs, RepCache, RepTable};
use lattice_series::series::{
    eval_corr1d, eval_corr2d, eval_f, eval_s1d, sum_brackets21, sum_brackets23, EvalResult, SeriesParams, SumOrder,
    TruncationPolicy,
};

fn r(x: f64) -> Scalar {
    real(x)
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    checks: Vec<(String, bool)>,
    elapsed: Duration,
}

impl Criterion {
    fn new(id: &'static str, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            checks: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    /// Records a residual check of an identity report, or the error that
    /// prevented it.
    fn report(&mut self, label: &str, rep: &lattice_series::error::Result<IdentityReport>, tol: f64) {
        match rep {
            Ok(rep) => self.check(
                format!("{label}: residual {:.2e} < {tol:.0e}, pass flag {}", rep.residual, rep.pass),
                rep.residual < tol && rep.pass && rep.is_consistent(),
            ),
            Err(e) => self.check(format!("{label}: {e}"), false),
        }
    }

    fn timed<T>(&mut self, limit: Option<Duration>, label: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let t0 = Instant::now();
        let out = f(self);
        let dt = t0.elapsed();
        self.elapsed += dt;
        if let Some(limit) = limit {
            self.check(format!("{label}: {:.3}s < {:.0}s", dt.as_secs_f64(), limit.as_secs_f64()), dt < limit);
        }
        out
    }

    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|(_, ok)| *ok)
    }

    fn print(&self) {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        println!("[{verdict}] {} {} ({:.2}s)", self.id, self.title, self.elapsed.as_secs_f64());
        for (what, ok) in &self.checks {
            println!("         {} {what}", if *ok { "ok  " } else { "FAIL" });
        }
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn c1() -> Criterion {
    let mut c = Criterion::new("C1", "EQ25 at (1.2, 0.9) and (1.4, 0.75): residual < 1e-9, < 1 s per point");
    let suite = IdentitySuite::default();
    for (x1, x2) in [(1.2, 0.9), (1.4, 0.75)] {
        let label = format!("EQ25({x1}, {x2})");
        let rep = c.timed(secs(1), &label, |_| suite.residual_eq25(r(x1), r(x2)));
        c.report(&label, &rep, 1e-9);
    }
    c
}

fn c2() -> Criterion {
    let mut c = Criterion::new("C2", "EQ14 at (1,2,3,4) and (2,3,1,5): residual < 1e-9, < 2 s per point with sieve");
    for (a, b, cc, d) in [(1, 2, 3, 4), (2, 3, 1, 5)] {
        let label = format!("EQ14({a},{b},{cc},{d})");
        let rep = c.timed(secs(2), &label, |_| IdentitySuite::default().residual_eq14(a, b, cc, d));
        c.report(&label, &rep, 1e-9);
    }
    c
}

fn c3() -> Criterion {
    let mut c = Criterion::new("C3", "EQ11 at (1.1, 0.8, 0.3) and (2.0, 0.5, 1.0): residual < 1e-8, < 2 s");
    let suite = IdentitySuite::default();
    c.timed(secs(2), "both points", |c| {
        for (x1, x2, w) in [(1.1, 0.8, 0.3), (2.0, 0.5, 1.0)] {
            let rep = suite.residual_eq11(r(x1), r(x2), r(w));
            c.report(&format!("EQ11({x1}, {x2}, {w})"), &rep, 1e-8);
        }
    });
    c
}

fn c4() -> Criterion {
    let mut c = Criterion::new("C4", "EQ21 and EQ23 at (1.1, 0.8, 0.3): residual < 1e-7, < 30 s");
    let suite = IdentitySuite::default();
    c.timed(secs(30), "both relations", |c| {
        let rep = suite.residual_eq21(r(1.1), r(0.8), r(0.3));
        c.report("EQ21(1.1, 0.8, 0.3)", &rep, 1e-7);
        let rep = suite.residual_eq23(r(1.1), r(0.8), r(0.3));
        c.report("EQ23(1.1, 0.8, 0.3)", &rep, 1e-7);
    });
    c
}

fn c5() -> Criterion {
    let mut c = Criterion::new("C5", "EQ13 at (1.1, 0.9, 0.25): corr2d within 1e-7 of the 4096^2 oracle, residual < 1e-6, < 60 s");
    let suite = IdentitySuite::default();
    c.timed(secs(60), "oracle and relation", |c| {
        let (x1, x2, w) = (r(1.1), r(0.9), r(0.25));
        match eval_corr2d(x1, x2, w, &suite.policy) {
            Ok(v) => {
                let o = oracle_corr2d(x1, x2, w, OracleConfig::square(4096).unwrap());
                let d = (v.value - o).norm();
                c.check(format!("|corr2d - oracle| = {d:.2e} < 1e-7"), d < 1e-7);
            }
            Err(e) => c.check(format!("corr2d: {e}"), false),
        }
        let rep = suite.residual_eq13(x1, x2, w);
        c.report("EQ13(1.1, 0.9, 0.25)", &rep, 1e-6);
    });
    c
}

fn c6() -> Criterion {
    let mut c = Criterion::new("C6", "EQ12 at 10 random guarded points: residual < 1e-12 each, < 1 s total");
    let suite = IdentitySuite::default();
    let mut rng = StdRng::seed_from_u64(0x5eed_0012);
    let points: Vec<(f64, f64, f64)> = (0..10)
        .map(|_| (rng.gen_range(0.5..2.0), rng.gen_range(0.5..3.0), rng.gen_range(0.0..1.5)))
        .collect();
    c.timed(secs(1), "10 points", |c| {
        for (x, y, w) in points {
            let p = SeriesParams::real(x, y, w);
            if p.check_guard().is_err() {
                c.check(format!("guard rejected ({x:.4}, {y:.4}, {w:.4})"), false);
                continue;
            }
            let rep = suite.check_symmetry(r(x), r(y), r(w));
            c.report(&format!("EQ12({x:.4}, {y:.4}, {w:.4})"), &rep, 1e-12);
        }
    });
    c
}

fn c7() -> Criterion {
    let mut c = Criterion::new("C7", "eval_f vs 40x40 oracle at 10 points within budget (< 1e-12); corr1d vs 1e6-term oracle < 1e-10");
    let pol = TruncationPolicy::default();
    let points = [
        (1.0, 1.0, 0.0),
        (0.5, 1.0, 0.0),
        (2.0, 0.5, 0.3),
        (1.3, 0.8, 1.0),
        (0.7, 1.5, 0.25),
        (1.0, 2.0, 2.0),
        (1.8, 0.6, 0.5),
        (0.9, 0.9, 0.0),
        (1.5, 1.2, 0.7),
        (0.6, 0.8, 0.1),
    ];
    c.timed(None, "", |c| {
        for (x, y, w) in points {
            let p = SeriesParams::real(x, y, w);
            let label = format!("f({x}, {y}, {w})");
            match (eval_f(&p, &pol), oracle_f(&p, OracleConfig::square(40).unwrap(), SumOrder::RowMajor)) {
                (Ok(v), Ok(o)) => {
                    let d = (v.value - o).norm();
                    c.check(
                        format!("{label}: |eval - oracle| = {d:.2e} <= budget {:.2e} < 1e-12", v.budget.total),
                        d <= v.budget.total && v.budget.total < 1e-12,
                    );
                }
                (Err(e), _) | (_, Err(e)) => c.check(format!("{label}: {e}"), false),
            }
        }
        match eval_corr1d(r(1.1), r(0.8), r(0.3), &pol) {
            Ok(v) => {
                let d = (v.value - oracle_corr1d(r(1.1), r(0.8), r(0.3), 1_000_000)).norm();
                c.check(format!("corr1d(1.1, 0.8, 0.3): |eval - oracle| = {d:.2e} < 1e-10"), d < 1e-10);
            }
            Err(e) => c.check(format!("corr1d: {e}"), false),
        }
    });
    c
}

fn lattice_points(c: FormCoeffs, n_max: u64) -> u64 {
    let mut count = 0;
    let mut x = 1;
    while c.a * x * x + c.b <= n_max {
        let mut y = 1;
        while c.a * x * x + c.b * y * y <= n_max {
            count += 1;
            y += 1;
        }
        x += 1;
    }
    count
}

fn c8() -> Criterion {
    let mut c = Criterion::new("C8", "sieve vs count_reps on (1,1,1e4); symmetry on (1,2), (3,4); lattice-point sums exact");
    c.timed(None, "", |c| {
        let n_max = 10_000;
        let form = FormCoeffs::new(1, 1).unwrap();
        let t = sieve_reps(form, n_max).unwrap();
        let mismatches = (1..=n_max)
            .filter(|&n| t.get(n).map(u64::from) != Some(count_reps(form, n).unwrap()))
            .count();
        c.check(format!("(1,1): {mismatches} mismatches over N <= 1e4"), mismatches == 0);
        let tables: Vec<(RepTable, RepTable)> = [(1, 2), (3, 4)]
            .iter()
            .map(|&(a, b)| {
                let f = FormCoeffs::new(a, b).unwrap();
                (sieve_reps(f, n_max).unwrap(), sieve_reps(f.swapped(), n_max).unwrap())
            })
            .collect();
        for (t, s) in &tables {
            let (a, b) = (t.coeffs.a, t.coeffs.b);
            c.check(format!("r_{{{a},{b}}} = r_{{{b},{a}}} on N <= 1e4"), t.counts == s.counts);
        }
        for t in std::iter::once(&t).chain(tables.iter().map(|(t, _)| t)) {
            let direct = lattice_points(t.coeffs, n_max);
            c.check(
                format!("({},{}): sum of counts {} = lattice points {direct}", t.coeffs.a, t.coeffs.b, t.lattice_points()),
                t.lattice_points() == direct,
            );
        }
    });
    c
}

fn c9() -> Criterion {
    let mut c = Criterion::new("C9", "bridge (1,2,y=1) vs f(sqrt(1/2),1,0) < 1e-12; EQ14 LHS vs EQ25 LHS at (1,2,3,4) < 1e-9");
    let suite = IdentitySuite::default();
    c.timed(None, "", |c| {
        let pol = TruncationPolicy::default();
        let cache = RepCache::in_memory();
        let bridge = bridge_rep_series(&cache, FormCoeffs::new(1, 2).unwrap(), r(1.0), &pol);
        let direct = eval_f(&SeriesParams::real(0.5f64.sqrt(), 1.0, 0.0), &pol);
        match (bridge, direct) {
            (Ok(b), Ok(f)) => {
                let d = (b.value - f.value).norm();
                c.check(format!("|bridge - f| = {d:.2e} < 1e-12"), d < 1e-12);
            }
            (Err(e), _) | (_, Err(e)) => c.check(format!("bridge: {e}"), false),
        }
        let eq14 = suite.residual_eq14(1, 2, 3, 4);
        let eq25 = suite.residual_eq25(r(0.75f64.sqrt()), r(0.5f64.sqrt()));
        match (eq14, eq25) {
            (Ok(a), Ok(b)) => {
                let d = (a.lhs - b.lhs).norm();
                c.check(format!("|EQ14 lhs - EQ25 lhs| = {d:.2e} < 1e-9"), d < 1e-9);
                let d = (a.rhs - b.rhs).norm();
                c.check(format!("|EQ14 rhs - EQ25 rhs| = {d:.2e} < 1e-9"), d < 1e-9);
            }
            (Err(e), _) | (_, Err(e)) => c.check(format!("route consistency: {e}"), false),
        }
    });
    c
}

type Evaluator = (&'static str, fn(f64, f64, f64, &TruncationPolicy) -> lattice_series::error::Result<EvalResult>);

const EVALUATORS: [Evaluator; 6] = [
    ("f", |a, b, w, p| eval_f(&SeriesParams::real(a, b, w), p)),
    ("s1d", |a, b, w, p| eval_s1d(r(a), r(1.0 / b), r(w), p)),
    ("corr1d", |a, b, w, p| eval_corr1d(r(a), r(b), r(w), p)),
    ("corr2d", |a, b, w, p| eval_corr2d(r(a), r(b), r(w), p)),
    ("brackets21", |a, b, w, p| sum_brackets21(r(a), r(b), r(w), p)),
    ("brackets23", |a, b, w, p| sum_brackets23(r(a), r(b), r(w), p)),
];

fn c10() -> Criterion {
    let mut c = Criterion::new("C10", "doubling caps moves every evaluator by less than its budget on a 20-point grid; a 1000x tighter run lands inside both budgets");
    let grid: Vec<(f64, f64, f64)> = [0.7, 0.9, 1.2, 1.6, 2.0]
        .iter()
        .zip([0.3, 0.5, 0.8, 1.1, 1.4].iter().cycle())
        .flat_map(|(&a, &w)| [0.6, 0.85, 1.3, 1.7].map(|b| (a, b, w)))
        .collect();
    assert_eq!(grid.len(), 20);
    c.timed(None, "", |c| {
        for (name, eval) in EVALUATORS {
            for pol in [TruncationPolicy::default(), TruncationPolicy::with_eps(1e-8)] {
                let tight = TruncationPolicy::with_eps(pol.eps_target * 1e-3);
                let (mut worst, mut worst_ref) = (0.0f64, 0.0f64);
                let mut failures = Vec::new();
                for &(a, b, w) in &grid {
                    let runs = (eval(a, b, w, &pol), eval(a, b, w, &pol.with_doubled_caps()), eval(a, b, w, &tight));
                    match runs {
                        (Ok(v), Ok(d), Ok(t)) => {
                            let moved = (v.value - d.value).norm();
                            if moved != 0.0 {
                                worst = worst.max(moved / v.budget.total);
                                if moved >= v.budget.total {
                                    failures.push(format!("({a}, {b}, {w}) doubled caps"));
                                }
                            }
                            // the tighter run must land inside both budgets
                            let off = (v.value - t.value).norm();
                            let allowed = v.budget.total + t.budget.total;
                            worst_ref = worst_ref.max(off / allowed);
                            if off > allowed {
                                failures.push(format!("({a}, {b}, {w}) reference"));
                            }
                        }
                        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => failures.push(format!("({a}, {b}, {w}): {e}")),
                    }
                }
                c.check(
                    format!(
                        "{name} at eps {:.0e}: max |change|/budget = {worst:.2e}, max |v - v_tight|/budgets = {worst_ref:.2e}{}",
                        pol.eps_target,
                        if failures.is_empty() { String::new() } else { format!("; failing {}", failures.join(", ")) }
                    ),
                    failures.is_empty(),
                );
            }
        }
    });
    c
}

fn main() -> ExitCode {
    let criteria: [fn() -> Criterion; 10] = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10];
    let mut failed = 0;
    for run in criteria {
        let c = run();
        c.print();
        if !c.passed() {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
