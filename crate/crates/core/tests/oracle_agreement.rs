use lattice_series::numerics::{real, Scalar};
use lattice_series::oracle::{oracle_bracket21, oracle_corr1d, oracle_corr2d, oracle_f, oracle_s1d, OracleConfig};
use lattice_series::series::{
    eval_bracket21, eval_corr1d, eval_corr2d, eval_f, eval_s1d, SeriesParams, SumOrder, TruncationPolicy,
};

fn r(x: f64) -> Scalar {
    real(x)
}

#[test]
fn f_matches_square_oracle() {
    let pol = TruncationPolicy::default();
    let p = SeriesParams::real(1.0, 1.0, 0.0);
    let v = eval_f(&p, &pol).unwrap();
    let o = oracle_f(&p, OracleConfig::square(40).unwrap(), SumOrder::RowMajor).unwrap();
    assert!((v.value - o).norm() <= 1e-12);
    assert!((v.value - o).norm() <= v.budget.total);
}

#[test]
fn s1d_matches_oracle() {
    let pol = TruncationPolicy::default();
    let v = eval_s1d(r(1.0), r(1.0), r(0.0), &pol).unwrap();
    let o = oracle_s1d(r(1.0), r(1.0), r(0.0), 60).unwrap();
    assert!((v.value - o).norm() <= 1e-13);
}

#[test]
fn corr1d_matches_long_oracle() {
    let pol = TruncationPolicy::default();
    let v = eval_corr1d(r(1.1), r(0.8), r(0.3), &pol).unwrap();
    let o = oracle_corr1d(r(1.1), r(0.8), r(0.3), 1_000_000);
    assert!((v.value - o).norm() <= 1e-10, "{} vs {}", v.value, o);
}

#[test]
fn bracket21_matches_oracle() {
    let pol = TruncationPolicy::default();
    for row in [1u64, 2, 5] {
        let v = eval_bracket21(r(1.1), r(0.8), r(0.3), row, &pol).unwrap();
        let o = oracle_bracket21(r(1.1), r(0.8), r(0.3), row, 1_000_000);
        assert!((v.value - o).norm() <= 1e-9, "r = {row}: {} vs {}", v.value, o);
    }
}

#[test]
fn corr2d_matches_extrapolated_oracle() {
    let pol = TruncationPolicy::default();
    let (x1, x2, w) = (r(1.1), r(0.9), r(0.25));
    let v = eval_corr2d(x1, x2, w, &pol).unwrap();
    let o2 = oracle_corr2d(x1, x2, w, OracleConfig::square(2048).unwrap());
    let o4 = oracle_corr2d(x1, x2, w, OracleConfig::square(4096).unwrap());
    // square truncation error decays like 1/N
    let rich = 2.0 * o4 - o2;
    eprintln!("eval {} budget {:e}; oracle 2048 {} 4096 {} richardson {}", v.value, v.budget.total, o2, o4, rich);
    assert!((v.value - rich).norm() <= 1e-7);
}
