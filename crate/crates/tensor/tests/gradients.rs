use lexgaze_tensor::gradcheck::op_suite;

#[test]
fn every_op_matches_central_differences() {
    for seed in [1, 2, 3] {
        for c in op_suite(seed).unwrap() {
            assert!(c.passed(), "seed {seed}: {} rel err {:.3e} (tol {:.0e})", c.op, c.max_rel_err, c.tolerance);
        }
    }
}

#[test]
fn report_worst_errors() {
    let checks = op_suite(7).unwrap();
    for c in &checks {
        println!("{:<18} {:.3e}", c.op, c.max_rel_err);
    }
    assert!(checks.len() >= 20);
}
