//! Every differentiable tape op against central finite differences.

use inpaint_core::numerics::gradcheck::{op_cases, TOLERANCE};

#[test]
fn all_ops_match_finite_differences() {
    let cases = op_cases();
    assert!(cases.len() >= 20);
    for case in &cases {
        let err = case.worst_error(4).unwrap();
        assert!(err <= TOLERANCE, "{}: relative error {err}", case.name);
    }
}
