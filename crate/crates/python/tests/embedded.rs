//! Runs the bindings inside an embedded interpreter, without installing the
//! extension module.

use pyo3::ffi::c_str;
use pyo3::prelude::*;
use rydsim_py::rydsim_py;

fn with_module(code: &std::ffi::CStr) {
    pyo3::append_to_inittab!(rydsim_py);
    Python::initialize();
    Python::attach(|py| {
        if let Err(e) = py.run(code, None, None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn bindings_round_trip() {
    with_module(c_str!(
        r#"
import math
import rydsim_py as rs

b = rs.Basis("gate", [1, 1])
assert b.dimension == b.expected_dimension, b.dimension
assert len(b) == b.dimension
assert all(c in (0, 1) for c in b.rydberg_counts())

p = rs.StirapParams.default_pair()
assert abs(p.delta - rs.mhz(200.0)) < 1e-9
p.tau = 1.25
assert p.tau == 1.25

opts = rs.Options(snapshots=11)
run = rs.double_stirap(1, params=rs.StirapParams.default_pair(), options=opts)
assert abs(run.final_ground_phase) < 1e-6, run
assert len(run.trace.times) == 11
assert "r_sym" in run.trace.tracked or len(run.trace.tracked) > 0

assert rs.pi_pulse_closed_form(5, 5) < 1e-12
assert abs(rs.ramsey_reference(math.pi / 2) - 0.5) < 1e-12
assert abs(rs.poisson_loading(2.0, 0) - math.exp(-2.0)) < 1e-15

try:
    rs.Basis("nope", [1])
    raise AssertionError("expected ValueError")
except ValueError:
    pass

def bad(n):
    raise KeyError(n)

try:
    rs.poisson_average(bad, mean=1.0, n_max=2)
    raise AssertionError("expected KeyError")
except KeyError:
    pass

try:
    rs.double_stirap(1, options=rs.Options(step_divisor=0.5, min_steps=1, norm_tolerance=1e-12))
    raise AssertionError("expected IntegrationError")
except rs.IntegrationError:
    pass
"#
    ));
}
