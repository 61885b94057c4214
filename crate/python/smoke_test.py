"""Smoke test for the rydsim_py extension.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import cmath
import math

import rydsim_py as rs


def check(label, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {label} {detail}")
    if not ok:
        raise SystemExit(1)


def main():
    basis = rs.Basis("stirap", [2])
    check("basis dimension", basis.dimension == basis.expected_dimension == 8, str(basis.configurations()))

    fast = rs.Options(snapshots=51)
    run = rs.double_stirap(2, switch_detuning=True, options=fast)
    check("switched STIRAP phase", abs(run.final_ground_phase) < 1e-6, repr(run))
    trace = run.trace
    check("trace lengths", len(trace.times) == len(trace.ground_phase) == 51)

    constant = rs.double_stirap(2, switch_detuning=False, options=fast)
    check("constant detuning phase", abs(constant.final_ground_phase) > 0.1, repr(constant))

    arp = rs.double_arp(3, invert_phase=True, options=rs.Options(step_divisor=400))
    check("inverted ARP phase", abs(arp.final_ground_phase) < 1e-6, repr(arp))

    err = rs.phase_error_sweep(1, 1.0, mechanism="arp")
    check("matched ratio", err < 1e-6, f"{err:.2e}")

    pi = [rs.pi_pulse_closed_form(n, 5) for n in range(1, 11)]
    check("pi pulse exact at n_opt", pi[4] < 1e-12)

    report = rs.cnot(1, 1, input=[0, 0, 1, 0])
    check("cnot matrix shape", len(report.logical_matrix) == 4 and all(len(r) == 4 for r in report.logical_matrix))
    check("cnot fidelity", report.fidelity > 0.99, repr(report))

    gate = rs.single_qubit_gate(1, math.pi / 2, 0.0)
    check("rotation fidelity", gate.fidelity > 0.99, repr(gate))

    p1 = rs.ramsey_scan(1, [0.0, math.pi])
    expected = [rs.ramsey_reference(0.0), rs.ramsey_reference(math.pi)]
    check("ramsey fringe", all(abs(a - b) < 1e-2 for a, b in zip(p1, expected)), str(p1))

    avg = rs.poisson_average(lambda n: 1.0 / n, mean=5.0, n_max=15)
    check("poisson weight", abs(avg["weight"] + avg["defect_probability"] - 1) < 1e-3, str(avg))

    b = rs.blockade_estimate(3.2e6, 5.0, 1.0, 4)
    check("blockade ratio", b["ratio"] > 100, str(b))

    try:
        rs.double_stirap(0)
    except ValueError:
        check("invalid atoms rejected", True)
    else:
        check("invalid atoms rejected", False)

    z = report.logical_matrix[3][2]
    check("complex entries", isinstance(z, complex), f"|U[3][2]| = {abs(z):.4f}, arg = {cmath.phase(z):.4f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
