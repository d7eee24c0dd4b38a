"""Shared pytest configuration: the acceptance-criteria terminal summary.

Each acceptance test is named test_cNN_...; after the run one PASS/FAIL
line per criterion is printed so the gate status is readable at a glance.
"""

import re

CRITERIA = {
    1: "discrete critical-coupling table across grid refinements",
    2: "closed-form critical values and profile jump ratio",
    3: "energy trichotomy around the discrete critical coupling",
    4: "chaos critical extraction against direct sampling",
    5: "mean-estimator agreement and sampling-error decay",
    6: "kink-velocity bisection bracket",
    7: "velocity chaos against this build's bisection midpoint",
    8: "amplitude chaos with bisection cross-check",
    9: "Hermite velocity chaos for a truncated-normal launch",
    10: "algebraic property suites",
}

_PATTERN = re.compile(r"test_c(\d{2})_")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[int, bool] = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            match = _PATTERN.search(nodeid)
            if not match:
                continue
            number = int(match.group(1))
            ok = status == "passed"
            outcomes[number] = outcomes.get(number, True) and ok
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        if number in outcomes:
            verdict = "PASS" if outcomes[number] else "FAIL"
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(
            f"criterion {number:2d}: {verdict:7s} {CRITERIA[number]}"
        )
