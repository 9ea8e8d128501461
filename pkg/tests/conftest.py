import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")


def pytest_runtest_logreport(report):
    """Print one PASS/FAIL line per acceptance criterion as it completes."""
    if report.when != "call":
        return
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    name = report.nodeid.split("::")[-1]
    print(f"\n[acceptance criterion {int(m.group(1)):02d}] {status} ({name}, "
          f"{report.duration:.1f}s)", flush=True)
