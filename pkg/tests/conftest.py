import os
import sys

from hypothesis import settings

settings.register_profile("cogk", deadline=None, print_blob=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "cogk"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok, detail, secs = results[n]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"C{n:<2} {status}  {title}  [{detail}] ({secs:.2f}s)")
