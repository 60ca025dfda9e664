import sys
from pathlib import Path

from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parents[1]
if str(BASE_DIR) not in sys.path:
    sys.path.insert(0, str(BASE_DIR))

load_dotenv(BASE_DIR / ".env")

from app.config import DEFAULT_SEED, SCENARIO_DIR
from app.netsim import run_scenario
from app.scenario import load_scenario

if __name__ == "__main__":
    seed = DEFAULT_SEED
    failures = 0
    for path in sorted(SCENARIO_DIR.glob("*.txt")):
        report = run_scenario(load_scenario(path), seed)
        disagreements = [c.element for c in report.oracle if not c.agrees]
        status = "ok" if report.passed else "FAILED"
        print(f"{status:6} {path.stem}: {len(report.failed_assertions())} failed assertions, oracle disagreements {disagreements or 'none'}")
        failures += not report.passed
    print("Replayed scenarios from:", SCENARIO_DIR)
    sys.exit(1 if failures else 0)
