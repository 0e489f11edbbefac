from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


@pytest.fixture
def scenarios_dir():
    return SCENARIOS


def base_config(**overrides):
    """Benchmark scenario as a plain dict, shortened for unit tests."""
    cfg = {
        "simulation": {"dt": 0.01, "duration": 10.0},
        "path": {"kind": "lemniscate", "scale": 50.0, "frequency": 0.01},
        "target": {"profile": "benchmark", "position": [0.0, 0.0, 5.0], "attitude_deg": [0.0, 0.0, 45.0]},
        "vehicle": {"position": [-50.0, 0.0, 0.0], "attitude_deg": [0.0, 0.0, 90.0], "speed": 15.0},
        "gains": {"kp": 4.0, "kr": 2.0, "alpha": 1.0},
        "roa": {"c1": 60.0, "c2": 0.05, "cbar": 0.49},
        "autopilot": {"bandwidth": 10.0},
    }
    for section, values in overrides.items():
        cfg.setdefault(section, {}).update(values)
    return cfg


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
