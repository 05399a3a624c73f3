import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from windrelief.dataset import MonthlyObservation, Role, SiteRecord, write_site_table

FIXTURES = Path(__file__).parent / "fixtures"


def make_sites(n_sites=24, seed=0, n_test=4):
    """Synthetic monthly climatologies where wind speed is driven mostly by
    pressure, radiation and humidity, plus noise."""
    rng = np.random.default_rng(seed)
    sites = []
    for s in range(n_sites):
        lat = float(rng.uniform(8, 32))
        lon = float(rng.uniform(68, 95))
        elev = float(rng.uniform(0, 1500))
        base_p = 101.3 * math.exp(-elev / 8400.0)
        months = []
        for mo in range(1, 13):
            season = math.sin(2 * math.pi * (mo - 3) / 12)
            rad = float(np.clip(230 + 40 * season + rng.normal(0, 15), 50, None))
            temp = 27 - 0.2 * (lat - 20) + 4 * season + float(rng.normal(0, 1))
            rh = float(np.clip(65 + 15 * season + rng.normal(0, 5), 5, 99))
            pres = base_p - 0.4 * season + float(rng.normal(0, 0.1))
            ts = temp + 1.5 + float(rng.normal(0, 0.5))
            ws = 3.0 + 2.5 * (101.3 - pres) / 10 + 0.01 * (rad - 230) + 0.04 * (rh - 65)
            ws = float(max(0.3, ws + rng.normal(0, 0.3)))
            months.append(MonthlyObservation(mo, round(rad, 3), round(temp, 3), round(rh, 3),
                                             round(pres, 4), round(ts, 3), round(ws, 3)))
        role = Role.TESTING if s % max(1, n_sites // max(n_test, 1)) == 0 and n_test else Role.TRAINING
        sites.append(SiteRecord(f"site{s:02d}", "State", round(lat, 4), round(lon, 4),
                                round(elev, 1), role, tuple(months)))
    return sites


@pytest.fixture
def synthetic_sites():
    return make_sites()


@pytest.fixture
def site_csv(tmp_path, synthetic_sites):
    path = tmp_path / "sites.csv"
    write_site_table(synthetic_sites, path)
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
