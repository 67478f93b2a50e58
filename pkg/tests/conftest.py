# tests/conftest.py
import sys, pathlib
import pytest
ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

@pytest.fixture(autouse=True)
def _clean_kpz_env(monkeypatch):
    for name in ('KPZ_NODES', 'KPZ_VERIFY', 'KPZ_WORKERS', 'KPZ_OUT'):
        monkeypatch.delenv(name, raising=False)
