"""Tests for environment settings"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.checkers import SearchBudget
from linsmr.config import ENV_BUDGET_NODES, ENV_BUDGET_OPS, load_settings
from linsmr.errors import ConfigInvalid


def test_defaults():
    settings = load_settings({})
    assert settings.max_ops == 10
    assert settings.max_nodes == 200_000
    assert settings.on_exhaustion == "unknown"


def test_overrides():
    settings = load_settings({ENV_BUDGET_NODES: "500", ENV_BUDGET_OPS: "4"})
    assert (settings.max_nodes, settings.max_ops) == (500, 4)


@pytest.mark.parametrize("value", ["0", "-3", "lots"])
def test_bad_values(value):
    with pytest.raises(ConfigInvalid):
        load_settings({ENV_BUDGET_OPS: value})


def test_budget_from_env(monkeypatch):
    monkeypatch.setenv(ENV_BUDGET_NODES, "77")
    monkeypatch.delenv(ENV_BUDGET_OPS, raising=False)
    budget = SearchBudget.from_env()
    assert budget.max_nodes == 77
    assert budget.max_ops == 10


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
