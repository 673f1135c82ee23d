import pytest

from eitrouter.config import preset_text

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def small_config_text(preset: str = "paper-preset", **replacements) -> str:
    """A preset scaled down for fast CLI runs (fewer realizations, coarser grid)."""
    text = preset_text(preset)
    subs = {
        "n_realizations: 200": "n_realizations: 24",
        "n_realizations: 100": "n_realizations: 6",
        "detuning_step_mhz: 0.25": "detuning_step_mhz: 0.5",
    }
    subs.update(replacements)
    for old, new in subs.items():
        assert old in text, old
        text = text.replace(old, new)
    return text


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(small_config_text())
    return path


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
