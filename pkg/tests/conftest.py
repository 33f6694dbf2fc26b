import sys
from importlib import resources
from pathlib import Path

import pytest

from nml.toplevel.session import Session, SessionConfig

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))
sys.path.insert(0, str(HERE / "golden"))

CORPUS_DIR = resources.files("nml").joinpath("corpus")
CORPUS = sorted(p.name for p in CORPUS_DIR.iterdir() if p.name.endswith(".ml"))


def corpus_source(name: str) -> str:
    return CORPUS_DIR.joinpath(name).read_text()


def run_all(text: str, **config) -> str:
    """Output of every phrase in ``text``, carrying on past errors."""
    s = Session(SessionConfig(**config))
    try:
        out, _ = s.run_text(text, stop_on_error=False)
        return out
    finally:
        s.close()


@pytest.fixture
def session():
    made = []

    def make(**config):
        s = Session(SessionConfig(**config))
        made.append(s)
        return s

    yield make
    for s in made:
        s.close()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
