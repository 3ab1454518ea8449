import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from mapsep.ivl import normalize, parse

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def corpus_files(*dirs):
    out = []
    for d in dirs:
        out.extend(sorted((CORPUS / d).glob("*.mivl")))
    return [f for f in out if not f.name.endswith(".expected.mivl") and f.name != "assume_maps.mivl"]


def load(path) -> object:
    return normalize(parse(Path(path).read_text()))


@pytest.fixture(scope="session")
def fig1():
    return load(CORPUS / "paper" / "fig1.mivl")


@pytest.fixture(scope="session")
def fig3():
    return load(CORPUS / "paper" / "fig3.mivl")


ACCEPTANCE: list[str] = []


def record(criterion: str, ok: bool, detail: str = "") -> None:
    line = f"{criterion}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
