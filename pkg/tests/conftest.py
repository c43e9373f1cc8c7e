import pytest

from stmreg import Bindings, BoundProperty, EntityRef, Formula
from stmreg.harness import load_scenario

OBJ = "object"


def unary(pred: str) -> Formula:
    return Formula(pred, (("X", OBJ),))


def ref(text: str) -> EntityRef:
    return EntityRef.parse(text)


def prop(pred: str, *entities: str) -> BoundProperty:
    names = ("X", "Y", "Z")[: len(entities)]
    formula = Formula(pred, tuple((n, OBJ) for n in names))
    return BoundProperty(formula, Bindings(zip(names, map(ref, entities))))


@pytest.fixture
def demo():
    scenario = load_scenario("demo_teabox")
    return scenario, scenario.build()


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
