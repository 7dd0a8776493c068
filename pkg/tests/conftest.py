import pytest

from tilespec import parse_rule_file, shipped_rule, shipped_rules

FIB = """rule fib
kind symbolic
dim 1
alphabet a b
map a -> a b
map b -> a
"""


@pytest.fixture(scope="session")
def rules():
    return {name: shipped_rule(name) for name in shipped_rules()}


def rule_text(*lines):
    return "\n".join(lines) + "\n"


def make_rule(*lines):
    return parse_rule_file(rule_text(*lines))


def symbolic(name, maps, alphabet=None):
    """A symbolic rule from {"a": "ab", ...} (single-character tokens)."""
    alphabet = alphabet or list(maps)
    body = [f"map {s} -> {' '.join(img)}" for s, img in maps.items()]
    return make_rule(f"rule {name}", "kind symbolic", "dim 1", "alphabet " + " ".join(alphabet), *body)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
