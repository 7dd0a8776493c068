"""Supertile rules: parsing, generation, frequency statistics, spectral tests and diffraction."""

from importlib import resources

from .errors import TilespecError
from .rulespec import RuleSpec, load_rule, parse_rule_file, serialize, validate

SCHEMA_VERSION = "1.0.0"


def report_schema_version() -> str:
    return SCHEMA_VERSION


def shipped_rules() -> list[str]:
    """Names of the rule files bundled with the package."""
    return sorted(p.name[:-5] for p in resources.files(__name__).joinpath("rules").iterdir() if p.name.endswith(".rule"))


def shipped_rule(name: str) -> RuleSpec:
    text = resources.files(__name__).joinpath("rules", f"{name}.rule").read_text(encoding="utf-8")
    return parse_rule_file(text)


def shipped_rule_path(name: str) -> str:
    return str(resources.files(__name__).joinpath("rules", f"{name}.rule"))


__all__ = [
    "RuleSpec",
    "TilespecError",
    "load_rule",
    "parse_rule_file",
    "report_schema_version",
    "serialize",
    "shipped_rule",
    "shipped_rule_path",
    "shipped_rules",
    "validate",
]
