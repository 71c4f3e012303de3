"""Prompt templates are data, not code.

Each template is a plain text file with named ``{placeholder}`` slots.
Substitution is literal string replacement, so passage text containing
braces can never break rendering. Users may point any stage at their own
template file to change the wording without touching code.
"""

from importlib import resources
from pathlib import Path

LISTWISE = "listwise"
PAIRWISE = "pairwise"
AUTOSUM = "autosum"
FACT_DECOMPOSE = "fact_decompose"
FACT_VERIFY = "fact_verify"


def load_template(name: str, path: str | Path | None = None) -> str:
    """Read a template by name, or from an explicit override file."""
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    resource = resources.files(__package__).joinpath(f"{name}.txt")
    return resource.read_text(encoding="utf-8")


def render(template: str, **values: str) -> str:
    """Fill ``{name}`` slots by literal replacement."""
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out
