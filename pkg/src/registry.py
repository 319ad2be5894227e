"""
Registry of method families, measure orientations and the reliable-defaults group.

The registry is a human-editable text file; see
resources/default_registry.txt for the grammar.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Union

from .exceptions import ParseError, SchemaError

logger = logging.getLogger(__name__)

FAMILIES = ("AA", "PT.BR", "PT.LP", "OTHER")
HIGHER = "higher"
LOWER = "lower"
DEFAULT_REGISTRY = Path(__file__).parent / "resources" / "default_registry.txt"

_SECTIONS = ("families", "measures", "reliable-defaults")


@dataclass(frozen=True)
class Registry:
    """Method -> family, measure -> orientation, and reliable-defaults methods."""

    families: Dict[str, str] = field(default_factory=dict)
    orientations: Dict[str, str] = field(default_factory=dict)
    rates: FrozenSet[str] = frozenset()
    reliable_defaults: FrozenSet[str] = frozenset()

    def family(self, method: str) -> str:
        """Family of `method`; unlisted methods resolve to OTHER."""
        return self.families.get(method, "OTHER")

    def orientation(self, measure: str) -> str:
        """'higher' or 'lower' for a known measure."""
        try:
            return self.orientations[measure]
        except KeyError:
            raise SchemaError(f"Orientation of measure '{measure}' is unknown")

    def higher_is_better(self, measure: str) -> bool:
        return self.orientation(measure) == HIGHER

    def is_rate(self, measure: str) -> bool:
        return measure in self.rates

    def oriented(self, measure: str, score: float) -> float:
        """Score mapped so that larger always means better."""
        return score if self.higher_is_better(measure) else -score

    def rank_methods(self, measure: str, scores: Dict[str, float]) -> List[str]:
        """Methods ordered best first; equal scores ordered by name."""
        return sorted(scores, key=lambda m: (-self.oriented(measure, scores[m]), m))

    def split_groups(self, methods: Iterable[str]) -> Dict[str, List[str]]:
        """Partition methods into reliable-defaults and hyper-tuned groups."""
        methods = sorted(set(methods))
        return {
            "reliable-defaults": [m for m in methods if m in self.reliable_defaults],
            "hyper-tuned": [m for m in methods if m not in self.reliable_defaults],
        }

    def to_text(self) -> str:
        """Render back into the registry grammar."""
        lines = ["[families]"]
        lines += [f"{m} = {f}" for m, f in sorted(self.families.items())]
        lines += ["", "[measures]"]
        for measure, orientation in sorted(self.orientations.items()):
            suffix = " rate" if measure in self.rates else ""
            lines.append(f"{measure} = {orientation}{suffix}")
        lines += ["", "[reliable-defaults]"]
        lines += sorted(self.reliable_defaults)
        return "\n".join(lines) + "\n"


def parse_registry(text: str, source: str = "<registry>") -> Registry:
    """
    Parse registry text.

    Parameters
    ----------
    text : str
        Registry file content
    source : str
        Name used in error messages

    Returns
    -------
    Registry
        Parsed registry
    """
    families: Dict[str, str] = {}
    orientations: Dict[str, str] = {}
    rates = set()
    defaults = set()
    section: Optional[str] = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ParseError(f"unknown section '{section}'", line_no, source)
            continue
        if section is None:
            raise ParseError("entry outside of a section", line_no, source)

        if section == "reliable-defaults":
            if "=" in line or " " in line:
                raise ParseError("expected a single method name", line_no, source)
            defaults.add(line)
            continue

        if "=" not in line:
            raise ParseError("expected '<key> = <value>'", line_no, source)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ParseError("empty key or value", line_no, source)

        if section == "families":
            if value not in FAMILIES:
                raise ParseError(f"unknown family '{value}'", line_no, source)
            families[key] = value
        else:
            tokens = value.split()
            if tokens[0] not in (HIGHER, LOWER) or tokens[1:] not in ([], ["rate"]):
                raise ParseError(f"bad measure declaration '{value}'", line_no, source)
            orientations[key] = tokens[0]
            if tokens[1:] == ["rate"]:
                rates.add(key)

    return Registry(
        families=families,
        orientations=orientations,
        rates=frozenset(rates),
        reliable_defaults=frozenset(defaults),
    )


def load_registry(filepath: Optional[Union[str, Path]] = None) -> Registry:
    """Load a registry file (the shipped defaults when no path is given)."""
    path = Path(filepath) if filepath else DEFAULT_REGISTRY
    registry = parse_registry(path.read_text(encoding="utf-8"), source=path.name)
    logger.info(
        f"Loaded registry with {len(registry.families)} methods, "
        f"{len(registry.orientations)} measures, "
        f"{len(registry.reliable_defaults)} reliable-defaults methods"
    )
    return registry
