"""
Error types raised by the toolkit.

All errors derive from ValueError so callers catching ValueError keep working.
"""

from typing import Dict, List, Optional, Tuple


class MlcMetaError(ValueError):
    """Base class for all toolkit errors."""

    kind = "error"

    def to_dict(self) -> Dict:
        """Machine-readable form used by the command-line error report."""
        return {"error": self.kind, "message": str(self)}


class ParseError(MlcMetaError):
    """Malformed input text (ARFF, CSV, registry or catalogue files)."""

    kind = "parse_error"

    def __init__(self, message: str, line: Optional[int] = None, source: str = ""):
        self.line = line
        self.source = source
        location = ""
        if source:
            location = f"{source}"
        if line is not None:
            location = f"{location}:{line}" if location else f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)

    def to_dict(self) -> Dict:
        report = super().to_dict()
        report["line"] = self.line
        report["source"] = self.source
        return report


class SchemaError(MlcMetaError):
    """Well-formed input that violates the data model."""

    kind = "schema_error"


class ContractError(MlcMetaError):
    """A violated operation precondition."""

    kind = "contract_error"


class UndefinedMeasureError(ContractError):
    """Measure has no valid cells to be computed on."""

    kind = "undefined_measure"


class MissingScoresError(SchemaError):
    """Score cells needed by an analysis are absent from the results table."""

    kind = "missing_scores"

    def __init__(self, missing: List[Tuple[str, str, str]]):
        self.missing = sorted(missing)
        preview = ", ".join("/".join(cell) for cell in self.missing[:5])
        more = f" (+{len(self.missing) - 5} more)" if len(self.missing) > 5 else ""
        super().__init__(f"{len(self.missing)} score cells missing: {preview}{more}")

    def to_dict(self) -> Dict:
        report = super().to_dict()
        report["missing"] = [
            {"dataset": d, "method": m, "measure": q} for d, m, q in self.missing
        ]
        return report
