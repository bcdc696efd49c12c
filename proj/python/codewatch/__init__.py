"""Python access to the codewatch core: session log validation, session
reconstruction, line classification and the synthetic validation harness.

Session documents may be passed as dicts or JSON strings.
"""

import json

from . import _codewatch
from ._codewatch import ValidationError, label_for_score, levenshtein, normalize_line, similarity

__all__ = [
    "ValidationError",
    "canonical",
    "classify",
    "evaluate",
    "generate_logs",
    "label_for_score",
    "levenshtein",
    "normalize_line",
    "reconstruct",
    "run_harness",
    "scenario_names",
    "similarity",
    "validate",
]


def _text(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def validate(document):
    """List of violated rules; empty when the document is valid."""
    return _codewatch.validate(_text(document))


def canonical(document):
    """Canonical single-line encoding of a valid document."""
    return _codewatch.canonical(_text(document))


def reconstruct(document, paste_window_ms=500):
    return json.loads(_codewatch.reconstruct(_text(document), paste_window_ms))


def classify(final_code, logs, include_text=True, include_line_field=True, include_paste=False,
             include_deletion=False):
    return json.loads(_codewatch.classify(final_code, _text(list(logs) if not isinstance(logs, str) else logs),
                                          include_text, include_line_field, include_paste, include_deletion))


def evaluate(predicted, truth):
    return json.loads(_codewatch.evaluate(list(predicted), list(truth)))


def scenario_names():
    return _codewatch.scenario_names()


def generate_logs(name, seed=1):
    return json.loads(_codewatch.generate_logs(name, seed))


def run_harness(seed=1, runs=1, spurious_rate=0.10):
    return json.loads(_codewatch.run_harness(seed, runs, spurious_rate))
