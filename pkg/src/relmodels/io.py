"""Reading and writing model and data files.

Model file (JSON)::

    {"name": "...", "cells": ["..."], "matrix": [[0, 1, ...], ...], "description": "..."}

Data file: JSON ``{"counts": [...]}`` aligned to the model's cell order
(``"probs"`` or ``"p_hat"`` are accepted as well, so fitted output can be fed
back), or CSV with one ``cell,count`` row per cell.
"""

from __future__ import annotations

import csv
import json
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ModelValidationError, RelModelError
from .model import ModelMatrix, validate_model


class InputFileError(RelModelError):
    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{path}: {message}")


def bundled_dir() -> Path:
    return Path(str(resources.files("relmodels") / "data"))


def bundled_names() -> list[str]:
    return sorted(p.name for p in bundled_dir().iterdir() if p.suffix in (".json", ".csv"))


def resolve(path) -> Path:
    """Return ``path`` if it exists, else the bundled file of that name."""
    p = Path(path)
    if p.exists():
        return p
    for candidate in (bundled_dir() / p.name, bundled_dir() / f"{p.name}.json"):
        if candidate.exists():
            return candidate
    raise InputFileError(path, "no such file (and no bundled example of that name)")


def _read_json(path: Path):
    text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text else ""
        raise InputFileError(path, f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                                   f"{exc.msg}\n    {line}") from None


def model_from_dict(obj: dict, source="<dict>") -> ModelMatrix:
    if not isinstance(obj, dict) or "matrix" not in obj:
        raise InputFileError(source, 'a model needs a "matrix" field')
    matrix = obj["matrix"]
    cells = obj.get("cells")
    try:
        return validate_model(matrix, cells, name=obj.get("name", ""),
                              description=obj.get("description", ""))
    except ModelValidationError as exc:
        raise InputFileError(source, f"invalid model: {exc}") from exc
    except TypeError as exc:
        raise InputFileError(source, f"malformed matrix: {exc}") from exc


def load_model(path) -> ModelMatrix:
    path = resolve(path)
    return model_from_dict(_read_json(path), path)


def model_to_dict(model: ModelMatrix) -> dict:
    out = {"name": model.name, "cells": list(model.cells), "matrix": model.rows()}
    if model.description:
        out["description"] = model.description
    return out


def save_model(model: ModelMatrix, path) -> None:
    Path(path).write_text(dumps(model_to_dict(model)) + "\n")


def load_counts(path, model: ModelMatrix | None = None) -> np.ndarray:
    """Read a frequency or probability vector, aligned to ``model`` if given."""
    path = resolve(path)
    if path.suffix.lower() == ".csv":
        labels, values = [], []
        with path.open(newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 2:
                    raise InputFileError(path, f"line {lineno}: expected 'cell,count'")
                try:
                    values.append(float(row[1]))
                except ValueError:
                    if lineno == 1:
                        continue  # header
                    raise InputFileError(path, f"line {lineno}: {row[1]!r} is not a number")
                labels.append(row[0].strip())
        return _align(path, labels, values, model)
    obj = _read_json(path)
    for key in ("counts", "probs", "p_hat"):
        if isinstance(obj, dict) and key in obj:
            values = obj[key]
            break
    else:
        raise InputFileError(path, 'expected a "counts" field')
    labels = obj.get("cells")
    return _align(path, labels, values, model)


def _align(path, labels, values, model) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if model is None:
        return arr
    if arr.size != model.I:
        raise InputFileError(path, f"{arr.size} values for a model with {model.I} cells")
    if labels:
        if sorted(labels) != sorted(model.cells):
            raise InputFileError(path, "cell labels do not match the model")
        pos = {c: i for i, c in enumerate(labels)}
        arr = arr[[pos[c] for c in model.cells]]
    return arr


_FLAT_LIST = re.compile(r"\[\s*([^\[\]{}]*?)\s*\]", re.S)


def dumps(obj) -> str:
    """Indented JSON with innermost arrays of scalars kept on one line."""
    text = json.dumps(obj, indent=2, default=_default)
    return _FLAT_LIST.sub(lambda m: "[" + re.sub(r",\s+", ", ", m.group(1)) + "]", text)


def _default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")
