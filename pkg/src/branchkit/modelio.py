"""JSON model files.

Layout::

    {"d": 2, "root_type": 1,
     "laws": [{"product": [{"poisson": 1.0}, {"poisson": 0.5}]},
              {"table": [{"v": [2, 0], "p": 0.75}, {"v": [0, 0], "p": 0.25}]}]}

Univariate cells are one of ``{"poisson": rate}``, ``{"binomial": {"n": .., "p": ..}}``,
``{"geometric": p}`` or ``{"constant": c}``.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .model import (Binomial, Constant, Geometric, JointTable, ModelError, ModelSpec, Poisson,
                    ProductForm)

BUILTIN = ("slightly_supercritical", "very_supercritical")


class ModelFileError(ValueError):
    pass


def _cell(obj, where):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ModelFileError(f"{where}: expected a single-key object naming the law family")
    (kind, arg), = obj.items()
    try:
        if kind == "poisson":
            return Poisson(float(arg))
        if kind == "binomial":
            return Binomial(int(arg["n"]), float(arg["p"]))
        if kind == "geometric":
            return Geometric(float(arg))
        if kind == "constant":
            if int(arg) != arg:
                raise ModelError(f"constant must be an integer, got {arg}")
            return Constant(int(arg))
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"{where}: malformed {kind} parameters ({exc})") from None
    except ModelError as exc:
        raise ModelFileError(f"{where}: {exc}") from None
    raise ModelFileError(f"{where}: unknown law family {kind!r}")


def model_from_dict(doc: dict, name: str = "") -> ModelSpec:
    for key in ("d", "laws"):
        if key not in doc:
            raise ModelFileError(f"missing field {key!r}")
    d = doc["d"]
    if not isinstance(d, int) or d < 1:
        raise ModelFileError(f"d: expected a positive integer, got {d!r}")
    laws = []
    for i, entry in enumerate(doc["laws"]):
        where = f"laws[{i}]"
        if not isinstance(entry, dict):
            raise ModelFileError(f"{where}: expected an object")
        if "product" in entry:
            cells = entry["product"]
            if len(cells) != d:
                raise ModelFileError(f"{where}.product: expected {d} cells, got {len(cells)}")
            laws.append(ProductForm([_cell(c, f"{where}.product[{j}]") for j, c in enumerate(cells)]))
        elif "table" in entry:
            rows = []
            for r, row in enumerate(entry["table"]):
                try:
                    v, p = row["v"], row["p"]
                except (KeyError, TypeError):
                    raise ModelFileError(f"{where}.table[{r}]: rows need 'v' and 'p'") from None
                if len(v) != d:
                    raise ModelFileError(f"{where}.table[{r}].v: expected {d} entries")
                rows.append((v, p))
            try:
                laws.append(JointTable(rows))
            except ModelError as exc:
                raise ModelFileError(f"{where}.table: {exc}") from None
        else:
            raise ModelFileError(f"{where}: expected 'product' or 'table'")
    try:
        return ModelSpec(d, laws, int(doc.get("root_type", 1)), name)
    except ModelError as exc:
        raise ModelFileError(str(exc)) from None


def load_model(path) -> ModelSpec:
    """Load a model file, or one of the bundled models by name."""
    path = str(path)
    if path in BUILTIN:
        text = resources.files("branchkit.models").joinpath(f"{path}.json").read_text()
        name = path
    else:
        text = Path(path).read_text()
        name = Path(path).stem
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return model_from_dict(doc, name)


def model_to_dict(model: ModelSpec) -> dict:
    laws = []
    for law in model.laws:
        if isinstance(law, JointTable):
            laws.append({"table": [{"v": [int(x) for x in v], "p": float(p)}
                                   for v, p in zip(law.vectors, law.probs)]})
            continue
        cells = []
        for c in law.cells:
            if isinstance(c, Poisson):
                cells.append({"poisson": c.rate})
            elif isinstance(c, Binomial):
                cells.append({"binomial": {"n": c.trials, "p": c.success}})
            elif isinstance(c, Geometric):
                cells.append({"geometric": c.success})
            else:
                cells.append({"constant": c.value})
        laws.append({"product": cells})
    return {"d": model.d, "root_type": model.root_type, "laws": laws}
