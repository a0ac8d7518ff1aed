"""Deterministic JSON and CSV emission for lattices, jets, and certificates.

The JSON writer is hand-rolled because payload bytes must be reproducible:
floats are rendered with 17 significant digits (enough to round-trip binary64
exactly) and keys keep insertion order.  Parsing uses the stdlib.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction

import numpy as np

from .grid import GridMask, GridSpec, SampledJet, alpha_key, parse_alpha_key


def format_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite float in payload")
    s = format(float(x), ".17g")
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def dumps(obj) -> str:
    """Serialize a payload deterministically (insertion-ordered keys)."""
    parts: list[str] = []
    _write(obj, parts)
    return "".join(parts)


def _write(obj, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, str):
        parts.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(format_float(float(obj)))
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"non-string key {key!r}")
            if i:
                parts.append(",")
            parts.append(json.dumps(key, ensure_ascii=True))
            parts.append(":")
            _write(value, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        parts.append("[")
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        for i, value in enumerate(seq):
            if i:
                parts.append(",")
            _write(value, parts)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def loads(text: str) -> dict:
    return json.loads(text)


def fraction_pair(q: Fraction) -> list[int]:
    q = Fraction(q)
    return [q.numerator, q.denominator]


def pair_fraction(pair) -> Fraction:
    return Fraction(int(pair[0]), int(pair[1]))


def grid_to_payload(grid: GridSpec) -> dict:
    return {
        "origin": [float(v) for v in grid.origin],
        "h": grid.h,
        "extents": list(grid.extents),
        "dim": grid.dim,
    }


def grid_from_payload(payload: dict) -> GridSpec:
    return GridSpec(
        tuple(payload["origin"]), float(payload["h"]), tuple(payload["extents"])
    )


def mask_to_payload(mask: GridMask) -> dict:
    return {
        "grid": grid_to_payload(mask.grid),
        "mask": mask.member.astype(np.int8).ravel(order="C"),
    }


def mask_from_payload(payload: dict) -> GridMask:
    grid = grid_from_payload(payload["grid"])
    member = np.asarray(payload["mask"], dtype=bool).reshape(grid.extents, order="C")
    return GridMask(grid, member)


def jet_to_payload(jet: SampledJet) -> dict:
    return {
        "grid": grid_to_payload(jet.grid),
        "order": jet.order,
        "mask": jet.mask.member.astype(np.int8).ravel(order="C"),
        "components": {
            alpha_key(alpha): jet.components[alpha].ravel(order="C")
            for alpha in jet.alphas()
        },
    }


def jet_from_payload(payload: dict) -> SampledJet:
    grid = grid_from_payload(payload["grid"])
    mask = GridMask(
        grid, np.asarray(payload["mask"], dtype=bool).reshape(grid.extents, order="C")
    )
    components = {
        parse_alpha_key(key): np.asarray(vals, dtype=np.float64).reshape(
            grid.extents, order="C"
        )
        for key, vals in payload["components"].items()
    }
    return SampledJet(int(payload["order"]), grid, mask, components)


def write_artifact(path: str, payload: dict, provenance: dict | None = None) -> None:
    """Write payload JSON; provenance rides along under its own key."""
    doc = dict(payload)
    if provenance is not None:
        doc["provenance"] = provenance
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps(doc))
        fh.write("\n")


def read_artifact(path: str) -> dict:
    """Load an artifact, dropping the provenance key."""
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    doc.pop("provenance", None)
    return doc


def strip_provenance(text: str) -> str:
    """Canonical payload bytes of an artifact: parse, drop provenance, re-dump."""
    doc = json.loads(text)
    doc.pop("provenance", None)
    return dumps(doc)


def jet_to_csv(jet: SampledJet, path: str) -> None:
    """One row per lattice point: index, coordinates, mask bit, components."""
    alphas = jet.alphas()
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        axes = [f"i{a}" for a in range(jet.grid.dim)]
        coords = [f"x{a}" for a in range(jet.grid.dim)]
        writer.writerow(axes + coords + ["mask"] + [alpha_key(a) for a in alphas])
        for index in np.ndindex(*jet.grid.extents):
            point = jet.grid.coord(index)
            row = (
                [str(i) for i in index]
                + [format_float(c) for c in point]
                + [str(int(jet.mask.member[index]))]
                + [format_float(float(jet.components[a][index])) for a in alphas]
            )
            writer.writerow(row)


def mask_to_csv(mask: GridMask, path: str) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        axes = [f"i{a}" for a in range(mask.grid.dim)]
        coords = [f"x{a}" for a in range(mask.grid.dim)]
        writer.writerow(axes + coords + ["mask"])
        for index in np.ndindex(*mask.grid.extents):
            point = mask.grid.coord(index)
            writer.writerow(
                [str(i) for i in index]
                + [format_float(c) for c in point]
                + [str(int(mask.member[index]))]
            )
