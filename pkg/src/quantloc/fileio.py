"""JSON documents for designs, plants and certificate reports, and the trajectory CSV.

Every document carries ``"version": "1"`` and a ``"kind"``.  Floats are
written with ``repr`` (shortest round-tripping form), so ``load(save(x))``
reproduces every number exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .centers import WeightScheme
from .control import CertificateReport, CertParams, LinearPlant
from .geometry import DomainSpec, Partition, Polygon
from .lloyd import QuantizerDesign

VERSION = "1"
CSV_HEADER = ("t", "x1", "x2", "cell_index", "V")


class FormatError(ValueError):
    """A document does not match the expected schema."""


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _check(doc: dict, kind: str) -> dict:
    if not isinstance(doc, dict):
        raise FormatError("document must be a JSON object")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported version {doc.get('version')!r}; expected {VERSION!r}")
    if doc.get("kind") != kind:
        raise FormatError(f"expected a {kind} document, got {doc.get('kind')!r}")
    return doc


def domain_to_dict(d: DomainSpec) -> dict:
    out = {"kind": d.kind, "M": d.M, "m": d.m, "arc_resolution": d.arc_resolution}
    if d.vertices is not None:
        out["vertices"] = [list(v) for v in d.vertices]
    return out


def domain_from_dict(doc: dict) -> DomainSpec:
    verts = doc.get("vertices")
    return DomainSpec(doc["kind"], M=float(doc["M"]), m=float(doc.get("m", 0.0)),
                      arc_resolution=int(doc.get("arc_resolution", 64)),
                      vertices=None if verts is None else tuple(tuple(map(float, v)) for v in verts))


def design_to_dict(design: QuantizerDesign) -> dict:
    scheme = {"kind": design.scheme.kind}
    if design.scheme.L is not None:
        scheme["L"] = _floats(design.scheme.L)
    return {
        "version": VERSION,
        "kind": "design",
        "domain": domain_to_dict(design.domain),
        "scheme": scheme,
        "points": _floats(design.points),
        "cells": [[_floats(r) for r in c.rings] for c in design.cells],
        "cost": design.cost,
    }


def design_from_dict(doc: dict) -> QuantizerDesign:
    _check(doc, "design")
    try:
        domain = domain_from_dict(doc["domain"])
        sd = doc["scheme"]
        scheme = WeightScheme(sd["kind"], None if "L" not in sd else np.array(sd["L"], dtype=float))
        points = np.array(doc["points"], dtype=float).reshape(-1, 2)
        cells = Partition(tuple(Polygon(tuple(np.array(r, dtype=float).reshape(-1, 2) for r in c))
                                for c in doc["cells"]), domain)
        return QuantizerDesign(points, cells, domain, scheme, float(doc["cost"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed design document: {exc}") from exc


def plant_to_dict(plant: LinearPlant, params: CertParams | None = None) -> dict:
    doc = {"version": VERSION, "kind": "plant",
           "A": _floats(plant.A), "B": _floats(plant.B), "K": _floats(plant.K)}
    if params is not None:
        doc["params"] = {k: getattr(params, k) for k in ("M", "epsilon", "m", "lam", "N1", "N2")}
    return doc


def plant_from_dict(doc: dict) -> tuple:
    _check(doc, "plant")
    try:
        plant = LinearPlant(np.array(doc["A"], dtype=float), np.array(doc["B"], dtype=float),
                            np.array(doc["K"], dtype=float))
        params = None if doc.get("params") is None else CertParams(**doc["params"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed plant document: {exc}") from exc
    return plant, params


_REPORT_FIELDS = ("lemma", "feasible", "R1_level", "R2_level", "T", "ultimate_bound", "measure",
                  "measure_kind", "threshold", "attractor_level", "notes")


def report_to_dict(report: CertificateReport) -> dict:
    doc = {"version": VERSION, "kind": "report"}
    for k in _REPORT_FIELDS:
        v = getattr(report, k)
        doc[k] = list(v) if isinstance(v, tuple) else v
    return doc


def report_from_dict(doc: dict) -> CertificateReport:
    _check(doc, "report")
    try:
        kw = {k: doc[k] for k in _REPORT_FIELDS if k in doc}
        kw["notes"] = tuple(kw.get("notes", ()))
        return CertificateReport(**kw)
    except TypeError as exc:
        raise FormatError(f"malformed report document: {exc}") from exc


def dumps(doc: dict) -> str:
    # json writes floats with repr, which round-trips exactly; infinities are not JSON
    def check(x):
        if isinstance(x, float) and not math.isfinite(x):
            raise FormatError("non-finite number in document")
        if isinstance(x, dict):
            for v in x.values():
                check(v)
        elif isinstance(x, list):
            for v in x:
                check(v)

    check(doc)
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def save(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc))


def load(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc


def trajectory_csv(traj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for t, x, c, v in zip(traj.times, traj.states, traj.cell_index, traj.V):
        w.writerow((repr(float(t)), repr(float(x[0])), repr(float(x[1])), int(c), repr(float(v))))
    return buf.getvalue()


def read_trajectory_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise FormatError(f"trajectory CSV must start with the header {','.join(CSV_HEADER)}")
    body = rows[1:]
    return {
        "t": np.array([float(r[0]) for r in body]),
        "x": np.array([[float(r[1]), float(r[2])] for r in body]).reshape(-1, 2),
        "cell_index": np.array([int(r[3]) for r in body], dtype=np.int64),
        "V": np.array([float(r[4]) for r in body]),
    }
