"""JSON and CSV serialization.

Matrices are written as arrays of rows whose entries are ``[re, im]``
pairs.  Floats go through ``json`` which emits the shortest repr that
round-trips exactly; CSV cells use 17 significant digits.  Tuple labels
become JSON arrays and come back as tuples.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .instrument import Instrument
from .outcomes import MarkovKernel, OutcomeSpace
from .povm import Povm

CSV_FMT = ".17g"


def matrix_to_literal(a):
    a = np.asarray(a, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def literal_to_matrix(lit, dim=None):
    try:
        arr = np.asarray(lit, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed matrix literal: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ParseError(f"matrix literal must be square rows of [re, im], got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ParseError(f"matrix has {arr.shape[0]} rows, expected {dim}")
    return arr[..., 0] + 1j * arr[..., 1]


def _label_out(lab):
    return [_label_out(x) for x in lab] if isinstance(lab, tuple) else lab


def _label_in(lab):
    if isinstance(lab, list):
        return tuple(_label_in(x) for x in lab)
    if isinstance(lab, (int, str)) and not isinstance(lab, bool):
        return lab
    raise ParseError(f"labels must be ints, strings or arrays of them, got {lab!r}")


def labels_out(space):
    return [_label_out(lab) for lab in space.labels]


def labels_in(raw):
    if not isinstance(raw, list) or not raw:
        raise ParseError("labels must be a non-empty array")
    return [_label_in(lab) for lab in raw]


def _need(doc, *keys):
    if not isinstance(doc, dict):
        raise ParseError("expected a JSON object")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise ParseError(f"missing field(s): {', '.join(missing)}")


def povm_to_json(e):
    doc = {"labels": labels_out(e.space), "dim": e.dim,
           "effects": [matrix_to_literal(a) for a in e.effects]}
    if e.space.is_product:
        doc["factors"] = [labels_out(f) for f in e.space.factors]
    return doc


def _space_from(doc):
    labels = labels_in(doc["labels"])
    factors = doc.get("factors")
    if factors:
        return OutcomeSpace(labels, tuple(OutcomeSpace(labels_in(f)) for f in factors))
    return OutcomeSpace(labels)


def povm_from_json(doc, check=True):
    _need(doc, "labels", "dim", "effects")
    effects = np.array([literal_to_matrix(a, doc["dim"]) for a in doc["effects"]])
    return Povm(_space_from(doc), effects, check=check)


def instrument_to_json(ins):
    return {"labels": labels_out(ins.space), "dim": ins.dim,
            "kraus": [[matrix_to_literal(k) for k in group] for group in ins.kraus]}


def instrument_from_json(doc, check=True):
    _need(doc, "labels", "dim", "kraus")
    groups = [[literal_to_matrix(k, doc["dim"]) for k in group] for group in doc["kraus"]]
    if any(not g for g in groups):
        raise ParseError("every label needs at least one Kraus operator")
    return Instrument(_space_from(doc), groups, check=check)


def kernel_to_json(nu):
    return {"source": labels_out(nu.source), "target": labels_out(nu.target),
            "rows": [[float(v) for v in row] for row in nu.matrix]}


def kernel_from_json(doc):
    _need(doc, "source", "target", "rows")
    return MarkovKernel(OutcomeSpace(labels_in(doc["source"])),
                        OutcomeSpace(labels_in(doc["target"])),
                        np.asarray(doc["rows"], dtype=float))


def certificate_to_json(cert):
    return {"feasible": bool(cert.feasible), "residual": float(cert.residual),
            "kernel": None if cert.kernel is None else kernel_to_json(cert.kernel)}


def conservation_to_json(report):
    return {
        "conserved": bool(report.conserved),
        "residual_forward": float(report.residual_forward),
        "residual_backward": float(report.residual_backward),
        "kernels": {"forward": certificate_to_json(report.cert_forward)["kernel"],
                    "backward": certificate_to_json(report.cert_backward)["kernel"]},
    }


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n", encoding="utf-8")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_povm(path):
    return povm_from_json(read_json(path))


def load_instrument(path):
    return instrument_from_json(read_json(path))


def load_kernel(path):
    return kernel_from_json(read_json(path))


def fmt(x):
    return format(float(x), CSV_FMT)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
