"""Command-line front end.

    qconserve COMMAND --config run.json [--out DIR] [--tol T] [--seed S]
                      [--expect-conserved]

The config file is a JSON object; flags override the matching keys.
Exit status is 0 on success, 1 on a domain failure and 2 on a usage or
configuration error.
"""

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .conservation import conservation_check, consistency_table, minimality_witness
from .errors import ParseError, QConserveError, ValidationError
from .instrument import compose_povm, induced_povm, n_fold
from .models import (ModelParams, embed_diag_state, number_povm, photon_counting_instrument,
                     quantum_counter_instrument, x_povm)
from .povm import find_post_processing, validate_povm
from .simulate import FockChain, number_law, run_ensemble, stats_from_ensemble

COMMANDS = ("validate", "compose", "povm-order", "conserve", "infinite-approx", "witness", "simulate")
MODELS = ("photon_counting", "quantum_counter", "custom")
MODEL_KEYS = {"model", "lambda_t", "cutoff", "m_max", "grid", "instrument"}
TOP_KEYS = {"command", "model", "n", "k", "tol", "seed", "n_traj", "out", "povm", "povm2",
            "observable", "rho0", "statistic", "sampler", "reference", "expect_conserved",
            "subspace"}
OBSERVABLES = ("number", "intensity", "induced")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


@dataclass
class RunConfig:
    command: str
    model: dict
    n: int = 1
    k: int = 1
    tol: float = 1e-8
    seed: int = None
    n_traj: int = 1000
    out: str = "."
    povm: str = None
    povm2: str = None
    observable: str = None
    rho0: object = None
    statistic: str = "Mk"
    sampler: str = "density"
    reference: dict = None
    expect_conserved: bool = False
    subspace: object = "auto"
    params: ModelParams = field(default=None, repr=False)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_model(m, problems, base):
    if not isinstance(m, dict):
        problems.append("model: must be an object")
        return None
    for key in sorted(set(m) - MODEL_KEYS):
        problems.append(f"model.{key}: unknown key")
    kind = m.get("model")
    if kind not in MODELS:
        problems.append(f"model.model: must be one of {', '.join(MODELS)}")
        return None
    if kind == "custom":
        path = m.get("instrument")
        if not isinstance(path, str):
            problems.append("model.instrument: custom model needs an instrument file")
        elif not (base / path).is_file():
            problems.append(f"model.instrument: file {path!r} does not exist")
        return None
    if "lambda_t" not in m:
        problems.append("model.lambda_t: missing")
    elif not (_is_num(m["lambda_t"]) and m["lambda_t"] > 0):
        problems.append("model.lambda_t: must be a positive number")
    if "cutoff" not in m:
        problems.append("model.cutoff: missing")
    elif not (_is_int(m["cutoff"]) and m["cutoff"] >= 0):
        problems.append("model.cutoff: must be a nonnegative integer")
    m_max = m.get("m_max", 0)
    if kind == "quantum_counter" and "m_max" not in m:
        problems.append("model.m_max: missing (required by the quantum counter)")
    elif not (_is_int(m_max) and m_max >= 0):
        problems.append("model.m_max: must be a nonnegative integer")
    grid = m.get("grid", {})
    if not isinstance(grid, dict):
        problems.append("model.grid: must be an object")
        grid = {}
    for key in sorted(set(grid) - {"nodes", "x_max"}):
        problems.append(f"model.grid.{key}: unknown key")
    nodes = grid.get("nodes", 64)
    x_max = grid.get("x_max")
    if not (_is_int(nodes) and nodes >= 1):
        problems.append("model.grid.nodes: must be a positive integer")
    if x_max is not None and not (_is_num(x_max) and x_max > 0):
        problems.append("model.grid.x_max: must be positive")
    if any(p.startswith("model.") for p in problems):
        return None
    return ModelParams(float(m["lambda_t"]), m["cutoff"], m_max, nodes,
                       None if x_max is None else float(x_max))


def parse_config(text, base_dir="."):
    """Validate a JSON run configuration, reporting every problem at once."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    base = Path(base_dir)
    problems = [f"{key}: unknown key" for key in sorted(set(doc) - TOP_KEYS)]

    cmd = doc.get("command")
    if cmd not in COMMANDS:
        problems.append(f"command: must be one of {', '.join(COMMANDS)}")
    model = doc.get("model")
    params = None
    if model is None:
        problems.append("model: missing")
    else:
        params = _check_model(model, problems, base)

    for key, lo in (("n", 1), ("k", 1), ("n_traj", 1)):
        if key in doc and not (_is_int(doc[key]) and doc[key] >= lo):
            problems.append(f"{key}: must be an integer >= {lo}")
    if "seed" in doc and not (_is_int(doc["seed"]) and doc["seed"] >= 0):
        problems.append("seed: must be a nonnegative integer")
    if "tol" in doc and not (_is_num(doc["tol"]) and doc["tol"] > 0):
        problems.append("tol: must be a positive number")
    for key in ("povm", "povm2"):
        if key in doc:
            if not isinstance(doc[key], str):
                problems.append(f"{key}: must be a file path")
            elif not (base / doc[key]).is_file():
                problems.append(f"{key}: file {doc[key]!r} does not exist")
    if "observable" in doc and doc["observable"] not in OBSERVABLES:
        problems.append(f"observable: must be one of {', '.join(OBSERVABLES)}")
    if doc.get("statistic", "Mk") not in ("Mk", "Xk"):
        problems.append("statistic: must be Mk or Xk")
    if doc.get("sampler", "density") not in ("density", "chain"):
        problems.append("sampler: must be density or chain")
    elif doc.get("sampler") == "chain" and isinstance(model, dict) and model.get("model") == "custom":
        problems.append("sampler: chain needs a built-in model")
    if "rho0" in doc and not isinstance(doc["rho0"], list):
        problems.append("rho0: must be a list of number-state weights or a matrix literal")
    if "reference" in doc and not isinstance(doc["reference"], dict):
        problems.append("reference: must be an object mapping outcomes to probabilities")
    if "expect_conserved" in doc and not isinstance(doc["expect_conserved"], bool):
        problems.append("expect_conserved: must be true or false")
    sub = doc.get("subspace", "auto")
    if not (sub in ("auto", None) or (isinstance(sub, list) and all(_is_int(i) and i >= 0 for i in sub))):
        problems.append("subspace: must be \"auto\", null or a list of basis indices")
    if cmd == "povm-order" and not ("povm" in doc and "povm2" in doc):
        problems.append("povm-order: needs povm and povm2")
    if problems:
        raise ValidationError(problems)

    kw = {k: doc[k] for k in doc if k not in ("command", "model")}
    for key in ("povm", "povm2"):
        if key in kw:
            kw[key] = str(base / kw[key])
    model = dict(model)
    if model["model"] == "custom":
        model["instrument"] = str(base / model["instrument"])
    return RunConfig(cmd, model, params=params, **kw)


def build_instrument(cfg):
    kind = cfg.model["model"]
    if kind == "custom":
        return io.load_instrument(cfg.model["instrument"])
    p = cfg.params
    if kind == "photon_counting":
        return photon_counting_instrument(p.lambda_t, p.cutoff)
    return quantum_counter_instrument(p.lambda_t, p.cutoff, p.m_max)


def build_observable(cfg, ins):
    if cfg.povm is not None:
        return io.load_povm(cfg.povm)
    kind = cfg.model["model"]
    obs = cfg.observable or {"photon_counting": "number", "quantum_counter": "intensity"}.get(kind, "induced")
    if obs == "induced":
        return induced_povm(ins)
    if kind == "custom":
        raise ValidationError([f"observable: {obs!r} needs a built-in model"])
    if obs == "number":
        return number_povm(ins.dim - 1)
    return x_povm(ins.dim - 1, cfg.params.grid())


def _subspace(cfg, ins):
    if cfg.subspace == "auto":
        if cfg.model["model"] == "quantum_counter":
            return range(cfg.params.cutoff + 1)
        return None
    return cfg.subspace


def _initial_state(cfg, dim):
    if cfg.rho0 is None:
        return embed_diag_state([1.0], dim)
    if cfg.rho0 and isinstance(cfg.rho0[0], list):
        return io.literal_to_matrix(cfg.rho0, dim)
    if len(cfg.rho0) > dim:
        raise ValidationError([f"rho0: {len(cfg.rho0)} weights exceed dimension {dim}"])
    return embed_diag_state(cfg.rho0, dim)


def _cmd_validate(cfg, ins, out):
    doc = {"instrument": {"labels": len(ins), "dim": ins.dim,
                          "normalization_defect": ins.normalization_defect()}}
    ok = doc["instrument"]["normalization_defect"] <= 1e-9
    if cfg.povm is not None or cfg.observable is not None:
        e = build_observable(cfg, ins)
        problems = validate_povm(e)
        doc["povm"] = {"outcomes": len(e), "violations": [str(p) for p in problems]}
        ok = ok and not problems
    doc["valid"] = ok
    io.write_json(out / "validation.json", doc)
    io.write_json(out / "instrument.json", io.instrument_to_json(ins))
    return EXIT_OK if ok else EXIT_DOMAIN


def _cmd_compose(cfg, ins, out):
    if cfg.povm is not None:
        io.write_json(out / "composed_povm.json", io.povm_to_json(compose_povm(ins, io.load_povm(cfg.povm))))
    else:
        io.write_json(out / "composed_instrument.json", io.instrument_to_json(n_fold(ins, max(cfg.n, 2))))
    return EXIT_OK


def _cmd_povm_order(cfg, ins, out):
    e1, e2 = io.load_povm(cfg.povm), io.load_povm(cfg.povm2)
    io.write_json(out / "certificate.json", io.certificate_to_json(find_post_processing(e1, e2, cfg.tol)))
    return EXIT_OK


def _cmd_conserve(cfg, ins, out):
    e = build_observable(cfg, ins)
    report = conservation_check(ins, e, cfg.tol, subspace=_subspace(cfg, ins))
    io.write_json(out / "report.json", io.conservation_to_json(report))
    print(f"conserved={report.conserved} residual_forward={report.residual_forward:.3e} "
          f"residual_backward={report.residual_backward:.3e}")
    return EXIT_DOMAIN if cfg.expect_conserved and not report.conserved else EXIT_OK


def _cmd_infinite_approx(cfg, ins, out):
    rows, povms = consistency_table(ins, cfg.n)
    for n, e in enumerate(povms[: cfg.n], start=1):
        io.write_json(out / f"E_{n}.json", io.povm_to_json(e))
    io.write_csv(out / "consistency.csv", ["n", "residual"], [(n, float(r)) for n, r in rows])
    return EXIT_OK


def _cmd_witness(cfg, ins, out):
    f = build_observable(cfg, ins)
    chain = minimality_witness(ins, f, cfg.n, cfg.tol)
    for k, nu in enumerate(chain.kernels, start=1):
        io.write_json(out / f"witness_{k}.json", io.kernel_to_json(nu))
    io.write_json(out / "witness.json", {
        "depth": chain.depth, "ok": chain.ok,
        "residuals": [float(r) for r in chain.residuals],
        "marginal_residuals": [float(r) for r in chain.marginal_residuals],
        "tolerances": [float(t) for t in chain.tolerances],
    })
    return EXIT_OK if chain.ok else EXIT_DOMAIN


def _cmd_simulate(cfg, ins, out):
    if cfg.seed is None:
        raise ValidationError(["seed: simulate requires --seed or a seed key"])
    rho0 = _initial_state(cfg, ins.dim)
    kind = cfg.model["model"]
    source = FockChain(kind, cfg.params.lambda_t) if cfg.sampler == "chain" else ins
    lambda_t = None if kind == "custom" else cfg.params.lambda_t
    reference = cfg.reference
    if reference is None and kind == "photon_counting" and cfg.statistic == "Mk":
        reference = {n: float(w) for n, w in enumerate(number_law(rho0)) if w > 0}
    elif reference is not None:
        reference = {int(key) if key.lstrip("-").isdigit() else key: float(v) for key, v in reference.items()}
    ens = run_ensemble(source, rho0, cfg.k, cfg.n_traj, cfg.seed)
    stats = stats_from_ensemble(ens, cfg.k, cfg.statistic, lambda_t, reference)

    rows = []
    for i in range(cfg.n_traj):
        for s in range(cfg.k):
            lab = ens.label_at(i, s)
            rows.append((i, s + 1, json.dumps(io._label_out(lab)) if not isinstance(lab, int) else lab,
                         float(ens.probs[i, s])))
    io.write_csv(out / "trajectories.csv", ["index", "step", "outcome", "prob"], rows)
    io.write_json(out / "stats.json", {
        "statistic": stats.statistic, "k": cfg.k, "n_traj": cfg.n_traj, "seed": cfg.seed,
        "mean": stats.mean, "var": stats.var, "tv": stats.tv, "n_invalid": stats.n_invalid,
        "reference": None if reference is None else {str(k): v for k, v in reference.items()},
        "distribution": {str(k): v for k, v in stats.distribution.items()},
    })
    _write_histogram(out / "histogram.dat", stats)
    return EXIT_OK


def _write_histogram(path, stats):
    good = stats.values[np.isfinite(stats.values)]
    lines = []
    if stats.statistic == "Mk":
        lines.append("# M_k frequency")
        for v, p in sorted(stats.distribution.items()):
            lines.append(f"{v} {io.fmt(p)}")
    else:
        counts, edges = np.histogram(good, bins=50)
        dens = counts / max(1, good.size) / np.diff(edges)
        lines.append("# bin_center density")
        for lo, hi, d in zip(edges[:-1], edges[1:], dens):
            lines.append(f"{io.fmt(0.5 * (lo + hi))} {io.fmt(d)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


HANDLERS = {
    "validate": _cmd_validate,
    "compose": _cmd_compose,
    "povm-order": _cmd_povm_order,
    "conserve": _cmd_conserve,
    "infinite-approx": _cmd_infinite_approx,
    "witness": _cmd_witness,
    "simulate": _cmd_simulate,
}


def run(cfg):
    """Execute a parsed configuration; returns the exit status."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ins = build_instrument(cfg)
    return HANDLERS[cfg.command](cfg, ins, out)


def build_parser():
    ap = argparse.ArgumentParser(prog="qconserve", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--n", type=int, help="composition depth")
    ap.add_argument("--k", type=int, help="trajectory length")
    ap.add_argument("--n-traj", type=int, dest="n_traj")
    ap.add_argument("--expect-conserved", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ParseError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ParseError("config must be a JSON object")
        if doc.get("command", args.command) != args.command:
            raise ValidationError([f"command: config says {doc['command']!r}, "
                                   f"command line says {args.command!r}"])
        doc["command"] = args.command
        for key in ("out", "tol", "seed", "n", "k", "n_traj"):
            if getattr(args, key) is not None:
                doc[key] = getattr(args, key)
        if args.expect_conserved:
            doc["expect_conserved"] = True
        cfg = parse_config(json.dumps(doc), path.parent)
        if args.out is not None:
            cfg.out = args.out
        return run(cfg)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QConserveError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
