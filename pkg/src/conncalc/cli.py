"""Command-line interface.

Exit codes: 0 success, 1 a mathematical check failed, 2 input error,
3 an iteration exhausted its budget.  ``CONNCALC_TOL`` overrides the
residual tolerance.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, config
from .bimodule import (
    HSpace,
    compression_identity_check,
    finite_level_two_cell,
    include_h,
    module_compat_residual,
    oracle_flat_dimension,
    pp_basis,
)
from .bratteli import TracialBratteli, validate_zero_cell
from .connection import (
    build_graph_identity,
    build_vertex_model,
    haar_unitary,
    tensor_one_cells,
    validate_one_cell,
)
from .errors import ConnCalcError, ConvergenceError, HypothesisError, SpectralError, StructuralError
from .generate import random_parallel_pair
from .harmonic import horizontal_compose, is_flat, periodic_two_cells, vertical_compose
from .projectfile import (
    InputError,
    Project,
    atomic_write,
    complex_matrix_to_json,
    dumps_canonical,
    load_project,
    serialize,
    write_matrix_bin,
)
from .twocell import NtSpace, loop_matrix, ucp_suite

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

REPORT_SCHEMA = "conncalc.report/1"
TWO_CELL_SCHEMA = "conncalc.two_cells/1"
LOOP_SCHEMA = "conncalc.loop_matrix/1"

BUNDLED_GRAPHS = {
    "golden": [[1, 1], [1, 0]],
    "triangle": [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
    "a3-loop": [[1, 1, 0], [1, 0, 1], [0, 1, 1]],
}


def _cpair(z):
    return [float(np.real(z)), float(np.imag(z))]


def _report(kind, body, tol):
    out = {"schema": REPORT_SCHEMA, "command": kind, "version": __version__,
           "tolerances": dict(config.tolerance_set(), residual=tol)}
    out.update(body)
    return out


def _emit(obj, path=None):
    text = dumps_canonical(_jsonable(obj)) + "\n"
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return _cpair(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _pair(project, text):
    parts = text.split(",")
    if len(parts) != 2:
        raise InputError(f"expected a pair A,B, got {text!r}")
    return project.cell(parts[0].strip()), project.cell(parts[1].strip())


def _pair_index(project, text):
    if ":" in text:
        head, idx = text.rsplit(":", 1)
        try:
            idx = int(idx)
        except ValueError:
            raise InputError(f"bad basis index in {text!r}") from None
    else:
        head, idx = text, 0
    return _pair(project, head), idx


def _sorted_spectrum(mat):
    if mat.shape[0] != mat.shape[1] or mat.size == 0:
        return []
    ev = np.linalg.eigvals(mat)
    key = lambda z: (-round(abs(z), 12), round(float(np.angle(z)) % (2 * np.pi), 12))
    return sorted(ev, key=key)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_validate(args, tol):
    project = load_project(args.file)
    names = [args.cell] if args.cell else sorted(project.one_cells)
    if args.cell:
        project.cell(args.cell)
    towers_used = sorted(project.zero_cells) if not args.cell else sorted(
        {project.tower_name(project.one_cells[args.cell].source),
         project.tower_name(project.one_cells[args.cell].target)})
    ok = True
    zero, one = {}, {}
    for name in towers_used:
        r = validate_zero_cell(project.zero_cells[name], tol)
        ok &= r["ok"]
        zero[name] = r
    for name in names:
        c = project.one_cells[name]
        r = validate_one_cell(c, tol)
        if r["ok"] and c.is_parallel(c):
            u = ucp_suite(c, c.preperiod + 1, tol=tol)
            r["ucp"] = u
        ok &= r["ok"]
        one[name] = r
    _emit(_report("validate", {"file": os.path.basename(args.file), "ok": bool(ok),
                               "zero_cells": zero, "one_cells": one}, tol))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_loop_matrix(args, tol):
    project = load_project(args.file)
    c1, c2 = _pair(project, args.pair)
    if not c1.is_parallel(c2):
        raise InputError(f"1-cells {c1.name!r} and {c2.name!r} are not parallel")
    if args.level < 1:
        raise InputError("--level must be at least 1")
    op = loop_matrix(c1, c2, args.level)
    spec = _sorted_spectrum(op.matrix) if op.domain_space.shapes == op.codomain_space.shapes else []
    rho = float(max((abs(z) for z in spec), default=0.0)) if spec else None
    body = {
        "pair": [c1.name, c2.name],
        "level": args.level,
        "shape": list(op.matrix.shape),
        "spectral_radius": rho,
        "eigenvalues": [_cpair(z) for z in spec],
        "contraction_ok": None if rho is None else bool(rho <= 1 + tol),
    }
    if args.out:
        full = {"schema": LOOP_SCHEMA, "version": __version__, "pair": [c1.name, c2.name],
                "level": args.level, "S": complex_matrix_to_json(op.matrix),
                "S_adjoint": complex_matrix_to_json(op.adjoint_matrix),
                "eigenvalues": [_cpair(z) for z in spec]}
        _emit(full, args.out + ".json")
        write_matrix_bin(args.out + ".S.bin", op.matrix)
        write_matrix_bin(args.out + ".Sstar.bin", op.adjoint_matrix)
        body["files"] = [os.path.basename(args.out) + s for s in (".json", ".S.bin", ".Sstar.bin")]
    _emit(_report("loop-matrix", body, tol))
    return EXIT_OK


def _cell_json(seq, flat):
    sp = NtSpace(seq.domain, seq.codomain, seq.reference_level)
    v = seq.vec_at(seq.reference_level)
    blocks = [{"m": m, "n": n, "block": complex_matrix_to_json(b)} for (m, n), b in sorted(sp.blocks(v).items())]
    phases = [p for p, _ in seq.terms]
    return {
        "phase": _cpair(phases[0]) if len(phases) == 1 else [_cpair(p) for p in phases],
        "blocks": blocks,
        "quasi_flat_residual": seq.quasi_flat_residual,
        "flat": bool(flat.flat),
        "flat_from": flat.flat_from,
        "worst_exchange_residual": flat.worst_residual,
    }


def cmd_flat_part(args, tol):
    project = load_project(args.file)
    c1, c2 = _pair(project, args.pair)
    try:
        cells = periodic_two_cells(c1, c2, require_pf=not args.allow_non_pf, tol=tol)
    except HypothesisError as exc:
        _emit(_report("flat-part", {"pair": [c1.name, c2.name], "refused": True,
                                    "failed_conditions": list(exc.failed)}, tol))
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CHECK
    horizon = args.horizon if args.horizon is not None else c1.preperiod + 3 * c1.period
    flats = [is_flat(s, horizon, config.VERDICT_TOL) for s in cells]
    n_flat = sum(f.flat for f in flats)
    body = {
        "pair": [c1.name, c2.name],
        "reference_level": c1.preperiod,
        "period": c1.period,
        "dimension": len(cells),
        "flat_dimension": n_flat,
        "hypotheses_failed": cells.hypotheses_failed,
        "table": [{"index": i, "phase": _cpair(s.terms[0][0]), "flat": bool(f.flat), "flat_from": f.flat_from,
                   "worst_exchange_residual": f.worst_residual} for i, (s, f) in enumerate(zip(cells, flats))],
    }
    if args.out:
        _emit({"schema": TWO_CELL_SCHEMA, "version": __version__, "pair": [c1.name, c2.name],
               "reference_level": c1.preperiod, "period": c1.period,
               "cells": [_cell_json(s, f) for s, f in zip(cells, flats)]}, args.out)
    _emit(_report("flat-part", body, tol))
    all_flat = n_flat == len(cells)
    return EXIT_OK if (all_flat or cells.hypotheses_failed) else EXIT_CHECK


def cmd_fuse(args, tol):
    project = load_project(args.file)
    outer, inner = project.cell(args.outer), project.cell(args.inner)
    if args.name in project.one_cells:
        raise InputError(f"1-cell {args.name!r} already exists")
    try:
        fused = tensor_one_cells(outer, inner, name=args.name)
    except StructuralError as exc:
        raise InputError(str(exc)) from None
    ro, ri, rf = validate_one_cell(outer, tol), validate_one_cell(inner, tol), validate_one_cell(fused, tol)
    eps_ok = rf["eps"] >= ro["eps"] * ri["eps"] - tol
    m_ok = rf["M"] <= ro["M"] * ri["M"] + tol
    ok = rf["ok"] and eps_ok and m_ok
    body = {"outer": args.outer, "inner": args.inner, "name": args.name, "ok": bool(ok),
            "fused": rf, "bounds": {"eps": rf["eps"], "eps_product": ro["eps"] * ri["eps"],
                                    "M": rf["M"], "M_product": ro["M"] * ri["M"],
                                    "eps_ok": bool(eps_ok), "M_ok": bool(m_ok)}}
    if args.out:
        project.one_cells[args.name] = fused
        atomic_write(args.out, serialize(project))
        body["written"] = os.path.basename(args.out)
    _emit(_report("fuse", body, tol))
    return EXIT_OK if ok else EXIT_CHECK


def _basis_cell(a, b, idx, tol):
    cells = periodic_two_cells(a, b, require_pf=False, tol=tol)
    if not 0 <= idx < len(cells):
        raise InputError(f"2-cell index {idx} out of range for {a.name},{b.name} (dimension {len(cells)})")
    return cells[idx]


def cmd_compose(args, tol):
    project = load_project(args.file)
    if args.vertical:
        (a, b), i = _pair_index(project, args.lower)
        (b2, c), j = _pair_index(project, args.upper)
        if b2 is not b:
            raise InputError("vertical composition needs lower = A,B and upper = B,C")
        result = vertical_compose(_basis_cell(b, c, j, tol), _basis_cell(a, b, i, tol), max_iter=args.max_iter)
    else:
        (l1, l2), i = _pair_index(project, args.inner)
        (o1, o2), j = _pair_index(project, args.outer)
        try:
            result = horizontal_compose(_basis_cell(o1, o2, j, tol), _basis_cell(l1, l2, i, tol),
                                        max_iter=args.max_iter)
        except StructuralError as exc:
            raise InputError(str(exc)) from None
    flat = is_flat(result)
    rep = result.limit_report
    body = {
        "mode": "vertical" if args.vertical else "horizontal",
        "domain": result.domain.name,
        "codomain": result.codomain.name,
        "limit_method": rep["method"],
        "iterations": rep["iterations"],
        "shortcut_gap": rep.get("shortcut_gap"),
        "leftover": rep.get("leftover"),
        "terms": [{"phase": _cpair(p), "norm": float(np.linalg.norm(v))} for p, v in result.terms],
        "flat": bool(flat.flat),
        "worst_exchange_residual": flat.worst_residual,
    }
    if args.out:
        sp = NtSpace(result.domain, result.codomain, result.reference_level)
        v = result.vec_at(result.reference_level)
        _emit({"schema": TWO_CELL_SCHEMA, "version": __version__,
               "pair": [result.domain.name, result.codomain.name],
               "reference_level": result.reference_level, "period": result.period,
               "cells": [{"phase": [_cpair(p) for p, _ in result.terms],
                          "blocks": [{"m": m, "n": n, "block": complex_matrix_to_json(bb)}
                                     for (m, n), bb in sorted(sp.blocks(v).items())]}]}, args.out)
    _emit(_report("compose", body, tol))
    return EXIT_OK


def _oracle_pairs(project):
    names = sorted(project.one_cells)
    for a in names:
        for b in names:
            ca, cb = project.one_cells[a], project.one_cells[b]
            if ca.is_parallel(cb):
                yield ca, cb


def cmd_oracle(args, tol):
    project = load_project(args.file)
    rng = np.random.default_rng(args.seed)
    levels = args.levels if args.levels is not None else (3 if args.suite == "full" else 2)
    thresholds = {"compression": 1e-9, "round_trip": 1e-11, "pp_resolution": 1e-12,
                  "isometry": 1e-11, "module": 1e-10}
    rows = []
    ok = True
    for c in (project.one_cells[n] for n in sorted(project.one_cells)):
        _, pp_res, d_b = pp_basis(c)
        iso = mod = 0.0
        for k in range(levels):
            h = HSpace(c, k)
            x = h.random(rng)
            iso = max(iso, abs(HSpace(c, k + 1).norm(include_h(c, k, x)) - h.norm(x)) / max(h.norm(x), 1e-300))
            mod = max(mod, module_compat_residual(c, k, rng))
        good = pp_res < thresholds["pp_resolution"] and iso < thresholds["isometry"] and mod < thresholds["module"]
        ok &= good
        rows.append({"cell": c.name, "pp_resolution": pp_res, "d_B": d_b, "isometry": iso,
                     "module": mod, "ok": bool(good)})
    pairs = []
    for c1, c2 in _oracle_pairs(project):
        comp = rt = 0.0
        for k in range(1, levels + 1):
            sp = NtSpace(c1, c2, k)
            eta = sp.to_nat(rng.standard_normal(sp.dim) + 1j * rng.standard_normal(sp.dim))
            comp = max(comp, compression_identity_check(c1, c2, k, eta))
            rt = max(rt, finite_level_two_cell(c1, c2, k, eta)["residual"])
        entry = {"pair": [c1.name, c2.name], "compression": comp, "round_trip": rt}
        good = comp < thresholds["compression"] and rt < thresholds["round_trip"]
        if args.suite == "full":
            dims, sat = oracle_flat_dimension(c1, c2, c1.preperiod, levels)
            try:
                hdim = len(periodic_two_cells(c1, c2, require_pf=False, tol=tol))
            except (SpectralError, HypothesisError) as exc:
                hdim = None
                entry["harmonic_error"] = str(exc)
            entry.update({"oracle_dimensions": dims, "saturation_depth": sat, "harmonic_dimension": hdim,
                          "dimensions_agree": hdim == dims[-1]})
            good &= hdim == dims[-1]
        entry["ok"] = bool(good)
        ok &= good
        pairs.append(entry)
    _emit(_report("oracle", {"suite": args.suite, "levels": levels, "seed": args.seed, "ok": bool(ok),
                             "thresholds": thresholds, "cells": rows, "pairs": pairs}, tol))
    return EXIT_OK if ok else EXIT_CHECK


def _graph_from_spec(spec):
    if spec in BUNDLED_GRAPHS:
        return np.array(BUNDLED_GRAPHS[spec]), spec
    if os.path.exists(spec):
        project = load_project(spec)
        if not project.zero_cells:
            raise InputError(f"{spec} has no 0-cells")
        name = sorted(project.zero_cells)[0]
        b = project.zero_cells[name]
        if b.preperiod != 0 or b.period != 1:
            raise InputError(f"0-cell {name!r} is not a constant tower")
        return b.adjacency(1), name
    try:
        return np.array(json.loads(spec), dtype=np.int64), "graph"
    except (json.JSONDecodeError, ValueError):
        raise InputError(f"{spec!r} is not a bundled graph ({sorted(BUNDLED_GRAPHS)}), "
                         "a project file or a JSON matrix") from None


def cmd_gen(args, tol):
    rng = np.random.default_rng(args.seed)
    if args.vertex_model:
        nx, ny = args.vertex_model
        if nx < 1 or ny < 1:
            raise InputError("|X| and |Y| must be positive")
        U = np.eye(nx * ny) if args.identity else haar_unitary(nx * ny, rng)
        c = build_vertex_model(U, nx, ny, name="vertex")
        tower = c.source
        tower.name = f"X{nx}"
        project = Project({tower.name: tower}, {"vertex": c}, {"seed": args.seed},
                          {"vertex": {"generator": "vertex-model", "X": nx, "Y": ny,
                                      "U": complex_matrix_to_json(U)}})
    elif args.graph_identity:
        adj, label = _graph_from_spec(args.graph_identity)
        try:
            tower = TracialBratteli.constant(adj, name=label)
            c = build_graph_identity(tower, name="graph-id")
        except (StructuralError, ConvergenceError) as exc:
            raise InputError(str(exc)) from None
        project = Project({label: tower}, {"graph-id": c}, {}, {"graph-id": {"generator": "graph-identity"}})
    else:
        c1, c2 = random_parallel_pair(rng, max_simples=args.max_simples)
        src, tgt = c1.source, c1.target
        towers = {"source": src} if src is tgt else {"source": src, "target": tgt}
        for k, v in towers.items():
            v.name = k
        project = Project(towers, {"c1": c1, "c2": c2}, {"seed": args.seed}, {})
    text = serialize(project)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="conncalc", description="Unitary connections, loop operators and 2-cells.")
    p.add_argument("--version", action="version", version=f"conncalc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check 0-cells and 1-cells of a project file")
    s.add_argument("file")
    s.add_argument("--cell", help="restrict to one 1-cell (and its 0-cells)")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("loop-matrix", help="matrix of the loop operator and its spectrum")
    s.add_argument("file")
    s.add_argument("--pair", required=True, help="A,B (1-cell names)")
    s.add_argument("--level", type=int, default=1)
    s.add_argument("--out", help="path prefix for PREFIX.json, PREFIX.S.bin, PREFIX.Sstar.bin")
    s.set_defaults(func=cmd_loop_matrix)

    s = sub.add_parser("flat-part", help="2-cell basis in the periodic case with a flatness table")
    s.add_argument("file")
    s.add_argument("--pair", required=True)
    s.add_argument("--horizon", type=int)
    s.add_argument("--allow-non-pf", action="store_true", help="report instead of refusing when PF fails")
    s.add_argument("--out", help="write the 2-cell basis JSON here")
    s.set_defaults(func=cmd_flat_part)

    s = sub.add_parser("fuse", help="tensor product of two 1-cells")
    s.add_argument("file")
    s.add_argument("--outer", required=True)
    s.add_argument("--inner", required=True)
    s.add_argument("--name", required=True)
    s.add_argument("--out", help="write the project with the fused cell added")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("compose", help="vertical or horizontal composition of basis 2-cells")
    s.add_argument("file")
    mode = s.add_mutually_exclusive_group(required=True)
    mode.add_argument("--vertical", action="store_true")
    mode.add_argument("--horizontal", action="store_true")
    s.add_argument("--lower", help="A,B[:i] (vertical)")
    s.add_argument("--upper", help="B,C[:j] (vertical)")
    s.add_argument("--inner", help="L1,L2[:i] (horizontal)")
    s.add_argument("--outer", help="O1,O2[:j] (horizontal)")
    s.add_argument("--max-iter", type=int, help="iteration budget for the limit (exit 3 when exhausted)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compose)

    s = sub.add_parser("oracle", help="cross-check against the finite-level bimodule oracle")
    s.add_argument("file")
    s.add_argument("--suite", choices=("quick", "full"), default="quick")
    s.add_argument("--levels", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("gen", help="generate a project file")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--vertex-model", nargs=2, type=int, metavar=("X", "Y"))
    src.add_argument("--graph-identity", metavar="GRAPH",
                     help=f"bundled graph ({', '.join(sorted(BUNDLED_GRAPHS))}), project file or JSON matrix")
    src.add_argument("--random-pair", action="store_true", help="two random parallel 1-cells")
    s.add_argument("--identity", action="store_true", help="vertex model with U = identity")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-simples", type=int, default=3)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        tol = config.default_tol()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "compose":
        need = ("lower", "upper") if args.vertical else ("inner", "outer")
        missing = [f"--{n}" for n in need if getattr(args, n) is None]
        if missing:
            print(f"error: compose needs {' and '.join(missing)}", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args, tol)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"convergence budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (HypothesisError, SpectralError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except StructuralError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConnCalcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
