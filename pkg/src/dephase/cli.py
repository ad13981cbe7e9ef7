"""Command-line front end.

    dephase coefficients|decompose|fock|basis|restore --config <path> [--out <dir>] [--seed <u64>]

The configuration is one JSON document (``-`` reads stdin).  Each command
prints its ``report.json`` document to stdout and, with ``--out``, also
writes it together with a CSV table into that directory.  Floats are written
in shortest round-trip form, so identical inputs give byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import bath as bathmod
from . import focksim, kraus, protocol
from .errors import CutoffTooSmall, InfeasibleWeights, RankDeficientInconsistent, SchemeUnavailable
from .numerics import haar_state

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_CUTOFF = 4
EXIT_RESIDUAL = 5
EXIT_SCHEME = 6

DEFAULT_TOLERANCES = {"algebraic": 1e-10, "oracle": 1e-8}

_MODES = {
    "type": "object",
    "additionalProperties": False,
    "required": ["modes"],
    "properties": {
        "modes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["omega", "g"],
                "properties": {"omega": {"type": "number"}, "g": {"type": "number", "minimum": 0}},
            },
        }
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "model": {"enum": list(protocol.MODELS)},
        "n_qubits": {"type": "integer", "minimum": 1, "maximum": 8},
        "scheme": {"enum": list(protocol.SCHEMES)},
        "bath": {"oneOf": [_MODES, {"type": "array", "minItems": 1, "items": _MODES}]},
        "times": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "state": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"type": "string"},
                "amplitudes": {
                    "type": "array",
                    "minItems": 2,
                    "items": {
                        "oneOf": [
                            {"type": "number"},
                            {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        ]
                    },
                },
            },
            "minProperties": 1,
            "maxProperties": 1,
        },
        "cutoff": {"type": "integer", "minimum": 2},
        "cutoff_m": {"type": "integer", "minimum": 1},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "algebraic": {"type": "number", "exclusiveMinimum": 0},
                "oracle": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "shots": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    },
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _cplx(z) -> list:
    z = complex(z)
    # adding 0.0 turns -0.0 into 0.0 so signed zeros never reach the output
    return [float(z.real) + 0.0, float(z.imag) + 0.0]


def _matrix(m: np.ndarray) -> list:
    return [[_cplx(z) for z in row] for row in np.asarray(m)]


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(float(v) + 0.0) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _require(cfg: dict, *keys: str):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")


def _tolerances(cfg: dict) -> dict:
    return {**DEFAULT_TOLERANCES, **cfg.get("tolerances", {})}


def _bath(cfg: dict):
    b = cfg["bath"]
    if isinstance(b, list):
        return tuple(bathmod.BathSpec.from_dict(x) for x in b)
    return bathmod.BathSpec.from_dict(b)


def _single_bath(cfg: dict) -> bathmod.BathSpec:
    b = _bath(cfg)
    if isinstance(b, tuple):
        raise ConfigError("this command takes a single bath")
    return b


def _single_mode(cfg: dict) -> bathmod.Mode:
    b = _single_bath(cfg)
    if len(b) != 1:
        raise ConfigError("the Fock oracle simulates exactly one bath mode")
    return b.modes[0]


_FAMILY = re.compile(r"^\s*(phi|psi|haar)\(\s*([-+0-9.eE]+)\s*\)\s*$")


def parse_state(spec: dict, n_qubits: int) -> np.ndarray:
    """Named family ``phi(a)``, ``psi(a)``, ``haar(seed)`` or explicit amplitudes."""
    dim = 2**n_qubits
    if "family" in spec:
        m = _FAMILY.match(spec["family"])
        if not m:
            raise ConfigError(f"unknown state family {spec['family']!r}")
        name, arg = m.group(1), m.group(2)
        if name == "haar":
            return haar_state(dim, np.random.default_rng(int(arg)))
        if n_qubits != 2:
            raise ConfigError(f"{name}(alpha) is a two-qubit state")
        alpha = float(arg)
        if not 0 <= abs(alpha) <= 1:
            raise ConfigError("alpha must lie in [-1, 1]")
        return protocol.phi_state(alpha) if name == "phi" else protocol.psi_state(alpha)
    amps = np.array([complex(*a) if isinstance(a, list) else complex(a) for a in spec["amplitudes"]])
    if amps.size != dim:
        raise ConfigError(f"expected {dim} amplitudes, got {amps.size}")
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ConfigError("amplitudes are all zero")
    return amps / norm


def _points(cfg: dict) -> list[tuple[float | None, object]]:
    """(t, coefficient-source) pairs: either one gamma override or the time grid."""
    if "gamma" in cfg:
        return [(None, cfg["gamma"])]
    _require(cfg, "bath", "times")
    return [(float(t), None) for t in cfg["times"]]


# ---------------------------------------------------------------- commands


def cmd_coefficients(cfg: dict, seed: int | None):
    _require(cfg, "bath", "times")
    spec = _single_bath(cfg)
    tol = _tolerances(cfg)["algebraic"]
    rows, worst = [], 0.0
    for t in cfg["times"]:
        c = bathmod.dephasing_coefficients(spec, float(t))
        total = abs(c.l1) ** 2 + c.l2**2 + c.l3**2
        worst = max(worst, abs(total - 1.0))
        rows.append([float(x) + 0.0 for x in (t, c.l1.real, c.l1.imag, c.l2, c.l3, c.gamma, total)])
    header = ["t", "re_l1", "im_l1", "l2", "l3", "gamma", "completeness"]
    report = {
        "command": "coefficients",
        "rows": [dict(zip(header, r)) for r in rows],
        "max_completeness_deviation": worst,
        "passed": worst <= tol,
    }
    return report, {"coefficients.csv": _csv_text(header, rows)}, EXIT_OK if worst <= tol else EXIT_CHECK_FAILED


def _decompose_point(cfg: dict, t, gamma_override, tol: float) -> tuple[dict, list]:
    model = cfg.get("model", "common_bath")
    n = cfg.get("n_qubits", 2)
    entry: dict = {"t": _num(t)}
    if model == "individual_baths":
        if gamma_override is not None:
            per = [kraus.single_qubit_parity_from_gamma(gamma_override)] * n
            gammas = [gamma_override] * n
        else:
            baths = _bath(cfg)
            baths = baths if isinstance(baths, tuple) else (baths,) * n
            if len(baths) != n:
                raise ConfigError("need one bath per qubit")
            per = [kraus.build_single_qubit_parity(b, t) for b in baths]
            gammas = [bathmod.coherence_factor(b, t, 1.0) for b in baths]
        ks = kraus.build_individual_tensor(per)
        entry["gamma"] = gammas
        reference = kraus.schur_process_matrix(kraus.hamming_schur_matrix(gammas))
        phase = None
    else:
        coeffs = (
            bathmod.coefficients_from_gamma(gamma_override)
            if gamma_override is not None
            else bathmod.dephasing_coefficients(_single_bath(cfg), t)
        )
        entry["gamma"] = coeffs.gamma
        schur = kraus.build_schur_matrix(n, coeffs.gamma)
        phase = kraus.common_phase_diagonal(n, coeffs.phi_total.real)
        if n == 2:
            reference = kraus.process_matrix(kraus.build_common_nonRU(coeffs))
        else:
            reference = kraus.schur_process_matrix(schur, phase)
        if n == 2:
            entry["parity_closed_form_weights"] = [float(x) for x in kraus.parity_closed_form_weights(coeffs)]
        basis = kraus.ru_sign_basis(n)
        if n >= 3:
            entry["system_matrix"] = kraus.ru_system(basis)[0].tolist()
        try:
            ks = kraus.build_common_RU(coeffs) if n == 2 else kraus.solve_ru_weights(basis, schur)
            ks = kraus.KrausSet(ks.ops, ks.labels, ks.weights, phase)
        except InfeasibleWeights as exc:
            entry["feasible"] = False
            entry["weights"] = list(exc.weights)
            entry["ops"] = None
            entry["equivalence_residual"] = None
            return entry, [[_num(t), entry["gamma"], f"w{i + 1}", w, False] for i, w in enumerate(exc.weights)]
    entry["feasible"] = True
    entry["weights"] = list(ks.weights)
    entry["ops"] = [
        {"label": lab, "matrix": _matrix(op), "weight": w}
        for lab, op, w in zip(ks.labels, ks.ops, ks.weights)
    ]
    if phase is not None:
        entry["phase"] = [_cplx(z) for z in phase]
    _, dev = kraus.decomposition_equivalence(ks.absorb_phase(), reference, tol)
    entry["equivalence_residual"] = dev
    entry["completeness_deviation"] = ks.completeness_deviation()
    g = entry["gamma"] if not isinstance(entry["gamma"], list) else None
    rows = [[_num(t), g, lab, w, True] for lab, w in zip(ks.labels, ks.weights)]
    return entry, rows


def cmd_decompose(cfg: dict, seed: int | None):
    tol = _tolerances(cfg)["algebraic"]
    points, rows = [], []
    for t, g in _points(cfg):
        entry, r = _decompose_point(cfg, t, g, tol)
        points.append(entry)
        rows.extend(r)
    infeasible = any(not p["feasible"] for p in points)
    passed = all(p["equivalence_residual"] <= tol for p in points if p["feasible"])
    report = {
        "command": "decompose",
        "model": cfg.get("model", "common_bath"),
        "n_qubits": cfg.get("n_qubits", 2),
        "points": points,
        "feasible": not infeasible,
        "passed": passed,
    }
    csv_text = _csv_text(["t", "gamma", "label", "weight", "feasible"], rows)
    code = EXIT_INFEASIBLE if infeasible else (EXIT_OK if passed else EXIT_CHECK_FAILED)
    return report, {"decompose.csv": csv_text}, code


def _coupling(cfg: dict) -> focksim.CouplingSpec:
    model = cfg.get("model", "common_bath")
    n = cfg.get("n_qubits", 2 if model == "common_bath" else 1)
    if model == "individual_baths":
        if n != 1:
            raise ConfigError("the Fock oracle simulates one qubit per individual bath")
        return focksim.CouplingSpec.single_qubit()
    return focksim.CouplingSpec.common_bath(n)


def _analytic_coherence(cfg: dict, spec: bathmod.BathSpec, coup: focksim.CouplingSpec, t: float) -> np.ndarray:
    if cfg.get("model", "common_bath") == "individual_baths":
        return kraus.coherence_matrix(kraus.build_single_qubit_parity(spec, t))
    coeffs = bathmod.dephasing_coefficients(spec, t)
    if coup.n_qubits == 2:
        return kraus.coherence_matrix(kraus.build_common_nonRU(coeffs))
    phase = kraus.common_phase_diagonal(coup.n_qubits, coeffs.phi_total.real)
    c = kraus.build_schur_matrix(coup.n_qubits, coeffs.gamma).matrix
    return c * np.outer(phase, phase.conj())


def cmd_fock(cfg: dict, seed: int | None):
    _require(cfg, "bath", "times")
    mode = _single_mode(cfg)
    fcfg = focksim.FockConfig(mode, cfg.get("cutoff", focksim.DEFAULT_CUTOFF), tuple(cfg["times"]))
    coup = _coupling(cfg)
    cutoff_m = cfg.get("cutoff_m", focksim.DEFAULT_CUTOFF_M)
    tol = _tolerances(cfg)["oracle"]
    table = focksim.trace_norm_table(fcfg, coup)
    worst = 0.0
    for t in fcfg.times:
        oracle = focksim.reduced_system_state(fcfg, coup, t, np.ones((coup.dim, coup.dim)))
        worst = max(worst, float(np.max(np.abs(oracle - _analytic_coherence(cfg, fcfg.bath, coup, t)))))
    tail = max((n for _, m, n in table if m >= cutoff_m), default=0.0)
    report = {
        "command": "fock",
        "cutoff": fcfg.cutoff,
        "cutoff_m": cutoff_m,
        "coupling": list(coup.eigenvalues),
        "max_equivalence_residual": worst,
        "max_tail_norm": tail,
        "passed": worst <= tol,
    }
    csv_text = _csv_text(["t", "m", "norm"], [[t, m, nrm] for t, m, nrm in table])
    return report, {"fock.csv": csv_text}, EXIT_OK if worst <= tol else EXIT_CHECK_FAILED


def cmd_basis(cfg: dict, seed: int | None):
    _require(cfg, "bath", "times")
    mode = _single_mode(cfg)
    if cfg.get("model", "common_bath") != "common_bath" or cfg.get("n_qubits", 2) != 2:
        raise ConfigError("basis solves the two-qubit common-bath random-unitary set")
    fcfg = focksim.FockConfig(mode, cfg.get("cutoff", focksim.DEFAULT_CUTOFF), tuple(cfg["times"]))
    coup = focksim.CouplingSpec.common_bath(2)
    cutoff_m = cfg.get("cutoff_m", focksim.DEFAULT_CUTOFF_M)
    tol = _tolerances(cfg)["oracle"]
    rho = (
        protocol.projector(parse_state(cfg["state"], 2))
        if "state" in cfg
        else np.eye(4, dtype=complex) / 4
    )
    points, rows, code = [], [], EXIT_OK
    for t in fcfg.times:
        coeffs = bathmod.dephasing_coefficients(fcfg.bath, t)
        try:
            target = kraus.build_common_RU(coeffs).absorb_phase()
        except InfeasibleWeights as exc:
            points.append({"t": t, "gamma": coeffs.gamma, "weights": list(exc.weights), "feasible": False})
            code = EXIT_INFEASIBLE
            continue
        family = focksim.fock_kraus_family(fcfg, coup, t, cutoff_m)
        try:
            mb = focksim.solve_measurement_basis(target, family, cutoff_m, tol)
        except RankDeficientInconsistent as exc:
            points.append({"t": t, "gamma": coeffs.gamma, "residual": exc.residual, "passed": False})
            code = EXIT_RESIDUAL if code == EXIT_OK else code
            continue
        probs = focksim.outcome_probabilities(mb, fcfg, coup, t, rho)
        tail = float(np.max(np.abs(probs[len(target):]))) if len(probs) > len(target) else 0.0
        ok = mb.residual <= tol and mb.gram_deviation <= tol and tail < tol
        if not ok and code == EXIT_OK:
            code = EXIT_RESIDUAL
        points.append(
            {
                "t": t,
                "gamma": coeffs.gamma,
                "weights": list(target.weights),
                "feasible": True,
                "V": _matrix(mb.V),
                "residual": mb.residual,
                "gram_deviation": mb.gram_deviation,
                "outcome_probabilities": [float(p) for p in probs],
                "max_tail_probability": tail,
                "probability_sum": float(np.sum(probs)),
                "passed": ok,
            }
        )
        for n, row in enumerate(mb.V):
            rows.extend([[t, n + 1, m + 1, z.real, z.imag] for m, z in enumerate(row)])
    report = {"command": "basis", "cutoff_m": cutoff_m, "points": points, "passed": code == EXIT_OK}
    return report, {"basis.csv": _csv_text(["t", "n", "m", "re_V", "im_V"], rows)}, code


def cmd_restore(cfg: dict, seed: int | None):
    _require(cfg, "model", "n_qubits", "scheme", "state")
    n = cfg["n_qubits"]
    state = parse_state(cfg["state"], n)
    bath = _bath(cfg) if "bath" in cfg else None
    seed = seed if seed is not None else cfg.get("seed", 0)
    points, rows = [], []
    ok = True
    for t, g in _points(cfg):
        try:
            sc = protocol.Scenario(
                cfg["model"], n, cfg["scheme"], state, bath, 0.0 if t is None else t, g, search_seed=seed
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        summary = protocol.run_protocol(sc)
        psum = summary.total_probability
        ok = ok and abs(psum - 1.0) <= 1e-10
        entry = {
            "t": _num(t),
            "gamma": g,
            "branches": [
                {"label": b.label, "probability": b.probability, "fidelity": _num(b.fidelity)}
                for b in summary.branches
            ],
            "probability_sum": psum,
            "average_fidelity": summary.average_fidelity,
            "min_fidelity": summary.min_fidelity,
            "success": summary.success,
        }
        if "shots" in cfg:
            s = protocol.sample_run(sc, seed, cfg["shots"])
            entry["sampled"] = {
                "seed": s.seed,
                "shots": s.shots,
                "counts": dict(zip(s.labels, s.counts)),
                "frequencies": dict(zip(s.labels, s.frequencies)),
                "standard_errors": dict(zip(s.labels, s.standard_errors)),
                "mean_fidelity": s.mean_fidelity,
            }
        points.append(entry)
        rows.extend([[_num(t), b.label, b.probability, _num(b.fidelity)] for b in summary.branches])
    report = {"command": "restore", "scheme": cfg["scheme"], "seed": seed, "points": points, "passed": ok}
    csv_text = _csv_text(["t", "label", "probability", "fidelity"], rows)
    return report, {"restore.csv": csv_text}, EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {
    "coefficients": cmd_coefficients,
    "decompose": cmd_decompose,
    "fock": cmd_fock,
    "basis": cmd_basis,
    "restore": cmd_restore,
}


# ---------------------------------------------------------------- entry point


def load_config(path: str) -> dict:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema violation at {'/'.join(map(str, exc.absolute_path)) or '<root>'}: {exc.message}")
    return cfg


def dumps(report: dict) -> str:
    return json.dumps({"format_version": FORMAT_VERSION, **report}, indent=2, allow_nan=False) + "\n"


def run(command: str, cfg: dict, out: str | None = None, seed: int | None = None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    try:
        report, tables, code = COMMANDS[command](cfg, seed)
    except ConfigError as exc:
        print(f"dephase: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except CutoffTooSmall as exc:
        print(f"dephase: {exc}", file=sys.stderr)
        return EXIT_CUTOFF
    except SchemeUnavailable as exc:
        print(f"dephase: {exc}", file=sys.stderr)
        return EXIT_SCHEME
    except InfeasibleWeights as exc:
        print(f"dephase: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    text = dumps(report)
    stdout.write(text)
    if out is not None:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.json").write_text(text)
        for name, body in tables.items():
            (d / name).write_bytes(body.encode())
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dephase", description="Dephasing-channel decompositions and restoration.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file, or - for stdin")
    parser.add_argument("--out", help="directory for report.json and CSV tables")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("dephase: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"dephase: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    return run(args.command, cfg, args.out, args.seed)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
