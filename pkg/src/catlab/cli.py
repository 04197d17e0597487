"""Command line front end.

Every command reads a JSON run configuration. Floats are rejected in the
configuration so that exact parameters survive serialization; rational
entries are written as strings such as ``"1/2"``.

Exit codes: 0 ok, 2 configuration, 3 collision or horizon, 4 precision,
5 budget, 1 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .arith import IntMatrix, aperiodicity_check, spectral_data, trace_sequence
from .bicharacter import BicharacterSpec, ThetaSpec, admissible_thetas, decay_table
from .entropy import ENTROPY_BUDGET, Channel, Partition, convergence_report
from .errors import AperiodicityError, CatlabError, ConfigError
from .horizon import DEFAULT_BUDGET, Window, brute_force_min_n, certificate_n0, relation_free
from .ncpoly import WindowMatrix, classical_factor_check

log = logging.getLogger("catlab")

CAT_MAP = ((2, 1), (1, 1))


def _no_floats(text: str):
    raise ConfigError(f"floats are not allowed in configurations (got {text}); use integers or 'p/q' strings")


def load_config_text(text: str) -> dict:
    try:
        data = json.loads(text, parse_float=_no_floats)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    return data


def _int(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer")
    return v


def _exact(v, name: str) -> Fraction:
    if isinstance(v, bool):
        raise ConfigError(f"{name} must be an integer or a 'p/q' string")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{name}: cannot parse {v!r} as a rational") from None
    raise ConfigError(f"{name} must be an integer or a 'p/q' string")


def _range(v, name: str) -> tuple[int, int]:
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{name} must be [lo, hi]")
    lo, hi = (_int(x, name) for x in v)
    if lo > hi:
        raise ConfigError(f"{name}: lo > hi")
    return lo, hi


def parse_matrix(v) -> IntMatrix:
    if not isinstance(v, list) or not v or any(not isinstance(r, list) or len(r) != len(v) for r in v):
        raise ConfigError("T must be a square list of integer rows")
    return IntMatrix(tuple(tuple(_int(x, "T entry") for x in r) for r in v))


def parse_window(v, dim: int) -> Window:
    if isinstance(v, dict) and "box" in v:
        shape = [_int(x, "box") for x in v["box"]]
        if len(shape) != dim or any(s <= 0 for s in shape):
            raise ConfigError("box must list one positive size per dimension")
        return Window.box(shape, _int(v.get("offset", 0), "offset"))
    if isinstance(v, dict) and "points" in v:
        v = v["points"]
    if isinstance(v, list) and v:
        pts = []
        for p in v:
            if not isinstance(p, list) or len(p) != dim:
                raise ConfigError("window points must have one coordinate per dimension")
            pts.append(tuple(_int(x, "point") for x in p))
        if len(set(pts)) != len(pts):
            raise ConfigError("window points must be distinct")
        return Window(tuple(pts))
    raise ConfigError("window must be {'box': [...], 'offset': n} or a list of points")


def parse_theta(v, T: IntMatrix) -> ThetaSpec:
    try:
        if v == 0 or v == "0" or v is None:
            return ThetaSpec.zero()
        if isinstance(v, dict) and "s" in v:
            m = v.get("m")
            return ThetaSpec.quadratic(T, _int(v["s"], "theta.s"), None if m is None else _int(m, "theta.m"))
        if isinstance(v, dict) and "p" in v:
            return ThetaSpec.rational(_int(v["p"], "theta.p"), _int(v["q"], "theta.q"))
    except ValueError as exc:
        if isinstance(exc, CatlabError):
            raise
        raise ConfigError(f"theta: {exc}") from None
    raise ConfigError("theta must be 0, {'s': .., 'm': ..} or {'p': .., 'q': ..}")


def _complex_entry(v, name: str) -> complex:
    if isinstance(v, list) and len(v) == 2:
        return complex(float(_exact(v[0], name)), float(_exact(v[1], name)))
    return complex(float(_exact(v, name)))


def parse_partition(v, X: Window, seed: int) -> Partition:
    if v is None or v == "diagonal":
        return Partition.diagonal(X)
    if v == "trivial":
        return Partition.trivial(X)
    if v == "random_unitary" or (isinstance(v, dict) and "random_unitary" in v):
        s = seed
        if isinstance(v, dict) and isinstance(v["random_unitary"], dict) and "seed" in v["random_unitary"]:
            s = _int(v["random_unitary"]["seed"], "partition seed")
        return Partition.random_unitary(X, s)
    if isinstance(v, dict) and "explicit" in v:
        d = len(X)
        elems = []
        for M in v["explicit"]:
            if not isinstance(M, list) or len(M) != d or any(not isinstance(r, list) or len(r) != d for r in M):
                raise ConfigError(f"explicit partition matrices must be {d} x {d}")
            elems.append(WindowMatrix(X, np.array([[_complex_entry(e, "partition entry") for e in r] for r in M])))
        return Partition(tuple(elems))
    raise ConfigError("partition must be 'diagonal', 'trivial', {'random_unitary': {'seed': n}} or {'explicit': [...]}")


@dataclass
class RunConfig:
    T: IntMatrix
    theta_raw: object
    window: Window
    partition_raw: object = None
    n_range: tuple[int, int] | None = None
    k_list: tuple[int, ...] = (1, 2)
    precision_bits: int = 64
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    s_range: tuple[int, int] = (-5, 5)
    decay: dict = field(default_factory=dict)
    horizon: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {"T", "theta", "window", "partition", "n_range", "k_list", "precision_bits", "budget",
                 "seed", "s_range", "decay", "horizon"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
        T = parse_matrix(data.get("T", [list(r) for r in CAT_MAP]))
        if T.det == 0:
            raise ConfigError("T must be invertible over the rationals")
        window = parse_window(data.get("window", {"box": [2] * T.dim}), T.dim)
        cfg = cls(T=T, theta_raw=data.get("theta", 0), window=window, partition_raw=data.get("partition"))
        if "n_range" in data:
            cfg.n_range = _range(data["n_range"], "n_range")
            if cfg.n_range[0] < 0:
                raise ConfigError("n_range must be non-negative")
        if "k_list" in data:
            ks = data["k_list"]
            if not isinstance(ks, list) or not ks:
                raise ConfigError("k_list must be a non-empty list")
            cfg.k_list = tuple(sorted({_int(k, "k_list") for k in ks}))
            if cfg.k_list[0] < 1:
                raise ConfigError("k_list entries must be >= 1")
        cfg.precision_bits = _int(data.get("precision_bits", 64), "precision_bits")
        cfg.budget = _int(data.get("budget", DEFAULT_BUDGET), "budget")
        cfg.seed = _int(data.get("seed", 0), "seed")
        if "s_range" in data:
            cfg.s_range = _range(data["s_range"], "s_range")
        for key in ("decay", "horizon"):
            sub = data.get(key, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"{key} must be an object")
            setattr(cfg, key, sub)
        cfg.raw = data
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.precision_bits < 64:
            raise ConfigError("precision_bits must be at least 64")
        if self.budget < 1:
            raise ConfigError("budget must be positive")
        if self.window.dim != self.T.dim:
            raise ConfigError("window dimension does not match T")

    def apply_overrides(self, args: argparse.Namespace) -> None:
        if args.seed is not None:
            self.seed = args.seed
            self.raw["seed"] = args.seed
        if args.precision_bits is not None:
            self.precision_bits = args.precision_bits
            self.raw["precision_bits"] = args.precision_bits
        if args.budget is not None:
            self.budget = args.budget
            self.raw["budget"] = args.budget
        self.validate()

    @property
    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    # -- derived objects -------------------------------------------------
    def require_aperiodic(self) -> None:
        if not aperiodicity_check(self.T):
            raise AperiodicityError(f"T = {self.T.tolist()} has an eigenvalue on the unit circle")

    def theta(self) -> ThetaSpec:
        return parse_theta(self.theta_raw, self.T)

    def spec(self) -> BicharacterSpec:
        if self.T.dim != 2:
            raise ConfigError("the bicharacter commands need a 2x2 matrix")
        return BicharacterSpec.standard(self.theta(), self.precision_bits)

    def partition(self) -> Partition:
        return parse_partition(self.partition_raw, self.window, self.seed)

    def n0(self) -> int:
        return certificate_n0(self.window.difference_set(), self.T).n0

    def resolved_n_range(self) -> range:
        if self.n_range is not None:
            lo, hi = self.n_range
        else:
            n0 = self.n0()
            lo, hi = n0 + 2, n0 + 12
        return range(lo, hi + 1)


# ---------------------------------------------------------------------------
# commands. Each returns (json_report, csv_text or None).


def cmd_analyze(cfg: RunConfig):
    ap = aperiodicity_check(cfg.T)
    out = {
        "T": cfg.T.tolist(),
        "det": cfg.T.det,
        "trace": cfg.T.trace,
        "aperiodic": ap.aperiodic,
        "aperiodicity_margin": ap.margin,
        "aperiodicity_exact": ap.exact,
    }
    if cfg.T.dim == 2 and abs(cfg.T.det) == 1:
        out["trace_sequence"] = trace_sequence(cfg.T, 10) if cfg.T.det == 1 else None
    if ap.aperiodic:
        sd = spectral_data(cfg.T)
        out["eigenvalues"] = [[complex(v).real, complex(v).imag] for v in sd.eigenvalues]
        out["moduli"] = sd.moduli
        out["multiplicities"] = list(sd.multiplicities)
        out["projection_error"] = sd.projection_error
        out["jordan"] = [[C, d] for C, d in sd.jordan]
        if sd.exact_eigenvalues is not None:
            out["exact_eigenvalues"] = [str(v) for v in sd.exact_eigenvalues]
    return out, None


def cmd_theta(cfg: RunConfig):
    cfg.require_aperiodic()
    try:
        thetas = admissible_thetas(cfg.T, cfg.s_range)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = []
    for th in thetas:
        d = th.to_json()
        d["value"] = str(th.value)
        d["consistent"] = th.satisfies_congruence()
        rows.append(d)
    return {"s_range": list(cfg.s_range), "thetas": rows}, None


def cmd_decay(cfg: RunConfig):
    cfg.require_aperiodic()
    spec = cfg.spec()
    g = tuple(_int(x, "decay.g") for x in cfg.decay.get("g", [1, 0]))
    h = tuple(_int(x, "decay.h") for x in cfg.decay.get("h", [0, 1]))
    N = _int(cfg.decay.get("N", 30), "decay.N")
    if len(g) != 2 or len(h) != 2 or N < 1:
        raise ConfigError("decay needs 2-vectors g, h and N >= 1")
    table = decay_table(spec, g, h, cfg.T, N)
    buf = io.StringIO()
    table.write_csv(buf)
    report = {"theta": str(spec.theta), "g": list(g), "h": list(h), "N": N, "lambda": table.lam,
              "c_hat": table.c_hat, "symmetric_sum": table.symmetric_partial_sum(N)}
    return report, buf.getvalue()


def cmd_horizon(cfg: RunConfig):
    cfg.require_aperiodic()
    Y = parse_window(cfg.horizon["Y"], cfg.T.dim) if "Y" in cfg.horizon else cfg.window.difference_set()
    k_max = _int(cfg.horizon.get("k_max", 4), "horizon.k_max")
    cert = certificate_n0(Y, cfg.T)
    n_max = _int(cfg.horizon.get("n_max", cert.n0 + 5), "horizon.n_max")
    brute = brute_force_min_n(Y, cfg.T, k_max, n_max, cfg.budget)
    checked = {str(n): relation_free(Y, cfg.T, n, k_max, cfg.budget) for n in range(cert.n0, cert.n0 + 6)}
    report = {
        "Y": Y.to_json(),
        "certificate": cert.to_json(),
        "brute_force": brute.to_json(),
        "relation_free_after_n0": checked,
        "sound": all(checked.values()) and (brute.min_n is None or cert.n0 >= brute.min_n),
    }
    return report, None


def cmd_entropy(cfg: RunConfig):
    cfg.require_aperiodic()
    spec = cfg.spec()
    gamma = Channel.from_i_X(cfg.window, spec)
    P = cfg.partition()
    n_range = cfg.resolved_n_range()
    budget = min(cfg.budget, ENTROPY_BUDGET)
    report = convergence_report(gamma, P, cfg.T, n_range, cfg.k_list, budget)
    buf = io.StringIO()
    report.write_csv(buf)
    summary = report.summary()
    summary["theta"] = str(spec.theta)
    return summary, buf.getvalue()


def cmd_classical(cfg: RunConfig):
    cfg.require_aperiodic()
    spec = cfg.spec()
    P = cfg.partition()
    n_range = cfg.resolved_n_range() if cfg.n_range is not None else range(cfg.n0(), cfg.n0() + 4)
    k_list = [k for k in cfg.k_list if k <= 3] or [1]
    checks = []
    for k in k_list:
        for n in n_range:
            res = classical_factor_check(list(P), cfg.T, n, k, spec, cfg.budget)
            checks.append({"n": n, "k": k, "ok": res.ok, "checked": res.checked,
                           "first_failure": list(res.first_failure) if res.first_failure else None})
    gamma = Channel.from_i_X(cfg.window, spec)
    diag = convergence_report(gamma, Partition.diagonal(cfg.window), cfg.T, n_range, k_list,
                              min(cfg.budget, ENTROPY_BUDGET), strict=False)
    gaps = [{"n": r.n, "k": r.k, "gap": r.gap} for r in diag.rows]
    return {"theta": str(spec.theta), "classical": spec.is_classical, "checks": checks,
            "all_ok": all(c["ok"] for c in checks), "diagonal_gaps": gaps}, None


COMMANDS = {
    "analyze": cmd_analyze,
    "theta": cmd_theta,
    "decay": cmd_decay,
    "horizon": cmd_horizon,
    "entropy": cmd_entropy,
    "classical": cmd_classical,
}


HELP = {
    "analyze": "spectral data, aperiodicity and trace sequence of T",
    "theta": "admissible quadratic deformation parameters",
    "decay": "exact decay table of |1 - omega(g, T^n h)| as CSV",
    "horizon": "injectivity certificate and brute-force comparison",
    "entropy": "multichannel lower bound against the single-channel score as CSV",
    "classical": "factorization identity check and diagonal-partition gaps",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="catlab", description="Quantized cat map toolkit")
    parser.add_argument("--version", action="version", version=f"catlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", type=Path, help="JSON run configuration (default: cat map, X = {0,1}^2)")
        p.add_argument("--out", type=Path, help="directory for <command>.json and <command>.csv")
        p.add_argument("--seed", type=int)
        p.add_argument("--precision-bits", type=int)
        p.add_argument("--budget", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=stderr)
    try:
        text = args.config.read_text() if args.config else "{}"
        cfg = RunConfig.from_dict(load_config_text(text))
        cfg.apply_overrides(args)
        log.info("running %s with config %s", args.command, cfg.digest)
        report, table = COMMANDS[args.command](cfg)
    except CatlabError as exc:
        json.dump(exc.to_json(), stderr, sort_keys=True)
        stderr.write("\n")
        return exc.exit_code
    except OSError as exc:
        json.dump({"error": "config", "message": str(exc)}, stderr, sort_keys=True)
        stderr.write("\n")
        return ConfigError.exit_code

    header = f"catlab {__version__} config-sha256={cfg.digest}"
    report = {"command": args.command, "version": __version__, "config_sha256": cfg.digest, **report}
    rendered = json.dumps(report, indent=2, sort_keys=True) + "\n"
    csv_text = f"# {header}\n{table}" if table is not None else None
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"{args.command}.json").write_text(rendered)
        if csv_text is not None:
            (args.out / f"{args.command}.csv").write_text(csv_text)
    elif csv_text is not None:
        stdout.write(csv_text)
        return 0
    stdout.write(rendered)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
