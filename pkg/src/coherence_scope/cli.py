"""Command-line driver: ``coherence-scope <run|fit|validate|oracle> --config PATH --out DIR``.

A config is one JSON object whose ``protocol`` field picks the experiment
(``channel``, ``gate``, ``measurement``, ``prep``, ``location`` or ``qudit-channel``).
``run`` writes ``results.csv`` and ``report.json``; the report is always computed
from the rows exactly as written, so ``fit`` on that CSV reproduces it byte for byte.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .accumulation import PrepProtocolConfig, location_coherence_test, location_report, run_prep_protocol
from .channels import channel_from_spec, random_channel, rotation_unitary
from .circuits import (CircuitProtocolConfig, CircuitSpec, NoiseModel, NoisyGate, NoisyMeasurement, NoisyPrep,
                       run_circuit_channel_protocol, run_gate_protocol, run_measurement_protocol)
from .estimator import (PRACTICAL_FLOOR, Z_LINEAR, Z_QUADRATIC, CoherentErrorEstimator, classify_accumulation,
                        extract_prep_params, wls_quadratic_fit)
from .exceptions import CoherenceScopeError, ValidationError
from .ghz import (GhzExperiment, GhzResultRow, accept_probability, accept_probability_bruteforce,
                  ghz_state_fidelity, ghz_state_fidelity_bruteforce, run_channel_protocol)
from .qudit import (QuditPair, QuditResultRow, qudit_accept_bruteforce, qudit_accept_probability,
                    qudit_state_fidelity, qudit_state_fidelity_bruteforce, run_qudit_protocol, sensitive_pair_set)
from .sampling import BASIS_INDEX
from .tables import read_rows, write_rows

log = logging.getLogger("coherence_scope")

PROTOCOLS = ("channel", "gate", "measurement", "prep", "location", "qudit-channel")
ORACLE_TOLERANCE = 1e-9


# --------------------------------------------------------------------------- CSV row types


@dataclass(frozen=True)
class PrepRow:
    variant: str
    n: int
    phi: float
    axis: str
    twirled_prep: int
    p0: float


@dataclass(frozen=True)
class LocationRow:
    variant: str
    outcome: str
    probability: float


# --------------------------------------------------------------------------- config parsing


def _field(cfg: Mapping[str, Any], key: str, parse: Callable[[Any], Any] = lambda v: v, default: Any = ...):
    """Read and parse ``cfg[key]``; errors name the field."""
    if key not in cfg:
        if default is ...:
            raise ValidationError(f"config field {key!r} is required")
        return default
    try:
        return parse(cfg[key])
    except (CoherenceScopeError, ValueError, TypeError, KeyError) as exc:
        raise ValidationError(f"config field {key!r}: {exc}") from exc


def _n_values(v) -> tuple[int, ...]:
    ns = tuple(int(n) for n in v)
    if not ns:
        raise ValidationError("must be a nonempty list of integers")
    return ns


def _prep(obj) -> NoisyPrep:
    if "rotation" in obj:
        rot = obj["rotation"]
        return NoisyPrep.rotated(rotation_unitary(float(rot["theta"]), rot.get("axis", (1, 0, 0))))
    return NoisyPrep.from_dict(obj)


def _noise_model(obj) -> NoiseModel:
    gates = {name: channel_from_spec(spec) for name, spec in obj.get("gates", {}).items()}
    for name, ch in gates.items():
        NoisyGate.standard(name, ch)
    prep = _prep(obj["prep"]) if obj.get("prep") else None
    meas = NoisyMeasurement.from_dict(obj["meas"]) if obj.get("meas") else None
    return NoiseModel(gates, prep, meas, bool(obj.get("twirl", True)), bool(obj.get("twirl_measurement", True)))


def _pairs(d: int) -> Callable[[Any], list[QuditPair]]:
    return lambda v: [QuditPair.of(d, tuple(p), tuple(q)) for p, q in v]


def _fit_options(cfg: Mapping[str, Any]) -> dict:
    opts = dict(cfg.get("fit") or {})
    unknown = set(opts) - {"z_quadratic", "z_linear", "practical_floor", "kappa"}
    if unknown:
        raise ValidationError(f"config field 'fit': unknown keys {sorted(unknown)}")
    return opts


@dataclass
class Experiment:
    """A parsed config: ``execute(jobs)`` returns ``(rows, row_type)``."""

    protocol: str
    execute: Callable[[int], tuple[list, type]]
    fit_options: dict


def _circuit_config(cfg, seed: int, bases) -> CircuitProtocolConfig:
    return CircuitProtocolConfig(
        n_values=_field(cfg, "n_values", _n_values),
        bases=tuple(bases),
        noise=_field(cfg, "noise", _noise_model, NoiseModel()),
        layout=_field(cfg, "layout", str, "two_qubit"),
        twirl_mode=_field(cfg, "twirl_mode", str, "exact"),
        frames=_field(cfg, "frames", int, 16),
        shots=_field(cfg, "shots", int, 0),
        seed=seed,
        y_convention=_field(cfg, "y_convention", str, "standard"),
    )


def _warn_scale(cfg: Mapping[str, Any], n_values: Sequence[int]) -> None:
    r = _field(cfg, "r", float, None)
    if r is not None and max(n_values) ** 2 * r >= 1:
        warnings.warn(f"n_max^2 * r = {max(n_values) ** 2 * r:.3g} is not small; leading-order fits may be biased",
                      RuntimeWarning, stacklevel=2)


def parse_config(cfg: Mapping[str, Any], seed: int | None = None) -> Experiment:
    if not isinstance(cfg, Mapping):
        raise ValidationError("config must be a JSON object")
    protocol = _field(cfg, "protocol", str)
    if protocol not in PROTOCOLS:
        raise ValidationError(f"config field 'protocol': unknown protocol {protocol!r}; known: {list(PROTOCOLS)}")
    seed = _field(cfg, "seed", int, 0) if seed is None else int(seed)
    if seed < 0:
        raise ValidationError("config field 'seed': must be nonnegative")
    opts = _fit_options(cfg)
    bases = _field(cfg, "bases", lambda v: tuple(str(b) for b in v), ("X", "Y", "Z"))

    if protocol == "channel":
        channel = _field(cfg, "channel", channel_from_spec)
        engine = _field(cfg, "engine", str, "transfer")
        if engine == "transfer":
            exp = _field(cfg, "n_values", lambda v: GhzExperiment(channel, _n_values(v), bases,
                                                                   _field(cfg, "shots", int, 0), seed,
                                                                   _field(cfg, "y_convention", str, "standard")))
            _warn_scale(cfg, exp.n_values)
            return Experiment(protocol, lambda jobs: (run_channel_protocol(exp, jobs), GhzResultRow), opts)
        if engine != "circuit":
            raise ValidationError(f"config field 'engine': must be 'transfer' or 'circuit', got {engine!r}")
        ccfg = _circuit_config(cfg, seed, bases)
        _warn_scale(cfg, ccfg.n_values)
        return Experiment(protocol, lambda jobs: (run_circuit_channel_protocol(channel, ccfg, jobs), GhzResultRow), opts)

    if protocol == "gate":
        gate = _field(cfg, "gate", NoisyGate.from_dict)
        ccfg = _circuit_config(cfg, seed, bases)
        _warn_scale(cfg, ccfg.n_values)
        return Experiment(protocol, lambda jobs: (run_gate_protocol(gate, ccfg, jobs), GhzResultRow), opts)

    if protocol == "measurement":
        meas = _field(cfg, "measurement", NoisyMeasurement.from_dict)
        ccfg = _circuit_config(cfg, seed, [b for b in bases if b in ("X", "Y")] or ("X", "Y"))
        _warn_scale(cfg, ccfg.n_values)
        return Experiment(protocol, lambda jobs: (run_measurement_protocol(meas, ccfg, jobs), GhzResultRow), opts)

    if protocol == "prep":
        pcfg = PrepProtocolConfig(
            n=_field(cfg, "n", int), phi=_field(cfg, "phi", float), prep=_field(cfg, "prep", _prep),
            meas=_field(cfg, "meas", NoisyMeasurement.from_dict, None), shots=_field(cfg, "shots", int, 0), seed=seed)
        return Experiment(protocol, lambda jobs: (_prep_rows(pcfg), PrepRow), opts)

    if protocol == "location":
        circuit = _field(cfg, "circuit", CircuitSpec.from_dict)
        j = _field(cfg, "j", int)
        T = _field(cfg, "T", lambda v: [int(t) for t in v])
        if j not in T:
            raise ValidationError("config field 'T': must contain location j")
        kappa = _field(cfg, "kappa", float, None)
        if kappa is not None:
            opts["kappa"] = kappa
        return Experiment(protocol, lambda jobs: (_location_rows(circuit, j, T), LocationRow), opts)

    d = _field(cfg, "d", int)
    channel = _field(cfg, "channel", channel_from_spec)
    if channel.dim != d:
        raise ValidationError(f"config field 'channel': dimension {channel.dim} does not match d = {d}")
    pairs = _field(cfg, "pairs", _pairs(d), None) or sensitive_pair_set(d)
    ns = _field(cfg, "n_values", _n_values)
    _warn_scale(cfg, ns)
    shots = _field(cfg, "shots", int, 0)
    return Experiment(protocol, lambda jobs: (run_qudit_protocol(channel, d, ns, pairs, shots, seed, jobs),
                                              QuditResultRow), opts)


def _prep_rows(pcfg: PrepProtocolConfig) -> list[PrepRow]:
    res = run_prep_protocol(pcfg)
    layout = {"t0": (0, "X", 1), "0": (0, "X", 0), "tnX": (pcfg.n, "X", 1), "nX": (pcfg.n, "X", 0),
              "tnY": (pcfg.n, "Y", 1), "nY": (pcfg.n, "Y", 0)}
    return [PrepRow(k, n, pcfg.phi, axis, tw, res.probabilities[k]) for k, (n, axis, tw) in layout.items()]


def _location_rows(circuit: CircuitSpec, j: int, T: Sequence[int]) -> list[LocationRow]:
    rep = location_coherence_test(circuit, j, T)
    return [LocationRow(v, o, p) for v, dist in rep.distributions.items() for o, p in dist.items()]


# --------------------------------------------------------------------------- reports


def ghz_report(rows: Sequence[GhzResultRow], opts: Mapping[str, Any]) -> dict:
    bases = {r.basis for r in rows}
    kind = "measurement" if bases <= {"X", "Y"} else "channel"
    est = CoherentErrorEstimator(kind, opts.get("z_quadratic", Z_QUADRATIC), opts.get("z_linear", Z_LINEAR),
                                 opts.get("practical_floor", PRACTICAL_FLOOR))
    X = np.array([[BASIS_INDEX[r.basis], r.n] for r in rows], dtype=float)
    y = np.array([r.p_error for r in rows])
    est.fit(X, y, shots=[r.shots for r in rows])
    return {"estimator": kind, **est.estimate_.to_dict()}


def qudit_report(rows: Sequence[QuditResultRow], opts: Mapping[str, Any]) -> dict:
    groups: dict[str, list[QuditResultRow]] = {}
    for r in rows:
        groups.setdefault(f"X^{r.P_a}Z^{r.P_b}", []).append(r)
    fits, verdicts = {}, {}
    for label, rs in groups.items():
        fit = wls_quadratic_fit([(r.n, r.p_error, r.stderr, r.shots) for r in rs])
        fits[label] = fit
        verdicts[label] = classify_accumulation(fit, opts.get("z_quadratic", Z_QUADRATIC),
                                                opts.get("z_linear", Z_LINEAR),
                                                opts.get("practical_floor", PRACTICAL_FLOOR))
    a = {k: max(f.a, 0.0) for k, f in fits.items()}
    theta2 = float(sum(a.values()))
    vals = set(verdicts.values())
    verdict = "quadratic" if "quadratic" in vals else "linear" if vals == {"linear"} else "inconclusive"
    return {
        "d": rows[0].d if rows else None,
        "fits": {k: f.to_dict() for k, f in fits.items()},
        "theta2": theta2,
        "v": {k: (v / theta2 if theta2 > 0 else 0.0) for k, v in a.items()},
        "pair_verdicts": verdicts,
        "verdict": verdict,
    }


def prep_report(rows: Sequence[PrepRow], opts: Mapping[str, Any]) -> dict:
    probs = {r.variant: r.p0 for r in rows}
    n = max(r.n for r in rows)
    phi = rows[0].phi
    return {"n": n, "phi": phi, "probabilities": probs, **extract_prep_params(probs, n, phi).to_dict()}


def location_report_dict(rows: Sequence[LocationRow], opts: Mapping[str, Any]) -> dict:
    dists: dict[str, dict[str, float]] = {}
    for r in rows:
        dists.setdefault(r.variant, {})[r.outcome] = r.probability
    return location_report(dists, opts.get("kappa", 5.0)).to_dict()


REPORTS: dict[type, Callable[[Sequence, Mapping[str, Any]], dict]] = {
    GhzResultRow: ghz_report,
    QuditResultRow: qudit_report,
    PrepRow: prep_report,
    LocationRow: location_report_dict,
}


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_outputs(out: Path, rows: list, row_type: type, opts: Mapping[str, Any]) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    write_rows(csv_path, rows, row_type)
    report = REPORTS[row_type](read_rows(csv_path, row_type), opts)
    (out / "report.json").write_text(dump_json(report))
    return report


def _row_type_for(path: Path) -> type:
    header = path.read_text().splitlines()[0].split(",") if path.stat().st_size else []
    for row_type in (QuditResultRow, GhzResultRow, PrepRow, LocationRow):
        names = [f for f in row_type.__dataclass_fields__]
        if header == names:
            return row_type
    raise ValidationError(f"{path}: unrecognised CSV header {header}")


# --------------------------------------------------------------------------- oracle suite


def oracle_suite(seed: int = 0, cfg: Mapping[str, Any] | None = None) -> dict[str, float]:
    """Maximum deviation between the transfer-product engines and dense simulation."""
    rng = np.random.default_rng(seed)
    dev: dict[str, float] = {}

    def track(name: str, a: float, b: float) -> None:
        dev[name] = max(dev.get(name, 0.0), abs(a - b))

    qubit_sets = [[random_channel(2, rng) for _ in range(n)] for n in (2, 3, 4, 6)]
    if cfg and cfg.get("protocol") == "channel" and "channel" in cfg:
        ch = _field(cfg, "channel", channel_from_spec)
        ns = _field(cfg, "n_values", _n_values, (2, 3, 4))
        qubit_sets += [[ch] * n for n in ns if n <= 8]
    for chans in qubit_sets:
        for basis in ("X", "Y", "Z"):
            track("qubit_accept", accept_probability(chans, basis), accept_probability_bruteforce(chans, basis))
            track("qubit_fidelity", ghz_state_fidelity(chans, basis), ghz_state_fidelity_bruteforce(chans, basis))
    for d, n in ((3, 2), (3, 4), (5, 3)):
        chans = [random_channel(d, rng) for _ in range(n)]
        for pair in sensitive_pair_set(d):
            track("qudit_accept", qudit_accept_probability(chans, pair), qudit_accept_bruteforce(chans, pair))
            track("qudit_fidelity", qudit_state_fidelity(chans, pair), qudit_state_fidelity_bruteforce(chans, pair))
    return dev


# --------------------------------------------------------------------------- entry point


def _load(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc


def _require_out(args) -> Path:
    if args.out is None:
        raise ValidationError(f"{args.command} needs --out")
    return Path(args.out)


def cmd_run(args) -> int:
    exp = parse_config(_load(args.config), args.seed)
    rows, row_type = exp.execute(args.jobs)
    report = write_outputs(_require_out(args), rows, row_type, exp.fit_options)
    verdict = report.get("verdict", report.get("coherent_contribution"))
    suffix = "" if verdict is None else f" (verdict: {verdict})"
    print(f"{exp.protocol}: {len(rows)} rows written to {args.out}{suffix}")
    return 0


def cmd_fit(args) -> int:
    path = Path(args.config)
    opts: dict = {}
    if path.suffix != ".csv":
        cfg = _load(args.config)
        opts = _fit_options(cfg)
        path = path.parent / _field(cfg, "csv", str)
    if not path.exists():
        raise ValidationError(f"CSV file {path} does not exist")
    row_type = _row_type_for(path)
    report = REPORTS[row_type](read_rows(path, row_type), opts)
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dump_json(report))
    print(f"report written to {out / 'report.json'}")
    return 0


def cmd_validate(args) -> int:
    exp = parse_config(_load(args.config), args.seed)
    print(f"{args.config}: valid {exp.protocol} config")
    return 0


def cmd_oracle(args) -> int:
    cfg = _load(args.config) if args.config else None
    dev = oracle_suite(args.seed or 0, cfg)
    worst = max(dev.values())
    for name, v in sorted(dev.items()):
        print(f"{name}: {v:.3e}")
    print(f"max deviation: {worst:.3e}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.json").write_text(dump_json({"deviations": dev, "max_deviation": worst}))
    if worst > ORACLE_TOLERANCE:
        print(f"error: deviation exceeds {ORACLE_TOLERANCE:g}", file=sys.stderr)
        return 1
    return 0


COMMANDS = {"run": cmd_run, "fit": cmd_fit, "validate": cmd_validate, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coherence-scope",
                                     description="Detect and quantify coherent error accumulation in GHZ-style experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "oracle", help="JSON config (or results CSV for fit)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            status = COMMANDS[args.command](args)
        except CoherenceScopeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = 2
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = 2
    for w in caught:
        log.warning("%s", w.message)
    return status


if __name__ == "__main__":
    sys.exit(main())
