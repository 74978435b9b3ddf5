"""Command-line front end.

Every subcommand takes an optional JSON config (``--config``) whose keys
mirror the flags; flags given on the command line win.  Outputs carry the
hash of the resolved config, the seed and the package version.

Exit codes: 0 ok, 2 usage or invalid parameters, 3 fit failed, 4 file errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_FIT, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything that determines a run."""

    command: str = ""
    d: int = 3
    ds: list[int] = field(default_factory=lambda: [3, 5, 7])
    l: int = 1
    variant: str = "standard"
    spread_mode: str = "depolarizing"
    reset_kind: str = "mixed"
    reset_policy: str = "unconditional"
    erasure_info: bool = True
    rounds: int | None = None
    rounds_per_d: float = 3.0
    basis: str = "Z"
    noise: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)  # {"param": name, "values": [...]} or {"line": {...}, "values": [...]}
    n_erasure_samples: int = 1000
    n_pauli_samples: int = 200
    seed: int = 0
    modes: list[str] = field(default_factory=lambda: ["approximate"])
    output: str | None = None

    def hash(self) -> str:
        blob = {k: v for k, v in asdict(self).items() if k != "output"}
        return hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()[:16]

    def stamp(self) -> dict:
        return {"config_hash": self.hash(), "seed": self.seed, "version": __version__}

    def schedule(self):
        from .surface_code import ScheduleSpec

        return ScheduleSpec(l=self.l, variant=self.variant, spread_mode=self.spread_mode,
                            reset_kind=self.reset_kind, reset_policy=self.reset_policy,
                            erasure_info=self.erasure_info)

    def noise_params(self, overrides: dict | None = None):
        from .circuit import NoiseParams

        nz = dict(self.noise)
        nz.update(overrides or {})
        return NoiseParams(**nz)


CONFIG_FIELDS = {f.name for f in fields(RunConfig)}


def _noise_flag(text: str) -> dict:
    out = {}
    for part in text.split(","):
        k, sep, v = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {part!r}")
        k = k.strip()
        out[k] = v.strip().lower() in ("1", "true", "yes") if k in ("ec_noiseless", "gate_only") else float(v)
    return out


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags override its keys")
    p.add_argument("--d", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--variant", choices=["standard", "xzzx"])
    p.add_argument("--spread-mode", dest="spread_mode", choices=["depolarizing", "biased-Z"])
    p.add_argument("--reset-kind", dest="reset_kind", choices=["mixed", "one-way", "unitary"])
    p.add_argument("--reset-policy", dest="reset_policy", choices=["unconditional", "conditional"])
    p.add_argument("--no-erasure-info", dest="erasure_info", action="store_const", const=False)
    p.add_argument("--rounds", type=int)
    p.add_argument("--rounds-per-d", dest="rounds_per_d", type=float)
    p.add_argument("--basis", choices=["Z", "X"])
    p.add_argument("--noise", type=_noise_flag, help="e.g. e=0.01,p=0.001,q=0.01")
    p.add_argument("--erasure-samples", dest="n_erasure_samples", type=int)
    p.add_argument("--shots", dest="n_pauli_samples", type=int, help="frame shots per erasure sample")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="erasure-qec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="write a memory-experiment circuit")
    _common(p)
    p.add_argument("--ideal", action="store_true", help="skip noise annotation")

    p = sub.add_parser("sample", help="sample detector/observable shots")
    _common(p)
    p.add_argument("--circuit", help="circuit file instead of building one")
    p.add_argument("--format", choices=["b8", "csv"], default="b8")

    p = sub.add_parser("sweep", help="logical error rates over a grid")
    _common(p)
    p.add_argument("--ds", type=_int_list)
    p.add_argument("--param", help="noise field to sweep")
    p.add_argument("--values", type=_float_list)
    p.add_argument("--modes", type=lambda s: s.split(","))
    p.add_argument("--workers", type=int)

    p = sub.add_parser("fit", help="fit sweep tables")
    p.add_argument("kind", choices=["threshold", "subthreshold", "cross-section", "intercept"])
    p.add_argument("inputs", nargs="+")
    p.add_argument("--x-star", dest="x_star", type=float, help="threshold along the line (subthreshold)")
    p.add_argument("--u-star", dest="u_star", type=float, help="fixed u-axis intercept (intercept)")
    p.add_argument("--mode", default="approximate")
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("-o", "--output")

    p = sub.add_parser("hardware-map", help="effective (e, p) from device times")
    p.add_argument("--preset")
    p.add_argument("--kind", choices=["dual-rail", "transmon"])
    for name in ("T1", "Tphi", "T2Q", "TM"):
        p.add_argument(f"--{name}", type=float, help="microseconds")
    p.add_argument("--l", type=int, default=1)
    p.add_argument("-o", "--output")

    p = sub.add_parser("feasibility", help="correctable-region boundary in a hardware plane")
    p.add_argument("--plane", choices=["T2Q-TM", "T1-Tphi"], required=True)
    p.add_argument("--e-star", dest="e_star", type=float, required=True)
    p.add_argument("--p-star", dest="p_star", type=float, required=True)
    p.add_argument("--preset", default="cavity-dual-rail")
    p.add_argument("--kind", choices=["dual-rail", "transmon"])
    for name in ("T1", "Tphi", "T2Q", "TM"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--l", type=int, default=1)
    p.add_argument("--grid", type=_float_list, help="values of the first plane axis")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("compare-decoders", help="approximate vs exact conversion on the same shots")
    _common(p)
    p.add_argument("--workers", type=int)
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from exc
        unknown = set(base) - CONFIG_FIELDS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**base)
    cfg.command = args.command
    for name in CONFIG_FIELDS - {"command", "noise", "sweep"}:
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "noise", None):
        cfg.noise = {**cfg.noise, **args.noise}
    if getattr(args, "param", None) or getattr(args, "values", None):
        cfg.sweep = {**cfg.sweep}
        if args.param:
            cfg.sweep["param"] = args.param
        if args.values:
            cfg.sweep["values"] = args.values
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def _circuit(cfg: RunConfig, ideal: bool = False):
    from .circuit import annotate_noise
    from .surface_code import build_memory_circuit

    rounds = cfg.rounds or max(1, int(round(cfg.rounds_per_d * cfg.d)))
    c = build_memory_circuit(cfg.d, cfg.schedule(), rounds=rounds, basis=cfg.basis)
    if not ideal:
        c = annotate_noise(c, cfg.noise_params())
    return c


def cmd_build(cfg: RunConfig, args) -> int:
    from .circuit import dumps

    if not cfg.output:
        raise UsageError("build needs --output")
    c = _circuit(cfg, ideal=args.ideal)
    c.metadata = {**c.metadata, **cfg.stamp()}
    _write(cfg.output, dumps(c))
    return EXIT_OK


def cmd_sample(cfg: RunConfig, args) -> int:
    from .circuit import loads
    from .sampler import ShotBatch, dump_shots, program_for, run_frames, sample_erasure_batch

    if not cfg.output:
        raise UsageError("sample needs --output")
    c = loads(_read(args.circuit)) if args.circuit else _circuit(cfg)
    prog = program_for(c)
    eb = sample_erasure_batch(prog, cfg.seed, 0, cfg.n_erasure_samples)
    det, obs = run_frames(prog, eb.hooks, cfg.seed, eb.sample_ids, cfg.n_pauli_samples)
    batch = ShotBatch(det.reshape(-1, det.shape[-1]), obs.reshape(-1, obs.shape[-1]))
    dump_shots(batch, cfg.output, args.format)
    meta = {**cfg.stamp(), "shots": len(batch), "num_detectors": int(det.shape[-1]),
            "num_observables": int(obs.shape[-1]), "format": args.format,
            "erasure_check_outcomes": np.packbits(eb.ec_obs, axis=1, bitorder="little").tolist()}
    _write(cfg.output + ".json", json.dumps(meta, sort_keys=True))
    return EXIT_OK


def _sweep_points(cfg: RunConfig):
    from .experiments.estimate import PointConfig

    values = cfg.sweep.get("values")
    param = cfg.sweep.get("param")
    line = cfg.sweep.get("line")
    if not values or not (param or line):
        raise UsageError("sweep needs a parameter (--param or sweep.line) and --values")
    direction = line or {param: 1.0}
    pts = []
    for x in values:
        over = {k: float(f"{t * x:.10g}") for k, t in direction.items()}
        for d in cfg.ds:
            pts.append((x, PointConfig(d, cfg.schedule(), cfg.noise_params(over), cfg.rounds_per_d,
                                       cfg.n_erasure_samples, cfg.n_pauli_samples, cfg.seed, cfg.basis,
                                       tuple(cfg.modes))))
    return pts


def cmd_sweep(cfg: RunConfig, args) -> int:
    from .experiments.sweep import ResultStore, default_workers, result_rows, run_points

    if not cfg.output:
        raise UsageError("sweep needs --output (a directory)")
    pts = _sweep_points(cfg)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    store = ResultStore(out / "points")
    workers = args.workers or default_workers()

    def progress(i, n, pc, res):
        r = next(iter(res.values()))
        print(f"[{i}/{n}] d={pc.d} p_L={r.p_L:.4g} ({r.failures}/{r.shots})", file=sys.stderr, flush=True)

    results = run_points([p for _, p in pts], store, workers, progress)
    xs = {p.key(): x for x, p in pts}
    rows = result_rows(results, x_of=lambda c: xs[_key_of(c)])
    _write_table(out / "results.csv", rows, cfg.stamp())
    _write(out / "run.json", json.dumps({**cfg.stamp(), "config": asdict(cfg)}, indent=1, sort_keys=True))
    return EXIT_OK


def _key_of(cfg_dict: dict) -> str:
    from .experiments.estimate import PointConfig

    return PointConfig.from_dict(cfg_dict).key()


def _write_table(path: Path, rows: list[dict], stamp: dict) -> None:
    from .experiments.sweep import CSV_COLUMNS

    with open(path, "w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in stamp.items()) + "\n")
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        w.writerows(rows)


def read_table(path: str | Path) -> list[dict]:
    lines = [ln for ln in _read(path).splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def cmd_fit(args) -> int:
    from .experiments import fitting

    rows = []
    for path in args.inputs:
        rows += read_table(path)
    if args.kind in ("threshold", "subthreshold"):
        rows = [r for r in rows if r.get("mode", args.mode) == args.mode]
        if not rows:
            raise UsageError(f"no rows for mode {args.mode!r}")
        x = np.array([float(r["x"]) for r in rows])
        d = np.array([float(r["d"]) for r in rows])
        if args.kind == "threshold":
            fails = np.array([float(r["failures"]) for r in rows])
            shots = np.array([float(r["shots"]) for r in rows])
            k = np.array([float(r.get("k") or 3.0) for r in rows])
            fit = fitting.threshold_from_counts(d, x, fails, shots, k, n_boot=args.bootstrap)
        else:
            if args.x_star is None:
                raise UsageError("subthreshold fit needs --x-star")
            fit = fitting.fit_subthreshold(d, x, np.array([float(r["p_L"]) for r in rows]), args.x_star)
    else:
        pts = np.array([[float(r["u"]), float(r["v"])] for r in rows])
        if args.kind == "cross-section":
            fit = fitting.fit_cross_section(pts)
        else:
            if args.u_star is None:
                raise UsageError("intercept fit needs --u-star")
            fit = fitting.fit_intercept(pts, args.u_star, "intercept")
    text = json.dumps({**fit.to_dict(), "version": __version__,
                       "inputs_hash": _inputs_hash(args.inputs)}, indent=1, sort_keys=True)
    if args.output:
        _write(args.output, text)
    else:
        print(text)
    if not fit.ok:
        print(f"fit failed: {fit.message}", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _inputs_hash(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(_read(p).encode())
    return h.hexdigest()[:16]


def _hardware(args):
    from .experiments.hardware import HardwareParams, preset

    over = {k: getattr(args, k) for k in ("T1", "Tphi", "T2Q", "TM", "kind") if getattr(args, k) is not None}
    if args.preset:
        return preset(args.preset, args.l, **over)
    missing = [k for k in ("T1", "T2Q", "TM") if k not in over]
    if missing:
        raise UsageError(f"give --preset or all of {missing}")
    over.setdefault("Tphi", float("inf"))
    return HardwareParams(l=args.l, **over)


def cmd_hardware_map(args) -> int:
    from .experiments.hardware import map_hardware

    hp = _hardware(args)
    e, p = map_hardware(hp)
    text = json.dumps({"hardware": hp.to_dict(), "e": e, "p": p, "version": __version__}, sort_keys=True)
    if args.output:
        _write(args.output, text)
    else:
        print(text)
    return EXIT_OK


def cmd_feasibility(args) -> int:
    from .experiments.hardware import feasibility_boundary, write_boundary_csv

    hp = _hardware(args)
    grid = args.grid or np.geomspace(0.01, 1000.0, 51).tolist()
    pts = feasibility_boundary(args.plane, hp, args.e_star, args.p_star, grid=grid)
    solved, swept = args.plane.split("-")
    write_boundary_csv(pts, args.output, swept, solved)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    from .experiments.estimate import PointConfig, run_point
    from .experiments.sweep import default_workers

    pc = PointConfig(cfg.d, cfg.schedule(), cfg.noise_params(), cfg.rounds_per_d, cfg.n_erasure_samples,
                     cfg.n_pauli_samples, cfg.seed, cfg.basis, ("approximate", "exact"))
    res = run_point(pc, args.workers or default_workers())
    out = {**cfg.stamp(), "results": {m: r.to_dict() for m, r in res.items()},
           "ratio": res["approximate"].p_L / res["exact"].p_L if res["exact"].p_L > 0 else None}
    text = json.dumps(out, indent=1, sort_keys=True)
    if cfg.output:
        _write(cfg.output, text)
    else:
        print(text)
    return EXIT_OK


def _read(path) -> str:
    return Path(path).read_text()


def _write(path, text: str) -> None:
    Path(path).write_text(text)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "hardware-map":
            return cmd_hardware_map(args)
        if args.command == "feasibility":
            return cmd_feasibility(args)
        cfg = resolve_config(args)
        handler = {"build": cmd_build, "sample": cmd_sample, "sweep": cmd_sweep,
                   "compare-decoders": cmd_compare}[args.command]
        return handler(cfg, args)
    except (UsageError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
