"""Command-line driver for BER sweeps and power-allocation experiments.

Each run writes one CSV (header row first, optionally preceded by a single
``# generated ...`` comment) and a ``.meta.json`` sidecar holding the fully
resolved configuration.  Powers on the command line are in dB with
0 dB = unit power.

Example::

    fdrelay --experiment relay-ber --N 32,64 --trials 200 --out results
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import SystemConfig, draw_large_scale, noise_for_snr, trial_rng
from .filters import Mode
from .kernels import BACKEND
from .opa import draw_rate_targets, run_algorithm1, run_oupa
from .relay_sim import sweep

log = logging.getLogger("fdrelay")

EXPERIMENTS = ("relay-ber", "e2e-ber", "opa-ee", "custom-sweep")

BER_COLUMNS = ["mode", "N", "K", "p_R_dB", "snr_dB", "trials", "symbols", "bit_errors", "bits", "ber"]
SWEEP_COLUMNS = ["mode", "N", "K", "p_R_dB", "snr_dB", "trials", "symbols", "relay_bit_errors", "relay_bits",
                 "relay_ber", "e2e_bit_errors", "e2e_bits", "e2e_ber"]
EE_COLUMNS = ["scheme", "sum_rate_target", "iteration", "p_R", "p_S_total", "EE", "feasible"]
EE_DRAW_COLUMNS = ["scheme", "sum_rate_target", "draw", "p_R", "p_S_total", "EE", "feasible"]

# name -> (allocator, filter mode)
SCHEMES = {
    "OPA-MMSE": (run_algorithm1, Mode.MMSE),
    "OPA-NI": (run_algorithm1, Mode.NI),
    "OUPA": (run_oupa, Mode.NI),
    "OUPA-MMSE": (run_oupa, Mode.MMSE),
}

_BER_DEFAULTS = dict(K=5, snr_db=8.0, N=[32, 64, 128], modes=["MMSE", "NI", "HD"],
                     pr_db=[float(p) for p in np.arange(-10.0, 30.1, 5.0)])
_DEFAULTS = {
    "relay-ber": _BER_DEFAULTS,
    "custom-sweep": _BER_DEFAULTS,
    "e2e-ber": dict(_BER_DEFAULTS, modes=["MMSE"], pr_db=[float(p) for p in np.arange(-10.0, 30.1, 2.5)]),
    "opa-ee": dict(K=10, snr_db=16.0, N=[64], modes=[], pr_db=[], shadowing_db=6.0),
}


@dataclass
class ExperimentSpec:
    """Resolved description of one experiment run."""

    experiment: str = "relay-ber"
    K: int = 5
    N: list = field(default_factory=lambda: [32, 64, 128])
    pr_db: list = field(default_factory=list)
    snr_db: float = 8.0
    mod_order: int = 16
    eps_h2: float = 1e-3
    eps_t2: float = 1e-3
    sigma_li2: float = 1.0
    sigma_nd2: float = 1.0
    shadowing_db: float = 0.0
    delay: int = 1
    modes: list = field(default_factory=list)
    trials: int = 500
    symbols: int = 200
    sum_rates: list = field(default_factory=lambda: [2.0, 4.0, 6.0])
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    draws: int = 20
    n_it: int = 1000
    L: int = 5
    seed: int = 0
    threads: int = 1
    out: str = "results"
    timestamp: bool = True

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if not self.N:
            raise ValueError("N grid is empty")
        for n in self.N:
            if self.K >= n:
                raise ValueError(f"K={self.K} must be smaller than N={n}")
        if self.experiment == "opa-ee":
            if not self.sum_rates or not self.schemes:
                raise ValueError("sum-rate and scheme lists must be nonempty")
            bad = [s for s in self.schemes if s not in SCHEMES]
            if bad:
                raise ValueError(f"unknown schemes {bad}; choose from {list(SCHEMES)}")
            if self.draws < 1 or self.n_it < 1 or self.L < 1:
                raise ValueError("draws, n_it and L must be >= 1")
        else:
            if not self.pr_db or not self.modes:
                raise ValueError("p_R and mode grids must be nonempty")
            for m in self.modes:
                Mode(m)
            if self.trials < 1 or self.symbols <= self.delay:
                raise ValueError("need trials >= 1 and symbols > delay")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        self.system_config(self.N[0])

    def system_config(self, n: int) -> SystemConfig:
        return SystemConfig(K=self.K, n_rx=n, n_tx=n, mod_order=self.mod_order, p_s=1.0, p_r=1.0,
                            sigma_li2=self.sigma_li2, sigma_nr2=noise_for_snr(self.snr_db, 1.0, self.K),
                            sigma_nd2=self.sigma_nd2, eps_h2=self.eps_h2, eps_t2=self.eps_t2, delay=self.delay,
                            shadowing_sigma_db=self.shadowing_db, master_seed=self.seed)


_FIELDS = {f.name for f in dataclasses.fields(ExperimentSpec)}
_LISTS = {"N": int, "pr_db": float, "modes": str, "sum_rates": float, "schemes": str}


def _coerce(key, value):
    if key in _LISTS:
        kind = _LISTS[key]
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        elif not isinstance(value, (list, tuple)):
            value = [value]
        return [kind(v.strip()) if isinstance(v, str) else kind(v) for v in value]
    proto = getattr(ExperimentSpec, key, None)
    if isinstance(proto, bool):
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if isinstance(proto, int):
        return int(value)
    if isinstance(proto, float):
        return float(value)
    return value


def load_config_file(path) -> dict:
    """Read a JSON object or ``key = value`` lines (``#`` starts a comment)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a JSON object")
        return data
    data = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        data[k] = v
    return data


def parse_config(overrides: dict | None = None, path=None) -> ExperimentSpec:
    """Resolve a spec from experiment defaults, a config file and overrides (in that order)."""
    merged = {}
    if path is not None:
        merged.update(load_config_file(path))
    merged.update(overrides or {})
    unknown = sorted(set(merged) - _FIELDS)
    if unknown:
        raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
    experiment = merged.get("experiment", ExperimentSpec.experiment)
    if experiment not in _DEFAULTS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    values = dict(_DEFAULTS[experiment])
    values.update({k: _coerce(k, v) for k, v in merged.items()})
    spec = ExperimentSpec(**values)
    spec.validate()
    return spec


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return "nan" if not np.isfinite(x) else f"{float(x):.10g}"
    return str(x)


class _CsvSink:
    """Header-first CSV writer that flushes after every batch of rows."""

    def __init__(self, path: Path, columns, timestamp: bool):
        self.path = path
        self.fh = open(path, "w", encoding="utf-8", newline="")
        if timestamp:
            now = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
            self.fh.write(f"# generated {now} by fdrelay {__version__}\n")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(columns)
        self.fh.flush()

    def write(self, rows):
        self.writer.writerows([[_fmt(v) for v in row] for row in rows])
        self.fh.flush()

    def close(self):
        self.fh.close()


def _ber_rows(spec, group, kind):
    rows = []
    for r in group:
        head = [r.mode, r.n_antennas, spec.K, r.p_r_db, spec.snr_db, r.trials, r.symbols]
        if kind == "relay-ber":
            rows.append(head + [r.relay_bit_errors, r.relay_bits, r.relay_ber])
        elif kind == "e2e-ber":
            rows.append(head + [r.e2e_bit_errors, r.e2e_bits, r.e2e_ber])
        else:
            rows.append(head + [r.relay_bit_errors, r.relay_bits, r.relay_ber, r.e2e_bit_errors, r.e2e_bits,
                                r.e2e_ber])
    return rows


def _run_ber(spec: ExperimentSpec, out: Path) -> list[Path]:
    columns = SWEEP_COLUMNS if spec.experiment == "custom-sweep" else BER_COLUMNS
    path = out / f"{spec.experiment}.csv"
    sink = _CsvSink(path, columns, spec.timestamp)
    try:
        sweep(spec.system_config(spec.N[0]), spec.N, spec.pr_db, spec.modes, spec.trials, spec.symbols,
              threads=spec.threads, on_cell=lambda g: sink.write(_ber_rows(spec, g, spec.experiment)))
    finally:
        sink.close()
    return [path]


def ee_draw(spec: ExperimentSpec, n: int, draw: int):
    """All schemes and sum-rate targets for one shadowing draw.

    Returns ``{(scheme, target): AllocationRun}``.  Shadowing and target
    weights depend only on ``(seed, N, draw)``, so every scheme and target
    sees the same draw.
    """
    base = spec.system_config(n)
    rng = trial_rng(spec.seed, n, draw)
    cfg = base.replace(beta_sr=draw_large_scale(rng, spec.K, spec.shadowing_db),
                       beta_rd=draw_large_scale(rng, spec.K, spec.shadowing_db))
    shares = draw_rate_targets(rng, spec.K, 1.0)
    out = {}
    for target in spec.sum_rates:
        r0 = target * shares
        for name in spec.schemes:
            fn, mode = SCHEMES[name]
            out[(name, target)] = fn(cfg, r0, n_it=spec.n_it, L=spec.L, mode=mode, seed=(n, draw))
    return out


def _trace_ee(row) -> float:
    if not row["feasible"]:
        return float("nan")
    total = float(np.sum(row["p_s"]) + row["p_r"])
    return float(np.sum(row["rates"]) / total) if total > 0 else float("nan")


def _run_ee(spec: ExperimentSpec, out: Path) -> list[Path]:
    paths = []
    for n in spec.N:
        suffix = "" if len(spec.N) == 1 else f"_N{n}"
        if spec.threads > 1:
            with ThreadPoolExecutor(max_workers=spec.threads) as ex:
                runs = list(ex.map(lambda d: ee_draw(spec, n, d), range(spec.draws)))
        else:
            runs = [ee_draw(spec, n, d) for d in range(spec.draws)]
        draw_path = out / f"opa-ee{suffix}_draws.csv"
        sink = _CsvSink(draw_path, EE_DRAW_COLUMNS, spec.timestamp)
        for target in spec.sum_rates:
            for name in spec.schemes:
                rows = []
                for d, run in enumerate(runs):
                    res = run[(name, target)]
                    a = res.allocation
                    rows.append([name, target, d, a.p_r, float(np.sum(a.p_s)), _trace_ee(res.trace[-1]), res.feasible])
                sink.write(rows)
        sink.close()
        # per-iteration means over the draws on which every scheme ends feasible
        path = out / f"opa-ee{suffix}.csv"
        sink = _CsvSink(path, EE_COLUMNS, spec.timestamp)
        for target in spec.sum_rates:
            common = [run for run in runs if all(run[(s, target)].feasible for s in spec.schemes)]
            for name in spec.schemes:
                rows = []
                for i in range(spec.L):
                    tr = [run[(name, target)].trace[i] for run in common]
                    if tr:
                        rows.append([name, target, i + 1, np.mean([t["p_r"] for t in tr]),
                                     np.mean([np.sum(t["p_s"]) for t in tr]), np.mean([_trace_ee(t) for t in tr]),
                                     len(tr)])
                    else:
                        rows.append([name, target, i + 1, float("nan"), float("nan"), float("nan"), 0])
                sink.write(rows)
        sink.close()
        paths += [path, draw_path]
    return paths


def _write_metadata(spec: ExperimentSpec, out: Path, outputs):
    meta = {
        "fdrelay_version": __version__,
        "kernel_backend": BACKEND,
        "spec": dataclasses.asdict(spec),
        "system_config": {str(n): spec.system_config(n).to_dict() for n in spec.N},
        "outputs": [p.name for p in outputs],
    }
    path = out / f"{spec.experiment}.meta.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def run_experiment(spec: ExperimentSpec) -> list[Path]:
    """Run ``spec`` and return the written files (CSV first, metadata last)."""
    spec.validate()
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %s into %s", spec.experiment, out)
    if spec.experiment == "opa-ee":
        outputs = _run_ee(spec, out)
    else:
        outputs = _run_ber(spec, out)
    return outputs + [_write_metadata(spec, out, outputs)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdrelay", description=__doc__.split("\n\n")[0])
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON object or key = value file; flags override it")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threads", type=int)
    p.add_argument("--trials", type=int, help="channel realizations per BER cell")
    p.add_argument("--symbols", type=int, help="symbols per realization")
    p.add_argument("--out", help="output directory")
    p.add_argument("--K", type=int, help="number of source/destination pairs")
    p.add_argument("--N", help="relay antenna counts, comma-separated")
    p.add_argument("--pr-db", dest="pr_db", help="relay powers in dB, comma-separated")
    p.add_argument("--snr-db", dest="snr_db", type=float, help="SNR at the relay in dB")
    p.add_argument("--mod-order", dest="mod_order", type=int, choices=(4, 16, 64))
    p.add_argument("--eps-h2", dest="eps_h2", type=float, help="channel estimation error variance")
    p.add_argument("--eps-t2", dest="eps_t2", type=float, help="transmit impairment variance")
    p.add_argument("--sigma-nd2", dest="sigma_nd2", type=float, help="destination noise variance")
    p.add_argument("--sigma-li2", dest="sigma_li2", type=float, help="loopback channel variance")
    p.add_argument("--mode", dest="modes", help="filter modes (MMSE, NI, HD), comma-separated")
    p.add_argument("--sum-rates", dest="sum_rates", help="sum-rate targets for opa-ee, comma-separated")
    p.add_argument("--schemes", help=f"allocation schemes for opa-ee ({', '.join(SCHEMES)})")
    p.add_argument("--draws", type=int, help="shadowing draws for opa-ee")
    p.add_argument("--n-it", dest="n_it", type=int, help="realizations per coefficient estimate")
    p.add_argument("--L", type=int, help="allocation iterations")
    p.add_argument("--no-timestamp", dest="timestamp", action="store_false", default=None,
                   help="omit the comment line with the generation time")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "verbose")}
    try:
        spec = parse_config(flags, args.config)
        paths = run_experiment(spec)
    except (ValueError, OSError) as exc:
        print(f"fdrelay: error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
