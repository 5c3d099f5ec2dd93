"""Command-line front end and sweep orchestrator.

Four subcommands write plot-ready CSV/JSON files:

    lrwalk survival   S(t_n) traces per (alpha, D) point plus an alpha-t map
    lrwalk spectrum   effective-Hamiltonian spectra, gap scan, mode density
    lrwalk reset      convergence-time landscape over the reset period r
    lrwalk tails      power-law fits of S(t) - S(inf)

Every option can also come from an INI file (``--config``, section ``[run]``)
whose keys are the long flag names with ``-`` replaced by ``_``; flags on the
command line win.  List-valued options take comma-separated values and
``alpha`` accepts ``nn`` for nearest-neighbour hopping.

Each run writes ``manifest.json`` and stamps the manifest hash into every
output.  The hash covers all inputs except the output directory and worker
count, which never affect the numbers.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from lrwalk import __version__
from lrwalk.asymptotics import default_window, fit_tail, tail_branch
from lrwalk.darkstates import survival_infinity
from lrwalk.effective import (
    build_h_eff,
    compare_rates,
    exact_spectrum,
    gamma_perturbative,
    mode_density,
)
from lrwalk.errors import ConfigError, NoConvergenceError, NumericalError
from lrwalk.lattice import LatticeConfig
from lrwalk.reset import ResetConfig, predicted_optimal_r, scan_reset
from lrwalk.walk import ProtocolConfig, run_monitored, run_monitored_strided

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NO_CONVERGENCE = 0, 2, 3, 4
UNITS = "units: time 1/J, rates J, energies J"

#: tail-fit presets: detector distance and horizon in units 1/J
TAIL_PRESETS = {"d1": (1, 2.0e6), "d50": (50, 1.0e6)}

DEFAULTS = {
    "survival": {"n": "1000", "alpha": "0.5,1.5,3,nn", "tau": "0.2", "detector": "10", "map_stride": "10"},
    "spectrum": {"n": "1000", "alpha": "0.2,0.5,1.5,3", "tau": "0.2", "detector": "10", "mode": "exact", "delta": "1.0"},
    "reset": {"n": "1000", "alpha": "0.2,0.5,1,1.5,2,3", "tau": "0.2", "detector": "10", "reset_r": "1:500", "target_pdet": "0.9"},
    "tails": {"n": "1000", "alpha": "0.5,1.5,3", "tau": "0.2", "preset": "d1,d50", "samples": "2000"},
}
COMMON_DEFAULTS = {"init": "0", "out": "out", "threads": "1"}


# -- value parsing ------------------------------------------------------------


def _split(name: str, text: str) -> list[str]:
    items = [s.strip() for s in str(text).split(",") if s.strip()]
    if not items:
        raise ConfigError(name, "empty sweep")
    return items


def _number(name: str, s: str, kind=float):
    try:
        v = kind(s)
    except ValueError:
        raise ConfigError(name, f"cannot parse {s!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigError(name, f"must be finite, got {s!r}")
    return v


def _int_list(name, text):
    return [_number(name, s, int) for s in _split(name, text)]


def _float_list(name, text):
    return [_number(name, s, float) for s in _split(name, text)]


def _alpha_list(text):
    out = []
    for s in _split("alpha", text):
        out.append("nn" if s.lower() in ("nn", "inf") else _number("alpha", s))
    return out


def _r_range(text) -> tuple[int, int]:
    parts = str(text).split(":")
    if len(parts) == 1:
        r = _number("reset_r", parts[0], int)
        return (r, r)
    if len(parts) == 2:
        return (_number("reset_r", parts[0], int), _number("reset_r", parts[1], int))
    raise ConfigError("reset_r", f"expected R or LO:HI, got {text!r}")


def lattice_for(N: int, alpha) -> LatticeConfig:
    return LatticeConfig.nn(N) if alpha == "nn" else LatticeConfig(N=N, alpha=float(alpha))


def _label(alpha) -> str:
    return "nn" if alpha == "nn" else f"{alpha:g}"


# -- manifest -----------------------------------------------------------------


@dataclass
class RunManifest:
    """Resolved inputs of one CLI run.  Sweep axes are lists."""

    command: str
    n: list[int]
    alpha: list
    tau: list[float]
    detector: list[int]
    init: int
    options: dict = field(default_factory=dict)
    out: str = "out"
    threads: int = 1
    version: str = __version__

    def digest(self) -> str:
        d = asdict(self)
        del d["out"], d["threads"]
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def record(self) -> dict:
        """Hashed fields plus the hash itself."""
        d = asdict(self)
        del d["out"], d["threads"]
        return {**d, "sha256": self.digest()}

    def header(self) -> list[str]:
        return [f"lrwalk {self.version} {self.command}", f"manifest sha256:{self.digest()}", UNITS]

    def points(self):
        """Sweep points ``(N, alpha, tau, D)`` in a fixed order."""
        return [(N, a, t, D) for N in self.n for a in self.alpha for t in self.tau for D in self.detector]


def _load_config(path) -> dict:
    if path is None:
        return {}
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError("config", str(exc)) from None
    if "run" not in cp:
        raise ConfigError("config", f"{path} has no [run] section")
    return dict(cp["run"])


def build_manifest(args: argparse.Namespace) -> RunManifest:
    cmd = args.command
    merged = {**COMMON_DEFAULTS, **DEFAULTS[cmd], **_load_config(args.config)}
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config"):
            merged[key] = value
    allowed = set(COMMON_DEFAULTS) | set(DEFAULTS[cmd]) | {"steps", "detector", "tmax"}
    unknown = sorted(set(merged) - allowed)
    if unknown:
        raise ConfigError(unknown[0], f"not an option of '{cmd}'")

    tau = _float_list("tau", merged["tau"])
    for t in tau:
        if not t > 0:
            raise ConfigError("tau", f"must be > 0, got {t}")
    opts = {}
    if "steps" in merged:
        opts["steps"] = _number("steps", merged["steps"], int)
    if cmd == "survival":
        opts["map_stride"] = _number("map_stride", merged["map_stride"], int)
        if opts["map_stride"] < 1:
            raise ConfigError("map_stride", "must be >= 1")
    elif cmd == "spectrum":
        mode = str(merged["mode"])
        if mode not in ("exact", "perturbative", "both"):
            raise ConfigError("mode", f"expected exact, perturbative or both, got {mode!r}")
        opts["mode"] = mode
        opts["delta"] = _number("delta", merged["delta"])
        if not opts["delta"] > 0:
            raise ConfigError("delta", "bin width must be > 0")
    elif cmd == "reset":
        cfg = ResetConfig(target_pdet=_number("target_pdet", merged["target_pdet"]), r_scan=_r_range(merged["reset_r"]))
        opts["r_scan"] = list(cfg.r_scan)
        opts["target_pdet"] = cfg.target_pdet
    elif cmd == "tails":
        opts["samples"] = _number("samples", merged["samples"], int)
        if opts["samples"] < 10:
            raise ConfigError("samples", "need at least 10 samples")
        if "detector" in merged:
            if "tmax" not in merged:
                raise ConfigError("tmax", "an explicit detector list needs --tmax")
            opts["tmax"] = _number("tmax", merged["tmax"])
        else:
            presets = [p.lower() for p in _split("preset", merged["preset"])]
            for p in presets:
                if p not in TAIL_PRESETS:
                    raise ConfigError("preset", f"unknown preset {p!r} (choose from {', '.join(TAIL_PRESETS)})")
            opts["preset"] = presets

    detector = _int_list("detector", merged["detector"]) if "detector" in merged else [TAIL_PRESETS[p][0] for p in opts["preset"]]
    threads = _number("threads", merged["threads"], int)
    if threads < 1:
        raise ConfigError("threads", "must be >= 1")
    m = RunManifest(
        command=cmd,
        n=_int_list("n", merged["n"]),
        alpha=_alpha_list(merged["alpha"]),
        tau=tau,
        detector=detector,
        init=_number("init", merged["init"], int),
        options=opts,
        out=str(merged["out"]),
        threads=threads,
    )
    # validate every point up front so errors name the field before any work starts
    for N, a, t, D in m.points():
        lat = lattice_for(N, a)
        ProtocolConfig(tau=t, D=D, l=m.init).check_sites(lat.N)
    return m


# -- per-point work (top level so worker processes can import it) -----------


def _steps_for(m: RunManifest, tau: float) -> int:
    return m.options.get("steps") or int(round(2.0e4 / tau))


def _survival_point(job):
    m, (N, a, tau, D) = job
    trace = run_monitored(lattice_for(N, a), ProtocolConfig(tau=tau, D=D, l=m.init, n_steps=_steps_for(m, tau)))
    return trace


def _spectrum_point(job):
    m, (N, a, tau, D) = job
    lat = lattice_for(N, a)
    mode = m.options["mode"]
    extra = {}
    if mode == "perturbative":
        spec = gamma_perturbative(lat, D, tau, initial_site=m.init)
    elif mode == "exact":
        spec = exact_spectrum(build_h_eff(lat, D, tau), tau, initial_site=m.init)
    else:
        spec, g_exact = compare_rates(lat, D, tau, initial_site=m.init)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(g_exact > 0, np.abs(spec.gamma - g_exact) / g_exact, np.abs(spec.gamma - g_exact))
        extra = {"gamma_exact": g_exact, "rel_dev": rel}
    top = np.sort(spec.gamma)[-2:]
    return spec, extra, (float(top[1]), float(top[0])), mode_density(spec, m.options["delta"])


def _reset_point(job):
    m, (N, a, tau, D) = job
    lat = lattice_for(N, a)
    cfg = ResetConfig(target_pdet=m.options["target_pdet"], r_scan=tuple(m.options["r_scan"]))
    grid = cfg.grid()
    trace = run_monitored(lat, ProtocolConfig(tau=tau, D=D, l=m.init, n_steps=int(grid.max())))
    gamma_max = exact_spectrum(build_h_eff(lat, D, tau), tau).gamma_max
    r_pred = predicted_optimal_r(gamma_max, tau)
    try:
        scan = scan_reset(trace, grid, cfg.target_pdet)
        t_conv, r_best, t_best = scan.t_converge, scan.r_best, scan.t_best
    except NoConvergenceError:
        t_conv, r_best, t_best = np.full(len(grid), np.inf), None, None
    # the predicted optimum may fall outside the scanned grid
    t_pred = None
    if r_pred <= grid.max():
        hit = np.flatnonzero(grid == r_pred)
        if hit.size:
            t_pred = float(t_conv[hit[0]])
        else:
            t_pred = float(scan_reset(trace, [r_pred], cfg.target_pdet).t_best) if r_best is not None else None
    return grid, t_conv, {
        "N": N,
        "alpha": _label(a),
        "tau": tau,
        "D": D,
        "gamma_max": gamma_max,
        "r_predicted": r_pred,
        "t_predicted": t_pred if t_pred is None or math.isfinite(t_pred) else None,
        "r_best": r_best,
        "t_best": t_best,
    }


def _tail_horizon(m: RunManifest, D: int) -> float:
    if "tmax" in m.options:
        return m.options["tmax"]
    return dict(TAIL_PRESETS.values())[D]


def _tail_point(job):
    m, (N, a, tau, D) = job
    lat = lattice_for(N, a)
    t_max = _tail_horizon(m, D)
    n_steps = int(round(t_max / tau))
    stride = max(1, n_steps // m.options["samples"])
    trace = run_monitored_strided(lat, ProtocolConfig(tau=tau, D=D, l=m.init, n_steps=n_steps), stride)
    s_inf = survival_infinity(N, D, m.init)
    window = default_window(float(trace.t[-1]))
    fit = fit_tail(trace, s_inf, window)
    dist = min(abs(D - m.init), N - abs(D - m.init))
    return {
        "N": N,
        "alpha": _label(a),
        "tau": tau,
        "D": D,
        **fit.as_dict(),
        "s_inf": s_inf,
        "branch": tail_branch(dist, N, lat.J, tau, window[0]),
    }


def _run_points(m: RunManifest, worker):
    jobs = [(m, p) for p in m.points()]
    if m.threads == 1 or len(jobs) == 1:
        return [worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(m.threads, len(jobs))) as pool:
        return list(pool.map(worker, jobs))


# -- writers ------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], columns: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_json(path: Path, m: RunManifest, results) -> None:
    doc = {"tool": f"lrwalk {m.version}", "manifest": m.digest(), "units": UNITS, "results": results}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _tag(N, a, tau, D) -> str:
    return f"N{N}_a{_label(a)}_tau{tau:g}_D{D}"


def cmd_survival(m: RunManifest, out: Path) -> int:
    traces = _run_points(m, _survival_point)
    hdr = m.header()
    groups: dict = {}
    for (N, a, tau, D), trace in zip(m.points(), traces):
        trace.to_csv(out / f"survival_{_tag(N, a, tau, D)}.csv", hdr + [f"N={N} alpha={_label(a)} tau={tau:g} D={D} l={m.init}"])
        groups.setdefault((N, tau, D), []).append((a, trace))
    k = m.options["map_stride"]
    for (N, tau, D), items in groups.items():
        rows = (
            (_label(a), _fmt(t), _fmt(s))
            for a, tr in items
            for t, s in zip(tr.t[::k], tr.survival[::k])
        )
        _write_csv(out / f"survival_map_N{N}_tau{tau:g}_D{D}.csv", hdr, ["alpha", "t", "survival"], rows)
    return EXIT_OK


def cmd_spectrum(m: RunManifest, out: Path) -> int:
    results = _run_points(m, _spectrum_point)
    hdr = m.header()
    gap_rows, dens_rows = [], []
    for (N, a, tau, D), (spec, extra, (g1, g2), dens) in zip(m.points(), results):
        tag = _tag(N, a, tau, D)
        spec.to_csv(out / f"spectrum_{tag}.csv", hdr + [f"mode={m.options['mode']} l={m.init}"], extra_columns=extra)
        gap_rows.append((str(N), _label(a), _fmt(tau), str(D), _fmt(g1), _fmt(g2), _fmt(g1 - g2)))
        for b, d in zip(dens.bin_start, dens.density):
            dens_rows.append((str(N), _label(a), _fmt(tau), str(D), _fmt(b), _fmt(d)))
        dens_rows.append((str(N), _label(a), _fmt(tau), str(D), "dark", _fmt(dens.dark_mass)))
    _write_csv(out / "gap_scan.csv", hdr, ["N", "alpha", "tau", "D", "gamma_max", "gamma_second", "gap"], gap_rows)
    _write_csv(
        out / "mode_density.csv",
        hdr + [f"bin width in 1/gamma: {m.options['delta']:g}; bin_start=dark holds the dark-mode mass"],
        ["N", "alpha", "tau", "D", "bin_start", "density"],
        dens_rows,
    )
    return EXIT_OK


def cmd_reset(m: RunManifest, out: Path) -> int:
    results = _run_points(m, _reset_point)
    hdr = m.header()
    groups: dict = {}
    summary = []
    for (N, a, tau, D), (grid, t_conv, info) in zip(m.points(), results):
        groups.setdefault((N, tau, D), []).extend(
            (_label(a), str(int(r)), _fmt(t)) for r, t in zip(grid, t_conv)
        )
        summary.append(info)
    for (N, tau, D), rows in groups.items():
        _write_csv(
            out / f"reset_landscape_N{N}_tau{tau:g}_D{D}.csv",
            hdr + [f"target_pdet={m.options['target_pdet']:g}; t_converge=inf where the target is never reached"],
            ["alpha", "r", "t_converge"],
            rows,
        )
    _write_json(out / "reset_summary.json", m, summary)
    failed = [s for s in summary if s["r_best"] is None]
    if failed:
        labels = ", ".join(f"alpha={s['alpha']} N={s['N']}" for s in failed)
        print(f"error: no reset period reaches the target for {labels}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_tails(m: RunManifest, out: Path) -> int:
    _write_json(out / "tails.json", m, _run_points(m, _tail_point))
    return EXIT_OK


COMMANDS = {"survival": cmd_survival, "spectrum": cmd_spectrum, "reset": cmd_reset, "tails": cmd_tails}


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrwalk", description="Monitored quantum walks with power-law hopping on a ring.")
    p.add_argument("--version", action="version", version=f"lrwalk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI file with a [run] section")
        sp.add_argument("--n", help="ring sizes, comma separated")
        sp.add_argument("--alpha", help="hopping exponents, comma separated; 'nn' for nearest neighbour")
        sp.add_argument("--tau", help="detection periods in 1/J, comma separated")
        sp.add_argument("--init", help="initial site l")
        sp.add_argument("--steps", help="detection attempts per point (default: t_max = 2e4/J)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", help="worker processes")
        return sp

    s = common(sub.add_parser("survival", help="survival traces and the alpha-t map"))
    s.add_argument("--detector", help="detector sites, comma separated")
    s.add_argument("--map-stride", dest="map_stride", help="keep every k-th step in the map file")

    s = common(sub.add_parser("spectrum", help="effective-Hamiltonian spectra, gaps and mode density"))
    s.add_argument("--detector", help="detector sites, comma separated")
    s.add_argument("--mode", help="exact, perturbative or both")
    for name in ("exact", "perturbative", "both"):
        s.add_argument(f"--{name}", dest="mode", action="store_const", const=name, help=f"same as --mode {name}")
    s.add_argument("--delta", help="bin width of the 1/gamma histogram")

    s = common(sub.add_parser("reset", help="convergence time under sharp resetting"))
    s.add_argument("--detector", help="detector sites, comma separated")
    s.add_argument("--reset-r", dest="reset_r", help="reset period R or scan range LO:HI")
    s.add_argument("--target-pdet", dest="target_pdet", help="target detection probability")

    s = common(sub.add_parser("tails", help="power-law fits of the approach to S(inf)"))
    s.add_argument("--preset", help="d1, d50 or both (comma separated)")
    s.add_argument("--detector", help="explicit detector sites (needs --tmax)")
    s.add_argument("--tmax", help="horizon in 1/J for explicit detectors")
    s.add_argument("--samples", help="number of strided samples per trace")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        m = build_manifest(args)
        out = Path(m.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "manifest.json").write_text(json.dumps(m.record(), indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise ConfigError("out", f"cannot write to {out}: {exc}") from None
        return COMMANDS[m.command](m, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NoConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
