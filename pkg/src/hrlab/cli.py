"""Batch driver: ``hrlab <command> --config <path> [--out <dir>] [--no-cache] [--plot]``.

Every command writes ``result.json`` (a schema-1 envelope) and its own
CSV/JSON tables to the output directory.  Exit status is 0 when no verdict
failed, 1 when one did and 2 for usage, configuration or size-cap errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentManifest
from .errors import ConfigError, DiagnosticError, DomainError, HrlabError
from .interactions import MODELS, DecayFunction, build_hamiltonian, lr_velocity
from .lattice import METRICS, Lattice
from .results import (PASS, REPORT, ResultEnvelope, Verdict, cache_load, cache_store, check, dumps,
                      write_csv)

log = logging.getLogger("hrlab")

COMMANDS = ("certify", "spectrum", "lightcone", "massshell", "arveson", "scatter", "gapflow", "all")
DEFAULT_MAX_SITES = 16
DEFAULT_LAMBDA = {"lo": 0.1, "hi": 5.0, "count": 50}


class CapError(ConfigError):
    """Requested size above the configured cap."""


# -- manifest helpers -----------------------------------------------------------------
def _model(m: ExperimentManifest):
    name = m.get("model", "name", "ising", str)
    if name not in MODELS:
        raise ConfigError(f"[model] name: unknown model {name!r}; expected one of {sorted(MODELS)}")
    dim = m.get("model", "dim", 1, int)
    if name == "ising":
        return MODELS[name](m.get("model", "eps", 0.1, float), dim)
    return MODELS[name](m.get("model", "jxy", 1.0, float), m.get("model", "jz", 1.0, float),
                        m.get("model", "h", 0.0, float), dim)


def _lattice(m: ExperimentManifest, n: int | None = None, boundary: str | None = None) -> Lattice:
    n = m.get("model", "n", 8, int) if n is None else n
    dim = m.get("model", "dim", 1, int)
    cap = m.get("main", "max_sites", DEFAULT_MAX_SITES, int)
    if n ** dim > cap:
        raise CapError(f"{n ** dim} sites requested; the cap is {cap} (raise [main] max_sites to override)")
    return Lattice(n, dim, boundary or m.get("model", "boundary", "periodic", str), metric=_metric(m))


def _metric(m: ExperimentManifest) -> str:
    metric = m.get("model", "metric", "linf", str)
    if metric not in METRICS:
        raise ConfigError(f"[model] metric: expected one of {list(METRICS)}, got {metric!r}")
    return metric


def _decay(m: ExperimentManifest) -> DecayFunction:
    return DecayFunction(dim=m.get("model", "dim", 1, int), metric=_metric(m))


def _lambda_grid(m: ExperimentManifest):
    grid = m.get("certificate", "lambda_grid", None)
    if grid is not None:
        return [float(x) for x in grid]
    lo = m.get("certificate", "lambda_lo", DEFAULT_LAMBDA["lo"], float)
    hi = m.get("certificate", "lambda_hi", DEFAULT_LAMBDA["hi"], float)
    cnt = m.get("certificate", "lambda_count", DEFAULT_LAMBDA["count"], int)
    return np.round(np.linspace(lo, hi, cnt), 10).tolist()


def _shell_window(m: ExperimentManifest):
    w = m.get("shell", "window", [0.5, 1.5], float)
    if len(w) != 2:
        raise ConfigError("[shell] window: expected [lo, hi]")
    return tuple(w)


def _spectrum(m: ExperimentManifest, lat: Lattice):
    from .spectral import momentum_sectors
    return momentum_sectors(build_hamiltonian(_model(m), lat), lat)


# -- commands: each returns (metric, payload, verdicts) -------------------------------
def cmd_certify(m: ExperimentManifest):
    cert = lr_velocity(_model(m), _lambda_grid(m), _decay(m))
    payload = {"certificate": cert.to_dict()}
    v = [check("finite_velocity", bool(np.isfinite(cert.v)), cert.v)]
    return "lr_certificate", payload, v


def cmd_spectrum(m: ExperimentManifest):
    from .spectral import band_constant, check_additivity
    lat = _lattice(m)
    js = _spectrum(m, lat)
    eps = float(_model(m).params.get("eps", np.nan))
    payload = {"spectrum": js.to_dict()}
    verdicts = []
    if np.isfinite(eps):
        e_max = m.get("spectrum", "band_e_max", 3.5, float)
        c = band_constant(js, eps, e_max)
        payload["band_constant"] = c
        cmax = m.tolerance("band_constant", 5.0)
        if eps <= 0.05:
            verdicts.append(check("bands", c <= cmax, c, cmax))
        else:
            verdicts.append(Verdict("bands", REPORT, c, cmax, "coupling above 0.05"))
        if eps > 0:
            add = check_additivity(js, m.get("spectrum", "additivity_samples", 100, int), c * 2 * eps, m.seed)
            payload["additivity"] = add.to_dict()
            verdicts.append(check("additivity", add.passed, add.worst, add.tol))
    return "spectrum", payload, verdicts


def cmd_massshell(m: ExperimentManifest):
    from .spectral import extract_mass_shell, group_velocity
    lat = _lattice(m)
    js = _spectrum(m, lat)
    sh = extract_mass_shell(js, _shell_window(m))
    vel = group_velocity(sh) if lat.dim == 1 else None
    cert = lr_velocity(_model(m), _lambda_grid(m), _decay(m))
    payload = {"shell": sh.to_dict()}
    verdicts = [Verdict("shell_valid", PASS if sh.valid else REPORT, sh.valid)]
    if vel is not None:
        payload["velocity"] = vel.to_dict()
        payload["v_star"] = cert.v
        verdicts.append(check("velocity_bound", vel.max_speed <= cert.v, vel.max_speed, cert.v))
        pc = np.linspace(-np.pi, np.pi, 401)
        payload["curve"] = {"p": pc.tolist(), "sigma": np.asarray(sh(pc)).reshape(-1).tolist()}
    return "mass_shell", payload, verdicts


def cmd_lightcone(m: ExperimentManifest):
    from .dynamics import EvolutionEngine, envelope_check, fit_front_decay, lightcone_profile
    from .operators import pauli
    lat = _lattice(m)
    phi = _model(m)
    eng = EvolutionEngine(build_hamiltonian(phi, lat))
    origin = (0,) * lat.dim
    a = pauli(lat, origin, m.get("lightcone", "a", "x", str))
    b = pauli(lat, origin, m.get("lightcone", "b", "x", str))
    times = m.get("lightcone", "times", [0.0, 0.5, 1.0, 2.0], float)
    disp = m.get("lightcone", "displacements", list(range(lat.n // 2 + 1)), int)
    prof = lightcone_profile(eng, a, b, times, disp, m.get("lightcone", "threshold", 1e-3, float),
                             m.get("lightcone", "r0", 0.0, float), fit=False, tol=m.tolerance("norm", 1e-8))
    notes = []
    try:
        fit_front_decay(prof)
    except DiagnosticError as exc:
        notes.append(str(exc))
    cert = lr_velocity(phi, _lambda_grid(m), _decay(m))
    env = envelope_check(prof, cert, a, b)
    payload = {"profile": prof.to_dict(), "certificate": cert.to_dict(),
               "envelope": {k: v for k, v in env.items() if k != "envelope"}, "notes": notes}
    verdicts = [check("v_emp_below_certificate", prof.v_emp <= cert.v, prof.v_emp, cert.v),
                check("envelope_domination", env["dominated"], env["worst_ratio"], 1.0)]
    return "lightcone", payload, verdicts


def _filter(m: ExperimentManifest, dim: int):
    from .arveson import FilterFunction
    sec = m.section("filter")
    shape = sec.get("shape", "bump")
    if shape != "bump":
        raise ConfigError(f"[filter] shape: only 'bump' is available, got {shape!r}")
    E0, wE, p0, wp = (sec.get(k) for k in ("E0", "wE", "p0", "wp"))
    if (E0 is None) != (wE is None) or (p0 is None) != (wp is None):
        raise ConfigError("[filter] needs E0 with wE and p0 with wp")
    return FilterFunction.box(E0, wE, p0, wp, dim=dim)


def cmd_arveson(m: ExperimentManifest):
    from .arveson import SpectralFrame, almost_locality_profile, arveson_spectrum, em_transfer_check, smear
    from .operators import pauli
    lat = _lattice(m)
    js = _spectrum(m, lat)
    fr = SpectralFrame(js, m.get("arveson", "ceiling", None, float))
    f = _filter(m, lat.dim)
    a = smear(pauli(lat, (0,) * lat.dim, m.get("arveson", "seed", "x", str)), f, fr)
    est = arveson_spectrum(a, fr, m.get("arveson", "threshold", 1e-8, float),
                           m.get("arveson", "resolution", 1e-3, float))
    lo, hi = m.get("arveson", "delta", [0.0, 2.0], float)
    delta = (fr.energies >= lo) & (fr.energies <= hi)
    tol = m.tolerance("transfer", 1e-10)
    tr = em_transfer_check(a, fr, delta, transfer=f, tol=tol)
    payload = {"filter": f.describe(), "frame": fr.to_dict(), "spectrum": est.to_dict(), "transfer": tr.to_dict()}
    verdicts = [check("em_transfer", tr.passed, tr.residual, tol)]
    if fr.complete:
        prof = almost_locality_profile(a, lat, m.get("arveson", "radii", list(range(lat.n // 2)), int))
        payload["almost_locality"] = prof.to_dict()
        verdicts.append(check("almost_locality_monotone", prof.monotone, prof.distances[-1]))
    return "arveson", payload, verdicts


def _particles(m: ExperimentManifest):
    names = sorted((s for s in m.data if s.startswith("particle.")), key=lambda s: s.split(".", 1)[1])
    if not names:
        raise ConfigError("[scatter] needs at least one [particle.<i>] section")
    out = []
    for s in names:
        k = m.get(s, "k", None, int)
        if k is None:
            raise ConfigError(f"[{s}] k: missing momentum index")
        out.append({"k": k, "wE": m.get(s, "wE", 0.6, float), "wp": m.get(s, "wp", None, float),
                    "width": m.get(s, "width", 1.2, float), "center": m.get(s, "center", 0.0, float)})
    return out


def cmd_scatter(m: ExperimentManifest):
    from .arveson import SpectralFrame, Window, make_creation_operator
    from .operators import pauli
    from .scattering import (WavePacket, fock_factorization_check, hr_operator, monotone_decreasing,
                             scattering_state, single_particle_invariance)
    from .spectral import extract_mass_shell
    lat = _lattice(m)
    if lat.dim != 1:
        raise ConfigError("[model] dim: scattering runs on chains")
    js = _spectrum(m, lat)
    sh = extract_mass_shell(js, _shell_window(m))
    fr = SpectralFrame(js, m.get("scatter", "ceiling", None, float))
    seed = pauli(lat, 0, m.get("scatter", "seed", "x", str))
    times = m.get("scatter", "times", [2.0, 4.0, 6.0, 8.0], float)
    config, filters, verdicts, parts = [], [], [], []
    inv_tol = m.tolerance("invariance", 1e-8)
    for i, pt in enumerate(_particles(m)):
        p = float(fr.grid.points[fr.grid.index(pt["k"])][0])
        co = make_creation_operator(seed, fr, sh, p, (pt["wE"], pt["wp"]))
        g = WavePacket(sh, Window(0, p, pt["width"]), pt["center"])
        b = co.operator
        b = b.scale(1 / np.linalg.norm(hr_operator(b, g, 0.0) @ fr.vacuum))
        config.append((b, g))
        filters.append(co.filter)
        dev = max(single_particle_invariance(b, g, times))
        verdicts.append(check(f"invariance_{i}", dev <= inv_tol, dev, inv_tol))
        parts.append({**pt, "p": p, "diagnostics": co.diagnostics, "velocity_support": list(g.velocity_support())})
    series = []
    for t in times:
        psi = scattering_state(config, t, filters, commutators=False)
        rep = fock_factorization_check(psi, psi)
        row = {"t": t, "n": len(config), "norm": float(np.linalg.norm(psi.psi)), "deviation": rep.deviation,
               "covariance": rep.covariance}
        if len(config) > 1:
            row["cross"] = fock_factorization_check(psi, scattering_state(config[:1], t, commutators=False)).deviation
        series.append(row)
    g0 = config[0][1]
    payload = {"particles": parts, "series": series,
               "packet": {"m": 4 * lat.n, "profiles": [{"t": t, "abs": np.abs(g0.profile(t, 4 * lat.n)).tolist()}
                                                       for t in times]}}
    if len(config) > 1:
        devs = [r["deviation"] for r in series]
        ok = monotone_decreasing(devs) and devs[-1] <= m.tolerance("fock", 1e-2)
        # non-monotone finite-time trends are reported rather than failed
        verdicts.append(Verdict("fock_trend", PASS if ok else REPORT, devs[-1], m.tolerance("fock", 1e-2)))
    return "scattering", payload, verdicts


def cmd_gapflow(m: ExperimentManifest):
    from .spectral import gap_flow
    sizes = m.get("gapflow", "sizes", [8, 10, 12, 14], int)
    for n in sizes:
        _lattice(m, n)
    gf = gap_flow(_model(m), sizes, m.get("gapflow", "floor", 0.5, float), m.get("model", "boundary", "periodic", str))
    return "gap_flow", {"gap_flow": gf.to_dict()}, [Verdict("gap_floor", gf.verdict, min(gf.gaps), gf.floor)]


def cmd_all(m: ExperimentManifest):
    from . import acceptance
    select = m.get("acceptance", "select", None, int)
    results = acceptance.run(select, echo=print)
    payload = {"criteria": [r.to_dict() for r in results]}
    verdicts = [check(f"criterion_{r.number}", r.passed, r.summary) for r in results]
    return "acceptance", payload, verdicts


HANDLERS = {"certify": cmd_certify, "spectrum": cmd_spectrum, "lightcone": cmd_lightcone,
            "massshell": cmd_massshell, "arveson": cmd_arveson, "scatter": cmd_scatter,
            "gapflow": cmd_gapflow, "all": cmd_all}


# -- emitted files, all derived from the payload ----------------------------------------
def _tables(command: str, payload: dict) -> dict:
    if command == "massshell" and "velocity" in payload:
        sig = np.asarray(payload["shell"]["sigma"], float).reshape(-1)
        n = sig.size
        p = 2 * np.pi * np.arange(n) / n
        p = np.where(p > np.pi, p - 2 * np.pi, p)
        rows = list(zip(p.tolist(), sig.tolist(), payload["velocity"]["interp"],
                        np.asarray(payload["shell"]["isolation"], float).reshape(-1).tolist()))
        return {"dispersion.csv": (["p", "sigma", "dsigma", "isolation"], rows)}
    if command == "lightcone":
        rows = [(r["t"], r["x"], r["comm_norm"]) for r in payload["profile"]["samples"]]
        return {"lightcone.csv": (["t", "x", "comm_norm"], rows)}
    if command == "scatter":
        rows = [(r["t"], r["n"], r["deviation"], r.get("cross", ""), r["covariance"]) for r in payload["series"]]
        return {"overlaps.csv": (["t", "n", "deviation", "cross", "covariance"], rows)}
    return {}


def _figures(command: str, payload: dict) -> dict:
    if command == "massshell":
        d = {"sigma": payload["shell"]["sigma"]}
        if "curve" in payload:
            d["curve"] = payload["curve"]
        return {"dispersion.svg": ("dispersion", d)}
    if command == "lightcone":
        return {"lightcone.svg": ("lightcone", {"samples": payload["profile"]["samples"],
                                                "v_star": payload["certificate"]["v_lambda"],
                                                "v_emp": payload["profile"]["v_emp"]})}
    if command == "scatter":
        return {"overlap.svg": ("overlap", {"rows": payload["series"]}),
                "packet.svg": ("packet", {"profiles": payload["packet"]["profiles"]})}
    return {}


# -- driver ----------------------------------------------------------------------------
def execute(command: str, manifest: ExperimentManifest, out: Path, use_cache: bool = True,
            plots: bool = False) -> ResultEnvelope:
    """Run one command, honoring the cache, and write its files to ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    h = manifest.hash
    env = cache_load(command, h) if use_cache else None
    if env is None:
        t0 = time.perf_counter()
        metric, payload, verdicts = HANDLERS[command](manifest)
        payload = {"lattice_metric": _metric(manifest), **payload}
        env = ResultEnvelope(command, h, metric, _roundtrip(payload), verdicts, time.perf_counter() - t0,
                             __version__)
        if use_cache:
            cache_store(env)
    else:
        log.info("cache hit for %s (%s)", command, h[:12])
    (out / "result.json").write_text(dumps(env.to_dict()))
    for name, (header, rows) in _tables(command, env.payload).items():
        write_csv(out / name, header, rows)
    if plots:
        from .plotting import plot
        for name, (kind, data) in _figures(command, env.payload).items():
            plot(data, kind, out / name)
    return env


def _roundtrip(payload: dict) -> dict:
    """Pass the payload through the emitter so fresh and cached runs agree exactly."""
    return json.loads(dumps(payload))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hrlab", description="Haag-Ruelle scattering laboratory")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="experiment manifest")
    p.add_argument("--out", default=None, help="output directory (default: [main] out, else ./hrlab-out)")
    p.add_argument("--no-cache", action="store_true", help="ignore and do not update the result cache")
    p.add_argument("--plot", action="store_true", help="also write SVG figures")
    p.add_argument("--version", action="version", version=f"hrlab {__version__}")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="hrlab: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        manifest = ExperimentManifest.load(args.config)
        out = Path(args.out or manifest.get("main", "out", "hrlab-out", str))
        env = execute(args.command, manifest, out, use_cache=not args.no_cache, plots=args.plot)
    except (ConfigError, CapError) as exc:
        print(f"hrlab: error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, HrlabError) as exc:
        print(f"hrlab: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    for v in env.verdicts:
        print(f"{v.status:6s} {v.name}: {v.value}" + (f" (tol {v.tol})" if v.tol is not None else ""))
    print(f"wrote {out / 'result.json'}")
    return 1 if env.failed else 0


if __name__ == "__main__":
    sys.exit(main())
