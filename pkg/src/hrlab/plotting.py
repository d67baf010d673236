"""Deterministic SVG figures rendered from result payloads."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import DomainError  # noqa: E402

STYLE_VERSION = 1
KINDS = ("dispersion", "lightcone", "packet", "overlap")

_RC = {"svg.hashsalt": "hrlab", "svg.fonttype": "path", "font.size": 9, "figure.figsize": (5.0, 3.6),
       "axes.grid": True, "grid.alpha": 0.3, "lines.linewidth": 1.2}


def _require(payload: dict, keys, kind: str):
    if not payload:
        raise DomainError(f"empty payload for a {kind} plot")
    missing = [k for k in keys if k not in payload]
    if missing:
        raise DomainError(f"payload does not match plot kind {kind!r}: missing {missing}")


def _dispersion(ax, payload):
    _require(payload, ["sigma"], "dispersion")
    sig = np.asarray(payload["sigma"], dtype=float).reshape(-1)
    n = sig.size
    p = 2 * np.pi * np.arange(n) / n
    p = np.where(p > np.pi, p - 2 * np.pi, p)
    order = np.argsort(p)
    ax.plot(p[order], sig[order], "o", ms=3, label="shell points")
    if "curve" in payload:
        c = payload["curve"]
        ax.plot(c["p"], c["sigma"], "-", label="interpolant")
    ax.set_xlabel("p")
    ax.set_ylabel("Σ(p)")
    ax.set_xlim(-np.pi, np.pi)
    ax.legend(loc="best", frameon=False)


def _lightcone(ax, payload):
    _require(payload, ["samples"], "lightcone")
    rows = payload["samples"]
    ts = sorted({r["t"] for r in rows})
    xs = sorted({r["x"] for r in rows})
    img = np.full((len(ts), len(xs)), np.nan)
    for r in rows:
        v = r["comm_norm"]
        img[ts.index(r["t"]), xs.index(r["x"])] = np.log10(max(v, 1e-16))
    im = ax.imshow(img, origin="lower", aspect="auto", cmap="viridis", vmin=-16, vmax=1,
                   extent=(xs[0] - 0.5, xs[-1] + 0.5, -0.5, len(ts) - 0.5))
    ax.set_yticks(range(len(ts)))
    ax.set_yticklabels([f"{t:g}" for t in ts])
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    if payload.get("v_star"):
        v = payload["v_star"]
        tt = np.arange(len(ts))
        ax.plot(np.clip(v * np.asarray(ts), xs[0], xs[-1]), tt, "w--", label="v* t")
    if payload.get("v_emp") is not None and np.isfinite(payload["v_emp"]):
        ax.plot(np.clip(payload["v_emp"] * np.asarray(ts), xs[0], xs[-1]), np.arange(len(ts)), "r:",
                label="empirical front")
    ax.legend(loc="upper left", frameon=False, fontsize=7)
    ax.figure.colorbar(im, ax=ax, label="log10 ‖[τ_t(A), B_x]‖")


def _packet(ax, payload):
    _require(payload, ["profiles"], "packet")
    prof = payload["profiles"]
    ts = [p["t"] for p in prof]
    img = np.array([p["abs"] for p in prof], dtype=float)
    m = img.shape[1]
    x = np.arange(m)
    x = np.where(x >= m // 2, x - m, x)
    order = np.argsort(x)
    ax.imshow(img[:, order], origin="lower", aspect="auto", cmap="magma",
              extent=(x[order][0] - 0.5, x[order][-1] + 0.5, 0, len(ts)))
    ax.set_yticks(np.arange(len(ts)) + 0.5)
    ax.set_yticklabels([f"{t:g}" for t in ts])
    ax.set_xlabel("x")
    ax.set_ylabel("t")


def _overlap(ax, payload):
    _require(payload, ["rows"], "overlap")
    rows = payload["rows"]
    t = [r["t"] for r in rows]
    for key, label in (("deviation", "n = 2 permanent deviation"), ("cross", "n = 1 vs n = 2 overlap")):
        vals = [max(r.get(key, 0.0) or 0.0, 1e-16) for r in rows]
        if any(key in r for r in rows):
            ax.semilogy(t, vals, "o-", label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("magnitude")
    ax.legend(loc="best", frameon=False)


_DRAW = {"dispersion": _dispersion, "lightcone": _lightcone, "packet": _packet, "overlap": _overlap}


def plot(payload: dict, kind: str, path) -> Path:
    """Render ``payload`` as an SVG; identical payloads give identical bytes."""
    if kind not in _DRAW:
        raise DomainError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    path = Path(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            _DRAW[kind](ax, payload)
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None, "Creator": f"hrlab style {STYLE_VERSION}"})
        finally:
            plt.close(fig)
    return path
