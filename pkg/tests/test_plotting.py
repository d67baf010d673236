import numpy as np
import pytest

from hrlab.errors import DomainError
from hrlab.plotting import KINDS, plot

PAYLOADS = {
    "dispersion": {"sigma": [1.0, 1.1, 1.3, 1.1],
                   "curve": {"p": np.linspace(-3, 3, 7).tolist(), "sigma": [1.2] * 7}},
    "lightcone": {"samples": [{"t": t, "x": x, "comm_norm": 10.0 ** (-abs(x) + t)} for t in (0.5, 1.0) for x in range(-2, 3)],
                  "v_star": 4.0, "v_emp": 1.5},
    "packet": {"profiles": [{"t": t, "abs": np.abs(np.cos(np.arange(8) + t)).tolist()} for t in (0, 1, 2)]},
    "overlap": {"rows": [{"t": t, "deviation": 1 / t, "cross": 0.0} for t in (1.0, 2.0, 4.0)]},
}


@pytest.mark.parametrize("kind", KINDS)
def test_svg_bytes_are_deterministic(kind, tmp_path):
    a = plot(PAYLOADS[kind], kind, tmp_path / "a.svg").read_bytes()
    b = plot(PAYLOADS[kind], kind, tmp_path / "b.svg").read_bytes()
    assert a == b and a.lstrip().startswith(b"<?xml")
    assert b"Date" not in a


@pytest.mark.parametrize("kind", KINDS)
def test_empty_or_mismatched_payload(kind, tmp_path):
    with pytest.raises(DomainError, match="empty"):
        plot({}, kind, tmp_path / "x.svg")
    other = next(k for k in KINDS if k != kind)
    with pytest.raises(DomainError, match="does not match"):
        plot(PAYLOADS[other], kind, tmp_path / "x.svg")


def test_unknown_kind(tmp_path):
    with pytest.raises(DomainError, match="unknown plot kind"):
        plot({"a": 1}, "histogram", tmp_path / "x.svg")
