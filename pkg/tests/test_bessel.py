"""Bessel J0/J1/Y0/Y1 against scipy and frozen reference values.

The piecewise series/asymptotic evaluation must stay within 2e-6 of scipy
(relative to a 1e-6 absolute floor near the zeros) over the full working
range, and the two branches must agree at the switchover.
"""

import numpy as np
import pytest
from scipy import special

from vardesign import bessel

# independently computed spot values, 16 digits
SPOT = {
    "j0": {0.5: 0.938469807240813, 1.0: 0.7651976865579666,
           5.0: -0.1775967713143385, 20.0: 0.1670246643405812,
           150.0: -0.0007740903753941157},
    "j1": {0.5: 0.2422684576748739, 1.0: 0.4400505857449335,
           5.0: -0.3275791375914652, 20.0: 0.06683312417580962,
           150.0: -0.06514516365772736},
    "y0": {0.5: -0.4445187335067066, 1.0: 0.08825696421567696,
           5.0: -0.308517625249034, 20.0: 0.06264059680942123,
           150.0: -0.06514222150903735},
    "y1": {0.5: -1.471472392670243, 1.0: -0.7812128213002887,
           5.0: 0.1478631433912264, 20.0: -0.1655116143625235,
           150.0: 0.0005569563495603133},
}

_SCIPY = {"j0": special.j0, "j1": special.j1, "y0": special.y0, "y1": special.y1}


@pytest.mark.parametrize("kind", bessel.KINDS)
def test_spot_values(kind):
    fn = getattr(bessel, kind)
    for x, want in SPOT[kind].items():
        assert fn(x) == pytest.approx(want, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("kind", bessel.KINDS)
def test_against_scipy_full_range(kind):
    x = np.linspace(1e-3, bessel.MAX_ARGUMENT, 40001)
    got = bessel.bessel(kind, x)
    want = _SCIPY[kind](x)
    err = np.abs(got - want) / np.maximum(np.abs(want), 1e-6)
    assert err.max() < 2e-6


@pytest.mark.parametrize("kind", bessel.KINDS)
def test_branch_continuity(kind):
    # series and asymptotic branches must agree across the switch point
    x = bessel.SERIES_LIMIT + np.array([-1e-9, 0.0, 1e-9])
    vals = bessel.bessel(kind, x)
    assert np.abs(np.diff(vals)).max() < 1e-7


def test_small_argument_forms():
    assert bessel.j0(1e-8) == pytest.approx(1.0, abs=1e-15)
    assert bessel.j1(1e-8) == pytest.approx(0.5e-8, rel=1e-10)
    # y0, y1 diverge at 0; just check the signs well inside the series range
    assert bessel.y0(1e-4) < -5.0
    assert bessel.y1(1e-4) < -6000.0


def test_vectorized_matches_scalar():
    x = np.array([0.3, 3.0, 30.0])
    for kind in bessel.KINDS:
        fn = getattr(bessel, kind)
        vec = bessel.bessel(kind, x)
        assert vec == pytest.approx([fn(v) for v in x], rel=1e-14)


def test_out_of_range_rejected():
    with pytest.raises(ValueError):
        bessel.j0(bessel.MAX_ARGUMENT * 1.5)
    with pytest.raises(ValueError):
        bessel.y1(0.0)
    with pytest.raises(ValueError):
        bessel.y0(-1.0)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        bessel.bessel("j2", 1.0)
