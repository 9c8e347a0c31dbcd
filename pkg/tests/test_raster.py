"""Raster drawing, parameter detection, binarization repair, and PGM I/O.

The hand oracle is an integer-aligned unit (R 10, l_a 8, l_b 4, R_n 20,
R_c 30 mm) whose pixel extents are computed by hand: 25 channel rows of
50 columns, 25 neck rows of 10 columns, 25 cavity rows of 20 columns,
2000 air pixels total, and an exact detection round trip.
"""

import numpy as np
import pytest

from vardesign import raster
from vardesign.acoustics import VarGeometry
from vardesign.raster import (CHANNEL_COL_HI, CHANNEL_COL_LO, FRAME_COLS,
                              FRAME_ROWS, PITCH_MM, CrossSection, binarize,
                              detect_parameters, kmeans_two, rasterize,
                              read_pgm, sample_geometries, solver_image,
                              write_pgm)

HAND = VarGeometry(R=10.0, l_a=8.0, l_b=4.0, R_n=20.0, R_c=30.0)


# -- drawing ------------------------------------------------------------------


def test_hand_drawn_extents():
    px = rasterize(HAND).pixels
    assert px.shape == (FRAME_ROWS, FRAME_COLS)
    assert px.sum() == 2000
    # channel: rows 0..24 over columns 7..56
    assert px[:25, CHANNEL_COL_LO:CHANNEL_COL_HI + 1].all()
    assert not px[:, :CHANNEL_COL_LO].any() and not px[:, CHANNEL_COL_HI + 1:].any()
    # neck: rows 25..49 over columns 27..36
    assert px[25:50, 27:37].all() and not px[25:50, :27].any() and not px[25:50, 37:].any()
    # cavity: rows 50..74 over columns 22..41, nothing above
    assert px[50:75, 22:42].all() and not px[50:75, :22].any() and not px[50:75, 42:].any()
    assert not px[75:].any()


def test_frame_capacity():
    tall = VarGeometry(R=14.5, l_a=20.0, l_b=5.0, R_n=34.5, R_c=54.5)
    with pytest.raises(ValueError):
        rasterize(tall)  # 54.5 mm exceeds the 51.2 mm standard frame
    assert rasterize(tall, rows=140).pixels.shape == (140, FRAME_COLS)


def test_solver_image_pitch_consistency():
    # at the standard pitch the solver image is the frame crop of the drawing
    img = solver_image(HAND)
    full = rasterize(HAND).pixels
    rows = img.shape[0]
    assert (img == full[:rows]).all()
    assert not full[rows:].any()
    # halving the pitch doubles the pixel counts, up to boundary rounding
    fine = solver_image(HAND, pitch_mm=0.2)
    assert fine.shape[1] == 2 * img.shape[1]
    assert abs(int(fine.sum()) - 4 * int(img.sum())) / (4 * int(img.sum())) < 0.05


def test_solver_image_validation():
    with pytest.raises(ValueError):
        solver_image(HAND, pitch_mm=0.0)


def test_cross_section_validation():
    with pytest.raises(ValueError):
        CrossSection(np.zeros((128, 32), dtype=np.uint8))
    with pytest.raises(ValueError):
        CrossSection(2 * np.ones((128, FRAME_COLS), dtype=np.uint8))


# -- sampling -----------------------------------------------------------------


def test_sample_geometries_deterministic_and_in_bounds():
    a = sample_geometries(20, seed=9)
    b = sample_geometries(20, seed=9)
    assert all(ga == gb for ga, gb in zip(a, b))
    assert all(g.in_design_bounds() for g in a)
    assert len(sample_geometries(0, seed=9)) == 0
    with pytest.raises(ValueError):
        sample_geometries(-1, seed=9)


# -- detection ----------------------------------------------------------------


def test_detection_hand_exact():
    det = detect_parameters(rasterize(HAND))
    assert det == HAND


def test_detection_round_trip_sampled():
    for geom in sample_geometries(25, seed=5):
        det = detect_parameters(rasterize(geom))
        err = np.abs(det.as_array() - geom.as_array())
        assert err.max() <= PITCH_MM + 1e-9


def test_detection_honest_failures():
    # no channel at all
    blank = CrossSection(np.zeros((FRAME_ROWS, FRAME_COLS), dtype=np.uint8))
    with pytest.raises(ValueError, match="channel"):
        detect_parameters(blank)
    # channel only: no rows to split into neck and cavity
    channel = np.zeros((FRAME_ROWS, FRAME_COLS), dtype=np.uint8)
    channel[:25, CHANNEL_COL_LO:CHANNEL_COL_HI + 1] = 1
    with pytest.raises(ValueError, match="detection failed"):
        detect_parameters(CrossSection(channel))
    # cavity as wide as the channel span cannot be told apart from it
    anchor = VarGeometry(R=14.5, l_a=20.0, l_b=5.0, R_n=34.5, R_c=54.5)
    with pytest.raises(ValueError, match="detection failed"):
        detect_parameters(rasterize(anchor, rows=140))


def test_kmeans_two():
    lo, hi = kmeans_two(np.array([10.0, 10.0, 11.0, 45.0, 44.0]))
    assert lo == pytest.approx(31.0 / 3.0)
    assert hi == pytest.approx(44.5)
    with pytest.raises(ValueError):
        kmeans_two(np.array([3.0, 3.0, 3.0]))
    with pytest.raises(ValueError):
        kmeans_two(np.array([3.0]))


# -- binarization -------------------------------------------------------------


def test_binarize_threshold_and_channel():
    soft = np.zeros((FRAME_ROWS, FRAME_COLS))
    soft[40, 30] = 0.5  # at threshold -> air, but disconnected -> pruned
    sec = binarize(soft)
    assert sec.pixels[40, 30] == 0
    # the minimal channel is always forced open
    forced = int(np.ceil(raster.MIN_CHANNEL_RADIUS_MM / PITCH_MM))
    assert sec.pixels[:forced, CHANNEL_COL_LO:CHANNEL_COL_HI + 1].all()
    assert sec.pixels.sum() == forced * (CHANNEL_COL_HI - CHANNEL_COL_LO + 1)


def test_binarize_keeps_connected_air():
    soft = np.zeros((FRAME_ROWS, FRAME_COLS))
    soft[:40, 20] = 0.9   # touches the forced channel -> kept
    soft[60:70, 20] = 0.9  # separated strip -> pruned
    sec = binarize(soft)
    assert sec.pixels[20:40, 20].all()
    assert not sec.pixels[60:70, 20].any()


def test_binarize_clears_outside_channel_span():
    soft = np.ones((FRAME_ROWS, FRAME_COLS))
    sec = binarize(soft)
    assert not sec.pixels[:, :CHANNEL_COL_LO].any()
    assert not sec.pixels[:, CHANNEL_COL_HI + 1:].any()
    assert sec.pixels[:, CHANNEL_COL_LO:CHANNEL_COL_HI + 1].all()


def test_binarize_idempotent():
    rng = np.random.default_rng(0)
    soft = rng.uniform(size=(FRAME_ROWS, FRAME_COLS))
    once = binarize(soft)
    twice = binarize(once.pixels.astype(np.float64))
    assert (once.pixels == twice.pixels).all()


def test_binarize_validation():
    with pytest.raises(ValueError):
        binarize(np.full((FRAME_ROWS, FRAME_COLS), 1.5))
    with pytest.raises(ValueError):
        binarize(np.full((FRAME_ROWS, FRAME_COLS), np.nan))
    with pytest.raises(ValueError):
        binarize(np.zeros((10, 10)))


def test_binarize_round_trips_drawings():
    for geom in sample_geometries(5, seed=11):
        px = rasterize(geom).pixels
        repaired = binarize(px.astype(np.float64))
        assert (repaired.pixels == px).all()


# -- PGM I/O ------------------------------------------------------------------


def test_pgm_round_trip(tmp_path):
    sec = rasterize(HAND)
    path = tmp_path / "unit.pgm"
    write_pgm(sec, path)
    back = read_pgm(path)
    assert (back.pixels == sec.pixels).all()
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n64 128\n255\n")
    assert len(raw) == len(b"P5\n64 128\n255\n") + FRAME_ROWS * FRAME_COLS


def test_pgm_rejects_other_formats(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(ValueError):
        read_pgm(path)
