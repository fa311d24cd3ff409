"""Tests for the ROC / sensitivity-specificity SVG"""
import math
import xml.etree.ElementTree as ET

import pytest

from charts import emit_roc_svg
from errors import ToolkitIOError
from evaluation import RocCurve, roc_curve


def svg_text(curve, path):
    emit_roc_svg(curve, path)
    text = path.read_text(encoding="utf-8")
    assert ET.fromstring(text).tag.endswith("svg")
    return text


def test_svg_annotates_the_area_under_the_curve(tmp_path):
    curve = roc_curve([0.9, 0.8, 0.7, 0.1], [True, False, True, False])
    text = svg_text(curve, tmp_path / "roc.svg")
    assert "AUC = 0.750" in text
    assert "Sensitivity and specificity" in text


def test_perfect_curve_reaches_the_top_left_corner(tmp_path):
    curve = roc_curve([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
    assert (0.0, 1.0) in list(zip(curve.fp_rates, curve.tp_rates))
    assert "AUC = 1.000" in svg_text(curve, tmp_path / "roc.svg")


def test_single_point_curve_still_draws_the_chance_line(tmp_path):
    curve = RocCurve.from_points([math.inf], [0.0], [0.0])
    text = svg_text(curve, tmp_path / "roc.svg")
    assert "chance" in text
    assert "no finite threshold" in text


def test_same_curve_gives_identical_bytes(tmp_path):
    curve = roc_curve([0.3, 0.6, 0.6, 0.2, 0.9, 0.4], [False, True, False, False, True, True])
    emit_roc_svg(curve, tmp_path / "first.svg")
    emit_roc_svg(curve, tmp_path / "second.svg")
    assert (tmp_path / "first.svg").read_bytes() == (tmp_path / "second.svg").read_bytes()


def test_unwritable_path_is_an_io_error(tmp_path):
    curve = roc_curve([0.9, 0.1], [True, False])
    with pytest.raises(ToolkitIOError):
        emit_roc_svg(curve, tmp_path / "missing" / "roc.svg")
