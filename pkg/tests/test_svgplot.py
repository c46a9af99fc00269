import re

import pytest

from oobgini.svgplot import box_stats, emit_boxplot, layout_panel


def long_csv(groups):
    lines = ["# config: {}", "replication,feature,measure,score"]
    for (measure, feature), vals in groups.items():
        lines += [f"{i},{feature},{measure},{v!r}" for i, v in enumerate(vals)]
    return "\n".join(lines) + "\n"


def test_box_stats_symmetric():
    s = box_stats([-1.0, 0.0, 1.0])
    assert (s.q1, s.median, s.q3) == (-0.5, 0.0, 0.5)
    assert (s.whisker_lo, s.whisker_hi) == (-1.0, 1.0)
    assert s.outliers == ()


def test_box_stats_outlier():
    s = box_stats([1, 2, 3, 4, 100])
    assert s.outliers == (100.0,)
    assert s.whisker_hi == 4.0


def test_median_line_at_zero():
    glyphs, _, ypix = layout_panel({"a": [-1.0, 0.0, 1.0]})
    assert glyphs[0].y_median == ypix(0.0)
    svg = emit_boxplot(long_csv({("mdi", "X1"): [-1.0, 0.0, 1.0]}))
    median = re.search(r'class="median"[^>]*y1="([\d.]+)"', svg).group(1)
    assert median == f"{ypix(0.0):.2f}"


def test_identical_groups_identical_geometry():
    glyphs, _, _ = layout_panel({"a": [0.1, 0.4, 0.2, 0.9], "b": [0.1, 0.4, 0.2, 0.9]})
    a, b = glyphs
    assert a.stats == b.stats
    assert (a.y_q1, a.y_median, a.y_q3, a.y_lo, a.y_hi) == (b.y_q1, b.y_median, b.y_q3, b.y_lo, b.y_hi)


def test_panels_and_boxes():
    text = long_csv({("mdi", "X1"): [1, 2], ("mdi", "X2"): [3, 4], ("pg1", "X1"): [0, -1]})
    svg = emit_boxplot(text, title="null case")
    assert svg.startswith("<svg") and svg.endswith("</svg>\n")
    assert svg.count('class="median"') == 3
    assert "<metadata># config: {}</metadata>" in svg
    assert ">null case<" in svg


def test_byte_deterministic():
    text = long_csv({("pg2", f"X{j}"): [0.01 * j, -0.02, 0.03 * j, 0.5] for j in range(1, 6)})
    assert emit_boxplot(text) == emit_boxplot(text)


def test_escapes_labels():
    svg = emit_boxplot(long_csv({("a<b", "x&y"): [1.0, 2.0]}))
    assert "a&lt;b" in svg and "x&amp;y" in svg


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        emit_boxplot("")
    with pytest.raises(ValueError):
        emit_boxplot("# config: {}\nreplication,feature,measure,score\n")


def test_missing_column_rejected():
    with pytest.raises(ValueError, match="column"):
        emit_boxplot("feature,score\nX1,1\n")
