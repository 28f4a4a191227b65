from pathlib import Path

import pytest

from duality_lab.config import load, load_text, parse_text
from duality_lab.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]

LENS = """\
focal_length_m = 0.2
lens_radius_m = 0.05   # Gaussian aperture radius
detector_width_m = 30e-6
k0_per_m = 1e7
"""


def test_shipped_reference_lens_config():
    exp = load(ROOT / "configs" / "reference_lens.cfg")
    assert exp.lens.focal_length == 0.2 and exp.lens.k0 == 1e7
    assert exp.emission is not None and exp.emission.completed
    assert exp.perfect_lens is False


def test_lens_only_config():
    exp = load_text(LENS)
    assert exp.emission is None
    assert exp.lens.detector_width == 30e-6


def test_perfect_lens_flag():
    assert load_text(LENS + "perfect_lens = yes\n").perfect_lens is True
    assert load_text(LENS + "perfect_lens = 0\n").perfect_lens is False


@pytest.mark.parametrize("text, line, fragment", [
    (LENS + "focal_lenght_m = 1\n", 5, "unknown key"),
    (LENS + "k0_per_m = 2e7\n", 5, "duplicate key"),
    (LENS + "just words\n", 5, "key = value"),
    (LENS.replace("1e7", "ten million"), 4, "not a number"),
    (LENS + "perfect_lens = maybe\n", 5, "not a boolean"),
    (LENS.replace("0.05", "0.5"), 1, "lens_radius < focal_length"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        load_text(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}: ")
    assert fragment in str(info.value)


def test_missing_keys_are_named():
    with pytest.raises(ConfigError, match="k0_per_m"):
        load_text("focal_length_m = 0.2\nlens_radius_m = 0.05\ndetector_width_m = 1e-5\n")
    with pytest.raises(ConfigError, match="time_s"):
        load_text(LENS + "gamma_per_s = 1e9\nomega_a_per_s = 3e15\n")


def test_comments_and_blank_lines_are_ignored():
    entries = parse_text("# header\n\nk0_per_m = 1e7 # trailing\n")
    assert entries == {"k0_per_m": ("1e7", 3)}


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load(tmp_path / "absent.cfg")
