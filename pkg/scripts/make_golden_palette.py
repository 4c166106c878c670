"""Regenerate the golden palette used by the regression tests.

Only run this after verifying a palette build by hand; the test suite
compares every rebuild byte-for-byte against the file written here.
"""
from pathlib import Path

from oclbcp.color_mapping import build_distance_matrix, build_palette, distance_correlation

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "palette_golden.oclb"

if __name__ == "__main__":
    palette = build_palette()
    palette.save(OUT)
    corr = distance_correlation(build_distance_matrix(), palette.embedding)
    print(f"wrote {OUT} sha256={palette.sha256()} distance_correlation={corr!r}")
