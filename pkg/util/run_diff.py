"""Compare the field CSVs of two simulate run directories"""
import sys
from pathlib import Path

from squeeze_film.diagnostics import field_difference
from squeeze_film.grid import path_from_csv


def compare_runs(first, second):
    """Relative max difference of every CSV path present in both runs."""
    first, second = Path(first), Path(second)
    diffs = {}
    for csv in sorted(first.glob("*/*.csv")):
        relative = csv.relative_to(first)
        other = second / relative
        if not other.exists():
            continue
        a = path_from_csv(csv)
        b = path_from_csv(other, grid=a.grid)
        diffs[relative.as_posix()] = field_difference(a, b)
    return diffs


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        print("usage: run_diff.py RUN_DIR OTHER_RUN_DIR", file=sys.stderr)
        return 2
    diffs = compare_runs(*args)
    if not diffs:
        print("no common field files", file=sys.stderr)
        return 1
    for name, value in diffs.items():
        print(f"{name}: {value:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
