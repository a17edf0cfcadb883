#!/usr/bin/env python3
"""Collect usable TTF fonts from the matplotlib distribution into one directory.

Only fonts with full alphanumeric coverage are copied; symbol-only faces
are excluded. Gives a 20-font pool (DejaVu + STIX + Computer Modern) for
desk-scale experiments without external downloads.
"""

import argparse
import shutil
from pathlib import Path

import matplotlib
from fontTools.ttLib import TTFont

CHARSET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"

# cmex/cmsy/cmmi map letter codepoints to math symbols; skip them
EXCLUDE = {"cmex10.ttf", "cmsy10.ttf", "cmmi10.ttf"}


def covers_charset(path: Path) -> bool:
    try:
        cmap = TTFont(str(path), fontNumber=0, lazy=True).getBestCmap()
    except Exception:
        return False
    return all(ord(c) in cmap for c in CHARSET)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="fonts", help="destination directory")
    args = parser.parse_args()
    src = Path(matplotlib.get_data_path()) / "fonts" / "ttf"
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    copied = 0
    for path in sorted(src.glob("*.ttf")):
        if path.name in EXCLUDE or not covers_charset(path):
            continue
        shutil.copy(path, dest / path.name)
        copied += 1
    print(f"copied {copied} fonts to {dest}")
    return 0 if copied >= 2 else 1


if __name__ == "__main__":
    raise SystemExit(main())
