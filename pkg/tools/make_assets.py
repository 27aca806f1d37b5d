"""Regenerate the bundled preset bitmaps in src/ifgi/assets/.

Both bitmaps are 128x128; at the default 0.05 mm pitch the letters are
40 px (2 mm) tall.
"""

from pathlib import Path

import numpy as np

from ifgi.pgm import write_pgm

SIZE = 128
ASSETS = Path(__file__).resolve().parents[1] / "src" / "ifgi" / "assets"


def uo_bitmap():
    m = np.zeros((SIZE, SIZE), dtype=bool)
    top, bottom, stroke = 44, 84, 12
    # U: two bars and a base
    m[top:bottom, 18:30] = True
    m[top:bottom, 46:58] = True
    m[bottom - stroke : bottom, 18:58] = True
    # O: square ring
    m[top:bottom, 70:110] = True
    m[top + stroke : bottom - stroke, 70 + stroke : 110 - stroke] = False
    return m


def bomb_bitmap():
    rows, cols = np.mgrid[0:SIZE, 0:SIZE]
    m = (rows - 68) ** 2 + (cols - 44) ** 2 <= 18**2
    m[44:51, 40:49] = True  # neck
    # fuse: thick diagonal from the neck towards the upper right
    for k in range(23):
        r, c = 47 - k, 46 + k // 2
        m[r - 2 : r + 2, c - 2 : c + 2] = True
    return m


if __name__ == "__main__":
    ASSETS.mkdir(parents=True, exist_ok=True)
    write_pgm(ASSETS / "uo.pgm", uo_bitmap().astype(np.uint8) * 255, maxval=255)
    write_pgm(ASSETS / "bomb.pgm", bomb_bitmap().astype(np.uint8) * 255, maxval=255)
