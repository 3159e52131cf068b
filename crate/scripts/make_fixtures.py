"""Regenerate the natural-image PPM fixtures used by the test suites.

All source images ship with scikit-image and are public domain or CC0.
Large images are box-downscaled by 2 before cropping so that a crop holds
a photo-like amount of detail.
"""
import pathlib

import numpy as np
import skimage.data as data
from PIL import Image

ROOT = pathlib.Path(__file__).resolve().parent.parent / "crates/cli/tests/fixtures"

# name, loader, downscale, (top, left), size
TRAIN = [
    ("astronaut", data.astronaut, 2, (20, 40), 160),
    ("chelsea", data.chelsea, 1, (60, 140), 160),
    ("coffee", data.coffee, 2, (20, 60), 160),
    ("rocket", data.rocket, 2, (40, 120), 160),
    ("camera", data.camera, 2, (40, 40), 160),
    ("brick", data.brick, 2, (0, 0), 160),
    ("gravel", data.gravel, 2, (60, 60), 160),
    ("coins", data.coins, 1, (60, 100), 160),
    ("ihc", data.immunohistochemistry, 2, (40, 40), 160),
    ("clock", data.clock, 1, (60, 120), 160),
]

HELDOUT = [
    ("grass", data.grass, 2, (100, 100), 96),
    ("moon", data.moon, 2, (80, 80), 96),
    ("retina", data.retina, 4, (140, 140), 96),
    ("hubble", data.hubble_deep_field, 2, (200, 200), 96),
    ("astronaut_b", data.astronaut, 2, (150, 150), 96),
    ("chelsea_b", data.chelsea, 1, (180, 20), 96),
]


def prepare(loader, down, top_left, size):
    img = loader()
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    img = img[..., :3].astype(np.uint8)
    pil = Image.fromarray(img)
    if down > 1:
        pil = pil.resize((pil.width // down, pil.height // down), Image.BOX)
    arr = np.asarray(pil)
    t, l = top_left
    crop = arr[t : t + size, l : l + size]
    assert crop.shape == (size, size, 3), crop.shape
    return crop


def write_ppm(path, arr):
    h, w, _ = arr.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(arr).tobytes())


for sub, table in (("train", TRAIN), ("heldout", HELDOUT)):
    out = ROOT / sub
    out.mkdir(parents=True, exist_ok=True)
    for name, loader, down, tl, size in table:
        write_ppm(out / f"{name}.ppm", prepare(loader, down, tl, size))
