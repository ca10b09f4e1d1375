"""Procedural playing-card suit images with recorded rotation and shear.

Glyphs are drawn from analytic primitives (discs, triangles, rectangles) in a
normalized frame ``[-1, 1]^2`` with y pointing up, anti-aliased by 4x4
supersampling. Geometric transforms use inverse mapping with bilinear
sampling and zero padding.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .seeding import derive_seed

SUITS = ("clubs", "spades", "hearts", "diamonds")
CLUBS, SPADES, HEARTS, DIAMONDS = range(4)
MAX_ROTATION = 2.0 * np.pi / 3.0
MAX_SHEAR = np.pi / 9.0
SUPERSAMPLE = 4


def suit_index(suit):
    if isinstance(suit, str):
        try:
            return SUITS.index(suit.lower())
        except ValueError:
            raise InvalidArgument(f"unknown suit {suit!r}") from None
    if int(suit) not in range(4) or int(suit) != suit:
        raise InvalidArgument(f"unknown suit {suit!r}")
    return int(suit)


def _disc(x, y, cx, cy, r):
    return (x - cx) ** 2 + (y - cy) ** 2 <= r * r


def _triangle(x, y, p0, p1, p2):
    def edge(a, b):
        return (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])

    e0, e1, e2 = edge(p0, p1), edge(p1, p2), edge(p2, p0)
    return ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) | ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))


def _heart(x, y):
    return (
        _disc(x, y, -0.3, 0.28, 0.32)
        | _disc(x, y, 0.3, 0.28, 0.32)
        | _triangle(x, y, (-0.6, 0.16), (0.6, 0.16), (0.0, -0.68))
    )


def _stem(x, y):
    return _triangle(x, y, (0.0, 0.0), (-0.3, -0.7), (0.3, -0.7))


def _mask(suit, x, y):
    if suit == HEARTS:
        return _heart(x, y)
    if suit == SPADES:
        return _heart(x / 0.85, -(y - 0.1) / 0.85) | _stem(x, y)
    if suit == CLUBS:
        return (
            _disc(x, y, 0.0, 0.36, 0.26)
            | _disc(x, y, -0.3, -0.08, 0.26)
            | _disc(x, y, 0.3, -0.08, 0.26)
            | _disc(x, y, 0.0, 0.08, 0.14)
            | _stem(x, y)
        )
    return np.abs(x) + np.abs(y) <= 0.68


def render_suit_glyph(suit, size=32):
    """Filled, anti-aliased glyph of ``suit``; 1 is foreground, 0 background."""
    suit = suit_index(suit)
    if size < 16:
        raise InvalidArgument("glyph size must be >= 16")
    n = size * SUPERSAMPLE
    coords = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    x = coords[None, :]
    y = -coords[:, None]
    fine = _mask(suit, x, y).astype(np.float64)
    return fine.reshape(size, SUPERSAMPLE, size, SUPERSAMPLE).mean(axis=(1, 3))


def transform_matrix(rotation, shear):
    """Forward map (in y-up centred coordinates): rotate, then shear equally in x and y."""
    c, s = np.cos(rotation), np.sin(rotation)
    t = np.tan(shear)
    rot = np.array([[c, -s], [s, c]])
    sh = np.array([[1.0, t], [t, 1.0]])
    return sh @ rot


def bilinear_sample(image, rows, cols):
    """Sample ``image`` at fractional ``(rows, cols)``; outside reads 0."""
    h, w = image.shape
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = rows - r0
    fc = cols - c0
    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = image

    def at(r, c):
        inside = (r >= -1) & (r <= h) & (c >= -1) & (c <= w)
        rr = np.clip(r, -1, h) + 1
        cc = np.clip(c, -1, w) + 1
        return np.where(inside, padded[rr, cc], 0.0)

    return (
        at(r0, c0) * (1 - fr) * (1 - fc)
        + at(r0, c0 + 1) * (1 - fr) * fc
        + at(r0 + 1, c0) * fr * (1 - fc)
        + at(r0 + 1, c0 + 1) * fr * fc
    )


def affine_transform(image, rotation, shear):
    """Rotate about the centre, then shear; bilinear resampling, zero padding."""
    image = np.asarray(image, dtype=np.float64)
    mat = transform_matrix(rotation, shear)
    if abs(np.linalg.det(mat)) < 1e-9:
        raise InvalidArgument(f"transform with shear {shear} is singular")
    inv = np.linalg.inv(mat)
    h, w = image.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                             indexing="ij")
    qx = cols - cx
    qy = cy - rows
    px = inv[0, 0] * qx + inv[0, 1] * qy
    py = inv[1, 0] * qx + inv[1, 1] * qy
    out = bilinear_sample(image, cy - py, px + cx)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class CardsConfig:
    per_suit: int = 2000
    size: int = 32
    seed: int = 0


@dataclass
class CardsDataset:
    images: np.ndarray  # (n, size, size)
    suits: np.ndarray
    rotations: np.ndarray
    shears: np.ndarray

    def __len__(self):
        return self.images.shape[0]

    @property
    def inputs(self):
        """Flattened row-major pixel matrix, one image per row."""
        return self.images.reshape(len(self), -1)


def generate_cards_dataset(config=CardsConfig()):
    """``per_suit`` transformed images of each suit, suits in blocks of equal size."""
    if config.per_suit < 1:
        raise InvalidArgument("per_suit must be >= 1")
    rng = np.random.default_rng(derive_seed(config.seed, "cards"))
    n = 4 * config.per_suit
    suits = np.repeat(np.arange(4), config.per_suit)
    rotations = rng.uniform(-MAX_ROTATION, MAX_ROTATION, size=n)
    shears = rng.uniform(-MAX_SHEAR, MAX_SHEAR, size=n)
    glyphs = [render_suit_glyph(s, config.size) for s in range(4)]
    images = np.empty((n, config.size, config.size))
    for i in range(n):
        images[i] = affine_transform(glyphs[suits[i]], rotations[i], shears[i])
    return CardsDataset(images, suits, rotations, shears)


def encode_target(suits, kind, rotations=None, shears=None):
    """Target vector for ``kind``: ``"ordinal_suit"``, ``"rotation"``, ``"shear"``,
    or ``"one_vs_rest:<suit>"`` (1.0 for that suit, 0.0 otherwise)."""
    suits = np.asarray(suits)
    if kind == "ordinal_suit":
        return suits.astype(np.float64)
    if kind.startswith("one_vs_rest:"):
        s = suit_index(kind.split(":", 1)[1])
        return (suits == s).astype(np.float64)
    if kind == "rotation":
        return np.asarray(rotations, dtype=np.float64).copy()
    if kind == "shear":
        return np.asarray(shears, dtype=np.float64).copy()
    raise InvalidArgument(f"unknown target kind {kind!r}")
