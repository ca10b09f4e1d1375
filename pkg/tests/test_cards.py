import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latent_forge.cards import (
    MAX_ROTATION,
    MAX_SHEAR,
    SUITS,
    CardsConfig,
    affine_transform,
    bilinear_sample,
    encode_target,
    generate_cards_dataset,
    render_suit_glyph,
    suit_index,
    transform_matrix,
)
from latent_forge.errors import InvalidArgument

M = 3  # interior margin for round-trip comparisons


def undo(image, rotation, shear):
    """Pull back through the forward matrix: recovered(q) = image(A q)."""
    a = transform_matrix(rotation, shear)
    h, w = image.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    rows, cols = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    qx, qy = cols - cx, cy - rows
    px = a[0, 0] * qx + a[0, 1] * qy
    py = a[1, 0] * qx + a[1, 1] * qy
    return bilinear_sample(image, cy - py, px + cx)


def interior(a):
    return a[M:-M, M:-M]


@pytest.mark.parametrize("suit", SUITS)
def test_glyph_range_and_mass(suit):
    g = render_suit_glyph(suit)
    assert g.shape == (32, 32)
    assert g.min() >= 0 and g.max() <= 1
    assert g.mean() > 0.05


def test_glyph_size_limit():
    with pytest.raises(InvalidArgument):
        render_suit_glyph("hearts", 8)


def test_suit_lookup():
    assert suit_index("Hearts") == 2 and suit_index(3) == 3
    for bad in ("joker", 4, 1.5):
        with pytest.raises(InvalidArgument):
            suit_index(bad)


def test_heart_mirror_symmetry():
    g = render_suit_glyph("hearts")
    assert np.mean(np.abs(g - g[:, ::-1])) < 0.02


def test_diamond_quarter_turn_symmetry():
    g = render_suit_glyph("diamonds")
    assert np.mean(np.abs(g - np.rot90(g))) < 0.02


def test_glyphs_distinct():
    gs = [render_suit_glyph(s) for s in SUITS]
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.mean(np.abs(gs[i] - gs[j])) > 0.02


def test_identity_transform_bitwise():
    g = render_suit_glyph("spades")
    assert affine_transform(g, 0.0, 0.0).tobytes() == g.tobytes()


def test_transform_matrix_composition():
    t = np.tan(0.2)
    c, s = np.cos(0.7), np.sin(0.7)
    expected = np.array([[1, t], [t, 1]]) @ np.array([[c, -s], [s, c]])
    np.testing.assert_allclose(transform_matrix(0.7, 0.2), expected, atol=1e-15)


def test_rotation_roundtrip():
    g = render_suit_glyph("clubs")
    back = affine_transform(affine_transform(g, 0.6, 0.0), -0.6, 0.0)
    assert np.mean(np.abs(interior(back) - interior(g))) < 0.05


def test_diamond_half_turn():
    g = render_suit_glyph("diamonds")
    assert np.mean(np.abs(affine_transform(g, np.pi, 0.0) - g)) < 0.03


def test_quarter_turn_matches_rot90():
    g = render_suit_glyph("hearts")
    # positive angle turns counter-clockwise in the y-up frame
    np.testing.assert_allclose(affine_transform(g, np.pi / 2, 0.0), np.rot90(g), atol=1e-9)


def test_bilinear_midpoint_and_outside():
    img = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert bilinear_sample(img, np.array([0.5]), np.array([0.5]))[0] == pytest.approx(1.5)
    assert bilinear_sample(img, np.array([-5.0]), np.array([0.0]))[0] == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.floats(-MAX_ROTATION, MAX_ROTATION), st.floats(-MAX_SHEAR, MAX_SHEAR))
def test_transform_range_and_fidelity(suit, rot, shear):
    g = render_suit_glyph(suit)
    out = affine_transform(g, rot, shear)
    assert out.min() >= 0 and out.max() <= 1
    assert np.mean(np.abs(interior(undo(out, rot, shear)) - interior(g))) < 0.05


def test_small_dataset_shapes_and_ranges():
    d = generate_cards_dataset(CardsConfig(per_suit=7, size=16, seed=2))
    assert len(d) == 28 and d.inputs.shape == (28, 256)
    assert np.array_equal(np.bincount(d.suits), [7, 7, 7, 7])
    assert np.all(np.abs(d.rotations) <= 2.0944) and np.all(np.abs(d.shears) <= 0.3491)
    assert d.images.min() >= 0 and d.images.max() <= 1


def test_dataset_deterministic():
    a = generate_cards_dataset(CardsConfig(per_suit=3, size=16, seed=5))
    b = generate_cards_dataset(CardsConfig(per_suit=3, size=16, seed=5))
    c = generate_cards_dataset(CardsConfig(per_suit=3, size=16, seed=6))
    assert a.images.tobytes() == b.images.tobytes()
    assert a.rotations.tobytes() == b.rotations.tobytes()
    assert a.rotations.tobytes() != c.rotations.tobytes()


def test_dataset_records_applied_transform():
    d = generate_cards_dataset(CardsConfig(per_suit=2, size=32, seed=0))
    for i in range(len(d)):
        g = render_suit_glyph(int(d.suits[i]))
        rec = undo(d.images[i], d.rotations[i], d.shears[i])
        assert np.mean(np.abs(interior(rec) - interior(g))) < 0.05


def test_dataset_rejects_empty():
    with pytest.raises(InvalidArgument):
        generate_cards_dataset(CardsConfig(per_suit=0))


def test_encodings():
    suits = np.repeat(np.arange(4), 2000)
    hearts = encode_target(suits, "one_vs_rest:hearts")
    assert hearts.sum() == 2000
    assert set(encode_target(suits, "ordinal_suit")) <= {0.0, 1.0, 2.0, 3.0}
    rot = np.linspace(-1, 1, 8000)
    assert np.array_equal(encode_target(suits, "rotation", rot), rot)
    with pytest.raises(InvalidArgument):
        encode_target(suits, "colour")
