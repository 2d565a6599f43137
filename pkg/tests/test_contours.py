import math

import numpy as np
import pytest

from hierseg.contours import multiscale_oriented_contours, oriented_responses


def test_constant_image_gives_zero():
    for strength, stack in multiscale_oriented_contours(np.full((20, 20), 0.6)):
        assert not strength.any() and not stack.any()


def test_vertical_step_peaks_in_vertical_tangent_channel():
    img = np.zeros((32, 32))
    img[:, 16:] = 1.0
    for strength, stack in multiscale_oriented_contours(img, [1.0, 2.0]):
        edge = stack[:, 4:-4, 15:17]
        assert np.all(np.argmax(edge, axis=0) == 4)
        # the response is centred on the step: equal on both sides, lower beyond
        assert strength[16, 15] == pytest.approx(strength[16, 16])
        assert strength[16, 15] > strength[16, 14]


def test_strength_is_channel_max_and_in_range():
    rng = np.random.default_rng(0)
    img = rng.random((24, 30))
    for strength, stack in multiscale_oriented_contours(img):
        assert stack.shape == (8, 24, 30)
        assert np.array_equal(strength, stack.max(axis=0))
        assert stack.min() >= 0 and stack.max() == 1.0
        assert np.all(strength[None] >= stack)


def rotated_edge(size, tangent):
    y, x = np.mgrid[0:size, 0:size].astype(float)
    normal = tangent + math.pi / 2
    d = (x - size / 2 + 0.25) * math.cos(normal) + (size / 2 - y + 0.25) * math.sin(normal)
    return (d > 0).astype(float), np.abs(d)


@pytest.mark.parametrize("k", range(8))
def test_rotation_by_one_bin_shifts_argmax(k):
    bins = []
    for step in (k, (k + 1) % 8):
        img, d = rotated_edge(64, step * math.pi / 8)
        stack = oriented_responses(img, 2.0)
        near = (d < 1.0)
        near[:12] = near[-12:] = False
        near[:, :12] = near[:, -12:] = False
        votes = np.bincount(np.argmax(stack[:, near], axis=0), minlength=8)
        bins.append(int(np.argmax(votes)))
    assert bins[0] == k
    assert bins[1] == (bins[0] + 1) % 8


@pytest.mark.parametrize("sigmas", [[], [2.0, 1.0], [0.0, 1.0], [-1.0]])
def test_bad_sigmas(sigmas):
    with pytest.raises(ValueError):
        multiscale_oriented_contours(np.zeros((8, 8)), sigmas)


def test_bad_image():
    with pytest.raises(ValueError):
        multiscale_oriented_contours(np.zeros((0, 4)))
