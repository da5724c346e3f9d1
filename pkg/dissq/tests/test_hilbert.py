import math

import numpy as np
import pytest

from dissq.core.hilbert import (
    HilbertLayout,
    basis_state,
    build_layout,
    embed,
    fidelity,
    internal_state,
    ladder,
    local_ladder,
    mean_phonon,
    projector,
    singlet_state,
    thermal_state,
    transition,
    triplet_state,
)
from dissq.models import Level, Site

# --- Fixtures for testing ---


@pytest.fixture
def layout() -> HilbertLayout:
    """Provides a small layout with three motional states."""
    return build_layout(2)


# --- Test cases for build_layout ---


@pytest.mark.parametrize("n_max, dim", [(16, 272), (1, 32), (8, 144)])
def test_total_dimension(n_max: int, dim: int) -> None:
    assert build_layout(n_max).total_dim == dim


def test_zero_fock_cutoff_rejected() -> None:
    with pytest.raises(ValueError, match="blue sidebands need n=1"):
        build_layout(0)


def test_index_ordering_motion_fastest() -> None:
    layout = build_layout(16)
    assert layout.index(Level.DOWN, Level.DOWN, 0) == 0
    assert layout.index(Level.DOWN, Level.DOWN, 1) == 1
    assert layout.index(Level.DOWN, Level.UP, 0) == 17
    assert layout.index(Level.UP, Level.DOWN, 0) == 4 * 17


def test_indices_are_unique(layout: HilbertLayout) -> None:
    flat = {
        layout.index(a, b, n)
        for a in range(4)
        for b in range(4)
        for n in range(layout.n_levels)
    }
    assert flat == set(range(layout.total_dim))


def test_index_rejects_out_of_range_fock(layout: HilbertLayout) -> None:
    with pytest.raises(ValueError, match="Fock index"):
        layout.index(Level.DOWN, Level.DOWN, 3)


# --- Test cases for embed ---


def test_identity_embeds_to_identity(layout: HilbertLayout) -> None:
    full = embed(np.eye(4), Site.ION1, layout)
    assert np.allclose(full.toarray(), np.eye(layout.total_dim))


def test_embed_is_a_homomorphism(layout: HilbertLayout) -> None:
    raise_op = embed(transition(Level.UP, Level.DOWN), Site.ION1, layout)
    lower_op = embed(transition(Level.DOWN, Level.UP), Site.ION1, layout)
    up_proj = embed(transition(Level.UP, Level.UP), Site.ION1, layout)
    assert np.allclose((raise_op @ lower_op).toarray(), up_proj.toarray())


def test_embed_dimension_mismatch(layout: HilbertLayout) -> None:
    with pytest.raises(ValueError, match="does not match motion dimension"):
        embed(np.eye(4), Site.MOTION, layout)


def test_commutator_is_identity_below_top_rung(layout: HilbertLayout) -> None:
    a = ladder(layout).toarray()
    comm = a @ a.conj().T - a.conj().T @ a
    below_top = np.tile(np.arange(layout.n_levels) < layout.n_max, 16)
    assert np.allclose(np.diag(comm)[below_top], 1.0)
    assert np.allclose(comm - np.diag(np.diag(comm)), 0.0)


def test_distinct_sites_commute(layout: HilbertLayout) -> None:
    rng = np.random.default_rng(7)
    a_local = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b_local = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    a = embed(a_local, Site.ION1, layout).toarray()
    b = embed(b_local, Site.MOTION, layout).toarray()
    assert np.allclose(a @ b, b @ a)


# --- Test cases for ladder ---


def test_ladder_action() -> None:
    a = local_ladder(5).toarray()
    zero = np.eye(5)[0]
    one = np.eye(5)[1]
    assert np.allclose(a @ zero, 0.0)
    assert np.allclose(a @ one, zero)
    assert np.allclose(np.diag(a.T @ a), np.arange(5))


# --- Test cases for fidelity and mean_phonon ---


def test_fidelity_of_target_and_orthogonal_state(layout: HilbertLayout) -> None:
    s = singlet_state(layout)
    t = triplet_state(layout)
    assert fidelity(projector(s), s) == pytest.approx(1.0)
    assert fidelity(projector(t), s) == pytest.approx(0.0, abs=1e-15)


def test_fidelity_of_maximally_mixed_state() -> None:
    layout = build_layout(1)
    rho = np.eye(layout.total_dim) / layout.total_dim
    assert fidelity(rho, singlet_state(layout)) == pytest.approx(1.0 / 32.0)


def test_fidelity_dimension_mismatch(layout: HilbertLayout) -> None:
    with pytest.raises(ValueError, match="does not match dimension"):
        fidelity(np.eye(4), singlet_state(layout))


def test_mean_phonon_of_number_states() -> None:
    layout = build_layout(5)
    assert mean_phonon(projector(singlet_state(layout)), layout) == 0.0
    assert mean_phonon(projector(basis_state(layout, Level.DOWN, Level.DOWN, 3)), layout) == 3.0


def test_mean_phonon_of_truncated_thermal_state() -> None:
    layout = build_layout(16)
    weights = np.exp(-np.arange(17, dtype=float))
    internal = np.zeros((16, 16))
    internal[0, 0] = 1.0
    rho = thermal_state(layout, weights, internal)

    n = np.arange(17)
    expected = float(np.sum(n * weights) / np.sum(weights))
    assert mean_phonon(rho, layout) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.0 / (math.e - 1.0), rel=1e-5)


def test_internal_state_traces_out_motion(layout: HilbertLayout) -> None:
    rho = projector(singlet_state(layout, 1))
    internal = internal_state(rho, layout)
    assert internal.shape == (16, 16)
    assert np.trace(internal) == pytest.approx(1.0)
