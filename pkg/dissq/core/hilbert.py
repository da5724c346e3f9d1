"""Tensor-product space of two four-level ions and one truncated motional mode.

Flat ordering is ion1 (slowest) ⊗ ion2 ⊗ motion (fastest):
``index(s1, s2, n) = (4 * s1 + s2) * (n_max + 1) + n`` with levels
down=0, up=1, aux=2, leak=3. Operators are ``scipy.sparse`` CSR matrices,
density matrices are dense ``numpy`` arrays.
"""

import math

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field

from dissq.models import Level, Site

LEVELS_PER_ION = 4
INTERNAL_DIM = LEVELS_PER_ION * LEVELS_PER_ION

LevelLike = Level | int


class HilbertLayout(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_max: int = Field(..., ge=1, description="Highest Fock state kept for the motional mode")

    @property
    def n_levels(self) -> int:
        return self.n_max + 1

    @property
    def total_dim(self) -> int:
        return INTERNAL_DIM * self.n_levels

    def site_dim(self, site: Site) -> int:
        return self.n_levels if site == Site.MOTION else LEVELS_PER_ION

    def index(self, s1: LevelLike, s2: LevelLike, n: int) -> int:
        i1, i2 = _level_index(s1), _level_index(s2)
        if not 0 <= n <= self.n_max:
            raise ValueError(f"Fock index {n} outside [0, {self.n_max}]")
        return (LEVELS_PER_ION * i1 + i2) * self.n_levels + n


def _level_index(level: LevelLike) -> int:
    if isinstance(level, Level):
        return level.index
    if not 0 <= level < LEVELS_PER_ION:
        raise ValueError(f"level index {level} outside [0, {LEVELS_PER_ION})")
    return int(level)


def build_layout(n_max: int) -> HilbertLayout:
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1 (blue sidebands need n=1), got {n_max}")
    return HilbertLayout(n_max=n_max)


# --- Local operators ---


def transition(to: LevelLike, frm: LevelLike) -> sp.csr_matrix:
    """Single-ion operator |to⟩⟨frm|."""
    op = sp.lil_matrix((LEVELS_PER_ION, LEVELS_PER_ION), dtype=complex)
    op[_level_index(to), _level_index(frm)] = 1.0
    return op.tocsr()


def local_ladder(n_levels: int) -> sp.csr_matrix:
    """Annihilation operator on ``n_levels`` Fock states."""
    return sp.diags(np.sqrt(np.arange(1, n_levels, dtype=float)), 1, format="csr", dtype=complex)


def embed(local_op: sp.spmatrix | np.ndarray, site: Site, layout: HilbertLayout) -> sp.csr_matrix:
    op = sp.csr_matrix(local_op, dtype=complex)
    dim = layout.site_dim(site)
    if op.shape != (dim, dim):
        raise ValueError(f"operator shape {op.shape} does not match {site.value} dimension {dim}")
    ion = sp.identity(LEVELS_PER_ION, dtype=complex, format="csr")
    motion = sp.identity(layout.n_levels, dtype=complex, format="csr")
    factors = {
        Site.ION1: (op, ion, motion),
        Site.ION2: (ion, op, motion),
        Site.MOTION: (ion, ion, op),
    }[site]
    return sp.kron(sp.kron(factors[0], factors[1]), factors[2], format="csr")


def ladder(layout: HilbertLayout) -> sp.csr_matrix:
    return embed(local_ladder(layout.n_levels), Site.MOTION, layout)


def number_diagonal(layout: HilbertLayout) -> np.ndarray:
    """Diagonal of a†a in the flat ordering."""
    return np.tile(np.arange(layout.n_levels, dtype=float), INTERNAL_DIM)


# --- States ---


def basis_state(layout: HilbertLayout, s1: LevelLike, s2: LevelLike, n: int = 0) -> np.ndarray:
    psi = np.zeros(layout.total_dim, dtype=complex)
    psi[layout.index(s1, s2, n)] = 1.0
    return psi


def singlet_state(layout: HilbertLayout, n: int = 0) -> np.ndarray:
    """(|↑↓⟩ − |↓↑⟩)/√2 ⊗ |n⟩."""
    return (
        basis_state(layout, Level.UP, Level.DOWN, n) - basis_state(layout, Level.DOWN, Level.UP, n)
    ) / math.sqrt(2.0)


def triplet_state(layout: HilbertLayout, n: int = 0) -> np.ndarray:
    """(|↑↓⟩ + |↓↑⟩)/√2 ⊗ |n⟩."""
    return (
        basis_state(layout, Level.UP, Level.DOWN, n) + basis_state(layout, Level.DOWN, Level.UP, n)
    ) / math.sqrt(2.0)


def projector(psi: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"state is not normalized (|psi| = {norm})")
    return np.outer(psi, psi.conj())


def _check_square(rho: np.ndarray, dim: int) -> None:
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match dimension {dim}")


# --- Expectation values ---


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """Overlap ⟨ψ|ρ|ψ⟩ with a pure target."""
    _check_square(rho, target.shape[0])
    value = np.vdot(target, rho @ target)
    if abs(value.imag) > 1e-10:
        raise ValueError(f"fidelity has imaginary residue {value.imag:.3e}; rho is not Hermitian")
    return float(value.real)


def mean_phonon(rho: np.ndarray, layout: HilbertLayout) -> float:
    _check_square(rho, layout.total_dim)
    return float(np.dot(np.real(np.diag(rho)), number_diagonal(layout)))


def fock_populations(rho: np.ndarray, layout: HilbertLayout) -> np.ndarray:
    """Motional occupation probabilities p(n), n = 0..n_max."""
    _check_square(rho, layout.total_dim)
    return np.real(np.diag(rho)).reshape(INTERNAL_DIM, layout.n_levels).sum(axis=0)


def internal_state(rho: np.ndarray, layout: HilbertLayout) -> np.ndarray:
    """Partial trace over the motion; returns the 16x16 two-ion state."""
    _check_square(rho, layout.total_dim)
    n = layout.n_levels
    return np.einsum("imjm->ij", rho.reshape(INTERNAL_DIM, n, INTERNAL_DIM, n))


def thermal_state(layout: HilbertLayout, weights: np.ndarray, internal: np.ndarray) -> np.ndarray:
    """Product of a 16x16 internal state and a diagonal motional state with ``weights``."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (layout.n_levels,):
        raise ValueError(f"expected {layout.n_levels} motional weights, got {w.shape}")
    return np.kron(internal, np.diag(w / w.sum()))
