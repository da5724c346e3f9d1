"""Scattering channels dressed with photon recoil on the shared motional mode.

A scattering element ``m = sqrt(gamma) |final><initial|`` on one ion acts as

    rho -> gamma * |f><i| R(rho_ii) |i><f| - 1/2 {m^dag m, rho}

where ``R`` is the motional recoil map averaged over the emission pattern. ``R`` is
kept in the secular (interaction-picture) form: only terms that conserve the
difference of bra and ket phonon numbers survive. Two constructions are provided,
an exact angular quadrature over the displacement ``exp(i eta f (a + a^dag))`` and
the Lamb-Dicke series to a given even order.

Rayleigh scattering is one elastic jump per ion and polarization, level-blind on
down, up and aux, so it only heats.
"""

import itertools
import logging
import math
from collections import defaultdict
from collections.abc import Iterable
from functools import lru_cache
from typing import Literal

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import factorial, roots_legendre

from dissq.core.hilbert import LEVELS_PER_ION, HilbertLayout, local_ladder
from dissq.models import Level, Polarization, ProtocolParams, RamanRate, Site

logger = logging.getLogger(__name__)

PatternKind = Literal["pi", "sigma"]

REPUMP_BRANCHING: dict[Level, tuple[float, Polarization]] = {
    Level.UP: (5.0 / 12.0, Polarization.SIGMA_PLUS),
    Level.DOWN: (4.0 / 12.0, Polarization.PI),
    Level.AUX: (3.0 / 12.0, Polarization.SIGMA_MINUS),
}

DEFAULT_REPUMP_AXIAL_K = 1.0 / math.sqrt(2.0)


def pattern_kind(pol: Polarization) -> PatternKind:
    return "pi" if pol == Polarization.PI else "sigma"


# --- Angular model ---


def emission_pattern(
    pol: Polarization | str, theta: np.ndarray | float, phi_az: np.ndarray | float
) -> np.ndarray | float:
    """Normalized dipole emission density per unit solid angle."""
    try:
        pol = Polarization(pol)
    except ValueError as exc:
        raise ValueError(f"unknown polarization tag {pol!r}") from exc
    cos_t, _ = np.broadcast_arrays(np.cos(theta), phi_az)
    if pol == Polarization.PI:
        density = 3.0 / (8.0 * math.pi) * (1.0 - cos_t**2)
    else:
        density = 3.0 / (16.0 * math.pi) * (1.0 + cos_t**2)
    return float(density) if density.ndim == 0 else density


def recoil_factor(
    theta: np.ndarray | float, phi_az: np.ndarray | float, incident_axial_k: float = 1.0
) -> np.ndarray | float:
    """Axial momentum kick of one scattering event in units of the Raman Δk."""
    return incident_axial_k - (np.sin(theta) * np.cos(phi_az) - np.cos(theta))


class RecoilGeometry(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta: float = Field(..., ge=0, lt=1)
    n_theta: int = Field(default=24, ge=4)
    n_phi: int = Field(default=24, ge=4)
    series_order: int = Field(default=12, ge=2)
    method: Literal["quadrature", "series"] = "quadrature"

    @field_validator("series_order")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"series_order must be even, got {v}")
        return v

    def nodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(theta, phi_az, weight): Gauss-Legendre in cos(theta), trapezoid in phi."""
        return _product_nodes(self.n_theta, self.n_phi)

    def pattern_weights(self, pol: Polarization) -> np.ndarray:
        theta, phi_az, w = self.nodes()
        return w * emission_pattern(pol, theta, phi_az)

    def moment(self, pol: Polarization, power: int, incident_axial_k: float = 1.0) -> float:
        """Pattern average of ``f**power``."""
        theta, phi_az, _ = self.nodes()
        f = recoil_factor(theta, phi_az, incident_axial_k)
        return float(np.sum(self.pattern_weights(pol) * f**power))


@lru_cache(maxsize=16)
def _product_nodes(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, wx = roots_legendre(n_theta)
    phi_az = 2.0 * math.pi * np.arange(n_phi) / n_phi
    theta_grid, phi_grid = np.meshgrid(np.arccos(x), phi_az, indexing="ij")
    weights = np.outer(wx, np.full(n_phi, 2.0 * math.pi / n_phi))
    return theta_grid.ravel(), phi_grid.ravel(), weights.ravel()


# --- Motional recoil maps ---


def _secular_mask(n_levels: int) -> np.ndarray:
    k, kp, n, np_ = np.meshgrid(*(np.arange(n_levels),) * 4, indexing="ij")
    mask = (k - n) == (kp - np_)
    return mask.reshape(n_levels * n_levels, n_levels * n_levels)


@lru_cache(maxsize=64)
def _quadrature_superop(
    eta: float, kind: PatternKind, incident_axial_k: float, n_levels: int, n_theta: int, n_phi: int
) -> sp.csr_matrix:
    pol = Polarization.PI if kind == "pi" else Polarization.SIGMA_PLUS
    theta, phi_az, w = _product_nodes(n_theta, n_phi)
    weights = w * emission_pattern(pol, theta, phi_az)
    if np.any(weights < 0):
        raise ValueError("negative quadrature weight in recoil average")
    kicks = recoil_factor(theta, phi_az, incident_axial_k)

    a = local_ladder(n_levels).toarray()
    evals, evecs = np.linalg.eigh(a + a.T)
    total = np.zeros((n_levels * n_levels, n_levels * n_levels), dtype=complex)
    for weight, kick in zip(weights, kicks, strict=True):
        disp = (evecs * np.exp(1j * eta * kick * evals)) @ evecs.conj().T
        total += weight * np.kron(disp, disp.conj())
    total[~_secular_mask(n_levels)] = 0.0
    return sp.csr_matrix(total)


@lru_cache(maxsize=64)
def _series_superop(
    eta: float,
    kind: PatternKind,
    incident_axial_k: float,
    n_levels: int,
    order: int,
    n_theta: int,
    n_phi: int,
) -> sp.csr_matrix:
    pol = Polarization.PI if kind == "pi" else Polarization.SIGMA_PLUS
    geom = RecoilGeometry(eta=eta, n_theta=n_theta, n_phi=n_phi, series_order=order)
    half = order // 2
    padded = n_levels + half
    a = local_ladder(padded)
    ad = a.T.tocsr()
    eye = sp.identity(padded, dtype=complex, format="csr")
    pow_a = [eye]
    pow_ad = [eye]
    for _ in range(half):
        pow_a.append((pow_a[-1] @ a).tocsr())
        pow_ad.append((pow_ad[-1] @ ad).tocsr())

    total = sp.csr_matrix((padded * padded, padded * padded), dtype=complex)
    for m in range(half + 1):
        scale = eta ** (2 * m) * geom.moment(pol, 2 * m, incident_axial_k)
        if scale == 0.0:
            continue
        for n in range(m + 1):
            for p in range(n - m, n + 1):
                coef = (-1.0) ** (m + p) / (
                    factorial(n) * factorial(n - p) * factorial(m - n) * factorial(m - n + p)
                )
                left = pow_a[n] @ pow_ad[n - p]
                right = pow_ad[m - n + p] @ pow_a[m - n]
                total = total + (scale * coef) * sp.kron(left, right.T, format="csr")

    keep = (np.arange(n_levels)[:, None] * padded + np.arange(n_levels)[None, :]).ravel()
    return total[keep][:, keep].tocsr()


def recoil_superop(
    geom: RecoilGeometry, kind: PatternKind, incident_axial_k: float, n_levels: int
) -> sp.csr_matrix:
    """Pattern-averaged map on vec(rho) (row-major) of one motional block."""
    if geom.method == "series":
        return _series_superop(
            geom.eta, kind, incident_axial_k, n_levels, geom.series_order, geom.n_theta, geom.n_phi
        )
    return _quadrature_superop(
        geom.eta, kind, incident_axial_k, n_levels, geom.n_theta, geom.n_phi
    )


# --- Scattering elements and channel sets ---


class ScatterElement(BaseModel):
    """One scattering amplitude ``sqrt(gamma) |final><initial|`` on one ion.

    Elements flagged ``elastic`` (with ``initial == final``) on the same ion, polarization
    and incident direction are summed into one jump operator
    ``sum_l sqrt(gamma_l) |l><l|``, so they heat the motion without touching internal
    coherences. ``recoil=False`` replaces the recoil map by the identity.
    """

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., ge=0, description="Rate in 1/s")
    initial: Level
    final: Level
    ion: Site
    polarization: Polarization
    incident_axial_k: float = 1.0
    elastic: bool = False
    recoil: bool = True

    @field_validator("ion")
    @classmethod
    def _is_ion(cls, v: Site) -> Site:
        if v == Site.MOTION:
            raise ValueError("scattering elements act on an ion, not on the motion")
        return v

    @model_validator(mode="after")
    def _elastic_keeps_level(self) -> "ScatterElement":
        if self.elastic and self.initial != self.final:
            raise ValueError(
                f"elastic element must keep its level, got {self.initial.value}->"
                f"{self.final.value}"
            )
        return self


class _Group:
    __slots__ = ("ion", "initial", "superop", "targets", "amplitudes")

    def __init__(self, ion: Site, initial: Level | None, superop: sp.csr_matrix) -> None:
        self.ion = ion
        self.initial = None if initial is None else initial.index
        self.superop = superop
        self.targets: list[tuple[int, float]] = []
        # elastic groups only: level index -> summed rate
        self.amplitudes: dict[int, float] = {}


class ChannelSet:
    """Immutable collection of scattering elements with their prebuilt recoil maps."""

    def __init__(
        self,
        elements: Iterable[ScatterElement],
        geom: RecoilGeometry,
        layout: HilbertLayout,
    ) -> None:
        self.elements: tuple[ScatterElement, ...] = tuple(e for e in elements if e.gamma > 0)
        self.geom = geom
        self.layout = layout
        self._groups = self._build_groups()
        self._decay = self._build_decay()

    def _superop(self, e: ScatterElement) -> sp.csr_matrix:
        n = self.layout.n_levels
        if not e.recoil:
            return sp.identity(n * n, dtype=complex, format="csr")
        return recoil_superop(self.geom, pattern_kind(e.polarization), e.incident_axial_k, n)

    def _build_groups(self) -> list[_Group]:
        grouped: dict[tuple, _Group] = {}
        for e in self.elements:
            kind = pattern_kind(e.polarization)
            if e.elastic:
                key = (e.ion, "elastic", e.polarization, e.incident_axial_k, e.recoil)
            else:
                key = (e.ion, e.initial, kind, e.incident_axial_k, e.recoil)
            if key not in grouped:
                initial = None if e.elastic else e.initial
                grouped[key] = _Group(e.ion, initial, self._superop(e))
            if e.elastic:
                amplitudes = grouped[key].amplitudes
                amplitudes[e.initial.index] = amplitudes.get(e.initial.index, 0.0) + e.gamma
            else:
                grouped[key].targets.append((e.final.index, e.gamma))
        return list(grouped.values())

    def _build_decay(self) -> np.ndarray:
        out_rate = np.zeros((LEVELS_PER_ION, LEVELS_PER_ION))
        for e in self.elements:
            if e.ion == Site.ION1:
                out_rate[e.initial.index, :] += e.gamma
            else:
                out_rate[:, e.initial.index] += e.gamma
        per_index = np.repeat(out_rate.ravel(), self.layout.n_levels)
        return -0.5 * (per_index[:, None] + per_index[None, :])

    @property
    def total_rate(self) -> float:
        return float(sum(e.gamma for e in self.elements))

    def __len__(self) -> int:
        return len(self.elements)

    def __add__(self, other: "ChannelSet") -> "ChannelSet":
        if other.layout != self.layout or other.geom != self.geom:
            raise ValueError("cannot merge channel sets built for different layouts or geometries")
        return ChannelSet(self.elements + other.elements, self.geom, self.layout)

    def _kick(self, r: np.ndarray, g: _Group, i: int, j: int) -> np.ndarray:
        """Recoil map applied to the ``|i><j|`` block of the scattering ion."""
        n = self.layout.n_levels
        block = r[i, :, :, j, :, :] if g.ion == Site.ION1 else r[:, i, :, :, j, :]
        moved = block.transpose(0, 2, 1, 3).reshape(LEVELS_PER_ION**2, n * n)
        kicked = np.asarray(g.superop @ moved.T).T
        return kicked.reshape(LEVELS_PER_ION, LEVELS_PER_ION, n, n).transpose(0, 2, 1, 3)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Dissipator action on a full density matrix."""
        dim = self.layout.total_dim
        if rho.shape != (dim, dim):
            raise ValueError(f"density matrix shape {rho.shape} does not match dimension {dim}")
        if not self.elements:
            return np.zeros_like(rho)
        n = self.layout.n_levels
        r = rho.reshape(LEVELS_PER_ION, LEVELS_PER_ION, n, LEVELS_PER_ION, LEVELS_PER_ION, n)
        out = np.zeros_like(r)
        for g in self._groups:
            if g.initial is None:
                for (i, gi), (j, gj) in itertools.product(g.amplitudes.items(), repeat=2):
                    kicked = math.sqrt(gi * gj) * self._kick(r, g, i, j)
                    if g.ion == Site.ION1:
                        out[i, :, :, j, :, :] += kicked
                    else:
                        out[:, i, :, :, j, :] += kicked
                continue
            back = self._kick(r, g, g.initial, g.initial)
            for f, gamma in g.targets:
                if g.ion == Site.ION1:
                    out[f, :, :, f, :, :] += gamma * back
                else:
                    out[:, f, :, :, f, :] += gamma * back
        return out.reshape(dim, dim) + self._decay * rho


def empty_channels(geom: RecoilGeometry, layout: HilbertLayout) -> ChannelSet:
    return ChannelSet((), geom, layout)


# --- Channel builders ---

_ION_SITES = (Site.ION1, Site.ION2)


def repump_channels(
    params: ProtocolParams | float,
    geom: RecoilGeometry,
    layout: HilbertLayout,
    incident_axial_k: float = DEFAULT_REPUMP_AXIAL_K,
    recoil: bool = True,
) -> ChannelSet:
    """Engineered aux depletion at total rate 1/t_rep, branching 5:4:3 into up:down:aux.

    ``params`` may be the protocol or the repump time in seconds. With ``recoil=False``
    the repump photons leave the motion untouched.
    """
    t_rep = params.t_rep if isinstance(params, ProtocolParams) else float(params)
    if t_rep <= 0:
        raise ValueError(f"t_rep must be positive, got {t_rep}")
    elements = [
        ScatterElement(
            gamma=fraction / t_rep,
            initial=Level.AUX,
            final=final,
            ion=ion,
            polarization=pol,
            incident_axial_k=incident_axial_k,
            recoil=recoil,
        )
        for ion in _ION_SITES
        for final, (fraction, pol) in REPUMP_BRANCHING.items()
    ]
    return ChannelSet(elements, geom, layout)


def raman_channels(
    rates: Iterable[RamanRate], geom: RecoilGeometry, layout: HilbertLayout
) -> ChannelSet:
    elements = []
    for rate in rates:
        if rate.rate_per_s < 0:
            raise ValueError(
                f"negative Raman rate {rate.rate_per_s} for "
                f"{rate.initial.value}->{rate.final.value}"
            )
        if rate.initial == Level.LEAK:
            raise ValueError("leak is absorbing; no transitions out of it")
        if rate.rate_per_s == 0:
            continue
        for ion in _ION_SITES:
            elements.append(
                ScatterElement(
                    gamma=rate.rate_per_s,
                    initial=rate.initial,
                    final=rate.final,
                    ion=ion,
                    polarization=rate.polarization,
                )
            )
    return ChannelSet(elements, geom, layout)


def rayleigh_channels(
    rate_per_ion: float,
    geom: RecoilGeometry,
    layout: HilbertLayout,
    polarization_mix: dict[Polarization, float] | None = None,
) -> ChannelSet:
    """Elastic scattering from down, up and aux at equal rate.

    Each ion and polarization carries one jump ``sqrt(gamma) (|d><d| + |u><u| + |a><a|)``
    dressed with recoil, so at eta = 0 the channel is the zero map on the qubit.
    """
    if rate_per_ion < 0:
        raise ValueError(f"Rayleigh rate must be non-negative, got {rate_per_ion}")
    mix = polarization_mix or {p: 1.0 / 3.0 for p in Polarization}
    elements = [
        ScatterElement(
            gamma=rate_per_ion * weight,
            initial=level,
            final=level,
            ion=ion,
            polarization=pol,
            elastic=True,
        )
        for ion in _ION_SITES
        for level in (Level.DOWN, Level.UP, Level.AUX)
        for pol, weight in mix.items()
        if weight > 0
    ]
    return ChannelSet(elements, geom, layout)


def channel_rates_by_final(channels: ChannelSet) -> dict[tuple[Site, Level], float]:
    """Summed rate into each (ion, final level); used for bookkeeping reports."""
    totals: dict[tuple[Site, Level], float] = defaultdict(float)
    for e in channels.elements:
        totals[(e.ion, e.final)] += e.gamma
    return dict(totals)
