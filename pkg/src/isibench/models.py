"""Benchmark Hamiltonians: commuting spin-bath models and random contrast models.

The commuting family couples a single spin to a bath through operators that
are all diagonal in one common bath basis and commute with the bath
self-Hamiltonian.  Its eigenvectors factorize into (spin eigenvector of a
2x2 block) (x) (bath basis vector), which makes the eigensystem available in
closed form and every eigenstate reduction pure.  That structure is exactly
what breaks initial-state independence of the spin, so this family is the
positive control of the test bench; Gaussian random Hamiltonians are the
negative control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hilbert import PAULI, SIGMA_Z, SpaceLayout
from .spectral import CompositeHamiltonian, SpectralData, _min_spacing, assemble, fix_phases
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True)
class CommutingModelSpec:
    """Parameters of the commuting spin-bath family.

    ``couplings`` holds one row (v_x, v_y, v_z) per bath level: the
    simultaneous eigenvalues of the three coupling operators on that level.
    ``bath_energies`` holds the bath self-energies on the same levels.  At
    least one transverse column (x or y) must be nontrivial, otherwise the
    spin energy would be conserved and nothing relaxes.
    """

    level_splitting: float
    couplings: np.ndarray
    bath_energies: np.ndarray

    def __post_init__(self) -> None:
        coup = np.array(self.couplings, dtype=float, copy=True)
        energies = np.array(self.bath_energies, dtype=float, copy=True)
        if coup.ndim != 2 or coup.shape[1] != 3 or coup.shape[0] < 1:
            raise ValidationError(f"couplings must be (dim_bath, 3), got shape {coup.shape}")
        if energies.shape != (coup.shape[0],):
            raise ValidationError(
                f"bath_energies shape {energies.shape} does not match {coup.shape[0]} levels"
            )
        if not (np.isfinite(coup).all() and np.isfinite(energies).all()
                and np.isfinite(self.level_splitting)):
            raise ValidationError("model parameters must be finite")
        if np.abs(coup[:, :2]).max() == 0.0:
            raise ValidationError("at least one transverse coupling (x or y column) "
                                  "must be nonzero")
        coup.setflags(write=False)
        energies.setflags(write=False)
        object.__setattr__(self, "couplings", coup)
        object.__setattr__(self, "bath_energies", energies)

    @property
    def dim_bath(self) -> int:
        return self.bath_energies.size

    @property
    def layout(self) -> SpaceLayout:
        return SpaceLayout(2, self.dim_bath)


def build_commuting_model(spec: CommutingModelSpec,
                          tolerances: Tolerances = DEFAULT) -> CompositeHamiltonian:
    """Assemble the dense Hamiltonian of a commuting spin-bath spec.

    The coupling operators are realized diagonal in the computational bath
    basis (the common eigenbasis), so their mutual commutators and the
    commutator with the bath part vanish identically.
    """
    layout = spec.layout
    hs = 0.5 * spec.level_splitting * SIGMA_Z
    hb = np.diag(spec.bath_energies).astype(complex)
    hsb = np.zeros((layout.dim_total, layout.dim_total), dtype=complex)
    for axis in range(3):
        hsb += 0.5 * np.kron(PAULI[axis], np.diag(spec.couplings[:, axis]))
    return assemble(hs, hb, hsb, layout, tolerances)


def analytic_eigensystem(spec: CommutingModelSpec) -> SpectralData:
    """Closed-form eigensystem of the commuting model, without touching the dense H.

    Per bath level l the spin block is E_l + (1/2)[(w + v_lz) sigma_z
    + v_lx sigma_x + v_ly sigma_y]; its eigenvectors tensored with the l-th
    bath basis vector are composite eigenvectors, with energies
    E_l -/+ r_l/2 where r_l = sqrt((w + v_lz)^2 + v_lx^2 + v_ly^2).  Output
    is sorted ascending and phase-fixed exactly like the dense path.
    """
    db = spec.dim_bath
    d = 2 * db
    w = spec.level_splitting
    vx, vy, vz = spec.couplings.T

    radius = np.sqrt((w + vz) ** 2 + vx**2 + vy**2)
    energies = np.empty(d)
    energies[0::2] = spec.bath_energies - 0.5 * radius
    energies[1::2] = spec.bath_energies + 0.5 * radius

    blocks = np.empty((db, 2, 2), dtype=complex)
    blocks[:, 0, 0] = w + vz
    blocks[:, 1, 1] = -(w + vz)
    blocks[:, 0, 1] = vx - 1j * vy
    blocks[:, 1, 0] = vx + 1j * vy
    _, spin_vecs = np.linalg.eigh(blocks)  # ascending, so column 0 is the lower branch

    vectors = np.zeros((d, d), dtype=complex)
    levels = np.arange(db)
    for branch in (0, 1):
        cols = 2 * levels + branch
        vectors[levels, cols] = spin_vecs[:, 0, branch]
        vectors[db + levels, cols] = spin_vecs[:, 1, branch]

    order = np.argsort(energies, kind="stable")
    return SpectralData(
        eigenvalues=energies[order],
        eigenvectors=fix_phases(vectors[:, order]),
        min_level_spacing=_min_spacing(energies[order]),
    )


def bit_signs(n_spins: int) -> np.ndarray:
    """(2^n, n) matrix of +/-1: s[l, k] = 1 - 2*bit_k(l), highest bit first.

    Level l = 0 is all spins up (+1 everywhere).
    """
    if n_spins < 1:
        raise ValidationError(f"need at least one bath spin, got {n_spins}")
    labels = np.arange(2**n_spins)
    shifts = n_spins - 1 - np.arange(n_spins)
    return 1 - 2 * ((labels[:, None] >> shifts[None, :]) & 1)


def build_cucchietti_bath(n_spins: int, couplings, bath_fields,
                          level_splitting: float) -> CommutingModelSpec:
    """Bath of independent spins coupled to the central spin along one axis.

    The coupling operator is sum_k g_k sigma_z^(k) acting as the x-coupling,
    and the bath Hamiltonian is sum_k eps_k sigma_z^(k); both are diagonal in
    the product sigma_z basis, so per level l: v_lx = sum_k g_k s_k(l) and
    E_l = sum_k eps_k s_k(l) with s_k(l) the spin signs of the bit pattern l.
    """
    g = np.asarray(couplings, dtype=float)
    eps = np.asarray(bath_fields, dtype=float)
    if g.shape != (n_spins,) or eps.shape != (n_spins,):
        raise ValidationError(
            f"need {n_spins} couplings and fields, got shapes {g.shape}, {eps.shape}"
        )
    signs = bit_signs(n_spins)
    vx = signs @ g
    coup = np.zeros((2**n_spins, 3))
    coup[:, 0] = vx
    return CommutingModelSpec(level_splitting=level_splitting, couplings=coup,
                              bath_energies=signs @ eps)


def sample_commuting_spec(dim_bath: int, level_splitting: float, coupling_scale: float,
                          energy_scale: float, rng: np.random.Generator) -> CommutingModelSpec:
    """Random commuting spec: couplings and bath energies i.i.d. uniform.

    Each coupling component is uniform on [-coupling_scale, +coupling_scale]
    and each bath energy uniform on [-energy_scale, +energy_scale]; with
    continuous draws the spectrum and gap structure are nondegenerate almost
    surely.
    """
    if dim_bath < 1:
        raise ValidationError(f"dim_bath must be positive, got {dim_bath}")
    if coupling_scale <= 0:
        raise ValidationError("coupling_scale must be positive (transverse coupling "
                              "is required)")
    couplings = rng.uniform(-coupling_scale, coupling_scale, size=(dim_bath, 3))
    energies = rng.uniform(-energy_scale, energy_scale, size=dim_bath)
    return CommutingModelSpec(level_splitting=level_splitting, couplings=couplings,
                              bath_energies=energies)


def sample_cucchietti_spec(n_spins: int, level_splitting: float, coupling_scale: float,
                           field_scale: float, rng: np.random.Generator) -> CommutingModelSpec:
    """Random spin-bath draw: g_k and eps_k i.i.d. uniform on symmetric intervals."""
    g = rng.uniform(-coupling_scale, coupling_scale, size=n_spins)
    eps = rng.uniform(-field_scale, field_scale, size=n_spins)
    return build_cucchietti_bath(n_spins, g, eps, level_splitting)


def gaussian_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with entry variance 1/dim (spectral radius about 2)."""
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (raw + raw.conj().T) / (2.0 * np.sqrt(dim))


def build_random_model(dim_system: int, dim_bath: int, interaction_strength: float,
                       rng: np.random.Generator,
                       tolerances: Tolerances = DEFAULT) -> CompositeHamiltonian:
    """Generic contrast model: independent Gaussian Hermitian parts.

    Every part has entry variance 1/(dim_system*dim_bath), so the interaction
    keeps an O(1) spectral norm across sizes while the lifted system and bath
    terms stay subdominant; the interaction is additionally scaled by
    ``interaction_strength`` (0 gives an uncoupled, product-eigenstate model).
    Draw order: system, bath, interaction.
    """
    layout = SpaceLayout(dim_system, dim_bath)
    dim_total = layout.dim_total
    hs = gaussian_hermitian(dim_system, rng) * np.sqrt(dim_system / dim_total)
    hb = gaussian_hermitian(dim_bath, rng) * np.sqrt(dim_bath / dim_total)
    hsb = interaction_strength * gaussian_hermitian(dim_total, rng)
    return assemble(hs, hb, hsb, layout, tolerances)
