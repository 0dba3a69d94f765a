"""Random measurement-setting ensembles.

Haar-random unitaries (global and local tensor-product), mixtures of the
two, and deterministic fixed lists, all driven by counter-based RNG
streams so that every (seed, trial, measurement) triple reproduces the
same unitary regardless of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .core import RankOnePovm

# Reserved stream index for scenario-level draws (random observables,
# theory Monte Carlo); trial indices must stay below it.
AUX_STREAM_INDEX = 2**31 - 1


class RngStream:
    """A reproducible random stream keyed by (seed, trial, measurement).

    The key pair is folded into a ``numpy.random.SeedSequence`` spawn
    key, so identical keys give bitwise-identical draws on any thread
    schedule. The underlying generator is created lazily and consumed
    sequentially by whoever holds the stream.
    """

    def __init__(self, seed: int, stream_id: tuple[int, int] = (0, 0)):
        self.seed = int(seed)
        self.stream_id = (int(stream_id[0]), int(stream_id[1]))
        self._generator: np.random.Generator | None = None

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream_id)
            self._generator = np.random.default_rng(sequence)
        return self._generator

    def substream(self, trial: int, measurement: int) -> "RngStream":
        """Fresh stream for one measurement of one trial under this seed."""
        return RngStream(self.seed, (trial, measurement))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    return rng


@dataclass(frozen=True)
class GlobalHaar:
    """Haar measure on the full unitary group U(D)."""

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"ensemble dimension must be >= 2, got {self.dim}")


@dataclass(frozen=True)
class LocalHaarTensor:
    """Tensor products of independent single-qubit Haar unitaries."""

    qubits: int

    def __post_init__(self):
        if self.qubits < 1:
            raise ValueError(f"qubit count must be >= 1, got {self.qubits}")

    @property
    def dim(self) -> int:
        return 2**self.qubits


@dataclass(frozen=True)
class HaarMixture:
    """Mixture drawing local settings with probability eta, global otherwise.

    The Bernoulli coin is drawn once per measurement setting. Degenerate
    mixtures (eta exactly 0 or 1) skip the coin entirely so that their
    draws are bitwise identical to the corresponding pure ensemble.
    """

    qubits: int
    eta: float

    def __post_init__(self):
        if self.qubits < 1:
            raise ValueError(f"qubit count must be >= 1, got {self.qubits}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"mixture weight eta must lie in [0, 1], got {self.eta}")

    @property
    def dim(self) -> int:
        return 2**self.qubits


@dataclass(frozen=True, eq=False)
class FixedUnitaries:
    """A deterministic list of settings, consumed in measurement order."""

    unitaries: tuple

    def __post_init__(self):
        if len(self.unitaries) == 0:
            raise ValueError("fixed ensemble needs at least one unitary")
        frozen = []
        for u in self.unitaries:
            arr = np.array(u, dtype=complex)
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "unitaries", tuple(frozen))

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]


EnsembleSpec = Union[GlobalHaar, LocalHaarTensor, HaarMixture, FixedUnitaries]


def ensemble_dim(spec: EnsembleSpec) -> int:
    return spec.dim


def sample_global_haar_batch(dim: int, count: int, rng: RngLike) -> np.ndarray:
    """Draw ``count`` Haar-random D x D unitaries as a (count, D, D) array.

    Uses the exact Ginibre + QR construction: fill a matrix with i.i.d.
    standard complex normals, QR-factorize, and absorb the phases of
    R's diagonal into Q so the distribution is exactly Haar rather than
    merely uniform over QR outputs.
    """
    if dim < 2:
        raise ValueError(f"unitary dimension must be >= 2, got {dim}")
    generator = as_generator(rng)
    real = generator.standard_normal((count, dim, dim))
    imag = generator.standard_normal((count, dim, dim))
    ginibre = (real + 1j * imag) / np.sqrt(2.0)
    q, r = np.linalg.qr(ginibre)
    diag = np.einsum("bii->bi", r)
    phases = diag / np.abs(diag)
    return q * phases[:, None, :]


def sample_global_haar(dim: int, rng: RngLike) -> np.ndarray:
    """One Haar-random D x D unitary."""
    return sample_global_haar_batch(dim, 1, rng)[0]


def sample_local_haar_tensor(qubits: int, rng: RngLike) -> np.ndarray:
    """Kronecker product of ``qubits`` independent 2x2 Haar unitaries."""
    if qubits < 1:
        raise ValueError(f"qubit count must be >= 1, got {qubits}")
    generator = as_generator(rng)
    unitary = sample_global_haar(2, generator)
    for _ in range(qubits - 1):
        unitary = np.kron(unitary, sample_global_haar(2, generator))
    return unitary


def sample_setting(spec: EnsembleSpec, rng: RngStream) -> tuple[np.ndarray, str]:
    """Draw one measurement unitary and report its provenance.

    Provenance is "global", "local", or "fixed"; mixtures resolve their
    per-setting Bernoulli coin here. Fixed ensembles are indexed by the
    stream's measurement index, so settings come out in listed order.
    """
    if isinstance(spec, GlobalHaar):
        return sample_global_haar(spec.dim, rng), "global"
    if isinstance(spec, LocalHaarTensor):
        return sample_local_haar_tensor(spec.qubits, rng), "local"
    if isinstance(spec, HaarMixture):
        if spec.eta <= 0.0:
            return sample_global_haar(spec.dim, rng), "global"
        if spec.eta >= 1.0:
            return sample_local_haar_tensor(spec.qubits, rng), "local"
        generator = as_generator(rng)
        if generator.random() < spec.eta:
            return sample_local_haar_tensor(spec.qubits, generator), "local"
        return sample_global_haar(spec.dim, generator), "global"
    if isinstance(spec, FixedUnitaries):
        if not isinstance(rng, RngStream):
            raise TypeError("fixed ensembles need an RngStream to know the setting index")
        index = rng.stream_id[1]
        if index >= len(spec.unitaries):
            raise ValueError(
                f"fixed-ensemble-exhausted: setting {index} requested, "
                f"only {len(spec.unitaries)} listed"
            )
        return spec.unitaries[index], "fixed"
    raise TypeError(f"unknown ensemble spec {type(spec).__name__}")


def sample_unitary(spec: EnsembleSpec, rng: RngStream) -> np.ndarray:
    """Draw one measurement unitary from the ensemble."""
    return sample_setting(spec, rng)[0]


def povm_from_unitary(unitary: np.ndarray) -> RankOnePovm:
    """Wrap a unitary as the rank-1 orthonormal POVM {u_k u_k†}."""
    return RankOnePovm(unitary)


def sample_sphere_vector(dim: int, rng: RngLike) -> np.ndarray:
    """Uniform random unit vector on the complex D-sphere."""
    generator = as_generator(rng)
    vector = generator.standard_normal(dim) + 1j * generator.standard_normal(dim)
    return vector / np.linalg.norm(vector)


def save_unitaries(unitaries, path) -> None:
    """Write unitaries as text blocks: a count/dim header line, then one
    row per line as "re im" pairs, row-major within each block."""
    unitaries = [np.asarray(u, dtype=complex) for u in unitaries]
    dim = unitaries[0].shape[0]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(unitaries)} {dim}\n")
        for unitary in unitaries:
            for row in unitary:
                handle.write(
                    " ".join(f"{value.real:.17g} {value.imag:.17g}" for value in row) + "\n"
                )


def load_unitaries(path) -> list[np.ndarray]:
    """Read unitaries written by :func:`save_unitaries`."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    count, dim = (int(token) for token in lines[0].split())
    unitaries = []
    cursor = 1
    for _ in range(count):
        rows = []
        for _ in range(dim):
            tokens = [float(token) for token in lines[cursor].split()]
            if len(tokens) != 2 * dim:
                raise ValueError(f"malformed unitary row at line {cursor + 1} of {path}")
            rows.append([complex(tokens[2 * j], tokens[2 * j + 1]) for j in range(dim)])
            cursor += 1
        unitaries.append(np.array(rows, dtype=complex))
    return unitaries


def load_fixed_ensemble(path) -> FixedUnitaries:
    """Fixed ensemble from a unitary block file (see :func:`save_unitaries`)."""
    return FixedUnitaries(tuple(load_unitaries(path)))
