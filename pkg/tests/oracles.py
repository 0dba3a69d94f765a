"""Independent oracles for cross-checking the library's numerics.

Everything here is deliberately written along a different mathematical
route than the code under test: Bloch-vector optimization instead of
eigenvalue truncation, SVD-based least squares instead of the frame
pseudoinverse, and naive loop constructions instead of vectorized
einsum kernels.
"""

import numpy as np
from scipy.optimize import minimize

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def bloch_state(r: np.ndarray) -> np.ndarray:
    """The qubit state (I + r . sigma) / 2 for a Bloch vector in the ball."""
    rho = np.eye(2, dtype=complex)
    for component, pauli in zip(r, PAULIS):
        rho = rho + component * pauli
    return rho / 2.0


def closest_physical_state_bloch(matrix: np.ndarray) -> np.ndarray:
    """Closest PSD trace-1 matrix to the trace-renormalized 2x2 input,
    found by numerically optimizing over Bloch vectors in the unit ball."""
    target = np.asarray(matrix, dtype=complex)
    target = target / target.trace().real

    def objective(r):
        difference = bloch_state(r) - target
        return float(np.sum(np.abs(difference) ** 2))

    start = np.array([np.trace(target @ pauli).real for pauli in PAULIS])
    norm = np.linalg.norm(start)
    starts = [start if norm <= 1.0 else start / norm, np.zeros(3)]
    constraint = {"type": "ineq", "fun": lambda r: 1.0 - r @ r}
    best = None
    for initial in starts:
        result = minimize(
            objective, initial, method="SLSQP", constraints=[constraint], tol=1e-14,
            options={"maxiter": 500},
        )
        if best is None or result.fun < best.fun:
            best = result
    return bloch_state(best.x)


def dense_ls_estimate(povms, probability_vectors) -> np.ndarray:
    """Minimum-norm least squares state via SVD on the stacked design
    matrix (rows vec(A_mk)†), independent of the frame-operator path."""
    rows = []
    targets = []
    for povm, probabilities in zip(povms, probability_vectors):
        for k in range(povm.outcomes):
            rows.append(povm.element(k).reshape(-1, order="F").conj())
            targets.append(probabilities[k])
    design = np.array(rows)
    solution = np.linalg.lstsq(design, np.array(targets), rcond=None)[0]
    dim = povms[0].dim
    return solution.reshape(dim, dim, order="F")


def naive_frame_matrix(povms) -> np.ndarray:
    """(1/M) sum_mk vec(A_mk) vec(A_mk)† assembled entry by entry."""
    dim = povms[0].dim
    frame = np.zeros((dim * dim, dim * dim), dtype=complex)
    for povm in povms:
        for k in range(povm.outcomes):
            column = povm.element(k).reshape(-1, order="F")
            frame += np.outer(column, column.conj())
    return frame / len(povms)


def dense_ridge_solve(povms, mu: float, partial: np.ndarray) -> np.ndarray:
    """Direct dense solve of ((1/M)(A†A + mu I)) x = vec(partial)."""
    dim = povms[0].dim
    settings = len(povms)
    operator = naive_frame_matrix(povms) + (mu / settings) * np.eye(dim * dim)
    solution = np.linalg.solve(operator, partial.reshape(-1, order="F"))
    return solution.reshape(dim, dim, order="F")


def haar_entry_second_moment_qubit() -> float:
    """E|U_00|^2 for Haar U(2) by direct integration over the standard
    parameterization U_00 = cos(theta), theta-density sin(2 theta)."""
    from scipy.integrate import quad

    value, _ = quad(lambda theta: np.cos(theta) ** 2 * np.sin(2 * theta), 0.0, np.pi / 2)
    return value


def random_density_matrix(dim: int, generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a normalized Wishart matrix."""
    rank = dim if rank is None else rank
    ginibre = generator.standard_normal((dim, rank)) + 1j * generator.standard_normal((dim, rank))
    rho = ginibre @ ginibre.conj().T
    return rho / rho.trace().real


def random_hermitian(dim: int, generator, scale: float = 1.0) -> np.ndarray:
    raw = generator.standard_normal((dim, dim)) + 1j * generator.standard_normal((dim, dim))
    return scale * (raw + raw.conj().T) / 2.0
