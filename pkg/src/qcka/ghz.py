"""Dense statevector check that the XOR post-processing equals a distributed GHZ measurement.

Qubit order is fixed as (a1, b1, a2, b2, ..., a_{n-1}, b_{n-1}); qubit 0 is the
most significant bit of the basis-state index. Register size is capped at
n = 8 (14 qubits).
"""
from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

N_MIN, N_MAX = 2, 8


def alice_qubit(i: int) -> int:
    """Register index of Alice's half of pair i (1-based)."""
    return 2 * (i - 1)


def bob_qubit(i: int) -> int:
    return 2 * (i - 1) + 1


def _check_n(n: int) -> None:
    if not N_MIN <= n <= N_MAX:
        raise ValueError(f"n must lie in [{N_MIN}, {N_MAX}] for dense simulation, got {n}")


def prepare_bell_product(n: int) -> np.ndarray:
    """(|00> + |11>)/sqrt(2) on every (a_i, b_i), tensored in register order."""
    _check_n(n)
    bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    state = np.ones(1, dtype=complex)
    for _ in range(n - 1):
        state = np.kron(state, bell)
    return state


def _num_qubits(state: np.ndarray) -> int:
    q = int(round(np.log2(state.size)))
    if 2**q != state.size:
        raise ValueError(f"state length {state.size} is not a power of two")
    return q


def apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    q = _num_qubits(state)
    if control == target or not (0 <= control < q and 0 <= target < q):
        raise ValueError(f"invalid CNOT ({control} -> {target}) on {q} qubits")
    psi = state.reshape((2,) * q).copy()
    sl = [slice(None)] * q
    sl[control] = 1
    # On the control=1 slice the target axis shifts left by one once the control axis is dropped.
    axis = target if target < control else target - 1
    psi[tuple(sl)] = np.flip(psi[tuple(sl)], axis=axis)
    return psi.reshape(-1)


def circuit_gates(n: int) -> list[tuple[int, int]]:
    """Local CNOTs a1 -> a_i, then non-local a_i -> b_i, for i = 2..n-1."""
    local = [(alice_qubit(1), alice_qubit(i)) for i in range(2, n)]
    nonlocal_ = [(alice_qubit(i), bob_qubit(i)) for i in range(2, n)]
    return local + nonlocal_


def apply_virtual_circuit(state: np.ndarray, n: int, gates: Sequence[tuple[int, int]] | None = None) -> np.ndarray:
    _check_n(n)
    if state.size != 4 ** (n - 1):
        raise ValueError(f"state has {state.size} amplitudes, expected {4 ** (n - 1)} for n={n}")
    for control, target in gates if gates is not None else circuit_gates(n):
        state = apply_cnot(state, control, target)
    return state


def conference_subsystem(n: int) -> list[int]:
    return [alice_qubit(1)] + [bob_qubit(i) for i in range(1, n)]


def ghz_state(k: int) -> np.ndarray:
    psi = np.zeros(2**k, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return psi


def reduced_density_matrix(state: np.ndarray, subsystem: Sequence[int]) -> np.ndarray:
    q = _num_qubits(state)
    keep = list(subsystem)
    if len(set(keep)) != len(keep) or any(not 0 <= s < q for s in keep):
        raise ValueError(f"invalid subsystem {subsystem} for {q} qubits")
    rest = [i for i in range(q) if i not in keep]
    psi = np.transpose(state.reshape((2,) * q), keep + rest).reshape(2 ** len(keep), -1)
    return psi @ psi.conj().T


def ghz_fidelity(state: np.ndarray, subsystem: Sequence[int]) -> float:
    """<GHZ| rho_S |GHZ> for the reduced state on ``subsystem`` (in the given order)."""
    if len(subsystem) < 2:
        raise ValueError("GHZ fidelity needs at least two qubits")
    rho = reduced_density_matrix(state, subsystem)
    ghz = ghz_state(len(subsystem))
    return float(np.real(ghz.conj() @ rho @ ghz))


def plus_fidelity(state: np.ndarray, qubit: int) -> float:
    rho = reduced_density_matrix(state, [qubit])
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    return float(np.real(plus.conj() @ rho @ plus))


def verify(n: int) -> dict[str, float]:
    """Run the virtual circuit for n parties and collect the figures of merit."""
    state = apply_virtual_circuit(prepare_bell_product(n), n)
    ancillas = [plus_fidelity(state, alice_qubit(i)) for i in range(2, n)]
    return {
        "n": n,
        "norm": float(np.linalg.norm(state)),
        "ghz_fidelity": ghz_fidelity(state, conference_subsystem(n)),
        "min_ancilla_plus_fidelity": min(ancillas) if ancillas else 1.0,
    }


def z_outcome_distribution(state: np.ndarray) -> dict[tuple[int, ...], float]:
    """Computational-basis outcome probabilities, keyed by bit tuples in register order."""
    q = _num_qubits(state)
    probs = np.abs(state) ** 2
    return {
        bits: float(probs[idx])
        for idx, bits in enumerate(itertools.product((0, 1), repeat=q))
        if probs[idx] > 1e-15
    }
