"""Pauli twirls of amplitude damping and dephasing."""
from __future__ import annotations

import numpy as np

I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.diag([1.0, -1.0]).astype(complex)
PAULIS = {"I": I2, "X": PX, "Y": PY, "Z": PZ}


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    """Decay |1> -> |0> with probability ``gamma``."""
    return [np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
            np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)]


def dephasing_kraus(lam: float) -> list[np.ndarray]:
    """rho -> (1+lam)/2 rho + (1-lam)/2 Z rho Z."""
    return [np.sqrt((1 + lam) / 2) * I2, np.sqrt((1 - lam) / 2) * PZ]


def compose(after: list[np.ndarray], before: list[np.ndarray]) -> list[np.ndarray]:
    return [a @ b for a in after for b in before]


def relaxation_kraus(t: float, T1: float, Tphi: float) -> list[np.ndarray]:
    if t < 0:
        raise ValueError("t must be >= 0")
    gamma = 0.0 if not np.isfinite(T1) else 1.0 - np.exp(-t / T1)
    lam = 1.0 if not np.isfinite(Tphi) else np.exp(-t / Tphi)
    return compose(dephasing_kraus(lam), amplitude_damping_kraus(gamma))


def pauli_probabilities(kraus: list[np.ndarray]) -> dict[str, float]:
    """Twirled channel: p_P = sum_k |tr(P K_k)|^2 / 4."""
    return {name: float(sum(abs(np.trace(P.conj().T @ K)) ** 2 for K in kraus) / 4) for name, P in PAULIS.items()}


def twirl_channels(t: float, T1: float, Tphi: float = np.inf) -> dict[str, float]:
    """Pauli probabilities of relaxation for time ``t`` after twirling."""
    return pauli_probabilities(relaxation_kraus(t, T1, Tphi))


def amplitude_damping_twirl(gamma: float) -> dict[str, float]:
    """Closed form: p_X = p_Y = gamma/4, p_Z = (1 - gamma/2 - sqrt(1-gamma))/2."""
    s = np.sqrt(1 - gamma)
    pz = 0.5 * (1 - gamma / 2 - s)
    return {"I": float(1 - gamma / 2 - pz), "X": gamma / 4, "Y": gamma / 4, "Z": float(pz)}


def short_time_twirl(t: float, T1: float, Tphi: float = np.inf) -> dict[str, float]:
    """First-order forms: X/Y mixture of total t/2T1, Z with t/2Tphi."""
    pxy = 0.0 if not np.isfinite(T1) else t / (2 * T1)
    pz = 0.0 if not np.isfinite(Tphi) else t / (2 * Tphi)
    return {"I": 1 - pxy - pz, "X": pxy / 2, "Y": pxy / 2, "Z": pz}


def dephasing_probability(t: float, Tphi: float) -> float:
    return 0.5 * (1 - np.exp(-t / Tphi))


# -- brute-force oracle -------------------------------------------------------


def superoperator(kraus: list[np.ndarray]) -> np.ndarray:
    """Column-stacking superoperator: vec(K rho K^dag) = (K* (x) K) vec(rho)."""
    return sum(np.kron(K.conj(), K) for K in kraus)


def twirl_superoperator(S: np.ndarray) -> np.ndarray:
    """Average of P^dag (.) P conjugations of the map over the Pauli group."""
    out = np.zeros_like(S)
    for P in PAULIS.values():
        U = np.kron(P.conj(), P)
        out += U.conj().T @ S @ U
    return out / 4


def twirl_oracle(kraus: list[np.ndarray]) -> dict[str, float]:
    """Pauli probabilities read off the twirled process matrix."""
    T = twirl_superoperator(superoperator(kraus))
    out = {}
    for name, P in PAULIS.items():
        B = np.kron(P.conj(), P)
        out[name] = float(np.real(np.trace(B.conj().T @ T)) / 4)
    return out
