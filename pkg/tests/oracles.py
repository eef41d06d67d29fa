"""Reference implementations used only by the tests.

They share no code with the package: the splitter matrix is written out again
and output amplitudes come from matrix permanents over explicit particle paths.
"""

import itertools
import math

import numpy as np


def splitter_matrix(t: float, phi: float) -> np.ndarray:
    """Column k holds the output amplitudes of input channel k (a, b) into (c, d)."""
    st, sr = math.sqrt(t), math.sqrt(1.0 - t)
    return np.array([[1j * np.exp(1j * phi) * sr, st],
                     [st, 1j * np.exp(-1j * phi) * sr]])


def permanent(m: np.ndarray) -> complex:
    n = m.shape[0]
    if n == 0:
        return 1.0 + 0j
    return sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def output_amplitudes(n_a: int, n_b: int, t: float, phi: float) -> dict:
    """``<m_c, m_d| U |n_a, n_b>`` for every output split, via permanents."""
    u = splitter_matrix(t, phi)
    cols = [0] * n_a + [1] * n_b
    n = n_a + n_b
    out = {}
    for m_c in range(n + 1):
        rows = [0] * m_c + [1] * (n - m_c)
        sub = u[np.ix_(rows, cols)]
        norm = math.sqrt(math.factorial(n_a) * math.factorial(n_b)
                         * math.factorial(m_c) * math.factorial(n - m_c))
        out[(m_c, n - m_c)] = permanent(sub) / norm
    return out


def output_moments(n_a: int, n_b: int, t: float, phi: float) -> dict:
    amps = output_amplitudes(n_a, n_b, t, phi)
    p = {k: abs(v) ** 2 for k, v in amps.items()}
    return {
        "cd": sum(w * c * d for (c, d), w in p.items()),
        "cc": sum(w * c * (c - 1) for (c, d), w in p.items()),
        "dd": sum(w * d * (d - 1) for (c, d), w in p.items()),
        "norm": sum(p.values()),
    }


def thermal_pair_moments(mean_n: float) -> tuple[float, float]:
    """``(<n(n-1)>, <n_a n_b>)`` for perfectly number-correlated thermal pairs."""
    return 2 * mean_n ** 2, 2 * mean_n ** 2 + mean_n
