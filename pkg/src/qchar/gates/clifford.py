"""Single-qubit Clifford group generated from X/Y quarter turns."""
from __future__ import annotations

from collections import deque
from functools import lru_cache

import numpy as np

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


def _quarter(axis, sign):
    return np.cos(np.pi / 4) * _I2 - 1j * sign * np.sin(np.pi / 4) * axis


GENERATORS = {
    "X90": _quarter(_X, 1),
    "Xm90": _quarter(_X, -1),
    "Y90": _quarter(_Y, 1),
    "Ym90": _quarter(_Y, -1),
}


def _key(u):
    # canonical global phase: first entry with non-negligible modulus made real positive
    flat = u.ravel()
    k = int(np.argmax(np.abs(flat) > 1e-9))
    v = u * np.exp(-1j * np.angle(flat[k]))
    return tuple(np.round(v.ravel(), 9).tolist())


@lru_cache(maxsize=1)
def clifford_group():
    """All 24 elements as ``(unitary, word)`` with shortest generator words.

    Words are tuples of generator names applied left to right in time.
    """
    found = {_key(_I2): (_I2, ())}
    queue = deque([(_I2, ())])
    while queue:
        u, word = queue.popleft()
        for name in sorted(GENERATORS):
            v = GENERATORS[name] @ u
            k = _key(v)
            if k not in found:
                found[k] = (v, word + (name,))
                queue.append((v, word + (name,)))
    items = sorted(found.values(), key=lambda it: (len(it[1]), it[1]))
    if len(items) != 24:
        raise RuntimeError(f"generated {len(items)} elements, expected 24")
    return tuple(items)


def simulated_generators(spec, cfg):
    """3x3 propagators of the four generators from the pulse simulator."""
    from .calibration import pulse_unitary

    return {
        "X90": pulse_unitary(spec, cfg),
        "Xm90": pulse_unitary(spec, cfg, sign=-1.0),
        "Y90": pulse_unitary(spec, cfg, phase=np.pi / 2),
        "Ym90": pulse_unitary(spec, cfg, sign=-1.0, phase=np.pi / 2),
    }


def mean_generators_per_clifford():
    return float(np.mean([len(w) for _, w in clifford_group()]))


def inverse_index(u):
    """Index of the group element inverting ``u`` (up to global phase)."""
    target = _key(u.conj().T)
    for i, (v, _) in enumerate(clifford_group()):
        if _key(v) == target:
            return i
    raise ValueError("matrix is not a Clifford")


def random_sequence(rng, m):
    """``m`` random Clifford indices followed by the recovery element."""
    group = clifford_group()
    idx = rng.integers(0, 24, size=m)
    total = _I2
    for i in idx:
        total = group[i][0] @ total
    return list(idx) + [inverse_index(total)]


def sequence_survival(indices, pulse_unitaries=None):
    """Ground-state return probability of a Clifford index sequence.

    ``pulse_unitaries`` maps generator names to (simulated, possibly 3x3)
    propagators; by default the ideal 2x2 generators are used.
    """
    gens = GENERATORS if pulse_unitaries is None else pulse_unitaries
    dim = next(iter(gens.values())).shape[0]
    group = clifford_group()
    total = np.eye(dim, dtype=complex)
    for i in indices:
        for name in group[i][1]:
            total = gens[name] @ total
    return float(abs(total[0, 0]) ** 2)
