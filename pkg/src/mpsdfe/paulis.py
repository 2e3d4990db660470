"""Pauli labels, strings, and the qubit-wise grouping combinatorics.

Pauli strings are stored as uint8 code arrays (I=0, X=1, Y=2, Z=3), which is
the hot-path representation used by the samplers; 2x2 matrices are looked up
from a fixed table only when a contraction actually needs them.  Sorting
strings are ordinary Pauli strings restricted to {X, Y, Z}; sign vectors are
int8 arrays over {+1, -1}.

The text encodings are ``"IXYZ"`` characters for strings and ``"+-"``
characters for sign vectors.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .errors import ValidationError

I, X, Y, Z = 0, 1, 2, 3
PAULI_CHARS = "IXYZ"

# Matrices indexed by label code, shape (4, 2, 2).
PAULI_MATS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def pauli_matrix(label: int) -> np.ndarray:
    """2x2 matrix of a single Pauli label code."""
    return PAULI_MATS[label]


def pauli_from_str(text: str) -> np.ndarray:
    """Parse an ``IXYZ`` character string into a code array."""
    try:
        return np.array([PAULI_CHARS.index(c) for c in text], dtype=np.uint8)
    except ValueError as exc:
        raise ValidationError(f"invalid Pauli character in {text!r}") from exc


def pauli_to_str(pauli: np.ndarray) -> str:
    return "".join(PAULI_CHARS[c] for c in pauli)


def signs_from_str(text: str) -> np.ndarray:
    """Parse a ``+-`` character string into an int8 sign vector."""
    if not set(text) <= {"+", "-"}:
        raise ValidationError(f"invalid sign character in {text!r}")
    return np.array([1 if c == "+" else -1 for c in text], dtype=np.int8)


def signs_to_str(signs: np.ndarray) -> str:
    return "".join("+" if s > 0 else "-" for s in signs)


def validate_sorting(sorting: np.ndarray) -> None:
    """A sorting string assigns a non-identity label to every site."""
    if np.any(sorting == I):
        raise ValidationError("sorting string must not contain identity labels")


def random_sorting(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a sorting string uniformly from {X, Y, Z}^n."""
    return rng.integers(1, 4, size=n).astype(np.uint8)


def _check_lengths(*arrays: np.ndarray) -> None:
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ValidationError(f"length mismatch: {sorted(lengths)}")


def representative(pauli: np.ndarray, sorting: np.ndarray) -> np.ndarray:
    """Measurement setting induced by a latent string under a sorting string.

    Site-wise, the sorting label replaces I and fixes matching labels; any
    other non-identity label is kept.  The result never contains I.
    """
    _check_lengths(pauli, sorting)
    validate_sorting(sorting)
    matched = (pauli == I) | (pauli == sorting)
    return np.where(matched, sorting, pauli).astype(np.uint8)


def group_size(pauli: np.ndarray, sorting: np.ndarray) -> int:
    """Number of latent strings sharing this string's representative.

    Equals 2**k where k counts the sites at which the representative agrees
    with the sorting string.
    """
    rep = representative(pauli, sorting)
    return 1 << int(np.count_nonzero(rep == sorting))


def enumerate_group(rep: np.ndarray, sorting: np.ndarray) -> list[np.ndarray]:
    """All latent strings whose representative is ``rep``.  Test-scale only.

    Guarded to n <= 12 and group size <= 2**16; the group is the site-wise
    product of {I, rep_i} at matching sites and {rep_i} elsewhere.
    """
    _check_lengths(rep, sorting)
    validate_sorting(sorting)
    if np.any(rep == I):
        raise ValidationError("representative must not contain identity labels")
    n = len(rep)
    if n > 12:
        raise ValidationError("enumerate_group is limited to n <= 12")
    matches = int(np.count_nonzero(rep == sorting))
    if 1 << matches > 1 << 16:
        raise ValidationError("group too large to enumerate")
    site_options = [
        (I, int(q)) if q == g else (int(q),) for q, g in zip(rep, sorting)
    ]
    return [np.array(combo, dtype=np.uint8) for combo in product(*site_options)]


def preimage(sort_label: int, rep_label: int) -> tuple[int, ...]:
    """Single-qubit preimage of a representative label under the sorting label.

    The two-element branch {I, rep} occurs exactly where the representative
    agrees with the sorting string; elsewhere the label maps to itself only.
    """
    if sort_label == I or rep_label == I:
        raise ValidationError("preimage is defined for non-identity labels")
    if rep_label == sort_label:
        return (I, rep_label)
    return (rep_label,)


def qwc(p1: np.ndarray, p2: np.ndarray) -> bool:
    """Qubit-wise commutation: at each site, I on either side or equal labels."""
    _check_lengths(p1, p2)
    return bool(np.all((p1 == I) | (p2 == I) | (p1 == p2)))


def snapshot_factors(
    pauli: np.ndarray, sorting: np.ndarray, signs: np.ndarray
) -> list[np.ndarray]:
    """Local 2x2 factors of the single-shot grouped estimator.

    At sites where the latent label is I or matches the sorting label, the
    factor is the scaled eigenprojector I + s*g (twice the rank-1 projector
    onto the s-eigenspace of g); elsewhere it is s*P.
    """
    _check_lengths(pauli, sorting, signs)
    validate_sorting(sorting)
    factors = []
    for p, g, s in zip(pauli, sorting, signs):
        if p == I or p == g:
            factors.append(np.eye(2, dtype=complex) + float(s) * PAULI_MATS[g])
        else:
            factors.append(float(s) * PAULI_MATS[p])
    return factors


def all_pauli_strings(n: int) -> list[np.ndarray]:
    """Every length-n code array, in lexicographic (I,X,Y,Z) order."""
    if n > 12:
        raise ValidationError("all_pauli_strings is limited to n <= 12")
    return [np.array(combo, dtype=np.uint8) for combo in product(range(4), repeat=n)]
