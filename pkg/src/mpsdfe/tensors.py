"""Open-boundary MPS/MPO containers, gauge sweeps, and product expectations.

Index order is fixed everywhere: MPS site tensors are (leftBond, rightBond,
physical) and MPO site tensors are (leftBond, rightBond, physOut, physIn).
Boundary bonds have dimension 1.  Product operators are plain lists of 2x2
complex matrices.

The right-canonical gauge used throughout puts the orthogonality center at
the first tensor: every later site contracts with its own conjugate to the
identity on the incoming bond.  ``right_canonicalize_chain`` implements the
sweep for any physical dimension so the operator-space chains of the MPO
engine can reuse it.
"""

from __future__ import annotations

import numpy as np

from .errors import DegeneracyError, ValidationError

CANONICAL_NONE = "none"
CANONICAL_RIGHT = "right_canonical_center_first"

# Residual tolerance for the right-canonical site condition.
CANONICAL_ATOL = 1e-12


class MPS:
    """Matrix product state as a chain of rank-3 tensors.

    Attributes:
        sites: list of complex arrays with index order (left, right, physical).
        canonical_form: ``CANONICAL_NONE`` or ``CANONICAL_RIGHT``.
        provenance: optional construction metadata (seed, generator kind).

    Instances are treated as immutable once canonicalized; samplers and
    device simulators share them read-only across parallel workers.
    """

    def __init__(self, sites, canonical_form=CANONICAL_NONE, provenance=None):
        self.sites = [np.asarray(t, dtype=complex) for t in sites]
        self.canonical_form = canonical_form
        self.provenance = dict(provenance) if provenance else {}
        self.validate()

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def bond_dims(self) -> list[int]:
        """Bond dimensions, outer boundaries included: length n+1."""
        return [self.sites[0].shape[0]] + [t.shape[1] for t in self.sites]

    def validate(self) -> None:
        if not self.sites:
            raise ValidationError("MPS must have at least one site")
        for i, t in enumerate(self.sites):
            if t.ndim != 3 or t.shape[2] != 2:
                raise ValidationError(f"site {i}: expected shape (l, r, 2), got {t.shape}")
        if self.sites[0].shape[0] != 1 or self.sites[-1].shape[1] != 1:
            raise ValidationError("boundary bonds must have dimension 1")
        for i in range(len(self.sites) - 1):
            if self.sites[i].shape[1] != self.sites[i + 1].shape[0]:
                raise ValidationError(
                    f"bond mismatch between sites {i} and {i + 1}: "
                    f"{self.sites[i].shape[1]} != {self.sites[i + 1].shape[0]}"
                )
        if self.canonical_form == CANONICAL_RIGHT:
            residuals = right_canonical_residuals(self.sites)
            if residuals and max(residuals) > CANONICAL_ATOL:
                raise ValidationError(
                    f"canonical flag set but gauge residual is {max(residuals):.2e}"
                )

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.sites], self.canonical_form, self.provenance)


class MPO:
    """Matrix product operator as a chain of rank-4 tensors.

    Attributes:
        sites: complex arrays with index order (left, right, physOut, physIn).
        hermitian: caller's assertion that the represented operator is
            Hermitian; required by the sampling engine.
    """

    def __init__(self, sites, hermitian=False, provenance=None):
        self.sites = [np.asarray(t, dtype=complex) for t in sites]
        self.hermitian = bool(hermitian)
        self.provenance = dict(provenance) if provenance else {}
        self.validate()

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def bond_dims(self) -> list[int]:
        return [self.sites[0].shape[0]] + [t.shape[1] for t in self.sites]

    def validate(self) -> None:
        if not self.sites:
            raise ValidationError("MPO must have at least one site")
        for i, t in enumerate(self.sites):
            if t.ndim != 4 or t.shape[2:] != (2, 2):
                raise ValidationError(f"site {i}: expected shape (l, r, 2, 2), got {t.shape}")
        if self.sites[0].shape[0] != 1 or self.sites[-1].shape[1] != 1:
            raise ValidationError("boundary bonds must have dimension 1")
        for i in range(len(self.sites) - 1):
            if self.sites[i].shape[1] != self.sites[i + 1].shape[0]:
                raise ValidationError(f"bond mismatch between sites {i} and {i + 1}")

    def copy(self) -> "MPO":
        return MPO([t.copy() for t in self.sites], self.hermitian, self.provenance)


def right_canonicalize_chain(sites, normalize=True, method="qr"):
    """Right-to-left orthonormalization sweep for a rank-3 tensor chain.

    Works for any physical dimension.  After the sweep, every site but the
    first satisfies sum_p T[(p)] T[(p)]^dag = I on its left bond, and the
    first site carries the chain's total scale.  With ``normalize=True`` the
    first site is rescaled to unit 2-norm (unit state norm); otherwise the
    represented tensor is preserved exactly.

    Returns (new_sites, scale) where ``scale`` is the 2-norm the first site
    carried before any normalization.

    Raises:
        DegeneracyError: chain has (numerically) zero norm.
        ValidationError: unknown method.
    """
    if method not in ("qr", "svd"):
        raise ValidationError(f"unknown canonicalization method {method!r}")
    out = [np.asarray(t, dtype=complex).copy() for t in sites]
    for i in range(len(out) - 1, 0, -1):
        left, right, phys = out[i].shape
        mat = out[i].reshape(left, right * phys)
        if method == "qr":
            q, r = np.linalg.qr(mat.conj().T, mode="reduced")
            keep = q.shape[1]
            out[i] = q.conj().T.reshape(keep, right, phys)
            carry = r.conj().T
        else:
            u, s, vh = np.linalg.svd(mat, full_matrices=False)
            keep = vh.shape[0]
            out[i] = vh.reshape(keep, right, phys)
            carry = u * s
        out[i - 1] = np.einsum("abp,bc->acp", out[i - 1], carry)
    scale = float(np.linalg.norm(out[0]))
    if scale < 1e-14:
        raise DegeneracyError("zero-norm chain cannot be canonicalized")
    if normalize:
        out[0] = out[0] / scale
    return out, scale


def canonicalize_right(mps: MPS, method: str = "qr") -> MPS:
    """Gauge-transform into right-canonical form, center at the first tensor.

    The returned state is normalized and physically identical to the input up
    to its norm; bond dimensions may shrink where the input carried an exact
    null space.
    """
    sites, _ = right_canonicalize_chain(mps.sites, normalize=True, method=method)
    return MPS(sites, canonical_form=CANONICAL_RIGHT, provenance=mps.provenance)


def right_canonical_residuals(sites) -> list[float]:
    """Max-abs deviation of each site (from the second on) from the gauge condition."""
    residuals = []
    for t in sites[1:]:
        left = t.shape[0]
        gram = np.einsum("arp,brp->ab", t, t.conj())
        residuals.append(float(np.max(np.abs(gram - np.eye(left)))))
    return residuals


def assert_right_canonical(mps: MPS) -> None:
    if mps.canonical_form != CANONICAL_RIGHT:
        raise ValidationError("operation requires a right-canonical MPS")


def overlap(a: MPS, b: MPS) -> complex:
    """<a|b> by a left-to-right transfer sweep."""
    if a.n != b.n:
        raise ValidationError("overlap requires equal lengths")
    env = np.ones((1, 1), dtype=complex)
    for ta, tb in zip(a.sites, b.sites):
        env = np.einsum("xy,xap,ybp->ab", env, ta.conj(), tb, optimize=True)
    return complex(env[0, 0])


def norm(mps: MPS) -> float:
    return float(np.sqrt(np.real(overlap(mps, mps))))


def expectation_product(mps: MPS, factors) -> complex:
    """<psi| prod_i M_i |psi> for arbitrary single-site factors M_i.

    Left-to-right boundary contraction, O(n * B^3).
    """
    if len(factors) != mps.n:
        raise ValidationError("operator length does not match MPS length")
    env = np.ones((1, 1), dtype=complex)
    for site, mat in zip(mps.sites, factors):
        applied = np.einsum("st,lrt->lrs", np.asarray(mat, dtype=complex), site)
        env = np.einsum("xy,xap,ybp->ab", env, site.conj(), applied, optimize=True)
    return complex(env[0, 0])


def expectation_product_mpo(mpo: MPO, factors) -> complex:
    """tr(O * prod_i M_i) for arbitrary single-site factors M_i.

    Boundary sweep with O(n * B^2) cost: each site collapses to the transfer
    matrix sum_{e,f} W[.., e, f] M[f, e].
    """
    if len(factors) != mpo.n:
        raise ValidationError("operator length does not match MPO length")
    vec = np.ones((1,), dtype=complex)
    for site, mat in zip(mpo.sites, factors):
        transfer = np.einsum("abef,fe->ab", site, np.asarray(mat, dtype=complex))
        vec = vec @ transfer
    return complex(vec[0])


def bond_profile(n: int, max_bond: int) -> list[int]:
    """Open-boundary saturation profile min(2^i, 2^(n-i), max_bond)."""
    return [min(2**i, 2 ** (n - i), max_bond) for i in range(n + 1)]


def random_mps(n: int, max_bond: int, seed: int) -> MPS:
    """Normalized random MPS with i.i.d. complex standard normal entries.

    Bond dimensions follow ``bond_profile``; the draw is deterministic for a
    fixed seed.  The returned state is not canonicalized.
    """
    if n < 1 or max_bond < 1:
        raise ValidationError("random_mps requires n >= 1 and max_bond >= 1")
    rng = np.random.default_rng(seed)
    dims = bond_profile(n, max_bond)
    sites = []
    for i in range(n):
        shape = (dims[i], dims[i + 1], 2)
        sites.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    mps = MPS(sites, provenance={"kind": "random", "seed": int(seed), "maxBond": int(max_bond)})
    total = norm(mps)
    if total < 1e-14:
        raise DegeneracyError("random MPS drew a zero-norm state")
    # Spread the normalization across sites to keep entries O(1).
    scale = total ** (-1.0 / n)
    mps.sites = [t * scale for t in mps.sites]
    return mps


def product_state_mps(n: int, amplitudes=None) -> MPS:
    """Bond-1 product state; defaults to |0...0>."""
    if amplitudes is None:
        amplitudes = [(1.0, 0.0)] * n
    sites = []
    for a0, a1 in amplitudes:
        t = np.zeros((1, 1, 2), dtype=complex)
        t[0, 0, 0] = a0
        t[0, 0, 1] = a1
        sites.append(t)
    return MPS(sites, provenance={"kind": "product"})


def ghz_mps(n: int) -> MPS:
    """(|0...0> + |1...1>)/sqrt(2) as a bond-2 chain."""
    if n < 2:
        raise ValidationError("ghz_mps requires n >= 2")
    first = np.zeros((1, 2, 2), dtype=complex)
    first[0, 0, 0] = first[0, 1, 1] = 1 / np.sqrt(2)
    bulk = np.zeros((2, 2, 2), dtype=complex)
    bulk[0, 0, 0] = bulk[1, 1, 1] = 1.0
    last = np.zeros((2, 1, 2), dtype=complex)
    last[0, 0, 0] = last[1, 0, 1] = 1.0
    return MPS([first] + [bulk.copy() for _ in range(n - 2)] + [last], provenance={"kind": "ghz"})


def w_mps(n: int) -> MPS:
    """Single-excitation W state as a bond-2 chain.

    The virtual index tracks whether the excitation has been placed yet.
    """
    if n < 2:
        raise ValidationError("w_mps requires n >= 2")
    amp = 1 / np.sqrt(n)
    first = np.zeros((1, 2, 2), dtype=complex)
    first[0, 0, 0] = 1.0
    first[0, 1, 1] = amp
    bulk = np.zeros((2, 2, 2), dtype=complex)
    bulk[0, 0, 0] = bulk[1, 1, 0] = 1.0
    bulk[0, 1, 1] = amp
    last = np.zeros((2, 1, 2), dtype=complex)
    last[1, 0, 0] = 1.0
    last[0, 0, 1] = amp
    return MPS([first] + [bulk.copy() for _ in range(n - 2)] + [last], provenance={"kind": "w"})


def product_mpo(factors, hermitian=False) -> MPO:
    """Bond-1 MPO from a list of 2x2 matrices."""
    sites = [np.asarray(m, dtype=complex).reshape(1, 1, 2, 2) for m in factors]
    return MPO(sites, hermitian=hermitian, provenance={"kind": "product"})


def identity_mpo(n: int) -> MPO:
    return product_mpo([np.eye(2)] * n, hermitian=True)


def random_mpo(n: int, max_bond: int, seed: int) -> MPO:
    """Random MPO with i.i.d. complex standard normal entries (not Hermitian)."""
    if n < 1 or max_bond < 1:
        raise ValidationError("random_mpo requires n >= 1 and max_bond >= 1")
    rng = np.random.default_rng(seed)
    dims = [min(4**i, 4 ** (n - i), max_bond) for i in range(n + 1)]
    sites = []
    for i in range(n):
        shape = (dims[i], dims[i + 1], 2, 2)
        sites.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return MPO(sites, provenance={"kind": "random", "seed": int(seed), "maxBond": int(max_bond)})


def mpo_adjoint(mpo: MPO) -> MPO:
    """Tensor-wise conjugate transpose on the physical legs."""
    return MPO(
        [np.conj(np.transpose(t, (0, 1, 3, 2))) for t in mpo.sites],
        hermitian=mpo.hermitian,
        provenance=mpo.provenance,
    )


def mpo_symmetrize(mpo: MPO) -> MPO:
    """(M + M^dag)/2 via bond doubling; the result is flagged Hermitian."""
    adj = mpo_adjoint(mpo)
    n = mpo.n
    if n == 1:
        site = 0.5 * (mpo.sites[0] + adj.sites[0])
        return MPO([site], hermitian=True, provenance={"kind": "symmetrized"})
    sites = []
    for i, (a, b) in enumerate(zip(mpo.sites, adj.sites)):
        if i == 0:
            sites.append(np.concatenate([0.5 * a, 0.5 * b], axis=1))
        elif i == n - 1:
            sites.append(np.concatenate([a, b], axis=0))
        else:
            la, ra = a.shape[0], a.shape[1]
            lb, rb = b.shape[0], b.shape[1]
            block = np.zeros((la + lb, ra + rb, 2, 2), dtype=complex)
            block[:la, :ra] = a
            block[la:, ra:] = b
            sites.append(block)
    return MPO(sites, hermitian=True, provenance={"kind": "symmetrized"})
