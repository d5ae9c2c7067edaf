"""Transmit precoders, receive combiners and per-symbol SINRs.

Three beamformer families are implemented:

* block-diagonalization with per-stream maximal-ratio combining (BD-MRC),
  built from the eigendecomposition of a small per-user matrix instead of
  the full transmit-side covariance;
* zero-forcing (ZF), which diagonalizes the whole group channel;
* multicast/unicast null-steering beamformers for the bit-level
  multi-server (MSV) baseline.

Channels follow the convention that a user with channel matrix ``H``
receives ``H.T @ x``, so a beam ``v`` is invisible to ``H`` iff
``H.T @ v == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import GroupChannel
from .errors import (
    ContractViolationError,
    InfeasibleDimensionError,
    SingularMatrixError,
)

__all__ = [
    "UserPrecoder",
    "PrecoderSolution",
    "ZfSolution",
    "MsvSolution",
    "hermitian_eig",
    "null_projector",
    "bd_mrc",
    "bd_mrc_eigenvalues",
    "bd_mrc_sinr",
    "sinr_from_matrices",
    "zf",
    "zf_matrix",
    "zf_imperfect_csit_sinr",
    "zf_imperfect_csir_sinr",
    "msv_beamformers",
    "msv_rates",
    "msv_rate_from_gains",
    "msv_gains_fast",
    "msv_high_snr_gain_limit",
    "dump_complex_matrix",
    "load_complex_matrix",
]

# Eigenvalues below this fraction of the largest one count as zero rank.
RANK_CUTOFF = 1e-10
# Gram matrices whose eigenvalue spread exceeds this go through the
# pseudo-inverse instead of a Cholesky solve.
PINV_CUTOFF = 1e-12
HERMITIAN_TOL = 1e-10


def hermitian_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Raises
    ------
    ContractViolationError
        If ``a`` deviates from Hermitian by more than ``1e-10`` relative.
    """
    a = np.asarray(a, dtype=complex)
    scale = np.linalg.norm(a)
    if scale > 0 and np.linalg.norm(a - a.conj().T) > HERMITIAN_TOL * scale:
        raise ContractViolationError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh((a + a.conj().T) / 2.0)
    return w[::-1].copy(), v[:, ::-1].copy()


def _gram_solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``gram @ x = rhs`` for a Hermitian PSD Gram matrix.

    Uses a Cholesky-backed solve while the matrix is comfortably full rank
    and falls back to an eigendecomposition pseudo-inverse otherwise, which
    also covers rank-deficient channel products.
    """
    evals = np.linalg.eigvalsh((gram + gram.conj().T) / 2.0)
    if evals[0] < PINV_CUTOFF * evals[-1] or evals[-1] <= 0:
        return np.linalg.pinv(gram, rcond=PINV_CUTOFF, hermitian=True) @ rhs
    return np.linalg.solve(gram, rhs)


def null_projector(h_others: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the null space of ``h_others.T``.

    ``h_others`` stacks the channels to be nulled as an ``(L, m)`` matrix;
    the result ``T`` is Hermitian, idempotent, and satisfies
    ``h_others.T @ T == 0``.  An empty ``h_others`` yields the identity.
    """
    h_others = np.asarray(h_others, dtype=complex)
    L = h_others.shape[0]
    if h_others.size == 0:
        return np.eye(L, dtype=complex)
    gram = h_others.T @ h_others.conj()
    t = np.eye(L, dtype=complex) - h_others.conj() @ _gram_solve(gram, h_others.T)
    return (t + t.conj().T) / 2.0


@dataclass(frozen=True)
class UserPrecoder:
    """Per-user precoding columns, combining columns and stream gains."""

    precoder: np.ndarray     # (L, J), unit-norm columns
    combiner: np.ndarray     # (M, J), unit-norm columns
    eigenvalues: np.ndarray  # (J,), descending, strictly positive

    @property
    def num_streams(self) -> int:
        return self.eigenvalues.size


@dataclass(frozen=True)
class PrecoderSolution:
    """BD-MRC beamformers for every served user of one group."""

    users: tuple[UserPrecoder, ...]

    @property
    def stream_counts(self) -> tuple[int, ...]:
        return tuple(u.num_streams for u in self.users)

    def eigenvalue_sets(self) -> list[np.ndarray]:
        return [u.eigenvalues for u in self.users]


def _bd_small_matrix(h_k: np.ndarray, h_rest: np.ndarray) -> np.ndarray:
    """Per-user matrix whose eigenvalues are the BD-MRC stream gains.

    Equals ``H_k.T @ T @ H_k.conj()`` for the null projector ``T`` of the
    other users' channels, computed without forming the L-by-L projector.
    """
    gk = h_k.T @ h_k.conj()
    if h_rest.size == 0:
        a = gk
    else:
        b = h_k.T @ h_rest.conj()
        gram = h_rest.T @ h_rest.conj()
        a = gk - b @ _gram_solve(gram, b.conj().T)
    return (a + a.conj().T) / 2.0


def bd_mrc(group: GroupChannel) -> PrecoderSolution:
    """Design BD-MRC precoders and combiners for one served group.

    Each user's precoding columns live in the null space of the other
    users' channels, so intra-group interference vanishes; within a user,
    the columns are eigen-directions of its effective channel, so the MRC
    combiner also removes inter-stream interference.  The per-symbol SINR
    is then ``power * eigenvalue / noise_power``.

    Raises
    ------
    InfeasibleDimensionError
        If some user is left without a single positive-gain stream.
    """
    mats = [h for h, _ in group.per_user]
    users = []
    for k, h_k in enumerate(mats):
        h_rest = (
            np.hstack([h for i, h in enumerate(mats) if i != k])
            if len(mats) > 1
            else np.empty((group.num_tx_antennas, 0), dtype=complex)
        )
        t_proj = null_projector(h_rest)
        small = h_k.T @ t_proj @ h_k.conj()
        w, tvecs = hermitian_eig(small)
        j = int(np.sum(w > RANK_CUTOFF * max(w[0], 0.0)))
        if j == 0:
            raise InfeasibleDimensionError(
                f"user {k}: no interference-free stream available "
                f"(L={group.num_tx_antennas}, group antennas={group.total_antennas})"
            )
        v = t_proj @ h_k.conj() @ tvecs[:, :j]
        v /= np.linalg.norm(v, axis=0, keepdims=True)
        r = h_k.T @ v
        r /= np.linalg.norm(r, axis=0, keepdims=True)
        users.append(UserPrecoder(v, r, w[:j].copy()))
    return PrecoderSolution(tuple(users))


def bd_mrc_eigenvalues(group: GroupChannel) -> list[np.ndarray]:
    """Per-user BD-MRC stream gains without building the beamformers.

    Matches the eigenvalues of :func:`bd_mrc` but works on the small
    per-user matrices only; with single-antenna users it reduces to one
    Gram-matrix inverse for the whole group.
    """
    mats = [h for h, _ in group.per_user]
    if all(h.shape[1] == 1 for h in mats) and len(mats) > 1:
        stacked = np.hstack(mats)
        gram = stacked.T @ stacked.conj()
        try:
            inv = np.linalg.inv(gram)
        except np.linalg.LinAlgError:
            return _bd_eigs_generic(group, mats)
        gains = 1.0 / np.real(np.diag(inv))
        if np.all(gains > 0):
            return [np.array([g]) for g in gains]
    return _bd_eigs_generic(group, mats)


def _bd_eigs_generic(group: GroupChannel, mats: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    for k, h_k in enumerate(mats):
        h_rest = (
            np.hstack([h for i, h in enumerate(mats) if i != k])
            if len(mats) > 1
            else np.empty((group.num_tx_antennas, 0), dtype=complex)
        )
        small = _bd_small_matrix(h_k, h_rest)
        w = np.linalg.eigvalsh(small)[::-1]
        j = int(np.sum(w > RANK_CUTOFF * max(w[0], 0.0)))
        if j == 0:
            raise InfeasibleDimensionError(f"user {k}: no interference-free stream")
        out.append(w[:j].copy())
    return out


def bd_mrc_sinr(
    solution: PrecoderSolution,
    powers: list[np.ndarray],
    noise_power: float,
) -> list[np.ndarray]:
    """Closed-form per-symbol SINRs: ``power * eigenvalue / noise``."""
    return [
        np.asarray(p, dtype=float) * u.eigenvalues / noise_power
        for u, p in zip(solution.users, powers)
    ]


def sinr_from_matrices(
    group: GroupChannel,
    solution: PrecoderSolution,
    powers: list[np.ndarray],
    noise_power: float,
) -> list[np.ndarray]:
    """Definition-level SINRs computed from the raw beamformer matrices.

    Evaluates signal and interference powers through the actual
    ``combiner, channel, precoder`` products, including intra-group and
    inter-stream leakage; serves as a cross-check of the closed form.
    """
    mats = [h for h, _ in group.per_user]
    out = []
    for k, user in enumerate(solution.users):
        eff_own = user.combiner.conj().T @ mats[k].T @ user.precoder  # (J, J)
        signal = np.abs(np.diag(eff_own)) ** 2 * np.asarray(powers[k], dtype=float)
        interference = np.zeros(user.num_streams)
        cross = np.abs(eff_own) ** 2 * np.asarray(powers[k], dtype=float)[None, :]
        interference += cross.sum(axis=1) - np.diag(cross)
        for kk, other in enumerate(solution.users):
            if kk == k:
                continue
            eff = user.combiner.conj().T @ mats[k].T @ other.precoder
            interference += (np.abs(eff) ** 2 * np.asarray(powers[kk], dtype=float)[None, :]).sum(axis=1)
        out.append(signal / (noise_power + interference))
    return out


@dataclass(frozen=True)
class ZfSolution:
    """Zero-forcing precoder for one group, with per-stream effective gains.

    ``stream_gains[i]`` is the squared effective channel of stream ``i``
    after full diagonalization; receivers need no combining matrix.
    """

    precoder: np.ndarray          # (L, total_antennas), unit-norm columns
    stream_gains: np.ndarray      # (total_antennas,), > 0
    antenna_counts: tuple[int, ...]

    def user_gains(self, k: int) -> np.ndarray:
        start = sum(self.antenna_counts[:k])
        return self.stream_gains[start : start + self.antenna_counts[k]]


def zf_matrix(stacked: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ZF precoder and per-stream gains for a stacked ``(L, M)`` channel.

    Raises
    ------
    SingularMatrixError
        If the channel Gram matrix is not invertible.
    """
    gram = stacked.T @ stacked.conj()
    try:
        np.linalg.cholesky((gram + gram.conj().T) / 2.0)
        inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("channel Gram matrix is numerically singular")
    gains = 1.0 / np.real(np.diag(inv))
    if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
        raise SingularMatrixError("channel Gram matrix is numerically singular")
    v = stacked.conj() @ inv * np.sqrt(gains)[None, :]
    return v, gains


def zf(group: GroupChannel) -> ZfSolution:
    """Fully diagonalizing precoder for one served group."""
    v, gains = zf_matrix(group.stacked())
    return ZfSolution(v, gains, group.antenna_counts)


def zf_imperfect_csit_sinr(
    true_channels: np.ndarray,
    estimated_channels: np.ndarray,
    powers: np.ndarray,
    noise_power: float,
) -> np.ndarray:
    """Per-user SINRs when ZF is computed from estimated channels.

    Channels are stacked column-wise ``(L, Q)`` for single-antenna users.
    The precoder nulls the *estimated* cross channels, so the true channels
    leak residual intra-group interference; cross-group terms are assumed
    cancelled from cached content and do not appear.
    """
    v_hat, _ = zf_matrix(np.asarray(estimated_channels, dtype=complex))
    coupling = np.asarray(true_channels, dtype=complex).T @ v_hat  # (Q, Q)
    powers = np.asarray(powers, dtype=float)
    cross = np.abs(coupling) ** 2 * powers[None, :]
    signal = np.diag(cross)
    interference = cross.sum(axis=1) - signal
    return signal / (noise_power + interference)


def zf_imperfect_csir_sinr(
    p_tot: float,
    num_groups: int,
    users_per_group: int,
    csir_error_var: float,
    estimated_coupling,
    noise_power: float,
):
    """SINR under equal power when coupling estimates carry Gaussian error.

    Residual interference from all other served streams enters through its
    average power ``per_stream_power * csir_error_var * (served - 1)``.
    """
    served = num_groups * users_per_group
    p = p_tot / served
    interference = p * csir_error_var * (served - 1)
    est = np.abs(np.asarray(estimated_coupling)) ** 2
    return p * (est + csir_error_var) / (noise_power + interference)


@dataclass(frozen=True)
class MsvSolution:
    """Multicast and unicast beams of the multi-server baseline.

    ``multicast_gains[k']`` is the squared effective channel of the common
    stream at multicast user ``k'``; ``unicast_gains[k]`` that of unicast
    stream ``k`` at its own user.
    """

    multicast_beam: np.ndarray   # (L,)
    unicast_beams: np.ndarray    # (L, Q_uc)
    multicast_gains: np.ndarray  # (G,)
    unicast_gains: np.ndarray    # (Q_uc,)

    @property
    def num_unicast(self) -> int:
        return self.unicast_beams.shape[1]


def msv_beamformers(
    multicast_channels: np.ndarray,
    unicast_channels: np.ndarray,
    num_unicast: int,
) -> MsvSolution:
    """Null-steering beams for one multicast plus ``num_unicast`` streams.

    Channels are rows of the given ``(G, L)`` / ``(Q_uc, L)`` arrays.  The
    common beam is steered at the first multicast user inside the null
    space of all unicast channels (plain matched filter when there is
    nothing to null); each unicast beam nulls the first multicast user and
    the other unicast users.
    """
    h_mc = np.asarray(multicast_channels, dtype=complex)
    h_uc = np.asarray(unicast_channels, dtype=complex)
    L = h_mc.shape[1]
    if num_unicast > L - 1:
        raise InfeasibleDimensionError(
            f"{num_unicast} unicast streams exceed the {L - 1} null-space dimensions"
        )
    if h_uc.shape[0] < num_unicast:
        raise ValueError("not enough unicast channels supplied")
    uc_cols = h_uc[:num_unicast].T  # (L, Q_uc)

    if num_unicast == 0:
        f0 = h_mc[0].conj() / np.linalg.norm(h_mc[0])
    else:
        t0 = null_projector(uc_cols)
        f0 = t0 @ h_mc[0].conj()
        f0 /= np.linalg.norm(f0)

    beams = np.zeros((L, num_unicast), dtype=complex)
    for k in range(num_unicast):
        others = np.hstack([h_mc[0][:, None], np.delete(uc_cols, k, axis=1)])
        tk = null_projector(others)
        fk = tk @ uc_cols[:, k].conj()
        beams[:, k] = fk / np.linalg.norm(fk)

    mc_gains = np.abs(h_mc @ f0) ** 2
    uc_gains = np.abs(np.einsum("lk,lk->k", uc_cols, beams)) ** 2
    return MsvSolution(f0, beams, mc_gains, uc_gains)


def msv_rates(
    solution: MsvSolution,
    p_tot: float,
    noise_power: float,
    coded_gain: int,
    cached_load: int,
    coherence_symbols: int,
    pilot_symbols: int,
) -> float:
    """Effective total rate of the multi-server baseline, in nats/s/Hz.

    Power splits equally over the ``num_unicast + 1`` streams.  The common
    stream is decoded by ``coded_gain`` users and runs at the worst of
    their effective channels; pilot overhead covers all
    ``num_unicast + 1 + cached_load`` served single-antenna users.
    """
    return msv_rate_from_gains(
        solution.multicast_gains, solution.unicast_gains, p_tot, noise_power,
        coded_gain, cached_load, coherence_symbols, pilot_symbols,
    )


def msv_rate_from_gains(
    multicast_gains: np.ndarray,
    unicast_gains: np.ndarray,
    p_tot: float,
    noise_power: float,
    coded_gain: int,
    cached_load: int,
    coherence_symbols: int,
    pilot_symbols: int,
) -> float:
    streams = len(unicast_gains) + 1
    served = streams + cached_load
    xi = 1.0 - pilot_symbols * served / coherence_symbols
    if xi < 0:
        return 0.0
    p = p_tot / streams
    r_mc = coded_gain * np.min(np.log1p(p * np.asarray(multicast_gains) / noise_power))
    r_uc = float(np.sum(np.log1p(p * np.asarray(unicast_gains) / noise_power)))
    return xi * (r_mc + r_uc)


def msv_gains_fast(
    multicast_channels: np.ndarray,
    unicast_channels: np.ndarray,
    num_unicast: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Beam gains of :func:`msv_beamformers` without building every beam.

    The squared effective channel of a null-steered matched-filter beam
    equals the squared distance of the target (conjugated) channel from the
    span of the nulled ones, which is one diagonal entry of an inverse Gram
    matrix; only the common beam is formed explicitly for its gains at the
    non-targeted multicast users.
    """
    h_mc = np.asarray(multicast_channels, dtype=complex)
    h_uc = np.asarray(unicast_channels, dtype=complex)
    if num_unicast == 0:
        f0 = h_mc[0].conj() / np.linalg.norm(h_mc[0])
        return np.abs(h_mc @ f0) ** 2, np.zeros(0)
    stacked = np.concatenate([h_mc[:1], h_uc[:num_unicast]], axis=0).T
    _, gains = zf_matrix(stacked)
    u = h_uc[:num_unicast].T
    alpha = np.linalg.solve(u.T @ u.conj(), u.T @ h_mc[0].conj())
    f0 = h_mc[0].conj() - u.conj() @ alpha
    f0 /= np.linalg.norm(f0)
    return np.abs(h_mc @ f0) ** 2, gains[1:]


def msv_high_snr_gain_limit(num_tx_antennas: int, cached_load: int) -> float:
    """Limiting gain of the full-multiplexing baseline as power grows."""
    return (num_tx_antennas + cached_load) / num_tx_antennas


def dump_complex_matrix(a: np.ndarray) -> str:
    """Row-major ``re,im`` text dump used by the oracle cross-checks."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    for row in a:
        lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    return "\n".join(lines) + "\n"


def load_complex_matrix(text: str) -> np.ndarray:
    """Inverse of :func:`dump_complex_matrix`."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    rows, cols = (int(x) for x in lines[0].split())
    out = np.empty((rows, cols), dtype=complex)
    for i, ln in enumerate(lines[1 : rows + 1]):
        for j, tok in enumerate(ln.split()):
            re_s, im_s = tok.split(",")
            out[i, j] = complex(float(re_s), float(im_s))
    return out
