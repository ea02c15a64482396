"""Unknown-input observer construction for the Lipschitz sine class.

Observer form (complete and partial share one code path, D = B or b_{J_u}):

    xhat+ = A_bar xhat + B_bar u + G_bar f(xhat) + K (y_Js - C_Js xhat) + b_bar y_Js+

    H = (C_Js D)^+,  G_bar = I - D H C_Js,  A_bar = G_bar A,  B_bar = G_bar B,  b_bar = D H

With clean J_s sensors and attacks confined to range(D) the error obeys

    e+ = (A_bar - K C_Js) e + G_bar (f(xhat) - f(x)).

Because f acts elementwise with slopes in [-g_i, g_i], f(xhat) - f(x) = diag(d) e for
some |d_i| <= g_i, so e+ = M(d) e with M affine in d. The P-norm is convex, hence

    max over the 2^n sign vertices of ||A_bar - K C + G_bar diag(+-g)||_P  <=  lam

certifies ||e(k)||_P <= lam^k ||e(0)||_P.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

RANK_TOL = 1e-9


class RankDeficient(ValueError):
    def __init__(self, rank, required):
        super().__init__(f"rank {rank} < required {required}")
        self.rank = rank
        self.required = required


class GainSynthesisFailed(RuntimeError):
    def __init__(self, best_bound):
        super().__init__(f"no contracting gain found (best bound {best_bound:.4g})")
        self.best_bound = best_bound


def matrix_rank(M, rank_tol=RANK_TOL):
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int((s > rank_tol * s[0]).sum())


def left_pseudoinverse(M, rank_tol=RANK_TOL):
    """Moore-Penrose pseudoinverse of a full-column-rank matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rank = matrix_rank(M, rank_tol)
    if rank < M.shape[1]:
        raise RankDeficient(rank, M.shape[1])
    return np.linalg.pinv(M)


@dataclass(frozen=True, eq=False)
class ContractionCertificate:
    P: np.ndarray
    lam: float
    bound: float  # the vertex bound actually achieved; lam >= bound

    @property
    def margin(self):
        return 1.0 - self.lam


@dataclass(frozen=True, eq=False)
class ObserverSpec:
    id: int
    kind: str
    J_u: tuple
    J_s: tuple
    C_sub: np.ndarray
    D: np.ndarray
    H: np.ndarray
    G_bar: np.ndarray
    A_bar: np.ndarray
    B_bar: np.ndarray
    b_bar: np.ndarray
    K: np.ndarray
    certificate: ContractionCertificate

    @property
    def name(self):
        from .subsets import label

        if self.kind == "complete":
            return label(self.J_s)
        return f"({label(self.J_u)},{label(self.J_s)})"


def _slopes(gamma, n):
    return np.broadcast_to(np.asarray(gamma, dtype=float), (n,)).copy()


def _vertices(G_bar, slopes):
    """Stack of G_bar diag(s) over every sign pattern s of the slope box."""
    n = G_bar.shape[0]
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    return G_bar[None, :, :] * (signs * slopes)[:, None, :]


def _vertex_bound(M0, corners, L):
    # ||M||_P = ||L^T M L^-T||_2 for P = L L^T
    Lt = L.T
    T = Lt @ (M0[None] + corners) @ np.linalg.inv(Lt)
    return float(np.linalg.svd(T, compute_uv=False)[:, 0].max())


def _lyapunov_candidates(M0, corners):
    n = M0.shape[0]
    yield np.eye(n)
    try:
        yield scipy.linalg.solve_discrete_lyapunov(M0.T, np.eye(n))
    except (np.linalg.LinAlgError, ValueError):
        pass
    # averaged-vertex Lyapunov: P - mean_v M_v^T P M_v = I
    Ms = M0[None] + corners
    op = np.eye(n * n) - sum(np.kron(M.T, M.T) for M in Ms) / len(Ms)
    try:
        yield np.linalg.solve(op, np.eye(n).reshape(-1)).reshape(n, n)
    except np.linalg.LinAlgError:
        pass


def _chol(P):
    P = 0.5 * (P + P.T)
    try:
        return np.linalg.cholesky(P / np.abs(P).max())
    except np.linalg.LinAlgError:
        return None


def synthesize_gain(
    A_bar,
    C_sub,
    G_bar,
    gamma,
    *,
    lambda_floor=1e-3,
    iterations=200,
    restarts=4,
    seed=0,
    refine_above=1.0,
):
    """Find K and a certificate (P, lam) with lam < 1.

    Stage 1 takes the least-squares gain K0 = A_bar C^+ and tries P = I and two
    Lyapunov-derived weightings. If the best bound is still >= ``refine_above``,
    stage 2 runs a seeded coordinate search over (K, chol(P)) with random restarts.
    ``gamma`` is a scalar or per-coordinate slope bound. The stored lam is the bound
    raised to at least ``lambda_floor``.
    """
    A_bar = np.asarray(A_bar, dtype=float)
    C_sub = np.atleast_2d(np.asarray(C_sub, dtype=float))
    G_bar = np.asarray(G_bar, dtype=float)
    n, m = A_bar.shape[0], C_sub.shape[0]
    corners = _vertices(G_bar, _slopes(gamma, n))
    K0 = A_bar @ np.linalg.pinv(C_sub)
    M0 = A_bar - K0 @ C_sub

    best_K, best_L, best = K0, np.eye(n), np.inf
    for P in _lyapunov_candidates(M0, corners):
        L = _chol(P)
        if L is None or not np.isfinite(L).all():
            continue
        b = _vertex_bound(M0, corners, L)
        if b < best:
            best, best_L = b, L

    if best >= refine_above:
        best_K, best_L, best = _coordinate_search(
            A_bar, C_sub, corners, best_K, best_L, best, iterations, restarts, seed, lambda_floor
        )

    if not best < 1.0:
        raise GainSynthesisFailed(best)
    P = best_L @ best_L.T
    P = P / np.linalg.eigvalsh(P).max()
    # pad so that an independent recomputation cannot land above lam by rounding
    lam = max(best * (1 + 1e-9), lambda_floor)
    if not lam < 1.0:
        raise GainSynthesisFailed(best)
    return best_K, ContractionCertificate(P=P, lam=lam, bound=best)


def _coordinate_search(A_bar, C_sub, corners, K0, L0, start, iterations, restarts, seed, stop_at):
    n, m = A_bar.shape[0], C_sub.shape[0]
    tril = np.tril_indices(n)
    diag = np.diag_indices(n)
    nk = n * m

    def unpack(z):
        K = z[:nk].reshape(n, m)
        L = np.zeros((n, n))
        L[tril] = z[nk:]
        L[diag] = np.exp(L[diag])
        return K, L

    def objective(z):
        K, L = unpack(z)
        return _vertex_bound(A_bar - K @ C_sub, corners, L)

    L0 = L0 / np.abs(np.diag(L0)).max()
    Lz = L0.copy()
    Lz[diag] = np.log(np.abs(L0[diag]))
    z0 = np.concatenate([K0.reshape(-1), Lz[tril]])

    rng = np.random.default_rng(seed)
    best_z, best = z0, start
    for r in range(restarts):
        z = z0 if r == 0 else z0 + rng.normal(0.0, 0.5, z0.size)
        val = objective(z)
        step = 0.25
        for _ in range(iterations):
            improved = False
            for j in rng.permutation(z.size):
                for sgn in (1.0, -1.0):
                    trial = z.copy()
                    trial[j] += sgn * step
                    tv = objective(trial)
                    if tv < val:
                        z, val, improved = trial, tv, True
                        break
            if val <= stop_at:
                break
            if not improved:
                step *= 0.5
                if step < 1e-5:
                    break
        if val < best:
            best_z, best = z, val
        if best <= stop_at:
            break
    K, L = unpack(best_z)
    return K, L, best


def _build(model, obs_id, kind, J_u, J_s, D, **synth_kwargs):
    C_sub = model.C[list(J_s), :]
    H = left_pseudoinverse(C_sub @ D)
    G_bar = np.eye(model.n) - D @ H @ C_sub
    A_bar = G_bar @ model.A
    K, cert = synthesize_gain(A_bar, C_sub, G_bar, model.slopes, **synth_kwargs)
    return ObserverSpec(
        id=obs_id,
        kind=kind,
        J_u=tuple(J_u),
        J_s=tuple(J_s),
        C_sub=C_sub,
        D=D,
        H=H,
        G_bar=G_bar,
        A_bar=A_bar,
        B_bar=G_bar @ model.B,
        b_bar=D @ H,
        K=K,
        certificate=cert,
    )


def build_complete_uio(model, subset, **synth_kwargs):
    """Observer driven by sensors ``subset.J_s`` that decouples the whole input matrix."""
    return _build(model, subset.id, "complete", (), subset.J_s, model.B, **synth_kwargs)


def build_partial_uio(model, pair, **synth_kwargs):
    """Observer for (J_u, J_s) that treats only actuators J_u as unknown inputs."""
    b = model.B[:, list(pair.J_u)]
    if matrix_rank(b) < len(pair.J_u):
        raise RankDeficient(matrix_rank(b), len(pair.J_u))
    return _build(model, pair.id, "partial", pair.J_u, pair.J_s, b, **synth_kwargs)


@dataclass(frozen=True)
class ContractionCheck:
    passed: bool
    value: float  # max vertex P-norm, recomputed
    lam: float
    violation: str = ""

    def __bool__(self):
        return self.passed


def p_norm(M, P):
    """Induced norm max_v sqrt((Mv)^T P (Mv) / v^T P v), via a generalized eigenproblem."""
    top = scipy.linalg.eigh(M.T @ P @ M, P, eigvals_only=True)[-1]
    return float(np.sqrt(max(top, 0.0)))


def verify_contraction(spec, gamma):
    """Recheck a certificate independently of the synthesis path."""
    cert = spec.certificate
    P = cert.P
    if not np.allclose(P, P.T, rtol=0, atol=1e-12) or np.linalg.eigvalsh(P).min() <= 0:
        return ContractionCheck(False, np.inf, cert.lam, "P is not positive definite")
    n = P.shape[0]
    slopes = _slopes(gamma, n)
    base = spec.A_bar - spec.K @ spec.C_sub
    value = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=n):
        value = max(value, p_norm(base + spec.G_bar @ np.diag(np.array(signs) * slopes), P))
    if not cert.lam < 1.0:
        return ContractionCheck(False, value, cert.lam, f"lambda {cert.lam:.6g} is not < 1")
    if value > cert.lam:
        return ContractionCheck(False, value, cert.lam, f"bound {value:.6g} exceeds lambda {cert.lam:.6g}")
    return ContractionCheck(True, value, cert.lam)


def spec_to_dict(spec):
    cert = spec.certificate
    return {
        "id": spec.id,
        "kind": spec.kind,
        "name": spec.name,
        "J_u": [i + 1 for i in spec.J_u],
        "J_s": [i + 1 for i in spec.J_s],
        "H": spec.H.tolist(),
        "G_bar": spec.G_bar.tolist(),
        "A_bar": spec.A_bar.tolist(),
        "B_bar": spec.B_bar.tolist(),
        "b_bar": spec.b_bar.tolist(),
        "K": spec.K.tolist(),
        "certificate": {"P": cert.P.tolist(), "lambda": cert.lam, "bound": cert.bound, "margin": cert.margin},
    }
