"""Alternating nonlinear least-squares CPD with a trust-region Gauss-Newton step.

Each mode subproblem ``min 1/2 ||A V.T - T_(n)||_F^2`` is solved by
Gauss-Newton steps on the parameter vector ``a = vec(A)`` (column-major,
i.e. the factor columns stacked). With ``nonnegative=True`` the factor is
parameterized as ``A = a**2`` which keeps it elementwise nonnegative.

The Gauss-Newton matrix ``J.T J = D (G kron I) D`` with ``G = V.T V`` and
``D = diag(dA/da)`` is block diagonal over the rows of ``A`` (one ``R x R``
block per row), so the step is solved row by row with a batched
pseudo-inverse instead of an ``(I_n R)``-sized system.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from scipy.optimize import brentq

from .tensor import (
    KruskalModel,
    coproduct_matrix,
    frobenius_norm,
    gram_product,
    khatri_rao,
    kronecker,
    mttkrp,
    pseudo_inverse,
    reconstruct,
    unfold,
    vec,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverOptions",
    "SolverState",
    "FitReport",
    "residual_matrix",
    "square_map",
    "gn_jacobian",
    "gauss_newton_step",
    "trust_region_step",
    "trust_region_accept",
    "minimize_gn",
    "update_mode",
    "random_init",
    "fit_cpd",
]


@dataclass(frozen=True)
class SolverOptions:
    """Settings for :func:`fit_cpd` and the trust-region machinery."""

    rank: int = 2
    max_iter: int = 500
    tol: float = 1e-12
    nonnegative: bool = True
    seed: int = 0
    radius0: float = 1.0
    shrink: float = 0.25
    grow: float = 2.0
    max_radius: float = 1e6
    eta: float = 1e-3
    # accepted steps per mode per sweep
    inner_steps: int = 1
    # consecutive rejections before a mode gives up for this sweep
    max_rejections: int = 30
    # after each sweep, one trust-region step on all free modes at once
    joint: bool = True
    # the joint step forms a dense system; above this many parameters it is skipped
    joint_max_params: int = 1500
    # otherwise extrapolate along the sweep's parameter change (kept only if it lowers the objective)
    extrapolate: bool = True

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.radius0 > 0:
            raise ValueError("radius0 must be positive")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if not 0 < self.shrink < 1 or not self.grow >= 1:
            raise ValueError("need 0 < shrink < 1 <= grow")
        if self.inner_steps < 1 or self.max_rejections < 1:
            raise ValueError("inner_steps and max_rejections must be >= 1")


@dataclass(frozen=True)
class SolverState:
    """Trust-region bookkeeping for one subproblem."""

    radius: float
    iteration: int = 0
    objective: float = float("nan")
    step_norm: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("trust radius must be positive")


@dataclass
class FitReport:
    rel_error: float
    iterations: int
    reason: str  # "tolerance" | "max_iter" | "stagnation"
    # objective 1/2||T - model||^2 after the initialization and every accepted step
    history: list[float] = field(default_factory=list, repr=False)


# --------------------------------------------------------------------------
# residual, parameterization, derivatives


def residual_matrix(k: KruskalModel, t: np.ndarray, mode: int) -> np.ndarray:
    """``A^(n) V^{n}.T - T_(n)``."""
    t = np.asarray(t, dtype=np.float64)
    if k.shape != t.shape:
        raise ValueError(f"model shape {k.shape} does not match tensor shape {t.shape}")
    return k.factors[mode] @ coproduct_matrix(k, mode).T - unfold(t, mode)


def square_map(a: np.ndarray) -> np.ndarray:
    return np.square(a)


def _params(factor: np.ndarray, nonnegative: bool) -> np.ndarray:
    return np.sqrt(np.maximum(factor, 0.0)) if nonnegative else np.array(factor)


def _factor(params: np.ndarray, nonnegative: bool) -> np.ndarray:
    return square_map(params) if nonnegative else params


def gn_jacobian(
    k: KruskalModel,
    t: np.ndarray,
    mode: int,
    a: np.ndarray,
    nonnegative: bool = True,
) -> np.ndarray:
    """Jacobian of ``vec(F_(n))`` with respect to the parameter vector ``a``.

    ``a`` is the column-major vectorization of the mode parameters (length
    ``I_n * R``). The residual is linear in the factor, so the Jacobian is
    ``kron(V, I)`` times the square-map chain factor ``diag(2a)``.
    """
    t = np.asarray(t, dtype=np.float64)
    if k.shape != t.shape:
        raise ValueError(f"model shape {k.shape} does not match tensor shape {t.shape}")
    a = np.asarray(a, dtype=np.float64).ravel()
    n_rows = t.shape[mode]
    if a.size != n_rows * k.rank:
        raise ValueError(f"parameter vector has length {a.size}, expected {n_rows * k.rank}")
    j = kronecker(coproduct_matrix(k, mode), np.eye(n_rows))
    if nonnegative:
        j = j * (2.0 * a)[None, :]
    return j


def gauss_newton_step(jac: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``p = -(J.T J)^+ J.T f``, the minimizer of ``||f + J p||``."""
    jac = np.atleast_2d(np.asarray(jac, dtype=np.float64))
    f = np.asarray(f, dtype=np.float64).ravel()
    return -pseudo_inverse(jac.T @ jac) @ (jac.T @ f)


# --------------------------------------------------------------------------
# trust region


def trust_region_step(
    blocks: np.ndarray,
    grad: np.ndarray,
    radius: float,
    gn_step: np.ndarray | None = None,
    eig: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Minimize the Gauss-Newton model ``g.p + p.H p / 2`` over ``||p|| <= radius``.

    ``blocks`` holds the diagonal blocks of ``H`` with shape ``(B, k, k)`` and
    ``grad`` the matching pieces of ``g`` with shape ``(B, k)``. The
    Gauss-Newton step is returned unchanged when it fits inside the region;
    otherwise the shift ``lam`` with ``||(H + lam I)^-1 g|| = radius`` is
    located by a bracketed root search on the eigen-decomposed blocks.
    ``eig`` may carry a precomputed ``np.linalg.eigh(blocks)``.
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if gn_step is None:
        gn_step = -(pseudo_inverse(blocks) @ grad[..., None])[..., 0]
    gnorm = float(np.linalg.norm(grad))
    if float(np.linalg.norm(gn_step)) <= radius or gnorm == 0.0:
        return gn_step
    w, q = np.linalg.eigh(blocks) if eig is None else eig
    w = np.maximum(w, 0.0)
    c = np.einsum("bij,bi->bj", q, grad)

    def excess(log_lam: float) -> float:
        return float(np.log(np.linalg.norm(c / (w + np.exp(log_lam))) / radius))

    # ||p(lam)|| <= ||g|| / lam, so the boundary is crossed by lam_hi (margin against rounding)
    hi = np.log(gnorm / radius) + 0.1
    lo = hi - 80.0
    if excess(lo) <= 0.0:
        log_lam = lo
    else:
        log_lam = brentq(excess, lo, hi, xtol=1e-10, rtol=1e-12)
    return -np.einsum("bij,bj->bi", q, c / (w + np.exp(log_lam)))


def trust_region_accept(
    state: SolverState,
    p: np.ndarray,
    actual: float,
    predicted: float,
    options: SolverOptions = SolverOptions(),
) -> tuple[bool, SolverState]:
    """Accept or reject a step from the ratio ``actual / predicted``.

    The step is accepted when the ratio exceeds ``options.eta``. A rejected
    step shrinks the radius. An accepted step with ratio above 0.75 that
    reached the boundary grows it, up to ``options.max_radius``.
    """
    if predicted < 0:
        raise ValueError("predicted reduction must be nonnegative")
    pnorm = float(np.linalg.norm(p))
    if predicted == 0.0:
        rho = -np.inf if pnorm > 0 else 0.0
    else:
        rho = actual / predicted
    radius = state.radius
    accept = bool(rho > options.eta)
    if rho < options.eta or not accept:
        radius = radius * options.shrink
    elif rho > 0.75 and pnorm >= (1.0 - 1e-8) * radius:
        radius = min(radius * options.grow, options.max_radius)
    radius = max(radius, np.finfo(np.float64).tiny)
    new = replace(
        state,
        radius=radius,
        iteration=state.iteration + 1,
        objective=state.objective - actual if accept else state.objective,
        step_norm=pnorm if accept else 0.0,
    )
    return accept, new


def minimize_gn(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    options: SolverOptions = SolverOptions(),
    max_iter: int = 100,
    tol: float = 1e-14,
) -> tuple[np.ndarray, SolverState]:
    """Dense trust-region Gauss-Newton for a generic least-squares problem.

    Used for small standalone problems; the CPD path uses the row-blocked
    solve in :func:`update_mode`.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f = residual(x)
    state = SolverState(radius=options.radius0, objective=0.5 * float(f @ f))
    for _ in range(max_iter):
        jac = jacobian(x)
        grad = jac.T @ f
        if np.linalg.norm(grad) <= tol * max(1.0, np.linalg.norm(f)):
            break
        hess = jac.T @ jac
        p = trust_region_step(hess[None], grad[None], state.radius)[0]
        jp = jac @ p
        predicted = max(-(float(f @ jp) + 0.5 * float(jp @ jp)), 0.0)
        f_new = residual(x + p)
        actual = 0.5 * float(f @ f) - 0.5 * float(f_new @ f_new)
        accept, state = trust_region_accept(state, p, actual, predicted, options)
        if accept:
            x = x + p
            f = f_new
            if np.linalg.norm(p) <= tol * max(1.0, np.linalg.norm(x)):
                break
    return x, state


# --------------------------------------------------------------------------
# per-mode update


@dataclass
class _ModeResult:
    factor: np.ndarray
    state: SolverState
    accepted: int
    reductions: list[float]
    step_sq: float


def _blocked_gn_step(gram: np.ndarray, chain: np.ndarray, grad_factor: np.ndarray) -> np.ndarray:
    """Row-wise ``-(D G D)^+ D g`` with ``D = diag(chain[i])``.

    For a row whose scaling ``d`` is nonzero on the index set ``S`` the
    pseudo-inverse solution is ``p_S = -(G_SS^+ g_S) / d_S`` and zero
    elsewhere. Factoring the scaling out keeps the rank cutoff on ``G`` and
    away from the ratio of small to large entries of ``d``, which would
    otherwise pin any parameter that gets close to zero.
    """
    step = np.zeros_like(grad_factor)
    nz = chain != 0
    full = np.all(nz, axis=1)
    if np.any(full):
        step[full] = -(grad_factor[full] @ pseudo_inverse(gram)) / chain[full]
    for i in np.flatnonzero(~full):
        s = nz[i]
        if np.any(s):
            sub = pseudo_inverse(gram[np.ix_(s, s)])
            step[i, s] = -(sub @ grad_factor[i, s]) / chain[i, s]
    return step


def _mode_steps(
    factors: list[np.ndarray],
    mtt: np.ndarray,
    mode: int,
    options: SolverOptions,
    state: SolverState,
) -> _ModeResult:
    nonneg = options.nonnegative
    factor = factors[mode]
    gram = gram_product(factors, mode)
    params = _params(factor, nonneg)

    accepted = 0
    rejections = 0
    reductions: list[float] = []
    step_sq = 0.0
    while accepted < options.inner_steps and rejections < options.max_rejections:
        grad_factor = factor @ gram - mtt
        chain = 2.0 * params if nonneg else np.ones_like(params)
        grad = chain * grad_factor
        # per-row R x R blocks of J.T J
        blocks = chain[:, :, None] * gram[None, :, :] * chain[:, None, :]
        full_step = _blocked_gn_step(gram, chain, grad_factor)
        if not np.any(full_step):
            break
        while rejections < options.max_rejections:
            step = trust_region_step(blocks, grad, state.radius, full_step)
            hp = (blocks @ step[:, :, None])[:, :, 0]
            predicted = max(-(np.sum(grad * step) + 0.5 * np.sum(step * hp)), 0.0)
            new_params = params + step
            new_factor = _factor(new_params, nonneg)
            delta = new_factor - factor
            # exact change of the objective; avoids cancellation against ||T||^2
            actual = -(np.sum(delta * grad_factor) + 0.5 * np.sum(delta * (delta @ gram)))
            ok, state = trust_region_accept(state, step, float(actual), float(predicted), options)
            if ok:
                accepted += 1
                rejections = 0
                reductions.append(float(actual))
                step_sq += float(np.sum(step * step))
                params, factor = new_params, new_factor
                break
            rejections += 1
    return _ModeResult(factor, state, accepted, reductions, step_sq)


def update_mode(
    k: KruskalModel,
    t: np.ndarray,
    mode: int,
    options: SolverOptions,
    fixed_modes=frozenset(),
    state: SolverState | None = None,
) -> tuple[KruskalModel, SolverState]:
    """One trust-region Gauss-Newton pass on the factor of ``mode``.

    Returns the updated model and the subproblem's trust-region state, which
    can be fed back in on the next call.
    """
    if mode in fixed_modes:
        raise ValueError(f"mode {mode} is fixed")
    t = np.asarray(t, dtype=np.float64)
    if k.shape != t.shape:
        raise ValueError(f"model shape {k.shape} does not match tensor shape {t.shape}")
    if state is None:
        state = SolverState(radius=options.radius0)
    factors = [np.array(f) for f in k.factors]
    res = _mode_steps(factors, mttkrp(t, factors, mode), mode, options, state)
    return k.replace(mode, res.factor), res.state


# --------------------------------------------------------------------------
# full fit


class _SweepContractions:
    """MTTKRPs for a full sweep from two passes over the data.

    The modes are split into a left and a right group. Contracting the data
    with the Khatri-Rao product of the right group serves every left mode,
    and vice versa; each partial result is reused until one of the factors
    it was built from changes.
    """

    def __init__(self, t: np.ndarray):
        self.t = t
        shape = t.shape
        n = len(shape)
        sizes = [int(np.prod(shape[:k])) + int(np.prod(shape[k:])) for k in range(1, n)]
        self.split = 1 + int(np.argmin(sizes))
        self.mat = t.reshape((int(np.prod(shape[: self.split])), -1), order="F")
        self._cache: dict[str, tuple[tuple[int, ...], np.ndarray]] = {}

    def objective(self, factors: list[np.ndarray]) -> float:
        """``0.5 ||T - [[factors]]||^2`` from the residual itself."""
        k = self.split
        left = khatri_rao(*factors[:k][::-1])
        right = khatri_rao(*factors[k:][::-1])
        return 0.5 * float(np.sum((self.mat - left @ right.T) ** 2))

    def __call__(self, factors: list[np.ndarray], versions: list[int], mode: int) -> np.ndarray:
        shape = self.t.shape
        k = self.split
        r = factors[0].shape[1]
        if mode < k:
            key, modes = "left", list(range(k, len(shape)))
        else:
            key, modes = "right", list(range(k))
        stamp = tuple(versions[m] for m in modes)
        hit = self._cache.get(key)
        if hit is None or hit[0] != stamp:
            kr = khatri_rao(*[factors[m] for m in reversed(modes)])
            if key == "left":
                part = (self.mat @ kr).reshape(shape[:k] + (r,), order="F")
            else:
                part = (kr.T @ self.mat).T.reshape(shape[k:] + (r,), order="F")
            hit = (stamp, part)
            self._cache[key] = hit
        part = hit[1]
        own = list(range(k)) if key == "left" else list(range(k, len(shape)))
        letters = "abcdefghijklmnopqrstuvwxy"
        sub = "".join(letters[i] for i in range(len(own)))
        j = own.index(mode)
        operands = [part] + [factors[m] for m in own if m != mode]
        spec = sub + "z," + ",".join(f"{letters[i]}z" for i in range(len(own)) if i != j)
        spec = spec.rstrip(",") + f"->{letters[j]}z"
        return np.einsum(spec, *operands)


def _joint_normal_matrix(factors: list[np.ndarray], free: list[int]) -> np.ndarray:
    """``J.T J`` of the model with respect to all free factors (factor space).

    Parameters are ordered mode by mode, each factor vectorized column-major.
    Diagonal blocks are ``kron(Gamma_m, I)``; the ``(m, n)`` block has entry
    ``A_m[i, s] A_n[j, r] Gamma_mn[r, s]`` at row ``(i, r)``, column ``(j, s)``,
    where ``Gamma`` is the Hadamard product of the Gram matrices of the
    remaining modes.
    """
    r = factors[0].shape[1]
    grams = [f.T @ f for f in factors]

    def hadamard(skip) -> np.ndarray:
        out = np.ones((r, r))
        for k, g in enumerate(grams):
            if k not in skip:
                out = out * g
        return out

    sizes = [factors[m].shape[0] * r for m in free]
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    jtj = np.empty((offs[-1], offs[-1]))
    for a, m in enumerate(free):
        sa = slice(offs[a], offs[a + 1])
        jtj[sa, sa] = np.kron(hadamard({m}), np.eye(factors[m].shape[0]))
        for b in range(a + 1, len(free)):
            n = free[b]
            sb = slice(offs[b], offs[b + 1])
            blk = np.einsum("is,jr,rs->risj", factors[m], factors[n], hadamard({m, n}))
            blk = blk.reshape(sizes[a], sizes[b])
            jtj[sa, sb] = blk
            jtj[sb, sa] = blk.T
    return jtj


class _JointSystem:
    """Gauss-Newton model for a step on all free factors at once.

    Vectors live in "stacked" form: the free parameter matrices on top of
    each other, shape ``(sum I_m, R)``. In that layout

        H = C (Dg + V K V.T) C

    where ``C`` is the square-map chain factor, ``Dg`` is block diagonal
    with the ``R x R`` block ``Gamma_m`` on every row of mode ``m``, and the
    coupling between modes is carried by ``V`` (``F R^2`` columns for ``F``
    free modes) and a small symmetric ``K`` built from the Hadamard products
    of Gram matrices. Shifted systems ``H + lam I`` are solved with the
    Woodbury identity, so no dense ``P x P`` matrix is ever formed.
    """

    def __init__(self, factors, free, mtts, nonnegative: bool):
        r = factors[0].shape[1]
        grams = [f.T @ f for f in factors]

        def hadamard(skip) -> np.ndarray:
            out = np.ones((r, r))
            for k, g in enumerate(grams):
                if k not in skip:
                    out = out * g
            return out

        self.free = list(free)
        self.rows = [factors[m].shape[0] for m in free]
        self.params = np.vstack([_params(factors[m], nonnegative) for m in free])
        self.chain = 2.0 * self.params if nonnegative else np.ones_like(self.params)
        grad_factor = np.vstack([factors[m] @ hadamard({m}) - mtts[m] for m in free])
        self.grad = self.chain * grad_factor
        gammas = np.concatenate(
            [np.broadcast_to(hadamard({m}), (n, r, r)) for m, n in zip(free, self.rows)]
        )
        # diagonal blocks of H, one per stacked row
        self.blocks = self.chain[:, :, None] * gammas * self.chain[:, None, :]

        n_free = len(free)
        q = n_free * r * r
        total = sum(self.rows)
        # column (m, s, t) of V is c_m[i, t] A_m[i, s] on the rows of mode m, slot t
        v = np.zeros((total, r, q))
        k = np.zeros((q, q))
        off = 0
        for a, (m, n) in enumerate(zip(free, self.rows)):
            fac = factors[m]
            for s_ in range(r):
                for t_ in range(r):
                    col = a * r * r + s_ * r + t_
                    v[off : off + n, t_, col] = self.chain[off : off + n, t_] * fac[:, s_]
            for b, mb in enumerate(free):
                if b == a:
                    continue
                g = hadamard({m, mb})
                for s_ in range(r):
                    for t_ in range(r):
                        # pairs (m, s, t) with (mb, t, s), weight Gamma_{m mb}[t, s]
                        k[a * r * r + s_ * r + t_, b * r * r + t_ * r + s_] = g[t_, s_]
            off += n
        self.v = v
        self.k = k
        self.eye_r = np.eye(r)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = np.einsum("nij,nj->ni", self.blocks, x)
        vtx = np.einsum("nrq,nr->q", self.v, x)
        return out + np.einsum("nrq,q->nr", self.v, self.k @ vtx)

    def solve(self, lam: float, rhs: np.ndarray) -> np.ndarray:
        d = self.blocks + lam * self.eye_r
        dinv = np.linalg.inv(d)
        y = np.einsum("nij,nj->ni", dinv, rhs)
        z = np.einsum("nij,njq->niq", dinv, self.v)
        vtz = np.einsum("nrq,nrp->qp", self.v, z)
        small = np.eye(self.k.shape[0]) + self.k @ vtz
        w = np.linalg.solve(small, self.k @ np.einsum("nrq,nr->q", self.v, y))
        return y - np.einsum("nrq,q->nr", z, w)

    def shifted_step(self, lam: float) -> np.ndarray:
        rhs = -self.grad
        x = self.solve(lam, rhs)
        # one round of refinement against the exact operator
        resid = rhs - self.matvec(x) - lam * x
        return x + self.solve(lam, resid)


def _joint_step(
    factors: list[np.ndarray],
    free: list[int],
    mtts: dict[int, np.ndarray],
    contract: "_SweepContractions",
    objective: float,
    options: SolverOptions,
    state: SolverState,
) -> tuple[list[np.ndarray], SolverState, float, float]:
    """Trust-region Gauss-Newton step on every free factor simultaneously.

    The unconstrained step uses a shift of ``1e-12`` times the largest
    diagonal entry of ``H`` (which is singular through the scaling
    indeterminacy); outside the region the shift solving
    ``||p(lam)|| = radius`` is found by a bracketed root search. Returns the
    factors, the updated state, the objective reduction and the squared
    parameter step (both zero when nothing was accepted).
    """
    nonneg = options.nonnegative
    system = _JointSystem(factors, free, mtts, nonneg)
    gnorm = float(np.linalg.norm(system.grad))
    if gnorm == 0.0:
        return factors, state, 0.0, 0.0
    diag_max = float(np.max(np.einsum("nii->ni", system.blocks)))
    lam0 = 1e-12 * max(diag_max, np.finfo(np.float64).tiny)
    base = system.shifted_step(lam0)
    base_norm = float(np.linalg.norm(base))
    for _ in range(options.max_rejections):
        radius = state.radius
        if base_norm <= radius:
            step = base
        else:
            def excess(log_lam: float) -> float:
                return float(np.log(np.linalg.norm(system.shifted_step(np.exp(log_lam))) / radius))

            lo = np.log(lam0)
            hi = max(np.log(gnorm / radius), lo) + 1.0
            while excess(hi) > 0.0:
                hi += 2.0
            log_lam = brentq(excess, lo, hi, xtol=1e-6, rtol=1e-8)
            step = system.shifted_step(np.exp(log_lam))
        hp = system.matvec(step)
        predicted = max(-(float(np.sum(system.grad * step)) + 0.5 * float(np.sum(step * hp))), 0.0)
        new_params = system.params + step
        trial = list(factors)
        off = 0
        for m, n in zip(free, system.rows):
            trial[m] = _factor(new_params[off : off + n], nonneg)
            off += n
        value = contract.objective(trial)
        actual = objective - value
        ok, state = trust_region_accept(state, step, actual, predicted, options)
        if ok:
            return trial, state, actual, float(np.sum(step * step))
    return factors, state, 0.0, 0.0


def random_init(shape, rank: int, seed) -> list[np.ndarray]:
    """Factors with entries drawn uniformly from (0, 1)."""
    rng = np.random.default_rng(seed)
    return [rng.uniform(0.0, 1.0, size=(n, rank)) for n in shape]


def fit_cpd(
    t: np.ndarray,
    options: SolverOptions,
    fixed: Mapping[int, np.ndarray] | None = None,
    init: KruskalModel | None = None,
) -> tuple[KruskalModel, FitReport]:
    """Fit a rank-``options.rank`` CP model to ``t`` by alternating NLS.

    Parameters
    ----------
    t : ndarray
        Data tensor.
    options : SolverOptions
        Rank, stopping rule, constraint flag, seed and trust-region constants.
    fixed : mapping of mode -> matrix, optional
        Factors held constant during the fit. They are returned unmodified.
    init : KruskalModel, optional
        Starting point; by default factors are drawn from ``random_init``.

    Returns
    -------
    model : KruskalModel
    report : FitReport

    Notes
    -----
    A sweep updates every free mode once. Iteration stops when the relative
    error changes by less than ``tol`` between sweeps, when the relative
    parameter step ``||da|| / ||a||`` drops below ``tol``, when no mode can
    make an accepted step, or after ``max_iter`` sweeps.
    """
    t = np.asfortranarray(t, dtype=np.float64)
    if t.size == 0:
        raise ValueError("cannot fit an empty tensor")
    fixed = dict(fixed or {})
    for m, f in fixed.items():
        if not 0 <= m < t.ndim:
            raise ValueError(f"fixed mode {m} out of range")
        if np.shape(f) != (t.shape[m], options.rank):
            raise ValueError(
                f"fixed factor for mode {m} has shape {np.shape(f)}, "
                f"expected {(t.shape[m], options.rank)}"
            )

    if init is None:
        factors = random_init(t.shape, options.rank, options.seed)
    else:
        if init.shape != t.shape or init.rank != options.rank:
            raise ValueError("initial model does not match tensor shape / rank")
        factors = [np.array(f) for f in init.factors]
    for m, f in fixed.items():
        factors[m] = np.array(f, dtype=np.float64)
    if options.nonnegative:
        for m in range(t.ndim):
            if m not in fixed:
                factors[m] = np.abs(factors[m])

    free = [m for m in range(t.ndim) if m not in fixed]
    tnorm = frobenius_norm(t)
    scale = tnorm if tnorm > 0 else 1.0
    objective = 0.5 * frobenius_norm(reconstruct(KruskalModel(factors)) - t) ** 2
    history = [objective]
    states = {m: SolverState(radius=options.radius0, objective=objective) for m in free}

    contract = _SweepContractions(t) if t.ndim > 1 else None
    versions = [0] * t.ndim

    prev_err = np.sqrt(2.0 * objective) / scale
    reason = "max_iter"
    it = 0
    # extrapolation step is it ** (1 / power); repeated failures make it more cautious
    power, failures = 3.0, 0
    joint_state = SolverState(radius=options.radius0, objective=objective)
    for it in range(1, options.max_iter + 1):
        start = {m: _params(factors[m], options.nonnegative) for m in free}
        step_sq = 0.0
        param_sq = 0.0
        any_accepted = False
        for m in free:
            mtt = contract(factors, versions, m) if contract else mttkrp(t, factors, m)
            res = _mode_steps(factors, mtt, m, options, states[m])
            if res.accepted:
                versions[m] += 1
            factors[m] = res.factor
            states[m] = res.state
            for red in res.reductions:
                objective -= red
                history.append(objective)
            step_sq += res.step_sq
            param_sq += float(np.sum(_params(res.factor, options.nonnegative) ** 2))
            any_accepted |= res.accepted > 0
        n_params = sum(t.shape[m] for m in free) * options.rank
        if options.joint and contract is not None and n_params <= options.joint_max_params:
            mtts = {m: contract(factors, versions, m) for m in free}
            factors, joint_state, red, sq = _joint_step(
                factors, free, mtts, contract, objective, options, joint_state
            )
            if red > 0:
                for m in free:
                    versions[m] += 1
                objective -= red
                history.append(objective)
                step_sq += sq
                any_accepted = True
        elif options.extrapolate and contract is not None and any_accepted and it > 1:
            jump = it ** (1.0 / power)
            trial = list(factors)
            for m in free:
                p = _params(factors[m], options.nonnegative)
                trial[m] = _factor(p + jump * (p - start[m]), options.nonnegative)
            value = contract.objective(trial)
            if value < objective:
                factors = trial
                for m in free:
                    versions[m] += 1
                objective = value
                history.append(objective)
            else:
                failures += 1
                if failures >= 4:
                    power, failures = power + 1.0, 0
        err = np.sqrt(2.0 * max(objective, 0.0)) / scale
        if not any_accepted:
            reason = "stagnation"
            break
        if abs(prev_err - err) < options.tol:
            reason = "tolerance"
            break
        if param_sq > 0 and np.sqrt(step_sq / param_sq) < options.tol:
            reason = "tolerance"
            break
        prev_err = err

    model = KruskalModel(factors)
    rel = frobenius_norm(reconstruct(model) - t) / scale
    log.debug("fit_cpd: %s after %d sweeps, rel error %.3e", reason, it, rel)
    return model, FitReport(rel_error=rel, iterations=it, reason=reason, history=history)
