"""Empirical injectivity experiments for block second-moment measurements.

Three instruments:

* :func:`collision_search` hunts for a pair of distinct (non-sign-related)
  prior points whose mixed measurements coincide -- a witness against
  injectivity.
* :func:`brute_force_collision_oracle` checks all pairs on a dense latent
  grid, independent of the optimizer, for latent dimension <= 2.
* :func:`codimension_probe` finds a mixing that confuses a fixed pair
  (x, y) and estimates the local dimension of the set of such mixings from
  the rank of the constraint Jacobian on the manifold tangent space.

Verdict thresholds are scale-aware: measurements are quadratic, so a
residual is compared against ``residual_tol * s**2`` and a separation
against ``separation_tol * s`` with s the larger signal norm. This keeps
verdicts invariant under rescaling a candidate pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .gaussnewton import damped_gauss_newton
from .measurements import (
    BlockStructure,
    MixingMatrix,
    measurement_jacobian,
    second_moment_blocks,
    separable_measurement,
)
from .priors import (
    GeneratorNetwork,
    SparsePrior,
    as_rng,
    generator_forward,
    generator_jacobian,
)

__all__ = [
    "CollisionReport",
    "CodimensionEstimate",
    "collision_search",
    "brute_force_collision_oracle",
    "codimension_probe",
    "threshold_sweep",
    "solution_dim_bound",
    "regime_label",
    "SWEEP_CSV_HEADER",
]

#: Collision verdict thresholds (see module docstring for scaling).
RESIDUAL_TOL = 1e-8
SEPARATION_TOL = 1e-3

#: Weight of the separation penalty residual in the search objective.
PENALTY_WEIGHT = 1e2

SWEEP_CSV_HEADER = "N,M,regime,kind,seed,verdict,residual,separation"


@dataclass
class CollisionReport:
    """Outcome of a collision hunt.

    ``residual`` is the raw measurement gap ||P(x;A) - P(y;A)||_2 and
    ``separation`` is min(||x-y||, ||x+y||); ``scale`` is max(||x||, ||y||)
    against which the verdict thresholds were applied.
    """

    x: np.ndarray
    y: np.ndarray
    residual: float
    separation: float
    scale: float
    verdict: str                    # "collision" | "no-collision-found"
    restarts_used: int
    seed: object
    converged: bool = True

    def __post_init__(self):
        if self.verdict not in ("collision", "no-collision-found"):
            raise ValueError(f"bad verdict {self.verdict!r}")


@dataclass
class CodimensionEstimate:
    """Rank-based dimension estimate of the mixings confusing a fixed pair.

    ``solution`` is the mixing found on the manifold (None if no restart
    converged); the singular values of the constraint Jacobian there are
    kept so borderline ranks can be audited.
    """

    ambient_dim: int
    estimated_solution_dim: int | None
    theoretical_bound: int
    singular_values: np.ndarray
    converged: bool
    residual: float
    restarts_used: int
    solution: np.ndarray | None = None


def _is_collision(residual, separation, scale, residual_tol, separation_tol):
    return (
        scale > 0
        and residual <= residual_tol * scale**2
        and separation >= separation_tol * scale
    )


def _latent_parametrizations(prior, rng):
    """Yield (z0, forward, jacobian) triples, one per restart branch.

    Generator networks use Gaussian latent starts; sparse priors draw a
    fresh random support per restart and optimize its coefficients (the
    map is then linear in the latent).
    """
    if isinstance(prior, GeneratorNetwork):
        K = prior.latent_dim
        fwd = lambda z: generator_forward(prior, z)
        jac = lambda z: generator_jacobian(prior, z)
        while True:
            yield rng.normal(size=K), fwd, jac
    elif isinstance(prior, SparsePrior):
        M = prior.sparsity
        while True:
            support = np.sort(rng.choice(prior.N, size=M, replace=False))
            B = prior.basis[:, support]
            yield rng.normal(size=M), (lambda z, B=B: B @ z), (lambda z, B=B: B)
    else:
        raise TypeError(f"unsupported prior type {type(prior).__name__}")


def _prior_latent_dim(prior) -> int:
    if isinstance(prior, GeneratorNetwork):
        return prior.latent_dim
    if isinstance(prior, SparsePrior):
        return prior.sparsity
    raise TypeError(f"unsupported prior type {type(prior).__name__}")


class _PairTracker:
    """Keeps the best separated candidate seen across all GN iterates."""

    def __init__(self, separation_tol):
        self.separation_tol = separation_tol
        self.best = None        # (normalized residual, raw, sep, scale, x, y)
        self.fallback = None

    def update(self, x, y, raw_residual):
        s = max(np.linalg.norm(x), np.linalg.norm(y))
        sep = min(np.linalg.norm(x - y), np.linalg.norm(x + y))
        if s > 0 and sep >= self.separation_tol * s:
            nres = raw_residual / s**2
            if self.best is None or nres < self.best[0]:
                self.best = (nres, raw_residual, sep, s, x.copy(), y.copy())
        if self.fallback is None or raw_residual < self.fallback[1]:
            self.fallback = (np.inf, raw_residual, sep, s, x.copy(), y.copy())

    def result(self):
        return self.best if self.best is not None else self.fallback


def collision_search(
    prior,
    A,
    blocks: BlockStructure,
    restarts: int = 200,
    seed=0,
    residual_tol: float = RESIDUAL_TOL,
    separation_tol: float = SEPARATION_TOL,
    penalty: float = PENALTY_WEIGHT,
    max_iter: int = 500,
) -> CollisionReport:
    """Multi-start search for two prior points with equal mixed measurements.

    Minimizes a scale-free objective: the measurement gap normalized by the
    squared signal scale, plus a hinge penalty that pushes candidates away
    from the trivial x = +-y pairs. Deterministic given the seed. If a
    qualifying collision appears, remaining restarts are skipped.
    """
    rng = as_rng(seed)
    tracker = _PairTracker(separation_tol)
    spen = np.sqrt(penalty)
    params = _latent_parametrizations(prior, rng)
    any_converged = False
    restarts_used = restarts

    for rs in range(restarts):
        z1, fwd1, jac1 = next(params)
        z2, fwd2, jac2 = next(params)
        K = z1.shape[0]
        u0 = np.concatenate([z1, z2])

        def split(u):
            return fwd1(u[:K]), fwd2(u[K:])

        def residual(u):
            x, y = split(u)
            s = max(np.linalg.norm(x), np.linalg.norm(y))
            rm = separable_measurement(x, A, blocks) - separable_measurement(y, A, blocks)
            if s <= 0.0:
                return np.concatenate([rm, [spen * separation_tol]])
            sep = min(np.linalg.norm(x - y), np.linalg.norm(x + y))
            return np.concatenate([rm / s**2, [spen * max(0.0, separation_tol - sep / s)]])

        def jacobian(u):
            x, y = split(u)
            s = max(np.linalg.norm(x), np.linalg.norm(y))
            if s <= 0.0:
                return np.zeros((blocks.R + 1, 2 * K))
            Jx = measurement_jacobian(x, A, blocks) @ jac1(u[:K]) / s**2
            Jy = measurement_jacobian(y, A, blocks) @ jac2(u[K:]) / s**2
            Jm = np.hstack([Jx, -Jy])
            d_minus = np.linalg.norm(x - y)
            d_plus = np.linalg.norm(x + y)
            sep = min(d_minus, d_plus)
            row = np.zeros(2 * K)
            if sep > 1e-14 and separation_tol - sep / s > 0:
                sign = 1.0 if d_minus <= d_plus else -1.0
                diff = (x - sign * y) / sep
                # scale s frozen within one linearization
                row = (-spen / s) * np.concatenate(
                    [diff @ jac1(u[:K]), -sign * (diff @ jac2(u[K:]))]
                )
            return np.vstack([Jm, row[None, :]])

        def on_iterate(u, r):
            x, y = split(u)
            raw = np.linalg.norm(
                separable_measurement(x, A, blocks) - separable_measurement(y, A, blocks)
            )
            tracker.update(x, y, raw)

        res = damped_gauss_newton(
            residual, jacobian, u0, max_iter=max_iter, f_tol=1e-30, callback=on_iterate
        )
        any_converged = any_converged or res.converged

        cand = tracker.best
        if cand is not None and _is_collision(
            cand[1], cand[2], cand[3], 0.01 * residual_tol, 1.05 * separation_tol
        ):
            restarts_used = rs + 1
            break

    nres, raw, sep, s, x, y = tracker.result()
    hit = _is_collision(raw, sep, s, residual_tol, separation_tol)
    return CollisionReport(
        x=x,
        y=y,
        residual=float(raw),
        separation=float(sep),
        scale=float(s),
        verdict="collision" if hit else "no-collision-found",
        restarts_used=restarts_used,
        seed=seed,
        converged=bool(any_converged or hit),
    )


def brute_force_collision_oracle(
    prior,
    A,
    blocks: BlockStructure,
    grid_points_per_axis: int = 41,
    residual_tol: float = RESIDUAL_TOL,
    separation_tol: float = SEPARATION_TOL,
    latent_range: float = 1.0,
    chunk: int = 512,
) -> CollisionReport:
    """All-pairs collision check on a uniform latent grid over [-a, a]^K.

    Independent of the optimizer: evaluates the prior on every grid point
    (for sparse priors, on every support) and scans all point pairs for the
    minimal measurement gap among sufficiently separated pairs. Only latent
    dimension K <= 2 is supported.
    """
    K = _prior_latent_dim(prior)
    if K > 2:
        raise ValueError(f"oracle supports latent dimension <= 2, got {K}")
    if grid_points_per_axis > 200:
        raise ValueError("grid_points_per_axis capped at 200")

    axis = np.linspace(-latent_range, latent_range, grid_points_per_axis)
    if K == 1:
        lat = axis[:, None]
    else:
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        lat = np.column_stack([g1.ravel(), g2.ravel()])

    if isinstance(prior, GeneratorNetwork):
        X = np.stack([generator_forward(prior, z) for z in lat])
    else:
        from itertools import combinations

        cols = []
        for support in combinations(range(prior.N), prior.sparsity):
            B = prior.basis[:, list(support)]
            cols.append(lat @ B.T)
        X = np.concatenate(cols, axis=0)

    Ae = A.entries if isinstance(A, MixingMatrix) else np.asarray(A, dtype=float)
    S = X @ Ae.T
    starts = blocks.starts
    Meas = np.add.reduceat(S * S, starts, axis=1)

    norms2 = np.einsum("ij,ij->i", X, X)
    mnorm2 = np.einsum("ij,ij->i", Meas, Meas)
    P = X.shape[0]

    best = None       # (normalized residual, raw, sep, scale, i, j)
    for i0 in range(0, P, chunk):
        i1 = min(i0 + chunk, P)
        G = X[i0:i1] @ X.T                      # inner products
        d_minus2 = norms2[i0:i1, None] + norms2[None, :] - 2 * G
        d_plus2 = norms2[i0:i1, None] + norms2[None, :] + 2 * G
        sep = np.sqrt(np.maximum(np.minimum(d_minus2, d_plus2), 0.0))
        scale = np.sqrt(np.maximum(norms2[i0:i1, None], norms2[None, :]))
        MG = Meas[i0:i1] @ Meas.T
        res2 = np.maximum(mnorm2[i0:i1, None] + mnorm2[None, :] - 2 * MG, 0.0)
        ok = (sep >= separation_tol * scale) & (scale > 0)
        # only consider j > i to skip self/duplicate pairs
        jj = np.arange(P)[None, :]
        ok &= jj > np.arange(i0, i1)[:, None]
        if not ok.any():
            continue
        nres = np.full_like(res2, np.inf)
        nres[ok] = np.sqrt(res2[ok]) / scale[ok] ** 2
        flat = np.argmin(nres)
        ii, j = np.unravel_index(flat, nres.shape)
        if best is None or nres[ii, j] < best[0]:
            best = (
                float(nres[ii, j]),
                float(np.sqrt(res2[ii, j])),
                float(sep[ii, j]),
                float(scale[ii, j]),
                i0 + ii,
                j,
            )

    if best is None:
        # no separated pair exists on the grid (e.g. constant-zero prior)
        return CollisionReport(
            x=X[0],
            y=X[min(1, P - 1)],
            residual=0.0,
            separation=0.0,
            scale=float(np.sqrt(norms2.max())),
            verdict="no-collision-found",
            restarts_used=0,
            seed=None,
        )

    _, raw, sep, s, i, j = best
    hit = _is_collision(raw, sep, s, residual_tol, separation_tol)
    return CollisionReport(
        x=X[i],
        y=X[j],
        residual=raw,
        separation=sep,
        scale=s,
        verdict="collision" if hit else "no-collision-found",
        restarts_used=0,
        seed=None,
    )


# ---------------------------------------------------------------------------
# Codimension probe
# ---------------------------------------------------------------------------

def solution_dim_bound(manifold: str, N: int, R: int) -> int:
    """Upper bound on the dimension of the mixings confusing a generic pair.

    general-linear: N^2 - R (for the power-spectrum layout R = floor(N/2)+1,
    so this is N^2 - (N/2 + 1) for even N and N^2 - (N+1)/2 for odd N);
    special-orthogonal: dim SO(N) - (R - 1).
    """
    if manifold == "general-linear":
        return N * N - R
    if manifold == "special-orthogonal":
        return N * (N - 1) // 2 - (R - 1)
    raise ValueError(f"unknown manifold {manifold!r}")


def codimension_probe(
    x: np.ndarray,
    y: np.ndarray,
    manifold: str,
    blocks: BlockStructure,
    seed=0,
    restarts: int = 50,
    residual_target: float = 1e-11,
    rank_rtol: float = 1e-6,
    max_iter: int = 200,
) -> CodimensionEstimate:
    """Estimate dim{A on manifold : P(x;A) = P(y;A)} at a found solution.

    Runs projected Gauss-Newton to a mixing satisfying the R constraints,
    then subtracts the numerical rank of the constraint Jacobian (restricted
    to the manifold tangent space) from the tangent dimension. Orthogonal
    mixings preserve total energy, so on the special-orthogonal manifold y
    is rescaled to ||x|| first -- without that the constraint set is empty.
    """
    x = blocks.check_signal(np.asarray(x, dtype=float))
    y = blocks.check_signal(np.asarray(y, dtype=float))
    N, R = blocks.N, blocks.R
    if np.linalg.norm(x) == 0 or np.linalg.norm(y) == 0:
        raise ValueError("x and y must be nonzero")
    if manifold == "special-orthogonal":
        y = y * (np.linalg.norm(x) / np.linalg.norm(y))
    if min(np.linalg.norm(x - y), np.linalg.norm(x + y)) <= 1e-6 * np.linalg.norm(x):
        raise ValueError("x and y are equivalent up to sign; probe undefined")

    # joint normalization keeps tolerances meaningful and the set unchanged
    joint = max(np.linalg.norm(x), np.linalg.norm(y))
    x = x / joint
    y = y / joint

    bound = solution_dim_bound(manifold, N, R)
    block_of_row = np.repeat(np.arange(R), blocks.dims)
    D = np.outer(x, x) - np.outer(y, y)
    rng = as_rng(seed)

    def resid(A):
        return separable_measurement(x, A, blocks) - separable_measurement(y, A, blocks)

    if manifold == "general-linear":
        tangent_dim = N * N

        def jac(A):
            G = 2.0 * (A @ D)       # row j: gradient of its block constraint wrt w_j
            J = np.zeros((R, tangent_dim))
            for j in range(N):
                J[block_of_row[j], j * N:(j + 1) * N] = G[j]
            return J

        retract = lambda A, step: A + step.reshape(N, N)
        draw = lambda: rng.normal(size=(N, N))
    elif manifold == "special-orthogonal":
        iu = np.triu_indices(N, 1)
        tangent_dim = N * (N - 1) // 2

        def jac(A):
            G = 2.0 * (A @ D)
            H = G @ A.T             # H[j, c] = <grad_j, row c of A>
            J = np.zeros((R, tangent_dim))
            a_idx, b_idx = iu
            for col, (a, b) in enumerate(zip(a_idx, b_idx)):
                J[block_of_row[a], col] += H[a, b]
                J[block_of_row[b], col] -= H[b, a]
            return J

        def retract(A, step):
            S = np.zeros((N, N))
            S[iu] = step
            return expm(S - S.T) @ A

        from .priors import sample_mixing

        def draw():
            return sample_mixing(N, "special-orthogonal", rng).entries
    else:
        raise ValueError(f"unknown manifold {manifold!r}")

    last_res = np.inf
    for rs in range(restarts):
        A0 = draw()
        gn = damped_gauss_newton(
            resid, jac, A0, retract=retract, max_iter=max_iter, f_tol=residual_target**2
        )
        res_norm = float(np.sqrt(gn.f))
        last_res = min(last_res, res_norm)
        if res_norm <= residual_target:
            J = jac(gn.x)
            sv = np.linalg.svd(J, compute_uv=False)
            rank = int(np.sum(sv > rank_rtol * sv[0])) if sv.size and sv[0] > 0 else 0
            return CodimensionEstimate(
                ambient_dim=tangent_dim,
                estimated_solution_dim=tangent_dim - rank,
                theoretical_bound=bound,
                singular_values=sv,
                converged=True,
                residual=res_norm,
                restarts_used=rs + 1,
                solution=np.asarray(gn.x),
            )
    return CodimensionEstimate(
        ambient_dim=tangent_dim,
        estimated_solution_dim=None,
        theoretical_bound=bound,
        singular_values=np.array([]),
        converged=False,
        residual=float(last_res),
        restarts_used=restarts,
    )


# ---------------------------------------------------------------------------
# Threshold sweep
# ---------------------------------------------------------------------------

def regime_label(N: int, M: int, kind: str) -> str:
    """Which injectivity regime a cell (N, M) falls in for a mixing kind.

    general-linear: all signals for N >= 4M, generic signals for N >= 2M;
    special-orthogonal: N >= 4M + 2 and N >= 2M + 2 respectively.
    """
    if kind == "general-linear":
        all_thr, gen_thr = 4 * M, 2 * M
    elif kind == "special-orthogonal":
        all_thr, gen_thr = 4 * M + 2, 2 * M + 2
    else:
        raise ValueError(f"unknown mixing kind {kind!r}")
    if N >= all_thr:
        return "all-signals"
    if N >= gen_thr:
        return "generic-signals"
    return "below-threshold"


@dataclass
class SweepCell:
    N: int
    M: int
    regime: str
    kind: str
    collisions_found_fraction: float


@dataclass
class SweepResult:
    rows: list[dict]            # per-seed detail, CSV-ready
    cells: list[SweepCell]


def threshold_sweep(
    prior_family,
    N_range,
    M_range,
    kind: str,
    seeds,
    blocks_for=None,
    restarts: int = 50,
    **search_kwargs,
) -> SweepResult:
    """Tabulate collision fractions across an (N, M) grid.

    ``prior_family(N, M, seed)`` builds the prior for a cell;
    per (N, M, seed) a fresh mixing is drawn and a collision search run.
    Regimes are labeled from the mixing kind's thresholds; below-threshold
    cells are reported without any expectation attached.
    """
    from .measurements import block_structure_for_power_spectrum

    if blocks_for is None:
        blocks_for = block_structure_for_power_spectrum
    rows = []
    cells = []
    for N in N_range:
        for M in M_range:
            if M > N:
                continue
            regime = regime_label(N, M, kind)
            hits = 0
            for seed in seeds:
                prior = prior_family(N, M, seed)
                A = _cell_mixing(N, kind, seed)
                report = collision_search(
                    prior,
                    A,
                    blocks_for(N),
                    restarts=restarts,
                    seed=seed,
                    **search_kwargs,
                )
                hits += report.verdict == "collision"
                rows.append(
                    {
                        "N": N,
                        "M": M,
                        "regime": regime,
                        "kind": kind,
                        "seed": seed,
                        "verdict": report.verdict,
                        "residual": report.residual,
                        "separation": report.separation,
                    }
                )
            cells.append(SweepCell(N, M, regime, kind, hits / max(len(list(seeds)), 1)))
    return SweepResult(rows, cells)


def _cell_mixing(N, kind, seed):
    from .priors import sample_mixing

    # derive an independent stream so the mixing is decoupled from the search
    return sample_mixing(N, kind, np.random.SeedSequence((int(seed), 0xA)))
