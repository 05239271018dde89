"""Kernel-mixture sampling policy with lazily decayed particle weights.

The policy after ``n`` steps is

    q_n(x) = (1 - lam) * sum_i W_{i,n} K_{b_i}(x - X_i) / sum_i W_{i,n} + lam * q0(x)

with effective weights ``W_{i,n} = w_i^eta * gamma_i * prod_{j=i+1}^n (1 - gamma_j)``.
Multiplying every past weight by ``(1 - gamma)`` at each step would cost
O(n). Instead each particle stores a base score

    s_i = w_i^eta * gamma_i / Psi_i,   Psi_i = prod_{j<=i} (1 - gamma_j),

so that ``W_{i,n} = s_i * Psi_n``. The common factor ``Psi_n`` cancels in
every normalized quantity and is tracked only as a running log. Scores
live in log space; the values held in the prefix-sum tree are
``exp(log s_i - offset)`` for a shared ``offset`` that is moved whenever
the largest stored value leaves ``[1e-100, 1e100]``.
"""

from __future__ import annotations

import math

import numpy as np

from .kernels import Kernel
from .targets import ExplorationDensity

__all__ = [
    "DegenerateWeightsError",
    "FenwickTree",
    "ParticleStore",
    "MixturePolicy",
    "SubsampledProposal",
    "insert_particle",
    "select_particle",
    "policy_density",
    "policy_sample",
    "subsample_proposal",
    "total_mass",
]

RESCALE_HIGH = 1e100
RESCALE_LOW = 1e-100


class DegenerateWeightsError(ValueError):
    """No particle carries positive weight."""


class FenwickTree:
    """Append-only binary indexed tree over nonnegative floats.

    Supports O(log n) appends and vectorized inverse-CDF search. Node
    ``i`` (1-based) holds the sum of values ``(i - lowbit(i), i]``; it is
    built from the sum of its children, never by subtracting prefix
    sums, so no cancellation occurs.
    """

    def __init__(self, capacity: int = 1024):
        self._tree = np.zeros(max(int(capacity), 2) + 1)
        self._size = 0

    def __len__(self):
        return self._size

    def _grow(self, needed):
        cap = len(self._tree) - 1
        if needed <= cap:
            return
        while cap < needed:
            cap *= 2
        # tree nodes depend only on lower indices, so old nodes stay valid
        new = np.zeros(cap + 1)
        new[: self._size + 1] = self._tree[: self._size + 1]
        self._tree = new

    def append(self, values):
        """Append values (scalar or 1-D array) at the end."""
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("tree values must be finite and nonnegative")
        self._grow(self._size + values.size)
        tree = self._tree
        i = self._size
        for v in values.tolist():
            i += 1
            low = i & -i
            step = 1
            while step < low:
                v += tree[i - step]
                step <<= 1
            tree[i] = v
        self._size = i

    def rebuild(self, values):
        """Replace the content with `values` in O(n)."""
        values = np.asarray(values, dtype=float)
        self._size = 0
        self._tree = np.zeros(max(len(self._tree) - 1, values.size, 2) + 1)
        tree = self._tree
        n = values.size
        tree[1 : n + 1] = values
        t = tree.tolist()
        for i in range(1, n + 1):
            j = i + (i & -i)
            if j <= n:
                t[j] += t[i]
        tree[: n + 1] = t[: n + 1]
        self._size = n

    def prefix_sum(self, i: int) -> float:
        """Sum of the first `i` values."""
        s = 0.0
        tree = self._tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def total(self) -> float:
        return self.prefix_sum(self._size)

    def search(self, targets):
        """0-based indices ``k`` with ``prefix(k) <= t < prefix(k + 1)``.

        Vectorized over `targets`; results are clipped to the last index.
        """
        t = np.array(targets, dtype=float, copy=True)
        pos = np.zeros(t.shape, dtype=np.int64)
        n = self._size
        tree = self._tree
        step = 1 << (n.bit_length() - 1) if n else 0
        while step:
            nxt = pos + step
            ok = nxt <= n
            vals = np.where(ok, tree[np.minimum(nxt, n)], np.inf)
            take = vals <= t
            pos = np.where(take, nxt, pos)
            t = np.where(take, t - vals, t)
            step >>= 1
        return np.minimum(pos, n - 1)


class ParticleStore:
    """Particles with raw and effective weights.

    Parameters
    ----------
    dim : int
    eta : float
        Learning rate; raw weights enter the policy as ``w ** eta``.
    kernel : Kernel, optional
        Defaults to the Gaussian kernel in dimension `dim`.
    """

    def __init__(self, dim: int, eta: float, kernel: Kernel | None = None, capacity: int = 1024):
        if not 0.0 <= eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        self.dim = int(dim)
        self.eta = float(eta)
        self.kernel = kernel if kernel is not None else Kernel("gaussian", self.dim)
        if self.kernel.dim != self.dim:
            raise ValueError("kernel dimension does not match the store")
        cap = max(int(capacity), 16)
        self._x = np.empty((cap, self.dim))
        self._b = np.empty(cap)
        self._logw = np.empty(cap)
        self._logs = np.empty(cap)
        self._step = np.empty(cap, dtype=np.int64)
        self._n = 0
        self.tree = FenwickTree(cap)
        self.decay_log = 0.0  # log Psi_n
        self.rescale_offset = 0.0
        self._max_value = 0.0
        self.steps = 0
        self.rescale_count = 0

    def __len__(self):
        return self._n

    # -- read-only views ---------------------------------------------------

    @property
    def positions(self):
        return self._x[: self._n]

    @property
    def bandwidths(self):
        return self._b[: self._n]

    @property
    def log_raw_weights(self):
        return self._logw[: self._n]

    @property
    def raw_weights(self):
        return np.exp(self.log_raw_weights)

    @property
    def log_base_scores(self):
        return self._logs[: self._n]

    @property
    def step_index(self):
        """Algorithm step at which each particle was inserted (1-based)."""
        return self._step[: self._n]

    def log_effective_weights(self):
        """``log W_{i,n}`` for all stored particles."""
        return self.log_base_scores + self.decay_log

    def effective_weights(self):
        return np.exp(self.log_effective_weights())

    def normalized_weights(self):
        """``W_{i,n} / sum_k W_{k,n}``; the global decay factor cancels."""
        ls = self.log_base_scores
        if ls.size == 0 or not np.any(np.isfinite(ls)):
            raise DegenerateWeightsError("no particle with positive weight")
        p = np.exp(ls - ls.max())
        return p / p.sum()

    def tree_values(self):
        """Values currently held in the prefix-sum tree."""
        return np.exp(self.log_base_scores - self.rescale_offset)

    # -- updates -----------------------------------------------------------

    def _reserve(self, extra):
        need = self._n + extra
        cap = self._x.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name in ("_x", "_b", "_logw", "_logs", "_step"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def insert(self, x, log_raw_w, gamma: float, b: float, batch_scale: int | None = None):
        """Insert one algorithm step worth of particles.

        All particles of the batch share `gamma` and `b`; each gets effective
        weight ``w^eta * gamma / m`` with ``m = batch_scale`` (the batch
        size by default), and every older particle is decayed by
        ``(1 - gamma)`` exactly once.

        Parameters
        ----------
        x : array_like, shape (m, d) or (d,)
        log_raw_w : array_like, shape (m,) or scalar
            Logarithms of the raw importance weights ``f_u(x) / q(x)``.
        gamma : float in (0, 1)
        b : float > 0
        batch_scale : int, optional
        """
        if not 0.0 < gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
        if not b > 0:
            raise ValueError(f"bandwidth must be positive, got {b}")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        log_raw_w = np.atleast_1d(np.asarray(log_raw_w, dtype=float))
        m = x.shape[0]
        if x.shape[1] != self.dim or log_raw_w.shape != (m,):
            raise ValueError("inconsistent particle batch shapes")
        if np.any(np.isnan(log_raw_w)) or np.any(log_raw_w == np.inf):
            raise ValueError("raw weights must be finite and nonnegative")
        scale = m if batch_scale is None else int(batch_scale)
        if scale < 1:
            raise ValueError("batch_scale must be a positive integer")

        self.decay_log += math.log1p(-gamma)
        self.steps += 1
        if self.eta == 0.0:
            powered = np.zeros(m)  # w^0 = 1, even for w = 0
        else:
            powered = self.eta * log_raw_w
        log_s = powered + math.log(gamma) - math.log(scale) - self.decay_log

        self._reserve(m)
        sl = slice(self._n, self._n + m)
        self._x[sl] = x
        self._b[sl] = b
        self._logw[sl] = log_raw_w
        self._logs[sl] = log_s
        self._step[sl] = self.steps
        self._n += m

        finite = log_s[np.isfinite(log_s)]
        new_max = finite.max() if finite.size else -np.inf
        if self._n == m:
            # first batch fixes the offset
            self.rescale_offset = new_max if np.isfinite(new_max) else 0.0
            self._max_value = 0.0
            self.tree.rebuild(self.tree_values())
            self._max_value = float(self.tree_values().max())
            return
        values = np.exp(log_s - self.rescale_offset)
        vmax = float(values.max()) if m else 0.0
        if vmax > RESCALE_HIGH:
            self.renormalize()
        else:
            self.tree.append(values)
            self._max_value = max(self._max_value, vmax)
            if 0.0 < self._max_value < RESCALE_LOW:
                self.renormalize()

    def renormalize(self):
        """Move the log-scale offset so the largest tree value is 1."""
        ls = self.log_base_scores
        top = ls.max() if ls.size else -np.inf
        if np.isfinite(top):
            self.rescale_offset = float(top)
        values = self.tree_values()
        self.tree.rebuild(values)
        self._max_value = float(values.max()) if values.size else 0.0
        self.rescale_count += 1

    # -- queries -----------------------------------------------------------

    def total_mass(self) -> float:
        """``sum_i W_{i,n}``, equal to the integral of the unnormalized policy."""
        if self._n == 0:
            return 0.0
        return self.tree.total() * math.exp(self.rescale_offset + self.decay_log)

    def select(self, rng: np.random.Generator, size: int | None = None):
        """Draw particle indices with probability ``W_{i,n} / sum W``.

        Consumes one ``rng.random(size)`` call. O(log n) per index.
        """
        total = self.tree.total() if self._n else 0.0
        if not total > 0:
            raise DegenerateWeightsError("cannot select from a store with zero total weight")
        u = rng.random() if size is None else rng.random(int(size))
        idx = self.tree.search(np.asarray(u) * total)
        return int(idx) if size is None else idx


class _KernelMixtureMixin:
    """Shared density/sampling for ``(1 - lam) * kernel mixture + lam * q0``."""

    kernel: Kernel
    q0: ExplorationDensity
    lam: float

    # subclasses provide these
    def _components(self):
        raise NotImplementedError

    def _draw_components(self, rng, k):
        raise NotImplementedError

    def log_mixture_density(self, x, chunk_elems: int = 2_000_000):
        """Log of the normalized kernel-mixture part at points `x`."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        centers, bandwidths, log_p = self._components()
        return _log_kernel_mixture(self.kernel, x, centers, bandwidths, log_p, chunk_elems)

    def log_density(self, x):
        """Log policy density at one point ``(d,)`` or many ``(n, d)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[-1] != self.q0.dim:
            raise ValueError(f"expected points of dimension {self.q0.dim}")
        log_q0 = self.q0.log_density(pts)
        lam = self.lam
        if lam >= 1.0 or self._empty():
            out = log_q0
        else:
            log_mix = self.log_mixture_density(pts)
            if lam <= 0.0:
                out = log_mix
            else:
                out = np.logaddexp(math.log1p(-lam) + log_mix, math.log(lam) + log_q0)
        return out[0] if single else out

    def density(self, x):
        return np.exp(self.log_density(x))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw from the policy.

        RNG consumption order, frozen for reproducibility: one
        ``rng.random(m)`` for the mixture coins, then the component
        indices, then one kernel draw for the kernel part, then one q0 draw
        for the exploration part. Draws whose coin falls below ``lam`` come
        from q0.
        """
        m = 1 if size is None else int(size)
        coins = rng.random(m)
        from_q0 = coins < self.lam
        k = int(m - from_q0.sum())
        out = np.empty((m, self.q0.dim))
        if k:
            if self._empty():
                raise DegenerateWeightsError("policy has no particles but lam < 1")
            centers, bandwidths = self._draw_components(rng, k)
            noise = self.kernel.sample(rng, k)
            out[~from_q0] = centers + bandwidths[:, None] * noise
        if m - k:
            out[from_q0] = self.q0.sample(rng, m - k)
        return out[0] if size is None else out


class MixturePolicy(_KernelMixtureMixin):
    """The full policy ``q_n`` built on a :class:`ParticleStore`.

    Density evaluation costs O(n) kernel evaluations per point; sampling
    costs O(log n) per draw.
    """

    def __init__(self, store: ParticleStore, q0: ExplorationDensity, lam: float):
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if q0.dim != store.dim:
            raise ValueError("q0 and store dimensions differ")
        self.store = store
        self.q0 = q0
        self.lam = float(lam)
        self.kernel = store.kernel

    def _empty(self):
        return len(self.store) == 0

    def _components(self):
        s = self.store
        with np.errstate(divide="ignore"):
            log_p = np.log(s.normalized_weights())
        return s.positions, s.bandwidths, log_p

    def _draw_components(self, rng, k):
        idx = self.store.select(rng, k)
        return self.store.positions[idx], self.store.bandwidths[idx]

    def subsample(self, ell: int, rng: np.random.Generator) -> "SubsampledProposal":
        return subsample_proposal(self, ell, rng)


class SubsampledProposal(_KernelMixtureMixin):
    """Equal-weight kernel mixture over resampled particles, blended with q0.

    ``q*(x) = (1 - lam) * (1/ell) * sum_k K_{b_k}(x - X_k) + lam * q0(x)``.
    Density evaluation costs O(ell).
    """

    def __init__(self, centers, bandwidths, q0: ExplorationDensity, lam: float, kernel: Kernel):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.bandwidths = np.atleast_1d(np.asarray(bandwidths, dtype=float))
        self.q0 = q0
        self.lam = float(lam)
        self.kernel = kernel
        self.indices = None

    def _empty(self):
        return self.centers.shape[0] == 0

    def _components(self):
        ell = self.centers.shape[0]
        return self.centers, self.bandwidths, np.full(ell, -math.log(ell))

    def _draw_components(self, rng, k):
        j = rng.integers(0, self.centers.shape[0], size=k)
        return self.centers[j], self.bandwidths[j]


def _log_kernel_mixture(kernel, x, centers, bandwidths, log_p, chunk_elems=2_000_000):
    """``log sum_i p_i K_{b_i}(x - c_i)`` for each row of `x`, streamed over components."""
    m, d = x.shape
    keep = np.isfinite(log_p)
    if not np.all(keep):
        centers, bandwidths, log_p = centers[keep], bandwidths[keep], log_p[keep]
    n = centers.shape[0]
    if n == 0:
        return np.full(m, -np.inf)
    # per-component constant: log p_i - d log b_i (- d/2 log 2 pi for Gaussian)
    log_c = log_p - d * np.log(bandwidths)
    inv_b = 1.0 / bandwidths
    if kernel.family != "gaussian":
        return _log_mixture_stable(kernel, x, centers, inv_b, log_c, chunk_elems)
    log_c = log_c - 0.5 * d * np.log(2.0 * np.pi)
    half_inv_b2 = 0.5 * inv_b * inv_b
    # log_c bounds every term from above, so it serves as a common shift
    shift = log_c.max()
    rel_c = log_c - shift
    acc = np.zeros(m)
    step = max(1, chunk_elems // max(1, m))
    for start in range(0, n, step):
        stop = min(n, start + step)
        sq = np.zeros((m, stop - start))
        for j in range(d):
            diff = x[:, j, None] - centers[None, start:stop, j]
            sq += diff * diff
        sq *= -half_inv_b2[None, start:stop]
        sq += rel_c[None, start:stop]
        np.exp(sq, out=sq)
        acc += sq.sum(axis=1)
    out = np.empty(m)
    ok = acc > 1e-280
    out[ok] = shift + np.log(acc[ok])
    if not np.all(ok):
        # far from every particle: redo these rows with a per-row shift
        out[~ok] = _log_mixture_stable(kernel, x[~ok], centers, inv_b, log_c + 0.5 * d * np.log(2.0 * np.pi), chunk_elems)
    return out


def _log_mixture_stable(kernel, x, centers, inv_b, log_c, chunk_elems):
    m, d = x.shape
    n = centers.shape[0]
    step = max(1, chunk_elems // max(1, m * d))
    run_max = np.full(m, -np.inf)
    run_sum = np.zeros(m)
    for start in range(0, n, step):
        stop = min(n, start + step)
        u = (x[:, None, :] - centers[None, start:stop, :]) * inv_b[None, start:stop, None]
        a = kernel.log_density(u) + log_c[None, start:stop]
        new_max = np.maximum(run_max, a.max(axis=1))
        safe = np.where(np.isfinite(new_max), new_max, 0.0)
        with np.errstate(invalid="ignore"):
            run_sum = run_sum * np.exp(run_max - safe) + np.exp(a - safe[:, None]).sum(axis=1)
        run_max = new_max
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(run_max), run_max + np.log(run_sum), -np.inf)


# ---------------------------------------------------------------------------
# functional surface


def insert_particle(store: ParticleStore, x, raw_w, gamma, b, batch_scale=None):
    """Insert particles given raw (not log) importance weights."""
    with np.errstate(divide="ignore"):
        log_w = np.log(np.asarray(raw_w, dtype=float))
    store.insert(x, log_w, gamma, b, batch_scale)


def select_particle(store: ParticleStore, rng, size=None):
    return store.select(rng, size)


def policy_density(policy, x):
    return policy.density(x)


def policy_sample(policy, rng, size=None):
    return policy.sample(rng, size)


def total_mass(store: ParticleStore) -> float:
    return store.total_mass()


def subsample_proposal(policy: MixturePolicy, ell: int, rng: np.random.Generator) -> SubsampledProposal:
    """Resample `ell` particles (with replacement, W-weighted) into an equal-weight proposal.

    Consumes one ``rng.random(ell)`` call.
    """
    if ell < 1:
        raise ValueError("ell must be a positive integer")
    idx = policy.store.select(rng, int(ell))
    prop = SubsampledProposal(
        policy.store.positions[idx],
        policy.store.bandwidths[idx],
        policy.q0,
        policy.lam,
        policy.kernel,
    )
    prop.indices = idx
    return prop
