"""Bayesian hologram fitting: posterior construction, staged ensemble
sampling with random pixel subsets, posterior summaries, and sequential
time-series tracking.

The likelihood treats each pixel as an independent Gaussian measurement
of the forward model with a common noise level sigma.  Because the
fringe pattern is highly redundant, the likelihood can be evaluated on a
fixed random subset of pixels instead of the full frame at a large
speedup and little loss of precision; a subset is drawn once per
sampling stage, never per step.

A fit runs a schedule of stages: early stages use small subsets and
short chains to localize the posterior cheaply, and each later stage
re-seeds its walkers from the previous stage's final ensemble.  Only the
final stage's post-burn-in samples are returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import DetectorGrid, Hologram
from .forward import AlphaModel, field_at_points_batch, intensity_from_field
from .priors import NoiseModel, Prior, log_prior
from .sampling import EnsembleRun, run_ensemble

__all__ = [
    "Stage",
    "Strategy",
    "tempered_strategy",
    "random_subset",
    "Posterior",
    "log_likelihood",
    "SampleSet",
    "run_inference",
    "ParamSummary",
    "Summary",
    "summarize",
    "marginal_histogram",
    "TrackingError",
    "track_timeseries",
]

_INIT_SPREAD = 1e-2  # walker init ball, in units of the prior scale
_RESEED_JITTER = 1e-4  # stage-to-stage jitter, in units of the prior scale
_MAX_INIT_TRIES = 200


@dataclass(frozen=True)
class Stage:
    """One sampling stage: pixel-subset size and chain length.

    ``subset`` of None means the strategy's final subset size; walkers
    default to the strategy's walker count.
    """

    subset: int | None
    n_steps: int
    n_walkers: int | None = None

    def __post_init__(self):
        if self.subset is not None and self.subset < 1:
            raise ValueError(f"stage subset must be >= 1, got {self.subset}")
        if self.n_steps < 1:
            raise ValueError(f"stage steps must be >= 1, got {self.n_steps}")


@dataclass(frozen=True)
class Strategy:
    """Sampling settings: ensemble size, chain length, pixel subset, seed.

    ``stages`` lists optional cheap localization stages run before the
    final one; the final stage uses ``subset_count`` (or
    ``subset_fraction``) pixels and ``n_steps`` steps, of which the first
    ``burn_fraction`` are discarded.  The master ``seed`` makes the whole
    fit reproducible.
    """

    n_walkers: int = 100
    n_steps: int = 1000
    subset_count: int | None = None
    subset_fraction: float | None = None
    stages: tuple[Stage, ...] = ()
    burn_fraction: float = 0.5
    seed: int = 0
    stretch_a: float = 2.0

    def __post_init__(self):
        if self.n_walkers < 2:
            raise ValueError(f"need at least 2 walkers, got {self.n_walkers}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.subset_count is not None and self.subset_fraction is not None:
            raise ValueError("give subset_count or subset_fraction, not both")
        if self.subset_count is not None and self.subset_count < 1:
            raise ValueError(f"subset_count must be >= 1, got {self.subset_count}")
        if self.subset_fraction is not None and not 0.0 < self.subset_fraction <= 1.0:
            raise ValueError(
                f"subset_fraction must lie in (0, 1], got {self.subset_fraction}"
            )
        if not 0.0 <= self.burn_fraction < 1.0:
            raise ValueError(f"burn_fraction must lie in [0, 1), got {self.burn_fraction}")

    def final_subset(self, total_pixels: int) -> int:
        if self.subset_count is not None:
            if self.subset_count > total_pixels:
                raise ValueError(
                    f"subset_count {self.subset_count} exceeds {total_pixels} pixels"
                )
            return self.subset_count
        if self.subset_fraction is not None:
            return max(1, int(round(self.subset_fraction * total_pixels)))
        return total_pixels

    def plan(self, total_pixels: int) -> list[tuple[int, int, int]]:
        """Resolved (subset, walkers, steps) triples; the last is the final stage."""
        final = self.final_subset(total_pixels)
        out = []
        for st in self.stages:
            count = final if st.subset is None else min(st.subset, total_pixels)
            out.append((count, st.n_walkers or self.n_walkers, st.n_steps))
        out.append((final, self.n_walkers, self.n_steps))
        return out


def tempered_strategy(
    subset_count: int | None = None,
    subset_fraction: float | None = None,
    n_walkers: int = 100,
    n_steps: int = 1000,
    seed: int = 0,
) -> Strategy:
    """Default staged schedule: two cheap localization stages (50 then 200
    pixels) before the final stage at the configured subset size.

    The stage sizes are tunable defaults, not magic numbers; they assume a
    hologram of at least a few thousand pixels.
    """
    return Strategy(
        n_walkers=n_walkers,
        n_steps=n_steps,
        subset_count=subset_count,
        subset_fraction=subset_fraction,
        stages=(Stage(subset=50, n_steps=200), Stage(subset=200, n_steps=300)),
        burn_fraction=0.5,
        seed=seed,
    )


def random_subset(grid: DetectorGrid, count: int, seed) -> np.ndarray:
    """Uniform random pixel subset, without replacement, sorted, deterministic.

    Returns flat indices into the row-major (ny, nx) intensity array.  The
    same subset is intended to be reused for an entire sampling stage.
    """
    total = grid.npixels
    if not 1 <= count <= total:
        raise ValueError(f"subset count must lie in [1, {total}], got {count}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(total, size=count, replace=False))


class _Decoder:
    """Maps free-parameter batches to per-sphere field arrays, vectorized."""

    def __init__(self, spec):
        from .scatterers import _parse_name  # shared name grammar

        ns = spec.n_spheres
        base = {f: np.zeros(ns) for f in "xyzrn"}
        alpha_fixed = 1.0
        targets = []
        for e in spec.entries:
            kind, idx, fld = _parse_name(e.name)
            if kind == "alpha":
                alpha_fixed = e.value
            else:
                base[fld][idx] = e.value
            if e.free:
                targets.append((kind, idx, fld))
        self._targets = targets
        self._base = base
        self._alpha_fixed = alpha_fixed
        self._imag = np.asarray(spec.index_imag, dtype=float)
        self._ns = ns

    def decode(self, v: np.ndarray):
        """(B, d) batch -> centers (B, ns, 3), radii (B, ns), n (B, ns) complex,
        alpha (B,), all in physical units."""
        nb = v.shape[0]
        ns = self._ns
        centers = np.empty((nb, ns, 3))
        centers[:, :, 0] = self._base["x"]
        centers[:, :, 1] = self._base["y"]
        centers[:, :, 2] = self._base["z"]
        radii = np.broadcast_to(self._base["r"], (nb, ns)).copy()
        n_re = np.broadcast_to(self._base["n"], (nb, ns)).copy()
        alpha = np.full(nb, self._alpha_fixed)
        axis = {"x": 0, "y": 1, "z": 2}
        for col, (kind, idx, fld) in enumerate(self._targets):
            if kind == "alpha":
                alpha = v[:, col]
            elif fld in axis:
                centers[:, idx, axis[fld]] = v[:, col]
            elif fld == "r":
                radii[:, idx] = v[:, col]
            else:
                n_re[:, idx] = v[:, col]
        indices = n_re + 1j * self._imag
        return centers, radii, indices, alpha

    def valid(self, centers, radii, alpha) -> np.ndarray:
        """(B,) physical-validity mask: r > 0, z > r, alpha in (0, 2], no overlap."""
        ok = np.all(radii > 0, axis=1)
        ok &= np.all(centers[:, :, 2] > radii, axis=1)
        ok &= (alpha > 0) & (alpha <= 2.0)
        ns = self._ns
        for i in range(ns):
            for j in range(i + 1, ns):
                gap = np.linalg.norm(centers[:, i, :] - centers[:, j, :], axis=1)
                ok &= gap >= radii[:, i] + radii[:, j]
        return ok


class Posterior:
    """Log posterior of an AlphaModel given a hologram, noise level, and
    pixel subset; evaluates whole walker batches at once.

    Pixel coordinates and data values for the subset are cached at
    construction, so repeated per-step evaluations carry no setup cost.
    """

    def __init__(
        self,
        model: AlphaModel,
        data: Hologram,
        noise: NoiseModel,
        subset: np.ndarray | None = None,
        priors=None,
    ):
        self.model = model
        self.noise = noise
        self.priors = _resolve_priors(model, priors)
        lam = model.optics.wavelength
        x_all, y_all = data.grid.pixel_positions()
        if subset is None:
            subset = np.arange(data.grid.npixels)
        else:
            subset = np.asarray(subset, dtype=int)
        self.subset = subset
        self._px = x_all[subset] / lam
        self._py = y_all[subset] / lam
        self._data = data.intensity.ravel()[subset]
        self._decoder = _Decoder(model.spec)
        sigma = noise.sigma
        self._inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma)
        self._log_norm = len(subset) * math.log(sigma * math.sqrt(2.0 * math.pi))

    @property
    def n_free(self) -> int:
        return len(self.priors)

    def log_likelihood(self, v: np.ndarray) -> np.ndarray:
        """(B,) Gaussian log likelihood; -inf for invalid scatterer rows."""
        v = np.atleast_2d(np.asarray(v, dtype=float))
        centers, radii, indices, alpha = self._decoder.decode(v)
        ok = self._decoder.valid(centers, radii, alpha)
        out = np.full(v.shape[0], -np.inf)
        if np.any(ok):
            lam = self.model.optics.wavelength
            ex, ey = field_at_points_batch(
                self._px,
                self._py,
                centers[ok] / lam,
                radii[ok] / lam,
                indices[ok] / self.model.optics.medium_index,
                self.model.optics,
            )
            h = intensity_from_field(ex, ey, alpha[ok], self.model.optics.polarization)
            resid = h - self._data[None, :]
            out[ok] = (
                -np.sum(resid * resid, axis=1) * self._inv_two_sigma_sq - self._log_norm
            )
        return out

    def log_posterior(self, v: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(np.asarray(v, dtype=float))
        lp = np.asarray(log_prior(self.priors, v), dtype=float)
        out = np.full(v.shape[0], -np.inf)
        ok = np.isfinite(lp)
        if np.any(ok):
            out[ok] = lp[ok] + self.log_likelihood(v[ok])
        return out

    __call__ = log_posterior


def _resolve_priors(model: AlphaModel, priors) -> tuple[Prior, ...]:
    names = model.spec.free_names()
    if priors is None:
        resolved = model.spec.priors()
        if any(p is None for p in resolved):
            raise ValueError("model spec lacks priors for some free parameters")
        return resolved
    if isinstance(priors, dict):
        missing = [n for n in names if n not in priors]
        if missing:
            raise ValueError(f"missing priors for {missing}")
        unknown = [n for n in priors if n not in names]
        if unknown:
            raise ValueError(f"priors given for unknown/free-less parameters {unknown}")
        return tuple(priors[n] for n in names)
    priors = tuple(priors)
    if len(priors) != len(names):
        raise ValueError(f"got {len(priors)} priors for {len(names)} free parameters")
    return priors


def log_likelihood(
    model: AlphaModel,
    params: np.ndarray,
    data: Hologram,
    noise: NoiseModel,
    subset: np.ndarray | None = None,
) -> float:
    """Gaussian log likelihood of one parameter vector on a pixel subset.

    -sum over subset of (data - model)^2 / (2 sigma^2), minus
    |subset| * log(sigma sqrt(2 pi)).  Invalid scatterer parameters map
    to -inf rather than raising.
    """
    post = Posterior(model, data, noise, subset=subset)
    if len(np.atleast_1d(params)) != model.spec.n_free:
        raise ValueError(
            f"expected {model.spec.n_free} free parameters, got {len(np.atleast_1d(params))}"
        )
    return float(post.log_likelihood(np.atleast_2d(params))[0])


@dataclass(frozen=True)
class SampleSet:
    """Posterior samples with full provenance.

    ``samples`` has shape (walker, step, param) and holds only retained
    (post-burn-in, final-stage) states; ``log_posterior`` matches its
    first two axes.  The strategy, model, priors, and noise captured here
    are sufficient to re-run the fit.
    """

    names: tuple[str, ...]
    samples: np.ndarray
    log_posterior: np.ndarray
    acceptance: np.ndarray
    strategy: Strategy
    model: AlphaModel
    priors: tuple[Prior, ...]
    noise: NoiseModel

    def __post_init__(self):
        k, s, d = self.samples.shape
        if self.log_posterior.shape != (k, s):
            raise ValueError("log_posterior shape does not match samples")
        if len(self.names) != d:
            raise ValueError("names length does not match parameter count")
        if not np.all(np.isfinite(self.log_posterior)):
            raise ValueError("retained samples must have finite log posterior")

    @property
    def n_walkers(self) -> int:
        return self.samples.shape[0]

    @property
    def n_steps(self) -> int:
        return self.samples.shape[1]

    def flat(self) -> np.ndarray:
        """(walkers * steps, d) view, walker-major."""
        k, s, d = self.samples.shape
        return self.samples.reshape(k * s, d)

    def flat_log_posterior(self) -> np.ndarray:
        return self.log_posterior.reshape(-1)


def _init_walkers(post: Posterior, guess, n_walkers, rng) -> np.ndarray:
    """Start ensemble: a tight ball around the guess, every walker at a
    finite posterior."""
    guess = np.asarray(guess, dtype=float)
    scale = np.array([p.scale for p in post.priors])
    if not np.isfinite(log_prior(post.priors, guess)):
        raise ValueError("initial guess lies outside the prior support")
    state = np.empty((n_walkers, len(guess)))
    need = np.ones(n_walkers, dtype=bool)
    for _ in range(_MAX_INIT_TRIES):
        n_need = int(need.sum())
        if n_need == 0:
            break
        draw = guess + rng.normal(0.0, _INIT_SPREAD, size=(n_need, len(guess))) * scale
        state[need] = draw
        lp = post.log_posterior(state[need])
        still = np.zeros(n_walkers, dtype=bool)
        still[np.flatnonzero(need)[~np.isfinite(lp)]] = True
        need = still
    else:
        raise RuntimeError(
            "could not find finite-posterior starting points near the initial guess"
        )
    return state


def _reseed_walkers(prev: EnsembleRun, n_walkers, post: Posterior, rng) -> np.ndarray:
    """Resample the previous stage's final ensemble (weighted by its log
    posterior) and jitter, keeping every walker at a finite posterior
    under the new stage's subset."""
    last = prev.chain[:, -1, :]
    last_lp = prev.log_post[:, -1]
    w = np.exp(last_lp - last_lp.max())
    w /= w.sum()
    scale = np.array([p.scale for p in post.priors])
    idx = rng.choice(len(last), size=n_walkers, replace=True, p=w)
    state = last[idx] + rng.normal(0.0, _RESEED_JITTER, size=(n_walkers, last.shape[1])) * scale
    lp = post.log_posterior(state)
    for _ in range(_MAX_INIT_TRIES):
        bad = ~np.isfinite(lp)
        if not np.any(bad):
            break
        n_bad = int(bad.sum())
        idx = rng.choice(len(last), size=n_bad, replace=True, p=w)
        state[bad] = last[idx] + rng.normal(
            0.0, _RESEED_JITTER, size=(n_bad, last.shape[1])
        ) * scale
        lp[bad] = post.log_posterior(state[bad])
    else:
        raise RuntimeError("could not re-seed walkers at finite posterior")
    return state


def run_inference(
    model: AlphaModel,
    data: Hologram,
    priors=None,
    noise: NoiseModel | None = None,
    strategy: Strategy | None = None,
) -> SampleSet:
    """Sample the posterior of the model's free parameters given a hologram.

    ``priors`` may be None (use the spec's), a name->Prior dict, or a
    sequence aligned with the free-parameter order.  The returned
    SampleSet holds the final stage's post-burn-in samples and everything
    needed to reproduce the run.
    """
    if noise is None:
        raise ValueError("a NoiseModel is required")
    if strategy is None:
        strategy = tempered_strategy()
    resolved = _resolve_priors(model, priors)
    n_free = model.spec.n_free
    if n_free == 0:
        raise ValueError("model has no free parameters")
    plan = strategy.plan(data.grid.npixels)
    for count, walkers, _ in plan:
        if walkers < 2 * n_free:
            raise ValueError(
                f"{walkers} walkers < 2 * {n_free} free parameters; increase n_walkers"
            )
    master = np.random.SeedSequence(strategy.seed)
    # fixed spawn order: [init, (subset, sampler, reseed) per stage]
    children = master.spawn(1 + 3 * len(plan))
    init_rng = np.random.default_rng(children[0])
    run = None
    for k, (count, walkers, steps) in enumerate(plan):
        subset = random_subset(data.grid, count, children[1 + 3 * k])
        post = Posterior(model, data, noise, subset=subset, priors=resolved)
        sampler_rng = np.random.default_rng(children[2 + 3 * k])
        if k == 0:
            state = _init_walkers(post, model.spec.guess(), walkers, init_rng)
        else:
            reseed_rng = np.random.default_rng(children[3 + 3 * (k - 1)])
            state = _reseed_walkers(run, walkers, post, reseed_rng)
        run = run_ensemble(
            post.log_posterior, state, steps, sampler_rng, a=strategy.stretch_a
        )
    keep = slice(int(strategy.burn_fraction * plan[-1][2]), None)
    return SampleSet(
        names=model.spec.free_names(),
        samples=run.chain[:, keep, :].copy(),
        log_posterior=run.log_post[:, keep].copy(),
        acceptance=run.acceptance,
        strategy=strategy,
        model=model,
        priors=resolved,
        noise=noise,
    )


@dataclass(frozen=True)
class ParamSummary:
    """Marginal statistics of one parameter."""

    name: str
    mean: float
    std: float
    median: float
    intervals: dict[float, tuple[float, float]]


@dataclass(frozen=True)
class Summary:
    """Posterior summary: per-parameter marginals, correlations, MAP sample."""

    names: tuple[str, ...]
    params: tuple[ParamSummary, ...]
    correlation: np.ndarray
    map_params: np.ndarray
    map_log_posterior: float
    n_samples: int

    def __getitem__(self, name: str) -> ParamSummary:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def means(self) -> dict[str, float]:
        return {p.name: p.mean for p in self.params}


def summarize(s: SampleSet, ci_levels=(0.68, 0.95, 0.99)) -> Summary:
    """Pooled posterior statistics over all retained samples.

    Central credible intervals are sample quantiles at (1 -/+ level)/2;
    the MAP is the retained sample with the highest log posterior.
    """
    flat = s.flat()
    if flat.shape[0] == 0:
        raise ValueError("sample set is empty")
    means = flat.mean(axis=0)
    stds = flat.std(axis=0)
    medians = np.median(flat, axis=0)
    params = []
    for i, name in enumerate(s.names):
        ivals = {}
        for lvl in ci_levels:
            lo, hi = np.quantile(flat[:, i], [(1 - lvl) / 2, (1 + lvl) / 2])
            ivals[lvl] = (float(lo), float(hi))
        params.append(
            ParamSummary(
                name=name,
                mean=float(means[i]),
                std=float(stds[i]),
                median=float(medians[i]),
                intervals=ivals,
            )
        )
    centered = flat - means
    cov = centered.T @ centered / flat.shape[0]
    sd = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(sd, sd)
    corr[~np.isfinite(corr)] = 0.0
    np.fill_diagonal(corr, 1.0)
    best = int(np.argmax(s.flat_log_posterior()))
    return Summary(
        names=s.names,
        params=tuple(params),
        correlation=corr,
        map_params=flat[best].copy(),
        map_log_posterior=float(s.flat_log_posterior()[best]),
        n_samples=flat.shape[0],
    )


def marginal_histogram(s: SampleSet, name: str, bins: int = 50):
    """(bin_edges, counts) of one parameter's pooled marginal."""
    if name not in s.names:
        raise KeyError(f"unknown parameter {name!r}")
    col = s.flat()[:, s.names.index(name)]
    counts, edges = np.histogram(col, bins=bins)
    return edges, counts


class TrackingError(RuntimeError):
    """A frame failed to fit; carries the completed part of the trajectory."""

    def __init__(self, frame_index: int, cause: Exception, trajectory):
        super().__init__(f"fit of frame {frame_index} failed: {cause}")
        self.frame_index = frame_index
        self.cause = cause
        self.trajectory = trajectory


def track_timeseries(
    frames,
    model: AlphaModel,
    priors=None,
    noise: NoiseModel | None = None,
    strategy: Strategy | None = None,
) -> list[Summary]:
    """Fit an ordered sequence of holograms, frame by frame.

    Frame 0 starts from the model's initial guess; each later frame
    starts from the previous frame's posterior means with every prior
    recentered there (widths preserved).  Frames are processed strictly
    in order.  Returns one Summary per frame; on failure raises
    :class:`TrackingError` carrying the partial trajectory.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    if strategy is None:
        strategy = tempered_strategy()
    trajectory: list[Summary] = []
    current_model = model
    current_priors = priors
    for t, frame in enumerate(frames):
        if t == 0:
            frame_strategy = strategy
        else:
            derived = int(
                np.random.SeedSequence((strategy.seed, t)).generate_state(1, np.uint64)[0]
            )
            frame_strategy = replace(strategy, seed=derived)
        try:
            samples = run_inference(
                current_model, frame, current_priors, noise, frame_strategy
            )
            summary = summarize(samples)
        except Exception as exc:  # noqa: BLE001 - partial trajectory contract
            raise TrackingError(t, exc, trajectory) from exc
        trajectory.append(summary)
        centers = summary.means()
        current_model = AlphaModel(
            scatterer=current_model.scatterer,
            spec=current_model.spec.recentered(centers),
            optics=current_model.optics,
            theory=current_model.theory,
        )
        if priors is not None:
            resolved = _resolve_priors(model, priors)
            names = model.spec.free_names()
            current_priors = tuple(
                p.recentered(centers[n]) for p, n in zip(resolved, names)
            )
    return trajectory
