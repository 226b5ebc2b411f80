"""Numerical checkers for the convergence statements, run on closed-form
synthetic problems.

Every checker drives the real solver steps (ered_step, epnp_step,
snopnp_step) on a small Gaussian-quadratic instance where the smoothed
objective F, its gradient, and its critical points have closed forms
assembled here by independent dense linear algebra.  Checkers verify
scaling laws and limits and fit empirical constants; the propositions'
existential constants are never asserted directly.  Checkers refuse to
certify configurations outside the statements' hypotheses (schedule
ranges, lambda thresholds, contraction gates) by raising ConfigError
rather than failing.

Conventions: "plateau" of a per-iteration quantity is the intercept b of
a least-squares fit of prefix means m_N = a/N + b over a grid of N, or
(where stated) the max over the last 10% of iterations averaged over
seeds, the limsup estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .buffer import ImageBuffer
from .denoisers import Denoiser, GaussianMMSE, LinearSmoothing
from .errors import ConfigError, NumericError
from .fidelity import DenseOperator, ProblemSpec, gaussian_problem, grad_f
from .kernels import gaussian_kernel
from .rng import Rng
from .solvers import (StepSchedule, ered_step, epnp_step, power_schedule,
                      snopnp_step)
from .transforms import GaussianShiftLaw, IdentityLaw, TransformLaw


# ---------------------------------------------------------------------------
# synthetic problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianPrior:
    """Diagonal Gaussian prior on the flattened image."""

    mean: np.ndarray       # (d,)
    variances: np.ndarray  # (d,)

    def score_matrix(self, sigma: float) -> np.ndarray:
        """Diagonal of (Sigma + sigma^2 I)^{-1}."""
        return 1.0 / (self.variances + sigma ** 2)


@dataclass(frozen=True)
class SyntheticProblem:
    """Gaussian-linear fidelity with an explicit matrix plus a Gaussian
    prior, on an h x w single-channel grid with d = h*w <= 64."""

    height: int
    width: int
    a_matrix: np.ndarray   # (d, d)
    sigma_y: float
    y: np.ndarray          # (d,)
    lam: float
    prior: GaussianPrior

    def __post_init__(self):
        d = self.height * self.width
        if d > 64:
            raise ConfigError("synthetic problems are capped at dimension 64")
        if self.a_matrix.shape != (d, d):
            raise ConfigError("a_matrix must be d x d")

    @property
    def d(self) -> int:
        return self.height * self.width

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, 1)

    def buffer(self, vec: np.ndarray) -> ImageBuffer:
        return ImageBuffer.from_flat(vec, self.height, self.width, 1)

    def problem_spec(self) -> ProblemSpec:
        op = DenseOperator(self.a_matrix, self.shape)
        return gaussian_problem(op, self.buffer(self.y), self.lam, self.sigma_y)

    def mmse_denoiser(self, sigma: float) -> GaussianMMSE:
        mean = self.buffer(self.prior.mean)
        var = self.buffer(self.prior.variances)
        return GaussianMMSE(mean, var, sigma)

    # closed-form smoothed objective --------------------------------------

    def averaged_score_operator(self, sigma: float, law_name: str) -> tuple[np.ndarray, np.ndarray]:
        """(Mbar, bbar) with grad r_sigma^pi(x) = Mbar x - bbar, the exact
        group average of the Gaussian smoothed-prior score."""
        m_diag = self.prior.score_matrix(sigma)
        m = np.diag(m_diag)
        mu = self.prior.mean
        perms = _law_permutations(law_name, self.height, self.width)
        if perms is None:  # shift laws: the average equals the base score
            return m, m_diag * mu
        mbar = np.zeros_like(m)
        bbar = np.zeros(self.d)
        for perm in perms:
            p = np.eye(self.d)[perm]  # (P x)[i] = x[perm[i]]
            mbar += p.T @ m @ p
            bbar += p.T @ (m_diag * mu)
        return mbar / len(perms), bbar / len(perms)

    def hessian(self, sigma: float, law_name: str = "identity") -> np.ndarray:
        mbar, _ = self.averaged_score_operator(sigma, law_name)
        return self.a_matrix.T @ self.a_matrix / self.sigma_y ** 2 + self.lam * mbar

    def grad_objective(self, sigma: float, law_name: str = "identity") -> Callable[[np.ndarray], np.ndarray]:
        mbar, bbar = self.averaged_score_operator(sigma, law_name)
        hf = self.a_matrix.T @ self.a_matrix / self.sigma_y ** 2
        rhs = self.a_matrix.T @ self.y / self.sigma_y ** 2
        return lambda v: hf @ v - rhs + self.lam * (mbar @ v - bbar)

    def objective(self, sigma: float, law_name: str = "identity") -> Callable[[np.ndarray], float]:
        mbar, bbar = self.averaged_score_operator(sigma, law_name)
        mu = self.prior.mean

        def f(v: np.ndarray) -> float:
            r = self.a_matrix @ v - self.y
            data = 0.5 * float(r @ r) / self.sigma_y ** 2
            reg = 0.5 * float(v @ (mbar @ v)) - float(bbar @ v) \
                + 0.5 * float(mu @ (self.prior.score_matrix(sigma) * mu))
            return data + self.lam * reg

        return f

    def critical_point(self, sigma: float, law_name: str = "identity") -> np.ndarray:
        """Solve grad F_sigma^pi = 0 by dense factorization; residual < 1e-10."""
        h = self.hessian(sigma, law_name)
        mbar, bbar = self.averaged_score_operator(sigma, law_name)
        rhs = self.a_matrix.T @ self.y / self.sigma_y ** 2 + self.lam * bbar
        try:
            x = np.linalg.solve(h, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"degenerate synthetic problem: {exc}") from None
        resid = float(np.linalg.norm(self.grad_objective(sigma, law_name)(x)))
        if resid > 1e-10 * max(1.0, float(np.linalg.norm(rhs))):
            raise NumericError(f"critical-point residual {resid:.2e} too large")
        return x

    def sharp_critical_point(self, law_name: str = "identity") -> np.ndarray:
        """Critical point of the unsmoothed objective (sigma = 0 limit)."""
        m0 = np.diag(1.0 / self.prior.variances)
        perms = _law_permutations(law_name, self.height, self.width)
        if perms is not None:
            acc = np.zeros_like(m0)
            for perm in perms:
                p = np.eye(self.d)[perm]
                acc += p.T @ m0 @ p
            m0 = acc / len(perms)
        h = self.a_matrix.T @ self.a_matrix / self.sigma_y ** 2 + self.lam * m0
        rhs = self.a_matrix.T @ self.y / self.sigma_y ** 2 \
            + self.lam * (np.diag(m0) * 0.0 + m0 @ self.prior.mean)
        return np.linalg.solve(h, rhs)


def _law_permutations(law_name: str, h: int, w: int) -> Optional[list[np.ndarray]]:
    """Flat-index permutations of the enumerable isometry laws, built
    directly on index grids (independent of the transforms module).
    Returns None for laws whose averaged score equals the base score
    (identity, gaussian shifts)."""
    if law_name in ("identity", "gaussian_shift"):
        return None
    idx = np.arange(h * w).reshape(h, w)
    if law_name == "rot90":
        if h != w:
            raise ConfigError("rot90 law needs a square grid")
        return [np.rot90(idx, k).reshape(-1) for k in range(4)]
    if law_name == "flip":
        return [idx.reshape(-1),
                idx[:, ::-1].reshape(-1),
                idx[::-1, :].reshape(-1),
                idx[::-1, ::-1].reshape(-1)]
    raise ConfigError(f"unsupported law for closed-form averaging: {law_name!r}")


def law_from_checker_name(name: str, shift_sigma: float = 0.0) -> TransformLaw:
    from .transforms import FlipLaw, Rot90Law
    if name == "identity":
        return IdentityLaw()
    if name == "rot90":
        return Rot90Law()
    if name == "flip":
        return FlipLaw()
    if name == "gaussian_shift":
        return GaussianShiftLaw(shift_sigma)
    raise ConfigError(f"unknown checker law {name!r}")


# ---------------------------------------------------------------------------
# default instances
# ---------------------------------------------------------------------------

DEFAULT_SIGMA = 0.5
DEFAULT_SHIFT_SIGMA = 3e-4


def default_instance(seed: int = 97) -> SyntheticProblem:
    """The 64-dimensional Gaussian-quadratic instance used by the
    gradient-family checkers: diagonal operator with entries near 1,
    sigma_y = 0.27, isotropic unit prior centered at 0.5.

    The strong convexity (eigenvalues ~[12, 17]) makes the deterministic
    power-schedule run reach 1e-6 gradients at N = 1e4, and the default
    Gaussian-shift law scale 3e-4 keeps the stochastic plateau an order
    of magnitude under the 1e-4 acceptance bound."""
    rng = Rng(seed)
    h = w = 8
    d = h * w
    diag = 0.95 + 0.1 * np.asarray(rng.uniform(d))
    a = np.diag(diag)
    x_true = np.clip(0.5 + 0.25 * np.asarray(rng.normal(d)), 0.0, 1.0)
    sigma_y = 0.27
    y = a @ x_true + sigma_y * np.asarray(rng.normal(d))
    prior = GaussianPrior(mean=np.full(d, 0.5), variances=np.ones(d))
    return SyntheticProblem(h, w, a, sigma_y, y, 1.0, prior)


def anisotropic_instance(seed: int = 131) -> SyntheticProblem:
    """Variant with a non-isotropic diagonal prior (rotation-sensitive)."""
    base = default_instance(seed)
    rng = Rng(seed + 1)
    variances = 0.8 + 0.4 * np.asarray(rng.uniform(base.d))
    prior = GaussianPrior(mean=base.prior.mean, variances=variances)
    return SyntheticProblem(base.height, base.width, base.a_matrix, base.sigma_y,
                            base.y, base.lam, prior)


@dataclass(frozen=True)
class ProxInstance:
    """Shared setup for the proximal-family checkers: dense diagonal
    fidelity (sigma_y = 1) plus a LinearSmoothing denoiser whose quadratic
    prox potential is assembled densely for the oracle side."""

    sp: SyntheticProblem
    denoiser: LinearSmoothing
    d_matrix: np.ndarray     # dense matrix of the (linear) denoiser
    lam: float

    @property
    def shape(self):
        return self.sp.shape

    def grad_full(self, v: np.ndarray) -> np.ndarray:
        """grad F(v) with F = f + lam*g, grad g = (D^{-1} - I) v."""
        hf = self.sp.a_matrix.T @ self.sp.a_matrix
        rhs = self.sp.a_matrix.T @ self.sp.y
        gg = np.linalg.solve(self.d_matrix, v) - v
        return hf @ v - rhs + self.lam * gg

    def fixed_point(self) -> np.ndarray:
        """Critical point of F: (A^T A + lam (D^{-1} - I)) x = A^T y."""
        d = self.sp.d
        h = self.sp.a_matrix.T @ self.sp.a_matrix \
            + self.lam * (np.linalg.inv(self.d_matrix) - np.eye(d))
        return np.linalg.solve(h, self.sp.a_matrix.T @ self.sp.y)


def _circulant_from_kernel(kernel: np.ndarray, h: int, w: int) -> np.ndarray:
    """Dense circulant of a 2-d kernel on the h x w torus, built tap by tap."""
    d = h * w
    mat = np.zeros((d, d))
    kh, kw = kernel.shape
    ch, cw = kh // 2, kw // 2
    rows, cols = np.divmod(np.arange(d), w)
    for i in range(kh):
        for j in range(kw):
            val = kernel[i, j]
            if val == 0.0:
                continue
            src_r = (rows - (i - ch)) % h
            src_c = (cols - (j - cw)) % w
            mat[np.arange(d), src_r * w + src_c] += val
    return mat


def prox_instance(lam: float, seed: int = 53, alpha: float = 0.5) -> ProxInstance:
    rng = Rng(seed)
    h = w = 8
    d = h * w
    diag = 0.9 + 0.2 * np.asarray(rng.uniform(d))
    a = np.diag(diag)
    x_true = np.clip(0.5 + 0.25 * np.asarray(rng.normal(d)), 0.0, 1.0)
    y = a @ x_true + 0.05 * np.asarray(rng.normal(d))
    prior = GaussianPrior(mean=np.full(d, 0.5), variances=np.ones(d))
    sp = SyntheticProblem(h, w, a, 1.0, y, lam, prior)
    kern = gaussian_kernel(0.8, 3)
    den = LinearSmoothing(kern, alpha, sigma=0.0, sigma0=None)
    w_mat = _circulant_from_kernel(kern.data[:, :, 0], h, w)
    d_mat = np.eye(d) - alpha * (np.eye(d) - w_mat)
    return ProxInstance(sp=sp, denoiser=den, d_matrix=d_mat, lam=lam)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    passed: bool
    measurements: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    notes: str = ""

    def summary_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.notes}" if self.notes else f"[{tag}] {self.name}"


def reports_to_csv(reports: Sequence[CheckReport], fh) -> None:
    fh.write("check,quantity,value\n")
    for r in reports:
        fh.write(f"{r.name},passed,{int(r.passed)}\n")
        for k in sorted(r.measurements):
            fh.write(f"{r.name},{k},{_num(r.measurements[k])}\n")
        for k in sorted(r.thresholds):
            fh.write(f"{r.name},threshold.{k},{_num(r.thresholds[k])}\n")
        if r.seeds:
            fh.write(f"{r.name},seeds,{';'.join(str(s) for s in r.seeds)}\n")


def _num(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(format(float(x), ".12g") for x in v)
    return format(float(v), ".12g")


# ---------------------------------------------------------------------------
# oracle helpers
# ---------------------------------------------------------------------------

def finite_difference_gradient(scalar_fn: Callable[[ImageBuffer], float],
                               x: ImageBuffer, h: float) -> ImageBuffer:
    """Central-difference gradient, O(h^2) on smooth functions."""
    if h <= 0:
        raise ConfigError("finite-difference step h must be positive")
    flat = x.flat().copy()
    out = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = scalar_fn(ImageBuffer.from_flat(flat, *x.shape))
        flat[i] = orig - h
        fm = scalar_fn(ImageBuffer.from_flat(flat, *x.shape))
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
    return ImageBuffer.from_flat(out, *x.shape)


def _fit_plateau(n_values: np.ndarray, means: np.ndarray) -> tuple[float, float]:
    """Least squares for m_N = a/N + b; returns (a, b)."""
    design = np.stack([1.0 / n_values, np.ones_like(n_values, dtype=float)], axis=1)
    coef, *_ = np.linalg.lstsq(design, means, rcond=None)
    return float(coef[0]), float(coef[1])


def _loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    lx, ly = np.log(np.asarray(xs)), np.log(np.asarray(ys))
    return float(np.polyfit(lx, ly, 1)[0])


class _BiasedDenoiser(Denoiser):
    """D* + eps * u for the bias-plateau checker (Prop. 3 setting)."""

    def __init__(self, base: Denoiser, direction: ImageBuffer, eps: float):
        super().__init__(base.sigma)
        self.base = base
        self.direction = direction
        self.eps = float(eps)
        self.is_exact_mmse = False

    def denoise(self, x: ImageBuffer) -> ImageBuffer:
        clean = self.base.denoise(x)
        if self.eps == 0.0:
            return clean
        return ImageBuffer(clean.data + self.eps * self.direction.data, check=False)

    def with_sigma(self, sigma):
        return _BiasedDenoiser(self.base.with_sigma(sigma), self.direction, self.eps)


# ---------------------------------------------------------------------------
# Prop 2: unbiased ERED convergence
# ---------------------------------------------------------------------------

def _run_ered_gradnorms(sp: SyntheticProblem, schedule: StepSchedule, n_iter: int,
                        seed: int, law: TransformLaw, law_name: str,
                        sigma: float, windows: Sequence[tuple[int, int]],
                        ) -> tuple[list[float], np.ndarray]:
    """Run ERED; return window means of ||grad F|| and the final iterate."""
    problem = sp.problem_spec()
    den = sp.mmse_denoiser(sigma)
    grad = sp.grad_objective(sigma, law_name)
    rng = Rng(seed)
    x = sp.buffer(np.zeros(sp.d))
    sums = [0.0] * len(windows)
    counts = [0] * len(windows)
    for k in range(n_iter):
        x = ered_step(x, problem, den, law, schedule.step(k), sp.lam, rng)
        for wi, (lo, hi) in enumerate(windows):
            if lo <= k < hi:
                sums[wi] += float(np.linalg.norm(grad(x.flat())))
                counts[wi] += 1
    means = [s / max(c, 1) for s, c in zip(sums, counts)]
    return means, x.flat()


def check_prop2_unbiased_convergence(sp: Optional[SyntheticProblem] = None,
                                     schedule: Optional[StepSchedule] = None,
                                     n_iter: int = 10_000,
                                     seeds: Sequence[int] = tuple(range(50)),
                                     law_name: str = "gaussian_shift",
                                     shift_sigma: float = DEFAULT_SHIFT_SIGMA,
                                     sigma: float = DEFAULT_SIGMA,
                                     n_grid: Optional[Sequence[int]] = (1000, 10_000, 100_000),
                                     grad_tol: float = 1e-4,
                                     det_tol: float = 1e-6,
                                     pass_fraction: float = 0.95) -> CheckReport:
    """Unbiased convergence: with the exact MMSE denoiser and a power
    schedule, windowed ||grad F_sigma^pi|| decays at the schedule rate and
    the final gradient beats grad_tol for >= pass_fraction of seeds; the
    identity-law variant is deterministic and must beat det_tol; distance
    to the critical point decreases along n_grid."""
    sp = sp or default_instance()
    schedule = schedule or power_schedule(0.1, 0.9)
    if schedule.kind != "power":
        raise ConfigError("Prop 2 hypothesis needs a power schedule "
                          "(divergent sum, summable squares)")
    law = law_from_checker_name(law_name, shift_sigma)
    xstar = sp.critical_point(sigma, law_name)

    # per-seed absolute tolerance at N = n_iter, plus the schedule-rate
    # criterion tol(N) = C / N^(alpha - 1/2) with C fit at N/4.  The fit and
    # the rate comparison use seed-averaged window means: the last-N/10
    # window is shorter than the chain's mixing time, so per-seed window
    # means carry O(1) relative noise and only their expectations obey the
    # rate.
    quarter = n_iter // 4
    windows = [(int(0.9 * quarter), quarter), (int(0.9 * n_iter), n_iter)]
    rate_factor = (quarter / n_iter) ** (schedule.alpha - 0.5)
    passes = 0
    quarter_norms = []
    final_norms = []
    for s in seeds:
        (w_quarter, w_final), _ = _run_ered_gradnorms(
            sp, schedule, n_iter, s, law, law_name, sigma, windows)
        quarter_norms.append(w_quarter)
        final_norms.append(w_final)
        if w_final < grad_tol:
            passes += 1
    frac = passes / len(seeds)
    rate_tol = float(np.mean(quarter_norms)) * rate_factor
    rate_ok = float(np.mean(final_norms)) < max(rate_tol, 1e-14)

    # deterministic identity-law arm
    (_, det_final), _ = _run_ered_gradnorms(
        sp, schedule, n_iter, 0, IdentityLaw(), "identity", sigma, windows)

    # distance decrease across the N grid (median over a few seeds)
    distances = []
    if n_grid:
        for n in n_grid:
            per_seed = []
            for s in list(seeds)[:3]:
                _, xf = _run_ered_gradnorms(sp, schedule, int(n), s, law, law_name,
                                            sigma, [])
                per_seed.append(float(np.linalg.norm(xf - xstar)))
            distances.append(float(np.median(per_seed)))
    dist_ok = all(b < a for a, b in zip(distances, distances[1:])) if distances else True

    passed = frac >= pass_fraction and rate_ok and det_final < det_tol and dist_ok
    return CheckReport(
        name="prop2_unbiased_convergence",
        passed=bool(passed),
        measurements={"pass_fraction": frac, "median_final_grad": float(np.median(final_norms)),
                      "mean_final_grad": float(np.mean(final_norms)),
                      "rate_tol": rate_tol,
                      "deterministic_final_grad": det_final,
                      "distances_to_critical": distances},
        thresholds={"grad_tol": grad_tol, "det_tol": det_tol,
                    "pass_fraction": pass_fraction},
        seeds=list(seeds),
        notes=f"{passes}/{len(seeds)} seeds under {grad_tol:g}; "
              f"deterministic arm {det_final:.2e}")


# ---------------------------------------------------------------------------
# Prop 3: biased plateau
# ---------------------------------------------------------------------------

def check_prop3_bias_bound(sp: Optional[SyntheticProblem] = None,
                           eps_list: Sequence[float] = (1e-3, 1e-2, 1e-1),
                           seeds: Sequence[int] = tuple(range(5)),
                           n_iter: int = 10_000,
                           law_name: str = "rot90",
                           sigma: float = DEFAULT_SIGMA,
                           slope_range: tuple[float, float] = (0.4, 1.1)) -> CheckReport:
    """Bias plateau: limsup ||grad F_sigma^pi|| is monotone in the injected
    denoiser bias and scales with exponent in slope_range; the direct bias
    measurement over the enumerated group obeys the (lam/sigma^2) eps bound."""
    sp = sp or default_instance()
    schedule = power_schedule(0.1, 0.9)
    law = law_from_checker_name(law_name)
    if not law.enumerable:
        raise ConfigError("the bias measurement needs an enumerable isometry law")
    direction = sp.buffer(np.full(sp.d, 1.0 / np.sqrt(sp.d)))
    problem = sp.problem_spec()
    grad = sp.grad_objective(sigma, law_name)

    plateaus = []
    for eps in eps_list:
        per_seed = []
        for s in seeds:
            den = _BiasedDenoiser(sp.mmse_denoiser(sigma), direction, eps)
            rng = Rng(s)
            x = sp.buffer(np.zeros(sp.d))
            tail_max = 0.0
            lo = int(0.9 * n_iter)
            for k in range(n_iter):
                x = ered_step(x, problem, den, law, schedule.step(k), sp.lam, rng)
                if k >= lo:
                    tail_max = max(tail_max, float(np.linalg.norm(grad(x.flat()))))
            per_seed.append(tail_max)
        plateaus.append(float(np.mean(per_seed)))

    monotone = all(b > a for a, b in zip(plateaus, plateaus[1:]))
    slope = _loglog_slope(eps_list, plateaus)
    ratio = plateaus[-1] / plateaus[-2]

    # direct bias measurement: E xi at random states, exact over the group
    bias_ok = True
    bias_margin = []
    probe_rng = Rng(1234)
    weight = sp.lam / sigma ** 2
    for eps in eps_list:
        den = _BiasedDenoiser(sp.mmse_denoiser(sigma), direction, eps)
        for _ in range(3):
            x = sp.buffer(np.asarray(probe_rng.normal(sp.d)))
            acc = np.zeros(sp.d)
            for t, w in law.enumerate():
                gx = t.apply(x)
                resid = gx - den.denoise(gx)
                acc += w * t.jacobian_transpose(resid).flat()
            # E xi = (lam/sigma^2) E[J^T(G - D o G)] - lam grad rbar
            grad_reg = grad(x.flat()) - sp.a_matrix.T @ (sp.a_matrix @ x.flat() - sp.y) / sp.sigma_y ** 2
            exi = weight * acc - grad_reg
            norm_exi = float(np.linalg.norm(exi))
            bound = weight * eps * (1.0 + 1e-6)
            bias_margin.append(norm_exi / bound)
            if norm_exi > bound:
                bias_ok = False

    passed = monotone and slope_range[0] <= slope <= slope_range[1] and bias_ok
    return CheckReport(
        name="prop3_bias_bound",
        passed=bool(passed),
        measurements={"plateaus": plateaus, "slope": slope,
                      "top_ratio": ratio, "bias_over_bound_max": max(bias_margin)},
        thresholds={"slope_lo": slope_range[0], "slope_hi": slope_range[1],
                    "ratio_window": [3.0, 30.0]},
        seeds=list(seeds),
        notes=f"plateaus {plateaus}, slope {slope:.3f}")


# ---------------------------------------------------------------------------
# Props 5 / 6: score convergence and critical-point limit
# ---------------------------------------------------------------------------

def check_prop5_score_convergence(sp: Optional[SyntheticProblem] = None,
                                  sigma_grid: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
                                  law_name: str = "identity",
                                  n_points: int = 20,
                                  reduction: float = 4.0) -> CheckReport:
    """Uniform score convergence: sup over a fixed compact grid of
    ||s - s_sigma^pi|| is nonincreasing along the sigma grid with a total
    reduction of at least `reduction`."""
    sp = sp or default_instance()
    rng = Rng(777)
    points = [sp.prior.mean + 2.0 * (np.asarray(rng.uniform(sp.d)) - 0.5)
              for _ in range(n_points)]
    m0 = 1.0 / sp.prior.variances
    gaps = []
    for sigma in sigma_grid:
        mbar, bbar = sp.averaged_score_operator(sigma, law_name)
        sup = 0.0
        for x in points:
            s_true = m0 * (x - sp.prior.mean)
            s_sig = mbar @ x - bbar
            sup = max(sup, float(np.linalg.norm(s_true - s_sig)))
        gaps.append(sup)
    nonincreasing = all(b <= a * (1 + 1e-12) for a, b in zip(gaps, gaps[1:]))
    total = gaps[0] / gaps[-1] if gaps[-1] > 0 else np.inf
    ratios = [b / a for a, b in zip(gaps, gaps[1:])]
    passed = nonincreasing and total >= reduction
    return CheckReport(
        name="prop5_score_convergence",
        passed=bool(passed),
        measurements={"sup_gaps": gaps, "total_reduction": total,
                      "consecutive_ratios": ratios},
        thresholds={"reduction": reduction},
        notes=f"gaps {gaps}, total reduction {total:.1f}x")


def check_prop6_critical_limit(sp: Optional[SyntheticProblem] = None,
                               sigma_grid: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
                               law_name: str = "identity",
                               final_tol: float = 1e-3) -> CheckReport:
    """Critical points of the smoothed problem approach the sharp critical
    set: d(x*_sigma, S*) decreases along the grid and ends below final_tol."""
    sp = sp or default_instance()
    xstar0 = sp.sharp_critical_point(law_name)
    dists = [float(np.linalg.norm(sp.critical_point(s, law_name) - xstar0))
             for s in sigma_grid]
    decreasing = all(b < a for a, b in zip(dists, dists[1:]))
    passed = decreasing and dists[-1] < final_tol
    return CheckReport(
        name="prop6_critical_limit",
        passed=bool(passed),
        measurements={"distances": dists},
        thresholds={"final_tol": final_tol},
        notes=f"distances {dists}")


# ---------------------------------------------------------------------------
# Lemma 1 / Prop 8: EPnP as perturbed proximal gradient descent
# ---------------------------------------------------------------------------

def check_lemma1_prop8_epnp(inst: Optional[ProxInstance] = None,
                            sigma_t_list: Sequence[float] = (0.01, 0.02, 0.04),
                            n_iter: int = 4000,
                            seeds: Sequence[int] = tuple(range(50)),
                            slope_tol: float = 0.3,
                            zero_tol: float = 1e-10) -> CheckReport:
    """EPnP under Gaussian shifts: prefix means of ||x_{k+1}-x_k||^2 and of
    ||grad Ftilde(x_k - zeta_k)||^2 fit a/N + b with plateau b linear in
    mu^2 = sigma_t^2 d (log-log slope 2 in sigma_t); sigma_t = 0 gives
    plateau below zero_tol."""
    inst = inst or prox_instance(lam=4.0)
    lf = inst.sp.problem_spec().lipschitz_f
    if inst.lam < 3.0 * lf:
        raise ConfigError(
            f"Lemma 1 hypothesis needs lambda >= 3 L_f = {3 * lf:.3f}, got {inst.lam}")
    problem = inst.sp.problem_spec()
    marks = [n_iter // 4, n_iter // 2, n_iter]

    def run_level(sigma_t: float) -> tuple[float, float]:
        law = GaussianShiftLaw(sigma_t)
        res_means = np.zeros(len(marks))
        grad_means = np.zeros(len(marks))
        for s in seeds:
            rng = Rng(s)
            x = inst.sp.buffer(np.zeros(inst.sp.d))
            zeta = np.zeros(inst.sp.d)
            res_acc = 0.0
            grad_acc = 0.0
            acc_r = []
            acc_g = []
            for k in range(n_iter):
                grad_acc += float(np.linalg.norm(
                    inst.grad_full(x.flat() - zeta)) ** 2)
                prev = x
                x = epnp_step(x, problem, inst.denoiser, law, inst.lam, rng)
                # exact prox of the (affine) equivariant denoiser: D applied
                # to the forward point; zeta is the leftover noise push
                y = prev.flat() - grad_f(problem, prev).flat() / inst.lam
                zeta = x.flat() - inst.d_matrix @ y
                res_acc += float((x - prev).norm() ** 2)
                if k + 1 in marks:
                    acc_r.append(res_acc / (k + 1))
                    acc_g.append(grad_acc / (k + 1))
            res_means += np.asarray(acc_r)
            grad_means += np.asarray(acc_g)
        res_means /= len(seeds)
        grad_means /= len(seeds)
        _, b_res = _fit_plateau(np.asarray(marks, dtype=float), res_means)
        _, b_grad = _fit_plateau(np.asarray(marks, dtype=float), grad_means)
        return b_res, b_grad

    zero_res, zero_grad = run_level(0.0)
    levels = [run_level(st) for st in sigma_t_list]
    res_plateaus = [max(b, 1e-300) for b, _ in levels]
    grad_plateaus = [max(b, 1e-300) for _, b in levels]
    slope_res = _loglog_slope(sigma_t_list, res_plateaus)
    slope_grad = _loglog_slope(sigma_t_list, grad_plateaus)
    doubling = res_plateaus[1] / res_plateaus[0]

    passed = (abs(zero_res) < zero_tol and abs(zero_grad) < zero_tol
              and abs(slope_res - 2.0) <= slope_tol
              and abs(slope_grad - 2.0) <= slope_tol
              and 4.0 * 0.7 <= doubling <= 4.0 * 1.3)
    return CheckReport(
        name="lemma1_prop8_epnp",
        passed=bool(passed),
        measurements={"residual_plateaus": res_plateaus,
                      "grad_plateaus": grad_plateaus,
                      "slope_residual": slope_res, "slope_grad": slope_grad,
                      "zero_residual_plateau": zero_res,
                      "zero_grad_plateau": zero_grad,
                      "doubling_ratio": doubling},
        thresholds={"slope": 2.0, "slope_tol": slope_tol, "zero_tol": zero_tol},
        seeds=list(seeds),
        notes=f"slopes {slope_res:.3f}/{slope_grad:.3f}, zero plateau {zero_res:.2e}")


# ---------------------------------------------------------------------------
# Lemma 2 / Prop 9: SnoPnP as stochastic proximal gradient descent
# ---------------------------------------------------------------------------

def check_lemma2_prop9_snopnp(inst: Optional[ProxInstance] = None,
                              sigma_list: Sequence[float] = (0.01, 0.02, 0.04),
                              n_iter: int = 4000,
                              seeds: Sequence[int] = tuple(range(50)),
                              slope_tol: float = 0.3,
                              det_iter: int = 10_000,
                              det_tol: float = 1e-6) -> CheckReport:
    """SnoPnP: the plateau of (1/N) sum ||grad F(x_k)||^2 scales as the
    injected noise sigma^2 (log-log slope 2 +- slope_tol); the sigma = 0 run
    is plain proximal gradient descent and reaches det_tol gradients."""
    inst = inst or prox_instance(lam=1.5)
    lf = inst.sp.problem_spec().lipschitz_f
    if inst.lam < lf:
        raise ConfigError(
            f"Prop 9 hypothesis needs lambda >= L_f = {lf:.3f}, got {inst.lam}")
    if not inst.denoiser.is_gradient_step:
        raise ConfigError("Prop 9 needs a gradient-step denoiser with exact potential")
    problem = inst.sp.problem_spec()
    marks = [n_iter // 4, n_iter // 2, n_iter]

    def run_level(sigma: float) -> float:
        den = inst.denoiser.with_sigma(sigma)
        means = np.zeros(len(marks))
        for s in seeds:
            rng = Rng(s)
            x = inst.sp.buffer(np.zeros(inst.sp.d))
            acc = 0.0
            prefix = []
            for k in range(n_iter):
                acc += float(np.linalg.norm(inst.grad_full(x.flat())) ** 2)
                x = snopnp_step(x, problem, den, inst.lam, rng)
                if k + 1 in marks:
                    prefix.append(acc / (k + 1))
            means += np.asarray(prefix)
        means /= len(seeds)
        _, b = _fit_plateau(np.asarray(marks, dtype=float), means)
        return b

    plateaus = [max(run_level(s), 1e-300) for s in sigma_list]
    slope = _loglog_slope(sigma_list, plateaus)
    ratio = plateaus[-1] / plateaus[-2]

    # deterministic arm
    den0 = inst.denoiser.with_sigma(0.0)
    rng = Rng(0)
    x = inst.sp.buffer(np.zeros(inst.sp.d))
    for _ in range(det_iter):
        x = snopnp_step(x, problem, den0, inst.lam, rng)
    det_grad = float(np.linalg.norm(inst.grad_full(x.flat())))

    passed = (abs(slope - 2.0) <= slope_tol and det_grad < det_tol
              and 3.0 <= ratio <= 5.5)
    return CheckReport(
        name="lemma2_prop9_snopnp",
        passed=bool(passed),
        measurements={"plateaus": plateaus, "slope": slope,
                      "top_ratio": ratio, "deterministic_grad": det_grad},
        thresholds={"slope": 2.0, "slope_tol": slope_tol, "det_tol": det_tol,
                    "ratio_window": [3.0, 5.5]},
        seeds=list(seeds),
        notes=f"slope {slope:.3f}, ratio {ratio:.2f}, det grad {det_grad:.2e}")


# ---------------------------------------------------------------------------
# Corollary 1: qualitative distance scaling
# ---------------------------------------------------------------------------

def check_cor1_distance_scaling(inst: Optional[ProxInstance] = None,
                                sigma_list: Sequence[float] = (0.01, 0.02, 0.04),
                                n_iter: int = 2000,
                                seeds: Sequence[int] = tuple(range(50)),
                                violation_tol: float = 0.10,
                                zero_tol: float = 1e-6) -> CheckReport:
    """Qualitative: min over k of d(x_k, S*) should not decrease when the
    injected noise grows (10% slack); the sigma = 0 run gets within
    zero_tol of the unique critical point."""
    inst = inst or prox_instance(lam=1.5)
    problem = inst.sp.problem_spec()
    xstar = inst.fixed_point()

    def min_distance(sigma: float, seed: int) -> float:
        den = inst.denoiser.with_sigma(sigma)
        rng = Rng(seed)
        x = inst.sp.buffer(np.zeros(inst.sp.d))
        best = np.inf
        for _ in range(n_iter):
            x = snopnp_step(x, problem, den, inst.lam, rng)
            best = min(best, float(np.linalg.norm(x.flat() - xstar)))
        return best

    medians = [float(np.median([min_distance(s, seed) for seed in seeds]))
               for s in sigma_list]
    violations = sum(1 for a, b in zip(medians, medians[1:])
                     if b < a * (1.0 - violation_tol))
    zero_dist = min_distance(0.0, 0)
    passed = violations == 0 and zero_dist < zero_tol
    return CheckReport(
        name="cor1_distance_scaling",
        passed=bool(passed),
        measurements={"median_min_distances": medians, "zero_distance": zero_dist,
                      "violations": violations},
        thresholds={"violation_tol": violation_tol, "zero_tol": zero_tol},
        seeds=list(seeds),
        notes=f"medians {medians}, zero run {zero_dist:.2e}")


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

CHECKS: dict[str, Callable[..., CheckReport]] = {
    "prop2": check_prop2_unbiased_convergence,
    "prop3": check_prop3_bias_bound,
    "prop5": check_prop5_score_convergence,
    "prop6": check_prop6_critical_limit,
    "lemma1_prop8": check_lemma1_prop8_epnp,
    "lemma2_prop9": check_lemma2_prop9_snopnp,
    "cor1": check_cor1_distance_scaling,
}


def run_checks(names: Sequence[str]) -> list[CheckReport]:
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(
            f"unknown checks {unknown}; valid names: {sorted(CHECKS)}")
    return [CHECKS[n]() for n in names]
