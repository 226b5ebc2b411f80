"""The five iterative restoration algorithms and their trace machinery.

Gradient family (explicit step on the regularization):
  red    x' = x - d grad f(x) - (d lam / s^2) (x - D(x))
  ered   one transform draw G per iteration:
         x' = x - d grad f(x) - (d lam / s^2) J_G^T(x) (G(x) - D(G(x)))
  annealed_ered: ered with a piecewise-constant sigma schedule.

Proximal family (denoiser as implicit step, step fixed to 1, lam free):
  pnp    x' = D(x - (1/lam) grad f(x))
  epnp   x' = J_G^T(y) D(G(y)),  y = x - (1/lam) grad f(x)
  snopnp x' = D(x - (1/lam) grad f(x) + s z),  z ~ N(0, I)

With the identity law, ered/epnp reduce bit-for-bit to red/pnp, and epnp
under the Gaussian-shift law reduces bit-for-bit to snopnp with shared
draws; the acceptance suite pins all three reductions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .buffer import ImageBuffer
from .denoisers import Denoiser
from .errors import ConfigError, DivergedError, NumericError
from .fidelity import ProblemSpec, grad_f
from .metrics import psnr
from .rng import Rng
from .transforms import IdentityTransform, Transform, TransformLaw, GaussianShiftLaw

DIVERGENCE_LIMIT = 1e6

GRADIENT_ALGOS = ("red", "ered", "annealed_ered")
PROX_ALGOS = ("pnp", "epnp", "snopnp")


# ---------------------------------------------------------------------------
# step schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """Constant delta or power decay delta/(k+1)^alpha with alpha in (1/2, 1],
    which satisfies the divergent-sum / summable-squares requirement."""

    kind: str
    delta: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "power"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.delta <= 0:
            raise ConfigError("step size delta must be positive")
        if self.kind == "power" and not (0.5 < self.alpha <= 1.0):
            raise ConfigError(
                f"power schedule needs alpha in (1/2, 1], got {self.alpha}")

    def step(self, k: int) -> float:
        if self.kind == "constant":
            return self.delta
        return self.delta / (k + 1) ** self.alpha


def constant_schedule(delta: float) -> StepSchedule:
    return StepSchedule("constant", delta)


def power_schedule(delta: float, alpha: float) -> StepSchedule:
    return StepSchedule("power", delta, alpha)


def linear_sigma_schedule(sigma_start: float, sigma_end: float,
                          segments: int = 16) -> list[float]:
    """Piecewise-constant annealing levels, linearly spaced."""
    if segments < 1:
        raise ConfigError("need at least one annealing segment")
    return [float(s) for s in np.linspace(sigma_start, sigma_end, segments)]


# ---------------------------------------------------------------------------
# single steps
# ---------------------------------------------------------------------------

def _require_sigma(denoiser: Denoiser):
    if denoiser.sigma <= 0:
        raise ConfigError("gradient-family steps need denoiser sigma > 0")


def _grad_family_step(x: ImageBuffer, problem: ProblemSpec, denoiser: Denoiser,
                      transform: Transform, delta: float, lam: float) -> ImageBuffer:
    _require_sigma(denoiser)
    gx = transform.apply(x)
    resid = gx - denoiser.denoise(gx)
    pull = transform.jacobian_transpose(resid)
    g = grad_f(problem, x)
    w = delta * lam / denoiser.sigma ** 2
    return ImageBuffer(x.data - delta * g.data - w * pull.data, check=False)


def _prox_family_step(x: ImageBuffer, problem: ProblemSpec, denoiser: Denoiser,
                      transform: Transform, lam: float) -> ImageBuffer:
    if lam <= 0:
        raise ConfigError("lambda must be positive")
    g = grad_f(problem, x)
    y = ImageBuffer(x.data - g.data / lam, check=False)
    gy = transform.apply(y)
    return transform.jacobian_transpose(denoiser.denoise(gy))


def red_step(x: ImageBuffer, problem: ProblemSpec, denoiser: Denoiser,
             delta: float, lam: float) -> ImageBuffer:
    if delta < 0:
        raise ConfigError("delta must be nonnegative")
    if delta == 0.0:
        return x
    return _grad_family_step(x, problem, denoiser, IdentityTransform(), delta, lam)


def ered_step(x: ImageBuffer, problem: ProblemSpec, denoiser: Denoiser,
              law: TransformLaw, delta: float, lam: float, rng: Rng) -> ImageBuffer:
    t = law.sample(rng, x.shape)
    return _grad_family_step(x, problem, denoiser, t, delta, lam)


def pnp_step(x: ImageBuffer, problem: ProblemSpec, denoiser: Denoiser,
             lam: float) -> ImageBuffer:
    return _prox_family_step(x, problem, denoiser, IdentityTransform(), lam)


def epnp_step(x: ImageBuffer, problem: ProblemSpec, denoiser: Denoiser,
              law: TransformLaw, lam: float, rng: Rng) -> ImageBuffer:
    t = law.sample(rng, x.shape)
    return _prox_family_step(x, problem, denoiser, t, lam)


def snopnp_step(x: ImageBuffer, problem: ProblemSpec, denoiser: Denoiser,
                lam: float, rng: Rng) -> ImageBuffer:
    if not (denoiser.is_gradient_step or denoiser.is_exact_mmse):
        raise ConfigError("snopnp needs a gradient-step or exact-MMSE denoiser")
    t = GaussianShiftLaw(denoiser.sigma).sample(rng, x.shape)
    return _prox_family_step(x, problem, denoiser, t, lam)


# ---------------------------------------------------------------------------
# run loop and traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceOptions:
    x_true: Optional[ImageBuffer] = None
    objective_fn: Optional[Callable[[ImageBuffer], float]] = None
    grad_norm_fn: Optional[Callable[[ImageBuffer], float]] = None


@dataclass
class IterationRecord:
    k: int
    residual: float
    objective: Optional[float] = None
    grad_norm: Optional[float] = None
    psnr: Optional[float] = None
    transform_id: str = ""
    noise_norm: float = 0.0


TRACE_COLUMNS = ("k", "residual", "objective", "grad_norm", "psnr",
                 "transform_id", "noise_norm")


@dataclass
class RunTrace:
    records: list[IterationRecord]
    final: ImageBuffer
    seed: int
    wall_ms: float
    projections: int = 0

    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def to_csv(self, fh) -> None:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for r in self.records:
            fh.write(",".join((
                str(r.k),
                _fmt(r.residual),
                _fmt(r.objective),
                _fmt(r.grad_norm),
                _fmt(r.psnr),
                r.transform_id,
                _fmt(r.noise_norm),
            )) + "\n")


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str
    lam: float
    denoiser: Denoiser
    iterations: int
    seed: int = 0
    schedule: Optional[StepSchedule] = None
    law: Optional[TransformLaw] = None
    sigma_schedule: Optional[Sequence[float]] = None
    require_prox: bool = False
    trace: TraceOptions = field(default_factory=TraceOptions)

    def __post_init__(self):
        if self.algorithm not in GRADIENT_ALGOS + PROX_ALGOS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.iterations < 0:
            raise ConfigError("iterations must be nonnegative")
        if self.lam <= 0:
            raise ConfigError("lambda must be positive")
        if self.algorithm in GRADIENT_ALGOS and self.schedule is None:
            raise ConfigError(f"{self.algorithm} needs a step schedule")
        if self.algorithm in PROX_ALGOS and self.schedule is not None:
            raise ConfigError(
                "proximal-family algorithms take no step schedule (step fixed to 1)")
        if self.algorithm in ("ered", "epnp") and self.law is None:
            raise ConfigError(f"{self.algorithm} needs a transform law")
        if self.algorithm == "annealed_ered" and not self.sigma_schedule:
            raise ConfigError("annealed_ered needs a sigma schedule")
        if self.require_prox and self.algorithm == "snopnp" \
                and not self.denoiser.is_gradient_step:
            raise ConfigError("snopnp theorem checks need a gradient-step denoiser")


def default_x0(problem: ProblemSpec) -> ImageBuffer:
    """Observation for shape-preserving operators; DC-normalized
    backprojection A^T y otherwise (the super-resolution case)."""
    if problem.y is None:
        raise ConfigError("cannot derive x0: problem has no observation")
    if problem.op.in_shape == problem.op.out_shape:
        return problem.project(problem.y.copy())
    back = problem.op.adjoint(problem.y)
    h, w, c = problem.op.in_shape
    ones = ImageBuffer.full(h, w, 1.0, channels=c)
    gain = float(np.mean(problem.op.adjoint(problem.op.forward(ones)).data))
    if gain <= 0:
        raise NumericError("operator backprojection has nonpositive DC gain")
    return problem.project(back * (1.0 / gain))


def run(config: SolverConfig, problem: ProblemSpec,
        x0: Optional[ImageBuffer] = None) -> RunTrace:
    rng = Rng(config.seed)
    x = x0.copy() if x0 is not None else default_x0(problem)
    x = problem.project(x)
    denoiser = config.denoiser
    records: list[IterationRecord] = []
    projections = 0
    start = time.perf_counter()
    current_sigma = denoiser.sigma

    for k in range(config.iterations):
        if config.algorithm == "annealed_ered":
            seg = min(len(config.sigma_schedule) - 1,
                      k * len(config.sigma_schedule) // config.iterations)
            if config.sigma_schedule[seg] != current_sigma:
                current_sigma = config.sigma_schedule[seg]
                denoiser = denoiser.with_sigma(current_sigma)

        transform_id = ""
        noise_norm = 0.0
        if config.algorithm == "red":
            nxt = red_step(x, problem, denoiser, config.schedule.step(k), config.lam)
        elif config.algorithm in ("ered", "annealed_ered"):
            t = config.law.sample(rng, x.shape) if config.law else IdentityTransform()
            transform_id = t.id_str()
            if transform_id == "noise":
                noise_norm = float(np.linalg.norm(t.scale * t.z))
            nxt = _grad_family_step(x, problem, denoiser, t,
                                    config.schedule.step(k), config.lam)
        elif config.algorithm == "pnp":
            nxt = pnp_step(x, problem, denoiser, config.lam)
        elif config.algorithm == "epnp":
            t = config.law.sample(rng, x.shape)
            transform_id = t.id_str()
            if transform_id == "noise":
                noise_norm = float(np.linalg.norm(t.scale * t.z))
            nxt = _prox_family_step(x, problem, denoiser, t, config.lam)
        else:  # snopnp
            t = GaussianShiftLaw(denoiser.sigma).sample(rng, x.shape)
            transform_id = "noise"
            noise_norm = float(np.linalg.norm(t.scale * t.z))
            nxt = _prox_family_step(x, problem, denoiser, t, config.lam)

        if not np.all(np.isfinite(nxt.data)):
            raise NumericError(f"non-finite iterate at iteration {k}")
        if problem.requires_projection:
            proj = problem.project(nxt)
            if not np.array_equal(proj.data, nxt.data):
                projections += 1
            nxt = proj
        norm = nxt.norm()
        if norm > DIVERGENCE_LIMIT:
            raise DivergedError(
                f"iterate norm {norm:.3e} exceeded {DIVERGENCE_LIMIT:.0e} "
                f"at iteration {k}", iteration=k)

        rec = IterationRecord(k=k, residual=(nxt - x).norm(),
                              transform_id=transform_id, noise_norm=noise_norm)
        if config.trace.objective_fn is not None:
            rec.objective = float(config.trace.objective_fn(nxt))
        if config.trace.grad_norm_fn is not None:
            rec.grad_norm = float(config.trace.grad_norm_fn(nxt))
        if config.trace.x_true is not None:
            rec.psnr = psnr(nxt, config.trace.x_true)
        records.append(rec)
        x = nxt

    wall_ms = (time.perf_counter() - start) * 1e3
    return RunTrace(records=records, final=x, seed=config.seed,
                    wall_ms=wall_ms, projections=projections)
