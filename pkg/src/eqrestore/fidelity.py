"""Data-fidelity terms: Gaussian-linear (deblurring, super-resolution,
dense synthetic operators) and multiplicative speckle, with exact
gradients, exact operator spectra for Lipschitz constants, and seeded
observation generation.

Gaussian-linear supports two scalings.  noise_scaled=True is the
default contract: f(x) = ||y - Ax||^2 / (2 sigma_y^2) with
L_f = lambda_max(A^T A)/sigma_y^2.  noise_scaled=False drops the noise
normalization (f = 0.5||y - Ax||^2), the convention under which the
published restoration hyperparameters were tuned; the CLI restoration
tasks use it.

Speckle uses the Gamma negative log-likelihood f(x) = L sum(log x_i +
y_i/x_i), defined on x >= eps_x (solvers project onto that box); it is
not globally L-smooth, so L_f is unavailable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .buffer import ImageBuffer
from .conv import conv2d_circular, kernel_spectrum_bounds, kernel_fft
from .errors import ConfigError, DimensionError, DomainError, UnsupportedError
from .rng import Rng

SPECKLE_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# linear operators
# ---------------------------------------------------------------------------

class LinearOperator:
    """Forward/adjoint pair with an exact bound on lambda_max(A^T A)."""

    in_shape: tuple[int, int, int]
    out_shape: tuple[int, int, int]

    def forward(self, x: ImageBuffer) -> ImageBuffer:
        raise NotImplementedError

    def adjoint(self, v: ImageBuffer) -> ImageBuffer:
        raise NotImplementedError

    def spectral_norm_sq(self) -> float:
        raise NotImplementedError

    def _check_in(self, x: ImageBuffer):
        if x.shape != self.in_shape:
            raise DimensionError(f"operator input {self.in_shape}, got {x.shape}")

    def _check_out(self, v: ImageBuffer):
        if v.shape != self.out_shape:
            raise DimensionError(f"operator output {self.out_shape}, got {v.shape}")


class IdentityOperator(LinearOperator):
    def __init__(self, shape: tuple[int, int, int]):
        self.in_shape = self.out_shape = tuple(shape)

    def forward(self, x):
        self._check_in(x)
        return x

    def adjoint(self, v):
        self._check_out(v)
        return v

    def spectral_norm_sq(self):
        return 1.0


class BlurOperator(LinearOperator):
    """Circular convolution with an odd kernel."""

    def __init__(self, kernel: ImageBuffer, shape: tuple[int, int, int]):
        self.kernel = kernel
        self.in_shape = self.out_shape = tuple(shape)

    def forward(self, x):
        self._check_in(x)
        return conv2d_circular(x, self.kernel)

    def adjoint(self, v):
        self._check_out(v)
        return conv2d_circular(v, self.kernel, adjoint=True)

    def spectral_norm_sq(self):
        _, top = kernel_spectrum_bounds(self.kernel, self.in_shape[0], self.in_shape[1])
        return top


class SuperResolutionOperator(LinearOperator):
    """Stride-s subsampling of a circular blur; adjoint zero-interleaves
    then applies the blur adjoint.  lambda_max(A^T A) comes from the exact
    alias-sum formula on the circulant spectrum."""

    def __init__(self, kernel: ImageBuffer, factor: int, shape: tuple[int, int, int]):
        if factor < 1:
            raise ConfigError("super-resolution factor must be >= 1")
        h, w, c = shape
        if h % factor or w % factor:
            raise ConfigError(
                f"factor {factor} does not divide image dimensions {h}x{w}")
        self.kernel = kernel
        self.factor = int(factor)
        self.in_shape = tuple(shape)
        self.out_shape = (h // factor, w // factor, c)

    def forward(self, x):
        self._check_in(x)
        blurred = conv2d_circular(x, self.kernel)
        s = self.factor
        return ImageBuffer(blurred.data[::s, ::s, :], check=False)

    def adjoint(self, v):
        self._check_out(v)
        up = np.zeros(self.in_shape)
        s = self.factor
        up[::s, ::s, :] = v.data
        return conv2d_circular(ImageBuffer(up, check=False), self.kernel, adjoint=True)

    def spectral_norm_sq(self):
        h, w, _ = self.in_shape
        s = self.factor
        mag2 = np.abs(kernel_fft(self.kernel.data[:, :, 0], h, w)) ** 2
        # eigenvalues of A A^T are alias sums over the s x s frequency cosets
        folded = mag2.reshape(s, h // s, s, w // s).sum(axis=(0, 2)) / (s * s)
        return float(folded.max())


class DenseOperator(LinearOperator):
    """Explicit matrix acting on the flattened buffer (synthetic problems)."""

    def __init__(self, matrix: np.ndarray, in_shape: tuple[int, int, int],
                 out_shape: tuple[int, int, int] | None = None):
        a = np.asarray(matrix, dtype=np.float64)
        if a.ndim != 2:
            raise ConfigError("dense operator needs a 2-d matrix")
        d_in = int(np.prod(in_shape))
        if a.shape[1] != d_in:
            raise DimensionError(f"matrix has {a.shape[1]} columns, input dim {d_in}")
        if out_shape is None:
            if a.shape[0] != d_in:
                raise DimensionError("square matrix required when out_shape omitted")
            out_shape = tuple(in_shape)
        if int(np.prod(out_shape)) != a.shape[0]:
            raise DimensionError("out_shape does not match matrix rows")
        self.matrix = a
        self.in_shape = tuple(in_shape)
        self.out_shape = tuple(out_shape)

    def forward(self, x):
        self._check_in(x)
        out = self.matrix @ x.flat()
        return ImageBuffer.from_flat(out, *self.out_shape, check=False)

    def adjoint(self, v):
        self._check_out(v)
        out = self.matrix.T @ v.flat()
        return ImageBuffer.from_flat(out, *self.in_shape, check=False)

    def spectral_norm_sq(self):
        sv = np.linalg.svd(self.matrix, compute_uv=False)
        return float(sv[0] ** 2)


def super_resolution_operator(kernel: ImageBuffer, factor: int,
                              shape: tuple[int, int, int]) -> SuperResolutionOperator:
    """The (A, A^T) pair for stride-`factor` decimation of a circular blur."""
    return SuperResolutionOperator(kernel, factor, shape)


# ---------------------------------------------------------------------------
# problem specification
# ---------------------------------------------------------------------------

GAUSSIAN_LINEAR = "gaussian_linear"
SPECKLE = "speckle"


@dataclass(frozen=True)
class ProblemSpec:
    """Inverse-problem description: fidelity kind, forward operator,
    observation and regularization weight."""

    fidelity_kind: str
    op: LinearOperator
    y: Optional[ImageBuffer]
    lam: float
    sigma_y: float = 0.0
    noise_scaled: bool = True
    looks: int = 1
    eps_x: float = SPECKLE_FLOOR

    def __post_init__(self):
        if self.fidelity_kind not in (GAUSSIAN_LINEAR, SPECKLE):
            raise ConfigError(f"unknown fidelity kind {self.fidelity_kind!r}")
        if self.lam <= 0:
            raise ConfigError("regularization weight lambda must be positive")
        if self.fidelity_kind == SPECKLE:
            if self.looks < 1:
                raise ConfigError("number of looks must be >= 1")
            if not isinstance(self.op, IdentityOperator):
                raise ConfigError("speckle fidelity acts on the identity operator")

    def with_observation(self, y: ImageBuffer) -> "ProblemSpec":
        return replace(self, y=y)

    @property
    def lipschitz_f(self) -> float:
        """Exact Lipschitz constant of grad f (Gaussian-linear only)."""
        if self.fidelity_kind != GAUSSIAN_LINEAR:
            raise UnsupportedError("speckle fidelity is not globally L-smooth")
        top = self.op.spectral_norm_sq()
        if not self.noise_scaled:
            return top
        if self.sigma_y <= 0:
            raise ConfigError("noise-scaled fidelity needs sigma_y > 0")
        return top / self.sigma_y ** 2

    @property
    def requires_projection(self) -> bool:
        return self.fidelity_kind == SPECKLE

    def project(self, x: ImageBuffer) -> ImageBuffer:
        """Clamp into the fidelity domain (speckle: x >= eps_x)."""
        if self.fidelity_kind == SPECKLE:
            return ImageBuffer(np.maximum(x.data, self.eps_x), check=False)
        return x


def gaussian_problem(op: LinearOperator, y: Optional[ImageBuffer], lam: float,
                     sigma_y: float, noise_scaled: bool = True) -> ProblemSpec:
    return ProblemSpec(GAUSSIAN_LINEAR, op, y, lam, sigma_y=sigma_y,
                       noise_scaled=noise_scaled)


def speckle_problem(shape: tuple[int, int, int], y: Optional[ImageBuffer], lam: float,
                    looks: int, eps_x: float = SPECKLE_FLOOR) -> ProblemSpec:
    return ProblemSpec(SPECKLE, IdentityOperator(shape), y, lam,
                       looks=looks, eps_x=eps_x)


# ---------------------------------------------------------------------------
# fidelity evaluation
# ---------------------------------------------------------------------------

def _gauss_scale(p: ProblemSpec) -> float:
    if not p.noise_scaled:
        return 1.0
    if p.sigma_y <= 0:
        raise ConfigError("noise-scaled fidelity needs sigma_y > 0")
    return 1.0 / p.sigma_y ** 2


def eval_f(p: ProblemSpec, x: ImageBuffer) -> float:
    if p.y is None:
        raise ConfigError("problem has no observation")
    if p.fidelity_kind == GAUSSIAN_LINEAR:
        r = p.op.forward(x) - p.y
        return 0.5 * _gauss_scale(p) * r.norm() ** 2
    if np.any(x.data < p.eps_x):
        raise DomainError(
            f"speckle fidelity evaluated below the domain floor {p.eps_x}")
    return float(p.looks * np.sum(np.log(x.data) + p.y.data / x.data))


def grad_f(p: ProblemSpec, x: ImageBuffer) -> ImageBuffer:
    if p.y is None:
        raise ConfigError("problem has no observation")
    if p.fidelity_kind == GAUSSIAN_LINEAR:
        r = p.op.forward(x) - p.y
        return p.op.adjoint(r) * _gauss_scale(p)
    if np.any(x.data < p.eps_x):
        raise DomainError(
            f"speckle fidelity evaluated below the domain floor {p.eps_x}")
    g = p.looks * (1.0 / x.data - p.y.data / (x.data * x.data))
    return ImageBuffer(g, check=False)


def make_observation(p: ProblemSpec, x_true: ImageBuffer, rng: Rng) -> ImageBuffer:
    """Synthesize y from the clean image: A x + sigma_y N(0, I) for the
    Gaussian-linear model, x * Gamma(L, 1/L) speckle for the multiplicative
    model."""
    if p.fidelity_kind == GAUSSIAN_LINEAR:
        clean = p.op.forward(x_true)
        if p.sigma_y == 0.0:
            return clean
        noise = rng.normal(clean.shape)
        return ImageBuffer(clean.data + p.sigma_y * noise, check=False)
    if np.any(x_true.data < p.eps_x):
        raise ConfigError(f"speckle clean image must lie in [{p.eps_x}, 1]")
    s = rng.gamma(float(p.looks), x_true.shape) / float(p.looks)
    return ImageBuffer(x_true.data * s, check=False)
