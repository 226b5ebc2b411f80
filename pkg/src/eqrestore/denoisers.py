"""Denoisers: exact MMSE kinds for synthetic priors, analytically
tractable gradient-step kinds, and the equivariant wrapper.

The MMSE kinds (Gaussian and isotropic Gaussian-mixture priors) return
the exact posterior mean of the prior under additive Gaussian noise, so
the residual (x - D(x))/sigma^2 equals the smoothed-prior score in closed
form.  The gradient-step kinds expose the scalar potential h with
D = Id - grad h and a certified Lipschitz bound L_h < 1, which makes
D the proximal map of a weakly convex potential g (evaluated here by
exact fixed-point inversion of D).

The equivariant wrapper averages J_G^T D(G(x)) over a transformation
law: one draw per call (stochastic), the exact enumeration average for
finite groups, or an n-draw Monte-Carlo mean.
"""

from __future__ import annotations

import numpy as np

from .buffer import ImageBuffer, check_finite
from .conv import conv2d_circular, kernel_fft
from .errors import ConfigError, NumericError, UnsupportedError
from .rng import Rng
from .transforms import TransformLaw

_GATE_GRID = 128  # reference torus grid for spectral Lipschitz gates


def _strength(base: float, sigma: float, sigma0: float | None) -> float:
    """sigma-scaled strength: base * min(1, (sigma/sigma0)^2); base if unscaled."""
    if sigma0 is None:
        return base
    if sigma0 <= 0:
        raise ConfigError("sigma0 must be positive when sigma scaling is enabled")
    return base * min(1.0, (sigma / sigma0) ** 2)


class Denoiser:
    """Common denoiser interface; subclasses set the class flags."""

    is_gradient_step = False
    is_exact_mmse = False

    def __init__(self, sigma: float):
        if sigma < 0:
            raise ConfigError("noise level sigma must be nonnegative")
        self.sigma = float(sigma)

    def denoise(self, x: ImageBuffer) -> ImageBuffer:
        raise NotImplementedError

    def with_sigma(self, sigma: float) -> "Denoiser":
        raise NotImplementedError

    # gradient-step API ------------------------------------------------

    def h(self, x: ImageBuffer) -> float:
        raise UnsupportedError(f"{type(self).__name__} is not a gradient-step denoiser")

    def grad_h(self, x: ImageBuffer) -> ImageBuffer:
        """x - denoise(x), computed exactly that way."""
        if not self.is_gradient_step:
            raise UnsupportedError(f"{type(self).__name__} is not a gradient-step denoiser")
        return x - self.denoise(x)

    @property
    def lipschitz_h(self) -> float:
        raise UnsupportedError(f"{type(self).__name__} has no certified L_h")


class GaussianMMSE(Denoiser):
    """Exact posterior mean under a Gaussian prior with diagonal covariance.

    D(x) = mu + Sigma (Sigma + sigma^2 I)^{-1} (x - mu), elementwise for
    diagonal Sigma; `variances` is a scalar (isotropic) or a buffer of
    per-coordinate variances.
    """

    is_exact_mmse = True

    def __init__(self, mean, variances, sigma: float):
        super().__init__(sigma)
        if self.sigma <= 0:
            raise ConfigError("GaussianMMSE requires sigma > 0")
        self.mean = mean
        self.variances = variances
        v = variances.data if isinstance(variances, ImageBuffer) else float(variances)
        if np.any(np.asarray(v) <= 0):
            raise ConfigError("prior variances must be positive")

    def _mu(self, x: ImageBuffer) -> np.ndarray | float:
        return self.mean.data if isinstance(self.mean, ImageBuffer) else float(self.mean)

    def _var(self) -> np.ndarray | float:
        return (self.variances.data if isinstance(self.variances, ImageBuffer)
                else float(self.variances))

    def denoise(self, x: ImageBuffer) -> ImageBuffer:
        check_finite(x, "denoiser input")
        mu, v = self._mu(x), self._var()
        shrink = v / (v + self.sigma ** 2)
        return ImageBuffer(mu + shrink * (x.data - mu), check=False)

    def noisy_score(self, x: ImageBuffer) -> ImageBuffer:
        """Closed-form grad of -log p_sigma: (x - mu) / (Sigma + sigma^2)."""
        mu, v = self._mu(x), self._var()
        return ImageBuffer((x.data - mu) / (v + self.sigma ** 2), check=False)

    def with_sigma(self, sigma: float) -> "GaussianMMSE":
        return GaussianMMSE(self.mean, self.variances, sigma)


class GMMMMSE(Denoiser):
    """Exact posterior mean under an isotropic Gaussian-mixture prior.

    Components j have weight w_j, mean mu_j (scalar or buffer) and
    isotropic variance tau_j^2.  Responsibilities under noise level sigma
    are evaluated in log space for stability.
    """

    is_exact_mmse = True

    def __init__(self, weights, means, variances, sigma: float):
        super().__init__(sigma)
        if self.sigma <= 0:
            raise ConfigError("GMMMMSE requires sigma > 0")
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or len(w) != len(means) or len(w) != len(variances):
            raise ConfigError("weights, means, variances must have equal length")
        if np.any(w <= 0):
            raise ConfigError("mixture weights must be positive")
        self.weights = w / w.sum()
        self.means = list(means)
        self.variances = [float(t) for t in variances]
        if any(t <= 0 for t in self.variances):
            raise ConfigError("component variances must be positive")

    def _log_resp(self, x: ImageBuffer) -> np.ndarray:
        d = x.size
        logs = np.empty(len(self.weights))
        for j, (w, mu, tau2) in enumerate(zip(self.weights, self.means, self.variances)):
            mu_a = mu.data if isinstance(mu, ImageBuffer) else float(mu)
            s2 = tau2 + self.sigma ** 2
            sq = float(np.sum((x.data - mu_a) ** 2))
            logs[j] = np.log(w) - 0.5 * sq / s2 - 0.5 * d * np.log(s2)
        logs -= logs.max()
        return logs - np.log(np.sum(np.exp(logs)))

    def denoise(self, x: ImageBuffer) -> ImageBuffer:
        check_finite(x, "denoiser input")
        resp = np.exp(self._log_resp(x))
        out = np.zeros_like(x.data)
        for r, mu, tau2 in zip(resp, self.means, self.variances):
            mu_a = mu.data if isinstance(mu, ImageBuffer) else float(mu)
            shrink = tau2 / (tau2 + self.sigma ** 2)
            out += r * (mu_a + shrink * (x.data - mu_a))
        return ImageBuffer(out, check=False)

    def with_sigma(self, sigma: float) -> "GMMMMSE":
        return GMMMMSE(self.weights, self.means, self.variances, sigma)


class LinearSmoothing(Denoiser):
    """Gradient-step denoiser D = Id - a (Id - W) with W a circular
    convolution by a centrally symmetric kernel (so W is a symmetric
    operator and h(x) = (a/2) x^T (I - W) x is an exact potential).

    a = alpha0 * min(1, (sigma/sigma0)^2) when sigma0 is given, else
    alpha0.  L_h = a * max(1 - what) over the reference torus grid; the
    gate rejects L_h >= 1 at construction.
    """

    is_gradient_step = True

    def __init__(self, kernel: ImageBuffer, alpha0: float, sigma: float,
                 sigma0: float | None = None, _unchecked: bool = False):
        super().__init__(sigma)
        k = kernel.data[:, :, 0]
        if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise ConfigError("smoothing kernel dimensions must be odd")
        flip = k[::-1, ::-1]
        scale = max(1.0, float(np.abs(k).max()))
        if np.max(np.abs(k - flip)) > 1e-12 * scale:
            raise ConfigError("smoothing kernel must be centrally symmetric "
                              "(k[i,j] = k[-i,-j]) so the potential is exact")
        self.kernel = ImageBuffer((k + flip) / 2.0, check=False)
        self.alpha0 = float(alpha0)
        self.sigma0 = sigma0
        self.alpha = _strength(self.alpha0, self.sigma, sigma0)
        grid = max(_GATE_GRID, k.shape[0], k.shape[1])
        what = np.real(kernel_fft(self.kernel.data[:, :, 0], grid, grid))
        self._sym_range = (float(what.min()), float(what.max()))
        self._lip = abs(self.alpha) * max(abs(1.0 - what.min()), abs(1.0 - what.max()))
        if not _unchecked and self._lip >= 1.0:
            raise ConfigError(
                f"gradient-step gate: L_h = {self._lip:.4f} >= 1 (Assumption on the "
                "denoiser being a proximal gradient-step fails)")

    def denoise(self, x: ImageBuffer) -> ImageBuffer:
        check_finite(x, "denoiser input")
        if self.alpha == 0.0:
            return x
        smooth = conv2d_circular(x, self.kernel)
        return ImageBuffer(x.data - self.alpha * (x.data - smooth.data), check=False)

    def h(self, x: ImageBuffer) -> float:
        smooth = conv2d_circular(x, self.kernel)
        return 0.5 * self.alpha * float(np.sum(x.data * (x.data - smooth.data)))

    @property
    def lipschitz_h(self) -> float:
        return self._lip

    def lipschitz_h_on_grid(self, height: int, width: int) -> float:
        """Exact sup |a (1 - what)| on a specific image grid."""
        what = np.real(kernel_fft(self.kernel.data[:, :, 0], height, width))
        return abs(self.alpha) * float(np.max(np.abs(1.0 - what)))

    def with_sigma(self, sigma: float) -> "LinearSmoothing":
        return LinearSmoothing(self.kernel, self.alpha0, sigma, self.sigma0)


class HuberTV(Denoiser):
    """Gradient-step denoiser from a Huber-smoothed total-variation
    potential with circular forward differences along both axes:
    h(x) = c * sum_axes sum_i huber_eps(diff_i).  L_h = 8 c / eps by the
    spectral bound on the difference operator; the gate rejects >= 1.
    """

    is_gradient_step = True

    def __init__(self, c0: float, eps: float, sigma: float,
                 sigma0: float | None = None, _unchecked: bool = False):
        super().__init__(sigma)
        if eps <= 0:
            raise ConfigError("huber smoothing eps must be positive")
        self.c0 = float(c0)
        self.eps = float(eps)
        self.sigma0 = sigma0
        self.c = _strength(self.c0, self.sigma, sigma0)
        self._lip = 8.0 * abs(self.c) / self.eps
        if not _unchecked and self._lip >= 1.0:
            raise ConfigError(
                f"gradient-step gate: L_h = 8c/eps = {self._lip:.4f} >= 1")

    def _grad(self, arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(arr)
        for axis in (0, 1):
            d = np.roll(arr, -1, axis=axis) - arr
            psi = np.clip(d / self.eps, -1.0, 1.0)
            out += np.roll(psi, 1, axis=axis) - psi
        return self.c * out

    def denoise(self, x: ImageBuffer) -> ImageBuffer:
        check_finite(x, "denoiser input")
        return ImageBuffer(x.data - self._grad(x.data), check=False)

    def h(self, x: ImageBuffer) -> float:
        total = 0.0
        for axis in (0, 1):
            d = np.roll(x.data, -1, axis=axis) - x.data
            a = np.abs(d)
            quad = d * d / (2.0 * self.eps)
            lin = a - self.eps / 2.0
            total += float(np.sum(np.where(a <= self.eps, quad, lin)))
        return self.c * total

    @property
    def lipschitz_h(self) -> float:
        return self._lip

    def with_sigma(self, sigma: float) -> "HuberTV":
        return HuberTV(self.c0, self.eps, sigma, self.sigma0)


class FourierGradStep(Denoiser):
    """Linear gradient-step denoiser with an explicit frequency symbol for
    grad h: grad h(x) = F^{-1}(m . F x).  The symbol must be real and
    centrally symmetric on the grid (a symmetric operator); L_h = max|m|.

    Symbols with a negative band make D expansive there, which is how the
    test suite models non-proximal denoisers; constructing such a symbol
    with L_h >= 1 requires _unchecked=True.
    """

    is_gradient_step = True

    def __init__(self, symbol: np.ndarray, sigma: float, _unchecked: bool = False):
        super().__init__(sigma)
        m = np.asarray(symbol, dtype=np.float64)
        if m.ndim != 2:
            raise ConfigError("symbol must be a 2-d array on the image grid")
        sym_flip = np.roll(np.roll(m[::-1, ::-1], 1, axis=0), 1, axis=1)
        if np.max(np.abs(m - sym_flip)) > 1e-12 * max(1.0, np.abs(m).max()):
            raise ConfigError("symbol must satisfy m[p] = m[-p] (symmetric operator)")
        self.symbol = m
        self._lip = float(np.max(np.abs(m)))
        if not _unchecked and self._lip >= 1.0:
            raise ConfigError(f"gradient-step gate: L_h = {self._lip:.4f} >= 1")

    def _apply_symbol(self, arr: np.ndarray) -> np.ndarray:
        if arr.shape[:2] != self.symbol.shape:
            raise ConfigError(
                f"symbol grid {self.symbol.shape} does not match image {arr.shape[:2]}")
        spec = np.fft.fft2(arr, axes=(0, 1))
        return np.real(np.fft.ifft2(spec * self.symbol[:, :, None], axes=(0, 1)))

    def denoise(self, x: ImageBuffer) -> ImageBuffer:
        check_finite(x, "denoiser input")
        return ImageBuffer(x.data - self._apply_symbol(x.data), check=False)

    def h(self, x: ImageBuffer) -> float:
        return 0.5 * float(np.sum(x.data * self._apply_symbol(x.data)))

    @property
    def lipschitz_h(self) -> float:
        return self._lip

    def with_sigma(self, sigma: float) -> "FourierGradStep":
        return FourierGradStep(self.symbol, sigma, _unchecked=True)


class BoxDenoiser(Denoiser):
    """Clip to [0, 1]; 1-Lipschitz, neither MMSE nor gradient-step."""

    def denoise(self, x: ImageBuffer) -> ImageBuffer:
        check_finite(x, "denoiser input")
        return ImageBuffer(np.clip(x.data, 0.0, 1.0), check=False)

    def with_sigma(self, sigma: float) -> "BoxDenoiser":
        return BoxDenoiser(sigma)


# ---------------------------------------------------------------------------
# proximal potential of a gradient-step denoiser
# ---------------------------------------------------------------------------

def invert_gradient_step(d: Denoiser, x: ImageBuffer, u0: ImageBuffer | None = None,
                         tol: float = 1e-10, max_iter: int = 200) -> ImageBuffer:
    """Solve D(u) = x by the contraction u <- x + grad h(u) (L_h < 1)."""
    if not d.is_gradient_step:
        raise UnsupportedError("inversion needs a gradient-step denoiser")
    u = u0 if u0 is not None else x
    for _ in range(max_iter):
        nxt = x + d.grad_h(u)
        if (nxt - u).norm() <= tol:
            return nxt
        u = nxt
    raise NumericError(
        f"denoiser inversion did not reach {tol} within {max_iter} iterations")


def eval_g_prox(d: Denoiser, x: ImageBuffer, u0: ImageBuffer | None = None) -> float:
    """Potential g with D = Prox_g, evaluated on Im(D) with constant K = 0:
    g(x) = h(D^{-1}(x)) - 0.5 ||D^{-1}(x) - x||^2."""
    u = invert_gradient_step(d, x, u0)
    return d.h(u) - 0.5 * (u - x).norm() ** 2


def grad_g_prox(d: Denoiser, x: ImageBuffer, u0: ImageBuffer | None = None) -> ImageBuffer:
    """grad g at x in Im(D): the prox optimality gives grad g(x) = D^{-1}(x) - x."""
    u = invert_gradient_step(d, x, u0)
    return u - x


# ---------------------------------------------------------------------------
# equivariant wrapper
# ---------------------------------------------------------------------------

STOCHASTIC = "stochastic"
EXACT = "exact"
MONTE_CARLO = "monte_carlo"


class EquivariantDenoiser:
    """D~(x) = E_{G~pi} [ J_G^T D(G(x)) ] under the chosen evaluation mode."""

    def __init__(self, base: Denoiser, law: TransformLaw, mode: str = EXACT,
                 n_draws: int = 1):
        if mode not in (STOCHASTIC, EXACT, MONTE_CARLO):
            raise ConfigError(f"unknown equivariant mode {mode!r}")
        if mode == EXACT and not law.enumerable:
            raise UnsupportedError(
                f"exact equivariant averaging needs a finite group, got {law.name}")
        if mode == MONTE_CARLO and n_draws < 1:
            raise ConfigError("monte_carlo mode needs n_draws >= 1")
        self.base = base
        self.law = law
        self.mode = mode
        self.n_draws = int(n_draws)

    @property
    def sigma(self) -> float:
        return self.base.sigma

    def _term_denoise(self, transform, x: ImageBuffer) -> ImageBuffer:
        gx = transform.apply(x)
        return transform.jacobian_transpose(self.base.denoise(gx))

    def _term_score(self, transform, x: ImageBuffer) -> ImageBuffer:
        gx = transform.apply(x)
        resid = gx - self.base.denoise(gx)
        return transform.jacobian_transpose(resid) * (1.0 / self.base.sigma ** 2)

    def _evaluate(self, term_fn, x: ImageBuffer, rng: Rng | None) -> ImageBuffer:
        if self.mode == EXACT:
            elements = self.law.enumerate()
            weights = [w for _, w in elements]
            uniform = all(w == weights[0] for w in weights)
            acc = None
            if uniform:
                for t, _ in elements:
                    term = term_fn(t, x)
                    acc = term if acc is None else acc + term
                return acc * (1.0 / len(elements))
            for t, w in elements:
                term = term_fn(t, x) * w
                acc = term if acc is None else acc + term
            return acc
        if rng is None:
            raise ConfigError(f"{self.mode} mode needs an rng")
        if self.mode == STOCHASTIC:
            return term_fn(self.law.sample(rng, x.shape), x)
        acc = None
        for _ in range(self.n_draws):
            term = term_fn(self.law.sample(rng, x.shape), x)
            acc = term if acc is None else acc + term
        return acc * (1.0 / self.n_draws)

    def denoise(self, x: ImageBuffer, rng: Rng | None = None) -> ImageBuffer:
        return self._evaluate(self._term_denoise, x, rng)

    def score(self, x: ImageBuffer, rng: Rng | None = None) -> ImageBuffer:
        """(1/sigma^2) J_G^T (G(x) - D(G(x))), averaged per the mode: the
        equivariant estimate of grad of the smoothed regularization."""
        if self.base.sigma <= 0:
            raise ConfigError("score needs sigma > 0")
        return self._evaluate(self._term_score, x, rng)


def equivariant_denoise(ed: EquivariantDenoiser, x: ImageBuffer,
                        rng: Rng | None = None) -> ImageBuffer:
    return ed.denoise(x, rng)


def equivariant_score(ed: EquivariantDenoiser, x: ImageBuffer,
                      rng: Rng | None = None) -> ImageBuffer:
    return ed.score(x, rng)


# ---------------------------------------------------------------------------
# empirical Lipschitz estimation
# ---------------------------------------------------------------------------

def estimate_lipschitz(op, domain_sampler, n_pairs: int, rng: Rng) -> float:
    """Max of ||op(a) - op(b)|| / ||a - b|| over sampled pairs: a lower
    bound on the true constant."""
    best = 0.0
    for _ in range(int(n_pairs)):
        a = domain_sampler(rng)
        b = domain_sampler(rng)
        denom = (a - b).norm()
        if denom == 0.0:
            continue
        ratio = (op(a) - op(b)).norm() / denom
        best = max(best, ratio)
    return best


# ---------------------------------------------------------------------------
# config construction
# ---------------------------------------------------------------------------

def denoiser_from_name(name: str, sigma: float, params: dict | None = None) -> Denoiser:
    params = dict(params or {})
    if name == "gaussian_mmse":
        return GaussianMMSE(params.get("mean", 0.5), params.get("variance", 0.05), sigma)
    if name == "linear_smoothing":
        from .kernels import gaussian_kernel
        kern = params.get("kernel", gaussian_kernel(float(params.get("kernel_std", 1.0))))
        return LinearSmoothing(kern, float(params.get("alpha", 0.3)), sigma,
                               sigma0=params.get("sigma0", 25.0 / 255.0))
    if name == "huber_tv":
        return HuberTV(float(params.get("c", 2e-3)), float(params.get("eps", 0.05)),
                       sigma, sigma0=params.get("sigma0", 25.0 / 255.0))
    if name == "box":
        return BoxDenoiser(sigma)
    raise ConfigError(f"unknown denoiser {name!r} "
                      "(valid: gaussian_mmse, linear_smoothing, huber_tv, box)")
