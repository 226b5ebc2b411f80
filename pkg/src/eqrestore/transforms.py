"""Transformation groups with sampling, application and Jacobian transposes.

A Transform acts on image buffers; for the linear isometries (quarter
rotations, axis flips, circular translations) the Jacobian transpose is
the inverse transformation and the action preserves the Euclidean norm
exactly.  Random-shift transforms (the noising case) have identity
Jacobian.  Subpixel rotation is implemented with the three-shear raster
decomposition using circularly wrapped fractional shifts (FFT phase
ramps); the discrete operator is only approximately orthogonal, and its
Jacobian transpose is defined as rotation by the opposite angle.

A TransformLaw is a distribution over transforms supplying sample(),
exhaustive enumerate() for finite groups, and a variance bound for the
shift laws.
"""

from __future__ import annotations

import numpy as np

from .buffer import ImageBuffer
from .errors import ConfigError, DimensionError, UnsupportedError
from .rng import Rng


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

class Transform:
    """Base transform: deterministic map plus its Jacobian transpose."""

    is_isometry = False

    def apply(self, x: ImageBuffer) -> ImageBuffer:
        raise NotImplementedError

    def jacobian_transpose(self, v: ImageBuffer) -> ImageBuffer:
        raise NotImplementedError

    def id_str(self) -> str:
        raise NotImplementedError


class IdentityTransform(Transform):
    is_isometry = True

    def apply(self, x):
        return x

    def jacobian_transpose(self, v):
        return v

    def id_str(self):
        return "id"


class Rot90(Transform):
    """Counter-clockwise quarter rotations: out[r, c] = in[c, W-1-r] for k=1."""

    is_isometry = True

    def __init__(self, k: int):
        self.k = int(k) % 4

    def apply(self, x):
        if self.k == 0:
            return x
        return ImageBuffer(np.rot90(x.data, self.k, axes=(0, 1)).copy(), check=False)

    def jacobian_transpose(self, v):
        if self.k == 0:
            return v
        return ImageBuffer(np.rot90(v.data, -self.k, axes=(0, 1)).copy(), check=False)

    def id_str(self):
        return f"rot90:{self.k}"


class Flip(Transform):
    """Axis flips: horizontal mirrors left-right, vertical top-bottom."""

    is_isometry = True
    _AXES = {"none": (), "horizontal": (1,), "vertical": (0,), "both": (0, 1)}

    def __init__(self, mode: str):
        if mode not in self._AXES:
            raise ConfigError(f"unknown flip mode {mode!r}")
        self.mode = mode

    def apply(self, x):
        axes = self._AXES[self.mode]
        if not axes:
            return x
        return ImageBuffer(np.flip(x.data, axis=axes).copy(), check=False)

    jacobian_transpose = apply  # flips are involutions

    def id_str(self):
        return f"flip:{self.mode}"


class CircularTranslate(Transform):
    """Periodic shift by (dx, dy): dx moves content along width, dy along height."""

    is_isometry = True

    def __init__(self, dx: int, dy: int):
        self.dx = int(dx)
        self.dy = int(dy)

    def apply(self, x):
        if self.dx == 0 and self.dy == 0:
            return x
        return ImageBuffer(np.roll(x.data, (self.dy, self.dx), axis=(0, 1)), check=False)

    def jacobian_transpose(self, v):
        if self.dx == 0 and self.dy == 0:
            return v
        return ImageBuffer(np.roll(v.data, (-self.dy, -self.dx), axis=(0, 1)), check=False)

    def id_str(self):
        return f"shift:{self.dx},{self.dy}"


class SubpixelRotate(Transform):
    """Raster rotation by an arbitrary angle via three circular shears.

    The angle is reduced to an exact quarter-turn plus a residual in
    [-pi/4, pi/4] handled by the shear passes, which keeps the shear
    magnitudes small.  The Jacobian transpose is rotation by -theta,
    realized as the reversed composition (negated shears, then the
    opposite quarter-turn), so it inverts apply() up to the small
    non-orthogonality of the discrete shears.
    """

    def __init__(self, theta: float):
        self.theta = float(theta)

    def apply(self, x):
        return ImageBuffer(_raster_rotate(x.data, self.theta), check=False)

    def jacobian_transpose(self, v):
        return ImageBuffer(_raster_rotate(v.data, self.theta, reverse=True),
                           check=False)

    def id_str(self):
        return f"rot:{self.theta:+.6f}"


class NoiseShift(Transform):
    """Additive shift x + scale * z with a fixed buffer-shaped draw z."""

    def __init__(self, z: np.ndarray, scale: float):
        self.z = np.asarray(z, dtype=np.float64)
        self.scale = float(scale)

    def apply(self, x):
        if x.data.shape != self.z.shape:
            raise DimensionError(
                f"shift field shape {self.z.shape} does not match image {x.data.shape}")
        return ImageBuffer(x.data + self.scale * self.z, check=False)

    def jacobian_transpose(self, v):
        return v

    def id_str(self):
        return "noise"


def _frac_shift_rows(arr: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Circularly shift each row i by shifts[i], fractional via FFT phase
    ramps: near-unitary (only the Nyquist bin is projected to keep the
    output real), so the three-shear rotation is almost orthogonal."""
    n = arr.shape[1]
    freqs = np.fft.fftfreq(n)[None, :]
    phase = np.exp(-2j * np.pi * freqs * shifts[:, None])
    spec = np.fft.fft(arr, axis=1)
    return np.real(np.fft.ifft(spec * phase[:, :, None], axis=1))


def _raster_rotate(arr: np.ndarray, theta: float, reverse: bool = False) -> np.ndarray:
    # exact quarter turns plus a shear residual within [-pi/4, pi/4];
    # reverse applies the inverse composition (negated shears, then the
    # opposite quarter-turn)
    quarter = int(np.round(theta / (np.pi / 2.0)))
    resid = theta - quarter * (np.pi / 2.0)
    sign = -1.0 if reverse else 1.0

    def shears(data: np.ndarray) -> np.ndarray:
        if abs(resid) < 1e-15:
            return data
        h, w = data.shape[:2]
        a = sign * -np.tan(resid / 2.0)
        b = sign * np.sin(resid)
        rows = np.arange(h) - (h - 1) / 2.0
        cols = np.arange(w) - (w - 1) / 2.0
        data = _frac_shift_rows(data, a * rows)
        data = _frac_shift_rows(data.transpose(1, 0, 2), b * cols).transpose(1, 0, 2)
        return _frac_shift_rows(data, a * rows)

    if reverse:
        return np.rot90(shears(arr), -quarter % 4, axes=(0, 1)).copy()
    return shears(np.rot90(arr, quarter % 4, axes=(0, 1)).copy())


# ---------------------------------------------------------------------------
# laws
# ---------------------------------------------------------------------------

class TransformLaw:
    """Distribution over a transformation set."""

    enumerable = False
    name = "law"

    def sample(self, rng: Rng, shape: tuple[int, int, int] | None = None) -> Transform:
        raise NotImplementedError

    def enumerate(self) -> list[tuple[Transform, float]]:
        raise UnsupportedError(f"{self.name} is not enumerable")

    def variance_bound(self, shape: tuple[int, int, int] | None = None) -> float | None:
        """mu^2 bound on E||G(x) - E G(x)||^2 when known uniformly in x."""
        return None


class IdentityLaw(TransformLaw):
    enumerable = True
    name = "identity"

    def sample(self, rng, shape=None):
        return IdentityTransform()

    def enumerate(self):
        return [(IdentityTransform(), 1.0)]

    def variance_bound(self, shape=None):
        return 0.0


class Rot90Law(TransformLaw):
    enumerable = True
    name = "rot90"

    def sample(self, rng, shape=None):
        return Rot90(int(rng.integers(0, 3)))

    def enumerate(self):
        return [(Rot90(k), 0.25) for k in range(4)]


class FlipLaw(TransformLaw):
    enumerable = True
    name = "flip"
    _MODES = ("none", "horizontal", "vertical", "both")

    def sample(self, rng, shape=None):
        return Flip(self._MODES[int(rng.integers(0, 3))])

    def enumerate(self):
        return [(Flip(m), 0.25) for m in self._MODES]


class TranslateLaw(TransformLaw):
    enumerable = True
    name = "translate"

    def __init__(self, max_shift: int = 8):
        if max_shift < 0:
            raise ConfigError("max_shift must be nonnegative")
        self.max_shift = int(max_shift)

    def sample(self, rng, shape=None):
        dx = int(rng.integers(-self.max_shift, self.max_shift))
        dy = int(rng.integers(-self.max_shift, self.max_shift))
        return CircularTranslate(dx, dy)

    def enumerate(self):
        m = self.max_shift
        span = 2 * m + 1
        w = 1.0 / (span * span)
        return [(CircularTranslate(dx, dy), w)
                for dy in range(-m, m + 1) for dx in range(-m, m + 1)]


class SubpixelRotationLaw(TransformLaw):
    name = "subpixel_rotation"

    def sample(self, rng, shape=None):
        theta = float(rng.uniform()) * 2.0 * np.pi - np.pi
        return SubpixelRotate(theta)


class GaussianShiftLaw(TransformLaw):
    """Additive Gaussian shifts x + sigma * z, z ~ N(0, I_d)."""

    name = "gaussian_shift"

    def __init__(self, sigma: float):
        if sigma < 0:
            raise ConfigError("shift scale must be nonnegative")
        self.sigma = float(sigma)

    def sample(self, rng, shape=None):
        if shape is None:
            raise ConfigError("gaussian_shift sampling needs the target shape")
        z = rng.normal(shape)
        return NoiseShift(z, self.sigma)

    def variance_bound(self, shape=None):
        if shape is None:
            return None
        d = int(np.prod(shape))
        return self.sigma ** 2 * d


class MixtureLaw(TransformLaw):
    """Draw a sub-law first (uniform unless weights given), then a member."""

    name = "mixture"

    def __init__(self, laws: list[TransformLaw], weights: list[float] | None = None):
        if not laws:
            raise ConfigError("mixture needs at least one law")
        if weights is None:
            weights = [1.0 / len(laws)] * len(laws)
        if len(weights) != len(laws) or any(w < 0 for w in weights):
            raise ConfigError("mixture weights must be nonnegative, one per law")
        total = sum(weights)
        if total <= 0:
            raise ConfigError("mixture weights must not all vanish")
        self.laws = list(laws)
        self.weights = [w / total for w in weights]
        self.enumerable = all(law.enumerable for law in laws)

    def sample(self, rng, shape=None):
        u = float(rng.uniform())
        acc = 0.0
        pick = self.laws[-1]
        for law, w in zip(self.laws, self.weights):
            acc += w
            if u < acc:
                pick = law
                break
        return pick.sample(rng, shape)

    def enumerate(self):
        if not self.enumerable:
            raise UnsupportedError("mixture contains non-enumerable laws")
        out = []
        for law, w in zip(self.laws, self.weights):
            out.extend((t, w * tw) for t, tw in law.enumerate())
        return out


def all_transformations_law(max_shift: int = 8, shift_sigma: float = 0.0,
                            weights: list[float] | None = None) -> MixtureLaw:
    """The 'draw among all previous sets' mixture: rotations, flips,
    translations, subpixel rotations and, when shift_sigma > 0, Gaussian
    noising."""
    laws: list[TransformLaw] = [Rot90Law(), FlipLaw(), TranslateLaw(max_shift),
                                SubpixelRotationLaw()]
    if shift_sigma > 0:
        laws.append(GaussianShiftLaw(shift_sigma))
    return MixtureLaw(laws, weights)


_LAW_BUILDERS = {
    "identity": lambda params: IdentityLaw(),
    "rot90": lambda params: Rot90Law(),
    "rotation": lambda params: Rot90Law(),
    "flip": lambda params: FlipLaw(),
    "translate": lambda params: TranslateLaw(int(params.get("max_shift", 8))),
    "subpixel_rotation": lambda params: SubpixelRotationLaw(),
    "gaussian_shift": lambda params: GaussianShiftLaw(float(params["sigma"])),
    "all": lambda params: all_transformations_law(
        int(params.get("max_shift", 8)), float(params.get("sigma", 0.0))),
}


def law_from_name(name: str, params: dict | None = None) -> TransformLaw:
    params = params or {}
    try:
        builder = _LAW_BUILDERS[name]
    except KeyError:
        raise ConfigError(
            f"unknown transform law {name!r} (valid: {sorted(_LAW_BUILDERS)})") from None
    try:
        return builder(params)
    except KeyError as exc:
        raise ConfigError(f"law {name!r} missing parameter {exc}") from None
