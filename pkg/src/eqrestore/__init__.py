"""eqrestore: equivariant plug-and-play image restoration.

A numpy library implementing regularization-by-denoising and
plug-and-play solvers with equivariant denoisers driven by pluggable
transformation groups, analytically tractable stand-in denoisers (exact
Gaussian/GMM posterior means, linear smoothing and Huber-TV gradient
steps), synthetic inverse problems (deblurring, super-resolution,
despeckling), and a verification harness that checks the convergence
statements numerically on closed-form instances.
"""

from .buffer import ImageBuffer
from .conv import conv2d_circular
from .denoisers import (BoxDenoiser, Denoiser, EquivariantDenoiser,
                        FourierGradStep, GaussianMMSE, GMMMMSE, HuberTV,
                        LinearSmoothing, equivariant_denoise, equivariant_score,
                        estimate_lipschitz, eval_g_prox)
from .errors import (ConfigError, DimensionError, DivergedError, DomainError,
                     EqrestoreError, NumericError, ParseError, UnsupportedError)
from .fidelity import (BlurOperator, DenseOperator, IdentityOperator,
                       ProblemSpec, SuperResolutionOperator, eval_f,
                       gaussian_problem, grad_f, make_observation,
                       speckle_problem, super_resolution_operator)
from .kernels import dirac_kernel, gaussian_kernel, kernel_by_name, motion_kernel
from .metrics import MetricReport, metric_report, mse, psnr, ssim
from .netpbm import read_netpbm, write_netpbm
from .rng import Rng
from .solvers import (RunTrace, SolverConfig, StepSchedule, TraceOptions,
                      constant_schedule, default_x0, epnp_step, ered_step,
                      linear_sigma_schedule, pnp_step, power_schedule, red_step,
                      run, snopnp_step)
from .textures import synthetic_texture
from .transforms import (CircularTranslate, Flip, GaussianShiftLaw, IdentityLaw,
                         IdentityTransform, MixtureLaw, NoiseShift, Rot90,
                         Rot90Law, FlipLaw, SubpixelRotate, SubpixelRotationLaw,
                         Transform, TransformLaw, TranslateLaw,
                         all_transformations_law, law_from_name)
from .verify import (CHECKS, CheckReport, SyntheticProblem, default_instance,
                     finite_difference_gradient, prox_instance, run_checks)

__version__ = "0.1.0"
