from .config import ExperimentConfig, apply_overrides, load_config
from .experiment import MetricsRow, Pipeline, load_task, run_experiment, sweep
from .images import ImageGrid, load_image, save_pgm, smooth_image, standard_image
from .metrics import mse, psnr, ssim
from .signals import Composite, Signal1D, Sinusoid, Spike, make_signal

__all__ = [
    "ExperimentConfig", "apply_overrides", "load_config",
    "MetricsRow", "Pipeline", "load_task", "run_experiment", "sweep",
    "ImageGrid", "load_image", "save_pgm", "smooth_image", "standard_image",
    "mse", "psnr", "ssim",
    "Composite", "Signal1D", "Sinusoid", "Spike", "make_signal",
]
