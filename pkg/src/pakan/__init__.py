"""Pixel-adaptive spline-activation (KAN) modules for pansharpening.

The package bundles a small float64 autodiff engine, spline basis families,
the spatially/spectrally adaptive KAN operators and their fusion/refinement
blocks, a compact pansharpening network, a synthetic Wald-protocol data
pipeline, the standard quality-metric suite, and a training/inference CLI.
"""

from .backend import backend_name
from .blocks import Pakan1to1Block, Pakan2to1Block, couple, pakan_1to1, pakan_2to1
from .kan import (AdaptiveKanOperator, KanLayerConfig, StaticKanWeights,
                  WeightGenerator1D, WeightGenerator2D, adaptive_kan1d_forward,
                  adaptive_kan2d_forward, gen1d_weights, gen2d_weights,
                  static_kan_forward)
from .metrics import (MetricReport, d_lambda, d_s, ergas, hqnr, psnr, q2n,
                      q_index, sam)
from .network import (NetworkConfig, PansharpNet, build_network, l1_loss,
                      network_forward)
from .optim import AdamState, TrainConfig, adam_step, lr_at_epoch
from .splines import SplineBasisSpec, basis_eval, basis_grad, basis_stack
from .tensorgraph import (ParamStore, Tensor, backward, concat_channels,
                          conv2d, elementwise, global_avg_pool, no_grad,
                          resample, tensor)
from .tiling import TileSpec, tile_infer
from .train import load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
