"""Learned de-aliasing for undersampled medical-style imaging.

The package simulates parsimonious acquisitions (masked k-space or
sparse-view tomographic projections), crudely inverts them (zero-filled
inverse FFT / filtered back projection), and trains a single-layer
autoencoder with a robust l1 reconstruction cost to map the aliased
results back to clean images.  Classical sparse-recovery solvers (ISTA,
OMP) and NMSE/PSNR/SSIM metrics support benchmarking.
"""

from .autoencoder import (
    AutoencoderModel,
    SplitBregmanState,
    TrainConfig,
    TrainingSet,
    activate,
    l2_loss_and_grads,
    load_model,
    objective_l1,
    penalty_objective,
    save_model,
    soft_threshold,
    solve_ridge_least_squares,
    split_bregman_step,
    train_l2_baseline,
    train_robust,
)
from .bench import BenchResult, run_benchmark
from .config import RunConfig, resolve_config
from .core import (
    FormatError,
    NumericFailure,
    SeededRng,
    generate_phantom,
    random_phantom,
    read_tensor,
    write_pgm,
    write_tensor,
)
from .cs import (
    CsSolveReport,
    LinearOperator,
    cs_reconstruct_image,
    ista_solve,
    masked_fourier_operator,
    max_eigenvalue,
    omp_solve,
    operator_from_matrix,
)
from .metrics import MetricReport, MetricRow, nmse, psnr, ssim
from .pipeline import (
    DegradationSpec,
    PatchGrid,
    build_training_set,
    degrade,
    extract_patches,
    load_manifest,
    reassemble_patches,
    reconstruct_image,
)
from .transforms import (
    ProjectionSet,
    SamplingMask,
    SparsifyingTransform,
    backproject,
    fbp_reconstruct,
    fft2,
    make_mask,
    radon_forward,
    sparsify,
    zero_fill_invert,
)

__version__ = "0.1.0"
