"""Desk-scale neural point-cloud rendering with noise-resistant multi-plane
voxelisation and multi-frequency patch adversarial training.

The pipeline: project a colored point cloud into a camera frustum split
into depth planes, aggregate per-voxel features with weights that blend
spatial and color proximity (so injected noise is down-weighted), then
train a 3-D U-Net against patch discriminators operating on RGB, Fourier
magnitude, and wavelet detail channels of the rendered/real image pair.
"""

from .geometry import (
    CameraIntrinsics,
    CameraPose,
    CameraView,
    Frustum,
    PlyParseError,
    PointCloud,
    backproject,
    frustum_cull,
    load_intrinsics,
    load_ply,
    load_poses,
    make_synthetic_scene,
    project,
    project_points,
    save_intrinsics,
    save_ply,
    save_poses,
    visibility_mask,
)
from .voxelisation import (
    MultiPlaneVolume,
    RasterImage,
    VoxelConfig,
    aggregate_voxel,
    assign_plane,
    corrupt_cloud,
    feature_distance,
    load_volume,
    noise_ablation,
    rasterize_zbuffer,
    save_volume,
    spatial_distance,
    voxelise,
    write_ablation_csv,
)
from .spectral import (
    DwtSubbands,
    dft2_magnitude,
    dwt2_haar,
    idwt2_haar,
    sharpness_fm,
    to_grayscale,
)
from .networks import (
    LayerSpec,
    Network,
    NetworkSpec,
    build_discriminator,
    build_generator,
    build_network,
    discriminator_spec,
    generator_spec,
    load_checkpoint,
    save_checkpoint,
)
from .adversarial import (
    GanLabels,
    PerceptualConfig,
    assemble_dwt_input,
    assemble_fourier_input,
    assemble_rgb_input,
    as_disc_batch,
    g_loss,
    g_loss_terms,
    lsgan_d_loss,
    perceptual_loss,
    total_d_loss,
    write_loss_csv,
)
from .training import (
    AdamOptimizer,
    TrainConfig,
    TrainSample,
    TrainState,
    adam_step,
    fit,
    init_training,
    load_train_checkpoint,
    lr_schedule,
    random_crop,
    save_train_checkpoint,
    train_step,
    volume_to_input,
)
from .metrics import MetricReport, psnr, report, ssim
from . import autodiff

__version__ = "0.1.0"
