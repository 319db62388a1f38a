"""Explainable texture generation via successive block transforms.

Fit a two-stage channel-wise block transform over patches of one exemplar,
model the coarsest subspace with a cluster/ICA/histogram-matching generator,
sample new patches through the inverse transform, and quilt them into large
textures.
"""

from .errors import FormatError, SamplingError, TexhopError
from .image_io import Image, extract_patches, load_image, save_image
from .saab import (
    ChannelRule,
    HopChain,
    HopSpec,
    SaabStage,
    default_hop_specs,
    fit_chain,
    fit_saab,
    forward_chain,
    forward_stage,
    inverse_chain,
    inverse_stage,
    select_channels,
)
from .core import (
    CdfCodebook,
    Cluster,
    CoreModel,
    SdrModel,
    build_inverse_cdf,
    fit_core,
    fit_sdr,
    forward_sdr,
    inverse_sdr,
    match_histogram,
    sample_core,
)
from .quilting import BACKEND as QUILT_BACKEND, QuiltConfig, SeamCut, min_error_cut, quilt
from .pipeline import (
    Provenance,
    RunRecord,
    SizeReport,
    TextureModel,
    TrainConfig,
    audit_size,
    closed_form_size,
    deserialize,
    generate_patches,
    serialize,
    timing_report,
    train,
    walk_parameters,
)

__version__ = "0.1.0"
