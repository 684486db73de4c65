"""Space-dependent SU(2) gate simulation and tomography toolkit."""

from .su2 import (
    AxisAngle,
    ProcessMap,
    SphericalAxis,
    axis_angle_from_su2,
    axis_from_spherical,
    canonicalize_sign,
    compose,
    global_negate,
    map_fidelity,
    pixel_fidelity,
    spherical_from_axis,
    su2_from_axis_angle,
    waveplate,
)
from .forward import (
    MeasurementStack,
    StokesState,
    STOKES,
    MEASUREMENT_PAIRS,
    add_noise,
    measurement_stack,
    polarimetric_infidelity,
    projective_intensity,
)
from .processes import (
    FourierFieldSpec,
    GeneratorConfig,
    PlateSpec,
    corpus_sample,
    plate_process,
    random_process,
    rotate_frame,
    sample_fourier_field,
    single_plate_random,
)
from .reconstruct import (
    GAConfig,
    MLEConfig,
    invert_pixel,
    pixel_cost,
    reconstruct_map_ga,
    reconstruct_map_mle,
    stitch_signs,
)
from .datasetio import (
    CorruptDatasetError,
    DatasetManifest,
    DatasetReader,
    read_dataset,
    write_dataset,
)

__version__ = "0.1.0"
