"""meshwire: landmark mesh streaming over paired peers.

Half-precision mesh frame codec, landmark-frame geometry and
calibration, a room-based signaling service that clusters across
instances, and a peer transport for the frames themselves.
"""

from .codec import (
    FRAME_SIZE,
    LANDMARK_COUNT,
    DecodedFrame,
    FramePacer,
    IDENTITY_POSE,
    MeshPose,
    budget,
    decode_frame,
    encode_frame,
    f16_to_f32,
    f32_to_f16,
    f64_to_f16,
    h264_reference_rate,
)
from .facemesh import (
    CalibrationState,
    IDENTITY_CALIBRATION,
    LandmarkFrame,
    TessellationTable,
    apply_calibration,
    calibrate,
    face_normal,
    read_recording,
    write_recording,
)
from .geometry import (
    CameraPose,
    EulerAngles,
    Quaternion,
    Vec3,
    euler_to_quaternion,
    project,
    quaternion_between,
)
from .client import BenchResult, PairResult, RunReport, loopback_bench, run_pair
from .cluster import ClusterHandle, spawn_cluster
from .instance import SignalInstance
from .synth import canonical_face, generate_frames, grid_tessellation

__version__ = "0.1.0"
