"""Object-centric annotation and motion-effect engine for recorded RGB-D
volumetric video: track things in a clip, derive motion parameters, bind
labels / highlights / links / effects to them, replay deterministically,
stream to an authoring UI, export per-frame snapshots."""

from .camera import CameraIntrinsics, DEFAULT_INTRINSICS, pixel_to_world, world_to_pixel
from .container import ArraySequence, Sequence, SequenceWriter, load_sequence
from .frames import PointCloud, RgbdFrame, unproject
from .kinematics import (
    ParamSpec,
    SampleWindow,
    VariableRegistry,
    angle,
    area3,
    area4,
    commit_frame,
    distance,
    position,
    speed,
)
from .expressions import Template, eval_expr, eval_template, parse_expression, parse_template
from .project import Project, validate
from .scene import (
    Binding,
    ConnectedLink,
    EmbeddedVisual,
    ObjectHighlight,
    PropertyBinding,
    SceneGraph,
    TextAnnotation,
    billboard_orient,
)
from .effects import GhostEffect, GraphSeries, TrajectoryEffect
from .session import CameraPath, Session
from .synthetic import GroundTruth, SyntheticSpec, generate, write_synthetic
from .tracking import (
    ColorTrackerState,
    PoseTrack,
    TrackedPoint,
    attach_pose_sidecar,
    create_color_tracker,
    create_stationary,
    loss_metric,
    resolve_body,
    track_color,
)

__version__ = "0.1.0"
