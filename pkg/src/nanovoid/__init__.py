"""Phase-field void evolution: simulation, parameter learning, annotation."""

from .annot import (Annotation, annotation_from_json_dict, annotation_to_json_dict,
                    compose_mask, iou, load_annotation, rasterize_strokes,
                    save_annotation)
from .energy import (PARAM_NAMES, ModelParams, ParamBounds, bulk_partials,
                     chemical_potentials, total_free_energy, variational_derivatives)
from .errors import (AbortedError, DimensionMismatchError, DivergedError,
                     GradientUnavailable, InvalidKError, LabelOutOfRangeError,
                     NanovoidError, SchemaError, StaleAnnotationError)
from .grid import Mask, ScalarField, laplacian, threshold
from .learn import (DEFAULT_BOUNDED, LossReport, TrainConfig, box_bounds,
                    default_init, extract_state, fit, grad, loss, pixel_accuracy,
                    predict_masks)
from .sim import (PhaseState, Trajectory, render_frame, run, stable_dt, step,
                  synth_two_voids, two_void_state)
from .slic import SuperpixelMap, boundaries, enforce_connectivity, slic_segment
from .storage import (load_field, load_state, load_trajectory, save_field,
                      save_state, save_trajectory)

__version__ = "0.1.0"

__all__ = [
    "PARAM_NAMES", "DEFAULT_BOUNDED", "__version__",
    "ModelParams", "ParamBounds", "ScalarField", "Mask", "PhaseState",
    "Trajectory", "LossReport", "TrainConfig", "SuperpixelMap", "Annotation",
    "NanovoidError", "DivergedError", "GradientUnavailable", "AbortedError",
    "DimensionMismatchError", "InvalidKError", "StaleAnnotationError",
    "LabelOutOfRangeError", "SchemaError",
    "laplacian", "threshold", "bulk_partials", "chemical_potentials",
    "variational_derivatives", "total_free_energy",
    "step", "run", "stable_dt", "render_frame", "two_void_state", "synth_two_voids",
    "extract_state", "loss", "grad", "fit", "predict_masks", "pixel_accuracy",
    "box_bounds", "default_init",
    "slic_segment", "enforce_connectivity", "boundaries",
    "compose_mask", "iou", "rasterize_strokes",
    "annotation_to_json_dict", "annotation_from_json_dict",
    "save_annotation", "load_annotation",
    "save_field", "load_field", "save_state", "load_state",
    "save_trajectory", "load_trajectory",
]
