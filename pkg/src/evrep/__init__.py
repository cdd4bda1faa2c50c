"""evrep: event-camera streams to dense, decay-weighted representations."""

from .events import (Event, EventArrays, EventWindow, SensorGeometry,
                     StreamFormatError, StreamValidationError, elapsed_dt,
                     merge_streams, read_event_array, read_event_stream,
                     window_stream)
from .surfaces import (METHODS, PRESETS, ConfigError, DecayMap, Histogram,
                       PatchGrid, RepresentationConfig, SurfaceState,
                       accumulate_histogram, build_representation,
                       clip_normalize, er_decay, global_decay_factor,
                       interpolate_decay_map, log_decay, log_edge_map,
                       log_patch_score, patch_event_rates, preset_config,
                       update_surface, warm_up)
from .spectral import (HighPassMask, QuadTreeNode, fft_decay, high_pass_mask,
                       nonrecursive_fft_grid, power_spectrum, quadtree_cell_grid,
                       rasterize_quadtree, recursive_fft_grid)
from .synth import blink_scene_spec, bench_scene, synthesize_stream
from .annotations import (FaceAnnotation, ValidationReport, interpolate_labels,
                          validate_annotations)
from .metrics import Detection, LandmarkPrediction, dataset_nme, iou, map50, nme

__version__ = "0.1.0"
