"""Oriented-box detection kernels: midpoint-offset coding, rotated IoU and
NMS, rotated RoIAlign, losses and VOC-style evaluation."""
from .coder import AnchorSpec, AssignResult, assign_labels, decode, encode, generate_anchors, sample_minibatch
from .evaluation import (Annotations, Detections, GtInstance, PrCurve, average_precision, evaluate_map,
                         match_detections, proposal_recall)
from .geometry import (GeometryError, external_hbox, midpoint_from_quad, parallelogram_to_rect, rect_to_quad,
                       vertices_from_midpoint)
from .losses import LossReport, binary_ce, head_loss, rpn_loss, smooth_l1
from .overlap import hbox_iou, nms, quad_intersection_area, quad_iou, rasterized_iou_oracle, topk_by_score
from .pipeline import (TileScheme, clip_annotations_to_tile, merge_patches, postprocess_detections,
                       select_proposals, tile_offsets)
from .roialign import FeatureMap, bilinear_sample, project_rroi, rroi_align

__version__ = "0.1.0"
