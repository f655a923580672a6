"""Symbolic mapping: labels and losses, heatmap decoding, template detection, noisy oracle."""

from vsrl.perceive.extract import (DetectorExtractor, OracleExtractor, detections_to_state, make_extractor,
                                   noisy_oracle)
from vsrl.perceive.heatmap import STRIDE, TAU, Detection, Heatmap, decode_peaks, ncc_map, template_detect
from vsrl.perceive.labels import create_labels, focal_loss, focal_loss_grad, offset_loss

__all__ = ["STRIDE", "TAU", "Detection", "DetectorExtractor", "Heatmap", "OracleExtractor", "create_labels",
           "decode_peaks", "detections_to_state", "focal_loss", "focal_loss_grad", "make_extractor", "ncc_map",
           "noisy_oracle", "offset_loss", "template_detect"]
