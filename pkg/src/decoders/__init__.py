"""
Joint image / segmentation decoding
"""
from .blocks import CrossDecoderInteractionBlock, cdib_forward
from .joint_decoder import DecoderConfig, JointSegmentationDecoder

__all__ = ['CrossDecoderInteractionBlock', 'cdib_forward', 'DecoderConfig', 'JointSegmentationDecoder']
