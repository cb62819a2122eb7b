"""Encoder / dual-decoder matting network on plain numpy tensors."""
from .audit import count_macs, count_parameters, format_audit
from .model import NetworkOutputs, forward, hybrid_inference
from .spec import build_network
from .weights import WeightStore, init_weights, load_weights, save_weights

__all__ = ["NetworkOutputs", "WeightStore", "build_network", "count_macs", "count_parameters",
           "format_audit", "forward", "hybrid_inference", "init_weights", "load_weights",
           "save_weights"]
