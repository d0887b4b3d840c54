"""Blind receiver DSP: front end, timing, equalization, carrier recovery,
decision."""

from .chain import DspReport, RxConfig, receive
from .decision import decide_demap

__all__ = ["RxConfig", "DspReport", "receive", "decide_demap"]
