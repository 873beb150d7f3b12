"""Simulator and algorithm library for the Swapped Dragonfly D3(K, M)."""

from .topology import Channel, GroupSpec, RouterCoord, Topology, build_topology, d3, embed_subnetwork
from .routing import WILD, SourceVector, SyncHeader, destination, expand_vector, step_sync_header
from .engine import Round, SimReport, TimedSchedule, pipeline, simulate

__version__ = "0.1.0"

__all__ = [
    "Channel", "GroupSpec", "RouterCoord", "Topology", "build_topology", "d3", "embed_subnetwork",
    "WILD", "SourceVector", "SyncHeader", "destination", "expand_vector", "step_sync_header",
    "Round", "SimReport", "TimedSchedule", "pipeline", "simulate",
]
