"""Build MapSystems from validated system tables."""

from __future__ import annotations

from .. import perturbation as pt
from .. import torus_dynamics as td


def build(spec: dict) -> td.MapSystem:
    kind = spec["kind"]
    if kind == "linear_anosov":
        return td.make_linear_anosov(spec["matrix"])
    if kind == "linear_automorphism":
        return td.make_linear_automorphism(spec["matrix"])
    if kind == "standard_map":
        return td.make_standard_map(spec["lambda"])
    if kind == "product":
        return td.make_product(build(spec["left"]), build(spec["right"]))
    base = build(spec["base"])
    tw = spec["twist"]
    if base.center_plane is None:
        raise ValueError("perturbed systems need a base with a 2-dimensional center")
    twist = pt.build_twist(tw["center"], tw["delta"], tw["beta"], tw["r"], base.center_plane)
    return pt.perturbed_system(base, twist)


def unperturbed(spec: dict) -> dict:
    """The system table with every twist removed."""
    while spec["kind"] == "perturbed":
        spec = spec["base"]
    return spec


CAT = {"kind": "linear_anosov", "matrix": [[2, 1], [1, 1]]}


def standard(lam: float) -> dict:
    return {"kind": "standard_map", "lambda": lam}


def cat_times(right: dict) -> dict:
    return {"kind": "product", "left": dict(CAT), "right": right}


ROT90 = {"kind": "linear_automorphism", "matrix": [[0, -1], [1, 0]]}
