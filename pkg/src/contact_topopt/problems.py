"""Preset design domains for the two-dimensional examples.

Load patches are short segments so that a point-like force is applied over a
few edges. Where the original setting is only shown in a figure, the
placement below is a plausible reading, not a measured one.
"""
from .mesh import DomainSpec

PRESETS = {
    # unit square with a centered hole; clamped sides, contact below, load on top
    "ex1": dict(
        kind="square_with_hole", params=dict(side=1.0, hole_center=(0.5, 0.5), hole_radius=0.2), h=0.05,
        boundary=dict(bottom="C", right="D", top="F, N 0.45 0.55", left="D", hole="F"),
        algorithm="shape", C=0.95, overrides=dict(volume_control="projection", step_factor=5e-2)),
    # same domain, three load patches
    "ex2": dict(
        kind="square_with_hole", params=dict(side=1.0, hole_center=(0.5, 0.5), hole_radius=0.2), h=0.05,
        boundary=dict(bottom="C", right="D", left="D", hole="F",
                      top="F, N 0.15 0.25, N 0.45 0.55, N 0.75 0.85"),
        algorithm="shape", C=0.95, overrides=dict(volume_control="projection", step_factor=5e-2)),
    # cantilever clamped on the left, loaded at mid-height on the right,
    # resting on a rigid support under the middle of the bottom edge
    "ex3a": dict(
        kind="rectangle", params=dict(width=2.0, height=1.0), h=0.04,
        boundary=dict(bottom="F, C 0.8 1.2", right="F, N 0.44 0.56", top="F", left="D"),
        algorithm="pf1", V_f=0.32),
    "ex3b": dict(
        kind="rectangle", params=dict(width=2.0, height=1.0), h=0.04,
        boundary=dict(bottom="F, C 1.6 2.0", right="F", top="F, N 0.92 1.08", left="D"),
        algorithm="pf2", V_f=0.35),
    # both sides clamped, contact along the bottom, three load patches on top
    "ex4": dict(
        kind="rectangle", params=dict(width=2.0, height=1.0), h=0.04,
        boundary=dict(bottom="C", right="D", left="D",
                      top="F, N 0.0 0.08, N 0.96 1.04, N 1.92 2.0"),
        algorithm="pf1", V_f=0.45),
    # L-bracket clamped on top, loaded at the arm tip, contact under the column
    "ex5": dict(
        kind="lshape", params=dict(outer=2.0, notch=1.0), h=0.04,
        boundary=dict(bottom="C", notch_side="F", notch_top="F", right="F, N 1.0 1.12", top="D", left="F"),
        algorithm="pf1", V_f=0.4),
}


def preset_spec(name, h=None):
    """DomainSpec of preset ``name``, optionally with another mesh size."""
    p = PRESETS[name]
    return DomainSpec(p["kind"], dict(p["params"]), p["h"] if h is None else h, dict(p["boundary"]))
