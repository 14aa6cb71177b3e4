"""Stimulus spaces and their human-renderable form.

Two space kinds are supported: a finite table of stimuli (used by the exact
oracle and fast simulations) and a bounded continuous vector space. Rendering
produces a standalone SVG document that is a pure function of the stimulus
coordinates and its nuisance seed; the nuisance seed drives only
category-irrelevant decoration so two stimuli shown side by side can share
surface features.
"""

from __future__ import annotations

import colorsys
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .core import RngStream, Stimulus, derive_seed
from .errors import InvalidValueError, NotDiscreteError, OutOfBoundsError

CANVAS = 240  # square canvas edge in px


@dataclass(frozen=True)
class StimulusSpace:
    """Either a finite stimulus table or a bounded continuous vector space.

    Discrete: ``count`` stimuli with ids ``0..count-1``.
    Continuous: ``dim`` coordinates, each within its ``bounds`` interval.
    """

    kind: str  # "discrete" | "continuous"
    count: int = 0
    dim: int = 0
    bounds: tuple[tuple[float, float], ...] = ()
    render_spec: str = "blob-v1"

    def __post_init__(self):
        if self.kind == "discrete":
            if self.count < 2:
                raise InvalidValueError(f"discrete space needs >= 2 stimuli, got {self.count}")
        elif self.kind == "continuous":
            if self.dim < 1:
                raise InvalidValueError(f"continuous space needs dim >= 1, got {self.dim}")
            if len(self.bounds) != self.dim:
                raise InvalidValueError("one (lo, hi) pair required per dimension")
            for lo, hi in self.bounds:
                if not lo < hi:
                    raise InvalidValueError(f"invalid bounds ({lo}, {hi})")
        else:
            raise InvalidValueError(f"unknown space kind {self.kind!r}")

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    def contains(self, f: Stimulus) -> bool:
        if self.is_discrete:
            return f.id is not None and 0 <= f.id < self.count
        if f.vector is None or len(f.vector) != self.dim:
            return False
        return all(lo <= x <= hi for x, (lo, hi) in zip(f.vector, self.bounds))

    def to_dict(self) -> dict:
        if self.is_discrete:
            return {"kind": "discrete", "count": self.count, "render_spec": self.render_spec}
        return {
            "kind": "continuous",
            "dim": self.dim,
            "bounds": [list(b) for b in self.bounds],
            "render_spec": self.render_spec,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StimulusSpace":
        if d["kind"] == "discrete":
            return cls.discrete(int(d["count"]), render_spec=d.get("render_spec", "blob-v1"))
        return cls.continuous(
            [tuple(b) for b in d["bounds"]], render_spec=d.get("render_spec", "blob-v1")
        )

    @classmethod
    def discrete(cls, count: int, render_spec: str = "blob-v1") -> "StimulusSpace":
        return cls(kind="discrete", count=count, render_spec=render_spec)

    @classmethod
    def continuous(cls, bounds, render_spec: str = "blob-v1") -> "StimulusSpace":
        bounds = tuple(tuple(float(x) for x in b) for b in bounds)
        return cls(kind="continuous", dim=len(bounds), bounds=bounds, render_spec=render_spec)


def default_continuous_space() -> StimulusSpace:
    """2-d blob space on [-3, 3] per axis: hue and elongation encode the axes."""
    return StimulusSpace.continuous([(-3.0, 3.0), (-3.0, 3.0)])


def enumerate_stimuli(space: StimulusSpace) -> list[Stimulus]:
    """All stimuli of a discrete space in index order."""
    if not space.is_discrete:
        raise NotDiscreteError("cannot enumerate a continuous space")
    return [Stimulus(id=i) for i in range(space.count)]


def uniform_stimulus(space: StimulusSpace, rng: RngStream) -> Stimulus:
    """Uniform draw over the space (table entry or box volume)."""
    if space.is_discrete:
        return Stimulus(id=rng.integer(space.count))
    u = rng.uniforms(space.dim)
    coords = tuple(lo + x * (hi - lo) for x, (lo, hi) in zip(u, space.bounds))
    return Stimulus(vector=coords)


def _unit_coords(space: StimulusSpace, f: Stimulus) -> tuple[float, float]:
    """Map a stimulus to two [0, 1] drawing coordinates."""
    if space.is_discrete:
        t = f.id / max(space.count - 1, 1)
        return t, (f.id * 7 % space.count) / max(space.count - 1, 1)
    xs = []
    for x, (lo, hi) in zip(f.vector, space.bounds):
        xs.append((x - lo) / (hi - lo))
    u0 = xs[0]
    u1 = xs[1] if len(xs) > 1 else 0.5
    return u0, u1


def _nuisance_marks(nuisance_seed: int) -> list[tuple[float, float, float]]:
    # Decorative speckles; position/size derive only from the nuisance seed.
    rng = RngStream(derive_seed(nuisance_seed & (2**63 - 1), "nuisance"))
    marks = []
    n = 3 + rng.integer(3)
    for _ in range(n):
        x = 20 + rng.uniform() * (CANVAS - 40)
        y = 20 + rng.uniform() * (CANVAS - 40)
        r = 2 + rng.uniform() * 4
        marks.append((x, y, r))
    return marks


def render_svg(space: StimulusSpace, f: Stimulus) -> str:
    """Render a stimulus to a standalone SVG document string.

    Byte-identical for identical (coordinates, nuisance_seed). The primary
    shape encodes the stimulus coordinates (hue and elongation); everything in
    the ``nuisance`` group depends only on the nuisance seed.
    """
    if not space.contains(f):
        if space.is_discrete:
            raise OutOfBoundsError(f"stimulus {f} not in discrete table of {space.count}")
        raise OutOfBoundsError(f"coordinates {f.vector} outside bounds {space.bounds}")

    u0, u1 = _unit_coords(space, f)
    hue = 0.83 * u0  # keep away from wrapping back to red
    r, g, b = colorsys.hls_to_rgb(hue, 0.5, 0.7)
    fill = f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"
    rx = 40.0 + 50.0 * u1
    ry = 90.0 - 50.0 * u1

    marks = _nuisance_marks(f.nuisance_seed)
    mark_elems = "".join(
        f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="#00000022"/>'
        for x, y, r in marks
    )
    half = CANVAS / 2
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}">'
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="#f3f2ee"/>'
        f'<ellipse id="primary" cx="{half}" cy="{half}" rx="{rx:.3f}" ry="{ry:.3f}" '
        f'fill="{fill}" stroke="#333333" stroke-width="2"/>'
        f'<g id="nuisance">{mark_elems}</g>'
        "</svg>"
    )


def svg_category_parts(doc: str) -> list[str]:
    """Serialized non-nuisance elements of a rendered document.

    Lets tests diff two documents field-by-field while ignoring the
    nuisance decoration group.
    """
    root = ET.fromstring(doc)
    ns = "{http://www.w3.org/2000/svg}"
    parts = []
    for child in root:
        if child.tag == f"{ns}g" and child.get("id") == "nuisance":
            continue
        parts.append(ET.tostring(child, encoding="unicode"))
    return parts


def svg_nuisance_part(doc: str) -> str:
    root = ET.fromstring(doc)
    ns = "{http://www.w3.org/2000/svg}"
    for child in root:
        if child.tag == f"{ns}g" and child.get("id") == "nuisance":
            return ET.tostring(child, encoding="unicode")
    return ""
