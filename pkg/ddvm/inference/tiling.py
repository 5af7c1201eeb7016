"""
Overlapping patch layouts and weighted merging.

Patch starts are spaced evenly from 0 to the frame edge. Each patch
carries a separable weight that ramps linearly from WEIGHT_FLOOR up to 1
across the margin it shares with a neighbour, so seams get the low
weights; merging divides by the per-pixel weight sum.
"""

from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from ddvm.errors import LayoutError, ShapeError

WEIGHT_FLOOR = 0.05


@dataclass(frozen=True)
class PatchSlot:
    row: int
    col: int
    rows: slice
    cols: slice
    weight: np.ndarray


def patch_starts(frame: int, patch: int, count: int) -> List[int]:
    if count < 1:
        raise LayoutError(f"grid needs at least one patch per axis, got {count}")
    if patch > frame:
        raise LayoutError(f"patch size {patch} exceeds frame size {frame}")
    if count == 1:
        if patch != frame:
            raise LayoutError(f"a single patch of {patch} cannot cover a frame of {frame}")
        return [0]
    starts = [int(round(s)) for s in np.linspace(0, frame - patch, count)]
    for a, b in zip(starts[:-1], starts[1:]):
        if b - a > patch:
            raise LayoutError(f"{count} patches of {patch} leave a gap in a frame of {frame}")
    return starts


def ramp_profile(size: int, lead: int, trail: int) -> np.ndarray:
    """1-D weight: ramps over the first `lead` and last `trail` entries, 1 elsewhere."""
    profile = np.ones(size)
    if lead:
        profile[:lead] *= WEIGHT_FLOOR + (1.0 - WEIGHT_FLOOR) * (np.arange(lead) + 1) / (lead + 1)
    if trail:
        profile[size - trail:] *= WEIGHT_FLOOR + (1.0 - WEIGHT_FLOOR) * (1.0 - (np.arange(trail) + 1) / (trail + 1))
    return profile


def _margins(starts: Sequence[int], patch: int, index: int) -> Tuple[int, int]:
    lead = starts[index - 1] + patch - starts[index] if index > 0 else 0
    trail = starts[index] + patch - starts[index + 1] if index < len(starts) - 1 else 0
    half = patch // 2
    return min(max(lead, 0), half), min(max(trail, 0), half)


@dataclass(frozen=True)
class PatchLayout:
    frame: Tuple[int, int]
    grid: Tuple[int, int]
    patch: Tuple[int, int]
    row_starts: Tuple[int, ...]
    col_starts: Tuple[int, ...]

    def __iter__(self) -> Iterator[PatchSlot]:
        h, w = self.patch
        for r, r0 in enumerate(self.row_starts):
            row_profile = ramp_profile(h, *_margins(self.row_starts, h, r))
            for c, c0 in enumerate(self.col_starts):
                col_profile = ramp_profile(w, *_margins(self.col_starts, w, c))
                yield PatchSlot(r, c, slice(r0, r0 + h), slice(c0, c0 + w), np.outer(row_profile, col_profile))

    @property
    def slots(self) -> List[PatchSlot]:
        return list(self)

    def __len__(self) -> int:
        return self.grid[0] * self.grid[1]

    def weight_sum(self) -> np.ndarray:
        total = np.zeros(self.frame)
        for slot in self:
            total[slot.rows, slot.cols] += slot.weight
        return total

    def normalized_weights(self) -> List[np.ndarray]:
        total = self.weight_sum()
        return [slot.weight / total[slot.rows, slot.cols] for slot in self]

    def crop(self, values: np.ndarray) -> List[np.ndarray]:
        """The patch views of a full-frame (H, W, ...) array, in merge order."""
        if tuple(values.shape[:2]) != self.frame:
            raise ShapeError("array does not match the layout frame", values.shape, self.frame)
        return [values[slot.rows, slot.cols] for slot in self]

    def merge(self, patches: Sequence[np.ndarray]) -> np.ndarray:
        """
        Weighted average of per-patch (h, w, C) values.

        Blending is done relative to the first patch covering each pixel,
        so identical patch values reproduce that value exactly.
        """
        if len(patches) != len(self):
            raise LayoutError(f"layout has {len(self)} patches, got {len(patches)}")
        h, w = self.patch
        channels = np.shape(patches[0])[2:]
        reference = np.full(self.frame + channels, np.nan)
        acc = np.zeros(self.frame + channels)
        total = np.zeros(self.frame)
        slots = self.slots
        for slot, value in zip(slots, patches):
            value = np.asarray(value, dtype=np.float64)
            if value.shape[:2] != (h, w):
                raise ShapeError("patch does not match the layout patch size", value.shape, (h, w))
            ref = reference[slot.rows, slot.cols]
            reference[slot.rows, slot.cols] = np.where(np.isnan(ref), value, ref)
        for slot, value in zip(slots, patches):
            weight = slot.weight.reshape((h, w) + (1,) * len(channels))
            acc[slot.rows, slot.cols] += weight * (np.asarray(value, dtype=np.float64) - reference[slot.rows, slot.cols])
            total[slot.rows, slot.cols] += slot.weight
        return reference + acc / total.reshape(self.frame + (1,) * len(channels))


def build_layout(frame: Tuple[int, int], grid: Tuple[int, int], patch: Tuple[int, int]) -> PatchLayout:
    """Evenly spaced grid of patches, first at 0 and last flush with the frame edge."""
    (height, width), (rows, cols), (ph, pw) = frame, grid, patch
    if ph > height or pw > width:
        raise LayoutError(f"patch {ph}x{pw} is larger than the frame {height}x{width}")
    return PatchLayout((height, width), (rows, cols), (ph, pw),
                       tuple(patch_starts(height, ph, rows)), tuple(patch_starts(width, pw, cols)))


def identity_layout(frame: Tuple[int, int]) -> PatchLayout:
    return build_layout(frame, (1, 1), frame)
