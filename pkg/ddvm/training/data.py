"""
Training examples, batching and flip augmentation.

Examples are stored normalized: conditioning images in [-1, 1] stacked
along channels (one frame for depth, two for flow) and targets in the
model's [-1, 1] range.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ddvm.errors import ShapeError
from ddvm.sparse_data.normalize import normalize
from ddvm.sparse_data.resize import BILINEAR, resize_dense, resize_sparse
from ddvm.sparse_data.target import NormSpec, SparseTarget


def normalize_image(image: np.ndarray) -> np.ndarray:
    """[0, 1] RGB to [-1, 1]."""
    return 2.0 * np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) - 1.0


def stack_frames(frames: Sequence[np.ndarray]) -> np.ndarray:
    """Normalize each frame and concatenate them along channels."""
    arrays = [normalize_image(f) for f in frames]
    shapes = {a.shape[:2] for a in arrays}
    if len(shapes) != 1:
        raise ShapeError("frames differ in spatial shape", arrays[0].shape, arrays[-1].shape)
    return np.concatenate(arrays, axis=-1)


@dataclass(frozen=True, eq=False)
class TrainExample:
    x: np.ndarray
    target: SparseTarget
    task: str

    def __post_init__(self):
        if self.target.batched:
            raise ShapeError("a training example holds one target", self.target.values.shape)
        if np.shape(self.x)[:2] != (self.target.height, self.target.width):
            raise ShapeError("conditioning and target differ in spatial shape", np.shape(self.x), self.target.values.shape)


def build_example(frames: Sequence[np.ndarray], raw_target: SparseTarget, spec: NormSpec) -> TrainExample:
    """Normalize frames and a target in physical units into a training example."""
    expected = 1 if spec.task == "depth" else 2
    if len(frames) != expected:
        raise ShapeError(f"{spec.task} examples take {expected} frame(s)", (len(frames),))
    return TrainExample(stack_frames(frames), normalize(raw_target, spec), spec.task)


def flip_example(example: TrainExample) -> TrainExample:
    """
    Mirror left-right. Every frame, the target and the mask flip; for flow the
    horizontal component changes sign.
    """
    values = np.array(example.target.values[:, ::-1])
    if example.task == "flow":
        values[..., 0] = -values[..., 0]
    target = SparseTarget(values, example.target.mask[:, ::-1])
    return TrainExample(np.ascontiguousarray(example.x[:, ::-1]), target, example.task)


def resize_example(example: TrainExample, size: Tuple[int, int]) -> TrainExample:
    """
    The example at size=(height, width): bilinear conditioning, nearest-neighbour
    target. Normalized flow is relative to the frame size, so values carry over.
    """
    x = resize_dense(example.x, size, order=BILINEAR)
    return TrainExample(x, resize_sparse(example.target, size), example.task)


def with_half_resolution(examples: Sequence[TrainExample]) -> List[TrainExample]:
    """The examples followed by a half-resolution copy of each."""
    half = [resize_example(e, (e.target.height // 2, e.target.width // 2)) for e in examples]
    return list(examples) + half


@dataclass(frozen=True, eq=False)
class TrainBatch:
    x: np.ndarray
    target: SparseTarget

    def __post_init__(self):
        if np.ndim(self.x) != 4 or not self.target.batched:
            raise ShapeError("a batch needs (B, H, W, C) inputs and a batched target", np.shape(self.x))
        if np.shape(self.x)[:3] != self.target.mask.shape:
            raise ShapeError("batch inputs and targets disagree", np.shape(self.x), self.target.mask.shape)

    @classmethod
    def from_examples(cls, examples: Sequence[TrainExample]) -> "TrainBatch":
        return cls(np.stack([e.x for e in examples]), SparseTarget.stack([e.target for e in examples]))

    def __len__(self) -> int:
        return self.x.shape[0]


def draw_batch(examples: Sequence[TrainExample], batch_size: int, rng: np.random.Generator,
               flip_prob: float = 0.0) -> TrainBatch:
    """
    Sample examples with replacement and flip each with probability flip_prob.
    With mixed resolutions, a random anchor example fixes the batch resolution.
    """
    if not examples:
        raise ShapeError("cannot draw a batch from an empty dataset", (0,))
    pool = examples
    if len({np.shape(e.x)[:2] for e in examples}) > 1:
        anchor = np.shape(examples[int(rng.integers(0, len(examples)))].x)[:2]
        pool = [e for e in examples if np.shape(e.x)[:2] == anchor]
    picked = []
    for idx in rng.integers(0, len(pool), size=batch_size):
        example = pool[int(idx)]
        if flip_prob > 0 and rng.uniform() < flip_prob:
            example = flip_example(example)
        picked.append(example)
    return TrainBatch.from_examples(picked)
