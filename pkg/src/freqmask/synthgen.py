"""Synthetic real-vs-fake dataset with controllable spectral artifacts.

"Real" images are clipped 1/f colored noise plus gentle gradients. "Fake"
images are the same base with one artifact family injected:

* ``GridPattern``: additive axis-aligned cosine lattice (periodic texture
  peaks at bins (k, 0) and (0, k), k = round(size / period)).
* ``UpsampleReplica``: subsample by a factor then nearest-neighbour
  upsample, creating spectral replicas of the low band at high band
  coordinates.
* ``HighFreqPeaks``: additive sinusoids at fixed high-band frequencies
  (fixed per family and image size, random phase per image).

Artifacts are small additive or resampling effects, calibrated so that
per-image brightness statistics stay uninformative about the label.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import imageio
from .augment import band_indices
from .rng import LANE_DATA, child_rng, sample_without_replacement

# Internal entropy constant for deriving per-family peak locations.
_PEAKS_ENTROPY = 0x48504B53


@dataclass(frozen=True)
class GridPattern:
    period: int = 8
    amplitude: float = 0.06

    def __post_init__(self):
        if self.period < 2:
            raise ValueError(f"period must be >= 2, got {self.period}")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be > 0")

    @property
    def name(self) -> str:
        return f"grid{self.period}"


@dataclass(frozen=True)
class UpsampleReplica:
    factor: int = 2

    def __post_init__(self):
        if self.factor not in (2, 4):
            raise ValueError(f"factor must be 2 or 4, got {self.factor}")

    @property
    def name(self) -> str:
        return f"replica{self.factor}"


@dataclass(frozen=True)
class HighFreqPeaks:
    count: int = 4
    amplitude: float = 0.06

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be > 0")

    @property
    def name(self) -> str:
        return f"peaks{self.count}"


def family_name(family) -> str:
    return "none" if family is None else family.name


def family_to_dict(family) -> dict:
    if family is None:
        return {"kind": "none"}
    if isinstance(family, GridPattern):
        return {"kind": "grid", "period": family.period, "amplitude": family.amplitude}
    if isinstance(family, UpsampleReplica):
        return {"kind": "replica", "factor": family.factor}
    if isinstance(family, HighFreqPeaks):
        return {"kind": "peaks", "count": family.count, "amplitude": family.amplitude}
    raise TypeError(f"not an artifact family: {family!r}")


def family_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "none":
        return None
    if kind == "grid":
        return GridPattern(int(d.get("period", 8)), float(d.get("amplitude", 0.06)))
    if kind == "replica":
        return UpsampleReplica(int(d.get("factor", 2)))
    if kind == "peaks":
        return HighFreqPeaks(int(d.get("count", 4)), float(d.get("amplitude", 0.06)))
    raise ValueError(f"unknown artifact family kind {kind!r}")


def _pink_field(size: int, rng) -> np.ndarray:
    """Zero-mean noise field with a ~1/f amplitude spectrum, unit-ish scale."""
    white = rng.standard_normal((size, size))
    spec = np.fft.fft2(white)
    u = np.minimum(np.arange(size), size - np.arange(size)).astype(np.float64)
    radius = np.sqrt(u[:, None] ** 2 + u[None, :] ** 2)
    spec *= 1.0 / np.maximum(radius, 1.0)
    spec[0, 0] = 0.0
    f = np.fft.ifft2(spec).real
    return f / max(f.std(), 1e-12)


def gen_real(size: int, rng, channels: int = 3) -> np.ndarray:
    """One synthetic natural image: shared 1/f structure, per-channel detail,
    a random linear gradient, clipped to [0, 1]."""
    if size < 16:
        raise ValueError(f"size must be >= 16, got {size}")
    common = _pink_field(size, rng)
    coords = (np.arange(size, dtype=np.float64) / size) - 0.5
    gx, gy = rng.uniform(-0.25, 0.25, size=2)
    gradient = gx * coords[:, None] + gy * coords[None, :]
    out = np.empty((size, size, channels), dtype=np.float32)
    for c in range(channels):
        detail = _pink_field(size, rng)
        f = 0.85 * common + 0.35 * detail
        f /= max(f.std(), 1e-12)
        out[:, :, c] = 0.5 + 0.14 * f + gradient
    return np.clip(out, 0.0, 1.0)


def peak_coords(family: HighFreqPeaks, size: int) -> np.ndarray:
    """The fixed (u, v) peak locations of a HighFreqPeaks family at a size.

    Drawn once per (count, size) from the high band with a fixed internal
    seed, so every image of the family shares the same peaks.
    """
    rng = child_rng(_PEAKS_ENTROPY, family.count, size)
    band = band_indices(size, size, "high")
    sel = sample_without_replacement(rng, len(band), family.count)
    return band[sel]


def signature_coords(family, size: int) -> np.ndarray:
    """Unshifted spectrum coordinates of a family's injected frequencies.

    Defined for the additive families; UpsampleReplica folds energy
    across the whole band instead of injecting single bins, so its
    signature is the replica correlation, not a point peak.
    """
    if isinstance(family, GridPattern):
        k = max(1, round(size / family.period))
        return np.array([[k, 0], [0, k]], dtype=np.int64)
    if isinstance(family, HighFreqPeaks):
        return peak_coords(family, size)
    raise TypeError(f"no injected-frequency signature for family {family!r}")


def _inject_additive(base: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    """Add a zero-mean pattern, rescaling the base noise per channel so the
    per-image mean and variance stay where they were."""
    var_p = float(pattern.var())
    out = np.empty_like(base)
    for c in range(base.shape[2]):
        ch = base[:, :, c].astype(np.float64)
        mu, var_b = ch.mean(), ch.var()
        scale = math.sqrt(max(0.0, 1.0 - var_p / max(var_b, 1e-12)))
        out[:, :, c] = (mu + scale * (ch - mu) + pattern).astype(np.float32)
    return np.clip(out, 0.0, 1.0)


def gen_fake(size: int, family, rng, channels: int = 3) -> np.ndarray:
    """A gen_real base (same RNG stream) with the family artifact injected."""
    base = gen_real(size, rng, channels)
    if family is None:
        return base
    if isinstance(family, GridPattern):
        if family.period > size:
            raise ValueError(f"period {family.period} > size {size}")
        k = max(1, round(size / family.period))
        phase_x, phase_y = rng.uniform(0.0, 2.0 * math.pi, size=2)
        x = np.arange(size, dtype=np.float64)
        lattice = np.cos(2.0 * math.pi * k * x / size + phase_x)[:, None] + np.cos(
            2.0 * math.pi * k * x / size + phase_y
        )[None, :]
        return _inject_additive(base, family.amplitude * lattice)
    if isinstance(family, UpsampleReplica):
        f = family.factor
        if size % f:
            raise ValueError(f"size {size} not divisible by factor {f}")
        small = base[::f, ::f, :]
        return np.repeat(np.repeat(small, f, axis=0), f, axis=1).copy()
    if isinstance(family, HighFreqPeaks):
        coords = peak_coords(family, size)
        x = np.arange(size, dtype=np.float64)
        pattern = np.zeros((size, size), dtype=np.float64)
        for u, v in coords:
            phase = rng.uniform(0.0, 2.0 * math.pi)
            pattern += np.cos(2.0 * math.pi * (u * x[:, None] + v * x[None, :]) / size + phase)
        return _inject_additive(base, family.amplitude * pattern)
    raise TypeError(f"unknown artifact family {family!r}")


@dataclass(frozen=True)
class DatasetManifest:
    """Recipe for one deterministic dataset build."""

    seed: int
    image_size: int = 64
    channels: int = 3
    count_per_class: int = 500
    train_family: object = field(default_factory=GridPattern)
    test_families: tuple = field(default_factory=lambda: (UpsampleReplica(2), HighFreqPeaks()))
    split_fractions: tuple = (("train", 1.0), ("val", 0.25), ("test", 1.0))

    def __post_init__(self):
        if self.count_per_class < 1:
            raise ValueError("count_per_class must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        object.__setattr__(self, "test_families", tuple(self.test_families))
        object.__setattr__(self, "split_fractions", tuple(self.split_fractions))

    def cells(self):
        """(split, family, count-per-class) cells in deterministic order."""
        fractions = dict(self.split_fractions)
        out = []
        for split in ("train", "val"):
            if split in fractions:
                n = max(1, round(fractions[split] * self.count_per_class))
                out.append((split, self.train_family, n))
        if "test" in fractions:
            n = max(1, round(fractions["test"] * self.count_per_class))
            for fam in self.test_families:
                out.append(("test", fam, n))
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "image_size": self.image_size,
            "channels": self.channels,
            "count_per_class": self.count_per_class,
            "train_family": family_to_dict(self.train_family),
            "test_families": [family_to_dict(f) for f in self.test_families],
            "split_fractions": {k: v for k, v in self.split_fractions},
        }


def manifest_from_dict(d: dict) -> DatasetManifest:
    kwargs = {"seed": int(d["seed"])}
    if "image_size" in d:
        kwargs["image_size"] = int(d["image_size"])
    if "channels" in d:
        kwargs["channels"] = int(d["channels"])
    if "count_per_class" in d:
        kwargs["count_per_class"] = int(d["count_per_class"])
    if "train_family" in d:
        kwargs["train_family"] = family_from_dict(d["train_family"])
    if "test_families" in d:
        kwargs["test_families"] = tuple(family_from_dict(f) for f in d["test_families"])
    if "split_fractions" in d:
        kwargs["split_fractions"] = tuple((k, float(v)) for k, v in d["split_fractions"].items())
    return DatasetManifest(**kwargs)


def build_dataset(manifest: DatasetManifest, out_dir, provenance: str | None = None) -> str:
    """Write images plus a tab-separated index file; fully deterministic.

    Index records: path<TAB>label<TAB>split<TAB>family, one per line,
    where family names the (split, family) cell for real and fake rows
    alike. Returns the index path.
    """
    out_dir = os.fspath(out_dir)
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    ext = ".pgm" if manifest.channels == 1 else ".ppm"
    lines = []
    if provenance:
        lines.append(f"# {provenance}")
    for cell_idx, (split, fam, n) in enumerate(manifest.cells()):
        fname = family_name(fam)
        for label in (0, 1):
            for i in range(n):
                rng = child_rng(manifest.seed, LANE_DATA, cell_idx, label, i)
                if label == 0:
                    img = gen_real(manifest.image_size, rng, manifest.channels)
                else:
                    img = gen_fake(manifest.image_size, fam, rng, manifest.channels)
                rel = f"images/{split}_{fname}_{label}_{i:05d}{ext}"
                imageio.save_image(os.path.join(out_dir, rel), img, comment=provenance)
                lines.append(f"{rel}\t{label}\t{split}\t{fname}")
    index_path = os.path.join(out_dir, "index.tsv")
    tmp = index_path + ".tmp"
    with open(tmp, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, index_path)
    return index_path


def load_index(index_path) -> list[dict]:
    """Parse an index file into records with absolute image paths."""
    root = os.path.dirname(os.fspath(index_path))
    records = []
    with open(index_path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rel, label, split, fam = line.split("\t")
            records.append(
                {
                    "path": os.path.join(root, rel),
                    "label": int(label),
                    "split": split,
                    "family": fam,
                }
            )
    return records


def load_split(records, split: str, family: str | None = None):
    """Stack one split (optionally one family cell) into arrays."""
    subset = [r for r in records if r["split"] == split and (family is None or r["family"] == family)]
    if not subset:
        raise ValueError(f"no records for split={split!r} family={family!r}")
    images = np.stack([imageio.load_image(r["path"]) for r in subset])
    labels = np.array([r["label"] for r in subset], dtype=np.int64)
    return images, labels


def split_families(records, split: str) -> list[str]:
    """Family cell names present in a split, in first-seen order."""
    seen = []
    for r in records:
        if r["split"] == split and r["family"] not in seen:
            seen.append(r["family"])
    return seen
