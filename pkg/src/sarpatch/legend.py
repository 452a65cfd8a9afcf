"""Land-cover legend handling: class-id remapping and role annotations.

Label products frequently split one semantic class across several ids
(deciduous/evergreen forest variants, paddy vs dry cropland). Training
wants a collapsed legend plus two bits of policy: which ids mean forest
(candidates for oversampled-patch removal) and which ids should never be
sampled around (clouds, out-of-scope classes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import RasterGrid, SampleKind


@dataclass(frozen=True)
class LegendRemap:
    """Mapping from source class ids to training class ids.

    ``mapping`` of None means identity. Ids listed in ``forest_classes``
    and ``zero_weight_classes`` refer to the post-remap legend. When
    ``strict`` is set, applying the remap rejects rasters containing ids
    absent from the mapping; otherwise unknown ids collapse to nodata.
    """

    mapping: dict[int, int] | None = None
    forest_classes: frozenset[int] = frozenset()
    zero_weight_classes: frozenset[int] = frozenset()
    strict: bool = False

    def __post_init__(self):
        if self.mapping is not None:
            for src, dst in self.mapping.items():
                if not (0 <= src <= 255 and 0 <= dst <= 255):
                    raise ValueError(f"class ids must fit uint8, got {src}->{dst}")
        object.__setattr__(self, "forest_classes", frozenset(self.forest_classes))
        object.__setattr__(self, "zero_weight_classes", frozenset(self.zero_weight_classes))


def apply_legend(labels: RasterGrid, remap: LegendRemap) -> RasterGrid:
    """Rewrite class ids through the remap lookup table.

    The nodata id is always carried over verbatim, even if the mapping
    mentions it. In non-strict mode, ids missing from the mapping become
    nodata rather than leaking source-legend ids into training data.
    """
    if labels.kind != SampleKind.LABEL:
        raise ValueError("legend remap applies to label grids")
    if remap.mapping is None:
        return labels
    samples = np.asarray(labels.samples)
    nodata = int(labels.nodata)
    if remap.strict:
        present = set(np.unique(samples).tolist()) - {nodata}
        unknown = present - set(remap.mapping)
        if unknown:
            raise ValueError(f"labels contain unmapped class ids {sorted(unknown)}")
    lut = np.full(256, nodata, dtype=np.uint8)
    for src, dst in remap.mapping.items():
        if src != nodata:
            lut[src] = dst
    return RasterGrid(
        samples=lut[samples],
        kind=SampleKind.LABEL,
        nodata=labels.nodata,
        transform=labels.transform,
        crs_tag=labels.crs_tag,
    )


def save_legend(remap: LegendRemap, path) -> None:
    """Serialize a remap as a small line-oriented text file.

    One ``src dst`` pair per line, then optional ``forest:`` and
    ``zero-weight:`` lines listing post-remap ids. Blank lines and ``#``
    comments are ignored on read.
    """
    lines = []
    if remap.mapping is not None:
        for src in sorted(remap.mapping):
            lines.append(f"{src} {remap.mapping[src]}")
    if remap.forest_classes:
        lines.append("forest: " + " ".join(str(c) for c in sorted(remap.forest_classes)))
    if remap.zero_weight_classes:
        lines.append(
            "zero-weight: " + " ".join(str(c) for c in sorted(remap.zero_weight_classes))
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_legend(path) -> LegendRemap:
    mapping: dict[int, int] = {}
    forest: set[int] = set()
    zero: set[int] = set()
    saw_pairs = False
    for raw in Path(path).read_text(encoding="ascii").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("forest:"):
            forest.update(int(tok) for tok in line[len("forest:"):].split())
        elif line.startswith("zero-weight:"):
            zero.update(int(tok) for tok in line[len("zero-weight:"):].split())
        else:
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"bad legend line {raw!r}")
            mapping[int(parts[0])] = int(parts[1])
            saw_pairs = True
    return LegendRemap(
        mapping=mapping if saw_pairs else None,
        forest_classes=frozenset(forest),
        zero_weight_classes=frozenset(zero),
    )


def example_legend() -> LegendRemap:
    """A small worked legend used by the demo workspace.

    Collapses four forest variants (ids 7..10) onto id 6 and paddy (id 4)
    onto cropland (id 3); id 6 is the forest class for patch filtering.
    """
    return LegendRemap(
        mapping={3: 3, 4: 3, 6: 6, 7: 6, 8: 6, 9: 6, 10: 6},
        forest_classes=frozenset({6}),
        zero_weight_classes=frozenset(),
    )
