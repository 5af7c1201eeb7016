"""
Dataset manifests: a text index of generated examples.

    # ddvm-manifest 1
    # spec {"kind": "flow_layers", ...}
    0<TAB>700021<TAB>frame1=00000_frame1.npy<TAB>frame2=00000_frame2.npy<TAB>flow=00000.flo

Paths are relative to the manifest's directory.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List

from ddvm.errors import FormatError
from ddvm.synthgen.scene import SceneSpec

MANIFEST_NAME = "manifest.txt"
HEADER = "# ddvm-manifest 1"
SPEC_PREFIX = "# spec "


@dataclass(frozen=True)
class ManifestEntry:
    index: int
    seed: int
    files: Dict[str, str] = field(default_factory=dict)

    def path(self, root: Path, key: str) -> Path:
        if key not in self.files:
            raise FormatError(f"manifest entry {self.index} has no '{key}' file")
        return Path(root) / self.files[key]


@dataclass
class Manifest:
    spec: SceneSpec
    entries: List[ManifestEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def to_text(self) -> str:
        lines = [HEADER, SPEC_PREFIX + json.dumps(asdict(self.spec), sort_keys=True)]
        for entry in self.entries:
            files = "\t".join(f"{key}={value}" for key, value in sorted(entry.files.items()))
            lines.append(f"{entry.index}\t{entry.seed}\t{files}")
        return "\n".join(lines) + "\n"

    def write(self, directory: Path) -> Path:
        path = Path(directory) / MANIFEST_NAME
        path.write_text(self.to_text())
        return path

    @classmethod
    def read(cls, path: Path) -> "Manifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise FormatError(f"manifest not found: {path}")
        lines = path.read_text().splitlines()
        if len(lines) < 2 or lines[0] != HEADER or not lines[1].startswith(SPEC_PREFIX):
            raise FormatError(f"{path}: not a ddvm manifest")
        try:
            spec = SceneSpec(**json.loads(lines[1][len(SPEC_PREFIX):]))
        except (json.JSONDecodeError, TypeError) as e:
            raise FormatError(f"{path}: bad spec line: {e}") from e
        entries = []
        for lineno, line in enumerate(lines[2:], start=3):
            if not line.strip():
                continue
            parts = line.split("\t")
            try:
                index, seed = int(parts[0]), int(parts[1])
                files = dict(part.split("=", 1) for part in parts[2:])
            except (ValueError, IndexError) as e:
                raise FormatError(f"{path}:{lineno}: malformed entry") from e
            entries.append(ManifestEntry(index, seed, files))
        return cls(spec, entries)
