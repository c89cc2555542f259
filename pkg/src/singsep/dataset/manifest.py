"""Song manifests: singer labels, splits, and their JSON-lines file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import ManifestError, UsageError

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    song_id: str
    vocal_path: str | None
    singer_id: str
    split: str
    backing_path: str | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    singer_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.singer_index:
            names = sorted({e.singer_id for e in self.entries})
            self.singer_index = {name: i for i, name in enumerate(names)}
        self.validate()

    def validate(self):
        problems = []
        if sorted(self.singer_index.values()) != list(range(len(self.singer_index))):
            problems.append("singer_index is not a bijection onto 0..N-1")
        seen = {}
        for e in self.entries:
            if e.split not in SPLITS:
                problems.append(f"{e.song_id}: unknown split {e.split!r}")
            if e.split in ("train", "val") and not e.vocal_path:
                problems.append(f"{e.song_id}: {e.split} entry without a vocal track")
            if e.singer_id not in self.singer_index:
                problems.append(f"{e.song_id}: singer {e.singer_id!r} missing from singer_index")
            if e.song_id in seen and seen[e.song_id] != e.split:
                problems.append(f"{e.song_id}: appears in splits {seen[e.song_id]} and {e.split}")
            seen[e.song_id] = e.split
        if problems:
            raise ManifestError(problems)

    @property
    def n_singers(self) -> int:
        return len(self.singer_index)

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def singer_of(self, entry: ManifestEntry) -> int:
        return self.singer_index[entry.singer_id]

    def to_jsonl(self) -> str:
        lines = []
        for e in self.entries:
            record = {
                "song_id": e.song_id,
                "vocal_path": e.vocal_path,
                "backing_path": e.backing_path,
                "singer_id": e.singer_id,
                "singer_index": self.singer_index[e.singer_id],
                "split": e.split,
            }
            lines.append(json.dumps(record, sort_keys=True))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        entries, index = [], {}
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            r = json.loads(line)
            entries.append(
                ManifestEntry(r["song_id"], r["vocal_path"], r["singer_id"], r["split"], r.get("backing_path"))
            )
            index[r["singer_id"]] = r["singer_index"]
        return cls(entries, index)


def _split_counts(n, val_fraction, test_fraction):
    n_val = int(round(val_fraction * n))
    n_test = int(round(test_fraction * n))
    if n_val + n_test > n:
        raise UsageError(f"val_fraction + test_fraction leaves no training songs out of {n}")
    return n_val, n_test


def build_manifest(corpus_root, val_fraction: float = 0.1, test_fraction: float = 0.0,
                   seed: int = 0) -> DatasetManifest:
    """Scan ``corpus_root/<song>/`` directories and assign seeded splits.

    Each song directory needs ``vocal.wav`` and a ``meta.json`` with a
    ``"singer"`` field; ``backing.wav`` is optional. If ``singers.txt`` exists
    at the root, labels outside it are rejected.
    """
    if not (0.0 <= val_fraction < 1.0 and 0.0 <= test_fraction < 1.0):
        raise UsageError("split fractions must lie in [0, 1)")
    root = Path(corpus_root)
    if not root.is_dir():
        raise ManifestError([f"corpus root {root} does not exist"])
    known = None
    if (root / "singers.txt").exists():
        known = [s.strip() for s in (root / "singers.txt").read_text().splitlines() if s.strip()]

    problems, songs = [], []
    for song_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        vocal = song_dir / "vocal.wav"
        backing = song_dir / "backing.wav"
        meta_path = song_dir / "meta.json"
        if not vocal.exists():
            problems.append(f"{song_dir.name}: missing vocal.wav")
            continue
        if not meta_path.exists():
            problems.append(f"{song_dir.name}: missing meta.json with singer label")
            continue
        singer = json.loads(meta_path.read_text()).get("singer")
        if not singer or (known is not None and singer not in known):
            problems.append(f"{song_dir.name}: unknown singer label {singer!r}")
            continue
        songs.append((song_dir.name, str(vocal), singer, str(backing) if backing.exists() else None))
    if problems:
        raise ManifestError(problems)
    if not songs:
        raise ManifestError([f"no songs found under {root}"])

    n_val, n_test = _split_counts(len(songs), val_fraction, test_fraction)
    order = np.random.default_rng(seed).permutation(len(songs))
    split_of = {}
    for rank, i in enumerate(order):
        split_of[i] = "val" if rank < n_val else "test" if rank < n_val + n_test else "train"
    entries = [
        ManifestEntry(song_id, vocal, singer, split_of[i], backing)
        for i, (song_id, vocal, singer, backing) in enumerate(songs)
    ]
    names = known if known is not None else sorted({s[2] for s in songs})
    return DatasetManifest(entries, {name: i for i, name in enumerate(names)})
