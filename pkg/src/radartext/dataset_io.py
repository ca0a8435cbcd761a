"""Radar-text corpus on disk: ``manifest.jsonl`` plus cloud and token files.

Layout under a corpus root::

    manifest.jsonl      one SequenceRecord per line
    config.json         RadarConfig that generated the clouds
    clouds/<id>.rpc     RPC1 frame clouds
    tokens/<id>.tok     optional newline-delimited token ids
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import cloudio
from .errors import DatasetError, FormatError
from .fmcw_config import RadarConfig, load_config, save_config

MANIFEST = "manifest.jsonl"
CONFIG = "config.json"


@dataclass(frozen=True)
class SequenceRecord:
    id: str
    cloud_path: str
    frame_count: int
    text: tuple[str, ...]
    config_hash: str
    token_path: str | None = None
    source_motion: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "text", tuple(self.text))
        if not self.text:
            raise DatasetError(f"record {self.id!r} needs at least one text entry")

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["text"] = list(self.text)
        return json.dumps(d, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceRecord":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise DatasetError(f"unknown record fields: {sorted(unknown)}")
        return cls(**d)


def _dangling(rec: SequenceRecord, root: Path) -> list[str]:
    missing = []
    if not (root / rec.cloud_path).is_file():
        missing.append(rec.cloud_path)
    if rec.token_path is not None and not (root / rec.token_path).is_file():
        missing.append(rec.token_path)
    return missing


def write_manifest(records, root) -> Path:
    root = Path(root)
    records = list(records)
    offenders = [(r.id, m) for r in records for m in _dangling(r, root)]
    if offenders:
        listing = ", ".join(f"{i} ({p})" for i, p in offenders)
        raise DatasetError(f"dangling paths in records: {listing}")
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise DatasetError("duplicate record ids")
    path = root / MANIFEST
    path.write_text("".join(r.to_json() + "\n" for r in records), encoding="utf-8")
    return path


def read_manifest(root) -> list[SequenceRecord]:
    path = Path(root) / MANIFEST
    if not path.is_file():
        raise DatasetError(f"manifest not found: {path}")
    out = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(SequenceRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError) as e:
            raise DatasetError(f"{path}:{n}: {e}") from e
    return out


def add_sequence(root, seq_id: str, clouds, texts, config: RadarConfig, tokens=None,
                 source_motion=None) -> SequenceRecord:
    """Write one sequence's files and append its record to the manifest."""
    root = Path(root)
    (root / "clouds").mkdir(parents=True, exist_ok=True)
    cfg_path = root / CONFIG
    if cfg_path.exists():
        if load_config(cfg_path).config_hash() != config.config_hash():
            raise DatasetError(f"corpus {root} was generated with a different radar config")
    else:
        save_config(config, cfg_path)
    clouds = list(clouds)
    cloud_rel = f"clouds/{seq_id}.rpc"
    cloudio.write_clouds(clouds, root / cloud_rel)
    tok_rel = None
    if tokens is not None:
        (root / "tokens").mkdir(exist_ok=True)
        tok_rel = f"tokens/{seq_id}.tok"
        (root / tok_rel).write_text("".join(f"{int(i)}\n" for i in tokens), encoding="utf-8")
    rec = SequenceRecord(seq_id, cloud_rel, len(clouds), tuple(texts), config.config_hash(), tok_rel,
                         None if source_motion is None else str(source_motion))
    existing = read_manifest(root) if (root / MANIFEST).exists() else []
    write_manifest([r for r in existing if r.id != seq_id] + [rec], root)
    return rec


@dataclass
class RecordReport:
    id: str
    ok: bool = True
    messages: list[str] = field(default_factory=list)

    def fail(self, msg: str) -> None:
        self.ok = False
        self.messages.append(msg)


@dataclass
class ValidationReport:
    records: list[RecordReport]
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and all(r.ok for r in self.records)

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def lines(self) -> list[str]:
        out = [f"ERROR {e}" for e in self.errors]
        for r in self.records:
            out.append(f"{'PASS' if r.ok else 'FAIL'} {r.id}" + (": " + "; ".join(r.messages) if r.messages else ""))
        return out


def validate(root) -> ValidationReport:
    """Check every record against its files; read-only, never raises on I/O faults."""
    root = Path(root)
    try:
        records = read_manifest(root)
    except (DatasetError, OSError) as e:
        return ValidationReport([], [str(e)])
    expected_hash = None
    errors = []
    try:
        expected_hash = load_config(root / CONFIG).config_hash()
    except Exception as e:  # noqa: BLE001 - reported, not thrown
        errors.append(f"config: {e}")
    reports = []
    for rec in records:
        rep = RecordReport(rec.id)
        reports.append(rep)
        cloud = root / rec.cloud_path
        if not cloud.is_file():
            rep.fail(f"missing cloud file {rec.cloud_path}")
        else:
            try:
                with open(cloud, "rb") as fh:
                    magic = fh.read(4)
                if magic != cloudio.MAGIC:
                    rep.fail("bad header")
                else:
                    n = cloudio.read_header(cloud)
                    if n != rec.frame_count:
                        rep.fail(f"frame count mismatch: manifest {rec.frame_count}, file {n}")
            except FormatError as e:
                msg = str(e)
                rep.fail("frame count mismatch" if "frame count mismatch" in msg else
                         "bad header" if "bad header" in msg else msg)
            except OSError as e:
                rep.fail(f"I/O error: {e}")
        if expected_hash is not None and rec.config_hash != expected_hash:
            rep.fail(f"config hash {rec.config_hash} != {expected_hash}")
        if rec.token_path is not None:
            tok = root / rec.token_path
            try:
                [int(x) for x in tok.read_text(encoding="utf-8").split()]
            except (OSError, ValueError) as e:
                rep.fail(f"token file unreadable: {e}")
        if not rec.text or not all(isinstance(t, str) and t for t in rec.text):
            rep.fail("empty text annotation")
    return ValidationReport(reports, errors)
