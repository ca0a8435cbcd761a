"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class RadarTextError(Exception):
    """Base class. ``module`` tags the pipeline stage that raised."""

    module = "radartext"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class MotionError(RadarTextError):
    module = "motion_scene"


class MotionFormatError(MotionError):
    """Raised when a motion file cannot be parsed.

    ``line`` is the 1-based line in the source document when known and
    ``field`` a JSON-path-like locator such as ``frames[3][2]``.
    """

    def __init__(self, message: str, *, path=None, line: int | None = None, field: str | None = None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class MotionValidationError(MotionError):
    pass


class ConfigError(RadarTextError):
    module = "fmcw_config"


class RaytraceError(RadarTextError):
    module = "raytrace"


class SynthError(RadarTextError):
    module = "if_synth"


class DSPError(RadarTextError):
    module = "dsp"


class TokenizerError(RadarTextError):
    module = "tokenizer_front"


class DimensionMismatchError(TokenizerError):
    pass


class VocabError(RadarTextError):
    module = "vocab_stream"


class DatasetError(RadarTextError):
    module = "dataset_io"


class FormatError(RadarTextError):
    """Bad magic bytes, truncated payloads and similar binary-format faults."""

    module = "io"
