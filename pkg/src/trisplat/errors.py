"""Exception types shared across the package."""


class TriSplatError(Exception):
    """Base class for all structured errors raised by trisplat."""

    category = "error"


class DegenerateFaceError(TriSplatError):
    """A triangle has (near-)colinear vertices and no well-defined frame."""

    category = "degenerate-face"


class InvalidTriangleError(TriSplatError):
    """Edge lengths or barycentric weights violate triangle constraints."""

    category = "invalid-triangle"


class TopologyError(TriSplatError):
    """Two meshes expected to share topology do not."""

    category = "topology"


class FileParseError(TriSplatError):
    """A file failed to parse; carries the offending line when known."""

    category = "parse"

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class SchemaError(TriSplatError):
    """Structured input (JSON, headers) is missing required fields."""

    category = "schema"


class FormatVersionError(TriSplatError):
    """A checkpoint declares an unsupported format version."""

    category = "version"


class DivergenceError(TriSplatError):
    """Optimization produced a non-finite loss."""

    category = "divergence"


class ConfigError(TriSplatError):
    """Invalid configuration or CLI arguments."""

    category = "config"
