"""Exception and warning types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class PolygonDegenerate(PipelineError):
    """Polygon has fewer than 3 vertices or zero area."""


class DimensionMismatch(PipelineError):
    """Two buffers that must share dimensions do not."""


class ParseError(PipelineError):
    """Malformed annotation or config text."""


class RangeError(PipelineError):
    """A numeric field is outside its allowed range."""


class EmptyDirectory(PipelineError):
    """A frame directory contains no loadable images."""


class BoxOutsideImage(PipelineError):
    """A bounding box denormalizes to a region with no image overlap."""


class CodecFailure(PipelineError):
    """Image encode/decode through an external codec failed."""


class AdapterFailure(PipelineError):
    """An external detector adapter is unreachable or misbehaving."""


class NoBoxes(PipelineError):
    """No person bounding boxes available where at least one is required."""


class NoPolygons(PipelineError):
    """No clothing polygons available where at least one is required."""


class NoGradient(PipelineError):
    """The selected detector cannot provide input gradients."""


class EmptyRecords(PipelineError):
    """Summary statistics requested over zero evaluation records."""


class ConfigError(PipelineError):
    """Run configuration failed schema validation."""


class DegeneratePatchWarning(UserWarning):
    """A patch paste was clamped to the 1x1 pixel floor."""
