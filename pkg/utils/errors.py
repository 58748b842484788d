"""
Error types for the palm vein pipeline
Library code raises these; the scheduler turns them into {'success': False, 'error': ...} results
"""


class PalmVeinError(Exception):
    """Base class for every error raised by the pipeline"""


class DecodeError(PalmVeinError, ValueError):
    """Image bytes could not be decoded (bad header, unsupported depth or compression)"""


class ParameterError(PalmVeinError, ValueError):
    """A parameter is outside its valid range"""


class DimensionError(PalmVeinError, ValueError):
    """Array shapes do not match what an operation requires"""


class InsufficientDataError(PalmVeinError, ValueError):
    """Too few samples to fit a model"""


class TrainingError(PalmVeinError, ValueError):
    """A classifier cannot be trained on the given data"""


class DatasetError(PalmVeinError):
    """Dataset scanning, loading or caching failed"""


class ConfigError(PalmVeinError):
    """Experiment configuration is malformed"""
