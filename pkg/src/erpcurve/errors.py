"""Exception hierarchy shared across the pipeline."""


class ErpCurveError(Exception):
    """Base class for all erpcurve failures."""


class ChainParseError(ErpCurveError):
    """Malformed chain file, unknown format, or bad column mapping."""


class IngestError(ErpCurveError):
    """Quote set violates ingestion preconditions or yields no usable slices."""


class CarryError(ErpCurveError):
    """Put-call parity regression infeasible or degenerate."""


class PricingError(ErpCurveError):
    """No implied volatility exists for the given price."""


class CalibrationError(ErpCurveError):
    """Density calibration could not start or failed on every restart."""


class ErpComputationError(ErpCurveError):
    """Premium evaluation would overflow; inputs are corrupt."""


class QuadratureError(ErpCurveError):
    """Brute-force integration oracle failed to converge."""


class CacheError(ErpCurveError):
    """Density cache file is missing fields or not valid JSON."""
