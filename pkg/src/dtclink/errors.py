"""Exception types shared across the toolkit."""


class DtcLinkError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DtcLinkError):
    """Invalid device or run configuration."""


class StructuralError(DtcLinkError):
    """Circuit topology violation, e.g. a subsystem cut through a coupler loop."""


class TrackingError(DtcLinkError):
    """Eigenstate labeling lost: best bare-state overlap fell below the floor."""

    def __init__(self, label, best_overlap, flux=None):
        self.label = tuple(label)
        self.best_overlap = float(best_overlap)
        self.flux = flux
        where = f" at flux {flux}" if flux is not None else ""
        super().__init__(
            f"tracking lost for bare label {self.label}{where}: "
            f"best overlap {self.best_overlap:.4f} below floor"
        )


class AccuracyError(DtcLinkError):
    """Propagation accuracy contract violated (e.g. norm drift); reduce dt."""


class GateStructureError(DtcLinkError):
    """Projected gate is not phase-correctable (diagonal entry too small)."""
