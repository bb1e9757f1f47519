class TrainBridgeError(Exception):
    """Base class for all harness failures."""


class VocabMismatch(TrainBridgeError):
    """Corpus manifest and vocabulary file disagree (or cannot be checked)."""


class CheckpointShapeMismatch(TrainBridgeError):
    """Checkpoint tensors do not fit the supplied vocabulary."""


class NotAnExtension(TrainBridgeError):
    """New vocabulary does not start with the old one's tokens."""


class EmptyCorpus(TrainBridgeError):
    """No usable records in an input file."""
