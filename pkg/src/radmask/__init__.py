"""Corpus engineering and evaluation toolkit for entity-masked language
modeling on radiology reports.

Pipeline: parse reports into sections, clean them, match clinical entities
against a dictionary, extend a subword vocabulary with atomic entity tokens,
generate masked-LM corpora under random or entity-centric strategies, split
deterministically, and score with ROUGE-L / perplexity / masked accuracy.
"""

from radmask.errors import RadmaskError

__version__ = "0.1.0"

__all__ = ["RadmaskError", "__version__"]
