"""Spectral gap certificates for frustration-free nearest-neighbour chains."""

from .certifier import GapCertificate, certify, crosscheck_exact
from .chain import ChainSpec
from .checks import paper_check
from .models import MODELS, get_model

__all__ = ["ChainSpec", "GapCertificate", "MODELS", "certify", "crosscheck_exact", "get_model", "paper_check"]
__version__ = "0.1.0"
