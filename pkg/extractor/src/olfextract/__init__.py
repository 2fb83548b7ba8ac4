"""olfextract: input-file production for the olfalign toolkit."""

__version__ = "0.1.0"

from .convert import SOURCES, convert_dataset
from .descriptors import DESCRIPTOR_NAMES, compute_descriptors, descriptor_vector
from .embeddings import ExtractionJob, JobError, extract_embeddings
from .smiles import Molecule, SmilesError, parse_smiles
