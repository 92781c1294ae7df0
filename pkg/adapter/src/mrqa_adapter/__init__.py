"""Convert MRQA gold files and n-best QA predictions into prediction records."""

from .convert import AdapterError, GoldExample, NBestEntry, convert, load_gold, load_nbest
from .normalize import exact_match, normalize_answer

__version__ = "0.1.0"
