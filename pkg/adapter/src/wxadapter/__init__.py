"""Exchange-directory bridge around an external weather model.

The driver side of the protocol writes ``input.wxs`` into a directory and
invokes this adapter with the directory path; the adapter answers with
``output.wxs`` advanced by one 6-hour step. A converter turns reanalysis
archive slices (HDF5) into ``.wxs`` snapshots. The adapter deliberately
shares no code with the driver: the byte-level file format is the whole
contract.
"""

__version__ = "0.1.0"

from .adapter import AdapterConfig, ModelLoadError, adapter_step
from .catalog import CHANNEL_NAMES
from .convert import MissingVariablesError, convert_archive
from .wxs import Snapshot, WxsFormatError, read_snapshot, write_snapshot
